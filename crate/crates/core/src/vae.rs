//! Gaussian VAE with a fixed decoder variance.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{squared_distance, Matrix};
use crate::mlp::{Activation, Layer, Mlp};
use crate::rng::{self, Prng};

/// Log-variances are clamped to this range before exponentiation.
pub const LOGVAR_CLAMP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub latent_dim: usize,
    pub encoder_hidden: [usize; 2],
    pub decoder_hidden: [usize; 2],
}

impl Architecture {
    /// Hidden layers [256, 128] for the encoder and [128, 256] for the decoder, 8 latents.
    pub fn standard(input_dim: usize) -> Self {
        Self {
            input_dim,
            latent_dim: 8,
            encoder_hidden: [256, 128],
            decoder_hidden: [128, 256],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeModel {
    /// d → hidden → 2n (mean head, then log-variance head)
    pub encoder: Mlp,
    /// n → hidden → d
    pub decoder: Mlp,
    pub latent_dim: usize,
    pub sigma_sq: f64,
}

impl VaeModel {
    pub fn new(encoder: Mlp, decoder: Mlp, latent_dim: usize, sigma_sq: f64) -> Result<Self> {
        let model = Self {
            encoder,
            decoder,
            latent_dim,
            sigma_sq,
        };
        model.validate()?;
        Ok(model)
    }

    /// Glorot-initialized hidden layers; the encoder's output layer starts at zero,
    /// so a fresh model's posterior equals the prior for every input.
    pub fn init(arch: &Architecture, sigma_sq: f64, seed: u64) -> Result<Self> {
        let mut r = rng::prng(seed);
        let [e1, e2] = arch.encoder_hidden;
        let [d1, d2] = arch.decoder_hidden;
        let n = arch.latent_dim;
        let encoder = Mlp::new(alloc::vec![
            Layer::glorot(arch.input_dim, e1, Activation::Relu, &mut r),
            Layer::glorot(e1, e2, Activation::Relu, &mut r),
            Layer::zeros(e2, 2 * n, Activation::Identity),
        ])?;
        let decoder = Mlp::glorot(&[n, d1, d2, arch.input_dim], &mut r)?;
        Self::new(encoder, decoder, n, sigma_sq)
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::InvalidArgument("latent_dim must be positive".into()));
        }
        if self.encoder.output_dim() != 2 * self.latent_dim {
            return Err(Error::InvalidArgument(alloc::format!(
                "encoder emits {} values, expected {}",
                self.encoder.output_dim(),
                2 * self.latent_dim
            )));
        }
        if self.decoder.input_dim() != self.latent_dim {
            return Err(Error::InvalidArgument(alloc::format!(
                "decoder takes {} inputs, expected {}",
                self.decoder.input_dim(),
                self.latent_dim
            )));
        }
        if self.decoder.output_dim() != self.encoder.input_dim() {
            return Err(Error::InvalidArgument(alloc::format!(
                "decoder emits {} values for {}-dimensional data",
                self.decoder.output_dim(),
                self.encoder.input_dim()
            )));
        }
        if !(self.sigma_sq > 0.0 && self.sigma_sq.is_finite()) {
            return Err(Error::InvalidArgument(alloc::format!(
                "sigma_sq must be positive, got {}",
                self.sigma_sq
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    /// Posterior mean and clamped log-variance.
    pub fn encode(&self, batch: &Matrix) -> Result<(Matrix, Matrix)> {
        let head = self.encoder.predict(batch)?;
        Ok(split_heads(&head, self.latent_dim))
    }

    pub fn decode(&self, z: &Matrix) -> Result<Matrix> {
        if z.cols() != self.latent_dim {
            return Err(Error::LayerShape {
                layer: 0,
                expected: self.latent_dim,
                actual: z.cols(),
            });
        }
        self.decoder.predict(z)
    }

    /// Decodes the posterior mean (ε = 0).
    pub fn reconstruct_mean(&self, batch: &Matrix) -> Result<Matrix> {
        let (mu, _) = self.encode(batch)?;
        self.decode(&mu)
    }
}

pub(crate) fn split_heads(head: &Matrix, n: usize) -> (Matrix, Matrix) {
    let rows = head.rows();
    let mu = Matrix::from_fn(rows, n, |i, j| head.get(i, j));
    let logvar = Matrix::from_fn(rows, n, |i, j| {
        head.get(i, n + j).clamp(-LOGVAR_CLAMP, LOGVAR_CLAMP)
    });
    (mu, logvar)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentBatch {
    pub mu: Matrix,
    pub logvar: Matrix,
    pub z: Matrix,
    pub eps: Matrix,
}

/// `z = μ + exp(logvar/2) ⊙ ε` with the given noise.
pub fn reparameterize(mu: &Matrix, logvar: &Matrix, eps: Matrix) -> Result<LatentBatch> {
    let (n, k) = mu.shape();
    logvar.ensure_shape("logvar", n, k)?;
    eps.ensure_shape("eps", n, k)?;
    let z = Matrix::from_fn(n, k, |i, j| {
        mu.get(i, j) + libm::exp(0.5 * logvar.get(i, j)) * eps.get(i, j)
    });
    Ok(LatentBatch {
        mu: mu.clone(),
        logvar: logvar.clone(),
        z,
        eps,
    })
}

/// Draws ε ~ N(0, I) row by row from `rng`, then reparameterizes.
pub fn reparameterize_seeded(mu: &Matrix, logvar: &Matrix, rng: &mut Prng) -> Result<LatentBatch> {
    let eps = standard_normal_matrix(mu.rows(), mu.cols(), rng);
    reparameterize(mu, logvar, eps)
}

pub fn standard_normal_matrix(rows: usize, cols: usize, rng: &mut Prng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng::standard_normal(rng))
}

/// `KL(q(z|x) ‖ N(0, I))` for each row.
pub fn kl_per_sample(mu: &Matrix, logvar: &Matrix) -> Vec<f64> {
    mu.iter_rows()
        .zip(logvar.iter_rows())
        .map(|(m, lv)| {
            0.5 * m
                .iter()
                .zip(lv)
                .map(|(m, l)| libm::exp(*l) + m * m - 1.0 - l)
                .sum::<f64>()
        })
        .collect()
}

/// Batch-mean KL to the standard normal prior.
pub fn kl_gaussian(mu: &Matrix, logvar: &Matrix) -> f64 {
    let per = kl_per_sample(mu, logvar);
    per.iter().sum::<f64>() / mu.rows().max(1) as f64
}

/// Batch-mean Gaussian negative log-likelihood with fixed variance `σ²`,
/// `‖x − x̂‖²/(2σ²) + (d/2)·ln(2πσ²)`.
pub fn recon_nll(x: &Matrix, x_hat: &Matrix, sigma_sq: f64) -> f64 {
    let d = x.cols() as f64;
    let constant = 0.5 * d * libm::log(2.0 * core::f64::consts::PI * sigma_sq);
    let sq: f64 = x
        .iter_rows()
        .zip(x_hat.iter_rows())
        .map(|(a, b)| squared_distance(a, b))
        .sum();
    sq / (2.0 * sigma_sq * x.rows().max(1) as f64) + constant
}
