//! The full training objective for one batch, with its exact gradient.
//!
//! Forward: `x → encoder → (μ, logvar) → z = μ + e^{logvar/2} ε → decoder → x̂`.
//! Backward combines the reconstruction, KL, cluster-loss hinge and norm
//! penalty gradients at `x̂`, pushes them through the decoder, adds the KL
//! terms at `(μ, logvar)` and pushes the result through the encoder.

use serde::{Deserialize, Serialize};

use crate::clustering::FeasibleInterval;
use crate::constraints::{
    accumulate_cluster_loss_grad, accumulate_norm_penalty_grad, boundary_penalty,
    boundary_penalty_slope, cluster_loss, norm_penalty, total_loss, ConstraintConfig,
    LossBreakdown, LossParts,
};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::mlp::{Gradients, Tape};
use crate::vae::{kl_gaussian, recon_nll, split_heads, VaeModel, LOGVAR_CLAMP};

/// Weights in force for one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub beta: f64,
    pub constraints: ConstraintConfig,
}

/// Cluster information the penalties need for a batch.
#[derive(Debug, Clone, Copy)]
pub struct ClusterTargets<'a> {
    pub assignments: &'a [usize],
    pub centers: &'a Matrix,
    pub interval: FeasibleInterval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaeGradients {
    pub encoder: Gradients,
    pub decoder: Gradients,
}

impl VaeGradients {
    /// Encoder parameters first, then decoder, each in flat-parameter order.
    pub fn flatten(&self) -> alloc::vec::Vec<f64> {
        let mut v = self.encoder.flatten();
        v.extend(self.decoder.flatten());
        v
    }
}

struct ForwardPass {
    enc_tape: Tape,
    dec_tape: Tape,
    head: Matrix,
    mu: Matrix,
    logvar: Matrix,
    x_hat: Matrix,
    breakdown: LossBreakdown,
}

fn forward(
    model: &VaeModel,
    x: &Matrix,
    targets: &ClusterTargets<'_>,
    eps: &Matrix,
    weights: &ObjectiveWeights,
) -> Result<ForwardPass> {
    let n = model.latent_dim;
    eps.ensure_shape("eps", x.rows(), n)?;
    let (head, enc_tape) = model.encoder.forward(x)?;
    let (mu, logvar) = split_heads(&head, n);
    let z = Matrix::from_fn(x.rows(), n, |i, j| {
        mu.get(i, j) + libm::exp(0.5 * logvar.get(i, j)) * eps.get(i, j)
    });
    let (x_hat, dec_tape) = model.decoder.forward(&z)?;
    let (l_c, _) = cluster_loss(&x_hat, targets.assignments, targets.centers)?;
    let parts = LossParts {
        recon_nll: recon_nll(x, &x_hat, model.sigma_sq),
        kl: kl_gaussian(&mu, &logvar),
        l_c,
        boundary_penalty: boundary_penalty(l_c, targets.interval),
        norm_penalty: norm_penalty(&x_hat, weights.constraints.r_target),
    };
    let breakdown = total_loss(parts, &weights.constraints, weights.beta)?;
    Ok(ForwardPass {
        enc_tape,
        dec_tape,
        head,
        mu,
        logvar,
        x_hat,
        breakdown,
    })
}

/// Loss breakdown only; used by finite-difference checks and evaluation.
pub fn batch_loss(
    model: &VaeModel,
    x: &Matrix,
    targets: &ClusterTargets<'_>,
    eps: &Matrix,
    weights: &ObjectiveWeights,
) -> Result<LossBreakdown> {
    Ok(forward(model, x, targets, eps, weights)?.breakdown)
}

/// Loss breakdown and the gradient of `total` with respect to every parameter.
pub fn loss_and_gradients(
    model: &VaeModel,
    x: &Matrix,
    targets: &ClusterTargets<'_>,
    eps: &Matrix,
    weights: &ObjectiveWeights,
) -> Result<(LossBreakdown, VaeGradients)> {
    let fp = forward(model, x, targets, eps, weights)?;
    let b = x.rows();
    let n = model.latent_dim;
    let inv_b = 1.0 / b.max(1) as f64;
    let c = &weights.constraints;

    // dTotal/dx̂
    let mut d_xhat = Matrix::zeros(b, x.cols());
    let recon_coef = inv_b / model.sigma_sq;
    for i in 0..b {
        for ((g, xh), xv) in d_xhat.row_mut(i).iter_mut().zip(fp.x_hat.row(i)).zip(x.row(i)) {
            *g = recon_coef * (xh - xv);
        }
    }
    let slope = boundary_penalty_slope(fp.breakdown.l_c, targets.interval);
    if slope != 0.0 && c.lambda_boundary != 0.0 {
        accumulate_cluster_loss_grad(
            &fp.x_hat,
            targets.assignments,
            targets.centers,
            c.lambda_boundary * slope,
            &mut d_xhat,
        );
    }
    if c.lambda_norm != 0.0 {
        accumulate_norm_penalty_grad(&fp.x_hat, c.r_target, c.lambda_norm, &mut d_xhat);
    }

    let (dec_grads, d_z) = model.decoder.backward(&fp.dec_tape, &d_xhat)?;

    // dTotal/d(encoder head): mean half then log-variance half.
    let mut d_head = Matrix::zeros(b, 2 * n);
    for i in 0..b {
        for j in 0..n {
            let mu = fp.mu.get(i, j);
            let lv = fp.logvar.get(i, j);
            let dz = d_z.get(i, j);
            let std = libm::exp(0.5 * lv);
            let d_mu = dz + weights.beta * mu * inv_b;
            let raw = fp.head.get(i, n + j);
            let d_lv = if raw.abs() > LOGVAR_CLAMP {
                0.0
            } else {
                dz * eps.get(i, j) * 0.5 * std + weights.beta * 0.5 * (libm::exp(lv) - 1.0) * inv_b
            };
            d_head.set(i, j, d_mu);
            d_head.set(i, n + j, d_lv);
        }
    }
    let (enc_grads, _) = model.encoder.backward(&fp.enc_tape, &d_head)?;

    let all_finite = enc_grads.iter().chain(dec_grads.iter()).all(f64::is_finite);
    if !all_finite {
        return Err(Error::NonFinite("gradient".into()));
    }
    Ok((
        fp.breakdown,
        VaeGradients {
            encoder: enc_grads,
            decoder: dec_grads,
        },
    ))
}
