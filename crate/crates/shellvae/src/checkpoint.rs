//! Binary model checkpoints.
//!
//! Layout (little-endian): magic `SVAECKPT`, `u32` version, `u64` latent
//! dimension, `f64` σ², five `u64` seeds (init, shuffle, noise, shell,
//! k-means), `f64` held-out fraction, `u64` epochs completed, then the
//! encoder and decoder. Each network is a `u32` layer count followed by, per
//! layer, `u64` inputs, `u64` outputs, `u8` activation (0 ReLU, 1 identity),
//! the `outputs × inputs` weights row-major and the `outputs` biases. Floats
//! are stored as raw IEEE-754 bits, so a save/load round trip is bit-exact.

use std::path::Path;

use shellvae_core::mlp::{Activation, Layer, Mlp};
use shellvae_core::{Matrix, Seeds, VaeModel};

use crate::binio::{put_f64s, put_u32, put_u64, write_atomic, Reader};
use crate::error::{format_err, io_err, Error, Result};

const MAGIC: &[u8; 8] = b"SVAECKPT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: VaeModel,
    pub seeds: Seeds,
    pub held_out_fraction: f64,
    pub epochs_completed: usize,
}

fn put_mlp(out: &mut Vec<u8>, mlp: &Mlp) {
    put_u32(out, mlp.layers().len() as u32);
    for l in mlp.layers() {
        put_u64(out, l.inputs() as u64);
        put_u64(out, l.outputs() as u64);
        out.push(match l.activation {
            Activation::Relu => 0,
            Activation::Identity => 1,
        });
        put_f64s(out, l.weights.as_slice());
        put_f64s(out, &l.bias);
    }
}

fn read_mlp(r: &mut Reader<'_>, path: &Path) -> Result<Mlp> {
    let n = r.u32()? as usize;
    let mut layers = Vec::with_capacity(n.min(64));
    for _ in 0..n {
        let inputs = r.usize()?;
        let outputs = r.usize()?;
        let activation = match r.u8()? {
            0 => Activation::Relu,
            1 => Activation::Identity,
            v => return Err(format_err(path, format!("unknown activation tag {v}"))),
        };
        let len = inputs
            .checked_mul(outputs)
            .ok_or_else(|| format_err(path, "layer shape overflows"))?;
        let weights = Matrix::new(outputs, inputs, r.f64s(len)?)?;
        let bias = r.f64s(outputs)?;
        layers.push(Layer::new(weights, bias, activation)?);
    }
    Ok(Mlp::new(layers)?)
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        put_u64(&mut out, self.model.latent_dim as u64);
        put_u64(&mut out, self.model.sigma_sq.to_bits());
        let s = self.seeds;
        for seed in [s.init, s.shuffle, s.noise, s.shell, s.kmeans] {
            put_u64(&mut out, seed);
        }
        put_u64(&mut out, self.held_out_fraction.to_bits());
        put_u64(&mut out, self.epochs_completed as u64);
        put_mlp(&mut out, &self.model.encoder);
        put_mlp(&mut out, &self.model.decoder);
        out
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader::new(bytes, path);
        r.expect_magic(MAGIC)?;
        let version = r.u32()?;
        if version != VERSION {
            return Err(format_err(path, format!("unsupported checkpoint version {version}")));
        }
        let latent_dim = r.usize()?;
        let sigma_sq = r.f64()?;
        let seeds = Seeds {
            init: r.u64()?,
            shuffle: r.u64()?,
            noise: r.u64()?,
            shell: r.u64()?,
            kmeans: r.u64()?,
        };
        let held_out_fraction = r.f64()?;
        let epochs_completed = r.usize()?;
        let encoder = read_mlp(&mut r, path)?;
        let decoder = read_mlp(&mut r, path)?;
        r.finish()?;
        let model = VaeModel::new(encoder, decoder, latent_dim, sigma_sq)
            .map_err(|e| format_err(path, e.to_string()))?;
        Ok(Self {
            model,
            seeds,
            held_out_fraction,
            epochs_completed,
        })
    }

    /// Atomic write: temp file then rename.
    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.encode())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(io_err(path))?;
        Self::decode(&bytes, path)
    }

    /// Refuses a checkpoint whose input width differs from the data's.
    pub fn check_input_dim(&self, dim: usize) -> Result<()> {
        if self.model.input_dim() != dim {
            return Err(Error::Incompatible(format!(
                "model expects {}-dimensional inputs, data has {dim} columns",
                self.model.input_dim()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use shellvae_core::vae::Architecture;

    fn checkpoint() -> Checkpoint {
        let arch = Architecture {
            input_dim: 5,
            latent_dim: 2,
            encoder_hidden: [7, 4],
            decoder_hidden: [4, 6],
        };
        let mut model = VaeModel::init(&arch, 0.123456789, 11).unwrap();
        // Make the zero-initialized head nonzero so it is exercised too.
        let head = model.encoder.layers_mut().last_mut().unwrap();
        head.bias[0] = -1.0e-310;
        head.weights.set(1, 2, 0.1 + 0.2);
        Checkpoint {
            model,
            seeds: Seeds::from_base(u64::MAX - 2),
            held_out_fraction: 0.1,
            epochs_completed: 42,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = checkpoint();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ckpt");
        ck.write(&p).unwrap();
        let back = Checkpoint::read(&p).unwrap();
        assert_eq!(back.encode(), ck.encode());
        let bits = |m: &VaeModel| {
            let mut v = m.encoder.flat_params();
            v.extend(m.decoder.flat_params());
            v.push(m.sigma_sq);
            v.into_iter().map(f64::to_bits).collect::<Vec<_>>()
        };
        assert_eq!(bits(&back.model), bits(&ck.model));
        assert_eq!(back.seeds, ck.seeds);
        assert_eq!(back.epochs_completed, 42);
        assert!(!dir.path().join("m.ckpt.tmp").exists());
    }

    #[test]
    fn damaged_checkpoints_fail() {
        let bytes = checkpoint().encode();
        let p = Path::new("c");
        assert!(matches!(Checkpoint::decode(&bytes[..bytes.len() - 3], p), Err(Error::Truncated { .. })));
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(Checkpoint::decode(&bad, p).is_err());
        // Latent size that does not match the encoder head.
        let mut bad = bytes;
        bad[12] = 3;
        assert!(matches!(Checkpoint::decode(&bad, p), Err(Error::Format { .. })));
    }

    #[test]
    fn input_width_is_checked() {
        let ck = checkpoint();
        assert!(ck.check_input_dim(5).is_ok());
        assert!(matches!(ck.check_input_dim(6), Err(Error::Incompatible(_))));
    }
}
