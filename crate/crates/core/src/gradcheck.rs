use alloc::format;
use alloc::vec::Vec;

use crate::clustering::FeasibleInterval;
use crate::constraints::{cluster_loss, ConstraintConfig};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::mlp::Mlp;
use crate::objective::{batch_loss, loss_and_gradients, ClusterTargets, ObjectiveWeights};
use crate::rng::{self, Prng};
use crate::vae::VaeModel;

/// Central-difference gradient `(f(x + h eᵢ) − f(x − h eᵢ)) / 2h` for each coordinate.
pub fn finite_diff_gradient<F>(mut loss_fn: F, point: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    let mut x = point.to_vec();
    let mut grad = Vec::with_capacity(point.len());
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + step;
        let plus = loss_fn(&x);
        x[i] = orig - step;
        let minus = loss_fn(&x);
        x[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!("loss near coordinate {i}")));
        }
        grad.push((plus - minus) / (2.0 * step));
    }
    Ok(grad)
}

/// Outcome of [`objective_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub configurations: usize,
    pub attempts: usize,
    pub worst_relative_error: f64,
    /// `(configuration, parameter, analytic, numeric)` of the worst entry.
    pub worst_entry: (usize, usize, f64, f64),
}

fn random_mlp(sizes: &[usize], r: &mut Prng) -> Result<Mlp> {
    let mut m = Mlp::glorot(sizes, r)?;
    for l in m.layers_mut() {
        l.bias.iter_mut().for_each(|b| *b = 0.3 * rng::standard_normal(r));
    }
    Ok(m)
}

fn flat(model: &VaeModel) -> Vec<f64> {
    let mut p = model.encoder.flat_params();
    p.extend(model.decoder.flat_params());
    p
}

fn with_params(model: &VaeModel, p: &[f64]) -> Result<VaeModel> {
    let mut m = model.clone();
    let split = m.encoder.num_params();
    m.encoder.set_flat_params(&p[..split])?;
    m.decoder.set_flat_params(&p[split..])?;
    Ok(m)
}

/// Smallest |pre-activation| over hidden units.
fn min_abs_preactivation(mlp: &Mlp, x: &Matrix) -> f64 {
    let mut h = x.clone();
    let mut min = f64::INFINITY;
    let layers = mlp.layers();
    for l in &layers[..layers.len() - 1] {
        let pre = Matrix::from_fn(h.rows(), l.outputs(), |i, o| {
            l.bias[o] + l.weights.row(o).iter().zip(h.row(i)).map(|(w, v)| w * v).sum::<f64>()
        });
        min = pre.as_slice().iter().fold(min, |m, v| m.min(v.abs()));
        h = Matrix::from_fn(pre.rows(), pre.cols(), |i, j| pre.get(i, j).max(0.0));
    }
    min
}

fn sample_path(model: &VaeModel, x: &Matrix, eps: &Matrix) -> Result<(Matrix, Matrix)> {
    let (mu, lv) = model.encode(x)?;
    let z = Matrix::from_fn(mu.rows(), mu.cols(), |i, j| {
        mu.get(i, j) + libm::exp(0.5 * lv.get(i, j)) * eps.get(i, j)
    });
    let x_hat = model.decode(&z)?;
    Ok((z, x_hat))
}

/// Checks analytic gradients of the full constrained loss against central
/// differences on `configurations` small random models.
///
/// Each draw picks dimensions, a random batch and clustering, and places the
/// feasible interval below, around or above the current `l_C` in turn. Draws
/// with a hidden pre-activation within 1e-3 of the ReLU kink, a reconstruction
/// norm under 1e-2 or |log-variance| over 9 are skipped. Relative error uses
/// the floor `1e-6·(1 + |loss|)` to absorb difference round-off.
pub fn objective_sweep(seed: u64, configurations: usize, step: f64) -> Result<SweepReport> {
    let mut r = rng::prng(seed);
    let mut report = SweepReport {
        configurations: 0,
        attempts: 0,
        worst_relative_error: 0.0,
        worst_entry: (0, 0, 0.0, 0.0),
    };
    while report.configurations < configurations {
        if report.attempts >= 20 * configurations.max(50) {
            return Err(Error::InvalidArgument(format!(
                "only {} of {configurations} draws were away from kinks",
                report.configurations
            )));
        }
        let side = report.attempts % 3;
        report.attempts += 1;

        let d = 2 + rng::index(&mut r, 5);
        let n = 1 + rng::index(&mut r, 3);
        let b = 2 + rng::index(&mut r, 5);
        let k = 1 + rng::index(&mut r, 3);
        let h1 = 3 + rng::index(&mut r, 4);
        let h2 = 3 + rng::index(&mut r, 4);
        let encoder = random_mlp(&[d, h1, h2, 2 * n], &mut r)?;
        let decoder = random_mlp(&[n, h2, h1, d], &mut r)?;
        let sigma_sq = 0.2 + 2.0 * rng::uniform01(&mut r);
        let model = VaeModel::new(encoder, decoder, n, sigma_sq)?;
        let x = Matrix::from_fn(b, d, |_, _| rng::standard_normal(&mut r));
        let eps = Matrix::from_fn(b, n, |_, _| rng::standard_normal(&mut r));
        let assignments: Vec<usize> = (0..b).map(|_| rng::index(&mut r, k)).collect();
        let centers = Matrix::from_fn(k, d, |_, _| rng::standard_normal(&mut r));
        let weights = ObjectiveWeights {
            beta: 0.1 + rng::uniform01(&mut r),
            constraints: ConstraintConfig {
                lambda_boundary: 1.0 + 10.0 * rng::uniform01(&mut r),
                lambda_norm: 1.0 + 10.0 * rng::uniform01(&mut r),
                r_target: 0.925,
            },
        };

        let (_, lv) = model.encode(&x)?;
        let (z, x_hat) = sample_path(&model, &x, &eps)?;
        let min_norm = x_hat
            .iter_rows()
            .map(|row| libm::sqrt(row.iter().map(|v| v * v).sum::<f64>()))
            .fold(f64::INFINITY, f64::min);
        let kink_gap = min_abs_preactivation(&model.encoder, &x).min(min_abs_preactivation(&model.decoder, &z));
        if min_norm < 1e-2 || kink_gap < 1e-3 || lv.as_slice().iter().any(|v| v.abs() > 9.0) {
            continue;
        }

        let (l_c, _) = cluster_loss(&x_hat, &assignments, &centers)?;
        let interval = match side {
            0 => FeasibleInterval { lower: 1.5 * l_c, upper: 3.0 * l_c },
            1 => FeasibleInterval { lower: 0.5 * l_c, upper: 2.0 * l_c },
            _ => FeasibleInterval { lower: 0.2 * l_c, upper: 0.6 * l_c },
        };
        let targets = ClusterTargets { assignments: &assignments, centers: &centers, interval };

        let (breakdown, grads) = loss_and_gradients(&model, &x, &targets, &eps, &weights)?;
        let mut failure = None;
        let numeric = finite_diff_gradient(
            |p| match with_params(&model, p).and_then(|m| batch_loss(&m, &x, &targets, &eps, &weights)) {
                Ok(l) => l.total,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            },
            &flat(&model),
            step,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        let numeric = numeric?;
        let floor = 1e-6 * (1.0 + breakdown.total.abs());
        for (i, (a, f)) in grads.flatten().iter().zip(&numeric).enumerate() {
            let rel = (a - f).abs() / a.abs().max(f.abs()).max(floor);
            if !(rel <= report.worst_relative_error) {
                report.worst_relative_error = rel;
                report.worst_entry = (report.configurations, i, *a, *f);
            }
        }
        report.configurations += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square() {
        let g = finite_diff_gradient(|x| x[0] * x[0], &[3.0], 1e-5).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn constant() {
        let g = finite_diff_gradient(|_| 4.2, &[1.0, -2.0, 3.0], 1e-5).unwrap();
        assert_eq!(g, alloc::vec![0.0; 3]);
    }

    #[test]
    fn product() {
        let g = finite_diff_gradient(|x| x[0] * x[1], &[2.0, 5.0], 1e-5).unwrap();
        assert!((g[0] - 5.0).abs() < 1e-6);
        assert!((g[1] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_step_and_nan() {
        assert!(finite_diff_gradient(|x| x[0], &[1.0], 0.0).is_err());
        assert!(finite_diff_gradient(|x| libm::log(x[0]), &[0.0], 1e-5).is_err());
    }
}
