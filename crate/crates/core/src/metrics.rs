//! Held-out evaluation: average KL, active units, feasible coverage and norm
//! satisfaction. Everything is computed from the posterior mean, without sampling.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::clustering::{FeasibleInterval, FeasibleRegion};
use crate::constraints::cluster_loss;
use crate::error::{Error, Result};
use crate::geometry::{row_norms, ShellParams};
use crate::matrix::{squared_distance, Matrix};
use crate::vae::{kl_per_sample, VaeModel};

pub const ACTIVE_UNIT_THRESHOLD: f64 = 0.01;
pub const COLLAPSE_KL_THRESHOLD: f64 = 0.1;
pub const COLLAPSE_ACTIVE_UNITS: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub avg_kl: f64,
    pub active_units: usize,
    pub feasible_coverage_pct: f64,
    pub norm_satisfaction_pct: f64,
    pub per_dim_variance: Vec<f64>,
    /// Mean squared reconstruction error per coordinate.
    pub recon_error: f64,
}

pub fn avg_kl(model: &VaeModel, data: &Matrix) -> Result<f64> {
    non_empty(data, "avg_kl")?;
    let (mu, lv) = model.encode(data)?;
    let per = kl_per_sample(&mu, &lv);
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

/// Population variance of the posterior mean across `data`, per latent dimension.
pub fn posterior_mean_variance(model: &VaeModel, data: &Matrix) -> Result<Vec<f64>> {
    if data.rows() < 2 {
        return Err(Error::TooFewRows {
            context: "active units",
            needed: 2,
            got: data.rows(),
        });
    }
    let (mu, _) = model.encode(data)?;
    let mean = mu.column_means();
    let mut var = vec![0.0; mu.cols()];
    for r in mu.iter_rows() {
        for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let n = mu.rows() as f64;
    var.iter_mut().for_each(|v| *v /= n);
    Ok(var)
}

/// Latent dimensions whose posterior-mean variance exceeds `threshold`.
pub fn active_units(model: &VaeModel, data: &Matrix, threshold: f64) -> Result<usize> {
    Ok(count_active(&posterior_mean_variance(model, data)?, threshold))
}

fn count_active(variances: &[f64], threshold: f64) -> usize {
    variances.iter().filter(|&&v| v > threshold).count()
}

/// Percentage of values inside the closed interval.
pub fn coverage_from_per_sample(per_sample: &[f64], interval: FeasibleInterval) -> f64 {
    if per_sample.is_empty() {
        return 0.0;
    }
    let hits = per_sample.iter().filter(|&&v| interval.contains(v)).count();
    100.0 * hits as f64 / per_sample.len() as f64
}

/// Percentage of samples whose mean-latent reconstruction has its cluster loss in `[W, δ_collapse]`.
///
/// `assignments` are the cluster indices of the rows of `data` under `region`.
pub fn feasible_coverage(
    model: &VaeModel,
    data: &Matrix,
    assignments: &[usize],
    region: &FeasibleRegion,
) -> Result<f64> {
    non_empty(data, "feasible_coverage")?;
    let x_hat = model.reconstruct_mean(data)?;
    let (_, per) = cluster_loss(&x_hat, assignments, &region.clustering.centers)?;
    Ok(coverage_from_per_sample(&per, region.interval()))
}

/// Percentage of mean-latent reconstructions with norm in `[r_min, r_max]`.
pub fn norm_satisfaction(model: &VaeModel, data: &Matrix, shell: ShellParams) -> Result<f64> {
    non_empty(data, "norm_satisfaction")?;
    let x_hat = model.reconstruct_mean(data)?;
    Ok(norm_satisfaction_of(&x_hat, shell))
}

pub fn norm_satisfaction_of(x_hat: &Matrix, shell: ShellParams) -> f64 {
    let norms = row_norms(x_hat);
    if norms.is_empty() {
        return 0.0;
    }
    let hits = norms.iter().filter(|&&r| shell.contains(r)).count();
    100.0 * hits as f64 / norms.len() as f64
}

/// Collapsed iff the average KL is below `kl_threshold` and at most `au_threshold` units are active.
pub fn collapse_verdict(result: &EvalResult, kl_threshold: f64, au_threshold: usize) -> bool {
    result.avg_kl < kl_threshold && result.active_units <= au_threshold
}

/// All metrics on one split.
pub fn evaluate(
    model: &VaeModel,
    data: &Matrix,
    assignments: &[usize],
    region: &FeasibleRegion,
    shell: ShellParams,
) -> Result<EvalResult> {
    non_empty(data, "evaluate")?;
    let (mu, lv) = model.encode(data)?;
    let kl = kl_per_sample(&mu, &lv);
    let avg_kl = kl.iter().sum::<f64>() / kl.len() as f64;
    let per_dim_variance = posterior_mean_variance(model, data)?;
    let x_hat = model.decode(&mu)?;
    let (_, per) = cluster_loss(&x_hat, assignments, &region.clustering.centers)?;
    let sq: f64 = x_hat
        .iter_rows()
        .zip(data.iter_rows())
        .map(|(a, b)| squared_distance(a, b))
        .sum();
    Ok(EvalResult {
        avg_kl,
        active_units: count_active(&per_dim_variance, ACTIVE_UNIT_THRESHOLD),
        feasible_coverage_pct: coverage_from_per_sample(&per, region.interval()),
        norm_satisfaction_pct: norm_satisfaction_of(&x_hat, shell),
        per_dim_variance,
        recon_error: sq / (data.rows() * data.cols()) as f64,
    })
}

fn non_empty(data: &Matrix, context: &'static str) -> Result<()> {
    if data.rows() == 0 {
        return Err(Error::TooFewRows {
            context,
            needed: 1,
            got: 0,
        });
    }
    Ok(())
}
