//! Cluster-aware reconstruction loss and the two penalty terms.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::clustering::FeasibleInterval;
use crate::error::{Error, Result};
use crate::matrix::{norm, squared_distance, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintConfig {
    pub lambda_boundary: f64,
    pub lambda_norm: f64,
    pub r_target: f64,
}

impl Default for ConstraintConfig {
    fn default() -> Self {
        Self {
            lambda_boundary: 200.0,
            lambda_norm: 200.0,
            r_target: 0.925,
        }
    }
}

impl ConstraintConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_boundary >= 0.0 && self.lambda_norm >= 0.0) {
            return Err(Error::InvalidArgument("penalty weights must be non-negative".into()));
        }
        if !(self.r_target > 0.0) {
            return Err(Error::InvalidArgument("r_target must be positive".into()));
        }
        Ok(())
    }
}

/// Every term of the training objective for one batch.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub recon_nll: f64,
    pub kl: f64,
    pub boundary_penalty: f64,
    pub norm_penalty: f64,
    pub total: f64,
    pub l_c: f64,
}

/// Unweighted loss terms, before `total_loss` combines them.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub recon_nll: f64,
    pub kl: f64,
    pub l_c: f64,
    pub boundary_penalty: f64,
    pub norm_penalty: f64,
}

/// Mean squared distance from each reconstruction to the center of its input's cluster.
///
/// Returns the batch mean and the per-sample values.
pub fn cluster_loss(
    x_hat: &Matrix,
    assignments: &[usize],
    centers: &Matrix,
) -> Result<(f64, Vec<f64>)> {
    if assignments.len() != x_hat.rows() {
        return Err(Error::AssignmentLength {
            expected: x_hat.rows(),
            got: assignments.len(),
        });
    }
    if centers.cols() != x_hat.cols() {
        return Err(Error::Shape {
            context: "cluster centers",
            expected_rows: centers.rows(),
            expected_cols: x_hat.cols(),
            rows: centers.rows(),
            cols: centers.cols(),
        });
    }
    let mut per_sample = Vec::with_capacity(x_hat.rows());
    for (i, (row, &a)) in x_hat.iter_rows().zip(assignments).enumerate() {
        if a >= centers.rows() {
            return Err(Error::AssignmentOutOfRange {
                index: i,
                cluster: a,
                k: centers.rows(),
            });
        }
        per_sample.push(squared_distance(row, centers.row(a)));
    }
    let l_c = per_sample.iter().sum::<f64>() / x_hat.rows().max(1) as f64;
    Ok((l_c, per_sample))
}

/// `max(0, W − l_c) + max(0, l_c − δ_collapse)`.
pub fn boundary_penalty(l_c: f64, interval: FeasibleInterval) -> f64 {
    (interval.lower - l_c).max(0.0) + (l_c - interval.upper).max(0.0)
}

/// dP/dl_c: −1 below the interval, +1 above, 0 inside and at both kinks.
pub fn boundary_penalty_slope(l_c: f64, interval: FeasibleInterval) -> f64 {
    let mut s = 0.0;
    if l_c < interval.lower {
        s -= 1.0;
    }
    if l_c > interval.upper {
        s += 1.0;
    }
    s
}

/// Batch mean of `(‖x̂ᵢ‖ − r_target)²`.
pub fn norm_penalty(x_hat: &Matrix, r_target: f64) -> f64 {
    let total: f64 = x_hat
        .iter_rows()
        .map(|r| {
            let dev = norm(r) - r_target;
            dev * dev
        })
        .sum();
    total / x_hat.rows().max(1) as f64
}

/// Adds `scale · d(norm_penalty)/dx̂` into `out`; the gradient at a zero row is taken as 0.
pub fn accumulate_norm_penalty_grad(x_hat: &Matrix, r_target: f64, scale: f64, out: &mut Matrix) {
    let inv_b = 1.0 / x_hat.rows().max(1) as f64;
    for i in 0..x_hat.rows() {
        let row = x_hat.row(i);
        let n = norm(row);
        if n == 0.0 {
            continue;
        }
        let coef = scale * 2.0 * (n - r_target) / n * inv_b;
        for (o, v) in out.row_mut(i).iter_mut().zip(row) {
            *o += coef * v;
        }
    }
}

/// Adds `scale · d(l_c)/dx̂` into `out`.
pub fn accumulate_cluster_loss_grad(
    x_hat: &Matrix,
    assignments: &[usize],
    centers: &Matrix,
    scale: f64,
    out: &mut Matrix,
) {
    let coef = scale * 2.0 / x_hat.rows().max(1) as f64;
    for (i, &a) in assignments.iter().enumerate() {
        let c = centers.row(a);
        for ((o, v), m) in out.row_mut(i).iter_mut().zip(x_hat.row(i)).zip(c) {
            *o += coef * (v - m);
        }
    }
}

/// `recon_nll + β·kl + λ_boundary·P_boundary + λ_norm·P_norm`.
pub fn total_loss(parts: LossParts, config: &ConstraintConfig, beta: f64) -> Result<LossBreakdown> {
    let named = [
        ("recon_nll", parts.recon_nll),
        ("kl", parts.kl),
        ("l_c", parts.l_c),
        ("boundary_penalty", parts.boundary_penalty),
        ("norm_penalty", parts.norm_penalty),
    ];
    for (name, v) in named {
        if !v.is_finite() {
            return Err(Error::NonFinite(name.into()));
        }
    }
    let total = parts.recon_nll
        + beta * parts.kl
        + config.lambda_boundary * parts.boundary_penalty
        + config.lambda_norm * parts.norm_penalty;
    Ok(LossBreakdown {
        recon_nll: parts.recon_nll,
        kl: parts.kl,
        boundary_penalty: parts.boundary_penalty,
        norm_penalty: parts.norm_penalty,
        total,
        l_c: parts.l_c,
    })
}
