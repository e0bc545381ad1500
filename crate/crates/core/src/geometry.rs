//! Centering and the spherical-shell transform.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{norm, Matrix};
use crate::rng;

/// Rows with a centered norm below this cannot be projected onto the shell.
pub const ZERO_NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellParams {
    pub r_min: f64,
    pub r_max: f64,
}

impl Default for ShellParams {
    fn default() -> Self {
        Self {
            r_min: 0.85,
            r_max: 1.0,
        }
    }
}

impl ShellParams {
    pub fn new(r_min: f64, r_max: f64) -> Result<Self> {
        if !(r_min > 0.0 && r_min < r_max && r_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "shell radii must satisfy 0 < r_min < r_max, got ({r_min}, {r_max})"
            )));
        }
        Ok(Self { r_min, r_max })
    }

    /// Mid-shell radius, the norm target for decoder outputs.
    pub fn r_target(&self) -> f64 {
        0.5 * (self.r_min + self.r_max)
    }

    #[inline]
    pub fn radius(&self, u: f64) -> f64 {
        self.r_min + (self.r_max - self.r_min) * u
    }

    #[inline]
    pub fn contains(&self, r: f64) -> bool {
        self.r_min <= r && r <= self.r_max
    }
}

/// Samples mapped onto the shell, with everything needed to reproduce them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellDataset {
    pub data: Matrix,
    pub params: ShellParams,
    /// Global mean of the raw data, subtracted before the transform.
    pub original_mean: Vec<f64>,
    /// The per-sample draw `uᵢ` in `[0, 1)`.
    pub shell_draws: Vec<f64>,
}

impl ShellDataset {
    /// Centers `raw` and maps every row onto the shell with seeded draws.
    pub fn from_raw(raw: &Matrix, params: ShellParams, seed: u64) -> Result<Self> {
        let (centered, mean) = center(raw)?;
        let (data, draws) = shell_transform(&centered, params, seed)?;
        Ok(Self {
            data,
            params,
            original_mean: mean,
            shell_draws: draws,
        })
    }
}

/// Subtracts the global mean; returns the centered data and the mean.
pub fn center(data: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    if data.rows() == 0 {
        return Err(Error::TooFewRows {
            context: "center",
            needed: 1,
            got: 0,
        });
    }
    let mean = data.column_means();
    let mut out = data.clone();
    for i in 0..out.rows() {
        for (v, m) in out.row_mut(i).iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    Ok((out, mean))
}

/// Rescales each centered row to radius `r_min + (r_max − r_min)·uᵢ`, keeping its direction.
///
/// The `uᵢ` are drawn once, in row order, from the seeded uniform stream.
pub fn shell_transform(
    centered: &Matrix,
    params: ShellParams,
    seed: u64,
) -> Result<(Matrix, Vec<f64>)> {
    let mut r = rng::prng(seed);
    let draws: Vec<f64> = (0..centered.rows()).map(|_| rng::uniform01(&mut r)).collect();
    let data = shell_transform_with_draws(centered, params, &draws)?;
    Ok((data, draws))
}

/// Same as [`shell_transform`] with explicit draws.
pub fn shell_transform_with_draws(
    centered: &Matrix,
    params: ShellParams,
    draws: &[f64],
) -> Result<Matrix> {
    if draws.len() != centered.rows() {
        return Err(Error::AssignmentLength {
            expected: centered.rows(),
            got: draws.len(),
        });
    }
    let mut out = centered.clone();
    for (i, &u) in draws.iter().enumerate() {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::InvalidArgument(format!("shell draw {u} outside [0, 1]")));
        }
        let row = out.row_mut(i);
        let n = norm(row);
        if !(n > ZERO_NORM_TOLERANCE) {
            return Err(Error::ZeroNormRow { row: i, norm: n });
        }
        let target = params.radius(u);
        let scale = target / n;
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    Ok(out)
}

/// Euclidean norm of every row.
pub fn row_norms(data: &Matrix) -> Vec<f64> {
    data.iter_rows().map(norm).collect()
}
