//! Seeded Gaussian-mixture data.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{norm, Matrix};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmSpec {
    pub n_samples: usize,
    pub dim: usize,
    pub n_components: usize,
    /// Radius of the sphere the component centers are placed on.
    pub component_separation: f64,
    pub component_std: f64,
    pub seed: u64,
}

impl Default for GmmSpec {
    fn default() -> Self {
        Self {
            n_samples: 5_000,
            dim: 32,
            n_components: 8,
            component_separation: 4.0,
            component_std: 0.5,
            seed: 1,
        }
    }
}

impl GmmSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_components == 0 || self.dim == 0 {
            return Err(Error::InvalidArgument("need at least one component and dimension".into()));
        }
        if !(self.component_std >= 0.0 && self.component_separation >= 0.0)
            || !self.component_std.is_finite()
            || !self.component_separation.is_finite()
        {
            return Err(Error::InvalidArgument("std and separation must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Component centers: standard normal directions scaled to `component_separation`.
pub fn gmm_centers(spec: &GmmSpec, rng: &mut rng::Prng) -> Matrix {
    let mut centers = Matrix::from_fn(spec.n_components, spec.dim, |_, _| rng::standard_normal(rng));
    for k in 0..spec.n_components {
        let row = centers.row_mut(k);
        let n = norm(row);
        let s = if n > 0.0 { spec.component_separation / n } else { 0.0 };
        row.iter_mut().for_each(|v| *v *= s);
    }
    centers
}

/// Draws `(samples, labels, centers)`: equal mixing weights, isotropic components.
///
/// The stream draws all centers first, then for every sample a component
/// index followed by `dim` normals.
pub fn synth_gmm_with_centers(spec: &GmmSpec) -> Result<(Matrix, Vec<usize>, Matrix)> {
    spec.validate()?;
    let mut r = rng::prng(spec.seed);
    let centers = gmm_centers(spec, &mut r);
    let mut labels = Vec::with_capacity(spec.n_samples);
    let mut data = Matrix::zeros(spec.n_samples, spec.dim);
    for i in 0..spec.n_samples {
        let k = rng::index(&mut r, spec.n_components);
        labels.push(k);
        let c = centers.row(k);
        for (v, m) in data.row_mut(i).iter_mut().zip(c) {
            *v = m + spec.component_std * rng::standard_normal(&mut r);
        }
    }
    Ok((data, labels, centers))
}

/// Samples and their (diagnostic-only) component labels.
pub fn synth_gmm(spec: &GmmSpec) -> Result<(Matrix, Vec<usize>)> {
    let (data, labels, _) = synth_gmm_with_centers(spec)?;
    Ok((data, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::squared_distance;

    #[test]
    fn degenerate_mixture() {
        let spec = GmmSpec {
            n_samples: 20,
            dim: 3,
            n_components: 1,
            component_std: 0.0,
            ..Default::default()
        };
        let (data, labels, centers) = synth_gmm_with_centers(&spec).unwrap();
        assert!(labels.iter().all(|&l| l == 0));
        for r in data.iter_rows() {
            assert_eq!(r, centers.row(0));
        }
        assert!((norm(centers.row(0)) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic() {
        let spec = GmmSpec::default();
        assert_eq!(synth_gmm(&spec).unwrap(), synth_gmm(&spec).unwrap());
    }

    #[test]
    fn component_means_near_centers() {
        let spec = GmmSpec {
            n_samples: 50_000,
            ..Default::default()
        };
        let (data, labels, centers) = synth_gmm_with_centers(&spec).unwrap();
        // n_k ‖m̂_k − c_k‖² / std² ~ χ²_d independently per component, so the
        // sum over components is χ² with K·d degrees of freedom.
        let dof = (spec.dim * spec.n_components) as f64;
        let mut stat = 0.0;
        for k in 0..spec.n_components {
            let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == k).collect();
            let nk = rows.len() as f64;
            assert!((nk - 50_000.0 / 8.0).abs() < 5.0 * (50_000.0f64 / 8.0).sqrt());
            let mean = data.select_rows(&rows).column_means();
            stat += nk * squared_distance(&mean, centers.row(k)) / (spec.component_std * spec.component_std);
        }
        assert!((stat - dof).abs() < 4.0 * libm::sqrt(2.0 * dof), "{stat} vs {dof}");
    }

    #[test]
    fn component_means_within_three_standard_errors_rms() {
        let spec = GmmSpec {
            n_samples: 50_000,
            ..Default::default()
        };
        let (data, labels, centers) = synth_gmm_with_centers(&spec).unwrap();
        let bound = 3.0 * spec.component_std / libm::sqrt((spec.n_samples / spec.n_components) as f64);
        for k in 0..spec.n_components {
            let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == k).collect();
            let mean = data.select_rows(&rows).column_means();
            // Root-mean-square over coordinates; the worst single coordinate of
            // 256 sits near 3 standard errors by chance alone.
            let rms = libm::sqrt(squared_distance(&mean, centers.row(k)) / spec.dim as f64);
            assert!(rms < bound, "component {k}: {rms} vs {bound}");
        }
    }

    #[test]
    fn rejects_invalid() {
        let spec = GmmSpec {
            n_components: 0,
            ..Default::default()
        };
        assert!(synth_gmm(&spec).is_err());
    }
}
