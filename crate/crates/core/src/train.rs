//! Mini-batch Adam training of the constrained objective.
//!
//! The schedule: β ramps linearly from `beta_start` to `beta_end` over
//! `beta_ramp_epochs`. With two-stage training, the first
//! `stage_one_fraction` of epochs caps β at `beta_start`; penalties stay on in
//! stage one unless `stage_one_penalties` is false. The feasible region is
//! fixed for the whole run.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::clustering::FeasibleRegion;
use crate::constraints::{ConstraintConfig, LossBreakdown};
use crate::error::{Error, Result};
use crate::geometry::ShellDataset;
use crate::matrix::Matrix;
use crate::metrics::{self, EvalResult};
use crate::objective::{loss_and_gradients, ClusterTargets, ObjectiveWeights};
use crate::optim::{Adam, AdamConfig};
use crate::rng;
use crate::spectral::{covariance_matrix, top_eigenvalue};
use crate::vae::{standard_normal_matrix, Architecture, VaeModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintVariant {
    None,
    BoundaryOnly,
    NormOnly,
    Full,
}

impl ConstraintVariant {
    pub const ALL: [ConstraintVariant; 4] = [
        ConstraintVariant::None,
        ConstraintVariant::BoundaryOnly,
        ConstraintVariant::NormOnly,
        ConstraintVariant::Full,
    ];

    pub fn uses_boundary(self) -> bool {
        matches!(self, Self::BoundaryOnly | Self::Full)
    }

    pub fn uses_norm(self) -> bool {
        matches!(self, Self::NormOnly | Self::Full)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::BoundaryOnly => "boundary_only",
            Self::NormOnly => "norm_only",
            Self::Full => "full",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub init: u64,
    pub shuffle: u64,
    pub noise: u64,
    pub shell: u64,
    pub kmeans: u64,
}

impl Seeds {
    /// Derives all five seeds from one base value.
    pub fn from_base(base: u64) -> Self {
        Self {
            init: base,
            shuffle: base.wrapping_add(1),
            noise: base.wrapping_add(2),
            shell: base.wrapping_add(3),
            kmeans: base.wrapping_add(4),
        }
    }
}

impl Default for Seeds {
    fn default() -> Self {
        Self::from_base(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta_start: f64,
    pub beta_end: f64,
    pub beta_ramp_epochs: usize,
    pub two_stage: bool,
    pub stage_one_fraction: f64,
    pub stage_one_penalties: bool,
    /// `σ² = violation_factor · λ_max`; 0 selects `sigma_sq_override`.
    pub violation_factor: f64,
    pub sigma_sq_override: Option<f64>,
    pub constraint_variant: ConstraintVariant,
    pub lambda_boundary: f64,
    pub lambda_norm: f64,
    pub latent_dim: usize,
    pub encoder_hidden: [usize; 2],
    pub decoder_hidden: [usize; 2],
    pub held_out_fraction: f64,
    pub seeds: Seeds,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 128,
            learning_rate: 1e-3,
            beta_start: 0.1,
            beta_end: 1.0,
            beta_ramp_epochs: 100,
            two_stage: true,
            stage_one_fraction: 0.6,
            stage_one_penalties: true,
            violation_factor: 5.0,
            sigma_sq_override: None,
            constraint_variant: ConstraintVariant::Full,
            lambda_boundary: 200.0,
            lambda_norm: 200.0,
            latent_dim: 8,
            encoder_hidden: [256, 128],
            decoder_hidden: [128, 256],
            held_out_fraction: 0.1,
            seeds: Seeds::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(self.beta_start >= 0.0 && self.beta_start <= self.beta_end) {
            return bad("need 0 <= beta_start <= beta_end");
        }
        if self.two_stage && !(self.stage_one_fraction > 0.0 && self.stage_one_fraction < 1.0) {
            return bad("stage_one_fraction must lie strictly between 0 and 1");
        }
        if !(self.violation_factor >= 0.0) {
            return bad("violation_factor must be non-negative");
        }
        if self.violation_factor == 0.0 && !matches!(self.sigma_sq_override, Some(s) if s > 0.0) {
            return bad("violation_factor 0 requires a positive sigma_sq_override");
        }
        if !(self.lambda_boundary >= 0.0 && self.lambda_norm >= 0.0) {
            return bad("penalty weights must be non-negative");
        }
        if !(self.held_out_fraction > 0.0 && self.held_out_fraction < 1.0) {
            return bad("held_out_fraction must lie strictly between 0 and 1");
        }
        if self.latent_dim == 0 {
            return bad("latent_dim must be positive");
        }
        Ok(())
    }

    /// Number of leading epochs in stage one (0 when two-stage training is off).
    pub fn stage_one_epochs(&self) -> usize {
        if self.two_stage {
            libm::round(self.stage_one_fraction * self.epochs as f64) as usize
        } else {
            0
        }
    }

    pub fn stage_of(&self, epoch: usize) -> u8 {
        if epoch < self.stage_one_epochs() {
            1
        } else {
            2
        }
    }

    /// Penalty weights actually applied in `stage`, after the variant switches terms off.
    pub fn effective_constraints(&self, r_target: f64, stage: u8) -> ConstraintConfig {
        let on = stage == 2 || self.stage_one_penalties;
        let v = self.constraint_variant;
        ConstraintConfig {
            lambda_boundary: if on && v.uses_boundary() { self.lambda_boundary } else { 0.0 },
            lambda_norm: if on && v.uses_norm() { self.lambda_norm } else { 0.0 },
            r_target,
        }
    }

    pub fn architecture(&self, input_dim: usize) -> Architecture {
        Architecture {
            input_dim,
            latent_dim: self.latent_dim,
            encoder_hidden: self.encoder_hidden,
            decoder_hidden: self.decoder_hidden,
        }
    }
}

/// KL weight at `epoch`.
pub fn beta_at(epoch: usize, config: &TrainConfig) -> f64 {
    let ramp = if config.beta_ramp_epochs == 0 {
        config.beta_end
    } else {
        let t = (epoch as f64 / config.beta_ramp_epochs as f64).min(1.0);
        config.beta_start + (config.beta_end - config.beta_start) * t
    };
    if config.stage_of(epoch) == 1 {
        ramp.min(config.beta_start)
    } else {
        ramp
    }
}

/// `factor · λ_max(cov(data))`.
pub fn sigma_from_violation(data: &Matrix, factor: f64) -> Result<f64> {
    if !(factor > 0.0) {
        return Err(Error::InvalidArgument(format!("violation factor must be positive, got {factor}")));
    }
    Ok(factor * largest_covariance_eigenvalue(data)?)
}

pub fn largest_covariance_eigenvalue(data: &Matrix) -> Result<f64> {
    top_eigenvalue(&covariance_matrix(data)?, 1e-13, 1_000_000)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub recon_nll: f64,
    pub kl: f64,
    pub l_c: f64,
    pub boundary_penalty: f64,
    pub norm_penalty: f64,
    pub total: f64,
    pub beta: f64,
    pub stage: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSnapshot {
    pub tss: f64,
    pub w: f64,
    pub delta_collapse: f64,
}

impl From<&FeasibleRegion> for RegionSnapshot {
    fn from(r: &FeasibleRegion) -> Self {
        Self {
            tss: r.tss,
            w: r.w,
            delta_collapse: r.delta_collapse,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub metrics: EvalResult,
    pub collapse_verdict: bool,
    pub region: RegionSnapshot,
    pub sigma_sq: f64,
    pub train_rows: usize,
    pub held_out_rows: usize,
    pub config: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub summary: TrainSummary,
}

/// Hook called after every epoch, e.g. to write checkpoints.
pub trait TrainObserver {
    fn on_epoch(&mut self, record: &EpochRecord, model: &VaeModel);
}

impl TrainObserver for () {
    fn on_epoch(&mut self, _: &EpochRecord, _: &VaeModel) {}
}

/// Seeded train/held-out split: `(train, held_out)` row indices.
///
/// Rows are shuffled with the shuffle seed; the first `round(N·fraction)`
/// (at least 2) become the held-out split.
pub fn split_indices(n: usize, held_out_fraction: f64, shuffle_seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let (train, held, _) = split_with_rng(n, held_out_fraction, shuffle_seed)?;
    Ok((train, held))
}

fn split_with_rng(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>, rng::Prng)> {
    if n < 3 {
        return Err(Error::TooFewRows {
            context: "train/held-out split",
            needed: 3,
            got: n,
        });
    }
    let mut r = rng::prng(seed);
    let mut order: Vec<usize> = (0..n).collect();
    rng::shuffle(&mut r, &mut order);
    let held = (libm::round(n as f64 * fraction) as usize).clamp(2, n - 1);
    let train = order.split_off(held);
    Ok((train, order, r))
}

/// Held-out metrics and collapse verdict for a model.
pub fn evaluate_held_out(
    model: &VaeModel,
    dataset: &ShellDataset,
    region: &FeasibleRegion,
    held_out: &[usize],
) -> Result<(EvalResult, bool)> {
    let x = dataset.data.select_rows(held_out);
    let a: Vec<usize> = held_out.iter().map(|&i| region.clustering.assignments[i]).collect();
    let result = metrics::evaluate(model, &x, &a, region, dataset.params)?;
    let verdict = metrics::collapse_verdict(
        &result,
        metrics::COLLAPSE_KL_THRESHOLD,
        metrics::COLLAPSE_ACTIVE_UNITS,
    );
    Ok((result, verdict))
}

#[derive(Default)]
struct EpochAccumulator {
    rows: usize,
    sums: LossBreakdown,
}

impl EpochAccumulator {
    fn add(&mut self, b: &LossBreakdown, rows: usize) {
        let w = rows as f64;
        self.rows += rows;
        self.sums.recon_nll += w * b.recon_nll;
        self.sums.kl += w * b.kl;
        self.sums.l_c += w * b.l_c;
        self.sums.boundary_penalty += w * b.boundary_penalty;
        self.sums.norm_penalty += w * b.norm_penalty;
        self.sums.total += w * b.total;
    }

    fn record(&self, epoch: usize, beta: f64, stage: u8) -> EpochRecord {
        let inv = 1.0 / self.rows.max(1) as f64;
        EpochRecord {
            epoch,
            recon_nll: self.sums.recon_nll * inv,
            kl: self.sums.kl * inv,
            l_c: self.sums.l_c * inv,
            boundary_penalty: self.sums.boundary_penalty * inv,
            norm_penalty: self.sums.norm_penalty * inv,
            total: self.sums.total * inv,
            beta,
            stage,
        }
    }
}

fn nonfinite_component(b: &LossBreakdown) -> Option<&'static str> {
    [
        ("recon_nll", b.recon_nll),
        ("kl", b.kl),
        ("l_c", b.l_c),
        ("boundary_penalty", b.boundary_penalty),
        ("norm_penalty", b.norm_penalty),
        ("total", b.total),
    ]
    .into_iter()
    .find(|(_, v)| !v.is_finite())
    .map(|(n, _)| n)
}

/// Trains a fresh model on `dataset` against the frozen `region`.
///
/// Epoch records are sample-weighted means of the per-batch loss terms.
/// The returned report carries held-out metrics.
pub fn train(
    dataset: &ShellDataset,
    region: &FeasibleRegion,
    config: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<(VaeModel, TrainReport)> {
    config.validate()?;
    let data = &dataset.data;
    let n = data.rows();
    let assignments = &region.clustering.assignments;
    if assignments.len() != n {
        return Err(Error::AssignmentLength {
            expected: n,
            got: assignments.len(),
        });
    }
    region
        .clustering
        .centers
        .ensure_shape("region centers", region.clustering.k, data.cols())?;

    let sigma_sq = if config.violation_factor > 0.0 {
        sigma_from_violation(data, config.violation_factor)?
    } else {
        config.sigma_sq_override.unwrap_or(0.0)
    };
    let mut model = VaeModel::init(&config.architecture(data.cols()), sigma_sq, config.seeds.init)?;
    let (mut train_rows, held_out, mut shuffle_rng) =
        split_with_rng(n, config.held_out_fraction, config.seeds.shuffle)?;
    let mut noise_rng = rng::prng(config.seeds.noise);
    let num_params = model.encoder.num_params() + model.decoder.num_params();
    let mut adam = Adam::new(
        num_params,
        AdamConfig {
            lr: config.learning_rate,
            ..AdamConfig::default()
        },
    );
    let r_target = dataset.params.r_target();
    let interval = region.interval();
    let centers = &region.clustering.centers;

    let mut records = Vec::with_capacity(config.epochs);
    let mut batch_assign = Vec::with_capacity(config.batch_size);
    for epoch in 0..config.epochs {
        let stage = config.stage_of(epoch);
        let weights = ObjectiveWeights {
            beta: beta_at(epoch, config),
            constraints: config.effective_constraints(r_target, stage),
        };
        rng::shuffle(&mut shuffle_rng, &mut train_rows);
        let mut acc = EpochAccumulator::default();
        for (batch_idx, chunk) in train_rows.chunks(config.batch_size).enumerate() {
            let x = data.select_rows(chunk);
            batch_assign.clear();
            batch_assign.extend(chunk.iter().map(|&i| assignments[i]));
            let eps = standard_normal_matrix(chunk.len(), model.latent_dim, &mut noise_rng);
            let targets = ClusterTargets {
                assignments: &batch_assign,
                centers,
                interval,
            };
            let (breakdown, grads) = loss_and_gradients(&model, &x, &targets, &eps, &weights)
                .map_err(|e| match e {
                    Error::NonFinite(component) => Error::NonFiniteLoss {
                        epoch,
                        batch: batch_idx,
                        component,
                    },
                    other => other,
                })?;
            if let Some(component) = nonfinite_component(&breakdown) {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                    component: component.into(),
                });
            }
            let VaeModel {
                encoder, decoder, ..
            } = &mut model;
            let params = encoder.params_mut().chain(decoder.params_mut());
            let g = grads.encoder.iter().chain(grads.decoder.iter());
            adam.step(params.zip(g));
            acc.add(&breakdown, chunk.len());
        }
        let record = acc.record(epoch, weights.beta, stage);
        observer.on_epoch(&record, &model);
        records.push(record);
    }

    let (metrics, collapse_verdict) = evaluate_held_out(&model, dataset, region, &held_out)?;
    let report = TrainReport {
        epochs: records,
        summary: TrainSummary {
            metrics,
            collapse_verdict,
            region: region.into(),
            sigma_sq,
            train_rows: train_rows.len(),
            held_out_rows: held_out.len(),
            config: config.clone(),
        },
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_schedule_endpoints() {
        let cfg = TrainConfig {
            two_stage: false,
            ..Default::default()
        };
        assert_eq!(beta_at(0, &cfg), 0.1);
        assert_eq!(beta_at(100, &cfg), 1.0);
        assert_eq!(beta_at(250, &cfg), 1.0);
        assert!((beta_at(50, &cfg) - 0.55).abs() < 1e-15);
    }

    #[test]
    fn stage_one_caps_beta() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.stage_one_epochs(), 60);
        for e in 0..60 {
            assert_eq!(beta_at(e, &cfg), cfg.beta_start);
            assert_eq!(cfg.stage_of(e), 1);
        }
        assert_eq!(cfg.stage_of(60), 2);
        assert!((beta_at(60, &cfg) - 0.64).abs() < 1e-12);
    }

    #[test]
    fn variants_switch_penalties() {
        let mut cfg = TrainConfig::default();
        let cases = [
            (ConstraintVariant::None, 0.0, 0.0),
            (ConstraintVariant::BoundaryOnly, 200.0, 0.0),
            (ConstraintVariant::NormOnly, 0.0, 200.0),
            (ConstraintVariant::Full, 200.0, 200.0),
        ];
        for (v, b, n) in cases {
            cfg.constraint_variant = v;
            let c = cfg.effective_constraints(0.925, 2);
            assert_eq!((c.lambda_boundary, c.lambda_norm), (b, n));
        }
        cfg.stage_one_penalties = false;
        let c = cfg.effective_constraints(0.925, 1);
        assert_eq!((c.lambda_boundary, c.lambda_norm), (0.0, 0.0));
    }

    #[test]
    fn config_validation() {
        let ok = TrainConfig::default();
        assert!(ok.validate().is_ok());
        let bad = TrainConfig {
            beta_start: 2.0,
            ..ok.clone()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            stage_one_fraction: 1.0,
            ..ok.clone()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            violation_factor: 0.0,
            sigma_sq_override: None,
            ..ok
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn split_is_seeded_partition() {
        let (a, b) = split_indices(100, 0.1, 7).unwrap();
        assert_eq!(b.len(), 10);
        assert_eq!(a.len(), 90);
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(split_indices(100, 0.1, 7).unwrap(), (a, b));
        assert!(split_indices(2, 0.1, 0).is_err());
    }

    #[test]
    fn violation_sigma() {
        let diag = Matrix::from_fn(4, 2, |i, j| match (i, j) {
            (0, 0) => 3f64.sqrt(),
            (1, 0) => -(3f64.sqrt()),
            (2, 1) => 1.0,
            (3, 1) => -1.0,
            _ => 0.0,
        });
        // cov = diag(1.5, 0.5)
        let s1 = sigma_from_violation(&diag, 1.0).unwrap();
        assert!((s1 - 1.5).abs() < 1e-12);
        let s2 = sigma_from_violation(&diag, 2.0).unwrap();
        let s5 = sigma_from_violation(&diag, 5.0).unwrap();
        assert_eq!(s5, 2.5 * s2);
        assert!(sigma_from_violation(&diag, 0.0).is_err());
    }

    #[test]
    fn violation_sigma_on_sampled_spectra() {
        let mut r = crate::rng::prng(11);
        let iso = Matrix::from_fn(10_000, 2, |_, _| crate::rng::standard_normal(&mut r));
        let s = sigma_from_violation(&iso, 2.0).unwrap();
        assert!((s - 2.0).abs() < 0.1, "{s}");
        let scaled = Matrix::from_fn(10_000, 2, |_, j| {
            let z = crate::rng::standard_normal(&mut r);
            if j == 0 { 3f64.sqrt() * z } else { z }
        });
        let s = sigma_from_violation(&scaled, 1.0).unwrap();
        assert!((s - 3.0).abs() < 0.15, "{s}");
    }
}
