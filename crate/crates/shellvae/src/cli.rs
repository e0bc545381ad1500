//! The `shellvae` command line.
//!
//! Exit status: 0 success, 1 usage error, 2 data or parse error,
//! 3 verification failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use shellvae_core::constraints::cluster_loss;
use shellvae_core::rng;
use shellvae_core::synth::{synth_gmm, GmmSpec};
use shellvae_core::train::{evaluate_held_out, split_indices, EpochRecord, TrainObserver};
use shellvae_core::{
    metrics, train, ConstraintVariant, KMeansConfig, Matrix, Seeds, ShellDataset, ShellParams,
    TrainConfig, VaeModel,
};

use crate::checkpoint::Checkpoint;
use crate::dataset::{read_dataset, Dataset};
use crate::error::{io_err, Error};
use crate::idx::load_idx;
use crate::manifest::RunManifest;
use crate::region::RegionFile;
use crate::report::{prepare_dir, write_csv, write_json, write_series};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

/// Tolerance for the collapse/ideal decoder checks of `verify-theorem`.
pub const THEOREM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "shellvae", version, about = "Collapse-resistant VAE training on spherical-shell data")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded Gaussian-mixture dataset file.
    Synth(SynthArgs),
    /// Convert IDX image (and label) files into a dataset file.
    ImportIdx(ImportIdxArgs),
    /// Shell-transform and cluster a dataset; write the feasible region.
    Cluster(ClusterArgs),
    /// Train a model against a region; write report, series, manifest and checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint.
    Eval(EvalArgs),
    /// Train all four constraint variants under shared seeds.
    Ablate(AblateArgs),
    /// Check the collapse-exclusion argument numerically on a region.
    VerifyTheorem(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    #[arg(long, default_value_t = 8)]
    pub components: usize,
    /// Radius of the sphere holding the component centers.
    #[arg(long, default_value_t = 4.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 0.5)]
    pub std: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ImportIdxArgs {
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Keep a seeded random subset of this many images (0 keeps all).
    #[arg(long, default_value_t = 5000)]
    pub subset: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub k: usize,
    #[arg(long, default_value_t = 0.85)]
    pub rmin: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rmax: f64,
    /// Base seed; the shell and k-means seeds derive from it unless given.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub shell_seed: Option<u64>,
    #[arg(long)]
    pub kmeans_seed: Option<u64>,
    #[arg(long, default_value_t = 300)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Cluster the data as given, skipping centering and the shell transform.
    #[arg(long)]
    pub raw: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        self == Switch::On
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    None,
    #[value(alias = "boundary_only")]
    Boundary,
    #[value(alias = "norm_only")]
    Norm,
    Full,
}

impl From<VariantArg> for ConstraintVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::None => ConstraintVariant::None,
            VariantArg::Boundary => ConstraintVariant::BoundaryOnly,
            VariantArg::Norm => ConstraintVariant::NormOnly,
            VariantArg::Full => ConstraintVariant::Full,
        }
    }
}

/// Objective and optimizer settings shared by `train` and `ablate`.
#[derive(Debug, Args)]
pub struct ObjectiveArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub region: PathBuf,
    /// σ² = violation · λ_max of the shell data's covariance; 0 uses --sigma-sq.
    #[arg(long)]
    pub violation: Option<f64>,
    #[arg(long)]
    pub sigma_sq: Option<f64>,
    #[arg(long, default_value_t = 200.0)]
    pub lambda_boundary: f64,
    #[arg(long, default_value_t = 200.0)]
    pub lambda_norm: f64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.1)]
    pub beta_start: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta_end: f64,
    #[arg(long, default_value_t = 100)]
    pub beta_ramp: usize,
    #[arg(long, value_enum, default_value_t = Switch::On)]
    pub two_stage: Switch,
    #[arg(long, default_value_t = 0.6)]
    pub stage_one_fraction: f64,
    #[arg(long, value_enum, default_value_t = Switch::On)]
    pub stage_one_penalties: Switch,
    #[arg(long, default_value_t = 8)]
    pub latent_dim: usize,
    #[arg(long, default_value_t = 0.1)]
    pub held_out: f64,
    /// Create missing output directories.
    #[arg(long)]
    pub create_dirs: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub objective: ObjectiveArgs,
    #[arg(long, value_enum, default_value_t = VariantArg::Full)]
    pub variant: VariantArg,
    /// Base seed for initialization, shuffling and reparameterization noise.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub init_seed: Option<u64>,
    #[arg(long)]
    pub shuffle_seed: Option<u64>,
    #[arg(long)]
    pub noise_seed: Option<u64>,
    /// Write a checkpoint every k epochs (0: only at the end).
    #[arg(long, default_value_t = 0)]
    pub checkpoint_every: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub region: PathBuf,
    /// Evaluate on every row instead of the checkpoint's held-out split.
    #[arg(long)]
    pub all: bool,
    /// Print only the JSON result.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub objective: ObjectiveArgs,
    /// Base seeds; each yields one run per variant.
    #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1, 2])]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub region: PathBuf,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug)]
pub enum Failure {
    Data(Error),
    Verification(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

impl From<shellvae_core::Error> for Failure {
    fn from(e: shellvae_core::Error) -> Self {
        Failure::Data(e.into())
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Data(_) => EXIT_DATA,
            Failure::Verification(_) => EXIT_VERIFY,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Data(e) => write!(f, "{e}"),
            Failure::Verification(m) => write!(f, "verification failed: {m}"),
        }
    }
}

type CmdResult = Result<(), Failure>;

/// Parses `args` and runs the command, returning the process exit status.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match run(cli.command, out) {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {f}");
            f.exit_code()
        }
    }
}

pub fn run(command: Command, out: &mut dyn Write) -> CmdResult {
    match command {
        Command::Synth(a) => synth(a, out),
        Command::ImportIdx(a) => import_idx(a, out),
        Command::Cluster(a) => cluster(a, out),
        Command::Train(a) => train_cmd(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Ablate(a) => ablate(a, out),
        Command::VerifyTheorem(a) => verify_theorem(a, out),
    }
}

fn say(out: &mut dyn Write, text: std::fmt::Arguments<'_>) -> CmdResult {
    out.write_fmt(text)
        .and_then(|_| out.write_all(b"\n"))
        .map_err(|e| Failure::Data(io_err(Path::new("<stdout>"))(e)))
}

macro_rules! say {
    ($out:expr, $($t:tt)*) => { say($out, format_args!($($t)*)) };
}

fn synth(a: SynthArgs, out: &mut dyn Write) -> CmdResult {
    let spec = GmmSpec {
        n_samples: a.n,
        dim: a.dim,
        n_components: a.components,
        component_separation: a.separation,
        component_std: a.std,
        seed: a.seed,
    };
    let (data, labels) = synth_gmm(&spec)?;
    let ds = Dataset {
        data,
        labels: Some(labels.into_iter().map(|l| l as u32).collect()),
    };
    let hash = ds.write(&a.out)?;
    say!(out, "wrote {} ({} × {})", a.out.display(), ds.data.rows(), ds.data.cols())?;
    say!(out, "sha256 {hash}")
}

fn import_idx(a: ImportIdxArgs, out: &mut dyn Write) -> CmdResult {
    let (data, labels) = load_idx(&a.images, a.labels.as_deref())?;
    let mut rows: Vec<usize> = (0..data.rows()).collect();
    if a.subset > 0 && a.subset < rows.len() {
        rng::shuffle(&mut rng::prng(a.seed), &mut rows);
        rows.truncate(a.subset);
        rows.sort_unstable();
    }
    let ds = Dataset {
        data: data.select_rows(&rows),
        labels: labels.map(|l| rows.iter().map(|&i| u32::from(l[i])).collect()),
    };
    let hash = ds.write(&a.out)?;
    say!(out, "wrote {} ({} × {})", a.out.display(), ds.data.rows(), ds.data.cols())?;
    say!(out, "sha256 {hash}")
}

fn cluster(a: ClusterArgs, out: &mut dyn Write) -> CmdResult {
    let (ds, hash) = read_dataset(&a.data)?;
    let base = Seeds::from_base(a.seed);
    let shell = ShellParams::new(a.rmin, a.rmax)?;
    let config = KMeansConfig {
        max_iters: a.max_iters,
        tol: a.tol,
        ..KMeansConfig::new(a.k, a.kmeans_seed.unwrap_or(base.kmeans))
    };
    let (rf, _) = RegionFile::compute(&ds, hash, shell, a.shell_seed.unwrap_or(base.shell), config, !a.raw)?;
    rf.write(&a.out)?;
    let r = &rf.region;
    say!(out, "TSS               {:.12}", r.tss)?;
    say!(out, "W                 {:.12}", r.w)?;
    say!(out, "delta_collapse    {:.12}", r.delta_collapse)?;
    say!(out, "identity residual {:.3e}", rf.identity_residual)?;
    say!(out, "kmeans iterations {}", r.clustering.iterations_run)?;
    say!(out, "feasible: W < delta = {}", rf.feasible)?;
    say!(out, "wrote {}", a.out.display())
}

/// Dataset, region and shell data, checked against each other.
fn load_pair(data: &Path, region: &Path) -> Result<(RegionFile, ShellDataset, String), Failure> {
    let (ds, hash) = read_dataset(data)?;
    let rf = RegionFile::read(region)?;
    let shell = rf.shell_dataset(&ds, &hash, data)?;
    Ok((rf, shell, hash))
}

fn train_config(o: &ObjectiveArgs, variant: ConstraintVariant, seeds: Seeds, default_violation: f64) -> TrainConfig {
    let violation = o.violation.unwrap_or(if o.sigma_sq.is_some() { 0.0 } else { default_violation });
    TrainConfig {
        epochs: o.epochs,
        batch_size: o.batch_size,
        learning_rate: o.lr,
        beta_start: o.beta_start,
        beta_end: o.beta_end,
        beta_ramp_epochs: o.beta_ramp,
        two_stage: o.two_stage.on(),
        stage_one_fraction: o.stage_one_fraction,
        stage_one_penalties: o.stage_one_penalties.on(),
        violation_factor: violation,
        sigma_sq_override: o.sigma_sq,
        constraint_variant: variant,
        lambda_boundary: o.lambda_boundary,
        lambda_norm: o.lambda_norm,
        latent_dim: o.latent_dim,
        held_out_fraction: o.held_out,
        seeds,
        ..TrainConfig::default()
    }
}

/// Region-owned seeds (shell, k-means) plus the run's own.
fn run_seeds(rf: &RegionFile, base: u64, init: Option<u64>, shuffle: Option<u64>, noise: Option<u64>) -> Seeds {
    let b = Seeds::from_base(base);
    Seeds {
        init: init.unwrap_or(b.init),
        shuffle: shuffle.unwrap_or(b.shuffle),
        noise: noise.unwrap_or(b.noise),
        shell: rf.shell_seed,
        kmeans: rf.kmeans.seed,
    }
}

struct CheckpointWriter {
    path: PathBuf,
    every: usize,
    seeds: Seeds,
    held_out_fraction: f64,
    error: Option<Error>,
}

impl CheckpointWriter {
    fn save(&mut self, model: &VaeModel, epochs: usize) {
        let ck = Checkpoint {
            model: model.clone(),
            seeds: self.seeds,
            held_out_fraction: self.held_out_fraction,
            epochs_completed: epochs,
        };
        if let Err(e) = ck.write(&self.path) {
            self.error.get_or_insert(e);
        }
    }
}

impl TrainObserver for CheckpointWriter {
    fn on_epoch(&mut self, record: &EpochRecord, model: &VaeModel) {
        if self.every > 0 && (record.epoch + 1) % self.every == 0 {
            self.save(model, record.epoch + 1);
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("configs serialize")
}

fn train_cmd(a: TrainArgs, out: &mut dyn Write) -> CmdResult {
    let o = &a.objective;
    let (rf, shell, hash) = load_pair(&o.data, &o.region)?;
    let seeds = run_seeds(&rf, a.seed, a.init_seed, a.shuffle_seed, a.noise_seed);
    let config = train_config(o, a.variant.into(), seeds, 5.0);
    prepare_dir(&a.out_dir, o.create_dirs)?;

    let mut writer = CheckpointWriter {
        path: a.out_dir.join("model.ckpt"),
        every: a.checkpoint_every,
        seeds,
        held_out_fraction: config.held_out_fraction,
        error: None,
    };
    let (model, report) = train(&shell, &rf.region, &config, &mut writer)?;
    writer.save(&model, config.epochs);
    if let Some(e) = writer.error.take() {
        return Err(e.into());
    }

    write_series(&a.out_dir.join("report.jsonl"), &report, false)?;
    write_csv(&a.out_dir.join("series.csv"), &report.epochs, false)?;
    let manifest = RunManifest::new(
        "train",
        &hash,
        (&rf.region).into(),
        rf.shell,
        rf.region.clustering.k,
        vec![seeds],
        to_value(&config),
    );
    write_json(&a.out_dir.join("manifest.json"), &manifest, false)?;

    let s = &report.summary;
    let m = &s.metrics;
    say!(out, "sigma_sq              {:.6}", s.sigma_sq)?;
    say!(out, "avg_kl                {:.6}", m.avg_kl)?;
    say!(out, "active_units          {}", m.active_units)?;
    say!(out, "feasible_coverage_pct {:.2}", m.feasible_coverage_pct)?;
    say!(out, "norm_satisfaction_pct {:.2}", m.norm_satisfaction_pct)?;
    say!(out, "recon_error           {:.6}", m.recon_error)?;
    say!(out, "collapse_verdict      {}", s.collapse_verdict)?;
    say!(out, "wrote {}", a.out_dir.display())
}

#[derive(Serialize)]
struct EvalOutput {
    #[serde(flatten)]
    metrics: metrics::EvalResult,
    collapse_verdict: bool,
    rows: usize,
    epochs_completed: usize,
}

fn eval(a: EvalArgs, out: &mut dyn Write) -> CmdResult {
    let (rf, shell, _) = load_pair(&a.data, &a.region)?;
    let ck = Checkpoint::read(&a.checkpoint)?;
    ck.check_input_dim(shell.data.cols())?;
    let rows: Vec<usize> = if a.all {
        (0..shell.data.rows()).collect()
    } else {
        split_indices(shell.data.rows(), ck.held_out_fraction, ck.seeds.shuffle)?.1
    };
    let (result, verdict) = evaluate_held_out(&ck.model, &shell, &rf.region, &rows)?;
    let report = EvalOutput {
        metrics: result,
        collapse_verdict: verdict,
        rows: rows.len(),
        epochs_completed: ck.epochs_completed,
    };
    if a.json {
        return say!(out, "{}", serde_json::to_string(&report).expect("results serialize"));
    }
    let m = &report.metrics;
    say!(out, "rows                  {}", report.rows)?;
    say!(out, "avg_kl                {:.6}", m.avg_kl)?;
    say!(out, "active_units          {}", m.active_units)?;
    say!(out, "feasible_coverage_pct {:.2}", m.feasible_coverage_pct)?;
    say!(out, "norm_satisfaction_pct {:.2}", m.norm_satisfaction_pct)?;
    say!(out, "recon_error           {:.6}", m.recon_error)?;
    say!(out, "collapse_verdict      {}", report.collapse_verdict)
}

pub const ABLATION_HEADER: [&str; 7] = [
    "seed",
    "variant",
    "avg_kl",
    "feasible_coverage_pct",
    "norm_satisfaction_pct",
    "recon_error",
    "active_units",
];

fn ablate(a: AblateArgs, out: &mut dyn Write) -> CmdResult {
    let o = &a.objective;
    let (rf, shell, hash) = load_pair(&o.data, &o.region)?;
    if let Some(dir) = a.out.parent() {
        prepare_dir(dir, o.create_dirs)?;
    }
    let csv_err = |source| Error::Csv {
        path: a.out.clone(),
        source,
    };
    let mut w = csv::Writer::from_path(&a.out).map_err(csv_err)?;
    w.write_record(ABLATION_HEADER).map_err(csv_err)?;
    say!(out, "{:>6} {:>14} {:>10} {:>10} {:>10} {:>12} {:>4}", "seed", "variant", "kl", "coverage", "norm_sat", "recon_error", "au")?;
    let mut all_seeds = Vec::new();
    let mut config_echo = None;
    for &seed in &a.seeds {
        let seeds = run_seeds(&rf, seed, None, None, None);
        all_seeds.push(seeds);
        for variant in ConstraintVariant::ALL {
            let config = train_config(o, variant, seeds, 2.0);
            let (_, report) = train(&shell, &rf.region, &config, &mut ())?;
            let m = &report.summary.metrics;
            w.write_record([
                seed.to_string(),
                variant.as_str().to_string(),
                m.avg_kl.to_string(),
                m.feasible_coverage_pct.to_string(),
                m.norm_satisfaction_pct.to_string(),
                m.recon_error.to_string(),
                m.active_units.to_string(),
            ])
            .map_err(csv_err)?;
            say!(
                out,
                "{:>6} {:>14} {:>10.4} {:>10.2} {:>10.2} {:>12.6} {:>4}",
                seed,
                variant.as_str(),
                m.avg_kl,
                m.feasible_coverage_pct,
                m.norm_satisfaction_pct,
                m.recon_error,
                m.active_units
            )?;
            config_echo.get_or_insert_with(|| {
                let mut v = to_value(&config);
                v.as_object_mut().map(|o| o.remove("constraint_variant"));
                v.as_object_mut().map(|o| o.remove("seeds"));
                v
            });
        }
    }
    w.flush().map_err(io_err(&a.out))?;
    let manifest = RunManifest::new(
        "ablate",
        &hash,
        (&rf.region).into(),
        rf.shell,
        rf.region.clustering.k,
        all_seeds,
        config_echo.unwrap_or(serde_json::Value::Null),
    );
    let mut mpath = a.out.clone().into_os_string();
    mpath.push(".manifest.json");
    write_json(Path::new(&mpath), &manifest, false)?;
    say!(out, "wrote {}", a.out.display())
}

#[derive(Debug, Serialize)]
pub struct TheoremCheck {
    pub w: f64,
    pub epsilon: f64,
    pub delta_collapse: f64,
    pub l_c_collapse: f64,
    pub l_c_ideal: f64,
    pub collapse_matches_delta: bool,
    pub ideal_matches_w: bool,
    pub collapse_excluded: bool,
    pub ideal_feasible: bool,
    pub precondition: bool,
    pub pass: bool,
}

/// Evaluates the collapse decoder (`x̂ ≡ x̄'`) and the ideal decoder (`x̂ = x'`)
/// through the cluster loss against `ε = (W + δ)/2`.
pub fn theorem_check(rf: &RegionFile, shell: &Matrix) -> Result<TheoremCheck, Failure> {
    let r = &rf.region;
    let a = &r.clustering.assignments;
    let c = &r.clustering.centers;
    let collapse = Matrix::from_fn(shell.rows(), shell.cols(), |_, j| r.data_mean[j]);
    let (l_collapse, _) = cluster_loss(&collapse, a, c)?;
    let (l_ideal, _) = cluster_loss(shell, a, c)?;
    let eps = 0.5 * (r.w + r.delta_collapse);
    let precondition = r.w < r.delta_collapse;
    let collapse_matches_delta = (l_collapse - r.delta_collapse).abs() <= THEOREM_TOLERANCE;
    let ideal_matches_w = (l_ideal - r.w).abs() <= THEOREM_TOLERANCE;
    let collapse_excluded = l_collapse > eps;
    let ideal_feasible = l_ideal < eps;
    Ok(TheoremCheck {
        w: r.w,
        epsilon: eps,
        delta_collapse: r.delta_collapse,
        l_c_collapse: l_collapse,
        l_c_ideal: l_ideal,
        collapse_matches_delta,
        ideal_matches_w,
        collapse_excluded,
        ideal_feasible,
        precondition,
        pass: precondition && collapse_matches_delta && ideal_matches_w && collapse_excluded && ideal_feasible,
    })
}

fn verify_theorem(a: VerifyArgs, out: &mut dyn Write) -> CmdResult {
    let (rf, shell, _) = load_pair(&a.data, &a.region)?;
    let t = theorem_check(&rf, &shell.data)?;
    if a.json {
        say!(out, "{}", serde_json::to_string(&t).expect("checks serialize"))?;
    } else {
        let mark = |ok: bool| if ok { "ok" } else { "FAIL" };
        say!(out, "W                    {:.12}", t.w)?;
        say!(out, "epsilon              {:.12}", t.epsilon)?;
        say!(out, "delta_collapse       {:.12}", t.delta_collapse)?;
        say!(out, "l_C(collapse)        {:.12}  diff {:.3e}  {}", t.l_c_collapse, t.l_c_collapse - t.delta_collapse, mark(t.collapse_matches_delta))?;
        say!(out, "l_C(ideal)           {:.12}  diff {:.3e}  {}", t.l_c_ideal, t.l_c_ideal - t.w, mark(t.ideal_matches_w))?;
        say!(out, "collapse infeasible  {}", mark(t.collapse_excluded))?;
        say!(out, "ideal feasible       {}", mark(t.ideal_feasible))?;
        say!(out, "{}", if t.pass { "PASS" } else { "FAIL" })?;
    }
    if !t.precondition {
        return Err(Failure::Verification(format!(
            "feasible interval is empty (W = {} ≥ delta_collapse = {}); the theorem's precondition W < delta_collapse is not met",
            t.w, t.delta_collapse
        )));
    }
    if !t.pass {
        return Err(Failure::Verification("a collapse-exclusion check missed its tolerance".into()));
    }
    Ok(())
}
