//! Training reports as JSON Lines and CSV.
//!
//! The JSONL file holds one object per epoch followed by a single
//! `{"summary": ...}` object.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use shellvae_core::train::{EpochRecord, TrainReport, TrainSummary};

use crate::error::{format_err, io_err, Error, Result};

pub const CSV_HEADER: [&str; 9] = [
    "epoch",
    "recon_nll",
    "kl",
    "l_c",
    "boundary_penalty",
    "norm_penalty",
    "total",
    "beta",
    "stage",
];

#[derive(Serialize, Deserialize)]
struct SummaryLine<T> {
    summary: T,
}

/// Makes sure the parent directory of `path` exists, creating it if allowed.
pub fn prepare_dir(dir: &Path, create: bool) -> Result<()> {
    if dir.as_os_str().is_empty() || dir.is_dir() {
        return Ok(());
    }
    if create {
        std::fs::create_dir_all(dir).map_err(io_err(dir))
    } else {
        Err(Error::MissingDirectory(dir.to_path_buf()))
    }
}

fn parent(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new(""))
}

pub fn to_jsonl(report: &TrainReport) -> String {
    let mut out = String::new();
    for r in &report.epochs {
        out.push_str(&serde_json::to_string(r).expect("epoch records serialize"));
        out.push('\n');
    }
    let summary = SummaryLine {
        summary: &report.summary,
    };
    out.push_str(&serde_json::to_string(&summary).expect("summaries serialize"));
    out.push('\n');
    out
}

pub fn write_series(path: &Path, report: &TrainReport, create_dirs: bool) -> Result<()> {
    prepare_dir(parent(path), create_dirs)?;
    std::fs::write(path, to_jsonl(report)).map_err(io_err(path))
}

pub fn read_series(path: &Path) -> Result<TrainReport> {
    let f = File::open(path).map_err(io_err(path))?;
    let mut epochs = Vec::new();
    let mut summary: Option<TrainSummary> = None;
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        if summary.is_some() {
            return Err(format_err(path, format!("line {}: data after the summary", i + 1)));
        }
        let json = |source| Error::Json {
            path: path.to_path_buf(),
            source,
        };
        let value: serde_json::Value = serde_json::from_str(&line).map_err(json)?;
        if value.get("summary").is_some() {
            summary = Some(serde_json::from_value::<SummaryLine<TrainSummary>>(value).map_err(json)?.summary);
        } else {
            epochs.push(serde_json::from_value::<EpochRecord>(value).map_err(json)?);
        }
    }
    let summary = summary.ok_or_else(|| format_err(path, "no summary line"))?;
    Ok(TrainReport { epochs, summary })
}

pub fn write_csv(path: &Path, epochs: &[EpochRecord], create_dirs: bool) -> Result<()> {
    prepare_dir(parent(path), create_dirs)?;
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in epochs {
        w.write_record([
            r.epoch.to_string(),
            r.recon_nll.to_string(),
            r.kl.to_string(),
            r.l_c.to_string(),
            r.boundary_penalty.to_string(),
            r.norm_penalty.to_string(),
            r.total.to_string(),
            r.beta.to_string(),
            r.stage.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

/// Pretty JSON document followed by a newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T, create_dirs: bool) -> Result<()> {
    prepare_dir(parent(path), create_dirs)?;
    let f = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    writeln!(w).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use shellvae_core::metrics::EvalResult;
    use shellvae_core::train::{RegionSnapshot, TrainConfig};

    fn report() -> TrainReport {
        let epochs = (0..3)
            .map(|e| EpochRecord {
                epoch: e,
                recon_nll: 24.1 + e as f64 / 3.0,
                kl: 0.1 * e as f64,
                l_c: 0.4,
                boundary_penalty: 1e-17,
                norm_penalty: 0.0,
                total: 25.0 - 1.0 / 7.0,
                beta: 0.1,
                stage: 1,
            })
            .collect();
        TrainReport {
            epochs,
            summary: TrainSummary {
                metrics: EvalResult {
                    avg_kl: 1.8,
                    active_units: 6,
                    feasible_coverage_pct: 97.5,
                    norm_satisfaction_pct: 98.2,
                    per_dim_variance: vec![0.5, 1.0 / 3.0],
                    recon_error: 0.02,
                },
                collapse_verdict: false,
                region: RegionSnapshot {
                    tss: 0.9,
                    w: 0.3,
                    delta_collapse: 0.6,
                },
                sigma_sq: 2.0 / 3.0,
                train_rows: 9,
                held_out_rows: 2,
                config: TrainConfig::default(),
            },
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.jsonl");
        let rep = report();
        write_series(&p, &rep, false).unwrap();
        assert_eq!(read_series(&p).unwrap(), rep);
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().last().unwrap().starts_with("{\"summary\":"));
    }

    #[test]
    fn csv_header_is_fixed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_csv(&p, &report().epochs, false).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "epoch,recon_nll,kl,l_c,boundary_penalty,norm_penalty,total,beta,stage"
        );
        assert_eq!(lines.count(), 3);
    }

    #[test]
    fn missing_directory_per_flag() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b/r.jsonl");
        assert!(matches!(write_series(&p, &report(), false), Err(Error::MissingDirectory(_))));
        write_series(&p, &report(), true).unwrap();
        assert!(p.exists());
    }

    #[test]
    fn summary_is_required() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.jsonl");
        let text = to_jsonl(&report());
        let without: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
        std::fs::write(&p, without).unwrap();
        assert!(read_series(&p).is_err());
    }
}
