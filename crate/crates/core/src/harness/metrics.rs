//! Metric records and their CSV files.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a CSV
//! read back reproduces every value bit for bit.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::HarnessError;
use crate::world::StepMetrics;

/// One logged time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRow {
    pub trial: usize,
    pub episode: usize,
    pub metrics: StepMetrics,
}

/// Per-episode training progress.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub steps: usize,
    /// Sum of per-step energy efficiency over the episode (bit/J).
    pub energy_efficiency: f64,
    pub mean_reward: f64,
    pub mean_outage: f64,
    pub total_energy_j: f64,
    /// Mean training loss over the episode's updates; empty before learning starts.
    pub mean_loss: Option<f64>,
    pub epsilon: f64,
}

/// Aggregate of one evaluation episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub steps: usize,
    /// Sum of per-step energy efficiency (bit/J).
    pub energy_efficiency: f64,
    pub mean_outage: f64,
    pub total_energy_j: f64,
}

impl TrialSummary {
    pub fn from_rows(trial: usize, rows: &[StepMetrics]) -> Self {
        let steps = rows.len();
        Self {
            trial,
            steps,
            energy_efficiency: rows.iter().map(|m| m.energy_efficiency).sum(),
            mean_outage: rows.iter().map(|m| m.outage as f64).sum::<f64>() / steps.max(1) as f64,
            total_energy_j: rows.iter().map(|m| m.total_energy).sum(),
        }
    }
}

/// Statistics over Monte-Carlo trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub policy: String,
    pub trials: usize,
    pub uav_count: usize,
    pub mean_ee: f64,
    pub std_ee: f64,
    /// Mean EE relative to the learned policy's mean; empty without a reference.
    pub normalized_ee: Option<f64>,
    pub mean_outage: f64,
    pub std_outage: f64,
    pub mean_total_energy_j: f64,
    pub std_total_energy_j: f64,
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

impl RunSummary {
    pub fn from_trials(policy: &str, uav_count: usize, trials: &[TrialSummary]) -> Self {
        let pick = |f: fn(&TrialSummary) -> f64| trials.iter().map(f).collect::<Vec<_>>();
        let (mean_ee, std_ee) = mean_std(&pick(|t| t.energy_efficiency));
        let (mean_outage, std_outage) = mean_std(&pick(|t| t.mean_outage));
        let (mean_total_energy_j, std_total_energy_j) = mean_std(&pick(|t| t.total_energy_j));
        Self {
            policy: policy.to_string(),
            trials: trials.len(),
            uav_count,
            mean_ee,
            std_ee,
            normalized_ee: None,
            mean_outage,
            std_outage,
            mean_total_energy_j,
            std_total_energy_j,
        }
    }

    /// Sets `normalized_ee` relative to `reference_mean_ee`.
    pub fn normalize_against(&mut self, reference_mean_ee: f64) {
        self.normalized_ee = Some(self.mean_ee / reference_mean_ee);
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> HarnessError + '_ {
    move |e| HarnessError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn writer(path: &Path) -> Result<csv::Writer<File>, HarnessError> {
    csv::Writer::from_path(path).map_err(csv_err(path))
}

fn finish<W: Write>(w: csv::Writer<W>, path: &Path) -> Result<(), HarnessError> {
    w.into_inner()
        .map_err(|e| HarnessError::Io {
            path: path.to_path_buf(),
            source: e.into_error(),
        })?
        .flush()
        .map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Streams step rows to a CSV file.
pub struct StepWriter {
    path: PathBuf,
    inner: csv::Writer<File>,
}

impl StepWriter {
    pub fn create(path: &Path, uav_count: usize) -> Result<Self, HarnessError> {
        let mut inner = writer(path)?;
        let mut header: Vec<String> = [
            "trial",
            "episode",
            "step",
            "energy_efficiency",
            "throughput_bps",
            "outage",
            "total_energy_j",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend((0..uav_count).map(|j| format!("score_{j}")));
        inner.write_record(&header).map_err(csv_err(path))?;
        Ok(Self {
            path: path.to_path_buf(),
            inner,
        })
    }

    pub fn write(&mut self, row: &StepRow) -> Result<(), HarnessError> {
        let m = &row.metrics;
        let mut rec = vec![
            row.trial.to_string(),
            row.episode.to_string(),
            m.step.to_string(),
            m.energy_efficiency.to_string(),
            m.throughput.to_string(),
            m.outage.to_string(),
            m.total_energy.to_string(),
        ];
        rec.extend(m.scores.iter().map(|s| s.to_string()));
        self.inner.write_record(&rec).map_err(csv_err(&self.path))
    }

    pub fn finish(self) -> Result<(), HarnessError> {
        finish(self.inner, &self.path)
    }
}

pub fn write_step_rows(path: &Path, uav_count: usize, rows: &[StepRow]) -> Result<(), HarnessError> {
    let mut w = StepWriter::create(path, uav_count)?;
    for row in rows {
        w.write(row)?;
    }
    w.finish()
}

/// Parses a step CSV written by [`write_step_rows`].
pub fn read_step_rows(path: &Path) -> Result<Vec<StepRow>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let bad = |what: &str| HarnessError::Csv {
        path: path.to_path_buf(),
        message: format!("malformed {what}"),
    };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        let field = |i: usize| rec.get(i).ok_or_else(|| bad("row"));
        let int = |i: usize| field(i)?.parse::<usize>().map_err(|_| bad("integer"));
        let float = |i: usize| field(i)?.parse::<f64>().map_err(|_| bad("float"));
        rows.push(StepRow {
            trial: int(0)?,
            episode: int(1)?,
            metrics: StepMetrics {
                step: int(2)?,
                energy_efficiency: float(3)?,
                throughput: float(4)?,
                outage: int(5)?,
                total_energy: float(6)?,
                scores: (7..rec.len()).map(int).collect::<Result<_, _>>()?,
            },
        });
    }
    Ok(rows)
}

pub fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<(), HarnessError> {
    let mut w = writer(path)?;
    for r in records {
        w.serialize(r).map_err(csv_err(path))?;
    }
    finish(w, path)
}
