use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::stats::{median, quantile};

pub const REPORT_SCHEMA: &str = "meso-spectra/report/v1";

/// One spike of one trial. Fields that do not apply to the experiment are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierRecord {
    pub rank: usize,
    pub theta: f64,
    pub target_index: usize,
    /// Predicted location; `None` when the spike is below the separation threshold.
    pub predicted: Option<f64>,
    /// Eigenvalue of the perturbed matrix at `target_index`.
    pub realized: f64,
    pub abs_error: Option<f64>,
    pub proj_norm_pred: Option<f64>,
    pub proj_norm_meas: Option<f64>,
    /// `‖diag(θ) ṽ − θ_i ṽ‖` in frame coordinates.
    pub residual: Option<f64>,
    pub w_norm_pred: Option<f64>,
    pub w_norm_meas: Option<f64>,
    /// Realized eigenvalue has multiplicity above one (within 1e-10); the
    /// measured norm is then the projection of the whole eigenspace.
    pub degenerate: bool,
    /// Another spike has exactly the same value.
    pub tied_theta: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub stream_id: u64,
    pub n: usize,
    pub m: usize,
    /// Trial index within its `n`.
    pub trial: usize,
    pub epsilon: f64,
    /// Set when the trial could not be completed.
    pub failure: Option<String>,
    pub outliers: Vec<OutlierRecord>,
    /// Push-forward experiments: W₁ between the top-M eigenvalues and `γ(θ)`.
    pub w1: Option<f64>,
    /// Largest gap between master-equation and eigensolve locations.
    pub cross_validation_delta: Option<f64>,
    /// `max(‖H‖, ‖P‖)` for the realized trial.
    pub norm_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaCoverage {
    pub theta: f64,
    pub count: usize,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct W1Summary {
    pub n: usize,
    pub count: usize,
    pub mean: f64,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub trials: usize,
    pub failed_trials: usize,
    /// Fraction of separated (trial, spike) pairs whose realized location lies
    /// within the trial's ε of the prediction.
    pub coverage: Option<f64>,
    pub coverage_by_theta: Vec<ThetaCoverage>,
    pub median_abs_error: Option<f64>,
    pub p95_abs_error: Option<f64>,
    pub median_norm_error: Option<f64>,
    pub median_residual: Option<f64>,
    pub w1_by_n: Vec<W1Summary>,
    /// Fraction of trial indices whose W₁ strictly decreases along `n_values`.
    pub w1_decreasing_fraction: Option<f64>,
    pub max_cross_validation_delta: Option<f64>,
    pub max_norm_bound: f64,
}

fn separated(records: &[TrialRecord]) -> impl Iterator<Item = (&TrialRecord, &OutlierRecord)> {
    records
        .iter()
        .filter(|t| t.failure.is_none())
        .flat_map(|t| t.outliers.iter().map(move |o| (t, o)))
        .filter(|(_, o)| o.predicted.is_some())
}

/// Coverage at a uniform band half-width `eps`.
pub fn coverage_at(records: &[TrialRecord], eps: f64) -> Option<f64> {
    let (mut hit, mut total) = (0usize, 0usize);
    for (_, o) in separated(records) {
        total += 1;
        if o.abs_error.is_some_and(|e| e <= eps) {
            hit += 1;
        }
    }
    (total > 0).then(|| hit as f64 / total as f64)
}

impl Aggregates {
    /// Pure function of the records; a permutation of the records gives the
    /// same aggregates.
    pub fn compute(records: &[TrialRecord]) -> Self {
        let mut sorted: Vec<&TrialRecord> = records.iter().collect();
        sorted.sort_by_key(|t| t.stream_id);

        let (mut hit, mut total) = (0usize, 0usize);
        let mut by_theta: BTreeMap<u64, (f64, usize, usize)> = BTreeMap::new();
        let mut errors = Vec::new();
        let mut norm_errors = Vec::new();
        let mut residuals = Vec::new();
        for t in &sorted {
            if t.failure.is_some() {
                continue;
            }
            for o in t.outliers.iter().filter(|o| o.predicted.is_some()) {
                let err = o.abs_error.unwrap_or(f64::INFINITY);
                let inside = err <= t.epsilon;
                total += 1;
                hit += inside as usize;
                let entry = by_theta.entry(o.theta.to_bits()).or_insert((o.theta, 0, 0));
                entry.1 += 1;
                entry.2 += inside as usize;
                errors.push(err);
                if let (Some(p), Some(m)) = (o.proj_norm_pred, o.proj_norm_meas) {
                    norm_errors.push((p - m).abs());
                }
                if let Some(r) = o.residual {
                    residuals.push(r);
                }
            }
        }
        let mut coverage_by_theta: Vec<ThetaCoverage> = by_theta
            .into_values()
            .map(|(theta, count, hits)| ThetaCoverage {
                theta,
                count,
                coverage: hits as f64 / count as f64,
            })
            .collect();
        coverage_by_theta.sort_by(|a, b| b.theta.total_cmp(&a.theta));

        let mut w1: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        let mut w1_by_trial: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
        for t in sorted.iter().filter(|t| t.failure.is_none()) {
            if let Some(d) = t.w1 {
                w1.entry(t.n).or_default().push(d);
                w1_by_trial.entry(t.trial).or_default().push((t.n, d));
            }
        }
        let w1_by_n = w1
            .iter()
            .map(|(&n, ds)| W1Summary {
                n,
                count: ds.len(),
                mean: ds.iter().sum::<f64>() / ds.len() as f64,
                median: median(ds).unwrap_or(f64::NAN),
            })
            .collect();
        let ladders: Vec<bool> = w1_by_trial
            .into_values()
            .filter(|v| v.len() > 1)
            .map(|mut v| {
                v.sort_by_key(|&(n, _)| n);
                v.windows(2).all(|w| w[1].1 < w[0].1)
            })
            .collect();
        let w1_decreasing_fraction =
            (!ladders.is_empty()).then(|| ladders.iter().filter(|&&d| d).count() as f64 / ladders.len() as f64);

        let cross: Vec<f64> = sorted.iter().filter_map(|t| t.cross_validation_delta).collect();
        Aggregates {
            trials: records.len(),
            failed_trials: records.iter().filter(|t| t.failure.is_some()).count(),
            coverage: (total > 0).then(|| hit as f64 / total as f64),
            coverage_by_theta,
            median_abs_error: median(&errors),
            p95_abs_error: quantile(&errors, 0.95),
            median_norm_error: median(&norm_errors),
            median_residual: median(&residuals),
            w1_by_n,
            w1_decreasing_fraction,
            max_cross_validation_delta: cross.iter().copied().reduce(f64::max),
            max_norm_bound: records.iter().map(|t| t.norm_bound).fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema: String,
    pub config: ExperimentConfig,
    pub records: Vec<TrialRecord>,
    pub aggregates: Aggregates,
    pub wall_clock_seconds: f64,
}

impl ExperimentReport {
    pub fn new(config: ExperimentConfig, records: Vec<TrialRecord>, wall_clock_seconds: f64) -> Self {
        let aggregates = Aggregates::compute(&records);
        Self {
            schema: REPORT_SCHEMA.to_string(),
            config,
            records,
            aggregates,
            wall_clock_seconds,
        }
    }

    /// JSON with the timing field zeroed, for reproducibility comparisons.
    pub fn canonical_json(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.wall_clock_seconds = 0.0;
        Ok(serde_json::to_string(&copy)?)
    }

    /// Checks the configured thresholds; returns a description of each failure.
    pub fn threshold_failures(&self) -> Vec<String> {
        let t = &self.config.thresholds;
        let a = &self.aggregates;
        let mut out = Vec::new();
        let mut check = |name: &str, value: Option<f64>, limit: Option<f64>, at_least: bool| {
            if let Some(limit) = limit {
                match value {
                    Some(v) if (at_least && v >= limit) || (!at_least && v <= limit) => {}
                    Some(v) => out.push(format!("{name} = {v} (limit {limit})")),
                    None => out.push(format!("{name} unavailable (limit {limit})")),
                }
            }
        };
        check("coverage", a.coverage, t.min_coverage, true);
        check("median_norm_error", a.median_norm_error, t.max_median_norm_error, false);
        check("median_residual", a.median_residual, t.max_median_residual, false);
        check("w1_decreasing_fraction", a.w1_decreasing_fraction, t.min_decreasing_fraction, true);
        let last_w1 = a.w1_by_n.last().map(|s| s.median);
        check("w1", last_w1, t.max_w1, false);
        out
    }
}

const CSV_HEADER: [&str; 9] = [
    "trial",
    "rank",
    "theta",
    "predicted",
    "realized",
    "abs_error",
    "proj_norm_pred",
    "proj_norm_meas",
    "residual",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// `stem.json` and `stem.csv`.
pub fn report_paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("json"), stem.with_extension("csv"))
}

fn write_json(report: &ExperimentReport, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, report)?;
    w.write_all(b"\n").map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn write_csv<W: Write>(report: &ExperimentReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for t in &report.records {
        for o in &t.outliers {
            w.write_record([
                t.stream_id.to_string(),
                o.rank.to_string(),
                format!("{:?}", o.theta),
                opt(o.predicted),
                format!("{:?}", o.realized),
                opt(o.abs_error),
                opt(o.proj_norm_pred),
                opt(o.proj_norm_meas),
                opt(o.residual),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}

/// Writes `stem.json` and `stem.csv`; on any failure both files are removed.
pub fn write_report(report: &ExperimentReport, stem: &Path) -> Result<()> {
    let (json, csv_path) = report_paths(stem);
    let result = write_json(report, &json).and_then(|_| {
        let file = File::create(&csv_path).map_err(io_err(&csv_path))?;
        write_csv(report, BufWriter::new(file))
    });
    if result.is_err() {
        let _ = std::fs::remove_file(&json);
        let _ = std::fs::remove_file(&csv_path);
    }
    result
}

pub fn read_report(path: &Path) -> Result<ExperimentReport> {
    let file = File::open(path).map_err(io_err(path))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}
