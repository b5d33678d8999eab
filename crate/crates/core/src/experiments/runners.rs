use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, ExperimentType, ThetaSpec, CROSS_VALIDATE_MAX_N};
use super::report::{ExperimentReport, OutlierRecord, TrialRecord};
use crate::ensembles::{
    eigensolve, eigenvalues, perturb_additive, perturb_multiplicative, sample_haar_frame, sample_wigner,
    sample_wishart, PsdMatrix, RngStream,
};
use crate::error::{Error, Result};
use crate::master_equation::{MasterOperator, PerturbationKind};
use crate::model::{mp_edges, Model, ModelKind, PerturbationSpec, Side};
use crate::predictor::{predict_all, predict_w_projection_norm, pushforward_sample};
use crate::stats::wasserstein1;
use crate::Matrix;

/// Relative gap below which two realized eigenvalues count as one.
pub const DEGENERACY_TOL: f64 = 1e-10;
/// A run fails outright when more than this fraction of trials fail.
pub const MAX_FAILED_FRACTION: f64 = 0.1;

/// Everything that depends on `n` but not on the trial.
struct Level {
    n: usize,
    m: usize,
    epsilon: f64,
    model: Model,
}

pub fn draw_thetas<R: Rng + ?Sized>(spec: &ThetaSpec, m: usize, rng: &mut R) -> Vec<f64> {
    match spec {
        ThetaSpec::Explicit { values } => values.clone(),
        ThetaSpec::Uniform { low, high } => (0..m).map(|_| low + (high - low) * rng.random::<f64>()).collect(),
        ThetaSpec::Atom { value } => vec![*value; m],
    }
}

/// The realized perturbed matrix of one trial.
struct Realization {
    base: Matrix,
    perturbed: Matrix,
    pert: PerturbationSpec,
    /// `true` when `base` is the diagonal of the model spectrum.
    diagonal_base: bool,
}

fn realize(model: &Model, n: usize, thetas: Vec<f64>, cfg: &ExperimentConfig, rng: &mut impl Rng) -> Result<Realization> {
    match model.kind() {
        ModelKind::Wigner => {
            let pert = PerturbationSpec::new(thetas)?;
            let base = sample_wigner(n, cfg.entry_law, rng)?;
            let perturbed = perturb_additive(&base, &pert)?;
            Ok(Realization { base, perturbed, pert, diagonal_base: false })
        }
        ModelKind::Wishart { p, .. } => {
            let pert = PerturbationSpec::new(thetas)?;
            let base = sample_wishart(n, p, cfg.entry_law, rng)?;
            let perturbed = perturb_multiplicative(&base, &pert)?;
            Ok(Realization { base: base.into_matrix(), perturbed, pert, diagonal_base: false })
        }
        ModelKind::OrthInvariantAdditive | ModelKind::OrthInvariantMultiplicative => {
            // H = diag(λ) with a Haar frame has the same law as a Haar
            // conjugation of H with the coordinate frame.
            let spectrum = model.spectrum().expect("orthogonally invariant model has a spectrum");
            let frame = sample_haar_frame(n, thetas.len(), rng)?;
            let pert = PerturbationSpec::with_frame(thetas, frame)?;
            let (base, perturbed) = if model.kind().is_multiplicative() {
                let h = PsdMatrix::diagonal(spectrum)?;
                let p = perturb_multiplicative(&h, &pert)?;
                (h.into_matrix(), p)
            } else {
                let h = crate::ensembles::diagonal(spectrum.values());
                let p = perturb_additive(&h, &pert)?;
                (h, p)
            };
            Ok(Realization { base, perturbed, pert, diagonal_base: true })
        }
    }
}

/// Frame coordinates `Vᵀ v` of eigenvector column `k`.
fn frame_coords(pert: &PerturbationSpec, vectors: &Matrix, k: usize) -> Vec<f64> {
    let m = pert.rank();
    match pert.frame() {
        None => (0..m).map(|j| vectors[(j, k)]).collect(),
        Some(v) => (0..m)
            .map(|j| (0..v.nrows()).map(|i| v[(i, j)] * vectors[(i, k)]).sum())
            .collect(),
    }
}

fn norm_bound(model: &Model, pert: &PerturbationSpec) -> f64 {
    let h = match (model.kind(), model.spectrum()) {
        (ModelKind::Wigner, _) => 2.0,
        (ModelKind::Wishart { phi, .. }, _) => mp_edges(phi).1,
        (_, Some(s)) => s.norm(),
        (_, None) => 0.0,
    };
    h.max(pert.norm())
}

/// Indices whose eigenvalue coincides with `values[k]` to [`DEGENERACY_TOL`].
fn cluster(values: &[f64], k: usize) -> std::ops::Range<usize> {
    let tol = DEGENERACY_TOL * values[k].abs().max(1.0);
    let mut lo = k;
    while lo > 0 && (values[lo - 1] - values[k]).abs() <= tol {
        lo -= 1;
    }
    let mut hi = k + 1;
    while hi < values.len() && (values[hi] - values[k]).abs() <= tol {
        hi += 1;
    }
    lo..hi
}

/// Compares master-equation roots with the eigenvalues of the perturbed
/// matrix beyond the δ-window; returns the largest location gap.
pub fn cross_validate(op: &MasterOperator, eigenvalues: &[f64]) -> Result<f64> {
    let w = op.window();
    let tol = op.default_tol();
    let mut roots: Vec<f64> = op
        .roots_beyond_window(Side::Upper, tol)?
        .into_iter()
        .chain(op.roots_beyond_window(Side::Lower, tol)?)
        .map(|r| r.location)
        .collect();
    roots.sort_by(|a, b| b.total_cmp(a));
    let outside: Vec<f64> = eigenvalues
        .iter()
        .copied()
        .filter(|&l| l >= w.upper_edge + w.delta || l <= w.lower_edge - w.delta)
        .collect();
    if roots.len() != outside.len() {
        return Err(Error::Precondition(format!(
            "master equation found {} roots, eigensolve {} eigenvalues outside the window",
            roots.len(),
            outside.len()
        )));
    }
    Ok(roots.iter().zip(&outside).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

fn run_trial(cfg: &ExperimentConfig, level: &Level, trial: usize, stream_id: u64) -> Result<TrialRecord> {
    let mut rng = RngStream::new(cfg.seed, stream_id).rng();
    let thetas = draw_thetas(&cfg.theta_spec, level.m, &mut rng);
    let real = realize(&level.model, level.n, thetas, cfg, &mut rng)?;
    let want_vectors = cfg.experiment == ExperimentType::Eigenvector;
    let (values, vectors) = if want_vectors {
        let e = eigensolve(&real.perturbed)?;
        (e.values, Some(e.vectors))
    } else {
        (eigenvalues(&real.perturbed)?, None)
    };

    let preds = predict_all(&level.model, cfg.delta, &real.pert, level.n)?;
    let thetas = real.pert.thetas();
    let multiplicative = level.model.kind().is_multiplicative();
    let mut outliers = Vec::with_capacity(preds.len());
    for p in &preds {
        let k = p.target_index - 1;
        let realized = values[k];
        let tied_theta = thetas.iter().filter(|&&t| t == p.theta).count() > 1;
        let mut rec = OutlierRecord {
            rank: p.rank,
            theta: p.theta,
            target_index: p.target_index,
            predicted: p.location,
            realized,
            abs_error: p.location.map(|z| (realized - z).abs()),
            proj_norm_pred: None,
            proj_norm_meas: None,
            residual: None,
            w_norm_pred: None,
            w_norm_meas: None,
            degenerate: false,
            tied_theta,
        };
        if let (Some(vectors), true) = (&vectors, p.location.is_some()) {
            let coords = frame_coords(&real.pert, vectors, k);
            let span = cluster(&values, k);
            rec.degenerate = span.len() > 1;
            rec.proj_norm_meas = Some(if rec.degenerate {
                span.map(|c| frame_coords(&real.pert, vectors, c).iter().map(|x| x * x).sum::<f64>()).sum()
            } else {
                coords.iter().map(|x| x * x).sum()
            });
            rec.proj_norm_pred = p.projection_norm_sq;
            rec.residual = Some(
                coords
                    .iter()
                    .zip(thetas)
                    .map(|(c, t)| ((t - p.theta) * c).powi(2))
                    .sum::<f64>()
                    .sqrt(),
            );
            if multiplicative {
                // w = (I+P)^{-1/2} v / ‖·‖ has frame coordinates ṽ_j/√(1+θ_j) / ‖·‖.
                let scaled_sq: f64 = coords.iter().zip(thetas).map(|(c, t)| c * c / (1.0 + t)).sum();
                let v_sq: f64 = coords.iter().map(|c| c * c).sum();
                let norm_sq = 1.0 - v_sq + scaled_sq;
                rec.w_norm_meas = Some(scaled_sq / norm_sq);
                rec.w_norm_pred = predict_w_projection_norm(&level.model, cfg.delta, p.theta).ok();
            }
        }
        outliers.push(rec);
    }

    let w1 = if cfg.experiment == ExperimentType::Pushforward {
        let gamma = pushforward_sample(&level.model, cfg.delta, thetas)?;
        wasserstein1(&values[..level.m], &gamma)
    } else {
        None
    };

    let cross_validation_delta = if cfg.cross_validate && level.n <= CROSS_VALIDATE_MAX_N {
        let kind = if multiplicative { PerturbationKind::Multiplicative } else { PerturbationKind::Additive };
        let op = if real.diagonal_base {
            let spectrum = level.model.spectrum().expect("diagonal base comes from a spectrum").clone();
            let frame = real.pert.frame_matrix(level.n)?;
            MasterOperator::new(kind, spectrum, frame, thetas, cfg.delta)?
        } else {
            MasterOperator::from_matrix(kind, &real.base, &real.pert, cfg.delta)?
        };
        Some(cross_validate(&op, &values)?)
    } else {
        None
    };

    Ok(TrialRecord {
        stream_id,
        n: level.n,
        m: level.m,
        trial,
        epsilon: level.epsilon,
        failure: None,
        outliers,
        w1,
        cross_validation_delta,
        norm_bound: norm_bound(&level.model, &real.pert),
    })
}

/// Runs the experiment named in `cfg.experiment`. Trials run in parallel and
/// are merged in stream-id order, so the report does not depend on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let levels = cfg
        .n_values
        .iter()
        .map(|&n| {
            let m = cfg.rank(n)?;
            Ok(Level {
                n,
                m,
                epsilon: cfg.epsilon_for(n, m),
                model: cfg.kind.model(n)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..levels.len())
        .flat_map(|l| (0..cfg.trials).map(move |t| (l, t)))
        .collect();
    let records: Vec<TrialRecord> = jobs
        .par_iter()
        .map(|&(l, t)| {
            let level = &levels[l];
            let stream_id = (l * cfg.trials + t) as u64;
            run_trial(cfg, level, t, stream_id).unwrap_or_else(|e| TrialRecord {
                stream_id,
                n: level.n,
                m: level.m,
                trial: t,
                epsilon: level.epsilon,
                failure: Some(e.to_string()),
                outliers: Vec::new(),
                w1: None,
                cross_validation_delta: None,
                norm_bound: 0.0,
            })
        })
        .collect();
    let failed = records.iter().filter(|r| r.failure.is_some()).count();
    if failed as f64 > MAX_FAILED_FRACTION * records.len() as f64 {
        return Err(Error::TooManyFailures { failed, total: records.len() });
    }
    Ok(ExperimentReport::new(cfg.clone(), records, start.elapsed().as_secs_f64()))
}

fn run_typed(cfg: &ExperimentConfig, expected: ExperimentType) -> Result<ExperimentReport> {
    if cfg.experiment != expected {
        return Err(Error::Config(format!(
            "config describes a {:?} experiment, expected {:?}",
            cfg.experiment, expected
        )));
    }
    run_experiment(cfg)
}

pub fn run_location_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_typed(cfg, ExperimentType::Location)
}

pub fn run_eigenvector_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_typed(cfg, ExperimentType::Eigenvector)
}

pub fn run_pushforward_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_typed(cfg, ExperimentType::Pushforward)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_clusters() {
        let v = [3.0, 2.0, 2.0 + 1e-12, 1.0];
        assert_eq!(cluster(&v, 1), 1..3);
        assert_eq!(cluster(&v, 2), 1..3);
        assert_eq!(cluster(&v, 0), 0..1);
    }

    #[test]
    fn theta_draws() {
        let mut rng = RngStream::new(1, 0).rng();
        let u = draw_thetas(&ThetaSpec::Uniform { low: 1.5, high: 2.5 }, 50, &mut rng);
        assert_eq!(u.len(), 50);
        assert!(u.iter().all(|&t| (1.5..=2.5).contains(&t)));
        assert_eq!(draw_thetas(&ThetaSpec::Atom { value: 2.0 }, 3, &mut rng), vec![2.0; 3]);
    }
}
