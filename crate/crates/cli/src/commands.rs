use std::io::Write;
use std::path::PathBuf;

use meso_spectra::ensembles::{
    diagonal, eigenvalues, perturb_additive, perturb_multiplicative, sample_haar_frame, EnsembleSample, PsdMatrix,
    RngStream,
};
use meso_spectra::experiments::{
    coverage_at, random_appendix_b_sweep, run_experiment, write_report, Aggregates, BoundFamily, ExperimentConfig,
    ExperimentReport, KindConfig, SpectrumSource,
};
use meso_spectra::master_equation::{MasterOperator, PerturbationKind};
use meso_spectra::model::{target_index, Model, PerturbationSpec, Side, SpectrumModel};
use meso_spectra::predictor::{predict_all, predict_location, predict_projection_norm};

use crate::{AppendixBArgs, DetectArgs, KindArg, ModelArgs, PredictArgs, RunArgs, SampleArgs, SweepArgs};

pub const SEED_ENV: &str = "MESO_SEED";
const MISSING: &str = "—";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] meso_spectra::Error),
    #[error("writing output: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(meso_spectra::Error::TooManyFailures { .. }) => 1,
            _ => 2,
        }
    }
}

pub enum Outcome {
    Pass,
    Fail(Vec<String>),
}

type CliResult = Result<Outcome, CliError>;

/// `MESO_SEED` wins over `--seed`, which wins over `default`.
fn resolve_seed(flag: Option<u64>, default: u64) -> Result<u64, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(flag.unwrap_or(default)),
    }
}

fn seed_override(flag: Option<u64>) -> Result<Option<u64>, CliError> {
    if std::env::var_os(SEED_ENV).is_some() {
        resolve_seed(None, 0).map(Some)
    } else {
        Ok(flag)
    }
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_else(|| MISSING.to_string())
}

fn parse_spectrum(name: Option<&str>, file: Option<&PathBuf>) -> Result<Option<SpectrumSource>, CliError> {
    if let Some(path) = file {
        return Ok(Some(SpectrumSource::File { path: path.clone() }));
    }
    let Some(name) = name else { return Ok(None) };
    let bad = || CliError::Usage(format!("unknown spectrum {name:?}; use semicircle, mp:<phi> or constant:<value>"));
    let source = match name.split_once(':') {
        None if name == "semicircle" => SpectrumSource::SemicircleQuantiles,
        Some(("mp", phi)) => SpectrumSource::MpQuantiles { phi: phi.parse().map_err(|_| bad())? },
        Some(("constant", v)) => SpectrumSource::Constant { value: v.parse().map_err(|_| bad())? },
        _ => return Err(bad()),
    };
    Ok(Some(source))
}

fn build_model(a: &ModelArgs) -> Result<Model, CliError> {
    let spectrum = parse_spectrum(a.spectrum.as_deref(), a.spectrum_file.as_ref())?;
    let config = match (a.kind, a.phi, spectrum) {
        (KindArg::Wigner, None, None) => KindConfig::Wigner,
        (KindArg::Wishart, Some(phi), None) => KindConfig::Wishart { phi },
        (KindArg::Additive, None, Some(spectrum)) => KindConfig::OrthInvariantAdditive { spectrum },
        (KindArg::Multiplicative, None, Some(spectrum)) => KindConfig::OrthInvariantMultiplicative { spectrum },
        (KindArg::Wishart, None, _) => return Err(CliError::Usage("--phi is required for --kind wishart".into())),
        (KindArg::Additive | KindArg::Multiplicative, _, None) => {
            return Err(CliError::Usage("--spectrum or --spectrum-file is required for this kind".into()))
        }
        (_, Some(_), _) => return Err(CliError::Usage("--phi applies to --kind wishart only".into())),
        (_, None, Some(_)) => {
            return Err(CliError::Usage("spectra apply to the additive and multiplicative kinds only".into()))
        }
    };
    Ok(config.model(a.n)?)
}

pub fn predict(a: &PredictArgs, out: &mut impl Write) -> CliResult {
    let model = build_model(&a.model)?;
    let window = model.window(a.model.delta)?;
    writeln!(out, "theta\tseparated\tlocation\tproj_norm_sq")?;
    for &theta in &a.model.thetas {
        if model.check_separation(&window, theta)?.is_separated() {
            let z = predict_location(&model, a.model.delta, theta)?;
            let p = predict_projection_norm(&model, a.model.delta, theta)?;
            writeln!(out, "{theta:?}\tyes\t{z:?}\t{p:?}")?;
        } else {
            writeln!(out, "{theta:?}\tno\t{MISSING}\t{MISSING}")?;
        }
    }
    Ok(Outcome::Pass)
}

pub fn sample(a: &SampleArgs, out: &mut impl Write) -> CliResult {
    let model = build_model(&a.model)?;
    let n = a.model.n;
    let seed = resolve_seed(a.seed, 0)?;
    let pert = PerturbationSpec::new(a.model.thetas.clone())?;
    if pert.rank() >= n {
        return Err(CliError::Usage(format!("{} spikes need n > {}", pert.rank(), pert.rank())));
    }
    let draw = EnsembleSample::draw(&model.kind(), model.spectrum(), n, &pert, a.law.into(), RngStream::new(seed, 0))?;
    let ev = eigenvalues(&draw.perturbed)?;
    writeln!(out, "rank\ttheta\ttarget_index\trealized\tpredicted\tabs_error")?;
    for p in predict_all(&model, a.model.delta, &pert, n)? {
        let realized = ev[p.target_index - 1];
        writeln!(
            out,
            "{}\t{:?}\t{}\t{realized:?}\t{}\t{}",
            p.rank,
            p.theta,
            p.target_index,
            fmt(p.location),
            fmt(p.location.map(|z| (realized - z).abs()))
        )?;
    }
    Ok(Outcome::Pass)
}

pub fn detect(a: &DetectArgs, out: &mut impl Write) -> CliResult {
    let source = parse_spectrum(a.spectrum.as_deref(), a.spectrum_file.as_ref())?
        .ok_or_else(|| CliError::Usage("--spectrum or --spectrum-file is required".into()))?;
    let spectrum: SpectrumModel = source.build(a.n)?;
    let mut thetas = a.thetas.clone();
    thetas.sort_by(|x, y| y.total_cmp(x));
    if thetas.len() > a.n {
        return Err(CliError::Usage(format!("m = {} exceeds n = {}", thetas.len(), a.n)));
    }
    let seed = resolve_seed(a.seed, 0)?;
    let frame = sample_haar_frame(a.n, thetas.len(), &mut RngStream::new(seed, 0).rng())?;
    let kind = if a.multiplicative { PerturbationKind::Multiplicative } else { PerturbationKind::Additive };
    let op = MasterOperator::new(kind, spectrum.clone(), frame.clone(), &thetas, a.delta)?;
    let pert = PerturbationSpec::with_frame(thetas.clone(), frame)?;
    let dense = match kind {
        PerturbationKind::Additive => perturb_additive(&diagonal(spectrum.values()), &pert)?,
        PerturbationKind::Multiplicative => perturb_multiplicative(&PsdMatrix::diagonal(&spectrum)?, &pert)?,
    };
    let ev = eigenvalues(&dense)?;
    let tol = a.tol.unwrap_or_else(|| op.default_tol());

    let mut rows = Vec::new();
    for (side, label) in [(Side::Upper, "upper"), (Side::Lower, "lower")] {
        for r in op.locate_outliers(side, tol)? {
            let direct = ev[target_index(&pert, a.n, r.rank)? - 1];
            rows.push((label, r.rank, thetas[r.rank - 1], r.location, direct));
        }
    }
    if rows.is_empty() {
        writeln!(out, "no separated outliers")?;
        return Ok(Outcome::Pass);
    }
    writeln!(out, "side\trank\ttheta\tmaster_equation\teigensolve\tdelta")?;
    for (label, rank, theta, z, direct) in rows {
        writeln!(out, "{label}\t{rank}\t{theta:?}\t{z:?}\t{direct:?}\t{:?}", (z - direct).abs())?;
    }
    Ok(Outcome::Pass)
}

fn load_config(a: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(seed) = seed_override(a.seed)? {
        cfg.seed = seed;
    }
    if let Some(stem) = &a.output {
        cfg.outputs = Some(stem.clone());
    }
    Ok(cfg)
}

fn run_and_store(cfg: &ExperimentConfig) -> Result<ExperimentReport, CliError> {
    let report = run_experiment(cfg)?;
    if let Some(stem) = &cfg.outputs {
        write_report(&report, stem)?;
    }
    Ok(report)
}

fn aggregate_row(a: &Aggregates) -> String {
    let w1 = a.w1_by_n.last().map(|s| s.median);
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        a.trials,
        a.failed_trials,
        fmt(a.coverage),
        fmt(a.median_abs_error),
        fmt(a.p95_abs_error),
        fmt(a.median_norm_error),
        fmt(a.median_residual),
        fmt(w1),
        fmt(a.w1_decreasing_fraction)
    )
}

const AGGREGATE_HEADER: &str =
    "trials\tfailed\tcoverage\tmedian_abs_error\tp95_abs_error\tmedian_norm_error\tmedian_residual\tw1\tw1_decreasing_fraction";

pub fn verify(a: &RunArgs, out: &mut impl Write) -> CliResult {
    let cfg = load_config(a)?;
    let report = run_and_store(&cfg)?;
    writeln!(out, "{AGGREGATE_HEADER}")?;
    writeln!(out, "{}", aggregate_row(&report.aggregates))?;
    let failures = report.threshold_failures();
    Ok(if failures.is_empty() { Outcome::Pass } else { Outcome::Fail(failures) })
}

pub fn sweep(a: &SweepArgs, out: &mut impl Write) -> CliResult {
    let cfg = load_config(&a.run)?;
    let report = run_and_store(&cfg)?;
    writeln!(out, "n\tm\tepsilon\t{AGGREGATE_HEADER}")?;
    for &n in &cfg.n_values {
        let subset: Vec<_> = report.records.iter().filter(|r| r.n == n).cloned().collect();
        let Some(first) = subset.first() else { continue };
        let (m, eps) = (first.m, first.epsilon);
        writeln!(out, "{n}\t{m}\t{eps:?}\t{}", aggregate_row(&Aggregates::compute(&subset)))?;
    }
    if !a.bands.is_empty() {
        writeln!(out)?;
        writeln!(out, "band\tcoverage")?;
        for &b in &a.bands {
            writeln!(out, "{b:?}\t{}", fmt(coverage_at(&report.records, b)))?;
        }
    }
    Ok(Outcome::Pass)
}

pub fn appendix_b(a: &AppendixBArgs, out: &mut impl Write) -> CliResult {
    let seed = resolve_seed(a.seed, 0)?;
    if a.xi_points == 0 {
        return Err(CliError::Usage("--xi-points must be at least 1".into()));
    }
    let tables = random_appendix_b_sweep(a.spectra, a.xi_points, a.delta, seed)?;
    let families = [
        BoundFamily::StieltjesValue,
        BoundFamily::StieltjesDerivative,
        BoundFamily::TValue,
        BoundFamily::TDerivative,
    ];
    writeln!(out, "family\tchecks\tpassed")?;
    let mut failures = Vec::new();
    for f in families {
        let checks: Vec<_> = tables.iter().flat_map(|t| &t.checks).filter(|c| c.family == f).collect();
        let passed = checks.iter().filter(|c| c.pass).count();
        writeln!(out, "{f:?}\t{}\t{passed}", checks.len())?;
        if passed < checks.len() {
            failures.push(format!("{f:?}: {} of {} checks failed", checks.len() - passed, checks.len()));
        }
    }
    Ok(if failures.is_empty() { Outcome::Pass } else { Outcome::Fail(failures) })
}
