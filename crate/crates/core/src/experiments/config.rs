use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ensembles::EntryLaw;
use crate::error::{Error, Result};
use crate::model::{Model, ModelKind, SpectrumModel};
use crate::quantiles::{mp_quantiles, semicircle_quantiles};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentType {
    Location,
    Eigenvector,
    Pushforward,
}

/// Where the unperturbed spectrum of an orthogonally invariant model comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source", deny_unknown_fields)]
pub enum SpectrumSource {
    SemicircleQuantiles,
    MpQuantiles { phi: f64 },
    Constant { value: f64 },
    /// Explicit values, resampled by quantiles when `n` differs.
    Values { values: Vec<f64> },
    /// Plain text, one eigenvalue per line.
    File { path: PathBuf },
}

impl SpectrumSource {
    pub fn build(&self, n: usize) -> Result<SpectrumModel> {
        match self {
            SpectrumSource::SemicircleQuantiles => semicircle_quantiles(n),
            SpectrumSource::MpQuantiles { phi } => mp_quantiles(*phi, n),
            SpectrumSource::Constant { value } => SpectrumModel::constant(n, *value),
            SpectrumSource::Values { values } => SpectrumModel::new(values.clone())?.resample_quantiles(n),
            SpectrumSource::File { path } => read_spectrum_file(path)?.resample_quantiles(n),
        }
    }
}

pub fn read_spectrum_file(path: &Path) -> Result<SpectrumModel> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut values = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| Error::Config(format!("{}:{}: not a number: {line:?}", path.display(), k + 1)))?;
        values.push(v);
    }
    SpectrumModel::new(values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", deny_unknown_fields)]
pub enum KindConfig {
    Wigner,
    /// `p = round(n/φ)` columns for each requested `n`.
    Wishart { phi: f64 },
    OrthInvariantAdditive { spectrum: SpectrumSource },
    OrthInvariantMultiplicative { spectrum: SpectrumSource },
}

impl KindConfig {
    pub fn is_multiplicative(&self) -> bool {
        matches!(self, KindConfig::Wishart { .. } | KindConfig::OrthInvariantMultiplicative { .. })
    }

    pub fn is_orthogonally_invariant(&self) -> bool {
        matches!(
            self,
            KindConfig::OrthInvariantAdditive { .. } | KindConfig::OrthInvariantMultiplicative { .. }
        )
    }

    /// The model at dimension `n`.
    pub fn model(&self, n: usize) -> Result<Model> {
        match self {
            KindConfig::Wigner => Ok(Model::wigner()),
            KindConfig::Wishart { phi } => {
                if !(*phi > 0.0 && *phi < 1.0) {
                    return Err(Error::Config(format!("phi = {phi} must lie in (0, 1)")));
                }
                let p = (n as f64 / phi).round() as usize;
                Model::wishart(*phi, p)
            }
            KindConfig::OrthInvariantAdditive { spectrum } => Ok(Model::additive(spectrum.build(n)?)),
            KindConfig::OrthInvariantMultiplicative { spectrum } => Model::multiplicative(spectrum.build(n)?),
        }
    }

    pub fn model_kind(&self, n: usize) -> Result<ModelKind> {
        Ok(self.model(n)?.kind())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", deny_unknown_fields)]
pub enum MRule {
    Fixed { m: usize },
    /// `M = ⌊N^α⌋`.
    Power { alpha: f64 },
}

impl MRule {
    pub fn rank(&self, n: usize) -> usize {
        match *self {
            MRule::Fixed { m } => m,
            MRule::Power { alpha } => (n as f64).powf(alpha).floor() as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", deny_unknown_fields)]
pub enum ThetaSpec {
    /// Fixed spikes; `M` is the list length.
    Explicit { values: Vec<f64> },
    /// `M` i.i.d. draws from the uniform law on `[low, high]`.
    Uniform { low: f64, high: f64 },
    /// `M` copies of one value.
    Atom { value: f64 },
}

/// Pass/fail thresholds used by `verify`. Absent entries are not checked.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    #[serde(default)]
    pub min_coverage: Option<f64>,
    #[serde(default)]
    pub max_median_norm_error: Option<f64>,
    #[serde(default)]
    pub max_median_residual: Option<f64>,
    #[serde(default)]
    pub min_decreasing_fraction: Option<f64>,
    #[serde(default)]
    pub max_w1: Option<f64>,
}

fn default_delta() -> f64 {
    crate::model::DEFAULT_DELTA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentType,
    pub kind: KindConfig,
    pub n_values: Vec<usize>,
    /// Required unless `theta_spec` is explicit.
    #[serde(default)]
    pub m_rule: Option<MRule>,
    pub theta_spec: ThetaSpec,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Defaults to `min(δ, max(0.1, 3√(M/N)))` per `N`.
    #[serde(default)]
    pub epsilon: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub entry_law: EntryLaw,
    /// Report path stem; `.json` and `.csv` are appended.
    #[serde(default)]
    pub outputs: Option<PathBuf>,
    #[serde(default)]
    pub thresholds: Thresholds,
    /// Also run the master-equation detector and record its disagreement
    /// with the eigensolve (only for `n ≤ 400`).
    #[serde(default)]
    pub cross_validate: bool,
}

/// Largest dimension at which trials are cross-checked against the master equation.
pub const CROSS_VALIDATE_MAX_N: usize = 400;

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn rank(&self, n: usize) -> Result<usize> {
        match (&self.theta_spec, &self.m_rule) {
            (ThetaSpec::Explicit { values }, None) => Ok(values.len()),
            (ThetaSpec::Explicit { values }, Some(rule)) => {
                let m = rule.rank(n);
                if m != values.len() {
                    return Err(Error::Config(format!(
                        "m_rule gives M = {m} at N = {n} but {} explicit thetas are listed",
                        values.len()
                    )));
                }
                Ok(m)
            }
            (_, Some(rule)) => Ok(rule.rank(n)),
            (_, None) => Err(Error::Config("m_rule is required unless theta_spec is explicit".into())),
        }
    }

    pub fn epsilon_for(&self, n: usize, m: usize) -> f64 {
        self.epsilon
            .unwrap_or_else(|| self.delta.min(0.1f64.max(3.0 * (m as f64 / n as f64).sqrt())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.n_values.is_empty() {
            return Err(Error::Config("n_values must not be empty".into()));
        }
        if !(self.delta > 0.0) {
            return Err(Error::Config(format!("delta = {} must be positive", self.delta)));
        }
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0 && eps <= self.delta) {
                return Err(Error::Config(format!("epsilon = {eps} must lie in (0, delta = {}]", self.delta)));
            }
        }
        if let Some(MRule::Power { alpha }) = self.m_rule {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::Config(format!("alpha = {alpha} must lie in (0, 1)")));
            }
        }
        match &self.theta_spec {
            ThetaSpec::Explicit { values } => {
                if values.iter().any(|&t| t == 0.0 || !t.is_finite()) {
                    return Err(Error::Config("explicit thetas must be finite and nonzero".into()));
                }
            }
            ThetaSpec::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && low <= high) {
                    return Err(Error::Config(format!("uniform law needs low <= high, got [{low}, {high}]")));
                }
                if *low <= 0.0 && *high >= 0.0 {
                    return Err(Error::Config("uniform law support must not contain 0".into()));
                }
            }
            ThetaSpec::Atom { value } => {
                if *value == 0.0 || !value.is_finite() {
                    return Err(Error::Config("atom must be finite and nonzero".into()));
                }
            }
        }
        for &n in &self.n_values {
            if n == 0 {
                return Err(Error::Config("n_values must be positive".into()));
            }
            let m = self.rank(n)?;
            if m >= n {
                return Err(Error::Config(format!("M = {m} must be below N = {n}")));
            }
            let model = self.kind.model(n).map_err(|e| Error::Config(e.to_string()))?;
            if self.kind.is_multiplicative() {
                let min = match &self.theta_spec {
                    ThetaSpec::Explicit { values } => values.iter().copied().fold(f64::INFINITY, f64::min),
                    ThetaSpec::Uniform { low, .. } => *low,
                    ThetaSpec::Atom { value } => *value,
                };
                if min <= -1.0 {
                    return Err(Error::Config(format!("multiplicative thetas must exceed -1, got {min}")));
                }
            }
            if self.experiment == ExperimentType::Pushforward {
                self.check_pushforward_support(&model)?;
            }
        }
        Ok(())
    }

    /// The spike law must sit inside the separated region of a limit-law model.
    fn check_pushforward_support(&self, model: &Model) -> Result<()> {
        let (low, high) = match &self.theta_spec {
            ThetaSpec::Explicit { values } => (
                values.iter().copied().fold(f64::INFINITY, f64::min),
                values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ),
            ThetaSpec::Uniform { low, high } => (*low, *high),
            ThetaSpec::Atom { value } => (*value, *value),
        };
        let threshold = match model.kind() {
            ModelKind::Wigner => 1.0 + 2.0 * self.delta,
            ModelKind::Wishart { phi, .. } => phi.sqrt() + 2.0 * self.delta,
            _ => return Err(Error::Config("push-forward needs a Wigner or Wishart model".into())),
        };
        if low < threshold || high <= 0.0 {
            return Err(Error::Config(format!(
                "spike support [{low}, {high}] must lie above the separation threshold {threshold}"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> String {
        r#"{
            "experiment": "location",
            "kind": {"type": "wigner"},
            "n_values": [200],
            "m_rule": {"rule": "fixed", "m": 2},
            "theta_spec": {"type": "explicit", "values": [2.0, 3.0]},
            "trials": 3,
            "seed": 1
        }"#
        .to_string()
    }

    #[test]
    fn parses_minimal_config() {
        let cfg = ExperimentConfig::from_json(&base()).unwrap();
        assert_eq!(cfg.delta, 0.1);
        assert_eq!(cfg.entry_law, EntryLaw::Gaussian);
        assert_eq!(cfg.rank(200).unwrap(), 2);
        assert_eq!(cfg.epsilon_for(200, 2), 0.1);
    }

    #[test]
    fn rejects_invalid_configs() {
        let zero = base().replace("\"trials\": 3", "\"trials\": 0");
        assert!(matches!(ExperimentConfig::from_json(&zero), Err(Error::Config(_))));
        let big_eps = base().replace("\"seed\": 1", "\"seed\": 1, \"epsilon\": 0.5");
        assert!(ExperimentConfig::from_json(&big_eps).is_err());
        let mismatch = base().replace("\"m\": 2", "\"m\": 3");
        assert!(ExperimentConfig::from_json(&mismatch).is_err());
        let unknown = base().replace("\"seed\": 1", "\"seed\": 1, \"bogus\": true");
        assert!(ExperimentConfig::from_json(&unknown).is_err());
    }

    #[test]
    fn pushforward_needs_separated_support() {
        let cfg = base()
            .replace("\"location\"", "\"pushforward\"")
            .replace(r#"{"type": "explicit", "values": [2.0, 3.0]}"#, r#"{"type": "uniform", "low": 0.9, "high": 2.5}"#)
            .replace(r#"{"rule": "fixed", "m": 2}"#, r#"{"rule": "power", "alpha": 0.5}"#);
        assert!(ExperimentConfig::from_json(&cfg).is_err());
        let ok = cfg.replace("0.9", "1.5");
        let cfg = ExperimentConfig::from_json(&ok).unwrap();
        assert_eq!(cfg.rank(200).unwrap(), 14);
    }

    #[test]
    fn spectrum_sources() {
        let s = SpectrumSource::Values { values: vec![0.0, 1.0, 2.0, 3.0] }.build(2).unwrap();
        assert_eq!(s.values(), &[2.0, 0.0]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spec.txt");
        std::fs::write(&path, "1.5\n# comment\n-0.5\n\n0.25\n").unwrap();
        let s = SpectrumSource::File { path: path.clone() }.build(3).unwrap();
        assert_eq!(s.values(), &[1.5, 0.25, -0.5]);
        std::fs::write(&path, "1.5\nabc\n").unwrap();
        assert!(read_spectrum_file(&path).is_err());
        let p = KindConfig::Wishart { phi: 0.5 }.model_kind(1000).unwrap();
        assert_eq!(p, ModelKind::Wishart { phi: 0.5, p: 2000 });
    }
}
