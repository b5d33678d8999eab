//! Domain types shared by every other module: the unperturbed spectrum, the
//! perturbation, the spectral window around the bulk, and the separation
//! condition that decides whether a spike produces an outlier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transforms;
use crate::Matrix;

/// Tolerance on `VᵀV − I` for an explicit perturbation frame.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// Default half-width `δ` of the excluded neighbourhood around the bulk.
pub const DEFAULT_DELTA: f64 = 0.1;

fn sort_descending(values: &mut [f64]) {
    values.sort_by(|a, b| b.total_cmp(a));
}

/// Eigenvalues of the unperturbed matrix `H`, kept sorted in descending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumModel {
    eigenvalues: Vec<f64>,
    is_psd: bool,
}

impl SpectrumModel {
    /// Builds a spectrum from values in any order. `is_psd` is inferred.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Model("spectrum must be non-empty".into()));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Model(format!("non-finite eigenvalue {bad}")));
        }
        sort_descending(&mut values);
        let is_psd = *values.last().unwrap() >= 0.0;
        Ok(Self {
            eigenvalues: values,
            is_psd,
        })
    }

    /// Builds a spectrum that must be positive semi-definite.
    pub fn psd(values: Vec<f64>) -> Result<Self> {
        let s = Self::new(values)?;
        if !s.is_psd {
            return Err(Error::Model(format!(
                "spectrum has negative eigenvalue {}",
                s.smallest()
            )));
        }
        Ok(s)
    }

    /// `n` copies of `value`.
    pub fn constant(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_psd(&self) -> bool {
        self.is_psd
    }

    /// λ₁, the top of the spectrum.
    pub fn largest(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// λ_N, the bottom of the spectrum.
    pub fn smallest(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }

    /// Operator norm `max |λ_i|`.
    pub fn norm(&self) -> f64 {
        self.largest().abs().max(self.smallest().abs())
    }

    pub fn is_zero(&self) -> bool {
        self.largest() == 0.0 && self.smallest() == 0.0
    }

    /// Resamples to `n` points with the empirical inverse CDF evaluated at the
    /// midpoints `(j − ½)/n`. Returns a clone when `n` already matches.
    pub fn resample_quantiles(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Size("cannot resample to zero points".into()));
        }
        if n == self.len() {
            return Ok(self.clone());
        }
        let ascending: Vec<f64> = self.eigenvalues.iter().rev().copied().collect();
        let len = ascending.len();
        let values = (0..n)
            .map(|j| {
                let q = (j as f64 + 0.5) / n as f64;
                let idx = ((q * len as f64).ceil() as usize).clamp(1, len) - 1;
                ascending[idx]
            })
            .collect();
        Self::new(values)
    }
}

/// Nonzero eigenvalues `θ₁ ≥ … ≥ θ_M` of the perturbation and, optionally, an
/// explicit `N×M` orthonormal eigenvector frame. Without a frame the
/// perturbation is `diag(θ₁, …, θ_M, 0, …, 0)`.
#[derive(Debug, Clone)]
pub struct PerturbationSpec {
    thetas: Vec<f64>,
    frame: Option<Matrix>,
}

impl PerturbationSpec {
    pub fn new(mut thetas: Vec<f64>) -> Result<Self> {
        validate_thetas(&thetas)?;
        sort_descending(&mut thetas);
        Ok(Self {
            thetas,
            frame: None,
        })
    }

    /// Attaches an explicit frame; column `k` is the eigenvector of `thetas[k]`.
    /// Columns are permuted together with the values when sorting.
    pub fn with_frame(thetas: Vec<f64>, frame: Matrix) -> Result<Self> {
        validate_thetas(&thetas)?;
        if frame.ncols() != thetas.len() {
            return Err(Error::Size(format!(
                "frame has {} columns for {} thetas",
                frame.ncols(),
                thetas.len()
            )));
        }
        let err = orthonormality_error(&frame);
        if err > ORTHONORMAL_TOL {
            return Err(Error::InvalidPerturbation(format!(
                "frame columns are not orthonormal (error {err:e})"
            )));
        }
        let mut order: Vec<usize> = (0..thetas.len()).collect();
        order.sort_by(|&a, &b| thetas[b].total_cmp(&thetas[a]));
        let sorted = order.iter().map(|&k| thetas[k]).collect();
        let permuted = Matrix::from_fn(frame.nrows(), frame.ncols(), |i, j| frame[(i, order[j])]);
        Ok(Self {
            thetas: sorted,
            frame: Some(permuted),
        })
    }

    pub fn empty() -> Self {
        Self {
            thetas: Vec::new(),
            frame: None,
        }
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn frame(&self) -> Option<&Matrix> {
        self.frame.as_ref()
    }

    /// Rank `M`.
    pub fn rank(&self) -> usize {
        self.thetas.len()
    }

    /// `M₁`, the number of positive spikes.
    pub fn positive_count(&self) -> usize {
        self.thetas.iter().filter(|&&t| t > 0.0).count()
    }

    pub fn norm(&self) -> f64 {
        self.thetas.iter().fold(0.0, |acc, t| acc.max(t.abs()))
    }

    /// Multiplicative perturbations need `I + P` positive definite.
    pub fn validate_multiplicative(&self) -> Result<()> {
        match self.thetas.iter().find(|&&t| t <= -1.0) {
            Some(t) => Err(Error::InvalidPerturbation(format!(
                "multiplicative spike {t} must exceed -1"
            ))),
            None => Ok(()),
        }
    }

    /// Explicit `n×M` frame; coordinate vectors `e₁…e_M` when none was given.
    pub fn frame_matrix(&self, n: usize) -> Result<Matrix> {
        match &self.frame {
            Some(v) if v.nrows() == n => Ok(v.clone()),
            Some(v) => Err(Error::Size(format!(
                "frame has {} rows, matrix has {n}",
                v.nrows()
            ))),
            None if self.rank() <= n => Ok(Matrix::from_fn(n, self.rank(), |i, j| {
                if i == j {
                    1.0
                } else {
                    0.0
                }
            })),
            None => Err(Error::Size(format!("rank {} exceeds dimension {n}", self.rank()))),
        }
    }
}

fn validate_thetas(thetas: &[f64]) -> Result<()> {
    for &t in thetas {
        if t == 0.0 {
            return Err(Error::InvalidPerturbation("spike value 0 is not allowed".into()));
        }
        if !t.is_finite() {
            return Err(Error::InvalidPerturbation(format!("non-finite spike {t}")));
        }
    }
    Ok(())
}

/// `max |(VᵀV − I)_{ij}|`.
pub fn orthonormality_error(frame: &Matrix) -> f64 {
    let gram = frame.transpose() * frame;
    let mut err = 0.0_f64;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            err = err.max((gram[(i, j)] - target).abs());
        }
    }
    err
}

/// The excluded region `(lower_edge − δ, upper_edge + δ)` around the bulk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralWindow {
    pub delta: f64,
    pub lower_edge: f64,
    pub upper_edge: f64,
}

impl SpectralWindow {
    pub fn new(delta: f64, lower_edge: f64, upper_edge: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::Config(format!("delta must be positive, got {delta}")));
        }
        if !(lower_edge <= upper_edge) {
            return Err(Error::Config(format!(
                "window edges out of order: {lower_edge} > {upper_edge}"
            )));
        }
        Ok(Self {
            delta,
            lower_edge,
            upper_edge,
        })
    }

    pub fn around(spectrum: &SpectrumModel, delta: f64) -> Result<Self> {
        Self::new(delta, spectrum.smallest(), spectrum.largest())
    }

    pub fn semicircle(delta: f64) -> Result<Self> {
        Self::new(delta, -2.0, 2.0)
    }

    pub fn marchenko_pastur(phi: f64, delta: f64) -> Result<Self> {
        let (lo, hi) = mp_edges(phi);
        Self::new(delta, lo, hi)
    }

    /// True when `z` lies in the open excluded interval.
    pub fn in_bulk(&self, z: f64) -> bool {
        z > self.lower_edge - self.delta && z < self.upper_edge + self.delta
    }
}

/// `γ_± = (1 ± √φ)²`.
pub fn mp_edges(phi: f64) -> (f64, f64) {
    let r = phi.sqrt();
    ((1.0 - r).powi(2), (1.0 + r).powi(2))
}

/// Which random-matrix model a perturbation is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum ModelKind {
    OrthInvariantAdditive,
    Wigner,
    OrthInvariantMultiplicative,
    Wishart { phi: f64, p: usize },
}

impl ModelKind {
    /// Wishart kind for an `n×p` data matrix, `φ = n/p`.
    pub fn wishart(n: usize, p: usize) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::Size("Wishart dimensions must be positive".into()));
        }
        let phi = n as f64 / p as f64;
        if !(phi > 0.0 && phi < 1.0) {
            return Err(Error::Model(format!("aspect ratio n/p = {phi} must lie in (0, 1)")));
        }
        Ok(ModelKind::Wishart { phi, p })
    }

    pub fn is_multiplicative(&self) -> bool {
        matches!(
            self,
            ModelKind::OrthInvariantMultiplicative | ModelKind::Wishart { .. }
        )
    }

    pub fn is_orthogonally_invariant(&self) -> bool {
        matches!(
            self,
            ModelKind::OrthInvariantAdditive | ModelKind::OrthInvariantMultiplicative
        )
    }
}

/// A model kind together with the spectrum it needs (only the orthogonally
/// invariant kinds carry one; Wigner and Wishart use their limit laws).
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    kind: ModelKind,
    spectrum: Option<SpectrumModel>,
}

impl Model {
    pub fn wigner() -> Self {
        Self {
            kind: ModelKind::Wigner,
            spectrum: None,
        }
    }

    /// Wishart limit law with ratio `phi`; `p` is recorded for provenance only.
    pub fn wishart(phi: f64, p: usize) -> Result<Self> {
        if !(phi > 0.0 && phi < 1.0) {
            return Err(Error::Model(format!("phi = {phi} must lie in (0, 1)")));
        }
        Ok(Self {
            kind: ModelKind::Wishart { phi, p },
            spectrum: None,
        })
    }

    pub fn additive(spectrum: SpectrumModel) -> Self {
        Self {
            kind: ModelKind::OrthInvariantAdditive,
            spectrum: Some(spectrum),
        }
    }

    pub fn multiplicative(spectrum: SpectrumModel) -> Result<Self> {
        if !spectrum.is_psd() {
            return Err(Error::Model(
                "multiplicative model needs a positive semi-definite spectrum".into(),
            ));
        }
        if spectrum.is_zero() {
            return Err(Error::Model("multiplicative model needs a nonzero spectrum".into()));
        }
        Ok(Self {
            kind: ModelKind::OrthInvariantMultiplicative,
            spectrum: Some(spectrum),
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn spectrum(&self) -> Option<&SpectrumModel> {
        self.spectrum.as_ref()
    }

    /// The natural window: empirical edges or the limit-law support.
    pub fn window(&self, delta: f64) -> Result<SpectralWindow> {
        match (&self.kind, &self.spectrum) {
            (ModelKind::Wigner, _) => SpectralWindow::semicircle(delta),
            (ModelKind::Wishart { phi, .. }, _) => SpectralWindow::marchenko_pastur(*phi, delta),
            (_, Some(s)) => SpectralWindow::around(s, delta),
            (_, None) => unreachable!("orthogonally invariant models always carry a spectrum"),
        }
    }

    /// Threshold quoted in not-separated errors: `|θ|` scale for the limit-law
    /// kinds, location scale (edge ± 2δ) for the empirical kinds.
    pub fn separation_threshold(&self, window: &SpectralWindow, theta: f64) -> f64 {
        match self.kind {
            ModelKind::Wigner => 1.0 + 2.0 * window.delta,
            ModelKind::Wishart { phi, .. } => phi.sqrt() + 2.0 * window.delta,
            _ if theta > 0.0 => window.upper_edge + 2.0 * window.delta,
            _ => window.lower_edge - 2.0 * window.delta,
        }
    }

    /// Decides whether `theta` produces an outlier, and on which side.
    pub fn check_separation(&self, window: &SpectralWindow, theta: f64) -> Result<Separation> {
        if theta == 0.0 || !theta.is_finite() {
            return Err(Error::InvalidPerturbation(format!("spike value {theta} is not allowed")));
        }
        if self.kind.is_multiplicative() && theta <= -1.0 {
            return Err(Error::InvalidPerturbation(format!(
                "multiplicative spike {theta} must exceed -1"
            )));
        }
        let side = if theta > 0.0 { Side::Upper } else { Side::Lower };
        let gap = 2.0 * window.delta;
        let separated = match self.kind {
            ModelKind::Wigner => theta.abs() >= 1.0 + gap,
            ModelKind::Wishart { phi, .. } => theta.abs() >= phi.sqrt() + gap,
            ModelKind::OrthInvariantAdditive | ModelKind::OrthInvariantMultiplicative => {
                let spectrum = self.spectrum.as_ref().expect("spectrum present");
                let inverse = if self.kind.is_multiplicative() {
                    transforms::invert_t_transform(spectrum, 1.0 / theta)
                } else {
                    transforms::invert_stieltjes(spectrum, 1.0 / theta)
                };
                match inverse {
                    Ok(z) if theta > 0.0 => z >= window.upper_edge + gap,
                    Ok(z) => z <= window.lower_edge - gap,
                    Err(_) => false,
                }
            }
        };
        Ok(if separated {
            Separation::Separated(side)
        } else {
            Separation::NotSeparated
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Separation {
    Separated(Side),
    NotSeparated,
}

impl Separation {
    pub fn is_separated(&self) -> bool {
        matches!(self, Separation::Separated(_))
    }
}

/// 1-based index into the perturbed spectrum (descending) of the eigenvalue
/// created by spike `i`: `i` for positive spikes, `N − M + i` for negative ones.
pub fn target_index(pert: &PerturbationSpec, n: usize, i: usize) -> Result<usize> {
    let m = pert.rank();
    if i == 0 || i > m {
        return Err(Error::Index { index: i, len: m });
    }
    if m > n {
        return Err(Error::Size(format!("rank {m} exceeds dimension {n}")));
    }
    Ok(if pert.thetas()[i - 1] > 0.0 { i } else { n - m + i })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wigner_separation_examples() {
        let model = Model::wigner();
        let w = model.window(0.1).unwrap();
        assert_eq!(
            model.check_separation(&w, 1.5).unwrap(),
            Separation::Separated(Side::Upper)
        );
        assert_eq!(model.check_separation(&w, 1.0).unwrap(), Separation::NotSeparated);
        assert_eq!(
            model.check_separation(&w, -1.3).unwrap(),
            Separation::Separated(Side::Lower)
        );
    }

    #[test]
    fn wishart_negative_spike_separates_below() {
        let model = Model::wishart(0.25, 4000).unwrap();
        let w = model.window(0.05).unwrap();
        assert_eq!(
            model.check_separation(&w, -0.8).unwrap(),
            Separation::Separated(Side::Lower)
        );
        assert!(matches!(
            model.check_separation(&w, -1.0),
            Err(Error::InvalidPerturbation(_))
        ));
    }

    #[test]
    fn zero_spike_is_rejected() {
        let model = Model::wigner();
        let w = model.window(0.1).unwrap();
        assert!(matches!(
            model.check_separation(&w, 0.0),
            Err(Error::InvalidPerturbation(_))
        ));
        assert!(PerturbationSpec::new(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn empirical_separation_never_errors_outside_range() {
        // T-transform of a spectrum with zeros cannot reach 1/θ for θ close to -1.
        let spectrum = SpectrumModel::psd(vec![0.0, 1.0, 2.0, 0.0]).unwrap();
        let model = Model::multiplicative(spectrum).unwrap();
        let w = model.window(0.1).unwrap();
        assert_eq!(model.check_separation(&w, -0.9).unwrap(), Separation::NotSeparated);
    }

    #[test]
    fn additive_zero_spectrum_separation() {
        let model = Model::additive(SpectrumModel::constant(10, 0.0).unwrap());
        let w = model.window(0.1).unwrap();
        // m⁻¹(1/θ) = θ for the zero spectrum.
        assert_eq!(
            model.check_separation(&w, 0.25).unwrap(),
            Separation::Separated(Side::Upper)
        );
        assert_eq!(model.check_separation(&w, 0.15).unwrap(), Separation::NotSeparated);
        assert_eq!(
            model.check_separation(&w, -0.3).unwrap(),
            Separation::Separated(Side::Lower)
        );
    }

    #[test]
    fn target_index_examples() {
        let pert = PerturbationSpec::new(vec![2.0, -1.5, 1.0]).unwrap();
        assert_eq!(pert.positive_count(), 2);
        assert_eq!(target_index(&pert, 100, 1).unwrap(), 1);
        assert_eq!(target_index(&pert, 100, 2).unwrap(), 2);
        assert_eq!(target_index(&pert, 100, 3).unwrap(), 100);
        let all_pos = PerturbationSpec::new(vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(target_index(&all_pos, 50, 5).unwrap(), 5);
        assert!(matches!(target_index(&pert, 100, 4), Err(Error::Index { .. })));
        assert!(matches!(target_index(&pert, 100, 0), Err(Error::Index { .. })));
    }

    #[test]
    fn frame_is_permuted_with_thetas() {
        let frame = Matrix::from_fn(3, 2, |i, j| if i == j { 1.0 } else { 0.0 });
        let pert = PerturbationSpec::with_frame(vec![1.0, 3.0], frame).unwrap();
        assert_eq!(pert.thetas(), &[3.0, 1.0]);
        let v = pert.frame().unwrap();
        assert_eq!(v[(1, 0)], 1.0);
        assert_eq!(v[(0, 1)], 1.0);
    }

    #[test]
    fn non_orthonormal_frame_rejected() {
        let frame = Matrix::from_fn(3, 2, |_, _| 1.0);
        assert!(matches!(
            PerturbationSpec::with_frame(vec![1.0, 2.0], frame),
            Err(Error::InvalidPerturbation(_))
        ));
    }

    #[test]
    fn spectrum_validation() {
        assert!(SpectrumModel::new(vec![]).is_err());
        assert!(SpectrumModel::psd(vec![1.0, -0.5]).is_err());
        let s = SpectrumModel::new(vec![-1.0, 3.0, 0.5]).unwrap();
        assert_eq!(s.values(), &[3.0, 0.5, -1.0]);
        assert!(!s.is_psd());
        assert_eq!(s.norm(), 3.0);
    }

    #[test]
    fn quantile_resampling() {
        let s = SpectrumModel::new(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let r = s.resample_quantiles(8).unwrap();
        assert_eq!(r.values(), &[3.0, 3.0, 2.0, 2.0, 1.0, 1.0, 0.0, 0.0]);
        let down = s.resample_quantiles(2).unwrap();
        assert_eq!(down.values(), &[2.0, 0.0]);
    }

    #[test]
    fn wishart_kind_requires_aspect_below_one() {
        assert!(matches!(
            ModelKind::wishart(1000, 4000).unwrap(),
            ModelKind::Wishart { phi, p: 4000 } if (phi - 0.25).abs() < 1e-15
        ));
        assert!(ModelKind::wishart(10, 10).is_err());
    }

    proptest! {
        #[test]
        fn canonical_form_is_permutation_invariant(
            mut values in prop::collection::vec(-5.0f64..5.0, 1..40),
            seed in any::<u64>(),
        ) {
            let a = SpectrumModel::new(values.clone()).unwrap();
            // Deterministic shuffle driven by the seed.
            let mut state = seed;
            for i in (1..values.len()).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let j = (state >> 33) as usize % (i + 1);
                values.swap(i, j);
            }
            let b = SpectrumModel::new(values.clone()).unwrap();
            prop_assert_eq!(a, b);
            let nonzero: Vec<f64> = values.into_iter().filter(|v| *v != 0.0).collect();
            let mut rev = nonzero.clone();
            rev.reverse();
            let pa = PerturbationSpec::new(nonzero).unwrap();
            let pb = PerturbationSpec::new(rev).unwrap();
            prop_assert_eq!(pa.thetas(), pb.thetas());
        }

        #[test]
        fn separation_is_monotone_in_magnitude(
            theta in 0.01f64..5.0,
            bump in 0.0f64..3.0,
            negative in any::<bool>(),
            delta in 0.01f64..0.3,
        ) {
            let sign = if negative { -1.0 } else { 1.0 };
            let wigner = Model::wigner();
            let w = wigner.window(delta).unwrap();
            if wigner.check_separation(&w, sign * theta).unwrap().is_separated() {
                prop_assert!(wigner.check_separation(&w, sign * (theta + bump)).unwrap().is_separated());
            }
            let wishart = Model::wishart(0.3, 100).unwrap();
            let w = wishart.window(delta).unwrap();
            let (t1, t2) = if negative {
                (-(theta.min(0.99)), -((theta + bump).min(0.999)))
            } else {
                (theta, theta + bump)
            };
            if t2.abs() >= t1.abs() && wishart.check_separation(&w, t1).unwrap().is_separated() {
                prop_assert!(wishart.check_separation(&w, t2).unwrap().is_separated());
            }
        }

        #[test]
        fn target_index_is_a_bijection(
            thetas in prop::collection::vec(prop_oneof![-3.0f64..-0.1, 0.1f64..3.0], 1..12),
            extra in 0usize..50,
        ) {
            let pert = PerturbationSpec::new(thetas).unwrap();
            let m = pert.rank();
            let m1 = pert.positive_count();
            let n = m + extra;
            let mut got: Vec<usize> = (1..=m).map(|i| target_index(&pert, n, i).unwrap()).collect();
            got.sort_unstable();
            let mut expected: Vec<usize> = (1..=m1).collect();
            expected.extend(n - m + m1 + 1..=n);
            prop_assert_eq!(got, expected);
        }
    }
}
