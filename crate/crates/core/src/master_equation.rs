//! Outlier detection through the reduced `M×M` problem.
//!
//! For `W̃ = H + Ũ diag(θ) Ũᵀ` (additive) or `W̃ = (I+P)^{1/2} H (I+P)^{1/2}`
//! (multiplicative), with `H = diag(λ)` in its eigenbasis, `z` outside the
//! spectrum of `H` is an eigenvalue of `W̃` exactly when
//!
//! ```text
//! D(z) = diag(1/θ) − Ũᵀ diag(w(z)) Ũ,   w_k(z) = 1/(z−λ_k)  or  λ_k/(z−λ_k)
//! ```
//!
//! is singular. `D` is non-decreasing in `z` on both sides of the spectrum, so
//! the number `n(z)` of its nonnegative eigenvalues is a monotone step function
//! whose jumps are the outliers.

use faer::Side as SolverSide;
use serde::{Deserialize, Serialize};

use crate::ensembles::{eigensolve, sequential_kernels, symmetrize, PSD_CLIP};
use crate::error::{Error, Result};
use crate::model::{orthonormality_error, PerturbationSpec, Side, SpectralWindow, SpectrumModel, ORTHONORMAL_TOL};
use crate::transforms::{invert_stieltjes, invert_t_transform};
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    Additive,
    Multiplicative,
}

/// A located root of `det D(z)`. `rank` follows the ordering of the thetas:
/// `i` for the `i`-th largest upper outlier, `M − k + 1` for the `k`-th
/// smallest lower one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocatedOutlier {
    pub rank: usize,
    pub location: f64,
}

#[derive(Debug, Clone)]
pub struct MasterOperator {
    kind: PerturbationKind,
    spectrum: SpectrumModel,
    frame: Matrix,
    thetas: Vec<f64>,
    window: SpectralWindow,
}

impl MasterOperator {
    /// `spectrum` holds the eigenvalues of `H` and `frame` the perturbation
    /// directions written in the eigenbasis of `H` (row `k` pairs with `λ_k`).
    pub fn new(
        kind: PerturbationKind,
        spectrum: SpectrumModel,
        frame: Matrix,
        thetas: &[f64],
        delta: f64,
    ) -> Result<Self> {
        if frame.nrows() != spectrum.len() || frame.ncols() != thetas.len() {
            return Err(Error::Size(format!(
                "frame is {}x{}, expected {}x{}",
                frame.nrows(),
                frame.ncols(),
                spectrum.len(),
                thetas.len()
            )));
        }
        let err = orthonormality_error(&frame);
        if err > ORTHONORMAL_TOL {
            return Err(Error::InvalidPerturbation(format!("frame is not orthonormal (error {err:e})")));
        }
        if thetas.iter().any(|&t| t == 0.0 || !t.is_finite()) {
            return Err(Error::InvalidPerturbation("thetas must be finite and nonzero".into()));
        }
        if thetas.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidPerturbation("thetas must be sorted descending".into()));
        }
        if kind == PerturbationKind::Multiplicative {
            if !spectrum.is_psd() {
                return Err(Error::Model("multiplicative operator needs a PSD spectrum".into()));
            }
            if thetas.iter().any(|&t| t <= -1.0) {
                return Err(Error::InvalidPerturbation("multiplicative thetas must exceed -1".into()));
            }
        }
        let window = SpectralWindow::around(&spectrum, delta)?;
        Ok(Self {
            kind,
            spectrum,
            frame,
            thetas: thetas.to_vec(),
            window,
        })
    }

    /// Builds the operator from a dense `H` and a perturbation, rotating the
    /// perturbation frame into the eigenbasis of `H`.
    pub fn from_matrix(kind: PerturbationKind, h: &Matrix, pert: &PerturbationSpec, delta: f64) -> Result<Self> {
        let eig = eigensolve(h)?;
        let smallest = eig.values.last().copied().unwrap_or(0.0);
        if kind == PerturbationKind::Multiplicative && smallest < -PSD_CLIP {
            return Err(Error::Model(format!("matrix is not PSD (smallest eigenvalue {smallest:e})")));
        }
        let v = pert.frame_matrix(h.nrows())?;
        let rotated = eig.vectors.transpose() * &v;
        let values = eig.values.iter().map(|&l| if kind == PerturbationKind::Multiplicative { l.max(0.0) } else { l }).collect();
        let spectrum = match kind {
            PerturbationKind::Additive => SpectrumModel::new(values)?,
            PerturbationKind::Multiplicative => SpectrumModel::psd(values)?,
        };
        Self::new(kind, spectrum, rotated, pert.thetas(), delta)
    }

    pub fn kind(&self) -> PerturbationKind {
        self.kind
    }

    pub fn spectrum(&self) -> &SpectrumModel {
        &self.spectrum
    }

    pub fn frame(&self) -> &Matrix {
        &self.frame
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn window(&self) -> &SpectralWindow {
        &self.window
    }

    pub fn rank(&self) -> usize {
        self.thetas.len()
    }

    pub fn positive_count(&self) -> usize {
        self.thetas.iter().filter(|&&t| t > 0.0).count()
    }

    fn weight(&self, z: f64, lambda: f64) -> f64 {
        match self.kind {
            PerturbationKind::Additive => 1.0 / (z - lambda),
            PerturbationKind::Multiplicative => lambda / (z - lambda),
        }
    }

    pub fn evaluate_d(&self, z: f64) -> Result<Matrix> {
        if self.window.in_bulk(z) {
            return Err(Error::Domain {
                value: z,
                lower: self.window.lower_edge - self.window.delta,
                upper: self.window.upper_edge + self.window.delta,
            });
        }
        let (n, m) = (self.frame.nrows(), self.frame.ncols());
        let lambda = self.spectrum.values();
        let weights: Vec<f64> = lambda.iter().map(|&l| self.weight(z, l)).collect();
        let scaled = Matrix::from_fn(n, m, |k, j| weights[k] * self.frame[(k, j)]);
        let quad = self.frame.transpose() * &scaled;
        let d = Matrix::from_fn(m, m, |a, b| {
            let diag = if a == b { 1.0 / self.thetas[a] } else { 0.0 };
            diag - quad[(a, b)]
        });
        Ok(symmetrize(&d))
    }

    /// Number of nonnegative eigenvalues of `D(z)`.
    pub fn counting_function(&self, z: f64) -> Result<usize> {
        let d = self.evaluate_d(z)?;
        if d.nrows() == 0 {
            return Ok(0);
        }
        sequential_kernels();
        let values = d.self_adjoint_eigenvalues(SolverSide::Lower).map_err(|_| Error::Eigensolve)?;
        Ok(values.iter().filter(|&&v| v >= 0.0).count())
    }

    pub fn default_tol(&self) -> f64 {
        1e-9 * (1.0 + self.spectrum.largest().abs())
    }

    /// Every root of `det D` beyond the δ-window on `side`, located by
    /// bisection on the counting function to width `tol`, sorted descending.
    pub fn roots_beyond_window(&self, side: Side, tol: f64) -> Result<Vec<LocatedOutlier>> {
        if !(tol > 0.0) {
            return Err(Error::Precondition(format!("tolerance {tol} must be positive")));
        }
        let m1 = self.positive_count();
        let m = self.rank();
        let reach = 1.0 + self.thetas.iter().fold(0.0f64, |a, t| a.max(t.abs())) * self.spectrum.norm().max(1.0);
        let mut found = Vec::new();
        match side {
            Side::Upper => {
                let inner = self.window.upper_edge + self.window.delta;
                let outer = self.expand(inner, inner + reach, |c| c >= m1)?;
                let count = m1 - self.counting_function(inner)?.min(m1);
                for i in 1..=count {
                    let z = self.bisect(inner, outer, m1 - i + 1, tol)?;
                    found.push(LocatedOutlier { rank: i, location: z });
                }
            }
            Side::Lower => {
                let inner = self.window.lower_edge - self.window.delta;
                let outer = self.expand(inner, inner - reach, |c| c <= m1)?;
                let count = self.counting_function(inner)?.saturating_sub(m1);
                for k in 1..=count {
                    let z = self.bisect(outer, inner, m1 + k, tol)?;
                    found.push(LocatedOutlier { rank: m - k + 1, location: z });
                }
                found.reverse();
            }
        }
        Ok(found)
    }

    /// Roots for the thetas on `side` that pass the empirical separation
    /// test. Returns every root beyond the window, and fails with
    /// [`Error::MissingRoot`] when fewer roots exist than separated thetas.
    pub fn locate_outliers(&self, side: Side, tol: f64) -> Result<Vec<LocatedOutlier>> {
        let separated = self.separated_ranks(side);
        let roots = self.roots_beyond_window(side, tol)?;
        if roots.len() < separated.len() {
            let rank = match side {
                Side::Upper => roots.len() + 1,
                Side::Lower => self.rank() - roots.len(),
            };
            return Err(Error::MissingRoot { rank });
        }
        Ok(roots)
    }

    /// Ranks of thetas on `side` whose predicted location clears the window by `δ`.
    pub fn separated_ranks(&self, side: Side) -> Vec<usize> {
        let w = &self.window;
        self.thetas
            .iter()
            .enumerate()
            .filter(|(_, &t)| (t > 0.0) == (side == Side::Upper))
            .filter(|(_, &t)| {
                let inv = match self.kind {
                    PerturbationKind::Additive => invert_stieltjes(&self.spectrum, 1.0 / t),
                    PerturbationKind::Multiplicative => invert_t_transform(&self.spectrum, 1.0 / t),
                };
                match (inv, side) {
                    (Ok(z), Side::Upper) => z >= w.upper_edge + 2.0 * w.delta,
                    (Ok(z), Side::Lower) => z <= w.lower_edge - 2.0 * w.delta,
                    (Err(_), _) => false,
                }
            })
            .map(|(i, _)| i + 1)
            .collect()
    }

    /// Moves `outer` away from `inner` until the count at `outer` satisfies `done`.
    fn expand(&self, inner: f64, start: f64, done: impl Fn(usize) -> bool) -> Result<f64> {
        let mut outer = start;
        for _ in 0..64 {
            if done(self.counting_function(outer)?) {
                return Ok(outer);
            }
            outer = inner + 2.0 * (outer - inner);
        }
        Err(Error::Precondition("counting function never saturated".into()))
    }

    /// `inf{z : n(z) ≥ c}` within `[lo, hi]`, where `n(lo) < c ≤ n(hi)`.
    fn bisect(&self, mut lo: f64, mut hi: f64, c: usize, tol: f64) -> Result<f64> {
        if self.counting_function(hi)? < c || self.counting_function(lo)? >= c {
            return Err(Error::MissingRoot { rank: c });
        }
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.counting_function(mid)? >= c {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}
