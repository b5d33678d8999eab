//! Deterministic check of the two-sided bounds on `m_N`, `m_N′`, `T_N`, `T_N′`
//! near the predicted outlier location `z₀ = m_N^{-1}(1/θ)` (or `T_N^{-1}(1/θ)`):
//!
//! ```text
//! |ξ|/(4B²) ≤ |m(z₀+ξ) − 1/θ|     ≤ 4|ξ|/δ²
//! |ξ|/(8B³) ≤ |m′(z₀+ξ) − m′(z₀)| ≤ 8|ξ|/δ³
//! |ξ|/(4B³) ≤ |T(z₀+ξ) − 1/θ|     ≤ 4B|ξ|/δ³
//! |ξ|/(8B⁴) ≤ |T′(z₀+ξ) − T′(z₀)| ≤ 8B|ξ|/δ⁴
//! ```
//!
//! for `|ξ| ≤ δ` and `B = max(‖H‖, |θ|)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ensembles::RngStream;
use crate::error::{Error, Result};
use crate::model::SpectrumModel;
use crate::transforms::{invert_stieltjes, invert_t_transform, stieltjes, stieltjes_deriv, t_transform, t_transform_deriv};

/// Absolute slack for floating-point rounding in the comparisons.
pub const ROUNDING_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundFamily {
    StieltjesValue,
    StieltjesDerivative,
    TValue,
    TDerivative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub family: BoundFamily,
    pub xi: f64,
    pub deviation: f64,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppendixBTable {
    pub theta: f64,
    pub delta: f64,
    pub norm_bound: f64,
    pub checks: Vec<BoundCheck>,
}

impl AppendixBTable {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn families(&self) -> Vec<BoundFamily> {
        let mut f: Vec<BoundFamily> = Vec::new();
        for c in &self.checks {
            if !f.contains(&c.family) {
                f.push(c.family);
            }
        }
        f
    }
}

fn separated(z: f64, spectrum: &SpectrumModel, theta: f64, delta: f64) -> bool {
    if theta > 0.0 {
        z >= spectrum.largest() + 2.0 * delta
    } else {
        z <= spectrum.smallest() - 2.0 * delta
    }
}

fn check(family: BoundFamily, xi: f64, deviation: f64, lower: f64, upper: f64) -> BoundCheck {
    let pass = deviation >= lower - ROUNDING_SLACK && deviation <= upper + ROUNDING_SLACK;
    BoundCheck { family, xi, deviation, lower, upper, pass }
}

/// Evaluates every bound at every `ξ`. The T pair is included only for
/// nonzero PSD spectra.
pub fn verify_appendix_b(spectrum: &SpectrumModel, theta: f64, delta: f64, xi_grid: &[f64]) -> Result<AppendixBTable> {
    if theta == 0.0 || !theta.is_finite() {
        return Err(Error::Precondition(format!("theta = {theta} must be finite and nonzero")));
    }
    if !(delta > 0.0) {
        return Err(Error::Precondition(format!("delta = {delta} must be positive")));
    }
    if let Some(xi) = xi_grid.iter().find(|x| x.abs() > delta) {
        return Err(Error::Precondition(format!("|xi| = {} exceeds delta = {delta}", xi.abs())));
    }
    let b = spectrum.norm().max(theta.abs());
    let z0 = invert_stieltjes(spectrum, 1.0 / theta)?;
    if !separated(z0, spectrum, theta, delta) {
        return Err(Error::Precondition(format!(
            "m^-1(1/theta) = {z0} is not 2*delta away from the spectrum"
        )));
    }
    let with_t = spectrum.is_psd() && !spectrum.is_zero();
    let t0 = if with_t {
        let t0 = invert_t_transform(spectrum, 1.0 / theta)
            .map_err(|e| Error::Precondition(format!("T^-1(1/theta) unavailable: {e}")))?;
        if !separated(t0, spectrum, theta, delta) {
            return Err(Error::Precondition(format!(
                "T^-1(1/theta) = {t0} is not 2*delta away from the spectrum"
            )));
        }
        Some(t0)
    } else {
        None
    };

    let inv = 1.0 / theta;
    let (d2, d3, d4) = (delta.powi(2), delta.powi(3), delta.powi(4));
    let mut checks = Vec::with_capacity(4 * xi_grid.len());
    let md0 = stieltjes_deriv(spectrum, z0)?;
    for &xi in xi_grid {
        let a = xi.abs();
        let z = z0 + xi;
        checks.push(check(BoundFamily::StieltjesValue, xi, (stieltjes(spectrum, z)? - inv).abs(), a / (4.0 * b * b), 4.0 * a / d2));
        checks.push(check(
            BoundFamily::StieltjesDerivative,
            xi,
            (stieltjes_deriv(spectrum, z)? - md0).abs(),
            a / (8.0 * b.powi(3)),
            8.0 * a / d3,
        ));
    }
    if let Some(t0) = t0 {
        let td0 = t_transform_deriv(spectrum, t0)?;
        for &xi in xi_grid {
            let a = xi.abs();
            let z = t0 + xi;
            checks.push(check(BoundFamily::TValue, xi, (t_transform(spectrum, z)? - inv).abs(), a / (4.0 * b.powi(3)), 4.0 * b * a / d3));
            checks.push(check(
                BoundFamily::TDerivative,
                xi,
                (t_transform_deriv(spectrum, z)? - td0).abs(),
                a / (8.0 * b.powi(4)),
                8.0 * b * a / d4,
            ));
        }
    }
    Ok(AppendixBTable { theta, delta, norm_bound: b, checks })
}

/// `k` evenly spaced points on `[−δ, δ]`.
pub fn xi_grid(delta: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![0.0];
    }
    (0..k).map(|j| -delta + 2.0 * delta * j as f64 / (k - 1) as f64).collect()
}

/// Draws `count` random PSD spectra (sizes 5..=60, entries uniform on
/// `[0, 2)`), picks for each a spike comfortably past both separation
/// thresholds and runs [`verify_appendix_b`] on a `xi_points` grid.
/// Spectrum `k` uses stream `k` of `seed`.
pub fn random_appendix_b_sweep(count: usize, xi_points: usize, delta: f64, seed: u64) -> Result<Vec<AppendixBTable>> {
    let grid = xi_grid(delta, xi_points);
    (0..count as u64)
        .map(|k| {
            let mut rng = RngStream::new(seed, k).rng();
            let n = rng.random_range(5..=60);
            let values: Vec<f64> = (0..n).map(|_| 2.0 * rng.random::<f64>()).collect();
            let spectrum = SpectrumModel::psd(values)?;
            let edge = spectrum.largest() + 2.0 * delta;
            let needed = (1.0 / stieltjes(&spectrum, edge)?).max(1.0 / t_transform(&spectrum, edge)?);
            let theta = needed * rng.random_range(1.05..3.0);
            verify_appendix_b(&spectrum, theta, delta, &grid)
        })
        .collect()
}
