//! Stieltjes and T-transforms of empirical spectra and of the two limit laws,
//! together with their derivatives and monotone inverses.
//!
//! On each component of the complement of `[λ_N, λ₁]` both empirical
//! transforms are strictly decreasing, so their inverses are found by
//! bisection inside analytic brackets:
//!
//! * Stieltjes, `t > 0`: `max(λ₁, λ_N + 1/t) < m⁻¹(t) ≤ λ₁ + 1/t`
//! * Stieltjes, `t < 0`: `λ_N + 1/t ≤ m⁻¹(t) < min(λ_N, λ₁ + 1/t)`
//! * T-transform, `t > 0`: `λ₁ < T⁻¹(t) ≤ λ₁ + λ₁/t`
//!
//! The negative branch of the T-transform has no closed bracket and is found by
//! geometric expansion.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{mp_edges, SpectrumModel};
use crate::roots::{expand_until, solve_decreasing};

fn check_outside(spectrum: &SpectrumModel, z: f64) -> Result<()> {
    let (lo, hi) = (spectrum.smallest(), spectrum.largest());
    if z >= lo && z <= hi || !z.is_finite() {
        return Err(Error::Domain {
            value: z,
            lower: lo,
            upper: hi,
        });
    }
    Ok(())
}

fn check_psd(spectrum: &SpectrumModel) -> Result<()> {
    if !spectrum.is_psd() {
        return Err(Error::Model(
            "T-transform needs a positive semi-definite spectrum".into(),
        ));
    }
    Ok(())
}

fn mean_of<F: Fn(f64) -> f64>(values: &[f64], f: F) -> f64 {
    values.iter().map(|&l| f(l)).sum::<f64>() / values.len() as f64
}

fn m_raw(values: &[f64], z: f64) -> f64 {
    mean_of(values, |l| 1.0 / (z - l))
}

fn t_raw(values: &[f64], z: f64) -> f64 {
    mean_of(values, |l| l / (z - l))
}

/// `m_N(z) = (1/N) Σ 1/(z − λ_i)`.
pub fn stieltjes(spectrum: &SpectrumModel, z: f64) -> Result<f64> {
    check_outside(spectrum, z)?;
    Ok(m_raw(spectrum.values(), z))
}

/// `m_N′(z) = −(1/N) Σ 1/(z − λ_i)²`.
pub fn stieltjes_deriv(spectrum: &SpectrumModel, z: f64) -> Result<f64> {
    check_outside(spectrum, z)?;
    Ok(-mean_of(spectrum.values(), |l| (z - l).powi(-2)))
}

/// `T_N(z) = (1/N) Σ λ_i/(z − λ_i)`.
pub fn t_transform(spectrum: &SpectrumModel, z: f64) -> Result<f64> {
    check_psd(spectrum)?;
    check_outside(spectrum, z)?;
    Ok(t_raw(spectrum.values(), z))
}

/// `T_N′(z) = −(1/N) Σ λ_i/(z − λ_i)²`.
pub fn t_transform_deriv(spectrum: &SpectrumModel, z: f64) -> Result<f64> {
    check_psd(spectrum)?;
    check_outside(spectrum, z)?;
    Ok(-mean_of(spectrum.values(), |l| l / (z - l).powi(2)))
}

/// Second derivative `m_N″(z) = (2/N) Σ 1/(z − λ_i)³`.
pub fn stieltjes_second_deriv(spectrum: &SpectrumModel, z: f64) -> Result<f64> {
    check_outside(spectrum, z)?;
    Ok(2.0 * mean_of(spectrum.values(), |l| (z - l).powi(-3)))
}

/// `m_N⁻¹(t)`: the unique `z > λ₁` (for `t > 0`) or `z < λ_N` (for `t < 0`)
/// with `m_N(z) = t`.
pub fn invert_stieltjes(spectrum: &SpectrumModel, t: f64) -> Result<f64> {
    if t == 0.0 || !t.is_finite() {
        return Err(Error::OutOfRange {
            value: t,
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        });
    }
    let values = spectrum.values();
    let (top, bottom) = (spectrum.largest(), spectrum.smallest());
    let (lo, hi) = if t > 0.0 {
        ((bottom + 1.0 / t).max(top), top + 1.0 / t)
    } else {
        (bottom + 1.0 / t, (top + 1.0 / t).min(bottom))
    };
    if lo >= hi {
        // Degenerate bracket: every eigenvalue coincides.
        return Ok(if t > 0.0 { hi } else { lo });
    }
    Ok(solve_decreasing(|z| m_raw(values, z), t, lo, hi))
}

/// Range of the T-transform on `(−∞, λ_N)`: the open interval `(inf, 0)`.
/// `inf` is `−∞` when `λ_N > 0`, and minus the fraction of nonzero
/// eigenvalues when `λ_N = 0`.
pub fn t_transform_lower_range(spectrum: &SpectrumModel) -> f64 {
    if spectrum.smallest() > 0.0 {
        f64::NEG_INFINITY
    } else {
        let nonzero = spectrum.values().iter().filter(|&&l| l > 0.0).count();
        -(nonzero as f64) / spectrum.len() as f64
    }
}

/// `T_N⁻¹(t)` for a nonzero positive semi-definite spectrum.
pub fn invert_t_transform(spectrum: &SpectrumModel, t: f64) -> Result<f64> {
    check_psd(spectrum)?;
    if spectrum.is_zero() {
        return Err(Error::Model("T-transform of the zero spectrum vanishes identically".into()));
    }
    let values = spectrum.values();
    let top = spectrum.largest();
    let bottom = spectrum.smallest();
    let t_of = |z: f64| t_raw(values, z);
    if t > 0.0 && t.is_finite() {
        return Ok(solve_decreasing(t_of, t, top, top + top / t));
    }
    let inf = t_transform_lower_range(spectrum);
    if !(t < 0.0 && t > inf) {
        return Err(Error::OutOfRange {
            value: t,
            lower: inf,
            upper: 0.0,
        });
    }
    let lo = expand_until(bottom, bottom - 1.0, 2000, |z| t_of(z) > t).ok_or(Error::OutOfRange {
        value: t,
        lower: inf,
        upper: 0.0,
    })?;
    let mut gap = (bottom - lo) * 0.5;
    let mut hi = bottom - gap;
    for _ in 0..2000 {
        if t_of(hi) <= t {
            break;
        }
        gap *= 0.5;
        hi = bottom - gap;
        if gap == 0.0 {
            return Err(Error::OutOfRange {
                value: t,
                lower: inf,
                upper: 0.0,
            });
        }
    }
    Ok(solve_decreasing(t_of, t, lo, hi))
}

/// Stieltjes transform of the semicircle law for `|z| ≥ 2`,
/// `(z − sgn(z)√(z² − 4))/2`, evaluated in the cancellation-free form
/// `2/(z + sgn(z)√(z² − 4))`.
pub fn semicircle_stieltjes(z: f64) -> Result<f64> {
    if !(z.abs() >= 2.0) {
        return Err(Error::Domain {
            value: z,
            lower: -2.0,
            upper: 2.0,
        });
    }
    let root = (z * z - 4.0).max(0.0).sqrt();
    Ok(2.0 / (z + z.signum() * root))
}

/// `m_sc′(z) = m²/(m² − 1)`, from differentiating `m + 1/m = z`. Diverges at the
/// edges, so `|z| > 2` is required.
pub fn semicircle_stieltjes_deriv(z: f64) -> Result<f64> {
    if !(z.abs() > 2.0) {
        return Err(Error::Domain {
            value: z,
            lower: -2.0,
            upper: 2.0,
        });
    }
    let m = semicircle_stieltjes(z)?;
    Ok(m * m / (m * m - 1.0))
}

/// `m_sc⁻¹(t) = t + 1/t` for `0 < |t| ≤ 1`.
pub fn invert_semicircle_stieltjes(t: f64) -> Result<f64> {
    if t == 0.0 || !(t.abs() <= 1.0) {
        return Err(Error::OutOfRange {
            value: t,
            lower: -1.0,
            upper: 1.0,
        });
    }
    Ok(t + 1.0 / t)
}

fn check_phi(phi: f64) -> Result<()> {
    if !(phi > 0.0 && phi < 1.0) {
        return Err(Error::Model(format!("phi = {phi} must lie in (0, 1)")));
    }
    Ok(())
}

/// Pieces shared by the Marchenko–Pastur T-transform and its derivative:
/// `a = z − φ − 1`, `s = √((z − γ₋)(z − γ₊))` and the branch sign.
fn mp_parts(phi: f64, z: f64) -> (f64, f64, f64) {
    let (lo, hi) = mp_edges(phi);
    let a = z - phi - 1.0;
    let s = ((z - lo) * (z - hi)).max(0.0).sqrt();
    let sign = if z >= hi { 1.0 } else { -1.0 };
    (a, s, sign)
}

/// T-transform of the Marchenko–Pastur law,
/// `(z − φ − 1 − sgn(z − γ₊)√((z − γ₋)(z − γ₊)))/(2φ)`, written as
/// `2/(a + sgn·s)` to avoid cancellation.
pub fn mp_t_transform(phi: f64, z: f64) -> Result<f64> {
    check_phi(phi)?;
    let (lo, hi) = mp_edges(phi);
    if z > lo && z < hi || !z.is_finite() {
        return Err(Error::Domain {
            value: z,
            lower: lo,
            upper: hi,
        });
    }
    let (a, s, sign) = mp_parts(phi, z);
    Ok(2.0 / (a + sign * s))
}

/// `T_mp′(z) = −2/(s(s + sgn·a))`, strictly outside `[γ₋, γ₊]`.
pub fn mp_t_transform_deriv(phi: f64, z: f64) -> Result<f64> {
    check_phi(phi)?;
    let (lo, hi) = mp_edges(phi);
    if z >= lo && z <= hi || !z.is_finite() {
        return Err(Error::Domain {
            value: z,
            lower: lo,
            upper: hi,
        });
    }
    let (a, s, sign) = mp_parts(phi, z);
    Ok(-2.0 / (s * (s + sign * a)))
}

/// `T_mp⁻¹(t) = φ + 1 + 1/t + φt`, valid for `0 < |t| ≤ 1/√φ`.
pub fn invert_mp_t_transform(phi: f64, t: f64) -> Result<f64> {
    check_phi(phi)?;
    let bound = 1.0 / phi.sqrt();
    if t == 0.0 || !(t.abs() <= bound) {
        return Err(Error::OutOfRange {
            value: t,
            lower: -bound,
            upper: bound,
        });
    }
    Ok(phi + 1.0 + 1.0 / t + phi * t)
}

/// `ρ_sc(x) = √(4 − x²)/(2π)` on `[−2, 2]`.
pub fn semicircle_density(x: f64) -> f64 {
    if x.abs() >= 2.0 {
        0.0
    } else {
        (4.0 - x * x).sqrt() / (2.0 * PI)
    }
}

/// `ρ_mp(x) = √((γ₊ − x)(x − γ₋))/(2πφx)` on `[γ₋, γ₊]`.
pub fn mp_density(phi: f64, x: f64) -> f64 {
    let (lo, hi) = mp_edges(phi);
    if x <= lo || x >= hi {
        0.0
    } else {
        ((hi - x) * (x - lo)).sqrt() / (2.0 * PI * phi * x)
    }
}

/// One of the four transforms handled by this module.
#[derive(Debug, Clone, PartialEq)]
pub enum TransformKind {
    EmpiricalStieltjes(SpectrumModel),
    EmpiricalT(SpectrumModel),
    SemicircleStieltjes,
    MarchenkoPasturT { phi: f64 },
}

impl TransformKind {
    pub fn empirical_t(spectrum: SpectrumModel) -> Result<Self> {
        check_psd(&spectrum)?;
        Ok(Self::EmpiricalT(spectrum))
    }

    pub fn marchenko_pastur(phi: f64) -> Result<Self> {
        check_phi(phi)?;
        Ok(Self::MarchenkoPasturT { phi })
    }

    pub fn evaluate(&self, z: f64) -> Result<f64> {
        match self {
            Self::EmpiricalStieltjes(s) => stieltjes(s, z),
            Self::EmpiricalT(s) => t_transform(s, z),
            Self::SemicircleStieltjes => semicircle_stieltjes(z),
            Self::MarchenkoPasturT { phi } => mp_t_transform(*phi, z),
        }
    }

    pub fn derivative(&self, z: f64) -> Result<f64> {
        match self {
            Self::EmpiricalStieltjes(s) => stieltjes_deriv(s, z),
            Self::EmpiricalT(s) => t_transform_deriv(s, z),
            Self::SemicircleStieltjes => semicircle_stieltjes_deriv(z),
            Self::MarchenkoPasturT { phi } => mp_t_transform_deriv(*phi, z),
        }
    }

    pub fn invert(&self, t: f64) -> Result<f64> {
        match self {
            Self::EmpiricalStieltjes(s) => invert_stieltjes(s, t),
            Self::EmpiricalT(s) => invert_t_transform(s, t),
            Self::SemicircleStieltjes => invert_semicircle_stieltjes(t),
            Self::MarchenkoPasturT { phi } => invert_mp_t_transform(*phi, t),
        }
    }

    /// Limit-law density; the empirical kinds have none.
    pub fn density(&self, x: f64) -> Result<f64> {
        match self {
            Self::SemicircleStieltjes => Ok(semicircle_density(x)),
            Self::MarchenkoPasturT { phi } => Ok(mp_density(*phi, x)),
            _ => Err(Error::Model("empirical spectra have no density".into())),
        }
    }
}
