//! Deterministic spectra built from limit-law quantiles at the midpoints
//! `(j − ½)/n`, used as the "given" spectrum of orthogonally invariant models.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::SpectrumModel;
use crate::roots::solve_decreasing;

fn midpoint_quantiles<F: Fn(f64) -> f64>(n: usize, cdf_of_angle: F, to_x: impl Fn(f64) -> f64) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let q = (j as f64 + 0.5) / n as f64;
            let u = solve_decreasing(|u| -cdf_of_angle(u), -q, 0.0, PI);
            to_x(u)
        })
        .collect()
}

/// Semicircle CDF in the angle `x = −2cos u`: `(u − sin u cos u)/π`.
pub fn semicircle_cdf(x: f64) -> f64 {
    if x <= -2.0 {
        return 0.0;
    }
    if x >= 2.0 {
        return 1.0;
    }
    let u = (-x / 2.0).acos();
    (u - u.sin() * u.cos()) / PI
}

/// `n` semicircle quantiles on `[−2, 2]`.
pub fn semicircle_quantiles(n: usize) -> Result<SpectrumModel> {
    if n == 0 {
        return Err(Error::Size("need at least one quantile".into()));
    }
    let values = midpoint_quantiles(n, |u| (u - u.sin() * u.cos()) / PI, |u| -2.0 * u.cos());
    SpectrumModel::new(values)
}

/// Marchenko–Pastur CDF in the angle `x = (1 + φ) − 2√φ·cos u`, integrated in
/// closed form.
fn mp_cdf_angle(phi: f64, u: f64) -> f64 {
    let r = phi.sqrt();
    let ratio = (1.0 + r) / (1.0 - r);
    let arctan = if u >= PI {
        PI / 2.0
    } else {
        (ratio * (u / 2.0).tan()).atan()
    };
    ((1.0 + phi) * u + 2.0 * r * u.sin() - 2.0 * (1.0 - phi) * arctan) / (2.0 * PI * phi)
}

pub fn mp_cdf(phi: f64, x: f64) -> f64 {
    let (c, r) = (1.0 + phi, 2.0 * phi.sqrt());
    let arg = (c - x) / r;
    if arg >= 1.0 {
        0.0
    } else if arg <= -1.0 {
        1.0
    } else {
        mp_cdf_angle(phi, arg.acos())
    }
}

/// `n` Marchenko–Pastur quantiles on `[γ₋, γ₊]` for `0 < φ < 1`.
pub fn mp_quantiles(phi: f64, n: usize) -> Result<SpectrumModel> {
    if !(phi > 0.0 && phi < 1.0) {
        return Err(Error::Model(format!("phi = {phi} must lie in (0, 1)")));
    }
    if n == 0 {
        return Err(Error::Size("need at least one quantile".into()));
    }
    let (c, r) = (1.0 + phi, 2.0 * phi.sqrt());
    let values = midpoint_quantiles(n, |u| mp_cdf_angle(phi, u), |u| c - r * u.cos());
    SpectrumModel::psd(values)
}
