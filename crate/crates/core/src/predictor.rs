//! Predicted outlier locations, eigenvector projection norms and the
//! push-forward of a spike distribution through the location map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{target_index, Model, ModelKind, PerturbationSpec, Separation};
use crate::transforms::{
    invert_stieltjes, invert_t_transform, mp_t_transform_deriv, semicircle_stieltjes_deriv, stieltjes_deriv,
    t_transform_deriv,
};

/// Which location formula produced a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationFormula {
    /// `m_N^{-1}(1/θ)` for a given spectrum under additive perturbation.
    StieltjesInverse,
    /// `θ + 1/θ` for Wigner matrices.
    SemicircleMap,
    /// `T_N^{-1}(1/θ)` for a given PSD spectrum under multiplicative perturbation.
    TInverse,
    /// `φ + 1 + θ + φ/θ` for sample covariance matrices.
    MarchenkoPasturMap,
}

impl LocationFormula {
    pub fn for_kind(kind: ModelKind) -> Self {
        match kind {
            ModelKind::OrthInvariantAdditive => Self::StieltjesInverse,
            ModelKind::Wigner => Self::SemicircleMap,
            ModelKind::OrthInvariantMultiplicative => Self::TInverse,
            ModelKind::Wishart { .. } => Self::MarchenkoPasturMap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierPrediction {
    pub theta: f64,
    /// 1-based position of `theta` in the descending spike list.
    pub rank: usize,
    /// 1-based index into the descending spectrum of the perturbed matrix.
    pub target_index: usize,
    pub location: Option<f64>,
    pub projection_norm_sq: Option<f64>,
    pub formula: LocationFormula,
    pub separation: Separation,
}

/// The location map `γ(θ)` of `model`, without the separation check.
pub fn location_map(model: &Model, theta: f64) -> Result<f64> {
    match (model.kind(), model.spectrum()) {
        (ModelKind::Wigner, _) => Ok(theta + 1.0 / theta),
        (ModelKind::Wishart { phi, .. }, _) => Ok(phi + 1.0 + theta + phi / theta),
        (ModelKind::OrthInvariantAdditive, Some(s)) => invert_stieltjes(s, 1.0 / theta),
        (ModelKind::OrthInvariantMultiplicative, Some(s)) => invert_t_transform(s, 1.0 / theta),
        (_, None) => Err(Error::Model("orthogonally invariant model without a spectrum".into())),
    }
}

fn require_separated(model: &Model, delta: f64, theta: f64) -> Result<()> {
    let window = model.window(delta)?;
    if model.check_separation(&window, theta)?.is_separated() {
        Ok(())
    } else {
        Err(Error::NotSeparated {
            theta,
            threshold: model.separation_threshold(&window, theta),
        })
    }
}

pub fn predict_location(model: &Model, delta: f64, theta: f64) -> Result<f64> {
    require_separated(model, delta, theta)?;
    location_map(model, theta)
}

/// Derivative of the relevant transform at the predicted location `z`.
fn transform_deriv(model: &Model, z: f64) -> Result<f64> {
    match (model.kind(), model.spectrum()) {
        (ModelKind::Wigner, _) => semicircle_stieltjes_deriv(z),
        (ModelKind::Wishart { phi, .. }, _) => mp_t_transform_deriv(phi, z),
        (ModelKind::OrthInvariantAdditive, Some(s)) => stieltjes_deriv(s, z),
        (ModelKind::OrthInvariantMultiplicative, Some(s)) => t_transform_deriv(s, z),
        (_, None) => Err(Error::Model("orthogonally invariant model without a spectrum".into())),
    }
}

/// Predicted `‖ṽ‖²`, the squared norm of the outlier eigenvector projected on
/// the perturbation frame: `−1/(θ² m′(z))` additively, `−(θ+1)/(θ² z T′(z))`
/// multiplicatively, with `z` the predicted location.
pub fn predict_projection_norm(model: &Model, delta: f64, theta: f64) -> Result<f64> {
    let z = predict_location(model, delta, theta)?;
    let d = transform_deriv(model, z)?;
    Ok(if model.kind().is_multiplicative() {
        -(theta + 1.0) / (theta * theta * z * d)
    } else {
        -1.0 / (theta * theta * d)
    })
}

/// Predicted squared frame projection of `w = (I+P)^{-1/2} v / ‖(I+P)^{-1/2} v‖`,
/// `−1/(θ + θ² z T′(z))`. Multiplicative kinds only.
pub fn predict_w_projection_norm(model: &Model, delta: f64, theta: f64) -> Result<f64> {
    if !model.kind().is_multiplicative() {
        return Err(Error::Model("w-projection is defined for multiplicative models only".into()));
    }
    let z = predict_location(model, delta, theta)?;
    let d = transform_deriv(model, z)?;
    Ok(-1.0 / (theta + theta * theta * z * d))
}

/// One prediction per spike. Spikes below the separation threshold get
/// `location = None` rather than an error.
pub fn predict_all(model: &Model, delta: f64, pert: &PerturbationSpec, n: usize) -> Result<Vec<OutlierPrediction>> {
    let window = model.window(delta)?;
    let formula = LocationFormula::for_kind(model.kind());
    pert.thetas()
        .iter()
        .enumerate()
        .map(|(k, &theta)| {
            let separation = model.check_separation(&window, theta)?;
            let (location, projection_norm_sq) = if separation.is_separated() {
                (
                    Some(predict_location(model, delta, theta)?),
                    Some(predict_projection_norm(model, delta, theta)?),
                )
            } else {
                (None, None)
            };
            Ok(OutlierPrediction {
                theta,
                rank: k + 1,
                target_index: target_index(pert, n, k + 1)?,
                location,
                projection_norm_sq,
                formula,
                separation,
            })
        })
        .collect()
}

/// `γ(θ_i)` for every spike, sorted descending. Every spike must be separated.
pub fn pushforward_sample(model: &Model, delta: f64, thetas: &[f64]) -> Result<Vec<f64>> {
    if !matches!(model.kind(), ModelKind::Wigner | ModelKind::Wishart { .. }) {
        return Err(Error::Model("push-forward is defined for Wigner and Wishart models".into()));
    }
    let window = model.window(delta)?;
    let mut offenders = Vec::new();
    for &t in thetas {
        if !model.check_separation(&window, t)?.is_separated() {
            offenders.push(t);
        }
    }
    if !offenders.is_empty() {
        return Err(Error::NotSeparatedMany { offenders });
    }
    let mut mapped = thetas
        .iter()
        .map(|&t| location_map(model, t))
        .collect::<Result<Vec<_>>>()?;
    mapped.sort_by(|a, b| b.total_cmp(a));
    Ok(mapped)
}
