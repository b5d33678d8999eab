use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::{eigenvalues, sample_haar_frame, symmetrize, RngStream};
use crate::error::{Error, Result};
use crate::model::SpectrumModel;
use crate::stats::{median, quantile};
use crate::transforms::stieltjes;
use crate::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationSummary {
    pub n: usize,
    pub m: usize,
    pub z: f64,
    pub norms: Vec<f64>,
    pub median: f64,
    pub p95: f64,
}

/// `‖Uᵀ A U − (Tr A / N) I‖` for `A = (z − diag(λ))^{-1}`.
pub fn concentration_deviation(frame: &Matrix, spectrum: &SpectrumModel, z: f64) -> Result<f64> {
    let (n, m) = (frame.nrows(), frame.ncols());
    if n != spectrum.len() {
        return Err(Error::Size(format!("frame has {n} rows, spectrum {} values", spectrum.len())));
    }
    let mean = stieltjes(spectrum, z)?;
    let a: Vec<f64> = spectrum.values().iter().map(|&l| 1.0 / (z - l)).collect();
    let scaled = Matrix::from_fn(n, m, |k, j| a[k] * frame[(k, j)]);
    let mut g = frame.transpose() * &scaled;
    for j in 0..m {
        g[(j, j)] -= mean;
    }
    let ev = eigenvalues(&symmetrize(&g))?;
    Ok(ev.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
}

/// Deviation norms over `trials` independent Haar frames of size `n×m`.
pub fn run_concentration_experiment(
    n: usize,
    m: usize,
    z: f64,
    spectrum: &SpectrumModel,
    trials: usize,
    seed: u64,
) -> Result<ConcentrationSummary> {
    if m > n || m == 0 {
        return Err(Error::Size(format!("need 1 <= m <= n, got m = {m}, n = {n}")));
    }
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    stieltjes(spectrum, z)?;
    let norms = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = RngStream::new(seed, t).rng();
            let frame = sample_haar_frame(n, m, &mut rng)?;
            concentration_deviation(&frame, spectrum, z)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ConcentrationSummary {
        n,
        m,
        z,
        median: median(&norms).expect("at least one trial"),
        p95: quantile(&norms, 0.95).expect("at least one trial"),
        norms,
    })
}
