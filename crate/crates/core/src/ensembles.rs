//! Seeded random matrix ensembles and the two perturbation constructions.

use std::sync::Once;

use faer::{Par, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelKind, PerturbationSpec, SpectrumModel};
use crate::Matrix;

/// Symmetry tolerance, relative to `max(1, max|a_ij|)`.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Eigenvalues of a PSD input below `-PSD_CLIP` are rejected, the rest clipped to 0.
pub const PSD_CLIP: f64 = 1e-10;

/// A `(master_seed, stream_id)` pair. Each pair names an independent ChaCha8
/// stream; trials use their index as the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self { master_seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryLaw {
    #[default]
    Gaussian,
    Rademacher,
}

impl EntryLaw {
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            EntryLaw::Gaussian => rng.sample(StandardNormal),
            EntryLaw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// A matrix known to be symmetric positive semi-definite, either by
/// construction or because its spectrum was checked.
#[derive(Debug, Clone)]
pub struct PsdMatrix(Matrix);

impl PsdMatrix {
    /// Checks the spectrum; eigenvalues in `[-1e-10, 0)` are clipped to zero.
    pub fn new(a: Matrix) -> Result<Self> {
        let eig = eigensolve(&a)?;
        let min = eig.values.last().copied().unwrap_or(0.0);
        if min < -PSD_CLIP {
            return Err(Error::Model(format!("matrix is not PSD (smallest eigenvalue {min:e})")));
        }
        if min >= 0.0 {
            return Ok(Self(a));
        }
        let clipped: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0)).collect();
        Ok(Self(reconstruct(&eig.vectors, &clipped)))
    }

    pub fn diagonal(spectrum: &SpectrumModel) -> Result<Self> {
        if !spectrum.is_psd() {
            return Err(Error::Model("spectrum has negative eigenvalues".into()));
        }
        Ok(Self(diagonal(spectrum.values())))
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }
}

pub fn diagonal(values: &[f64]) -> Matrix {
    let n = values.len();
    Matrix::from_fn(n, n, |i, j| if i == j { values[i] } else { 0.0 })
}

/// `(A + Aᵀ)/2`, which is exactly symmetric in floating point.
pub fn symmetrize(a: &Matrix) -> Matrix {
    Matrix::from_fn(a.nrows(), a.ncols(), |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

pub fn max_asymmetry(a: &Matrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

fn max_abs(a: &Matrix) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].abs());
        }
    }
    m
}

/// `V diag(d) Vᵀ`, symmetrized.
fn reconstruct(v: &Matrix, d: &[f64]) -> Matrix {
    let scaled = Matrix::from_fn(v.nrows(), v.ncols(), |i, k| v[(i, k)] * d[k]);
    symmetrize(&(&scaled * v.transpose()))
}

/// Wigner matrix: i.i.d. entries of `law/√n` on and above the diagonal, mirrored.
pub fn sample_wigner<R: Rng + ?Sized>(n: usize, law: EntryLaw, rng: &mut R) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::Size("Wigner dimension must be at least 1".into()));
    }
    let scale = 1.0 / (n as f64).sqrt();
    let mut w = Matrix::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let x = law.sample(rng) * scale;
            w[(i, j)] = x;
            w[(j, i)] = x;
        }
    }
    Ok(w)
}

/// Sample covariance `X Xᵀ` with `X` an `n×p` matrix of i.i.d. `law/√p` entries.
pub fn sample_wishart<R: Rng + ?Sized>(n: usize, p: usize, law: EntryLaw, rng: &mut R) -> Result<PsdMatrix> {
    if n == 0 {
        return Err(Error::Size("Wishart dimension must be at least 1".into()));
    }
    if n > p {
        return Err(Error::Size(format!("Wishart needs n <= p, got n = {n}, p = {p}")));
    }
    let scale = 1.0 / (p as f64).sqrt();
    let mut x = Matrix::zeros(n, p);
    for j in 0..p {
        for i in 0..n {
            x[(i, j)] = law.sample(rng) * scale;
        }
    }
    let w = &x * x.transpose();
    // Copy the lower triangle up so the result is exactly symmetric.
    Ok(PsdMatrix(Matrix::from_fn(n, n, |i, j| if i >= j { w[(i, j)] } else { w[(j, i)] })))
}

/// Haar-distributed point on the Stiefel manifold of `n×m` orthonormal frames:
/// thin QR of a Gaussian matrix with the column signs fixed so that `R` has a
/// positive diagonal.
pub fn sample_haar_frame<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<Matrix> {
    if m > n {
        return Err(Error::Size(format!("frame needs m <= n, got m = {m}, n = {n}")));
    }
    if m == 0 {
        return Ok(Matrix::zeros(n, 0));
    }
    let mut g = Matrix::zeros(n, m);
    for j in 0..m {
        for i in 0..n {
            g[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let qr = g.qr();
    let r = qr.thin_R();
    let mut q = qr.compute_thin_Q();
    for k in 0..m {
        if r[(k, k)] < 0.0 {
            for i in 0..n {
                q[(i, k)] = -q[(i, k)];
            }
        }
    }
    Ok(q)
}

pub fn sample_haar_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Matrix> {
    sample_haar_frame(n, n, rng)
}

/// `Uᵀ diag(λ) U` for a full Haar orthogonal `U`.
pub fn sample_conjugated<R: Rng + ?Sized>(spectrum: &SpectrumModel, rng: &mut R) -> Result<Matrix> {
    let n = spectrum.len();
    let u = sample_haar_orthogonal(n, rng)?;
    let lambda = spectrum.values();
    let scaled = Matrix::from_fn(n, n, |k, j| lambda[k] * u[(k, j)]);
    Ok(symmetrize(&(u.transpose() * &scaled)))
}

fn check_square(a: &Matrix) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::Size(format!("expected a square matrix, got {}x{}", a.nrows(), a.ncols())));
    }
    Ok(a.nrows())
}

fn check_frame_rows(pert: &PerturbationSpec, n: usize) -> Result<()> {
    if let Some(v) = pert.frame() {
        if v.nrows() != n {
            return Err(Error::Size(format!("frame has {} rows, matrix has {n}", v.nrows())));
        }
    } else if pert.rank() > n {
        return Err(Error::Size(format!("rank {} exceeds dimension {n}", pert.rank())));
    }
    Ok(())
}

/// `W + V diag(θ) Vᵀ`, or `θ_i` added on the leading diagonal when there is no frame.
pub fn perturb_additive(base: &Matrix, pert: &PerturbationSpec) -> Result<Matrix> {
    let n = check_square(base)?;
    check_frame_rows(pert, n)?;
    let mut out = base.clone();
    match pert.frame() {
        None => {
            for (i, &t) in pert.thetas().iter().enumerate() {
                out[(i, i)] += t;
            }
        }
        Some(v) => {
            let low_rank = reconstruct(v, pert.thetas());
            for j in 0..n {
                for i in 0..n {
                    out[(i, j)] += low_rank[(i, j)];
                }
            }
        }
    }
    Ok(out)
}

/// `S W S` with `S = I + V diag(√(1+θ) − 1) Vᵀ = (I + P)^{1/2}`.
///
/// With a frame this uses `SWS = W + V D Gᵀ + G D Vᵀ + V D (VᵀG) D Vᵀ`,
/// `G = W V`, which costs `O(n²m)` instead of two dense products.
pub fn perturb_multiplicative(base: &PsdMatrix, pert: &PerturbationSpec) -> Result<Matrix> {
    pert.validate_multiplicative()?;
    let w = base.as_matrix();
    let n = check_square(w)?;
    check_frame_rows(pert, n)?;
    let d: Vec<f64> = pert.thetas().iter().map(|&t| (1.0 + t).sqrt() - 1.0).collect();
    match pert.frame() {
        None => {
            let mut s = vec![1.0; n];
            for (i, di) in d.iter().enumerate() {
                s[i] += di;
            }
            Ok(Matrix::from_fn(n, n, |i, j| s[i] * w[(i, j)] * s[j]))
        }
        Some(v) => {
            let m = v.ncols();
            let g = w * v;
            let gd = Matrix::from_fn(n, m, |i, k| g[(i, k)] * d[k]);
            let vtg = v.transpose() * &g;
            let core = Matrix::from_fn(m, m, |a, b| d[a] * vtg[(a, b)] * d[b]);
            let cross = &gd * v.transpose();
            let corner = &(v * &core) * v.transpose();
            let out = Matrix::from_fn(n, n, |i, j| w[(i, j)] + cross[(i, j)] + cross[(j, i)] + corner[(i, j)]);
            Ok(symmetrize(&out))
        }
    }
}

/// Eigenpairs sorted by descending eigenvalue; column `k` of `vectors` belongs
/// to `values[k]`.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

static SEQUENTIAL: Once = Once::new();

/// Dense kernels run single-threaded so results are bit-identical regardless
/// of the thread pool; parallelism comes from running trials concurrently.
pub(crate) fn sequential_kernels() {
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(Par::Seq));
}

fn check_symmetric(a: &Matrix) -> Result<()> {
    check_square(a)?;
    let asym = max_asymmetry(a);
    if asym > SYMMETRY_TOL * max_abs(a).max(1.0) {
        return Err(Error::Symmetry { asymmetry: asym });
    }
    Ok(())
}

pub fn eigensolve(a: &Matrix) -> Result<Eigen> {
    check_symmetric(a)?;
    sequential_kernels();
    let n = a.nrows();
    let evd = a.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Eigensolve)?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let values = (0..n).map(|k| s[n - 1 - k]).collect();
    let vectors = Matrix::from_fn(n, n, |i, k| u[(i, n - 1 - k)]);
    Ok(Eigen { values, vectors })
}

/// Eigenvalues only, descending.
pub fn eigenvalues(a: &Matrix) -> Result<Vec<f64>> {
    check_symmetric(a)?;
    sequential_kernels();
    let mut values = a.self_adjoint_eigenvalues(Side::Lower).map_err(|_| Error::Eigensolve)?;
    values.reverse();
    Ok(values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: ModelKind,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub stream_id: u64,
    pub law: EntryLaw,
}

#[derive(Debug, Clone)]
pub struct EnsembleSample {
    pub base: Matrix,
    pub perturbed: Matrix,
    pub provenance: Provenance,
}

impl EnsembleSample {
    /// Draws the unperturbed matrix for `kind` and applies `pert` with the
    /// matching construction. Orthogonally invariant kinds conjugate `spectrum`
    /// by a full Haar rotation.
    pub fn draw(
        kind: &ModelKind,
        spectrum: Option<&SpectrumModel>,
        n: usize,
        pert: &PerturbationSpec,
        law: EntryLaw,
        stream: RngStream,
    ) -> Result<Self> {
        let mut rng = stream.rng();
        let need_spectrum = || {
            let s = spectrum.ok_or_else(|| Error::Model("orthogonally invariant kinds need a spectrum".into()))?;
            if s.len() != n {
                return Err(Error::Size(format!("spectrum has {} values, n = {n}", s.len())));
            }
            Ok(s)
        };
        let (base, perturbed) = match kind {
            ModelKind::Wigner => {
                let w = sample_wigner(n, law, &mut rng)?;
                let p = perturb_additive(&w, pert)?;
                (w, p)
            }
            ModelKind::Wishart { p: cols, .. } => {
                let w = sample_wishart(n, *cols, law, &mut rng)?;
                let p = perturb_multiplicative(&w, pert)?;
                (w.into_matrix(), p)
            }
            ModelKind::OrthInvariantAdditive => {
                let w = sample_conjugated(need_spectrum()?, &mut rng)?;
                let p = perturb_additive(&w, pert)?;
                (w, p)
            }
            ModelKind::OrthInvariantMultiplicative => {
                let s = need_spectrum()?;
                if !s.is_psd() {
                    return Err(Error::Model("multiplicative model needs a PSD spectrum".into()));
                }
                // Conjugation preserves the (checked) spectrum, so the result is PSD.
                let w = PsdMatrix(sample_conjugated(s, &mut rng)?);
                let p = perturb_multiplicative(&w, pert)?;
                (w.into_matrix(), p)
            }
        };
        Ok(Self {
            base,
            perturbed,
            provenance: Provenance {
                kind: kind.clone(),
                n,
                m: pert.rank(),
                seed: stream.master_seed,
                stream_id: stream.stream_id,
                law,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gram_error(q: &Matrix) -> f64 {
        let g = q.transpose() * q;
        let mut worst = 0.0f64;
        for j in 0..g.ncols() {
            for i in 0..g.nrows() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }

    fn frobenius(a: &Matrix) -> f64 {
        let mut s = 0.0;
        for j in 0..a.ncols() {
            for i in 0..a.nrows() {
                s += a[(i, j)] * a[(i, j)];
            }
        }
        s.sqrt()
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a = sample_wigner(5, EntryLaw::Gaussian, &mut RngStream::new(7, 0).rng()).unwrap();
        let b = sample_wigner(5, EntryLaw::Gaussian, &mut RngStream::new(7, 0).rng()).unwrap();
        let c = sample_wigner(5, EntryLaw::Gaussian, &mut RngStream::new(7, 1).rng()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn one_by_one_samples() {
        let mut rng = RngStream::new(3, 0).rng();
        let g: f64 = EntryLaw::Gaussian.sample(&mut RngStream::new(3, 0).rng());
        let w = sample_wigner(1, EntryLaw::Gaussian, &mut rng).unwrap();
        assert_eq!(w[(0, 0)], g);
        let x = EntryLaw::Rademacher.sample(&mut RngStream::new(4, 0).rng());
        let ws = sample_wishart(1, 1, EntryLaw::Rademacher, &mut RngStream::new(4, 0).rng()).unwrap();
        assert_eq!(ws.as_matrix()[(0, 0)], x * x);
        assert!(sample_wigner(0, EntryLaw::Gaussian, &mut rng).is_err());
        assert!(sample_wishart(3, 2, EntryLaw::Gaussian, &mut rng).is_err());
    }

    #[test]
    fn rademacher_moments() {
        let mut rng = RngStream::new(11, 0).rng();
        let xs: Vec<f64> = (0..20_000).map(|_| EntryLaw::Rademacher.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.03);
        assert!(xs.iter().all(|x| x * x == 1.0));
    }

    #[test]
    fn haar_frame_is_orthonormal() {
        let mut rng = RngStream::new(1, 0).rng();
        let q = sample_haar_frame(1000, 10, &mut rng).unwrap();
        assert!(gram_error(&q) <= 1e-10);
        let one = sample_haar_frame(1, 1, &mut rng).unwrap();
        assert_eq!(one[(0, 0)].abs(), 1.0);
        assert!(sample_haar_frame(2, 3, &mut rng).is_err());
    }

    #[test]
    fn one_by_one_haar_signs_are_balanced() {
        let mut rng = RngStream::new(2, 0).rng();
        let positive = (0..4000)
            .filter(|_| sample_haar_frame(1, 1, &mut rng).unwrap()[(0, 0)] > 0.0)
            .count();
        // Binomial(4000, 1/2) has standard deviation ~32.
        assert!((positive as i64 - 2000).abs() < 150, "{positive}");
    }

    #[test]
    fn conjugation_preserves_spectrum() {
        let mut rng = RngStream::new(5, 0).rng();
        let c = SpectrumModel::constant(40, 1.7).unwrap();
        let w = sample_conjugated(&c, &mut rng).unwrap();
        for j in 0..40 {
            for i in 0..40 {
                let target = if i == j { 1.7 } else { 0.0 };
                assert!((w[(i, j)] - target).abs() < 1e-12);
            }
        }
        let s = SpectrumModel::new((0..60).map(|k| (k as f64 * 0.37).sin() * 2.0).collect()).unwrap();
        let w = sample_conjugated(&s, &mut rng).unwrap();
        let ev = eigenvalues(&w).unwrap();
        for (a, b) in ev.iter().zip(s.values()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn additive_examples() {
        let base = Matrix::zeros(4, 4);
        let pert = PerturbationSpec::new(vec![3.0]).unwrap();
        let out = perturb_additive(&base, &pert).unwrap();
        assert_eq!(out[(0, 0)], 3.0);
        assert_eq!(frobenius(&out), 3.0);

        let mut rng = RngStream::new(9, 0).rng();
        let v = sample_haar_frame(6, 3, &mut rng).unwrap();
        let pert = PerturbationSpec::with_frame(vec![2.0, -1.0, 0.5], v).unwrap();
        let ev = eigenvalues(&perturb_additive(&Matrix::zeros(6, 6), &pert).unwrap()).unwrap();
        let expected = [2.0, 0.5, 0.0, 0.0, 0.0, -1.0];
        for (a, b) in ev.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(perturb_additive(&Matrix::zeros(2, 2), &PerturbationSpec::new(vec![1.0; 3]).unwrap()).is_err());
    }

    #[test]
    fn empty_perturbations_are_identities() {
        let mut rng = RngStream::new(10, 0).rng();
        let w = sample_wishart(8, 16, EntryLaw::Gaussian, &mut rng).unwrap();
        let empty = PerturbationSpec::empty();
        assert_eq!(perturb_additive(w.as_matrix(), &empty).unwrap(), *w.as_matrix());
        assert_eq!(perturb_multiplicative(&w, &empty).unwrap(), *w.as_matrix());
    }

    #[test]
    fn multiplicative_identity_base() {
        let base = PsdMatrix::diagonal(&SpectrumModel::constant(5, 1.0).unwrap()).unwrap();
        let pert = PerturbationSpec::new(vec![3.0]).unwrap();
        let out = perturb_multiplicative(&base, &pert).unwrap();
        assert_eq!(out, diagonal(&[4.0, 1.0, 1.0, 1.0, 1.0]));
        assert!(perturb_multiplicative(&base, &PerturbationSpec::new(vec![-1.0]).unwrap()).is_err());
    }

    #[test]
    fn low_rank_product_matches_dense_square_root() {
        let mut rng = RngStream::new(12, 0).rng();
        let w = sample_wishart(30, 50, EntryLaw::Gaussian, &mut rng).unwrap();
        let v = sample_haar_frame(30, 4, &mut rng).unwrap();
        let thetas = [1.5, 0.4, -0.3, -0.6];
        let pert = PerturbationSpec::with_frame(thetas.to_vec(), v).unwrap();
        let fast = perturb_multiplicative(&w, &pert).unwrap();

        let vf = pert.frame().unwrap();
        let d: Vec<f64> = pert.thetas().iter().map(|t| (1.0 + t).sqrt() - 1.0).collect();
        let mut s = reconstruct(vf, &d);
        for i in 0..30 {
            s[(i, i)] += 1.0;
        }
        let dense = &(&s * w.as_matrix()) * &s;
        let mut worst = 0.0f64;
        for j in 0..30 {
            for i in 0..30 {
                worst = worst.max((fast[(i, j)] - dense[(i, j)]).abs());
            }
        }
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn psd_checks() {
        assert!(PsdMatrix::new(diagonal(&[1.0, -1e-3])).is_err());
        let clipped = PsdMatrix::new(diagonal(&[1.0, -1e-12])).unwrap();
        assert!(eigenvalues(clipped.as_matrix()).unwrap().iter().all(|&l| l >= -1e-15));
        assert!(PsdMatrix::diagonal(&SpectrumModel::new(vec![1.0, -1.0]).unwrap()).is_err());
    }

    #[test]
    fn eigensolve_examples() {
        let e = eigensolve(&diagonal(&[1.0, 2.0])).unwrap();
        assert_eq!(e.values, vec![2.0, 1.0]);
        assert!((e.vectors[(1, 0)].abs() - 1.0).abs() < 1e-15);

        let (c, s) = (0.6f64, 0.8f64);
        let g = Matrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) | (1, 1) => c,
            (0, 1) => -s,
            _ => s,
        });
        let rotated = symmetrize(&(&(&g * diagonal(&[2.0, 1.0])) * g.transpose()));
        let e = eigensolve(&rotated).unwrap();
        assert!((e.values[0] - 2.0).abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);
        // Top eigenvector is the first column of the rotation, up to sign.
        let dot = e.vectors[(0, 0)] * c + e.vectors[(1, 0)] * s;
        assert!((dot.abs() - 1.0).abs() < 1e-14);

        let mut bad = Matrix::zeros(2, 2);
        bad[(0, 1)] = 1e-6;
        assert!(matches!(eigensolve(&bad), Err(Error::Symmetry { .. })));
    }

    #[test]
    fn eigensolve_reconstructs_random_matrix() {
        let a = sample_wigner(50, EntryLaw::Gaussian, &mut RngStream::new(13, 0).rng()).unwrap();
        let e = eigensolve(&a).unwrap();
        let back = reconstruct(&e.vectors, &e.values);
        let mut diff = a.clone();
        for j in 0..50 {
            for i in 0..50 {
                diff[(i, j)] -= back[(i, j)];
            }
        }
        assert!(frobenius(&diff) <= 1e-10 * frobenius(&a));
        assert!(gram_error(&e.vectors) <= 1e-10);
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        let vals = eigenvalues(&a).unwrap();
        for (x, y) in vals.iter().zip(&e.values) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn draw_records_provenance() {
        let pert = PerturbationSpec::new(vec![2.0]).unwrap();
        let s = EnsembleSample::draw(&ModelKind::Wigner, None, 10, &pert, EntryLaw::Gaussian, RngStream::new(1, 4)).unwrap();
        assert_eq!(s.provenance.stream_id, 4);
        assert_eq!(s.provenance.m, 1);
        assert_eq!(s.perturbed[(0, 0)], s.base[(0, 0)] + 2.0);
        assert!(EnsembleSample::draw(&ModelKind::OrthInvariantAdditive, None, 10, &pert, EntryLaw::Gaussian, RngStream::new(1, 0)).is_err());
    }
}
