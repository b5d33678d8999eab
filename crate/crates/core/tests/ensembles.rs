use meso_spectra::ensembles::{
    eigenvalues, sample_conjugated, sample_haar_frame, sample_haar_orthogonal, sample_wigner, sample_wishart, EntryLaw,
    RngStream,
};
use meso_spectra::experiments::concentration_deviation;
use meso_spectra::model::{mp_edges, SpectrumModel};
use meso_spectra::quantiles::semicircle_quantiles;
use meso_spectra::stats::{ks_critical_001, ks_statistic, mean};
use meso_spectra::transforms::stieltjes;
use rayon::prelude::*;

fn norm_sq_over_n(a: &meso_spectra::Matrix) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            s += a[(i, j)].powi(2);
        }
    }
    s / n as f64
}

#[test]
fn wigner_edge_and_second_moment() {
    let n = 2000;
    let stats: Vec<(f64, f64)> = (0..50u64)
        .into_par_iter()
        .map(|s| {
            let w = sample_wigner(n, EntryLaw::Gaussian, &mut RngStream::new(100, s).rng()).unwrap();
            (eigenvalues(&w).unwrap()[0], norm_sq_over_n(&w))
        })
        .collect();
    let inside = stats.iter().filter(|(l, _)| (1.9..=2.1).contains(l)).count();
    assert!(inside >= 48, "{inside} of 50 edges in [1.9, 2.1]");
    for &(_, m2) in &stats {
        assert!((0.93..=1.07).contains(&m2), "(1/N) Tr W^2 = {m2}");
    }
}

#[test]
fn wishart_edges() {
    let (n, p) = (1000, 4000);
    let (lo, hi) = mp_edges(0.25);
    let edges: Vec<(f64, f64)> = (0..50u64)
        .into_par_iter()
        .map(|s| {
            let w = sample_wishart(n, p, EntryLaw::Gaussian, &mut RngStream::new(200, s).rng()).unwrap();
            let ev = eigenvalues(w.as_matrix()).unwrap();
            (ev[0], ev[n - 1])
        })
        .collect();
    let top = edges.iter().filter(|(l, _)| (l - hi).abs() <= 0.1).count();
    let bottom = edges.iter().filter(|(_, l)| (l - lo).abs() <= 0.1).count();
    assert!(top >= 48 && bottom >= 48, "top {top}, bottom {bottom}");
}

#[test]
fn rademacher_wigner_has_the_same_edge() {
    let w = sample_wigner(1000, EntryLaw::Rademacher, &mut RngStream::new(300, 0).rng()).unwrap();
    let ev = eigenvalues(&w).unwrap();
    assert!((ev[0] - 2.0).abs() < 0.1 && (ev[999] + 2.0).abs() < 0.1);
}

#[test]
fn haar_vector_first_coordinate() {
    let n = 1000;
    let sq: Vec<f64> = (0..10_000u64)
        .into_par_iter()
        .map(|s| sample_haar_frame(n, 1, &mut RngStream::new(400, s).rng()).unwrap()[(0, 0)].powi(2))
        .collect();
    let m = mean(&sq).unwrap();
    assert!((m - 1e-3).abs() <= 3e-4, "mean u1^2 = {m}");
}

#[test]
fn haar_frame_law_is_left_invariant() {
    let (n, m, z) = (200, 5, 3.0);
    let spectrum = semicircle_quantiles(n).unwrap();
    let q = sample_haar_orthogonal(n, &mut RngStream::new(500, u64::MAX).rng()).unwrap();
    let draw = |seed: u64, rotate: bool| -> Vec<f64> {
        (0..500u64)
            .into_par_iter()
            .map(|s| {
                let u = sample_haar_frame(n, m, &mut RngStream::new(seed, s).rng()).unwrap();
                let u = if rotate { &q * &u } else { u };
                concentration_deviation(&u, &spectrum, z).unwrap()
            })
            .collect()
    };
    let plain = draw(501, false);
    let rotated = draw(502, true);
    let d = ks_statistic(&plain, &rotated);
    assert!(d < ks_critical_001(500, 500), "KS statistic {d}");
}

#[test]
fn conjugated_spectrum_matches_in_transform() {
    let s = semicircle_quantiles(500).unwrap();
    let w = sample_conjugated(&s, &mut RngStream::new(600, 0).rng()).unwrap();
    let realized = SpectrumModel::new(eigenvalues(&w).unwrap()).unwrap();
    assert!((stieltjes(&realized, 3.0).unwrap() - stieltjes(&s, 3.0).unwrap()).abs() < 1e-8);
}
