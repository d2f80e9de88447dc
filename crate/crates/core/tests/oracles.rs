//! Spectral facts checked against independent oracles: a dense LAPACK-style
//! solver (nalgebra), closed-form Bloch blocks, and finite differences.

use std::f64::consts::TAU;

use kagome_core::disorder::{sample_deltas, DisorderModel};
use kagome_core::spectrum::{diagonalize, eigenfrequencies, orthonormality_error, sensitivities, HamiltonianSpec};
use kagome_core::topology::build_kagome_star;
use kagome_core::units::{ghz, mhz};
use nalgebra::DMatrix;

/// Ideal eigenvalue offsets in units of t, frozen from a dense
/// diagonalization of the adjacency matrix and the 2x2 Bloch blocks.
fn frozen_offsets() -> Vec<f64> {
    let s5 = 5f64.sqrt();
    let s13 = 13f64.sqrt();
    let mut v = vec![
        1.0 + s5,
        (1.0 + s13) / 2.0,
        (1.0 + s13) / 2.0,
        (s5 - 1.0) / 2.0,
        (s5 - 1.0) / 2.0,
        0.0,
        1.0 - s5,
        (1.0 - s13) / 2.0,
        (1.0 - s13) / 2.0,
        -(1.0 + s5) / 2.0,
        -(1.0 + s5) / 2.0,
        -2.0,
    ];
    v.sort_by(f64::total_cmp);
    v
}

fn nalgebra_eigenvalues(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

#[test]
fn adjacency_spectrum_matches_dense_solver_and_closed_form() {
    let g = build_kagome_star();
    let dense = nalgebra_eigenvalues(&g.adjacency_matrix().to_rows());
    for (a, b) in dense.iter().zip(frozen_offsets()) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn ideal_spectrum_is_omega_r_plus_t_lambda() {
    let g = build_kagome_star();
    let (w, t) = (ghz(7.0), mhz(31.0));
    let s = diagonalize(&HamiltonianSpec::new(&g, w, t), None).unwrap();
    for (got, lam) in s.frequencies().iter().zip(frozen_offsets()) {
        let want = w + t * lam;
        assert!((got - want).abs() <= 1e-9 * t.max((want - w).abs()), "{got} vs {want}");
    }
}

#[test]
fn span_and_variance_closed_form() {
    let g = build_kagome_star();
    let t = mhz(31.0);
    let s = diagonalize(&HamiltonianSpec::new(&g, ghz(7.0), t), None).unwrap();
    let f = s.frequencies();
    let span = f[11] - f[0];
    assert!((span / ((3.0 + 5f64.sqrt()) * t) - 1.0).abs() < 1e-9);
    assert!((s.frequency_variance() / (3.0 * t * t) - 1.0).abs() < 1e-9);
    assert_eq!(s.n_distinct(), 8);
    assert_eq!(s.group_sizes().iter().filter(|&&g| g == 2).count(), 4);
}

#[test]
fn disordered_spectrum_matches_dense_solver() {
    let g = build_kagome_star();
    let t = 1.0;
    let model = DisorderModel::new(0.7, 11, 1);
    for r in 0..20 {
        let spec = HamiltonianSpec::new(&g, 3.0, t).with_deltas(sample_deltas(&model, r));
        let rows = kagome_core::spectrum::assemble(&spec).unwrap().to_rows();
        let dense = nalgebra_eigenvalues(&rows);
        let ours = eigenfrequencies(&spec).unwrap();
        for (a, b) in ours.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn trace_is_preserved() {
    let g = build_kagome_star();
    let model = DisorderModel::new(mhz(5.0), 3, 1);
    for r in 0..50 {
        let deltas = sample_deltas(&model, r);
        let spec = HamiltonianSpec::new(&g, ghz(7.0), mhz(0.8)).with_deltas(deltas.clone()).with_edge_shift(mhz(1.5));
        let total: f64 = eigenfrequencies(&spec).unwrap().iter().sum();
        let diag: f64 = deltas.iter().map(|d| ghz(7.0) + d).sum::<f64>() + 6.0 * mhz(1.5);
        assert!((total / diag - 1.0).abs() < 1e-9);
    }
}

#[test]
fn first_order_expansion_at_small_disorder() {
    let g = build_kagome_star();
    let t = 1.0;
    let ideal_spec = HamiltonianSpec::new(&g, 0.0, t);
    let ideal = diagonalize(&ideal_spec, None).unwrap();
    let model = DisorderModel::new(1e-4 * t, 5, 1);
    for r in 0..50 {
        let deltas = sample_deltas(&model, r);
        let exact = eigenfrequencies(&ideal_spec.clone().with_deltas(deltas.clone())).unwrap();
        let sens = kagome_core::spectrum::sensitivities_along(&ideal_spec, &ideal, &deltas).unwrap();
        for j in 0..12 {
            let predicted = ideal.frequencies()[j] + sens[j].iter().zip(&deltas).map(|(s, d)| s * d).sum::<f64>();
            assert!((exact[j] - predicted).abs() < 1e-6 * t, "mode {j}");
        }
    }
}

#[test]
fn hellmann_feynman_matches_central_differences() {
    let g = build_kagome_star();
    let t = 1.0;
    let h = 1e-6 * t;
    let model = DisorderModel::new(0.3 * t, 17, 1);
    for r in 0..20 {
        let deltas = sample_deltas(&model, r);
        let spec = HamiltonianSpec::new(&g, 0.0, t).with_deltas(deltas.clone());
        let s = diagonalize(&spec, None).unwrap();
        let sens = sensitivities(&spec, &s).unwrap();
        for i in 0..12 {
            let mut up = deltas.clone();
            up[i] += h;
            let mut dn = deltas.clone();
            dn[i] -= h;
            let fu = eigenfrequencies(&spec.clone().with_deltas(up)).unwrap();
            let fd = eigenfrequencies(&spec.clone().with_deltas(dn)).unwrap();
            for j in 0..12 {
                let fd_slope = (fu[j] - fd[j]) / (2.0 * h);
                assert!((fd_slope - sens[j][i]).abs() < 1e-5, "r{r} mode {j} site {i}");
            }
        }
    }
}

#[test]
fn flat_band_localization_and_its_breaking() {
    let g = build_kagome_star();
    let t = 1.0;
    let ideal = diagonalize(&HamiltonianSpec::new(&g, 0.0, t), None).unwrap();
    let v = &ideal.vectors()[0];
    for i in 6..12 {
        assert!(v[i].abs() < 1e-10);
    }
    // sign-alternating hexagon state
    for k in 0..6 {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        assert!((v[k] * v[0].signum() - sign / 6f64.sqrt()).abs() < 1e-10);
    }

    let model = DisorderModel::new(0.1 * t, 99, 1);
    for r in 0..10 {
        let s = diagonalize(&HamiltonianSpec::new(&g, 0.0, t).with_deltas(sample_deltas(&model, r)), None).unwrap();
        let outer: f64 = (6..12).map(|i| s.vectors()[0][i].powi(2)).sum();
        let inner: f64 = (0..6).map(|i| s.vectors()[0][i].powi(2)).sum();
        assert!(outer > 0.0 && outer < inner, "outer {outer}, inner {inner}");
    }
}

#[test]
fn orthonormal_eigenvectors() {
    let g = build_kagome_star();
    let model = DisorderModel::new(0.5, 1, 1);
    for r in 0..20 {
        let s = diagonalize(&HamiltonianSpec::new(&g, 0.0, 1.0).with_deltas(sample_deltas(&model, r)), None).unwrap();
        assert!(orthonormality_error(s.vectors()) < 1e-10);
    }
}

#[test]
fn gaussian_draw_statistics() {
    let sigma = 2.0;
    let model = DisorderModel::new(sigma, 1234, 1);
    let realizations = 1_000_000 / 12 + 1;
    let mut n = 0usize;
    let (mut s1, mut s2) = (0.0, 0.0);
    for r in 0..realizations as u64 {
        for d in sample_deltas(&model, r) {
            s1 += d;
            s2 += d * d;
            n += 1;
        }
    }
    let nf = n as f64;
    let mean = s1 / nf;
    let var = s2 / nf - mean * mean;
    assert!(mean.abs() < 5.0 * sigma / 1e3, "{mean}");
    assert!((var / (sigma * sigma) - 1.0).abs() < 0.01, "{var}");
}

#[test]
fn flat_band_variance_is_one_sixth() {
    // Monte Carlo check of the flat-band sensitivity row: Var = sigma^2 / 6.
    let g = build_kagome_star();
    let t = 1.0;
    let sigma = 1e-3 * t;
    let model = DisorderModel::new(sigma, 77, 1);
    let n = 100_000u64;
    let (mut s1, mut s2) = (0.0, 0.0);
    for r in 0..n {
        let f = eigenfrequencies(&HamiltonianSpec::new(&g, 0.0, t).with_deltas(sample_deltas(&model, r))).unwrap();
        let x = f[0] + 2.0 * t;
        s1 += x;
        s2 += x * x;
    }
    let mean = s1 / n as f64;
    let var = s2 / n as f64 - mean * mean;
    let ratio = var / (sigma * sigma / 6.0);
    // sampling error of a variance from 1e5 draws is ~0.45%
    assert!((ratio - 1.0).abs() < 0.03, "{ratio}");
}

#[test]
fn hz_reporting_convention() {
    assert!((kagome_core::units::rad_to_hz(TAU * 7e9) - 7e9).abs() < 1e-3);
}
