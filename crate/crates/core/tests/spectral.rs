use std::f64::consts::PI;

use kdvbed::spectral::*;
use kdvbed::stats::linear_fit;
use proptest::prelude::*;
use rustfft::num_complex::Complex64;

mod common;
use common::*;

#[test]
fn multiplier_eigenfunctions() {
    let grid = SpectralGrid::new(10.0, 64).unwrap();
    for m in [Multiplier::d_tanh(0.7), Multiplier::sech(1.3), Multiplier::d2(), Multiplier::d4()] {
        // Round-off in the other coefficients (~1e-16) is amplified by the
        // largest symbol on the grid; only `D⁴` reaches that floor.
        let top = grid.wavenumbers().iter().map(|&k| m.eval(k).abs()).fold(0.0, f64::max);
        for mode in 1..31 {
            let k = 2.0 * PI * mode as f64 / 10.0;
            for phase in [0.0, PI / 2.0] {
                let e = GridFunction::from_fn(&grid, |x| (k * x + phase).cos());
                let out = apply_multiplier(&e, &m).unwrap();
                let want: Vec<f64> = e.values.iter().map(|v| m.eval(k) * v).collect();
                let scale = m.eval(k).abs().max(1.0).max(1e-3 * top);
                assert!(max_diff(&out.values, &want) < 1e-12 * scale, "{:?} mode {mode} err {}", m, max_diff(&out.values, &want));
            }
        }
    }
    let one = GridFunction::from_fn(&grid, |_| 1.0);
    assert!(max_abs(&apply_multiplier(&one, &Multiplier::d_tanh(1.0)).unwrap().values) < 1e-15);
}

#[test]
fn sech_matches_direct_dft_oracle() {
    let (length, n) = (8.0, 48);
    let grid = SpectralGrid::new(length, n).unwrap();
    let f = smooth_random(&grid, 3);
    let dense = Dense::new(length, n);
    let got = apply_multiplier(&f, &Multiplier::sech(0.8)).unwrap();
    let want = apply(&dense.sech(0.8), &f.values);
    assert!(max_diff(&got.values, &want) < 1e-12);
}

#[test]
fn derivative_examples() {
    let grid = SpectralGrid::new(2.0 * PI, 32).unwrap();
    let s = GridFunction::from_fn(&grid, |x| (3.0 * x).sin());
    let d = derivative(&s, 1).unwrap();
    for (j, v) in d.values.iter().enumerate() {
        assert!((v - 3.0 * (3.0 * grid.node(j)).cos()).abs() < 1e-12);
    }
    let c = GridFunction::from_fn(&grid, |_| 2.5);
    for order in 1..=4 {
        assert!(max_abs(&derivative(&c, order).unwrap().values) < 1e-14);
    }
    assert!(derivative(&c, 5).is_err());
}

#[test]
fn second_derivative_against_finite_differences() {
    // Spectral error is round-off, so the discrepancy is the FD error ~ Δx².
    let f = |x: f64| x.sin().exp();
    let (mut dx, mut err) = (Vec::new(), Vec::new());
    for n in [32usize, 64, 128, 256] {
        let grid = SpectralGrid::new(2.0 * PI, n).unwrap();
        let g = GridFunction::from_fn(&grid, f);
        let d2 = derivative(&g, 2).unwrap();
        let h = grid.spacing();
        let fd: Vec<f64> = (0..n)
            .map(|j| {
                let x = grid.node(j);
                (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
            })
            .collect();
        dx.push(h.ln());
        err.push(max_diff(&d2.values, &fd).ln());
    }
    let fit = linear_fit(&dx, &err);
    assert!((fit.slope - 2.0).abs() < 0.05, "{fit:?}");
}

#[test]
fn l1_monochromatic_closed_form() {
    let (length, n, h) = (2.0 * PI, 64, 0.6);
    let grid = SpectralGrid::new(length, n).unwrap();
    let (p, k) = (3.0, 5.0);
    let beta = GridFunction::from_fn(&grid, |x| (p * x).cos());
    let xi = GridFunction::from_fn(&grid, |x| (k * x).cos());
    let got = apply_l1(&beta, &xi, h).unwrap();
    let sech = |z: f64| 1.0 / z.cosh();
    // −sech(hD)[cos(px)·(−k sech(hk) sin(kx))] with sin·cos split into sidebands.
    let want: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&x| {
            0.5 * k * sech(h * k) * (sech(h * (k + p)) * ((k + p) * x).sin() + sech(h * (k - p)) * ((k - p) * x).sin())
        })
        .collect();
    assert!(max_diff(&got.values, &want) < 1e-10);
    let dense = Dense::new(length, n);
    let op = chain(&[dense.sech(h), dense.pointwise(&beta.values), dense.sech(h), dense.dx()]);
    let dense_out: Vec<f64> = apply(&op, &xi.values).iter().map(|v| -v).collect();
    assert!(max_diff(&dense_out, &want) < 1e-10);
}

#[test]
fn zero_bottom_gives_zero_operators() {
    let grid = SpectralGrid::new(6.0, 32).unwrap();
    let zero = GridFunction::zeros(&grid);
    let xi = smooth_random(&grid, 9);
    assert_eq!(max_abs(&apply_l1(&zero, &xi, 1.0).unwrap().values), 0.0);
    assert_eq!(max_abs(&apply_l2(&zero, &xi, 1.0).unwrap().values), 0.0);
    let other = SpectralGrid::new(6.0, 64).unwrap();
    assert_eq!(apply_l1(&GridFunction::zeros(&other), &xi, 1.0).unwrap_err(), SpectralError::GridMismatch);
}

#[test]
fn l2_constant_bottom_composes_multipliers() {
    let grid = SpectralGrid::new(7.0, 64).unwrap();
    let (c, h) = (0.3, 0.9);
    let beta = GridFunction::from_fn(&grid, |_| c);
    let xi = smooth_random(&grid, 5);
    let got = apply_l2(&beta, &xi, h).unwrap();
    let step = apply_multiplier(&xi, &Multiplier::sech(h)).unwrap();
    let step = derivative(&step, 1).unwrap();
    let step = apply_multiplier(&step, &Multiplier::d_tanh(h)).unwrap();
    let want = apply_multiplier(&step, &Multiplier::sech(h)).unwrap().scale(-c * c);
    assert!(max_diff(&got.values, &want.values) < 1e-12 * want.max_norm().max(1.0));
}

#[test]
fn l1_l2_match_dense_oracle() {
    let (length, n, h) = (9.0, 32, 0.7);
    let grid = SpectralGrid::new(length, n).unwrap();
    let dense = Dense::new(length, n);
    for seed in 0..3 {
        let beta = smooth_random(&grid, 100 + seed);
        let xi = smooth_random(&grid, 200 + seed);
        let b = dense.pointwise(&beta.values);
        let l1 = chain(&[dense.sech(h), b.clone(), dense.sech(h), dense.dx()]);
        let want1: Vec<f64> = apply(&l1, &xi.values).iter().map(|v| -v).collect();
        let got1 = apply_l1(&beta, &xi, h).unwrap();
        assert!(max_diff(&got1.values, &want1) < 1e-12 * max_abs(&want1).max(1.0));
        let l2 = chain(&[dense.sech(h), b.clone(), dense.d_tanh(h), b, dense.dx(), dense.sech(h)]);
        let want2: Vec<f64> = apply(&l2, &xi.values).iter().map(|v| -v).collect();
        let got2 = apply_l2(&beta, &xi, h).unwrap();
        assert!(max_diff(&got2.values, &want2) < 1e-12 * max_abs(&want2).max(1.0));
    }
}

#[test]
fn l1_quadratic_form_is_symmetric() {
    // ξ ↦ −∂L₁(β)ξ as a matrix built column by column from unit vectors.
    let (n, h) = (32, 0.8);
    let grid = SpectralGrid::new(6.0, n).unwrap();
    let beta = smooth_random(&grid, 17);
    let column = |j: usize| {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let xi = GridFunction::new(grid.clone(), e).unwrap();
        derivative(&apply_l1(&beta, &xi, h).unwrap(), 1).unwrap().scale(-1.0).values
    };
    let cols: Vec<Vec<f64>> = (0..n).map(column).collect();
    let scale = cols.iter().map(|c| max_abs(c)).fold(0.0, f64::max);
    for i in 0..n {
        for j in 0..n {
            assert!((cols[j][i] - cols[i][j]).abs() < 1e-10 * scale, "({i}, {j})");
        }
    }
    let xi = smooth_random(&grid, 23);
    let a_xi = derivative(&apply_l1(&beta, &xi, h).unwrap(), 1).unwrap().scale(-1.0);
    let w = apply_multiplier(&derivative(&xi, 1).unwrap(), &Multiplier::sech(h)).unwrap();
    let form = -beta.mul(&w).unwrap().inner(&w);
    // ⟨ξ, −∂L₁ξ⟩ = ⟨∂ξ, L₁ξ⟩ = −⟨sech ∂ξ, β sech ∂ξ⟩.
    assert!((xi.inner(&a_xi) - form).abs() < 1e-10 * form.abs().max(1.0));
}

#[test]
fn dealias_examples() {
    let n = 48;
    let grid = SpectralGrid::new(2.0 * PI, n).unwrap();
    let band = GridFunction::from_fn(&grid, |x| (3.0 * x).cos() + 0.5 * (16.0 * x).sin());
    assert!(max_diff(&dealias(&band).values, &band.values) < 1e-13);
    let nyq = GridFunction::from_fn(&grid, |x| (24.0 * x).cos());
    assert!(max_abs(&dealias(&nyq).values) < 1e-13);

    // The product of two band-limited fields, dealiased, equals the exact
    // product (computed on a doubled grid) projected onto |m| ≤ n/3.
    let f = |x: f64| (5.0 * x).cos() + 0.3 * (14.0 * x).sin() + 0.2;
    let g = |x: f64| (11.0 * x).sin() - 0.4 * (16.0 * x).cos();
    let prod = GridFunction::from_fn(&grid, |x| f(x) * g(x));
    let got = dealias(&prod);
    let fine = SpectralGrid::new(2.0 * PI, 2 * n).unwrap();
    let exact = fine.forward(&fine.nodes().iter().map(|&x| f(x) * g(x)).collect::<Vec<_>>());
    let want: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&x| {
            let mut acc = 0.0;
            for (j, c) in exact.iter().enumerate() {
                let m = if j <= n { j as i64 } else { j as i64 - 2 * n as i64 };
                if (m.abs() as usize) * 3 <= n {
                    acc += (c * Complex64::from_polar(1.0, m as f64 * x)).re;
                }
            }
            acc / (2 * n) as f64
        })
        .collect();
    assert!(max_diff(&got.values, &want) < 1e-12);
}

proptest! {
    #[test]
    fn eigenfunction_identity(mode in 1i64..31, h in 0.05..3.0f64, phase in 0.0..6.3f64) {
        let grid = SpectralGrid::new(5.0, 64).unwrap();
        let k = 2.0 * PI * mode as f64 / 5.0;
        let e = GridFunction::from_fn(&grid, |x| (k * x + phase).sin());
        for m in [Multiplier::d_tanh(h), Multiplier::sech(h)] {
            let out = apply_multiplier(&e, &m).unwrap();
            let want: Vec<f64> = e.values.iter().map(|v| m.eval(k) * v).collect();
            prop_assert!(max_diff(&out.values, &want) < 1e-12 * m.eval(k).abs().max(1.0) * e.max_norm());
        }
    }

    #[test]
    fn even_multipliers_are_self_adjoint(a in 0u64..1000, b in 0u64..1000, h in 0.1..2.0f64) {
        let grid = SpectralGrid::new(7.0, 64).unwrap();
        let (f, g) = (smooth_random(&grid, a), smooth_random(&grid, b + 5000));
        for m in [Multiplier::d_tanh(h), Multiplier::sech(h), Multiplier::d2()] {
            let lhs = apply_multiplier(&f, &m).unwrap().inner(&g);
            let rhs = f.inner(&apply_multiplier(&g, &m).unwrap());
            let scale = apply_multiplier(&f, &m).unwrap().inner(&apply_multiplier(&f, &m).unwrap()).sqrt()
                * g.inner(&g).sqrt();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1e-300));
        }
    }
}
