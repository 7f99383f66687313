use kdvbed::bottom::{BottomRealization, ProcessSpec};
use kdvbed::scalesep::*;
use kdvbed::spectral::SpectralGrid;
use proptest::prelude::*;

fn gaussian() -> ProcessSpec {
    ProcessSpec::GaussianSpectral { sigma: 1.0, ell: 1.0 }
}

fn flat_real(n: usize) -> BottomRealization {
    BottomRealization::constant(SpectralGrid::new(n as f64 / 8.0, n).unwrap(), 0.0)
}

#[test]
fn z_integral_is_linear_in_the_weight() {
    let eps = 0.02;
    let real = covering_realization(&gaussian(), 3.0, eps, 7).unwrap();
    let f = Bump::new(1.0, 0.7);
    let g = Bump::new(1.4, 0.5);
    let (a, b) = (1.7, -0.4);
    let zf = z_integral(&real, eps, &|x| f.value(x), 0.0, 2.0, 2001).unwrap();
    let zg = z_integral(&real, eps, &|x| g.value(x), 0.0, 2.0, 2001).unwrap();
    let zc = z_integral(&real, eps, &|x| a * f.value(x) + b * g.value(x), 0.0, 2.0, 2001).unwrap();
    assert!((zc - (a * zf + b * zg)).abs() <= 1e-12 * (zf.abs() + zg.abs()).max(1.0), "{zc} {zf} {zg}");
}

#[test]
fn z_integral_vanishes_for_zero_bottom_or_weight() {
    let eps = 0.05;
    let f = Bump::new(1.0, 0.7);
    let flat = flat_real(1024);
    assert_eq!(z_integral(&flat, eps, &|x| f.value(x), 0.0, 2.0, 801).unwrap(), 0.0);
    assert_eq!(z_nodal(&flat, eps, &f), 0.0);
    let real = covering_realization(&gaussian(), 2.0, eps, 3).unwrap();
    assert_eq!(z_integral(&real, eps, &|_| 0.0, 0.0, 2.0, 801).unwrap(), 0.0);
}

#[test]
fn z_integral_refuses_coarse_quadrature() {
    let eps = 0.05;
    let real = covering_realization(&gaussian(), 2.0, eps, 3).unwrap();
    let err = z_integral(&real, eps, &|x| x, 0.0, 2.0, 11).unwrap_err();
    assert!(matches!(err, ScaleError::Underresolved { .. }), "{err:?}");
}

#[test]
fn z_integral_and_nodal_sum_agree() {
    // Trapezoid nodes ten times denser than the fine grid; the two sums
    // differ only by the interpolation error of the bottom.
    let eps = 0.02;
    let f = Bump::new(1.0, 0.7);
    let real = covering_realization(&gaussian(), 2.0, eps, 11).unwrap();
    let nodal = z_nodal(&real, eps, &f);
    let dense = z_integral(&real, eps, &|x| f.value(x), 0.3, 1.7, 5601).unwrap();
    assert!((nodal - dense).abs() < 1e-4 * (eps.sqrt()), "{nodal} {dense}");
}

#[test]
fn path_functional_starts_at_zero_and_differentiates_to_the_bottom() {
    let eps = 0.05;
    let real = covering_realization(&gaussian(), 2.0, eps, 5).unwrap();
    let path = PathFunctional::new(&real, eps, 0.8);
    assert_eq!(path.eval(0.0), 0.0);
    let h = 1e-5;
    for x in [0.3, 0.71, 1.2] {
        let fd = (path.eval(x + h) - path.eval(x - h)) / (2.0 * h);
        assert!((fd - path.slope(x)).abs() < 1e-5 * path.slope(x).abs().max(1.0), "{x}: {fd} {}", path.slope(x));
    }
    assert!((path.eval(1.0) * 0.8 - path.unnormalized(1.0)).abs() < 1e-15);
}

#[test]
fn donsker_rejects_a_derivative_bottom() {
    let spec = ProcessSpec::derived(gaussian());
    let err = verify_donsker(&spec, 0.01, 1.0, 20, 1).unwrap_err();
    assert!(matches!(err, ScaleError::Degenerate(_)), "{err:?}");
}

#[test]
fn order_estimate_recovers_an_exact_power_law() {
    let eps = [0.08, 0.04, 0.02, 0.01];
    let base = [-1.0, 1.0, -1.0, 1.0];
    let samples: Vec<Vec<f64>> = eps.iter().map(|e: &f64| base.iter().map(|b| b * e.powf(1.5)).collect()).collect();
    let rms = OrderEstimate::from_samples("rms", &eps, &samples, 1.5, true);
    assert!((rms.slope - 1.5).abs() < 1e-12, "{}", rms.slope);
    assert!(rms.within(0.0));
    let sd = OrderEstimate::from_samples("sd", &eps, &samples, 1.5, false);
    assert!((sd.slope - 1.5).abs() < 1e-12);
    let off = OrderEstimate { target: 2.0, ..rms };
    assert!(!off.within(0.15));
    assert!(off.at_least(1.0));
}

#[test]
fn product_with_a_zero_bottom_vanishes() {
    let eps = 0.05;
    let phi = TestFunction::new(1.0, 0.6, 0.5, 0.3);
    let r1 = covering_realization(&gaussian(), 4.0, eps, 2).unwrap();
    let flat = BottomRealization::constant(r1.grid.clone(), 0.0);
    assert_eq!(product_statistic(&r1, &flat, eps, 1.0, &phi), 0.0);
    let w = CharWeight { theta: Bump::new(1.2, 0.6), x: Bump::new(1.0, 0.6), t: Bump::new(0.5, 0.3) };
    assert_eq!(characteristic_statistic(&flat, &flat, eps, 1.0, &w), 0.0);
}

#[test]
fn product_with_constant_bottoms_matches_the_plain_integral() {
    // β₁ = β₂ = 1 reduces the statistic to ∫∫φ dX dt = ∫a · ∫C.
    let eps = 0.01;
    let phi = TestFunction::new(1.0, 0.6, 0.5, 0.3);
    let grid = SpectralGrid::new(1024.0, 8192).unwrap();
    let one = BottomRealization::constant(grid, 1.0);
    let got = product_statistic(&one, &one, eps, 1.0, &phi);
    let want = phi.space.integral() * phi.time.integral();
    assert!((got - want).abs() < 1e-3 * want, "{got} {want}");
}

#[test]
fn limit_covariance_cases() {
    let g = gaussian();
    let s = g.covariance().sigma_sq();
    assert!((s - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-10, "{s}");
    assert_eq!(PairSpec::Independent(g.clone(), g.clone()).limit_covariance(), (s, 0.0, s));
    assert_eq!(PairSpec::Identical(g.clone()).limit_covariance(), (s, s, s));
    let (_, r0, _) = PairSpec::Shifted(g.clone(), 0.0).limit_covariance();
    assert!((r0 - s).abs() < 1e-8 * s);
    let (_, r, _) = PairSpec::Shifted(g.clone(), 0.7).limit_covariance();
    // ∫ exp(−(y+a)²/2) dy is shift invariant.
    assert!((r - s).abs() < 1e-8 * s, "{r}");
    let d = ProcessSpec::derived(g);
    let (sd, _, _) = PairSpec::Identical(d).limit_covariance();
    assert!(sd.abs() < 1e-10, "{sd}");
}

#[test]
fn covariance_matrix_matches_limits_for_independent_and_identical_pairs() {
    let g = gaussian();
    for pair in [PairSpec::Independent(g.clone(), g.clone()), PairSpec::Identical(g.clone())] {
        let report = verify_covariance_matrix(&pair, 0.02, 1.0, 300, 99).unwrap();
        assert!(report.within(4.0), "{pair:?}: {report:?}");
    }
}

#[test]
fn lln_sd_scales_like_root_eps() {
    let f = Bump::new(1.0, 0.7);
    let g = Bump::new(1.3, 0.6);
    let report = verify_lln(&gaussian(), &f, &g, &[0.04, 0.02, 0.01, 0.005], 64, 17).unwrap();
    assert!((report.order.target - 0.5).abs() < 1e-15);
    assert!(report.order.within(0.15), "{:?}", report.order);
    for m in &report.order.mean {
        assert!(m.value.abs() < 4.0 * m.se.max(1e-12), "{m:?}");
    }
}

#[test]
fn eps_lists_are_validated() {
    let f = Bump::new(1.0, 0.7);
    let err = verify_lln(&gaussian(), &f, &f, &[0.04, 0.02, 0.01], 8, 1).unwrap_err();
    assert!(matches!(err, ScaleError::EpsList(_)));
    let phi = TestFunction::new(1.0, 0.6, 0.5, 0.3);
    let err = verify_product_order(&PairSpec::Identical(gaussian()), 1.0, &phi, &[0.04, 0.03, 0.02, 0.01], 8, 1)
        .unwrap_err();
    assert!(matches!(err, ScaleError::EpsList(_)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn z_integral_linearity(a in -3.0f64..3.0, b in -3.0f64..3.0, c in 0.6f64..1.4, seed in 0u64..1000) {
        let eps = 0.05;
        let real = covering_realization(&gaussian(), 2.5, eps, seed).unwrap();
        let f = Bump::new(c, 0.5);
        let g = |x: f64| (3.0 * x).sin();
        let zf = z_integral(&real, eps, &|x| f.value(x), 0.0, 2.0, 1001).unwrap();
        let zg = z_integral(&real, eps, &g, 0.0, 2.0, 1001).unwrap();
        let zc = z_integral(&real, eps, &|x| a * f.value(x) + b * g(x), 0.0, 2.0, 1001).unwrap();
        prop_assert!((zc - a * zf - b * zg).abs() <= 1e-12 * (1.0 + zf.abs() + zg.abs()) * (1.0 + a.abs() + b.abs()));
    }

    #[test]
    fn bump_antiderivative_is_monotone(c in -2.0f64..2.0, w in 0.1f64..2.0, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let bump = Bump::new(c, w);
        let (lo, hi) = bump.support();
        let (x, y) = (lo + (hi - lo) * u.min(v), lo + (hi - lo) * u.max(v));
        prop_assert!(bump.antiderivative(x) <= bump.antiderivative(y) + 1e-15);
        prop_assert!(bump.value(x) >= 0.0);
        prop_assert!((bump.antiderivative(hi) - bump.integral()).abs() < 1e-12 * bump.integral().max(1e-300));
    }
}
