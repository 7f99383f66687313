use kdvbed::bottom::{estimate_stats, sample, Covariance, ProcessSpec};
use kdvbed::coeffs::{
    a_beta_from_cov, a_beta_spatial, a_beta_with_symbol, coefficient_fields, theorem57_constants, CoeffError,
    EffectiveCoefficients, PhysicalParams,
};
use kdvbed::spectral::SpectralGrid;
use kdvbed::stats::{block_bootstrap, Estimate};

fn gaussian(sigma: f64) -> ProcessSpec {
    ProcessSpec::GaussianSpectral { sigma, ell: 1.0 }
}

/// Midpoint rule on a fine uniform grid; independent of the adaptive route.
fn midpoint_oracle(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    (0..n).map(|i| f(a + (i as f64 + 0.5) * h)).sum::<f64>() * h
}

#[test]
fn gaussian_a_beta_matches_independent_quadrature() {
    let rho = gaussian(1.0).covariance();
    let s = (2.0 * std::f64::consts::PI).sqrt();
    let oracle =
        midpoint_oracle(|k| k * k.tanh() * s * (-0.5 * k * k).exp(), 0.0, 20.0, 200_000) / std::f64::consts::PI;
    let a = a_beta_from_cov(&rho, 1.0).unwrap();
    assert!((a - oracle).abs() < 1e-9 * oracle, "{a} vs {oracle}");
}

#[test]
fn spectral_and_spatial_routes_agree() {
    let rho = gaussian(1.0).covariance();
    let analytic = a_beta_from_cov(&rho, 1.0).unwrap();
    let real = sample(&gaussian(1.0), 2048.0, 1 << 14, 17).unwrap();
    let est = a_beta_spatial(&real, 1.0).unwrap();
    assert!(est.within(analytic, 3.0), "{est:?} vs {analytic}");
}

#[test]
fn deep_water_limit_symbol() {
    let rho = gaussian(1.0).covariance();
    let deep = a_beta_from_cov(&rho, 50.0).unwrap();
    let limit = a_beta_with_symbol(&rho, &|k: f64| k.abs()).unwrap();
    assert!(((deep - limit) / limit).abs() < 0.01);
}

#[test]
fn a_beta_linear_in_covariance_amplitude() {
    let one = a_beta_from_cov(&gaussian(1.0).covariance(), 1.0).unwrap();
    let two = a_beta_from_cov(&gaussian(2f64.sqrt()).covariance(), 1.0).unwrap();
    assert!((two / one - 2.0).abs() < 1e-10);
    assert_eq!(a_beta_from_cov(&Covariance::Zero, 1.0).unwrap(), 0.0);
}

#[test]
fn estimated_gaussian_b_is_zero() {
    let params = PhysicalParams::new(1.0, 1.0, 0.1).unwrap();
    let real = sample(&gaussian(1.0), 4096.0, 1 << 15, 8).unwrap();
    let stats = estimate_stats(&real, 10.0).unwrap();
    let c = theorem57_constants(&stats, &params).unwrap();
    assert!(c.b.within(0.0, 3.0), "{:?}", c.b);
    let exact = theorem57_constants(&gaussian(1.0).analytic_stats(), &params).unwrap();
    assert!(c.a_kdv.within(exact.a_kdv.value, 4.0), "{:?} vs {:?}", c.a_kdv, exact.a_kdv);
}

#[test]
fn theorem_formulas_reproduced_arithmetically() {
    let params = PhysicalParams::new(1.3, 9.81, 0.05).unwrap();
    let e = |v| Estimate::exact(v);
    let c = EffectiveCoefficients::from_parts(params, e(0.7), e(1.1), e(2.3), e(-0.4), e(1.0));
    let (h, g) = (1.3f64, 9.81f64);
    let c1 = h.powi(3) / 3.0 * (g / (4.0 * h)).sqrt();
    let a = 0.7 / (2.0 * h) + 1.1 / (4.0 * h * h) + 3.0 * c1 * 2.3 / (8.0 * h * h * (g * h).sqrt());
    let b = -7.0 * c1 * -0.4 / (64.0 * h.powi(3));
    assert!((c.a_kdv.value - a).abs() < 1e-12 * a.abs());
    assert!((c.b.value - b).abs() < 1e-12 * b.abs());
}

#[test]
fn flat_fields_are_constant() {
    let params = PhysicalParams::new(1.0, 1.0, 0.1).unwrap();
    let coarse = SpectralGrid::new(8.0, 64).unwrap();
    let grid = SpectralGrid::new(80.0, 512).unwrap();
    let real = kdvbed::bottom::BottomRealization::constant(grid, 0.0);
    let mut c = EffectiveCoefficients::flat(params);
    c.a_kdv = Estimate::exact(0.3);
    let f = coefficient_fields(&real, &c, &params, &coarse).unwrap();
    let expected = 1.0 - 0.01 * 0.3;
    assert!(f.c_eps.iter().all(|v| (v - expected).abs() < 1e-15));
}

#[test]
fn amplitude_guard_rejects_boundary() {
    let params = PhysicalParams::new(1.0, 1.0, 0.25).unwrap();
    let spec = gaussian(1.0);
    let real = sample(&spec, 64.0, 1024, 1).unwrap();
    let c = theorem57_constants(&spec.analytic_stats(), &params).unwrap();
    let coarse = SpectralGrid::new(16.0, 64).unwrap();
    assert!(matches!(coefficient_fields(&real, &c, &params, &coarse), Err(CoeffError::AmplitudeGuard { .. })));
}

#[test]
fn mean_wavespeed_is_ergodic_average() {
    let params = PhysicalParams::new(1.0, 1.0, 0.05).unwrap();
    let spec = gaussian(1.0);
    let real = sample(&spec, 4096.0, 1 << 15, 77).unwrap();
    let c = theorem57_constants(&spec.analytic_stats(), &params).unwrap();
    let coarse = SpectralGrid::new(4096.0 * 0.05, 1 << 15).unwrap();
    let f = coefficient_fields(&real, &c, &params, &coarse).unwrap();
    let est = block_bootstrap(&[f.c_eps.clone()], 80, 400, 1)[0];
    assert!(est.within(c.mean_speed(), 3.0), "{est:?} vs {}", c.mean_speed());
}
