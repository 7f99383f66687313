use kdvbed::bottom::{BottomRealization, ProcessSpec};
use kdvbed::charflow::{solve_flow, TravelTime};
use kdvbed::coeffs::{theorem57_constants, CoefficientFields, EffectiveCoefficients, PhysicalParams, Speed};
use kdvbed::scalesep::{covering_realization, OrderEstimate, TestFunction};
use kdvbed::spectral::{GridFunction, SpectralGrid};
use kdvbed::waves::*;

fn unit() -> PhysicalParams {
    PhysicalParams::new(1.0, 1.0, 0.1).unwrap()
}

fn kdv_unit(b: f64) -> KdvCoefficients {
    let p = unit();
    KdvCoefficients { c1: p.c1(), c2: p.c2(), b }
}

#[test]
fn soliton_residual_is_tiny_before_use() {
    // Check the sech² ansatz against the equation by centred differences.
    let c = kdv_unit(0.0);
    let sol = soliton(&c, 1.0, 0.0, 1e6);
    let (h, k) = (1e-3, 1e-5);
    let mut worst: f64 = 0.0;
    for j in -40..=40 {
        let y = 0.1 * j as f64;
        let qt = (sol(y, k) - sol(y, -k)) / (2.0 * k);
        let q1 = (sol(y + h, 0.0) - sol(y - h, 0.0)) / (2.0 * h);
        let q3 = (sol(y + 2.0 * h, 0.0) - 2.0 * sol(y + h, 0.0) + 2.0 * sol(y - h, 0.0) - sol(y - 2.0 * h, 0.0))
            / (2.0 * h * h * h);
        worst = worst.max((qt + c.c1 * q3 + 3.0 * c.c2 * sol(y, 0.0) * q1).abs());
    }
    assert!(worst < 1e-4, "{worst}");
    assert!((c.c1 - 1.0 / 6.0).abs() < 1e-15);
    assert!((1.0 / c.c2 - 2.8284271).abs() < 1e-7);
}

#[test]
fn soliton_translates_over_one_transit() {
    let c = kdv_unit(0.0);
    let length = 40.0;
    let grid = SpectralGrid::new(length, 512).unwrap();
    let sol = soliton(&c, 1.0, 20.0, length);
    let q0 = GridFunction::from_fn(&grid, |y| sol(y, 0.0));
    let hist = solve_kdv(&q0, c, &[length], 0.005).unwrap();
    let exact = GridFunction::from_fn(&grid, |y| sol(y, length));
    let err = hist.last().values.iter().zip(&exact.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err / exact.max_norm() < 1e-4, "{err}");
}

#[test]
fn mass_and_energy_laws_with_growth() {
    for b in [0.0, -0.3, 0.2] {
        let c = kdv_unit(b);
        let grid = SpectralGrid::new(40.0, 256).unwrap();
        let q0 = GridFunction::from_fn(&grid, |y| 1.5 * (-((y - 15.0) / 2.0).powi(2)).exp());
        let outs = [0.0, 1.0, 2.0];
        let hist = solve_kdv(&q0, c, &outs, 0.005).unwrap();
        for (k, &tau) in outs.iter().enumerate() {
            let m = hist.mass(k) / (hist.mass(0) * (b * tau).exp());
            let e = hist.energy(k) / (hist.energy(0) * (2.0 * b * tau).exp());
            assert!((m - 1.0).abs() < 1e-8 * tau.max(1.0), "b = {b}: mass {m}");
            assert!((e - 1.0).abs() < 1e-6 * tau.max(1.0), "b = {b}: energy {e}");
        }
    }
}

#[test]
fn linear_mode_and_constant_solutions() {
    let c = KdvCoefficients { c1: 1.0 / 6.0, c2: 0.0, b: -0.4 };
    let grid = SpectralGrid::new(2.0 * std::f64::consts::PI, 64).unwrap();
    let k = 3.0;
    let q0 = GridFunction::from_fn(&grid, |y| (k * y).cos());
    let tau = 1.7;
    let hist = solve_kdv(&q0, c, &[tau], 0.01).unwrap();
    for (j, v) in hist.last().values.iter().enumerate() {
        let y = grid.node(j);
        let exact = (c.b * tau).exp() * (k * y + c.c1 * k * k * k * tau).cos();
        assert!((v - exact).abs() < 1e-8);
    }
    let c = KdvCoefficients { c2: 0.35, ..c };
    let q0 = GridFunction::from_fn(&grid, |_| 0.7);
    let hist = solve_kdv(&q0, c, &[tau], 0.01).unwrap();
    assert!(hist.last().values.iter().all(|v| (v - 0.7 * (c.b * tau).exp()).abs() < 1e-13));
}

#[test]
fn kdv_rejects_unstable_step_and_bad_times() {
    let c = kdv_unit(0.0);
    let grid = SpectralGrid::new(40.0, 512).unwrap();
    let sol = soliton(&c, 1.0, 20.0, 40.0);
    let q0 = GridFunction::from_fn(&grid, |y| sol(y, 0.0));
    assert!(matches!(solve_kdv(&q0, c, &[1.0], 0.5), Err(WaveError::Cfl(_))));
    assert_eq!(solve_kdv(&q0, c, &[1.0, 0.5], 0.01).unwrap_err(), WaveError::BadTimes);
}

#[test]
fn potential_differentiates_back() {
    let grid = SpectralGrid::new(10.0, 128).unwrap();
    let q0 = GridFunction::from_fn(&grid, |y| (-((y - 5.0) / 0.8).powi(2)).exp());
    let hist = solve_kdv(&q0, kdv_unit(0.0), &[0.0], 0.01).unwrap();
    let big_q = hist.potential(0).unwrap();
    let back = grid.derivative_values(&big_q, 1).unwrap();
    let mean = hist.mass(0) / 10.0;
    for (a, b) in back.iter().zip(&q0.values) {
        assert!((a - (b - mean)).abs() < 1e-12);
    }
}

#[test]
fn qfield_interpolates_in_space_and_time() {
    let c = kdv_unit(0.1);
    let length = 40.0;
    let grid = SpectralGrid::new(length, 256).unwrap();
    let sol = soliton(&c, 1.0, 20.0, length);
    let q0 = GridFunction::from_fn(&grid, |y| sol(y, 0.0));
    let outs: Vec<f64> = (0..=50).map(|k| 0.01 * k as f64).collect();
    let coarse = solve_kdv(&q0, c, &outs, 0.001).unwrap();
    let field = QField::new(&coarse, 4).unwrap();
    // Reference: direct solve to the off-node time.
    let tau = 0.2371;
    let direct = solve_kdv(&q0, c, &[tau], 0.001).unwrap();
    for j in (0..256).step_by(7) {
        let y = grid.node(j);
        let err = (field.value(y, tau) - direct.last().values[j]).abs();
        assert!(err < 1e-6, "{j}: {err}");
    }
    // Off-grid point against the trigonometric interpolant at a stored time.
    let coeffs = grid.forward(&coarse.states[15].values);
    let y = 19.3717;
    let mut trig = 0.0;
    for (cj, k) in coeffs.iter().zip(grid.wavenumbers()).take(128) {
        let w = if *k == 0.0 { 1.0 } else { 2.0 };
        trig += w * (cj * num_complex_exp(k * y)).re / 256.0;
    }
    assert!((field.value(y, 0.15) - trig).abs() < 1e-8);
    assert!(field.check(0.6).is_err());
}

fn num_complex_exp(a: f64) -> rustfft::num_complex::Complex64 {
    rustfft::num_complex::Complex64::new(a.cos(), a.sin())
}

fn flat_setup(eps: f64, a_kdv: f64) -> (BottomRealization, EffectiveCoefficients, PhysicalParams) {
    let params = PhysicalParams::new(1.0, 1.0, eps).unwrap();
    let grid = SpectralGrid::new(200.0 / eps, 1 << 14).unwrap();
    let real = BottomRealization::constant(grid, 0.0);
    let mut coeffs = EffectiveCoefficients::flat(params);
    coeffs.a_kdv.value = a_kdv;
    (real, coeffs, params)
}

fn gaussian_q(length: f64, n: usize, center: f64, taus: &[f64], c: KdvCoefficients) -> QField {
    let grid = SpectralGrid::new(length, n).unwrap();
    let q0 = GridFunction::from_fn(&grid, |y| (-((y - center) / 0.4).powi(2)).exp());
    QField::new(&solve_kdv(&q0, c, taus, 1e-4).unwrap(), 4).unwrap()
}

#[test]
fn flat_bottom_reconstruction_is_transport() {
    let (real, coeffs, params) = flat_setup(0.1, 0.3);
    let tt = TravelTime::new(&real, &coeffs).unwrap();
    let c = KdvCoefficients::from_effective(&coeffs);
    let q = gaussian_q(8.0, 256, 2.0, &[0.0, 0.005, 0.01], c);
    let xs: Vec<f64> = (0..80).map(|j| 0.1 * j as f64).collect();
    let t = 0.8;
    let r = reconstruct_r(&q, &tt, &xs, t).unwrap();
    let speed = params.c0() * (1.0 - 0.01 * 0.3);
    for (x, v) in xs.iter().zip(&r) {
        assert!((v - q.value(x - speed * t, 0.01 * t)).abs() < 1e-9);
    }
    let r0 = reconstruct_r(&q, &tt, &xs, 0.0).unwrap();
    for (x, v) in xs.iter().zip(&r0) {
        assert!((v - q.value(*x, 0.0)).abs() < 1e-13);
    }
    let zero = |_: f64| 0.0;
    let s1 = scattered_s1(&q, &tt, &real, &params, &|x| (x * 0.3).sin(), &xs, t).unwrap();
    for (x, v) in xs.iter().zip(&s1) {
        assert!((v - ((x + t) * 0.3).sin()).abs() < 1e-14);
    }
    let a = asymptotic_r(&q, &real, &params, 0.0, &xs, t);
    let s = asymptotic_s1(&q, &real, &params, &zero, &xs, 0.0);
    for (j, x) in xs.iter().enumerate() {
        assert!((a[j] - q.value(x - t, 0.01 * t)).abs() < 1e-15);
        assert!(s[j].abs() < 1e-15);
    }
}

fn gaussian_spec() -> ProcessSpec {
    ProcessSpec::GaussianSpectral { sigma: 1.0, ell: 1.0 }
}

struct Setup {
    real: BottomRealization,
    coeffs: EffectiveCoefficients,
    params: PhysicalParams,
    tt: TravelTime,
    q: QField,
}

fn random_setup(eps: f64, seed: u64) -> Setup {
    let spec = gaussian_spec();
    let params = PhysicalParams::new(1.0, 1.0, eps).unwrap();
    let real = covering_realization(&spec, 12.0, eps, seed).unwrap();
    let coeffs = theorem57_constants(&spec.analytic_stats(), &params).unwrap();
    let tt = TravelTime::new(&real, &coeffs).unwrap();
    let taus: Vec<f64> = (0..=4).map(|k| eps * eps * 0.5 * k as f64).collect();
    let q = gaussian_q(8.0, 256, 1.5, &taus, KdvCoefficients::from_effective(&coeffs));
    Setup { real, coeffs, params, tt, q }
}

#[test]
fn flow_and_travel_time_reconstructions_agree() {
    let s = random_setup(0.05, 3);
    let speed = Speed::new(&s.real, &s.coeffs);
    let ys: Vec<f64> = (0..=3200).map(|j| -1.0 + 0.0025 * j as f64).collect();
    let flow = solve_flow(&speed, &ys, &[1.0], 0.05 / 8.0).unwrap();
    let xs: Vec<f64> = (0..60).map(|j| 1.0 + 0.1 * j as f64).collect();
    let a = reconstruct_r(&s.q, &s.tt, &xs, 1.0).unwrap();
    let b = reconstruct_r_flow(&s.q, &flow, 0.05, &xs, 1.0).unwrap();
    for (u, v) in a.iter().zip(&b) {
        assert!((u - v).abs() < 1e-5, "{u} vs {v}");
    }
    assert!(reconstruct_r_flow(&s.q, &flow, 0.05, &[100.0], 1.0).is_err());
}

#[test]
fn lattice_matches_pointwise_operators() {
    let s = random_setup(0.05, 5);
    let zero = |_: f64| 0.0;
    let window = Window { x_lo: 1.0, x_hi: 3.5, t_max: 1.5 };
    let sol = EffectiveSolution::build(&s.real, &s.tt, &s.params, &s.q, &zero, window, 1).unwrap();
    let l = &sol.lattice;
    let n = l.steps;
    let idx = [0usize, 17, 101];
    let xs: Vec<f64> = idx.iter().map(|&i| l.x(i)).collect();
    let t = l.t(n);
    let r = reconstruct_r(&s.q, &s.tt, &xs, t).unwrap();
    let s1 = scattered_s1(&s.q, &s.tt, &s.real, &s.params, &zero, &xs, t).unwrap();
    let sigma = s.coeffs.sigma_beta.value;
    let ar = asymptotic_r(&s.q, &s.real, &s.params, sigma, &xs, t);
    let as1 = asymptotic_s1(&s.q, &s.real, &s.params, &zero, &xs, t);
    let lat_ar = sol.asymptotic_r(&s.q, &s.real, sigma);
    let lat_as1 = sol.asymptotic_s1(&s.q, &s.real, &zero);
    for (k, &i) in idx.iter().enumerate() {
        assert!((sol.r[n][i] - r[k]).abs() < 1e-12);
        assert!((sol.s1[n][i] - s1[k]).abs() < 1e-9 * s1[k].abs().max(1.0), "{} vs {}", sol.s1[n][i], s1[k]);
        assert!((lat_ar[n][i] - ar[k]).abs() < 1e-12);
        assert!((lat_as1[n][i] - as1[k]).abs() < 1e-9 * as1[k].abs().max(1.0));
    }
    // Initial data are reproduced on the nodes.
    for i in 0..l.row_len(0) {
        assert!((sol.r[0][i] - s.q.value(l.x(i), 0.0)).abs() < 1e-15);
        assert_eq!(sol.s1[0][i], 0.0);
    }
}

fn regress<F>(eps_list: &[f64], m: usize, target: f64, stat: F) -> OrderEstimate
where
    F: Fn(&Setup, &EffectiveSolution) -> f64,
{
    let zero = |_: f64| 0.0;
    let window = Window { x_lo: 1.0, x_hi: 3.5, t_max: 1.5 };
    let samples: Vec<Vec<f64>> = eps_list
        .iter()
        .enumerate()
        .map(|(e, &eps)| {
            (0..m)
                .map(|i| {
                    let s = random_setup(eps, 1000 * e as u64 + i as u64);
                    let sol = EffectiveSolution::build(&s.real, &s.tt, &s.params, &s.q, &zero, window, 2).unwrap();
                    stat(&s, &sol)
                })
                .collect()
        })
        .collect();
    OrderEstimate::from_samples("waves", eps_list, &samples, target, true)
}

fn phi() -> TestFunction {
    TestFunction::new(2.25, 1.0, 0.75, 0.5)
}

#[test]
fn reconstruction_converges_to_transport_at_order_one() {
    let est = regress(&[0.08, 0.04, 0.02, 0.01], 6, 1.0, |s, sol| {
        let l = &sol.lattice;
        let mut acc = 0.0;
        for n in 0..=l.steps {
            for i in 0..=l.inner {
                let lead = s.q.value(l.x(i) - l.c0 * l.t(n), s.params.eps.powi(2) * l.t(n));
                acc += (sol.r[n][i] - lead).powi(2);
            }
        }
        (acc * l.dx * l.dt).sqrt()
    });
    assert!(est.slope >= 0.9, "{est:?}");
}

#[test]
fn asymptotic_r_paired_difference_is_small() {
    let p = phi();
    let est = regress(&[0.08, 0.04, 0.02, 0.01], 6, 2.0, |s, sol| {
        let a = sol.asymptotic_r(&s.q, &s.real, s.coeffs.sigma_beta.value);
        let d: Vec<Vec<f64>> =
            sol.r.iter().zip(&a).map(|(u, v)| u.iter().zip(v).map(|(x, y)| x - y).collect()).collect();
        sol.lattice.pair(&d, &|x, t| p.value(x, t))
    });
    assert!(est.slope > 1.5, "{est:?}");
}

#[test]
fn asymptotic_s1_paired_difference_vanishes() {
    let p = phi();
    let zero = |_: f64| 0.0;
    let est = regress(&[0.08, 0.04, 0.02, 0.01], 6, 0.5, |s, sol| {
        let a = sol.asymptotic_s1(&s.q, &s.real, &zero);
        let d: Vec<Vec<f64>> =
            sol.s1.iter().zip(&a).map(|(u, v)| u.iter().zip(v).map(|(x, y)| x - y).collect()).collect();
        sol.lattice.pair(&d, &|x, t| p.value(x, t))
    });
    assert!(est.slope >= 0.4, "{est:?}");
}

fn flat_fields(length: f64, n: usize, h0: f64) -> CoefficientFields {
    let grid = SpectralGrid::new(length, n).unwrap();
    CoefficientFields { grid, h_eps: vec![h0; n], c_eps: vec![h0.sqrt(); n], h0: vec![h0; n] }
}

#[test]
fn boussinesq_linear_dispersion() {
    let params = PhysicalParams::new(1.0, 1.0, 0.2).unwrap();
    let fields = flat_fields(20.0, 128, 1.0);
    let k = 2.0 * std::f64::consts::PI * 5.0 / 20.0;
    let omega = k * (1.0 - 0.04 * k * k / 3.0).sqrt();
    let eta0 = GridFunction::from_fn(&fields.grid, |x| (k * x).cos());
    let u0 = GridFunction::from_fn(&fields.grid, |x| k / omega * (k * x).cos());
    let cfg = BoussinesqConfig { t_end: 3.0, dt: 1e-3, k_c: 3.0, nonlinear: false, save_every: 1000 };
    let hist = solve_boussinesq_filtered(&eta0, &u0, &fields, &params, &cfg).unwrap();
    let last = hist.states.last().unwrap();
    for (j, v) in last.eta.iter().enumerate() {
        let x = fields.grid.node(j);
        assert!((v - (k * x - omega * last.t).cos()).abs() < 1e-6);
    }
}

#[test]
fn boussinesq_zero_mass_and_cutoff() {
    let params = PhysicalParams::new(1.0, 1.0, 0.2).unwrap();
    let fields = flat_fields(20.0, 128, 1.0);
    let zero = GridFunction::zeros(&fields.grid);
    let cfg = BoussinesqConfig { t_end: 1.0, dt: 1e-2, k_c: 3.0, nonlinear: true, save_every: 10 };
    let hist = solve_boussinesq_filtered(&zero, &zero, &fields, &params, &cfg).unwrap();
    assert!(hist.states.iter().all(|s| s.eta.iter().chain(&s.u).all(|v| *v == 0.0)));
    let eta0 = GridFunction::from_fn(&fields.grid, |x| 0.5 * (-((x - 10.0) / 1.5).powi(2)).exp());
    let u0 = GridFunction::from_fn(&fields.grid, |x| 0.5 * (-((x - 10.0) / 1.5).powi(2)).exp());
    let hist = solve_boussinesq_filtered(&eta0, &u0, &fields, &params, &cfg).unwrap();
    let mass = |s: &BoussinesqState| s.eta.iter().sum::<f64>() * fields.grid.spacing();
    let m0 = mass(&hist.states[0]);
    for s in &hist.states {
        assert!((mass(s) - m0).abs() < 1e-10);
    }
    for s in &hist.states {
        let c = fields.grid.forward(&s.eta);
        for (cj, k) in c.iter().zip(fields.grid.wavenumbers()) {
            if k.abs() > cfg.k_c {
                assert!(cj.norm() < 1e-10);
            }
        }
    }
    let bad = BoussinesqConfig { k_c: 5.0, ..cfg };
    assert!(matches!(
        solve_boussinesq_filtered(&eta0, &u0, &fields, &params, &bad),
        Err(WaveError::Cutoff { .. })
    ));
}
