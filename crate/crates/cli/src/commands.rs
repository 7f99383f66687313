//! Subcommand pipelines. Each writes its result files through [`Output`] and
//! returns the summary lines printed on success.

use std::fs;
use std::path::PathBuf;

use kdvbed::bottom::{estimate_sigma_trend, estimate_stats, sample, ProcessSpec, ProcessStats};
use kdvbed::charflow::{expansion_residual_check, jacobian_asymptotics_check, monotonicity_sweep};
use kdvbed::coeffs::{coefficient_fields, theorem57_constants, EffectiveCoefficients};
use kdvbed::consistency::{
    fixed_point_report, iis_variance_rows, pairing_table, term_reports, ConsistencyConfig,
};
use kdvbed::ensemble::{run_ensemble, DecayPlan, DecayReport, EnsembleConfig};
use kdvbed::io::{write_csv, write_raw, Cell, RawMeta, Table};
use kdvbed::scalesep::{
    covering_realization, verify_characteristic_integral, verify_covariance_matrix, verify_donsker, verify_lln,
    verify_product_order, Bump, CharWeight, OrderEstimate, PairSpec, TestFunction,
};
use kdvbed::spectral::{GridFunction, SpectralGrid};
use kdvbed::stats::{linear_fit, Estimate};
use kdvbed::waves::{soliton, solve_boussinesq_filtered, solve_kdv, BoussinesqConfig, KdvCoefficients, Window};

use crate::config::Config;
use crate::manifest::{unix_now, RunManifest};
use crate::{CliError, Common};

/// Environment variable holding the rayon worker count.
pub const WORKERS_VAR: &str = "KDVBED_WORKERS";

/// Result directory plus the list of files written so far.
struct Output {
    dir: PathBuf,
    files: Vec<String>,
    summary: Vec<String>,
}

impl Output {
    fn csv(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        write_csv(&self.dir.join(name), table)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn raw(&mut self, name: &str, data: &[f64], meta: RawMeta) -> Result<(), CliError> {
        write_raw(&self.dir.join(name), data, &meta)?;
        self.files.push(name.to_string());
        self.files.push(format!("{name}.txt"));
        Ok(())
    }

    fn say(&mut self, line: String) {
        self.summary.push(line);
    }
}

fn workers() -> Result<Option<usize>, CliError> {
    match std::env::var(WORKERS_VAR) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Validation(format!("{WORKERS_VAR} must be a positive integer, got '{v}'"))),
        },
    }
}

pub fn run(name: &str, common: &Common) -> Result<Vec<String>, CliError> {
    let started = unix_now();
    let mut cfg = Config::load(common.config.as_deref())?;
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    cfg.output_dir = dir.display().to_string();
    let workers = workers()?;
    if let Some(n) = workers {
        // A second build in the same process fails harmlessly.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    fs::create_dir_all(&dir).map_err(|e| CliError::Validation(format!("cannot create {}: {e}", dir.display())))?;
    let mut out = Output { dir: dir.clone(), files: Vec::new(), summary: Vec::new() };
    match name {
        "generate-bottom" => generate_bottom(&cfg, &mut out)?,
        "coefficients" => coefficients(&cfg, &mut out)?,
        "donsker" => donsker(&cfg, &mut out)?,
        "lemmas" => lemmas(&cfg, &mut out)?,
        "solve-kdv" => solve_kdv_cmd(&cfg, &mut out)?,
        "solve-system" => solve_system(&cfg, &mut out)?,
        "consistency" => consistency(&cfg, &mut out)?,
        "ensemble" => ensemble(&cfg, &cfg.eps_list, &mut out)?,
        "decay" => ensemble(&cfg, &[cfg.eps], &mut out)?,
        other => return Err(CliError::Validation(format!("unknown subcommand {other}"))),
    }
    let manifest = RunManifest {
        subcommand: name.to_string(),
        config_path: common.config.as_ref().map(|p| p.display().to_string()),
        params: cfg.table(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        workers,
        started,
        finished: unix_now(),
        files: out.files.clone(),
    };
    manifest.write(&dir)?;
    let mut lines = out.summary;
    lines.push(format!("config_hash = {}", manifest.config_hash()));
    lines.push(format!("output = {}", dir.display()));
    Ok(lines)
}

fn est(e: Estimate) -> [Cell; 2] {
    [e.value.into(), e.se.into()]
}

fn row(cells: impl IntoIterator<Item = Cell>) -> Vec<Cell> {
    cells.into_iter().collect()
}

fn sample_bottom(cfg: &Config, spec: &ProcessSpec) -> Result<kdvbed::bottom::BottomRealization, CliError> {
    Ok(sample(spec, cfg.bottom_length, cfg.bottom_nodes, cfg.master_seed)?)
}

/// Largest admissible lag window, capped at `20ℓ`.
fn max_lag(cfg: &Config, spec: &ProcessSpec) -> f64 {
    (20.0 * spec.correlation_length()).min(0.5 * cfg.bottom_length)
}

fn generate_bottom(cfg: &Config, out: &mut Output) -> Result<(), CliError> {
    let spec = cfg.process()?;
    let real = sample_bottom(cfg, &spec)?;
    let n = real.grid.n();
    let data: Vec<f64> = [real.values(), real.derivative(), real.second_derivative(), real.third_derivative()].concat();
    out.raw(
        "bottom.f64",
        &data,
        RawMeta {
            shape: vec![4, n],
            grid: format!("y_j = j * {:e}, j = 0..{n}, period {:e}", real.grid.spacing(), real.period()),
            units: "rows: beta, d/dy beta, d2/dy2 beta, d3/dy3 beta; depth units, y in fast-variable units".into(),
        },
    )?;
    let stats = estimate_stats(&real, max_lag(cfg, &spec))?;
    let exact = spec.analytic_stats();
    let mut t = Table::new(&["quantity", "analytic", "estimate", "se"]);
    let pairs = |s: &ProcessStats| [s.m2, s.d2, s.d3, s.sigma_beta_sq];
    for ((name, a), e) in ["mean_beta_sq", "mean_dbeta_sq", "mean_dbeta_cube", "sigma_beta_sq"]
        .into_iter()
        .zip(pairs(&exact))
        .zip(pairs(&stats))
    {
        t.push(row([name.into(), a.value.into(), e.value.into(), e.se.into()]));
    }
    out.csv("bottom_stats.csv", &t)?;
    out.say(format!("sampled {n} nodes over period {}", real.period()));
    out.say(format!(
        "sigma_beta_sq = {:.6} +- {:.6} (analytic {:.6})",
        stats.sigma_beta_sq.value, stats.sigma_beta_sq.se, exact.sigma_beta_sq.value
    ));
    Ok(())
}

fn coefficient_row(source: &str, c: &EffectiveCoefficients) -> Vec<Cell> {
    let p = &c.params;
    let mut r = vec![source.into(), p.eps.into(), p.h.into(), p.g.into(), p.c0().into(), c.c1.into(), c.c2.into()];
    r.extend(est(c.a_beta));
    r.extend(est(c.a_kdv));
    r.extend(est(c.b));
    r.extend(est(c.sigma_beta));
    r.push(c.mean_speed().into());
    r
}

fn coefficients(cfg: &Config, out: &mut Output) -> Result<(), CliError> {
    let spec = cfg.process()?;
    let params = cfg.params();
    let analytic = theorem57_constants(&spec.analytic_stats(), &params)?;
    let real = sample_bottom(cfg, &spec)?;
    let sampled = theorem57_constants(&estimate_stats(&real, max_lag(cfg, &spec))?, &params)?;
    let mut t = Table::new(&[
        "source", "eps", "h_depth", "g_gravity", "c0", "c1", "c2", "a_beta", "a_beta_se", "a_kdv", "a_kdv_se", "b",
        "b_se", "sigma_beta", "sigma_beta_se", "mean_speed",
    ]);
    t.push(coefficient_row("analytic", &analytic));
    t.push(coefficient_row("sampled", &sampled));
    out.csv("coefficients.csv", &t)?;
    out.say(format!("a_KdV = {:e}, b = {:e} (analytic)", analytic.a_kdv.value, analytic.b.value));
    out.say(format!(
        "a_KdV = {:e} +- {:e}, b = {:e} +- {:e} (sampled)",
        sampled.a_kdv.value, sampled.a_kdv.se, sampled.b.value, sampled.b.se
    ));
    Ok(())
}

fn donsker(cfg: &Config, out: &mut Output) -> Result<(), CliError> {
    let spec = cfg.process()?;
    let r = verify_donsker(&spec, cfg.eps, cfg.x_bar, cfg.realizations, cfg.master_seed)?;
    let mut t = Table::new(&["quantity", "value", "se", "reference", "pass"]);
    t.push(row(["ks".into(), r.ks.into(), 0.0.into(), r.ks_critical.into(), r.ks_pass().into()]));
    t.push(row([
        "endpoint_variance".into(),
        r.variance.value.into(),
        r.variance.se.into(),
        r.x_bar.into(),
        r.variance_pass().into(),
    ]));
    t.push(row([
        "increment_corr".into(),
        r.increment_corr.into(),
        0.0.into(),
        r.corr_bound.into(),
        r.increment_pass().into(),
    ]));
    out.csv("donsker.csv", &t)?;
    out.say(format!("ks = {:.5} (critical {:.5})", r.ks, r.ks_critical));
    out.say(format!("endpoint variance = {:.5} +- {:.5} (target {})", r.variance.value, r.variance.se, r.x_bar));
    out.say(format!("increment correlation = {:.5} (bound {:.5})", r.increment_corr, r.corr_bound));
    Ok(())
}

fn order_row(t: &mut Table, o: &OrderEstimate, criterion: &str, pass: bool) {
    t.push(row([
        o.label.clone().into(),
        o.slope.into(),
        o.slope_se.into(),
        o.target.into(),
        criterion.into(),
        pass.into(),
    ]));
}

fn lemmas(cfg: &Config, out: &mut Output) -> Result<(), CliError> {
    let spec = cfg.process()?;
    let (m, seed, eps) = (cfg.realizations, cfg.master_seed, &cfg.eps_list);
    let ell = spec.correlation_length();
    let derived = spec.derivative_order() > 0;
    let mut checks = Table::new(&["check", "slope", "slope_se", "target", "criterion", "pass"]);

    let windows: Vec<f64> = [5.0, 10.0, 20.0, 40.0, 80.0].iter().map(|w| w * ell).collect();
    let trend = estimate_sigma_trend(&spec, &windows, seed)?;
    let mut tt = Table::new(&["window", "sigma_hat"]);
    for &(w, s) in &trend {
        tt.push(row([w.into(), s.into()]));
    }
    out.csv("sigma_trend.csv", &tt)?;
    if trend.iter().all(|&(_, s)| s > 0.0) {
        let lx: Vec<f64> = trend.iter().map(|p| p.0.ln()).collect();
        let ly: Vec<f64> = trend.iter().map(|p| p.1.ln()).collect();
        let fit = linear_fit(&lx, &ly);
        let (target, criterion, pass) = if derived {
            (-0.5, "slope <= -0.4", fit.slope <= -0.4)
        } else {
            (0.0, "|slope| <= 0.1", fit.slope.abs() <= 0.1)
        };
        checks.push(row([
            "sigma_trend".into(),
            fit.slope.into(),
            fit.slope_se.into(),
            target.into(),
            criterion.into(),
            pass.into(),
        ]));
    }

    let (f, g) = (Bump::new(1.0, 0.7), Bump::new(1.3, 0.6));
    let lln = verify_lln(&spec, &f, &g, eps, m, seed)?;
    let tol = if derived { 0.15 } else { 0.1 };
    order_row(&mut checks, &lln.order, &format!("|slope - target| <= max({tol}, 2se)"), lln.order.within(tol));
    let mut ct = Table::new(&["eps", "mean", "mean_se", "covariance_over_eps", "se", "target", "within_4se"]);
    for ((&e, mean), cov) in lln.order.eps.iter().zip(&lln.order.mean).zip(&lln.covariance) {
        let ok = (cov.value - lln.covariance_target).abs() <= 4.0 * cov.se;
        let mut r = vec![e.into()];
        r.extend(est(*mean));
        r.extend(est(*cov));
        r.push(lln.covariance_target.into());
        r.push(ok.into());
        ct.push(r);
    }
    out.csv("lln.csv", &ct)?;

    let c0 = cfg.params().c0();
    let pair = PairSpec::Independent(spec.clone(), spec.clone());
    let phi = TestFunction::new(1.0, 0.6, 0.5, 0.3);
    let product = verify_product_order(&pair, c0, &phi, eps, m, seed)?;
    order_row(&mut checks, &product, "|slope - target| <= max(0.15, 2se)", product.within(0.15));
    let w = CharWeight { theta: Bump::new(1.2, 0.6), x: Bump::new(1.0, 0.6), t: Bump::new(0.5, 0.3) };
    let chi = verify_characteristic_integral(&pair, c0, &w, eps, m, seed)?;
    order_row(&mut checks, &chi, "slope >= 0.85", chi.at_least(0.85));

    let mut cm = Table::new(&["pair", "entry", "empirical", "se", "target", "within_4se"]);
    let pairs = [
        ("independent", pair.clone()),
        ("identical", PairSpec::Identical(spec.clone())),
        ("shifted", PairSpec::Shifted(spec.clone(), 0.7 * ell)),
    ];
    for (label, p) in pairs {
        let rep = verify_covariance_matrix(&p, cfg.eps, cfg.x_bar, m, seed)?;
        let ok = rep.within(4.0);
        for (k, entry) in ["c11", "c12", "c22"].into_iter().enumerate() {
            let e = rep.empirical[k];
            cm.push(row([label.into(), entry.into(), e.value.into(), e.se.into(), rep.target[k].into(), ok.into()]));
        }
    }
    out.csv("covariance_matrix.csv", &cm)?;

    let base = cfg.params();
    let exp = expansion_residual_check(&spec, &base, eps, m, seed)?;
    order_row(&mut checks, &exp, "slope >= 1.9", exp.at_least(1.9));
    let jac = jacobian_asymptotics_check(&spec, &base, eps, m, seed)?;
    order_row(&mut checks, &jac, "slope >= 1.9", jac.at_least(1.9));
    let crossings = monotonicity_sweep(&spec, &base, m, seed)?;
    checks.push(row([
        "monotonicity_crossings".into(),
        (crossings as f64).into(),
        0.0.into(),
        0.0.into(),
        "no crossings".into(),
        (crossings == 0).into(),
    ]));
    let passed = checks.rows.iter().filter(|r| r[5] == Cell::from(true)).count();
    let total = checks.rows.len();
    out.csv("lemmas.csv", &checks)?;
    out.say(format!("{passed} of {total} checks pass"));
    Ok(())
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![b];
    }
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

fn solve_kdv_cmd(cfg: &Config, out: &mut Output) -> Result<(), CliError> {
    let spec = cfg.process()?;
    let coeffs = KdvCoefficients::from_effective(&theorem57_constants(&spec.analytic_stats(), &cfg.params())?);
    let grid = SpectralGrid::new(cfg.y_length, cfg.y_nodes)?;
    let y0 = 0.5 * cfg.y_length;
    let sol = soliton(&coeffs, cfg.soliton_speed, y0, cfg.y_length);
    let is_soliton = cfg.initial == "soliton";
    if is_soliton && !(cfg.soliton_speed > 0.0) {
        return Err(CliError::Validation("soliton_speed must be positive".into()));
    }
    let (c, w) = (cfg.bump_center, cfg.bump_width);
    let q0 = if is_soliton {
        GridFunction::from_fn(&grid, |y| sol(y, 0.0))
    } else {
        GridFunction::from_fn(&grid, |y| (-((y - c) / w).powi(2)).exp())
    };
    let tau_end = if cfg.tau_end > 0.0 {
        cfg.tau_end
    } else if is_soliton {
        cfg.y_length / cfg.soliton_speed
    } else {
        1.0
    };
    let outputs = linspace(0.0, tau_end, cfg.outputs.max(1) + 1);
    let hist = solve_kdv(&q0, coeffs, &outputs, cfg.dtau)?;
    let (m0, e0) = (hist.mass(0), hist.energy(0));
    let exact_shape = is_soliton && coeffs.b == 0.0;
    let mut t = Table::new(&["tau", "mass", "energy", "max", "mass_law_error", "energy_law_error", "shape_error"]);
    let mut data = Vec::new();
    let mut last_shape = f64::NAN;
    for (k, s) in hist.states.iter().enumerate() {
        let mass_err = hist.mass(k) / (m0 * (coeffs.b * s.tau).exp()) - 1.0;
        let energy_err = hist.energy(k) / (e0 * (2.0 * coeffs.b * s.tau).exp()) - 1.0;
        let peak = s.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let shape = if exact_shape {
            let exact: Vec<f64> = grid.nodes().iter().map(|&y| sol(y, s.tau)).collect();
            let scale = exact.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            s.values.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale
        } else {
            f64::NAN
        };
        last_shape = shape;
        t.push(row([
            s.tau.into(),
            hist.mass(k).into(),
            hist.energy(k).into(),
            peak.into(),
            mass_err.into(),
            energy_err.into(),
            shape.into(),
        ]));
        data.extend_from_slice(&s.values);
    }
    out.csv("kdv.csv", &t)?;
    out.raw(
        "kdv_q.f64",
        &data,
        RawMeta {
            shape: vec![hist.states.len(), grid.n()],
            grid: format!(
                "rows tau = linspace(0, {tau_end:e}, {}); Y_j = j * {:e}, j = 0..{}",
                hist.states.len(),
                grid.spacing(),
                grid.n()
            ),
            units: "q in depth units; Y and tau in slow variables".into(),
        },
    )?;
    let k = hist.states.len() - 1;
    out.say(format!(
        "c1 = {:e}, c2 = {:e}, b = {:e}, tau_end = {tau_end}",
        coeffs.c1, coeffs.c2, coeffs.b
    ));
    out.say(format!(
        "mass law error = {:e}, energy law error = {:e}",
        hist.mass(k) / (m0 * (coeffs.b * tau_end).exp()) - 1.0,
        hist.energy(k) / (e0 * (2.0 * coeffs.b * tau_end).exp()) - 1.0
    ));
    if exact_shape {
        out.say(format!("final shape error = {last_shape:e}"));
    }
    Ok(())
}

fn solve_system(cfg: &Config, out: &mut Output) -> Result<(), CliError> {
    let spec = cfg.process()?;
    let params = cfg.params();
    let real = covering_realization(&spec, cfg.y_length, params.eps, cfg.master_seed)?;
    let coeffs = theorem57_constants(&spec.analytic_stats(), &params)?;
    let grid = SpectralGrid::new(cfg.y_length, cfg.y_nodes)?;
    let fields = coefficient_fields(&real, &coeffs, &params, &grid)?;
    let (c, w) = (cfg.bump_center, cfg.bump_width);
    let eta0 = GridFunction::from_fn(&grid, |x| (-((x - c) / w).powi(2)).exp());
    let u0 = eta0.scale((params.g / params.h).sqrt());
    let h_min = fields.h0.iter().cloned().fold(f64::INFINITY, f64::min);
    let k_c = if cfg.k_cutoff > 0.0 {
        cfg.k_cutoff
    } else {
        0.4 * (3.0 * h_min / (params.eps * params.eps * params.h.powi(3))).sqrt()
    };
    let steps = (cfg.t_end / cfg.dt).ceil().max(1.0) as usize;
    let save_every = (steps / cfg.outputs.max(1)).max(1);
    let bc = BoussinesqConfig { t_end: cfg.t_end, dt: cfg.dt, k_c, nonlinear: true, save_every };
    let hist = solve_boussinesq_filtered(&eta0, &u0, &fields, &params, &bc)?;
    let dx = grid.spacing();
    let mut t = Table::new(&["t", "mass", "energy"]);
    let (mut eta, mut u) = (Vec::new(), Vec::new());
    for (s, e) in hist.states.iter().zip(&hist.energy) {
        t.push(row([s.t.into(), (s.eta.iter().sum::<f64>() * dx).into(), (*e).into()]));
        eta.extend_from_slice(&s.eta);
        u.extend_from_slice(&s.u);
    }
    out.csv("system.csv", &t)?;
    let times: Vec<String> = hist.states.iter().map(|s| format!("{:e}", s.t)).collect();
    let grid_text = format!("rows t = [{}]; X_j = j * {dx:e}, j = 0..{}", times.join(", "), grid.n());
    let shape = vec![hist.states.len(), grid.n()];
    out.raw("system_eta.f64", &eta, RawMeta { shape: shape.clone(), grid: grid_text.clone(), units: "eta in depth units".into() })?;
    out.raw("system_u.f64", &u, RawMeta { shape, grid: grid_text, units: "u in sqrt(g h) units".into() })?;
    out.raw(
        "system_depth.f64",
        &fields.h0,
        RawMeta {
            shape: vec![grid.n()],
            grid: format!("X_j = j * {dx:e}, j = 0..{}", grid.n()),
            units: "effective depth h0".into(),
        },
    )?;
    let e0 = hist.energy[0];
    let e1 = *hist.energy.last().expect("history stores the initial state");
    out.say(format!("k_c = {k_c:e}, states = {}, energy drift = {:e}", hist.states.len(), e1 / e0 - 1.0));
    Ok(())
}

fn consistency(cfg: &Config, out: &mut Output) -> Result<(), CliError> {
    let spec = cfg.process()?;
    let ccfg = ConsistencyConfig {
        h: cfg.h_depth,
        g: cfg.g_gravity,
        eps_list: cfg.eps_list.clone(),
        realizations: cfg.realizations,
        master_seed: cfg.master_seed,
        stride: cfg.stride,
        window: Window { x_lo: cfg.x_lo, x_hi: cfg.x_hi, t_max: cfg.t_max },
        bump_center: cfg.bump_center,
        bump_width: cfg.bump_width,
        y_length: cfg.y_length,
        y_nodes: cfg.y_nodes,
        ..Default::default()
    };
    let tab = pairing_table(&spec, &ccfg)?;
    let reports = term_reports(&tab, &ccfg.params(ccfg.eps_list[0])?);
    let mut terms = Table::new(&["term", "claimed_order", "slope", "slope_se"]);
    let mut values = Table::new(&["term", "eps", "rms", "rms_se", "mean", "mean_se", "sd"]);
    let mut limits = Table::new(&["term", "eps", "measured", "measured_se", "predicted", "predicted_se", "agrees_10pct"]);
    for r in &reports {
        let name = r.term.name();
        terms.push(row([name.into(), r.claimed_order.into(), r.order.slope.into(), r.order.slope_se.into()]));
        for k in 0..r.order.eps.len() {
            let mut v = vec![name.into(), r.order.eps[k].into()];
            v.extend(est(r.order.stat[k]));
            v.extend(est(r.order.mean[k]));
            v.push(r.order.sd[k].into());
            values.push(v);
        }
        for l in &r.limit {
            let mut v = vec![name.into(), l.eps.into()];
            v.extend(est(l.measured));
            v.extend(est(l.predicted));
            v.push(l.agrees(0.1).into());
            limits.push(v);
        }
    }
    out.csv("terms.csv", &terms)?;
    out.csv("term_values.csv", &values)?;
    out.csv("term_limits.csv", &limits)?;

    let fixed = fixed_point_report(&tab)?;
    let mut fp = Table::new(&["eps", "a_kdv", "a_kdv_se", "b", "b_se", "input_a_kdv", "input_b"]);
    let mut push = |label: Cell, a: Estimate, b: Estimate| {
        let mut v = vec![label];
        v.extend(est(a));
        v.extend(est(b));
        v.push(fixed.input_a_kdv.into());
        v.push(fixed.input_b.into());
        fp.push(v);
    };
    for r in &fixed.rows {
        push(r.eps.into(), r.a_kdv, r.b);
    }
    push(0.0.into(), fixed.a_kdv, fixed.b);
    out.csv("fixed_point.csv", &fp)?;

    let mut iis = Table::new(&["eps", "mean", "mean_se", "variance", "variance_se", "oracle"]);
    for r in iis_variance_rows(&tab, &ccfg) {
        let mut v = vec![r.eps.into()];
        v.extend(est(r.mean));
        v.extend(est(r.variance));
        v.push(r.oracle.into());
        iis.push(v);
    }
    out.csv("iis.csv", &iis)?;
    out.say(format!(
        "a_KdV limit = {:e} +- {:e} (input {:e})",
        fixed.a_kdv.value, fixed.a_kdv.se, fixed.input_a_kdv
    ));
    out.say(format!("b limit = {:e} +- {:e} (input {:e})", fixed.b.value, fixed.b.se, fixed.input_b));
    out.say(format!("fixed point closes within 4 SE: {}", fixed.closes(4.0)));
    Ok(())
}

fn decay_files(out: &mut Output, k: usize, rep: &DecayReport) -> Result<(), CliError> {
    let mut t = Table::new(&[
        "tau", "t", "spread", "late", "max", "max_se", "oracle_max", "center", "l2_error",
    ]);
    let (mut mean, mut se, mut grid) = (Vec::new(), Vec::new(), Vec::new());
    for r in &rep.rows {
        t.push(row([
            r.tau.into(),
            r.t.into(),
            r.spread.into(),
            r.late.into(),
            r.max.value.into(),
            r.max.se.into(),
            r.oracle_max.into(),
            r.center.into(),
            r.l2_error.into(),
        ]));
        mean.extend_from_slice(&r.field.mean);
        se.extend((0..r.grid.len()).map(|j| r.field.se(j)));
        grid.extend_from_slice(&r.grid);
    }
    out.csv(&format!("decay_{k}.csv"), &t)?;
    let points = rep.rows.first().map_or(0, |r| r.grid.len());
    let shape = vec![rep.rows.len(), points];
    let grid_text = format!("eps = {:e}; rows follow decay_{k}.csv; X nodes in decay_{k}_grid.f64", rep.eps);
    out.raw(
        &format!("decay_{k}_mean.f64"),
        &mean,
        RawMeta { shape: shape.clone(), grid: grid_text.clone(), units: "E(r) in depth units".into() },
    )?;
    out.raw(
        &format!("decay_{k}_se.f64"),
        &se,
        RawMeta { shape: shape.clone(), grid: grid_text.clone(), units: "standard error of E(r)".into() },
    )?;
    out.raw(&format!("decay_{k}_grid.f64"), &grid, RawMeta { shape, grid: grid_text, units: "X, slow variable".into() })?;
    Ok(())
}

fn ensemble(cfg: &Config, eps_list: &[f64], out: &mut Output) -> Result<(), CliError> {
    let ecfg = EnsembleConfig {
        master_seed: cfg.master_seed,
        realizations: cfg.realizations,
        eps_list: eps_list.to_vec(),
        spec: cfg.process()?,
        h: cfg.h_depth,
        g: cfg.g_gravity,
        experiment: "decay".into(),
        output_dir: Some(out.dir.clone()),
        decay: DecayPlan {
            kappa: cfg.kappa,
            tau_min: cfg.tau_min,
            tau_max: cfg.tau_max,
            times: cfg.times,
            points: cfg.points,
            starts: cfg.starts,
        },
    };
    let res = run_ensemble(&ecfg)?;
    let mut summary = Table::new(&[
        "eps", "slope", "slope_se", "pre_asymptotic", "fitted_d", "fitted_d_se", "predicted_d", "successes", "failures",
    ]);
    let mut failures = Table::new(&["eps", "index", "seed", "message"]);
    for (k, (rep, d)) in res.decay.iter().zip(&res.diffusion.rows).enumerate() {
        decay_files(out, k, rep)?;
        summary.push(row([
            rep.eps.into(),
            rep.slope.value.into(),
            rep.slope.se.into(),
            rep.pre_asymptotic.into(),
            d.fitted.value.into(),
            d.fitted.se.into(),
            d.predicted.into(),
            rep.successes.into(),
            rep.failures.len().into(),
        ]));
        for f in &rep.failures {
            failures.push(row([rep.eps.into(), f.index.into(), f.seed.into(), f.message.clone().into()]));
        }
        out.say(format!(
            "eps = {}: decay slope = {:.4} +- {:.4}, D = {:.5} +- {:.5} (predicted {:.5}), {} ok, {} failed",
            rep.eps,
            rep.slope.value,
            rep.slope.se,
            d.fitted.value,
            d.fitted.se,
            d.predicted,
            rep.successes,
            rep.failures.len()
        ));
    }
    out.csv("decay_summary.csv", &summary)?;
    out.csv("failures.csv", &failures)?;
    if let Some(s) = res.diffusion.slope {
        out.say(format!("d log D / d log eps = {:.4} +- {:.4}", s.value, s.se));
    }
    out.say(format!("ensemble hash = {}", res.config_hash));
    Ok(())
}
