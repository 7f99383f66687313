//! Monte Carlo orchestration: seeds, parallel sweeps with exact
//! order-independent aggregation, and the spreading of `E(r)`.
//!
//! The decay experiment launches an exact soliton of the effective KdV
//! equation, so `q(·, τ)` is a translate of `q₀` and the Gaussian-convolution
//! oracle `G_s * q₀` applies without a dispersive correction. The spread of
//! the random characteristics is `s² = ε³σ_β²√(gh)t/(4h²) = 2Dτ` with
//! `D = εσ_β²√(gh)/(8h²)`.

use std::fmt::{self, Display, Write as _};
use std::path::PathBuf;

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bottom::{BottomError, ProcessSpec};
use crate::charflow::{FlowError, TravelTime};
use crate::coeffs::{theorem57_constants, CoeffError, EffectiveCoefficients, PhysicalParams};
use crate::quad::composite_gauss;
use crate::scalesep::covering_realization;
use crate::stats::{linear_fit, log_log_slope, Estimate};
use crate::waves::{reconstruct_r_with, soliton, KdvCoefficients};

/// SplitMix64 seed derivation.
///
/// `z = master + (index + 1)·0x9E3779B97F4A7C15` (wrapping), then
/// `z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27; z *= 0x94D049BB133111EB;
/// z ^= z >> 31`. Distinct indices give decorrelated 64-bit seeds.
pub fn mix_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of realization `index` in stream `stream` (one stream per `ε`).
pub fn realization_seed(master: u64, stream: u64, index: u64) -> u64 {
    mix_seed(mix_seed(master, stream), index)
}

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error(transparent)]
    Bottom(#[from] BottomError),
    #[error(transparent)]
    Coeff(#[from] CoeffError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("invalid ensemble config: {0}")]
    Invalid(String),
    #[error("the soliton is exact only for b = 0, got b = {0}")]
    Growth(f64),
    #[error("value {0} outside the exact accumulator range")]
    Range(f64),
    #[error("all {0} realizations failed")]
    AllFailed(usize),
}

/// Time ladder and initial soliton of the decay experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayPlan {
    /// Soliton inverse width `κ`; the profile `sech²(κY)` has SD `π/(κ√12)`.
    pub kappa: f64,
    /// Geometric ladder in slow time `τ = ε²t`.
    pub tau_min: f64,
    pub tau_max: f64,
    pub times: usize,
    /// `X` nodes per ladder time.
    pub points: usize,
    /// Soliton launch points per realization, evenly spaced over the bottom
    /// period; stationarity makes their average an unbiased sample of `E(r)`.
    pub starts: usize,
}

impl Default for DecayPlan {
    fn default() -> Self {
        Self { kappa: 20.0, tau_min: 0.01, tau_max: 2.0, times: 12, points: 257, starts: 16 }
    }
}

impl DecayPlan {
    pub fn taus(&self) -> Vec<f64> {
        if self.times == 1 {
            return vec![self.tau_max];
        }
        let r = (self.tau_max / self.tau_min).ln() / (self.times - 1) as f64;
        (0..self.times).map(|k| self.tau_min * (r * k as f64).exp()).collect()
    }

    /// SD of the normalized soliton profile.
    pub fn width(&self) -> f64 {
        std::f64::consts::PI / (self.kappa * 12f64.sqrt())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleConfig {
    pub master_seed: u64,
    pub realizations: usize,
    pub eps_list: Vec<f64>,
    pub spec: ProcessSpec,
    pub h: f64,
    pub g: f64,
    pub experiment: String,
    /// Not part of the hash.
    pub output_dir: Option<PathBuf>,
    pub decay: DecayPlan,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            master_seed: 2024,
            realizations: 400,
            eps_list: vec![0.1, 0.05],
            spec: ProcessSpec::GaussianSpectral { sigma: 1.0, ell: 1.0 },
            h: 1.0,
            g: 1.0,
            experiment: "decay".into(),
            output_dir: None,
            decay: DecayPlan::default(),
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<(), EnsembleError> {
        let bad = |m: &str| Err(EnsembleError::Invalid(m.into()));
        if self.realizations == 0 {
            return bad("realizations must be positive");
        }
        if self.eps_list.is_empty() || self.eps_list.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return bad("eps values must lie in (0, 1)");
        }
        let d = &self.decay;
        if !(d.kappa > 0.0) || !(d.tau_min > 0.0) || !(d.tau_max >= d.tau_min) || d.times == 0 || d.points < 3 || d.starts == 0 {
            return bad("decay plan needs kappa > 0, 0 < tau_min <= tau_max, times >= 1, points >= 3, starts >= 1");
        }
        self.spec.validate()?;
        PhysicalParams::new(self.h, self.g, self.eps_list[0])?;
        Ok(())
    }

    /// Every input that affects results, one `key = value` per line with
    /// round-trip float formatting.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment = {}", self.experiment);
        let _ = writeln!(s, "master_seed = {}", self.master_seed);
        let _ = writeln!(s, "realizations = {}", self.realizations);
        let _ = writeln!(s, "eps = {:?}", self.eps_list);
        let _ = writeln!(s, "spec = {:?}", self.spec);
        let _ = writeln!(s, "h_depth = {:?}", self.h);
        let _ = writeln!(s, "g_gravity = {:?}", self.g);
        let _ = writeln!(s, "decay = {:?}", self.decay);
        s
    }

    /// SHA-256 of [`Self::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        sha256_hex(self.canonical().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// A realization excluded from the aggregates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Failure {
    pub index: usize,
    pub seed: u64,
    pub message: String,
}

impl Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "realization {} (seed {}): {}", self.index, self.seed, self.message)
    }
}

/// Fixed-point scale of [`FieldSum`]: values are rounded to multiples of `2⁻⁶⁴`.
const FIXED_SCALE: f64 = 18_446_744_073_709_551_616.0;
/// Bound on `|x|` keeping `M·x²·2⁶⁴` inside `i128` for `M < 2²⁰`.
const FIXED_LIMIT: f64 = 1_048_576.0;

/// Exact sums of fields and their squares in 64.64 fixed point. Integer
/// addition is associative, so the result is independent of the order in
/// which realizations arrive.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct FieldSum {
    pub count: u64,
    sum: Vec<i128>,
    sum_sq: Vec<i128>,
}

impl FieldSum {
    pub fn new(len: usize) -> Self {
        Self { count: 0, sum: vec![0; len], sum_sq: vec![0; len] }
    }

    pub fn add(&mut self, x: &[f64]) -> Result<(), EnsembleError> {
        if let Some(&bad) = x.iter().find(|v| !(v.abs() < FIXED_LIMIT)) {
            return Err(EnsembleError::Range(bad));
        }
        for (j, &v) in x.iter().enumerate() {
            self.sum[j] += (v * FIXED_SCALE).round() as i128;
            self.sum_sq[j] += (v * v * FIXED_SCALE).round() as i128;
        }
        self.count += 1;
        Ok(())
    }

    pub fn merge(mut self, o: FieldSum) -> FieldSum {
        if self.count == 0 {
            return o;
        }
        for (a, b) in self.sum.iter_mut().zip(&o.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&o.sum_sq) {
            *a += b;
        }
        self.count += o.count;
        self
    }

    pub fn moments(&self) -> FieldMoments {
        let n = self.count as f64;
        let mean: Vec<f64> = self.sum.iter().map(|&s| s as f64 / FIXED_SCALE / n).collect();
        let variance = self
            .sum_sq
            .iter()
            .zip(&mean)
            .map(|(&q, m)| if self.count > 1 { ((q as f64 / FIXED_SCALE / n - m * m) * n / (n - 1.0)).max(0.0) } else { 0.0 })
            .collect();
        FieldMoments { count: self.count as usize, mean, variance }
    }
}

/// Pointwise ensemble mean and variance of a field.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldMoments {
    pub count: usize,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl FieldMoments {
    pub fn from_fields(fields: &[Vec<f64>]) -> Result<Self, EnsembleError> {
        let mut acc = FieldSum::new(fields.first().map_or(0, Vec::len));
        for f in fields {
            acc.add(f)?;
        }
        Ok(acc.moments())
    }

    pub fn se(&self, j: usize) -> f64 {
        (self.variance[j] / self.count as f64).sqrt()
    }
}

/// Per-realization outputs of a sweep, ordered by realization index.
#[derive(Clone, Debug)]
pub struct Sweep<T> {
    pub seeds: Vec<u64>,
    pub results: Vec<Option<T>>,
    pub failures: Vec<Failure>,
}

impl<T> Sweep<T> {
    pub fn successes(&self) -> usize {
        self.results.iter().filter(|r| r.is_some()).count()
    }

    pub fn ok(&self) -> impl Iterator<Item = &T> {
        self.results.iter().flatten()
    }
}

/// Runs `f(seed)` for `m` realizations of stream `stream` in parallel and
/// collects the results by index.
pub fn sweep<T, E, F>(master: u64, stream: u64, m: usize, f: F) -> Sweep<T>
where
    T: Send,
    E: Display,
    F: Fn(u64) -> Result<T, E> + Sync,
{
    let seeds: Vec<u64> = (0..m).map(|i| realization_seed(master, stream, i as u64)).collect();
    let out: Vec<Result<T, String>> = seeds.par_iter().map(|&s| f(s).map_err(|e| e.to_string())).collect();
    let mut results = Vec::with_capacity(m);
    let mut failures = Vec::new();
    for (index, (r, &seed)) in out.into_iter().zip(&seeds).enumerate() {
        match r {
            Ok(v) => results.push(Some(v)),
            Err(message) => {
                failures.push(Failure { index, seed, message });
                results.push(None);
            }
        }
    }
    Sweep { seeds, results, failures }
}

/// `(G_s * A sech²(κ·))(u)`.
pub fn convolved_soliton(amp: f64, kappa: f64, s: f64, u: f64) -> f64 {
    let sech2 = |w: f64| {
        let c = 1.0 / (kappa * w).cosh();
        amp * c * c
    };
    if s * kappa < 1e-6 {
        return sech2(u);
    }
    let half = 20.0 / kappa + 8.0 * s;
    let panels = ((4.0 * half / s.min(1.0 / kappa)).ceil() as usize).clamp(64, 1 << 14);
    let norm = 1.0 / (s * (2.0 * std::f64::consts::PI).sqrt());
    composite_gauss(&|w| sech2(w) * norm * (-0.5 * ((u - w) / s).powi(2)).exp(), u - half, u + half, panels, 8)
}

/// The `s` at which `max(G_s * A sech²(κ·)) = max`; zero if `max ≥ A`.
pub fn invert_spread(amp: f64, kappa: f64, max: f64) -> f64 {
    if max >= amp {
        return 0.0;
    }
    let mut hi = 1.0 / kappa;
    while convolved_soliton(amp, kappa, hi, 0.0) > max {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if convolved_soliton(amp, kappa, mid, 0.0) > max {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// One ladder time of the decay experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayRow {
    pub tau: f64,
    pub t: f64,
    /// Predicted spread `s` of the characteristics.
    pub spread: f64,
    /// `s > 2w₀`.
    pub late: bool,
    pub grid: Vec<f64>,
    pub field: FieldMoments,
    /// `max_X E(r)` with the SE at the maximizing node.
    pub max: Estimate,
    /// `max(G_s * q₀)` at the predicted spread.
    pub oracle_max: f64,
    /// Centre of mass of `E(r)`.
    pub center: f64,
    /// `‖E(r) − G_s * q(·, τ)‖₂ / ‖G_s * q(·, τ)‖₂`, oracle centred at `center`.
    pub l2_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayReport {
    pub eps: f64,
    pub config_hash: String,
    pub coeffs: EffectiveCoefficients,
    pub amplitude: f64,
    pub kappa: f64,
    pub width: f64,
    pub sigma_beta_sq: f64,
    pub rows: Vec<DecayRow>,
    /// `d log max / d log t` over the late rows, or over all rows when
    /// `pre_asymptotic`.
    pub slope: Estimate,
    pub pre_asymptotic: bool,
    pub successes: usize,
    pub failures: Vec<Failure>,
}

impl DecayReport {
    pub fn late_rows(&self) -> impl Iterator<Item = &DecayRow> {
        self.rows.iter().filter(|r| r.late)
    }
}

/// `max_X E(r)(X, t)` over the ladder for one `ε`, with its log-log slope.
pub fn expectation_decay(cfg: &EnsembleConfig, eps: f64) -> Result<DecayReport, EnsembleError> {
    cfg.validate()?;
    let params = PhysicalParams::new(cfg.h, cfg.g, eps)?;
    let stats = cfg.spec.analytic_stats();
    let coeffs = theorem57_constants(&stats, &params)?;
    if coeffs.b.value != 0.0 {
        return Err(EnsembleError::Growth(coeffs.b.value));
    }
    let plan = &cfg.decay;
    let kdv = KdvCoefficients::from_effective(&coeffs);
    let speed = 4.0 * kdv.c1 * plan.kappa * plan.kappa;
    let amp = speed / kdv.c2;
    let q = soliton(&kdv, speed, 0.0, 1e9);
    let (h, c0) = (params.h, params.c0());
    let sigma_sq = stats.sigma_beta_sq.value;
    let width = plan.width();

    // Mean slowness to second order in ε fixes the grid centres.
    let base = c0 * (1.0 - eps * eps * coeffs.a_kdv.value);
    let k = c0 * eps / (2.0 * h);
    let mean_speed = base / (1.0 + (k / base).powi(2) * stats.m2.value);

    let taus = plan.taus();
    let mut grids = Vec::new();
    let mut spreads = Vec::new();
    for &tau in &taus {
        let t = tau / (eps * eps);
        let s = (eps.powi(3) * sigma_sq * c0 * t / (4.0 * h * h)).sqrt();
        let center = speed * tau + mean_speed * t;
        let half = 6.0 * s + 12.0 / plan.kappa + 0.1;
        let n = plan.points;
        grids.push((0..n).map(|j| center - half + 2.0 * half * j as f64 / (n - 1) as f64).collect::<Vec<f64>>());
        spreads.push(s);
    }
    // Launch points decorrelate only when the period is well beyond the path.
    let reach = 2.0 * (taus.last().unwrap() / (eps * eps) * c0 + 12.0 * spreads.last().unwrap() + 1.0);

    let stream = cfg.eps_list.iter().position(|&e| e == eps).unwrap_or(cfg.eps_list.len()) as u64;
    let run = sweep(cfg.master_seed, stream, cfg.realizations, |seed| -> Result<Vec<f64>, EnsembleError> {
        let real = covering_realization(&cfg.spec, reach, eps, seed)?;
        let tt = TravelTime::new(&real, &coeffs)?;
        let mut out = vec![0.0; taus.len() * plan.points];
        let weight = 1.0 / plan.starts as f64;
        for j in 0..plan.starts {
            let y0 = tt.period() * j as f64 / plan.starts as f64;
            let shifted = |y: f64, tau: f64| q(y - y0, tau);
            for (k, (tau, xs)) in taus.iter().zip(&grids).enumerate() {
                let at: Vec<f64> = xs.iter().map(|x| x + y0).collect();
                let r = reconstruct_r_with(&shifted, &tt, &at, tau / (eps * eps));
                for (o, v) in out[k * plan.points..].iter_mut().zip(r) {
                    *o += weight * v;
                }
            }
        }
        if let Some(&bad) = out.iter().find(|v| !(v.abs() < FIXED_LIMIT)) {
            return Err(EnsembleError::Range(bad));
        }
        Ok(out)
    });
    let successes = run.successes();
    if successes == 0 {
        return Err(EnsembleError::AllFailed(cfg.realizations));
    }
    let mut acc = FieldSum::new(taus.len() * plan.points);
    for f in run.ok() {
        acc.add(f)?;
    }
    let all = acc.moments();

    let mut rows = Vec::new();
    for (i, ((&tau, xs), &s)) in taus.iter().zip(&grids).zip(&spreads).enumerate() {
        let span = i * plan.points..(i + 1) * plan.points;
        let field = FieldMoments {
            count: all.count,
            mean: all.mean[span.clone()].to_vec(),
            variance: all.variance[span].to_vec(),
        };
        let j = (0..field.mean.len()).max_by(|&a, &b| field.mean[a].total_cmp(&field.mean[b])).unwrap();
        let max = Estimate { value: field.mean[j], se: field.se(j) };
        let dx = xs[1] - xs[0];
        let mass: f64 = field.mean.iter().sum::<f64>() * dx;
        let center = xs.iter().zip(&field.mean).map(|(x, m)| x * m).sum::<f64>() * dx / mass;
        let oracle: Vec<f64> = xs.iter().map(|x| convolved_soliton(amp, plan.kappa, s, x - center)).collect();
        let diff: f64 = oracle.iter().zip(&field.mean).map(|(o, m)| (o - m).powi(2)).sum();
        let norm: f64 = oracle.iter().map(|o| o * o).sum();
        rows.push(DecayRow {
            tau,
            t: tau / (eps * eps),
            spread: s,
            late: s > 2.0 * width,
            grid: xs.clone(),
            max,
            oracle_max: convolved_soliton(amp, plan.kappa, s, 0.0),
            center,
            l2_error: (diff / norm).sqrt(),
            field,
        });
    }

    let late: Vec<&DecayRow> = rows.iter().filter(|r| r.late).collect();
    let pre_asymptotic = late.len() < 3;
    let used: Vec<&DecayRow> = if pre_asymptotic { rows.iter().collect() } else { late };
    let fit = log_log_slope(
        &used.iter().map(|r| r.t).collect::<Vec<_>>(),
        &used.iter().map(|r| r.max.value).collect::<Vec<_>>(),
        &used.iter().map(|r| r.max.se).collect::<Vec<_>>(),
    );
    Ok(DecayReport {
        eps,
        config_hash: cfg.hash(),
        coeffs,
        amplitude: amp,
        kappa: plan.kappa,
        width,
        sigma_beta_sq: sigma_sq,
        rows,
        slope: Estimate { value: fit.slope, se: fit.slope_se },
        pre_asymptotic,
        successes,
        failures: run.failures,
    })
}

/// Fitted and predicted diffusion coefficient at one `ε`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffusionRow {
    pub eps: f64,
    pub fitted: Estimate,
    /// `εσ_β²√(gh)/(8h²)`.
    pub predicted: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionReport {
    pub rows: Vec<DiffusionRow>,
    /// `d log D / d log ε`; needs two `ε` and every fitted `D` positive.
    pub slope: Option<Estimate>,
}

/// Spread `s_k` recovered from each measured maximum by inverting
/// `s ↦ max(G_s * q₀)`, then `s² = 2Dτ` fitted through the origin. Late rows
/// are used when at least three exist, all rows otherwise. The SE treats
/// the per-row errors as fully correlated.
pub fn fit_diffusion(report: &DecayReport) -> Estimate {
    let late: Vec<&DecayRow> = report.late_rows().collect();
    let rows: Vec<&DecayRow> = if late.len() >= 3 { late } else { report.rows.iter().collect() };
    let (mut num, mut den, mut err) = (0.0, 0.0, 0.0);
    for r in rows {
        let s = invert_spread(report.amplitude, report.kappa, r.max.value);
        // d(s²)/d max from a centred difference of the oracle curve.
        let ds = 1e-4 * s.max(report.width);
        let slope = (convolved_soliton(report.amplitude, report.kappa, s + ds, 0.0)
            - convolved_soliton(report.amplitude, report.kappa, (s - ds).max(0.0), 0.0))
            / ((s + ds).powi(2) - (s - ds).max(0.0).powi(2));
        num += r.tau * s * s;
        den += r.tau * r.tau;
        err += r.tau * (r.max.se / slope.abs());
    }
    Estimate { value: num / (2.0 * den), se: err / (2.0 * den) }
}

/// [`expectation_decay`] and [`fit_diffusion`] for every `ε` in the config,
/// regressed on `ε` in log-log.
pub fn diffusion_coefficient(cfg: &EnsembleConfig) -> Result<(Vec<DecayReport>, DiffusionReport), EnsembleError> {
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for &eps in &cfg.eps_list {
        let rep = expectation_decay(cfg, eps)?;
        let params = PhysicalParams::new(cfg.h, cfg.g, eps)?;
        let predicted = eps * rep.sigma_beta_sq * params.c0() / (8.0 * cfg.h * cfg.h);
        rows.push(DiffusionRow { eps, fitted: fit_diffusion(&rep), predicted });
        reports.push(rep);
    }
    let slope = if rows.len() >= 2 && rows.iter().all(|r| r.fitted.value > 0.0) {
        let x: Vec<f64> = rows.iter().map(|r| r.eps).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.fitted.value).collect();
        let se: Vec<f64> = rows.iter().map(|r| r.fitted.se).collect();
        let fit = if rows.len() == 2 {
            let l = linear_fit(&x.iter().map(|v| v.ln()).collect::<Vec<_>>(), &y.iter().map(|v| v.ln()).collect::<Vec<_>>());
            let rel = (se[0] / y[0]).hypot(se[1] / y[1]);
            crate::stats::LineFit { slope_se: rel / (x[0] / x[1]).ln().abs(), ..l }
        } else {
            log_log_slope(&x, &y, &se)
        };
        Some(Estimate { value: fit.slope, se: fit.slope_se })
    } else {
        None
    };
    Ok((reports, DiffusionReport { rows, slope }))
}

/// Decay reports for every `ε` plus the diffusion fit.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    pub config_hash: String,
    pub decay: Vec<DecayReport>,
    pub diffusion: DiffusionReport,
}

impl EnsembleResult {
    /// `successes + failures` summed over `ε`.
    pub fn accounted(&self) -> usize {
        self.decay.iter().map(|r| r.successes + r.failures.len()).sum()
    }
}

/// Runs the configured experiment. `decay` is the only ensemble pipeline;
/// the term suite has its own driver in `consistency`.
pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<EnsembleResult, EnsembleError> {
    if cfg.experiment != "decay" {
        return Err(EnsembleError::Invalid(format!("unknown experiment '{}'", cfg.experiment)));
    }
    let (decay, diffusion) = diffusion_coefficient(cfg)?;
    Ok(EnsembleResult { config_hash: cfg.hash(), decay, diffusion })
}
