//! Neglected terms of the coupled `(r, s₁)` system, evaluated on the
//! constructed effective solution and paired with space-time test functions.
//!
//! Derivatives of `r` and `s₁` are moved onto `φ` (and onto `φ·∂ₓβ/h_ε`) by
//! integration by parts, so only nodal values of `r`, `s₁` and the exact jets
//! `∂ₓ^kβ`, `k ≤ 3`, enter. With `w = ∂ₓβ(X/ε)/h_ε` and `∂_X h_ε = −∂ₓβ`:
//! `∂_X w = ∂ₓ²β/(εh_ε) + (∂ₓβ)²/h_ε²` and
//! `∂²_X w = ∂ₓ³β/(ε²h_ε) + 3∂ₓβ∂ₓ²β/(εh_ε²) + 2(∂ₓβ)³/h_ε³`.

use rayon::prelude::*;
use thiserror::Error;

use crate::bottom::{BottomError, ProcessSpec, ProcessStats};
use crate::charflow::{FlowError, TravelTime};
use crate::coeffs::{theorem57_constants, CoeffError, EffectiveCoefficients, PhysicalParams};
use crate::ensemble::mix_seed;
use crate::quad::composite_gauss;
use crate::scalesep::{covering_realization, OrderEstimate, TestFunction};
use crate::spectral::{GridFunction, SpectralGrid};
use crate::stats::{extrapolate_to_zero, mean_estimate, variance, Estimate};
use crate::waves::{solve_kdv, EffectiveSolution, KdvCoefficients, QField, WaveError, Window};

#[derive(Debug, Error)]
pub enum ConsistencyError {
    #[error(transparent)]
    Bottom(#[from] BottomError),
    #[error(transparent)]
    Coeff(#[from] CoeffError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Wave(#[from] WaveError),
    #[error("test function support [{lo}, {hi}] x [{t_lo}, {t_hi}] leaves the window")]
    Support { lo: f64, hi: f64, t_lo: f64, t_hi: f64 },
    #[error("need at least two realizations per eps, got {0}")]
    TooFew(usize),
    #[error("fixed point needs two test functions with independent moments")]
    Degenerate,
}

/// The neglected terms of the `r` and `s₁` equations and the linear
/// transport term of `r`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Ir,
    IIr,
    IIIr,
    IVr,
    Is,
    IIs,
    IIIs,
    IVs,
    LinearR,
}

impl Term {
    pub const ALL: [Term; 9] =
        [Term::Ir, Term::IIr, Term::IIIr, Term::IVr, Term::Is, Term::IIs, Term::IIIs, Term::IVs, Term::LinearR];

    pub fn name(self) -> &'static str {
        match self {
            Term::Ir => "I_r",
            Term::IIr => "II_r",
            Term::IIIr => "III_r",
            Term::IVr => "IV_r",
            Term::Is => "I_s",
            Term::IIs => "II_s",
            Term::IIIs => "III_s",
            Term::IVs => "IV_s",
            Term::LinearR => "linear_r",
        }
    }

    pub fn from_name(s: &str) -> Option<Term> {
        Term::ALL.into_iter().find(|t| t.name() == s)
    }

    fn index(self) -> usize {
        Term::ALL.iter().position(|&t| t == self).unwrap()
    }

    /// Claimed order of `|⟨φ, term⟩|` in `ε`.
    pub fn claimed_order(self) -> f64 {
        match self {
            Term::Ir | Term::IVr | Term::IIr | Term::IIIr => 2.0,
            Term::IIIs => 0.5,
            Term::Is | Term::IVs | Term::IIs | Term::LinearR => 0.0,
        }
    }
}

/// All term pairings `⟨φ, term⟩` of one solution with one test function,
/// plus `⟨φ, r⟩`, `⟨φ, ∂_X r⟩` and the transport part
/// `lead = ⟨∂_Xφ, √(gh)(1 − εβ/2h)r⟩` of the linear pairing.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Pairings {
    pub terms: [f64; 9],
    pub r: f64,
    pub r_x: f64,
    pub lead: f64,
}

impl Pairings {
    pub fn term(&self, t: Term) -> f64 {
        self.terms[t.index()]
    }

    fn scaled(mut self, s: f64) -> Self {
        for v in self.terms.iter_mut() {
            *v *= s;
        }
        self.r *= s;
        self.r_x *= s;
        self.lead *= s;
        self
    }

    fn add(&mut self, o: &Pairings) {
        for (a, b) in self.terms.iter_mut().zip(o.terms) {
            *a += b;
        }
        self.r += o.r;
        self.r_x += o.r_x;
        self.lead += o.lead;
    }

    /// `ε²`-order remainder of the `r` equation: the linear pairing minus
    /// its transport part, plus `II_r` and `III_r`.
    pub fn remainder(&self) -> f64 {
        self.term(Term::LinearR) - self.lead + self.term(Term::IIr) + self.term(Term::IIIr)
    }
}

fn check_support(sol: &EffectiveSolution, phi: &TestFunction) -> Result<(), ConsistencyError> {
    let l = &sol.lattice;
    let (lo, hi) = phi.space.support();
    let (t_lo, t_hi) = phi.time.support();
    if lo < l.x(0) || hi > l.x(l.inner) || t_lo < 0.0 || t_hi > l.t(l.steps) {
        return Err(ConsistencyError::Support { lo, hi, t_lo, t_hi });
    }
    Ok(())
}

/// One lattice pass pairing every term with `φ`.
pub fn pair_terms(sol: &EffectiveSolution, a_beta: f64, phi: &TestFunction) -> Result<Pairings, ConsistencyError> {
    check_support(sol, phi)?;
    let l = &sol.lattice;
    let p = &sol.params;
    let (eps, h, g) = (p.eps, p.h, p.g);
    let (c1, c2, c0) = (p.c1(), p.c2(), p.c0());
    let e12 = eps.sqrt();
    let e32 = eps * e12;
    let e2 = eps * eps;
    let e3 = e2 * eps;
    let [b0, b1, b2, b3] = &sol.beta;

    // Per-node bottom factors for i = 0..=inner.
    struct Node {
        x: [f64; 4],
        c: f64,
        lead: f64,
        w: [f64; 3],
    }
    let nodes: Vec<Node> = (0..=l.inner)
        .map(|i| {
            let x = l.x(i);
            let he = h - eps * b0[i] - e2 * a_beta;
            let w = b1[i] / he;
            let wx = b2[i] / (eps * he) + b1[i] * b1[i] / (he * he);
            let wxx = b3[i] / (e2 * he) + 3.0 * b1[i] * b2[i] / (eps * he * he) + 2.0 * b1[i].powi(3) / he.powi(3);
            Node {
                x: [phi.space.value(x), phi.space.d1(x), phi.space.d2(x), phi.space.d3(x)],
                c: (g * he).sqrt(),
                lead: c0 * (1.0 - eps * b0[i] / (2.0 * h)),
                w: [w, wx, wxx],
            }
        })
        .collect();

    let mut acc = Pairings::default();
    for n in 0..=l.steps {
        let time = phi.time.value(l.t(n));
        if time == 0.0 {
            continue;
        }
        let (rr, ss) = (&sol.r[n], &sol.s1[n]);
        let mut row = Pairings::default();
        for (i, nd) in nodes.iter().enumerate() {
            let [f0, f1, f2, f3] = nd.x;
            if f0 == 0.0 && f1 == 0.0 && f2 == 0.0 && f3 == 0.0 {
                continue;
            }
            let (r, s) = (rr[i], ss[i]);
            let [w, wx, wxx] = nd.w;
            let fw_xx = f2 * w + 2.0 * f1 * wx + f0 * wxx;
            let t = &mut row.terms;
            t[0] += e2 * (e32 * c1 * f3 * s + e32 * c2 * f1 * r * s + 0.5 * e3 * c2 * f1 * s * s);
            t[1] += -0.25 * f0 * w * e32 * nd.c * s;
            t[2] += -0.25 * e2 * c1 * fw_xx * (-r + e32 * s);
            t[3] += -0.25 * f0 * w * e2 * c2 * (-0.5 * r * r - e32 * r * s + 1.5 * e3 * s * s);
            t[4] += -e2 * (c1 * (-r / e32 + s) * f3 + c2 * (-0.5 * r * r / e32 - r * s + 1.5 * e32 * s * s) * f1);
            t[5] += 0.25 * f0 * w * nd.c * r / e32;
            t[6] += 0.25 * e12 * c1 * fw_xx * (r - e32 * s);
            t[7] += 0.25 * f0 * w * e12 * c2 * (1.5 * r * r - e32 * r * s - 0.5 * e3 * s * s);
            t[8] += f1 * nd.c * r;
            row.r += f0 * r;
            row.r_x -= f1 * r;
            row.lead += f1 * nd.lead * r;
        }
        acc.add(&row.scaled(time));
    }
    Ok(acc.scaled(l.dx * l.dt))
}

/// `⟨φ, term⟩` for one term (2-D trapezoid on the solution lattice).
pub fn evaluate_term(
    term: Term,
    sol: &EffectiveSolution,
    a_beta: f64,
    phi: &TestFunction,
) -> Result<f64, ConsistencyError> {
    Ok(pair_terms(sol, a_beta, phi)?.term(term))
}

/// Experiment layout shared by the term suite and the fixed point.
#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyConfig {
    pub h: f64,
    pub g: f64,
    pub eps_list: Vec<f64>,
    pub realizations: usize,
    pub master_seed: u64,
    /// Lattice stride in fine bottom nodes.
    pub stride: usize,
    pub window: Window,
    /// The first test function drives the term suite; all of them enter
    /// the fixed point.
    pub phis: Vec<TestFunction>,
    /// Initial datum `q₀(Y) = exp(−((Y − center)/width)²)` on a periodic
    /// `Y` domain.
    pub bump_center: f64,
    pub bump_width: f64,
    pub y_length: f64,
    pub y_nodes: usize,
}

impl Default for ConsistencyConfig {
    fn default() -> Self {
        Self {
            h: 1.0,
            g: 1.0,
            eps_list: vec![0.08, 0.04, 0.02, 0.01],
            realizations: 16,
            master_seed: 2024,
            stride: 2,
            window: Window { x_lo: 1.0, x_hi: 3.5, t_max: 1.25 },
            // The first is offset from the bump path so that ⟨φ, ∂_X r⟩ ≠ 0.
            phis: vec![TestFunction::new(2.5, 1.0, 0.75, 0.5), TestFunction::new(2.25, 1.0, 0.75, 0.5)],
            bump_center: 1.5,
            bump_width: 0.4,
            y_length: 8.0,
            y_nodes: 256,
        }
    }
}

impl ConsistencyConfig {
    pub fn params(&self, eps: f64) -> Result<PhysicalParams, CoeffError> {
        PhysicalParams::new(self.h, self.g, eps)
    }

    fn q0(&self) -> Result<GridFunction, ConsistencyError> {
        let grid = SpectralGrid::new(self.y_length, self.y_nodes).map_err(WaveError::from)?;
        let (c, w) = (self.bump_center, self.bump_width);
        Ok(GridFunction::from_fn(&grid, |y| (-((y - c) / w).powi(2)).exp()))
    }

    /// `q` on `[0, 1.1ε²t_max]`; the lattice rounds its last row up.
    pub fn q_field(&self, coeffs: &EffectiveCoefficients) -> Result<QField, ConsistencyError> {
        let eps = coeffs.params.eps;
        let tau_max = 1.1 * eps * eps * self.window.t_max;
        let outs: Vec<f64> = (0..=4).map(|k| tau_max * k as f64 / 4.0).collect();
        let hist = solve_kdv(&self.q0()?, KdvCoefficients::from_effective(coeffs), &outs, tau_max / 16.0)?;
        Ok(QField::new(&hist, 4)?)
    }
}

/// Pairings of every realization: `table[e][m][k]` for `ε` index `e`,
/// realization `m` and test function `k`.
#[derive(Clone, Debug)]
pub struct PairingTable {
    pub eps: Vec<f64>,
    pub coeffs: Vec<EffectiveCoefficients>,
    pub stats: ProcessStats,
    pub table: Vec<Vec<Vec<Pairings>>>,
}

/// Builds one realization's effective solution.
pub fn realize(
    spec: &ProcessSpec,
    cfg: &ConsistencyConfig,
    coeffs: &EffectiveCoefficients,
    q: &QField,
    seed: u64,
) -> Result<EffectiveSolution, ConsistencyError> {
    let p = coeffs.params;
    let reach = cfg.window.x_hi + p.c0() * cfg.window.t_max + 1.0;
    let real = covering_realization(spec, reach, p.eps, seed)?;
    let tt = TravelTime::new(&real, coeffs)?;
    let zero = |_: f64| 0.0;
    Ok(EffectiveSolution::build(&real, &tt, &p, q, &zero, cfg.window, cfg.stride)?)
}

/// Runs the ensemble once; both reports are read off the table.
pub fn pairing_table(spec: &ProcessSpec, cfg: &ConsistencyConfig) -> Result<PairingTable, ConsistencyError> {
    if cfg.realizations < 2 {
        return Err(ConsistencyError::TooFew(cfg.realizations));
    }
    let stats = spec.analytic_stats();
    let mut coeffs = Vec::new();
    let mut table = Vec::new();
    for (e, &eps) in cfg.eps_list.iter().enumerate() {
        let c = theorem57_constants(&stats, &cfg.params(eps)?)?;
        let q = cfg.q_field(&c)?;
        let rows: Vec<Result<Vec<Pairings>, ConsistencyError>> = (0..cfg.realizations)
            .into_par_iter()
            .map(|m| {
                let seed = mix_seed(mix_seed(cfg.master_seed, e as u64), m as u64);
                let sol = realize(spec, cfg, &c, &q, seed)?;
                cfg.phis.iter().map(|phi| pair_terms(&sol, c.a_beta.value, phi)).collect()
            })
            .collect();
        table.push(rows.into_iter().collect::<Result<Vec<_>, _>>()?);
        coeffs.push(c);
    }
    Ok(PairingTable { eps: cfg.eps_list.clone(), coeffs, stats, table })
}

/// Ensemble-mean comparison of a term with its limit formula, both divided
/// by `ε²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimitComparison {
    pub eps: f64,
    pub measured: Estimate,
    pub predicted: Estimate,
}

impl LimitComparison {
    pub fn relative_error(&self) -> f64 {
        (self.measured.value - self.predicted.value).abs() / self.predicted.value.abs()
    }

    /// Within `tol` relative, or within two combined SE when the ensemble
    /// is too small to resolve `tol`.
    pub fn agrees(&self, tol: f64) -> bool {
        let se = self.measured.se.hypot(self.predicted.se);
        (self.measured.value - self.predicted.value).abs() <= (tol * self.predicted.value.abs()).max(2.0 * se)
    }
}

/// Order regression and limit comparison for one term.
#[derive(Clone, Debug)]
pub struct TermReport {
    pub term: Term,
    /// Paired values `⟨φ, term⟩` per `ε` and realization.
    pub values: Vec<Vec<f64>>,
    pub claimed_order: f64,
    /// RMS of the paired values regressed on `ε`.
    pub order: OrderEstimate,
    pub limit: Vec<LimitComparison>,
}

impl TermReport {
    pub fn finest_limit(&self) -> Option<&LimitComparison> {
        self.limit.iter().min_by(|a, b| a.eps.total_cmp(&b.eps))
    }
}

fn limit_rows(
    tab: &PairingTable,
    measure: impl Fn(&Pairings) -> f64,
    predict: impl Fn(&Pairings) -> f64,
) -> Vec<LimitComparison> {
    tab.eps
        .iter()
        .zip(&tab.table)
        .map(|(&eps, rows)| {
            let measured: Vec<f64> = rows.iter().map(|r| measure(&r[0]) / (eps * eps)).collect();
            let predicted: Vec<f64> = rows.iter().map(|r| predict(&r[0])).collect();
            LimitComparison { eps, measured: mean_estimate(&measured), predicted: mean_estimate(&predicted) }
        })
        .collect()
}

/// Per-term order regressions on the first test function, with the `ε²`
/// limit coefficients of `II_r`, `III_r` and of the linear term (after its
/// transport part is removed) evaluated realization by realization.
pub fn term_reports(tab: &PairingTable, params: &PhysicalParams) -> Vec<TermReport> {
    let (h, g, c1, c0) = (params.h, params.g, params.c1(), params.c0());
    let a_beta = tab.coeffs[0].a_beta.value;
    let m2 = tab.stats.m2.value;
    let d2 = tab.stats.d2.value;
    let d3 = tab.stats.d3.value;
    Term::ALL
        .iter()
        .map(|&term| {
            let values: Vec<Vec<f64>> =
                tab.table.iter().map(|rows| rows.iter().map(|r| r[0].term(term)).collect()).collect();
            let order = OrderEstimate::from_samples(term.name(), &tab.eps, &values, term.claimed_order(), true);
            let limit = match term {
                Term::IIr => limit_rows(tab, |p| p.term(term), |p| (g / h).sqrt() / (8.0 * h) * m2 * p.r_x),
                Term::IIIr => limit_rows(
                    tab,
                    |p| p.term(term),
                    |p| 3.0 * c1 / (8.0 * h * h) * d2 * p.r_x - 7.0 * c1 / (64.0 * h.powi(3)) * d3 * p.r,
                ),
                Term::LinearR => limit_rows(
                    tab,
                    |p| p.term(term) - p.lead,
                    |p| c0 / (2.0 * h) * (a_beta + m2 / (4.0 * h)) * p.r_x,
                ),
                _ => Vec::new(),
            };
            TermReport { term, values, claimed_order: term.claimed_order(), order, limit }
        })
        .collect()
}

/// Runs the ensemble and reports every term.
pub fn term_order_suite(spec: &ProcessSpec, cfg: &ConsistencyConfig) -> Result<Vec<TermReport>, ConsistencyError> {
    let tab = pairing_table(spec, cfg)?;
    Ok(term_reports(&tab, &cfg.params(cfg.eps_list[0])?))
}

/// Re-extracted `(a_KdV, b)` at one `ε` next to the input constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPointRow {
    pub eps: f64,
    pub a_kdv: Estimate,
    pub b: Estimate,
}

/// Re-extracted constants per `ε` and their `ε → 0` limits. The remainder
/// carries `O(ε³)` pieces, so each constant is extrapolated linearly in `ε`.
#[derive(Clone, Debug)]
pub struct FixedPointReport {
    pub input_a_kdv: f64,
    pub input_b: f64,
    pub rows: Vec<FixedPointRow>,
    pub a_kdv: Estimate,
    pub b: Estimate,
}

impl FixedPointReport {
    /// Both limits within `k` SE of the inputs.
    pub fn closes(&self, k: f64) -> bool {
        close(self.a_kdv, self.input_a_kdv, k) && close(self.b, self.input_b, k)
    }
}

fn close(e: Estimate, target: f64, k: f64) -> bool {
    (e.value - target).abs() <= k * e.se || (e.value - target).abs() <= 1e-12 * target.abs().max(1e-12)
}

/// Solves `T(φ_k) = ε²(−c₀a⟨∂_Xφ_k, r⟩ + b⟨φ_k, r⟩)` for `(a, b)` from the
/// first two test functions, where `T` collects the `ε²` part of the linear
/// term and the `II_r`, `III_r` pairings.
pub fn fixed_point_report(tab: &PairingTable) -> Result<FixedPointReport, ConsistencyError> {
    let c = tab.coeffs[0];
    let mut rows = Vec::new();
    for ((&eps, rows_e), ce) in tab.eps.iter().zip(&tab.table).zip(&tab.coeffs) {
        let c0 = ce.params.c0();
        let s = 1.0 / (eps * eps);
        let mut a_s = Vec::new();
        let mut b_s = Vec::new();
        for r in rows_e {
            if r.len() < 2 {
                return Err(ConsistencyError::Degenerate);
            }
            // Entry k: (T/ε², ⟨∂φ, r⟩, ⟨φ, r⟩); ⟨∂φ, r⟩ = −⟨φ, ∂r⟩.
            let eqs: Vec<(f64, f64, f64)> = r[..2].iter().map(|p| (p.remainder() * s, -p.r_x, p.r)).collect();
            let (m11, m12, m21, m22) = (-c0 * eqs[0].1, eqs[0].2, -c0 * eqs[1].1, eqs[1].2);
            let det = m11 * m22 - m12 * m21;
            if det.abs() < 1e-14 {
                return Err(ConsistencyError::Degenerate);
            }
            a_s.push((eqs[0].0 * m22 - m12 * eqs[1].0) / det);
            b_s.push((m11 * eqs[1].0 - m21 * eqs[0].0) / det);
        }
        rows.push(FixedPointRow { eps, a_kdv: mean_estimate(&a_s), b: mean_estimate(&b_s) });
    }
    let a: Vec<Estimate> = rows.iter().map(|r| r.a_kdv).collect();
    let b: Vec<Estimate> = rows.iter().map(|r| r.b).collect();
    Ok(FixedPointReport {
        input_a_kdv: c.a_kdv.value,
        input_b: c.b.value,
        a_kdv: extrapolate_to_zero(&tab.eps, &a),
        b: extrapolate_to_zero(&tab.eps, &b),
        rows,
    })
}

/// Runs the ensemble and closes the fixed point.
pub fn fixed_point_check(spec: &ProcessSpec, cfg: &ConsistencyConfig) -> Result<FixedPointReport, ConsistencyError> {
    fixed_point_report(&pairing_table(spec, cfg)?)
}

/// White-noise variance of `⟨φ, II_s⟩`:
/// `(g/16h)σ_β²∫F′(X)² dX` with `F(X) = ∫φ(X, t)q₀(X − √(gh)t) dt`.
pub fn iis_variance_oracle(cfg: &ConsistencyConfig, sigma_beta_sq: f64, phi: &TestFunction) -> f64 {
    let (h, g) = (cfg.h, cfg.g);
    let c0 = (g * h).sqrt();
    let (c, w) = (cfg.bump_center, cfg.bump_width);
    let q = |y: f64| (-((y - c) / w).powi(2)).exp();
    let q_y = |y: f64| -2.0 * (y - c) / (w * w) * q(y);
    let (t_lo, t_hi) = phi.time.support();
    let (x_lo, x_hi) = phi.space.support();
    let f_prime = |x: f64| {
        composite_gauss(
            &|t: f64| phi.dx(x, t) * q(x - c0 * t) + phi.value(x, t) * q_y(x - c0 * t),
            t_lo,
            t_hi,
            64,
            8,
        )
    };
    g / (16.0 * h) * sigma_beta_sq * composite_gauss(&|x: f64| f_prime(x).powi(2), x_lo, x_hi, 64, 8)
}

/// `II_s` mean and variance at each `ε` next to the white-noise oracle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IisRow {
    pub eps: f64,
    pub mean: Estimate,
    pub variance: Estimate,
    pub oracle: f64,
}

pub fn iis_variance_rows(tab: &PairingTable, cfg: &ConsistencyConfig) -> Vec<IisRow> {
    let oracle = iis_variance_oracle(cfg, tab.stats.sigma_beta_sq.value, &cfg.phis[0]);
    tab.eps
        .iter()
        .zip(&tab.table)
        .map(|(&eps, rows)| {
            let v: Vec<f64> = rows.iter().map(|r| r[0].term(Term::IIs)).collect();
            let m = v.len() as f64;
            let var = variance(&v);
            IisRow {
                eps,
                mean: mean_estimate(&v),
                variance: Estimate { value: var, se: var * (2.0 / (m - 1.0)).sqrt() },
                oracle,
            }
        })
        .collect()
}
