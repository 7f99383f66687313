//! Effective wave models in the KdV scaling.
//!
//! The right-moving component is `r(X, t) = q(Y, ε²t)·∂_X Y` where `q` solves
//! `∂_τ q = −c₁∂³q − 3c₂q∂q + bq` on a periodic `Y` domain and `Y = Y(t, X)`
//! inverts the regularized characteristics. The scattered component `s₁` is
//! an integral of `∂ₓβ(θ/ε)·r` along left-going characteristics. A spectrally
//! filtered Boussinesq solver is included as a diagnostic.
//!
//! Fields used for pairings live on a [`FanLattice`]: abscissae on the fine
//! bottom nodes and time steps `Δ/√(gh)`, so every left-going characteristic
//! through a lattice point passes through lattice points only.

use rustfft::num_complex::Complex64;

use crate::bottom::BottomRealization;
use crate::charflow::{CharFlow, FlowError, TravelTime};
use crate::coeffs::{CoefficientFields, EffectiveCoefficients, PhysicalParams};
use crate::interp::{cubic_hermite, Jet, MonotoneCubic, PeriodicHermite5};
use crate::spectral::{GridFunction, SpectralError, SpectralGrid};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum WaveError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("dτ·3|c₂|·max|q|·k_max = {0:.3} exceeds the RK4 bound 2.5")]
    Cfl(f64),
    #[error("max|q| grew from {initial:e} to {current:e} by τ = {tau}")]
    BlowUp { initial: f64, current: f64, tau: f64 },
    #[error("τ = {tau} outside the stored range [{lo}, {hi}]")]
    OutOfRange { tau: f64, lo: f64, hi: f64 },
    #[error("output times must be sorted, finite and non-negative")]
    BadTimes,
    #[error("quadrature spacing {spacing:e} exceeds εℓ/4 = {limit:e}")]
    Underresolved { spacing: f64, limit: f64 },
    #[error("cutoff k_c = {k_c} not below the well-posed limit {limit}")]
    Cutoff { k_c: f64, limit: f64 },
    #[error("flat-bottom energy drift {0:e} exceeds 1%")]
    EnergyGrowth(f64),
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
}

/// Coefficients of `∂_τ q = −c₁∂³q − 3c₂q∂q + bq`; `c₂ = 0` gives the
/// linear equation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KdvCoefficients {
    pub c1: f64,
    pub c2: f64,
    pub b: f64,
}

impl KdvCoefficients {
    pub fn from_effective(c: &EffectiveCoefficients) -> Self {
        Self { c1: c.c1, c2: c.c2, b: c.b.value }
    }
}

/// Fourier-side operators of the KdV equation on one grid.
struct KdvOperator {
    grid: SpectralGrid,
    coeffs: KdvCoefficients,
    /// `b + ic₁k³` (dispersion dropped at the Nyquist mode to keep data real).
    linear: Vec<Complex64>,
    /// `−(3c₂/2)ik` on the retained two-thirds band, zero elsewhere.
    flux: Vec<Complex64>,
    keep: Vec<bool>,
    k_max: f64,
}

impl KdvOperator {
    fn new(grid: &SpectralGrid, coeffs: KdvCoefficients) -> Self {
        let n = grid.n();
        let cut = n as f64 / 3.0;
        let nyq = grid.nyquist_index();
        let mut linear = Vec::with_capacity(n);
        let mut flux = Vec::with_capacity(n);
        let mut keep = Vec::with_capacity(n);
        let mut k_max: f64 = 0.0;
        for (j, (&m, &k)) in grid.modes().iter().zip(grid.wavenumbers()).enumerate() {
            let disp = if j == nyq { 0.0 } else { coeffs.c1 * k * k * k };
            linear.push(Complex64::new(coeffs.b, disp));
            let kept = (m.abs() as f64) <= cut;
            keep.push(kept);
            if kept {
                k_max = k_max.max(k.abs());
                flux.push(Complex64::new(0.0, -1.5 * coeffs.c2 * k));
            } else {
                flux.push(Complex64::new(0.0, 0.0));
            }
        }
        Self { grid: grid.clone(), coeffs, linear, flux, keep, k_max }
    }

    /// Dealiased `−3c₂q∂q = −(3c₂/2)∂(q²)` in Fourier space.
    fn nonlinear(&self, qh: &[Complex64]) -> Vec<Complex64> {
        let n = qh.len();
        if self.coeffs.c2 == 0.0 {
            return vec![Complex64::new(0.0, 0.0); n];
        }
        let trunc: Vec<Complex64> =
            qh.iter().zip(&self.keep).map(|(&c, &k)| if k { c } else { Complex64::new(0.0, 0.0) }).collect();
        let q = self.grid.inverse_complex(trunc);
        let sq: Vec<f64> = q.iter().map(|c| c.re * c.re).collect();
        let mut out = self.grid.forward(&sq);
        for (o, f) in out.iter_mut().zip(&self.flux) {
            *o *= f;
        }
        out
    }

    fn rhs(&self, qh: &[Complex64]) -> Vec<Complex64> {
        let mut out = self.nonlinear(qh);
        for ((o, &q), &l) in out.iter_mut().zip(qh).zip(&self.linear) {
            *o += l * q;
        }
        out
    }

    /// One integrating-factor (Lawson) RK4 step of size `h`.
    fn step(&self, qh: &[Complex64], h: f64) -> Vec<Complex64> {
        let e: Vec<Complex64> = self.linear.iter().map(|l| (l * h).exp()).collect();
        let e2: Vec<Complex64> = self.linear.iter().map(|l| (l * (0.5 * h)).exp()).collect();
        let n = qh.len();
        let a = self.nonlinear(qh);
        let stage: Vec<Complex64> = (0..n).map(|j| e2[j] * (qh[j] + 0.5 * h * a[j])).collect();
        let b = self.nonlinear(&stage);
        let stage: Vec<Complex64> = (0..n).map(|j| e2[j] * qh[j] + 0.5 * h * b[j]).collect();
        let c = self.nonlinear(&stage);
        let stage: Vec<Complex64> = (0..n).map(|j| e[j] * qh[j] + h * e2[j] * c[j]).collect();
        let d = self.nonlinear(&stage);
        (0..n)
            .map(|j| e[j] * qh[j] + h / 6.0 * (e[j] * a[j] + 2.0 * e2[j] * (b[j] + c[j]) + d[j]))
            .collect()
    }

    fn values(&self, qh: &[Complex64]) -> Result<Vec<f64>, SpectralError> {
        self.grid.inverse_real(qh.to_vec())
    }
}

/// `q(·, τ)` on the coarse `Y` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct KdvState {
    pub tau: f64,
    pub values: Vec<f64>,
}

/// States of one KdV solve at the requested output times.
#[derive(Clone, Debug)]
pub struct KdvHistory {
    pub grid: SpectralGrid,
    pub coeffs: KdvCoefficients,
    pub states: Vec<KdvState>,
}

impl KdvHistory {
    /// `∫q dY`, exactly `e^{bτ}∫q₀` for the continuous problem.
    pub fn mass(&self, k: usize) -> f64 {
        self.states[k].values.iter().sum::<f64>() * self.grid.spacing()
    }

    /// `∫q² dY`, exactly `e^{2bτ}∫q₀²` for the continuous problem.
    pub fn energy(&self, k: usize) -> f64 {
        self.states[k].values.iter().map(|v| v * v).sum::<f64>() * self.grid.spacing()
    }

    /// `Q` with `∂_Y Q = q − mean(q)` and zero mean.
    pub fn potential(&self, k: usize) -> Result<Vec<f64>, SpectralError> {
        let nyq = self.grid.nyquist_index();
        self.grid.filter(&self.states[k].values, |j, k| {
            if j == 0 || j == nyq {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, -1.0 / k)
            }
        })
    }

    pub fn last(&self) -> &KdvState {
        self.states.last().expect("history is never empty")
    }
}

/// Integrates the KdV equation from `q0`, storing the state at every time
/// in `outputs` (sorted, non-negative; `0` stores the initial data). Steps
/// are `dtau` except for the shortened step that lands on each output.
pub fn solve_kdv(
    q0: &GridFunction,
    coeffs: KdvCoefficients,
    outputs: &[f64],
    dtau: f64,
) -> Result<KdvHistory, WaveError> {
    if outputs.is_empty()
        || outputs.iter().any(|t| !(t.is_finite() && *t >= 0.0))
        || outputs.windows(2).any(|w| w[1] < w[0])
        || !(dtau > 0.0)
    {
        return Err(WaveError::BadTimes);
    }
    if q0.values.iter().any(|v| !v.is_finite()) {
        return Err(WaveError::NonFinite("q0"));
    }
    let op = KdvOperator::new(&q0.grid, coeffs);
    let initial = q0.max_norm();
    let cfl = |amp: f64| dtau * 3.0 * coeffs.c2.abs() * amp * op.k_max;
    if cfl(initial) > 2.5 {
        return Err(WaveError::Cfl(cfl(initial)));
    }
    let mut qh = q0.grid.forward(&q0.values);
    let mut tau = 0.0;
    let mut states = Vec::with_capacity(outputs.len());
    let mut count = 0usize;
    for &target in outputs {
        while tau < target {
            let h = dtau.min(target - tau);
            qh = op.step(&qh, h);
            tau = if target - tau <= dtau { target } else { tau + dtau };
            count += 1;
            if count % 16 == 0 {
                check_growth(&op, &qh, initial, tau, &cfl)?;
            }
        }
        let values = op.values(&qh)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(WaveError::NonFinite("q"));
        }
        states.push(KdvState { tau, values });
    }
    check_growth(&op, &qh, initial, tau, &cfl)?;
    Ok(KdvHistory { grid: q0.grid.clone(), coeffs, states })
}

fn check_growth(
    op: &KdvOperator,
    qh: &[Complex64],
    initial: f64,
    tau: f64,
    cfl: &dyn Fn(f64) -> f64,
) -> Result<(), WaveError> {
    let v = op.values(qh)?;
    let current = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if !current.is_finite() {
        return Err(WaveError::NonFinite("q"));
    }
    if op.coeffs.b <= 0.0 && current > 10.0 * initial {
        return Err(WaveError::BlowUp { initial, current, tau });
    }
    if cfl(current) > 2.5 {
        return Err(WaveError::Cfl(cfl(current)));
    }
    Ok(())
}

/// Continuous `q(Y, τ)` built from a [`KdvHistory`]: quintic Hermite in `Y`
/// on a spectrally refined grid, cubic Hermite in `τ` using `∂_τ q` from the
/// equation. At a stored `τ` the stored state is returned unchanged.
#[derive(Clone, Debug)]
pub struct QField {
    pub period: f64,
    taus: Vec<f64>,
    q: Vec<PeriodicHermite5>,
    q_tau: Vec<PeriodicHermite5>,
}

impl QField {
    /// `refine` is the factor by which the `Y` grid is refined by zero padding.
    pub fn new(history: &KdvHistory, refine: usize) -> Result<Self, WaveError> {
        let grid = &history.grid;
        let op = KdvOperator::new(grid, history.coeffs);
        let n = grid.n();
        let fine = SpectralGrid::new(grid.length(), refine.max(1) * n)?;
        let mut taus = Vec::new();
        let mut q = Vec::new();
        let mut q_tau = Vec::new();
        for s in &history.states {
            if taus.last().map_or(false, |&t| s.tau <= t) {
                continue;
            }
            let qh = grid.forward(&s.values);
            let th = op.rhs(&qh);
            q.push(refined(grid, &fine, &qh)?);
            q_tau.push(refined(grid, &fine, &th)?);
            taus.push(s.tau);
        }
        Ok(Self { period: grid.length(), taus, q, q_tau })
    }

    pub fn tau_range(&self) -> (f64, f64) {
        (self.taus[0], *self.taus.last().unwrap())
    }

    pub fn check(&self, tau: f64) -> Result<(), WaveError> {
        let (lo, hi) = self.tau_range();
        let slack = 1e-12 * hi.abs().max(1.0);
        if tau < lo - slack || tau > hi + slack {
            return Err(WaveError::OutOfRange { tau, lo, hi });
        }
        Ok(())
    }

    /// `(q, ∂_Y q, ∂²_Y q)` at `(Y, τ)`; `τ` is clamped to the stored range.
    pub fn jet(&self, y: f64, tau: f64) -> Jet {
        let last = self.taus.len() - 1;
        let k = match self.taus.binary_search_by(|t| t.partial_cmp(&tau).unwrap()) {
            Ok(k) => return self.q[k].jet(y),
            Err(0) => return self.q[0].jet(y),
            Err(k) if k > last => return self.q[last].jet(y),
            Err(k) => k - 1,
        };
        let (t0, t1) = (self.taus[k], self.taus[k + 1]);
        let (a, b) = (self.q[k].jet(y), self.q[k + 1].jet(y));
        let (da, db) = (self.q_tau[k].jet(y), self.q_tau[k + 1].jet(y));
        Jet {
            value: cubic_hermite(t0, t1, a.value, b.value, da.value, db.value, tau).0,
            first: cubic_hermite(t0, t1, a.first, b.first, da.first, db.first, tau).0,
            second: cubic_hermite(t0, t1, a.second, b.second, da.second, db.second, tau).0,
        }
    }

    #[inline]
    pub fn value(&self, y: f64, tau: f64) -> f64 {
        self.jet(y, tau).value
    }
}

/// Quintic Hermite of the trigonometric interpolant of `coeffs`, sampled on
/// `fine` (the Nyquist mode is dropped).
fn refined(coarse: &SpectralGrid, fine: &SpectralGrid, coeffs: &[Complex64]) -> Result<PeriodicHermite5, WaveError> {
    let n = coarse.n();
    let big = fine.n();
    let scale = (big / n) as f64;
    let nyq = coarse.nyquist_index();
    // Real part projects out the round-off asymmetry that k³ factors amplify.
    let derive = |order: u32| -> Vec<f64> {
        let mut out = vec![Complex64::new(0.0, 0.0); big];
        for (j, (&m, &k)) in coarse.modes().iter().zip(coarse.wavenumbers()).enumerate() {
            if j == nyq {
                continue;
            }
            out[m.rem_euclid(big as i64) as usize] = coeffs[j] * Complex64::new(0.0, k).powu(order) * scale;
        }
        fine.inverse_complex(out).into_iter().map(|c| c.re).collect()
    };
    Ok(PeriodicHermite5::new(fine.length(), derive(0), derive(1), derive(2)))
}

/// `r(X, t) = q(Y, ε²t)·∂_X Y` with `Y = Y(t, X)` from the travel-time flow
/// and `∂_X Y = c_ε(Y)/c_ε(X)`.
pub fn reconstruct_r(q: &QField, tt: &TravelTime, xs: &[f64], t: f64) -> Result<Vec<f64>, WaveError> {
    q.check(tt.eps * tt.eps * t)?;
    Ok(reconstruct_r_with(&|y, tau| q.value(y, tau), tt, xs, t))
}

/// [`reconstruct_r`] for any `q(Y, τ)`, e.g. an exact soliton.
pub fn reconstruct_r_with(q: &dyn Fn(f64, f64) -> f64, tt: &TravelTime, xs: &[f64], t: f64) -> Vec<f64> {
    let tau = tt.eps * tt.eps * t;
    xs.iter()
        .map(|&x| {
            let y = tt.backward(x, t);
            q(y, tau) * tt.slowness(x) / tt.slowness(y)
        })
        .collect()
}

/// [`reconstruct_r`] from stored RK4 trajectories: `Y` and `∂_X Y` come
/// from the monotone cubic inverse graph with exact slopes `1/(∂X/∂Y)`.
pub fn reconstruct_r_flow(q: &QField, flow: &CharFlow, eps: f64, xs: &[f64], t: f64) -> Result<Vec<f64>, WaveError> {
    let tau = eps * eps * t;
    q.check(tau)?;
    let k = flow
        .times
        .iter()
        .position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
        .ok_or(FlowError::MissingTime(t))?;
    let slopes: Vec<f64> = flow.jacobian[k].iter().map(|j| 1.0 / j).collect();
    let inverse = MonotoneCubic::new(flow.x[k].clone(), flow.y.clone(), Some(slopes))
        .ok_or(FlowError::Crossing { time: t, index: 0, next: 1 })?;
    let (lo, hi) = inverse.x_range();
    xs.iter()
        .map(|&x| {
            let (y, dy) = inverse.eval(x).ok_or(FlowError::OutOfRange { x, lo, hi })?;
            Ok(q.value(y, tau) * dy)
        })
        .collect()
}

/// `ε^{−3/2}/(4h)`, the weight of the fan integral in `s₁`.
fn scatter_prefactor(params: &PhysicalParams) -> f64 {
    params.eps.powf(-1.5) / (4.0 * params.h)
}

/// `s₁(X, t) = s₁⁰(X + √(gh)t) + (ε^{−3/2}/4h)∫_X^{X+√(gh)t} ∂ₓβ(θ/ε)
/// r(θ, t + (X − θ)/√(gh)) dθ` by the trapezoid rule with spacing at most
/// `εℓ/8`, `r` reconstructed on demand.
pub fn scattered_s1(
    q: &QField,
    tt: &TravelTime,
    real: &BottomRealization,
    params: &PhysicalParams,
    s1_0: &dyn Fn(f64) -> f64,
    xs: &[f64],
    t: f64,
) -> Result<Vec<f64>, WaveError> {
    let (eps, c0) = (params.eps, params.c0());
    q.check(eps * eps * t)?;
    let reach = c0 * t;
    let target = eps * real.grid.spacing();
    let panels = (reach / target).ceil().max(1.0) as usize;
    let d = reach / panels as f64;
    Ok(xs
        .iter()
        .map(|&x| {
            let mut acc = 0.0;
            for m in 0..=panels {
                let theta = x + m as f64 * d;
                let s = (t - m as f64 * d / c0).max(0.0);
                let y = tt.backward(theta, s);
                let r = q.value(y, eps * eps * s) * tt.slowness(theta) / tt.slowness(y);
                let w = if m == 0 || m == panels { 0.5 } else { 1.0 };
                acc += w * real.eval_with_derivative(theta / eps).1 * r;
            }
            s1_0(x + reach) + scatter_prefactor(params) * (acc * d)
        })
        .collect())
}

/// Limit form of `r` with the realization-coupled path `B̂ = Y_ε`:
/// `q(X − √(gh)t, ε²t) + (ε^{3/2}σ_β/2h)∂_X[q·(Y_ε(X) − Y_ε(X − √(gh)t))]`.
/// The derivative is taken analytically; `σ_β` cancels against the
/// normalization of `Y_ε`. A zero `σ_β` returns the transport term only.
pub fn asymptotic_r(
    q: &QField,
    real: &BottomRealization,
    params: &PhysicalParams,
    sigma_beta: f64,
    xs: &[f64],
    t: f64,
) -> Vec<f64> {
    let (eps, c0, h) = (params.eps, params.c0(), params.h);
    let tau = eps * eps * t;
    xs.iter()
        .map(|&x| {
            let foot = x - c0 * t;
            let j = q.jet(foot, tau);
            if sigma_beta == 0.0 {
                return j.value;
            }
            let jump = real.eval(x / eps) - real.eval(foot / eps);
            let area = real.integral(foot / eps, x / eps);
            j.value * (1.0 + eps / (2.0 * h) * jump) + eps * eps / (2.0 * h) * j.first * area
        })
        .collect()
}

/// Unnormalized path `U(X) = σ_β Y_ε(X) = √ε∫₀^{X/ε}β` and its slope.
fn path(real: &BottomRealization, eps: f64, x: f64) -> (f64, f64) {
    let s = eps.sqrt();
    (s * real.integral(0.0, x / eps), real.eval(x / eps) / s)
}

/// Limit form of `s₁` with `σ_βB̂ = U`, `ξ = X + √(gh)t`, `τ' = ε²(ξ − θ)/√(gh)`:
/// `s₁⁰(ξ) + (1/4h)[U'(ξ)q(ξ,0) − U'(X)q(X−√(gh)t,ε²t)]
/// − (1/2h)[U(ξ)∂q(ξ,0) − U(X)∂q(X−√(gh)t,ε²t)] + (1/h)∫_X^ξ U(θ)∂²q(2θ−ξ, τ') dθ`.
pub fn asymptotic_s1(
    q: &QField,
    real: &BottomRealization,
    params: &PhysicalParams,
    s1_0: &dyn Fn(f64) -> f64,
    xs: &[f64],
    t: f64,
) -> Vec<f64> {
    let (eps, c0, h) = (params.eps, params.c0(), params.h);
    let reach = c0 * t;
    let target = eps * real.grid.spacing();
    let panels = (reach / target).ceil().max(1.0) as usize;
    let d = reach / panels as f64;
    xs.iter()
        .map(|&x| {
            let xi = x + reach;
            let foot = x - reach;
            let (u_x, du_x) = path(real, eps, x);
            let (u_xi, du_xi) = path(real, eps, xi);
            let start = q.jet(xi, 0.0);
            let end = q.jet(foot, eps * eps * t);
            let mut acc = 0.0;
            if panels > 0 && reach > 0.0 {
                for m in 0..=panels {
                    let theta = x + m as f64 * d;
                    let w = if m == 0 || m == panels { 0.5 } else { 1.0 };
                    let tau = eps * eps * (xi - theta) / c0;
                    acc += w * path(real, eps, theta).0 * q.jet(2.0 * theta - xi, tau).second;
                }
            }
            s1_0(xi) + (du_xi * start.value - du_x * end.value) / (4.0 * h)
                - (u_xi * start.first - u_x * end.first) / (2.0 * h)
                + acc * d / h
        })
        .collect()
}

/// `(X, t)` window a lattice must cover.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window {
    pub x_lo: f64,
    pub x_hi: f64,
    pub t_max: f64,
}

/// Characteristic-aligned lattice `X_i = εx_{j₀ + i·stride}`,
/// `t_n = nΔ/√(gh)` with `Δ = ε·stride·δx`. Row `n` holds
/// `i = 0..=top − n`, so the left-going diagonal `(i + m, n − m)` of every
/// stored point stays inside the lattice down to `t = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct FanLattice {
    pub eps: f64,
    pub c0: f64,
    pub node0: i64,
    pub stride: usize,
    pub fine_nodes: usize,
    pub dx: f64,
    pub dt: f64,
    /// Last index of row 0.
    pub top: usize,
    /// Number of time steps `N`; rows are `0..=N`.
    pub steps: usize,
    /// Last index whose abscissa lies in the window (present in every row).
    pub inner: usize,
}

impl FanLattice {
    pub fn new(real: &BottomRealization, params: &PhysicalParams, window: Window, stride: usize) -> Result<Self, WaveError> {
        let eps = params.eps;
        let fine = eps * real.grid.spacing();
        let dx = fine * stride.max(1) as f64;
        let limit = eps * real.spec.correlation_length() / 4.0;
        if !real.spec.is_flat() && dx > limit * (1.0 + 1e-12) {
            return Err(WaveError::Underresolved { spacing: dx, limit });
        }
        let c0 = params.c0();
        let node0 = (window.x_lo / fine).floor() as i64;
        let x0 = node0 as f64 * fine;
        let inner = ((window.x_hi - x0) / dx).ceil().max(0.0) as usize;
        let steps = (window.t_max * c0 / dx).ceil() as usize;
        Ok(Self {
            eps,
            c0,
            node0,
            stride: stride.max(1),
            fine_nodes: real.grid.n(),
            dx,
            dt: dx / c0,
            top: inner + steps,
            steps,
            inner,
        })
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        (self.node0 + (i * self.stride) as i64) as f64 * (self.dx / self.stride as f64)
    }

    #[inline]
    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    #[inline]
    pub fn row_len(&self, n: usize) -> usize {
        self.top - n + 1
    }

    /// Fine-grid node index of `X_i − √(gh)t_n` (may be negative before wrapping).
    #[inline]
    pub fn foot_node(&self, i: usize, n: usize) -> usize {
        (self.node0 + i as i64 * self.stride as i64 - n as i64 * self.stride as i64).rem_euclid(self.fine_nodes as i64)
            as usize
    }

    #[inline]
    pub fn node(&self, i: usize) -> usize {
        self.foot_node(i, 0)
    }

    pub fn field(&self, f: impl Fn(usize, usize) -> f64) -> Vec<Vec<f64>> {
        (0..=self.steps).map(|n| (0..self.row_len(n)).map(|i| f(i, n)).collect()).collect()
    }

    /// `F(i, n) = ∫_{X_i}^{X_i+√(gh)t_n} f(θ, t_n + (X_i − θ)/√(gh)) dθ`,
    /// trapezoid rule along the diagonal.
    pub fn fan_integral(&self, f: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(self.steps + 1);
        out.push(vec![0.0; self.row_len(0)]);
        for n in 1..=self.steps {
            let prev = &out[n - 1];
            let row: Vec<f64> =
                (0..self.row_len(n)).map(|i| prev[i + 1] + 0.5 * self.dx * (f[n][i] + f[n - 1][i + 1])).collect();
            out.push(row);
        }
        out
    }

    /// `Σ φ(X_i, t_n)·f(i, n)·Δ·δt`; `φ` must vanish on the lattice edges.
    pub fn pair(&self, f: &[Vec<f64>], phi: &dyn Fn(f64, f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for (n, row) in f.iter().enumerate() {
            let t = self.t(n);
            for (i, v) in row.iter().enumerate().take(self.inner + 1) {
                let w = phi(self.x(i), t);
                if w != 0.0 {
                    acc += w * v;
                }
            }
        }
        acc * self.dx * self.dt
    }
}

/// `r` and `s₁` of one realization on a [`FanLattice`], with the nodal
/// bottom jets `∂ₓ^kβ(X_i/ε)`, `k = 0..3`.
#[derive(Clone, Debug)]
pub struct EffectiveSolution {
    pub lattice: FanLattice,
    pub params: PhysicalParams,
    pub r: Vec<Vec<f64>>,
    pub s1: Vec<Vec<f64>>,
    pub beta: [Vec<f64>; 4],
}

impl EffectiveSolution {
    /// Reconstructs `r` at every lattice point and marches `s₁` along the
    /// left-going diagonals; the `ε^{−3/2}` prefactor is applied last.
    pub fn build(
        real: &BottomRealization,
        tt: &TravelTime,
        params: &PhysicalParams,
        q: &QField,
        s1_0: &dyn Fn(f64) -> f64,
        window: Window,
        stride: usize,
    ) -> Result<Self, WaveError> {
        let lattice = FanLattice::new(real, params, window, stride)?;
        let eps = params.eps;
        q.check(eps * eps * lattice.t(lattice.steps))?;
        let jets = [real.values(), real.derivative(), real.second_derivative(), real.third_derivative()];
        let beta: [Vec<f64>; 4] =
            std::array::from_fn(|k| (0..=lattice.top).map(|i| jets[k][lattice.node(i)]).collect());
        let r = lattice.field(|i, n| {
            let (x, t) = (lattice.x(i), lattice.t(n));
            if n == 0 {
                return q.value(x, 0.0);
            }
            let y = tt.backward(x, t);
            q.value(y, eps * eps * t) * tt.slowness(x) / tt.slowness(y)
        });
        let forcing: Vec<Vec<f64>> =
            r.iter().map(|row| row.iter().enumerate().map(|(i, v)| beta[1][i] * v).collect()).collect();
        let fan = lattice.fan_integral(&forcing);
        let k = scatter_prefactor(params);
        let s1 = lattice.field(|i, n| s1_0(lattice.x(i + n)) + k * fan[n][i]);
        if r.iter().chain(&s1).flatten().any(|v| !v.is_finite()) {
            return Err(WaveError::NonFinite("effective solution"));
        }
        Ok(Self { lattice, params: *params, r, s1, beta })
    }

    /// [`asymptotic_r`] at the lattice points (same realization and `q`).
    pub fn asymptotic_r(&self, q: &QField, real: &BottomRealization, sigma_beta: f64) -> Vec<Vec<f64>> {
        let l = &self.lattice;
        let (eps, h) = (self.params.eps, self.params.h);
        let vals = real.values();
        l.field(|i, n| {
            let (x, t) = (l.x(i), l.t(n));
            let foot = x - l.c0 * t;
            let j = q.jet(foot, eps * eps * t);
            if sigma_beta == 0.0 {
                return j.value;
            }
            let jump = self.beta[0][i] - vals[l.foot_node(i, n)];
            let area = real.integral(foot / eps, x / eps);
            j.value * (1.0 + eps / (2.0 * h) * jump) + eps * eps / (2.0 * h) * j.first * area
        })
    }

    /// [`asymptotic_s1`] at the lattice points; the interior integral uses
    /// the same diagonal trapezoid as `s₁`.
    pub fn asymptotic_s1(&self, q: &QField, real: &BottomRealization, s1_0: &dyn Fn(f64) -> f64) -> Vec<Vec<f64>> {
        let l = &self.lattice;
        let (eps, h) = (self.params.eps, self.params.h);
        let paths: Vec<(f64, f64)> = (0..=l.top).map(|i| path(real, eps, l.x(i))).collect();
        let interior = l.fan_integral(&l.field(|i, n| {
            let t = l.t(n);
            paths[i].0 * q.jet(l.x(i) - l.c0 * t, eps * eps * t).second
        }));
        l.field(|i, n| {
            let t = l.t(n);
            let (x, xi) = (l.x(i), l.x(i + n));
            let start = q.jet(xi, 0.0);
            let end = q.jet(x - l.c0 * t, eps * eps * t);
            let (u_x, du_x) = paths[i];
            let (u_xi, du_xi) = paths[i + n];
            s1_0(xi) + (du_xi * start.value - du_x * end.value) / (4.0 * h)
                - (u_xi * start.first - u_x * end.first) / (2.0 * h)
                + interior[n][i] / h
        })
    }
}

/// Solver settings for [`solve_boussinesq_filtered`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoussinesqConfig {
    pub t_end: f64,
    pub dt: f64,
    /// Hard spectral cutoff: modes with `|k| > k_c` are zeroed every stage.
    pub k_c: f64,
    pub nonlinear: bool,
    /// Store every `save_every`-th step (the final state is always stored).
    pub save_every: usize,
}

/// `(η, u)` at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct BoussinesqState {
    pub t: f64,
    pub eta: Vec<f64>,
    pub u: Vec<f64>,
}

/// Stored states with the Hamiltonian
/// `H = ½∫ gη² + (h₀ + ε²η)u² − (ε²h³/3)(∂u)²` at each stored time.
#[derive(Clone, Debug)]
pub struct BoussinesqHistory {
    pub grid: SpectralGrid,
    pub h0: Vec<f64>,
    pub k_c: f64,
    pub states: Vec<BoussinesqState>,
    pub energy: Vec<f64>,
}

struct Boussinesq<'a> {
    grid: &'a SpectralGrid,
    h0: &'a [f64],
    keep: Vec<bool>,
    g: f64,
    e2: f64,
    disp: f64,
    nonlinear: bool,
}

impl Boussinesq<'_> {
    fn project(&self, v: &[f64]) -> Result<Vec<f64>, SpectralError> {
        let mut c = self.grid.forward(v);
        for (cj, &k) in c.iter_mut().zip(&self.keep) {
            if !k {
                *cj = Complex64::new(0.0, 0.0);
            }
        }
        self.grid.inverse_real(c)
    }

    fn rhs(&self, eta: &[f64], u: &[f64]) -> Result<(Vec<f64>, Vec<f64>), SpectralError> {
        let ks = self.grid.wavenumbers();
        let flux: Vec<f64> = (0..eta.len())
            .map(|j| (self.h0[j] + if self.nonlinear { self.e2 * eta[j] } else { 0.0 }) * u[j])
            .collect();
        let (fh, uh, eh) = (self.grid.forward(&flux), self.grid.forward(u), self.grid.forward(eta));
        let wh = if self.nonlinear {
            self.grid.forward(&u.iter().map(|v| 0.5 * v * v).collect::<Vec<_>>())
        } else {
            vec![Complex64::new(0.0, 0.0); u.len()]
        };
        let mut de = vec![Complex64::new(0.0, 0.0); u.len()];
        let mut du = vec![Complex64::new(0.0, 0.0); u.len()];
        for j in 0..u.len() {
            if !self.keep[j] {
                continue;
            }
            let ik = Complex64::new(0.0, ks[j]);
            de[j] = -ik * fh[j] + Complex64::new(0.0, self.disp * ks[j].powi(3)) * uh[j];
            du[j] = -ik * (self.g * eh[j] + self.e2 * wh[j]);
        }
        Ok((self.grid.inverse_real(de)?, self.grid.inverse_real(du)?))
    }

    fn energy(&self, eta: &[f64], u: &[f64]) -> Result<f64, SpectralError> {
        let ux = self.grid.derivative_values(u, 1)?;
        let dx = self.grid.spacing();
        Ok(0.5
            * dx
            * (0..u.len())
                .map(|j| {
                    let depth = self.h0[j] + if self.nonlinear { self.e2 * eta[j] } else { 0.0 };
                    self.g * eta[j] * eta[j] + depth * u[j] * u[j] - self.disp * ux[j] * ux[j]
                })
                .sum::<f64>())
    }
}

/// RK4 for `∂_tη = −∂[(h₀ + ε²η)u] − ε²(h³/3)∂³u`, `∂_tu = −g∂η − ε²u∂u`
/// with a hard cutoff at `k_c`. `h₀` is `fields.h0` (regularized bottom).
/// `k_c` must be below half the limit `√(3 min h₀/(ε²h³))` where
/// `ω² = gk²(h₀ − ε²h³k²/3)` turns negative.
pub fn solve_boussinesq_filtered(
    eta0: &GridFunction,
    u0: &GridFunction,
    fields: &CoefficientFields,
    params: &PhysicalParams,
    cfg: &BoussinesqConfig,
) -> Result<BoussinesqHistory, WaveError> {
    let grid = &fields.grid;
    if eta0.grid != *grid || u0.grid != *grid {
        return Err(SpectralError::GridMismatch.into());
    }
    if !(cfg.dt > 0.0 && cfg.t_end >= 0.0) {
        return Err(WaveError::BadTimes);
    }
    let (eps, h) = (params.eps, params.h);
    let h_min = fields.h0.iter().cloned().fold(f64::INFINITY, f64::min);
    let limit = 0.5 * (3.0 * h_min / (eps * eps * h.powi(3))).sqrt();
    if !(cfg.k_c < limit) {
        return Err(WaveError::Cutoff { k_c: cfg.k_c, limit });
    }
    let nyq = grid.nyquist_index();
    let keep: Vec<bool> =
        grid.wavenumbers().iter().enumerate().map(|(j, k)| j != nyq && k.abs() <= cfg.k_c).collect();
    let sys = Boussinesq {
        grid,
        h0: &fields.h0,
        keep,
        g: params.g,
        e2: eps * eps,
        disp: eps * eps * h.powi(3) / 3.0,
        nonlinear: cfg.nonlinear,
    };
    let flat = fields.h0.iter().all(|v| (v - fields.h0[0]).abs() <= 1e-14 * v.abs());
    let mut eta = sys.project(&eta0.values)?;
    let mut u = sys.project(&u0.values)?;
    let e0 = sys.energy(&eta, &u)?;
    let mut states = vec![BoussinesqState { t: 0.0, eta: eta.clone(), u: u.clone() }];
    let mut energy = vec![e0];
    let steps = (cfg.t_end / cfg.dt).ceil() as usize;
    let dt = if steps > 0 { cfg.t_end / steps as f64 } else { 0.0 };
    let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + s * y).collect() };
    for step in 1..=steps {
        let (k1e, k1u) = sys.rhs(&eta, &u)?;
        let (k2e, k2u) = sys.rhs(&axpy(&eta, 0.5 * dt, &k1e), &axpy(&u, 0.5 * dt, &k1u))?;
        let (k3e, k3u) = sys.rhs(&axpy(&eta, 0.5 * dt, &k2e), &axpy(&u, 0.5 * dt, &k2u))?;
        let (k4e, k4u) = sys.rhs(&axpy(&eta, dt, &k3e), &axpy(&u, dt, &k3u))?;
        for j in 0..eta.len() {
            eta[j] += dt / 6.0 * (k1e[j] + 2.0 * k2e[j] + 2.0 * k3e[j] + k4e[j]);
            u[j] += dt / 6.0 * (k1u[j] + 2.0 * k2u[j] + 2.0 * k3u[j] + k4u[j]);
        }
        if eta.iter().chain(&u).any(|v| !v.is_finite()) {
            return Err(WaveError::NonFinite("boussinesq state"));
        }
        if step % cfg.save_every.max(1) == 0 || step == steps {
            let e = sys.energy(&eta, &u)?;
            if flat && e0 > 0.0 && (e / e0 - 1.0).abs() > 0.01 {
                return Err(WaveError::EnergyGrowth(e / e0 - 1.0));
            }
            states.push(BoussinesqState { t: step as f64 * dt, eta: eta.clone(), u: u.clone() });
            energy.push(e);
        }
    }
    Ok(BoussinesqHistory { grid: grid.clone(), h0: fields.h0.clone(), k_c: cfg.k_c, states, energy })
}

/// Soliton `A sech²(κ(Y − vτ − y0))` of the `b = 0` equation with
/// `A = v/c₂`, `κ = √(v/(4c₁))`, wrapped onto the period `length`.
pub fn soliton(coeffs: &KdvCoefficients, speed: f64, y0: f64, length: f64) -> impl Fn(f64, f64) -> f64 {
    let amp = speed / coeffs.c2;
    let kappa = (speed / (4.0 * coeffs.c1)).sqrt();
    move |y: f64, tau: f64| {
        let d = y - speed * tau - y0;
        let z = d - length * (d / length).round();
        let s = 1.0 / (kappa * z).cosh();
        amp * s * s
    }
}
