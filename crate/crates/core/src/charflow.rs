//! Regularized random characteristics `dX/dt = c_ε(X)`, `X(0) = Y`.
//!
//! Two solvers are provided. [`solve_flow`] integrates trajectories and
//! their variational Jacobian with RK4. [`TravelTime`] uses the exact
//! autonomous-flow identity `∫_Y^X dX'/c_ε(X') = t`: the travel-time
//! function `S` is integrated once on the fine grid and the flow becomes
//! `Φ_t(Y) = S⁻¹(S(Y) + t)` with Jacobian `c_ε(X)/c_ε(Y)`.

use rayon::prelude::*;

use crate::bottom::{BottomError, BottomRealization, ProcessSpec};
use crate::coeffs::{theorem57_constants, CoeffError, EffectiveCoefficients, PhysicalParams, Speed};
use crate::ensemble::mix_seed;
use crate::interp::{MonotoneCubic, PeriodicHermite5};
use crate::scalesep::{covering_realization, Bump, OrderEstimate};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FlowError {
    #[error("dt = {dt:e} exceeds εℓ/(4√(gh)) = {limit:e}")]
    StepTooLarge { dt: f64, limit: f64 },
    #[error("trajectories {index} and {next} cross at t = {time}")]
    Crossing { time: f64, index: usize, next: usize },
    #[error("speed not positive at X = {0}")]
    NonPositiveSpeed(f64),
    #[error("query X = {x} outside the covered range [{lo}, {hi}]")]
    OutOfRange { x: f64, lo: f64, hi: f64 },
    #[error("no stored time {0}")]
    MissingTime(f64),
    #[error(transparent)]
    Bottom(#[from] BottomError),
    #[error(transparent)]
    Coeff(#[from] CoeffError),
}

/// Stored trajectories `X(tₖ, Yⱼ)` and Jacobians `∂X/∂Y`.
#[derive(Clone, Debug)]
pub struct CharFlow {
    pub y: Vec<f64>,
    pub times: Vec<f64>,
    /// `x[k][j] = X(times[k], y[j])`.
    pub x: Vec<Vec<f64>>,
    pub jacobian: Vec<Vec<f64>>,
    pub dt: f64,
}

impl CharFlow {
    fn time_index(&self, t: f64) -> Result<usize, FlowError> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
            .ok_or(FlowError::MissingTime(t))
    }
}

#[inline]
fn rk4_step(speed: &Speed, x: f64, jac: f64, h: f64) -> (f64, f64) {
    let (c1, d1) = speed.value_and_slope(x);
    let (c2, d2) = speed.value_and_slope(x + 0.5 * h * c1);
    let (c3, d3) = speed.value_and_slope(x + 0.5 * h * c2);
    let (c4, d4) = speed.value_and_slope(x + h * c3);
    let j1 = d1 * jac;
    let j2 = d2 * (jac + 0.5 * h * j1);
    let j3 = d3 * (jac + 0.5 * h * j2);
    let j4 = d4 * (jac + h * j3);
    (
        x + h / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4),
        jac + h / 6.0 * (j1 + 2.0 * j2 + 2.0 * j3 + j4),
    )
}

/// RK4 trajectories from increasing `y_nodes`, stored at `times` (sorted,
/// non-negative), with the variational Jacobian `d(∂X/∂Y)/dt = c_ε'(X)·∂X/∂Y`.
pub fn solve_flow(speed: &Speed, y_nodes: &[f64], times: &[f64], dt: f64) -> Result<CharFlow, FlowError> {
    let ell = speed.real.spec.correlation_length();
    let limit = speed.eps * ell / (4.0 * speed.c0);
    if dt > limit * (1.0 + 1e-12) {
        return Err(FlowError::StepTooLarge { dt, limit });
    }
    let tracks: Vec<(Vec<f64>, Vec<f64>)> = y_nodes
        .par_iter()
        .map(|&y| {
            let (mut x, mut jac, mut t) = (y, 1.0, 0.0);
            let mut xs = Vec::with_capacity(times.len());
            let mut js = Vec::with_capacity(times.len());
            for &target in times {
                while t < target {
                    let h = dt.min(target - t);
                    let (nx, nj) = rk4_step(speed, x, jac, h);
                    x = nx;
                    jac = nj;
                    t = if target - t <= dt { target } else { t + dt };
                }
                xs.push(x);
                js.push(jac);
            }
            (xs, js)
        })
        .collect();
    let mut x = vec![Vec::with_capacity(y_nodes.len()); times.len()];
    let mut jacobian = vec![Vec::with_capacity(y_nodes.len()); times.len()];
    for (xs, js) in &tracks {
        for k in 0..times.len() {
            x[k].push(xs[k]);
            jacobian[k].push(js[k]);
        }
    }
    for (k, row) in x.iter().enumerate() {
        for j in 0..row.len().saturating_sub(1) {
            if !(row[j + 1] > row[j]) {
                return Err(FlowError::Crossing { time: times[k], index: j, next: j + 1 });
            }
        }
    }
    Ok(CharFlow { y: y_nodes.to_vec(), times: times.to_vec(), x, jacobian, dt })
}

/// `Y(t, X)` at stored time `t` by monotone cubic interpolation of the
/// inverse graph, using the exact slopes `1/(∂X/∂Y)`.
pub fn invert_flow(flow: &CharFlow, xs: &[f64], t: f64) -> Result<Vec<f64>, FlowError> {
    let k = flow.time_index(t)?;
    let slopes: Vec<f64> = flow.jacobian[k].iter().map(|j| 1.0 / j).collect();
    let interp = MonotoneCubic::new(flow.x[k].clone(), flow.y.clone(), Some(slopes)).ok_or(FlowError::Crossing {
        time: t,
        index: 0,
        next: 1,
    })?;
    let (lo, hi) = interp.x_range();
    xs.iter()
        .map(|&x| interp.eval(x).map(|v| v.0).ok_or(FlowError::OutOfRange { x, lo, hi }))
        .collect()
}

/// Travel-time representation of the flow on the periodic `X` line.
#[derive(Clone, Debug)]
pub struct TravelTime {
    period: f64,
    slowness: PeriodicHermite5,
    cumulative: Vec<f64>,
    pub eps: f64,
    pub c0: f64,
}

impl TravelTime {
    /// Builds `1/c_ε` from the nodal jets of `β` at `X = εxⱼ`.
    pub fn new(real: &BottomRealization, coeffs: &EffectiveCoefficients) -> Result<Self, FlowError> {
        let p = coeffs.params;
        let (eps, c0) = (p.eps, p.c0());
        let k = c0 * eps / (2.0 * p.h);
        let base = c0 * (1.0 - eps * eps * coeffs.a_kdv.value);
        let n = real.values().len();
        let (mut v, mut d, mut s) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for j in 0..n {
            let c = base - k * real.values()[j];
            if !(c > 0.0) {
                return Err(FlowError::NonPositiveSpeed(eps * real.grid.node(j)));
            }
            let c1 = -k * real.derivative()[j] / eps;
            let c2 = -k * real.second_derivative()[j] / (eps * eps);
            v.push(1.0 / c);
            d.push(-c1 / (c * c));
            s.push(-c2 / (c * c) + 2.0 * c1 * c1 / (c * c * c));
        }
        let period = eps * real.period();
        let slowness = PeriodicHermite5::new(period, v, d, s);
        let cumulative = slowness.cumulative_nodes();
        Ok(Self { period, slowness, cumulative, eps, c0 })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// `1/c_ε(X)`.
    #[inline]
    pub fn slowness(&self, x: f64) -> f64 {
        self.slowness.value(x)
    }

    /// `c_ε(X)` as the reciprocal of the interpolated slowness.
    #[inline]
    pub fn speed(&self, x: f64) -> f64 {
        1.0 / self.slowness.value(x)
    }

    /// `S(X) = ∫₀^X dX'/c_ε(X')`.
    #[inline]
    pub fn travel(&self, x: f64) -> f64 {
        self.slowness.antiderivative(&self.cumulative, x)
    }

    /// `S⁻¹(s)` by bracketed Newton iteration inside one fine cell.
    pub fn inverse_travel(&self, s: f64) -> f64 {
        let n = self.slowness.len();
        let per = self.cumulative[n];
        let wraps = (s / per).floor();
        let local = s - wraps * per;
        let j = match self.cumulative.binary_search_by(|v| v.partial_cmp(&local).unwrap()) {
            Ok(i) => i.min(n - 1),
            Err(i) => i.saturating_sub(1).min(n - 1),
        };
        let h = self.slowness.spacing();
        let (mut lo, mut hi) = (j as f64 * h, (j + 1) as f64 * h);
        let mut x = lo + (local - self.cumulative[j]) / self.slowness.value(lo);
        for _ in 0..50 {
            if !(x > lo && x < hi) {
                x = 0.5 * (lo + hi);
            }
            let f = self.travel(x) - local;
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let step = f / self.slowness.value(x);
            x -= step;
            if step.abs() <= 1e-15 * h.max(x.abs()) {
                break;
            }
        }
        x + wraps * self.period
    }

    /// `Φ_t(Y)`.
    #[inline]
    pub fn forward(&self, y: f64, t: f64) -> f64 {
        self.inverse_travel(self.travel(y) + t)
    }

    /// `Φ_{−t}(X) = Y(t, X)`.
    #[inline]
    pub fn backward(&self, x: f64, t: f64) -> f64 {
        self.inverse_travel(self.travel(x) - t)
    }

    /// `∂X/∂Y = c_ε(X)/c_ε(Y)` at `X = Φ_t(Y)`.
    #[inline]
    pub fn jacobian(&self, y: f64, x: f64) -> f64 {
        self.slowness.value(y) / self.slowness.value(x)
    }
}

/// Terms of `Φ_t(Y) ≈ X⁰ + εX¹ + ε²X²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CharExpansion {
    pub x0: f64,
    pub x1: f64,
    pub x2: f64,
}

impl CharExpansion {
    pub fn sum(&self, eps: f64) -> f64 {
        self.x0 + eps * self.x1 + eps * eps * self.x2
    }
}

/// `X⁰ = Y + √(gh)t`, `X¹ = −(ε/2h)∫_{Y/ε}^{(Y+√(gh)t)/ε} β`, `X² = −√(gh)a_KdV t`.
pub fn expansion_terms(real: &BottomRealization, params: &PhysicalParams, a_kdv: f64, y: f64, t: f64) -> CharExpansion {
    let (eps, c0) = (params.eps, params.c0());
    CharExpansion {
        x0: y + c0 * t,
        x1: -eps / (2.0 * params.h) * real.integral(y / eps, (y + c0 * t) / eps),
        x2: -c0 * a_kdv * t,
    }
}

/// `Y ≈ X − √(gh)t + (ε²/2h)∫_{(X−√(gh)t)/ε}^{X/ε} β + ε²√(gh)a_KdV t`.
pub fn asymptotic_inverse(real: &BottomRealization, params: &PhysicalParams, a_kdv: f64, x: f64, t: f64) -> f64 {
    let (eps, c0) = (params.eps, params.c0());
    x - c0 * t + eps * eps / (2.0 * params.h) * real.integral((x - c0 * t) / eps, x / eps) + eps * eps * c0 * a_kdv * t
}

/// `1 − (ε/2h)[β((Y + √(gh)t)/ε) − β(Y/ε)]`.
pub fn jacobian_asymptotic(real: &BottomRealization, params: &PhysicalParams, y: f64, t: f64) -> f64 {
    let eps = params.eps;
    1.0 - eps / (2.0 * params.h) * (real.eval((y + params.c0() * t) / eps) - real.eval(y / eps))
}

/// Window and sampling used by the order checks.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowCheck {
    pub y_range: (f64, f64),
    pub y_nodes: usize,
    pub times: Vec<f64>,
}

impl Default for FlowCheck {
    fn default() -> Self {
        Self { y_range: (0.0, 4.0), y_nodes: 33, times: vec![0.25, 0.5, 0.75, 1.0] }
    }
}

fn draw(
    spec: &ProcessSpec,
    params: &PhysicalParams,
    check: &FlowCheck,
    seed: u64,
) -> Result<(BottomRealization, EffectiveCoefficients, TravelTime), FlowError> {
    let t_max = check.times.iter().cloned().fold(0.0, f64::max);
    let reach = check.y_range.1 + 2.0 * params.c0() * t_max + 1.0;
    let real = covering_realization(spec, reach, params.eps, seed)?;
    let coeffs = theorem57_constants(&spec.analytic_stats(), params)?;
    let tt = TravelTime::new(&real, &coeffs)?;
    Ok((real, coeffs, tt))
}

fn order_over_eps<F>(
    label: &str,
    spec: &ProcessSpec,
    base: &PhysicalParams,
    eps_list: &[f64],
    m: usize,
    seed: u64,
    target: f64,
    stat: F,
) -> Result<OrderEstimate, FlowError>
where
    F: Fn(&BottomRealization, &EffectiveCoefficients, &TravelTime, &PhysicalParams) -> f64 + Sync,
{
    let mut samples = Vec::new();
    for (ei, &eps) in eps_list.iter().enumerate() {
        let params = base.with_eps(eps);
        let v: Vec<Result<f64, FlowError>> = (0..m)
            .into_par_iter()
            .map(|i| {
                let s = mix_seed(mix_seed(seed, ei as u64), i as u64);
                let (real, coeffs, tt) = draw(spec, &params, &FlowCheck::default(), s)?;
                Ok(stat(&real, &coeffs, &tt, &params))
            })
            .collect();
        samples.push(v.into_iter().collect::<Result<Vec<_>, _>>()?);
    }
    Ok(OrderEstimate::from_samples(label, eps_list, &samples, target, true))
}

fn y_grid(check: &FlowCheck) -> Vec<f64> {
    let (a, b) = check.y_range;
    (0..check.y_nodes).map(|j| a + (b - a) * j as f64 / (check.y_nodes - 1) as f64).collect()
}

/// RMS of `Φ_t(Y) − (X⁰ + εX¹ + ε²X²)` over the window, regressed in `ε`.
pub fn expansion_residual_check(
    spec: &ProcessSpec,
    base: &PhysicalParams,
    eps_list: &[f64],
    m: usize,
    seed: u64,
) -> Result<OrderEstimate, FlowError> {
    let check = FlowCheck::default();
    let ys = y_grid(&check);
    order_over_eps("expansion_residual", spec, base, eps_list, m, seed, 2.0, |real, coeffs, tt, params| {
        let mut acc = 0.0;
        for &t in &check.times {
            for &y in &ys {
                let r = tt.forward(y, t) - expansion_terms(real, params, coeffs.a_kdv.value, y, t).sum(params.eps);
                acc += r * r;
            }
        }
        (acc / (ys.len() * check.times.len()) as f64).sqrt()
    })
}

/// RMS of the numeric inverse minus [`asymptotic_inverse`], regressed in `ε`.
pub fn inverse_residual_check(
    spec: &ProcessSpec,
    base: &PhysicalParams,
    eps_list: &[f64],
    m: usize,
    seed: u64,
) -> Result<OrderEstimate, FlowError> {
    let check = FlowCheck::default();
    let xs: Vec<f64> = y_grid(&check).iter().map(|x| x + 2.0 * base.c0()).collect();
    order_over_eps("inverse_residual", spec, base, eps_list, m, seed, 2.0, |real, coeffs, tt, params| {
        let mut acc = 0.0;
        for &t in &check.times {
            for &x in &xs {
                let r = tt.backward(x, t) - asymptotic_inverse(real, params, coeffs.a_kdv.value, x, t);
                acc += r * r;
            }
        }
        (acc / (xs.len() * check.times.len()) as f64).sqrt()
    })
}

/// Jacobian discrepancy paired with a bump in `Y` at each check time:
/// `D(t) = ∫ a(Y)[∂X/∂Y − (1 − (ε/2h)(β((Y+√(gh)t)/ε) − β(Y/ε)))] dY`,
/// summed over the fine nodes. Pointwise the discrepancy is only
/// `O(ε^{3/2})`; paired it is `O(ε²)`.
pub fn jacobian_discrepancy(real: &BottomRealization, tt: &TravelTime, params: &PhysicalParams, weight: &Bump, t: f64) -> f64 {
    let step = params.eps * real.grid.spacing();
    let (lo, hi) = weight.support();
    let (j0, j1) = ((lo / step).floor() as i64, (hi / step).ceil() as i64);
    let mut acc = 0.0;
    for j in j0..=j1 {
        let y = step * j as f64;
        let a = weight.value(y);
        if a == 0.0 {
            continue;
        }
        let x = tt.forward(y, t);
        acc += a * (tt.jacobian(y, x) - jacobian_asymptotic(real, params, y, t));
    }
    acc * step
}

/// Regression of the RMS (over check times) paired Jacobian discrepancy.
pub fn jacobian_asymptotics_check(
    spec: &ProcessSpec,
    base: &PhysicalParams,
    eps_list: &[f64],
    m: usize,
    seed: u64,
) -> Result<OrderEstimate, FlowError> {
    let check = FlowCheck::default();
    let weight = Bump::new(0.5 * (check.y_range.0 + check.y_range.1), 0.5 * (check.y_range.1 - check.y_range.0));
    order_over_eps("jacobian_paired", spec, base, eps_list, m, seed, 2.0, |real, _, tt, params| {
        let acc: f64 = check.times.iter().map(|&t| jacobian_discrepancy(real, tt, params, &weight, t).powi(2)).sum();
        (acc / check.times.len() as f64).sqrt()
    })
}

/// Number of realizations (out of `m`) whose RK4 flow crosses.
pub fn monotonicity_sweep(spec: &ProcessSpec, params: &PhysicalParams, m: usize, seed: u64) -> Result<usize, FlowError> {
    let check = FlowCheck { y_range: (0.0, 4.0), y_nodes: 257, times: vec![0.5, 1.0] };
    let ys = y_grid(&check);
    let coeffs = theorem57_constants(&spec.analytic_stats(), params)?;
    let dt = params.eps * spec.correlation_length() / (4.0 * params.c0());
    let reach = check.y_range.1 + 2.0 * params.c0() + 1.0;
    let results: Vec<Result<bool, FlowError>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let real = covering_realization(spec, reach, params.eps, mix_seed(seed, i as u64))?;
            let speed = Speed::new(&real, &coeffs);
            match solve_flow(&speed, &ys, &check.times, dt) {
                Ok(_) => Ok(false),
                Err(FlowError::Crossing { .. }) => Ok(true),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut crossings = 0;
    for r in results {
        if r? {
            crossings += 1;
        }
    }
    Ok(crossings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SpectralGrid;

    #[test]
    fn constant_bottom_translates() {
        let grid = SpectralGrid::new(160.0, 1280).unwrap();
        let real = BottomRealization::constant(grid, 0.3);
        let params = PhysicalParams::new(1.0, 1.0, 0.05).unwrap();
        let coeffs = EffectiveCoefficients::flat(params);
        let speed = Speed::new(&real, &coeffs);
        let flow = solve_flow(&speed, &[0.0, 1.0, 2.0], &[0.5, 1.0], 0.01).unwrap();
        let c = 1.0 - 0.05 * 0.3 / 2.0;
        for (j, y) in flow.y.iter().enumerate() {
            assert!((flow.x[1][j] - y - c).abs() < 1e-12);
            assert!((flow.jacobian[1][j] - 1.0).abs() < 1e-12);
        }
        let tt = TravelTime::new(&real, &coeffs).unwrap();
        assert!((tt.forward(1.0, 1.0) - 1.0 - c).abs() < 1e-12);
    }

    #[test]
    fn step_limit_enforced() {
        let grid = SpectralGrid::new(160.0, 1280).unwrap();
        let real = BottomRealization::constant(grid, 0.0);
        let params = PhysicalParams::new(1.0, 1.0, 0.05).unwrap();
        let coeffs = EffectiveCoefficients::flat(params);
        let speed = Speed::new(&real, &coeffs);
        assert!(matches!(solve_flow(&speed, &[0.0], &[1.0], 0.1), Err(FlowError::StepTooLarge { .. })));
    }
}
