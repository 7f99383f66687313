//! Monte Carlo checks of scale separation: homogenized means, Donsker path
//! convergence, orders of products of scaled processes and of integrals
//! along characteristics.
//!
//! All quadratures run on the fine nodes mapped to `X = εx`, so `β(X/ε)` is
//! read from exact nodal samples and the spacing is `εℓ/8`.

use rayon::prelude::*;

use crate::bottom::{sample, BottomError, BottomRealization, ProcessSpec, MIN_PERIOD_RATIO, MIN_POINTS_PER_ELL};
use crate::ensemble::mix_seed;
use crate::stats::{correlation, ks_critical, ks_normal, log_log_slope, mean, mean_estimate, std_dev, variance, Estimate};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ScaleError {
    #[error(transparent)]
    Bottom(#[from] BottomError),
    #[error("σ_β = {0:e} is degenerate; the integrated process does not diffuse")]
    Degenerate(f64),
    #[error("quadrature spacing {spacing:e} exceeds εℓ/4 = {limit:e}")]
    Underresolved { spacing: f64, limit: f64 },
    #[error("need at least 4 eps values spanning a factor 8, got {0:?}")]
    EpsList(Vec<f64>),
    #[error("need at least 2 realizations")]
    TooFew,
}

/// Polynomial bump `(1 − z²)^power` with `z = (x − center)/width`; zero for
/// `|z| ≥ 1`. `C^{power−1}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bump {
    pub center: f64,
    pub width: f64,
    pub power: i32,
}

impl Bump {
    pub fn new(center: f64, width: f64) -> Self {
        Self { center, width, power: 4 }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.width, self.center + self.width)
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        let z = (x - self.center) / self.width;
        if z.abs() >= 1.0 {
            0.0
        } else {
            (1.0 - z * z).powi(self.power)
        }
    }

    #[inline]
    pub fn d1(&self, x: f64) -> f64 {
        let z = (x - self.center) / self.width;
        if z.abs() >= 1.0 {
            return 0.0;
        }
        let p = self.power as f64;
        -2.0 * p * z * (1.0 - z * z).powi(self.power - 1) / self.width
    }

    #[inline]
    pub fn d2(&self, x: f64) -> f64 {
        let z = (x - self.center) / self.width;
        if z.abs() >= 1.0 {
            return 0.0;
        }
        let p = self.power as f64;
        let u = 1.0 - z * z;
        (-2.0 * p * u.powi(self.power - 1) + 4.0 * p * (p - 1.0) * z * z * u.powi(self.power - 2))
            / (self.width * self.width)
    }

    #[inline]
    pub fn d3(&self, x: f64) -> f64 {
        let z = (x - self.center) / self.width;
        if z.abs() >= 1.0 {
            return 0.0;
        }
        let p = self.power as f64;
        let u = 1.0 - z * z;
        (12.0 * p * (p - 1.0) * z * u.powi(self.power - 2)
            - 8.0 * p * (p - 1.0) * (p - 2.0) * z * z * z * u.powi(self.power - 3))
            / self.width.powi(3)
    }

    /// `∫_{−∞}^x` of the bump, closed form.
    pub fn antiderivative(&self, x: f64) -> f64 {
        let z = ((x - self.center) / self.width).clamp(-1.0, 1.0);
        let p = self.power as usize;
        let mut binom = 1.0;
        let mut acc = 0.0;
        for k in 0..=p {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let e = (2 * k + 1) as i32;
            acc += sign * binom * (z.powi(e) + 1.0) / e as f64;
            binom = binom * (p - k) as f64 / (k + 1) as f64;
        }
        acc * self.width
    }

    pub fn integral(&self) -> f64 {
        self.antiderivative(self.center + self.width)
    }
}

/// Space-time product bump `φ(X, t) = a(X)·b(t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestFunction {
    pub space: Bump,
    pub time: Bump,
}

impl TestFunction {
    pub fn new(x0: f64, width: f64, t0: f64, width_t: f64) -> Self {
        Self { space: Bump::new(x0, width), time: Bump::new(t0, width_t) }
    }

    #[inline]
    pub fn value(&self, x: f64, t: f64) -> f64 {
        self.space.value(x) * self.time.value(t)
    }

    #[inline]
    pub fn dx(&self, x: f64, t: f64) -> f64 {
        self.space.d1(x) * self.time.value(t)
    }

    #[inline]
    pub fn dxx(&self, x: f64, t: f64) -> f64 {
        self.space.d2(x) * self.time.value(t)
    }

    #[inline]
    pub fn dxxx(&self, x: f64, t: f64) -> f64 {
        self.space.d3(x) * self.time.value(t)
    }

    #[inline]
    pub fn dt(&self, x: f64, t: f64) -> f64 {
        self.space.value(x) * self.time.d1(t)
    }

    #[inline]
    pub fn dtt(&self, x: f64, t: f64) -> f64 {
        self.space.value(x) * self.time.d2(t)
    }

    #[inline]
    pub fn dxt(&self, x: f64, t: f64) -> f64 {
        self.space.d1(x) * self.time.d1(t)
    }
}

/// Normalized integrated path `Y_ε(X) = (√ε/σ_β)∫₀^{X/ε} β(y) dy`.
pub struct PathFunctional<'a> {
    pub real: &'a BottomRealization,
    pub eps: f64,
    pub sigma_beta: f64,
}

impl<'a> PathFunctional<'a> {
    pub fn new(real: &'a BottomRealization, eps: f64, sigma_beta: f64) -> Self {
        Self { real, eps, sigma_beta }
    }

    /// `√ε∫₀^{X/ε} β` without the `1/σ_β` normalization.
    #[inline]
    pub fn unnormalized(&self, x: f64) -> f64 {
        self.eps.sqrt() * self.real.integral(0.0, x / self.eps)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.unnormalized(x) / self.sigma_beta
    }

    /// `∂_X Y_ε = β(X/ε)/(√ε σ_β)`.
    #[inline]
    pub fn slope(&self, x: f64) -> f64 {
        self.real.eval(x / self.eps) / (self.eps.sqrt() * self.sigma_beta)
    }

    pub fn sample(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }
}

/// Realization whose period covers `x_max/ε` (plus the mandatory 50ℓ) at
/// exactly `ℓ/8` spacing with a power-of-two node count.
pub fn covering_realization(spec: &ProcessSpec, x_max: f64, eps: f64, seed: u64) -> Result<BottomRealization, BottomError> {
    let ell = spec.correlation_length();
    let need = (x_max / eps).max(MIN_PERIOD_RATIO * ell);
    let mut n = 64usize;
    while (n as f64) * ell / MIN_POINTS_PER_ELL < need {
        n <<= 1;
    }
    sample(spec, n as f64 * ell / MIN_POINTS_PER_ELL, n, seed)
}

/// `∫β(X/ε) f(X) dX` on `[a, b]` by the trapezoid rule with `points` nodes.
pub fn z_integral(
    real: &BottomRealization,
    eps: f64,
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    points: usize,
) -> Result<f64, ScaleError> {
    let spacing = (b - a) / (points.max(2) - 1) as f64;
    let limit = eps * real.spec.correlation_length() / 4.0;
    if spacing > limit {
        return Err(ScaleError::Underresolved { spacing, limit });
    }
    let n = points.max(2);
    let mut acc = 0.0;
    for i in 0..n {
        let x = a + i as f64 * spacing;
        let w = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
        acc += w * real.eval(x / eps) * f(x);
    }
    Ok(acc * spacing)
}

/// Nodal `∫β(X/ε) f(X) dX`: sum over the fine nodes `X = εxⱼ`.
pub fn z_nodal(real: &BottomRealization, eps: f64, f: &Bump) -> f64 {
    let dx = real.grid.spacing();
    let (lo, hi) = f.support();
    let j0 = (lo / (eps * dx)).floor().max(0.0) as usize;
    let j1 = ((hi / (eps * dx)).ceil() as usize).min(real.values().len() - 1);
    let beta = real.values();
    (j0..=j1).map(|j| beta[j] * f.value(eps * dx * j as f64)).sum::<f64>() * eps * dx
}

/// Regression of a statistic against `ε` on log-log axes.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderEstimate {
    pub label: String,
    pub eps: Vec<f64>,
    /// Regressed statistic per `ε` with its Monte Carlo SE.
    pub stat: Vec<Estimate>,
    /// Ensemble mean of the raw paired value per `ε`.
    pub mean: Vec<Estimate>,
    /// Ensemble SD of the raw paired value per `ε`.
    pub sd: Vec<f64>,
    pub slope: f64,
    pub slope_se: f64,
    pub target: f64,
}

impl OrderEstimate {
    pub fn from_samples(label: &str, eps: &[f64], samples: &[Vec<f64>], target: f64, use_rms: bool) -> Self {
        let mut stat = Vec::new();
        let mut means = Vec::new();
        let mut sds = Vec::new();
        for s in samples {
            let m = s.len() as f64;
            let sd = std_dev(s);
            means.push(mean_estimate(s));
            sds.push(sd);
            if use_rms {
                let sq: Vec<f64> = s.iter().map(|v| v * v).collect();
                let ms = mean(&sq);
                let rms = ms.sqrt();
                let se = if rms > 0.0 { std_dev(&sq) / m.sqrt() / (2.0 * rms) } else { 0.0 };
                stat.push(Estimate { value: rms, se });
            } else {
                stat.push(Estimate { value: sd, se: sd / (2.0 * (m - 1.0)).sqrt() });
            }
        }
        let values: Vec<f64> = stat.iter().map(|e| e.value).collect();
        let ses: Vec<f64> = stat.iter().map(|e| e.se).collect();
        let (slope, slope_se) = if values.iter().all(|v| *v > 0.0) {
            let fit = log_log_slope(eps, &values, &ses);
            (fit.slope, fit.slope_se)
        } else {
            (f64::NAN, f64::NAN)
        };
        Self { label: label.to_string(), eps: eps.to_vec(), stat, mean: means, sd: sds, slope, slope_se, target }
    }

    /// `|slope − target| ≤ max(tol, 2·SE)`.
    pub fn within(&self, tol: f64) -> bool {
        (self.slope - self.target).abs() <= tol.max(2.0 * self.slope_se)
    }

    pub fn at_least(&self, min: f64) -> bool {
        self.slope >= min
    }
}

fn check_eps(eps: &[f64]) -> Result<(), ScaleError> {
    let lo = eps.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eps.iter().cloned().fold(0.0, f64::max);
    if eps.len() < 4 || hi / lo < 8.0 * (1.0 - 1e-12) {
        return Err(ScaleError::EpsList(eps.to_vec()));
    }
    Ok(())
}

fn realization_seed(master: u64, eps_index: usize, index: usize) -> u64 {
    mix_seed(mix_seed(master, eps_index as u64), index as u64)
}

/// Result of [`verify_lln`].
#[derive(Clone, Debug)]
pub struct LlnReport {
    /// SD of `Z_ε(f)` against `ε`; target `r + 1/2`.
    pub order: OrderEstimate,
    /// `E(Z_ε(f)Z_ε(g))/ε` per `ε`.
    pub covariance: Vec<Estimate>,
    /// `σ_β²∫fg`.
    pub covariance_target: f64,
}

/// Law of large numbers and CLT scaling of `Z_ε(f) = ∫β(X/ε)f(X)dX`.
pub fn verify_lln(
    spec: &ProcessSpec,
    f: &Bump,
    g: &Bump,
    eps_list: &[f64],
    m: usize,
    seed: u64,
) -> Result<LlnReport, ScaleError> {
    check_eps(eps_list)?;
    if m < 2 {
        return Err(ScaleError::TooFew);
    }
    let x_max = f.support().1.max(g.support().1);
    let mut samples = Vec::new();
    let mut covs = Vec::new();
    for (ei, &eps) in eps_list.iter().enumerate() {
        let pairs: Vec<Result<(f64, f64), BottomError>> = (0..m)
            .into_par_iter()
            .map(|i| {
                let real = covering_realization(spec, x_max, eps, realization_seed(seed, ei, i))?;
                Ok((z_nodal(&real, eps, f), z_nodal(&real, eps, g)))
            })
            .collect();
        let pairs: Vec<(f64, f64)> = pairs.into_iter().collect::<Result<_, _>>()?;
        samples.push(pairs.iter().map(|p| p.0).collect::<Vec<_>>());
        let prod: Vec<f64> = pairs.iter().map(|(a, b)| a * b / eps).collect();
        covs.push(mean_estimate(&prod));
    }
    let r = spec.derivative_order() as f64;
    let order = OrderEstimate::from_samples("z_integral_sd", eps_list, &samples, r + 0.5, false);
    let fg = crate::quad::composite_gauss(
        &|x| f.value(x) * g.value(x),
        f.support().0.max(g.support().0),
        f.support().1.min(g.support().1).max(f.support().0.max(g.support().0)),
        64,
        8,
    );
    Ok(LlnReport { order, covariance: covs, covariance_target: spec.covariance().sigma_sq() * fg })
}

/// Result of [`verify_donsker`].
#[derive(Clone, Debug)]
pub struct DonskerReport {
    pub m: usize,
    pub x_bar: f64,
    pub ks: f64,
    pub ks_critical: f64,
    pub variance: Estimate,
    pub increment_corr: f64,
    pub corr_bound: f64,
}

impl DonskerReport {
    pub fn ks_pass(&self) -> bool {
        self.ks < self.ks_critical
    }

    pub fn variance_pass(&self) -> bool {
        ((self.variance.value - self.x_bar) / self.x_bar).abs() < 0.05
    }

    pub fn increment_pass(&self) -> bool {
        self.increment_corr.abs() < self.corr_bound
    }
}

/// KS test of `Y_ε(X̄)` against `Normal(0, X̄)`, endpoint variance and the
/// correlation of increments over `[0, X̄/2]` and `[X̄/2, X̄]`.
pub fn verify_donsker(spec: &ProcessSpec, eps: f64, x_bar: f64, m: usize, seed: u64) -> Result<DonskerReport, ScaleError> {
    let s2 = spec.covariance().sigma_sq();
    let m2 = spec.covariance().value(0.0);
    if !(s2 > 1e-10 * m2.max(1e-300) * spec.correlation_length()) {
        return Err(ScaleError::Degenerate(s2.max(0.0).sqrt()));
    }
    if m < 2 {
        return Err(ScaleError::TooFew);
    }
    let sigma = s2.sqrt();
    let draws: Vec<Result<(f64, f64), BottomError>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let real = covering_realization(spec, 4.0 * x_bar, eps, mix_seed(seed, i as u64))?;
            let path = PathFunctional::new(&real, eps, sigma);
            Ok((path.eval(0.5 * x_bar), path.eval(x_bar)))
        })
        .collect();
    let draws: Vec<(f64, f64)> = draws.into_iter().collect::<Result<_, _>>()?;
    let end: Vec<f64> = draws.iter().map(|d| d.1).collect();
    let first: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let second: Vec<f64> = draws.iter().map(|d| d.1 - d.0).collect();
    let var = variance(&end);
    Ok(DonskerReport {
        m,
        x_bar,
        ks: ks_normal(&end, x_bar),
        ks_critical: ks_critical(m, 0.05),
        variance: Estimate { value: var, se: var * (2.0 / (m as f64 - 1.0)).sqrt() },
        increment_corr: correlation(&first, &second),
        corr_bound: 3.0 / (m as f64).sqrt(),
    })
}

/// Two bottom processes sampled jointly.
#[derive(Clone, Debug, PartialEq)]
pub enum PairSpec {
    /// Independent draws.
    Independent(ProcessSpec, ProcessSpec),
    /// `β₂ = β₁`.
    Identical(ProcessSpec),
    /// `β₂(x) = β₁(x + shift)`.
    Shifted(ProcessSpec, f64),
}

impl PairSpec {
    fn specs(&self) -> (&ProcessSpec, &ProcessSpec) {
        match self {
            PairSpec::Independent(a, b) => (a, b),
            PairSpec::Identical(a) | PairSpec::Shifted(a, _) => (a, a),
        }
    }

    fn draw(&self, x_max: f64, eps: f64, seed: u64) -> Result<(BottomRealization, BottomRealization), BottomError> {
        match self {
            PairSpec::Independent(a, b) => Ok((
                covering_realization(a, x_max, eps, mix_seed(seed, 1))?,
                covering_realization(b, x_max, eps, mix_seed(seed, 2))?,
            )),
            PairSpec::Identical(a) => {
                let r = covering_realization(a, x_max, eps, mix_seed(seed, 1))?;
                Ok((r.clone(), r))
            }
            PairSpec::Shifted(a, s) => {
                let r = covering_realization(a, x_max + eps * s.abs(), eps, mix_seed(seed, 1))?;
                let nodes = (s / r.grid.spacing()).round() as i64;
                let t = r.translated(nodes);
                Ok((r, t))
            }
        }
    }

    /// Limiting covariance matrix entries `(σ₁², ρ₁₂, σ₂²)`.
    pub fn limit_covariance(&self) -> (f64, f64, f64) {
        let (a, b) = self.specs();
        let (s1, s2) = (a.covariance().sigma_sq(), b.covariance().sigma_sq());
        let rho12 = match self {
            PairSpec::Independent(..) => 0.0,
            PairSpec::Identical(_) => s1,
            PairSpec::Shifted(a, s) => a.covariance().shifted_integral(*s, 40.0 * a.correlation_length()),
        };
        (s1, rho12, s2)
    }
}

/// `∫∫β₁(X/ε)β₂((X + ct)/ε)φ(X,t) dXdt` written in `(X, X' = X + ct)` and
/// summed over fine nodes.
pub fn product_statistic(r1: &BottomRealization, r2: &BottomRealization, eps: f64, c: f64, phi: &TestFunction) -> f64 {
    let dx = r1.grid.spacing();
    let step = eps * dx;
    let (a0, a1) = phi.space.support();
    let (t0, t1) = phi.time.support();
    let (b1, b2) = (r1.values(), r2.values());
    let n = b1.len().min(b2.len());
    let i0 = (a0 / step).floor().max(0.0) as usize;
    let i1 = ((a1 / step).ceil() as usize).min(n - 1);
    let mut acc = 0.0;
    for i in i0..=i1 {
        let x = step * i as f64;
        let ax = phi.space.value(x);
        if ax == 0.0 {
            continue;
        }
        let lo = ((x + c * t0) / step).floor().max(0.0) as usize;
        let hi = (((x + c * t1) / step).ceil() as usize).min(n - 1);
        let mut inner = 0.0;
        for j in lo..=hi {
            let t = (step * j as f64 - x) / c;
            inner += b2[j] * phi.time.value(t);
        }
        acc += b1[i] * ax * inner;
    }
    acc * step * step / c.abs()
}

/// Order of the paired product of two scaled processes; target
/// `r₁ + r₂ + 1`. The regressed statistic is the RMS over realizations.
pub fn verify_product_order(
    pair: &PairSpec,
    c: f64,
    phi: &TestFunction,
    eps_list: &[f64],
    m: usize,
    seed: u64,
) -> Result<OrderEstimate, ScaleError> {
    check_eps(eps_list)?;
    let (a, b) = pair.specs();
    let x_max = phi.space.support().1 + c.abs() * phi.time.support().1;
    let mut samples = Vec::new();
    for (ei, &eps) in eps_list.iter().enumerate() {
        let v: Vec<Result<f64, BottomError>> = (0..m)
            .into_par_iter()
            .map(|i| {
                let (r1, r2) = pair.draw(x_max, eps, realization_seed(seed, ei, i))?;
                Ok(product_statistic(&r1, &r2, eps, c, phi))
            })
            .collect();
        samples.push(v.into_iter().collect::<Result<Vec<_>, _>>()?);
    }
    let target = (a.derivative_order() + b.derivative_order() + 1) as f64;
    Ok(OrderEstimate::from_samples("product", eps_list, &samples, target, true))
}

/// Separable weight `φ(θ, X, t) = a(θ)·b(X)·C(t)` for the characteristic
/// integral.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CharWeight {
    pub theta: Bump,
    pub x: Bump,
    pub t: Bump,
}

/// `∫dXdt ∫_X^{X+ct} [β₁(X/ε)β₂(θ/ε) + β₂(X/ε)β₁(θ/ε)] φ(θ,X,t) dθ`.
///
/// The `t` integral is done in closed form: for `θ ≥ X` it contributes
/// `∫_{(θ−X)/c}^∞ C(t) dt`.
pub fn characteristic_statistic(
    r1: &BottomRealization,
    r2: &BottomRealization,
    eps: f64,
    c: f64,
    w: &CharWeight,
) -> f64 {
    let step = eps * r1.grid.spacing();
    let (b1, b2) = (r1.values(), r2.values());
    let n = b1.len().min(b2.len());
    let (x0, x1) = w.x.support();
    let (th0, th1) = w.theta.support();
    let tail_total = w.t.integral();
    let t_max = w.t.support().1;
    let i0 = (x0 / step).floor().max(0.0) as usize;
    let i1 = ((x1 / step).ceil() as usize).min(n - 1);
    let mut acc = 0.0;
    for i in i0..=i1 {
        let x = step * i as f64;
        let bx = w.x.value(x);
        if bx == 0.0 {
            continue;
        }
        let lo = ((x.max(th0)) / step).ceil() as usize;
        let hi = (((x + c * t_max).min(th1)) / step).floor().min((n - 1) as f64) as usize;
        if hi < lo {
            continue;
        }
        let (mut s12, mut s21) = (0.0, 0.0);
        for j in lo..=hi {
            let theta = step * j as f64;
            let tail = tail_total - w.t.antiderivative((theta - x) / c);
            let wt = if j == lo && (theta - x).abs() < 1e-12 * step.max(1.0) { 0.5 } else { 1.0 };
            let weight = wt * w.theta.value(theta) * tail;
            s12 += b2[j] * weight;
            s21 += b1[j] * weight;
        }
        acc += bx * (b1[i] * s12 + b2[i] * s21);
    }
    acc * step * step
}

/// Order of the symmetrized characteristic integral; target slope `≥ 1`.
pub fn verify_characteristic_integral(
    pair: &PairSpec,
    c: f64,
    w: &CharWeight,
    eps_list: &[f64],
    m: usize,
    seed: u64,
) -> Result<OrderEstimate, ScaleError> {
    check_eps(eps_list)?;
    let x_max = w.theta.support().1.max(w.x.support().1);
    let mut samples = Vec::new();
    for (ei, &eps) in eps_list.iter().enumerate() {
        let v: Vec<Result<f64, BottomError>> = (0..m)
            .into_par_iter()
            .map(|i| {
                let (r1, r2) = pair.draw(x_max, eps, realization_seed(seed, ei, i))?;
                Ok(characteristic_statistic(&r1, &r2, eps, c, w))
            })
            .collect();
        samples.push(v.into_iter().collect::<Result<Vec<_>, _>>()?);
    }
    Ok(OrderEstimate::from_samples("characteristic_integral", eps_list, &samples, 1.0, true))
}

/// Empirical covariance of `(√ε∫₀^{X̄/ε}β₁, √ε∫₀^{X̄/ε}β₂)` against `X̄·C`.
#[derive(Clone, Debug)]
pub struct CovarianceReport {
    /// `(C₁₁, C₁₂, C₂₂)` empirical, each with its SE.
    pub empirical: [Estimate; 3],
    /// `X̄·(σ₁², ρ₁₂, σ₂²)`.
    pub target: [f64; 3],
}

impl CovarianceReport {
    pub fn within(&self, k: f64) -> bool {
        self.empirical.iter().zip(&self.target).all(|(e, t)| (e.value - t).abs() <= k * e.se.max(1e-15 * t.abs()))
    }
}

pub fn verify_covariance_matrix(pair: &PairSpec, eps: f64, x_bar: f64, m: usize, seed: u64) -> Result<CovarianceReport, ScaleError> {
    if m < 2 {
        return Err(ScaleError::TooFew);
    }
    let draws: Vec<Result<(f64, f64), BottomError>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let (r1, r2) = pair.draw(2.0 * x_bar, eps, mix_seed(seed, i as u64))?;
            let (p1, p2) = (PathFunctional::new(&r1, eps, 1.0), PathFunctional::new(&r2, eps, 1.0));
            Ok((p1.eval(x_bar), p2.eval(x_bar)))
        })
        .collect();
    let draws: Vec<(f64, f64)> = draws.into_iter().collect::<Result<_, _>>()?;
    let (ma, mb) = (mean(&draws.iter().map(|d| d.0).collect::<Vec<_>>()), mean(&draws.iter().map(|d| d.1).collect::<Vec<_>>()));
    let prods = |f: &dyn Fn(&(f64, f64)) -> f64| -> Estimate {
        let v: Vec<f64> = draws.iter().map(f).collect();
        let e = mean_estimate(&v);
        Estimate { value: e.value * m as f64 / (m as f64 - 1.0), se: e.se }
    };
    let c11 = prods(&|d| (d.0 - ma) * (d.0 - ma));
    let c12 = prods(&|d| (d.0 - ma) * (d.1 - mb));
    let c22 = prods(&|d| (d.1 - mb) * (d.1 - mb));
    let (s1, r12, s2) = pair.limit_covariance();
    Ok(CovarianceReport { empirical: [c11, c12, c22], target: [x_bar * s1, x_bar * r12, x_bar * s2] })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_derivatives_match_finite_differences() {
        let b = Bump::new(1.0, 0.7);
        let h = 1e-5;
        for x in [0.5, 0.9, 1.2, 1.6] {
            let fd1 = (b.value(x + h) - b.value(x - h)) / (2.0 * h);
            let fd2 = (b.value(x + h) - 2.0 * b.value(x) + b.value(x - h)) / (h * h);
            assert!((fd1 - b.d1(x)).abs() < 1e-8);
            assert!((fd2 - b.d2(x)).abs() < 1e-4);
            let fd3 = (b.d2(x + h) - b.d2(x - h)) / (2.0 * h);
            assert!((fd3 - b.d3(x)).abs() < 1e-5 * b.d3(x).abs().max(1.0));
        }
    }

    #[test]
    fn bump_antiderivative_closed_form() {
        let b = Bump::new(0.0, 1.0);
        assert!((b.integral() - 256.0 / 315.0).abs() < 1e-14);
        let num = crate::quad::composite_gauss(&|x| b.value(x), -1.0, 0.3, 16, 8);
        assert!((b.antiderivative(0.3) - num).abs() < 1e-13);
    }

    #[test]
    fn eps_list_must_span_factor_eight() {
        assert!(check_eps(&[0.1, 0.05, 0.025]).is_err());
        assert!(check_eps(&[0.1, 0.08, 0.05, 0.04]).is_err());
        assert!(check_eps(&[0.1, 0.05, 0.025, 0.0125]).is_ok());
    }
}
