//! Stationary zero-mean bottom processes `β(x, ω)` on the fine scale.
//!
//! Three families are provided: a Gaussian field with squared-exponential
//! covariance, a skewed moving average over a randomly shifted lattice, and
//! the derivative of either. A realization stores `β`, `∂ₓβ` and `∂ₓ²β` at
//! the fine nodes; off-node values come from the quintic Hermite interpolant
//! of these exact nodal jets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use rustfft::num_complex::Complex64;

use crate::interp::{Jet, PeriodicHermite5};
use crate::quad::{adaptive_simpson, composite_gauss, gauss_legendre};
use crate::spectral::{SpectralError, SpectralGrid};
use crate::stats::{block_bootstrap, Estimate};

/// Minimum ratio of the fine period to the correlation length.
pub const MIN_PERIOD_RATIO: f64 = 50.0;
/// Minimum number of fine nodes per correlation length.
pub const MIN_POINTS_PER_ELL: f64 = 8.0;
/// Largest kernel support, in lattice spacings.
pub const MAX_KERNEL_SPAN: f64 = 64.0;
const BOOTSTRAP_REPS: usize = 400;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum BottomError {
    #[error("fine period / correlation length = {0:.3} is below {MIN_PERIOD_RATIO}")]
    PeriodRatio(f64),
    #[error("{0:.3} fine nodes per correlation length, need at least {MIN_POINTS_PER_ELL}")]
    Underresolved(f64),
    #[error("kernel support spans {0:.1} lattice spacings (limit {MAX_KERNEL_SPAN})")]
    KernelTooWide(f64),
    #[error("fine period {period} is not a multiple of the lattice spacing {spacing}")]
    LatticeMismatch { period: f64, spacing: f64 },
    #[error("invalid process spec: {0}")]
    InvalidSpec(String),
    #[error("max_lag {max_lag} outside [10ℓ = {min}, L/2 = {max}]")]
    MaxLag { max_lag: f64, min: f64, max: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Centered, unit-variance innovation law for the lattice process.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Innovation {
    /// `Exp(1) − 1`; third moment 2.
    Exponential,
    /// `(G − k)/√k` with `G ~ Gamma(k, 1)`; third moment `2/√k`.
    Gamma { shape: f64 },
}

impl Innovation {
    pub fn third_moment(&self) -> f64 {
        match *self {
            Innovation::Exponential => 2.0,
            Innovation::Gamma { shape } => 2.0 / shape.sqrt(),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Innovation::Exponential => {
                let e: f64 = Exp1.sample(rng);
                e - 1.0
            }
            Innovation::Gamma { shape } => {
                let g = Gamma::new(shape, 1.0).expect("validated shape").sample(rng);
                (g - shape) / shape.sqrt()
            }
        }
    }
}

/// Skewed polynomial bump `f(u) = s^rise (1 − s)^fall`, `s = u/width`, on
/// `[0, width]`. It is `C^{min(rise, fall) − 1}`; unequal exponents make it
/// asymmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    pub width: f64,
    pub rise: u32,
    pub fall: u32,
}

impl Kernel {
    /// `f^{(order)}` at `u = s·width` by Leibniz's rule on the product form;
    /// a monomial expansion loses all accuracy for steep kernels.
    fn shape(&self, order: u32, s: f64) -> f64 {
        let (p, q) = (self.rise as i32, self.fall as i32);
        let n = order as i32;
        let falling = |m: i32, j: i32| (0..j).map(|i| (m - i) as f64).product::<f64>();
        let mut acc = 0.0;
        let mut binom = 1.0;
        for j in 0..=n {
            if j <= p && n - j <= q {
                let sign = if (n - j) % 2 == 0 { 1.0 } else { -1.0 };
                acc += sign * binom * falling(p, j) * falling(q, n - j) * s.powi(p - j) * (1.0 - s).powi(q - n + j);
            }
            binom = binom * (n - j) as f64 / (j + 1) as f64;
        }
        acc / self.width.powi(n)
    }

    /// Gauss order exact for products of `power` factors of `f^{(order)}`.
    fn rule_order(&self, power: u32) -> usize {
        ((self.rise + self.fall) as usize * power as usize) / 2 + 2
    }

    /// `f^{(order)}(u)` for `u ∈ [0, width]`, zero outside.
    pub fn eval(&self, u: f64, order: u32) -> f64 {
        if !(0.0..=self.width).contains(&u) {
            return 0.0;
        }
        self.shape(order, u / self.width)
    }

    /// `∫ (f^{(order)})^power du` over the support, exact for polynomials.
    pub fn power_integral(&self, order: u32, power: i32) -> f64 {
        let (x, w) = gauss_legendre(self.rule_order(power as u32).max(4));
        let half = 0.5 * self.width;
        x.iter().zip(&w).map(|(xi, wi)| wi * self.shape(order, 0.5 * (xi + 1.0)).powi(power)).sum::<f64>() * half
    }

    /// `∫ f^{(a)}(u) f^{(b)}(u + y) du`.
    pub fn correlation(&self, a: u32, b: u32, y: f64) -> f64 {
        let lo = 0f64.max(-y);
        let hi = self.width.min(self.width - y);
        if hi <= lo {
            return 0.0;
        }
        let (x, w) = gauss_legendre(self.rule_order(2));
        let half = 0.5 * (hi - lo);
        x.iter()
            .zip(&w)
            .map(|(xi, wi)| {
                let u = lo + half * (xi + 1.0);
                wi * self.shape(a, u / self.width) * self.shape(b, (u + y) / self.width)
            })
            .sum::<f64>()
            * half
    }

    /// `|∫ f^{(order)}(u) e^{−iku} du|²`.
    pub fn fourier_power(&self, order: u32, k: f64) -> f64 {
        // Each panel spans at most half a period; the rule order covers the
        // polynomial degree plus a degree-26 fit of the exponential there.
        let panels = ((k.abs() * self.width / std::f64::consts::PI).ceil() as usize + 2).max(4);
        let rule = self.rule_order(1) + 14;
        let f = |u: f64| self.shape(order, u / self.width);
        let re = composite_gauss(&|u| f(u) * (k * u).cos(), 0.0, self.width, panels, rule);
        let im = composite_gauss(&|u| f(u) * (k * u).sin(), 0.0, self.width, panels, rule);
        re * re + im * im
    }
}

/// Statistical description of a bottom process.
#[derive(Clone, Debug, PartialEq)]
pub enum ProcessSpec {
    /// `β ≡ 0`.
    Flat,
    /// Gaussian with covariance `σ² exp(−y²/(2ℓ²))`.
    GaussianSpectral { sigma: f64, ell: f64 },
    /// `β(x) = Σₙ A f(x − nΔ − U) ξₙ`, with `A` chosen so that `E β² = σ²`.
    SkewedMA { sigma: f64, ell: f64, kernel: Kernel, spacing: f64, innovation: Innovation },
    /// `β = ∂ₓγ` for `γ` drawn from `inner`.
    DerivedDerivative { inner: Box<ProcessSpec> },
}

impl ProcessSpec {
    pub fn derived(inner: ProcessSpec) -> Self {
        ProcessSpec::DerivedDerivative { inner: Box::new(inner) }
    }

    /// The non-derivative base family and the number of derivatives taken.
    pub fn base(&self) -> (&ProcessSpec, u32) {
        match self {
            ProcessSpec::DerivedDerivative { inner } => {
                let (b, r) = inner.base();
                (b, r + 1)
            }
            other => (other, 0),
        }
    }

    pub fn derivative_order(&self) -> u32 {
        self.base().1
    }

    /// Amplitude `σ` of the base family (zero for the flat bottom).
    pub fn amplitude(&self) -> f64 {
        match self.base().0 {
            ProcessSpec::GaussianSpectral { sigma, .. } | ProcessSpec::SkewedMA { sigma, .. } => *sigma,
            _ => 0.0,
        }
    }

    /// Correlation length `ℓ` (1 for the flat bottom).
    pub fn correlation_length(&self) -> f64 {
        match self.base().0 {
            ProcessSpec::GaussianSpectral { ell, .. } | ProcessSpec::SkewedMA { ell, .. } => *ell,
            _ => 1.0,
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.base().0, ProcessSpec::Flat)
    }

    pub fn validate(&self) -> Result<(), BottomError> {
        let bad = |m: &str| Err(BottomError::InvalidSpec(m.to_string()));
        let order = self.derivative_order();
        match self.base().0 {
            ProcessSpec::Flat => Ok(()),
            ProcessSpec::GaussianSpectral { sigma, ell } => {
                if !(*sigma > 0.0 && *ell > 0.0 && sigma.is_finite() && ell.is_finite()) {
                    return bad("sigma and ell must be positive");
                }
                Ok(())
            }
            ProcessSpec::SkewedMA { sigma, ell, kernel, spacing, innovation } => {
                if !(*sigma > 0.0 && *ell > 0.0 && *spacing > 0.0 && kernel.width > 0.0) {
                    return bad("sigma, ell, spacing and kernel width must be positive");
                }
                if kernel.rise.min(kernel.fall) < 3 + order {
                    return bad("kernel is not smooth enough for the requested derivative order");
                }
                if let Innovation::Gamma { shape } = innovation {
                    if !(*shape > 0.0) {
                        return bad("gamma shape must be positive");
                    }
                }
                if kernel.width / spacing > MAX_KERNEL_SPAN {
                    return Err(BottomError::KernelTooWide(kernel.width / spacing));
                }
                Ok(())
            }
            ProcessSpec::DerivedDerivative { .. } => unreachable!(),
        }
    }

    fn lattice_amplitude(sigma: f64, kernel: &Kernel, spacing: f64) -> f64 {
        sigma * (spacing / kernel.power_integral(0, 2)).sqrt()
    }

    /// Analytic covariance of `β`.
    pub fn covariance(&self) -> Covariance {
        let order = self.derivative_order();
        match self.base().0 {
            ProcessSpec::Flat => Covariance::Zero,
            ProcessSpec::GaussianSpectral { sigma, ell } => Covariance::Gaussian { variance: sigma * sigma, ell: *ell, order },
            ProcessSpec::SkewedMA { sigma, kernel, spacing, .. } => Covariance::Lattice {
                kernel: kernel.clone(),
                amplitude: Self::lattice_amplitude(*sigma, kernel, *spacing),
                spacing: *spacing,
                order,
            },
            ProcessSpec::DerivedDerivative { .. } => unreachable!(),
        }
    }

    /// Exact `E((∂ₓβ)³)`.
    pub fn third_derivative_moment(&self) -> f64 {
        let order = self.derivative_order();
        match self.base().0 {
            ProcessSpec::SkewedMA { sigma, kernel, spacing, innovation, .. } => {
                let a = Self::lattice_amplitude(*sigma, kernel, *spacing);
                innovation.third_moment() * a.powi(3) / spacing * kernel.power_integral(order + 1, 3)
            }
            _ => 0.0,
        }
    }

    /// Exact statistics (all standard errors zero).
    pub fn analytic_stats(&self) -> ProcessStats {
        let rho = self.covariance();
        let s2 = rho.spectrum(0.0).max(0.0);
        ProcessStats {
            m2: Estimate::exact(rho.value(0.0)),
            d2: Estimate::exact(rho.derivative_variance()),
            d3: Estimate::exact(self.third_derivative_moment()),
            sigma_beta_sq: Estimate::exact(s2),
            sigma_beta: Estimate::exact(s2.sqrt()),
            rho,
        }
    }
}

/// Covariance function `ρ(y) = E β(x)β(x + y)` and spectrum
/// `S(k) = ∫ ρ(y) e^{−iky} dy`.
#[derive(Clone, Debug, PartialEq)]
pub enum Covariance {
    Zero,
    /// `order` derivatives of a field with covariance `variance·exp(−y²/(2ℓ²))`.
    Gaussian { variance: f64, ell: f64, order: u32 },
    /// `order` derivatives of the lattice moving average with kernel `amplitude·f`.
    Lattice { kernel: Kernel, amplitude: f64, spacing: f64, order: u32 },
    /// Estimated `ρ̂` on lags `j·lag_spacing`, `j = 0..values.len()`, zero beyond.
    Tabulated { lag_spacing: f64, values: Vec<f64> },
}

/// Probabilists' Hermite polynomial `He_n(z)`.
fn hermite_he(n: u32, z: f64) -> f64 {
    let (mut a, mut b) = (1.0, z);
    if n == 0 {
        return a;
    }
    for k in 1..n {
        let c = z * b - k as f64 * a;
        a = b;
        b = c;
    }
    b
}

impl Covariance {
    pub fn value(&self, y: f64) -> f64 {
        match self {
            Covariance::Zero => 0.0,
            Covariance::Gaussian { variance, ell, order } => {
                let z = y / ell;
                let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
                sign * variance * hermite_he(2 * order, z) * (-0.5 * z * z).exp() / ell.powi(2 * *order as i32)
            }
            Covariance::Lattice { kernel, amplitude, spacing, order } => {
                amplitude * amplitude / spacing * kernel.correlation(*order, *order, y)
            }
            Covariance::Tabulated { lag_spacing, values } => {
                let u = y.abs() / lag_spacing;
                let j = u.floor() as usize;
                if j + 1 >= values.len() {
                    return if j + 1 == values.len() && u == j as f64 { values[j] } else { 0.0 };
                }
                let t = u - j as f64;
                values[j] * (1.0 - t) + values[j + 1] * t
            }
        }
    }

    pub fn spectrum(&self, k: f64) -> f64 {
        match self {
            Covariance::Zero => 0.0,
            Covariance::Gaussian { variance, ell, order } => {
                k.powi(2 * *order as i32)
                    * variance
                    * ell
                    * (2.0 * std::f64::consts::PI).sqrt()
                    * (-0.5 * k * k * ell * ell).exp()
            }
            Covariance::Lattice { kernel, amplitude, spacing, order } => {
                k.powi(2 * *order as i32) * amplitude * amplitude / spacing * kernel.fourier_power(0, k)
            }
            Covariance::Tabulated { lag_spacing, values } => {
                let last = values.len() - 1;
                let mut s = values[0];
                for (j, v) in values.iter().enumerate().skip(1) {
                    let w = if j == last { 1.0 } else { 2.0 };
                    s += w * v * (k * j as f64 * lag_spacing).cos();
                }
                s * lag_spacing
            }
        }
    }

    /// Wavenumber beyond which the spectrum is negligible for quadrature.
    pub fn spectral_cutoff(&self) -> f64 {
        match self {
            Covariance::Zero => 1.0,
            Covariance::Gaussian { ell, order, .. } => (12.0 + 2.0 * *order as f64) / ell,
            Covariance::Lattice { kernel, .. } => 400.0 / kernel.width,
            Covariance::Tabulated { lag_spacing, .. } => std::f64::consts::PI / lag_spacing,
        }
    }

    /// `E((∂ₓβ)²) = −ρ''(0)`.
    pub fn derivative_variance(&self) -> f64 {
        match self {
            Covariance::Zero => 0.0,
            Covariance::Gaussian { variance, ell, order } => {
                Covariance::Gaussian { variance: *variance, ell: *ell, order: order + 1 }.value(0.0)
            }
            Covariance::Lattice { kernel, amplitude, spacing, order } => {
                amplitude * amplitude / spacing * kernel.power_integral(order + 1, 2)
            }
            Covariance::Tabulated { lag_spacing, values } => {
                if values.len() < 3 {
                    return 0.0;
                }
                -(2.0 * values[1] - 2.0 * values[0]) / (lag_spacing * lag_spacing)
            }
        }
    }

    /// `2∫₀^∞ ρ`, by the analytic spectrum at zero.
    pub fn sigma_sq(&self) -> f64 {
        self.spectrum(0.0)
    }

    /// `∫ ρ(y + s) dy` over the real line by quadrature of `ρ`.
    pub fn shifted_integral(&self, shift: f64, support: f64) -> f64 {
        adaptive_simpson(&|y| self.value(y + shift), -support - shift.abs(), support + shift.abs(), 1e-12)
            .unwrap_or(f64::NAN)
    }
}

/// Sample statistics of a bottom process.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessStats {
    pub rho: Covariance,
    pub sigma_beta: Estimate,
    pub sigma_beta_sq: Estimate,
    pub m2: Estimate,
    pub d2: Estimate,
    pub d3: Estimate,
}

/// One sampled bottom path on the fine periodic grid.
#[derive(Clone, Debug)]
pub struct BottomRealization {
    pub spec: ProcessSpec,
    pub seed: u64,
    pub grid: SpectralGrid,
    field: PeriodicHermite5,
    cumulative: Vec<f64>,
    third: Vec<f64>,
}

impl BottomRealization {
    /// Builds a realization from exact nodal jets.
    pub fn from_nodal(
        spec: ProcessSpec,
        seed: u64,
        grid: SpectralGrid,
        value: Vec<f64>,
        first: Vec<f64>,
        second: Vec<f64>,
    ) -> Self {
        let third = grid.derivative_values(&second, 1).unwrap_or_else(|_| vec![0.0; second.len()]);
        let field = PeriodicHermite5::new(grid.length(), value, first, second);
        let cumulative = field.cumulative_nodes();
        Self { spec, seed, grid, field, cumulative, third }
    }

    /// Replaces the spectral third derivative with exact nodal values.
    pub fn with_third(mut self, third: Vec<f64>) -> Self {
        assert_eq!(third.len(), self.third.len());
        self.third = third;
        self
    }

    /// Constant bottom `β ≡ c` (used for transport checks).
    pub fn constant(grid: SpectralGrid, c: f64) -> Self {
        let n = grid.n();
        Self::from_nodal(ProcessSpec::Flat, 0, grid, vec![c; n], vec![0.0; n], vec![0.0; n])
    }

    pub fn values(&self) -> &[f64] {
        self.field.nodal_values()
    }

    pub fn derivative(&self) -> &[f64] {
        self.field.nodal_first()
    }

    pub fn second_derivative(&self) -> &[f64] {
        self.field.nodal_second()
    }

    /// Nodal `∂ₓ³β`: exact for sampled paths, spectral otherwise.
    pub fn third_derivative(&self) -> &[f64] {
        &self.third
    }

    pub fn period(&self) -> f64 {
        self.grid.length()
    }

    pub fn mean(&self) -> f64 {
        self.values().iter().sum::<f64>() / self.values().len() as f64
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.field.value(x)
    }

    /// `(β(x), ∂ₓβ(x))`.
    #[inline]
    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        self.field.value_and_first(x)
    }

    #[inline]
    pub fn jet(&self, x: f64) -> Jet {
        self.field.jet(x)
    }

    /// `∫_a^b β(s) ds` (exact for the interpolant, any real `a`, `b`).
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.field.antiderivative(&self.cumulative, b) - self.field.antiderivative(&self.cumulative, a)
    }

    /// Realization with a constant added to `β`.
    pub fn shifted(&self, offset: f64) -> Self {
        let v = self.values().iter().map(|b| b + offset).collect();
        Self::from_nodal(
            self.spec.clone(),
            self.seed,
            self.grid.clone(),
            v,
            self.derivative().to_vec(),
            self.second_derivative().to_vec(),
        )
        .with_third(self.third.clone())
    }

    /// Realization `x ↦ β(x + k·Δx)` for an integer node shift `k`.
    pub fn translated(&self, nodes: i64) -> Self {
        let n = self.values().len() as i64;
        let roll = |v: &[f64]| -> Vec<f64> { (0..n).map(|j| v[(j + nodes).rem_euclid(n) as usize]).collect() };
        Self::from_nodal(
            self.spec.clone(),
            self.seed,
            self.grid.clone(),
            roll(self.values()),
            roll(self.derivative()),
            roll(self.second_derivative()),
        )
        .with_third(roll(&self.third))
    }
}

fn check_geometry(spec: &ProcessSpec, grid: &SpectralGrid) -> Result<(), BottomError> {
    if spec.is_flat() {
        return Ok(());
    }
    let ell = spec.correlation_length();
    let ratio = grid.length() / ell;
    if ratio < MIN_PERIOD_RATIO {
        return Err(BottomError::PeriodRatio(ratio));
    }
    let ppl = ell / grid.spacing();
    if ppl < MIN_POINTS_PER_ELL * (1.0 - 1e-12) {
        return Err(BottomError::Underresolved(ppl));
    }
    Ok(())
}

/// Draws one realization; deterministic in `(spec, seed)`.
pub fn sample(spec: &ProcessSpec, l_fine: f64, n_fine: usize, seed: u64) -> Result<BottomRealization, BottomError> {
    spec.validate()?;
    let grid = SpectralGrid::new(l_fine, n_fine)?;
    check_geometry(spec, &grid)?;
    let order = spec.derivative_order();
    let n = n_fine;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (value, first, second, third) = match spec.base().0 {
        ProcessSpec::Flat => (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]),
        ProcessSpec::GaussianSpectral { .. } => {
            let rho = spec.covariance();
            let base = Covariance::Gaussian {
                variance: spec.amplitude().powi(2),
                ell: spec.correlation_length(),
                order: 0,
            };
            let _ = rho;
            let ks = grid.wavenumbers().to_vec();
            let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
            let z0: f64 = StandardNormal.sample(&mut rng);
            coeffs[0] = Complex64::new(z0 * (base.spectrum(0.0) / l_fine).sqrt(), 0.0);
            for m in 1..n / 2 {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                let amp = (base.spectrum(ks[m]) / (2.0 * l_fine)).sqrt();
                let c = Complex64::new(a * amp, b * amp);
                coeffs[m] = c;
                coeffs[n - m] = c.conj();
            }
            let synth = |extra: u32| -> Result<Vec<f64>, SpectralError> {
                let mut c = coeffs.clone();
                for (j, cj) in c.iter_mut().enumerate() {
                    *cj *= Complex64::new(0.0, ks[j]).powu(order + extra);
                }
                let scaled: Vec<Complex64> = c.into_iter().map(|v| v * n as f64).collect();
                grid.inverse_real(scaled)
            };
            (synth(0)?, synth(1)?, synth(2)?, synth(3)?)
        }
        ProcessSpec::SkewedMA { sigma, kernel, spacing, innovation, .. } => {
            let lattice = l_fine / spacing;
            let count = lattice.round();
            if (lattice - count).abs() > 1e-9 * count.max(1.0) {
                return Err(BottomError::LatticeMismatch { period: l_fine, spacing: *spacing });
            }
            let count = count as usize;
            let amp = ProcessSpec::lattice_amplitude(*sigma, kernel, *spacing);
            let shift: f64 = rng.gen::<f64>() * spacing;
            let xi: Vec<f64> = (0..count).map(|_| innovation.sample(&mut rng)).collect();
            let dx = grid.spacing();
            let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
            for (m, &x) in xi.iter().enumerate() {
                let start = m as f64 * spacing + shift;
                let j0 = (start / dx).ceil() as i64;
                let j1 = ((start + kernel.width) / dx).floor() as i64;
                for j in j0..=j1 {
                    let s = (j as f64 * dx - start) / kernel.width;
                    if !(0.0..=1.0).contains(&s) {
                        continue;
                    }
                    let idx = j.rem_euclid(n as i64) as usize;
                    for d in 0..4 {
                        out[d][idx] += amp * x * kernel.shape(order + d as u32, s);
                    }
                }
            }
            let [v, f, s, t] = out;
            (v, f, s, t)
        }
        ProcessSpec::DerivedDerivative { .. } => unreachable!(),
    };
    Ok(BottomRealization::from_nodal(spec.clone(), seed, grid, value, first, second).with_third(third))
}

/// Spatial-average statistics of one realization.
///
/// `σ̂²` is `2∫₀^{max_lag} ρ̂` with `ρ̂` the circular autocovariance; it is
/// written as the mean of `β_i·(w ∗ β)_i` with `w` the trapezoid weights on
/// `|lag| ≤ max_lag`, so every estimate is a spatial mean and shares one
/// block bootstrap. Blocks are `max(10ℓ, max_lag)` long.
pub fn estimate_stats(real: &BottomRealization, max_lag: f64) -> Result<ProcessStats, BottomError> {
    let ell = real.spec.correlation_length();
    let period = real.period();
    if max_lag < 10.0 * ell * (1.0 - 1e-12) || max_lag > 0.5 * period {
        return Err(BottomError::MaxLag { max_lag, min: 10.0 * ell, max: 0.5 * period });
    }
    let grid = &real.grid;
    let n = grid.n();
    let dx = grid.spacing();
    let beta = real.values();
    let dbeta = real.derivative();
    let lags = (max_lag / dx).floor() as usize;

    let spec_b = grid.forward(beta);
    let power: Vec<Complex64> = spec_b.iter().map(|c| Complex64::new(c.norm_sqr() / n as f64, 0.0)).collect();
    let auto = grid.inverse_complex(power);
    let rho_values: Vec<f64> = (0..=lags).map(|j| auto[j].re).collect();

    let mut weights = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..=lags {
        let w = if j == lags { 0.5 } else { 1.0 } * dx;
        weights[j] += w;
        if j > 0 {
            weights[n - j] += w;
        }
    }
    let wh = grid.forward(&weights.iter().map(|c| c.re).collect::<Vec<_>>());
    let conv_coeffs: Vec<Complex64> = spec_b.iter().zip(&wh).map(|(a, b)| a * b).collect();
    let smoothed: Vec<f64> = grid.inverse_complex(conv_coeffs).into_iter().map(|c| c.re).collect();

    let series = vec![
        beta.iter().map(|b| b * b).collect::<Vec<_>>(),
        dbeta.iter().map(|d| d * d).collect(),
        dbeta.iter().map(|d| d * d * d).collect(),
        beta.iter().zip(&smoothed).map(|(b, s)| b * s).collect(),
    ];
    let block = ((10.0 * ell).max(max_lag) / dx).round() as usize;
    let est = block_bootstrap(&series, block, BOOTSTRAP_REPS, real.seed ^ 0x5eed_b007);
    let s2 = est[3];
    let sigma = s2.value.max(0.0).sqrt();
    let sigma_se = if sigma > 0.0 { s2.se / (2.0 * sigma) } else { s2.se.sqrt() };
    Ok(ProcessStats {
        rho: Covariance::Tabulated { lag_spacing: dx, values: rho_values },
        sigma_beta: Estimate { value: sigma, se: sigma_se },
        sigma_beta_sq: s2,
        m2: est[0],
        d2: est[1],
        d3: est[2],
    })
}

/// Batch-means estimate `σ̂_β²(W) = mean over blocks of (∫_block β)²/W`
/// for each window `W`, returned as `(W, σ̂_β)`.
///
/// Enough independent realizations are drawn (seeds `seed + i`) to supply at
/// least 4000 blocks of the largest window.
pub fn estimate_sigma_trend(spec: &ProcessSpec, windows: &[f64], seed: u64) -> Result<Vec<(f64, f64)>, BottomError> {
    spec.validate()?;
    if windows.is_empty() {
        return Ok(Vec::new());
    }
    let ell = spec.correlation_length();
    let w_max = windows.iter().cloned().fold(0.0, f64::max);
    let target_blocks = 4000.0;
    let mut n_fine = 1usize << 10;
    while (n_fine as f64) * ell / MIN_POINTS_PER_ELL < (64.0 * w_max).max(MIN_PERIOD_RATIO * ell) {
        n_fine <<= 1;
    }
    let l_fine = n_fine as f64 * ell / MIN_POINTS_PER_ELL;
    let reps = (target_blocks / (l_fine / w_max).floor()).ceil().max(1.0) as u64;
    let mut sums = vec![0.0; windows.len()];
    let mut counts = vec![0usize; windows.len()];
    for r in 0..reps {
        let real = sample(spec, l_fine, n_fine, seed.wrapping_add(r))?;
        for (i, &w) in windows.iter().enumerate() {
            let blocks = (l_fine / w).floor() as usize;
            for b in 0..blocks {
                let s = real.integral(b as f64 * w, (b + 1) as f64 * w);
                sums[i] += s * s / w;
                counts[i] += 1;
            }
        }
    }
    Ok(windows
        .iter()
        .enumerate()
        .map(|(i, &w)| (w, (sums[i] / counts[i].max(1) as f64).sqrt()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn skewed() -> ProcessSpec {
        ProcessSpec::SkewedMA {
            sigma: 1.0,
            ell: 1.0,
            kernel: Kernel { width: 4.0, rise: 4, fall: 8 },
            spacing: 1.0,
            innovation: Innovation::Exponential,
        }
    }

    #[test]
    fn kernel_power_integral_matches_quadrature() {
        let k = Kernel { width: 3.0, rise: 4, fall: 7 };
        let exact = k.power_integral(1, 3);
        let num = composite_gauss(&|u| k.eval(u, 1).powi(3), 0.0, 3.0, 64, 8);
        assert!((exact - num).abs() < 1e-9 * exact.abs(), "{exact} vs {num}");
        assert!(exact != 0.0);
    }

    #[test]
    fn gaussian_covariance_derivatives() {
        let c = Covariance::Gaussian { variance: 2.0, ell: 0.5, order: 1 };
        // −ρ''(0) of the base is 2/ℓ²
        assert!((c.value(0.0) - 8.0).abs() < 1e-12);
        assert!((c.derivative_variance() - 3.0 * 2.0 / 0.5f64.powi(4)).abs() < 1e-9);
    }

    #[test]
    fn ratio_constraint_enforced() {
        let spec = ProcessSpec::GaussianSpectral { sigma: 1.0, ell: 1.0 };
        assert!(matches!(sample(&spec, 40.0, 512, 1), Err(BottomError::PeriodRatio(_))));
        assert!(matches!(sample(&spec, 200.0, 256, 1), Err(BottomError::Underresolved(_))));
    }

    #[test]
    fn lattice_mismatch_rejected() {
        let spec = ProcessSpec::SkewedMA {
            sigma: 1.0,
            ell: 1.0,
            kernel: Kernel { width: 4.0, rise: 4, fall: 8 },
            spacing: 0.7,
            innovation: Innovation::Exponential,
        };
        assert!(matches!(sample(&spec, 128.0, 1024, 1), Err(BottomError::LatticeMismatch { .. })));
    }

    #[test]
    fn lattice_nodal_derivatives_are_exact() {
        let real = sample(&skewed(), 128.0, 1024, 11).unwrap();
        let h = 1e-4;
        for j in [3usize, 100, 517] {
            let x = real.grid.node(j);
            let fd = (real.eval(x + h) - real.eval(x - h)) / (2.0 * h);
            assert!((fd - real.derivative()[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn lattice_analytic_moments_consistent() {
        let s = skewed().analytic_stats();
        assert!((s.m2.value - 1.0).abs() < 1e-12);
        assert!(s.d3.value > 0.0 || s.d3.value < 0.0);
        let rho0 = s.rho.value(0.0);
        assert!((rho0 - 1.0).abs() < 1e-12);
    }
}
