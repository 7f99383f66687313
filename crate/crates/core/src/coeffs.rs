//! Effective constants of the long-wave models and the realization-dependent
//! coefficient fields `h_ε(X)`, `c_ε(X)`.

use crate::bottom::{BottomRealization, Covariance, ProcessStats};
use crate::quad::{adaptive_simpson, composite_gauss, doubling_gauss, QuadError};
use crate::spectral::{GridFunction, Multiplier, SpectralError, SpectralGrid};
use crate::stats::{block_bootstrap, Estimate};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CoeffError {
    #[error("invalid physical parameters: {0}")]
    Params(String),
    #[error("spectral quadrature for a_β failed: {0}")]
    Quadrature(#[from] QuadError),
    #[error("amplitude guard violated: σ·ε = {product:.4} ≥ h/4 = {limit:.4}")]
    AmplitudeGuard { product: f64, limit: f64 },
    #[error("coefficient field not positive at X = {x}")]
    NonPositive { x: f64 },
    #[error("fine realization of period {fine} does not cover the coarse window {coarse}/ε")]
    Coverage { fine: f64, coarse: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Mean depth, gravity and long-wave parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalParams {
    pub h: f64,
    pub g: f64,
    pub eps: f64,
}

impl PhysicalParams {
    pub fn new(h: f64, g: f64, eps: f64) -> Result<Self, CoeffError> {
        let p = Self { h, g, eps };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), CoeffError> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(CoeffError::Params(format!("depth h = {} must be positive", self.h)));
        }
        if !(self.g > 0.0 && self.g.is_finite()) {
            return Err(CoeffError::Params(format!("gravity g = {} must be positive", self.g)));
        }
        if !(self.eps > 0.0 && self.eps <= 0.25) {
            return Err(CoeffError::Params(format!("eps = {} outside (0, 0.25]", self.eps)));
        }
        Ok(())
    }

    /// Linear long-wave speed `√(gh)`.
    pub fn c0(&self) -> f64 {
        (self.g * self.h).sqrt()
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        Self { eps, ..*self }
    }

    /// Dispersion coefficient `c₁ = (h³/3)·√(g/(4h))`.
    pub fn c1(&self) -> f64 {
        self.h.powi(3) / 3.0 * (self.g / (4.0 * self.h)).sqrt()
    }

    /// Nonlinear coefficient `c₂ = ½·(g/(4h))^{1/4}`.
    pub fn c2(&self) -> f64 {
        0.5 * (self.g / (4.0 * self.h)).powf(0.25)
    }
}

/// Effective constants; estimated ones carry standard errors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveCoefficients {
    pub params: PhysicalParams,
    pub c1: f64,
    pub c2: f64,
    pub a_beta: Estimate,
    pub a_kdv: Estimate,
    pub b: Estimate,
    pub sigma_beta: Estimate,
}

impl EffectiveCoefficients {
    /// All corrections zero (flat bottom).
    pub fn flat(params: PhysicalParams) -> Self {
        Self::from_parts(params, Estimate::default(), Estimate::default(), Estimate::default(), Estimate::default(), Estimate::default())
    }

    /// Evaluates `a_KdV = a_β/(2h) + E(β²)/(4h²) + 3c₁E((∂ₓβ)²)/(8h²√(gh))` and
    /// `b = −7c₁E((∂ₓβ)³)/(64h³)`. Standard errors combine in quadrature.
    pub fn from_parts(
        params: PhysicalParams,
        a_beta: Estimate,
        m2: Estimate,
        d2: Estimate,
        d3: Estimate,
        sigma_beta: Estimate,
    ) -> Self {
        let (h, c0) = (params.h, params.c0());
        let c1 = params.c1();
        let wa = 1.0 / (2.0 * h);
        let wm = 1.0 / (4.0 * h * h);
        let wd = 3.0 * c1 / (8.0 * h * h * c0);
        let wb = -7.0 * c1 / (64.0 * h.powi(3));
        let a_kdv = Estimate {
            value: wa * a_beta.value + wm * m2.value + wd * d2.value,
            se: ((wa * a_beta.se).powi(2) + (wm * m2.se).powi(2) + (wd * d2.se).powi(2)).sqrt(),
        };
        // `+ 0.0` turns a signed zero into `0`.
        let b = Estimate { value: wb * d3.value + 0.0, se: wb.abs() * d3.se };
        Self { params, c1, c2: params.c2(), a_beta, a_kdv, b, sigma_beta }
    }

    /// `c_ε` without the fine-scale term: `√(gh)(1 − ε²a_KdV)`.
    pub fn mean_speed(&self) -> f64 {
        let p = &self.params;
        p.c0() * (1.0 - p.eps * p.eps * self.a_kdv.value)
    }
}

/// `a_β = (1/2π)∫ k tanh(hk) S(k) dk` by adaptive quadrature of the spectrum.
pub fn a_beta_from_cov(rho: &Covariance, h: f64) -> Result<f64, CoeffError> {
    a_beta_with_symbol(rho, &|k: f64| k * (h * k).tanh())
}

/// As [`a_beta_from_cov`] with an arbitrary even symbol `m(k)` in place of
/// `k tanh(hk)`.
pub fn a_beta_with_symbol(rho: &Covariance, symbol: &dyn Fn(f64) -> f64) -> Result<f64, CoeffError> {
    if matches!(rho, Covariance::Zero) {
        return Ok(0.0);
    }
    let cutoff = rho.spectral_cutoff();
    let f = |k: f64| symbol(k) * rho.spectrum(k);
    let crude = composite_gauss(&f, 0.0, cutoff, 64, 8);
    let tol = 1e-11 * crude.abs().max(1e-300);
    // High-degree kernels put round-off noise above `tol`; the smooth
    // spectrum then converges under panel doubling instead.
    let v = match adaptive_simpson(&f, 0.0, cutoff, tol) {
        Err(QuadError::NotConverged { .. }) => doubling_gauss(&f, 0.0, cutoff, 1e-10)?,
        other => other?,
    };
    Ok(v / std::f64::consts::PI)
}

/// Spatial average of `β·(D tanh(hD))β` over one realization, with a block
/// bootstrap standard error (blocks of `max(10ℓ, 10h)`).
pub fn a_beta_spatial(real: &BottomRealization, h: f64) -> Result<Estimate, CoeffError> {
    let f = GridFunction::new(real.grid.clone(), real.values().to_vec())?;
    let m = Multiplier::d_tanh(h);
    let tf = crate::spectral::apply_multiplier(&f, &m)?;
    let prod: Vec<f64> = f.values.iter().zip(&tf.values).map(|(a, b)| a * b).collect();
    let block_len = (10.0 * real.spec.correlation_length()).max(10.0 * h);
    let block = (block_len / real.grid.spacing()).round() as usize;
    Ok(block_bootstrap(&[prod], block, 400, real.seed ^ 0xab57)[0])
}

/// Effective coefficients from process statistics.
///
/// `a_β` is evaluated on `stats.rho`. When `rho` is an estimate its SE is
/// taken as `|a_β|·se(m2)/m2`, since `a_β` is linear in the covariance
/// amplitude.
pub fn theorem57_constants(stats: &ProcessStats, params: &PhysicalParams) -> Result<EffectiveCoefficients, CoeffError> {
    params.validate()?;
    let a = a_beta_from_cov(&stats.rho, params.h)?;
    let rel = if stats.m2.value != 0.0 { stats.m2.se / stats.m2.value.abs() } else { 0.0 };
    let a_beta = Estimate { value: a, se: a.abs() * rel };
    Ok(EffectiveCoefficients::from_parts(*params, a_beta, stats.m2, stats.d2, stats.d3, stats.sigma_beta))
}

/// Coefficient fields sampled on the coarse `X` grid.
#[derive(Clone, Debug)]
pub struct CoefficientFields {
    pub grid: SpectralGrid,
    /// `h − εβ(X/ε) − ε²a_β`.
    pub h_eps: Vec<f64>,
    /// `√(gh)(1 − (ε/2h)β(X/ε) − ε²a_KdV)`.
    pub c_eps: Vec<f64>,
    /// Boussinesq effective depth `h − ε^{3/2}σ_β∂_X B̂ − ε²a_β` with the
    /// realization-coupled path `B̂ = Y_ε`; since `ε^{3/2}σ_β∂_X Y_ε = εβ(X/ε)`
    /// it coincides with `h_eps`.
    pub h0: Vec<f64>,
}

/// Samples `h_ε`, `c_ε` and `h0` at the coarse nodes.
pub fn coefficient_fields(
    real: &BottomRealization,
    coeffs: &EffectiveCoefficients,
    params: &PhysicalParams,
    coarse: &SpectralGrid,
) -> Result<CoefficientFields, CoeffError> {
    params.validate()?;
    let eps = params.eps;
    let sd = real.spec.covariance().value(0.0).max(0.0).sqrt();
    if sd * eps >= params.h / 4.0 {
        return Err(CoeffError::AmplitudeGuard { product: sd * eps, limit: params.h / 4.0 });
    }
    if coarse.length() / eps > real.period() * (1.0 + 1e-9) {
        return Err(CoeffError::Coverage { fine: real.period(), coarse: coarse.length() });
    }
    let c0 = params.c0();
    let n = coarse.n();
    let mut h_eps = Vec::with_capacity(n);
    let mut c_eps = Vec::with_capacity(n);
    for j in 0..n {
        let x = coarse.node(j);
        let beta = real.eval(x / eps);
        let hv = params.h - eps * beta - eps * eps * coeffs.a_beta.value;
        let cv = c0 * (1.0 - eps / (2.0 * params.h) * beta - eps * eps * coeffs.a_kdv.value);
        if !(hv > 0.0 && cv > 0.0) {
            return Err(CoeffError::NonPositive { x });
        }
        h_eps.push(hv);
        c_eps.push(cv);
    }
    Ok(CoefficientFields { grid: coarse.clone(), h0: h_eps.clone(), h_eps, c_eps })
}

/// Pointwise `c_ε(X)` and `∂_X c_ε(X)` for a realization (the fine-scale
/// derivative carries the factor `1/ε`).
#[derive(Clone, Debug)]
pub struct Speed<'a> {
    pub real: &'a BottomRealization,
    pub c0: f64,
    pub eps: f64,
    pub h: f64,
    pub a_kdv: f64,
}

impl<'a> Speed<'a> {
    pub fn new(real: &'a BottomRealization, coeffs: &EffectiveCoefficients) -> Self {
        let p = coeffs.params;
        Self { real, c0: p.c0(), eps: p.eps, h: p.h, a_kdv: coeffs.a_kdv.value }
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        let beta = self.real.eval(x / self.eps);
        self.c0 * (1.0 - self.eps / (2.0 * self.h) * beta - self.eps * self.eps * self.a_kdv)
    }

    /// `(c_ε(X), c_ε'(X))`.
    #[inline]
    pub fn value_and_slope(&self, x: f64) -> (f64, f64) {
        let (beta, dbeta) = self.real.eval_with_derivative(x / self.eps);
        let k = self.c0 * self.eps / (2.0 * self.h);
        (
            self.c0 * (1.0 - self.eps * self.eps * self.a_kdv) - k * beta,
            -k * dbeta / self.eps,
        )
    }
}
