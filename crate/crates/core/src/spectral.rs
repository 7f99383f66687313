//! Periodic 1-D spectral grids and Fourier multipliers.
//!
//! Conventions: `D = -i ∂_X`, so a multiplier `m(D)` acts on the Fourier
//! coefficient at wavenumber `k` by `m(k)`. The bottom-correction operators
//! `L₁`, `L₂` contain one bare `D` acting on real data; it is applied as the
//! real derivative `∂_X`, which drops a constant factor `-i` from the
//! complex-valued operator (see [`apply_l1`]).

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Relative size of the imaginary part tolerated after an inverse transform.
pub const IMAG_TOLERANCE: f64 = 1e-12;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SpectralError {
    #[error("grid size {0} must be even and at least 8")]
    BadSize(usize),
    #[error("grid length {0} must be finite and positive")]
    BadLength(f64),
    #[error("input has {0} values, grid has {1} nodes")]
    LengthMismatch(usize, usize),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("multiplier `{name}` is not finite at k = {k}")]
    SymbolUndefined { name: String, k: f64 },
    #[error("imaginary residue {residue:e} exceeds tolerance {tolerance:e}")]
    ImaginaryResidue { residue: f64, tolerance: f64 },
    #[error("derivative order {0} outside 1..=4")]
    BadOrder(u32),
    #[error("operands live on different grids")]
    GridMismatch,
}

struct GridInner {
    length: f64,
    n: usize,
    modes: Vec<i64>,
    wavenumbers: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Equispaced periodic grid `X_j = jL/n` with its FFT plans.
///
/// Cloning is cheap; the plans are shared and immutable.
#[derive(Clone)]
pub struct SpectralGrid {
    inner: Arc<GridInner>,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("length", &self.inner.length)
            .field("n", &self.inner.n)
            .finish()
    }
}

impl PartialEq for SpectralGrid {
    fn eq(&self, other: &Self) -> bool {
        self.inner.n == other.inner.n && self.inner.length == other.inner.length
    }
}

impl SpectralGrid {
    pub fn new(length: f64, n: usize) -> Result<Self, SpectralError> {
        if n < 8 || n % 2 != 0 {
            return Err(SpectralError::BadSize(n));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(SpectralError::BadLength(length));
        }
        let half = (n / 2) as i64;
        let modes: Vec<i64> = (0..n as i64)
            .map(|j| if j < half { j } else { j - n as i64 })
            .collect();
        let wavenumbers = modes
            .iter()
            .map(|&m| 2.0 * std::f64::consts::PI * m as f64 / length)
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(Self {
            inner: Arc::new(GridInner { length, n, modes, wavenumbers, forward, inverse }),
        })
    }

    pub fn length(&self) -> f64 {
        self.inner.length
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    pub fn spacing(&self) -> f64 {
        self.inner.length / self.inner.n as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n()).map(|j| self.node(j)).collect()
    }

    /// Symmetric integer frequencies; the Nyquist index carries `-n/2`.
    pub fn modes(&self) -> &[i64] {
        &self.inner.modes
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.inner.wavenumbers
    }

    pub fn nyquist_index(&self) -> usize {
        self.inner.n / 2
    }

    /// Unnormalized forward DFT of real samples.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.inner.forward.process(&mut buf);
        buf
    }

    /// Inverse DFT (normalized by `1/n`) without the realness check.
    pub fn inverse_complex(&self, mut coeffs: Vec<Complex64>) -> Vec<Complex64> {
        self.inner.inverse.process(&mut coeffs);
        let scale = 1.0 / self.n() as f64;
        for c in coeffs.iter_mut() {
            *c *= scale;
        }
        coeffs
    }

    /// Inverse DFT returning the real part.
    ///
    /// The imaginary residue must stay below `IMAG_TOLERANCE` times the
    /// output max-norm, with an absolute floor at the round-off level of the
    /// coefficients.
    pub fn inverse_real(&self, coeffs: Vec<Complex64>) -> Result<Vec<f64>, SpectralError> {
        let floor = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max) * 1e-14;
        self.inverse_real_floor(coeffs, floor)
    }

    fn inverse_real_floor(&self, coeffs: Vec<Complex64>, floor: f64) -> Result<Vec<f64>, SpectralError> {
        let out = self.inverse_complex(coeffs);
        let re_max = out.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
        let im_max = out.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
        let tolerance = IMAG_TOLERANCE * re_max + floor;
        if !(im_max <= tolerance) {
            return Err(SpectralError::ImaginaryResidue { residue: im_max, tolerance });
        }
        Ok(out.into_iter().map(|c| c.re).collect())
    }

    fn check(&self, values: &[f64]) -> Result<(), SpectralError> {
        if values.len() != self.n() {
            return Err(SpectralError::LengthMismatch(values.len(), self.n()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SpectralError::NonFinite);
        }
        Ok(())
    }

    /// Multiplies each coefficient by `symbol(index, k)` and transforms back.
    pub fn filter<F>(&self, values: &[f64], symbol: F) -> Result<Vec<f64>, SpectralError>
    where
        F: Fn(usize, f64) -> Complex64,
    {
        self.check(values)?;
        let mut coeffs = self.forward(values);
        // Round-off in the input coefficients, amplified by the largest
        // symbol, bounds the imaginary residue of a real operator.
        let (mut c_max, mut s_max) = (0.0f64, 0.0f64);
        for (j, c) in coeffs.iter_mut().enumerate() {
            let s = symbol(j, self.inner.wavenumbers[j]);
            c_max = c_max.max(c.norm());
            s_max = s_max.max(s.norm());
            *c *= s;
        }
        self.inverse_real_floor(coeffs, 1e-14 * c_max * s_max)
    }

    /// Spectral derivative of raw samples; see [`derivative`].
    pub fn derivative_values(&self, values: &[f64], order: u32) -> Result<Vec<f64>, SpectralError> {
        if !(1..=4).contains(&order) {
            return Err(SpectralError::BadOrder(order));
        }
        let nyq = self.nyquist_index();
        self.filter(values, |j, k| {
            if order % 2 == 1 && j == nyq {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, k).powu(order)
            }
        })
    }
}

/// Real samples on a [`SpectralGrid`].
#[derive(Clone, Debug)]
pub struct GridFunction {
    pub grid: SpectralGrid,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: SpectralGrid, values: Vec<f64>) -> Result<Self, SpectralError> {
        grid.check(&values)?;
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &SpectralGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().into_iter().map(f).collect();
        Self { grid: grid.clone(), values }
    }

    pub fn zeros(grid: &SpectralGrid) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.n()] }
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Periodic trapezoid (rectangle) rule for `∫ f dX` over one period.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.spacing()
    }

    /// Discrete inner product `Σ f g ΔX`.
    pub fn inner(&self, other: &GridFunction) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>() * self.grid.spacing()
    }

    fn pointwise(&self, other: &GridFunction, op: impl Fn(f64, f64) -> f64) -> Result<Self, SpectralError> {
        if self.grid != other.grid {
            return Err(SpectralError::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| op(a, b)).collect();
        Ok(Self { grid: self.grid.clone(), values })
    }

    pub fn mul(&self, other: &GridFunction) -> Result<Self, SpectralError> {
        self.pointwise(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| v * s).collect() }
    }
}

/// Real Fourier symbol `m(k)` with a label.
#[derive(Clone)]
pub struct Multiplier {
    pub name: String,
    symbol: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for Multiplier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Multiplier({})", self.name)
    }
}

impl Multiplier {
    pub fn new(name: impl Into<String>, symbol: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), symbol: Arc::new(symbol) }
    }

    pub fn eval(&self, k: f64) -> f64 {
        (self.symbol)(k)
    }

    /// `D tanh(hD)`, the flat-bottom Dirichlet–Neumann symbol.
    pub fn d_tanh(h: f64) -> Self {
        Self::new(format!("D tanh({h}D)"), move |k| k * (h * k).tanh())
    }

    /// `sech(hD)`; underflows cleanly to zero at large `|hk|`.
    pub fn sech(h: f64) -> Self {
        Self::new(format!("sech({h}D)"), move |k| 1.0 / (h * k).cosh())
    }

    pub fn d2() -> Self {
        Self::new("D^2", |k| k * k)
    }

    pub fn d4() -> Self {
        Self::new("D^4", |k| k.powi(4))
    }
}

/// `m(D) f`.
pub fn apply_multiplier(f: &GridFunction, m: &Multiplier) -> Result<GridFunction, SpectralError> {
    let symbols: Vec<f64> = f.grid.wavenumbers().iter().map(|&k| m.eval(k)).collect();
    if let Some((j, _)) = symbols.iter().enumerate().find(|(_, s)| !s.is_finite()) {
        return Err(SpectralError::SymbolUndefined { name: m.name.clone(), k: f.grid.wavenumbers()[j] });
    }
    let values = f.grid.filter(&f.values, |j, _| Complex64::new(symbols[j], 0.0))?;
    Ok(GridFunction { grid: f.grid.clone(), values })
}

/// Spectral `∂_X^order f`, `1 ≤ order ≤ 4`; the Nyquist mode is zeroed for odd orders.
pub fn derivative(f: &GridFunction, order: u32) -> Result<GridFunction, SpectralError> {
    let values = f.grid.derivative_values(&f.values, order)?;
    Ok(GridFunction { grid: f.grid.clone(), values })
}

/// First bottom-correction operator `−sech(hD)[β · sech(hD) ∂_X ξ]`.
///
/// With `D = −i∂_X` the complex operator equals `−i` times this real one,
/// and `D L₁(β)` equals `−∂_X` applied to it, a symmetric operator with
/// quadratic form `−∫ β (sech(hD) ∂_X ξ)² dX`.
pub fn apply_l1(beta: &GridFunction, xi: &GridFunction, h: f64) -> Result<GridFunction, SpectralError> {
    if beta.grid != xi.grid {
        return Err(SpectralError::GridMismatch);
    }
    let sech = Multiplier::sech(h);
    let inner = apply_multiplier(&derivative(xi, 1)?, &sech)?;
    let product = beta.mul(&inner)?;
    Ok(apply_multiplier(&product, &sech)?.scale(-1.0))
}

/// Second bottom-correction operator `−sech(hD) β D tanh(hD) β ∂_X sech(hD) ξ`,
/// with the same `D → ∂_X` convention as [`apply_l1`].
pub fn apply_l2(beta: &GridFunction, xi: &GridFunction, h: f64) -> Result<GridFunction, SpectralError> {
    if beta.grid != xi.grid {
        return Err(SpectralError::GridMismatch);
    }
    let sech = Multiplier::sech(h);
    let inner = derivative(&apply_multiplier(xi, &sech)?, 1)?;
    let mid = apply_multiplier(&beta.mul(&inner)?, &Multiplier::d_tanh(h))?;
    Ok(apply_multiplier(&beta.mul(&mid)?, &sech)?.scale(-1.0))
}

/// Two-thirds rule: zero every coefficient with `|m| > n/3`.
pub fn dealias(f: &GridFunction) -> GridFunction {
    let cut = f.grid.n() as f64 / 3.0;
    let modes = f.grid.modes().to_vec();
    let mut coeffs = f.grid.forward(&f.values);
    for (c, m) in coeffs.iter_mut().zip(&modes) {
        if (m.abs() as f64) > cut {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    let values = f.grid.inverse_complex(coeffs).into_iter().map(|c| c.re).collect();
    GridFunction { grid: f.grid.clone(), values }
}
