//! One-dimensional quadrature.

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum QuadError {
    #[error("adaptive quadrature did not converge on [{a}, {b}] (estimate {estimate:e})")]
    NotConverged { a: f64, b: f64, estimate: f64 },
    #[error("integrand is not finite at {0}")]
    NonFinite(f64),
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64, QuadError> {
    let fa = eval(f, a)?;
    let fb = eval(f, b)?;
    let m = 0.5 * (a + b);
    let fm = eval(f, m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut budget = 2_000_000usize;
    let v = simpson_step(f, a, b, fa, fm, fb, whole, tol, 50, &mut budget)?;
    if budget == 0 {
        return Err(QuadError::NotConverged { a, b, estimate: v });
    }
    Ok(v)
}

fn eval(f: &dyn Fn(f64) -> f64, x: f64) -> Result<f64, QuadError> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(QuadError::NonFinite(x))
    }
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    budget: &mut usize,
) -> Result<f64, QuadError> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = eval(f, lm)?;
    let frm = eval(f, rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    *budget = budget.saturating_sub(1);
    if depth == 0 || *budget == 0 || delta.abs() <= 15.0 * tol {
        if depth == 0 && delta.abs() > 15.0 * tol {
            return Err(QuadError::NotConverged { a, b, estimate: left + right });
        }
        return Ok(left + right + delta / 15.0);
    }
    Ok(simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, budget)?
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, budget)?)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm1) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Composite 8-point Gauss–Legendre, doubling the panel count from 64 until
/// two successive values agree to `rel_tol` (at most 2¹⁴ panels).
pub fn doubling_gauss(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<f64, QuadError> {
    let mut panels = 64;
    let mut prev = composite_gauss(f, a, b, panels, 8);
    while panels < 1 << 14 {
        panels *= 2;
        let v = composite_gauss(f, a, b, panels, 8);
        if !v.is_finite() {
            return Err(QuadError::NonFinite(a));
        }
        if (v - prev).abs() <= rel_tol * v.abs() {
            return Ok(v);
        }
        prev = v;
    }
    Err(QuadError::NotConverged { a, b, estimate: prev })
}

/// Composite Gauss–Legendre rule with `panels` equal panels of `order` points.
pub fn composite_gauss(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        for (xi, wi) in x.iter().zip(&w) {
            acc += wi * f(mid + 0.5 * h * xi);
        }
    }
    acc * 0.5 * h
}
