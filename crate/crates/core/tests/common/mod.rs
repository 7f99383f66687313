//! Oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use kdvbed::spectral::{GridFunction, SpectralGrid};
use rustfft::num_complex::Complex64;

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Dense operators built from an O(n²) DFT written out by hand.
pub struct Dense {
    n: usize,
    k: Vec<f64>,
}

pub type Matrix = Vec<Vec<Complex64>>;

impl Dense {
    pub fn new(length: f64, n: usize) -> Self {
        let k = (0..n)
            .map(|j| {
                let m = if j <= n / 2 { j as i64 } else { j as i64 - n as i64 };
                2.0 * PI * m as f64 / length
            })
            .collect();
        Self { n, k }
    }

    pub fn dft(&self) -> Matrix {
        let n = self.n;
        (0..n)
            .map(|j| (0..n).map(|l| Complex64::from_polar(1.0, -2.0 * PI * (j * l) as f64 / n as f64)).collect())
            .collect()
    }

    pub fn idft(&self) -> Matrix {
        let n = self.n;
        (0..n)
            .map(|l| {
                (0..n).map(|j| Complex64::from_polar(1.0 / n as f64, 2.0 * PI * (j * l) as f64 / n as f64)).collect()
            })
            .collect()
    }

    pub fn diag(&self, d: &[Complex64]) -> Matrix {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| if i == j { d[i] } else { Complex64::new(0.0, 0.0) }).collect())
            .collect()
    }

    /// Fourier multiplier; odd symbols drop the Nyquist mode.
    pub fn symbol(&self, s: impl Fn(usize, f64) -> Complex64) -> Matrix {
        let d: Vec<Complex64> = (0..self.n).map(|j| s(j, self.k[j])).collect();
        let m = matmul(&self.diag(&d), &self.dft());
        matmul(&self.idft(), &m)
    }

    pub fn pointwise(&self, v: &[f64]) -> Matrix {
        self.diag(&v.iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>())
    }

    pub fn sech(&self, h: f64) -> Matrix {
        self.symbol(|_, k| Complex64::new(1.0 / (h * k).cosh(), 0.0))
    }

    pub fn d_tanh(&self, h: f64) -> Matrix {
        self.symbol(|_, k| Complex64::new(k * (h * k).tanh(), 0.0))
    }

    pub fn dx(&self) -> Matrix {
        let nyq = self.n / 2;
        self.symbol(|j, k| if j == nyq { Complex64::new(0.0, 0.0) } else { Complex64::new(0.0, k) })
    }
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|l| a[i][l] * b[l][j]).sum()).collect()).collect()
}

pub fn apply(a: &Matrix, x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(c, v)| c * v).sum::<Complex64>().re).collect()
}

pub fn chain(ms: &[Matrix]) -> Matrix {
    ms.iter().skip(1).fold(ms[0].clone(), |acc, m| matmul(&acc, m))
}

pub fn smooth_random(grid: &SpectralGrid, seed: u64) -> GridFunction {
    // A few low modes with pseudo-random phases; deterministic in `seed`.
    let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    let mut next = || {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        (s >> 11) as f64 / (1u64 << 53) as f64
    };
    let terms: Vec<(f64, f64, f64)> = (1..=6).map(|m| (m as f64, next() - 0.5, 2.0 * PI * next())).collect();
    let l = grid.length();
    GridFunction::from_fn(grid, |x| terms.iter().map(|&(m, a, p)| a * (2.0 * PI * m * x / l + p).cos()).sum())
}
