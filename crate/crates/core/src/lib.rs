//! Numerical laboratory for shallow water waves over a random bottom.
//!
//! The bottom is a stationary process `β(x, ω)` sampled on a fine scale
//! `x = X/ε`. The crate computes the effective KdV coefficients, solves the
//! KdV equation in random characteristic coordinates, reconstructs the
//! right-moving wave `r` and the scattered wave `s₁`, and measures the order
//! of every neglected term by Monte Carlo regression in `ε`.

pub mod bottom;
pub mod charflow;
pub mod coeffs;
pub mod consistency;
pub mod ensemble;
pub mod interp;
pub mod io;
pub mod quad;
pub mod scalesep;
pub mod spectral;
pub mod stats;
pub mod waves;
