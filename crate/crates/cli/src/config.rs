//! Flat `key = value` TOML config. Unknown keys are rejected; unit-bearing
//! keys carry the unit in the name.

use std::collections::BTreeMap;
use std::path::Path;

use kdvbed::bottom::{Innovation, Kernel, ProcessSpec};
use kdvbed::coeffs::PhysicalParams;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub h_depth: f64,
    pub g_gravity: f64,
    pub eps: f64,
    pub eps_list: Vec<f64>,
    /// `flat`, `gaussian`, `skewed` or `derivative` (derivative of a Gaussian).
    pub spec: String,
    pub sigma: f64,
    pub ell: f64,
    pub kernel_width: f64,
    pub kernel_rise: u32,
    pub kernel_fall: u32,
    pub lattice_spacing: f64,
    /// `exponential` or `gamma`.
    pub innovation: String,
    pub gamma_shape: f64,
    pub master_seed: u64,
    pub realizations: usize,
    pub output_dir: String,

    /// Period of the `generate-bottom` realization, in fast-variable units.
    pub bottom_length: f64,
    /// Fine bottom nodes for `generate-bottom`.
    pub bottom_nodes: usize,
    /// `X̄` for `donsker` and the covariance lemmas.
    pub x_bar: f64,

    /// `soliton` or `bump`.
    pub initial: String,
    pub y_length: f64,
    pub y_nodes: usize,
    pub tau_end: f64,
    pub dtau: f64,
    pub outputs: usize,
    pub soliton_speed: f64,
    pub bump_center: f64,
    pub bump_width: f64,

    /// `solve-system` end time, step and spectral cutoff (`0` picks 0.4 of
    /// the stability limit).
    pub t_end: f64,
    pub dt: f64,
    pub k_cutoff: f64,

    pub x_lo: f64,
    pub x_hi: f64,
    pub t_max: f64,
    pub stride: usize,

    pub kappa: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub times: usize,
    pub points: usize,
    pub starts: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            h_depth: 1.0,
            g_gravity: 1.0,
            eps: 0.05,
            eps_list: vec![0.08, 0.04, 0.02, 0.01],
            spec: "gaussian".into(),
            sigma: 1.0,
            ell: 1.0,
            kernel_width: 6.0,
            kernel_rise: 8,
            kernel_fall: 20,
            lattice_spacing: 4.0,
            innovation: "exponential".into(),
            gamma_shape: 2.0,
            master_seed: 2024,
            realizations: 16,
            output_dir: "out".into(),
            bottom_length: 512.0,
            bottom_nodes: 4096,
            x_bar: 1.0,
            initial: "soliton".into(),
            y_length: 40.0,
            y_nodes: 512,
            tau_end: 0.0,
            dtau: 0.005,
            outputs: 8,
            soliton_speed: 1.0,
            bump_center: 1.5,
            bump_width: 0.4,
            t_end: 2.0,
            dt: 0.002,
            k_cutoff: 0.0,
            x_lo: 1.0,
            x_hi: 3.5,
            t_max: 1.25,
            stride: 2,
            kappa: 20.0,
            tau_min: 0.01,
            tau_max: 2.0,
            times: 12,
            points: 257,
            starts: 16,
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Config =
            toml::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        PhysicalParams::new(self.h_depth, self.g_gravity, self.eps).map_err(|e| CliError::Validation(e.to_string()))?;
        if self.eps_list.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return bad(format!("eps_list entries must lie in (0, 1): {:?}", self.eps_list));
        }
        if self.realizations == 0 {
            return bad("realizations must be positive".into());
        }
        if !matches!(self.initial.as_str(), "soliton" | "bump") {
            return bad(format!("initial must be soliton or bump, got {}", self.initial));
        }
        self.process()?.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(())
    }

    pub fn params(&self) -> PhysicalParams {
        PhysicalParams { h: self.h_depth, g: self.g_gravity, eps: self.eps }
    }

    pub fn process(&self) -> Result<ProcessSpec, CliError> {
        let gaussian = ProcessSpec::GaussianSpectral { sigma: self.sigma, ell: self.ell };
        Ok(match self.spec.as_str() {
            "flat" => ProcessSpec::Flat,
            "gaussian" => gaussian,
            "derivative" => ProcessSpec::derived(gaussian),
            "skewed" => ProcessSpec::SkewedMA {
                sigma: self.sigma,
                ell: self.ell,
                kernel: Kernel { width: self.kernel_width, rise: self.kernel_rise, fall: self.kernel_fall },
                spacing: self.lattice_spacing,
                innovation: match self.innovation.as_str() {
                    "exponential" => Innovation::Exponential,
                    "gamma" => Innovation::Gamma { shape: self.gamma_shape },
                    other => return Err(CliError::Validation(format!("unknown innovation {other}"))),
                },
            },
            other => return Err(CliError::Validation(format!("unknown spec {other}"))),
        })
    }

    /// Every key with its resolved value, sorted, floats in round-trip form.
    pub fn table(&self) -> BTreeMap<String, String> {
        let value = toml::Value::try_from(self).expect("config serializes");
        let mut out = BTreeMap::new();
        if let toml::Value::Table(t) = value {
            for (k, v) in t {
                out.insert(k, render(&v));
            }
        }
        out
    }
}

fn render(v: &toml::Value) -> String {
    match v {
        toml::Value::Float(f) => format!("{f:?}"),
        toml::Value::Array(a) => format!("[{}]", a.iter().map(render).collect::<Vec<_>>().join(", ")),
        toml::Value::String(s) => format!("{s:?}"),
        other => other.to_string(),
    }
}
