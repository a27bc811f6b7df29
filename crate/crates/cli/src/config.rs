//! Experiment configuration.
//!
//! TOML with dotted keys. Every key is optional; defaults follow the
//! six-phase, 0–400 ns storage sequence. Example:
//!
//! ```toml
//! seed = 7
//! storage_times_ns = [0, 100, 200]
//! phases_deg = [0, 30, 60, 90, 120, 150]
//! n_per_phase = 20000
//! preparation.kind = "ideal"
//! preparation.alpha = 0.7071067811865476
//! preparation.beta = 0.7071067811865476
//! memory.sigma_deg = 28
//! ```

use std::path::{Path, PathBuf};

use cvmem::analysis::default_gammas;
use cvmem::fock::FockDim;
use cvmem::homodyne::phases_from_degrees;
use cvmem::memory::MemoryParams;
use cvmem::preparation::{ClickModel, PreparationParams};
use cvmem::tomography::{Binning, MleOptions};
use cvmem::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreparationKind {
    /// Heralded from a two-mode squeezed vacuum with a displaced idler.
    Heralded,
    /// `α|0⟩ + βe^{iθ}|1⟩` written down directly.
    Ideal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreparationConfig {
    pub kind: PreparationKind,
    pub lambda: f64,
    pub delta_re: f64,
    pub delta_im: f64,
    pub click_model: ClickModel,
    /// True-click fraction; the rest of the heralds are vacuum.
    pub eta: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Radians.
    pub theta: f64,
}

impl Default for PreparationConfig {
    fn default() -> Self {
        let p = PreparationParams::default();
        let h = 0.5f64.sqrt();
        PreparationConfig {
            kind: PreparationKind::Ideal,
            lambda: p.lambda,
            delta_re: p.idler_displacement.re,
            delta_im: p.idler_displacement.im,
            click_model: p.click_model,
            eta: 1.0,
            alpha: h,
            beta: h,
            theta: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MemoryConfig {
    pub half_life_ns: f64,
    pub detuning_hz: f64,
    pub sigma_deg: f64,
    pub initial_loss: f64,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        let m = MemoryParams::default();
        MemoryConfig {
            half_life_ns: m.half_life_ns,
            detuning_hz: m.detuning_hz,
            sigma_deg: m.dephasing_sigma.to_degrees(),
            initial_loss: m.initial_loss,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TomographyConfig {
    pub dim: usize,
    pub max_iters: usize,
    pub tol: f64,
    /// Histogram bins on [-6, 6]; 0 keeps every sample.
    pub bins: usize,
}

impl Default for TomographyConfig {
    fn default() -> Self {
        let o = MleOptions::default();
        TomographyConfig {
            dim: o.dim.get(),
            max_iters: o.max_iters,
            tol: o.tol,
            bins: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Wigner grids cover `[-w, w]²`.
    pub wigner_half_width: f64,
    pub wigner_step: f64,
    pub gammas: Vec<f64>,
    /// Reference amplitudes for the loss/dephasing estimate. Default: the
    /// ideal amplitudes, or the 0/1 block of the heralded state.
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            wigner_half_width: 4.0,
            wigner_step: 0.05,
            gammas: default_gammas(),
            alpha: None,
            beta: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Fock truncation used for preparation, storage and sampling.
    pub dim: usize,
    pub storage_times_ns: Vec<f64>,
    /// Radians. Mutually exclusive with `phases_deg`.
    pub phases: Option<Vec<f64>>,
    pub phases_deg: Option<Vec<f64>>,
    pub n_per_phase: usize,
    pub output_dir: Option<PathBuf>,
    pub preparation: PreparationConfig,
    pub memory: MemoryConfig,
    pub tomography: TomographyConfig,
    pub analysis: AnalysisConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            dim: 20,
            storage_times_ns: vec![0.0, 100.0, 200.0, 300.0, 400.0],
            phases: None,
            phases_deg: None,
            n_per_phase: 20_000,
            output_dir: None,
            preparation: PreparationConfig::default(),
            memory: MemoryConfig::default(),
            tomography: TomographyConfig::default(),
            analysis: AnalysisConfig::default(),
        }
    }
}

pub fn parse(text: &str) -> CliResult<ExperimentConfig> {
    let de = toml::Deserializer::new(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        let key = if key == "." { "<root>".to_string() } else { key };
        CliError::config(key, e.into_inner().message().trim())
    })
}

pub fn load(path: &Path) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io("--config", path, e))?;
    parse(&text)
}

fn check(ok: bool, key: &str, message: impl FnOnce() -> String) -> CliResult<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::config(key, message()))
    }
}

fn finite(v: f64) -> bool {
    v.is_finite()
}

impl ExperimentConfig {
    /// Checks every field; errors name the offending key.
    pub fn validate(&self) -> CliResult<()> {
        self.fock_dim()?;
        check(!self.storage_times_ns.is_empty(), "storage_times_ns", || {
            "needs at least one entry".into()
        })?;
        for (i, t) in self.storage_times_ns.iter().enumerate() {
            check(finite(*t) && *t >= 0.0, &format!("storage_times_ns[{i}]"), || {
                format!("{t} must be >= 0")
            })?;
        }
        check(!(self.phases.is_some() && self.phases_deg.is_some()), "phases", || {
            "give either `phases` or `phases_deg`, not both".into()
        })?;
        let (key, list) = match (&self.phases, &self.phases_deg) {
            (Some(p), _) => ("phases", p),
            (_, Some(p)) => ("phases_deg", p),
            _ => ("phases", &Vec::new()),
        };
        for (i, p) in list.iter().enumerate() {
            check(finite(*p), &format!("{key}[{i}]"), || format!("{p} is not finite"))?;
        }
        check(!self.phases().is_empty(), key, || "needs at least one phase".into())?;
        check(self.n_per_phase > 0, "n_per_phase", || "must be positive".into())?;

        let p = &self.preparation;
        match p.kind {
            PreparationKind::Heralded => {
                check((0.0..1.0).contains(&p.lambda), "preparation.lambda", || {
                    format!("{} outside [0, 1)", p.lambda)
                })?;
                check(finite(p.delta_re), "preparation.delta_re", || "must be finite".into())?;
                check(finite(p.delta_im), "preparation.delta_im", || "must be finite".into())?;
                self.preparation_params()
                    .validate(self.fock_dim()?)
                    .map_err(|e| CliError::config("preparation.delta_re", e))?;
            }
            PreparationKind::Ideal => {
                check(p.alpha >= 0.0 && p.beta >= 0.0, "preparation.alpha", || {
                    "alpha and beta must be >= 0".into()
                })?;
                check(
                    (p.alpha * p.alpha + p.beta * p.beta - 1.0).abs() <= 1e-9,
                    "preparation.beta",
                    || format!("alpha² + beta² = {} (must be 1)", p.alpha * p.alpha + p.beta * p.beta),
                )?;
                check(finite(p.theta), "preparation.theta", || "must be finite".into())?;
            }
        }
        check((0.0..=1.0).contains(&p.eta), "preparation.eta", || {
            format!("{} outside [0, 1]", p.eta)
        })?;

        let m = &self.memory;
        check(
            finite(m.half_life_ns) && m.half_life_ns > 0.0,
            "memory.half_life_ns",
            || format!("{} must be positive", m.half_life_ns),
        )?;
        check(finite(m.detuning_hz), "memory.detuning_hz", || "must be finite".into())?;
        check(finite(m.sigma_deg) && m.sigma_deg >= 0.0, "memory.sigma_deg", || {
            format!("{} must be >= 0", m.sigma_deg)
        })?;
        check((0.0..=1.0).contains(&m.initial_loss), "memory.initial_loss", || {
            format!("{} outside [0, 1]", m.initial_loss)
        })?;

        let t = &self.tomography;
        FockDim::new(t.dim).map_err(|e| CliError::config("tomography.dim", e))?;
        check(t.max_iters > 0, "tomography.max_iters", || "must be positive".into())?;
        check(finite(t.tol) && t.tol > 0.0, "tomography.tol", || {
            "must be positive".into()
        })?;
        check(t.bins == 0 || t.bins >= 2, "tomography.bins", || {
            "use 0 (per sample) or at least 2".into()
        })?;

        let a = &self.analysis;
        check(
            finite(a.wigner_half_width) && a.wigner_half_width > 0.0,
            "analysis.wigner_half_width",
            || "must be positive".into(),
        )?;
        check(
            finite(a.wigner_step) && a.wigner_step > 0.0,
            "analysis.wigner_step",
            || "must be positive".into(),
        )?;
        check(!a.gammas.is_empty(), "analysis.gammas", || {
            "needs at least one entry".into()
        })?;
        for (i, g) in a.gammas.iter().enumerate() {
            check(finite(*g) && *g >= 0.0, &format!("analysis.gammas[{i}]"), || {
                format!("{g} must be >= 0")
            })?;
        }
        for (key, v) in [("analysis.alpha", a.alpha), ("analysis.beta", a.beta)] {
            if let Some(v) = v {
                check((0.0..=1.0).contains(&v), key, || format!("{v} outside [0, 1]"))?;
            }
        }
        check(a.alpha.is_some() == a.beta.is_some(), "analysis.alpha", || {
            "set analysis.alpha and analysis.beta together".into()
        })?;
        Ok(())
    }

    pub fn fock_dim(&self) -> CliResult<FockDim> {
        FockDim::new(self.dim).map_err(|e| CliError::config("dim", e))
    }

    /// Measurement phases in radians, wrapped to `[0, π)` by the sampler.
    pub fn phases(&self) -> Vec<f64> {
        match (&self.phases, &self.phases_deg) {
            (Some(p), _) => p.clone(),
            (_, Some(d)) => phases_from_degrees(d),
            _ => phases_from_degrees(&[0.0, 30.0, 60.0, 90.0, 120.0, 150.0]),
        }
    }

    pub fn preparation_params(&self) -> PreparationParams {
        let p = &self.preparation;
        PreparationParams {
            lambda: p.lambda,
            idler_displacement: Complex64::new(p.delta_re, p.delta_im),
            click_model: p.click_model,
            eta: p.eta,
        }
    }

    pub fn memory_params(&self) -> MemoryParams {
        let m = &self.memory;
        MemoryParams {
            half_life_ns: m.half_life_ns,
            detuning_hz: m.detuning_hz,
            dephasing_sigma: m.sigma_deg.to_radians(),
            eta: self.preparation.eta,
            initial_loss: m.initial_loss,
        }
    }

    pub fn mle_options(&self) -> CliResult<MleOptions> {
        let t = &self.tomography;
        Ok(MleOptions {
            dim: FockDim::new(t.dim).map_err(|e| CliError::config("tomography.dim", e))?,
            max_iters: t.max_iters,
            tol: t.tol,
            binning: if t.bins == 0 {
                Binning::PerSample
            } else {
                Binning::Binned {
                    n_bins: t.bins,
                    x_min: -6.0,
                    x_max: 6.0,
                }
            },
        })
    }
}

/// Canonical file-name stem for a storage time, e.g. `t100ns`.
pub fn time_label(t_ns: f64) -> String {
    format!("t{t_ns}ns")
}
