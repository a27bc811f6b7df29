//! Homodyne statistics: quadrature marginals, seeded sampling, and
//! temporal-mode handling of continuous traces.

mod temporal;

pub use temporal::{extract_temporal_mode, project_quadrature, simulate_traces, RawTrace, TemporalMode, TimeGrid};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::DensityMatrix;
use crate::rng;

/// One homodyne outcome: LO phase (radians, in `[0, 2π)`) and quadrature
/// value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSample {
    pub theta: f64,
    pub x: f64,
}

impl QuadratureSample {
    pub fn new(theta: f64, x: f64) -> Self {
        QuadratureSample {
            theta: wrap_phase(theta),
            x,
        }
    }
}

pub fn wrap_phase(theta: f64) -> f64 {
    let t = theta.rem_euclid(std::f64::consts::TAU);
    // rem_euclid can round up to exactly 2π
    if t >= std::f64::consts::TAU {
        0.0
    } else {
        t
    }
}

/// Harmonic-oscillator eigenfunctions `ψ_0(x) .. ψ_{n-1}(x)` for `ħ = 1`,
/// `ψ_n = H_n(x) e^{−x²/2} / (π^{1/4} √(2ⁿ n!))`, by the stable three-term
/// recurrence.
pub fn fock_wavefunctions(x: f64, n: usize) -> Vec<f64> {
    let mut psi = Vec::with_capacity(n);
    if n == 0 {
        return psi;
    }
    psi.push(std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp());
    if n > 1 {
        psi.push(std::f64::consts::SQRT_2 * x * psi[0]);
    }
    for k in 1..n.saturating_sub(1) {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * x * psi[k] - (kf / (kf + 1.0)).sqrt() * psi[k - 1];
        psi.push(next);
    }
    psi
}

/// Real symmetric kernel `B_mn = Re(ρ_mn e^{i(n−m)θ})` so that
/// `p(x|θ) = ψ(x)ᵀ B ψ(x)`.
pub(crate) fn phase_kernel(rho: &DensityMatrix, theta: f64) -> DMatrix<f64> {
    let d = rho.dim().get();
    DMatrix::from_fn(d, d, |m, n| {
        (rho.get(m, n) * Complex64::from_polar(1.0, (n as f64 - m as f64) * theta)).re
    })
}

fn quadratic_form(kernel: &DMatrix<f64>, psi: &[f64]) -> f64 {
    let d = psi.len();
    let mut total = 0.0;
    for m in 0..d {
        let mut row = 0.0;
        for n in 0..d {
            row += kernel[(m, n)] * psi[n];
        }
        total += psi[m] * row;
    }
    total
}

/// Density of quadrature outcome `x` at LO phase `θ`:
/// `Σ_mn ρ_mn ψ_m(x) ψ_n(x) e^{i(n−m)θ}`.
pub fn marginal_pdf(rho: &DensityMatrix, theta: f64, x: f64) -> f64 {
    let psi = fock_wavefunctions(x, rho.dim().get());
    quadratic_form(&phase_kernel(rho, theta), &psi)
}

pub const SAMPLING_RANGE: (f64, f64) = (-6.0, 6.0);
pub const SAMPLING_POINTS: usize = 4001;

/// Tabulated CDF of one marginal, inverted by linear interpolation.
#[derive(Clone, Debug)]
pub struct MarginalTable {
    xs: Vec<f64>,
    cdf: Vec<f64>,
}

impl MarginalTable {
    pub fn new(rho: &DensityMatrix, theta: f64) -> Self {
        let (lo, hi) = SAMPLING_RANGE;
        let step = (hi - lo) / (SAMPLING_POINTS - 1) as f64;
        let kernel = phase_kernel(rho, theta);
        let d = rho.dim().get();
        let xs: Vec<f64> = (0..SAMPLING_POINTS).map(|i| lo + step * i as f64).collect();
        let pdf: Vec<f64> = xs
            .iter()
            .map(|&x| quadratic_form(&kernel, &fock_wavefunctions(x, d)).max(0.0))
            .collect();
        let mut cdf = Vec::with_capacity(SAMPLING_POINTS);
        cdf.push(0.0);
        for i in 1..SAMPLING_POINTS {
            let prev = cdf[i - 1];
            cdf.push(prev + 0.5 * step * (pdf[i - 1] + pdf[i]));
        }
        let total = *cdf.last().unwrap();
        if (total - 1.0).abs() > 1e-4 {
            log::warn!("marginal at theta={theta:.4} holds {total:.6} of its mass inside [{lo}, {hi}]");
        }
        for c in &mut cdf {
            *c /= total;
        }
        MarginalTable { xs, cdf }
    }

    /// Quantile for `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        if c1 > c0 {
            x0 + (u - c0) / (c1 - c0) * (x1 - x0)
        } else {
            x0
        }
    }

    pub fn cdf_at(&self, x: f64) -> f64 {
        if x <= self.xs[0] {
            return 0.0;
        }
        let last = self.xs.len() - 1;
        if x >= self.xs[last] {
            return 1.0;
        }
        let step = self.xs[1] - self.xs[0];
        let i = (((x - self.xs[0]) / step) as usize).min(last - 1);
        let f = (x - self.xs[i]) / step;
        self.cdf[i] + f * (self.cdf[i + 1] - self.cdf[i])
    }
}

/// i.i.d. inverse-CDF samples, `n_per_phase` per phase, in phase order.
///
/// Phase `k` draws from its own stream keyed by `(seed, "homodyne", k)`, so
/// the output does not depend on how phases are scheduled.
pub fn sample_quadratures(
    rho: &DensityMatrix,
    phases: &[f64],
    n_per_phase: usize,
    seed: u64,
) -> Result<Vec<QuadratureSample>> {
    if phases.is_empty() {
        return Err(Error::EmptyInput("phase list"));
    }
    if n_per_phase == 0 {
        return Err(Error::EmptyInput("samples per phase"));
    }
    let per_phase: Vec<Vec<QuadratureSample>> = phases
        .par_iter()
        .enumerate()
        .map(|(k, &theta)| {
            let table = MarginalTable::new(rho, theta);
            let mut rng = rng::stream(seed, "homodyne", k as u64);
            (0..n_per_phase)
                .map(|_| QuadratureSample::new(theta, table.quantile(rng.random::<f64>())))
                .collect()
        })
        .collect();
    Ok(per_phase.into_iter().flatten().collect())
}

/// Evenly spaced phases `0, π/n, ..., (n−1)π/n`.
pub fn equally_spaced_phases(n: usize) -> Vec<f64> {
    (0..n).map(|k| std::f64::consts::PI * k as f64 / n as f64).collect()
}

/// Phases `start, start+step, ...` in degrees, converted to radians.
pub fn phases_from_degrees(degrees: &[f64]) -> Vec<f64> {
    degrees.iter().map(|d| wrap_phase(d.to_radians())).collect()
}
