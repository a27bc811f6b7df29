//! Continuous homodyne traces and the temporal mode of the released wave
//! packet.
//!
//! Trace model: the mode `Ψ` carries the quadrature value of the state, every
//! mode orthogonal to `Ψ` carries vacuum. Discretized on a grid of step `dt`,
//!
//! ```text
//! trace(t_i) = x·Ψ(t_i) + v⊥(t_i),   v⊥ = v − Ψ·Σ_j Ψ(t_j) v(t_j) dt
//! ```
//!
//! with `v(t_i)` i.i.d. `N(0, 1/(2dt))`. Projecting on `Ψ` returns `x`
//! exactly; projecting on any unit mode orthogonal to `Ψ` gives variance 1/2.

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub start_ns: f64,
    pub step_ns: f64,
    pub len: usize,
}

impl TimeGrid {
    pub fn new(start_ns: f64, step_ns: f64, len: usize) -> Result<Self> {
        if !(step_ns > 0.0 && step_ns.is_finite() && start_ns.is_finite()) || len < 2 {
            return Err(Error::GridMismatch(format!(
                "invalid grid start={start_ns} step={step_ns} len={len}"
            )));
        }
        Ok(TimeGrid { start_ns, step_ns, len })
    }

    /// 2 ns bins over a 2 µs window.
    pub fn default_window() -> Self {
        TimeGrid {
            start_ns: 0.0,
            step_ns: 2.0,
            len: 1000,
        }
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start_ns + self.step_ns * i as f64
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|i| self.time(i))
    }

    fn matches(&self, other: &TimeGrid) -> bool {
        self.len == other.len
            && (self.step_ns - other.step_ns).abs() <= 1e-12 * self.step_ns
            && (self.start_ns - other.start_ns).abs() <= 1e-9 * self.step_ns
    }

    fn ensure_matches(&self, other: &TimeGrid) -> Result<()> {
        if !self.matches(other) {
            return Err(Error::GridMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// Normalized envelope: `Σ Ψ(t_i)² dt = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct TemporalMode {
    grid: TimeGrid,
    weights: Vec<f64>,
}

impl TemporalMode {
    pub fn from_weights(grid: TimeGrid, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.len {
            return Err(Error::GridMismatch(format!(
                "{} weights on a {}-point grid",
                weights.len(),
                grid.len
            )));
        }
        let norm = (weights.iter().map(|w| w * w).sum::<f64>() * grid.step_ns).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Numerical("temporal mode has zero norm".into()));
        }
        Ok(TemporalMode {
            grid,
            weights: weights.into_iter().map(|w| w / norm).collect(),
        })
    }

    /// One-sided exponential `Ψ(t) ∝ e^{−(t−t_r)/(2τ)}` for `t ≥ t_r`: the
    /// field of a cavity whose intensity decays with time constant τ.
    pub fn exponential(grid: TimeGrid, release_ns: f64, tau_ns: f64) -> Result<Self> {
        let w = grid
            .times()
            .map(|t| {
                if t + 1e-9 >= release_ns {
                    (-(t - release_ns) / (2.0 * tau_ns)).exp()
                } else {
                    0.0
                }
            })
            .collect();
        Self::from_weights(grid, w)
    }

    pub fn gaussian(grid: TimeGrid, center_ns: f64, width_ns: f64) -> Result<Self> {
        let w = grid
            .times()
            .map(|t| (-((t - center_ns) / width_ns).powi(2) / 2.0).exp())
            .collect();
        Self::from_weights(grid, w)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ Ψ₁ Ψ₂ dt`.
    pub fn overlap(&self, other: &TemporalMode) -> Result<f64> {
        self.grid.ensure_matches(&other.grid)?;
        Ok(self.weights.iter().zip(&other.weights).map(|(a, b)| a * b).sum::<f64>() * self.grid.step_ns)
    }

    /// Time of the largest `|Ψ|`.
    pub fn peak_time(&self) -> f64 {
        let (i, _) = self
            .weights
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .expect("grid has at least two points");
        self.grid.time(i)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawTrace {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
}

/// One trace per entry of `x_values`, each with its own noise stream keyed
/// by `(noise_seed, "trace", k)`.
pub fn simulate_traces(x_values: &[f64], envelope: &TemporalMode, noise_seed: u64) -> Result<Vec<RawTrace>> {
    let grid = envelope.grid;
    let sd = (0.5 / grid.step_ns).sqrt();
    let psi = &envelope.weights;
    Ok(x_values
        .par_iter()
        .enumerate()
        .map(|(k, &x)| {
            let mut rng = rng::stream(noise_seed, "trace", k as u64);
            let noise: Vec<f64> = (0..grid.len)
                .map(|_| sd * Distribution::<f64>::sample(&StandardNormal, &mut rng))
                .collect();
            let along: f64 = psi.iter().zip(&noise).map(|(p, v)| p * v).sum::<f64>() * grid.step_ns;
            let values = psi.iter().zip(&noise).map(|(p, v)| (x - along) * p + v).collect();
            RawTrace { grid, values }
        })
        .collect())
}

/// `Σ Ψ(t_i)·trace(t_i)·dt`.
pub fn project_quadrature(trace: &RawTrace, envelope: &TemporalMode) -> Result<f64> {
    trace.grid.ensure_matches(&envelope.grid)?;
    Ok(trace
        .values
        .iter()
        .zip(&envelope.weights)
        .map(|(v, p)| v * p)
        .sum::<f64>()
        * trace.grid.step_ns)
}

const MIN_TRACES: usize = 100;
const RECOMMENDED_TRACES: usize = 1000;
/// Relative gap below which the top two excess eigenvalues count as tied.
const DEGENERACY_GAP: f64 = 1e-3;
/// Safety factor over the largest eigenvalue pure vacuum noise can produce
/// at the given trace count (Marchenko–Pastur edge).
const NOISE_EDGE_MARGIN: f64 = 1.1;

/// Principal component of the trace ensemble after removing the vacuum
/// baseline `1/(2dt)` from the covariance diagonal. The sign is chosen so
/// that the largest-magnitude weight is positive.
pub fn extract_temporal_mode(traces: &[RawTrace]) -> Result<TemporalMode> {
    let n = traces.len();
    if n < MIN_TRACES {
        return Err(Error::TooFewSamples {
            got: n,
            needed: MIN_TRACES,
        });
    }
    if n < RECOMMENDED_TRACES {
        log::warn!("temporal-mode extraction from only {n} traces; expect a noisy envelope");
    }
    let grid = traces[0].grid;
    for t in traces {
        grid.ensure_matches(&t.grid)?;
        if t.values.len() != grid.len {
            return Err(Error::GridMismatch("trace length differs from its grid".into()));
        }
    }
    let p = grid.len;
    let mut data = DMatrix::from_fn(n, p, |k, i| traces[k].values[i]);
    for i in 0..p {
        let mean = data.column(i).sum() / n as f64;
        data.column_mut(i).add_scalar_mut(-mean);
    }
    let mut cov = data.transpose() * &data / (n as f64 - 1.0);
    let baseline = 0.5 / grid.step_ns;
    for i in 0..p {
        cov[(i, i)] -= baseline;
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let (l1, l2) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]);

    let ratio = p as f64 / n as f64;
    let noise_edge = baseline * ((1.0 + ratio.sqrt()).powi(2) * NOISE_EDGE_MARGIN - 1.0);
    if l1 <= noise_edge {
        return Err(Error::AmbiguousMode(format!(
            "largest excess eigenvalue {l1:.4e} is within vacuum noise (edge {noise_edge:.4e})"
        )));
    }
    if (l1 - l2) <= DEGENERACY_GAP * l1.abs() {
        return Err(Error::AmbiguousMode(format!(
            "top excess eigenvalues {l1:.6e} and {l2:.6e} are tied"
        )));
    }
    let v = eig.eigenvectors.column(order[0]);
    let peak = v
        .iter()
        .copied()
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(1.0);
    let sign = if peak < 0.0 { -1.0 } else { 1.0 };
    TemporalMode::from_weights(grid, v.iter().map(|w| sign * w).collect())
}
