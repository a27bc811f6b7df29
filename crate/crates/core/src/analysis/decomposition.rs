//! Loss and phase-noise estimates from the 0/1 block of a state, assuming it
//! started as `α|0⟩ + βe^{iθ}|1⟩`.
//!
//! Under loss `L` and Gaussian phase noise σ the block becomes
//! `ρ₁₁ = β²(1−L)` and `|ρ₀₁| = αβ√(1−L) e^{−σ²/2}`; both relations are
//! inverted here. Amplitude fluctuations are not modelled separately, so any
//! they cause shows up in σ, which is therefore an upper bound.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock::{CMatrix, DensityMatrix};

#[derive(Clone, Debug, PartialEq)]
pub struct QubitBlock {
    /// Top-left 2×2 block renormalized to unit trace.
    pub state: DensityMatrix,
    /// `1 − (ρ₀₀ + ρ₁₁)`.
    pub discarded_weight: f64,
}

/// Minimum `ρ₀₀ + ρ₁₁` for the block to be meaningful.
pub const MIN_BLOCK_WEIGHT: f64 = 0.5;

pub fn qubit_subspace(rho: &DensityMatrix) -> Result<QubitBlock> {
    let kept = rho.get(0, 0).re + rho.get(1, 1).re;
    if kept < MIN_BLOCK_WEIGHT {
        return Err(Error::UnreliableSubspace(kept));
    }
    let block = CMatrix::from_fn(2, 2, |m, n| rho.get(m, n) / kept);
    let state = DensityMatrix::from_unnormalized(block)?;
    Ok(QubitBlock {
        state,
        discarded_weight: 1.0 - kept,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub loss: f64,
    /// Radians; `f64::INFINITY` when the coherence vanished.
    pub sigma: f64,
    /// `ρ₀₀ + ρ₁₁` before renormalization.
    pub renorm_weight: f64,
    /// `1 − ρ₁₁/β²` fell outside `[0, 1]` and was clamped.
    pub loss_clamped: bool,
    /// The coherence exceeds what the inferred loss allows; σ set to 0.
    pub over_coherent: bool,
    /// `|ρ₀₁| = 0`; σ is infinite.
    pub sigma_infinite: bool,
}

impl DecompositionResult {
    /// The 0/1 block the estimates predict for the given input amplitudes,
    /// with the coherence phase taken from `phase`.
    pub fn predicted_block(&self, alpha: f64, beta: f64, phase: f64) -> CMatrix {
        let keep = 1.0 - self.loss;
        let rho11 = beta * beta * keep;
        let coh = if self.sigma.is_finite() {
            alpha * beta * keep.sqrt() * (-self.sigma * self.sigma / 2.0).exp()
        } else {
            0.0
        };
        let c = Complex64::from_polar(coh, phase);
        CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0 - rho11, 0.0),
                c.conj(),
                c,
                Complex64::new(rho11, 0.0),
            ],
        )
    }
}

pub fn estimate_loss_dephasing(rho: &DensityMatrix, alpha: f64, beta: f64) -> Result<DecompositionResult> {
    if beta == 0.0 {
        return Err(Error::UndefinedLoss);
    }
    if !(alpha > 0.0 && beta > 0.0) || (alpha * alpha + beta * beta - 1.0).abs() > 1e-9 {
        return Err(invalid(
            "alpha/beta",
            format!("need alpha, beta > 0 with alpha² + beta² = 1 (got {alpha}, {beta})"),
        ));
    }
    let block = qubit_subspace(rho)?;
    let q = &block.state;
    let raw_loss = 1.0 - q.get(1, 1).re / (beta * beta);
    let loss = raw_loss.clamp(0.0, 1.0);
    let loss_clamped = loss != raw_loss;
    if loss_clamped {
        log::warn!("inferred loss {raw_loss:.6} clamped to [0, 1]");
    }
    let coherence = q.get(0, 1).norm();
    let (sigma, over_coherent, sigma_infinite) = if coherence == 0.0 {
        (f64::INFINITY, false, true)
    } else {
        let ratio = coherence / (alpha * beta * (1.0 - loss).sqrt());
        if ratio > 1.0 {
            (0.0, true, false)
        } else {
            ((-2.0 * ratio.ln()).sqrt(), false, false)
        }
    };
    Ok(DecompositionResult {
        loss,
        sigma,
        renorm_weight: 1.0 - block.discarded_weight,
        loss_clamped,
        over_coherent,
        sigma_infinite,
    })
}
