//! Fitting the zero-storage-time loss to an observed Wigner minimum.

use serde::{Deserialize, Serialize};

use super::wigner::dip_direction;
use crate::error::{invalid, Result};
use crate::fock::DensityMatrix;
use crate::memory::{amplitude_damping, gaussian_dephasing};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub initial_loss: f64,
    /// Wigner minimum of the calibrated model state.
    pub w_min: f64,
    pub iterations: usize,
}

const LOSS_TOL: f64 = 1e-7;

/// Lowest Wigner value within the dip search disk.
pub fn model_wigner_minimum(rho: &DensityMatrix, loss: f64, sigma: f64) -> Result<f64> {
    let stored = gaussian_dephasing(&amplitude_damping(rho, loss)?, sigma)?;
    Ok(dip_direction(&stored)?.value)
}

/// Bisects for the loss `L₀` at which `rho` (already including any fake-click
/// admixture) followed by loss `L₀` and phase noise `sigma` has Wigner
/// minimum `target`. The minimum rises monotonically with loss.
pub fn calibrate_initial_loss(rho: &DensityMatrix, sigma: f64, target: f64) -> Result<Calibration> {
    let at_zero = model_wigner_minimum(rho, 0.0, sigma)?;
    if target < at_zero {
        return Err(invalid(
            "target",
            format!("W_min {target} is below the lossless value {at_zero:.6}"),
        ));
    }
    let at_one = model_wigner_minimum(rho, 1.0, sigma)?;
    if target > at_one {
        return Err(invalid(
            "target",
            format!("W_min {target} is above the vacuum value {at_one:.6}"),
        ));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut iterations = 0;
    while hi - lo > LOSS_TOL {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        if model_wigner_minimum(rho, mid, sigma)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let initial_loss = 0.5 * (lo + hi);
    Ok(Calibration {
        initial_loss,
        w_min: model_wigner_minimum(rho, initial_loss, sigma)?,
        iterations,
    })
}
