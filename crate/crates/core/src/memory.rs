//! The storage channel: amplitude damping, detuning rotation and Gaussian
//! dephasing.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fock::{CMatrix, DensityMatrix};

/// Sense of the detuning rotation. With `+1` the coherence `ρ₁₀` picks up
/// `e^{+iωt}`, so the Wigner dip turns counterclockwise in the (x, p) plane
/// as storage time grows.
pub const ROTATION_SENSE: f64 = 1.0;

/// Storage loss per cavity round trip. The half-life already folds in every
/// loss source, so this only serves as a consistency figure.
pub const ROUND_TRIP_LOSS: f64 = 0.002;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryParams {
    /// Photon-survival half-life.
    pub half_life_ns: f64,
    /// Memory-to-LO frequency offset.
    pub detuning_hz: f64,
    /// Standard deviation of the Gaussian phase noise, radians.
    pub dephasing_sigma: f64,
    /// Herald true-click fraction, carried for reporting.
    pub eta: f64,
    /// Effective loss already present at zero storage time (release and
    /// detection inefficiency lumped together).
    pub initial_loss: f64,
}

impl Default for MemoryParams {
    fn default() -> Self {
        MemoryParams {
            half_life_ns: 1300.0,
            detuning_hz: 300e3,
            dephasing_sigma: 0.0,
            eta: 1.0,
            initial_loss: 0.0,
        }
    }
}

impl MemoryParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_life_ns > 0.0 && self.half_life_ns.is_finite()) {
            return Err(invalid("half_life", format!("{} must be positive", self.half_life_ns)));
        }
        if !self.detuning_hz.is_finite() {
            return Err(invalid("detuning", "must be finite"));
        }
        if !(self.dephasing_sigma >= 0.0 && self.dephasing_sigma.is_finite()) {
            return Err(invalid("sigma", format!("{} must be >= 0", self.dephasing_sigma)));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(invalid("eta", format!("{} outside [0,1]", self.eta)));
        }
        if !(0.0..=1.0).contains(&self.initial_loss) {
            return Err(invalid("initial_loss", format!("{} outside [0,1]", self.initial_loss)));
        }
        Ok(())
    }

    /// Total loss after `t_ns` of storage, including the initial loss.
    pub fn total_loss(&self, t_ns: f64) -> Result<f64> {
        let storage = loss_from_storage(t_ns, self.half_life_ns)?;
        Ok(1.0 - (1.0 - self.initial_loss) * (1.0 - storage))
    }
}

/// `L = 1 − 2^{−t/T½}`.
pub fn loss_from_storage(t_ns: f64, half_life_ns: f64) -> Result<f64> {
    if !(t_ns >= 0.0 && t_ns.is_finite()) {
        return Err(invalid("t", format!("storage time {t_ns} must be >= 0")));
    }
    if !(half_life_ns > 0.0) {
        return Err(invalid("half_life", format!("{half_life_ns} must be positive")));
    }
    Ok(1.0 - (-t_ns / half_life_ns).exp2())
}

/// Half-life implied by a per-round-trip loss and round-trip time.
pub fn half_life_from_round_trip(loss_per_trip: f64, round_trip_ns: f64) -> f64 {
    round_trip_ns * std::f64::consts::LN_2 / -(1.0 - loss_per_trip).ln()
}

/// Bosonic loss channel with Kraus operators
/// `K_k = Σ_n √(C(n,k)(1−L)^{n−k}L^k) |n−k⟩⟨n|`.
pub fn amplitude_damping(rho: &DensityMatrix, loss: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&loss) {
        return Err(invalid("L", format!("loss {loss} outside [0,1]")));
    }
    let d = rho.dim().get();
    // sqrt(C(n,k)) table
    let mut binom = vec![vec![0.0_f64; d]; d];
    for (n, row) in binom.iter_mut().enumerate() {
        row[0] = 1.0;
        for k in 1..=n {
            row[k] = row[k - 1] * (n + 1 - k) as f64 / k as f64;
        }
    }
    let keep = (1.0 - loss).sqrt();
    let mut out = CMatrix::zeros(d, d);
    for m in 0..d {
        for n in 0..d {
            let r = rho.get(m, n);
            if r == Complex64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..=m.min(n) {
                let w = (binom[m][k] * binom[n][k]).sqrt() * keep.powi((m + n - 2 * k) as i32) * loss.powi(k as i32);
                out[(m - k, n - k)] += r * w;
            }
        }
    }
    DensityMatrix::from_unnormalized(out)
}

/// Rotation by `ω t` with `ω = 2π·detuning`: `ρ_mn ↦ ρ_mn e^{iσωt(m−n)}`
/// where σ is [`ROTATION_SENSE`].
pub fn detuning_rotation(rho: &DensityMatrix, detuning_hz: f64, t_ns: f64) -> Result<DensityMatrix> {
    if !(t_ns >= 0.0 && t_ns.is_finite()) {
        return Err(invalid("t", format!("storage time {t_ns} must be >= 0")));
    }
    let angle = rotation_angle(detuning_hz, t_ns);
    Ok(rho.rotated(-angle))
}

/// Signed phase advance of `ρ₁₀` after `t_ns` at the given detuning.
pub fn rotation_angle(detuning_hz: f64, t_ns: f64) -> f64 {
    ROTATION_SENSE * std::f64::consts::TAU * detuning_hz * t_ns * 1e-9
}

/// Average over a Gaussian phase kick: `ρ_mn ↦ ρ_mn e^{−σ²(m−n)²/2}`.
pub fn gaussian_dephasing(rho: &DensityMatrix, sigma: f64) -> Result<DensityMatrix> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid("sigma", format!("{sigma} must be >= 0")));
    }
    rho.map_elements(|m, n| {
        let k = m as f64 - n as f64;
        Complex64::new((-0.5 * sigma * sigma * k * k).exp(), 0.0)
    })
}

/// Applies damping (with [`MemoryParams::total_loss`]), then the detuning
/// rotation, then dephasing. The three maps commute on the 0/1 block.
pub fn store(rho: &DensityMatrix, params: &MemoryParams, t_ns: f64) -> Result<DensityMatrix> {
    params.validate()?;
    let damped = amplitude_damping(rho, params.total_loss(t_ns)?)?;
    let rotated = detuning_rotation(&damped, params.detuning_hz, t_ns)?;
    gaussian_dephasing(&rotated, params.dephasing_sigma)
}
