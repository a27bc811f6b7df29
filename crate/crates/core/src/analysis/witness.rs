//! Quantum non-Gaussianity witness
//! `Δ(ρ) = W(0,0) − (1/π) exp(−2n̄(n̄+1))`, non-negative for every mixture of
//! Gaussian states, and its Gaussian-corrected scan.
//!
//! The scan applies `U = S(ζe^{2iφ}) D(−γe^{iφ})`, which moves the Wigner dip
//! along its direction φ toward the origin and then squeezes along the same
//! axis. Both terms of `Δ(UρU†)` have exact forms in terms of `ρ`:
//! parity commutes with `S`, so `W_{UρU†}(0) = W_ρ(γe^{iφ})`, and `n̄` after
//! `U` follows from `⟨â⟩`, `⟨â²⟩` and `⟨â†â⟩` of `ρ`. No truncated operator
//! exponential enters the scan.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::wigner::{dip_direction, wigner_at, wigner_at_origin, PhaseSpacePoint, SAFE_RADIUS};
use crate::error::{invalid, Error, Result};
use crate::fock::{mean_photon_number, DensityMatrix};

/// `(1/π) exp(−2n̄(n̄+1))`: the largest origin value any Gaussian mixture
/// with mean photon number `n̄` can have.
pub fn gaussian_bound(n_mean: f64) -> f64 {
    (-2.0 * n_mean * (n_mean + 1.0)).exp() / PI
}

pub fn nongaussianity_delta(rho: &DensityMatrix) -> f64 {
    wigner_at_origin(rho) - gaussian_bound(mean_photon_number(rho))
}

/// `⟨â⟩`, `⟨â²⟩` and `⟨â†â⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowMoments {
    pub a: Complex64,
    pub a2: Complex64,
    pub n: f64,
}

impl LowMoments {
    pub fn of(rho: &DensityMatrix) -> Self {
        let d = rho.dim().get();
        let mut a = Complex64::new(0.0, 0.0);
        let mut a2 = Complex64::new(0.0, 0.0);
        // Tr(ρ â) = Σ_n √n ρ_{n,n−1}
        for n in 1..d {
            a += rho.get(n, n - 1) * (n as f64).sqrt();
            if n >= 2 {
                a2 += rho.get(n, n - 2) * ((n * (n - 1)) as f64).sqrt();
            }
        }
        LowMoments {
            a,
            a2,
            n: mean_photon_number(rho),
        }
    }

    /// Moments of `D(β)ρD†(β)`.
    pub fn displaced(&self, beta: Complex64) -> Self {
        LowMoments {
            a: self.a + beta,
            a2: self.a2 + self.a * beta * 2.0 + beta * beta,
            n: self.n + 2.0 * (beta.conj() * self.a).re + beta.norm_sqr(),
        }
    }

    /// `n̄` of `S(z)ρS†(z)` with `S(z) = exp[(z/2)â†² − (z*/2)â²]`, using
    /// `S†âS = â cosh r + â† e^{iϑ} sinh r` for `z = re^{iϑ}`.
    pub fn squeezed_mean_photon_number(&self, z: Complex64) -> f64 {
        let (r, vartheta) = (z.norm(), z.arg());
        let (c, s) = (r.cosh(), r.sinh());
        c * c * self.n + s * s * (self.n + 1.0) + 2.0 * c * s * (Complex64::from_polar(1.0, -vartheta) * self.a2).re
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessOptions {
    /// ζ is searched in `[−zeta_max, zeta_max]`.
    pub zeta_max: f64,
    pub zeta_tol: f64,
}

impl Default for WitnessOptions {
    fn default() -> Self {
        WitnessOptions {
            zeta_max: 1.5,
            zeta_tol: 1e-5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessPoint {
    pub gamma: f64,
    pub zeta_opt: f64,
    pub phi: f64,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessCurve {
    pub phi: f64,
    /// The dip direction could not be determined and `phi = 0` was used.
    pub phi_undefined: bool,
    pub points: Vec<WitnessPoint>,
}

impl WitnessCurve {
    /// Point with the lowest Δ (earliest on ties).
    pub fn minimum(&self) -> Option<&WitnessPoint> {
        self.points
            .iter()
            .reduce(|best, p| if p.delta < best.delta { p } else { best })
    }

    /// Whether some point has `Δ < 0`.
    pub fn goes_negative(&self) -> bool {
        self.points.iter().any(|p| p.delta < 0.0)
    }
}

/// `0, 0.05, ..., 1.5`.
pub fn default_gammas() -> Vec<f64> {
    (0..=30).map(|k| k as f64 * 0.05).collect()
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Gaussian-corrected witness `Δ(UρU†)` for each γ, with ζ chosen to
/// minimize the mean photon number of the corrected state.
pub fn corrected_delta_curve(rho: &DensityMatrix, gammas: &[f64], opts: &WitnessOptions) -> Result<WitnessCurve> {
    if !(opts.zeta_max > 0.0 && opts.zeta_tol > 0.0) {
        return Err(invalid("zeta", "search half-width and tolerance must be positive"));
    }
    for &g in gammas {
        if !(g >= 0.0 && g.is_finite()) {
            return Err(invalid("gamma", format!("{g} must be >= 0")));
        }
        if std::f64::consts::SQRT_2 * g > SAFE_RADIUS {
            return Err(Error::OutsideSafeRegion {
                x: std::f64::consts::SQRT_2 * g,
                p: 0.0,
            });
        }
    }
    let dip = dip_direction(rho)?;
    let phi = dip.phi;
    let moments = LowMoments::of(rho);
    let direction = Complex64::from_polar(1.0, phi);
    let squeeze_axis = Complex64::from_polar(1.0, 2.0 * phi);
    let points = gammas
        .par_iter()
        .map(|&gamma| {
            let shifted = moments.displaced(-direction * gamma);
            let origin = wigner_at(rho, PhaseSpacePoint::from_polar(std::f64::consts::SQRT_2 * gamma, phi))?;
            let nbar = |zeta: f64| shifted.squeezed_mean_photon_number(squeeze_axis * zeta);
            let zeta_opt = golden_section(nbar, -opts.zeta_max, opts.zeta_max, opts.zeta_tol);
            Ok(WitnessPoint {
                gamma,
                zeta_opt,
                phi,
                delta: origin - gaussian_bound(nbar(zeta_opt)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WitnessCurve {
        phi,
        phi_undefined: dip.undefined,
        points,
    })
}
