//! Heralded preparation of `α|0⟩ + βe^{iθ}|1⟩`.
//!
//! A two-mode squeezed vacuum `√(1−λ²) Σ λⁿ|n⟩_s|n⟩_i` is created, the idler
//! is displaced by a weak coherent beam `δ` and then hits a click detector.
//! For weak pumping the conditional signal state is `∝ δ|0⟩ + λ|1⟩`, so
//! `|δ|` sets the amplitude ratio and the phase of `δ` sets θ with
//! `θ = −arg δ`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock::{displacement_operator, CMatrix, CVector, DensityMatrix, FockDim, TruncationGuard};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClickModel {
    /// Idler projected on `|1⟩⟨1|`.
    ExactOnePhoton,
    /// Threshold detector: `I − |0⟩⟨0|`.
    NotVacuum,
}

impl std::str::FromStr for ClickModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact_one_photon" => Ok(ClickModel::ExactOnePhoton),
            "not_vacuum" => Ok(ClickModel::NotVacuum),
            other => Err(invalid(
                "click_model",
                format!("`{other}` (expected exact_one_photon or not_vacuum)"),
            )),
        }
    }
}

impl std::fmt::Display for ClickModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ClickModel::ExactOnePhoton => "exact_one_photon",
            ClickModel::NotVacuum => "not_vacuum",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreparationParams {
    /// `tanh γ` of the squeezer. Not reported experimentally; 0.1 is a
    /// weak-pump default.
    pub lambda: f64,
    /// Displacement applied to the idler before the detector.
    pub idler_displacement: Complex64,
    pub click_model: ClickModel,
    /// Fraction of true clicks.
    pub eta: f64,
}

impl Default for PreparationParams {
    fn default() -> Self {
        PreparationParams {
            lambda: 0.1,
            idler_displacement: Complex64::new(0.0995, 0.0),
            click_model: ClickModel::ExactOnePhoton,
            eta: 1.0,
        }
    }
}

impl PreparationParams {
    pub fn validate(&self, dim: FockDim) -> Result<()> {
        if !(0.0..1.0).contains(&self.lambda) {
            return Err(Error::NonNormalizable(self.lambda));
        }
        check_eta(self.eta)?;
        let bound = TruncationGuard::default().max_displacement(dim);
        let amp = self.idler_displacement.norm();
        if !amp.is_finite() || amp > bound {
            return Err(Error::TruncationRisk {
                what: "|idler displacement|",
                value: amp,
                bound,
                dim: dim.get(),
            });
        }
        Ok(())
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(invalid("eta", format!("{eta} outside [0,1]")));
    }
    Ok(())
}

/// Amplitude tensor `c[(signal, idler)]` of a two-mode pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoModeState {
    pub amplitudes: CMatrix,
}

impl TwoModeState {
    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn probability(&self, signal: usize, idler: usize) -> f64 {
        self.amplitudes[(signal, idler)].norm_sqr()
    }
}

/// `c_nn = √(1−λ²)·λⁿ`, truncated at `dim` levels per mode.
pub fn two_mode_squeezed_vacuum(lambda: f64, dim: FockDim) -> Result<TwoModeState> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::NonNormalizable(lambda));
    }
    let d = dim.get();
    let norm = (1.0 - lambda * lambda).sqrt();
    let mut c = DMatrix::zeros(d, d);
    let mut amp = norm;
    for n in 0..d {
        c[(n, n)] = Complex64::new(amp, 0.0);
        amp *= lambda;
    }
    Ok(TwoModeState { amplitudes: c })
}

#[derive(Clone, Debug)]
pub struct HeraldedState {
    pub state: DensityMatrix,
    /// Probability per trial of a true click.
    pub click_probability: f64,
}

impl HeraldedState {
    /// True and total (including fake) herald rates for a given trial rate.
    pub fn herald_rates(&self, trial_rate: f64, eta: f64) -> (f64, f64) {
        let real = self.click_probability * trial_rate;
        let total = if eta > 0.0 { real / eta } else { f64::INFINITY };
        (real, total)
    }
}

/// Conditional signal state after displacing the idler and clicking, with
/// the fake-click vacuum admixture applied last.
pub fn herald_superposition(params: &PreparationParams, dim: FockDim) -> Result<HeraldedState> {
    params.validate(dim)?;
    let tmsv = two_mode_squeezed_vacuum(params.lambda, dim)?;
    let disp = displacement_operator(params.idler_displacement, dim)?;
    // idler index is the column: c'[s, k] = Σ_n c[s, n] D[k, n]
    let displaced = &tmsv.amplitudes * disp.matrix().transpose();
    let d = dim.get();
    let mut unnormalized = CMatrix::zeros(d, d);
    let outcomes: Vec<usize> = match params.click_model {
        ClickModel::ExactOnePhoton => vec![1],
        ClickModel::NotVacuum => (1..d).collect(),
    };
    for k in outcomes {
        let ket: CVector = displaced.column(k).into_owned();
        unnormalized += &ket * ket.adjoint();
    }
    let p_click = unnormalized.trace().re;
    if !(p_click > 1e-300) {
        return Err(Error::DegenerateHerald(p_click));
    }
    let heralded = DensityMatrix::from_unnormalized(unnormalized)?;
    let state = admix_fake_clicks(&heralded, params.eta)?;
    Ok(HeraldedState {
        state,
        click_probability: p_click,
    })
}

/// Pure state `α|0⟩ + βe^{iθ}|1⟩` embedded in `dim` levels.
pub fn ideal_superposition(alpha: f64, beta: f64, theta: f64, dim: FockDim) -> Result<DensityMatrix> {
    if alpha < 0.0 || beta < 0.0 || !theta.is_finite() {
        return Err(invalid(
            "alpha/beta",
            "amplitudes must be non-negative and theta finite",
        ));
    }
    if (alpha * alpha + beta * beta - 1.0).abs() > 1e-9 {
        return Err(invalid(
            "alpha/beta",
            format!("alpha² + beta² = {} is not 1", alpha * alpha + beta * beta),
        ));
    }
    let mut ket = CVector::zeros(dim.get());
    ket[0] = Complex64::new(alpha, 0.0);
    ket[1] = Complex64::from_polar(beta, theta);
    DensityMatrix::from_ket(&ket)
}

/// `ηρ + (1−η)|0⟩⟨0|`.
pub fn admix_fake_clicks(rho: &DensityMatrix, eta: f64) -> Result<DensityMatrix> {
    check_eta(eta)?;
    rho.mix(eta, &DensityMatrix::vacuum(rho.dim()))
}

/// True-click fraction from the total and the fake (no-pump) herald rates.
pub fn eta_from_rates(total_rate: f64, fake_rate: f64) -> Result<f64> {
    if !(total_rate > 0.0) || !(0.0..=total_rate).contains(&fake_rate) {
        return Err(invalid(
            "rates",
            format!("need 0 <= fake ({fake_rate}) <= total ({total_rate})"),
        ));
    }
    Ok(1.0 - fake_rate / total_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dim(d: usize) -> FockDim {
        FockDim::new(d).unwrap()
    }

    #[test]
    fn tmsv_closed_form() {
        let v = two_mode_squeezed_vacuum(0.0, dim(5)).unwrap();
        assert_eq!(v.probability(0, 0), 1.0);
        assert_abs_diff_eq!(v.norm_squared(), 1.0);
        let s = two_mode_squeezed_vacuum(0.2, dim(20)).unwrap();
        assert_abs_diff_eq!(s.probability(1, 1) / s.probability(0, 0), 0.04, epsilon = 1e-15);
        assert!((1.0 - s.norm_squared()).abs() <= 0.2f64.powi(40));
        assert!(s.amplitudes[(1, 2)].norm() == 0.0);
        assert!(matches!(
            two_mode_squeezed_vacuum(1.0, dim(5)),
            Err(Error::NonNormalizable(_))
        ));
    }

    #[test]
    fn blocked_displacement_heralds_single_photon() {
        for lambda in [0.05, 0.1, 0.4] {
            let params = PreparationParams {
                lambda,
                idler_displacement: Complex64::new(0.0, 0.0),
                click_model: ClickModel::ExactOnePhoton,
                eta: 1.0,
            };
            let h = herald_superposition(&params, dim(20)).unwrap();
            let one = DensityMatrix::fock(1, dim(20)).unwrap();
            assert!(h.state.max_abs_diff(&one).unwrap() < 1e-15);
        }
    }

    #[test]
    fn fake_click_admixture() {
        let one = DensityMatrix::fock(1, dim(4)).unwrap();
        assert_eq!(admix_fake_clicks(&one, 1.0).unwrap(), one);
        assert_eq!(admix_fake_clicks(&one, 0.0).unwrap(), DensityMatrix::vacuum(dim(4)));
        let eta = eta_from_rates(1500.0, 50.0).unwrap();
        assert_abs_diff_eq!(eta, 29.0 / 30.0, epsilon = 1e-15);
        let mixed = admix_fake_clicks(&one, eta).unwrap();
        assert_abs_diff_eq!(mixed.get(1, 1).re, 29.0 / 30.0, epsilon = 1e-15);
        assert!(admix_fake_clicks(&one, 1.2).is_err());
    }

    #[test]
    fn ideal_superposition_examples() {
        let d = dim(6);
        assert_eq!(ideal_superposition(1.0, 0.0, 0.3, d).unwrap(), DensityMatrix::vacuum(d));
        let h = 0.5f64.sqrt();
        let plus = ideal_superposition(h, h, 0.0, d).unwrap();
        for (m, n) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert_abs_diff_eq!(plus.get(m, n).re, 0.5, epsilon = 1e-15);
        }
        let asym = ideal_superposition(1.0 / 3f64.sqrt(), (2.0 / 3.0f64).sqrt(), 0.0, d).unwrap();
        assert_abs_diff_eq!(asym.get(1, 1).re, 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(asym.get(0, 1).norm(), 2f64.sqrt() / 3.0, epsilon = 1e-15);
        assert!(ideal_superposition(0.6, 0.6, 0.0, d).is_err());
    }

    #[test]
    fn click_model_parses() {
        assert_eq!("not_vacuum".parse::<ClickModel>().unwrap(), ClickModel::NotVacuum);
        assert!("apd".parse::<ClickModel>().is_err());
    }
}
