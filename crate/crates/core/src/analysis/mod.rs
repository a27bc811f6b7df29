//! Wigner functions, the non-Gaussianity witness and the loss/dephasing
//! decomposition of reconstructed states.

pub mod calibration;
pub mod decomposition;
pub mod wigner;
pub mod witness;

pub use calibration::{calibrate_initial_loss, Calibration};
pub use decomposition::{estimate_loss_dephasing, qubit_subspace, DecompositionResult, QubitBlock};
pub use wigner::{
    dip_direction, find_wigner_minimum, line_integral, wigner_at, wigner_at_origin, wigner_grid, DipDirection,
    PhaseSpacePoint, WignerGrid, WignerMinimum,
};
pub use witness::{
    corrected_delta_curve, default_gammas, nongaussianity_delta, WitnessCurve, WitnessOptions, WitnessPoint,
};
