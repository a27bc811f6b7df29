//! Simulation and analysis toolkit for phase-sensitive single-mode optical
//! states `α|0⟩ + βe^{iθ}|1⟩` held in a cavity quantum memory.
//!
//! Everything lives in a truncated Fock basis. The pipeline is
//!
//! 1. [`preparation`]: heralded creation from a two-mode squeezed vacuum,
//! 2. [`memory`]: the storage channel (loss, detuning rotation, dephasing),
//! 3. [`homodyne`]: quadrature statistics, sampling and temporal modes,
//! 4. [`tomography`]: iterative maximum-likelihood reconstruction,
//! 5. [`analysis`]: Wigner functions, the non-Gaussianity witness and the
//!    loss/dephasing decomposition.
//!
//! Conventions used throughout: `x̂ = (â+â†)/√2`, `p̂ = (â−â†)/(i√2)`, `ħ = 1`,
//! so the vacuum has quadrature variance 1/2 and `W(0,0) = 1/π`.

#![forbid(unsafe_code)]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod fock;
pub mod homodyne;
pub mod io;
pub mod memory;
pub mod preparation;
pub mod rng;
pub mod tomography;

pub use error::{Error, Result};
pub use fock::{DensityMatrix, FockDim, Operator};

pub use num_complex::Complex64;
