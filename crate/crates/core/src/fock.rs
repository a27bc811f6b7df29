//! Truncated Fock-space linear algebra.
//!
//! Basis states `|0⟩ .. |dim-1⟩`. Unitaries built from a truncated generator
//! (displacement, squeezing) are exactly unitary on the truncated space but
//! only agree with the infinite-dimensional operator on a low-photon
//! sub-block; the [`TruncationGuard`] keeps amplitudes small enough that this
//! sub-block covers the states we care about.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const HERMITICITY_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Number of Fock levels retained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct FockDim(usize);

impl FockDim {
    /// Working dimension for simulations.
    pub const COMPUTE: FockDim = FockDim(20);
    /// Dimension used for reconstructions and reports.
    pub const REPORT: FockDim = FockDim(10);

    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        Ok(FockDim(dim))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

impl TryFrom<usize> for FockDim {
    type Error = Error;
    fn try_from(dim: usize) -> Result<Self> {
        FockDim::new(dim)
    }
}

impl From<FockDim> for usize {
    fn from(d: FockDim) -> usize {
        d.0
    }
}

impl fmt::Display for FockDim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Bounds on operator amplitudes relative to the truncation dimension.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationGuard {
    /// `|α| ≤ displacement_factor · √dim`.
    pub displacement_factor: f64,
    /// `|z| ≤ max_squeezing` once `dim ≥ squeezing_reference_dim`; scaled
    /// down linearly below that.
    pub max_squeezing: f64,
    pub squeezing_reference_dim: usize,
}

impl Default for TruncationGuard {
    fn default() -> Self {
        TruncationGuard {
            displacement_factor: 0.25,
            max_squeezing: 1.5,
            squeezing_reference_dim: 20,
        }
    }
}

impl TruncationGuard {
    /// No limits at all. Only for callers that check accuracy themselves.
    pub fn unchecked() -> Self {
        TruncationGuard {
            displacement_factor: f64::INFINITY,
            max_squeezing: f64::INFINITY,
            squeezing_reference_dim: 2,
        }
    }

    pub fn max_displacement(&self, dim: FockDim) -> f64 {
        self.displacement_factor * (dim.get() as f64).sqrt()
    }

    pub fn max_squeezing(&self, dim: FockDim) -> f64 {
        let scale = (dim.get() as f64 / self.squeezing_reference_dim as f64).min(1.0);
        self.max_squeezing * scale
    }
}

fn check_square(m: &CMatrix) -> Result<FockDim> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(m.nrows(), m.ncols()));
    }
    FockDim::new(m.nrows())
}

/// A (not necessarily unitary) operator on the truncated space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    dim: FockDim,
    matrix: CMatrix,
}

impl Operator {
    pub fn from_matrix(matrix: CMatrix) -> Result<Self> {
        let dim = check_square(&matrix)?;
        Ok(Operator { dim, matrix })
    }

    pub fn identity(dim: FockDim) -> Self {
        Operator {
            dim,
            matrix: CMatrix::identity(dim.get(), dim.get()),
        }
    }

    pub fn dim(&self) -> FockDim {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[(row, col)]
    }

    pub fn adjoint(&self) -> Operator {
        Operator {
            dim: self.dim,
            matrix: self.matrix.adjoint(),
        }
    }

    /// `self · other`.
    pub fn compose(&self, other: &Operator) -> Result<Operator> {
        same_dim(self.dim, other.dim)?;
        Ok(Operator {
            dim: self.dim,
            matrix: &self.matrix * &other.matrix,
        })
    }

    pub fn apply(&self, ket: &CVector) -> Result<CVector> {
        if ket.len() != self.dim.get() {
            return Err(Error::DimensionMismatch(self.dim.get(), ket.len()));
        }
        Ok(&self.matrix * ket)
    }

    /// `U ρ U†`. Trace is renormalized to absorb rounding; for a truncated
    /// unitary the correction is at machine precision.
    pub fn conjugate(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        same_dim(self.dim, rho.dim)?;
        let m = &self.matrix * &rho.matrix * self.matrix.adjoint();
        DensityMatrix::from_unnormalized(m)
    }

    /// Largest entrywise deviation of `U†U` from the identity on the
    /// leading `block × block` corner.
    pub fn unitarity_defect(&self, block: usize) -> f64 {
        let block = block.min(self.dim.get());
        let prod = self.matrix.adjoint() * &self.matrix;
        let mut worst = 0.0_f64;
        for i in 0..block {
            for j in 0..block {
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((prod[(i, j)] - target).norm());
            }
        }
        worst
    }
}

impl std::ops::Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.compose(rhs).expect("operator dimensions differ")
    }
}

fn same_dim(a: FockDim, b: FockDim) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch(a.get(), b.get()));
    }
    Ok(())
}

/// `⟨n−1|â|n⟩ = √n`.
pub fn annihilation_operator(dim: FockDim) -> Operator {
    let d = dim.get();
    let mut m = CMatrix::zeros(d, d);
    for n in 1..d {
        m[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    Operator { dim, matrix: m }
}

pub fn creation_operator(dim: FockDim) -> Operator {
    annihilation_operator(dim).adjoint()
}

pub fn number_operator(dim: FockDim) -> Operator {
    let d = dim.get();
    let diag = CVector::from_iterator(d, (0..d).map(|n| Complex64::new(n as f64, 0.0)));
    Operator {
        dim,
        matrix: CMatrix::from_diagonal(&diag),
    }
}

/// Phase-space rotation `exp(−iθ â†â)` (exact, diagonal).
pub fn rotation_operator(theta: f64, dim: FockDim) -> Operator {
    let d = dim.get();
    let diag = CVector::from_iterator(d, (0..d).map(|n| Complex64::from_polar(1.0, -theta * n as f64)));
    Operator {
        dim,
        matrix: CMatrix::from_diagonal(&diag),
    }
}

/// `D(α) = exp(αâ† − α*â)` on the truncated space.
///
/// Accurate on the sub-block `[0, dim/2)` while `|α| ≤ 0.25·√dim`.
pub fn displacement_operator(amplitude: Complex64, dim: FockDim) -> Result<Operator> {
    displacement_operator_guarded(amplitude, dim, &TruncationGuard::default())
}

pub fn displacement_operator_guarded(amplitude: Complex64, dim: FockDim, guard: &TruncationGuard) -> Result<Operator> {
    let bound = guard.max_displacement(dim);
    if !amplitude.norm().is_finite() || amplitude.norm() > bound {
        return Err(Error::TruncationRisk {
            what: "|displacement|",
            value: amplitude.norm(),
            bound,
            dim: dim.get(),
        });
    }
    if amplitude == ZERO {
        return Ok(Operator::identity(dim));
    }
    let a = annihilation_operator(dim).matrix;
    let generator = a.adjoint() * amplitude - a * amplitude.conj();
    Ok(Operator {
        dim,
        matrix: generator.exp(),
    })
}

/// `S(z) = exp[(z/2)â†² − (z*/2)â²]`.
///
/// With this sign, real `z > 0` stretches x̂: `S†x̂S = e^{z}x̂`, so
/// `S(z)|0⟩` has x-variance `e^{2z}/2`. Accurate on `[0, dim/2)` within the
/// guard.
pub fn squeezing_operator(z: Complex64, dim: FockDim) -> Result<Operator> {
    squeezing_operator_guarded(z, dim, &TruncationGuard::default())
}

pub fn squeezing_operator_guarded(z: Complex64, dim: FockDim, guard: &TruncationGuard) -> Result<Operator> {
    let bound = guard.max_squeezing(dim);
    if !z.norm().is_finite() || z.norm() > bound {
        return Err(Error::TruncationRisk {
            what: "|squeezing|",
            value: z.norm(),
            bound,
            dim: dim.get(),
        });
    }
    if z == ZERO {
        return Ok(Operator::identity(dim));
    }
    let a = annihilation_operator(dim).matrix;
    let a2 = &a * &a;
    let generator = a2.adjoint() * (z * 0.5) - a2 * (z.conj() * 0.5);
    Ok(Operator {
        dim,
        matrix: generator.exp(),
    })
}

/// Exact matrix elements `⟨m|D(β)|n⟩` of the untruncated displacement for
/// `m, n < dim`.
///
/// For `m ≥ n`, `⟨m|D(β)|n⟩ = √(n!/m!) β^{m−n} e^{−|β|²/2} L_n^{(m−n)}(|β|²)`,
/// with the Laguerre polynomials from their three-term recurrence (stable,
/// unlike a recurrence across matrix rows). The upper triangle follows from
/// `D(β)† = D(−β)`. There is no truncation error, so no guard applies.
pub fn displacement_elements(beta: Complex64, dim: FockDim) -> CMatrix {
    let d = dim.get();
    let x = beta.norm_sqr();
    let r = beta.norm();
    let phase = if r > 0.0 { beta / r } else { Complex64::new(1.0, 0.0) };
    let mut ln_fact = vec![0.0_f64; d];
    for k in 1..d {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }
    let mut m = CMatrix::zeros(d, d);
    let mut lag = vec![0.0_f64; d];
    for a in 0..d {
        if a > 0 && r == 0.0 {
            break;
        }
        let af = a as f64;
        let len = d - a;
        lag[0] = 1.0;
        if len > 1 {
            lag[1] = 1.0 + af - x;
        }
        for k in 1..len.saturating_sub(1) {
            let kf = k as f64;
            lag[k + 1] = ((2.0 * kf + 1.0 + af - x) * lag[k] - (kf + af) * lag[k - 1]) / (kf + 1.0);
        }
        let lower_phase = phase.powu(a as u32);
        let upper_phase = if a % 2 == 0 {
            lower_phase.conj()
        } else {
            -lower_phase.conj()
        };
        let ln_r = if a > 0 { af * r.ln() } else { 0.0 };
        for n in 0..len {
            let row = n + a;
            let magnitude = (0.5 * (ln_fact[n] - ln_fact[row]) - 0.5 * x + ln_r).exp() * lag[n];
            m[(row, n)] = lower_phase * magnitude;
            if a > 0 {
                m[(n, row)] = upper_phase * magnitude;
            }
        }
    }
    m
}

/// Truncated-basis density matrix: Hermitian, unit trace, positive
/// semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    dim: FockDim,
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validates every invariant (Hermitian to 1e-12, trace 1 to 1e-12,
    /// eigenvalues ≥ −1e-10).
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let dim = check_square(&matrix)?;
        let rho = DensityMatrix { dim, matrix };
        rho.validate()?;
        Ok(rho)
    }

    /// Hermitizes and rescales to unit trace without an eigenvalue check.
    /// For maps that preserve positivity by construction.
    pub(crate) fn from_unnormalized(matrix: CMatrix) -> Result<Self> {
        let dim = check_square(&matrix)?;
        let herm = (&matrix + matrix.adjoint()) * Complex64::new(0.5, 0.0);
        let tr = herm.trace().re;
        if !(tr.is_finite() && tr > 0.0) {
            return Err(Error::InvalidState(format!("trace {tr} cannot be normalized")));
        }
        Ok(DensityMatrix {
            dim,
            matrix: herm / Complex64::new(tr, 0.0),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim.get();
        for i in 0..d {
            for j in 0..d {
                let z = self.matrix[(i, j)];
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(Error::InvalidState(format!("non-finite element ({i},{j})")));
                }
                let dev = (z - self.matrix[(j, i)].conj()).norm();
                if dev > HERMITICITY_TOL {
                    return Err(Error::InvalidState(format!(
                        "not Hermitian at ({i},{j}): deviation {dev:e}"
                    )));
                }
            }
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let min = self.min_eigenvalue();
        if min < -PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    pub fn vacuum(dim: FockDim) -> Self {
        Self::fock(0, dim).expect("vacuum fits in any dimension")
    }

    pub fn fock(n: usize, dim: FockDim) -> Result<Self> {
        if n >= dim.get() {
            return Err(invalid("n", format!("Fock level {n} outside dim {dim}")));
        }
        let mut m = CMatrix::zeros(dim.get(), dim.get());
        m[(n, n)] = ONE;
        Ok(DensityMatrix { dim, matrix: m })
    }

    /// `|ψ⟩⟨ψ|/⟨ψ|ψ⟩`.
    pub fn from_ket(ket: &CVector) -> Result<Self> {
        let norm = ket.norm_squared();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidState("zero or non-finite ket".into()));
        }
        let m = ket * ket.adjoint() / Complex64::new(norm, 0.0);
        let dim = check_square(&m)?;
        Ok(DensityMatrix { dim, matrix: m })
    }

    /// Coherent state from its closed-form amplitudes, renormalized after
    /// truncation.
    pub fn coherent(alpha: Complex64, dim: FockDim) -> Self {
        let mut amp = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
        let ket = CVector::from_iterator(
            dim.get(),
            (0..dim.get()).map(|n| {
                if n > 0 {
                    amp *= alpha / (n as f64).sqrt();
                }
                amp
            }),
        );
        Self::from_ket(&ket).expect("coherent amplitudes are never all zero")
    }

    pub fn maximally_mixed(dim: FockDim) -> Self {
        let d = dim.get();
        DensityMatrix {
            dim,
            matrix: CMatrix::identity(d, d) / Complex64::new(d as f64, 0.0),
        }
    }

    pub fn dim(&self) -> FockDim {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.matrix[(m, n)]
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim.get()).map(|n| self.matrix[(n, n)].re).collect()
    }

    /// `pρ + (1−p)σ`.
    pub fn mix(&self, p: f64, other: &DensityMatrix) -> Result<DensityMatrix> {
        same_dim(self.dim, other.dim)?;
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid("p", format!("mixing weight {p} outside [0,1]")));
        }
        Ok(DensityMatrix {
            dim: self.dim,
            matrix: &self.matrix * Complex64::new(p, 0.0) + &other.matrix * Complex64::new(1.0 - p, 0.0),
        })
    }

    /// Zero-pads to a larger dimension.
    pub fn embed(&self, dim: FockDim) -> Result<DensityMatrix> {
        if dim < self.dim {
            return Err(invalid("dim", format!("cannot embed dim {} into {dim}", self.dim)));
        }
        let mut m = CMatrix::zeros(dim.get(), dim.get());
        m.view_mut((0, 0), (self.dim.get(), self.dim.get()))
            .copy_from(&self.matrix);
        Ok(DensityMatrix { dim, matrix: m })
    }

    /// Keeps the leading `dim` levels and renormalizes.
    pub fn truncate(&self, dim: FockDim) -> Result<DensityMatrix> {
        if dim > self.dim {
            return Err(invalid("dim", format!("cannot truncate dim {} to {dim}", self.dim)));
        }
        let block = self.matrix.view((0, 0), (dim.get(), dim.get())).into_owned();
        DensityMatrix::from_unnormalized(block)
    }

    /// Entrywise map `ρ_mn ↦ f(m, n)·ρ_mn`. Caller guarantees the result is
    /// still a state.
    pub(crate) fn map_elements(&self, f: impl Fn(usize, usize) -> Complex64) -> Result<DensityMatrix> {
        let d = self.dim.get();
        let m = CMatrix::from_fn(d, d, |i, j| self.matrix[(i, j)] * f(i, j));
        DensityMatrix::from_unnormalized(m)
    }

    /// `exp(−iθn̂) ρ exp(iθn̂)`.
    pub fn rotated(&self, theta: f64) -> DensityMatrix {
        self.map_elements(|m, n| Complex64::from_polar(1.0, -theta * (m as f64 - n as f64)))
            .expect("rotation preserves the trace")
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> Result<f64> {
        same_dim(self.dim, other.dim)?;
        Ok((&self.matrix - &other.matrix)
            .iter()
            .fold(0.0, |acc, z| acc.max(z.norm())))
    }
}

/// `Tr(ρ â†â)`.
pub fn mean_photon_number(rho: &DensityMatrix) -> f64 {
    rho.diagonal().iter().enumerate().map(|(n, p)| n as f64 * p).sum()
}

fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let eig = SymmetricEigen::new(m.clone());
    let roots = CVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| Complex64::new(l.max(0.0).sqrt(), 0.0)),
    );
    &eig.eigenvectors * CMatrix::from_diagonal(&roots) * eig.eigenvectors.adjoint()
}

/// Uhlmann fidelity `(Tr√(√ρ σ √ρ))²`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dim(rho.dim, sigma.dim)?;
    let root = psd_sqrt(&rho.matrix);
    let inner = &root * &sigma.matrix * &root;
    let inner = (&inner + inner.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(inner);
    let s: f64 = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).sum();
    Ok(s * s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn dim(d: usize) -> FockDim {
        FockDim::new(d).unwrap()
    }

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    /// Coherent amplitudes e^{-|α|²/2} αⁿ/√n!, computed directly.
    fn coherent_oracle(alpha: Complex64, n: usize) -> Complex64 {
        alpha.powu(n as u32) * (-0.5 * alpha.norm_sqr()).exp() / factorial(n).sqrt()
    }

    #[test]
    fn dimension_below_two_is_rejected() {
        assert!(matches!(FockDim::new(1), Err(Error::InvalidDimension(1))));
        assert!(matches!(FockDim::new(0), Err(Error::InvalidDimension(0))));
    }

    #[test]
    fn annihilation_entries() {
        let a = annihilation_operator(dim(2));
        assert_eq!(
            a.matrix(),
            &CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)])
        );
        let a4 = annihilation_operator(dim(4));
        assert_abs_diff_eq!(a4.get(2, 3).re, 1.7320508, epsilon = 1e-7);
        let n = creation_operator(dim(6))
            .compose(&annihilation_operator(dim(6)))
            .unwrap();
        for k in 0..6 {
            assert_abs_diff_eq!(n.get(k, k).re, k as f64, epsilon = 1e-14);
        }
        assert!((n.matrix() - number_operator(dim(6)).matrix()).norm() < 1e-14);
    }

    #[test]
    fn zero_displacement_and_squeezing_are_identity() {
        assert_eq!(
            displacement_operator(c(0., 0.), dim(8)).unwrap(),
            Operator::identity(dim(8))
        );
        assert_eq!(
            squeezing_operator(c(0., 0.), dim(8)).unwrap(),
            Operator::identity(dim(8))
        );
    }

    #[test]
    fn displaced_vacuum_matches_coherent_oracle() {
        let d = dim(20);
        let alpha = c(0.3, 0.4);
        let op = displacement_operator(alpha, d).unwrap();
        for n in 0..20 {
            let got = op.get(n, 0);
            let want = coherent_oracle(alpha, n);
            assert!((got - want).norm() < 1e-8, "n={n}: {got} vs {want}");
        }
        // ⟨n⟩ of D(0.5)|0⟩ against the Poisson weights
        let op = displacement_operator(c(0.5, 0.), d).unwrap();
        let mean: f64 = (0..20).map(|n| n as f64 * op.get(n, 0).norm_sqr()).sum();
        let poisson: f64 = (0..20)
            .map(|n| n as f64 * coherent_oracle(c(0.5, 0.), n).norm_sqr())
            .sum();
        assert_abs_diff_eq!(mean, 0.25, epsilon = 1e-8);
        assert_abs_diff_eq!(mean, poisson, epsilon = 1e-10);
    }

    #[test]
    fn displacement_guard_is_a_hard_error() {
        let err = displacement_operator(c(1.2, 0.), dim(20)).unwrap_err();
        assert!(matches!(err, Error::TruncationRisk { .. }));
        let relaxed = TruncationGuard {
            displacement_factor: 0.5,
            ..TruncationGuard::default()
        };
        assert!(displacement_operator_guarded(c(1.2, 0.), dim(20), &relaxed).is_ok());
        assert!(matches!(
            squeezing_operator(c(1.6, 0.), dim(30)),
            Err(Error::TruncationRisk { .. })
        ));
        assert!(matches!(
            squeezing_operator(c(1.0, 0.), dim(10)),
            Err(Error::TruncationRisk { .. })
        ));
    }

    #[test]
    fn squeezing_sign_pinned_by_x_variance() {
        let d = dim(30);
        let s = squeezing_operator(c(0.5, 0.), d).unwrap();
        let rho = s.conjugate(&DensityMatrix::vacuum(d)).unwrap();
        // Tr(ρ x̂²) with x̂ built independently from â
        let a = annihilation_operator(d).into_matrix();
        let x = (&a + a.adjoint()) / c(2f64.sqrt(), 0.);
        let var = (rho.matrix() * &x * &x).trace().re;
        assert_abs_diff_eq!(var, 0.5 * 1f64.exp(), epsilon = 1e-8);
        assert!(s.get(1, 0).norm() < 1e-15);
    }

    #[test]
    fn squeezing_preserves_parity() {
        let d = dim(24);
        for z in [c(0.3, 0.1), c(-0.7, 0.4), c(0.0, 1.2)] {
            let s = squeezing_operator(z, d).unwrap();
            for m in 0..24 {
                for n in 0..24 {
                    if (m + n) % 2 == 1 {
                        assert_eq!(s.get(m, n), c(0., 0.));
                    }
                }
            }
        }
    }

    #[test]
    fn displacement_inverse_and_unitarity_on_safe_block() {
        let d = dim(20);
        let alpha = c(0.7, -0.6);
        let plus = displacement_operator(alpha, d).unwrap();
        let minus = displacement_operator(-alpha, d).unwrap();
        let prod = plus.compose(&minus).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((prod.get(i, j) - c(target, 0.)).norm() < 1e-8);
            }
        }
        assert!(plus.unitarity_defect(20) < 1e-12);
    }

    #[test]
    fn rotation_covariance_of_displacement() {
        let d = dim(30);
        let alpha = c(0.8, 0.5);
        let theta = 0.9;
        let r = rotation_operator(theta, d);
        let lhs = r
            .compose(&displacement_operator(alpha, d).unwrap())
            .unwrap()
            .compose(&r.adjoint())
            .unwrap();
        let rhs = displacement_operator(alpha * Complex64::from_polar(1.0, -theta), d).unwrap();
        for i in 0..15 {
            for j in 0..15 {
                assert!((lhs.get(i, j) - rhs.get(i, j)).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn closed_form_elements_match_padded_exponential() {
        let big = dim(160);
        for beta in [c(0.0, 0.0), c(0.4, -0.2), c(-1.3, 2.1), c(3.5, 2.0), c(-2.4, -3.2)] {
            let exact = displacement_elements(beta, dim(40));
            let op = displacement_operator_guarded(beta, big, &TruncationGuard::unchecked()).unwrap();
            for m in 0..40 {
                for n in 0..40 {
                    assert!(
                        (exact[(m, n)] - op.get(m, n)).norm() < 1e-10,
                        "beta={beta} ({m},{n}): {} vs {}",
                        exact[(m, n)],
                        op.get(m, n)
                    );
                }
            }
        }
    }

    #[test]
    fn mean_photon_number_examples() {
        let d = dim(4);
        assert_eq!(mean_photon_number(&DensityMatrix::vacuum(d)), 0.0);
        assert_eq!(mean_photon_number(&DensityMatrix::fock(1, d).unwrap()), 1.0);
        let plus =
            DensityMatrix::from_ket(&CVector::from_vec(vec![c(1., 0.), c(1., 0.), c(0., 0.), c(0., 0.)])).unwrap();
        assert_abs_diff_eq!(mean_photon_number(&plus), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn fidelity_examples() {
        let d = dim(3);
        let v = DensityMatrix::vacuum(d);
        let one = DensityMatrix::fock(1, d).unwrap();
        assert_abs_diff_eq!(fidelity(&v, &v).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fidelity(&v, &one).unwrap(), 0.0, epsilon = 1e-12);
        let mixed = v.mix(0.5, &one).unwrap();
        assert_abs_diff_eq!(fidelity(&v, &mixed).unwrap(), 0.5, epsilon = 1e-12);
        assert!(matches!(
            fidelity(&v, &DensityMatrix::vacuum(dim(4))),
            Err(Error::DimensionMismatch(3, 4))
        ));
    }

    #[test]
    fn constructor_rejects_broken_states() {
        let bad_trace = CMatrix::identity(2, 2);
        assert!(DensityMatrix::new(bad_trace).is_err());
        let mut non_herm = CMatrix::zeros(2, 2);
        non_herm[(0, 0)] = c(1., 0.);
        non_herm[(0, 1)] = c(0.1, 0.);
        assert!(DensityMatrix::new(non_herm).is_err());
        let not_psd = CMatrix::from_row_slice(2, 2, &[c(1.5, 0.), c(0., 0.), c(0., 0.), c(-0.5, 0.)]);
        assert!(DensityMatrix::new(not_psd).is_err());
    }
}
