//! Iterative maximum-likelihood reconstruction (`ρ ← N[RρR]`) from
//! phase-tagged quadrature samples.
//!
//! Each record `(θ_j, x_j)` is a projector onto `|x_j, θ_j⟩` with amplitudes
//! `⟨n|x, θ⟩ = ψ_n(x) e^{inθ}`. Samples are grouped by phase so the inner
//! loops only touch real numbers: with `B_θ = Re(ρ_mn e^{i(n−m)θ})`,
//! `p_j = ψᵀ B_θ ψ` and `R_θ = Σ_j (f_j/p_j) ψψᵀ`, which is rotated back by
//! `e^{i(m−n)θ}` when summed into `R`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock::{CMatrix, DensityMatrix, FockDim};
use crate::homodyne::{fock_wavefunctions, phase_kernel, QuadratureSample};

/// Samples per parallel partition. Partitions are reduced in index order,
/// so the result does not depend on the thread count.
const CHUNK: usize = 2048;
/// Allowed log-likelihood decrease before a step is rejected.
const MONOTONE_TOL: f64 = 1e-10;
const MIN_DILUTION: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Binning {
    /// One projector per sample, weight 1.
    PerSample,
    /// Histogram per phase; projector at each bin center weighted by its
    /// count. Samples outside the range are dropped.
    Binned { n_bins: usize, x_min: f64, x_max: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    pub dim: FockDim,
    pub max_iters: usize,
    /// Stop when `|ΔlogL| / |logL|` falls below this.
    pub tol: f64,
    pub binning: Binning,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            dim: FockDim::REPORT,
            max_iters: 2000,
            tol: 1e-9,
            binning: Binning::PerSample,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub log_likelihood: f64,
    /// Log-likelihood of every accepted iterate, starting with `I/dim`.
    pub history: Vec<f64>,
    /// Steps where plain `RρR` lowered the likelihood and a diluted step
    /// `(I+εR)ρ(I+εR)` was taken instead.
    pub diluted_steps: usize,
}

#[derive(Clone, Debug)]
pub struct MleResult {
    pub state: DensityMatrix,
    pub diagnostics: MleDiagnostics,
}

/// Neumaier compensated sum.
#[derive(Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.carry
    }
}

struct PhaseGroup {
    theta: f64,
    /// Row-major `len × dim` table of `ψ_n(x_j)`.
    psi: Vec<f64>,
    weights: Vec<f64>,
}

impl PhaseGroup {
    fn len(&self) -> usize {
        self.weights.len()
    }
}

struct Projectors {
    dim: usize,
    groups: Vec<PhaseGroup>,
    total_weight: f64,
}

impl Projectors {
    fn build(samples: &[QuadratureSample], dim: FockDim, binning: Binning) -> Result<Self> {
        let d = dim.get();
        let mut by_phase: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        for s in samples {
            if !(s.x.is_finite() && s.theta.is_finite()) {
                return Err(invalid("samples", "non-finite sample"));
            }
            by_phase.entry(s.theta.to_bits()).or_default().push(s.x);
        }
        let mut groups: Vec<PhaseGroup> = Vec::with_capacity(by_phase.len());
        for (bits, xs) in by_phase {
            let theta = f64::from_bits(bits);
            let (points, weights): (Vec<f64>, Vec<f64>) = match binning {
                Binning::PerSample => (xs.clone(), vec![1.0; xs.len()]),
                Binning::Binned { n_bins, x_min, x_max } => {
                    if n_bins == 0 || !(x_max > x_min) {
                        return Err(invalid("binning", "need n_bins > 0 and x_max > x_min"));
                    }
                    let width = (x_max - x_min) / n_bins as f64;
                    let mut counts = vec![0.0; n_bins];
                    for x in &xs {
                        if *x >= x_min && *x < x_max {
                            counts[(((x - x_min) / width) as usize).min(n_bins - 1)] += 1.0;
                        }
                    }
                    (0..n_bins)
                        .filter(|&b| counts[b] > 0.0)
                        .map(|b| (x_min + (b as f64 + 0.5) * width, counts[b]))
                        .unzip()
                }
            };
            let mut psi = Vec::with_capacity(points.len() * d);
            for x in &points {
                psi.extend(fock_wavefunctions(*x, d));
            }
            groups.push(PhaseGroup { theta, psi, weights });
        }
        // sort by phase value (BTreeMap orders by bit pattern, equal for non-negative floats)
        groups.sort_by(|a, b| a.theta.total_cmp(&b.theta));
        let total_weight = groups.iter().flat_map(|g| g.weights.iter()).sum();
        Ok(Projectors {
            dim: d,
            groups,
            total_weight,
        })
    }

    /// Returns `(R / Σf, Σ f ln p)` for the given state. The log-likelihood
    /// is `-inf` as soon as any `p_j ≤ 0`.
    fn evaluate(&self, rho: &DensityMatrix, want_r: bool) -> (CMatrix, f64) {
        let d = self.dim;
        let mut r = CMatrix::zeros(d, d);
        let mut ll = Compensated::default();
        let mut degenerate = false;
        for g in &self.groups {
            let kernel = phase_kernel(rho, g.theta);
            let n_chunks = g.len().div_ceil(CHUNK);
            let partials: Vec<(Vec<f64>, Compensated, bool)> = (0..n_chunks)
                .into_par_iter()
                .map(|c| {
                    let lo = c * CHUNK;
                    let hi = (lo + CHUNK).min(g.len());
                    let mut acc = if want_r { vec![0.0; d * d] } else { Vec::new() };
                    let mut ll = Compensated::default();
                    let mut bad = false;
                    let mut kpsi = vec![0.0; d];
                    for j in lo..hi {
                        let psi = &g.psi[j * d..(j + 1) * d];
                        let mut p = 0.0;
                        for m in 0..d {
                            let mut row = 0.0;
                            for n in 0..d {
                                row += kernel[(m, n)] * psi[n];
                            }
                            kpsi[m] = row;
                            p += psi[m] * row;
                        }
                        if p <= 0.0 {
                            bad = true;
                            continue;
                        }
                        let f = g.weights[j];
                        ll.add(f * p.ln());
                        if want_r {
                            let w = f / p;
                            for m in 0..d {
                                let wm = w * psi[m];
                                for n in m..d {
                                    acc[m * d + n] += wm * psi[n];
                                }
                            }
                        }
                    }
                    (acc, ll, bad)
                })
                .collect();
            let mut rg = vec![0.0; d * d];
            for (acc, part, bad) in partials {
                degenerate |= bad;
                ll.add(part.sum);
                ll.add(part.carry);
                if want_r {
                    for (t, a) in rg.iter_mut().zip(&acc) {
                        *t += a;
                    }
                }
            }
            if want_r {
                for m in 0..d {
                    for n in m..d {
                        let phase = Complex64::from_polar(1.0, (m as f64 - n as f64) * g.theta);
                        let v = phase * rg[m * d + n];
                        r[(m, n)] += v;
                        if n != m {
                            r[(n, m)] += v.conj();
                        }
                    }
                }
            }
        }
        let ll = if degenerate { f64::NEG_INFINITY } else { ll.value() };
        (r / Complex64::new(self.total_weight, 0.0), ll)
    }
}

/// `Σ_j f_j ln p_j` with `p_j = ⟨x_j,θ_j|ρ|x_j,θ_j⟩`. Returns `-inf` when
/// some sample has zero probability under `ρ` (possible for rank-deficient
/// states).
pub fn log_likelihood(rho: &DensityMatrix, samples: &[QuadratureSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("samples"));
    }
    let proj = Projectors::build(samples, rho.dim(), Binning::PerSample)?;
    Ok(proj.evaluate(rho, false).1)
}

fn check_phase_coverage(samples: &[QuadratureSample]) -> Result<()> {
    let mut distinct: Vec<f64> = samples.iter().map(|s| s.theta).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::TooFewPhases(format!(
            "{} distinct phase(s); need at least 3",
            distinct.len()
        )));
    }
    // θ and θ+π measure the same quadrature axis
    let pi = std::f64::consts::PI;
    let mut folded: Vec<f64> = distinct.iter().map(|t| t.rem_euclid(pi)).collect();
    folded.sort_by(f64::total_cmp);
    let mut largest_gap = folded[0] + pi - folded[folded.len() - 1];
    for w in folded.windows(2) {
        largest_gap = largest_gap.max(w[1] - w[0]);
    }
    let span = pi - largest_gap;
    if span <= pi / 2.0 {
        return Err(Error::TooFewPhases(format!(
            "phases span only {:.1} degrees of quadrature angle; need more than 90",
            span.to_degrees()
        )));
    }
    Ok(())
}

fn rrho_step(rho: &DensityMatrix, r: &CMatrix, dilution: Option<f64>) -> Result<DensityMatrix> {
    let op = match dilution {
        None => r.clone(),
        Some(eps) => CMatrix::identity(r.nrows(), r.ncols()) + r * Complex64::new(eps, 0.0),
    };
    DensityMatrix::from_unnormalized(&op * rho.matrix() * &op)
}

/// Maximum-likelihood density matrix.
///
/// Starts from `I/dim` and iterates `ρ ← RρR / Tr(RρR)`. If a step lowers the
/// likelihood, the diluted update `(I+εR)ρ(I+εR)` with halving ε is used,
/// which increases it for small enough ε; the recorded history is therefore
/// non-decreasing. Hitting `max_iters` returns the last iterate with
/// `converged = false`.
pub fn mle_reconstruct(samples: &[QuadratureSample], opts: &MleOptions) -> Result<MleResult> {
    if !(opts.tol > 0.0) {
        return Err(invalid("tol", format!("{} must be positive", opts.tol)));
    }
    let d = opts.dim.get();
    if samples.len() < d * d {
        return Err(Error::TooFewSamples {
            got: samples.len(),
            needed: d * d,
        });
    }
    if samples.len() < 50 * d * d {
        log::warn!(
            "{} samples for a {d}-level reconstruction; {} or more recommended",
            samples.len(),
            50 * d * d
        );
    }
    check_phase_coverage(samples)?;
    let proj = Projectors::build(samples, opts.dim, opts.binning)?;

    let mut rho = DensityMatrix::maximally_mixed(opts.dim);
    let (mut r, mut ll) = proj.evaluate(&rho, true);
    let mut history = vec![ll];
    let mut converged = false;
    let mut diluted_steps = 0;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        iterations += 1;
        let mut candidate = rrho_step(&rho, &r, None)?;
        let (mut r_next, mut ll_next) = proj.evaluate(&candidate, true);
        if !(ll_next >= ll - MONOTONE_TOL) {
            diluted_steps += 1;
            let mut eps = 1.0;
            let mut improved = false;
            while eps > MIN_DILUTION {
                eps *= 0.5;
                candidate = rrho_step(&rho, &r, Some(eps))?;
                (r_next, ll_next) = proj.evaluate(&candidate, true);
                if ll_next >= ll - MONOTONE_TOL {
                    improved = true;
                    break;
                }
            }
            if !improved {
                // stationary to working precision
                converged = true;
                break;
            }
        }
        let change = (ll_next - ll).abs() / ll.abs().max(f64::MIN_POSITIVE);
        rho = candidate;
        r = r_next;
        ll = ll_next;
        history.push(ll);
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("maximum-likelihood iteration stopped after {iterations} steps without converging");
    }
    Ok(MleResult {
        state: rho,
        diagnostics: MleDiagnostics {
            iterations,
            converged,
            log_likelihood: ll,
            history,
            diluted_steps,
        },
    })
}

/// `R(ρ) = Σ_j (f_j/p_j) Π_j / Σ f_j`; equals the identity on the support
/// of a maximum-likelihood state.
pub fn r_operator(rho: &DensityMatrix, samples: &[QuadratureSample]) -> Result<CMatrix> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("samples"));
    }
    let proj = Projectors::build(samples, rho.dim(), Binning::PerSample)?;
    Ok(proj.evaluate(rho, true).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::fidelity;
    use crate::homodyne::sample_quadratures;

    fn dim(d: usize) -> FockDim {
        FockDim::new(d).unwrap()
    }

    #[test]
    fn single_phase_is_rejected() {
        let v = DensityMatrix::vacuum(dim(4));
        let s = sample_quadratures(&v, &[0.3], 2000, 1).unwrap();
        let opts = MleOptions {
            dim: dim(4),
            ..MleOptions::default()
        };
        assert!(matches!(mle_reconstruct(&s, &opts), Err(Error::TooFewPhases(_))));
        // three phases bunched within 20 degrees
        let s = sample_quadratures(&v, &[0.0, 0.17, 0.34], 2000, 1).unwrap();
        assert!(matches!(mle_reconstruct(&s, &opts), Err(Error::TooFewPhases(_))));
    }

    #[test]
    fn vacuum_reconstruction() {
        // a single run fluctuates by about 1/sqrt(2N) in the |1> weight
        let v = DensityMatrix::vacuum(dim(10));
        let phases = [0.0, 0.785, 1.571, 2.356];
        let s = sample_quadratures(&v, &phases, 2500, 4).unwrap();
        let res = mle_reconstruct(&s, &MleOptions::default()).unwrap();
        res.state.validate().unwrap();
        let f = fidelity(&res.state, &v).unwrap();
        assert!(f >= 0.99, "fidelity {f}");
        let h = &res.diagnostics.history;
        assert!(h.windows(2).all(|w| w[1] >= w[0] - MONOTONE_TOL));
    }

    #[test]
    fn r_operator_is_identity_at_the_fixed_point() {
        // Tr(Rρ) = 1 for any full-rank ρ by construction
        let rho = DensityMatrix::maximally_mixed(dim(5));
        let v = DensityMatrix::vacuum(dim(5));
        let s = sample_quadratures(&v, &[0.0, 1.0, 2.0], 300, 9).unwrap();
        let r = r_operator(&rho, &s).unwrap();
        let tr = (r * rho.matrix()).trace();
        assert!((tr.re - 1.0).abs() < 1e-12 && tr.im.abs() < 1e-12);
    }

    #[test]
    fn binned_mode_reconstructs() {
        let v = DensityMatrix::vacuum(dim(6));
        let s = sample_quadratures(&v, &[0.0, 1.0, 2.0], 4000, 5).unwrap();
        let opts = MleOptions {
            dim: dim(6),
            binning: Binning::Binned {
                n_bins: 120,
                x_min: -6.0,
                x_max: 6.0,
            },
            ..MleOptions::default()
        };
        let res = mle_reconstruct(&s, &opts).unwrap();
        assert!(fidelity(&res.state, &v).unwrap() > 0.99);
    }

    #[test]
    fn iteration_cap_flags_non_convergence() {
        let v = DensityMatrix::vacuum(dim(6));
        let s = sample_quadratures(&v, &[0.0, 1.0, 2.0], 1000, 5).unwrap();
        let opts = MleOptions {
            dim: dim(6),
            max_iters: 2,
            tol: 1e-15,
            ..MleOptions::default()
        };
        let res = mle_reconstruct(&s, &opts).unwrap();
        assert!(!res.diagnostics.converged);
        assert_eq!(res.diagnostics.iterations, 2);
        res.state.validate().unwrap();
    }
}
