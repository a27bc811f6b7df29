//! Wigner function by displaced parity.
//!
//! `W(x,p) = (1/π) Tr[ρ D(α) Π D†(α)]` with `α = (x+ip)/√2` and `Π = (−1)^n̂`.
//! Since `D(α)ΠD†(α) = D(2α)Π`, a single set of displacement elements per
//! point suffices: `W = (1/π) Σ_mn ρ_mn (−1)^m ⟨n|D(2α)|m⟩`. The elements
//! are exact (see [`displacement_elements`]), so the only truncation is that
//! of `ρ` itself.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{displacement_elements, DensityMatrix};

/// Largest `|x+ip|` accepted by the evaluators. Beyond it every state the
/// toolkit handles has `|W|` far below double precision resolution.
pub const SAFE_RADIUS: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpacePoint {
    pub x: f64,
    pub p: f64,
}

impl PhaseSpacePoint {
    pub const ORIGIN: PhaseSpacePoint = PhaseSpacePoint { x: 0.0, p: 0.0 };

    pub fn new(x: f64, p: f64) -> Self {
        PhaseSpacePoint { x, p }
    }

    pub fn from_polar(radius: f64, angle: f64) -> Self {
        PhaseSpacePoint {
            x: radius * angle.cos(),
            p: radius * angle.sin(),
        }
    }

    pub fn radius(&self) -> f64 {
        self.x.hypot(self.p)
    }

    /// Polar angle in `[0, 2π)`.
    pub fn angle(&self) -> f64 {
        let a = self.p.atan2(self.x);
        if a < 0.0 {
            (a + TAU) % TAU
        } else {
            a
        }
    }

    /// Coherent amplitude `(x+ip)/√2`.
    pub fn amplitude(&self) -> Complex64 {
        Complex64::new(self.x, self.p) / std::f64::consts::SQRT_2
    }

    fn check_safe(&self) -> Result<()> {
        if !(self.x.is_finite() && self.p.is_finite()) || self.radius() > SAFE_RADIUS {
            return Err(Error::OutsideSafeRegion { x: self.x, p: self.p });
        }
        Ok(())
    }
}

fn wigner_unchecked(rho: &DensityMatrix, point: PhaseSpacePoint) -> f64 {
    let d = rho.dim().get();
    let dm = displacement_elements(point.amplitude() * 2.0, rho.dim());
    let mut total = 0.0;
    for m in 0..d {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let mut row = Complex64::new(0.0, 0.0);
        for n in 0..d {
            row += rho.get(m, n) * dm[(n, m)];
        }
        total += sign * row.re;
    }
    total / PI
}

pub fn wigner_at(rho: &DensityMatrix, point: PhaseSpacePoint) -> Result<f64> {
    point.check_safe()?;
    Ok(wigner_unchecked(rho, point))
}

/// `W(0,0)` as the parity alternating sum `(1/π)Σ(−1)ⁿρ_nn`.
pub fn wigner_at_origin(rho: &DensityMatrix) -> f64 {
    rho.diagonal()
        .iter()
        .enumerate()
        .map(|(n, r)| if n % 2 == 0 { *r } else { -*r })
        .sum::<f64>()
        / PI
}

/// Uniform grid of Wigner values. `values` is row-major with one row per
/// `p` value: `values[j·nx + i] = W(x_i, p_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub step: f64,
    pub nx: usize,
    pub np: usize,
    pub values: Vec<f64>,
}

fn axis_len(lo: f64, hi: f64, step: f64) -> Result<usize> {
    if !(lo.is_finite() && hi.is_finite() && hi >= lo) {
        return Err(Error::GridMismatch(format!("invalid range [{lo}, {hi}]")));
    }
    let cells = (hi - lo) / step;
    let rounded = cells.round();
    if (cells - rounded).abs() > 1e-9 * rounded.max(1.0) {
        return Err(Error::GridMismatch(format!(
            "range [{lo}, {hi}] is not a whole number of {step} steps"
        )));
    }
    Ok(rounded as usize + 1)
}

impl WignerGrid {
    /// Validates shape and uniformity.
    pub fn new(x_range: (f64, f64), p_range: (f64, f64), step: f64, values: Vec<f64>) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::GridMismatch(format!("step {step} must be positive")));
        }
        let nx = axis_len(x_range.0, x_range.1, step)?;
        let np = axis_len(p_range.0, p_range.1, step)?;
        if values.len() != nx * np {
            return Err(Error::GridMismatch(format!(
                "{} values for a {nx} x {np} grid",
                values.len()
            )));
        }
        Ok(WignerGrid {
            x_min: x_range.0,
            x_max: x_range.1,
            p_min: p_range.0,
            p_max: p_range.1,
            step,
            nx,
            np,
            values,
        })
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + self.step * i as f64
    }

    pub fn p(&self, j: usize) -> f64 {
        self.p_min + self.step * j as f64
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    /// `Σ W·step²`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.step * self.step
    }
}

/// Evaluates `W` on `[x_min, x_max] × [p_min, p_max]`; every grid point
/// must lie inside [`SAFE_RADIUS`].
pub fn wigner_grid(rho: &DensityMatrix, x_range: (f64, f64), p_range: (f64, f64), step: f64) -> Result<WignerGrid> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::GridMismatch(format!("step {step} must be positive")));
    }
    let nx = axis_len(x_range.0, x_range.1, step)?;
    let np = axis_len(p_range.0, p_range.1, step)?;
    for (x, p) in [
        (x_range.0, p_range.0),
        (x_range.0, p_range.1),
        (x_range.1, p_range.0),
        (x_range.1, p_range.1),
    ] {
        PhaseSpacePoint::new(x, p).check_safe()?;
    }
    let rows: Vec<Vec<f64>> = (0..np)
        .into_par_iter()
        .map(|j| {
            let p = p_range.0 + step * j as f64;
            (0..nx)
                .map(|i| wigner_unchecked(rho, PhaseSpacePoint::new(x_range.0 + step * i as f64, p)))
                .collect()
        })
        .collect();
    let grid = WignerGrid::new(x_range, p_range, step, rows.concat())?;
    log::debug!("Wigner grid {nx}x{np} integrates to {:.6}", grid.integral());
    Ok(grid)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerMinimum {
    pub point: PhaseSpacePoint,
    pub value: f64,
    /// The raw argmin sits on the grid edge, so the true minimum may lie
    /// outside the range.
    pub on_boundary: bool,
}

/// Relative slack for treating two grid values as tied.
const TIE_TOL: f64 = 1e-13;

/// Grid argmin refined by a least-squares quadratic over its 3×3
/// neighbourhood. Ties go to the smallest radius, then the smallest polar
/// angle.
pub fn find_wigner_minimum(grid: &WignerGrid) -> Result<WignerMinimum> {
    if grid.values.is_empty() {
        return Err(Error::EmptyInput("Wigner grid"));
    }
    let all = (0..grid.np).flat_map(|j| (0..grid.nx).map(move |i| (i, j)));
    let (i, j) = argmin_with_ties(grid, all).expect("grid is non-empty");
    let on_boundary = i == 0 || j == 0 || i + 1 == grid.nx || j + 1 == grid.np;
    if on_boundary {
        log::warn!(
            "Wigner minimum at the grid boundary ({:.3}, {:.3}); widen the range",
            grid.x(i),
            grid.p(j)
        );
        return Ok(WignerMinimum {
            point: PhaseSpacePoint::new(grid.x(i), grid.p(j)),
            value: grid.value(i, j),
            on_boundary,
        });
    }
    let (point, value) = refine_quadratic(grid, i, j);
    Ok(WignerMinimum {
        point,
        value,
        on_boundary,
    })
}

pub(crate) fn argmin_with_ties(
    grid: &WignerGrid,
    cells: impl Iterator<Item = (usize, usize)>,
) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for (i, j) in cells {
        let v = grid.value(i, j);
        best = match best {
            None => Some((i, j, v)),
            Some((bi, bj, bv)) => {
                let tol = TIE_TOL * bv.abs().max(v.abs()).max(f64::MIN_POSITIVE);
                let tied = (v - bv).abs() <= tol;
                if v < bv - tol || (tied && tie_key(grid, i, j) < tie_key(grid, bi, bj)) {
                    Some((i, j, v))
                } else {
                    Some((bi, bj, bv))
                }
            }
        };
    }
    best.map(|(i, j, _)| (i, j))
}

fn tie_key(grid: &WignerGrid, i: usize, j: usize) -> (f64, f64) {
    let pt = PhaseSpacePoint::new(grid.x(i), grid.p(j));
    // radii equal to rounding count as equal
    ((pt.radius() / grid.step * 1e6).round(), pt.angle())
}

/// Fits `c + g·u + ½uᵀHu` to the 3×3 block around `(i, j)` and moves to the
/// stationary point if it is a minimum within one cell.
pub(crate) fn refine_quadratic(grid: &WignerGrid, i: usize, j: usize) -> (PhaseSpacePoint, f64) {
    let h = grid.step;
    let mut design = DMatrix::<f64>::zeros(9, 6);
    let mut rhs = DVector::<f64>::zeros(9);
    let mut row = 0;
    for dj in -1i32..=1 {
        for di in -1i32..=1 {
            let (u, v) = (di as f64, dj as f64);
            design.row_mut(row).copy_from_slice(&[1.0, u, v, u * u, u * v, v * v]);
            rhs[row] = grid.value((i as i32 + di) as usize, (j as i32 + dj) as usize);
            row += 1;
        }
    }
    let center = (PhaseSpacePoint::new(grid.x(i), grid.p(j)), grid.value(i, j));
    let Ok(coef) = design.clone().svd(true, true).solve(&rhs, 1e-14) else {
        return center;
    };
    let (gx, gy) = (coef[1], coef[2]);
    let (hxx, hxy, hyy) = (2.0 * coef[3], coef[4], 2.0 * coef[5]);
    let det = hxx * hyy - hxy * hxy;
    if !(hxx > 0.0 && det > 0.0) {
        return center;
    }
    let du = -(hyy * gx - hxy * gy) / det;
    let dv = -(hxx * gy - hxy * gx) / det;
    if du.abs() > 1.0 || dv.abs() > 1.0 {
        return center;
    }
    let value = coef[0] + gx * du + gy * dv + 0.5 * (hxx * du * du + 2.0 * hxy * du * dv + hyy * dv * dv);
    (PhaseSpacePoint::new(grid.x(i) + du * h, grid.p(j) + dv * h), value)
}

/// Direction of the Wigner dip, used to orient the Gaussian correction of
/// the witness.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DipDirection {
    pub phi: f64,
    pub point: PhaseSpacePoint,
    pub value: f64,
    /// No preferred direction: the state is phase-insensitive or its minimum
    /// sits at the origin. `phi` is then 0.
    pub undefined: bool,
}

pub const DIP_SEARCH_RADIUS: f64 = 1.5;
pub const DIP_SEARCH_STEP: f64 = 0.02;

/// Minimum of `W` over the disk `|x+ip| ≤ 1.5`. A disk rather than a square
/// keeps the search isotropic when `W` has no interior minimum and the
/// lowest value sits on the rim.
pub fn dip_direction(rho: &DensityMatrix) -> Result<DipDirection> {
    let r = DIP_SEARCH_RADIUS;
    let grid = wigner_grid(rho, (-r, r), (-r, r), DIP_SEARCH_STEP)?;
    let inside = |i: usize, j: usize| PhaseSpacePoint::new(grid.x(i), grid.p(j)).radius() <= r + 1e-12;
    let cells = (0..grid.np)
        .flat_map(|j| (0..grid.nx).map(move |i| (i, j)))
        .filter(|&(i, j)| inside(i, j));
    let (i, j) = argmin_with_ties(&grid, cells).expect("disk contains the origin");
    let interior = (-1i32..=1).all(|dj| {
        (-1i32..=1).all(|di| {
            let (a, b) = (i as i32 + di, j as i32 + dj);
            a >= 0 && b >= 0 && (a as usize) < grid.nx && (b as usize) < grid.np && inside(a as usize, b as usize)
        })
    });
    let (point, value) = if interior {
        refine_quadratic(&grid, i, j)
    } else {
        (PhaseSpacePoint::new(grid.x(i), grid.p(j)), grid.value(i, j))
    };
    let d = rho.dim().get();
    let phase_insensitive = (0..d).all(|m| (0..d).all(|n| m == n || rho.get(m, n).norm() < 1e-12));
    let undefined = phase_insensitive || point.radius() < DIP_SEARCH_STEP;
    if undefined {
        log::warn!("Wigner dip has no defined direction; using phi = 0");
    }
    Ok(DipDirection {
        phi: if undefined { 0.0 } else { point.angle() },
        point,
        value,
        undefined,
    })
}

/// Integral of `W` along the line `{(x cosθ − s sinθ, x sinθ + s cosθ)}` by
/// the trapezoid rule on `[−s_max, s_max]`, which should equal the quadrature
/// marginal at phase θ.
pub fn line_integral(rho: &DensityMatrix, theta: f64, x: f64, s_max: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::EmptyInput("line integration points"));
    }
    let (c, s) = (theta.cos(), theta.sin());
    let h = 2.0 * s_max / (n - 1) as f64;
    let mut total = 0.0;
    for k in 0..n {
        let t = -s_max + h * k as f64;
        let w = wigner_at(rho, PhaseSpacePoint::new(x * c - t * s, x * s + t * c))?;
        total += if k == 0 || k + 1 == n { 0.5 * w } else { w };
    }
    Ok(total * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::FockDim;
    use crate::preparation::ideal_superposition;
    use approx::assert_abs_diff_eq;

    fn dim(d: usize) -> FockDim {
        FockDim::new(d).unwrap()
    }

    fn plus() -> DensityMatrix {
        let h = 0.5f64.sqrt();
        ideal_superposition(h, h, 0.0, dim(6)).unwrap()
    }

    #[test]
    fn origin_values() {
        let v = DensityMatrix::vacuum(dim(6));
        assert_abs_diff_eq!(
            wigner_at(&v, PhaseSpacePoint::ORIGIN).unwrap(),
            1.0 / PI,
            epsilon = 1e-15
        );
        let one = DensityMatrix::fock(1, dim(6)).unwrap();
        assert_abs_diff_eq!(
            wigner_at(&one, PhaseSpacePoint::ORIGIN).unwrap(),
            -1.0 / PI,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(wigner_at_origin(&one), -1.0 / PI, epsilon = 1e-15);
    }

    #[test]
    fn closed_forms_off_origin() {
        // vacuum: e^{-r²}/π; |1>: (2r²−1)e^{-r²}/π; balanced: (r² + √2 x)e^{-r²}/π
        let v = DensityMatrix::vacuum(dim(8));
        let one = DensityMatrix::fock(1, dim(8)).unwrap();
        let p = plus();
        for (x, y) in [(0.3, -0.4), (-1.1, 0.7), (2.0, 1.5), (0.0, -2.5)] {
            let pt = PhaseSpacePoint::new(x, y);
            let r2: f64 = x * x + y * y;
            let g = (-r2).exp() / PI;
            assert_abs_diff_eq!(wigner_at(&v, pt).unwrap(), g, epsilon = 1e-14);
            assert_abs_diff_eq!(wigner_at(&one, pt).unwrap(), (2.0 * r2 - 1.0) * g, epsilon = 1e-14);
            assert_abs_diff_eq!(
                wigner_at(&p, pt).unwrap(),
                (r2 + std::f64::consts::SQRT_2 * x) * g,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn outside_safe_region() {
        let v = DensityMatrix::vacuum(dim(4));
        assert!(matches!(
            wigner_at(&v, PhaseSpacePoint::new(9.0, 0.0)),
            Err(Error::OutsideSafeRegion { .. })
        ));
        assert!(wigner_grid(&v, (-7.0, 7.0), (-7.0, 7.0), 0.5).is_err());
    }

    #[test]
    fn grid_shape_and_layout() {
        let v = DensityMatrix::vacuum(dim(4));
        let g = wigner_grid(&v, (-1.0, 2.0), (0.0, 1.0), 0.5).unwrap();
        assert_eq!((g.nx, g.np), (7, 3));
        assert_abs_diff_eq!(
            g.value(6, 1),
            wigner_at(&v, PhaseSpacePoint::new(2.0, 0.5)).unwrap(),
            epsilon = 1e-15
        );
        assert!(matches!(
            wigner_grid(&v, (0.0, 1.0), (0.0, 1.0), 0.3),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn single_photon_minimum() {
        let one = DensityMatrix::fock(1, dim(6)).unwrap();
        let g = wigner_grid(&one, (-2.0, 2.0), (-2.0, 2.0), 0.05).unwrap();
        let m = find_wigner_minimum(&g).unwrap();
        assert!(!m.on_boundary);
        assert!(m.point.radius() < 1e-9);
        assert_abs_diff_eq!(m.value, -1.0 / PI, epsilon = 1e-4);
    }

    #[test]
    fn balanced_minimum_is_refined_off_grid() {
        let g = wigner_grid(&plus(), (-2.0, 2.0), (-2.0, 2.0), 0.05).unwrap();
        let m = find_wigner_minimum(&g).unwrap();
        assert_abs_diff_eq!(m.point.x, -0.487120334113, epsilon = 0.025);
        assert_abs_diff_eq!(m.point.p, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.value, -0.113385546904058, epsilon = 1e-4);
    }

    #[test]
    fn vacuum_minimum_is_on_the_boundary() {
        let v = DensityMatrix::vacuum(dim(4));
        let g = wigner_grid(&v, (-1.0, 1.0), (-1.0, 1.0), 0.1).unwrap();
        let m = find_wigner_minimum(&g).unwrap();
        assert!(m.on_boundary && m.value > 0.0);
        // four tied corners; smallest angle wins
        assert_eq!((m.point.x, m.point.p), (1.0, 1.0));
    }

    #[test]
    fn dip_direction_follows_coherence_phase() {
        let d = dip_direction(&plus()).unwrap();
        assert!(!d.undefined);
        assert_abs_diff_eq!(d.phi, PI, epsilon = 1e-6);
        // rotated(θ) turns phase space clockwise by θ
        let rotated = plus().rotated(0.5);
        let d = dip_direction(&rotated).unwrap();
        assert_abs_diff_eq!(d.phi, PI - 0.5, epsilon = 2e-3);
        let one = DensityMatrix::fock(1, dim(6)).unwrap();
        let d = dip_direction(&one).unwrap();
        assert!(d.undefined && d.phi == 0.0);
    }

    #[test]
    fn line_integral_matches_marginal() {
        let p = plus().rotated(0.3);
        for (theta, x) in [(0.0, -0.5), (1.1, 0.8), (2.5, 0.1)] {
            let li = line_integral(&p, theta, x, 6.0, 1201).unwrap();
            let m = crate::homodyne::marginal_pdf(&p, theta, x);
            assert_abs_diff_eq!(li, m, epsilon = 1e-6);
        }
    }
}
