//! Finite-volume discretization of the degenerate operator
//! -div D_β^{d+1+γ-n} ∇ on a truncated box, with Dirichlet data carried by a
//! tube around Γ and by the outer shell. Provides the Green function with
//! pole at infinity, harmonic-measure estimates (direct and via the adjoint
//! density), and the exact radial profiles for flat boundaries.

pub mod cg;
pub mod radial;

pub use cg::SolveReport;
pub use radial::{radial_solution, RadialError, RadialSolution, RadialWeight};

use crate::geometry::BoundarySet;
use crate::smooth_distance::{d_exponent, DistanceError, EvalPath, OperatorParams};
use crate::whitney::BoxRegion;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("grid setup: {0}")]
    Grid(String),
    #[error("no interior cells between the tube and the outer shell")]
    EmptyInterior,
    #[error("weight evaluation failed at {location:?}: {source}")]
    Weight { location: Vec<f64>, source: DistanceError },
    #[error("iterative solve stalled: residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("cell {0} is not an interior cell")]
    NotInterior(usize),
    #[error("{0}")]
    BadParameter(String),
}

/// Cell classification on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum CellRole {
    Interior = 0,
    /// Within the tube radius of Γ: carries Dirichlet data.
    Tube = 1,
    /// Outermost layer of the box: carries Dirichlet data.
    Outer = 2,
}

/// Uniform cubic grid over a box in R³ with cached distances and roles.
#[derive(Debug)]
pub struct Grid {
    pub lo: [f64; 3],
    pub delta: f64,
    pub cells: usize,
    pub tube_radius: f64,
    roles: Vec<CellRole>,
    dist: Vec<f64>,
}

impl Grid {
    /// Builds the grid: `cells` per axis (even), tube radius defaulting to
    /// max(2Δ, 5h).
    pub fn new(
        set: &BoundarySet,
        bx: &BoxRegion,
        cells: usize,
        tube_radius: Option<f64>,
    ) -> Result<Arc<Self>, SolverError> {
        if set.dim_n() != 3 {
            return Err(SolverError::Grid(format!(
                "grid solves run in ambient dimension 3 (set has n = {}); higher codimension is covered by the radial mode",
                set.dim_n()
            )));
        }
        if bx.lo.len() != 3 {
            return Err(SolverError::Grid("box must be 3-dimensional".into()));
        }
        if cells < 8 || cells % 2 != 0 {
            return Err(SolverError::Grid(format!(
                "cells per axis must be even and at least 8, got {cells}"
            )));
        }
        let side = bx.hi[0] - bx.lo[0];
        for j in 1..3 {
            if ((bx.hi[j] - bx.lo[j]) - side).abs() > 1e-12 * side {
                return Err(SolverError::Grid("box must be a cube".into()));
            }
        }
        if !(side > 0.0) {
            return Err(SolverError::Grid("box must have positive extent".into()));
        }
        let delta = side / cells as f64;
        let tube_radius = tube_radius.unwrap_or((2.0 * delta).max(5.0 * set.resolution_h()));
        if tube_radius < 2.0 * delta {
            return Err(SolverError::Grid(format!(
                "tube radius {tube_radius:.3e} below 2Δ = {:.3e}",
                2.0 * delta
            )));
        }
        let total = cells * cells * cells;
        let mut roles = vec![CellRole::Interior; total];
        let mut dist = vec![0.0; total];
        let lo = [bx.lo[0], bx.lo[1], bx.lo[2]];
        let mut center = [0.0f64; 3];
        let mut any_interior = false;
        for k in 0..cells {
            for j in 0..cells {
                for i in 0..cells {
                    let idx = i + cells * (j + cells * k);
                    center[0] = lo[0] + (i as f64 + 0.5) * delta;
                    center[1] = lo[1] + (j as f64 + 0.5) * delta;
                    center[2] = lo[2] + (k as f64 + 0.5) * delta;
                    let d = set.distance(&center);
                    dist[idx] = d;
                    let on_shell = i == 0
                        || j == 0
                        || k == 0
                        || i == cells - 1
                        || j == cells - 1
                        || k == cells - 1;
                    roles[idx] = if d <= tube_radius {
                        CellRole::Tube
                    } else if on_shell {
                        CellRole::Outer
                    } else {
                        any_interior = true;
                        CellRole::Interior
                    };
                }
            }
        }
        if !any_interior {
            return Err(SolverError::EmptyInterior);
        }
        Ok(Arc::new(Grid { lo, delta, cells, tube_radius, roles, dist }))
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    pub fn role(&self, idx: usize) -> CellRole {
        self.roles[idx]
    }

    pub fn dist(&self, idx: usize) -> f64 {
        self.dist[idx]
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.cells * (j + self.cells * k)
    }

    pub fn coords_of(&self, idx: usize) -> (usize, usize, usize) {
        let i = idx % self.cells;
        let j = (idx / self.cells) % self.cells;
        let k = idx / (self.cells * self.cells);
        (i, j, k)
    }

    pub fn center(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.coords_of(idx);
        [
            self.lo[0] + (i as f64 + 0.5) * self.delta,
            self.lo[1] + (j as f64 + 0.5) * self.delta,
            self.lo[2] + (k as f64 + 0.5) * self.delta,
        ]
    }

    /// Interior cell nearest to a point.
    pub fn nearest_interior(&self, x: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for idx in 0..self.len() {
            if self.roles[idx] != CellRole::Interior {
                continue;
            }
            let c = self.center(idx);
            let d2: f64 = c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.map_or(true, |(_, b)| d2 < b) {
                best = Some((idx, d2));
            }
        }
        best.map(|(idx, _)| idx)
    }

    pub fn tube_cells(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.roles[i] == CellRole::Tube).collect()
    }
}

/// A scalar field over the full grid (boundary cells carry their data).
#[derive(Debug, Clone)]
pub struct DiscreteField {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
}

impl DiscreteField {
    /// Discrete maximum principle check: (interior min, interior max,
    /// boundary min, boundary max).
    pub fn extrema(&self) -> (f64, f64, f64, f64) {
        let mut int = (f64::INFINITY, f64::NEG_INFINITY);
        let mut bdy = (f64::INFINITY, f64::NEG_INFINITY);
        for idx in 0..self.grid.len() {
            let v = self.values[idx];
            match self.grid.role(idx) {
                CellRole::Interior => {
                    int.0 = int.0.min(v);
                    int.1 = int.1.max(v);
                }
                _ => {
                    bdy.0 = bdy.0.min(v);
                    bdy.1 = bdy.1.max(v);
                }
            }
        }
        (int.0, int.1, bdy.0, bdy.1)
    }
}

/// The assembled operator: face conductances and the interior index map,
/// reusable across right-hand sides.
pub struct Assembly {
    pub grid: Arc<Grid>,
    /// Face weights a_F = D_β(face midpoint)^{d+1+γ-n} Δ^{n-2} between cell
    /// idx and idx + stride(axis); zero when neither side is interior.
    face_w: [Vec<f64>; 3],
    diag: Vec<f64>,
    interior: Vec<u32>,
    int_id: Vec<i32>,
    pub params: OperatorParams,
}

impl Assembly {
    pub fn new(
        grid: Arc<Grid>,
        set: &BoundarySet,
        params: &OperatorParams,
    ) -> Result<Self, SolverError> {
        let m = grid.cells;
        let delta = grid.delta;
        let exponent = params.weight_exponent();
        // Cloud-only sets need the near field to stay clear of the guard.
        let parametric = matches!(
            set.descriptor(),
            crate::geometry::GeometryDescriptor::Flat { .. }
                | crate::geometry::GeometryDescriptor::LipschitzGraph { .. }
        );
        if !parametric {
            let needed = 10.0 * set.resolution_h() + delta;
            if grid.tube_radius < needed {
                return Err(SolverError::Grid(format!(
                    "cloud-route weights need tube radius ≥ {needed:.3e} (10h + Δ); got {:.3e}",
                    grid.tube_radius
                )));
            }
        }
        let path = if parametric { EvalPath::Parametric } else { EvalPath::Cloud };
        let strides = [1usize, m, m * m];
        let mut face_w = [vec![0.0; grid.len()], vec![0.0; grid.len()], vec![0.0; grid.len()]];
        let mut mid = [0.0f64; 3];
        for axis in 0..3 {
            let stride = strides[axis];
            for idx in 0..grid.len() {
                let (i, j, k) = grid.coords_of(idx);
                let coord = [i, j, k][axis];
                if coord + 1 >= m {
                    continue;
                }
                let nbr = idx + stride;
                let a = grid.role(idx);
                let b = grid.role(nbr);
                if a != CellRole::Interior && b != CellRole::Interior {
                    continue;
                }
                let c = grid.center(idx);
                mid.copy_from_slice(&c);
                mid[axis] += 0.5 * delta;
                let d_val = match d_exponent(set, params.beta, &mid, path) {
                    Ok(s) => s.value,
                    Err(DistanceError::OnBoundary) => {
                        // Face midpoint coincides with Γ; nudge off by a
                        // negligible transverse offset.
                        let mut nudged = mid;
                        nudged[(axis + 1) % 3] += 1e-9 * delta;
                        d_exponent(set, params.beta, &nudged, path)
                            .map_err(|source| SolverError::Weight {
                                location: nudged.to_vec(),
                                source,
                            })?
                            .value
                    }
                    Err(source) => {
                        return Err(SolverError::Weight { location: mid.to_vec(), source })
                    }
                };
                face_w[axis][idx] = d_val.powf(exponent) * delta;
            }
        }
        let mut interior = Vec::new();
        let mut int_id = vec![-1i32; grid.len()];
        for idx in 0..grid.len() {
            if grid.role(idx) == CellRole::Interior {
                int_id[idx] = interior.len() as i32;
                interior.push(idx as u32);
            }
        }
        let mut diag = vec![0.0; interior.len()];
        for (row, &idx) in interior.iter().enumerate() {
            let idx = idx as usize;
            let mut acc = 0.0;
            for (axis, &stride) in strides.iter().enumerate() {
                acc += face_w[axis][idx];
                if idx >= stride {
                    acc += face_w[axis][idx - stride];
                }
            }
            if !(acc > 0.0) {
                return Err(SolverError::Grid(format!(
                    "isolated interior cell at {:?}",
                    grid.center(idx)
                )));
            }
            diag[row] = acc;
        }
        Ok(Assembly { grid, face_w, diag, interior, int_id, params: *params })
    }

    pub fn interior_count(&self) -> usize {
        self.interior.len()
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        let m = self.grid.cells;
        let strides = [1usize, m, m * m];
        for (row, &idx) in self.interior.iter().enumerate() {
            let idx = idx as usize;
            let mut acc = self.diag[row] * u[row];
            for (axis, &stride) in strides.iter().enumerate() {
                let w_up = self.face_w[axis][idx];
                if w_up != 0.0 {
                    let nbr = self.int_id[idx + stride];
                    if nbr >= 0 {
                        acc -= w_up * u[nbr as usize];
                    }
                }
                if idx >= stride {
                    let w_dn = self.face_w[axis][idx - stride];
                    if w_dn != 0.0 {
                        let nbr = self.int_id[idx - stride];
                        if nbr >= 0 {
                            acc -= w_dn * u[nbr as usize];
                        }
                    }
                }
            }
            out[row] = acc;
        }
    }

    /// Boundary-coupling contribution: b_row = Σ over boundary neighbors of
    /// a_F · g(neighbor).
    fn rhs_from_data(&self, data: &dyn Fn(usize) -> f64) -> Vec<f64> {
        let m = self.grid.cells;
        let strides = [1usize, m, m * m];
        let mut b = vec![0.0; self.interior.len()];
        for (row, &idx) in self.interior.iter().enumerate() {
            let idx = idx as usize;
            let mut acc = 0.0;
            for (axis, &stride) in strides.iter().enumerate() {
                let w_up = self.face_w[axis][idx];
                if w_up != 0.0 && self.int_id[idx + stride] < 0 {
                    acc += w_up * data(idx + stride);
                }
                if idx >= stride {
                    let w_dn = self.face_w[axis][idx - stride];
                    if w_dn != 0.0 && self.int_id[idx - stride] < 0 {
                        acc += w_dn * data(idx - stride);
                    }
                }
            }
            b[row] = acc;
        }
        b
    }

    /// Solves with Dirichlet data on tube and outer cells; the returned field
    /// carries the data on boundary cells and the solution inside.
    pub fn solve_dirichlet(
        &self,
        data: &dyn Fn(usize) -> f64,
        rel_tol: f64,
        max_iter: usize,
    ) -> Result<(DiscreteField, SolveReport), SolverError> {
        let b = self.rhs_from_data(data);
        let mut apply = |u: &[f64], out: &mut [f64]| self.apply(u, out);
        let (x, report) = cg::pcg(&mut apply, &self.diag, &b, rel_tol, max_iter);
        if !report.converged {
            return Err(SolverError::NoConvergence {
                residual: report.relative_residual,
                iterations: report.iterations,
            });
        }
        let mut values = vec![0.0; self.grid.len()];
        for idx in 0..self.grid.len() {
            values[idx] = match self.grid.role(idx) {
                CellRole::Interior => x[self.int_id[idx] as usize],
                _ => data(idx),
            };
        }
        Ok((DiscreteField { grid: self.grid.clone(), values }, report))
    }
}

/// Default iteration parameters of the contract: relative residual 1e-10,
/// iteration cap 1e5.
pub const SOLVE_TOL: f64 = 1e-10;
pub const SOLVE_MAX_ITER: usize = 100_000;

/// One-shot assembly + Dirichlet solve.
pub fn assemble_and_solve(
    grid: Arc<Grid>,
    set: &BoundarySet,
    params: &OperatorParams,
    data: &dyn Fn(usize) -> f64,
) -> Result<(DiscreteField, SolveReport), SolverError> {
    let assembly = Assembly::new(grid, set, params)?;
    assembly.solve_dirichlet(data, SOLVE_TOL, SOLVE_MAX_ITER)
}

/// Report accompanying a Green-function solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GreenReport {
    pub solve: SolveReport,
    pub corkscrew: Vec<f64>,
    pub corkscrew_cell: usize,
    pub normalization: f64,
}

/// Green function with pole at infinity: zero data on the Γ-tube, the
/// expected far-field profile D_β^{1-γ} on the outer shell, normalized so the
/// value at a corkscrew point of (x_roi, r_roi) equals D_β^{1-γ} there.
pub fn green_infinity(
    assembly: &Assembly,
    set: &BoundarySet,
    roi_center: &[f64],
    roi_radius: f64,
) -> Result<(DiscreteField, GreenReport), SolverError> {
    let grid = &assembly.grid;
    let params = &assembly.params;
    let one_minus_gamma = 1.0 - params.gamma;
    // Outer data: D_β^{1-γ} at the cell center.
    let mut outer = vec![0.0; grid.len()];
    for idx in 0..grid.len() {
        if grid.role(idx) == CellRole::Outer {
            let c = grid.center(idx);
            let d = d_exponent(set, params.beta, &c, EvalPath::Auto)
                .map_err(|source| SolverError::Weight { location: c.to_vec(), source })?;
            outer[idx] = d.value.powf(one_minus_gamma);
        }
    }
    let data = move |idx: usize| outer[idx];
    let (mut field, solve) = assembly.solve_dirichlet(&data, SOLVE_TOL, SOLVE_MAX_ITER)?;

    // Corkscrew of (roi_center, roi_radius): among transverse probes of
    // length roi_radius, take the one farthest from Γ, snapped to a cell.
    let mut best: Option<(usize, f64)> = None;
    for axis in 0..3 {
        for sign in [-1.0, 1.0] {
            let mut probe = [roi_center[0], roi_center[1], roi_center[2]];
            probe[axis] += sign * roi_radius;
            if let Some(cell) = nearest_interior_near(grid, &probe) {
                let d = grid.dist(cell);
                if best.map_or(true, |(_, bd)| d > bd) {
                    best = Some((cell, d));
                }
            }
        }
    }
    let (cell, _) = best.ok_or(SolverError::EmptyInterior)?;
    let at = grid.center(cell);
    let d_cork = d_exponent(set, params.beta, &at, EvalPath::Auto)
        .map_err(|source| SolverError::Weight { location: at.to_vec(), source })?
        .value
        .powf(one_minus_gamma);
    let u_cork = field.values[cell];
    if !(u_cork > 0.0) {
        return Err(SolverError::BadParameter(
            "green solve vanishes at the corkscrew point".into(),
        ));
    }
    let normalization = d_cork / u_cork;
    for v in field.values.iter_mut() {
        *v *= normalization;
    }
    Ok((
        field,
        GreenReport {
            solve,
            corkscrew: at.to_vec(),
            corkscrew_cell: cell,
            normalization,
        },
    ))
}

/// Nearest interior cell within a few cells of `x` (cheap local scan).
fn nearest_interior_near(grid: &Grid, x: &[f64]) -> Option<usize> {
    let m = grid.cells;
    let reach = 4i64;
    let mut home = [0i64; 3];
    for j in 0..3 {
        home[j] = (((x[j] - grid.lo[j]) / grid.delta) - 0.5).round() as i64;
    }
    let mut best: Option<(usize, f64)> = None;
    for dk in -reach..=reach {
        for dj in -reach..=reach {
            for di in -reach..=reach {
                let (i, j, k) = (home[0] + di, home[1] + dj, home[2] + dk);
                if i < 0 || j < 0 || k < 0 || i >= m as i64 || j >= m as i64 || k >= m as i64 {
                    continue;
                }
                let idx = grid.index(i as usize, j as usize, k as usize);
                if grid.role(idx) != CellRole::Interior {
                    continue;
                }
                let c = grid.center(idx);
                let d2: f64 = c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                if best.map_or(true, |(_, bd)| d2 < bd) {
                    best = Some((idx, d2));
                }
            }
        }
    }
    best.map(|(idx, _)| idx)
}

/// Estimate of ω^X(Q) for a boundary patch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HarmonicMeasureEstimate {
    pub pole: Vec<f64>,
    pub pole_cell: usize,
    pub value: f64,
    pub patch_cells: usize,
}

/// Direct route: data 1 on the patch tube cells, 0 elsewhere; the estimate is
/// the solution value at the pole.
pub fn harmonic_measure(
    assembly: &Assembly,
    pole: &[f64],
    patch: &[usize],
) -> Result<HarmonicMeasureEstimate, SolverError> {
    let grid = &assembly.grid;
    let pole_cell = nearest_interior_near(grid, pole)
        .or_else(|| grid.nearest_interior(pole))
        .ok_or(SolverError::EmptyInterior)?;
    let mut is_patch = vec![false; grid.len()];
    for &c in patch {
        if grid.role(c) != CellRole::Tube {
            return Err(SolverError::BadParameter(format!(
                "patch cell {c} is not a tube cell"
            )));
        }
        is_patch[c] = true;
    }
    let data = move |idx: usize| if is_patch[idx] { 1.0 } else { 0.0 };
    let (field, _) = assembly.solve_dirichlet(&data, SOLVE_TOL, SOLVE_MAX_ITER)?;
    Ok(HarmonicMeasureEstimate {
        pole: pole.to_vec(),
        pole_cell,
        value: field.values[pole_cell],
        patch_cells: patch.len(),
    })
}

/// The harmonic-measure density seen from one pole: ω^X({cell}) for every
/// boundary cell at once, from a single adjoint solve (the operator is
/// self-adjoint). Masses over tube cells plus outer cells sum to one.
#[derive(Debug)]
pub struct HarmonicDensity {
    pub grid: Arc<Grid>,
    pub pole_cell: usize,
    /// Mass per cell; nonzero only on tube and outer cells.
    pub rho: Vec<f64>,
}

impl HarmonicDensity {
    pub fn tube_mass(&self) -> f64 {
        (0..self.grid.len())
            .filter(|&i| self.grid.role(i) == CellRole::Tube)
            .map(|i| self.rho[i])
            .sum()
    }

    pub fn outer_mass(&self) -> f64 {
        (0..self.grid.len())
            .filter(|&i| self.grid.role(i) == CellRole::Outer)
            .map(|i| self.rho[i])
            .sum()
    }

    /// ω̂^X of the patch of tube cells whose centers project into
    /// B(center, radius) ∩ Γ (projection = nearest boundary point).
    pub fn ball_measure(&self, set: &BoundarySet, center: &[f64], radius: f64) -> f64 {
        let mut acc = 0.0;
        for idx in 0..self.grid.len() {
            if self.grid.role(idx) != CellRole::Tube || self.rho[idx] == 0.0 {
                continue;
            }
            let c = self.grid.center(idx);
            let (ni, _) = set.nearest(&c);
            let y = set.point(ni);
            let d2: f64 = y.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 <= radius * radius {
                acc += self.rho[idx];
            }
        }
        acc
    }
}

/// Computes the density ρ_c = Σ_{interior i ~ c} a_F z_i with A z = e_pole.
pub fn harmonic_density(
    assembly: &Assembly,
    pole: &[f64],
) -> Result<HarmonicDensity, SolverError> {
    let grid = &assembly.grid;
    let pole_cell = nearest_interior_near(grid, pole)
        .or_else(|| grid.nearest_interior(pole))
        .ok_or(SolverError::EmptyInterior)?;
    let row = assembly.int_id[pole_cell];
    if row < 0 {
        return Err(SolverError::NotInterior(pole_cell));
    }
    let mut b = vec![0.0; assembly.interior.len()];
    b[row as usize] = 1.0;
    let mut apply = |u: &[f64], out: &mut [f64]| assembly.apply(u, out);
    let (z, report) = cg::pcg(&mut apply, &assembly.diag, &b, SOLVE_TOL, SOLVE_MAX_ITER);
    if !report.converged {
        return Err(SolverError::NoConvergence {
            residual: report.relative_residual,
            iterations: report.iterations,
        });
    }
    let m = grid.cells;
    let strides = [1usize, m, m * m];
    let mut rho = vec![0.0; grid.len()];
    for (r, &idx) in assembly.interior.iter().enumerate() {
        let idx = idx as usize;
        for (axis, &stride) in strides.iter().enumerate() {
            let w_up = assembly.face_w[axis][idx];
            if w_up != 0.0 && assembly.int_id[idx + stride] < 0 {
                rho[idx + stride] += w_up * z[r];
            }
            if idx >= stride {
                let w_dn = assembly.face_w[axis][idx - stride];
                if w_dn != 0.0 && assembly.int_id[idx - stride] < 0 {
                    rho[idx - stride] += w_dn * z[r];
                }
            }
        }
    }
    Ok(HarmonicDensity { grid: grid.clone(), pole_cell, rho })
}
