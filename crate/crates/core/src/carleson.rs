//! Carleson-measure functionals over grid fields: the plain CM norm, the
//! Green-ratio functional, the distance-ratio functional, the cosine-weight
//! counterexample integral, and the log-Poisson budget of the harmonic
//! measure over a Whitney boundary-ball family.

use crate::geometry::BoundarySet;
use crate::numeric::{adaptive_simpson, gl24};
use crate::smooth_distance::{d_exponent, grad_d_beta, EvalPath, OperatorParams};
use crate::solver::{CellRole, DiscreteField, Grid, HarmonicDensity};
use crate::whitney::{BallClass, BoxRegion, CutoffSpec};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum CarlesonError {
    #[error("field length {got} does not match grid size {want}")]
    FieldMismatch { got: usize, want: usize },
    #[error("nonpositive field value {value:.3e} at cell {cell} inside a test ball")]
    NonPositive { cell: usize, value: f64 },
    #[error("distance evaluation failed: {0}")]
    Distance(#[from] crate::smooth_distance::DistanceError),
    #[error("{0}")]
    BadParameter(String),
    #[error("whitney stream: {0}")]
    Whitney(#[from] crate::whitney::WhitneyError),
}

/// Finite realization of the "every boundary ball" quantifier: strided atom
/// centers with a shared dyadic radius ladder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BallFamily {
    pub centers: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
}

impl BallFamily {
    /// Centers are every `stride`-th atom inside the shrunken grid box (so
    /// the balls stay resolvable); radii run dyadically down from `r_max`.
    pub fn build(
        set: &BoundarySet,
        grid: &Grid,
        stride: usize,
        r_min: f64,
        r_max: f64,
        max_balls: usize,
    ) -> Result<Self, CarlesonError> {
        if !(r_min > 0.0 && r_max >= r_min) {
            return Err(CarlesonError::BadParameter("need 0 < r_min <= r_max".into()));
        }
        let mut radii = Vec::new();
        let mut r = r_max;
        while r >= r_min * (1.0 - 1e-12) {
            radii.push(r);
            r *= 0.5;
        }
        if radii.is_empty() {
            return Err(CarlesonError::BadParameter("empty radius ladder".into()));
        }
        let n = set.dim_n();
        let side = grid.delta * grid.cells as f64;
        let mut centers = Vec::new();
        for i in (0..set.len()).step_by(stride.max(1)) {
            let p = set.point(i);
            // Keep the largest ball inside the box.
            let fits = (0..n).all(|j| {
                p[j] - r_max >= grid.lo[j] - 1e-12 && p[j] + r_max <= grid.lo[j] + side + 1e-12
            });
            if fits {
                centers.push(p.to_vec());
                if centers.len() * radii.len() >= max_balls {
                    break;
                }
            }
        }
        if centers.is_empty() {
            return Err(CarlesonError::BadParameter(
                "no boundary atom admits the requested r_max inside the grid box".into(),
            ));
        }
        Ok(BallFamily { centers, radii })
    }

    pub fn len(&self) -> usize {
        self.centers.len() * self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One ball's normalized integral.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BallRow {
    pub center: Vec<f64>,
    pub radius: f64,
    pub value: f64,
    /// Conservative size of the excluded tube contribution.
    pub excluded_mass: f64,
    pub cells: usize,
}

/// Per-ball rows plus their supremum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CarlesonReport {
    pub rows: Vec<BallRow>,
    pub sup_value: f64,
    pub field: String,
    pub exponent: f64,
    pub skipped_balls: usize,
}

impl CarlesonReport {
    fn from_rows(rows: Vec<BallRow>, field: String, exponent: f64, skipped: usize) -> Self {
        let sup_value = rows.iter().map(|r| r.value).fold(0.0, f64::max);
        CarlesonReport { rows, sup_value, field, exponent, skipped_balls: skipped }
    }
}

/// ∫_B g(X) dist(X,Γ)^{d-n} dX / σ(B) per family ball, as a cell sum over the
/// interior cells (tube cells are excluded; a bound for their mass is
/// reported). `g` is the squared field, or any nonnegative integrand factor.
pub fn cm_norm(
    g: &[f64],
    grid: &Arc<Grid>,
    set: &BoundarySet,
    family: &BallFamily,
    label: &str,
) -> Result<CarlesonReport, CarlesonError> {
    if g.len() != grid.len() {
        return Err(CarlesonError::FieldMismatch { got: g.len(), want: grid.len() });
    }
    let d = set.dim_d() as i32;
    let n = set.dim_n() as i32;
    let cell_vol = grid.delta.powi(n);
    let mut rows = Vec::with_capacity(family.len());
    let mut skipped = 0usize;
    for center in &family.centers {
        for &radius in &family.radii {
            if radius < 2.0 * grid.delta {
                skipped += 1;
                continue;
            }
            let mut acc = 0.0;
            let mut cells = 0usize;
            let mut sup_g = 0.0f64;
            let mut tube_volume = 0.0;
            for_cells_in_ball(grid, center, radius, |idx, _| {
                match grid.role(idx) {
                    CellRole::Interior => {
                        let w = grid.dist(idx).powi(d - n);
                        acc += g[idx] * w;
                        sup_g = sup_g.max(g[idx]);
                        cells += 1;
                    }
                    CellRole::Tube => tube_volume += cell_vol,
                    CellRole::Outer => {}
                }
            });
            let sigma = set.sigma_ball(center, radius);
            if sigma <= 0.0 {
                skipped += 1;
                continue;
            }
            let excluded = tube_volume * sup_g * grid.tube_radius.powi(d - n) / sigma;
            rows.push(BallRow {
                center: center.clone(),
                radius,
                value: acc * cell_vol / sigma,
                excluded_mass: excluded,
                cells,
            });
        }
    }
    Ok(CarlesonReport::from_rows(rows, label.to_string(), (d - n) as f64, skipped))
}

fn for_cells_in_ball(grid: &Grid, center: &[f64], radius: f64, mut visit: impl FnMut(usize, &[f64; 3])) {
    let m = grid.cells as i64;
    let mut lo = [0i64; 3];
    let mut hi = [0i64; 3];
    for j in 0..3 {
        lo[j] = (((center[j] - radius - grid.lo[j]) / grid.delta) - 0.5).floor().max(0.0) as i64;
        hi[j] = (((center[j] + radius - grid.lo[j]) / grid.delta) + 0.5).ceil().min((m - 1) as f64) as i64;
    }
    let r2 = radius * radius;
    for k in lo[2]..=hi[2] {
        for j in lo[1]..=hi[1] {
            for i in lo[0]..=hi[0] {
                let idx = grid.index(i as usize, j as usize, k as usize);
                let c = grid.center(idx);
                let d2: f64 = c.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                if d2 <= r2 {
                    visit(idx, &c);
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Field constructors used by the cutoff Carleson checks
// ---------------------------------------------------------------------------

/// Volume fractions of the regions E1, E2, E3 per cell, by sub-sampling a
/// `sub³` lattice. The fraction is exactly the cellwise mean of the squared
/// indicator. `dist_floor` drops the part of each region below a common
/// distance, so two resolutions integrate the same continuum set (the
/// sub-floor remainder is what the tube exclusion reports).
pub fn region_indicator_fields(
    spec: &CutoffSpec,
    set: &BoundarySet,
    grid: &Grid,
    sub: usize,
    dist_floor: f64,
) -> [Vec<f64>; 3] {
    let mut out = [vec![0.0; grid.len()], vec![0.0; grid.len()], vec![0.0; grid.len()]];
    let inv = 1.0 / (sub * sub * sub) as f64;
    let mut p = [0.0f64; 3];
    for idx in 0..grid.len() {
        if grid.role(idx) != CellRole::Interior {
            continue;
        }
        let c = grid.center(idx);
        let mut counts = [0usize; 3];
        for a in 0..sub {
            for b in 0..sub {
                for c3 in 0..sub {
                    p[0] = c[0] + ((a as f64 + 0.5) / sub as f64 - 0.5) * grid.delta;
                    p[1] = c[1] + ((b as f64 + 0.5) / sub as f64 - 0.5) * grid.delta;
                    p[2] = c[2] + ((c3 as f64 + 0.5) / sub as f64 - 0.5) * grid.delta;
                    let dg = set.distance(&p);
                    if dg < dist_floor {
                        continue;
                    }
                    let (e1, e2, e3) = spec.region_of(&p, dg);
                    if e1 {
                        counts[0] += 1;
                    }
                    if e2 {
                        counts[1] += 1;
                    }
                    if e3 {
                        counts[2] += 1;
                    }
                }
            }
        }
        for j in 0..3 {
            out[j][idx] = counts[j] as f64 * inv;
        }
    }
    out
}

/// |D_β ∇φ| and |D_β ∇φ|² per cell for the cutoff φ_{B,ε}.
pub fn cutoff_gradient_fields(
    spec: &CutoffSpec,
    set: &BoundarySet,
    grid: &Grid,
    params: &OperatorParams,
) -> Result<(Vec<f64>, Vec<f64>), CarlesonError> {
    let mut first = vec![0.0; grid.len()];
    let mut second = vec![0.0; grid.len()];
    for idx in 0..grid.len() {
        if grid.role(idx) != CellRole::Interior {
            continue;
        }
        let c = grid.center(idx);
        let (_, grad) = crate::whitney::cutoff_eval(spec, set, &c)
            .map_err(|e| CarlesonError::BadParameter(e.to_string()))?;
        let gnorm: f64 = grad.iter().map(|t| t * t).sum::<f64>().sqrt();
        if gnorm == 0.0 {
            continue;
        }
        let d = d_exponent(set, params.beta, &c, EvalPath::Auto)?.value;
        first[idx] = d * gnorm;
        second[idx] = (d * gnorm) * (d * gnorm);
    }
    Ok((first, second))
}

// ---------------------------------------------------------------------------
// Green-ratio functional
// ---------------------------------------------------------------------------

/// ∫_B |∇ ln(G / D_α^{1-γ})|² D_α^{d+2-n} dX / σ(B) per family ball.
///
/// The log-gradient is a central difference over cells whose full stencil is
/// interior; the value is invariant under G → K G by construction.
pub fn green_ratio_functional(
    g_field: &DiscreteField,
    set: &BoundarySet,
    params: &OperatorParams,
    family: &BallFamily,
) -> Result<CarlesonReport, CarlesonError> {
    let grid = &g_field.grid;
    let d = set.dim_d() as f64;
    let n = set.dim_n() as f64;
    let one_minus_gamma = 1.0 - params.gamma;
    // v = ln G - (1-γ) ln D_α on interior cells.
    let mut v = vec![f64::NAN; grid.len()];
    let mut d_alpha = vec![f64::NAN; grid.len()];
    for idx in 0..grid.len() {
        if grid.role(idx) != CellRole::Interior {
            continue;
        }
        let gval = g_field.values[idx];
        if !(gval > 0.0) {
            return Err(CarlesonError::NonPositive { cell: idx, value: gval });
        }
        let c = grid.center(idx);
        let da = d_exponent(set, params.alpha, &c, EvalPath::Auto)?.value;
        d_alpha[idx] = da;
        v[idx] = gval.ln() - one_minus_gamma * da.ln();
    }
    // Central-difference |∇v|² where all six neighbors are interior.
    let m = grid.cells;
    let strides = [1usize, m, m * m];
    let inv2d = 1.0 / (2.0 * grid.delta);
    let mut integrand = vec![0.0; grid.len()];
    let mut stencil_ok = vec![false; grid.len()];
    for idx in 0..grid.len() {
        if grid.role(idx) != CellRole::Interior {
            continue;
        }
        let mut acc = 0.0;
        let mut ok = true;
        for &stride in &strides {
            if idx < stride || idx + stride >= grid.len() {
                ok = false;
                break;
            }
            let (vm, vp) = (v[idx - stride], v[idx + stride]);
            if vm.is_nan() || vp.is_nan() {
                ok = false;
                break;
            }
            let g = (vp - vm) * inv2d;
            acc += g * g;
        }
        if ok {
            stencil_ok[idx] = true;
            integrand[idx] = acc * d_alpha[idx].powf(d + 2.0 - n);
        }
    }
    let cell_vol = grid.delta.powi(3);
    let mut rows = Vec::new();
    let mut skipped = 0usize;
    for center in &family.centers {
        for &radius in &family.radii {
            if radius < 2.0 * grid.delta {
                skipped += 1;
                continue;
            }
            let mut acc = 0.0;
            let mut cells = 0usize;
            let mut excluded = 0usize;
            for_cells_in_ball(grid, center, radius, |idx, _| match grid.role(idx) {
                CellRole::Interior => {
                    if stencil_ok[idx] {
                        acc += integrand[idx];
                        cells += 1;
                    } else {
                        excluded += 1;
                    }
                }
                _ => excluded += 1,
            });
            let sigma = set.sigma_ball(center, radius);
            if sigma <= 0.0 {
                skipped += 1;
                continue;
            }
            rows.push(BallRow {
                center: center.clone(),
                radius,
                value: acc * cell_vol / sigma,
                excluded_mass: excluded as f64 * cell_vol,
                cells,
            });
        }
    }
    Ok(CarlesonReport::from_rows(rows, "|grad ln(G/D^{1-g})|^2".into(), d + 2.0 - n, skipped))
}

/// |D_α ∇(D_β/D_α)|² cellwise, fed to the CM norm. The gradients come from
/// the closed-form kernel identities, not finite differences.
pub fn d_ratio_functional(
    set: &BoundarySet,
    alpha: f64,
    beta: f64,
    grid: &Arc<Grid>,
    family: &BallFamily,
) -> Result<CarlesonReport, CarlesonError> {
    let pa = OperatorParams::with_dims(alpha, 0.0, alpha, set.dim_d(), set.dim_n())
        .map_err(CarlesonError::Distance)?;
    let pb = OperatorParams::with_dims(beta, 0.0, beta, set.dim_d(), set.dim_n())
        .map_err(CarlesonError::Distance)?;
    let mut g = vec![0.0; grid.len()];
    for idx in 0..grid.len() {
        if grid.role(idx) != CellRole::Interior {
            continue;
        }
        let c = grid.center(idx);
        // D_α ∇(D_β/D_α) = ∇D_β - (D_β/D_α) ∇D_α.
        let da = d_exponent(set, alpha, &c, EvalPath::Auto)?.value;
        let db = d_exponent(set, beta, &c, EvalPath::Auto)?.value;
        let ga = grad_d_beta(set, &pa, &c, EvalPath::Auto)?.value;
        let gb = grad_d_beta(set, &pb, &c, EvalPath::Auto)?.value;
        let ratio = db / da;
        let mut norm2 = 0.0;
        for (gbj, gaj) in gb.iter().zip(&ga) {
            let t = gbj - ratio * gaj;
            norm2 += t * t;
        }
        g[idx] = norm2;
    }
    cm_norm(&g, grid, set, family, "|D_a grad(D_b/D_a)|^2")
}

// ---------------------------------------------------------------------------
// The cosine-weight counterexample
// ---------------------------------------------------------------------------

/// Which quadrature backend evaluates the counterexample integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CounterexampleRule {
    /// Gauss panels chunked at the π-periodicity of the integrand.
    PeriodPanels,
    /// Adaptive Simpson, independent of the panel route.
    Simpson,
}

/// I(R) = ∫_0^{R/2} |cos r - sin(r)/r|² dr/r. Grows like ln R: this is the
/// divergence witness for the cosine-weight operator.
pub fn counterexample_integral(r_target: f64, rule: CounterexampleRule) -> Result<f64, CarlesonError> {
    if !(r_target >= 1.0) {
        return Err(CarlesonError::BadParameter("need R >= 1".into()));
    }
    let upper = 0.5 * r_target;
    let f = |r: f64| {
        if r < 1e-6 {
            // cos r - sin r / r = -r²/3 + O(r⁴); the integrand is r³/9.
            return r * r * r / 9.0;
        }
        let t = r.cos() - r.sin() / r;
        t * t / r
    };
    match rule {
        CounterexampleRule::PeriodPanels => {
            let mut acc = 0.0;
            let mut lo = 0.0;
            while lo < upper {
                let hi = (lo + std::f64::consts::PI).min(upper);
                acc += gl24().integrate(lo, hi, f);
                lo = hi;
            }
            Ok(acc)
        }
        CounterexampleRule::Simpson => {
            let mut f2 = f;
            adaptive_simpson(&mut f2, 0.0, upper, 1e-11)
                .map_err(|e| CarlesonError::BadParameter(e.to_string()))
        }
    }
}

// ---------------------------------------------------------------------------
// Log-Poisson budget over the Step-2 family
// ---------------------------------------------------------------------------

/// Result of the Main budget sweep: Σ |ln(ω(Q_i)/σ(Q_i) · σ(B)/ω(B))| σ(Q_i)
/// over the streamed boundary-ball family, reported relative to σ(B).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogPoissonReport {
    pub budget: f64,
    pub sigma_b: f64,
    /// budget / σ(B): the recorded constant.
    pub constant: f64,
    pub i1_cubes: usize,
    pub i2_cubes: usize,
    pub i3_cubes: usize,
    /// Cubes whose ball had unresolvably small harmonic mass.
    pub degenerate_balls: usize,
    pub truncated_tube_cubes: usize,
}

/// Streams the Whitney boundary balls of (B, ε) and accumulates the
/// log-Poisson sum against the harmonic-measure density of one pole.
///
/// ω(Q_i) for patches below the grid resolution is interpolated from the
/// density profile smoothed over a window of max(r_i, smoothing floor); the
/// same window is applied to σ so the ratio compares like with like.
pub fn log_poisson_budget(
    set: &BoundarySet,
    density: &HarmonicDensity,
    ball_center: &[f64],
    ball_radius: f64,
    epsilon: f64,
    max_level: i32,
    budget: usize,
    root: &BoxRegion,
) -> Result<LogPoissonReport, CarlesonError> {
    let spec = CutoffSpec::new(ball_center, ball_radius, epsilon)
        .map_err(CarlesonError::Whitney)?;
    // Tube-cell profile along the boundary: (projection key, mass), sorted,
    // with prefix sums. Works for d = 1 generators where the first
    // coordinate parametrizes Γ.
    let grid = &density.grid;
    let mut entries: Vec<(f64, f64)> = Vec::new();
    for idx in 0..grid.len() {
        if grid.role(idx) == CellRole::Tube && density.rho[idx] != 0.0 {
            let c = grid.center(idx);
            let (ni, _) = set.nearest(&c);
            entries.push((set.point(ni)[0], density.rho[idx]));
        }
    }
    entries.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let keys: Vec<f64> = entries.iter().map(|e| e.0).collect();
    let mut prefix = vec![0.0];
    for e in &entries {
        prefix.push(prefix.last().unwrap() + e.1);
    }
    let window_floor = 2.0 * grid.delta;
    let omega_window = |center_key: f64, radius: f64| -> f64 {
        let r = radius.max(window_floor);
        let a = keys.partition_point(|k| *k < center_key - r);
        let b = keys.partition_point(|k| *k <= center_key + r);
        prefix[b] - prefix[a]
    };

    let sigma_b = set.sigma_ball(ball_center, ball_radius);
    let omega_b = omega_window(ball_center[0], ball_radius);
    if !(omega_b > 0.0) || !(sigma_b > 0.0) {
        return Err(CarlesonError::BadParameter(
            "harmonic or surface mass of the base ball vanishes".into(),
        ));
    }
    let base_ratio = sigma_b / omega_b;

    let mut budget_sum = 0.0;
    let mut i1 = 0usize;
    let mut i2 = 0usize;
    let mut i3 = 0usize;
    let mut degenerate = 0usize;
    // The I2 balls are all (x, 3r): one shared term.
    let sigma_3b = set.sigma_ball(ball_center, 3.0 * ball_radius);
    let omega_3b = omega_window(ball_center[0], 3.0 * ball_radius);
    let i2_term = if omega_3b > 0.0 {
        (omega_3b / sigma_3b * base_ratio).ln().abs() * sigma_3b
    } else {
        f64::INFINITY
    };
    let stats = crate::whitney::stream_boundary_balls(
        set,
        &spec,
        max_level,
        budget,
        root,
        &mut |_cube, class, center, radius| match class {
            BallClass::I2 => i2 += 1,
            BallClass::I3 | BallClass::I1 => {
                if class == BallClass::I3 {
                    i3 += 1;
                } else {
                    i1 += 1;
                }
                let sigma_q = sigma_window(set, center, radius, window_floor);
                let omega_q = omega_window(center[0], radius);
                if omega_q > 0.0 && sigma_q > 0.0 {
                    budget_sum += (omega_q / sigma_q * base_ratio).ln().abs() * sigma_q;
                } else {
                    degenerate += 1;
                }
            }
        },
    )?;
    budget_sum += i2 as f64 * i2_term;
    Ok(LogPoissonReport {
        budget: budget_sum,
        sigma_b,
        constant: budget_sum / sigma_b,
        i1_cubes: i1,
        i2_cubes: i2,
        i3_cubes: i3,
        degenerate_balls: degenerate,
        truncated_tube_cubes: stats.tube,
    })
}

/// σ of the boundary ball, widened to the same smoothing window used for ω.
fn sigma_window(set: &BoundarySet, center: &[f64], radius: f64, floor: f64) -> f64 {
    set.sigma_ball(center, radius.max(floor))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_flat;
    use crate::solver::{Assembly, Grid};

    fn setup() -> (crate::geometry::BoundarySet, Arc<Grid>) {
        let set = make_flat(1, 3, 10.0, 0.01).unwrap();
        let bx = BoxRegion::cube(&[0.0, 0.0, 0.0], 2.0);
        let grid = Grid::new(&set, &bx, 32, None).unwrap();
        (set, grid)
    }

    #[test]
    fn zero_field_has_zero_norm() {
        let (set, grid) = setup();
        let family = BallFamily::build(&set, &grid, 64, 0.25, 1.0, 64).unwrap();
        let g = vec![0.0; grid.len()];
        let report = cm_norm(&g, &grid, &set, &family, "zero").unwrap();
        assert!(report.sup_value == 0.0);
        assert!(!report.rows.is_empty());
    }

    #[test]
    fn constant_field_shows_log_divergence_in_the_tube_radius() {
        // ∫_B dist^{-2} over the complement of a shrinking tube grows like
        // ln(1/δ): the constant field is not Carleson.
        let set = make_flat(1, 3, 10.0, 0.01).unwrap();
        let bx = BoxRegion::cube(&[0.0, 0.0, 0.0], 1.0);
        let mut values = Vec::new();
        for (cells, tube) in [(32usize, 0.125), (64, 0.0625)] {
            let grid = Grid::new(&set, &bx, cells, Some(tube)).unwrap();
            let family = BallFamily::build(&set, &grid, 1000, 0.4, 0.4, 4).unwrap();
            let g = vec![1.0; grid.len()];
            let report = cm_norm(&g, &grid, &set, &family, "one").unwrap();
            values.push(report.sup_value);
        }
        // Shell-sum oracle: the increment from halving δ is 2π·2r·ln 2 / σ(B)
        // = 2π ln 2 · (2·0.4) / 0.8 ≈ 4.355.
        let increment = values[1] - values[0];
        let oracle = 2.0 * std::f64::consts::PI * std::f64::consts::LN_2;
        assert!(
            (increment - oracle).abs() / oracle < 0.25,
            "increment {increment} oracle {oracle} ({values:?})"
        );
    }

    #[test]
    fn ball_nesting_is_monotone_unnormalized() {
        let (set, grid) = setup();
        // Same center, two radii: unnormalized integral grows with the ball.
        let family = BallFamily::build(&set, &grid, 150, 0.3, 0.6, 16).unwrap();
        let g: Vec<f64> = (0..grid.len()).map(|i| (i % 7) as f64 * 0.1).collect();
        let report = cm_norm(&g, &grid, &set, &family, "test").unwrap();
        for pair in report.rows.chunks(2) {
            if pair.len() == 2 && pair[0].center == pair[1].center {
                let (big, small) = (&pair[0], &pair[1]);
                let sigma_big = set.sigma_ball(&big.center, big.radius);
                let sigma_small = set.sigma_ball(&small.center, small.radius);
                assert!(big.value * sigma_big >= small.value * sigma_small - 1e-12);
            }
        }
    }

    #[test]
    fn cm_norm_of_sum_is_controlled() {
        let (set, grid) = setup();
        let family = BallFamily::build(&set, &grid, 300, 0.3, 0.6, 8).unwrap();
        let f: Vec<f64> = (0..grid.len()).map(|i| ((i * 31) % 11) as f64 * 0.05).collect();
        let g: Vec<f64> = (0..grid.len()).map(|i| ((i * 17) % 5) as f64 * 0.08).collect();
        let fsq: Vec<f64> = f.iter().map(|v| v * v).collect();
        let gsq: Vec<f64> = g.iter().map(|v| v * v).collect();
        let ssq: Vec<f64> = f.iter().zip(&g).map(|(a, b)| (a + b) * (a + b)).collect();
        let rf = cm_norm(&fsq, &grid, &set, &family, "f").unwrap();
        let rg = cm_norm(&gsq, &grid, &set, &family, "g").unwrap();
        let rs = cm_norm(&ssq, &grid, &set, &family, "f+g").unwrap();
        for ((s, f1), g1) in rs.rows.iter().zip(&rf.rows).zip(&rg.rows) {
            assert!(s.value <= 2.0 * (f1.value + g1.value) + 1e-12);
        }
    }

    #[test]
    fn injected_exact_green_zeroes_the_functional() {
        let (set, grid) = setup();
        let params = OperatorParams::new(1.0, 0.0, 1.0, &set).unwrap();
        // G = 7·D_β^{1-γ} exactly: the log ratio is constant.
        let mut values = vec![0.0; grid.len()];
        for idx in 0..grid.len() {
            let c = grid.center(idx);
            values[idx] = 7.0
                * d_exponent(&set, params.beta, &c, EvalPath::Auto)
                    .map(|s| s.value)
                    .unwrap_or(1e-12);
        }
        let field = DiscreteField { grid: grid.clone(), values };
        let family = BallFamily::build(&set, &grid, 200, 0.3, 0.9, 16).unwrap();
        let report = green_ratio_functional(&field, &set, &params, &family).unwrap();
        assert!(report.sup_value <= 1e-4, "sup {}", report.sup_value);
    }

    #[test]
    fn functional_is_invariant_under_scaling_g() {
        let (set, grid) = setup();
        let params = OperatorParams::new(1.0, 0.0, 1.0, &set).unwrap();
        let assembly = Assembly::new(grid.clone(), &set, &params).unwrap();
        let (g, _) = crate::solver::green_infinity(&assembly, &set, &[0.0, 0.0, 0.0], 0.5).unwrap();
        let family = BallFamily::build(&set, &grid, 200, 0.3, 0.9, 16).unwrap();
        let r1 = green_ratio_functional(&g, &set, &params, &family).unwrap();
        let scaled = DiscreteField {
            grid: g.grid.clone(),
            values: g.values.iter().map(|v| 7.3 * v).collect(),
        };
        let r2 = green_ratio_functional(&scaled, &set, &params, &family).unwrap();
        for (a, b) in r1.rows.iter().zip(&r2.rows) {
            assert!(
                (a.value - b.value).abs() <= 1e-10 * (1.0 + a.value),
                "{} vs {}",
                a.value,
                b.value
            );
        }
    }

    #[test]
    fn nonpositive_green_is_rejected_with_cell() {
        let (set, grid) = setup();
        let params = OperatorParams::new(1.0, 0.0, 1.0, &set).unwrap();
        let mut values = vec![1.0; grid.len()];
        // Poison one interior cell.
        let bad = (0..grid.len()).find(|&i| grid.role(i) == CellRole::Interior).unwrap();
        values[bad] = -0.5;
        let field = DiscreteField { grid: grid.clone(), values };
        let family = BallFamily::build(&set, &grid, 200, 0.3, 0.9, 8).unwrap();
        match green_ratio_functional(&field, &set, &params, &family) {
            Err(CarlesonError::NonPositive { cell, .. }) => assert_eq!(cell, bad),
            other => panic!("expected NonPositive, got {other:?}"),
        }
    }

    #[test]
    fn d_ratio_vanishes_for_equal_exponents_and_flat_sets() {
        let (set, grid) = setup();
        let family = BallFamily::build(&set, &grid, 300, 0.3, 0.6, 8).unwrap();
        let same = d_ratio_functional(&set, 1.5, 1.5, &grid, &family).unwrap();
        assert!(same.sup_value <= 1e-20, "same exponents: {}", same.sup_value);
        // Flat set: D_β/D_α is a global constant, so the field is ~0.
        let diff = d_ratio_functional(&set, 1.0, 2.0, &grid, &family).unwrap();
        assert!(diff.sup_value <= 1e-3, "flat ratio: {}", diff.sup_value);
    }

    #[test]
    fn counterexample_rules_agree_and_profile_is_pinched() {
        let a = counterexample_integral(1.0, CounterexampleRule::PeriodPanels).unwrap();
        let b = counterexample_integral(1.0, CounterexampleRule::Simpson).unwrap();
        assert!(a > 0.0);
        assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
        // r <= 2r + sin r <= 3r.
        for i in 1..=10_000 {
            let r = i as f64 * 0.01;
            let g = 2.0 * r + r.sin();
            assert!(g >= r && g <= 3.0 * r);
        }
    }

    #[test]
    fn log_poisson_budget_on_a_coarse_flat_setup() {
        let set = make_flat(1, 3, 10.0, 0.01).unwrap();
        let bx = BoxRegion::cube(&[0.0, 0.0, 0.0], 2.0);
        let grid = Grid::new(&set, &bx, 48, None).unwrap();
        let params = OperatorParams::new(1.0, 0.0, 1.0, &set).unwrap();
        let assembly = Assembly::new(grid.clone(), &set, &params).unwrap();
        let density = crate::solver::harmonic_density(&assembly, &[0.0, 1.5, 0.0]).unwrap();
        assert!((density.tube_mass() + density.outer_mass() - 1.0).abs() < 1e-6);
        let report = log_poisson_budget(
            &set,
            &density,
            &[0.0, 0.0, 0.0],
            1.0,
            0.125,
            9,
            40_000_000,
            &bx,
        )
        .unwrap();
        assert!(report.constant.is_finite() && report.constant > 0.0, "{report:?}");
        assert!(report.i2_cubes > 0);
        assert!(report.degenerate_balls <= (report.i1_cubes + report.i3_cubes) / 10);
    }

    #[test]
    fn counterexample_decade_increments_settle() {
        let rule = CounterexampleRule::PeriodPanels;
        let mut increments = Vec::new();
        for r in [100.0, 1000.0, 10000.0] {
            let big = counterexample_integral(10.0 * r, rule).unwrap();
            let small = counterexample_integral(r, rule).unwrap();
            increments.push(big - small);
        }
        let mean: f64 = increments.iter().sum::<f64>() / 3.0;
        for inc in &increments {
            assert!((inc - mean).abs() / mean < 0.05, "{increments:?}");
        }
        // The limit increment is (1/2) ln 10 from the mean square of cos.
        let limit = 0.5 * 10.0f64.ln();
        assert!((mean - limit).abs() / limit < 0.05, "mean {mean} limit {limit}");
    }
}
