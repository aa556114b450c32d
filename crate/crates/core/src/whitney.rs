//! Whitney decomposition of Ω = Rⁿ∖Γ, the boundary balls attached to the
//! cubes near a fixed ball B, and the three-factor cutoff function with its
//! gradient regions.
//!
//! Cube counts explode near Γ (side ≈ distance / 35), so the core API is a
//! streaming visitor with subtree pruning; the materialized decomposition is
//! a thin wrapper for moderate depths.

use crate::geometry::BoundarySet;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum WhitneyError {
    #[error("cube budget of {budget} exceeded near {location:?} (side {side:.3e})")]
    Budget { budget: usize, location: Vec<f64>, side: f64 },
    #[error("box must have positive extent")]
    EmptyBox,
    #[error("cube meets none of the gradient regions E1, E2, E3")]
    NoRegion,
    #[error("{0}")]
    BadParameter(String),
}

/// Axis-aligned box, used for decomposition roots and volume bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxRegion {
    pub fn cube(center: &[f64], half_width: f64) -> Self {
        BoxRegion {
            lo: center.iter().map(|c| c - half_width).collect(),
            hi: center.iter().map(|c| c + half_width).collect(),
        }
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| (b - a).max(0.0)).product()
    }
}

/// A dyadic cube: side 2^{-level}, corner at `corner * side` on the level's
/// lattice. `center_dist` caches dist(center, Γ) against the atom cloud.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WhitneyCube {
    pub level: i32,
    pub corner: [i64; 4],
    pub side: f64,
    pub center_dist: f64,
}

impl WhitneyCube {
    pub fn center(&self, n: usize) -> Vec<f64> {
        (0..n).map(|j| (self.corner[j] as f64 + 0.5) * self.side).collect()
    }

    pub fn lo(&self, j: usize) -> f64 {
        self.corner[j] as f64 * self.side
    }

    pub fn hi(&self, j: usize) -> f64 {
        (self.corner[j] + 1) as f64 * self.side
    }

    pub fn half_diagonal(&self, n: usize) -> f64 {
        0.5 * self.side * (n as f64).sqrt()
    }

    /// Certified lower bound for dist(R, Γ).
    pub fn dist_lower(&self, n: usize) -> f64 {
        (self.center_dist - self.half_diagonal(n)).max(0.0)
    }

    /// Upper bound for sup over the cube of dist(X, Γ).
    pub fn dist_upper(&self, n: usize) -> f64 {
        self.center_dist + self.half_diagonal(n)
    }

    /// The certified interior condition: dist(center, Γ) > 10 √n side
    /// guarantees 20R ⊂ Ω.
    pub fn interior_condition(&self, n: usize) -> bool {
        self.center_dist > 10.0 * (n as f64).sqrt() * self.side
    }

    pub fn volume(&self, n: usize) -> f64 {
        self.side.powi(n as i32)
    }

    /// Euclidean distance from a point to the (closed) cube.
    pub fn dist_to_point(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (j, &xj) in x.iter().enumerate() {
            let lo = self.lo(j);
            let hi = self.hi(j);
            let t = if xj < lo {
                lo - xj
            } else if xj > hi {
                xj - hi
            } else {
                0.0
            };
            acc += t * t;
        }
        acc.sqrt()
    }
}

/// What the visitor is being handed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CubeKind {
    /// Maximal dyadic cube with the certified interior condition.
    Whitney,
    /// Deepest-level cube adjacent to Γ, retained for bookkeeping only.
    Tube,
}

/// Result of [`whitney_decompose`].
#[derive(Debug)]
pub struct WhitneyDecomposition {
    pub cubes: Vec<WhitneyCube>,
    pub tube_cubes: Vec<WhitneyCube>,
    /// The requested box snapped outward to the seed lattice.
    pub effective_box: BoxRegion,
    pub max_level: i32,
}

/// Streaming control: continue descending / emit, or prune a whole subtree.
pub struct StreamStats {
    pub visited: usize,
    pub whitney: usize,
    pub tube: usize,
}

fn seed_level(bx: &BoxRegion) -> Result<i32, WhitneyError> {
    let side = bx
        .lo
        .iter()
        .zip(&bx.hi)
        .map(|(a, b)| b - a)
        .fold(0.0f64, f64::max);
    if !(side > 0.0) {
        return Err(WhitneyError::EmptyBox);
    }
    // Seed cubes roughly half the box extent.
    Ok(-(side / 2.0).log2().floor() as i32)
}

/// Visits the Whitney decomposition of `bx ∖ Γ` in deterministic order.
///
/// `prune(cube)` may return true to discard a subtree that provably cannot
/// contribute; `sink` receives every emitted cube. Returns statistics and the
/// snapped box.
pub fn visit_whitney(
    set: &BoundarySet,
    bx: &BoxRegion,
    max_level: i32,
    budget: usize,
    prune: &dyn Fn(&WhitneyCube) -> bool,
    sink: &mut dyn FnMut(&WhitneyCube, CubeKind),
) -> Result<(StreamStats, BoxRegion), WhitneyError> {
    let n = set.dim_n();
    if bx.lo.len() != n || bx.hi.len() != n {
        return Err(WhitneyError::BadParameter(format!("box must be {n}-dimensional")));
    }
    let level0 = seed_level(bx)?;
    if max_level < level0 {
        return Err(WhitneyError::BadParameter(format!(
            "max_level {max_level} is coarser than the seed level {level0}"
        )));
    }
    let side0 = (2.0f64).powi(-level0);
    let mut lo_idx = [0i64; 4];
    let mut hi_idx = [0i64; 4];
    let mut snapped = BoxRegion { lo: vec![0.0; n], hi: vec![0.0; n] };
    for j in 0..n {
        lo_idx[j] = (bx.lo[j] / side0).floor() as i64;
        hi_idx[j] = (bx.hi[j] / side0).ceil() as i64 - 1;
        snapped.lo[j] = lo_idx[j] as f64 * side0;
        snapped.hi[j] = (hi_idx[j] + 1) as f64 * side0;
    }

    let mut stats = StreamStats { visited: 0, whitney: 0, tube: 0 };
    let mut stack: Vec<(i32, [i64; 4])> = Vec::new();
    // Seeds in lexicographic order.
    let mut idx = lo_idx;
    'seed: loop {
        stack.push((level0, idx));
        let mut axis = n;
        loop {
            if axis == 0 {
                break 'seed;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] <= hi_idx[axis] {
                break;
            }
            idx[axis] = lo_idx[axis];
            if axis == 0 {
                break 'seed;
            }
        }
    }
    // Depth-first; children pushed in reverse so the pop order is ascending.
    let mut center = vec![0.0; n];
    while let Some((level, corner)) = stack.pop() {
        stats.visited += 1;
        if stats.visited > budget {
            let side = (2.0f64).powi(-level);
            return Err(WhitneyError::Budget {
                budget,
                location: (0..n).map(|j| corner[j] as f64 * side).collect(),
                side,
            });
        }
        let side = (2.0f64).powi(-level);
        for j in 0..n {
            center[j] = (corner[j] as f64 + 0.5) * side;
        }
        let cube = WhitneyCube { level, corner, side, center_dist: set.distance(&center) };
        if prune(&cube) {
            continue;
        }
        if cube.interior_condition(n) {
            stats.whitney += 1;
            sink(&cube, CubeKind::Whitney);
        } else if level >= max_level {
            stats.tube += 1;
            sink(&cube, CubeKind::Tube);
        } else {
            let child_level = level + 1;
            for bits in (0..(1u32 << n)).rev() {
                let mut child = [0i64; 4];
                for j in 0..n {
                    child[j] = corner[j] * 2 + ((bits >> j) & 1) as i64;
                }
                stack.push((child_level, child));
            }
        }
    }
    Ok((stats, snapped))
}

/// Materialized decomposition; use only at depths where the cube count is
/// sane (the budget guards against surprises).
pub fn whitney_decompose(
    set: &BoundarySet,
    bx: &BoxRegion,
    max_level: i32,
    budget: usize,
) -> Result<WhitneyDecomposition, WhitneyError> {
    let mut cubes = Vec::new();
    let mut tube_cubes = Vec::new();
    let (_, effective_box) =
        visit_whitney(set, bx, max_level, budget, &|_| false, &mut |cube, kind| match kind {
            CubeKind::Whitney => cubes.push(cube.clone()),
            CubeKind::Tube => tube_cubes.push(cube.clone()),
        })?;
    Ok(WhitneyDecomposition { cubes, tube_cubes, effective_box, max_level })
}

// ---------------------------------------------------------------------------
// Cutoff function
// ---------------------------------------------------------------------------

/// The fixed bump: 1 on [-1,1], 0 outside (-2,2), monotone cubic bridge,
/// |ψ'| ≤ 1.5.
pub fn psi(s: f64) -> f64 {
    let a = s.abs();
    if a <= 1.0 {
        1.0
    } else if a >= 2.0 {
        0.0
    } else {
        let u = a - 1.0;
        1.0 - u * u * (3.0 - 2.0 * u)
    }
}

pub fn psi_prime(s: f64) -> f64 {
    let a = s.abs();
    if !(1.0..2.0).contains(&a) {
        0.0
    } else {
        let u = a - 1.0;
        -6.0 * u * (1.0 - u) * s.signum()
    }
}

/// φ_{B,ε} = ψ(dist(X,B)/10 dist(X,Γ)) ψ(2 dist(X,B)/r) ψ(ε/dist(X,Γ)).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub center: Vec<f64>,
    pub radius: f64,
    pub epsilon: f64,
}

/// The three gradient regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    E1,
    E2,
    E3,
}

impl CutoffSpec {
    pub fn new(center: &[f64], radius: f64, epsilon: f64) -> Result<Self, WhitneyError> {
        if !(radius > 0.0) || !(epsilon > 0.0) {
            return Err(WhitneyError::BadParameter("radius and epsilon must be positive".into()));
        }
        Ok(CutoffSpec { center: center.to_vec(), radius, epsilon })
    }

    /// dist(X, closed ball B).
    pub fn dist_to_ball(&self, x: &[f64]) -> f64 {
        let mut d2 = 0.0;
        for (a, b) in x.iter().zip(&self.center) {
            d2 += (a - b) * (a - b);
        }
        (d2.sqrt() - self.radius).max(0.0)
    }

    fn dist_to_center(&self, x: &[f64]) -> f64 {
        let mut d2 = 0.0;
        for (a, b) in x.iter().zip(&self.center) {
            d2 += (a - b) * (a - b);
        }
        d2.sqrt()
    }

    /// Point membership in E_j given dist(X, Γ).
    pub fn region_of(&self, x: &[f64], dist_gamma: f64) -> (bool, bool, bool) {
        let in_2b = self.dist_to_center(x) <= 2.0 * self.radius;
        if !in_2b || dist_gamma <= 0.0 {
            return (false, false, false);
        }
        let db = self.dist_to_ball(x);
        let e1 = 10.0 * dist_gamma <= db && db <= 20.0 * dist_gamma;
        let e2 = self.radius / 40.0 <= dist_gamma && dist_gamma <= 2.0 * self.radius;
        let e3 = self.epsilon / 2.0 <= dist_gamma && dist_gamma <= self.epsilon;
        (e1, e2, e3)
    }

    /// Support region E0 membership.
    pub fn in_support_region(&self, x: &[f64], dist_gamma: f64) -> bool {
        self.dist_to_center(x) <= 2.0 * self.radius
            && self.dist_to_ball(x) <= 20.0 * dist_gamma
            && dist_gamma >= self.epsilon / 2.0
    }
}

/// Evaluates φ and its analytic gradient (product rule over the three ψ
/// factors; dist gradients from the nearest atom / ball center directions).
pub fn cutoff_eval(
    spec: &CutoffSpec,
    set: &BoundarySet,
    x: &[f64],
) -> Result<(f64, Vec<f64>), WhitneyError> {
    let n = set.dim_n();
    let (nearest_idx, dg) = set.nearest(x);
    if dg <= 0.0 {
        return Err(WhitneyError::BadParameter("query point lies on the boundary".into()));
    }
    let db = spec.dist_to_ball(x);
    let dc = spec.dist_to_center(x);
    let r = spec.radius;
    let eps = spec.epsilon;

    let q1 = db / (10.0 * dg);
    let q2 = 2.0 * db / r;
    let q3 = eps / dg;
    let (p1, p2, p3) = (psi(q1), psi(q2), psi(q3));
    let value = p1 * p2 * p3;

    // grad dist(X, Γ) and grad dist(X, B).
    let mut grad_dg = vec![0.0; n];
    let y = set.point(nearest_idx);
    for j in 0..n {
        grad_dg[j] = (x[j] - y[j]) / dg;
    }
    let mut grad_db = vec![0.0; n];
    if db > 0.0 && dc > 0.0 {
        for j in 0..n {
            grad_db[j] = (x[j] - spec.center[j]) / dc;
        }
    }

    let dp1 = psi_prime(q1);
    let dp2 = psi_prime(q2);
    let dp3 = psi_prime(q3);
    let mut grad = vec![0.0; n];
    for j in 0..n {
        let dq1 = grad_db[j] / (10.0 * dg) - db * grad_dg[j] / (10.0 * dg * dg);
        let dq2 = 2.0 * grad_db[j] / r;
        let dq3 = -eps * grad_dg[j] / (dg * dg);
        grad[j] = dp1 * dq1 * p2 * p3 + p1 * dp2 * dq2 * p3 + p1 * p2 * dp3 * dq3;
    }
    Ok((value, grad))
}

// ---------------------------------------------------------------------------
// Boundary balls
// ---------------------------------------------------------------------------

/// A surface ball Q_i = Γ ∩ B(x_i, r_i) attached to a Whitney cube.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryBall {
    pub center: Vec<f64>,
    pub radius: f64,
    pub source_cube: usize,
    pub class: BallClass,
}

/// Which construction case produced the ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BallClass {
    /// Cube meets E2: the ball is (x, 3r) for every such cube.
    I2,
    /// Cube meets E3 (not E2): nearest boundary point, radius ε.
    I3,
    /// Cube meets only E1: closest approach of the cube's E1 points.
    I1,
}

const CUBE_SUBSAMPLES: usize = 3;

/// Classifies one cube against the regions of `spec` by sub-sampling a
/// 3^n lattice inside it; returns the assignment or NoRegion.
pub fn assign_boundary_ball(
    cube: &WhitneyCube,
    set: &BoundarySet,
    spec: &CutoffSpec,
) -> Result<(BallClass, Vec<f64>, f64), WhitneyError> {
    let n = set.dim_n();
    let m = CUBE_SUBSAMPLES;
    let mut meets_e1: Option<(f64, Vec<f64>)> = None; // (dist, point)
    let mut meets_e2 = false;
    let mut meets_e3: Option<(f64, Vec<f64>)> = None;
    let mut point = vec![0.0; n];
    let mut idx = vec![0usize; n];
    loop {
        for j in 0..n {
            point[j] = cube.lo(j) + (idx[j] as f64 + 0.5) / m as f64 * cube.side;
        }
        let dg = set.distance(&point);
        let (e1, e2, e3) = spec.region_of(&point, dg);
        if e2 {
            meets_e2 = true;
        }
        if e3 && meets_e3.as_ref().map_or(true, |(d, _)| dg < *d) {
            meets_e3 = Some((dg, point.clone()));
        }
        if e1 && meets_e1.as_ref().map_or(true, |(d, _)| dg < *d) {
            meets_e1 = Some((dg, point.clone()));
        }
        // Odometer.
        let mut axis = n;
        loop {
            if axis == 0 {
                break;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < m {
                break;
            }
            idx[axis] = 0;
            if axis == 0 {
                break;
            }
        }
        if idx.iter().all(|&i| i == 0) {
            break;
        }
    }
    if meets_e2 {
        return Ok((BallClass::I2, spec.center.clone(), 3.0 * spec.radius));
    }
    if let Some((_, p)) = meets_e3 {
        let (i, _) = set.nearest(&p);
        return Ok((BallClass::I3, set.point(i).to_vec(), spec.epsilon));
    }
    if let Some((dist, p)) = meets_e1 {
        let (i, _) = set.nearest(&p);
        return Ok((BallClass::I1, set.point(i).to_vec(), dist));
    }
    Err(WhitneyError::NoRegion)
}

/// Builds the boundary-ball family for the cubes meeting E1 ∪ E2 ∪ E3.
/// Cubes meeting none of the regions are rejected when passed explicitly.
pub fn associate_boundary_balls(
    cubes: &[WhitneyCube],
    set: &BoundarySet,
    spec: &CutoffSpec,
) -> Result<Vec<BoundaryBall>, WhitneyError> {
    let mut out = Vec::new();
    for (i, cube) in cubes.iter().enumerate() {
        let (class, center, radius) = assign_boundary_ball(cube, set, spec)?;
        out.push(BoundaryBall { center, radius, source_cube: i, class });
    }
    Ok(out)
}

/// Streams the Step-2 family over the full decomposition: every Whitney cube
/// meeting E1 ∪ E2 ∪ E3 is classified and handed to `sink` together with its
/// ball. Subtrees that provably cannot meet the regions are pruned.
pub fn stream_boundary_balls(
    set: &BoundarySet,
    spec: &CutoffSpec,
    max_level: i32,
    budget: usize,
    root: &BoxRegion,
    sink: &mut dyn FnMut(&WhitneyCube, BallClass, &[f64], f64),
) -> Result<StreamStats, WhitneyError> {
    let n = set.dim_n();
    let r = spec.radius;
    let eps = spec.epsilon;
    let floor = (eps / 2.0).min(r / 40.0);
    let center = spec.center.clone();
    let prune = move |cube: &WhitneyCube| -> bool {
        // All regions live inside 2B and within dist(·,Γ) ≤ 2r.
        let mut d2 = 0.0;
        for j in 0..n {
            let c = (cube.corner[j] as f64 + 0.5) * cube.side;
            let t = (c - center[j]).abs();
            d2 += t * t;
        }
        let center_gap = d2.sqrt();
        if center_gap - cube.half_diagonal(n) > 2.0 * r {
            return true;
        }
        if cube.dist_lower(n) > 2.0 * r {
            return true;
        }
        // Deep near-tube cubes below the E2/E3 floor can only contribute via
        // E1, which needs dist(X,B) ≤ 20 dist(X,Γ): away from the thin cones
        // at ∂B ∩ Γ the whole subtree is dead.
        let du = cube.dist_upper(n);
        if du < floor {
            let half = cube.half_diagonal(n);
            let fully_inside_b = center_gap + half <= r;
            let min_db = (center_gap - half - r).max(0.0);
            if fully_inside_b || min_db > 20.0 * du {
                return true;
            }
        }
        false
    };
    let mut stream_err = None;
    let i2_center = spec.center.clone();
    let i2_radius = 3.0 * r;
    let (stats, _) = visit_whitney(set, root, max_level, budget, &prune, &mut |cube, kind| {
        if kind != CubeKind::Whitney || stream_err.is_some() {
            return;
        }
        // Certain I2 cubes (every point lies in E2) skip the subsample pass;
        // they are by far the most numerous class.
        let half = cube.half_diagonal(n);
        let mut d2 = 0.0;
        for j in 0..n {
            let c = (cube.corner[j] as f64 + 0.5) * cube.side;
            d2 += (c - spec.center[j]) * (c - spec.center[j]);
        }
        if d2.sqrt() + half <= 2.0 * r
            && cube.dist_lower(n) >= r / 40.0
            && cube.dist_upper(n) <= 2.0 * r
        {
            sink(cube, BallClass::I2, &i2_center, i2_radius);
            return;
        }
        match assign_boundary_ball(cube, set, spec) {
            Ok((class, ball_center, radius)) => sink(cube, class, &ball_center, radius),
            Err(WhitneyError::NoRegion) => {}
            Err(e) => stream_err = Some(e),
        }
    })?;
    if let Some(e) = stream_err {
        return Err(e);
    }
    Ok(stats)
}
