//! Flatness measurement: the normalized Wasserstein-type distance from the
//! boundary measure to flat measures, the α-number at a location and scale,
//! and the multi-scale square sum that separates uniformly rectifiable sets
//! from the unrectifiable control.

pub mod transport;

use crate::geometry::BoundarySet;
use crate::numeric::{golden_min, nelder_mead, symmetric_eigen, NelderMeadOpts, SplitMix64};
use serde::{Deserialize, Serialize};
use transport::{solve_lipschitz_dual, LpStatus, Workspace};

#[derive(Debug, thiserror::Error)]
pub enum AlphaError {
    #[error("fewer than {needed} atoms in B(x, 2r); cannot fit a {d}-plane")]
    InsufficientData { needed: usize, d: usize },
    #[error("radius {r:.3e} outside the trusted range [{lo:.3e}, {hi:.3e}]")]
    RadiusRange { r: f64, lo: f64, hi: f64 },
    #[error("invalid flat measure: {0}")]
    BadMeasure(String),
    #[error("transport solve failed: {0}")]
    Transport(#[from] transport::TransportError),
    #[error("{0}")]
    BadParameter(String),
}

/// c · (Lebesgue measure on an affine d-plane).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlatMeasure {
    pub plane_point: Vec<f64>,
    /// d orthonormal direction vectors, row-major (d × n).
    pub plane_basis: Vec<f64>,
    pub density_c: f64,
}

impl FlatMeasure {
    pub fn new(plane_point: Vec<f64>, plane_basis: Vec<f64>, density_c: f64) -> Result<Self, AlphaError> {
        let n = plane_point.len();
        if n == 0 || plane_basis.len() % n != 0 {
            return Err(AlphaError::BadMeasure("basis/point dimension mismatch".into()));
        }
        if !(density_c >= 0.0) {
            return Err(AlphaError::BadMeasure("density must be nonnegative".into()));
        }
        let d = plane_basis.len() / n;
        for i in 0..d {
            for j in i..d {
                let mut dot = 0.0;
                for k in 0..n {
                    dot += plane_basis[i * n + k] * plane_basis[j * n + k];
                }
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > 1e-12 {
                    return Err(AlphaError::BadMeasure(format!(
                        "basis not orthonormal: <b{i}, b{j}> = {dot}"
                    )));
                }
            }
        }
        Ok(FlatMeasure { plane_point, plane_basis, density_c })
    }

    pub fn dim(&self) -> usize {
        self.plane_basis.len() / self.plane_point.len()
    }
}

/// Tuning for the Wasserstein evaluation and the flat-measure search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlphaConfig {
    /// Node budget per transport solve; larger problems are coarsened by
    /// weight-preserving merging.
    pub node_cap: usize,
    /// Evaluation cap for each Nelder-Mead start.
    pub nm_max_evals: usize,
    /// Random plane perturbations tried after the PCA start.
    pub random_starts: usize,
    /// Stop the search once the value drops below this.
    pub early_exit: f64,
    pub seed: u64,
}

impl Default for AlphaConfig {
    fn default() -> Self {
        AlphaConfig {
            node_cap: 600,
            nm_max_evals: 200,
            random_starts: 4,
            early_exit: 1e-7,
            seed: 0x5eed,
        }
    }
}

/// One Wasserstein evaluation: a certified value plus solve metadata.
#[derive(Debug, Clone)]
pub struct WassersteinEstimate {
    pub value: f64,
    pub lp_gap: f64,
    pub status: LpStatus,
    pub nodes: usize,
    /// Upper bound for the value perturbation introduced by node merging.
    pub merge_error: f64,
}

/// The α-number at (x, r): searched infimum over flat measures.
#[derive(Debug, Clone)]
pub struct AlphaNumber {
    pub center: Vec<f64>,
    pub radius: f64,
    pub value: f64,
    pub minimizer: FlatMeasure,
    pub lp_status: LpStatus,
    pub lp_solves: usize,
}

// ---------------------------------------------------------------------------
// Wasserstein distance to a given flat measure
// ---------------------------------------------------------------------------

struct NodeSet {
    positions: Vec<f64>,
    mass: Vec<f64>,
    cap: Vec<f64>,
    merge_error: f64,
}

/// Collects σ-atoms and discretized μ-atoms inside B(x, r), drops pinned and
/// cancelled nodes, and coarsens to the node cap.
fn build_nodes(
    set: &BoundarySet,
    x: &[f64],
    r: f64,
    mu: &FlatMeasure,
    node_cap: usize,
) -> NodeSet {
    let n = set.dim_n();
    let d = mu.dim();
    let mut positions: Vec<f64> = Vec::new();
    let mut mass: Vec<f64> = Vec::new();

    let mut hits = Vec::new();
    set.atoms_within(x, r, &mut hits);
    for &i in &hits {
        positions.extend_from_slice(set.point(i));
        mass.push(set.weight(i));
    }

    // Discretize μ on the plane patch through B(x, r) at the cloud's own
    // resolution; atoms outside the ball carry f = 0 and are irrelevant.
    let h = set.resolution_h();
    if mu.density_c > 0.0 {
        // Project x onto the plane.
        let mut proj = vec![0.0; d];
        for i in 0..d {
            for k in 0..n {
                proj[i] += (x[k] - mu.plane_point[k]) * mu.plane_basis[i * n + k];
            }
        }
        let mut perp2 = 0.0;
        {
            let mut foot = mu.plane_point.clone();
            for i in 0..d {
                for k in 0..n {
                    foot[k] += proj[i] * mu.plane_basis[i * n + k];
                }
            }
            for k in 0..n {
                perp2 += (x[k] - foot[k]) * (x[k] - foot[k]);
            }
        }
        if perp2 < r * r {
            let rad = (r * r - perp2).sqrt();
            let reach = (rad / h).ceil() as i64;
            let atom_mass = mu.density_c * h.powi(d as i32);
            let mut idx = vec![-reach; d];
            'grid: loop {
                let mut p = mu.plane_point.clone();
                for i in 0..d {
                    let t = proj[i] + idx[i] as f64 * h;
                    for k in 0..n {
                        p[k] += t * mu.plane_basis[i * n + k];
                    }
                }
                let mut dist2 = 0.0;
                for k in 0..n {
                    dist2 += (p[k] - x[k]) * (p[k] - x[k]);
                }
                if dist2 < r * r {
                    positions.extend_from_slice(&p);
                    mass.push(-atom_mass);
                }
                let mut axis = d;
                loop {
                    if axis == 0 {
                        break 'grid;
                    }
                    axis -= 1;
                    idx[axis] += 1;
                    if idx[axis] <= reach {
                        break;
                    }
                    idx[axis] = -reach;
                    if axis == 0 {
                        break 'grid;
                    }
                }
            }
        }
    }

    // Coalesce coincident σ/μ atoms (phase-aligned grids cancel exactly).
    let quantum = 1e-9 * r.max(1e-300);
    let mut merged: std::collections::HashMap<[i64; 4], usize> = std::collections::HashMap::new();
    let mut out_pos: Vec<f64> = Vec::new();
    let mut out_mass: Vec<f64> = Vec::new();
    for a in 0..mass.len() {
        let p = &positions[a * n..(a + 1) * n];
        let mut key = [0i64; 4];
        for k in 0..n {
            key[k] = (p[k] / quantum).round() as i64;
        }
        match merged.entry(key) {
            std::collections::hash_map::Entry::Occupied(e) => {
                out_mass[*e.get()] += mass[a];
            }
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(out_mass.len());
                out_pos.extend_from_slice(p);
                out_mass.push(mass[a]);
            }
        }
    }

    // Drop cancelled nodes and coarsen to the cap, separately per sign so
    // merging never creates spurious cancellation.
    let mut merge_error = 0.0;
    let (mut positions, mut mass) = drop_null(&out_pos, &out_mass, n);
    if mass.len() > node_cap {
        let total_abs: f64 = mass.iter().map(|s| s.abs()).sum();
        // Find a quantization spacing that lands under the cap.
        let mut spacing = 4.0 * r / (node_cap as f64).powf(1.0 / d as f64);
        for _ in 0..60 {
            let (p2, m2, used) = coalesce(&positions, &mass, n, spacing);
            if used <= node_cap {
                merge_error = spacing * (n as f64).sqrt() * total_abs;
                positions = p2;
                mass = m2;
                break;
            }
            spacing *= 1.35;
        }
    }
    let cap: Vec<f64> = (0..mass.len())
        .map(|a| {
            let p = &positions[a * n..(a + 1) * n];
            let mut d2 = 0.0;
            for k in 0..n {
                d2 += (p[k] - x[k]) * (p[k] - x[k]);
            }
            (r - d2.sqrt()).max(0.0)
        })
        .collect();
    NodeSet { positions, mass, cap, merge_error }
}

fn drop_null(positions: &[f64], mass: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut p = Vec::new();
    let mut s = Vec::new();
    for a in 0..mass.len() {
        if mass[a].abs() > 1e-300 {
            p.extend_from_slice(&positions[a * n..(a + 1) * n]);
            s.push(mass[a]);
        }
    }
    (p, s)
}

fn coalesce(positions: &[f64], mass: &[f64], n: usize, spacing: f64) -> (Vec<f64>, Vec<f64>, usize) {
    // Cell key + sign keeps positive and negative clouds separate.
    let mut map: std::collections::HashMap<([i64; 4], bool), (Vec<f64>, f64)> =
        std::collections::HashMap::new();
    for a in 0..mass.len() {
        let p = &positions[a * n..(a + 1) * n];
        let mut key = [0i64; 4];
        for k in 0..n {
            key[k] = (p[k] / spacing).floor() as i64;
        }
        let entry = map
            .entry((key, mass[a] > 0.0))
            .or_insert_with(|| (vec![0.0; n], 0.0));
        for k in 0..n {
            entry.0[k] += p[k] * mass[a].abs();
        }
        entry.1 += mass[a];
    }
    let used = map.len();
    let mut out_pos = Vec::with_capacity(used * n);
    let mut out_mass = Vec::with_capacity(used);
    let mut entries: Vec<_> = map.into_iter().collect();
    entries.sort_by(|a, b| (a.0).0.cmp(&(b.0).0).then((a.0).1.cmp(&(b.0).1)));
    for ((_, _), (wpos, m)) in entries {
        let norm: f64 = m.abs().max(1e-300);
        for k in 0..n {
            out_pos.push(wpos[k] / norm);
        }
        out_mass.push(m);
    }
    (out_pos, out_mass, used)
}

/// dist_{x,r}(μ, σ) = r^{-d-1} sup { |∫ f dσ - ∫ f dμ| : f 1-Lipschitz,
/// supported in the closed ball }. Exact for the atomic measures via the
/// transport dual; `d` is the set's boundary dimension.
pub fn wasserstein_flat(
    set: &BoundarySet,
    x: &[f64],
    r: f64,
    mu: &FlatMeasure,
    node_cap: usize,
    ws: &mut Workspace,
) -> Result<WassersteinEstimate, AlphaError> {
    if !(r > 0.0) {
        return Err(AlphaError::BadParameter("radius must be positive".into()));
    }
    if mu.plane_point.len() != set.dim_n() {
        return Err(AlphaError::BadMeasure("plane dimension mismatch".into()));
    }
    let nodes = build_nodes(set, x, r, mu, node_cap);
    let m = nodes.mass.len();
    if m == 0 {
        return Ok(WassersteinEstimate {
            value: 0.0,
            lp_gap: 0.0,
            status: LpStatus::Optimal,
            nodes: 0,
            merge_error: 0.0,
        });
    }
    let sol = solve_lipschitz_dual(&nodes.positions, set.dim_n(), &nodes.mass, &nodes.cap, ws)?;
    // The feasible set is symmetric under f -> -f, so the one solve already
    // maximizes |Σ s f| over both sign objectives.
    let norm = r.powi(-(set.dim_d() as i32) - 1);
    Ok(WassersteinEstimate {
        value: sol.value.max(0.0) * norm,
        lp_gap: sol.duality_gap,
        status: sol.status,
        nodes: m,
        merge_error: nodes.merge_error * norm,
    })
}

// ---------------------------------------------------------------------------
// alpha number: infimum over flat measures
// ---------------------------------------------------------------------------

/// Completes `basis` (d row vectors) to an orthonormal frame of Rⁿ;
/// returns the n-d complement rows.
fn orthonormal_complement(basis: &[f64], d: usize, n: usize) -> Vec<f64> {
    let mut frame: Vec<Vec<f64>> = (0..d).map(|i| basis[i * n..(i + 1) * n].to_vec()).collect();
    for axis in 0..n {
        if frame.len() == n {
            break;
        }
        let mut v = vec![0.0; n];
        v[axis] = 1.0;
        for u in &frame {
            let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= dot * ui;
            }
        }
        let norm: f64 = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        if norm > 1e-8 {
            for vi in v.iter_mut() {
                *vi /= norm;
            }
            frame.push(v);
        }
    }
    frame[d..].iter().flat_map(|v| v.iter().copied()).collect()
}

/// Plane parametrization around a reference frame: in-plane shifts,
/// transverse shifts, one rotation angle per (plane direction, normal
/// direction) pair, and log-density.
struct PlaneChart {
    origin: Vec<f64>,
    basis0: Vec<f64>,  // d x n
    normal0: Vec<f64>, // (n-d) x n
    d: usize,
    n: usize,
}

impl PlaneChart {
    fn param_len(&self) -> usize {
        // shifts (d + (n-d)) + angles d*(n-d) + log density
        self.n + self.d * (self.n - self.d) + 1
    }

    fn measure(&self, theta: &[f64]) -> FlatMeasure {
        let (d, n) = (self.d, self.n);
        let m = n - d;
        let mut point = self.origin.clone();
        for i in 0..d {
            for k in 0..n {
                point[k] += theta[i] * self.basis0[i * n + k];
            }
        }
        for j in 0..m {
            for k in 0..n {
                point[k] += theta[d + j] * self.normal0[j * n + k];
            }
        }
        // Rotate each plane direction toward each normal by its angle.
        let mut basis = self.basis0.clone();
        let mut normal = self.normal0.clone();
        let mut slot = n;
        for i in 0..d {
            for j in 0..m {
                let angle = theta[slot];
                slot += 1;
                let (s, c) = angle.sin_cos();
                for k in 0..n {
                    let bi = basis[i * n + k];
                    let nj = normal[j * n + k];
                    basis[i * n + k] = c * bi + s * nj;
                    normal[j * n + k] = -s * bi + c * nj;
                }
            }
        }
        let density = theta[self.param_len() - 1].exp();
        // Rotations of an orthonormal frame stay orthonormal to fp accuracy.
        FlatMeasure { plane_point: point, plane_basis: basis, density_c: density }
    }
}

/// Weighted PCA of the atoms in B(x, 2r): barycenter and leading directions.
fn pca_plane(set: &BoundarySet, x: &[f64], r: f64, d: usize) -> Result<(Vec<f64>, Vec<f64>), AlphaError> {
    let n = set.dim_n();
    let mut hits = Vec::new();
    set.atoms_within(x, 2.0 * r, &mut hits);
    if hits.len() < d + 1 {
        return Err(AlphaError::InsufficientData { needed: d + 1, d });
    }
    let mut wsum = 0.0;
    let mut mean = vec![0.0; n];
    for &i in &hits {
        let w = set.weight(i);
        wsum += w;
        for k in 0..n {
            mean[k] += w * set.point(i)[k];
        }
    }
    for k in 0..n {
        mean[k] /= wsum;
    }
    let mut cov = vec![0.0; n * n];
    for &i in &hits {
        let w = set.weight(i);
        let p = set.point(i);
        for a in 0..n {
            for b in 0..n {
                cov[a * n + b] += w * (p[a] - mean[a]) * (p[b] - mean[b]);
            }
        }
    }
    let (_vals, vecs) = symmetric_eigen(&cov, n);
    // Leading d eigenvectors (columns) as basis rows.
    let mut basis = vec![0.0; d * n];
    for i in 0..d {
        for k in 0..n {
            basis[i * n + k] = vecs[k * n + i];
        }
    }
    Ok((mean, basis))
}

/// α_σ(x, r): minimizes the normalized Wasserstein distance over flat
/// measures by multi-start derivative-free search; the result is a certified
/// upper bound for the infimum, with the inner sup solved to LP optimality.
pub fn alpha_number(
    set: &BoundarySet,
    x: &[f64],
    r: f64,
    cfg: &AlphaConfig,
) -> Result<AlphaNumber, AlphaError> {
    let d = set.dim_d();
    let n = set.dim_n();
    let lo = 20.0 * set.resolution_h();
    let hi = set.diameter() / 2.0;
    if !(r >= lo && r <= hi) {
        return Err(AlphaError::RadiusRange { r, lo, hi });
    }
    let (mean, basis) = pca_plane(set, x, r, d)?;
    let normal0 = orthonormal_complement(&basis, d, n);
    let chart = PlaneChart { origin: mean, basis0: basis, normal0, d, n };

    let sigma_ball = set.sigma_ball(x, r);
    let omega_d = match d {
        1 => 2.0,
        2 => std::f64::consts::PI,
        _ => return Err(AlphaError::BadParameter(format!("unsupported plane dimension {d}"))),
    };
    let c0 = (sigma_ball / (omega_d * r.powi(d as i32))).max(1e-12);

    let mut ws = Workspace::default();
    let mut lp_solves = 0usize;
    let mut worst_status = LpStatus::Optimal;
    let mut best: Option<(f64, Vec<f64>)> = None;

    let objective = |theta: &[f64], ws: &mut Workspace, lp: &mut usize, status: &mut LpStatus| -> f64 {
        let mu = chart.measure(theta);
        *lp += 1;
        match wasserstein_flat(set, x, r, &mu, cfg.node_cap, ws) {
            Ok(est) => {
                if est.status == LpStatus::Degenerate {
                    *status = LpStatus::Degenerate;
                }
                est.value
            }
            Err(_) => f64::INFINITY,
        }
    };

    let mut rng = SplitMix64::new(cfg.seed ^ (r.to_bits().rotate_left(17)) ^ x[0].to_bits());
    let param_len = chart.param_len();
    let h = set.resolution_h();
    for start in 0..(1 + cfg.random_starts) {
        let mut theta0 = vec![0.0; param_len];
        theta0[param_len - 1] = c0.ln();
        if start > 0 {
            for slot in theta0.iter_mut().take(n) {
                *slot += rng.range_f64(-0.15 * r, 0.15 * r);
            }
            for slot in theta0.iter_mut().take(param_len - 1).skip(n) {
                *slot += rng.range_f64(-0.25, 0.25);
            }
        }
        // Density golden-section on the untouched start: for aligned-grid
        // geometries this alone reaches the cancellation optimum, which the
        // simplex could otherwise wander away from.
        let base = theta0.clone();
        let (tc0, vc0) = golden_min(
            |t| {
                let mut probe = base.clone();
                probe[param_len - 1] = t;
                objective(&probe, &mut ws, &mut lp_solves, &mut worst_status)
            },
            base[param_len - 1] - 0.2,
            base[param_len - 1] + 0.2,
            1e-10,
        );
        if best.as_ref().map_or(true, |(b, _)| vc0 < *b) {
            let mut t = theta0.clone();
            t[param_len - 1] = tc0;
            best = Some((vc0, t));
        }
        if best.as_ref().unwrap().0 < cfg.early_exit {
            break;
        }
        let opts = NelderMeadOpts {
            max_evals: cfg.nm_max_evals,
            f_tol_rel: 1e-3,
            f_tol_abs: 1e-12,
        };
        let mut steps = vec![0.05 * r; param_len];
        for slot in n..param_len - 1 {
            steps[slot] = 0.08;
        }
        steps[param_len - 1] = 0.1;
        let (mut theta, mut val, _) = nelder_mead(
            |t| objective(t, &mut ws, &mut lp_solves, &mut worst_status),
            &theta0,
            &steps,
            &opts,
        );
        // Phase alignment along the first plane direction: the objective is
        // piecewise-linear in this shift at the atom spacing, which the
        // simplex handles poorly.
        let base = theta.clone();
        let (t0, v0) = golden_min(
            |t| {
                let mut probe = base.clone();
                probe[0] = t;
                objective(&probe, &mut ws, &mut lp_solves, &mut worst_status)
            },
            base[0] - 0.75 * h,
            base[0] + 0.75 * h,
            1e-4 * h,
        );
        if v0 < val {
            theta[0] = t0;
            val = v0;
        }
        // Density refinement.
        let base = theta.clone();
        let (tc, vc) = golden_min(
            |t| {
                let mut probe = base.clone();
                probe[param_len - 1] = t;
                objective(&probe, &mut ws, &mut lp_solves, &mut worst_status)
            },
            base[param_len - 1] - 0.2,
            base[param_len - 1] + 0.2,
            1e-10,
        );
        if vc < val {
            theta[param_len - 1] = tc;
            val = vc;
        }
        if best.as_ref().map_or(true, |(b, _)| val < *b) {
            best = Some((val, theta));
        }
        if best.as_ref().unwrap().0 < cfg.early_exit {
            break;
        }
    }
    let (value, theta) = best.expect("at least one start");
    Ok(AlphaNumber {
        center: x.to_vec(),
        radius: r,
        value,
        minimizer: chart.measure(&theta),
        lp_status: worst_status,
        lp_solves,
    })
}

// ---------------------------------------------------------------------------
// The multi-scale square sum
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UrScaleRow {
    pub scale: f64,
    /// ln 2 · Σ_j w_j α(y_j, s)² over the (subsampled, reweighted) centers.
    pub contribution: f64,
    pub mean_alpha: f64,
    pub centers_used: usize,
    pub centers_skipped: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UrReport {
    pub rows: Vec<UrScaleRow>,
    pub skipped_scales: usize,
    pub raw_sum: f64,
    pub sigma_ball: f64,
    pub normalized: f64,
}

/// Tuning for [`ur_carleson_sum`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UrConfig {
    pub alpha: AlphaConfig,
    /// Deterministic stride subsample of the centers at each scale; the
    /// retained weights are rescaled to preserve the ball's total mass.
    pub max_centers_per_scale: usize,
}

impl Default for UrConfig {
    fn default() -> Self {
        UrConfig { alpha: AlphaConfig::default(), max_centers_per_scale: 16 }
    }
}

/// Dyadic Riemann sum of ∫₀^r ∫_{B(x,r)} α(y,s)² dσ(y) ds/s, normalized by
/// σ(B(x, r)) in the report.
pub fn ur_carleson_sum(
    set: &BoundarySet,
    x: &[f64],
    r: f64,
    n_scales: usize,
    cfg: &UrConfig,
) -> Result<UrReport, AlphaError> {
    if n_scales == 0 {
        return Err(AlphaError::BadParameter("need at least one scale".into()));
    }
    let floor = 20.0 * set.resolution_h();
    let mut hits = Vec::new();
    set.atoms_within(x, r, &mut hits);
    if hits.is_empty() {
        return Err(AlphaError::InsufficientData { needed: 1, d: set.dim_d() });
    }
    let sigma_ball: f64 = hits.iter().map(|&i| set.weight(i)).sum();
    let stride = hits.len().div_ceil(cfg.max_centers_per_scale).max(1);
    let sample: Vec<usize> = hits.iter().step_by(stride).copied().collect();
    let sample_mass: f64 = sample.iter().map(|&i| set.weight(i)).sum();
    let reweight = sigma_ball / sample_mass;

    let mut rows = Vec::new();
    let mut skipped_scales = 0usize;
    let mut raw_sum = 0.0;
    for k in 0..n_scales {
        let s = r * 0.5f64.powi(k as i32);
        if s < floor {
            skipped_scales += 1;
            continue;
        }
        let mut contribution = 0.0;
        let mut alpha_mass = 0.0;
        let mut used = 0usize;
        let mut skipped = 0usize;
        for &j in &sample {
            match alpha_number(set, set.point(j), s, &cfg.alpha) {
                Ok(a) => {
                    contribution += set.weight(j) * a.value * a.value;
                    alpha_mass += set.weight(j) * a.value;
                    used += 1;
                }
                Err(AlphaError::InsufficientData { .. }) | Err(AlphaError::RadiusRange { .. }) => {
                    skipped += 1;
                }
                Err(e) => return Err(e),
            }
        }
        let contribution = contribution * reweight * std::f64::consts::LN_2;
        raw_sum += contribution;
        rows.push(UrScaleRow {
            scale: s,
            contribution,
            mean_alpha: if used > 0 { alpha_mass / sample_mass } else { 0.0 },
            centers_used: used,
            centers_skipped: skipped,
        });
    }
    Ok(UrReport {
        rows,
        skipped_scales,
        raw_sum,
        sigma_ball,
        normalized: raw_sum / sigma_ball,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_cantor_garnett, make_flat, make_lipschitz_graph, ProfileSpec};

    fn flat_measure_on_x_axis(n: usize, c: f64) -> FlatMeasure {
        let mut basis = vec![0.0; n];
        basis[0] = 1.0;
        FlatMeasure::new(vec![0.0; n], basis, c).unwrap()
    }

    #[test]
    fn identical_flat_measure_has_zero_distance() {
        let set = make_flat(1, 3, 5.0, 0.01).unwrap();
        let mu = flat_measure_on_x_axis(3, 1.0);
        let mut ws = Workspace::default();
        let est = wasserstein_flat(&set, &[0.0, 0.0, 0.0], 1.0, &mu, 4000, &mut ws).unwrap();
        assert!(est.value <= 1e-6, "value {}", est.value);
        assert!(est.lp_gap <= 1e-8);
    }

    #[test]
    fn density_mismatch_grows_linearly_with_tent_slope() {
        // mu = (1 + delta) * sigma on the same line: optimal f is the tent,
        // giving slope sum_atoms w * (r - |a|) per unit delta.
        let set = make_flat(1, 3, 5.0, 0.01).unwrap();
        let r = 1.0;
        let x = [0.0, 0.0, 0.0];
        // Tent-functional oracle evaluated on the atoms.
        let mut hits = Vec::new();
        set.atoms_within(&x, r, &mut hits);
        let tent_mass: f64 = hits
            .iter()
            .map(|&i| set.weight(i) * (r - set.point(i)[0].abs()).max(0.0))
            .sum();
        let mut ws = Workspace::default();
        let mut values = Vec::new();
        for delta in [0.05, 0.1, 0.2] {
            let mu = flat_measure_on_x_axis(3, 1.0 + delta);
            let est = wasserstein_flat(&set, &x, r, &mu, 4000, &mut ws).unwrap();
            let expected = delta * tent_mass * r.powi(-2);
            assert!(
                (est.value - expected).abs() <= 0.02 * expected,
                "delta {delta}: value {} expected {expected}",
                est.value
            );
            values.push(est.value);
        }
        // Linear growth in delta.
        assert!((values[1] / values[0] - 2.0).abs() < 0.05);
        assert!((values[2] / values[0] - 4.0).abs() < 0.1);
    }

    #[test]
    fn two_parallel_lines_cost_their_separation() {
        // sigma = two unit-density lines at transverse offsets ±s_sep,
        // mu = the midline at density 2: mass moves by about s_sep.
        let n = 3;
        let h = 0.01;
        let half = 400;
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        for s_sep in [0.02f64] {
            coords.clear();
            weights.clear();
            for i in -half..=half {
                let t = i as f64 * h;
                coords.extend_from_slice(&[t, s_sep, 0.0]);
                weights.push(h);
                coords.extend_from_slice(&[t, -s_sep, 0.0]);
                weights.push(h);
            }
            let set =
                crate::geometry::BoundarySet::from_parts(coords.clone(), weights.clone(), 1, n, h, 4.0)
                    .unwrap();
            let mu = flat_measure_on_x_axis(n, 2.0);
            let mut ws = Workspace::default();
            let r = 1.0;
            let est = wasserstein_flat(&set, &[0.0, 0.0, 0.0], r, &mu, 1200, &mut ws).unwrap();
            // Explicit coupling: each sigma atom in the ball moves to the
            // midline, cost ≈ s_sep per unit mass (plus edge effects).
            let mass_in_ball: f64 = 2.0 * (2.0 * (r * r - s_sep * s_sep).sqrt());
            let coupling = s_sep * mass_in_ball * r.powi(-2);
            assert!(est.value <= coupling * 1.05, "value {} coupling {coupling}", est.value);
            assert!(est.value >= coupling * 0.4, "value {} coupling {coupling}", est.value);
        }
    }

    #[test]
    fn alpha_on_flat_set_is_discretization_noise() {
        let set = make_flat(1, 3, 5.0, 0.01).unwrap();
        let cfg = AlphaConfig { nm_max_evals: 80, random_starts: 1, ..Default::default() };
        let a = alpha_number(&set, &[0.3, 0.0, 0.0], 0.8, &cfg).unwrap();
        assert!(a.value <= 1e-3, "alpha {}", a.value);
        assert_eq!(a.lp_status, LpStatus::Optimal);
        assert_eq!(a.minimizer.dim(), 1);
    }

    #[test]
    fn alpha_scale_invariance() {
        let set = make_flat(1, 3, 5.0, 0.02).unwrap();
        let lambda = 3.0;
        let coords: Vec<f64> = set.coords_flat().iter().map(|c| c * lambda).collect();
        let weights: Vec<f64> = (0..set.len()).map(|i| set.weight(i) * lambda).collect();
        let big = crate::geometry::BoundarySet::from_parts(
            coords,
            weights,
            1,
            3,
            set.resolution_h() * lambda,
            1.5,
        )
        .unwrap();
        let cfg = AlphaConfig { node_cap: 200, nm_max_evals: 60, random_starts: 1, ..Default::default() };
        let a = alpha_number(&set, &[0.25, 0.0, 0.0], 1.0, &cfg).unwrap();
        let b = alpha_number(&big, &[0.25 * lambda, 0.0, 0.0], lambda, &cfg).unwrap();
        assert!(
            (a.value - b.value).abs() <= 1e-6 + 0.05 * a.value.max(b.value),
            "a {} b {}",
            a.value,
            b.value
        );
    }

    #[test]
    fn alpha_is_an_upper_bound_certificate() {
        // The searched minimum never exceeds the distance to an explicitly
        // supplied flat measure.
        let set = make_lipschitz_graph(
            3,
            ProfileSpec::Sine { amplitude: 0.1, frequency: 1.0 },
            0.1,
            5.0,
            0.01,
        )
        .unwrap();
        let x = [0.0, 0.0, 0.0];
        let r = 0.9;
        let cfg = AlphaConfig { node_cap: 200, nm_max_evals: 60, random_starts: 1, ..Default::default() };
        let a = alpha_number(&set, &x, r, &cfg).unwrap();
        let mut ws = Workspace::default();
        let candidate = flat_measure_on_x_axis(3, 1.0);
        let cert = wasserstein_flat(&set, &x, r, &candidate, 300, &mut ws).unwrap();
        assert!(a.value <= cert.value + 1e-9, "min {} cert {}", a.value, cert.value);
    }

    #[test]
    fn alpha_rejects_insufficient_data_and_bad_radius() {
        let set = make_flat(1, 3, 5.0, 0.01).unwrap();
        assert!(matches!(
            alpha_number(&set, &[0.0, 0.0, 0.0], 0.05, &AlphaConfig::default()),
            Err(AlphaError::RadiusRange { .. })
        ));
        // A center far from the cloud has no atoms in B(x, 2r).
        assert!(matches!(
            alpha_number(&set, &[500.0, 0.0, 0.0], 1.0, &AlphaConfig::default()),
            Err(AlphaError::InsufficientData { .. })
        ));
    }

    #[test]
    fn cantor_alpha_is_bounded_below_across_levels() {
        let cfg = AlphaConfig { node_cap: 200, random_starts: 1, nm_max_evals: 60, ..Default::default() };
        let mut values = Vec::new();
        for level in [4u32, 5] {
            let set = make_cantor_garnett(level, 3, 0.25).unwrap();
            let r = set.diameter() / 4.0;
            let a = alpha_number(&set, set.point(0), r, &cfg).unwrap();
            values.push(a.value);
        }
        for v in &values {
            assert!(*v > 0.02, "{values:?}");
        }
        let max = values.iter().cloned().fold(0.0f64, f64::max);
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max / min < 3.0, "level instability: {values:?}");
    }

    #[test]
    fn ur_sum_flat_vs_graph_vs_cantor() {
        let cfg = UrConfig {
            alpha: AlphaConfig { node_cap: 160, random_starts: 1, nm_max_evals: 40, ..Default::default() },
            max_centers_per_scale: 3,
        };
        let flat = make_flat(1, 3, 5.0, 0.02).unwrap();
        let flat_report = ur_carleson_sum(&flat, &[0.0, 0.0, 0.0], 1.6, 2, &cfg).unwrap();
        assert!(flat_report.normalized <= 1e-4, "flat {}", flat_report.normalized);

        let cantor = make_cantor_garnett(4, 3, 0.25).unwrap();
        let r = cantor.diameter() / 4.0;
        let cantor_center = cantor.point(0).to_vec();
        let cantor_report = ur_carleson_sum(&cantor, &cantor_center, r, 2, &cfg).unwrap();
        assert!(
            cantor_report.normalized > 100.0 * flat_report.normalized.max(1e-12),
            "cantor {} flat {}",
            cantor_report.normalized,
            flat_report.normalized
        );
        // Per-scale contributions stay of the same order (linear growth).
        let c: Vec<f64> = cantor_report.rows.iter().map(|row| row.contribution).collect();
        let cmax = c.iter().cloned().fold(0.0f64, f64::max);
        let cmin = c.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(cmin > 0.1 * cmax, "{c:?}");
    }
}
