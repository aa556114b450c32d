//! Exact solver for the capped Lipschitz dual
//!
//!     max Σ s_a f(a)   s.t.  |f(a) - f(b)| ≤ |a - b|,  |f(a)| ≤ g(a),
//!
//! by strong duality with an uncapacitated min-cost transport problem: a
//! virtual reservoir node absorbs imbalance at cost g(a) per unit, and the
//! optimum is computed with successive shortest paths over reduced costs.
//! Node potentials give the optimal f, so primal and dual values certify
//! each other.

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("solver failed to drain excess after {0} augmentations")]
    NonConvergence(usize),
    #[error("invalid problem: {0}")]
    BadProblem(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    /// Finished but the primal/dual certificate is loose.
    Degenerate,
}

#[derive(Debug, Clone)]
pub struct DualSolution {
    /// max Σ s_a f(a), equal to the minimal transport cost.
    pub value: f64,
    /// Optimal potentials (one per atom).
    pub f: Vec<f64>,
    pub primal_cost: f64,
    pub duality_gap: f64,
    pub status: LpStatus,
    pub augmentations: usize,
}

/// Reusable buffers; one instance per thread of LP solves.
#[derive(Debug, Default)]
pub struct Workspace {
    cost: Vec<f64>,
    flow: Vec<f64>,
    potential: Vec<f64>,
    dist: Vec<f64>,
    parent: Vec<usize>,
    settled: Vec<bool>,
    excess: Vec<f64>,
}

/// Solves the capped Lipschitz dual for atoms at `positions` (flat layout,
/// `dim` coordinates each) with signed masses `mass` and caps `cap`.
pub fn solve_lipschitz_dual(
    positions: &[f64],
    dim: usize,
    mass: &[f64],
    cap: &[f64],
    ws: &mut Workspace,
) -> Result<DualSolution, TransportError> {
    let m = mass.len();
    if positions.len() != m * dim || cap.len() != m {
        return Err(TransportError::BadProblem("length mismatch".into()));
    }
    if cap.iter().any(|g| *g < 0.0 || !g.is_finite()) {
        return Err(TransportError::BadProblem("caps must be finite and nonnegative".into()));
    }
    if mass.iter().any(|s| !s.is_finite()) {
        return Err(TransportError::BadProblem("masses must be finite".into()));
    }
    let v = m + 1; // last node is the reservoir
    let total_abs: f64 = mass.iter().map(|s| s.abs()).sum();
    if total_abs == 0.0 {
        return Ok(DualSolution {
            value: 0.0,
            f: vec![0.0; m],
            primal_cost: 0.0,
            duality_gap: 0.0,
            status: LpStatus::Optimal,
            augmentations: 0,
        });
    }

    // Dense cost matrix: Euclidean between atoms, the cap toward the
    // reservoir. Symmetric, nonnegative.
    ws.cost.clear();
    ws.cost.resize(v * v, 0.0);
    for a in 0..m {
        let pa = &positions[a * dim..(a + 1) * dim];
        for b in (a + 1)..m {
            let pb = &positions[b * dim..(b + 1) * dim];
            let mut d2 = 0.0;
            for j in 0..dim {
                let t = pa[j] - pb[j];
                d2 += t * t;
            }
            let d = d2.sqrt();
            ws.cost[a * v + b] = d;
            ws.cost[b * v + a] = d;
        }
        ws.cost[a * v + m] = cap[a];
        ws.cost[m * v + a] = cap[a];
    }

    ws.flow.clear();
    ws.flow.resize(v * v, 0.0);
    ws.potential.clear();
    ws.potential.resize(v, 0.0);
    ws.excess.clear();
    ws.excess.extend_from_slice(mass);
    ws.excess.push(-mass.iter().sum::<f64>());

    let drain_tol = 1e-13 * total_abs;
    let mut primal_cost = 0.0;
    let mut augmentations = 0usize;
    let max_augmentations = 60 * v + 1000;

    loop {
        // Multi-source Dijkstra over reduced costs from all excess nodes.
        let any_excess = ws.excess.iter().any(|e| *e > drain_tol);
        if !any_excess {
            break;
        }
        augmentations += 1;
        if augmentations > max_augmentations {
            return Err(TransportError::NonConvergence(augmentations));
        }
        ws.dist.clear();
        ws.dist.resize(v, f64::INFINITY);
        ws.parent.clear();
        ws.parent.resize(v, usize::MAX);
        ws.settled.clear();
        ws.settled.resize(v, false);
        for u in 0..v {
            if ws.excess[u] > drain_tol {
                ws.dist[u] = 0.0;
            }
        }
        let mut target = usize::MAX;
        loop {
            // Dense extract-min.
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for w in 0..v {
                if !ws.settled[w] && ws.dist[w] < best {
                    best = ws.dist[w];
                    u = w;
                }
            }
            if u == usize::MAX {
                break;
            }
            ws.settled[u] = true;
            if ws.excess[u] < -drain_tol {
                target = u;
                break;
            }
            let pu = ws.potential[u];
            let du = ws.dist[u];
            for w in 0..v {
                if ws.settled[w] || w == u {
                    continue;
                }
                // Forward residual arc u -> w always exists; the backward
                // residual (cancelling flow w -> u) costs the negative.
                let rc_fwd = ws.cost[u * v + w] + pu - ws.potential[w];
                let mut best_rc = rc_fwd;
                if ws.flow[w * v + u] > 0.0 {
                    let rc_bwd = -ws.cost[w * v + u] + pu - ws.potential[w];
                    if rc_bwd < best_rc {
                        best_rc = rc_bwd;
                    }
                }
                let cand = du + best_rc.max(0.0);
                if cand < ws.dist[w] {
                    ws.dist[w] = cand;
                    ws.parent[w] = u;
                }
            }
        }
        if target == usize::MAX {
            return Err(TransportError::NonConvergence(augmentations));
        }
        // Update potentials for settled nodes (standard Johnson shift).
        let dt = ws.dist[target];
        for w in 0..v {
            if ws.dist[w] < f64::INFINITY {
                ws.potential[w] += ws.dist[w].min(dt);
            }
        }
        // Walk the path back to its source, find the bottleneck. Costs are
        // symmetric, so whenever opposite flow exists the backward residual
        // is the arc Dijkstra priced; its amount caps the push.
        let mut bottleneck = -ws.excess[target];
        let mut node = target;
        while ws.parent[node] != usize::MAX {
            let up = ws.parent[node];
            let back = ws.flow[node * v + up];
            if back > 0.0 {
                bottleneck = bottleneck.min(back);
            }
            node = up;
        }
        let source = node;
        bottleneck = bottleneck.min(ws.excess[source]);
        if !(bottleneck > 0.0) {
            return Err(TransportError::NonConvergence(augmentations));
        }
        // Push: cancel opposite flow where it exists, add forward otherwise.
        let mut node = target;
        while ws.parent[node] != usize::MAX {
            let up = ws.parent[node];
            if ws.flow[node * v + up] > 0.0 {
                ws.flow[node * v + up] -= bottleneck;
                primal_cost -= bottleneck * ws.cost[node * v + up];
            } else {
                ws.flow[up * v + node] += bottleneck;
                primal_cost += bottleneck * ws.cost[up * v + node];
            }
            node = up;
        }
        ws.excess[source] -= bottleneck;
        ws.excess[target] += bottleneck;
    }

    // Dual from potentials: f(a) = π(z) - π(a).
    let pz = ws.potential[m];
    let f: Vec<f64> = (0..m).map(|a| pz - ws.potential[a]).collect();
    let dual: f64 = f.iter().zip(mass).map(|(fa, sa)| fa * sa).sum();
    let scale = primal_cost.abs().max(total_abs).max(1e-300);
    let duality_gap = (primal_cost - dual).abs() / scale;
    let status = if duality_gap <= 1e-8 { LpStatus::Optimal } else { LpStatus::Degenerate };
    Ok(DualSolution { value: dual, f, primal_cost, duality_gap, status, augmentations })
}

/// Checks dual feasibility of `f`: pairwise Lipschitz and the caps.
/// Returns the largest violation (tests only; O(m²)).
pub fn dual_infeasibility(positions: &[f64], dim: usize, cap: &[f64], f: &[f64]) -> f64 {
    let m = f.len();
    let mut worst = 0.0f64;
    for a in 0..m {
        worst = worst.max(f[a].abs() - cap[a]);
        let pa = &positions[a * dim..(a + 1) * dim];
        for b in (a + 1)..m {
            let pb = &positions[b * dim..(b + 1) * dim];
            let mut d2 = 0.0;
            for j in 0..dim {
                let t = pa[j] - pb[j];
                d2 += t * t;
            }
            worst = worst.max((f[a] - f[b]).abs() - d2.sqrt());
        }
    }
    worst
}
