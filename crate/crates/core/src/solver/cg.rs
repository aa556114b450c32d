//! Jacobi-preconditioned conjugate gradients for the matrix-free scheme.

/// Outcome of a linear solve.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Deterministic two-level sum: fixed 4096-element chunks, then pairwise.
fn stable_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut partials = Vec::with_capacity(a.len() / 4096 + 1);
    let mut acc = 0.0;
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        acc += x * y;
        if i % 4096 == 4095 {
            partials.push(acc);
            acc = 0.0;
        }
    }
    partials.push(acc);
    crate::numeric::pairwise_sum(&partials)
}

/// Solves A x = b for SPD `apply` with diagonal `diag`, starting from zero.
pub fn pcg(
    apply: &mut dyn FnMut(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> (Vec<f64>, SolveReport) {
    let m = b.len();
    let mut x = vec![0.0; m];
    let mut r = b.to_vec();
    let b_norm = stable_dot(b, b).sqrt();
    if b_norm == 0.0 {
        return (x, SolveReport { iterations: 0, relative_residual: 0.0, converged: true });
    }
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; m];
    let mut rz = stable_dot(&r, &z);
    let mut iterations = 0;
    let mut res = 1.0;
    while iterations < max_iter {
        iterations += 1;
        apply(&p, &mut ap);
        let pap = stable_dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for i in 0..m {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = stable_dot(&r, &r).sqrt() / b_norm;
        if res <= rel_tol {
            break;
        }
        for i in 0..m {
            z[i] = r[i] / diag[i];
        }
        let rz_next = stable_dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..m {
            p[i] = z[i] + beta * p[i];
        }
    }
    let converged = res <= rel_tol;
    (x, SolveReport { iterations, relative_residual: res, converged })
}
