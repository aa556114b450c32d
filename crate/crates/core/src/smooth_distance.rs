//! The regularized distance D_β, its gradient, and the kernel fields H_α.
//!
//! Two evaluation routes are provided. The cloud route sums the kernel over
//! the atoms; it works for any set but is only trusted at distances well
//! above the atom spacing. The parametric route integrates over the generator
//! curve itself with adaptive panels that extend to the infinite continuum
//! boundary, so it has no truncation drift and no near-field floor.

use crate::geometry::{BoundarySet, GeometryDescriptor, ProfileSpec};
use crate::numeric::{adaptive_integral, gl12, gl24};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Mutex;

/// Near-field factor for cloud evaluation: queries closer than this many
/// atom spacings are rejected.
pub const NEAR_FIELD_FACTOR: f64 = 10.0;
/// Panel diameter over panel distance for the adaptive curve quadrature.
const PANEL_ETA: f64 = 0.5;
/// Gap (in units of the query scale) at which curve quadrature hands the
/// far field over to the analytic tail.
const TAIL_HANDOVER: f64 = 60.0;

#[derive(Debug, thiserror::Error)]
pub enum DistanceError {
    #[error("query at distance {dist:.3e} is inside the near field (floor {floor:.3e}); no parametric refinement available")]
    NearField { dist: f64, floor: f64 },
    #[error("query point lies on the boundary")]
    OnBoundary,
    #[error("operator parameter out of range: {0}")]
    BadParameter(String),
    #[error("finite-difference step {step:.3e} too large for distance {dist:.3e}")]
    StepTooLarge { step: f64, dist: f64 },
    #[error("set has no parametric form for the requested evaluation path")]
    NoParametricForm,
    #[error("quadrature failure: {0}")]
    Quadrature(#[from] crate::numeric::NumericError),
}

/// The triple (β, γ, α) plus the dimensions it acts in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorParams {
    pub beta: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub d: usize,
    pub n: usize,
}

impl OperatorParams {
    pub fn new(beta: f64, gamma: f64, alpha: f64, set: &BoundarySet) -> Result<Self, DistanceError> {
        Self::with_dims(beta, gamma, alpha, set.dim_d(), set.dim_n())
    }

    pub fn with_dims(
        beta: f64,
        gamma: f64,
        alpha: f64,
        d: usize,
        n: usize,
    ) -> Result<Self, DistanceError> {
        if !(beta > 0.0) {
            return Err(DistanceError::BadParameter(format!("beta must be > 0, got {beta}")));
        }
        if !(gamma > -1.0 && gamma < 1.0) {
            return Err(DistanceError::BadParameter(format!(
                "gamma must lie in (-1, 1), got {gamma}"
            )));
        }
        if !(alpha > 0.0) {
            return Err(DistanceError::BadParameter(format!("alpha must be > 0, got {alpha}")));
        }
        if d + 1 >= n {
            return Err(DistanceError::BadParameter(format!(
                "need d < n-1, got d={d}, n={n}"
            )));
        }
        Ok(OperatorParams { beta, gamma, alpha, d, n })
    }

    /// Exponent of the operator weight D_β^{d+1+γ-n}.
    pub fn weight_exponent(&self) -> f64 {
        self.d as f64 + 1.0 + self.gamma - self.n as f64
    }
}

/// A field evaluation: value plus a relative quadrature-error estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldSample<T> {
    pub location: Vec<f64>,
    pub value: T,
    pub est_error: f64,
}

/// Which evaluation route to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalPath {
    /// Parametric when the generator supports it, cloud otherwise.
    Auto,
    Cloud,
    Parametric,
}

fn resolve_path(set: &BoundarySet, path: EvalPath) -> Result<bool, DistanceError> {
    // Returns true for parametric.
    let has_parametric = matches!(
        set.descriptor(),
        GeometryDescriptor::Flat { .. } | GeometryDescriptor::LipschitzGraph { .. }
    );
    match path {
        EvalPath::Auto => Ok(has_parametric),
        EvalPath::Cloud => Ok(false),
        EvalPath::Parametric => {
            if has_parametric {
                Ok(true)
            } else {
                Err(DistanceError::NoParametricForm)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Cloud route
// ---------------------------------------------------------------------------

fn cloud_guard(set: &BoundarySet, x: &[f64]) -> Result<f64, DistanceError> {
    let dist = set.distance(x);
    let floor = NEAR_FIELD_FACTOR * set.resolution_h();
    if dist <= 0.0 {
        return Err(DistanceError::OnBoundary);
    }
    if dist < floor {
        return Err(DistanceError::NearField { dist, floor });
    }
    Ok(dist)
}

fn cloud_scalar_moment(set: &BoundarySet, p: f64, x: &[f64]) -> f64 {
    let n = set.dim_n();
    let coords = set.coords_flat();
    let mut acc = 0.0;
    for i in 0..set.len() {
        let mut r2 = 0.0;
        for j in 0..n {
            let t = x[j] - coords[i * n + j];
            r2 += t * t;
        }
        acc += set.weight(i) * r2.powf(-0.5 * p);
    }
    acc
}

fn cloud_vector_moment(set: &BoundarySet, p: f64, x: &[f64], out: &mut [f64]) {
    let n = set.dim_n();
    let coords = set.coords_flat();
    out.fill(0.0);
    for i in 0..set.len() {
        let mut r2 = 0.0;
        for j in 0..n {
            let t = x[j] - coords[i * n + j];
            r2 += t * t;
        }
        let k = set.weight(i) * r2.powf(-0.5 * p);
        for j in 0..n {
            out[j] += k * (x[j] - coords[i * n + j]);
        }
    }
}

fn cloud_est_error(set: &BoundarySet, dist: f64, p: f64) -> f64 {
    // Quadrature error of the atom sum relative to the continuum integral.
    (set.resolution_h() / dist).powf(p - set.dim_d() as f64 + 1.0)
}

// ---------------------------------------------------------------------------
// Flat route: the infinite d-plane reduces to cached one-dimensional moments
// ---------------------------------------------------------------------------

/// ∫_{R^d} (|u|² + 1)^{-p/2} du, evaluated numerically with an asymptotic
/// tail. Cached per (d, p).
fn flat_moment(d: usize, p: f64) -> f64 {
    static CACHE: Mutex<Option<HashMap<(usize, u64), f64>>> = Mutex::new(None);
    let key = (d, p.to_bits());
    if let Some(v) = CACHE.lock().unwrap().get_or_insert_with(HashMap::new).get(&key) {
        return *v;
    }
    let cutoff = 1e4_f64;
    let value = match d {
        1 => {
            let mut f = |u: f64| (u * u + 1.0).powf(-0.5 * p);
            let body = 2.0 * adaptive_integral(&mut f, 0.0, cutoff, 1e-13).expect("flat moment");
            // (u²+1)^{-p/2} = u^{-p}(1 - p/(2u²) + O(u^{-4})) for large u.
            let tail = 2.0
                * (cutoff.powf(1.0 - p) / (p - 1.0)
                    - 0.5 * p * cutoff.powf(-1.0 - p) / (p + 1.0));
            body + tail
        }
        2 => {
            let mut f = |u: f64| u * (u * u + 1.0).powf(-0.5 * p);
            let body = std::f64::consts::TAU
                * adaptive_integral(&mut f, 0.0, cutoff, 1e-13).expect("flat moment");
            let tail = std::f64::consts::TAU
                * (cutoff.powf(2.0 - p) / (p - 2.0)
                    - 0.5 * p * cutoff.powf(-p) / p);
            body + tail
        }
        _ => panic!("flat moments implemented for d = 1, 2"),
    };
    CACHE.lock().unwrap().as_mut().unwrap().insert(key, value);
    value
}

fn flat_transverse(set: &BoundarySet, x: &[f64]) -> (f64, Vec<f64>) {
    let d = set.dim_d();
    let n = set.dim_n();
    let mut t2 = 0.0;
    let mut dir = vec![0.0; n];
    for j in d..n {
        t2 += x[j] * x[j];
        dir[j] = x[j];
    }
    (t2.sqrt(), dir)
}

// ---------------------------------------------------------------------------
// Curve route: adaptive panels over the graph t -> (t, phi(t))
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
enum Moment {
    Scalar { p: f64 },
    Vector { p: f64 },
}

struct CurveQuadrature<'a> {
    profile: &'a ProfileSpec,
    n: usize,
    x: &'a [f64],
    /// Parameter of the (locally) nearest curve point.
    t_star: f64,
    dist_star: f64,
}

impl<'a> CurveQuadrature<'a> {
    fn new(profile: &'a ProfileSpec, n: usize, x: &'a [f64]) -> Result<Self, DistanceError> {
        // Project x onto the curve by Newton iteration on (γ(t)-x)·γ'(t) = 0.
        let mut t = x[0];
        let mut phi = vec![0.0; n - 1];
        let mut dphi = vec![0.0; n - 1];
        for _ in 0..40 {
            profile.value(t, &mut phi);
            profile.derivative(t, &mut dphi);
            let mut g = t - x[0];
            let mut dg = 1.0;
            for j in 0..n - 1 {
                g += (phi[j] - x[j + 1]) * dphi[j];
                dg += dphi[j] * dphi[j];
            }
            let step = g / dg;
            t -= step;
            if step.abs() < 1e-15 * (1.0 + t.abs()) {
                break;
            }
        }
        profile.value(t, &mut phi);
        let mut d2 = (t - x[0]) * (t - x[0]);
        for j in 0..n - 1 {
            d2 += (phi[j] - x[j + 1]) * (phi[j] - x[j + 1]);
        }
        let dist_star = d2.sqrt();
        if dist_star < 1e-14 {
            return Err(DistanceError::OnBoundary);
        }
        Ok(CurveQuadrature { profile, n, x, t_star: t, dist_star })
    }

    fn kernel(&self, t: f64, moments: &[Moment], out: &mut [f64]) {
        let n = self.n;
        let mut phi = [0.0; 3];
        let mut dphi = [0.0; 3];
        self.profile.value(t, &mut phi[..n - 1]);
        self.profile.derivative(t, &mut dphi[..n - 1]);
        let mut speed2 = 1.0;
        let mut r2 = (self.x[0] - t) * (self.x[0] - t);
        for j in 0..n - 1 {
            speed2 += dphi[j] * dphi[j];
            let dj = self.x[j + 1] - phi[j];
            r2 += dj * dj;
        }
        let speed = speed2.sqrt();
        let mut slot = 0;
        for m in moments {
            match *m {
                Moment::Scalar { p } => {
                    out[slot] = speed * r2.powf(-0.5 * p);
                    slot += 1;
                }
                Moment::Vector { p } => {
                    let k = speed * r2.powf(-0.5 * p);
                    out[slot] = k * (self.x[0] - t);
                    for j in 0..n - 1 {
                        out[slot + 1 + j] = k * (self.x[j + 1] - phi[j]);
                    }
                    slot += n;
                }
            }
        }
    }

    /// Integrates all requested moments on shared panels; returns the flat
    /// result vector (scalars occupy one slot, vectors n slots) plus a
    /// conservative relative error estimate.
    fn integrate(&self, moments: &[Moment]) -> (Vec<f64>, f64) {
        let n = self.n;
        let slots: usize =
            moments.iter().map(|m| if matches!(m, Moment::Scalar { .. }) { 1 } else { n }).sum();
        let mut acc = vec![0.0; slots];
        let mut scratch = vec![0.0; slots];
        // Beyond the covered band the curve is integrated analytically
        // against the averaged speed: r ≈ |t - x0| up to O((ρ/gap)²), with
        // the second-order scalar correction included.
        let rho2: f64 = self.x[1..self.n].iter().map(|v| v * v).sum();
        let scale_ref = self.dist_star.max(rho2.sqrt());
        let mean_speed = self.profile.mean_speed();

        let mut est_error = 0.0f64;
        let mut integrate_panel = |lo: f64, hi: f64, acc: &mut [f64], near: bool| {
            // Subdivide until the panel is short relative to its distance.
            let mut stack = vec![(lo, hi)];
            while let Some((a, b)) = stack.pop() {
                let axial_gap = if self.x[0] < a {
                    a - self.x[0]
                } else if self.x[0] > b {
                    self.x[0] - b
                } else {
                    0.0
                };
                let dlo = axial_gap.max(0.8 * self.dist_star);
                if b - a > PANEL_ETA * dlo {
                    let mid = 0.5 * (a + b);
                    stack.push((a, mid));
                    stack.push((mid, b));
                    continue;
                }
                let half = 0.5 * (b - a);
                let mid = 0.5 * (a + b);
                let mut panel = vec![0.0; slots];
                for (node, w) in gl12().nodes.iter().zip(&gl12().weights) {
                    self.kernel(mid + half * node, moments, &mut scratch);
                    for (slot, v) in scratch.iter().enumerate() {
                        panel[slot] += w * half * v;
                    }
                }
                if near {
                    // Last-refinement increment on the panels nearest the
                    // query, where all the quadrature error concentrates.
                    let mut fine = vec![0.0; slots];
                    for (node, w) in gl24().nodes.iter().zip(&gl24().weights) {
                        self.kernel(mid + half * node, moments, &mut scratch);
                        for (slot, v) in scratch.iter().enumerate() {
                            fine[slot] += w * half * v;
                        }
                    }
                    for slot in 0..slots {
                        let denom = fine[slot].abs().max(1e-300);
                        est_error = est_error.max((fine[slot] - panel[slot]).abs() / denom);
                        panel[slot] = fine[slot];
                    }
                }
                for (slot, v) in panel.iter().enumerate() {
                    acc[slot] += v;
                }
            }
        };

        // First block brackets the projection point.
        let s0 = self.dist_star.max(1e-300);
        integrate_panel(self.t_star - s0, self.t_star + s0, &mut acc, true);
        // Geometric blocks out to the analytic-tail handover.
        let reach = TAIL_HANDOVER * scale_ref;
        let mut inner = s0;
        while inner < reach {
            let outer = (inner * 1.7).min(reach.max(inner * 1.2));
            integrate_panel(self.t_star - outer, self.t_star - inner, &mut acc, false);
            integrate_panel(self.t_star + inner, self.t_star + outer, &mut acc, false);
            inner = outer;
        }
        // Analytic tails on both sides, measured from the query's first
        // coordinate.
        let gap_plus = (self.t_star + inner - self.x[0]).max(0.5 * reach);
        let gap_minus = (self.x[0] - (self.t_star - inner)).max(0.5 * reach);
        let mut slot = 0;
        for m in moments {
            match *m {
                Moment::Scalar { p } => {
                    let side = |g: f64| {
                        mean_speed
                            * (g.powf(1.0 - p) / (p - 1.0)
                                - 0.5 * p * rho2 * g.powf(-1.0 - p) / (p + 1.0))
                    };
                    acc[slot] += side(gap_plus) + side(gap_minus);
                    slot += 1;
                }
                Moment::Vector { p } => {
                    // Axial kernel (x0 - t): the two sides nearly cancel.
                    acc[slot] += mean_speed
                        * (gap_minus.powf(2.0 - p) - gap_plus.powf(2.0 - p))
                        / (p - 2.0).max(1e-12);
                    let transverse =
                        mean_speed * (gap_plus.powf(1.0 - p) + gap_minus.powf(1.0 - p))
                            / (p - 1.0);
                    for j in 0..n - 1 {
                        acc[slot + 1 + j] += self.x[j + 1] * transverse;
                    }
                    slot += n;
                }
            }
        }
        // Error budget: the neglected tail terms are O((ρ/gap)⁴) of the tail
        // share, and far panels alias the profile oscillation.
        let min_gap = gap_plus.min(gap_minus);
        let tail_rel = (rho2 / (min_gap * min_gap)).powi(2) + 1e-14;
        let osc_floor = if self.profile.sup_slope() > 0.0 { 5e-5 } else { 0.0 };
        (acc, tail_rel.max(est_error).max(osc_floor).max(1e-15))
    }
}

fn curve_profile(set: &BoundarySet) -> Option<&ProfileSpec> {
    match set.descriptor() {
        GeometryDescriptor::LipschitzGraph { profile, .. } => Some(profile),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Public evaluators
// ---------------------------------------------------------------------------

/// D_exponent(x) = (∫_Γ |x-y|^{-d-e} dσ)^{-1/e}. The workhorse behind both
/// D_β and D_α.
pub fn d_exponent(
    set: &BoundarySet,
    exponent: f64,
    x: &[f64],
    path: EvalPath,
) -> Result<FieldSample<f64>, DistanceError> {
    if !(exponent > 0.0) {
        return Err(DistanceError::BadParameter(format!("exponent must be > 0, got {exponent}")));
    }
    let d = set.dim_d();
    let p = d as f64 + exponent;
    if resolve_path(set, path)? {
        match set.descriptor() {
            GeometryDescriptor::Flat { .. } => {
                let (t, _) = flat_transverse(set, x);
                if t == 0.0 {
                    return Err(DistanceError::OnBoundary);
                }
                let value = flat_moment(d, p).powf(-1.0 / exponent) * t;
                Ok(FieldSample { location: x.to_vec(), value, est_error: 1e-13 })
            }
            GeometryDescriptor::LipschitzGraph { .. } => {
                let quad = CurveQuadrature::new(curve_profile(set).unwrap(), set.dim_n(), x)?;
                let (vals, err) = quad.integrate(&[Moment::Scalar { p }]);
                Ok(FieldSample {
                    location: x.to_vec(),
                    value: vals[0].powf(-1.0 / exponent),
                    est_error: err,
                })
            }
            _ => unreachable!(),
        }
    } else {
        let dist = cloud_guard(set, x)?;
        let value = cloud_scalar_moment(set, p, x).powf(-1.0 / exponent);
        Ok(FieldSample { location: x.to_vec(), value, est_error: cloud_est_error(set, dist, p) })
    }
}

/// D_β with the operator's primary exponent.
pub fn d_beta(
    set: &BoundarySet,
    params: &OperatorParams,
    x: &[f64],
) -> Result<FieldSample<f64>, DistanceError> {
    d_exponent(set, params.beta, x, EvalPath::Auto)
}

/// H_a(x) = ∫_Γ |x-y|^{-d-1-a} (x-y) dσ.
pub fn h_alpha(
    set: &BoundarySet,
    a: f64,
    x: &[f64],
    path: EvalPath,
) -> Result<FieldSample<Vec<f64>>, DistanceError> {
    if !(a > 0.0) {
        return Err(DistanceError::BadParameter(format!("exponent must be > 0, got {a}")));
    }
    let d = set.dim_d();
    let n = set.dim_n();
    let p = d as f64 + 1.0 + a;
    if resolve_path(set, path)? {
        match set.descriptor() {
            GeometryDescriptor::Flat { .. } => {
                let (t, dir) = flat_transverse(set, x);
                if t == 0.0 {
                    return Err(DistanceError::OnBoundary);
                }
                let scale = flat_moment(d, p) * t.powf(-1.0 - a);
                let value = dir.iter().map(|v| v * scale).collect();
                Ok(FieldSample { location: x.to_vec(), value, est_error: 1e-13 })
            }
            GeometryDescriptor::LipschitzGraph { .. } => {
                let quad = CurveQuadrature::new(curve_profile(set).unwrap(), n, x)?;
                let (vals, err) = quad.integrate(&[Moment::Vector { p }]);
                Ok(FieldSample { location: x.to_vec(), value: vals, est_error: err })
            }
            _ => unreachable!(),
        }
    } else {
        let dist = cloud_guard(set, x)?;
        let mut value = vec![0.0; n];
        cloud_vector_moment(set, p, x, &mut value);
        Ok(FieldSample {
            location: x.to_vec(),
            value,
            est_error: cloud_est_error(set, dist, p - 1.0),
        })
    }
}

/// ∇D_β, computed from the identity ∇(D_β^{-β}) = -(d+β) H_{β+1}: the result
/// is ((d+β)/β) D_β^{β+1} H_{β+1}, the exact gradient of the discretized sum
/// on the cloud route.
pub fn grad_d_beta(
    set: &BoundarySet,
    params: &OperatorParams,
    x: &[f64],
    path: EvalPath,
) -> Result<FieldSample<Vec<f64>>, DistanceError> {
    let beta = params.beta;
    let d = set.dim_d() as f64;
    let n = set.dim_n();
    if resolve_path(set, path)? && matches!(set.descriptor(), GeometryDescriptor::LipschitzGraph { .. })
    {
        // Shared panels keep D and H mutually consistent.
        let quad = CurveQuadrature::new(curve_profile(set).unwrap(), n, x)?;
        let (vals, err) = quad.integrate(&[
            Moment::Scalar { p: d + beta },
            Moment::Vector { p: d + beta + 2.0 },
        ]);
        let dval = vals[0].powf(-1.0 / beta);
        let scale = (d + beta) / beta * dval.powf(beta + 1.0);
        let value = vals[1..1 + n].iter().map(|v| v * scale).collect();
        return Ok(FieldSample { location: x.to_vec(), value, est_error: err });
    }
    let dval = d_exponent(set, beta, x, path)?;
    let hval = h_alpha(set, beta + 1.0, x, path)?;
    let scale = (d + beta) / beta * dval.value.powf(beta + 1.0);
    let value = hval.value.iter().map(|v| v * scale).collect();
    Ok(FieldSample {
        location: x.to_vec(),
        value,
        est_error: dval.est_error.max(hval.est_error),
    })
}

/// Central-difference divergence of the field H_{n-d-1}; the continuum field
/// is divergence free, so the returned value is pure discretization error.
pub fn divergence_h(
    set: &BoundarySet,
    x: &[f64],
    step: f64,
    path: EvalPath,
) -> Result<f64, DistanceError> {
    let dist = set.distance(x);
    if !(step > 0.0) || step > dist / NEAR_FIELD_FACTOR {
        return Err(DistanceError::StepTooLarge { step, dist });
    }
    let a = (set.dim_n() - set.dim_d() - 1) as f64;
    let n = set.dim_n();
    let mut div = 0.0;
    let mut probe = x.to_vec();
    for j in 0..n {
        probe[j] = x[j] + step;
        let plus = h_alpha(set, a, &probe, path)?.value[j];
        probe[j] = x[j] - step;
        let minus = h_alpha(set, a, &probe, path)?.value[j];
        probe[j] = x[j];
        div += (plus - minus) / (2.0 * step);
    }
    Ok(div)
}
