//! Radial reduction of the degenerate operator over a flat boundary.
//!
//! For transversally-radial profiles over a flat Γ of codimension m = n - d,
//! -div(w(dist) ∇u) = 0 reduces to -(s^{m-1} w(s) u')' = 0, whose increasing
//! solution is u(r) = ∫_{r0}^{r} s^{1-m} w(s)^{-1} ds. This covers the flat
//! Green profile, the magic case, and the cosine-weight counterexample in
//! closed (quadrature) form.

use crate::numeric::{adaptive_integral, integral_with_endpoint_singularity, NumericError};
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum RadialError {
    #[error("the radial integrand is not integrable at the origin (divergent Green profile)")]
    Divergent,
    #[error("invalid radial parameters: {0}")]
    BadParameter(String),
    #[error("quadrature failure: {0}")]
    Quadrature(NumericError),
}

/// The weight w(s) of the operator -div w(dist) ∇.
#[derive(Clone)]
pub enum RadialWeight {
    /// s^{d+1+γ-n}: the weight of the degenerate operator on flat Γ, where
    /// the regularized distance is proportional to s.
    OperatorPower { d: usize, n: usize, gamma: f64 },
    /// Arbitrary positive weight.
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for RadialWeight {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RadialWeight::OperatorPower { d, n, gamma } => {
                write!(f, "OperatorPower(d={d}, n={n}, gamma={gamma})")
            }
            RadialWeight::Function(_) => write!(f, "Function(..)"),
        }
    }
}

impl RadialWeight {
    fn eval(&self, s: f64) -> f64 {
        match self {
            RadialWeight::OperatorPower { d, n, gamma } => {
                s.powf(*d as f64 + 1.0 + gamma - *n as f64)
            }
            RadialWeight::Function(f) => f(s),
        }
    }
}

/// The radial solution profile u(r) = ∫_{r0}^{r} s^{1-m} / w(s) ds.
#[derive(Debug, Clone)]
pub struct RadialSolution {
    codim: usize,
    weight: RadialWeight,
    r0: f64,
    r1: f64,
}

/// Builds the radial Green-type profile for boundary dimension d in Rⁿ with
/// the given weight, anchored at u(r0) = 0 and valid on [r0, r1].
pub fn radial_solution(
    n: usize,
    d: usize,
    weight: RadialWeight,
    r0: f64,
    r1: f64,
) -> Result<RadialSolution, RadialError> {
    if d >= n {
        return Err(RadialError::BadParameter(format!("need d < n, got d={d}, n={n}")));
    }
    if !(r0 >= 0.0) || !(r1 > r0) {
        return Err(RadialError::BadParameter(format!("need 0 <= r0 < r1, got [{r0}, {r1}]")));
    }
    let solution = RadialSolution { codim: n - d, weight, r0, r1 };
    if r0 == 0.0 {
        // Probe integrability at the origin once, up front.
        solution.eval(r1.min(r0 + (r1 - r0) * 1e-3).max(r1 * 1e-6))?;
    }
    Ok(solution)
}

impl RadialSolution {
    /// u(r) by adaptive quadrature; errors if the integrand fails to be
    /// integrable at a zero left endpoint.
    pub fn eval(&self, r: f64) -> Result<f64, RadialError> {
        if r < self.r0 || r > self.r1 * (1.0 + 1e-12) {
            return Err(RadialError::BadParameter(format!(
                "r = {r} outside [{}, {}]",
                self.r0, self.r1
            )));
        }
        if r == self.r0 {
            return Ok(0.0);
        }
        let m1 = 1.0 - self.codim as f64;
        let mut f = |s: f64| s.powf(m1) / self.weight.eval(s);
        if self.r0 == 0.0 {
            match integral_with_endpoint_singularity(&mut f, r, 1e-12) {
                Ok(v) => Ok(v),
                Err(NumericError::Divergent { .. }) => Err(RadialError::Divergent),
                Err(e) => Err(RadialError::Quadrature(e)),
            }
        } else {
            adaptive_integral(&mut f, self.r0, r, 1e-12).map_err(RadialError::Quadrature)
        }
    }
}
