//! codimlab-core: a numerical laboratory for degenerate elliptic operators on
//! complements of low-dimensional boundaries.
//!
//! The crate carries a boundary set Γ ⊂ Rⁿ of dimension d < n-1 as a weighted
//! atom cloud, evaluates the regularized distance D_β and its kernel fields,
//! builds Whitney decompositions and cutoff functions, measures flatness via
//! normalized Wasserstein distances, solves Dirichlet problems for the
//! degenerate operator -div D_β^{d+1+γ-n} ∇, and evaluates Carleson-type
//! functionals of the resulting fields.

pub mod alpha;
pub mod carleson;
pub mod geometry;
pub mod numeric;
pub mod smooth_distance;
pub mod solver;
pub mod spatial;
pub mod whitney;

pub use geometry::{
    check_ahlfors, check_ahlfors_in_range, make_cantor_garnett, make_flat, make_lipschitz_graph,
    AhlforsReport, BoundarySet, GeometryDescriptor, GeometryError, ProfileSpec,
};
