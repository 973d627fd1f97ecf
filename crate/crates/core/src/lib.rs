//! Jet-based curvature computations for Riemannian four-manifolds with
//! boundary: curvature and Bach tensors, boundary geometry, normal
//! expansions, conformally invariant functionals and their first variation.

// tensor code indexes several arrays per loop; `!(x > 0.0)` also rejects NaN
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod boundary;
pub mod curvature;
pub mod error;
pub mod expr;
pub mod functionals;
pub mod jet;
pub mod linalg;
pub mod metric;
pub mod models;
pub mod par;
pub mod pointwise;
pub mod quadrature;
pub mod report;
pub mod tensor;

pub use error::{GeomError, Result};
