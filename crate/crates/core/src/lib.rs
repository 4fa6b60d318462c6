//! Analysis toolkit for mathematical programs with switching constraints
//!
//! ```text
//! min f(z)  s.t.  g(z) <= 0,  h(z) = 0,  G_i(z) * H_i(z) = 0  (i = 1..m)
//! ```
//!
//! Given a candidate point (and optionally a direction) the crate classifies
//! the active index sets, evaluates the exact tangent/normal cone calculus of
//! the switching set, decides the W/M/S/Q/strong-M stationarity ladder with
//! multiplier certificates, checks constraint qualifications and certifies
//! local error bounds and exact penalties by seeded sampling.
//!
//! The crate is `no_std` (with `alloc`). Enable the `std` feature to link the
//! standard library; nothing in the public surface depends on it.
//!
//! Module map:
//!
//! - [`expr`] / [`model`]: expression DSL, symbolic derivatives, instances.
//! - [`analysis`]: index sets, directional refinements, TNLP and branch views.
//! - [`cones`]: tag-based cone calculus for the switching set.
//! - [`linalg`], [`lp`], [`kernel`]: rank/null space, simplex, sign-pattern
//!   feasibility and cone-kernel intersections.
//! - [`stationarity`], [`cq`], [`bounds`]: the verdict producers.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![allow(clippy::needless_range_loop)]

extern crate alloc;

mod prelude {
    pub use alloc::{
        boxed::Box,
        format,
        string::{String, ToString},
        vec,
        vec::Vec,
    };
}

pub mod analysis;
pub mod bounds;
pub mod cones;
pub mod cq;
pub mod expr;
pub mod fixtures;
pub mod kernel;
pub mod linalg;
pub mod lp;
pub mod model;
pub mod num;
pub mod sampling;
pub mod stationarity;

pub use analysis::{ActivePattern, Bipartition, DirectionalPattern, NlpView, Tolerances};
pub use bounds::{ErrorBoundEstimate, ResidualBreakdown};
pub use cones::{FactorCone, ProductCone};
pub use cq::{CqName, CqReport, CqVerdict};
pub use expr::{Expr, UnaryFn};
pub use kernel::{LinearCertificate, Sign, SignPattern};
pub use model::{MpscInstance, SmoothFunction};
pub use stationarity::{MultiplierVector, StationarityKind, StationarityVerdict};
