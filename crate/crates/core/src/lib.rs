//! Rate-distortion theory toolkit with lattice quantizers.
//!
//! The crate computes rate-distortion functions of finite sources, Shannon
//! lower bounds, d-tilted information, finite-blocklength converse and
//! achievability bounds and their Gaussian approximations. It also provides
//! lattice quantizers (`ℤⁿ`, `Dₙ`, `Aₙ*`, custom generators) whose simulated
//! output entropy and code lengths can be checked against those bounds.
//!
//! Information quantities are in nats unless a name says otherwise.
//!
//! Distortion measures and lattices are generic over the scalar type through
//! [`scalar::Real`]; the `*64` and `*32` aliases below fix it. Probability,
//! special-function and Monte-Carlo code works in `f64`.

// `!(x > 0.0)` also rejects NaN, which is the point
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod codec;
pub mod distortion;
pub mod error;
pub mod fbl;
pub mod lattice;
pub(crate) mod linalg;
pub mod rd_finite;
pub mod rng;
pub mod scalar;
pub mod sources;
pub mod special;
pub mod spectrum;
pub mod tilted;

pub use distortion::{DistortionKind, DistortionMeasure, DistortionSpec};
pub use error::{Error, Result};
pub use lattice::{Lattice, LatticeFamily, LatticeGeometry, LatticeSpec};
pub use scalar::Real;
pub use sources::{ContinuousSource, FiniteSource, ScalarFamily, Source, SourceSpec};

pub type DistortionMeasure64 = DistortionMeasure<f64>;
pub type DistortionMeasure32 = DistortionMeasure<f32>;
pub type Lattice64 = Lattice<f64>;
pub type Lattice32 = Lattice<f32>;
