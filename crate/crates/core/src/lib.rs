//! Discretized fractal geometry toolkit: δ-discretized sets and measures,
//! affine Grassmannian geometry, point/plane incidence counting, projection
//! estimates and point/hyperplane duality.
//!
//! Everything parallel runs on rayon when the `parallel` feature is on and
//! produces bit-identical results with it off.

pub mod constants;
pub mod delta_sets;
pub mod duality;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod incidence;
pub mod io;
pub mod par;
pub mod projections;
pub mod rng;
mod spatial;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::{AffinePlane, PlaneFamily, PointCloud, Resolution};
