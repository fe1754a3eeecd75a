//! Active semantic perception over hierarchical scene graphs.
//!
//! The crate builds a layered scene graph (rooms, objects, free-space
//! "nothing" boxes and wall/door structure) of a synthetic indoor world from
//! simulated observations, samples plausible completions of the unobserved
//! part, scores candidate viewpoints by an ensemble mutual-information
//! estimate, plans collision-free paths and scores the resulting maps
//! against ground truth.
//!
//! Geometry and entropy kernels are generic over [`scalar::Scalar`]; the
//! domain model is fixed to `f64` through the aliases below.

pub mod catalog;
pub mod completion;
pub mod eval;
pub mod geometry;
pub mod infogain;
pub mod mapping;
pub mod pgm;
pub mod rng;
pub mod planner;
pub mod scalar;
pub mod scene_graph;
pub mod voxel;
pub mod world;

pub use scalar::Scalar;

/// Scalar used by the scene-graph domain model.
pub type Real = f64;
pub type Vec2 = geometry::Vec2<Real>;
pub type Vec3 = geometry::Vec3<Real>;
pub type Aabb = geometry::Aabb3<Real>;
pub type OrientedBox = geometry::OrientedBox<Real>;
pub type Rect = geometry::Rect<Real>;
pub type Sector = geometry::Sector<Real>;

pub use scene_graph::{NodeId, SceneGraph};
