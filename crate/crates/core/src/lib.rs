//! Patient-specific orbital plate fit analysis.
//!
//! The crate is organised in three layers:
//!
//! - [`mesh`]: triangle meshes, STL/PLY and landmark I/O, a bounding volume
//!   hierarchy for closest-point and signed-distance queries, mirroring,
//!   transforms and polyline resampling.
//! - [`registration`]: landmark (Kabsch) alignment, rigid and affine ICP,
//!   coherent point drift, and the mirrored-orbit reconstruction pipeline.
//! - [`plate`]: plate models, surgeon-style placement (posterior-stop anchoring,
//!   pivot rotation), collision detection, plate-wide and edge-specific
//!   distances, heatmaps, ranking and export.
//!
//! [`synthetic`] builds the deterministic test geometry used by the sample
//! case and the acceptance suite.
//!
//! All lengths are millimetres.

mod error;

pub mod mesh;
pub mod plate;
pub mod registration;
pub mod synthetic;

pub use error::{Error, Result};

pub use mesh::{
    AffineTransform, ClosestPointResult, LandmarkSet, MirrorPlane, Polyline, RigidTransform,
    SpatialIndex, TriangleMesh,
};

/// Shorthand used throughout the crate.
pub type Point3 = nalgebra::Point3<f64>;
pub type Vector3 = nalgebra::Vector3<f64>;
pub type Matrix3 = nalgebra::Matrix3<f64>;
