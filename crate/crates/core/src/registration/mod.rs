//! Alignment algorithms and the mirrored-orbit reconstruction pipeline.
//!
//! - [`landmark_rigid_align`]: least-squares rigid fit between labeled landmarks.
//! - [`icp_rigid`] / [`icp_affine`]: trimmed point-to-point ICP against a
//!   [`SpatialIndex`](crate::SpatialIndex).
//! - [`cpd_nonrigid`]: coherent point drift with a Gaussian motion-coherence prior.
//! - [`reconstruct_orbit`]: mirror a skull and register it back onto itself.

mod cpd;
mod icp;
mod kabsch;
mod reconstruct;
mod sampling;

pub use cpd::{cpd_nonrigid, CpdParams, DeformationField, Normalization};
pub use icp::{icp_affine, icp_affine_points, icp_rigid, icp_rigid_points, IcpOutcome, IcpParams};
pub use kabsch::{fit_affine, fit_rigid, landmark_rigid_align};
pub use reconstruct::{reconstruct_orbit, ReconstructionMethod, ReconstructionResult, RegistrationTransform, TransformRecord};
pub use sampling::{farthest_point_sampling, sample_indices};

/// Seed used when none is configured.
pub const DEFAULT_SEED: u64 = 42;
