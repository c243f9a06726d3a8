//! Depth completion by global sparse least squares.
//!
//! A raw sensor depth image with holes is completed by solving for every
//! pixel's depth jointly from three kinds of soft constraint:
//!
//! * data rows tying observed pixels to their raw depth,
//! * normal rows asking the back-projected tangent between neighbouring pixels
//!   to be orthogonal to the surface normal (linearised, down-weighted near
//!   occlusion boundaries),
//! * weak smoothness rows between 4-neighbours.
//!
//! The rows are assembled into sparse symmetric positive definite normal
//! equations and solved with preconditioned conjugate gradients or an
//! envelope Cholesky factorisation.
//!
//! Besides the solver the crate carries what is needed to evaluate it at desk
//! scale: an analytic ray-cast renderer producing ground truth, hole masks,
//! two inpainting baselines, the usual depth/normal metrics, file formats and
//! experiment harnesses.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baselines;
pub mod completion;
pub mod constraints;
mod error;
pub mod experiments;
pub mod geometry;
pub mod image;
pub mod io;
pub mod metrics;
pub mod solver;
pub mod synthetic;

pub use completion::{complete_depth, Completion, CompletionConfig, Representation};
pub use error::{Error, Result};
pub use geometry::CameraIntrinsics;
pub use image::{
    BoundaryMap, ColorImage, DepthImage, DerivativeMap, Direction, NormalMap, SolverWeights,
};
pub use solver::{SolveMethod, SolveOptions};
