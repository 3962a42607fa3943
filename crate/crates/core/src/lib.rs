//! Relative pose for rolling-shutter and push-broom cameras.
//!
//! Each camera model of the hierarchy (perspective, linear/uniform push-broom, linear/uniform
//! rolling shutter) has a generalized essential matrix `F` acting on monomial liftings of image
//! points. The crate builds these matrices from motion parameters, estimates them linearly from
//! correspondences, recovers motion, refines it by Sampson-error minimization, wraps everything
//! in RANSAC, and ships a synthetic benchmark generator.

// `!(x > 0.0)` style checks are deliberate: they reject NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod geometry;
pub mod hierarchy;
pub mod linear;
pub mod nonlinear;
pub mod robust;
pub mod synth;
pub mod tolerance;

pub use error::{Error, Result};
pub use geometry::{
    lift, pairwise_essential, rotation_exact, rotation_small, CameraModel, Correspondence, Frame,
    ImagePoint, LiftedPoint, MotionParams, RotationMode, ScanlinePose,
};
pub use hierarchy::{build, residual, sample_epipolar_curve, ImageBounds, EpipolarCurve, GeneralizedEssential};
pub use tolerance::Tolerances;
