//! Panoramic multi-object tracking.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: wrap-aware box arithmetic on a 360° cylindrical image.
//! * [`motion`]: constant-velocity Kalman filter whose x-innovation respects the seam.
//! * [`assignment`]: gated cost matrices and an exact rectangular assignment solver.
//! * [`feedback`]: track priors fed back into the next frame's decoding, plus the
//!   gated/ungated candidate entropy diagnostics in [`entropy`].
//! * [`tracker`]: track lifecycle in threshold-driven (`e2e`) and assignment-driven (`da`) modes.
//! * [`ssm_block`]: forward-only distortion/scan/fusion feature block on small tensors.
//! * [`metrics`]: HOTA, CLEAR MOTA, IDF1 and OSPA evaluation.
//! * [`mot_io`]: 9-field MOT text records and sequence metadata sidecars.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assignment;
pub mod entropy;
pub mod error;
pub mod feedback;
pub mod geometry;
pub mod metrics;
pub mod mot_io;
pub mod motion;
pub mod ssm_block;
pub mod synthetic;
pub mod tracker;

pub use error::{Error, Result};
pub use geometry::{Canvas, PanoBox, Rect};
pub use mot_io::{AnnotationRecord, SequenceMeta};
pub use feedback::Detection;
pub use tracker::{Mode, Tracker, TrackerConfig};
