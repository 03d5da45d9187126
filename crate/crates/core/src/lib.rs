//! Rigid 3D registration from point correspondences by recursive filtering.
//!
//! Three estimators share one pipeline (center the pairs, solve for the
//! rotation, recover translation):
//!
//! * [`closed_form`]: Horn's unit-quaternion solution,
//! * [`kalman`]: a Kalman filter over the nine rotation entries,
//! * [`robust`]: an H∞ filter that inflates the Kalman recursion by
//!   structured model uncertainty.
//!
//! [`sensor`] turns RGBD depth quantization into per-point standard
//! deviations, [`synth`] and [`bench`] generate seeded test problems and score
//! the methods, and [`io`] holds the file formats behind the `regfilt` CLI.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod closed_form;
pub mod error;
pub mod geometry;
pub mod io;
pub mod kalman;
pub mod method;
pub mod robust;
pub mod sensor;
pub mod synth;

pub use error::{RegError, Result};
pub use geometry::{
    apply_transform, centroid, project_to_rotation, rmse, Correspondence, Point3, RigidTransform, Rotation,
};
pub use kalman::{kf_register, FilterState, KfConfig, RegistrationResult};
pub use method::{register, Method, MethodConfig};
pub use robust::{rf_register, RfConfig, UncertaintyModel};
