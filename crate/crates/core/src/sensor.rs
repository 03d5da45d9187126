//! Depth-quantization noise model for RGBD sensors.
//!
//! Depth maps from these sensors collapse onto discrete "Z-levels". The spread
//! of neighbouring levels gives the depth standard deviation, which is then
//! pushed through the pinhole model to the lateral axes.

use nalgebra::{Matrix3, Vector3};

use crate::error::{RegError, Result};
use crate::geometry::Point3;

/// Default neighbour offset used for the level spread.
pub const DEFAULT_LEVEL_OFFSET: usize = 3;

/// Default relative gap below which two depths count as the same level.
pub const DEFAULT_MERGE_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) || !cx.is_finite() || !cy.is_finite() {
            return Err(RegError::InvalidArgument(format!(
                "focal lengths must be positive (fx = {fx}, fy = {fy})"
            )));
        }
        Ok(CameraIntrinsics { fx, fy, cx, cy })
    }
}

/// Sorted, strictly increasing, positive depth levels (meters).
#[derive(Debug, Clone, PartialEq)]
pub struct ZLevels(Vec<f64>);

impl ZLevels {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.iter().any(|z| !(*z > 0.0 && z.is_finite())) {
            return Err(RegError::InvalidArgument("z-levels must be positive".into()));
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(RegError::InvalidArgument("z-levels must be strictly increasing".into()));
        }
        Ok(ZLevels(levels))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the level closest to `depth`.
    pub fn nearest(&self, depth: f64) -> Option<usize> {
        self.0
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - depth).abs().total_cmp(&(b.1 - depth).abs()))
            .map(|(i, _)| i)
    }
}

/// Per-axis standard deviations of a point (meters).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PointSigma {
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
}

impl PointSigma {
    pub fn new(sx: f64, sy: f64, sz: f64) -> Result<Self> {
        if [sx, sy, sz].iter().any(|s| !(*s >= 0.0)) {
            return Err(RegError::InvalidArgument(format!(
                "standard deviations must be nonnegative, got ({sx}, {sy}, {sz})"
            )));
        }
        Ok(PointSigma { sx, sy, sz })
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.sx, self.sy, self.sz)
    }
}

impl From<PointSigma> for Vector3<f64> {
    fn from(s: PointSigma) -> Self {
        s.to_vector()
    }
}

/// Sorted distinct depths; consecutive values whose relative gap is below
/// `merge_epsilon` are merged into their mean.
pub fn extract_z_levels(depths: &[f64], merge_epsilon: f64) -> Result<ZLevels> {
    if depths.is_empty() {
        return Err(RegError::EmptyInput("no depth values"));
    }
    if let Some(bad) = depths.iter().find(|z| !(**z > 0.0 && z.is_finite())) {
        return Err(RegError::InvalidDepth(*bad));
    }
    if !(merge_epsilon > 0.0) {
        return Err(RegError::InvalidArgument("merge_epsilon must be positive".into()));
    }
    let mut sorted = depths.to_vec();
    sorted.sort_by(f64::total_cmp);

    let mut levels = Vec::new();
    let (mut sum, mut count, mut last) = (sorted[0], 1usize, sorted[0]);
    for &z in &sorted[1..] {
        if (z - last) / last < merge_epsilon {
            sum += z;
            count += 1;
        } else {
            levels.push(sum / count as f64);
            sum = z;
            count = 1;
        }
        last = z;
    }
    levels.push(sum / count as f64);
    ZLevels::new(levels)
}

/// Depth standard deviation of level `k`: half the spread between levels
/// `k − i` and `k + i`.
///
/// Near either end the indices are clamped and the divisor is rescaled by the
/// index span actually covered, so uniform spacing `d` always yields `i·d`.
pub fn sigma_z(levels: &ZLevels, k: usize, i: usize) -> Result<f64> {
    let z = levels.as_slice();
    if z.len() < 2 {
        return Err(RegError::InsufficientLevels(z.len()));
    }
    if k >= z.len() {
        return Err(RegError::InvalidArgument(format!(
            "level index {k} out of range (0..{})",
            z.len()
        )));
    }
    if i == 0 {
        return Err(RegError::InvalidArgument("level offset i must be >= 1".into()));
    }
    let hi = (k + i).min(z.len() - 1);
    let lo = k.saturating_sub(i);
    let span = (hi - lo) as f64;
    let divisor = 2.0 * span / (2 * i) as f64;
    Ok((z[hi] - z[lo]) / divisor)
}

/// Pixel coordinates `(u, v)` of a camera-frame point.
pub fn project_pinhole(p: &Point3, intr: &CameraIntrinsics) -> Result<(f64, f64)> {
    if !(p.z > 0.0) {
        return Err(RegError::BehindCamera(p.z));
    }
    Ok((intr.fx / p.z * p.x + intr.cx, intr.fy / p.z * p.y + intr.cy))
}

pub fn backproject_pinhole(u: f64, v: f64, z: f64, intr: &CameraIntrinsics) -> Result<Point3> {
    if !(z > 0.0) {
        return Err(RegError::InvalidDepth(z));
    }
    Ok(Point3::new(z / intr.fx * (u - intr.cx), z / intr.fy * (v - intr.cy), z))
}

/// Lateral standard deviations from the depth one. Magnitudes only: a pixel
/// left of or above the principal point still has a nonnegative spread.
pub fn point_sigmas(u: f64, v: f64, sz: f64, intr: &CameraIntrinsics) -> Result<PointSigma> {
    if !(sz >= 0.0) {
        return Err(RegError::InvalidArgument(format!("sigma_z must be >= 0, got {sz}")));
    }
    Ok(PointSigma {
        sx: (sz / intr.fx * (u - intr.cx)).abs(),
        sy: (sz / intr.fy * (v - intr.cy)).abs(),
        sz,
    })
}

/// Rank-one point covariance `s·sᵀ`.
pub fn covariance_of_point(s: &PointSigma) -> Matrix3<f64> {
    let v = s.to_vector();
    v * v.transpose()
}

/// `diag(σx², σy², σz²)` with every entry at least `floor`; invertible, so it
/// can serve as a measurement covariance.
pub fn diagonal_covariance(s: &PointSigma, floor: f64) -> Matrix3<f64> {
    Matrix3::from_diagonal(&s.to_vector().map(|v| (v * v).max(floor)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovarianceForm {
    /// `s·sᵀ`.
    #[default]
    OuterProduct,
    Diagonal,
}

pub fn point_covariance(s: &PointSigma, form: CovarianceForm) -> Matrix3<f64> {
    match form {
        CovarianceForm::OuterProduct => covariance_of_point(s),
        CovarianceForm::Diagonal => diagonal_covariance(s, crate::kalman::COVARIANCE_FLOOR),
    }
}

/// Full pipeline for one pixel: nearest level, its depth sigma, lateral sigmas.
pub fn pixel_sigma(
    u: f64,
    v: f64,
    depth: f64,
    levels: &ZLevels,
    i: usize,
    intr: &CameraIntrinsics,
) -> Result<PointSigma> {
    let k = levels.nearest(depth).ok_or(RegError::EmptyInput("no z-levels"))?;
    point_sigmas(u, v, sigma_z(levels, k, i)?, intr)
}
