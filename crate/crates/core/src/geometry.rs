//! Core geometric types: rotations, rigid transforms, correspondences, and the
//! RMSE metric used to score every registration method.
//!
//! All lengths are meters. Rotations are stored as plain 3x3 matrices whose
//! row-major flattening is the nine-entry filter state `r11..r33`.

use nalgebra::{Matrix3, SVector, Vector3};

use crate::error::{RegError, Result};

pub type Point3 = nalgebra::Point3<f64>;

/// Tolerance on `RᵀR = I` and `det R = 1` accepted by [`Rotation::new`].
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// A proper rotation matrix (orthonormal, determinant +1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Validates `m` against the rotation invariants.
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        let ortho = (m.transpose() * m - Matrix3::identity()).abs().max();
        let det = m.determinant();
        if !m.iter().all(|v| v.is_finite()) || ortho > ROTATION_TOLERANCE || (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(RegError::InvalidArgument(format!(
                "not a proper rotation (orthogonality error {ortho:e}, det {det})"
            )));
        }
        Ok(Rotation(m))
    }

    /// Rotation of `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let axis = nalgebra::Unit::new_normalize(*axis);
        Rotation(*nalgebra::Rotation3::from_axis_angle(&axis, angle).matrix())
    }

    pub(crate) fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Rotation(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Row-major entries `r11 r12 r13 r21 .. r33`.
    pub fn to_row_major(&self) -> [f64; 9] {
        row_major(&self.0).into()
    }

    /// Rotation angle in radians, in `[0, π]`.
    pub fn angle(&self) -> f64 {
        ((self.0.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }
}

/// Flattens a 3x3 matrix row by row.
pub fn row_major(m: &Matrix3<f64>) -> SVector<f64, 9> {
    SVector::<f64, 9>::from_iterator(m.transpose().iter().copied())
}

/// Inverse of [`row_major`].
pub fn from_row_major(x: &SVector<f64, 9>) -> Matrix3<f64> {
    Matrix3::from_row_slice(x.as_slice())
}

/// Similarity transform `p ↦ s·R·p + t`; rigid when `s = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Rotation,
    pub translation: Vector3<f64>,
    pub scale: f64,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Rotation::identity(),
            translation: Vector3::zeros(),
            scale: 1.0,
        }
    }

    pub fn new(rotation: Rotation, translation: Vector3<f64>, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(RegError::InvalidArgument(format!(
                "scale must be positive and finite, got {scale}"
            )));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(RegError::InvalidArgument("translation must be finite".into()));
        }
        Ok(RigidTransform {
            rotation,
            translation,
            scale,
        })
    }

    pub fn rigid(rotation: Rotation, translation: Vector3<f64>) -> Self {
        RigidTransform {
            rotation,
            translation,
            scale: 1.0,
        }
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        apply_transform(self, p)
    }
}

/// `s·R·p + t`.
pub fn apply_transform(t: &RigidTransform, p: &Point3) -> Point3 {
    Point3::from(t.scale * (t.rotation.matrix() * p.coords) + t.translation)
}

/// A pre-matched (source, target) pair, optionally with per-axis standard
/// deviations of the target localisation error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub source: Point3,
    pub target: Point3,
    pub sigma: Option<Vector3<f64>>,
}

impl Correspondence {
    pub fn new(source: Point3, target: Point3) -> Self {
        Correspondence {
            source,
            target,
            sigma: None,
        }
    }

    pub fn with_sigma(source: Point3, target: Point3, sigma: Vector3<f64>) -> Result<Self> {
        if !sigma.iter().all(|s| *s >= 0.0 && s.is_finite()) {
            return Err(RegError::InvalidArgument(format!(
                "sigma components must be finite and nonnegative, got {sigma:?}"
            )));
        }
        Ok(Correspondence {
            source,
            target,
            sigma: Some(sigma),
        })
    }
}

/// Nearest proper rotation to `m` in the Frobenius norm.
///
/// `m = UΣVᵀ` gives `U·diag(1, 1, det(UVᵀ))·Vᵀ`.
pub fn project_to_rotation(m: &Matrix3<f64>) -> Result<Rotation> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(RegError::DegenerateInput("matrix has non-finite entries".into()));
    }
    let svd = m.svd(true, true);
    let sv = svd.singular_values;
    let (largest, smallest) = (sv.max(), sv.min());
    if largest == 0.0 || smallest < 1e-12 * largest {
        return Err(RegError::DegenerateInput(format!(
            "rank-deficient matrix (singular values {:?})",
            sv.as_slice()
        )));
    }
    let u = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    let d = (u * v_t).determinant().signum();
    let r = u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * v_t;
    Ok(Rotation(r))
}

/// Componentwise mean.
pub fn centroid<'a, I>(points: I) -> Result<Point3>
where
    I: IntoIterator<Item = &'a Point3>,
{
    let mut sum = Vector3::zeros();
    let mut n = 0usize;
    for p in points {
        sum += p.coords;
        n += 1;
    }
    if n == 0 {
        return Err(RegError::EmptyInput("centroid of no points"));
    }
    Ok(Point3::from(sum / n as f64))
}

/// `√( (1/n) Σ ‖T(sourceᵢ) − targetᵢ‖² )`, in meters.
pub fn rmse(t: &RigidTransform, corrs: &[Correspondence]) -> Result<f64> {
    if corrs.is_empty() {
        return Err(RegError::EmptyInput("rmse of no correspondences"));
    }
    let sum: f64 = corrs
        .iter()
        .map(|c| (apply_transform(t, &c.source) - c.target).norm_squared())
        .sum();
    Ok((sum / corrs.len() as f64).sqrt())
}
