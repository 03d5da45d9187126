//! Centroid decoupling shared by every registration method, plus Horn's
//! closed-form unit-quaternion solution used as the baseline.

use nalgebra::{Matrix3, Matrix4, Quaternion, UnitQuaternion, Vector3};

use crate::error::{RegError, Result};
use crate::geometry::{centroid, Correspondence, Point3, RigidTransform, Rotation};

/// Correspondences with their centroids removed.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredPairs {
    pub source_centered: Vec<Vector3<f64>>,
    pub target_centered: Vec<Vector3<f64>>,
    pub source_centroid: Point3,
    pub target_centroid: Point3,
}

impl CenteredPairs {
    pub fn len(&self) -> usize {
        self.source_centered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source_centered.is_empty()
    }
}

pub fn center_pairs(corrs: &[Correspondence]) -> Result<CenteredPairs> {
    if corrs.is_empty() {
        return Err(RegError::EmptyInput("no correspondences to center"));
    }
    let source_centroid = centroid(corrs.iter().map(|c| &c.source))?;
    let target_centroid = centroid(corrs.iter().map(|c| &c.target))?;
    Ok(CenteredPairs {
        source_centered: corrs.iter().map(|c| c.source - source_centroid).collect(),
        target_centered: corrs.iter().map(|c| c.target - target_centroid).collect(),
        source_centroid,
        target_centroid,
    })
}

/// `t = p̄ − R·q̄`.
pub fn recover_translation(r: &Rotation, cp: &CenteredPairs) -> Vector3<f64> {
    cp.target_centroid.coords - r.matrix() * cp.source_centroid.coords
}

/// How the scale sum over centered pairs is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScaleEstimator {
    /// `Σ p̄ᵢ·(R q̄ᵢ) / Σ ‖q̄ᵢ‖²`, the least-squares optimum.
    #[default]
    RatioOfSums,
    /// Mean over pairs of `p̄ᵢ·(R q̄ᵢ) / ‖q̄ᵢ‖²`; pairs with `q̄ᵢ = 0` are skipped.
    MeanOfRatios,
}

pub fn estimate_scale(r: &Rotation, cp: &CenteredPairs) -> Result<f64> {
    estimate_scale_with(r, cp, ScaleEstimator::RatioOfSums)
}

pub fn estimate_scale_with(r: &Rotation, cp: &CenteredPairs, how: ScaleEstimator) -> Result<f64> {
    let m = r.matrix();
    let denom: f64 = cp.source_centered.iter().map(|q| q.norm_squared()).sum();
    if denom < 1e-18 {
        return Err(RegError::DegenerateInput(
            "centered sources are all zero; scale is undefined".into(),
        ));
    }
    let terms = cp
        .source_centered
        .iter()
        .zip(&cp.target_centered)
        .map(|(q, p)| (p.dot(&(m * q)), q.norm_squared()));
    let s = match how {
        ScaleEstimator::RatioOfSums => {
            let num: f64 = terms.map(|(n, _)| n).sum();
            if num <= 0.0 {
                return Err(RegError::InvalidScale(num / denom));
            }
            num / denom
        }
        ScaleEstimator::MeanOfRatios => {
            let (sum, count) = terms
                .filter(|(_, d)| *d > 0.0)
                .fold((0.0, 0usize), |(s, c), (n, d)| (s + n / d, c + 1));
            let s = sum / count as f64;
            if s <= 0.0 {
                return Err(RegError::InvalidScale(s));
            }
            s
        }
    };
    Ok(s)
}

/// Translation and scale guesses obtained by assuming `R₀ = I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialGuess {
    pub translation: Vector3<f64>,
    /// `None` when the identity rotation gives a nonpositive or undefined scale.
    pub scale: Option<f64>,
}

pub fn initial_guess(cp: &CenteredPairs, how: ScaleEstimator) -> InitialGuess {
    InitialGuess {
        translation: cp.target_centroid - cp.source_centroid,
        scale: estimate_scale_with(&Rotation::identity(), cp, how).ok(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HornOptions {
    pub estimate_scale: bool,
    pub scale_estimator: ScaleEstimator,
}

/// Horn's closed-form absolute orientation, rigid (`s = 1`).
pub fn horn_quaternion(corrs: &[Correspondence]) -> Result<RigidTransform> {
    horn_quaternion_with(corrs, &HornOptions::default())
}

pub fn horn_quaternion_with(corrs: &[Correspondence], opts: &HornOptions) -> Result<RigidTransform> {
    if corrs.len() < 3 {
        return Err(RegError::UnderDetermined {
            got: corrs.len(),
            need: 3,
        });
    }
    let cp = center_pairs(corrs)?;
    let rotation = horn_rotation(&cp)?;
    let scale = if opts.estimate_scale {
        estimate_scale_with(&rotation, &cp, opts.scale_estimator)?
    } else {
        1.0
    };
    let translation = cp.target_centroid.coords - scale * (rotation.matrix() * cp.source_centroid.coords);
    RigidTransform::new(rotation, translation, scale)
}

/// Rotation maximizing `Σ p̄ᵢ·(R q̄ᵢ)` from the dominant eigenvector of Horn's
/// symmetric 4x4 matrix.
pub fn horn_rotation(cp: &CenteredPairs) -> Result<Rotation> {
    let s: Matrix3<f64> = cp
        .source_centered
        .iter()
        .zip(&cp.target_centered)
        .map(|(q, p)| q * p.transpose())
        .sum();
    let (sxx, sxy, sxz) = (s[(0, 0)], s[(0, 1)], s[(0, 2)]);
    let (syx, syy, syz) = (s[(1, 0)], s[(1, 1)], s[(1, 2)]);
    let (szx, szy, szz) = (s[(2, 0)], s[(2, 1)], s[(2, 2)]);
    #[rustfmt::skip]
    let n = Matrix4::new(
        sxx + syy + szz, syz - szy,        szx - sxz,        sxy - syx,
        syz - szy,       sxx - syy - szz,  sxy + syx,        szx + sxz,
        szx - sxz,       sxy + syx,        -sxx + syy - szz, syz + szy,
        sxy - syx,       szx + sxz,        syz + szy,        -sxx - syy + szz,
    );
    let eig = n.symmetric_eigen();
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let (top, second) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]);
    let magnitude = eig.eigenvalues.amax();
    if !(magnitude > 0.0) || top - second < 1e-12 * magnitude {
        return Err(RegError::DegenerateConfiguration(format!(
            "maximal quaternion eigenvalue is not unique (gap {:e})",
            top - second
        )));
    }
    let v = eig.eigenvectors.column(order[0]);
    let sign = if v[0] < 0.0 { -1.0 } else { 1.0 };
    let q = UnitQuaternion::from_quaternion(Quaternion::new(sign * v[0], sign * v[1], sign * v[2], sign * v[3]));
    Ok(Rotation::from_matrix_unchecked(*q.to_rotation_matrix().matrix()))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::geometry::rmse;
    use crate::synth::random_rigid_transform;

    fn pairs(src: &[[f64; 3]], dst: &[[f64; 3]]) -> Vec<Correspondence> {
        src.iter()
            .zip(dst)
            .map(|(s, d)| Correspondence::new(Point3::from(*s), Point3::from(*d)))
            .collect()
    }

    const BASIS: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

    #[test]
    fn center_single_pair() {
        let cp = center_pairs(&pairs(&[[1.0, 2.0, 3.0]], &[[4.0, 5.0, 6.0]])).unwrap();
        assert_eq!(cp.source_centered, vec![Vector3::zeros()]);
        assert_eq!(cp.target_centered, vec![Vector3::zeros()]);
    }

    #[test]
    fn center_two_sources() {
        let cp = center_pairs(&pairs(&[[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]], &[[0.0; 3], [0.0; 3]])).unwrap();
        assert_eq!(
            cp.source_centered,
            vec![Vector3::new(-1.0, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0)]
        );
        assert!(center_pairs(&[]).is_err());
    }

    #[test]
    fn centered_sums_vanish() {
        let t = random_rigid_transform(3);
        let corrs: Vec<_> = (0..37)
            .map(|i| {
                let s = Point3::new((i as f64).sin() * 3.0, (i as f64 * 0.7).cos(), i as f64 * 0.1);
                Correspondence::new(s, t.apply(&s))
            })
            .collect();
        let cp = center_pairs(&corrs).unwrap();
        let ss: Vector3<f64> = cp.source_centered.iter().sum();
        let ts: Vector3<f64> = cp.target_centered.iter().sum();
        assert!(ss.amax() <= 1e-9 && ts.amax() <= 1e-9);
    }

    #[test]
    fn horn_identity() {
        let t = horn_quaternion(&pairs(&BASIS, &BASIS)).unwrap();
        assert_abs_diff_eq!(t.rotation.matrix(), &Matrix3::identity(), epsilon = 1e-12);
        assert_abs_diff_eq!(t.translation, Vector3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn horn_quarter_turn() {
        let dst = [[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        let t = horn_quaternion(&pairs(&BASIS, &dst)).unwrap();
        let expect = Rotation::from_axis_angle(&Vector3::z(), FRAC_PI_2);
        assert_abs_diff_eq!(t.rotation.matrix(), expect.matrix(), epsilon = 1e-12);
        assert_abs_diff_eq!(t.translation, Vector3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn horn_rejects_too_few_and_collinear() {
        let two = pairs(&BASIS[..2], &BASIS[..2]);
        assert!(matches!(
            horn_quaternion(&two),
            Err(RegError::UnderDetermined { got: 2, need: 3 })
        ));
        let line: Vec<[f64; 3]> = (0..5).map(|i| [i as f64, 2.0 * i as f64, 0.5]).collect();
        assert!(matches!(
            horn_quaternion(&pairs(&line, &line)),
            Err(RegError::DegenerateConfiguration(_))
        ));
    }

    #[test]
    fn horn_recovers_random_transforms() {
        for seed in 0..20 {
            let truth = random_rigid_transform(seed);
            let corrs: Vec<_> = (0..400)
                .map(|i| {
                    let f = i as f64;
                    let s = Point3::new((f * 0.37).sin(), (f * 1.3).cos(), ((f * 0.11).sin() * 2.0).tanh());
                    Correspondence::new(s, truth.apply(&s))
                })
                .collect();
            let est = horn_quaternion(&corrs).unwrap();
            assert!(rmse(&est, &corrs).unwrap() <= 1e-9, "seed {seed}");
            // residual of the unsquared model is zero pair by pair
            for c in &corrs {
                assert!((est.apply(&c.source) - c.target).norm() <= 1e-9);
            }
        }
    }

    #[test]
    fn horn_is_order_invariant() {
        let truth = random_rigid_transform(11);
        let mut corrs: Vec<_> = (0..50)
            .map(|i| {
                let f = i as f64;
                let s = Point3::new(f.sin(), (2.0 * f).cos(), f * 0.02);
                let noise = Vector3::new((f * 7.0).sin(), (f * 5.0).cos(), (f * 3.0).sin()) * 0.01;
                Correspondence::new(s, truth.apply(&s) + noise)
            })
            .collect();
        let a = horn_quaternion(&corrs).unwrap();
        corrs.reverse();
        corrs.rotate_left(17);
        let b = horn_quaternion(&corrs).unwrap();
        assert_abs_diff_eq!(a.rotation.matrix(), b.rotation.matrix(), epsilon = 1e-12);
        assert_abs_diff_eq!(a.translation, b.translation, epsilon = 1e-12);
    }

    #[test]
    fn translation_recovery() {
        let mk = |sc: [f64; 3], tc: [f64; 3]| CenteredPairs {
            source_centered: vec![],
            target_centered: vec![],
            source_centroid: Point3::from(sc),
            target_centroid: Point3::from(tc),
        };
        let id = Rotation::identity();
        assert_eq!(recover_translation(&id, &mk([1.0; 3], [1.0; 3])), Vector3::zeros());
        assert_eq!(
            recover_translation(&id, &mk([1.0, 1.0, 1.0], [2.0, 3.0, 4.0])),
            Vector3::new(1.0, 2.0, 3.0)
        );
        let rz = Rotation::from_axis_angle(&Vector3::z(), FRAC_PI_2);
        assert_abs_diff_eq!(
            recover_translation(&rz, &mk([1.0, 0.0, 0.0], [0.0; 3])),
            Vector3::new(0.0, -1.0, 0.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn scale_cases() {
        let src = [[0.0, 0.0, 0.0], [1.0, 2.0, 0.0], [-1.0, 0.5, 3.0]];
        let cp = center_pairs(&pairs(&src, &src)).unwrap();
        assert_abs_diff_eq!(
            estimate_scale(&Rotation::identity(), &cp).unwrap(),
            1.0,
            epsilon = 1e-15
        );

        let doubled: Vec<[f64; 3]> = src.iter().map(|p| [2.0 * p[0], 2.0 * p[1], 2.0 * p[2]]).collect();
        let cp = center_pairs(&pairs(&src, &doubled)).unwrap();
        assert_abs_diff_eq!(
            estimate_scale(&Rotation::identity(), &cp).unwrap(),
            2.0,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            estimate_scale_with(&Rotation::identity(), &cp, ScaleEstimator::MeanOfRatios).unwrap(),
            2.0,
            epsilon = 1e-14
        );

        let flipped: Vec<[f64; 3]> = src.iter().map(|p| [-p[0], -p[1], -p[2]]).collect();
        let cp = center_pairs(&pairs(&src, &flipped)).unwrap();
        assert!(matches!(
            estimate_scale(&Rotation::identity(), &cp),
            Err(RegError::InvalidScale(_))
        ));

        let cp = center_pairs(&pairs(&[[1.0; 3], [1.0; 3]], &[[0.0; 3], [1.0; 3]])).unwrap();
        assert!(matches!(
            estimate_scale(&Rotation::identity(), &cp),
            Err(RegError::DegenerateInput(_))
        ));
    }

    #[test]
    fn scale_half_under_random_rotation() {
        let truth = random_rigid_transform(5);
        let scaled = RigidTransform::new(truth.rotation, truth.translation, 0.5).unwrap();
        let corrs: Vec<_> = (0..100)
            .map(|i| {
                let f = i as f64;
                let s = Point3::new(f.sin(), (0.3 * f).cos(), (0.7 * f).sin());
                Correspondence::new(s, scaled.apply(&s))
            })
            .collect();
        let cp = center_pairs(&corrs).unwrap();
        assert_abs_diff_eq!(estimate_scale(&truth.rotation, &cp).unwrap(), 0.5, epsilon = 1e-12);

        let opts = HornOptions {
            estimate_scale: true,
            ..Default::default()
        };
        let est = horn_quaternion_with(&corrs, &opts).unwrap();
        assert_abs_diff_eq!(est.scale, 0.5, epsilon = 1e-12);
        assert!(rmse(&est, &corrs).unwrap() <= 1e-12);
    }

    #[test]
    fn initial_guess_uses_identity_rotation() {
        let src = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let dst: Vec<[f64; 3]> = src.iter().map(|p| [p[0] + 1.0, p[1] + 2.0, p[2] + 3.0]).collect();
        let g = initial_guess(&center_pairs(&pairs(&src, &dst)).unwrap(), ScaleEstimator::RatioOfSums);
        assert_abs_diff_eq!(g.translation, Vector3::new(1.0, 2.0, 3.0), epsilon = 1e-15);
        assert_abs_diff_eq!(g.scale.unwrap(), 1.0, epsilon = 1e-15);
    }
}
