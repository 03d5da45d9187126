//! Seeded synthetic correspondence sets with anisotropic Gaussian noise.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{RegError, Result};
use crate::geometry::{Correspondence, Point3, RigidTransform, Rotation};

/// Half side of the cube sources are drawn from (meters).
pub const SOURCE_HALF_EXTENT: f64 = 1.0;

/// Translation components are drawn from `[-TRANSLATION_RANGE, TRANSLATION_RANGE]` (meters).
pub const TRANSLATION_RANGE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseBand {
    Small,
    Average,
    Large,
    Custom,
}

impl NoiseBand {
    pub fn as_str(&self) -> &'static str {
        match self {
            NoiseBand::Small => "small",
            NoiseBand::Average => "average",
            NoiseBand::Large => "large",
            NoiseBand::Custom => "custom",
        }
    }
}

impl std::str::FromStr for NoiseBand {
    type Err = RegError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "small" => Ok(NoiseBand::Small),
            "average" => Ok(NoiseBand::Average),
            "large" => Ok(NoiseBand::Large),
            "custom" => Ok(NoiseBand::Custom),
            other => Err(RegError::InvalidArgument(format!("unknown noise band '{other}'"))),
        }
    }
}

/// Range of per-point, per-axis noise standard deviations (meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseProfile {
    pub name: NoiseBand,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Draw an independent sigma per axis; otherwise one sigma per point.
    pub anisotropic: bool,
}

impl NoiseProfile {
    /// 0.1 mm to 10 mm.
    pub fn small() -> Self {
        Self::band(NoiseBand::Small, 0.0001, 0.010)
    }

    /// 10 mm to 20 mm.
    pub fn average() -> Self {
        Self::band(NoiseBand::Average, 0.010, 0.020)
    }

    /// 20 mm to 80 mm.
    pub fn large() -> Self {
        Self::band(NoiseBand::Large, 0.020, 0.080)
    }

    pub fn custom(sigma_min: f64, sigma_max: f64) -> Result<Self> {
        let p = Self::band(NoiseBand::Custom, sigma_min, sigma_max);
        p.validate()?;
        Ok(p)
    }

    pub fn noise_free() -> Self {
        Self::band(NoiseBand::Custom, 0.0, 0.0)
    }

    pub fn from_band(band: NoiseBand) -> Option<Self> {
        match band {
            NoiseBand::Small => Some(Self::small()),
            NoiseBand::Average => Some(Self::average()),
            NoiseBand::Large => Some(Self::large()),
            NoiseBand::Custom => None,
        }
    }

    fn band(name: NoiseBand, sigma_min: f64, sigma_max: f64) -> Self {
        NoiseProfile {
            name,
            sigma_min,
            sigma_max,
            anisotropic: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_min >= 0.0 && self.sigma_min <= self.sigma_max && self.sigma_max.is_finite()) {
            return Err(RegError::InvalidArgument(format!(
                "noise profile needs 0 <= sigma_min <= sigma_max, got [{}, {}]",
                self.sigma_min, self.sigma_max
            )));
        }
        Ok(())
    }

    /// Display label, e.g. `small` or `custom[1-5mm]`.
    pub fn label(&self) -> String {
        match self.name {
            NoiseBand::Custom => format!("custom[{}-{}mm]", self.sigma_min * 1e3, self.sigma_max * 1e3),
            band => band.as_str().to_string(),
        }
    }
}

/// One synthetic registration problem with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    /// Targets are `truth(source) + noise[i]`; sigmas are attached.
    pub corrs: Vec<Correspondence>,
    pub truth: RigidTransform,
    pub seed: u64,
    pub noise: Vec<Vector3<f64>>,
}

/// SplitMix64 finalizer, used to derive independent per-sample seeds.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Rotation uniform on SO(3) (normalized Gaussian quaternion, `w ≥ 0`) and
/// translation uniform in `[-1, 1]³` m.
pub fn random_rigid_transform(seed: u64) -> RigidTransform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rotation = loop {
        let v: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        let q = Quaternion::new(v[0], v[1], v[2], v[3]);
        if q.norm() > 1e-9 {
            let q = if q.w < 0.0 { -q } else { q };
            break UnitQuaternion::from_quaternion(q);
        }
    };
    let translation = Vector3::from_fn(|_, _| rng.gen_range(-TRANSLATION_RANGE..=TRANSLATION_RANGE));
    RigidTransform::rigid(
        Rotation::from_matrix_unchecked(*rotation.to_rotation_matrix().matrix()),
        translation,
    )
}

pub fn make_synthetic_set(
    profile: &NoiseProfile,
    n_points: usize,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<SyntheticSample>> {
    validate_counts(n_points, n_samples)?;
    profile.validate()?;
    (0..n_samples as u64)
        .map(|i| make_sample(profile, n_points, mix_seed(seed, i)))
        .collect()
}

fn validate_counts(n_points: usize, n_samples: usize) -> Result<()> {
    if n_points < 3 {
        return Err(RegError::InvalidArgument(format!(
            "need at least 3 points, got {n_points}"
        )));
    }
    if n_samples == 0 {
        return Err(RegError::InvalidArgument("need at least 1 sample".into()));
    }
    Ok(())
}

/// One sample, fully determined by `sample_seed`.
pub fn make_sample(profile: &NoiseProfile, n_points: usize, sample_seed: u64) -> Result<SyntheticSample> {
    validate_counts(n_points, 1)?;
    profile.validate()?;
    let truth = random_rigid_transform(sample_seed);
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
    rng.set_stream(1);

    let draw_sigma = |rng: &mut ChaCha8Rng| {
        if profile.sigma_max > profile.sigma_min {
            rng.gen_range(profile.sigma_min..=profile.sigma_max)
        } else {
            profile.sigma_min
        }
    };

    let mut corrs = Vec::with_capacity(n_points);
    let mut noise = Vec::with_capacity(n_points);
    for _ in 0..n_points {
        let source = Point3::from(Vector3::from_fn(|_, _| {
            rng.gen_range(-SOURCE_HALF_EXTENT..=SOURCE_HALF_EXTENT)
        }));
        let sigma = if profile.anisotropic {
            Vector3::new(draw_sigma(&mut rng), draw_sigma(&mut rng), draw_sigma(&mut rng))
        } else {
            Vector3::repeat(draw_sigma(&mut rng))
        };
        let e = Vector3::from_fn(|axis, _| {
            let s = sigma[axis];
            if s > 0.0 {
                Normal::new(0.0, s).expect("finite sigma").sample(&mut rng)
            } else {
                0.0
            }
        });
        let target = truth.apply(&source) + e;
        corrs.push(Correspondence::with_sigma(source, target, sigma)?);
        noise.push(e);
    }
    Ok(SyntheticSample {
        corrs,
        truth,
        seed: sample_seed,
        noise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rmse;

    #[test]
    fn transform_is_deterministic_and_valid() {
        for seed in [0, 1, 42, u64::MAX] {
            let a = random_rigid_transform(seed);
            assert_eq!(a, random_rigid_transform(seed));
            assert!(Rotation::new(*a.rotation.matrix()).is_ok());
            assert!(a.translation.amax() <= 1.0);
        }
        assert_ne!(random_rigid_transform(1), random_rigid_transform(2));
    }

    /// Mean angle of the uniform SO(3) angle density `(1 − cos θ)/π`, by
    /// composite Simpson quadrature.
    fn uniform_mean_angle() -> f64 {
        let n = 10_000;
        let h = std::f64::consts::PI / n as f64;
        let f = |t: f64| t * (1.0 - t.cos()) / std::f64::consts::PI;
        let mut s = f(0.0) + f(std::f64::consts::PI);
        for k in 1..n {
            s += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn rotation_angles_follow_uniform_distribution() {
        let oracle = uniform_mean_angle().to_degrees();
        let n = 100_000;
        let mean = (0..n).map(|s| random_rigid_transform(s).rotation.angle()).sum::<f64>() / n as f64;
        let mean = mean.to_degrees();
        assert!((mean - oracle).abs() < 1.0, "mean {mean} vs oracle {oracle}");
        assert!((mean - 126.9).abs() < 1.0, "mean {mean}");
    }

    #[test]
    fn small_band_shape() {
        let set = make_synthetic_set(&NoiseProfile::small(), 400, 30, 42).unwrap();
        assert_eq!(set.len(), 30);
        for s in &set {
            assert_eq!(s.corrs.len(), 400);
            for c in &s.corrs {
                let sig = c.sigma.unwrap();
                assert!(sig.iter().all(|v| (0.0001..=0.010).contains(v)));
            }
        }
    }

    #[test]
    fn noise_free_targets_are_exact() {
        let set = make_synthetic_set(&NoiseProfile::noise_free(), 50, 3, 9).unwrap();
        for s in &set {
            for c in &s.corrs {
                assert_eq!(c.target, s.truth.apply(&c.source));
            }
            assert!(rmse(&s.truth, &s.corrs).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn targets_are_reconstructible() {
        let set = make_synthetic_set(&NoiseProfile::large(), 40, 2, 1).unwrap();
        for s in &set {
            for (c, e) in s.corrs.iter().zip(&s.noise) {
                assert_eq!(c.target, s.truth.apply(&c.source) + e);
            }
        }
    }

    #[test]
    fn isotropic_profile_shares_sigma() {
        let p = NoiseProfile {
            anisotropic: false,
            ..NoiseProfile::average()
        };
        let s = &make_synthetic_set(&p, 20, 1, 3).unwrap()[0];
        for c in &s.corrs {
            let sig = c.sigma.unwrap();
            assert!(sig.x == sig.y && sig.y == sig.z);
        }
    }

    #[test]
    fn empirical_noise_matches_drawn_sigma() {
        // one fixed sigma, so the sample statistic is directly comparable
        let p = NoiseProfile::custom(0.015, 0.015).unwrap();
        let s = &make_synthetic_set(&p, 400, 1, 77).unwrap()[0];
        for axis in 0..3 {
            let var = s.noise.iter().map(|e| e[axis] * e[axis]).sum::<f64>() / s.noise.len() as f64;
            let sd = var.sqrt();
            assert!((sd - 0.015).abs() <= 0.15 * 0.015, "axis {axis}: {sd}");
        }
    }

    #[test]
    fn sets_are_deterministic_in_seed() {
        let a = make_synthetic_set(&NoiseProfile::small(), 30, 4, 5).unwrap();
        let b = make_synthetic_set(&NoiseProfile::small(), 30, 4, 5).unwrap();
        assert_eq!(a, b);
        let c = make_synthetic_set(&NoiseProfile::small(), 30, 4, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_counts_and_profiles() {
        assert!(make_synthetic_set(&NoiseProfile::small(), 2, 1, 0).is_err());
        assert!(make_synthetic_set(&NoiseProfile::small(), 10, 0, 0).is_err());
        assert!(NoiseProfile::custom(0.02, 0.01).is_err());
        assert!(NoiseProfile::custom(-0.01, 0.01).is_err());
    }

    #[test]
    fn band_parsing() {
        assert_eq!("Large".parse::<NoiseBand>().unwrap(), NoiseBand::Large);
        assert!("huge".parse::<NoiseBand>().is_err());
        assert_eq!(NoiseProfile::small().label(), "small");
    }
}
