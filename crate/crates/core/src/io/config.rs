//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored; unknown keys are an error. Lengths
//! carry an `_mm` suffix and are converted to meters. List values are
//! comma separated.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;

use crate::closed_form::ScaleEstimator;
use crate::error::{RegError, Result};
use crate::kalman::CovarianceUpdate;
use crate::method::{Method, MethodConfig};
use crate::robust::DeltaHRule;
use crate::sensor::{CameraIntrinsics, DEFAULT_LEVEL_OFFSET, DEFAULT_MERGE_EPSILON};
use crate::synth::{NoiseBand, NoiseProfile};

use super::MM_PER_M;

/// Environment variable naming a config file used when none is given explicitly.
pub const CONFIG_ENV: &str = "REGFILT_CONFIG";

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Method for single registrations.
    pub method: Method,
    /// Methods compared by the benchmark.
    pub methods: Vec<Method>,
    pub methods_config: MethodConfig,
    pub noise: Vec<NoiseBand>,
    /// Bounds for the `custom` band (meters).
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub anisotropic: bool,
    pub points: usize,
    pub samples: usize,
    pub seed: u64,
    pub use_sigmas: bool,
    pub intrinsics: Option<CameraIntrinsics>,
    pub level_offset: usize,
    pub merge_epsilon: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            method: Method::Rf,
            methods: Method::ALL.to_vec(),
            methods_config: MethodConfig::default(),
            noise: vec![NoiseBand::Small, NoiseBand::Average, NoiseBand::Large],
            sigma_min: 0.001,
            sigma_max: 0.005,
            anisotropic: true,
            points: 400,
            samples: 30,
            seed: DEFAULT_SEED,
            use_sigmas: true,
            intrinsics: None,
            level_offset: DEFAULT_LEVEL_OFFSET,
            merge_epsilon: DEFAULT_MERGE_EPSILON,
        }
    }
}

pub const KEYS: &[&str] = &[
    "method",
    "methods",
    "seed",
    "points",
    "samples",
    "noise",
    "sigma_min_mm",
    "sigma_max_mm",
    "anisotropic",
    "use_sigmas",
    "process_sigma",
    "measurement_sigma_mm",
    "prior_covariance_scale",
    "sweeps",
    "reproject_every",
    "shuffle_seed",
    "estimate_translation",
    "covariance_update",
    "theta",
    "theta_backoff",
    "max_backoffs",
    "theta_margin",
    "carry_theta",
    "diagnostics",
    "sigma_a",
    "delta_h",
    "estimate_scale",
    "scale_estimator",
    "intrinsics",
    "level_offset",
    "merge_epsilon",
];

impl RunConfig {
    /// Defaults, then the explicit file if given, else the file named by
    /// `REGFILT_CONFIG` if that is set.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let path: Option<PathBuf> = match explicit {
            Some(p) => Some(p.to_path_buf()),
            None => std::env::var_os(CONFIG_ENV)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from),
        };
        if let Some(path) = path {
            cfg.merge_file(&path)?;
        }
        Ok(cfg)
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| RegError::io(path, e))?;
        self.merge_str(&text)
    }

    pub fn merge_str(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| RegError::Parse {
                line: i + 1,
                msg: format!("expected 'key = value', got '{line}'"),
            })?;
            self.set(key.trim(), value.trim()).map_err(|e| match e {
                RegError::Config(msg) => RegError::Parse { line: i + 1, msg },
                other => other,
            })?;
        }
        Ok(())
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let rf = &mut self.methods_config.rf;
        match key {
            "method" => self.method = parse_with(key, value, |v| v.parse())?,
            "methods" => self.methods = parse_list(key, value, |v| v.parse())?,
            "seed" => self.seed = parse_num(key, value)?,
            "points" => self.points = parse_num(key, value)?,
            "samples" => self.samples = parse_num(key, value)?,
            "noise" => self.noise = parse_list(key, value, |v| v.parse())?,
            "sigma_min_mm" => self.sigma_min = parse_num::<f64>(key, value)? / MM_PER_M,
            "sigma_max_mm" => self.sigma_max = parse_num::<f64>(key, value)? / MM_PER_M,
            "anisotropic" => self.anisotropic = parse_bool(key, value)?,
            "use_sigmas" => self.use_sigmas = parse_bool(key, value)?,
            "process_sigma" => rf.kf.process_sigma = parse_num(key, value)?,
            "measurement_sigma_mm" => {
                let v: Vec<f64> = parse_list(key, value, |s| s.parse::<f64>().map_err(|e| e.to_string()))?;
                rf.kf.measurement_sigma = match v.as_slice() {
                    [s] => Vector3::repeat(*s),
                    [x, y, z] => Vector3::new(*x, *y, *z),
                    _ => return Err(config_err(key, "expects 1 or 3 values")),
                } / MM_PER_M;
            }
            "prior_covariance_scale" => rf.kf.prior_covariance_scale = parse_num(key, value)?,
            "sweeps" => rf.kf.sweeps = parse_num(key, value)?,
            "reproject_every" => rf.kf.reproject_every = parse_num(key, value)?,
            "shuffle_seed" => {
                rf.kf.shuffle_seed = match value {
                    "none" | "" => None,
                    v => Some(parse_num(key, v)?),
                }
            }
            "estimate_translation" => rf.kf.estimate_translation = parse_bool(key, value)?,
            "covariance_update" => {
                rf.kf.covariance_update = match value {
                    "joseph" => CovarianceUpdate::Joseph,
                    "plain" => CovarianceUpdate::Plain,
                    _ => return Err(config_err(key, "expects joseph|plain")),
                }
            }
            "theta" => rf.theta = parse_num(key, value)?,
            "theta_backoff" => rf.theta_backoff = parse_num(key, value)?,
            "max_backoffs" => rf.max_backoffs = parse_num(key, value)?,
            "theta_margin" => rf.theta_margin = parse_num(key, value)?,
            "carry_theta" => rf.carry_theta = parse_bool(key, value)?,
            "diagnostics" => rf.diagnostics = parse_bool(key, value)?,
            "sigma_a" => {
                let v: Vec<f64> = parse_list(key, value, |s| s.parse::<f64>().map_err(|e| e.to_string()))?;
                self.methods_config.uncertainty.sigma_a = match v.as_slice() {
                    [s] => [*s; 9],
                    s if s.len() == 9 => std::array::from_fn(|i| s[i]),
                    _ => return Err(config_err(key, "expects 1 or 9 values")),
                };
            }
            "delta_h" => {
                self.methods_config.uncertainty.delta_h = match value {
                    "zero" => DeltaHRule::Zero,
                    "shifted_source" => DeltaHRule::ShiftedSource,
                    _ => return Err(config_err(key, "expects zero|shifted_source")),
                }
            }
            "estimate_scale" => self.methods_config.horn.estimate_scale = parse_bool(key, value)?,
            "scale_estimator" => {
                self.methods_config.horn.scale_estimator = match value {
                    "ratio_of_sums" => ScaleEstimator::RatioOfSums,
                    "mean_of_ratios" => ScaleEstimator::MeanOfRatios,
                    _ => return Err(config_err(key, "expects ratio_of_sums|mean_of_ratios")),
                }
            }
            "intrinsics" => {
                self.intrinsics = Some(parse_intrinsics(value).map_err(|e| config_err(key, &e.to_string()))?)
            }
            "level_offset" => self.level_offset = parse_num(key, value)?,
            "merge_epsilon" => self.merge_epsilon = parse_num(key, value)?,
            _ => return Err(RegError::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Noise profiles for the selected bands.
    pub fn scenarios(&self) -> Result<Vec<NoiseProfile>> {
        self.noise
            .iter()
            .map(|band| {
                let mut p = match NoiseProfile::from_band(*band) {
                    Some(p) => p,
                    None => NoiseProfile::custom(self.sigma_min, self.sigma_max)?,
                };
                p.anisotropic = self.anisotropic;
                Ok(p)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.methods_config.rf.validate()?;
        self.methods_config.uncertainty.validate()?;
        if self.methods.is_empty() {
            return Err(RegError::Config("methods must not be empty".into()));
        }
        if self.noise.is_empty() {
            return Err(RegError::Config("noise must not be empty".into()));
        }
        if self.points < 3 {
            return Err(RegError::Config(format!("points must be >= 3, got {}", self.points)));
        }
        if self.samples == 0 {
            return Err(RegError::Config("samples must be >= 1".into()));
        }
        self.scenarios().map(|_| ())
    }
}

fn config_err(key: &str, msg: &str) -> RegError {
    RegError::Config(format!("{key}: {msg}"))
}

fn parse_with<T, E: ToString>(key: &str, value: &str, f: impl Fn(&str) -> std::result::Result<T, E>) -> Result<T> {
    f(value).map_err(|e| config_err(key, &e.to_string()))
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e: T::Err| config_err(key, &format!("cannot parse '{value}': {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(config_err(key, &format!("expects a boolean, got '{value}'"))),
    }
}

fn parse_list<T, E: ToString>(key: &str, value: &str, f: impl Fn(&str) -> std::result::Result<T, E>) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| parse_with(key, v, &f))
        .collect()
}

/// `fx,fy,cx,cy` in pixels.
pub fn parse_intrinsics(value: &str) -> Result<CameraIntrinsics> {
    let v = parse_floats(value, 4, "intrinsics")?;
    CameraIntrinsics::new(v[0], v[1], v[2], v[3])
}

/// Exactly `n` comma-separated finite numbers.
pub fn parse_floats(value: &str, n: usize, what: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = value
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| RegError::InvalidArgument(format!("{what}: cannot parse '{value}': {e}")))?;
    if v.len() != n || !v.iter().all(|x| x.is_finite()) {
        return Err(RegError::InvalidArgument(format!(
            "{what}: expected {n} finite comma-separated values, got '{value}'"
        )));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_key_is_accepted() {
        let samples = [
            ("method", "kf"),
            ("methods", "horn,rf"),
            ("seed", "7"),
            ("points", "100"),
            ("samples", "5"),
            ("noise", "small,custom"),
            ("sigma_min_mm", "1"),
            ("sigma_max_mm", "2"),
            ("anisotropic", "false"),
            ("use_sigmas", "no"),
            ("process_sigma", "0"),
            ("measurement_sigma_mm", "5,6,7"),
            ("prior_covariance_scale", "100"),
            ("sweeps", "2"),
            ("reproject_every", "50"),
            ("shuffle_seed", "3"),
            ("estimate_translation", "true"),
            ("covariance_update", "plain"),
            ("theta", "0.001"),
            ("theta_backoff", "0.25"),
            ("max_backoffs", "4"),
            ("theta_margin", "0.9"),
            ("carry_theta", "off"),
            ("diagnostics", "on"),
            ("sigma_a", "0.001"),
            ("delta_h", "zero"),
            ("estimate_scale", "true"),
            ("scale_estimator", "mean_of_ratios"),
            ("intrinsics", "525,525,319.5,239.5"),
            ("level_offset", "4"),
            ("merge_epsilon", "1e-5"),
        ];
        assert_eq!(samples.len(), KEYS.len());
        let mut cfg = RunConfig::default();
        for (k, v) in samples {
            assert!(KEYS.contains(&k));
            cfg.set(k, v).unwrap_or_else(|e| panic!("{k}: {e}"));
        }
        cfg.validate().unwrap();
        assert_eq!(cfg.method, Method::Kf);
        assert_eq!(cfg.methods, vec![Method::Horn, Method::Rf]);
        assert_eq!(cfg.seed, 7);
        assert_eq!(
            cfg.methods_config.rf.kf.measurement_sigma,
            Vector3::new(0.005, 0.006, 0.007)
        );
        assert_eq!(cfg.methods_config.rf.kf.shuffle_seed, Some(3));
        assert_eq!(cfg.methods_config.uncertainty.sigma_a, [0.001; 9]);
        let s = cfg.scenarios().unwrap();
        assert_eq!(s[1].sigma_min, 0.001);
        assert!(!s[0].anisotropic);
    }

    #[test]
    fn unknown_key_and_bad_values() {
        let mut cfg = RunConfig::default();
        assert!(matches!(cfg.set("tehta", "1"), Err(RegError::Config(_))));
        assert!(cfg.set("theta", "abc").is_err());
        assert!(cfg.set("sweeps", "-1").is_err());
        assert!(cfg.set("measurement_sigma_mm", "1,2").is_err());
        assert!(cfg.set("method", "icp").is_err());
        assert!(cfg.set("anisotropic", "maybe").is_err());
    }

    #[test]
    fn file_text_with_comments() {
        let mut cfg = RunConfig::default();
        cfg.merge_str("# settings\n\ntheta = 0.002  # tighter\nseed=9\n")
            .unwrap();
        assert_eq!(cfg.methods_config.rf.theta, 0.002);
        assert_eq!(cfg.seed, 9);
        let err = cfg.merge_str("theta = 1\nbogus = 2\n").unwrap_err();
        assert!(matches!(err, RegError::Parse { line: 2, .. }), "{err:?}");
        assert!(matches!(
            cfg.merge_str("no equals sign"),
            Err(RegError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn intrinsics_parsing() {
        let k = parse_intrinsics("500, 500, 320, 240").unwrap();
        assert_eq!((k.fx, k.cy), (500.0, 240.0));
        assert!(parse_intrinsics("500,500,320").is_err());
        assert!(parse_intrinsics("0,500,320,240").is_err());
    }
}
