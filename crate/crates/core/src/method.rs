use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;

use crate::closed_form::{horn_quaternion_with, HornOptions};
use crate::error::{RegError, Result};
use crate::geometry::{rmse, row_major, Correspondence};
use crate::kalman::{kf_register, FilterState, KfConfig, RegistrationResult, StateCovariance};
use crate::robust::{rf_register, RfConfig, UncertaintyModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Horn,
    Kf,
    Rf,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Horn, Method::Kf, Method::Rf];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Horn => "horn",
            Method::Kf => "kf",
            Method::Rf => "rf",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = RegError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "horn" => Ok(Method::Horn),
            "kf" => Ok(Method::Kf),
            "rf" => Ok(Method::Rf),
            other => Err(RegError::InvalidArgument(format!(
                "unknown method '{other}' (horn|kf|rf)"
            ))),
        }
    }
}

/// Settings for all three methods; each uses only its own part.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MethodConfig {
    pub horn: HornOptions,
    pub rf: RfConfig,
    pub uncertainty: UncertaintyModel,
}

impl MethodConfig {
    pub fn kf(&self) -> &KfConfig {
        &self.rf.kf
    }
}

/// Runs `method` on `corrs`. Horn reports zero steps and an empty trace.
pub fn register(method: Method, corrs: &[Correspondence], cfg: &MethodConfig) -> Result<RegistrationResult> {
    match method {
        Method::Horn => {
            let transform = horn_quaternion_with(corrs, &cfg.horn)?;
            Ok(RegistrationResult {
                rmse: rmse(&transform, corrs)?,
                steps: 0,
                trace: Vec::new(),
                under_determined: false,
                final_state: FilterState {
                    x: row_major(transform.rotation.matrix()),
                    p: StateCovariance::zeros(),
                },
                transform,
            })
        }
        Method::Kf => kf_register(corrs, cfg.kf()),
        Method::Rf => rf_register(corrs, &cfg.uncertainty, &cfg.rf),
    }
}

/// Drops per-point sigmas so the filters fall back to the configured measurement sigma.
pub fn strip_sigmas(corrs: &[Correspondence]) -> Vec<Correspondence> {
    corrs.iter().map(|c| Correspondence { sigma: None, ..*c }).collect()
}

/// Attaches one sigma triple to every correspondence.
pub fn with_uniform_sigma(corrs: &[Correspondence], sigma: Vector3<f64>) -> Result<Vec<Correspondence>> {
    corrs
        .iter()
        .map(|c| Correspondence::with_sigma(c.source, c.target, sigma))
        .collect()
}
