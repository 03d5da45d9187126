//! Registration as recursive least squares: a Kalman filter over the nine
//! rotation entries with identity dynamics.
//!
//! Each correspondence `(q, p)` is one measurement: `p = H(q)·x + e`, where
//! `x` holds `R` row by row and `H(q)` repeats `qᵀ` on a 3x9 block diagonal.
//! The filter runs on centroid-removed pairs; translation comes afterwards
//! from `t = p̄ − R q̄`.

use nalgebra::{Cholesky, Matrix3, SMatrix, SVector, Vector3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::closed_form::{center_pairs, recover_translation, CenteredPairs};
use crate::error::{RegError, Result};
use crate::geometry::{from_row_major, project_to_rotation, rmse, row_major, Correspondence, RigidTransform, Rotation};

pub type StateVector = SVector<f64, 9>;
pub type StateCovariance = SMatrix<f64, 9, 9>;
pub type ObservationMatrix = SMatrix<f64, 3, 9>;

/// Floor applied to each diagonal entry of a measurement covariance.
pub const COVARIANCE_FLOOR: f64 = 1e-12;

/// Largest accepted condition number of the innovation covariance.
pub const MAX_INNOVATION_CONDITION: f64 = 1e12;

/// Rotation-entry estimate and its error covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    pub x: StateVector,
    pub p: StateCovariance,
}

impl FilterState {
    /// `x = vec(I₃)`, `P = scale·I₉`.
    pub fn prior(scale: f64) -> Self {
        FilterState {
            x: row_major(&Matrix3::identity()),
            p: StateCovariance::identity() * scale,
        }
    }

    /// Largest `|P − Pᵀ|` entry.
    pub fn asymmetry(&self) -> f64 {
        (self.p - self.p.transpose()).amax()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        symmetrize(&self.p).symmetric_eigenvalues().min()
    }

    /// The state reshaped into a 3x3 matrix (not necessarily a rotation).
    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        from_row_major(&self.x)
    }
}

/// How the posterior covariance `P⁺ = (I − KH)P` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovarianceUpdate {
    /// `(I − KH)P(I − KH)ᵀ + KRKᵀ`, symmetric and PSD by construction.
    #[default]
    Joseph,
    /// `(I − KH)P`.
    Plain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KfConfig {
    /// Standard deviation of the per-step process noise; `Q = process_sigma²·I₉`.
    pub process_sigma: f64,
    /// Per-axis measurement standard deviation (meters) used when a
    /// correspondence carries no sigma of its own.
    pub measurement_sigma: Vector3<f64>,
    pub prior_covariance_scale: f64,
    pub sweeps: usize,
    /// Project the state onto SO(3) every this many steps; `0` projects only at the end.
    pub reproject_every: usize,
    pub shuffle_seed: Option<u64>,
    /// Run the 12-state variant that also estimates translation.
    pub estimate_translation: bool,
    pub covariance_update: CovarianceUpdate,
}

impl Default for KfConfig {
    fn default() -> Self {
        KfConfig {
            process_sigma: 1e-6,
            measurement_sigma: Vector3::repeat(0.01),
            prior_covariance_scale: 1e3,
            sweeps: 1,
            reproject_every: 0,
            shuffle_seed: None,
            estimate_translation: false,
            covariance_update: CovarianceUpdate::Joseph,
        }
    }
}

impl KfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.process_sigma >= 0.0 && self.process_sigma.is_finite()) {
            return Err(RegError::InvalidArgument(format!(
                "process_sigma must be >= 0, got {}",
                self.process_sigma
            )));
        }
        if !self.measurement_sigma.iter().all(|s| *s > 0.0 && s.is_finite()) {
            return Err(RegError::InvalidArgument(format!(
                "measurement sigmas must be > 0, got {:?}",
                self.measurement_sigma.as_slice()
            )));
        }
        if !(self.prior_covariance_scale > 0.0 && self.prior_covariance_scale.is_finite()) {
            return Err(RegError::InvalidArgument(format!(
                "prior_covariance_scale must be > 0, got {}",
                self.prior_covariance_scale
            )));
        }
        if self.sweeps == 0 {
            return Err(RegError::InvalidArgument("sweeps must be >= 1".into()));
        }
        Ok(())
    }

    pub fn process_variance(&self) -> f64 {
        self.process_sigma * self.process_sigma
    }

    /// Measurement covariance for one correspondence: `diag(σ²)` with each
    /// diagonal entry floored at [`COVARIANCE_FLOOR`].
    pub fn measurement_covariance(&self, point_sigma: Option<&Vector3<f64>>) -> Matrix3<f64> {
        let s = point_sigma.unwrap_or(&self.measurement_sigma);
        Matrix3::from_diagonal(&s.map(|v| (v * v).max(COVARIANCE_FLOOR)))
    }
}

/// One entry of the per-step diagnostic trace.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub innovation_norm: f64,
    pub trace_p: f64,
    /// Posterior state after this step, before any projection.
    pub x: [f64; 9],
    /// Effective robustness bound (robust filter only).
    pub theta: Option<f64>,
    /// Smallest eigenvalue of the existence-condition matrix (robust filter, diagnostics on).
    pub existence_margin: Option<f64>,
    /// Spectral radius of the accumulated closed-loop transition (robust filter, diagnostics on).
    pub closed_loop_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationResult {
    pub transform: RigidTransform,
    /// Meters.
    pub rmse: f64,
    pub steps: usize,
    pub trace: Vec<StepRecord>,
    /// Fewer than three correspondences: the recursion ran but the rotation is not pinned down.
    pub under_determined: bool,
    /// Rotation block of the filter state at the end of the run, before the final projection.
    pub final_state: FilterState,
}

/// `H(q)`: `qᵀ` in columns 0–2 of row 0, 3–5 of row 1, 6–8 of row 2.
pub fn build_observation_matrix(q: &Vector3<f64>) -> ObservationMatrix {
    block_observation(q)
}

pub(crate) fn block_observation(v: &Vector3<f64>) -> ObservationMatrix {
    let mut h = ObservationMatrix::zeros();
    for row in 0..3 {
        for col in 0..3 {
            h[(row, 3 * row + col)] = v[col];
        }
    }
    h
}

pub(crate) fn symmetrize<const D: usize>(m: &SMatrix<f64, D, D>) -> SMatrix<f64, D, D> {
    (m + m.transpose()) * 0.5
}

/// Measurement update shared by every filter in the crate.
///
/// `p` is the predicted covariance. Returns the posterior, the innovation, and
/// the gain.
#[allow(clippy::type_complexity)]
pub(crate) fn kalman_update<const D: usize>(
    x: &SVector<f64, D>,
    p: &SMatrix<f64, D, D>,
    h: &SMatrix<f64, 3, D>,
    z: &Vector3<f64>,
    r: &Matrix3<f64>,
    form: CovarianceUpdate,
) -> Result<(SVector<f64, D>, SMatrix<f64, D, D>, Vector3<f64>, SMatrix<f64, D, 3>)> {
    let s = symmetrize(&(h * p * h.transpose() + r));
    check_innovation_covariance(&s)?;
    let chol = Cholesky::new(s)
        .ok_or_else(|| RegError::NumericalFailure("innovation covariance is not positive definite".into()))?;
    // K = P Hᵀ S⁻¹ = (S⁻¹ H P)ᵀ
    let gain = chol.solve(&(h * p)).transpose();
    let innovation = z - h * x;
    let x_post = x + gain * innovation;
    let i_kh = SMatrix::<f64, D, D>::identity() - gain * h;
    let p_post = match form {
        CovarianceUpdate::Joseph => i_kh * p * i_kh.transpose() + gain * r * gain.transpose(),
        CovarianceUpdate::Plain => i_kh * p,
    };
    Ok((x_post, symmetrize(&p_post), innovation, gain))
}

fn check_innovation_covariance(s: &Matrix3<f64>) -> Result<()> {
    if !s.iter().all(|v| v.is_finite()) {
        return Err(RegError::NumericalFailure("innovation covariance is not finite".into()));
    }
    let eig = s.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > 0.0) || hi / lo > MAX_INNOVATION_CONDITION {
        return Err(RegError::NumericalFailure(format!(
            "innovation covariance is ill-conditioned (eigenvalues {lo:e}..{hi:e})"
        )));
    }
    Ok(())
}

/// One predict/correct cycle with `A = I₉`, `Q = process_sigma²·I₉`.
pub fn kf_step(
    state: &FilterState,
    q: &Vector3<f64>,
    z: &Vector3<f64>,
    cfg: &KfConfig,
    r_k: &Matrix3<f64>,
) -> Result<FilterState> {
    kf_step_detailed(state, q, z, cfg, r_k).map(|(s, _)| s)
}

/// [`kf_step`], also returning the innovation `z − Hx`.
pub fn kf_step_detailed(
    state: &FilterState,
    q: &Vector3<f64>,
    z: &Vector3<f64>,
    cfg: &KfConfig,
    r_k: &Matrix3<f64>,
) -> Result<(FilterState, Vector3<f64>)> {
    let p_pred = state.p + StateCovariance::identity() * cfg.process_variance();
    let h = build_observation_matrix(q);
    let (x, p, innovation, _) = kalman_update(&state.x, &p_pred, &h, z, r_k, cfg.covariance_update)?;
    Ok((FilterState { x, p }, innovation))
}

/// Measurement fed to a recursive step.
pub(crate) struct Measurement<'a> {
    pub q: &'a Vector3<f64>,
    pub z: &'a Vector3<f64>,
    pub sigma: Option<&'a Vector3<f64>>,
    pub r: Matrix3<f64>,
}

/// Drives a 9-state recursion over centered pairs and assembles the result.
pub(crate) fn run_recursive<F>(corrs: &[Correspondence], cfg: &KfConfig, mut step: F) -> Result<RegistrationResult>
where
    F: FnMut(usize, &FilterState, &Measurement<'_>) -> Result<(FilterState, StepRecord)>,
{
    cfg.validate()?;
    let cp = center_pairs(corrs)?;
    let order = visiting_order(corrs.len(), cfg.shuffle_seed);
    let mut state = FilterState::prior(cfg.prior_covariance_scale);
    let mut trace = Vec::with_capacity(order.len() * cfg.sweeps);
    let mut count = 0usize;
    for _ in 0..cfg.sweeps {
        for &i in &order {
            let m = Measurement {
                q: &cp.source_centered[i],
                z: &cp.target_centered[i],
                sigma: corrs[i].sigma.as_ref(),
                r: cfg.measurement_covariance(corrs[i].sigma.as_ref()),
            };
            let (next, record) = step(count, &state, &m)?;
            state = next;
            trace.push(record);
            count += 1;
            if cfg.reproject_every > 0 && count.is_multiple_of(cfg.reproject_every) {
                reproject(&mut state.x, &mut state.p, cfg)?;
            }
        }
    }
    let rotation = project_to_rotation(&state.rotation_matrix())?;
    let transform = RigidTransform::rigid(rotation, recover_translation(&rotation, &cp));
    Ok(RegistrationResult {
        rmse: rmse(&transform, corrs)?,
        transform,
        steps: count,
        trace,
        under_determined: corrs.len() < 3,
        final_state: state,
    })
}

fn visiting_order(n: usize, seed: Option<u64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    if let Some(seed) = seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    order
}

/// Mid-run repair: snap the rotation entries onto SO(3) and widen their
/// variance by `process_sigma²`.
fn reproject<const D: usize>(x: &mut SVector<f64, D>, p: &mut SMatrix<f64, D, D>, cfg: &KfConfig) -> Result<()> {
    let m = Matrix3::from_row_slice(&x.as_slice()[..9]);
    let r = project_to_rotation(&m)?;
    x.fixed_rows_mut::<9>(0).copy_from(&row_major(r.matrix()));
    for i in 0..9 {
        p[(i, i)] += cfg.process_variance();
    }
    Ok(())
}

pub(crate) fn record(step: usize, state: &FilterState, innovation: &Vector3<f64>) -> StepRecord {
    StepRecord {
        step,
        innovation_norm: innovation.norm(),
        trace_p: state.p.trace(),
        x: state.x.into(),
        theta: None,
        existence_margin: None,
        closed_loop_radius: None,
    }
}

/// Kalman-filter registration: center, recurse over every pair `sweeps`
/// times, project onto SO(3), recover translation.
pub fn kf_register(corrs: &[Correspondence], cfg: &KfConfig) -> Result<RegistrationResult> {
    if cfg.estimate_translation {
        return kf_register_with_translation(corrs, cfg);
    }
    run_recursive(corrs, cfg, |k, state, m| {
        let (next, innovation) = kf_step_detailed(state, m.q, m.z, cfg, &m.r)?;
        Ok((next, record(k, &next, &innovation)))
    })
}

type State12 = SVector<f64, 12>;
type Cov12 = SMatrix<f64, 12, 12>;

/// 12-state variant on raw (uncentered) pairs: `p = H(q)·r + t`.
///
/// Starts from `R₀ = I`, `t₀ = p̄ − q̄`.
fn kf_register_with_translation(corrs: &[Correspondence], cfg: &KfConfig) -> Result<RegistrationResult> {
    cfg.validate()?;
    let cp: CenteredPairs = center_pairs(corrs)?;
    let mut x = State12::zeros();
    x.fixed_rows_mut::<9>(0).copy_from(&row_major(&Matrix3::identity()));
    x.fixed_rows_mut::<3>(9)
        .copy_from(&(cp.target_centroid - cp.source_centroid));
    let mut p = Cov12::identity() * cfg.prior_covariance_scale;
    let order = visiting_order(corrs.len(), cfg.shuffle_seed);
    let mut trace = Vec::with_capacity(order.len() * cfg.sweeps);
    let mut count = 0usize;
    for _ in 0..cfg.sweeps {
        for &i in &order {
            let c = &corrs[i];
            let mut h = SMatrix::<f64, 3, 12>::zeros();
            h.fixed_view_mut::<3, 9>(0, 0)
                .copy_from(&build_observation_matrix(&c.source.coords));
            h.fixed_view_mut::<3, 3>(0, 9).fill_with_identity();
            let p_pred = p + Cov12::identity() * cfg.process_variance();
            let r = cfg.measurement_covariance(c.sigma.as_ref());
            let (xn, pn, innovation, _) = kalman_update(&x, &p_pred, &h, &c.target.coords, &r, cfg.covariance_update)?;
            x = xn;
            p = pn;
            trace.push(StepRecord {
                step: count,
                innovation_norm: innovation.norm(),
                trace_p: p.trace(),
                x: x.fixed_rows::<9>(0).into_owned().into(),
                theta: None,
                existence_margin: None,
                closed_loop_radius: None,
            });
            count += 1;
            if cfg.reproject_every > 0 && count.is_multiple_of(cfg.reproject_every) {
                reproject(&mut x, &mut p, cfg)?;
            }
        }
    }
    let rot_state = x.fixed_rows::<9>(0).into_owned();
    let rotation: Rotation = project_to_rotation(&from_row_major(&rot_state))?;
    let transform = RigidTransform::rigid(rotation, x.fixed_rows::<3>(9).into_owned());
    Ok(RegistrationResult {
        rmse: rmse(&transform, corrs)?,
        transform,
        steps: count,
        trace,
        under_determined: corrs.len() < 3,
        final_state: FilterState {
            x: rot_state,
            p: p.fixed_view::<9, 9>(0, 0).into_owned(),
        },
    })
}
