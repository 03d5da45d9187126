//! Robust H∞ registration under norm-bounded model uncertainty.
//!
//! The recursion is the θ-bounded H∞ filter with the measurement and process
//! covariances inflated by the structured uncertainty `ΔH`, `ΔA`:
//!
//! ```text
//! P⁻ = P + Q + ΔA P ΔAᵀ
//! Pₙ = P⁻ − P⁻Hᵀ(HP⁻Hᵀ + R)⁻¹HP⁻         (nominal Kalman update)
//! R̃  = R + ΔH Pₙ ΔHᵀ                   (diagonal floored)
//! J  = (P⁻)⁻¹ − θI + Hᵀ R̃⁻¹ H           must be positive definite
//! P⁺ = J⁻¹,   K = P⁺ Hᵀ R̃⁻¹,   x⁺ = x + K (z − H x)
//! ```
//!
//! With `θ = 0` and no uncertainty every line collapses onto the Kalman step,
//! and the implementation goes through the very same update routine, so the
//! two filters agree to the last bit in that case.
//!
//! θ is accepted while `θ ≤ m·λ_min((P⁻)⁻¹ + HᵀR̃⁻¹H)` for the margin `m`,
//! which keeps `J` away from singular; otherwise it is multiplied by
//! `theta_backoff`, at most `max_backoffs` times per step. With `carry_theta`
//! the next step starts from the θ last accepted.

use nalgebra::{Cholesky, DMatrix, Matrix3, SMatrix, Vector3};

use crate::error::{RegError, Result};
use crate::geometry::Correspondence;
use crate::kalman::{
    block_observation, build_observation_matrix, kalman_update, record, run_recursive, symmetrize, FilterState,
    KfConfig, ObservationMatrix, RegistrationResult, StateCovariance, COVARIANCE_FLOOR,
};
use crate::sensor::PointSigma;

/// Threshold on the smallest eigenvalue of the existence-condition matrix.
pub const EXISTENCE_EPSILON: f64 = 1e-12;

/// How the observation perturbation `ΔH` is built from a source point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeltaHRule {
    /// `ΔH = 0`.
    Zero,
    /// Block diagonal with rows `(q_x + σ_x, q_y + σ_y, q_z + σ_z)`.
    #[default]
    ShiftedSource,
}

/// Structured uncertainty of the process (`ΔA = diag(σ_A)`) and observation
/// (`ΔH`) models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintyModel {
    pub sigma_a: [f64; 9],
    pub delta_h: DeltaHRule,
}

impl Default for UncertaintyModel {
    fn default() -> Self {
        Self::from_kf(&KfConfig::default())
    }
}

impl UncertaintyModel {
    /// No uncertainty at all; the robust filter then reduces to the Kalman filter at `θ = 0`.
    pub fn zero() -> Self {
        UncertaintyModel {
            sigma_a: [0.0; 9],
            delta_h: DeltaHRule::Zero,
        }
    }

    /// `σ_A = process_sigma` on every entry, shifted-source `ΔH`.
    pub fn from_kf(cfg: &KfConfig) -> Self {
        UncertaintyModel {
            sigma_a: [cfg.process_sigma; 9],
            delta_h: DeltaHRule::ShiftedSource,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma_a.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(RegError::InvalidArgument("sigma_A entries must be >= 0".into()));
        }
        Ok(())
    }

    pub fn delta_a(&self) -> StateCovariance {
        StateCovariance::from_diagonal(&self.sigma_a.into())
    }

    pub fn delta_h(&self, q: &Vector3<f64>, s: &PointSigma) -> ObservationMatrix {
        match self.delta_h {
            DeltaHRule::Zero => ObservationMatrix::zeros(),
            DeltaHRule::ShiftedSource => build_delta_h(q, s),
        }
    }

    /// Factorization `[ΔA; ΔH] = [M1; M2]·Γ·N` with `M1 = ΔA`, `M2 = ΔH`,
    /// `N = I₉`, checked to reproduce the stack at `Γ = I`.
    pub fn factorize(&self, q: &Vector3<f64>, s: &PointSigma) -> Result<StructuredUncertainty> {
        self.validate()?;
        let f = StructuredUncertainty {
            m1: self.delta_a(),
            m2: self.delta_h(q, s),
            n: StateCovariance::identity(),
        };
        let stacked = f.stacked();
        let rebuilt = f.perturbation(&StateCovariance::identity())?;
        if (stacked - rebuilt).amax() > 1e-12 {
            return Err(RegError::NumericalFailure(
                "uncertainty factorization does not reproduce [ΔA; ΔH]".into(),
            ));
        }
        Ok(f)
    }
}

/// `[M1; M2]`, `N` of the norm-bounded uncertainty with `p = 9`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredUncertainty {
    pub m1: SMatrix<f64, 9, 9>,
    pub m2: SMatrix<f64, 3, 9>,
    pub n: SMatrix<f64, 9, 9>,
}

impl StructuredUncertainty {
    /// `[ΔA; ΔH]` stacked into a 12x9 matrix.
    pub fn stacked(&self) -> SMatrix<f64, 12, 9> {
        let mut s = SMatrix::<f64, 12, 9>::zeros();
        s.fixed_view_mut::<9, 9>(0, 0).copy_from(&self.m1);
        s.fixed_view_mut::<3, 9>(9, 0).copy_from(&self.m2);
        s
    }

    /// `[M1; M2]·Γ·N` for an admissible `Γ` (`ΓᵀΓ ≤ I`).
    pub fn perturbation(&self, gamma: &SMatrix<f64, 9, 9>) -> Result<SMatrix<f64, 12, 9>> {
        let g = DMatrix::from_column_slice(9, 9, gamma.as_slice());
        if !validate_gamma_bound(&g) {
            return Err(RegError::InvalidArgument("Γ violates ΓᵀΓ ≤ I".into()));
        }
        let mut m = SMatrix::<f64, 12, 9>::zeros();
        m.fixed_view_mut::<9, 9>(0, 0).copy_from(&self.m1);
        m.fixed_view_mut::<3, 9>(9, 0).copy_from(&self.m2);
        Ok(m * gamma * self.n)
    }
}

/// Block-diagonal `ΔH` whose rows are `(q + σ)ᵀ`.
pub fn build_delta_h(q: &Vector3<f64>, s: &PointSigma) -> ObservationMatrix {
    block_observation(&(q + s.to_vector()))
}

/// `true` iff every eigenvalue of `ΓᵀΓ` is at most `1 + 1e-12`.
pub fn validate_gamma_bound(gamma: &DMatrix<f64>) -> bool {
    if gamma.is_empty() {
        return true;
    }
    let gtg = gamma.transpose() * gamma;
    gtg.symmetric_eigenvalues().max() <= 1.0 + 1e-12
}

/// `true` iff the spectral radius of `a` is below `1 − 1e-12`.
pub fn estimator_stability(a: &StateCovariance) -> bool {
    spectral_radius(a) < 1.0 - 1e-12
}

pub fn spectral_radius(a: &StateCovariance) -> f64 {
    a.complex_eigenvalues().iter().map(|c| c.norm()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RfConfig {
    /// H∞ performance bound.
    pub theta: f64,
    pub kf: KfConfig,
    /// Factor applied to θ when the existence condition fails.
    pub theta_backoff: f64,
    pub max_backoffs: usize,
    /// θ is accepted only while `θ ≤ theta_margin · λ_min(P⁻¹ + HᵀR̃⁻¹H)`.
    pub theta_margin: f64,
    /// Start each step from the θ accepted at the previous one.
    pub carry_theta: bool,
    /// Record the existence margin and closed-loop spectral radius per step.
    pub diagnostics: bool,
}

impl Default for RfConfig {
    fn default() -> Self {
        RfConfig {
            theta: 0.01,
            kf: KfConfig::default(),
            theta_backoff: 0.5,
            max_backoffs: 8,
            theta_margin: 0.5,
            carry_theta: true,
            diagnostics: false,
        }
    }
}

impl RfConfig {
    pub fn validate(&self) -> Result<()> {
        self.kf.validate()?;
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return Err(RegError::InvalidArgument(format!(
                "theta must be >= 0, got {}",
                self.theta
            )));
        }
        if !(self.theta_margin > 0.0 && self.theta_margin <= 1.0) {
            return Err(RegError::InvalidArgument(format!(
                "theta_margin must lie in (0, 1], got {}",
                self.theta_margin
            )));
        }
        if !(self.theta_backoff > 0.0 && self.theta_backoff < 1.0) {
            return Err(RegError::InvalidArgument(format!(
                "theta_backoff must lie in (0, 1), got {}",
                self.theta_backoff
            )));
        }
        Ok(())
    }
}

/// Everything one robust step produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RfStepOutcome {
    pub state: FilterState,
    pub innovation: Vector3<f64>,
    /// θ actually used after any backoff.
    pub theta: f64,
    pub backoffs: usize,
    /// Existence-condition matrix `(P⁻)⁻¹ − θI + HᵀR̃⁻¹H` at the accepted θ;
    /// `None` when the predicted covariance is singular.
    pub information: Option<StateCovariance>,
    /// `I − K H`.
    pub closed_loop: StateCovariance,
}

pub fn rf_step(
    state: &FilterState,
    q: &Vector3<f64>,
    z: &Vector3<f64>,
    unc: &UncertaintyModel,
    cfg: &RfConfig,
    r_k: &Matrix3<f64>,
) -> Result<FilterState> {
    let sigma = PointSigma::new(r_k[(0, 0)].sqrt(), r_k[(1, 1)].sqrt(), r_k[(2, 2)].sqrt())?;
    rf_step_detailed(state, q, z, &sigma, unc, cfg, r_k, 0).map(|o| o.state)
}

/// Robust step with an explicit point sigma for `ΔH`. `step` only labels errors.
#[allow(clippy::too_many_arguments)]
pub fn rf_step_detailed(
    state: &FilterState,
    q: &Vector3<f64>,
    z: &Vector3<f64>,
    sigma: &PointSigma,
    unc: &UncertaintyModel,
    cfg: &RfConfig,
    r_k: &Matrix3<f64>,
    step: usize,
) -> Result<RfStepOutcome> {
    let delta_a = unc.delta_a();
    let p_pred = symmetrize(
        &(state.p + StateCovariance::identity() * cfg.kf.process_variance() + delta_a * state.p * delta_a.transpose()),
    );
    let dh = unc.delta_h(q, sigma);
    let h = build_observation_matrix(q);
    let mut r_tilde = if dh.iter().all(|v| *v == 0.0) {
        *r_k
    } else {
        // Inflate with the covariance after the nominal update so a diffuse
        // prior does not drown the first measurements.
        let (_, p_nominal, _, _) = kalman_update(&state.x, &p_pred, &h, z, r_k, cfg.kf.covariance_update)?;
        symmetrize(&(r_k + dh * p_nominal * dh.transpose()))
    };
    for i in 0..3 {
        r_tilde[(i, i)] = r_tilde[(i, i)].max(COVARIANCE_FLOOR);
    }
    let r_inv = r_tilde
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or_else(|| RegError::NumericalFailure("inflated measurement covariance is singular".into()))?;
    let g = symmetrize(&(h.transpose() * r_inv * h));
    let p_inv = Cholesky::new(p_pred).map(|c| symmetrize(&c.inverse()));

    let mut theta = cfg.theta;
    let mut backoffs = 0;
    let information = loop {
        match existence(&p_pred, p_inv.as_ref(), &g, theta, cfg.theta_margin) {
            Existence::Holds(j) => break j,
            Existence::Fails if backoffs < cfg.max_backoffs => {
                theta *= cfg.theta_backoff;
                backoffs += 1;
            }
            Existence::Fails => return Err(RegError::RobustnessInfeasible { step, theta }),
        }
    };

    let eig = p_pred.symmetric_eigen();
    let (x, p, innovation, gain) = if theta == 0.0 {
        kalman_update(&state.x, &p_pred, &h, z, &r_tilde, cfg.kf.covariance_update)?
    } else if theta * eig.eigenvalues.max() < 1.0 {
        // J⁻¹ is the Kalman update of P_θ = ((P⁻)⁻¹ − θI)⁻¹. Built from the
        // eigenpairs of P⁻ it stays symmetric and PSD across many decades.
        let scaled = eig.eigenvalues.map(|l| l.max(0.0) / (1.0 - theta * l.max(0.0)));
        let p_theta =
            symmetrize(&(eig.eigenvectors * StateCovariance::from_diagonal(&scaled) * eig.eigenvectors.transpose()));
        kalman_update(&state.x, &p_theta, &h, z, &r_tilde, cfg.kf.covariance_update)?
    } else {
        // (P⁻)⁻¹ − θI is indefinite but J is not: invert J directly.
        let j = information.ok_or_else(|| RegError::NumericalFailure("singular predicted covariance".into()))?;
        let p_post = Cholesky::new(j)
            .map(|c| symmetrize(&c.inverse()))
            .ok_or_else(|| RegError::NumericalFailure("existence matrix is not invertible".into()))?;
        let gain = p_post * h.transpose() * r_inv;
        let innovation = z - h * state.x;
        (state.x + gain * innovation, p_post, innovation, gain)
    };
    if !p.iter().all(|v| v.is_finite()) || !x.iter().all(|v| v.is_finite()) {
        return Err(RegError::NumericalFailure(
            "robust update produced non-finite values".into(),
        ));
    }
    Ok(RfStepOutcome {
        state: FilterState { x, p },
        innovation,
        theta,
        backoffs,
        information,
        closed_loop: StateCovariance::identity() - gain * h,
    })
}

#[allow(clippy::large_enum_variant)]
enum Existence {
    Holds(Option<StateCovariance>),
    Fails,
}

/// `(P⁻)⁻¹ − (θ/m)I + G ≻ ε·I` with `m` the margin fraction, which implies the
/// plain condition `(P⁻)⁻¹ − θI + G ≻ ε·I` for `m ≤ 1`. For a singular `P⁻`
/// the congruent form `I − (θ/m)P⁻ + P^{1/2} G P^{1/2} ≻ 0` is checked instead.
fn existence(
    p: &StateCovariance,
    p_inv: Option<&StateCovariance>,
    g: &StateCovariance,
    theta: f64,
    margin: f64,
) -> Existence {
    let scaled = if theta == 0.0 { 0.0 } else { theta / margin };
    match p_inv {
        Some(p_inv) => {
            let shifted = p_inv + g - StateCovariance::identity() * (scaled + EXISTENCE_EPSILON);
            if Cholesky::new(shifted).is_some() {
                Existence::Holds(Some(p_inv - StateCovariance::identity() * theta + g))
            } else {
                Existence::Fails
            }
        }
        None => {
            let eig = p.symmetric_eigen();
            let root = eig.eigenvectors
                * StateCovariance::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()))
                * eig.eigenvectors.transpose();
            let w = StateCovariance::identity() - p * scaled + root * g * root;
            if symmetrize(&w).symmetric_eigenvalues().min() > EXISTENCE_EPSILON {
                Existence::Holds(None)
            } else {
                Existence::Fails
            }
        }
    }
}

/// Robust registration: same pipeline as [`crate::kalman::kf_register`] with
/// the robust step in place of the Kalman step.
///
/// `ΔH` uses each correspondence's own sigma, or the configured measurement
/// sigma when it has none.
pub fn rf_register(corrs: &[Correspondence], unc: &UncertaintyModel, cfg: &RfConfig) -> Result<RegistrationResult> {
    cfg.validate()?;
    unc.validate()?;
    let mut transition = StateCovariance::identity();
    let mut step_cfg = cfg.clone();
    run_recursive(corrs, &cfg.kf, |k, state, m| {
        let s = m.sigma.unwrap_or(&cfg.kf.measurement_sigma);
        let sigma = PointSigma::new(s.x, s.y, s.z)?;
        let out = rf_step_detailed(state, m.q, m.z, &sigma, unc, &step_cfg, &m.r, k)?;
        if cfg.carry_theta {
            step_cfg.theta = out.theta;
        }
        let mut rec = record(k, &out.state, &out.innovation);
        rec.theta = Some(out.theta);
        if cfg.diagnostics {
            transition = out.closed_loop * transition;
            rec.closed_loop_radius = Some(spectral_radius(&transition));
            rec.existence_margin = out.information.map(|j| symmetrize(&j).symmetric_eigenvalues().min());
        }
        Ok((out.state, rec))
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::kalman::{kf_register, kf_step};

    fn random_inputs(rng: &mut ChaCha8Rng) -> (FilterState, Vector3<f64>, Vector3<f64>, Matrix3<f64>) {
        let a = StateCovariance::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let p = a * a.transpose() + StateCovariance::identity() * 0.1;
        let x = nalgebra::SVector::<f64, 9>::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let q = Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let z = Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let r = Matrix3::from_diagonal(&Vector3::from_fn(|_, _| rng.gen_range(1e-3..1.0)));
        (FilterState { x, p }, q, z, r)
    }

    fn sample(seed: u64, n: usize, sigma: f64) -> Vec<Correspondence> {
        let truth = crate::synth::random_rigid_transform(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        (0..n)
            .map(|_| {
                let s = crate::geometry::Point3::from(Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0)));
                let noise = Vector3::from_fn(|_, _| rng.gen_range(-sigma..=sigma));
                Correspondence::new(s, truth.apply(&s) + noise)
            })
            .collect()
    }

    #[test]
    fn delta_h_zero_sigma_is_observation_matrix() {
        let q = Vector3::new(1.0, 2.0, 3.0);
        assert_eq!(build_delta_h(&q, &PointSigma::default()), build_observation_matrix(&q));
    }

    #[test]
    fn delta_h_shifted_rows() {
        let dh = build_delta_h(&Vector3::new(1.0, 0.0, 0.0), &PointSigma::new(0.1, 0.2, 0.3).unwrap());
        for row in 0..3 {
            let block: Vec<f64> = (0..3).map(|c| dh[(row, 3 * row + c)]).collect();
            assert_abs_diff_eq!(block[0], 1.1, epsilon = 1e-15);
            assert_abs_diff_eq!(block[1], 0.2, epsilon = 1e-15);
            assert_abs_diff_eq!(block[2], 0.3, epsilon = 1e-15);
        }
        // rows share no nonzero columns
        for a in 0..3 {
            for b in (a + 1)..3 {
                assert!((0..9).all(|c| dh[(a, c)] == 0.0 || dh[(b, c)] == 0.0));
            }
        }
    }

    #[test]
    fn gamma_bound() {
        assert!(validate_gamma_bound(&DMatrix::identity(4, 4)));
        assert!(validate_gamma_bound(&(DMatrix::identity(4, 4) * 0.5)));
        assert!(!validate_gamma_bound(&(DMatrix::identity(4, 4) * 2.0)));
    }

    #[test]
    fn factorization_reproduces_stack() {
        let unc = UncertaintyModel {
            sigma_a: [0.01; 9],
            delta_h: DeltaHRule::ShiftedSource,
        };
        let q = Vector3::new(0.3, -0.2, 0.9);
        let s = PointSigma::new(0.001, 0.002, 0.003).unwrap();
        let f = unc.factorize(&q, &s).unwrap();
        let rebuilt = f.perturbation(&StateCovariance::identity()).unwrap();
        assert!((rebuilt - f.stacked()).amax() <= 1e-12);
        assert!(f.perturbation(&(StateCovariance::identity() * 1.5)).is_err());
    }

    #[test]
    fn stability_checks() {
        assert!(estimator_stability(&(StateCovariance::identity() * 0.5)));
        assert!(!estimator_stability(&StateCovariance::identity()));
    }

    #[test]
    fn degenerates_to_kalman_step() {
        let cfg = RfConfig {
            theta: 0.0,
            ..Default::default()
        };
        let unc = UncertaintyModel::zero();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let (state, q, z, r) = random_inputs(&mut rng);
            let kf = kf_step(&state, &q, &z, &cfg.kf, &r).unwrap();
            let rf = rf_step(&state, &q, &z, &unc, &cfg, &r).unwrap();
            assert!((kf.x - rf.x).amax() <= 1e-12);
            assert!((kf.p - rf.p).amax() <= 1e-12);
        }
    }

    #[test]
    fn robust_step_is_more_conservative() {
        let cfg = RfConfig::default();
        let unc = UncertaintyModel {
            sigma_a: [1e-3; 9],
            delta_h: DeltaHRule::ShiftedSource,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let (state, q, z, r) = random_inputs(&mut rng);
            let kf = kf_step(&state, &q, &z, &cfg.kf, &r).unwrap();
            let rf = rf_step(&state, &q, &z, &unc, &cfg, &r).unwrap();
            assert!(rf.p.trace() >= kf.p.trace() - 1e-12);
        }
    }

    #[test]
    fn infeasible_theta_without_backoff() {
        let kf = KfConfig::default();
        let cfg = RfConfig {
            theta: 2.0 / kf.prior_covariance_scale,
            max_backoffs: 0,
            kf,
            ..Default::default()
        };
        let err = rf_register(&sample(1, 50, 0.01), &UncertaintyModel::default(), &cfg).unwrap_err();
        assert!(matches!(err, RegError::RobustnessInfeasible { step: 0, .. }));
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn backoff_restores_feasibility() {
        let kf = KfConfig::default();
        let cfg = RfConfig {
            theta: 2.0 / kf.prior_covariance_scale,
            kf,
            diagnostics: true,
            ..Default::default()
        };
        let res = rf_register(&sample(1, 50, 0.01), &UncertaintyModel::default(), &cfg).unwrap();
        assert!(res.trace[0].theta.unwrap() < cfg.theta);
        for r in &res.trace {
            assert!(r.existence_margin.unwrap() > EXISTENCE_EPSILON);
        }
    }

    #[test]
    fn noise_free_recovery_with_default_theta() {
        let res = rf_register(&sample(4, 400, 0.0), &UncertaintyModel::default(), &RfConfig::default()).unwrap();
        assert!(res.rmse <= 1e-6, "rmse {}", res.rmse);
    }

    #[test]
    fn small_theta_tracks_kalman_result() {
        let corrs = sample(8, 400, 0.0);
        let cfg = RfConfig {
            theta: 1e-3,
            ..Default::default()
        };
        let rf = rf_register(&corrs, &UncertaintyModel::zero(), &cfg).unwrap();
        let kf = kf_register(&corrs, &cfg.kf).unwrap();
        assert_abs_diff_eq!(
            rf.transform.rotation.matrix(),
            kf.transform.rotation.matrix(),
            epsilon = 1e-6
        );
        assert_abs_diff_eq!(rf.transform.translation, kf.transform.translation, epsilon = 1e-6);
    }

    #[test]
    fn accumulated_closed_loop_is_stable() {
        let cfg = RfConfig {
            diagnostics: true,
            ..Default::default()
        };
        let res = rf_register(&sample(2, 100, 0.01), &UncertaintyModel::default(), &cfg).unwrap();
        let radius = res.trace.last().unwrap().closed_loop_radius.unwrap();
        assert!(radius < 1.0 - 1e-12, "radius {radius}");
    }

    #[test]
    fn rejects_bad_config() {
        let corrs = sample(1, 10, 0.01);
        let bad = RfConfig {
            theta_backoff: 1.0,
            ..Default::default()
        };
        assert!(rf_register(&corrs, &UncertaintyModel::default(), &bad).is_err());
        let bad = RfConfig {
            theta: -1.0,
            ..Default::default()
        };
        assert!(rf_register(&corrs, &UncertaintyModel::default(), &bad).is_err());
    }

    #[test]
    fn noise_free_with_floored_sigma_stays_positive_semidefinite() {
        // Zero per-point sigmas floor R at 1e-12 while the prior is 1e3, so P
        // spans some fifteen decades after the first few steps.
        let truth = crate::synth::random_rigid_transform(88);
        let mut rng = ChaCha8Rng::seed_from_u64(88);
        let corrs: Vec<Correspondence> = (0..60)
            .map(|_| {
                let s = crate::geometry::Point3::from(Vector3::from_fn(|_, _| rng.gen_range(-0.5..0.5)));
                Correspondence::with_sigma(s, truth.apply(&s), Vector3::zeros()).unwrap()
            })
            .collect();
        let cfg = RfConfig::default();
        let res = rf_register(&corrs, &UncertaintyModel::default(), &cfg).unwrap();
        assert!(res.final_state.min_eigenvalue() >= 0.0);
        assert!(res.rmse < 1e-12, "rmse {}", res.rmse);
    }
}
