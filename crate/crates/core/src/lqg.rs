//! Stationary LQG controller over the (distance, relative speed, relative
//! angle) state, with the rotate-then-zero-angle modification.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::wrap;
use crate::speed::SpeedStrategy;

const DARE_TOLERANCE: f64 = 1e-9;
const DARE_MAX_ITERATIONS: usize = 200_000;

/// Controller state estimate `Ŝ = [d^e, v_rel^e, θ_rel^e]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeState {
    pub d_e: f64,
    pub v_rel_e: f64,
    pub theta_rel_e: f64,
}

impl RelativeState {
    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.d_e, self.v_rel_e, self.theta_rel_e)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self {
            d_e: v[0],
            v_rel_e: v[1],
            theta_rel_e: v[2],
        }
    }
}

/// Initial estimate: the starting distance is known, speed and angle are not.
pub fn init(d0: f64) -> Result<RelativeState> {
    if !(d0 > 0.0) || !d0.is_finite() {
        return Err(Error::InvalidArgument(format!("initial distance must be positive, got {d0}")));
    }
    Ok(RelativeState {
        d_e: d0,
        v_rel_e: 0.0,
        theta_rel_e: 0.0,
    })
}

/// Observation vector `O = [d^m, v_rel^m, θ^m]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationVector {
    pub d_m: f64,
    pub v_rel_m: f64,
    pub theta_m: f64,
}

impl ObservationVector {
    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.d_m, self.v_rel_m, self.theta_m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlDecision {
    /// Chassis rotation to apply before translating, radians.
    pub rotate_by: f64,
    /// LQR control vector.
    pub u: [f64; 3],
    /// Commanded forward speed for the next slot, m/s.
    pub v_f_next: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub a: Matrix3<f64>,
    pub b: Matrix3<f64>,
    pub c: Matrix3<f64>,
    pub q: Matrix3<f64>,
    pub h: Matrix3<f64>,
    pub sigma_zz: Matrix3<f64>,
    pub sigma_ww: Matrix3<f64>,
    pub dt: f64,
    pub v_f_max: f64,
}

/// System matrices for slot length `dt`.
pub fn system_matrices(dt: f64) -> (Matrix3<f64>, Matrix3<f64>, Matrix3<f64>) {
    let a = Matrix3::new(1.0, -dt, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
    let b = Matrix3::new(0.0, -dt, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
    (a, b, Matrix3::identity())
}

/// Observation-noise covariance for a speed strategy.
pub fn observation_noise(strategy: SpeedStrategy, v_l_max: f64, v_f_max: f64) -> Matrix3<f64> {
    match strategy {
        SpeedStrategy::Optimistic => Matrix3::from_diagonal(&Vector3::new(4.0, 2.0, 1.0)),
        SpeedStrategy::Pragmatic => Matrix3::new(
            1.0,
            v_l_max,
            0.0,
            v_l_max,
            v_f_max * v_f_max,
            0.0,
            0.0,
            0.0,
            0.1,
        ),
    }
}

/// Optional replacements for the default weights and covariances. Matrices
/// are row-major.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerOverrides {
    /// Diagonal of Q.
    pub q_diag: Option<[f64; 3]>,
    pub h: Option<[[f64; 3]; 3]>,
    pub sigma_zz: Option<[[f64; 3]; 3]>,
    pub sigma_ww: Option<[[f64; 3]; 3]>,
    pub dt: Option<f64>,
}

fn from_rows(m: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m[i][j])
}

impl ControllerConfig {
    /// Default weights: `Q = diag(10·v_L^max, 0.1, 1)`, `H = I`, `Σ_ZZ = I`,
    /// and the strategy's observation noise.
    pub fn new(dt: f64, v_l_max: f64, v_f_max: f64, strategy: SpeedStrategy) -> Self {
        let (a, b, c) = system_matrices(dt);
        Self {
            a,
            b,
            c,
            q: Matrix3::from_diagonal(&Vector3::new(10.0 * v_l_max, 0.1, 1.0)),
            h: Matrix3::identity(),
            sigma_zz: Matrix3::identity(),
            sigma_ww: observation_noise(strategy, v_l_max, v_f_max),
            dt,
            v_f_max,
        }
    }

    pub fn with_overrides(mut self, o: &ControllerOverrides) -> Self {
        if let Some(dt) = o.dt {
            let (a, b, c) = system_matrices(dt);
            self.a = a;
            self.b = b;
            self.c = c;
            self.dt = dt;
        }
        if let Some(q) = o.q_diag {
            self.q = Matrix3::from_diagonal(&Vector3::from(q));
        }
        if let Some(h) = &o.h {
            self.h = from_rows(h);
        }
        if let Some(s) = &o.sigma_zz {
            self.sigma_zz = from_rows(s);
        }
        if let Some(s) = &o.sigma_ww {
            self.sigma_ww = from_rows(s);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mats = [
            (&self.a, "A"),
            (&self.b, "B"),
            (&self.c, "C"),
            (&self.q, "Q"),
            (&self.h, "H"),
            (&self.sigma_zz, "sigma_zz"),
            (&self.sigma_ww, "sigma_ww"),
        ];
        for (m, name) in mats {
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config(format!("{name} has a non-finite entry")));
            }
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config("dt must be positive".into()));
        }
        if !(self.v_f_max > 0.0) {
            return Err(Error::Config("v_f_max must be positive".into()));
        }
        if (0..3).any(|i| self.q[(i, i)] < 0.0) || self.q != Matrix3::from_diagonal(&self.q.diagonal()) {
            return Err(Error::Config("Q must be diagonal and non-negative".into()));
        }
        if !is_symmetric(&self.h) || self.h.cholesky().is_none() {
            return Err(Error::Config("H must be symmetric positive definite".into()));
        }
        for (m, name) in [(&self.sigma_zz, "sigma_zz"), (&self.sigma_ww, "sigma_ww")] {
            if !is_symmetric(m) || !is_psd(m) {
                return Err(Error::Config(format!("{name} must be symmetric positive semidefinite")));
            }
        }
        Ok(())
    }
}

fn is_symmetric(m: &Matrix3<f64>) -> bool {
    (m - m.transpose()).amax() <= 1e-12 * (1.0 + m.amax())
}

fn is_psd(m: &Matrix3<f64>) -> bool {
    m.symmetric_eigenvalues().iter().all(|&e| e >= -1e-12 * (1.0 + m.amax()))
}

/// Positive definite version of a PSD covariance: a tiny ridge is added only
/// when Cholesky fails.
fn regularized(m: &Matrix3<f64>) -> Matrix3<f64> {
    if m.cholesky().is_some() {
        *m
    } else {
        m + Matrix3::identity() * 1e-9
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gains {
    /// Kalman gain.
    pub k: Matrix3<f64>,
    /// LQR feedback gain.
    pub l: Matrix3<f64>,
    /// Stationary a-priori error covariance.
    pub p_filter: Matrix3<f64>,
    /// Stationary control cost-to-go.
    pub p_control: Matrix3<f64>,
    pub filter_residual: f64,
    pub control_residual: f64,
    pub iterations: usize,
}

impl Gains {
    /// Theoretical innovation covariance `C P⁻ Cᵀ + Σ_WW`.
    pub fn innovation_covariance(&self, cfg: &ControllerConfig) -> Matrix3<f64> {
        cfg.c * self.p_filter * cfg.c.transpose() + cfg.sigma_ww
    }
}

fn control_riccati(p: &Matrix3<f64>, a: &Matrix3<f64>, b: &Matrix3<f64>, q: &Matrix3<f64>, h: &Matrix3<f64>) -> Option<Matrix3<f64>> {
    let s = h + b.transpose() * p * b;
    let gain = s.try_inverse()? * b.transpose() * p * a;
    let next = q + a.transpose() * p * a - a.transpose() * p * b * gain;
    Some((next + next.transpose()) * 0.5)
}

fn filter_riccati(p: &Matrix3<f64>, a: &Matrix3<f64>, c: &Matrix3<f64>, zz: &Matrix3<f64>, ww: &Matrix3<f64>) -> Option<Matrix3<f64>> {
    let s = c * p * c.transpose() + ww;
    let next = a * p * a.transpose() + zz - a * p * c.transpose() * s.try_inverse()? * c * p * a.transpose();
    Some((next + next.transpose()) * 0.5)
}

fn iterate_riccati(step: impl Fn(&Matrix3<f64>) -> Option<Matrix3<f64>>, start: Matrix3<f64>) -> Result<(Matrix3<f64>, f64, usize)> {
    let mut p = start;
    let mut residual = f64::INFINITY;
    for it in 1..=DARE_MAX_ITERATIONS {
        let next = step(&p).ok_or(Error::SolverFailure {
            iterations: it,
            residual,
        })?;
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::SolverFailure { iterations: it, residual });
        }
        p = next;
        let check = step(&p).ok_or(Error::SolverFailure { iterations: it, residual })?;
        residual = (check - p).amax();
        if residual < DARE_TOLERANCE {
            return Ok((p, residual, it));
        }
    }
    Err(Error::SolverFailure {
        iterations: DARE_MAX_ITERATIONS,
        residual,
    })
}

/// Stationary Kalman and LQR gains from the two discrete algebraic Riccati
/// equations, solved by fixed-point iteration.
pub fn solve_gains(cfg: &ControllerConfig) -> Result<Gains> {
    cfg.validate()?;
    let ww = regularized(&cfg.sigma_ww);
    let (pc, rc, ic) = iterate_riccati(|p| control_riccati(p, &cfg.a, &cfg.b, &cfg.q, &cfg.h), cfg.q)?;
    let (pf, rf, i_f) = iterate_riccati(|p| filter_riccati(p, &cfg.a, &cfg.c, &cfg.sigma_zz, &ww), cfg.sigma_zz)?;
    let l = (cfg.h + cfg.b.transpose() * pc * cfg.b)
        .try_inverse()
        .ok_or(Error::SolverFailure { iterations: ic, residual: rc })?
        * cfg.b.transpose()
        * pc
        * cfg.a;
    let k = pf * cfg.c.transpose()
        * (cfg.c * pf * cfg.c.transpose() + ww)
            .try_inverse()
            .ok_or(Error::SolverFailure { iterations: i_f, residual: rf })?;
    Ok(Gains {
        k,
        l,
        p_filter: pf,
        p_control: pc,
        filter_residual: rf,
        control_residual: rc,
        iterations: ic.max(i_f),
    })
}

/// Largest eigenvalue modulus of `A − B·L`.
pub fn closed_loop_spectral_radius(cfg: &ControllerConfig, gains: &Gains) -> f64 {
    (cfg.a - cfg.b * gains.l)
        .complex_eigenvalues()
        .iter()
        .map(|e| e.norm())
        .fold(0.0, f64::max)
}

/// One controller update.
///
/// Predicts with the previous control, corrects with the wrapped angle
/// residual, hands the corrected angle to the chassis and zeroes it, then
/// computes the new control and the speed command.
pub fn step(
    state: &RelativeState,
    u_prev: &Vector3<f64>,
    obs: &ObservationVector,
    v_leader_next: f64,
    gains: &Gains,
    cfg: &ControllerConfig,
) -> (RelativeState, ControlDecision) {
    let predicted = cfg.a * state.to_vector() + cfg.b * u_prev;
    let mut residual = obs.to_vector() - cfg.c * predicted;
    residual[2] = wrap(residual[2]);
    let mut corrected = predicted + gains.k * residual;
    corrected[0] = corrected[0].max(0.0);
    let rotate_by = wrap(corrected[2]);
    corrected[2] = 0.0;
    let u = -gains.l * corrected;
    let v_f_next = (v_leader_next + corrected[1] + u[1]).clamp(-cfg.v_f_max, cfg.v_f_max);
    (
        RelativeState::from_vector(&corrected),
        ControlDecision {
            rotate_by,
            u: [u[0], u[1], u[2]],
            v_f_next,
        },
    )
}

/// Owns the gains, the estimate and the last control.
#[derive(Debug, Clone)]
pub struct Controller {
    cfg: ControllerConfig,
    gains: Gains,
    state: RelativeState,
    u_prev: Vector3<f64>,
}

impl Controller {
    pub fn new(cfg: ControllerConfig, d0: f64) -> Result<Self> {
        let gains = solve_gains(&cfg)?;
        Ok(Self {
            cfg,
            gains,
            state: init(d0)?,
            u_prev: Vector3::zeros(),
        })
    }

    pub fn state(&self) -> &RelativeState {
        &self.state
    }

    pub fn gains(&self) -> &Gains {
        &self.gains
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    /// Control applied in the previous slot.
    pub fn last_control(&self) -> [f64; 3] {
        self.u_prev.into()
    }

    /// Overwrite the angle estimate, e.g. after the robot turned away from
    /// the controller's choice.
    pub fn set_angle(&mut self, theta: f64) {
        self.state.theta_rel_e = crate::geometry::wrap(theta);
    }

    pub fn step(&mut self, obs: &ObservationVector, v_leader_next: f64) -> ControlDecision {
        let (s, d) = step(&self.state, &self.u_prev, obs, v_leader_next, &self.gains, &self.cfg);
        self.state = s;
        self.u_prev = Vector3::from(d.u);
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_config() -> ControllerConfig {
        ControllerConfig {
            a: Matrix3::identity(),
            b: Matrix3::identity(),
            c: Matrix3::identity(),
            q: Matrix3::identity(),
            h: Matrix3::identity(),
            sigma_zz: Matrix3::identity(),
            sigma_ww: Matrix3::identity(),
            dt: 1.0,
            v_f_max: 1.0,
        }
    }

    #[test]
    fn scalar_dare_is_golden_ratio() {
        let g = solve_gains(&unit_config()).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        for i in 0..3 {
            assert_abs_diff_eq!(g.p_control[(i, i)], phi, epsilon = 1e-8);
            assert_abs_diff_eq!(g.p_filter[(i, i)], phi, epsilon = 1e-8);
        }
        assert!(g.control_residual < 1e-9 && g.filter_residual < 1e-9);
    }

    #[test]
    fn paper_config_is_stable() {
        for strategy in [SpeedStrategy::Optimistic, SpeedStrategy::Pragmatic] {
            let cfg = ControllerConfig::new(1.0, 3.0, 5.4, strategy);
            assert_eq!(cfg.q[(0, 0)], 30.0);
            let g = solve_gains(&cfg).unwrap();
            assert!(closed_loop_spectral_radius(&cfg, &g) < 1.0);
            assert!(g.control_residual < 1e-9 && g.filter_residual < 1e-9);
        }
    }

    #[test]
    fn distrusted_measurements_give_zero_gain() {
        let base = ControllerConfig::new(1.0, 3.0, 5.4, SpeedStrategy::Optimistic);
        let mut last = solve_gains(&base).unwrap().k.amax();
        for scale in [1e2, 1e4, 1e6] {
            let mut cfg = base.clone();
            cfg.sigma_ww *= scale;
            let k = solve_gains(&cfg).unwrap().k.amax();
            assert!(k < last, "scale {scale}: {k} vs {last}");
            last = k;
        }
        assert!(last < 0.05, "{last}");
    }

    #[test]
    fn singular_pragmatic_noise_is_regularized() {
        // v_F = v_L makes the distance/speed block rank one.
        let cfg = ControllerConfig::new(1.0, 2.0, 2.0, SpeedStrategy::Pragmatic);
        assert!(cfg.sigma_ww.cholesky().is_none());
        assert!(solve_gains(&cfg).is_ok());
    }

    #[test]
    fn zero_innovation_keeps_prediction() {
        let cfg = ControllerConfig::new(1.0, 2.0, 3.6, SpeedStrategy::Pragmatic);
        let g = solve_gains(&cfg).unwrap();
        let s = RelativeState { d_e: 4.0, v_rel_e: 0.5, theta_rel_e: 0.2 };
        let u = Vector3::new(0.0, 0.3, 0.1);
        let pred = cfg.a * s.to_vector() + cfg.b * u;
        let obs = ObservationVector { d_m: pred[0], v_rel_m: pred[1], theta_m: pred[2] };
        let (next, d) = step(&s, &u, &obs, 0.0, &g, &cfg);
        assert_abs_diff_eq!(next.d_e, pred[0], epsilon = 1e-12);
        assert_abs_diff_eq!(next.v_rel_e, pred[1], epsilon = 1e-12);
        assert_abs_diff_eq!(d.rotate_by, pred[2], epsilon = 1e-12);
        assert_eq!(next.theta_rel_e, 0.0);
    }

    #[test]
    fn unit_gain_takes_observation() {
        let cfg = ControllerConfig::new(1.0, 2.0, 3.6, SpeedStrategy::Optimistic);
        let mut g = solve_gains(&cfg).unwrap();
        g.k = Matrix3::identity();
        let s = init(5.0).unwrap();
        let obs = ObservationVector { d_m: 3.2, v_rel_m: -0.4, theta_m: 0.9 };
        let (next, d) = step(&s, &Vector3::zeros(), &obs, 0.0, &g, &cfg);
        assert_abs_diff_eq!(next.d_e, 3.2, epsilon = 1e-12);
        assert_abs_diff_eq!(next.v_rel_e, -0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(d.rotate_by, 0.9, epsilon = 1e-12);
    }

    #[test]
    fn angle_residual_is_wrapped() {
        let cfg = ControllerConfig::new(1.0, 2.0, 3.6, SpeedStrategy::Optimistic);
        let mut g = solve_gains(&cfg).unwrap();
        g.k = Matrix3::identity();
        let s = RelativeState { d_e: 2.0, v_rel_e: 0.0, theta_rel_e: 3.0 };
        let obs = ObservationVector { d_m: 2.0, v_rel_m: 0.0, theta_m: -3.0 };
        let (_, d) = step(&s, &Vector3::zeros(), &obs, 0.0, &g, &cfg);
        assert_abs_diff_eq!(d.rotate_by, -3.0, epsilon = 1e-12);
        g.k = Matrix3::identity() * 0.5;
        let (_, d) = step(&s, &Vector3::zeros(), &obs, 0.0, &g, &cfg);
        // Halfway from 3.0 to -3.0 the short way round is ±π, not 0.
        assert!(d.rotate_by.abs() > 3.1, "{}", d.rotate_by);
    }

    #[test]
    fn speed_command_is_clamped_and_distance_projected() {
        let cfg = ControllerConfig::new(1.0, 2.0, 3.6, SpeedStrategy::Optimistic);
        let g = solve_gains(&cfg).unwrap();
        let obs = ObservationVector { d_m: 100.0, v_rel_m: 0.0, theta_m: 0.0 };
        let (_, d) = step(&init(100.0).unwrap(), &Vector3::zeros(), &obs, 0.0, &g, &cfg);
        assert_eq!(d.v_f_next, 3.6);
        let obs = ObservationVector { d_m: -50.0, v_rel_m: 0.0, theta_m: 0.0 };
        let (s, _) = step(&init(0.1).unwrap(), &Vector3::zeros(), &obs, 0.0, &g, &cfg);
        assert_eq!(s.d_e, 0.0);
    }

    #[test]
    fn init_examples() {
        for d in [5.0, 1.0, 0.5] {
            assert_eq!(init(d).unwrap(), RelativeState { d_e: d, v_rel_e: 0.0, theta_rel_e: 0.0 });
        }
        assert!(init(0.0).is_err());
    }

    #[test]
    fn overrides_apply() {
        let o: ControllerOverrides = serde_json::from_str(r#"{"q_diag":[1,2,3],"dt":2.0}"#).unwrap();
        let cfg = ControllerConfig::new(1.0, 2.0, 3.6, SpeedStrategy::Optimistic).with_overrides(&o);
        assert_eq!(cfg.q, Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 3.0)));
        assert_eq!(cfg.a[(0, 1)], -2.0);
        assert!(serde_json::from_str::<ControllerOverrides>(r#"{"bogus":1}"#).is_err());
    }

    #[test]
    fn invalid_config_rejected() {
        let mut cfg = unit_config();
        cfg.h = Matrix3::zeros();
        assert!(matches!(solve_gains(&cfg), Err(Error::Config(_))));
        let mut cfg = unit_config();
        cfg.sigma_ww[(0, 1)] = 5.0;
        assert!(matches!(solve_gains(&cfg), Err(Error::Config(_))));
    }
}
