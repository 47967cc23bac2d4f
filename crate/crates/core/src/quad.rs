//! Rigid-body quadrotor dynamics.
//!
//! World frame is z-up with gravity `(0, 0, −9.81)`. The attitude `R` maps
//! body to world; angular velocity is stored in the body frame. Actions are
//! normalized motor thrusts in `[0, 1]⁴` mapped linearly to per-motor thrust.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::group::{orthonormalize, skew};

pub const GRAVITY: f64 = 9.81;

pub fn gravity() -> Vector3<f64> {
    Vector3::new(0.0, 0.0, -GRAVITY)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("action contains a non-finite value: {0:?}")]
    NonFiniteAction([f64; 4]),
    #[error("state diverged after {elapsed:.4} s of integration")]
    Diverged { elapsed: f64 },
    #[error("invalid quadrotor parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// Body-to-world rotation.
    pub rotation: Matrix3<f64>,
    /// Body-frame angular velocity.
    pub omega: Vector3<f64>,
    pub target: Vector3<f64>,
}

impl QuadState {
    /// Level, motionless quadrotor.
    pub fn at_rest(position: Vector3<f64>, target: Vector3<f64>) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
            rotation: Matrix3::identity(),
            omega: Vector3::zeros(),
            target,
        }
    }

    /// `R ω`, the angular velocity expressed in the world frame.
    pub fn world_omega(&self) -> Vector3<f64> {
        self.rotation * self.omega
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.rotation.iter().all(|v| v.is_finite())
            && self.omega.iter().all(|v| v.is_finite())
            && self.target.iter().all(|v| v.is_finite())
    }

    pub fn distance_to_target(&self) -> f64 {
        (self.position - self.target).norm()
    }
}

/// Physical and timing parameters. Defaults are Crazyflie 2.0 values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadParams {
    pub mass: f64,
    /// Row-major inertia tensor.
    pub inertia: [[f64; 3]; 3],
    /// Distance from the center to each motor.
    pub arm_length: f64,
    /// Reaction torque per newton of thrust (k_M / k_F), in meters.
    pub yaw_torque_coeff: f64,
    /// Thrust of one motor at full power, newtons.
    pub max_thrust: f64,
    pub dt_phys: f64,
    pub dt_ctrl: f64,
    /// Body rates are scaled back onto this norm after every sub-step
    /// (rad/s). `inf` disables the limit.
    pub max_omega: f64,
}

impl Default for QuadParams {
    fn default() -> Self {
        Self {
            mass: 0.027,
            inertia: [[1.4e-5, 0.0, 0.0], [0.0, 1.4e-5, 0.0], [0.0, 0.0, 2.17e-5]],
            arm_length: 0.046,
            yaw_torque_coeff: 0.0251,
            max_thrust: 0.15,
            dt_phys: 0.004,
            dt_ctrl: 0.01,
            max_omega: 40.0,
        }
    }
}

impl QuadParams {
    pub fn inertia_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.inertia[r][c])
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |m: &str| Err(DynamicsError::InvalidParams(m.to_string()));
        if !(self.mass > 0.0) {
            return bad("mass must be positive");
        }
        let j = self.inertia_matrix();
        if (j - j.transpose()).abs().max() > 1e-12 * j.abs().max() {
            return bad("inertia must be symmetric");
        }
        if j.cholesky().is_none() {
            return bad("inertia must be positive definite");
        }
        if !(self.arm_length > 0.0) || !(self.max_thrust > 0.0) {
            return bad("arm_length and max_thrust must be positive");
        }
        if !(self.dt_phys > 0.0) || !(self.dt_ctrl >= self.dt_phys) {
            return bad("need 0 < dt_phys <= dt_ctrl");
        }
        if !(self.max_omega > 0.0) {
            return bad("max_omega must be positive");
        }
        Ok(())
    }

    /// Per-motor normalized thrust that exactly cancels gravity when level.
    pub fn hover_action(&self) -> [f64; 4] {
        [self.mass * GRAVITY / (4.0 * self.max_thrust); 4]
    }

    /// Sub-step lengths covering one control period: whole `dt_phys` steps
    /// plus a shorter remainder step when the ratio is not an integer.
    pub fn substeps(&self) -> Vec<f64> {
        let ratio = self.dt_ctrl / self.dt_phys;
        let whole = (ratio + 1e-9).floor() as usize;
        let mut out = vec![self.dt_phys; whole];
        let rem = self.dt_ctrl - whole as f64 * self.dt_phys;
        if rem > 1e-12 {
            out.push(rem);
        }
        out
    }
}

/// `a = (1 + clip(u, −1, 1)) / 2`, element-wise.
pub fn normalize_action(u: &[f64; 4]) -> Result<[f64; 4], DynamicsError> {
    if u.iter().any(|v| !v.is_finite()) {
        return Err(DynamicsError::NonFiniteAction(*u));
    }
    Ok(u.map(|v| (1.0 + v.clamp(-1.0, 1.0)) / 2.0))
}

/// Extra world-frame force and body-frame torque (drag, downwash, ground
/// effect). The default model contributes nothing.
pub trait AeroModel: Send + Sync {
    fn force_torque(&self, state: &QuadState, action: &[f64; 4], params: &QuadParams) -> (Vector3<f64>, Vector3<f64>);
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoAero;

impl AeroModel for NoAero {
    fn force_torque(&self, _: &QuadState, _: &[f64; 4], _: &QuadParams) -> (Vector3<f64>, Vector3<f64>) {
        (Vector3::zeros(), Vector3::zeros())
    }
}

/// Time derivative of a [`QuadState`]; the target is held fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
    pub rotation_rate: Matrix3<f64>,
    pub angular_acceleration: Vector3<f64>,
}

impl StateDerivative {
    /// Stacked as `[ẋ, ẍ, vec(Ṙ), ω̇]` (18 values).
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(18);
        out.extend(self.velocity.iter());
        out.extend(self.acceleration.iter());
        for r in 0..3 {
            for c in 0..3 {
                out.push(self.rotation_rate[(r, c)]);
            }
        }
        out.extend(self.angular_acceleration.iter());
        out
    }
}

/// Motor layout for an X frame: `(x, y, yaw sign)` per motor, arm length 1.
/// Motors 0 and 2 spin one way, 1 and 3 the other.
const MOTOR_LAYOUT: [(f64, f64, f64); 4] = [
    (1.0, -1.0, -1.0),
    (-1.0, -1.0, 1.0),
    (-1.0, 1.0, -1.0),
    (1.0, 1.0, 1.0),
];

/// Body torque from motor thrusts: roll and pitch from differential thrust
/// times lever arm, yaw from signed reaction torques.
pub fn motor_torque(thrusts: &[f64; 4], params: &QuadParams) -> Vector3<f64> {
    let lever = params.arm_length / std::f64::consts::SQRT_2;
    let mut tau = Vector3::zeros();
    for (t, &(x, y, spin)) in thrusts.iter().zip(MOTOR_LAYOUT.iter()) {
        tau.x += y * lever * t;
        tau.y -= x * lever * t;
        tau.z += spin * params.yaw_torque_coeff * t;
    }
    tau
}

pub fn derivative(s: &QuadState, a: &[f64; 4], p: &QuadParams) -> StateDerivative {
    derivative_with(s, a, p, &NoAero)
}

pub fn derivative_with(s: &QuadState, a: &[f64; 4], p: &QuadParams, aero: &dyn AeroModel) -> StateDerivative {
    let thrusts = a.map(|v| v * p.max_thrust);
    let body_force = Vector3::new(0.0, 0.0, thrusts.iter().sum());
    let (extra_force, extra_torque) = aero.force_torque(s, a, p);
    let acceleration = gravity() + (s.rotation * body_force + extra_force) / p.mass;

    let j = p.inertia_matrix();
    let tau = motor_torque(&thrusts, p) + extra_torque;
    let j_inv = j.try_inverse().expect("inertia validated as positive definite");
    let angular_acceleration = j_inv * (tau - s.omega.cross(&(j * s.omega)));

    StateDerivative {
        velocity: s.velocity,
        acceleration,
        rotation_rate: skew(&s.world_omega()) * s.rotation,
        angular_acceleration,
    }
}

/// Advances one control period with the action held constant.
pub fn step(s: &QuadState, a: &[f64; 4], p: &QuadParams) -> Result<QuadState, DynamicsError> {
    step_with(s, a, p, &NoAero)
}

/// Per sub-step `h`: angular velocity first (norm-limited to `max_omega`),
/// attitude from the updated angular velocity (`R += [Rω]_× R h`, then Gram–Schmidt), position with the
/// constant-acceleration update `x += v h + a h²/2`, then velocity.
pub fn step_with(s: &QuadState, a: &[f64; 4], p: &QuadParams, aero: &dyn AeroModel) -> Result<QuadState, DynamicsError> {
    let mut state = *s;
    let mut elapsed = 0.0;
    for h in p.substeps() {
        let d = derivative_with(&state, a, p, aero);
        state.omega += d.angular_acceleration * h;
        let rate = state.omega.norm();
        if rate > p.max_omega {
            state.omega *= p.max_omega / rate;
        }
        let w = state.rotation * state.omega;
        state.rotation = orthonormalize(&(state.rotation + skew(&w) * state.rotation * h));
        state.position += state.velocity * h + d.acceleration * (0.5 * h * h);
        state.velocity += d.acceleration * h;
        elapsed += h;
        if !state.is_finite() {
            return Err(DynamicsError::Diverged { elapsed });
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{act_on_state, rot_x, rot_z, GroupElement};

    #[test]
    fn normalize_action_examples() {
        assert_eq!(normalize_action(&[0.0; 4]).unwrap(), [0.5; 4]);
        assert_eq!(normalize_action(&[-3.0, -1.0, 1.0, 3.0]).unwrap(), [0.0, 0.0, 1.0, 1.0]);
        assert_eq!(normalize_action(&[0.5; 4]).unwrap(), [0.75; 4]);
        assert!(normalize_action(&[f64::NAN, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn motors_off_gives_pure_gravity() {
        let p = QuadParams::default();
        let mut s = QuadState::at_rest(Vector3::zeros(), Vector3::zeros());
        s.rotation = rot_x(0.7) * rot_z(1.1);
        let d = derivative(&s, &[0.0; 4], &p);
        assert_eq!(d.acceleration, Vector3::new(0.0, 0.0, -9.81));
    }

    #[test]
    fn hover_balances_gravity_and_torque() {
        let p = QuadParams::default();
        let s = QuadState::at_rest(Vector3::new(1.0, 1.0, 1.0), Vector3::zeros());
        let d = derivative(&s, &p.hover_action(), &p);
        assert!(d.acceleration.norm() < 1e-12);
        assert!(d.angular_acceleration.norm() < 1e-12);
    }

    #[test]
    fn equal_thrusts_cancel_roll_and_pitch() {
        let p = QuadParams::default();
        let tau = motor_torque(&[0.1; 4], &p);
        assert!(tau.x.abs() < 1e-18 && tau.y.abs() < 1e-18 && tau.z.abs() < 1e-18);
    }

    #[test]
    fn differential_thrust_produces_expected_torque_signs() {
        let p = QuadParams::default();
        // Motors 2 and 3 sit at +y: more thrust there rolls about +x.
        let tau = motor_torque(&[0.0, 0.0, 0.1, 0.1], &p);
        assert!(tau.x > 0.0);
        assert!(tau.y.abs() < 1e-18);
    }

    #[test]
    fn rotation_rate_conventions_agree() {
        // [Rω]_× R equals R [ω]_×.
        let mut s = QuadState::at_rest(Vector3::zeros(), Vector3::zeros());
        s.rotation = rot_x(0.4) * rot_z(-1.3);
        s.omega = Vector3::new(0.3, -2.0, 1.1);
        let p = QuadParams::default();
        let d = derivative(&s, &[0.2; 4], &p);
        assert!((d.rotation_rate - s.rotation * skew(&s.omega)).abs().max() < 1e-12);
    }

    #[test]
    fn translation_leaves_derivative_unchanged() {
        let p = QuadParams::default();
        let mut s = QuadState::at_rest(Vector3::new(0.2, 0.1, 2.0), Vector3::zeros());
        s.velocity = Vector3::new(0.5, -0.1, 0.3);
        s.omega = Vector3::new(1.0, 0.2, -0.3);
        s.rotation = rot_x(0.2);
        let a = [0.3, 0.7, 0.4, 0.6];
        let moved = act_on_state(&GroupElement::from_translation(Vector3::new(3.0, -2.0, 1.0)), &s);
        assert_eq!(derivative(&s, &a, &p), derivative(&moved, &a, &p));
    }

    #[test]
    fn substeps_cover_control_period() {
        let p = QuadParams::default();
        let steps = p.substeps();
        assert_eq!(steps.len(), 3);
        assert!((steps.iter().sum::<f64>() - p.dt_ctrl).abs() < 1e-15);
        let even = QuadParams { dt_phys: 0.002, ..QuadParams::default() };
        assert_eq!(even.substeps().len(), 5);
    }

    #[test]
    fn validate_rejects_bad_params() {
        assert!(QuadParams::default().validate().is_ok());
        assert!(QuadParams { mass: 0.0, ..Default::default() }.validate().is_err());
        assert!(QuadParams { max_omega: 0.0, ..Default::default() }.validate().is_err());
        let mut p = QuadParams::default();
        p.inertia[0][1] = 1e-3;
        assert!(p.validate().is_err());
        assert!(QuadParams { dt_ctrl: 0.001, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let p = QuadParams::default();
        let mut s = QuadState::at_rest(Vector3::zeros(), Vector3::zeros());
        s.velocity.x = f64::INFINITY;
        assert!(matches!(step(&s, &[0.5; 4], &p), Err(DynamicsError::Diverged { .. })));
    }

    #[test]
    fn body_rate_saturates() {
        let p = QuadParams::default();
        let mut s = QuadState::at_rest(Vector3::new(0.0, 0.0, 50.0), Vector3::zeros());
        for _ in 0..100 {
            s = step(&s, &[1.0, 0.0, 1.0, 0.0], &p).unwrap();
        }
        assert!(s.omega.norm() <= p.max_omega * (1.0 + 1e-12));
        assert!(s.omega.norm() > 0.5 * p.max_omega);
    }
}
