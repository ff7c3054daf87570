//! Control-affine stochastic dynamics and discrete-time propagation.
//!
//! Models have the form `dx = f(x)dt + G(x)(u + w)dt` where `w` is a
//! control-space perturbation. Integration is explicit Euler; the heading
//! angle is never wrapped during integration so that rollout costs stay
//! continuous.

use nalgebra::{Matrix3x2, Vector2, Vector3};
use thiserror::Error;

/// Unicycle configuration: planar position in meters, heading in radians.
///
/// `theta` is stored unnormalized; wrap only at comparison sites.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl State {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    /// Euclidean distance from the position to a planar point.
    pub fn distance_to(&self, target: (f64, f64)) -> f64 {
        ((self.x - target.0).powi(2) + (self.y - target.1).powi(2)).sqrt()
    }
}

/// Control input: linear velocity (m/s) and angular velocity (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlInput {
    pub v: f64,
    pub omega: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput { v: 0.0, omega: 0.0 };

    pub fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }

    pub fn as_vector(&self) -> Vector2<f64> {
        Vector2::new(self.v, self.omega)
    }

    pub fn from_vector(u: &Vector2<f64>) -> Self {
        Self { v: u.x, omega: u.y }
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.omega.is_finite()
    }
}

/// Optional box bounds on the effective control, applied after noise addition.
#[derive(Debug, Clone, Copy)]
pub struct ControlBounds {
    pub v_min: f64,
    pub v_max: f64,
    pub omega_min: f64,
    pub omega_max: f64,
}

impl ControlBounds {
    fn clamp(&self, u: Vector2<f64>) -> Vector2<f64> {
        Vector2::new(
            u.x.clamp(self.v_min, self.v_max),
            u.y.clamp(self.omega_min, self.omega_max),
        )
    }
}

/// Control-affine model `dx = f(x)dt + G(x)(u + w)dt`.
#[derive(Debug, Clone, Copy)]
pub struct ControlAffineModel {
    pub drift: fn(&State) -> Vector3<f64>,
    pub input_matrix: fn(&State) -> Matrix3x2<f64>,
    pub noise_dim: usize,
    pub bounds: Option<ControlBounds>,
}

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("non-finite input to step: state={state:?} u={u:?} noise=({nx}, {ny})")]
    NonFiniteInput {
        state: (f64, f64, f64),
        u: (f64, f64),
        nx: f64,
        ny: f64,
    },
    #[error("time step must be positive and finite, got {0}")]
    InvalidTimeStep(f64),
}

fn unicycle_drift(_state: &State) -> Vector3<f64> {
    Vector3::zeros()
}

fn unicycle_input_matrix(state: &State) -> Matrix3x2<f64> {
    Matrix3x2::new(
        state.theta.cos(),
        0.0,
        state.theta.sin(),
        0.0,
        0.0,
        1.0,
    )
}

/// Driftless planar unicycle: `G(x) = [[cosθ, 0], [sinθ, 0], [0, 1]]`.
pub fn unicycle_model() -> ControlAffineModel {
    ControlAffineModel {
        drift: unicycle_drift,
        input_matrix: unicycle_input_matrix,
        noise_dim: 2,
        bounds: None,
    }
}

/// One explicit Euler step `x + (f(x) + G(x)(u + noise))·dt`.
pub fn step(
    model: &ControlAffineModel,
    state: &State,
    u: &ControlInput,
    noise: &Vector2<f64>,
    dt: f64,
) -> Result<State, DynamicsError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(DynamicsError::InvalidTimeStep(dt));
    }
    if !state.is_finite() || !u.is_finite() || !(noise.x.is_finite() && noise.y.is_finite()) {
        return Err(DynamicsError::NonFiniteInput {
            state: (state.x, state.y, state.theta),
            u: (u.v, u.omega),
            nx: noise.x,
            ny: noise.y,
        });
    }
    let mut u_eff = u.as_vector() + noise;
    if let Some(bounds) = &model.bounds {
        u_eff = bounds.clamp(u_eff);
    }
    let dx = (model.drift)(state) + (model.input_matrix)(state) * u_eff;
    Ok(State {
        x: state.x + dx.x * dt,
        y: state.y + dx.y * dt,
        theta: state.theta + dx.z * dt,
    })
}

/// Repeated `step` application; element 0 is `x0`, output length `T + 1`.
pub fn rollout(
    model: &ControlAffineModel,
    x0: &State,
    mean_controls: &[ControlInput],
    noises: &[Vector2<f64>],
    dt: f64,
) -> Result<Vec<State>, DynamicsError> {
    assert_eq!(
        mean_controls.len(),
        noises.len(),
        "mean control and noise sequences must be length-matched"
    );
    let mut states = Vec::with_capacity(mean_controls.len() + 1);
    states.push(*x0);
    let mut current = *x0;
    for (u, noise) in mean_controls.iter().zip(noises) {
        current = step(model, &current, u, noise, dt)?;
        states.push(current);
    }
    Ok(states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn unicycle_input_matrix_axis_headings() {
        let model = unicycle_model();
        let g0 = (model.input_matrix)(&State::new(0.0, 0.0, 0.0));
        assert_eq!(g0, Matrix3x2::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0));

        let g90 = (model.input_matrix)(&State::new(0.0, 0.0, std::f64::consts::FRAC_PI_2));
        let expected = Matrix3x2::new(0.0, 0.0, 1.0, 0.0, 0.0, 1.0);
        assert_abs_diff_eq!(g90, expected, epsilon = 1e-12);
    }

    #[test]
    fn unicycle_drift_is_zero() {
        let model = unicycle_model();
        for s in [
            State::new(0.0, 0.0, 0.0),
            State::new(3.0, -2.0, 1.7),
            State::new(-10.0, 4.0, -9.9),
        ] {
            assert_eq!((model.drift)(&s), Vector3::zeros());
        }
    }

    #[test]
    fn step_matches_direct_euler() {
        let model = unicycle_model();
        let s = step(
            &model,
            &State::new(0.0, 0.0, 0.0),
            &ControlInput::new(1.0, 0.0),
            &Vector2::zeros(),
            0.05,
        )
        .unwrap();
        assert_eq!(s, State::new(0.05, 0.0, 0.0));

        let s = step(
            &model,
            &State::new(0.0, 0.0, std::f64::consts::FRAC_PI_2),
            &ControlInput::new(2.0, 1.0),
            &Vector2::zeros(),
            0.05,
        )
        .unwrap();
        assert_abs_diff_eq!(s.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.y, 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(s.theta, std::f64::consts::FRAC_PI_2 + 0.05, epsilon = 1e-12);
    }

    #[test]
    fn step_noise_enters_like_control() {
        let model = unicycle_model();
        let s = step(
            &model,
            &State::new(0.0, 0.0, 0.0),
            &ControlInput::new(1.0, 0.0),
            &Vector2::new(0.5, 0.0),
            0.05,
        )
        .unwrap();
        assert_abs_diff_eq!(s.x, 0.075, epsilon = 1e-15);
        assert_eq!((s.y, s.theta), (0.0, 0.0));
    }

    #[test]
    fn step_rejects_non_finite() {
        let model = unicycle_model();
        let bad = step(
            &model,
            &State::new(f64::NAN, 0.0, 0.0),
            &ControlInput::ZERO,
            &Vector2::zeros(),
            0.05,
        );
        assert!(bad.is_err());
        let bad_dt = step(
            &model,
            &State::new(0.0, 0.0, 0.0),
            &ControlInput::ZERO,
            &Vector2::zeros(),
            0.0,
        );
        assert_eq!(bad_dt, Err(DynamicsError::InvalidTimeStep(0.0)));
    }

    #[test]
    fn rollout_empty_horizon_returns_start() {
        let model = unicycle_model();
        let x0 = State::new(1.0, 2.0, 0.3);
        let states = rollout(&model, &x0, &[], &[], 0.05).unwrap();
        assert_eq!(states, vec![x0]);
    }

    #[test]
    fn rollout_straight_line() {
        let model = unicycle_model();
        let controls = vec![ControlInput::new(1.0, 0.0); 2];
        let noises = vec![Vector2::zeros(); 2];
        let states = rollout(&model, &State::new(0.0, 0.0, 0.0), &controls, &noises, 0.05).unwrap();
        assert_eq!(
            states,
            vec![
                State::new(0.0, 0.0, 0.0),
                State::new(0.05, 0.0, 0.0),
                State::new(0.1, 0.0, 0.0)
            ]
        );
    }

    fn arb_state() -> impl Strategy<Value = State> {
        (-10.0..10.0f64, -10.0..10.0f64, -7.0..7.0f64).prop_map(|(x, y, t)| State::new(x, y, t))
    }

    proptest! {
        #[test]
        fn rollout_length_contract(t in 0usize..12, x0 in arb_state()) {
            let model = unicycle_model();
            let controls = vec![ControlInput::new(0.7, -0.2); t];
            let noises = vec![Vector2::new(0.1, 0.0); t];
            let states = rollout(&model, &x0, &controls, &noises, 0.05).unwrap();
            prop_assert_eq!(states.len(), t + 1);
        }

        #[test]
        fn step_linear_in_control(
            x0 in arb_state(),
            v in -5.0..5.0f64,
            w in -5.0..5.0f64,
            nx in -2.0..2.0f64,
            ny in -2.0..2.0f64,
        ) {
            let model = unicycle_model();
            let dt = 0.05;
            let noise = Vector2::new(nx, ny);
            let with_u = step(&model, &x0, &ControlInput::new(v, w), &noise, dt).unwrap();
            let without_u = step(&model, &x0, &ControlInput::ZERO, &noise, dt).unwrap();
            let g = (model.input_matrix)(&x0) * Vector2::new(v, w) * dt;
            prop_assert!((with_u.x - without_u.x - g.x).abs() <= 1e-12);
            prop_assert!((with_u.y - without_u.y - g.y).abs() <= 1e-12);
            prop_assert!((with_u.theta - without_u.theta - g.z).abs() <= 1e-12);
        }

        #[test]
        fn zero_input_is_fixed_point(x0 in arb_state()) {
            let model = unicycle_model();
            let s = step(&model, &x0, &ControlInput::ZERO, &Vector2::zeros(), 0.05).unwrap();
            prop_assert_eq!(s, x0);
        }

        #[test]
        fn noise_equals_mean_shift(
            x0 in arb_state(),
            v in -3.0..3.0f64,
            w in -3.0..3.0f64,
            nx in -2.0..2.0f64,
            ny in -2.0..2.0f64,
        ) {
            let model = unicycle_model();
            let dt = 0.05;
            let noisy = step(&model, &x0, &ControlInput::new(v, w), &Vector2::new(nx, ny), dt).unwrap();
            let shifted = step(&model, &x0, &ControlInput::new(v + nx, w + ny), &Vector2::zeros(), dt).unwrap();
            prop_assert_eq!(noisy, shifted);
        }
    }
}
