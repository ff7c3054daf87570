//! Barrier functions for circular obstacles and linearized safety rows.
//!
//! For an obstacle of radius `r` centered at `(cx, cy)` the barrier is
//! `h(x, y) = (x − cx)² + (y − cy)² − r²`; the safe set is `h ≥ 0`. The
//! decay condition `L_f h + L_g h·u ≥ −α(h)` linearizes into a row
//! `A·u ≥ b` with `A = ∇h·G` and `b = −α(h) − ∇h·f`.

use nalgebra::{RowVector2, RowVector3};
use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlAffineModel, State};

/// Rows with `‖A‖` below this are treated as degenerate (tangent heading or
/// the angular-rate relative-degree gap) and handled by the caller.
pub const DEGENERATE_ROW_NORM: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircularObstacle {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

impl CircularObstacle {
    pub fn new(cx: f64, cy: f64, r: f64) -> Self {
        assert!(r > 0.0, "obstacle radius must be positive, got {r}");
        Self { cx, cy, r }
    }
}

/// Extended class-K function bounding the barrier decay rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassKappa {
    /// `α(h) = γh`
    Linear { gamma: f64 },
    /// `α(h) = γh³`
    Cubic { gamma: f64 },
}

impl ClassKappa {
    pub fn linear(gamma: f64) -> Self {
        assert!(gamma > 0.0, "class-K gain must be positive, got {gamma}");
        ClassKappa::Linear { gamma }
    }

    pub fn cubic(gamma: f64) -> Self {
        assert!(gamma > 0.0, "class-K gain must be positive, got {gamma}");
        ClassKappa::Cubic { gamma }
    }

    pub fn eval(&self, h: f64) -> f64 {
        match self {
            ClassKappa::Linear { gamma } => gamma * h,
            ClassKappa::Cubic { gamma } => gamma * h * h * h,
        }
    }
}

impl Default for ClassKappa {
    fn default() -> Self {
        ClassKappa::Linear { gamma: 1.0 }
    }
}

/// Linearized barrier constraint: control `u` is admissible iff `A·u ≥ b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierRow {
    /// `L_g h(x)` as a 1×m row.
    pub a: RowVector2<f64>,
    /// `−α(h(x)) − L_f h(x)`.
    pub b: f64,
    /// `h(x)` at the state the row was built from.
    pub h_value: f64,
}

impl BarrierRow {
    pub fn is_degenerate(&self) -> bool {
        self.a.norm() < DEGENERATE_ROW_NORM
    }
}

/// Signed safety value; `≥ 0` iff the point is outside or on the boundary.
pub fn h(obstacle: &CircularObstacle, x: f64, y: f64) -> f64 {
    (x - obstacle.cx).powi(2) + (y - obstacle.cy).powi(2) - obstacle.r.powi(2)
}

/// Build the linearized constraint row `A·u ≥ b` at `state`.
pub fn barrier_row(
    model: &ControlAffineModel,
    obstacle: &CircularObstacle,
    state: &State,
    alpha: &ClassKappa,
) -> BarrierRow {
    let h_value = h(obstacle, state.x, state.y);
    let grad = RowVector3::new(
        2.0 * (state.x - obstacle.cx),
        2.0 * (state.y - obstacle.cy),
        0.0,
    );
    let a = grad * (model.input_matrix)(state);
    let lie_f = grad * (model.drift)(state);
    BarrierRow {
        a,
        b: -alpha.eval(h_value) - lie_f.x,
        h_value,
    }
}

/// True iff `h_i ≥ 0` for every obstacle.
pub fn safe_set_membership(obstacles: &[CircularObstacle], x: f64, y: f64) -> bool {
    obstacles.iter().all(|o| h(o, x, y) >= 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{step, unicycle_model, ControlInput};
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector2;
    use proptest::prelude::*;

    fn paper_obstacle() -> CircularObstacle {
        CircularObstacle::new(2.2, 2.0, 0.5)
    }

    #[test]
    fn h_direct_evaluation() {
        let o = paper_obstacle();
        assert_abs_diff_eq!(h(&o, 0.0, 0.0), 8.59, epsilon = 1e-12);
        assert_abs_diff_eq!(h(&o, 2.2, 2.0), -0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(h(&o, 2.7, 2.0), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn barrier_row_at_origin() {
        let model = unicycle_model();
        let row = barrier_row(
            &model,
            &paper_obstacle(),
            &State::new(0.0, 0.0, 0.0),
            &ClassKappa::linear(1.0),
        );
        assert_abs_diff_eq!(row.a.x, -4.4, epsilon = 1e-12);
        assert_abs_diff_eq!(row.a.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(row.b, -8.59, epsilon = 1e-12);
        assert_abs_diff_eq!(row.h_value, 8.59, epsilon = 1e-12);
    }

    #[test]
    fn tangent_heading_gives_degenerate_row() {
        let model = unicycle_model();
        // At (0, 0) the direction to the obstacle center (2.2, 2.0) has angle
        // atan2(2.0, 2.2); a heading rotated 90° from it is tangent.
        let theta = (2.0f64).atan2(2.2) + std::f64::consts::FRAC_PI_2;
        let row = barrier_row(
            &model,
            &paper_obstacle(),
            &State::new(0.0, 0.0, theta),
            &ClassKappa::linear(1.0),
        );
        assert_abs_diff_eq!(row.a.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(row.a.y, 0.0, epsilon = 1e-12);
        assert!(row.is_degenerate());
    }

    #[test]
    fn cubic_alpha() {
        assert_abs_diff_eq!(ClassKappa::cubic(1.0).eval(2.0), 8.0, epsilon = 1e-12);
        // For the unicycle L_f h = 0, so b = −α(h).
        let model = unicycle_model();
        // Pick a state where h = 2: distance² from center = 2 + 0.25.
        let d = (2.25f64).sqrt();
        let state = State::new(2.2 + d, 2.0, 0.0);
        let row = barrier_row(&model, &paper_obstacle(), &state, &ClassKappa::cubic(1.0));
        assert_abs_diff_eq!(row.b, -8.0, epsilon = 1e-9);
    }

    #[test]
    fn safe_set_membership_cases() {
        assert!(safe_set_membership(&[], 123.0, -45.0));
        let o = paper_obstacle();
        assert!(!safe_set_membership(&[o], 2.2, 2.0));
        assert!(safe_set_membership(&[o], 0.0, 0.0));
    }

    fn arb_obstacle() -> impl Strategy<Value = CircularObstacle> {
        (-5.0..5.0f64, -5.0..5.0f64, 0.1..2.0f64).prop_map(|(x, y, r)| CircularObstacle::new(x, y, r))
    }

    proptest! {
        // The analytic A matches a finite difference of h along the motion
        // induced by a unit control direction, to first order in dt.
        #[test]
        fn row_matches_finite_difference(
            o in arb_obstacle(),
            x in -5.0..5.0f64,
            y in -5.0..5.0f64,
            theta in -7.0..7.0f64,
        ) {
            let model = unicycle_model();
            let state = State::new(x, y, theta);
            let row = barrier_row(&model, &o, &state, &ClassKappa::linear(1.0));
            let dt = 1e-6;
            for (unit, a_k) in [(ControlInput::new(1.0, 0.0), row.a.x), (ControlInput::new(0.0, 1.0), row.a.y)] {
                let fwd = step(&model, &state, &unit, &Vector2::zeros(), dt).unwrap();
                let bwd = step(&model, &state, &ControlInput::new(-unit.v, -unit.omega), &Vector2::zeros(), dt).unwrap();
                let fd = (h(&o, fwd.x, fwd.y) - h(&o, bwd.x, bwd.y)) / (2.0 * dt);
                prop_assert!((fd - a_k).abs() <= 1e-4 + 1e-4 * a_k.abs());
            }
        }

        #[test]
        fn h_translation_invariant(
            o in arb_obstacle(),
            x in -5.0..5.0f64,
            y in -5.0..5.0f64,
            sx in -3.0..3.0f64,
            sy in -3.0..3.0f64,
        ) {
            let shifted = CircularObstacle::new(o.cx + sx, o.cy + sy, o.r);
            let a = h(&o, x, y);
            let b = h(&shifted, x + sx, y + sy);
            prop_assert!((a - b).abs() <= 1e-9);
        }

        // With L_f h = 0, b(2γ) − b(γ) = −γ·h for the linear class-K.
        #[test]
        fn linear_alpha_scales_in_gamma(
            o in arb_obstacle(),
            x in -5.0..5.0f64,
            y in -5.0..5.0f64,
            theta in -7.0..7.0f64,
            gamma in 0.1..4.0f64,
        ) {
            let model = unicycle_model();
            let state = State::new(x, y, theta);
            let r1 = barrier_row(&model, &o, &state, &ClassKappa::linear(gamma));
            let r2 = barrier_row(&model, &o, &state, &ClassKappa::linear(2.0 * gamma));
            let hv = h(&o, x, y);
            prop_assert!((r2.b - r1.b + gamma * hv).abs() <= 1e-9 * (1.0 + hv.abs()));
        }
    }
}
