//! Exact projection onto an intersection of half-spaces in the plane.
//!
//! The filter variant needs `argmin ‖u − center‖²` subject to `a_i·u ≥ rhs_i`.
//! With two control dimensions and a handful of rows, the KKT point has an
//! active set of size 0, 1 or 2, so enumerating the candidates is exact.

use nalgebra::Vector2;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    /// The point to stay close to (the nominal control).
    pub center: Vector2<f64>,
    /// Half-space rows, each meaning `a·u ≥ rhs`.
    pub rows: Vec<(Vector2<f64>, f64)>,
}

#[derive(Debug, Error, PartialEq)]
pub enum QpError {
    #[error("half-space intersection is empty")]
    Infeasible,
    #[error("non-finite entry in QP data")]
    NonFinite,
}

const DEGENERATE_NORM: f64 = 1e-12;

/// Exact minimizer of `‖u − center‖²` over `{u : a_i·u ≥ rhs_i ∀i}`.
pub fn solve_qp(problem: &QpProblem) -> Result<Vector2<f64>, QpError> {
    if !problem.center.iter().all(|v| v.is_finite())
        || !problem
            .rows
            .iter()
            .all(|(a, r)| a.iter().all(|v| v.is_finite()) && r.is_finite())
    {
        return Err(QpError::NonFinite);
    }

    // Degenerate rows constrain nothing when the right-hand side is
    // non-positive and make the problem infeasible otherwise.
    let mut rows: Vec<(Vector2<f64>, f64)> = Vec::with_capacity(problem.rows.len());
    for &(a, rhs) in &problem.rows {
        if a.norm() < DEGENERATE_NORM {
            if rhs > 0.0 {
                return Err(QpError::Infeasible);
            }
        } else {
            rows.push((a, rhs));
        }
    }

    let scale = rows
        .iter()
        .map(|(a, r)| a.norm().max(r.abs()))
        .fold(1.0f64, f64::max)
        .max(problem.center.norm());
    let feas_tol = 1e-9 * scale;
    let feasible = |u: &Vector2<f64>| rows.iter().all(|(a, rhs)| a.dot(u) >= rhs - feas_tol);

    let mut best: Option<(f64, Vector2<f64>)> = None;
    let mut consider = |u: Vector2<f64>| {
        if feasible(&u) {
            let d = (u - problem.center).norm_squared();
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, u));
            }
        }
    };

    // Unconstrained optimum.
    consider(problem.center);

    // One active row: projection onto its boundary.
    for &(a, rhs) in &rows {
        let u = problem.center + a * ((rhs - a.dot(&problem.center)) / a.norm_squared());
        consider(u);
    }

    // Two active rows: the intersection vertex.
    for i in 0..rows.len() {
        for j in (i + 1)..rows.len() {
            let (ai, ri) = rows[i];
            let (aj, rj) = rows[j];
            let det = ai.x * aj.y - ai.y * aj.x;
            if det.abs() < DEGENERATE_NORM * ai.norm() * aj.norm() {
                continue;
            }
            let u = Vector2::new((ri * aj.y - rj * ai.y) / det, (ai.x * rj - aj.x * ri) / det);
            consider(u);
        }
    }

    best.map(|(_, u)| u).ok_or(QpError::Infeasible)
}

/// Brute-force minimizer over a refined grid, for validating `solve_qp`.
///
/// Starts from `half_range` around `center_hint` and shrinks the box around
/// the incumbent; the objective and feasible set are convex, so nested
/// refinement converges to the global minimum. A feasible `witness` keeps an
/// incumbent available even when the coarse grid misses a thin feasible set.
pub fn grid_qp_oracle(
    problem: &QpProblem,
    center_hint: Vector2<f64>,
    half_range: f64,
    witness: Option<Vector2<f64>>,
    levels: usize,
) -> Option<Vector2<f64>> {
    let feasible = |u: &Vector2<f64>| problem.rows.iter().all(|(a, rhs)| a.dot(u) >= *rhs);
    let cost = |u: &Vector2<f64>| (u - problem.center).norm_squared();

    let mut best: Option<(f64, Vector2<f64>)> = witness
        .filter(feasible)
        .map(|w| (cost(&w), w));
    let mut center = center_hint;
    let mut half = half_range;
    const POINTS: i64 = 20;
    for _ in 0..levels {
        for ix in -POINTS..=POINTS {
            for iy in -POINTS..=POINTS {
                let u = Vector2::new(
                    center.x + half * ix as f64 / POINTS as f64,
                    center.y + half * iy as f64 / POINTS as f64,
                );
                if feasible(&u) {
                    let d = cost(&u);
                    if best.map_or(true, |(bd, _)| d < bd) {
                        best = Some((d, u));
                    }
                }
            }
        }
        if let Some((_, b)) = best {
            center = b;
        }
        half *= 0.5;
    }
    best.map(|(_, u)| u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn inactive_constraint_returns_center() {
        let p = QpProblem {
            center: Vector2::new(1.0, 0.0),
            rows: vec![(Vector2::new(-4.4, 0.0), -8.59)],
        };
        assert_eq!(solve_qp(&p).unwrap(), Vector2::new(1.0, 0.0));
    }

    #[test]
    fn single_active_halfspace_projection() {
        let p = QpProblem {
            center: Vector2::new(0.0, 0.0),
            rows: vec![(Vector2::new(1.0, 0.0), 2.0)],
        };
        assert_eq!(solve_qp(&p).unwrap(), Vector2::new(2.0, 0.0));
    }

    #[test]
    fn vertex_solution() {
        // u ≥ 1 in both coordinates, center at origin: optimum at (1, 1).
        let p = QpProblem {
            center: Vector2::new(0.0, 0.0),
            rows: vec![
                (Vector2::new(1.0, 0.0), 1.0),
                (Vector2::new(0.0, 1.0), 1.0),
            ],
        };
        let u = solve_qp(&p).unwrap();
        assert_abs_diff_eq!(u.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(u.y, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_polyhedron_is_infeasible() {
        let p = QpProblem {
            center: Vector2::new(0.0, 0.0),
            rows: vec![
                (Vector2::new(1.0, 0.0), 1.0),
                (Vector2::new(-1.0, 0.0), 1.0),
            ],
        };
        assert_eq!(solve_qp(&p), Err(QpError::Infeasible));
    }

    #[test]
    fn degenerate_rows() {
        let vacuous = QpProblem {
            center: Vector2::new(0.5, -0.5),
            rows: vec![(Vector2::new(0.0, 0.0), -3.0)],
        };
        assert_eq!(solve_qp(&vacuous).unwrap(), Vector2::new(0.5, -0.5));

        let impossible = QpProblem {
            center: Vector2::new(0.5, -0.5),
            rows: vec![(Vector2::new(0.0, 0.0), 3.0)],
        };
        assert_eq!(solve_qp(&impossible), Err(QpError::Infeasible));
    }

    #[test]
    fn random_instances_match_grid_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..40 {
            // Construct instances with a known interior point so the
            // feasible set is never a sliver the grid could miss.
            let witness = Vector2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let n_rows = rng.gen_range(1..=4);
            let rows: Vec<(Vector2<f64>, f64)> = (0..n_rows)
                .map(|_| {
                    let a = Vector2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                    let slack = rng.gen_range(0.3..2.0);
                    (a, a.dot(&witness) - slack)
                })
                .collect();
            let p = QpProblem {
                center: Vector2::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)),
                rows,
            };
            let u = solve_qp(&p).unwrap();
            let oracle = grid_qp_oracle(&p, p.center, 8.0, Some(witness), 22).unwrap();
            let cost_solver = (u - p.center).norm_squared();
            let cost_oracle = (oracle - p.center).norm_squared();
            assert!(
                (cost_solver - cost_oracle).abs() <= 1e-4,
                "solver {cost_solver} vs oracle {cost_oracle}"
            );
            assert!(cost_solver <= cost_oracle + 1e-9);
        }
    }
}
