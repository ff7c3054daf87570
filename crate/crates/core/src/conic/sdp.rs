//! Interior-point solver for the trust-region distribution-reshaping problem.
//!
//! The problem reshapes a Gaussian control distribution `N(μ, PPᵀ)` to the
//! closest safe one:
//!
//! ```text
//!   minimize  ‖μ − μ0‖₁ + ‖P − P0‖
//!   s.t.      A_j·μ − c·‖A_jᵀP‖² ≥ b_j   for every barrier row j
//!             P lower-triangular, diag(P) ≥ 0
//! ```
//!
//! Each row constraint is the Schur complement of the block LMI
//! `[[I, √c·A P], [√c·PᵀAᵀ, A·μ − b]] ⪰ 0`, so `−log` of the scalar residual
//! is exactly the log-det barrier of the block. The ℓ1 term is split into
//! slack variables, the Frobenius norm uses the second-order-cone barrier and
//! the spectral norm uses the log-det barrier of the 4×4 epigraph block.
//!
//! Solver: log-barrier with Newton centering, barrier parameter ×10 per
//! outer stage, duality-gap estimate ≤ 1e−6, Newton cap 100 per stage,
//! outer cap 20. Strictly feasible points are found exactly through the
//! active-set QP (feasibility of the whole problem reduces to feasibility of
//! the row polyhedron as `P → 0`).

use nalgebra::{Matrix2, Matrix4, RowVector2, SMatrix, SVector, Vector2};

use crate::barrier::{BarrierRow, DEGENERATE_ROW_NORM};
use crate::conic::qp::{solve_qp, QpProblem};

/// Matrix norm used for the `‖P − P0‖` term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixNorm {
    Frobenius,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct TrustRegionSdp {
    pub mu0: Vector2<f64>,
    /// Lower-triangular factor with `Σ0 = P0·P0ᵀ` and nonnegative diagonal.
    pub p0: Matrix2<f64>,
    pub rows: Vec<BarrierRow>,
    /// Trust-region scale multiplying the variance term.
    pub c: f64,
    pub norm_p: MatrixNorm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub mu: Vector2<f64>,
    pub p: Matrix2<f64>,
    pub cost: f64,
    pub status: SdpStatus,
}

const GAP_TOL: f64 = 1e-6;
const KAPPA_GROWTH: f64 = 10.0;
const NEWTON_CAP: usize = 100;
fn newton_cap() -> usize { std::env::var("SDP_NEWTON_CAP").ok().and_then(|v| v.parse().ok()).unwrap_or(NEWTON_CAP) }
fn kappa0() -> f64 { std::env::var("SDP_KAPPA0").ok().and_then(|v| v.parse().ok()).unwrap_or(1.0) }
const OUTER_CAP: usize = 20;
const NEWTON_TOL: f64 = 2e-9; // decrement λ² threshold (λ²/2 ≤ 1e-9)

/// Largest singular value of a 2×2 matrix, in closed form.
pub fn spectral_norm_2x2(m: &Matrix2<f64>) -> f64 {
    let t = m.iter().map(|v| v * v).sum::<f64>();
    let d = m.m11 * m.m22 - m.m12 * m.m21;
    let disc = (t * t - 4.0 * d * d).max(0.0).sqrt();
    ((t + disc) / 2.0).sqrt()
}

fn norm_of(m: &Matrix2<f64>, norm: MatrixNorm) -> f64 {
    match norm {
        MatrixNorm::Frobenius => m.iter().map(|v| v * v).sum::<f64>().sqrt(),
        MatrixNorm::Spectral => spectral_norm_2x2(m),
    }
}

/// Row data after degenerate filtering: `a1·μ1 + a2·μ2 − c‖aᵀP‖² ≥ b`.
#[derive(Debug, Clone, Copy)]
struct Row {
    a1: f64,
    a2: f64,
    b: f64,
}

impl Row {
    fn residual(&self, mu: &Vector2<f64>, p: &Matrix2<f64>, c: f64) -> f64 {
        let v1 = self.a1 * p.m11 + self.a2 * p.m21;
        let v2 = self.a2 * p.m22;
        self.a1 * mu.x + self.a2 * mu.y - c * (v1 * v1 + v2 * v2) - self.b
    }
}

/// Schur-complement residual `A·μ − c‖AᵀP‖² − b` of one barrier row.
pub fn schur_residual(
    a: &RowVector2<f64>,
    b: f64,
    c: f64,
    mu: &Vector2<f64>,
    p: &Matrix2<f64>,
) -> f64 {
    Row {
        a1: a.x,
        a2: a.y,
        b,
    }
    .residual(mu, p, c)
}

pub fn solve_trust_region_sdp(problem: &TrustRegionSdp) -> SdpSolution {
    assert!(problem.c > 0.0, "trust-region scale must be positive");
    assert!(
        problem.p0.m12 == 0.0 && problem.p0.m11 >= 0.0 && problem.p0.m22 >= 0.0,
        "P0 must be lower-triangular with nonnegative diagonal"
    );
    assert!(
        problem.mu0.iter().all(|v| v.is_finite()) && problem.p0.iter().all(|v| v.is_finite()),
        "non-finite reference distribution"
    );

    let infeasible = || SdpSolution {
        mu: problem.mu0,
        p: problem.p0,
        cost: f64::INFINITY,
        status: SdpStatus::Infeasible,
    };

    // Degenerate rows are vacuous when their right-hand side is nonpositive
    // and unsatisfiable otherwise.
    let mut rows: Vec<Row> = Vec::with_capacity(problem.rows.len());
    for r in &problem.rows {
        if r.a.norm() < DEGENERATE_ROW_NORM {
            if r.b > 0.0 {
                return infeasible();
            }
        } else {
            rows.push(Row {
                a1: r.a.x,
                a2: r.a.y,
                b: r.b,
            });
        }
    }

    // A nonnegative cost that vanishes at a feasible reference is optimal there.
    if rows
        .iter()
        .all(|r| r.residual(&problem.mu0, &problem.p0, problem.c) >= 0.0)
    {
        return SdpSolution {
            mu: problem.mu0,
            p: problem.p0,
            cost: 0.0,
            status: SdpStatus::Optimal,
        };
    }

    let Some((mu_start, p_start)) = find_interior_point(problem, &rows) else {
        return infeasible();
    };

    let (mu, p, converged) = if rows.iter().all(|r| r.a2 == 0.0) {
        solve_reduced(problem, &rows, mu_start, p_start)
    } else {
        solve_full(problem, &rows, mu_start, p_start)
    };

    let dmu = mu - problem.mu0;
    let cost = dmu.x.abs() + dmu.y.abs() + norm_of(&(p - problem.p0), problem.norm_p);
    SdpSolution {
        mu,
        p,
        cost,
        status: if converged {
            SdpStatus::Optimal
        } else {
            SdpStatus::MaxIterations
        },
    }
}

/// Find a strictly feasible `(μ, P)`.
///
/// The rows depend on `P` only through `−c‖AᵀP‖² ≤ 0`, so the problem is
/// strictly feasible iff the row polyhedron over `μ` has an interior point;
/// the active-set QP decides that exactly. Margins shrink geometrically so
/// thin-but-nonempty interiors are still found.
fn find_interior_point(
    problem: &TrustRegionSdp,
    rows: &[Row],
) -> Option<(Vector2<f64>, Matrix2<f64>)> {
    let scale = rows
        .iter()
        .map(|r| 1.0 + r.b.abs() + (r.a1 * r.a1 + r.a2 * r.a2).sqrt())
        .fold(1.0f64, f64::max);
    let max_a2 = rows
        .iter()
        .map(|r| r.a1 * r.a1 + r.a2 * r.a2)
        .fold(0.0f64, f64::max);

    let strictly_feasible = |mu: &Vector2<f64>, p: &Matrix2<f64>| {
        p.m11 > 0.0
            && p.m22 > 0.0
            && rows.iter().all(|r| r.residual(mu, p, problem.c) > 0.0)
    };

    // Prefer staying at P0 (zero norm cost) when the rows allow it.
    let p0_lifted = {
        let lift = 1e-6 * (1.0 + problem.p0.abs().max());
        Matrix2::new(
            problem.p0.m11.max(lift),
            0.0,
            problem.p0.m21,
            problem.p0.m22.max(lift),
        )
    };
    let margin = 1e-4 * scale;
    let qp_rows = rows
        .iter()
        .map(|r| {
            let a = Vector2::new(r.a1, r.a2);
            let v1 = r.a1 * p0_lifted.m11 + r.a2 * p0_lifted.m21;
            let v2 = r.a2 * p0_lifted.m22;
            (a, r.b + problem.c * (v1 * v1 + v2 * v2) + margin)
        })
        .collect();
    if let Ok(mu) = solve_qp(&QpProblem {
        center: problem.mu0,
        rows: qp_rows,
    }) {
        if strictly_feasible(&mu, &p0_lifted) {
            return Some((mu, p0_lifted));
        }
    }

    // Shrink the covariance toward zero: feasibility then only depends on μ.
    for rel_margin in [1e-3, 1e-6, 1e-9] {
        let margin = rel_margin * scale;
        let eps = (margin / (2.0 * problem.c * max_a2.max(1e-300))).sqrt();
        let p_eps = Matrix2::new(eps, 0.0, 0.0, eps);
        let qp_rows = rows
            .iter()
            .map(|r| (Vector2::new(r.a1, r.a2), r.b + margin))
            .collect();
        if let Ok(mu) = solve_qp(&QpProblem {
            center: problem.mu0,
            rows: qp_rows,
        }) {
            if strictly_feasible(&mu, &p_eps) {
                return Some((mu, p_eps));
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Barrier models
// ---------------------------------------------------------------------------

trait BarrierModel<const N: usize> {
    /// Barrier value at `z`, or `None` outside the strict interior.
    fn value(&self, z: &SVector<f64, N>) -> Option<f64>;
    fn grad_hess(&self, z: &SVector<f64, N>, grad: &mut SVector<f64, N>, hess: &mut SMatrix<f64, N, N>);
    /// Barrier degree ν for the duality-gap estimate ν/κ.
    fn degree(&self) -> f64;
    fn objective(&self) -> SVector<f64, N>;
}

fn solve_spd<const N: usize>(
    mut h: SMatrix<f64, N, N>,
    rhs: SVector<f64, N>,
) -> SVector<f64, N> {
    let base = 1.0 + (0..N).map(|i| h[(i, i)].abs()).fold(0.0f64, f64::max);
    let mut ridge = 0.0;
    loop {
        if ridge > 0.0 {
            for i in 0..N {
                h[(i, i)] += ridge;
            }
        }
        if let Some(chol) = nalgebra::Cholesky::new(h) {
            return chol.solve(&rhs);
        }
        ridge = if ridge == 0.0 { 1e-12 * base } else { ridge * 100.0 };
        assert!(ridge.is_finite(), "Hessian regularization diverged");
    }
}

/// Log-barrier path following with Newton centering and backtracking.
fn minimize<const N: usize>(
    model: &impl BarrierModel<N>,
    z0: SVector<f64, N>,
) -> (SVector<f64, N>, bool) {
    let mut z = z0;
    debug_assert!(model.value(&z).is_some(), "barrier start must be interior");
    let obj = model.objective();
    let mut kappa = kappa0();
    let mut clean = true;
    let trace = std::env::var_os("SDP_TRACE").is_some();
    for _ in 0..OUTER_CAP {
        let mut centered = false;
        let mut newtons = 0;
        for _ in 0..newton_cap() {
            newtons += 1;
            let mut g = SVector::<f64, N>::zeros();
            let mut h = SMatrix::<f64, N, N>::zeros();
            model.grad_hess(&z, &mut g, &mut h);
            g += obj * kappa;
            let dz = solve_spd(h, -g);
            let decrement = -g.dot(&dz);
            // Centering to λ²/2 ≤ tol·κ keeps the objective error below tol
            // regardless of the barrier scale.
            if decrement <= NEWTON_TOL * kappa {
                centered = true;
                break;
            }
            let phi0 = model.value(&z).expect("iterate left the interior");
            let psi0 = kappa * obj.dot(&z) + phi0;
            let slope = g.dot(&dz);
            let mut alpha = 1.0;
            let mut stepped = false;
            while alpha >= 1e-12 {
                let zn = z + dz * alpha;
                if let Some(phi) = model.value(&zn) {
                    let psi = kappa * obj.dot(&zn) + phi;
                    if psi <= psi0 + 0.25 * alpha * slope {
                        if trace && newtons <= 15 {
                            eprintln!(
                                "  n={newtons} dec={decrement:.3e} alpha={alpha:.3e} psi {psi0:.6e} -> {psi:.6e} slope={slope:.3e}"
                            );
                        }
                        z = zn;
                        stepped = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !stepped {
                // No productive step exists at this scale; treat as centered.
                centered = true;
                break;
            }
        }
        if trace {
            eprintln!(
                "kappa={kappa:.1e} newtons={newtons} centered={centered} obj={:.6} z={:?}",
                obj.dot(&z),
                z.as_slice()
            );
        }
        if !centered {
            clean = false;
        }
        if model.degree() / kappa <= GAP_TOL {
            return (z, clean);
        }
        kappa *= KAPPA_GROWTH;
    }
    (z, false)
}

/// Accumulate `−log(aᵀz + b0)` into the barrier value.
#[inline]
fn linear_value<const N: usize>(a: &SVector<f64, N>, b0: f64, z: &SVector<f64, N>) -> Option<f64> {
    let g = a.dot(z) + b0;
    (g > 0.0).then(|| -g.ln())
}

#[inline]
fn linear_grad_hess<const N: usize>(
    a: &SVector<f64, N>,
    b0: f64,
    z: &SVector<f64, N>,
    grad: &mut SVector<f64, N>,
    hess: &mut SMatrix<f64, N, N>,
) {
    let g = a.dot(z) + b0;
    let inv = 1.0 / g;
    *grad -= a * inv;
    hess.syger(inv * inv, a, a, 1.0);
}

// --- Reduced model -----------------------------------------------------------
//
// When every row has `a2 = 0` (the planar-robot pattern: the angular rate
// never enters the barrier derivative), the optimum keeps `μ2, p21, p22` at
// their reference values and both matrix norms reduce to `|p11 − P0_11|`.
// Variables: z = [μ1, p11, s, t].

struct ReducedModel {
    lin: Vec<(SVector<f64, 4>, f64)>,
    rows: Vec<(f64, f64)>, // (a1, b)
    c: f64,
}

impl ReducedModel {
    fn new(problem: &TrustRegionSdp, rows: &[Row]) -> Self {
        let mu0 = problem.mu0.x;
        let q0 = problem.p0.m11;
        let lin = vec![
            (SVector::<f64, 4>::new(-1.0, 0.0, 1.0, 0.0), mu0),
            (SVector::<f64, 4>::new(1.0, 0.0, 1.0, 0.0), -mu0),
            (SVector::<f64, 4>::new(0.0, -1.0, 0.0, 1.0), q0),
            (SVector::<f64, 4>::new(0.0, 1.0, 0.0, 1.0), -q0),
            (SVector::<f64, 4>::new(0.0, 1.0, 0.0, 0.0), 0.0),
        ];
        ReducedModel {
            lin,
            rows: rows.iter().map(|r| (r.a1, r.b)).collect(),
            c: problem.c,
        }
    }
}

impl BarrierModel<4> for ReducedModel {
    fn value(&self, z: &SVector<f64, 4>) -> Option<f64> {
        let mut phi = 0.0;
        for (a, b0) in &self.lin {
            phi += linear_value(a, *b0, z)?;
        }
        for &(a1, b) in &self.rows {
            let q = a1 * z[0] - self.c * a1 * a1 * z[1] * z[1] - b;
            if q <= 0.0 {
                return None;
            }
            phi -= q.ln();
        }
        Some(phi)
    }

    fn grad_hess(&self, z: &SVector<f64, 4>, grad: &mut SVector<f64, 4>, hess: &mut SMatrix<f64, 4, 4>) {
        for (a, b0) in &self.lin {
            linear_grad_hess(a, *b0, z, grad, hess);
        }
        for &(a1, b) in &self.rows {
            let ca2 = self.c * a1 * a1;
            let q = a1 * z[0] - ca2 * z[1] * z[1] - b;
            let dq = SVector::<f64, 4>::new(a1, -2.0 * ca2 * z[1], 0.0, 0.0);
            let inv = 1.0 / q;
            *grad -= dq * inv;
            hess.syger(inv * inv, &dq, &dq, 1.0);
            hess[(1, 1)] += 2.0 * ca2 * inv;
        }
    }

    fn degree(&self) -> f64 {
        (self.lin.len() + self.rows.len()) as f64
    }

    fn objective(&self) -> SVector<f64, 4> {
        SVector::<f64, 4>::new(0.0, 0.0, 1.0, 1.0)
    }
}

fn solve_reduced(
    problem: &TrustRegionSdp,
    rows: &[Row],
    mu_start: Vector2<f64>,
    p_start: Matrix2<f64>,
) -> (Vector2<f64>, Matrix2<f64>, bool) {
    let model = ReducedModel::new(problem, rows);
    let z0 = SVector::<f64, 4>::new(
        mu_start.x,
        p_start.m11,
        (mu_start.x - problem.mu0.x).abs() + 1.0,
        (p_start.m11 - problem.p0.m11).abs() + 1.0,
    );
    let (z, converged) = minimize(&model, z0);
    let mu = Vector2::new(z[0], problem.mu0.y);
    let p = Matrix2::new(z[1], 0.0, problem.p0.m21, problem.p0.m22);
    (mu, p, converged)
}

// --- Full model --------------------------------------------------------------
//
// Variables: z = [μ1, μ2, p11, p21, p22, s1, s2, t].

struct FullModel {
    lin: Vec<(SVector<f64, 8>, f64)>,
    rows: Vec<Row>,
    c: f64,
    p0: Matrix2<f64>,
    norm: MatrixNorm,
}

pub(crate) const IM1: usize = 0;
pub(crate) const IM2: usize = 1;
pub(crate) const IP11: usize = 2;
pub(crate) const IP21: usize = 3;
pub(crate) const IP22: usize = 4;
pub(crate) const IS1: usize = 5;
pub(crate) const IS2: usize = 6;
pub(crate) const IT: usize = 7;

impl FullModel {
    fn new(problem: &TrustRegionSdp, rows: &[Row]) -> Self {
        let e = |idx: &[(usize, f64)]| {
            let mut v = SVector::<f64, 8>::zeros();
            for &(i, x) in idx {
                v[i] = x;
            }
            v
        };
        let lin = vec![
            (e(&[(IM1, -1.0), (IS1, 1.0)]), problem.mu0.x),
            (e(&[(IM1, 1.0), (IS1, 1.0)]), -problem.mu0.x),
            (e(&[(IM2, -1.0), (IS2, 1.0)]), problem.mu0.y),
            (e(&[(IM2, 1.0), (IS2, 1.0)]), -problem.mu0.y),
            (e(&[(IP11, 1.0)]), 0.0),
            (e(&[(IP22, 1.0)]), 0.0),
        ];
        FullModel {
            lin,
            rows: rows.to_vec(),
            c: problem.c,
            p0: problem.p0,
            norm: problem.norm_p,
        }
    }

    fn row_residual(&self, r: &Row, z: &SVector<f64, 8>) -> (f64, f64, f64) {
        let v1 = r.a1 * z[IP11] + r.a2 * z[IP21];
        let v2 = r.a2 * z[IP22];
        let q = r.a1 * z[IM1] + r.a2 * z[IM2] - self.c * (v1 * v1 + v2 * v2) - r.b;
        (q, v1, v2)
    }

    fn spectral_block(&self, z: &SVector<f64, 8>) -> Matrix4<f64> {
        let m11 = z[IP11] - self.p0.m11;
        let m21 = z[IP21] - self.p0.m21;
        let m22 = z[IP22] - self.p0.m22;
        let t = z[IT];
        Matrix4::new(
            t, 0.0, m11, 0.0, //
            0.0, t, m21, m22, //
            m11, m21, t, 0.0, //
            0.0, m22, 0.0, t,
        )
    }
}

impl BarrierModel<8> for FullModel {
    fn value(&self, z: &SVector<f64, 8>) -> Option<f64> {
        let mut phi = 0.0;
        for (a, b0) in &self.lin {
            phi += linear_value(a, *b0, z)?;
        }
        for r in &self.rows {
            let (q, _, _) = self.row_residual(r, z);
            if q <= 0.0 {
                return None;
            }
            phi -= q.ln();
        }
        match self.norm {
            MatrixNorm::Frobenius => {
                let m1 = z[IP11] - self.p0.m11;
                let m2 = z[IP21] - self.p0.m21;
                let m3 = z[IP22] - self.p0.m22;
                let t = z[IT];
                let g = t * t - (m1 * m1 + m2 * m2 + m3 * m3);
                if t <= 0.0 || g <= 0.0 {
                    return None;
                }
                phi -= g.ln();
            }
            MatrixNorm::Spectral => {
                let s = self.spectral_block(z);
                let chol = nalgebra::Cholesky::new(s)?;
                let ldet: f64 = (0..4).map(|i| chol.l_dirty()[(i, i)].ln()).sum();
                phi -= 2.0 * ldet;
            }
        }
        Some(phi)
    }

    fn grad_hess(&self, z: &SVector<f64, 8>, grad: &mut SVector<f64, 8>, hess: &mut SMatrix<f64, 8, 8>) {
        for (a, b0) in &self.lin {
            linear_grad_hess(a, *b0, z, grad, hess);
        }
        for r in &self.rows {
            let (q, v1, v2) = self.row_residual(r, z);
            let inv = 1.0 / q;
            let mut dq = SVector::<f64, 8>::zeros();
            dq[IM1] = r.a1;
            dq[IM2] = r.a2;
            dq[IP11] = -2.0 * self.c * v1 * r.a1;
            dq[IP21] = -2.0 * self.c * v1 * r.a2;
            dq[IP22] = -2.0 * self.c * v2 * r.a2;
            *grad -= dq * inv;
            hess.syger(inv * inv, &dq, &dq, 1.0);
            // −Hq/q with Hq = −2c(d1·d1ᵀ + d2·d2ᵀ)
            let mut d1 = SVector::<f64, 8>::zeros();
            d1[IP11] = r.a1;
            d1[IP21] = r.a2;
            hess.syger(2.0 * self.c * inv, &d1, &d1, 1.0);
            let scale = 2.0 * self.c * r.a2 * r.a2 * inv;
            hess[(IP22, IP22)] += scale;
        }
        match self.norm {
            MatrixNorm::Frobenius => {
                let m1 = z[IP11] - self.p0.m11;
                let m2 = z[IP21] - self.p0.m21;
                let m3 = z[IP22] - self.p0.m22;
                let t = z[IT];
                let g = t * t - (m1 * m1 + m2 * m2 + m3 * m3);
                let inv = 1.0 / g;
                let mut dg = SVector::<f64, 8>::zeros();
                dg[IP11] = -2.0 * m1;
                dg[IP21] = -2.0 * m2;
                dg[IP22] = -2.0 * m3;
                dg[IT] = 2.0 * t;
                *grad -= dg * inv;
                hess.syger(inv * inv, &dg, &dg, 1.0);
                hess[(IP11, IP11)] += 2.0 * inv;
                hess[(IP21, IP21)] += 2.0 * inv;
                hess[(IP22, IP22)] += 2.0 * inv;
                hess[(IT, IT)] -= 2.0 * inv;
            }
            MatrixNorm::Spectral => {
                let s = self.spectral_block(z);
                let sinv = nalgebra::Cholesky::new(s)
                    .expect("spectral block lost definiteness")
                    .inverse();
                // Constant derivative matrices of the affine block.
                let mut f = [Matrix4::<f64>::zeros(); 4];
                f[0][(0, 2)] = 1.0;
                f[0][(2, 0)] = 1.0; // p11
                f[1][(1, 2)] = 1.0;
                f[1][(2, 1)] = 1.0; // p21
                f[2][(1, 3)] = 1.0;
                f[2][(3, 1)] = 1.0; // p22
                f[3] = Matrix4::identity(); // t
                let vars = [IP11, IP21, IP22, IT];
                let w: Vec<Matrix4<f64>> = f.iter().map(|fi| sinv * fi).collect();
                for (i, &vi) in vars.iter().enumerate() {
                    grad[vi] -= w[i].trace();
                    for (j, &vj) in vars.iter().enumerate() {
                        if vj >= vi {
                            let tr = (w[i] * w[j]).trace();
                            hess[(vi, vj)] += tr;
                            if vi != vj {
                                hess[(vj, vi)] += tr;
                            }
                        }
                    }
                }
            }
        }
    }

    fn degree(&self) -> f64 {
        let norm_deg = match self.norm {
            MatrixNorm::Frobenius => 2.0,
            MatrixNorm::Spectral => 4.0,
        };
        (self.lin.len() + self.rows.len()) as f64 + norm_deg
    }

    fn objective(&self) -> SVector<f64, 8> {
        let mut c = SVector::<f64, 8>::zeros();
        c[IS1] = 1.0;
        c[IS2] = 1.0;
        c[IT] = 1.0;
        c
    }
}

fn solve_full(
    problem: &TrustRegionSdp,
    rows: &[Row],
    mu_start: Vector2<f64>,
    p_start: Matrix2<f64>,
) -> (Vector2<f64>, Matrix2<f64>, bool) {
    let model = FullModel::new(problem, rows);
    let mut z0 = SVector::<f64, 8>::zeros();
    z0[IM1] = mu_start.x;
    z0[IM2] = mu_start.y;
    z0[IP11] = p_start.m11;
    z0[IP21] = p_start.m21;
    z0[IP22] = p_start.m22;
    z0[IS1] = (mu_start.x - problem.mu0.x).abs() + 1.0;
    z0[IS2] = (mu_start.y - problem.mu0.y).abs() + 1.0;
    z0[IT] = norm_of(&(p_start - problem.p0), problem.norm_p) + 1.0;
    let (z, converged) = minimize(&model, z0);
    let mu = Vector2::new(z[IM1], z[IM2]);
    let p = Matrix2::new(z[IP11], 0.0, z[IP21], z[IP22]);
    (mu, p, converged)
}

// ---------------------------------------------------------------------------
// Brute-force oracle
// ---------------------------------------------------------------------------

/// Exact minimum of `‖μ − μ0‖₁` over `{a_j·μ ≥ rhs_j}` in the plane.
///
/// The optimum of an ℓ1 projection onto a polygon sits at the unconstrained
/// point, at a kink of an edge (where one coordinate equals its reference),
/// or at a vertex; enumerating those is exhaustive. Returns `None` iff the
/// polygon is empty.
fn l1_projection(mu0: &Vector2<f64>, rows: &[(Vector2<f64>, f64)]) -> Option<f64> {
    let mut candidates: Vec<Vector2<f64>> = vec![*mu0];
    for &(a, rhs) in rows {
        if a.norm() < DEGENERATE_ROW_NORM {
            if rhs > 0.0 {
                return None;
            }
            continue;
        }
        if a.y.abs() > 1e-14 {
            candidates.push(Vector2::new(mu0.x, (rhs - a.x * mu0.x) / a.y));
        }
        if a.x.abs() > 1e-14 {
            candidates.push(Vector2::new((rhs - a.y * mu0.y) / a.x, mu0.y));
        }
    }
    for i in 0..rows.len() {
        for j in (i + 1)..rows.len() {
            let (ai, ri) = rows[i];
            let (aj, rj) = rows[j];
            let det = ai.x * aj.y - ai.y * aj.x;
            if det.abs() < 1e-12 * ai.norm() * aj.norm() {
                continue;
            }
            candidates.push(Vector2::new(
                (ri * aj.y - rj * ai.y) / det,
                (ai.x * rj - aj.x * ri) / det,
            ));
        }
    }
    let feasible = |u: &Vector2<f64>| {
        rows.iter().all(|(a, rhs)| {
            a.norm() < DEGENERATE_ROW_NORM || a.dot(u) >= rhs - 1e-12 * (1.0 + rhs.abs())
        })
    };
    candidates
        .into_iter()
        .filter(|u| feasible(u))
        .map(|u| (u.x - mu0.x).abs() + (u.y - mu0.y).abs())
        .fold(None, |best, c| match best {
            Some(b) if b <= c => Some(b),
            _ => Some(c),
        })
}

/// Brute-force oracle: nested grid over the factor entries `(p11, p21, p22)`
/// combined with the exact closed-form ℓ1 projection over `μ` at each grid
/// point. The partially minimized cost is convex and smooth in `P`, so box
/// refinement around the incumbent converges; a feasibility witness keeps an
/// incumbent available on coarse levels. Returns the best cost found.
pub fn grid_trust_region_oracle(
    problem: &TrustRegionSdp,
    witness: Option<(Vector2<f64>, Matrix2<f64>)>,
    half_range: f64,
    levels: usize,
) -> Option<f64> {
    let mut rows: Vec<Row> = Vec::new();
    for r in &problem.rows {
        if r.a.norm() < DEGENERATE_ROW_NORM {
            if r.b > 0.0 {
                return None;
            }
            continue;
        }
        rows.push(Row {
            a1: r.a.x,
            a2: r.a.y,
            b: r.b,
        });
    }

    let cost_at = |p: &Matrix2<f64>| -> Option<f64> {
        if p.m11 < 0.0 || p.m22 < 0.0 {
            return None;
        }
        let shifted: Vec<(Vector2<f64>, f64)> = rows
            .iter()
            .map(|r| {
                let v1 = r.a1 * p.m11 + r.a2 * p.m21;
                let v2 = r.a2 * p.m22;
                (
                    Vector2::new(r.a1, r.a2),
                    r.b + problem.c * (v1 * v1 + v2 * v2),
                )
            })
            .collect();
        let mu_cost = l1_projection(&problem.mu0, &shifted)?;
        Some(mu_cost + norm_of(&(p - problem.p0), problem.norm_p))
    };

    let mut best: Option<(f64, [f64; 3])> = None;
    let mut consider = |entries: [f64; 3], best: &mut Option<(f64, [f64; 3])>| {
        let p = Matrix2::new(entries[0], 0.0, entries[1], entries[2]);
        if let Some(c) = cost_at(&p) {
            if best.map_or(true, |(bc, _)| c < bc) {
                *best = Some((c, entries));
            }
        }
    };
    consider(
        [problem.p0.m11, problem.p0.m21, problem.p0.m22],
        &mut best,
    );
    if let Some((_, wp)) = witness {
        consider([wp.m11, wp.m21, wp.m22], &mut best);
    }

    let mut center = best.map(|(_, b)| b).unwrap_or([
        problem.p0.m11,
        problem.p0.m21,
        problem.p0.m22,
    ]);
    let mut half = half_range;
    const STEPS: i64 = 7; // 15 points per axis
    for _ in 0..levels {
        for i0 in -STEPS..=STEPS {
            for i1 in -STEPS..=STEPS {
                for i2 in -STEPS..=STEPS {
                    consider(
                        [
                            center[0] + half * i0 as f64 / STEPS as f64,
                            center[1] + half * i1 as f64 / STEPS as f64,
                            center[2] + half * i2 as f64 / STEPS as f64,
                        ],
                        &mut best,
                    );
                }
            }
        }
        if let Some((_, b)) = best {
            center = b;
        }
        half *= 0.5;
    }
    best.map(|(c, _)| c)
}

/// Random feasible instance built around a witness distribution; shared by
/// the solver tests and the standard-form cross-checks.
#[cfg(test)]
pub(crate) fn random_instance(
    rng: &mut rand_chacha::ChaCha8Rng,
    norm: MatrixNorm,
) -> (TrustRegionSdp, Vector2<f64>, Matrix2<f64>) {
    use rand::Rng;
    let witness_mu = Vector2::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
    let witness_p = Matrix2::new(
        rng.gen_range(0.05..1.2),
        0.0,
        rng.gen_range(-0.8..0.8),
        rng.gen_range(0.05..1.2),
    );
    let c = rng.gen_range(0.5..3.0);
    let n_rows = rng.gen_range(1..=3);
    let rows = (0..n_rows)
        .map(|_| {
            let a = RowVector2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let v1 = a.x * witness_p.m11 + a.y * witness_p.m21;
            let v2 = a.y * witness_p.m22;
            let slack = rng.gen_range(0.05..1.5);
            let b = a.x * witness_mu.x + a.y * witness_mu.y - c * (v1 * v1 + v2 * v2) - slack;
            BarrierRow { a, b, h_value: 0.0 }
        })
        .collect();
    let problem = TrustRegionSdp {
        mu0: Vector2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
        p0: Matrix2::new(
            rng.gen_range(0.0..1.5),
            0.0,
            rng.gen_range(-1.0..1.0),
            rng.gen_range(0.0..1.5),
        ),
        rows,
        c,
        norm_p: norm,
    };
    (problem, witness_mu, witness_p)
}
