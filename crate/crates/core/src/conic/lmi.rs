//! Generic dense LMI solver used for validation and cross-checks.
//!
//! Problems are `min cᵀz` subject to blocks `S_k(z) = F_{k,0} + Σ z_i F_{k,i}`
//! being positive semidefinite. Solved with the log-det barrier; a shifted
//! phase-1 (`S_k + wI ⪰ 0`, minimize `w`) finds a strictly feasible start or
//! certifies infeasibility. This path is deliberately general and unhurried —
//! the hot loop uses the specialized trust-region solver instead.

use nalgebra::{DMatrix, DVector};

use super::sdp::MatrixNorm;

/// Symmetric matrix-valued affine function `S(z) = f0 + Σ z_i coeffs[i]`.
#[derive(Debug, Clone)]
pub struct AffineMatrix {
    pub f0: DMatrix<f64>,
    pub coeffs: Vec<DMatrix<f64>>,
}

impl AffineMatrix {
    pub fn dim(&self) -> usize {
        self.f0.nrows()
    }

    pub fn eval(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let mut s = self.f0.clone();
        for (zi, fi) in z.iter().zip(&self.coeffs) {
            s += fi * *zi;
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct LmiProgram {
    /// Minimize `objective · z`.
    pub objective: DVector<f64>,
    pub blocks: Vec<AffineMatrix>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LmiStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct LmiSolution {
    pub z: DVector<f64>,
    pub cost: f64,
    pub status: LmiStatus,
}

const GAP_TOL: f64 = 1e-8;
const NEWTON_CAP: usize = 100;
const OUTER_CAP: usize = 30;

fn log_det_barrier(blocks: &[AffineMatrix], z: &DVector<f64>) -> Option<f64> {
    let mut phi = 0.0;
    for b in blocks {
        let s = b.eval(z);
        let chol = s.cholesky()?;
        let l = chol.l();
        for i in 0..l.nrows() {
            let d = l[(i, i)];
            if !(d > 0.0) {
                return None;
            }
            phi -= 2.0 * d.ln();
        }
    }
    Some(phi)
}

fn barrier_grad_hess(
    blocks: &[AffineMatrix],
    z: &DVector<f64>,
    grad: &mut DVector<f64>,
    hess: &mut DMatrix<f64>,
) {
    let n = z.len();
    grad.fill(0.0);
    hess.fill(0.0);
    for b in blocks {
        let s = b.eval(z);
        let sinv = s
            .cholesky()
            .expect("barrier evaluated outside the interior")
            .inverse();
        let w: Vec<DMatrix<f64>> = b.coeffs.iter().map(|f| &sinv * f).collect();
        for i in 0..n {
            if b.coeffs[i].iter().all(|v| *v == 0.0) {
                continue;
            }
            grad[i] -= w[i].trace();
            for j in i..n {
                let tr = (&w[i] * &w[j]).trace();
                hess[(i, j)] += tr;
                if i != j {
                    hess[(j, i)] += tr;
                }
            }
        }
    }
}

fn centering(
    objective: &DVector<f64>,
    blocks: &[AffineMatrix],
    z: &mut DVector<f64>,
    kappa: f64,
    early_exit: &mut dyn FnMut(&DVector<f64>) -> bool,
) -> bool {
    let n = z.len();
    let mut grad = DVector::zeros(n);
    let mut hess = DMatrix::zeros(n, n);
    for _ in 0..NEWTON_CAP {
        if early_exit(z) {
            return true;
        }
        barrier_grad_hess(blocks, z, &mut grad, &mut hess);
        let g = &grad + objective * kappa;
        let mut h = hess.clone();
        let ridge = 1e-12 * (1.0 + h.diagonal().amax());
        for i in 0..n {
            h[(i, i)] += ridge;
        }
        let dz = match h.cholesky() {
            Some(ch) => ch.solve(&(-&g)),
            None => return false,
        };
        let decrement = -g.dot(&dz);
        if decrement <= 2e-9 * kappa.max(1.0) {
            return true;
        }
        let psi0 = kappa * objective.dot(z) + log_det_barrier(blocks, z).expect("interior lost");
        let slope = g.dot(&dz);
        let mut alpha = 1.0;
        let mut stepped = false;
        while alpha >= 1e-12 {
            let zn = &*z + &dz * alpha;
            if let Some(phi) = log_det_barrier(blocks, &zn) {
                if kappa * objective.dot(&zn) + phi <= psi0 + 0.25 * alpha * slope {
                    *z = zn;
                    stepped = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !stepped {
            return true;
        }
    }
    false
}

fn path_follow(
    objective: &DVector<f64>,
    blocks: &[AffineMatrix],
    z0: DVector<f64>,
    degree: f64,
    mut early_exit: impl FnMut(&DVector<f64>) -> bool,
) -> (DVector<f64>, bool) {
    let mut z = z0;
    let mut kappa = 1.0;
    let mut clean = true;
    for _ in 0..OUTER_CAP {
        if !centering(objective, blocks, &mut z, kappa, &mut early_exit) {
            clean = false;
        }
        if early_exit(&z) {
            return (z, true);
        }
        if degree / kappa <= GAP_TOL {
            return (z, clean);
        }
        kappa *= 10.0;
    }
    (z, false)
}

/// Solve `min cᵀz` over the intersection of the PSD blocks.
///
/// `start` is used directly when strictly feasible; otherwise a shifted
/// phase-1 searches for an interior point.
pub fn solve_lmi(program: &LmiProgram, start: Option<DVector<f64>>) -> LmiSolution {
    let n = program.objective.len();
    for b in &program.blocks {
        assert_eq!(b.coeffs.len(), n, "block coefficient count mismatch");
    }
    let z0 = start.unwrap_or_else(|| DVector::zeros(n));
    let z0 = if log_det_barrier(&program.blocks, &z0).is_some() {
        z0
    } else {
        match phase1(program, &z0) {
            Some(z) => z,
            None => {
                return LmiSolution {
                    z: z0,
                    cost: f64::INFINITY,
                    status: LmiStatus::Infeasible,
                }
            }
        }
    };
    let degree: f64 = program.blocks.iter().map(|b| b.dim() as f64).sum();
    let (z, clean) = path_follow(&program.objective, &program.blocks, z0, degree, |_| false);
    LmiSolution {
        cost: program.objective.dot(&z),
        z,
        status: if clean {
            LmiStatus::Optimal
        } else {
            LmiStatus::MaxIterations
        },
    }
}

/// Phase-1: minimize `w` subject to `S_k(z) + wI ⪰ 0`; strict feasibility of
/// the original program is certified once `w < 0`.
fn phase1(program: &LmiProgram, z_hint: &DVector<f64>) -> Option<DVector<f64>> {
    let n = program.objective.len();
    // Extended variable vector (z, w).
    let mut blocks: Vec<AffineMatrix> = program
        .blocks
        .iter()
        .map(|b| {
            let dim = b.dim();
            let mut coeffs = b.coeffs.clone();
            coeffs.push(DMatrix::identity(dim, dim));
            AffineMatrix {
                f0: b.f0.clone(),
                coeffs,
            }
        })
        .collect();
    // Keep w bounded above so the phase-1 objective is bounded below in the
    // directions we care about.
    let mut w0 = 0.0f64;
    for b in &program.blocks {
        let s = b.eval(z_hint);
        let eig = s.symmetric_eigen();
        let lmin = eig.eigenvalues.min();
        w0 = w0.max(-lmin);
    }
    let w0 = w0 + 1.0;
    let w_cap = w0 + 1.0;
    let mut cap_coeffs = vec![DMatrix::zeros(1, 1); n + 1];
    cap_coeffs[n] = DMatrix::from_element(1, 1, -1.0);
    blocks.push(AffineMatrix {
        f0: DMatrix::from_element(1, 1, w_cap),
        coeffs: cap_coeffs,
    });

    let mut objective = DVector::zeros(n + 1);
    objective[n] = 1.0;
    let mut z0 = DVector::zeros(n + 1);
    z0.rows_mut(0, n).copy_from(z_hint);
    z0[n] = w0;
    debug_assert!(log_det_barrier(&blocks, &z0).is_some());

    let degree: f64 = blocks.iter().map(|b| b.dim() as f64).sum();
    let strictly_feasible = |z: &DVector<f64>| z[z.len() - 1] < -1e-7;
    let (z, _) = path_follow(&objective, &blocks, z0, degree, strictly_feasible);
    if z[n] < 0.0 {
        let mut out = DVector::zeros(n);
        out.copy_from(&z.rows(0, n));
        // The shifted solution satisfies S_k(z) ≻ −wI ≻ 0.
        if log_det_barrier(&program.blocks, &out).is_some() {
            return Some(out);
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Norm epigraphs
// ---------------------------------------------------------------------------

/// Matrix-valued affine map `A(x) = constant + Σ x_i coeffs[i]`, `k×l`,
/// not necessarily symmetric.
#[derive(Debug, Clone)]
pub struct AffineMatrixMap {
    pub constant: DMatrix<f64>,
    pub coeffs: Vec<DMatrix<f64>>,
}

impl AffineMatrixMap {
    pub fn constant(m: DMatrix<f64>) -> Self {
        AffineMatrixMap {
            constant: m,
            coeffs: Vec::new(),
        }
    }
}

/// Epigraph structure for `t ≥ ‖A(x)‖` over extended variables `(x…, t)`.
#[derive(Debug, Clone)]
pub enum NormEpigraph {
    /// Spectral norm: the block `[[tI, A(x)], [A(x)ᵀ, tI]] ⪰ 0`.
    Lmi(AffineMatrix),
    /// Frobenius norm: the cone `t ≥ ‖e(x)‖₂` over the vectorized entries,
    /// each affine in the extended variables.
    Soc {
        entries: Vec<(DVector<f64>, f64)>,
        t_index: usize,
    },
}

/// Lift `‖A(x)‖ ≤ t` into the structure used inside the interior-point model:
/// the symmetric block LMI for the spectral norm, or the second-order-cone
/// description for the Frobenius norm.
pub fn lift_norm_epigraph(map: &AffineMatrixMap, norm: MatrixNorm) -> NormEpigraph {
    let k = map.constant.nrows();
    let l = map.constant.ncols();
    let nx = map.coeffs.len();
    match norm {
        MatrixNorm::Spectral => {
            let dim = k + l;
            let embed = |m: &DMatrix<f64>| {
                let mut s = DMatrix::zeros(dim, dim);
                s.view_mut((0, k), (k, l)).copy_from(m);
                s.view_mut((k, 0), (l, k)).copy_from(&m.transpose());
                s
            };
            let mut coeffs: Vec<DMatrix<f64>> = map.coeffs.iter().map(embed).collect();
            coeffs.push(DMatrix::identity(dim, dim));
            NormEpigraph::Lmi(AffineMatrix {
                f0: embed(&map.constant),
                coeffs,
            })
        }
        MatrixNorm::Frobenius => {
            let mut entries = Vec::with_capacity(k * l);
            for i in 0..k {
                for j in 0..l {
                    let mut coeff = DVector::zeros(nx + 1);
                    for (v, m) in map.coeffs.iter().enumerate() {
                        coeff[v] = m[(i, j)];
                    }
                    entries.push((coeff, map.constant[(i, j)]));
                }
            }
            NormEpigraph::Soc {
                entries,
                t_index: nx,
            }
        }
    }
}

/// Minimal `t` of the epigraph over `(x…, t)` — for a constant map this is
/// the norm itself. Used to validate the lifted structure.
pub fn minimal_norm_bound(map: &AffineMatrixMap, norm: MatrixNorm) -> f64 {
    let nx = map.coeffs.len();
    match lift_norm_epigraph(map, norm) {
        NormEpigraph::Soc { entries, t_index } => {
            assert_eq!(nx, 0, "minimal bound only evaluated for constant maps");
            let _ = t_index;
            entries
                .iter()
                .map(|(_, c)| c * c)
                .sum::<f64>()
                .sqrt()
        }
        NormEpigraph::Lmi(block) => {
            let mut objective = DVector::zeros(nx + 1);
            objective[nx] = 1.0;
            let mut start = DVector::zeros(nx + 1);
            // t strictly above any matrix norm of the constant part.
            start[nx] = map.constant.iter().map(|v| v.abs()).sum::<f64>() + 1.0;
            let sol = solve_lmi(
                &LmiProgram {
                    objective,
                    blocks: vec![block],
                },
                Some(start),
            );
            sol.cost
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_map_has_zero_bound() {
        let map = AffineMatrixMap::constant(DMatrix::zeros(2, 2));
        for norm in [MatrixNorm::Frobenius, MatrixNorm::Spectral] {
            let t = minimal_norm_bound(&map, norm);
            assert!(t.abs() <= 1e-6, "{norm:?} gave {t}");
        }
    }

    #[test]
    fn diagonal_map_spectral_bound() {
        let map = AffineMatrixMap::constant(DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]));
        let t = minimal_norm_bound(&map, MatrixNorm::Spectral);
        assert_abs_diff_eq!(t, 3.0, epsilon = 1e-6);
    }

    // Closed-form singular values of a 2×2 matrix.
    fn sigma_max(m: &DMatrix<f64>) -> f64 {
        let t: f64 = m.iter().map(|v| v * v).sum();
        let d = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        ((t + (t * t - 4.0 * d * d).max(0.0).sqrt()) / 2.0).sqrt()
    }

    #[test]
    fn random_maps_match_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let m = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-3.0..3.0));
            let expected = sigma_max(&m);
            let map = AffineMatrixMap::constant(m);
            let t = minimal_norm_bound(&map, MatrixNorm::Spectral);
            assert_abs_diff_eq!(t, expected, epsilon = 1e-6);
        }
    }

    #[test]
    fn frobenius_bound_is_entry_norm() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 2.0, 0.5]);
        let expected = m.iter().map(|v| v * v).sum::<f64>().sqrt();
        let map = AffineMatrixMap::constant(m);
        assert_abs_diff_eq!(
            minimal_norm_bound(&map, MatrixNorm::Frobenius),
            expected,
            epsilon = 1e-12
        );
    }

    #[test]
    fn infeasible_lmi_detected() {
        // S(z) = -1 (1×1), no variables can fix it.
        let program = LmiProgram {
            objective: DVector::zeros(1),
            blocks: vec![AffineMatrix {
                f0: DMatrix::from_element(1, 1, -1.0),
                coeffs: vec![DMatrix::zeros(1, 1)],
            }],
        };
        assert_eq!(solve_lmi(&program, None).status, LmiStatus::Infeasible);
    }

    #[test]
    fn linear_program_as_lmi() {
        // min z s.t. z ≥ 2 written as the 1×1 block z − 2 ⪰ 0.
        let program = LmiProgram {
            objective: DVector::from_element(1, 1.0),
            blocks: vec![AffineMatrix {
                f0: DMatrix::from_element(1, 1, -2.0),
                coeffs: vec![DMatrix::from_element(1, 1, 1.0)],
            }],
        };
        let sol = solve_lmi(&program, None);
        assert_eq!(sol.status, LmiStatus::Optimal);
        assert_abs_diff_eq!(sol.cost, 2.0, epsilon = 1e-5);
    }
}
