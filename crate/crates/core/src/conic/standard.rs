//! Conversion of the trust-region problem to standard SDP forms.
//!
//! The native solver works on the scalarized model; this module emits the
//! same problem first in inequality form `min cᵀx s.t. Σ x_i A_i ⪯ B` (one
//! block per constraint group) and then in equality standard form
//! `min C·X s.t. A_i·X = b_i, X ⪰ 0` by adding slack blocks and splitting the
//! free variables. The standard form is solved through its dual with the
//! generic LMI engine, giving an independent route for cross-checking costs.

use nalgebra::{DMatrix, DVector};

use super::lmi::{lift_norm_epigraph, solve_lmi, AffineMatrix, AffineMatrixMap, LmiProgram, LmiSolution, NormEpigraph};
use super::sdp::{TrustRegionSdp, IM1, IM2, IP11, IP21, IP22, IS1, IS2, IT};
use crate::barrier::DEGENERATE_ROW_NORM;

pub const NATIVE_VARS: usize = 8;

/// One inequality block `Σ x_i A_i ⪯ B`.
#[derive(Debug, Clone)]
pub struct IneqBlock {
    pub b: DMatrix<f64>,
    pub a: Vec<DMatrix<f64>>,
}

impl IneqBlock {
    pub fn dim(&self) -> usize {
        self.b.nrows()
    }

    /// Slack `S(x) = B − Σ x_i A_i` as an affine matrix (must be ⪰ 0).
    pub fn slack(&self) -> AffineMatrix {
        AffineMatrix {
            f0: self.b.clone(),
            coeffs: self.a.iter().map(|m| -m).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct InequalityForm {
    pub objective: DVector<f64>,
    pub blocks: Vec<IneqBlock>,
}

/// Equality standard form with block-diagonal `X`.
#[derive(Debug, Clone)]
pub struct StandardSdp {
    pub block_dims: Vec<usize>,
    pub c_blocks: Vec<DMatrix<f64>>,
    /// Each constraint: per-block `A` matrices paired with the scalar rhs.
    pub constraints: Vec<(Vec<DMatrix<f64>>, f64)>,
}

/// Inequality form of the trust-region problem over the native variable
/// order `(μ1, μ2, p11, p21, p22, s1, s2, t)`.
pub fn build_inequality_form(problem: &TrustRegionSdp) -> InequalityForm {
    let n = NATIVE_VARS;
    let scalar_block = |entries: &[(usize, f64)], b0: f64| {
        // Constraint `aᵀx + b0 ≥ 0` as `(−a)ᵀx ⪯ b0` in 1×1 blocks.
        let mut a = vec![DMatrix::zeros(1, 1); n];
        for &(i, v) in entries {
            a[i] = DMatrix::from_element(1, 1, -v);
        }
        IneqBlock {
            b: DMatrix::from_element(1, 1, b0),
            a,
        }
    };

    let mut blocks = Vec::new();

    // ℓ1 epigraph splits and the nonnegative diagonal of P.
    blocks.push(scalar_block(&[(IS1, 1.0), (IM1, -1.0)], problem.mu0.x));
    blocks.push(scalar_block(&[(IS1, 1.0), (IM1, 1.0)], -problem.mu0.x));
    blocks.push(scalar_block(&[(IS2, 1.0), (IM2, -1.0)], problem.mu0.y));
    blocks.push(scalar_block(&[(IS2, 1.0), (IM2, 1.0)], -problem.mu0.y));
    blocks.push(scalar_block(&[(IP11, 1.0)], 0.0));
    blocks.push(scalar_block(&[(IP22, 1.0)], 0.0));

    // One Schur block per nondegenerate row:
    // [[1, 0, √c·v1], [0, 1, √c·v2], [√c·v1, √c·v2, A·μ − b]] ⪰ 0
    // with v1 = a1·p11 + a2·p21, v2 = a2·p22.
    let sc = problem.c.sqrt();
    for r in &problem.rows {
        if r.a.norm() < DEGENERATE_ROW_NORM {
            continue;
        }
        let mut b = DMatrix::zeros(3, 3);
        b[(0, 0)] = 1.0;
        b[(1, 1)] = 1.0;
        b[(2, 2)] = -r.b;
        let mut a = vec![DMatrix::zeros(3, 3); n];
        let mut add = |var: usize, p: usize, q: usize, v: f64| {
            // S entry grows by +v·x, so A entry is −v.
            a[var][(p, q)] -= v;
            if p != q {
                a[var][(q, p)] -= v;
            }
        };
        add(IM1, 2, 2, r.a.x);
        add(IM2, 2, 2, r.a.y);
        add(IP11, 0, 2, sc * r.a.x);
        add(IP21, 0, 2, sc * r.a.y);
        add(IP22, 1, 2, sc * r.a.y);
        blocks.push(IneqBlock { b, a });
    }

    // Norm epigraph over (μ1, μ2, p11, p21, p22, s1, s2) with t appended —
    // i.e. exactly the native variable order.
    let mut coeffs = vec![DMatrix::zeros(2, 2); n - 1];
    coeffs[IP11] = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    coeffs[IP21] = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
    coeffs[IP22] = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
    let map = AffineMatrixMap {
        constant: DMatrix::from_row_slice(
            2,
            2,
            &[-problem.p0.m11, 0.0, -problem.p0.m21, -problem.p0.m22],
        ),
        coeffs,
    };
    match lift_norm_epigraph(&map, problem.norm_p) {
        NormEpigraph::Lmi(block) => {
            blocks.push(IneqBlock {
                b: block.f0.clone(),
                a: block.coeffs.iter().map(|m| -m).collect(),
            });
        }
        NormEpigraph::Soc { entries, t_index } => {
            // Arrow embedding [[tI, e], [eᵀ, t]] ⪰ 0 of the cone t ≥ ‖e‖.
            let m = entries.len();
            let dim = m + 1;
            let mut b = DMatrix::zeros(dim, dim);
            let mut a = vec![DMatrix::zeros(dim, dim); n];
            for (row, (coeff, c0)) in entries.iter().enumerate() {
                b[(row, m)] = *c0;
                b[(m, row)] = *c0;
                for (var, v) in coeff.iter().enumerate() {
                    if *v != 0.0 {
                        a[var][(row, m)] -= v;
                        a[var][(m, row)] -= v;
                    }
                }
            }
            for d in 0..dim {
                a[t_index][(d, d)] -= 1.0;
            }
            blocks.push(IneqBlock { b, a });
        }
    }

    let mut objective = DVector::zeros(n);
    objective[IS1] = 1.0;
    objective[IS2] = 1.0;
    objective[IT] = 1.0;
    InequalityForm { objective, blocks }
}

/// Convert inequality form to equality standard form: one slack block per
/// inequality block plus 1×1 blocks for the split free variables `x = u − v`.
pub fn inequality_to_standard(form: &InequalityForm) -> StandardSdp {
    let n = form.objective.len();
    let n_slack = form.blocks.len();
    let n_blocks = n_slack + 2 * n;
    let mut block_dims: Vec<usize> = form.blocks.iter().map(|b| b.dim()).collect();
    block_dims.extend(std::iter::repeat(1).take(2 * n));

    let mut c_blocks: Vec<DMatrix<f64>> = form
        .blocks
        .iter()
        .map(|b| DMatrix::zeros(b.dim(), b.dim()))
        .collect();
    for i in 0..n {
        c_blocks.push(DMatrix::from_element(1, 1, form.objective[i]));
    }
    for i in 0..n {
        c_blocks.push(DMatrix::from_element(1, 1, -form.objective[i]));
    }

    let mut constraints = Vec::new();
    for (k, blk) in form.blocks.iter().enumerate() {
        let dim = blk.dim();
        for p in 0..dim {
            for q in p..dim {
                let mut parts: Vec<DMatrix<f64>> = block_dims
                    .iter()
                    .map(|&d| DMatrix::zeros(d, d))
                    .collect();
                // Selector extracting X_pq from the slack block.
                if p == q {
                    parts[k][(p, p)] = 1.0;
                } else {
                    parts[k][(p, q)] = 0.5;
                    parts[k][(q, p)] = 0.5;
                }
                for i in 0..n {
                    let v = blk.a[i][(p, q)];
                    if v != 0.0 {
                        parts[n_slack + i][(0, 0)] = v;
                        parts[n_slack + n + i][(0, 0)] = -v;
                    }
                }
                constraints.push((parts, blk.b[(p, q)]));
            }
        }
    }
    debug_assert_eq!(c_blocks.len(), n_blocks);
    StandardSdp {
        block_dims,
        c_blocks,
        constraints,
    }
}

/// Equality standard form of the trust-region problem.
pub fn to_standard_sdp(problem: &TrustRegionSdp) -> StandardSdp {
    inequality_to_standard(&build_inequality_form(problem))
}

/// Solve the standard form through its dual `max bᵀy s.t. C − Σ y_e A_e ⪰ 0`
/// with the generic LMI engine. Under strong duality the returned cost equals
/// the primal optimum; this is the cross-check path, not the hot path.
pub fn solve_standard_via_dual(problem: &StandardSdp) -> LmiSolution {
    let n_eq = problem.constraints.len();
    let blocks: Vec<AffineMatrix> = problem
        .c_blocks
        .iter()
        .enumerate()
        .map(|(k, c)| AffineMatrix {
            f0: c.clone(),
            coeffs: problem
                .constraints
                .iter()
                .map(|(parts, _)| -&parts[k])
                .collect(),
        })
        .collect();
    let objective = DVector::from_iterator(n_eq, problem.constraints.iter().map(|(_, b)| -b));
    let mut sol = solve_lmi(&LmiProgram { objective, blocks }, None);
    sol.cost = -sol.cost;
    sol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::sdp::{random_instance, solve_trust_region_sdp, MatrixNorm};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_inequality_gets_scalar_slack() {
        // x ≤ 1 as a 1×1 inequality block over a single variable.
        let form = InequalityForm {
            objective: DVector::from_element(1, 1.0),
            blocks: vec![IneqBlock {
                b: DMatrix::from_element(1, 1, 1.0),
                a: vec![DMatrix::from_element(1, 1, 1.0)],
            }],
        };
        let std_form = inequality_to_standard(&form);
        // Blocks: slack s, u, v with x = u − v.
        assert_eq!(std_form.block_dims, vec![1, 1, 1]);
        assert_eq!(std_form.constraints.len(), 1);
        let (parts, b) = &std_form.constraints[0];
        assert_eq!(*b, 1.0);
        assert_eq!(parts[0][(0, 0)], 1.0); // s
        assert_eq!(parts[1][(0, 0)], 1.0); // +x via u
        assert_eq!(parts[2][(0, 0)], -1.0); // −x via v
    }

    #[test]
    fn spectral_epigraph_emits_one_4x4_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (problem, _, _) = random_instance(&mut rng, MatrixNorm::Spectral);
        let std_form = to_standard_sdp(&problem);
        let fours: Vec<&usize> = std_form.block_dims.iter().filter(|&&d| d == 4).collect();
        assert_eq!(fours.len(), 1);
    }

    #[test]
    fn cross_solver_cost_agreement() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let mut checked = 0;
        while checked < 20 {
            let norm = if checked % 2 == 0 {
                MatrixNorm::Frobenius
            } else {
                MatrixNorm::Spectral
            };
            let (problem, _, _) = random_instance(&mut rng, norm);
            let native = solve_trust_region_sdp(&problem);
            if native.cost == 0.0 {
                continue; // feasible-start instances exercise nothing here
            }
            let standard = to_standard_sdp(&problem);
            let dual = solve_standard_via_dual(&standard);
            assert_abs_diff_eq!(native.cost, dual.cost, epsilon = 1e-4);
            checked += 1;
        }
    }
}
