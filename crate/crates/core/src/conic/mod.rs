//! Small dense convex solvers: the exact active-set QP used by the safety
//! filter, the interior-point SDP that reshapes sampling distributions, the
//! generic LMI engine used for validation, and standard-form conversions.

pub mod lmi;
pub mod qp;
pub mod sdp;
pub mod standard;

pub use lmi::{
    lift_norm_epigraph, minimal_norm_bound, solve_lmi, AffineMatrix, AffineMatrixMap, LmiProgram,
    LmiSolution, LmiStatus, NormEpigraph,
};
pub use qp::{grid_qp_oracle, solve_qp, QpError, QpProblem};
pub use sdp::{
    grid_trust_region_oracle, schur_residual, solve_trust_region_sdp, spectral_norm_2x2,
    MatrixNorm, SdpSolution, SdpStatus, TrustRegionSdp,
};
pub use standard::{
    build_inequality_form, inequality_to_standard, solve_standard_via_dual, to_standard_sdp,
    IneqBlock, InequalityForm, StandardSdp,
};
