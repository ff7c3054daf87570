//! Sampling-based stochastic path planning for control-affine systems.
//!
//! The crate implements a path-integral sampling controller together with two
//! barrier-safeguarded variants: a chance-constrained QP filter that projects
//! the nominal control into the safe half-space intersection, and a
//! trust-region controller that reshapes the sampling distribution itself by
//! solving a small SDP per sample per time step. A simulation harness runs
//! seeded, reproducible unicycle experiments and persists CSV/SVG artifacts.

pub mod barrier;
pub mod conic;
pub mod controller;
pub mod dynamics;
pub mod harness;

pub use barrier::{BarrierRow, CircularObstacle, ClassKappa};
pub use controller::{CostModel, GaussianControlDistribution, Planner, PlannerConfig, Variant};
pub use dynamics::{ControlAffineModel, ControlInput, State};
pub use harness::{EpisodeRecord, Scenario, SnapshotRecord};
