//! The three planners: the path-integral sampler, the QP-shielded variant,
//! and the trust-region variant that reshapes the sampling distribution with
//! one SDP per sample per time step.
//!
//! Randomness is counter-based: every sample owns a ChaCha stream derived
//! from `(seed, episode step, sample index)`, so results are bitwise
//! independent of the parallel execution schedule.

use std::sync::{Arc, Mutex};

use nalgebra::{Matrix2, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::barrier::{barrier_row, safe_set_membership, BarrierRow, CircularObstacle, ClassKappa};
use crate::conic::{
    solve_qp, solve_trust_region_sdp, MatrixNorm, QpProblem, SdpStatus, TrustRegionSdp,
};
use crate::dynamics::{step, ControlAffineModel, ControlInput, State};

/// Reserved stream lane for the execution noise applied by the harness.
pub const EXEC_NOISE_LANE: u64 = u32::MAX as u64;

/// ChaCha stream keyed by `(seed, episode step, lane)`.
pub fn stream_rng(seed: u64, episode_step: usize, lane: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((episode_step as u64) << 32) | lane);
    rng
}

/// Two independent standard-normal draws as a control-space vector.
pub fn standard_pair(rng: &mut ChaCha8Rng) -> Vector2<f64> {
    let a: f64 = StandardNormal.sample(rng);
    let b: f64 = StandardNormal.sample(rng);
    Vector2::new(a, b)
}

/// Gaussian over controls parameterized by mean and lower-triangular factor,
/// sampled as `μ + P·z` so the covariance is `PPᵀ` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianControlDistribution {
    pub mu: Vector2<f64>,
    pub p: Matrix2<f64>,
}

impl GaussianControlDistribution {
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vector2<f64> {
        self.mu + self.p * standard_pair(rng)
    }
}

pub type StateCostFn = Arc<dyn Fn(&State, &ControlInput) -> f64 + Send + Sync>;
pub type TerminalCostFn = Arc<dyn Fn(&State) -> f64 + Send + Sync>;

/// Running/terminal cost description.
///
/// `state_cost` receives the applied control as well: the experiments track a
/// desired linear velocity, which lives in the input for this model.
#[derive(Clone)]
pub struct CostModel {
    pub state_cost: StateCostFn,
    pub terminal_cost: TerminalCostFn,
    /// Quadratic control cost weight R (default zero).
    pub control_cost_weight: Matrix2<f64>,
    /// Indicator penalty applied per unsafe state (finite; 0 disables).
    pub penalty: f64,
    /// Softmax temperature λ.
    pub lambda: f64,
}

impl CostModel {
    /// `q(x, u) = pos_weight·‖p_d − p‖² + vel_weight·(v_d − v)²`, zero terminal.
    pub fn goal_tracking(
        target: (f64, f64),
        v_desired: f64,
        pos_weight: f64,
        vel_weight: f64,
    ) -> CostModel {
        CostModel {
            state_cost: Arc::new(move |s: &State, u: &ControlInput| {
                let dp = (target.0 - s.x).powi(2) + (target.1 - s.y).powi(2);
                pos_weight * dp + vel_weight * (v_desired - u.v).powi(2)
            }),
            terminal_cost: Arc::new(|_s: &State| 0.0),
            control_cost_weight: Matrix2::zeros(),
            penalty: 0.0,
            lambda: 1.0,
        }
    }
}

/// `φ(x_T) + Σ_{t=1..T} [q(x_t, u_t) + ½u_tᵀRu_t + penalty·1{x_t unsafe}]·dt`.
pub fn cost_to_go(
    cost_model: &CostModel,
    trajectory: &[State],
    controls: &[ControlInput],
    dt: f64,
    obstacles: &[CircularObstacle],
) -> f64 {
    assert_eq!(
        trajectory.len(),
        controls.len() + 1,
        "trajectory must have one more state than controls"
    );
    let mut total = (cost_model.terminal_cost)(trajectory.last().expect("nonempty trajectory"));
    for (x, u) in trajectory[1..].iter().zip(controls) {
        let mut q = (cost_model.state_cost)(x, u);
        let uv = u.as_vector();
        q += 0.5 * (uv.transpose() * cost_model.control_cost_weight * uv)[(0, 0)];
        if cost_model.penalty > 0.0 && !safe_set_membership(obstacles, x.x, x.y) {
            q += cost_model.penalty;
        }
        total += q * dt;
    }
    total
}

/// Importance weights `ω_k = exp(−(S_k − β)/λ)` with `β = min_k S_k`,
/// normalized to sum 1. The shift keeps the exponentials bounded.
pub fn compute_weights(costs: &[f64], lambda: f64) -> Vec<f64> {
    assert!(!costs.is_empty(), "need at least one sample");
    assert!(lambda > 0.0, "temperature must be positive");
    let beta = costs.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut weights: Vec<f64> = costs.iter().map(|s| (-(s - beta) / lambda).exp()).collect();
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }
    weights
}

/// Control update law `u*_t = u_t + Σ_k ω_k δu_{t,k}`.
pub fn update_controls(
    mean_controls: &[Vector2<f64>],
    perturbations: &[Vec<Vector2<f64>>],
    weights: &[f64],
) -> Vec<Vector2<f64>> {
    assert_eq!(perturbations.len(), weights.len());
    mean_controls
        .iter()
        .enumerate()
        .map(|(t, u)| {
            let mut du = Vector2::zeros();
            for (k, w) in weights.iter().enumerate() {
                du += perturbations[k][t] * *w;
            }
            u + du
        })
        .collect()
}

/// Receding-horizon shift: drop the executed head, append `u_init`.
pub fn shift_horizon(mean_controls: &[Vector2<f64>], u_init: Vector2<f64>) -> Vec<Vector2<f64>> {
    assert!(!mean_controls.is_empty());
    let mut shifted = mean_controls[1..].to_vec();
    shifted.push(u_init);
    shifted
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Mppi,
    Shielded,
    TrustRegion,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Mppi => "mppi",
            Variant::Shielded => "shielded",
            Variant::TrustRegion => "trust_region",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        match s {
            "mppi" => Some(Variant::Mppi),
            "shielded" => Some(Variant::Shielded),
            "trust_region" => Some(Variant::TrustRegion),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlannerConfig {
    pub variant: Variant,
    /// Sample count K.
    pub samples: usize,
    /// Horizon T.
    pub horizon: usize,
    pub dt: f64,
    /// Mean of the sampling noise distribution.
    pub mu0: Vector2<f64>,
    /// Covariance of the sampling noise distribution.
    pub sigma0: Matrix2<f64>,
    /// Trust-region scale; `None` resolves to the `1−δ` normal quantile.
    pub trust_c: Option<f64>,
    pub delta: f64,
    pub alpha: ClassKappa,
    pub seed: u64,
    /// Shielded QP tightening: standard-deviation form when true, the
    /// variance form otherwise.
    pub exact_chance: bool,
    /// Solve one SDP per planning step at the measured state instead of one
    /// per sample per rollout step.
    pub shared_sdp: bool,
    pub norm_p: MatrixNorm,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            variant: Variant::TrustRegion,
            samples: 100,
            horizon: 20,
            dt: 0.05,
            mu0: Vector2::zeros(),
            sigma0: Matrix2::identity(),
            trust_c: None,
            delta: 0.002,
            alpha: ClassKappa::default(),
            seed: 0,
            exact_chance: true,
            shared_sdp: false,
            norm_p: MatrixNorm::Frobenius,
        }
    }
}

impl PlannerConfig {
    pub fn quantile(&self) -> f64 {
        Normal::standard().inverse_cdf(1.0 - self.delta)
    }

    pub fn resolved_trust_c(&self) -> f64 {
        self.trust_c.unwrap_or_else(|| self.quantile())
    }

    /// Lower-triangular factor of `Σ0`.
    pub fn noise_factor(&self) -> Matrix2<f64> {
        factor_covariance(&self.sigma0)
    }

    pub fn validate(&self) {
        assert!(self.samples >= 1, "need at least one sample");
        assert!(self.horizon >= 1, "need at least one horizon step");
        assert!(self.dt > 0.0 && self.dt.is_finite(), "dt must be positive");
        assert!(
            self.delta > 0.0 && self.delta < 1.0,
            "delta must lie in (0, 1)"
        );
    }
}

/// Lower-triangular factor of a PSD 2×2 matrix.
pub fn factor_covariance(sigma: &Matrix2<f64>) -> Matrix2<f64> {
    if sigma.iter().all(|v| *v == 0.0) {
        return Matrix2::zeros();
    }
    if let Some(chol) = nalgebra::Cholesky::new(*sigma) {
        return chol.l();
    }
    // Semidefinite input: jitter once, then zero the noise floor.
    let jitter = 1e-12 * (1.0 + sigma.trace());
    let bumped = sigma + Matrix2::identity() * jitter;
    nalgebra::Cholesky::new(bumped)
        .expect("covariance must be positive semidefinite")
        .l()
}

/// One solved distribution-reshaping instance, kept for calibration checks.
#[derive(Debug, Clone)]
pub struct SolvedSdpRecord {
    pub rows: Vec<BarrierRow>,
    pub c: f64,
    pub mu: Vector2<f64>,
    pub p: Matrix2<f64>,
}

pub type SdpHarvest = Arc<Mutex<Vec<SolvedSdpRecord>>>;

#[derive(Debug, Clone)]
pub struct SampleBatch {
    /// K×T perturbations δu.
    pub perturbations: Vec<Vec<Vector2<f64>>>,
    /// K trajectories of length T+1.
    pub trajectories: Vec<Vec<State>>,
    /// Cost-to-go per sample.
    pub costs: Vec<f64>,
    /// Normalized importance weights.
    pub weights: Vec<f64>,
    /// Samples that switched to braking mid-rollout.
    pub fallbacks: usize,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub applied: Vector2<f64>,
    pub batch: SampleBatch,
    /// A braking or filter fallback occurred at this step.
    pub fallback: bool,
}

struct SampleResult {
    perturbations: Vec<Vector2<f64>>,
    trajectory: Vec<State>,
    cost: f64,
    braked: bool,
}

enum RowsAtState {
    /// Nondegenerate rows (possibly empty after dropping vacuous ones).
    Rows(Vec<BarrierRow>),
    /// A degenerate row with `h ≤ 0`: no admissible direction, brake.
    Brake,
}

pub struct Planner {
    pub config: PlannerConfig,
    model: ControlAffineModel,
    cost: CostModel,
    obstacles: Vec<CircularObstacle>,
    mean: Vec<Vector2<f64>>,
    p0: Matrix2<f64>,
    trust_c: f64,
    quantile: f64,
    /// When set, nontrivial SDP solutions are recorded (up to the cap).
    pub sdp_harvest: Option<SdpHarvest>,
    pub harvest_cap: usize,
}

impl Planner {
    pub fn new(
        config: PlannerConfig,
        model: ControlAffineModel,
        cost: CostModel,
        obstacles: Vec<CircularObstacle>,
    ) -> Planner {
        config.validate();
        let mean = vec![Vector2::zeros(); config.horizon];
        let p0 = config.noise_factor();
        let trust_c = config.resolved_trust_c();
        let quantile = config.quantile();
        Planner {
            config,
            model,
            cost,
            obstacles,
            mean,
            p0,
            trust_c,
            quantile,
            sdp_harvest: None,
            harvest_cap: usize::MAX,
        }
    }

    pub fn mean_controls(&self) -> &[Vector2<f64>] {
        &self.mean
    }

    pub fn plan_step(&mut self, x0: &State, episode_step: usize) -> StepOutcome {
        match self.config.variant {
            Variant::Mppi => self.plan_step_mppi(x0, episode_step),
            Variant::Shielded => self.plan_step_shielded(x0, episode_step),
            Variant::TrustRegion => self.plan_step_trust_region(x0, episode_step),
        }
    }

    fn reference_distribution(&self) -> GaussianControlDistribution {
        GaussianControlDistribution {
            mu: self.config.mu0,
            p: self.p0,
        }
    }

    /// Sample, roll out, weight and update; returns the applied control and
    /// leaves the shifted mean sequence in place.
    pub fn plan_step_mppi(&mut self, x0: &State, episode_step: usize) -> StepOutcome {
        let results = self.parallel_rollouts(x0, |planner, x0, k| {
            planner.rollout_reference(x0, episode_step, k)
        });
        self.finish_step(results, false)
    }

    /// MPPI nominal followed by the chance-tightened QP projection.
    pub fn plan_step_shielded(&mut self, x0: &State, episode_step: usize) -> StepOutcome {
        let mut outcome = self.plan_step_mppi(x0, episode_step);
        match self.rows_at(x0, None) {
            RowsAtState::Brake => {
                outcome.applied = Vector2::zeros();
                outcome.fallback = true;
            }
            RowsAtState::Rows(rows) => {
                if rows.is_empty() {
                    return outcome;
                }
                let sigma0 = self.config.sigma0;
                let tightened = rows
                    .iter()
                    .map(|r| {
                        let var = (r.a * sigma0 * r.a.transpose())[(0, 0)];
                        let tighten = if self.config.exact_chance {
                            self.quantile * var.max(0.0).sqrt()
                        } else {
                            self.trust_c * var
                        };
                        (Vector2::new(r.a.x, r.a.y), r.b + tighten)
                    })
                    .collect();
                match solve_qp(&QpProblem {
                    center: outcome.applied,
                    rows: tightened,
                }) {
                    Ok(u) => outcome.applied = u,
                    Err(_) => {
                        outcome.applied = Vector2::zeros();
                        outcome.fallback = true;
                    }
                }
            }
        }
        outcome
    }

    /// Reshape the sampling distribution at every rollout state (or once per
    /// step in `shared_sdp` mode), then weight and update as usual.
    pub fn plan_step_trust_region(&mut self, x0: &State, episode_step: usize) -> StepOutcome {
        if self.config.shared_sdp {
            let dist = match self.rows_at(x0, Some(&self.mean[0])) {
                RowsAtState::Brake => None,
                RowsAtState::Rows(rows) if rows.is_empty() => Some(self.reference_distribution()),
                RowsAtState::Rows(rows) => self.solve_rows(rows),
            };
            let braked_all = dist.is_none();
            let results = self.parallel_rollouts(x0, move |planner, x0, k| {
                planner.rollout_shared(x0, episode_step, k, dist)
            });
            return self.finish_step(results, braked_all);
        }
        let results = self.parallel_rollouts(x0, |planner, x0, k| {
            planner.rollout_trust_region(x0, episode_step, k)
        });
        self.finish_step(results, false)
    }

    fn parallel_rollouts<F>(&self, x0: &State, roll: F) -> Vec<SampleResult>
    where
        F: Fn(&Planner, &State, usize) -> SampleResult + Send + Sync,
    {
        (0..self.config.samples)
            .into_par_iter()
            .map(|k| roll(self, x0, k))
            .collect()
    }

    fn finish_step(&mut self, results: Vec<SampleResult>, forced_fallback: bool) -> StepOutcome {
        let costs: Vec<f64> = results.iter().map(|r| r.cost).collect();
        let fallback_count = results.iter().filter(|r| r.braked).count();
        let weights = compute_weights(&costs, self.cost.lambda);
        let mut perturbations = Vec::with_capacity(results.len());
        let mut trajectories = Vec::with_capacity(results.len());
        for r in results {
            perturbations.push(r.perturbations);
            trajectories.push(r.trajectory);
        }
        let updated = update_controls(&self.mean, &perturbations, &weights);
        let applied = updated[0];
        self.mean = shift_horizon(&updated, Vector2::zeros());
        let batch = SampleBatch {
            perturbations,
            trajectories,
            costs,
            weights,
            fallbacks: fallback_count,
        };
        StepOutcome {
            applied,
            batch,
            fallback: forced_fallback || fallback_count > 0,
        }
    }

    /// Rollout with perturbations from the reference distribution.
    fn rollout_reference(&self, x0: &State, episode_step: usize, k: usize) -> SampleResult {
        let mut rng = stream_rng(self.config.seed, episode_step, k as u64);
        let reference = self.reference_distribution();
        let t_max = self.config.horizon;
        let mut perts = Vec::with_capacity(t_max);
        let mut traj = Vec::with_capacity(t_max + 1);
        let mut controls = Vec::with_capacity(t_max);
        let mut x = *x0;
        traj.push(x);
        for t in 0..t_max {
            let du = reference.sample(&mut rng);
            let u = ControlInput::from_vector(&self.mean[t]);
            x = step(&self.model, &x, &u, &du, self.config.dt).expect("finite rollout");
            perts.push(du);
            controls.push(ControlInput::from_vector(&(self.mean[t] + du)));
            traj.push(x);
        }
        let cost = cost_to_go(&self.cost, &traj, &controls, self.config.dt, &self.obstacles);
        SampleResult {
            perturbations: perts,
            trajectory: traj,
            cost,
            braked: false,
        }
    }

    /// Trust-region rollout: solve the reshaping SDP at every visited state.
    fn rollout_trust_region(&self, x0: &State, episode_step: usize, k: usize) -> SampleResult {
        let mut rng = stream_rng(self.config.seed, episode_step, k as u64);
        let t_max = self.config.horizon;
        let mut perts = Vec::with_capacity(t_max);
        let mut traj = Vec::with_capacity(t_max + 1);
        let mut controls = Vec::with_capacity(t_max);
        let mut x = *x0;
        traj.push(x);
        let mut braking = false;
        for t in 0..t_max {
            let du = if braking {
                -self.mean[t]
            } else {
                match self.rows_at(&x, Some(&self.mean[t])) {
                    RowsAtState::Brake => {
                        braking = true;
                        -self.mean[t]
                    }
                    RowsAtState::Rows(rows) => {
                        if rows.is_empty() {
                            self.reference_distribution().sample(&mut rng)
                        } else {
                            match self.solve_rows(rows) {
                                Some(dist) => dist.sample(&mut rng),
                                None => {
                                    braking = true;
                                    -self.mean[t]
                                }
                            }
                        }
                    }
                }
            };
            let u = ControlInput::from_vector(&self.mean[t]);
            x = step(&self.model, &x, &u, &du, self.config.dt).expect("finite rollout");
            perts.push(du);
            controls.push(ControlInput::from_vector(&(self.mean[t] + du)));
            traj.push(x);
        }
        let cost = cost_to_go(&self.cost, &traj, &controls, self.config.dt, &self.obstacles);
        SampleResult {
            perturbations: perts,
            trajectory: traj,
            cost,
            braked: braking,
        }
    }

    /// Shared-distribution rollout for the cheap interpretation.
    fn rollout_shared(
        &self,
        x0: &State,
        episode_step: usize,
        k: usize,
        dist: Option<GaussianControlDistribution>,
    ) -> SampleResult {
        let mut rng = stream_rng(self.config.seed, episode_step, k as u64);
        let t_max = self.config.horizon;
        let mut perts = Vec::with_capacity(t_max);
        let mut traj = Vec::with_capacity(t_max + 1);
        let mut controls = Vec::with_capacity(t_max);
        let mut x = *x0;
        traj.push(x);
        for t in 0..t_max {
            let du = match &dist {
                Some(d) => d.sample(&mut rng),
                None => -self.mean[t],
            };
            let u = ControlInput::from_vector(&self.mean[t]);
            x = step(&self.model, &x, &u, &du, self.config.dt).expect("finite rollout");
            perts.push(du);
            controls.push(ControlInput::from_vector(&(self.mean[t] + du)));
            traj.push(x);
        }
        let cost = cost_to_go(&self.cost, &traj, &controls, self.config.dt, &self.obstacles);
        SampleResult {
            perturbations: perts,
            trajectory: traj,
            cost,
            braked: dist.is_none(),
        }
    }

    /// Barrier rows at a state, with the perturbation-space shift applied
    /// when `mean_control` is given: the simulated control is `u + δu`, so
    /// the admissible set for δu is `A·δu ≥ b − A·u`.
    fn rows_at(&self, x: &State, mean_control: Option<&Vector2<f64>>) -> RowsAtState {
        let mut rows = Vec::with_capacity(self.obstacles.len());
        for o in &self.obstacles {
            let mut row = barrier_row(&self.model, o, x, &self.config.alpha);
            if row.is_degenerate() {
                if row.h_value <= 0.0 {
                    return RowsAtState::Brake;
                }
                continue;
            }
            if let Some(u) = mean_control {
                row.b -= row.a.x * u.x + row.a.y * u.y;
            }
            rows.push(row);
        }
        RowsAtState::Rows(rows)
    }

    fn solve_rows(&self, rows: Vec<BarrierRow>) -> Option<GaussianControlDistribution> {
        let problem = TrustRegionSdp {
            mu0: self.config.mu0,
            p0: self.p0,
            rows,
            c: self.trust_c,
            norm_p: self.config.norm_p,
        };
        let sol = solve_trust_region_sdp(&problem);
        match sol.status {
            SdpStatus::Infeasible => None,
            _ => {
                if sol.cost != 0.0 {
                    if let Some(harvest) = &self.sdp_harvest {
                        let mut guard = harvest.lock().expect("harvest lock");
                        if guard.len() < self.harvest_cap {
                            guard.push(SolvedSdpRecord {
                                rows: problem.rows,
                                c: problem.c,
                                mu: sol.mu,
                                p: sol.p,
                            });
                        }
                    }
                }
                Some(GaussianControlDistribution {
                    mu: sol.mu,
                    p: sol.p,
                })
            }
        }
    }
}
