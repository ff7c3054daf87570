//! Scenario configuration, episode execution, metric collection and
//! persistence for the reproducible experiments.

pub mod config;
pub mod io;
pub mod svg;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barrier::{h, safe_set_membership, CircularObstacle};
use crate::controller::{
    stream_rng, CostModel, Planner, PlannerConfig, SampleBatch, SdpHarvest, EXEC_NOISE_LANE,
};
use crate::dynamics::{step, unicycle_model, ControlInput, State};

pub use config::{builtin_scenario, builtin_scenario_names, load_run_spec, CostParams, RunSpec, ScenarioBundle};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error("scenario error: {0}")]
    Scenario(String),
}

impl HarnessError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub start: (f64, f64, f64),
    pub target: (f64, f64),
    pub v_desired: f64,
    pub obstacles: Vec<CircularObstacle>,
    pub goal_tolerance: f64,
    pub max_steps: usize,
}

impl Scenario {
    pub fn start_state(&self) -> State {
        State::new(self.start.0, self.start.1, self.start.2)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.goal_tolerance <= 0.0 {
            return Err(HarnessError::Scenario(
                "goal_tolerance must be positive".into(),
            ));
        }
        if self.max_steps < 1 {
            return Err(HarnessError::Scenario("max_steps must be at least 1".into()));
        }
        if !safe_set_membership(&self.obstacles, self.start.0, self.start.1) {
            return Err(HarnessError::Scenario(
                "start position is not in the safe set".into(),
            ));
        }
        Ok(())
    }
}

/// One executed step: realized state, applied control and step metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRow {
    pub step: usize,
    pub t: f64,
    pub state: State,
    pub control: Vector2<f64>,
    /// Instantaneous running cost q at the realized state.
    pub q: f64,
    /// Minimum barrier value over obstacles at the realized state.
    pub min_h: f64,
    /// Fraction of the planning batch whose trajectories stayed safe.
    pub safe_frac: f64,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub completed: bool,
    pub steps: usize,
    pub total_cost: f64,
    pub min_h: f64,
    pub violations: usize,
    pub fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub rows: Vec<EpisodeRow>,
    pub summary: EpisodeSummary,
}

/// Sample trajectories captured at one planning step.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRecord {
    pub t: f64,
    pub trajectories: Vec<Vec<State>>,
    pub costs: Vec<f64>,
    pub safe: Vec<bool>,
}

impl SnapshotRecord {
    pub fn empty() -> SnapshotRecord {
        SnapshotRecord {
            t: 0.0,
            trajectories: Vec::new(),
            costs: Vec::new(),
            safe: Vec::new(),
        }
    }

    pub fn safe_fraction(&self) -> f64 {
        if self.safe.is_empty() {
            return 1.0;
        }
        self.safe.iter().filter(|s| **s).count() as f64 / self.safe.len() as f64
    }
}

/// Flag each sampled trajectory safe iff every point lies in the safe set.
pub fn capture_snapshot(
    batch: &SampleBatch,
    obstacles: &[CircularObstacle],
    t: f64,
) -> SnapshotRecord {
    let safe = batch
        .trajectories
        .iter()
        .map(|traj| traj.iter().all(|s| safe_set_membership(obstacles, s.x, s.y)))
        .collect();
    SnapshotRecord {
        t,
        trajectories: batch.trajectories.clone(),
        costs: batch.costs.clone(),
        safe,
    }
}

fn batch_safe_fraction(batch: &SampleBatch, obstacles: &[CircularObstacle]) -> f64 {
    if batch.trajectories.is_empty() {
        return 1.0;
    }
    let safe = batch
        .trajectories
        .iter()
        .filter(|traj| traj.iter().all(|s| safe_set_membership(obstacles, s.x, s.y)))
        .count();
    safe as f64 / batch.trajectories.len() as f64
}

fn min_h_at(obstacles: &[CircularObstacle], x: f64, y: f64) -> f64 {
    obstacles
        .iter()
        .map(|o| h(o, x, y))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// Planning step whose batch is captured (0.35 s at the default dt).
    pub snapshot_step: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { snapshot_step: 7 }
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeOutput {
    pub record: EpisodeRecord,
    pub snapshot: Option<SnapshotRecord>,
}

/// Run one episode: plan, perturb the applied control with execution noise
/// drawn from `N(0, Σ0)`, propagate, record. Non-completion within
/// `max_steps` is an outcome, not an error.
pub fn run_episode(
    scenario: &Scenario,
    config: &PlannerConfig,
    cost: &CostModel,
    options: &RunOptions,
) -> Result<EpisodeOutput, HarnessError> {
    run_episode_with(scenario, config, cost, options, None)
}

pub fn run_episode_with(
    scenario: &Scenario,
    config: &PlannerConfig,
    cost: &CostModel,
    options: &RunOptions,
    harvest: Option<SdpHarvest>,
) -> Result<EpisodeOutput, HarnessError> {
    scenario.validate()?;
    let model = unicycle_model();
    let mut planner = Planner::new(config.clone(), model, cost.clone(), scenario.obstacles.clone());
    planner.sdp_harvest = harvest;
    let exec_factor = config.noise_factor();

    let mut state = scenario.start_state();
    let mut rows: Vec<EpisodeRow> = Vec::new();
    let mut snapshot = None;
    let mut completed = state.distance_to(scenario.target) <= scenario.goal_tolerance;
    let mut fallbacks = 0usize;

    while !completed && rows.len() < scenario.max_steps {
        let step_idx = rows.len();
        let outcome = planner.plan_step(&state, step_idx);
        if step_idx == options.snapshot_step {
            snapshot = Some(capture_snapshot(
                &outcome.batch,
                &scenario.obstacles,
                step_idx as f64 * config.dt,
            ));
        }
        let mut noise_rng = stream_rng(config.seed, step_idx, EXEC_NOISE_LANE);
        let noise = exec_factor * crate::controller::standard_pair(&mut noise_rng);
        let applied = ControlInput::from_vector(&outcome.applied);
        state = step(&model, &state, &applied, &noise, config.dt)
            .map_err(|e| HarnessError::Scenario(format!("dynamics diverged: {e}")))?;

        if outcome.fallback {
            fallbacks += 1;
        }
        rows.push(EpisodeRow {
            step: step_idx,
            t: step_idx as f64 * config.dt,
            state,
            control: outcome.applied,
            q: (cost.state_cost)(&state, &applied),
            min_h: min_h_at(&scenario.obstacles, state.x, state.y),
            safe_frac: batch_safe_fraction(&outcome.batch, &scenario.obstacles),
            fallback: outcome.fallback,
        });
        completed = state.distance_to(scenario.target) <= scenario.goal_tolerance;
    }

    let total_cost: f64 = rows.iter().map(|r| r.q * config.dt).sum();
    let min_h = rows.iter().map(|r| r.min_h).fold(f64::INFINITY, f64::min);
    let violations = rows.iter().filter(|r| r.min_h < 0.0).count();
    let summary = EpisodeSummary {
        completed,
        steps: rows.len(),
        total_cost,
        min_h,
        violations,
        fallbacks,
    };
    Ok(EpisodeOutput {
        record: EpisodeRecord { rows, summary },
        snapshot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::ClassKappa;
    use crate::controller::Variant;
    use nalgebra::Matrix2;

    fn open_scenario(target: (f64, f64)) -> Scenario {
        Scenario {
            start: (0.0, 0.0, 0.0),
            target,
            v_desired: 2.0,
            obstacles: vec![],
            goal_tolerance: 0.2,
            max_steps: 400,
        }
    }

    fn quick_config(variant: Variant) -> PlannerConfig {
        PlannerConfig {
            variant,
            samples: 60,
            horizon: 15,
            dt: 0.05,
            mu0: Vector2::zeros(),
            sigma0: Matrix2::identity(),
            trust_c: None,
            delta: 0.002,
            alpha: ClassKappa::default(),
            seed: 3,
            ..PlannerConfig::default()
        }
    }

    #[test]
    fn target_at_start_completes_in_zero_steps() {
        let scenario = open_scenario((0.0, 0.0));
        let cost = CostModel::goal_tracking((0.0, 0.0), 0.0, 10.0, 1.0);
        let out = run_episode(
            &scenario,
            &quick_config(Variant::Mppi),
            &cost,
            &RunOptions::default(),
        )
        .unwrap();
        assert!(out.record.summary.completed);
        assert_eq!(out.record.summary.steps, 0);
        assert!(out.record.rows.is_empty());
    }

    #[test]
    fn open_field_episode_completes() {
        let scenario = open_scenario((3.0, 2.0));
        let cost = CostModel::goal_tracking(scenario.target, scenario.v_desired, 10.0, 1.0);
        let out = run_episode(
            &scenario,
            &quick_config(Variant::Mppi),
            &cost,
            &RunOptions::default(),
        )
        .unwrap();
        assert!(out.record.summary.completed, "did not reach the target");
        assert!(out.record.summary.steps < 400);
        // No obstacles: every batch is fully safe and min_h stays infinite.
        assert!(out.record.rows.iter().all(|r| r.safe_frac == 1.0));
        assert!(out.record.summary.min_h.is_infinite());
        assert_eq!(out.record.summary.violations, 0);
    }

    #[test]
    fn summary_total_matches_rows() {
        let scenario = open_scenario((2.0, 1.0));
        let cost = CostModel::goal_tracking(scenario.target, scenario.v_desired, 10.0, 1.0);
        let config = quick_config(Variant::Mppi);
        let out = run_episode(&scenario, &config, &cost, &RunOptions::default()).unwrap();
        let total: f64 = out.record.rows.iter().map(|r| r.q * config.dt).sum();
        assert!((total - out.record.summary.total_cost).abs() <= 1e-9);
    }

    #[test]
    fn snapshot_flags_match_membership() {
        let obstacles = vec![CircularObstacle::new(1.0, 0.0, 0.4)];
        let scenario = Scenario {
            start: (0.0, 0.0, 0.0),
            target: (3.0, 0.0),
            v_desired: 2.0,
            obstacles: obstacles.clone(),
            goal_tolerance: 0.2,
            max_steps: 60,
        };
        let cost = CostModel::goal_tracking(scenario.target, scenario.v_desired, 10.0, 1.0);
        let mut config = quick_config(Variant::Mppi);
        config.samples = 30;
        let out = run_episode(&scenario, &config, &cost, &RunOptions { snapshot_step: 2 }).unwrap();
        let snap = out.snapshot.expect("snapshot captured");
        assert_eq!(snap.trajectories.len(), 30);
        for (traj, flag) in snap.trajectories.iter().zip(&snap.safe) {
            let recomputed = traj
                .iter()
                .all(|s| safe_set_membership(&obstacles, s.x, s.y));
            assert_eq!(recomputed, *flag);
        }
        assert!((0.0..=1.0).contains(&snap.safe_fraction()));
    }

    #[test]
    fn unsafe_start_rejected() {
        let scenario = Scenario {
            start: (1.0, 0.0, 0.0),
            target: (3.0, 0.0),
            v_desired: 2.0,
            obstacles: vec![CircularObstacle::new(1.0, 0.0, 0.4)],
            goal_tolerance: 0.2,
            max_steps: 10,
        };
        assert!(scenario.validate().is_err());
    }
}
