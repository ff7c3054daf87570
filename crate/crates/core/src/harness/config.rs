//! Scenario/controller configuration: built-in experiment setups and the
//! `[scenario] / [controller] / [cost] / [run]` structured-text file format.

use std::path::Path;

use nalgebra::{Matrix2, Vector2};
use serde::Deserialize;

use super::{HarnessError, RunOptions, Scenario};
use crate::barrier::{CircularObstacle, ClassKappa};
use crate::conic::MatrixNorm;
use crate::controller::{CostModel, PlannerConfig, Variant};

/// Running-cost parameters of the goal-tracking experiments.
#[derive(Debug, Clone, Copy, serde::Serialize, Deserialize)]
pub struct CostParams {
    pub position_weight: f64,
    pub velocity_weight: f64,
    /// Indicator penalty; active for the penalty-based sampler only.
    pub penalty: f64,
    pub lambda: f64,
}

impl CostParams {
    pub fn to_model(&self, scenario: &Scenario) -> CostModel {
        let mut model = CostModel::goal_tracking(
            scenario.target,
            scenario.v_desired,
            self.position_weight,
            self.velocity_weight,
        );
        model.penalty = self.penalty;
        model.lambda = self.lambda;
        model
    }
}

/// A named experiment: scenario geometry, cost parameters and the controller
/// template, with the per-variant horizon and penalty conventions.
#[derive(Debug, Clone)]
pub struct ScenarioBundle {
    pub name: String,
    pub scenario: Scenario,
    pub cost: CostParams,
    pub base_config: PlannerConfig,
    /// The penalty-based sampler may need a longer horizon.
    pub mppi_horizon: usize,
}

impl ScenarioBundle {
    /// Controller config and cost parameters for one variant: the indicator
    /// penalty belongs to the penalty-based sampler, the barrier variants
    /// rely on their constraints instead.
    pub fn for_variant(&self, variant: Variant) -> (PlannerConfig, CostParams) {
        let mut config = self.base_config.clone();
        config.variant = variant;
        if variant == Variant::Mppi {
            config.horizon = self.mppi_horizon;
        }
        let mut cost = self.cost;
        if variant != Variant::Mppi {
            cost.penalty = 0.0;
        }
        (config, cost)
    }
}

pub fn builtin_scenario_names() -> &'static [&'static str] {
    &["single_obstacle", "narrow_passage"]
}

pub fn builtin_scenario(name: &str) -> Option<ScenarioBundle> {
    let base_config = PlannerConfig {
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
    };
    let cost = CostParams {
        position_weight: 10.0,
        velocity_weight: 1.0,
        penalty: 10000.0,
        lambda: 1.0,
    };
    match name {
        "single_obstacle" => Some(ScenarioBundle {
            name: name.to_string(),
            scenario: Scenario {
                start: (0.0, 0.0, 0.0),
                target: (4.0, 4.0),
                v_desired: 2.0,
                obstacles: vec![CircularObstacle::new(2.2, 2.0, 0.5)],
                goal_tolerance: 0.2,
                max_steps: 400,
            },
            cost,
            base_config,
            mppi_horizon: 20,
        }),
        "narrow_passage" => Some(ScenarioBundle {
            name: name.to_string(),
            scenario: Scenario {
                start: (0.0, 0.0, 0.0),
                target: (4.0, 4.0),
                v_desired: 2.0,
                // Three circles across the diagonal with gaps of about
                // 0.14 m, much smaller than the radius; the straight
                // start-to-target line is blocked.
                obstacles: vec![
                    CircularObstacle::new(1.5, 2.3, 0.5),
                    CircularObstacle::new(2.4, 1.6, 0.5),
                    CircularObstacle::new(3.3, 0.9, 0.5),
                ],
                goal_tolerance: 0.2,
                max_steps: 400,
            },
            cost,
            base_config,
            mppi_horizon: 40,
        }),
        _ => None,
    }
}

/// Everything one run needs.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub name: String,
    pub scenario: Scenario,
    pub config: PlannerConfig,
    pub cost: CostParams,
    pub options: RunOptions,
}

impl RunSpec {
    pub fn from_builtin(name: &str, variant: Variant) -> Result<RunSpec, HarnessError> {
        let bundle = builtin_scenario(name).ok_or_else(|| {
            HarnessError::Config(format!(
                "unknown scenario {name:?}; built-ins: {}",
                builtin_scenario_names().join(", ")
            ))
        })?;
        let (config, cost) = bundle.for_variant(variant);
        Ok(RunSpec {
            name: bundle.name,
            scenario: bundle.scenario,
            config,
            cost,
            options: RunOptions::default(),
        })
    }

    pub fn cost_model(&self) -> CostModel {
        self.cost.to_model(&self.scenario)
    }
}

// --- File format -------------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    scenario: Option<ScenarioSection>,
    controller: Option<ControllerSection>,
    cost: Option<CostSection>,
    run: Option<RunSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSection {
    /// Start from a built-in scenario and override fields.
    name: Option<String>,
    start: Option<[f64; 3]>,
    target: Option<[f64; 2]>,
    v_desired: Option<f64>,
    obstacles: Option<Vec<ObstacleEntry>>,
    goal_tolerance: Option<f64>,
    max_steps: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObstacleEntry {
    x: f64,
    y: f64,
    r: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControllerSection {
    variant: Option<String>,
    samples: Option<usize>,
    horizon: Option<usize>,
    dt: Option<f64>,
    mu0: Option<[f64; 2]>,
    #[serde(alias = "Sigma0")]
    sigma0: Option<[[f64; 2]; 2]>,
    trust_c: Option<f64>,
    delta: Option<f64>,
    alpha: Option<AlphaEntry>,
    seed: Option<u64>,
    exact_chance: Option<bool>,
    shared_sdp: Option<bool>,
    norm_p: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AlphaEntry {
    kind: String,
    gamma: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostSection {
    position_weight: Option<f64>,
    velocity_weight: Option<f64>,
    penalty: Option<f64>,
    lambda: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    snapshot_step: Option<usize>,
}

fn bad(msg: String) -> HarnessError {
    HarnessError::Config(msg)
}

/// Parse a config file into a complete run description. When the scenario
/// section names a built-in, its values (and the per-variant conventions)
/// seed the spec and explicit keys override them.
pub fn load_run_spec(path: &Path) -> Result<RunSpec, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let file: FileConfig = toml::from_str(&text)
        .map_err(|e| bad(format!("{}: {e}", path.display())))?;

    let scenario_section = file.scenario.unwrap_or_default();
    let controller = file.controller.unwrap_or_default();
    let cost_section = file.cost.unwrap_or_default();
    let run = file.run.unwrap_or_default();

    let variant = match controller.variant.as_deref() {
        None => Variant::TrustRegion,
        Some(v) => {
            Variant::parse(v).ok_or_else(|| bad(format!("unknown variant {v:?}")))?
        }
    };

    let base = match &scenario_section.name {
        Some(name) => Some(RunSpec::from_builtin(name, variant)?),
        None => None,
    };

    let mut scenario = base.as_ref().map(|b| b.scenario.clone()).unwrap_or(Scenario {
        start: (0.0, 0.0, 0.0),
        target: (4.0, 4.0),
        v_desired: 2.0,
        obstacles: vec![],
        goal_tolerance: 0.2,
        max_steps: 400,
    });
    if let Some(s) = scenario_section.start {
        scenario.start = (s[0], s[1], s[2]);
    }
    if let Some(t) = scenario_section.target {
        scenario.target = (t[0], t[1]);
    }
    if let Some(v) = scenario_section.v_desired {
        scenario.v_desired = v;
    }
    if let Some(obs) = scenario_section.obstacles {
        scenario.obstacles = obs
            .into_iter()
            .map(|o| {
                if o.r <= 0.0 {
                    Err(bad(format!("obstacle radius must be positive, got {}", o.r)))
                } else {
                    Ok(CircularObstacle::new(o.x, o.y, o.r))
                }
            })
            .collect::<Result<_, _>>()?;
    }
    if let Some(g) = scenario_section.goal_tolerance {
        scenario.goal_tolerance = g;
    }
    if let Some(m) = scenario_section.max_steps {
        scenario.max_steps = m;
    }

    let mut config = base
        .as_ref()
        .map(|b| b.config.clone())
        .unwrap_or_default();
    config.variant = variant;
    if let Some(k) = controller.samples {
        config.samples = k;
    }
    if let Some(t) = controller.horizon {
        config.horizon = t;
    }
    if let Some(dt) = controller.dt {
        config.dt = dt;
    }
    if let Some(m) = controller.mu0 {
        config.mu0 = Vector2::new(m[0], m[1]);
    }
    if let Some(s) = controller.sigma0 {
        config.sigma0 = Matrix2::new(s[0][0], s[0][1], s[1][0], s[1][1]);
    }
    if controller.trust_c.is_some() {
        config.trust_c = controller.trust_c;
    }
    if let Some(d) = controller.delta {
        config.delta = d;
    }
    if let Some(a) = controller.alpha {
        let gamma = a.gamma.unwrap_or(1.0);
        config.alpha = match a.kind.as_str() {
            "linear" => ClassKappa::linear(gamma),
            "cubic" => ClassKappa::cubic(gamma),
            other => return Err(bad(format!("unknown class-K kind {other:?}"))),
        };
    }
    if let Some(s) = controller.seed {
        config.seed = s;
    }
    if let Some(e) = controller.exact_chance {
        config.exact_chance = e;
    }
    if let Some(s) = controller.shared_sdp {
        config.shared_sdp = s;
    }
    if let Some(n) = controller.norm_p {
        config.norm_p = match n.as_str() {
            "frobenius" => MatrixNorm::Frobenius,
            "spectral" => MatrixNorm::Spectral,
            other => return Err(bad(format!("unknown matrix norm {other:?}"))),
        };
    }

    let mut cost = base.as_ref().map(|b| b.cost).unwrap_or(CostParams {
        position_weight: 10.0,
        velocity_weight: 1.0,
        penalty: if variant == Variant::Mppi { 10000.0 } else { 0.0 },
        lambda: 1.0,
    });
    if let Some(w) = cost_section.position_weight {
        cost.position_weight = w;
    }
    if let Some(w) = cost_section.velocity_weight {
        cost.velocity_weight = w;
    }
    if let Some(p) = cost_section.penalty {
        cost.penalty = p;
    }
    if let Some(l) = cost_section.lambda {
        cost.lambda = l;
    }

    let mut options = base.as_ref().map(|b| b.options).unwrap_or_default();
    if let Some(s) = run.snapshot_step {
        options.snapshot_step = s;
    }

    let name = scenario_section
        .name
        .unwrap_or_else(|| "custom".to_string());
    Ok(RunSpec {
        name,
        scenario,
        config,
        cost,
        options,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn builtin_single_obstacle_parameters() {
        let bundle = builtin_scenario("single_obstacle").unwrap();
        assert_eq!(bundle.scenario.target, (4.0, 4.0));
        assert_eq!(bundle.scenario.v_desired, 2.0);
        assert_eq!(bundle.scenario.obstacles.len(), 1);
        let o = bundle.scenario.obstacles[0];
        assert_eq!((o.cx, o.cy, o.r), (2.2, 2.0, 0.5));
        assert_eq!(bundle.cost.position_weight, 10.0);
        assert_eq!(bundle.cost.velocity_weight, 1.0);
        assert_eq!(bundle.cost.penalty, 10000.0);
        assert_eq!(bundle.base_config.dt, 0.05);
        assert_eq!(bundle.base_config.delta, 0.002);
        assert_eq!(bundle.base_config.sigma0, Matrix2::identity());
        assert_eq!(bundle.base_config.mu0, Vector2::zeros());
        // 1−δ = 0.998 quantile.
        assert!((bundle.base_config.quantile() - 2.878).abs() < 1e-3);
    }

    #[test]
    fn builtin_narrow_passage_horizons() {
        let bundle = builtin_scenario("narrow_passage").unwrap();
        assert_eq!(bundle.scenario.obstacles.len(), 3);
        let (mppi_cfg, mppi_cost) = bundle.for_variant(Variant::Mppi);
        assert_eq!(mppi_cfg.horizon, 40);
        assert_eq!(mppi_cost.penalty, 10000.0);
        let (tr_cfg, tr_cost) = bundle.for_variant(Variant::TrustRegion);
        assert_eq!(tr_cfg.horizon, 20);
        assert_eq!(tr_cost.penalty, 0.0);
        // The diagonal threads a corridor far narrower than the obstacle
        // radius: its worst clearance over the circles is a few centimeters.
        let s = bundle.scenario;
        let min_clearance = (0..=400)
            .map(|i| {
                let t = i as f64 / 400.0;
                let (x, y) = (s.target.0 * t, s.target.1 * t);
                s.obstacles
                    .iter()
                    .map(|o| ((x - o.cx).powi(2) + (y - o.cy).powi(2)).sqrt() - o.r)
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min);
        assert!(min_clearance < 0.1, "corridor too wide: {min_clearance}");
        // Gaps between adjacent circles are much smaller than the radius.
        let gap01 = ((1.5f64 - 2.4).powi(2) + (2.3f64 - 1.6).powi(2)).sqrt() - 1.0;
        assert!(gap01 > 0.0 && gap01 < 0.2, "gap {gap01}");
    }

    #[test]
    fn unknown_scenario_is_error() {
        assert!(builtin_scenario("nonexistent").is_none());
        let err = RunSpec::from_builtin("nonexistent", Variant::Mppi).unwrap_err();
        assert!(err.to_string().contains("nonexistent"));
    }

    #[test]
    fn parse_full_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        let mut f = std::fs::File::create(&path).unwrap();
        write!(
            f,
            r#"
[scenario]
start = [0.0, 0.0, 0.0]
target = [3.0, 3.0]
v_desired = 1.5
obstacles = [{{x=2.2, y=2.0, r=0.5}}]
goal_tolerance = 0.25
max_steps = 300

[controller]
variant = "trust_region"
samples = 100
horizon = 15
dt = 0.05
mu0 = [0.0, 0.0]
sigma0 = [[1.0, 0.0], [0.0, 1.0]]
delta = 0.002
alpha = {{kind = "linear", gamma = 1.0}}
seed = 9

[cost]
position_weight = 10.0
velocity_weight = 1.0
lambda = 2.0

[run]
snapshot_step = 5
"#
        )
        .unwrap();
        let spec = load_run_spec(&path).unwrap();
        assert_eq!(spec.scenario.target, (3.0, 3.0));
        assert_eq!(spec.scenario.obstacles.len(), 1);
        assert_eq!(spec.config.samples, 100);
        assert_eq!(spec.config.horizon, 15);
        assert_eq!(spec.config.seed, 9);
        assert_eq!(spec.config.variant, Variant::TrustRegion);
        assert_eq!(spec.cost.lambda, 2.0);
        assert_eq!(spec.cost.penalty, 0.0);
        assert_eq!(spec.options.snapshot_step, 5);
    }

    #[test]
    fn builtin_base_with_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "[scenario]\nname = \"single_obstacle\"\n\n[controller]\nvariant = \"mppi\"\nsamples = 50\n",
        )
        .unwrap();
        let spec = load_run_spec(&path).unwrap();
        assert_eq!(spec.name, "single_obstacle");
        assert_eq!(spec.config.samples, 50);
        assert_eq!(spec.config.variant, Variant::Mppi);
        assert_eq!(spec.cost.penalty, 10000.0);
        assert_eq!(spec.scenario.obstacles.len(), 1);
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[controller]\nbogus_flag = 3\n").unwrap();
        assert!(load_run_spec(&path).is_err());
    }
}
