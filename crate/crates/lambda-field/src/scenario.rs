//! Scenario documents: a TOML file with `world`, `agents`, `robot`,
//! `sensor`, `mapping`, `planner` and `run` sections, plus dotted-key
//! overrides so single values can be adjusted from the command line or
//! the environment. Unknown keys are rejected.

use serde::Deserialize;
use thiserror::Error;

use crate::geometry::Vec2;
use crate::particles::{MappingConfig, ObstacleKind};
use crate::planner::{PlannerConfig, RobotProfile};
use crate::sensor::SensorModel;
use crate::world::{Agent, Pose, ScriptLeg, WorldState};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("bad override `{key}`: {reason}")]
    Override { key: String, reason: String },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct WorldDoc {
    bounds_min: [f64; 2],
    bounds_max: [f64; 2],
    walls: Vec<Vec<[f64; 2]>>,
}

impl Default for WorldDoc {
    fn default() -> Self {
        WorldDoc { bounds_min: [-20.0, -20.0], bounds_max: [20.0, 20.0], walls: Vec::new() }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentDoc {
    kind: String,
    start: [f64; 2],
    #[serde(default)]
    waypoints: Vec<WaypointDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WaypointDoc {
    target: [f64; 2],
    speed: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RobotDoc {
    start: [f64; 3],
    mass: f64,
    width: f64,
    length: f64,
    max_speed: f64,
    max_accel: f64,
    max_decel: f64,
    max_yaw_rate: f64,
}

impl Default for RobotDoc {
    fn default() -> Self {
        let p = RobotProfile::default();
        RobotDoc {
            start: [0.0, 0.0, 0.0],
            mass: p.mass,
            width: p.width,
            length: p.length,
            max_speed: p.max_speed,
            max_accel: p.max_accel,
            max_decel: p.max_decel,
            max_yaw_rate: p.max_yaw_rate,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SensorDoc {
    beams: usize,
    fov_deg: f64,
    max_range: f64,
    error_area: f64,
}

impl Default for SensorDoc {
    fn default() -> Self {
        let s = SensorModel::default();
        SensorDoc {
            beams: s.beam_count,
            fov_deg: s.fov.to_degrees(),
            max_range: s.max_range,
            error_area: s.error_area,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct MappingDoc {
    grid_cells: usize,
    cell_size: f64,
    population: usize,
    tau: f64,
    gamma: f64,
    resample_speed_noise: f64,
    kind_switch_probability: f64,
    lambda_prior: f64,
}

impl Default for MappingDoc {
    fn default() -> Self {
        let m = MappingConfig::default();
        MappingDoc {
            grid_cells: 100,
            cell_size: 0.15,
            population: m.population_size,
            tau: m.existence_decay_rate,
            gamma: m.birth_gain,
            resample_speed_noise: m.resample_speed_noise,
            kind_switch_probability: m.kind_switch_probability,
            lambda_prior: 0.0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct PlannerDoc {
    max_risk: f64,
    linear_samples: usize,
    angular_samples: usize,
    horizon: f64,
    time_step: f64,
    goal: [f64; 2],
    goal_tolerance: f64,
    min_dynamic_lambda: f64,
}

impl Default for PlannerDoc {
    fn default() -> Self {
        let p = PlannerConfig::default();
        PlannerDoc {
            max_risk: p.max_risk,
            linear_samples: p.linear_samples,
            angular_samples: p.angular_samples,
            horizon: p.horizon,
            time_step: p.time_step,
            goal: [p.goal.x, p.goal.y],
            goal_tolerance: p.goal_tolerance,
            min_dynamic_lambda: p.min_dynamic_lambda,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RunDoc {
    duration: f64,
    seed: u64,
}

impl Default for RunDoc {
    fn default() -> Self {
        RunDoc { duration: 10.0, seed: 0 }
    }
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    #[serde(default)]
    world: WorldDoc,
    #[serde(default)]
    agents: Vec<AgentDoc>,
    #[serde(default)]
    robot: RobotDoc,
    #[serde(default)]
    sensor: SensorDoc,
    #[serde(default)]
    mapping: MappingDoc,
    #[serde(default)]
    planner: PlannerDoc,
    #[serde(default)]
    run: RunDoc,
}

/// Fully validated scenario: everything a run needs.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub world: WorldState,
    pub sensor: SensorModel,
    pub mapping: MappingConfig,
    pub planner: PlannerConfig,
    pub profile: RobotProfile,
    pub grid_cells: usize,
    pub cell_size: f64,
    pub lambda_prior: f64,
    pub duration: f64,
    pub seed: u64,
}

/// Parse and validate a scenario document.
pub fn load_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    load_scenario_with_overrides(text, &[])
}

/// Parse a scenario document, apply `key = value` overrides addressed with
/// dotted keys (e.g. `planner.max_risk`), then validate.
pub fn load_scenario_with_overrides(
    text: &str,
    overrides: &[(String, String)],
) -> Result<Scenario, ScenarioError> {
    let mut table: toml::Table =
        text.parse().map_err(|e: toml::de::Error| ScenarioError::Parse(e.to_string()))?;
    for (key, value) in overrides {
        apply_override(&mut table, key, value)?;
    }
    let doc: ScenarioDoc = table
        .try_into()
        .map_err(|e: toml::de::Error| ScenarioError::Parse(e.to_string()))?;
    build(doc)
}

fn apply_override(table: &mut toml::Table, key: &str, value: &str) -> Result<(), ScenarioError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.is_empty() || parts.iter().any(|p| p.is_empty()) {
        return Err(ScenarioError::Override {
            key: key.to_string(),
            reason: "empty key segment".into(),
        });
    }
    let parsed: toml::Value = value.parse().map_err(|e: toml::de::Error| ScenarioError::Override {
        key: key.to_string(),
        reason: format!("unparseable value: {e}"),
    })?;
    let mut current = table;
    for part in &parts[..parts.len() - 1] {
        current = current
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| ScenarioError::Override {
                key: key.to_string(),
                reason: format!("`{part}` is not a table"),
            })?;
    }
    current.insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}

fn build(doc: ScenarioDoc) -> Result<Scenario, ScenarioError> {
    let invalid = |msg: String| ScenarioError::Validation(msg);

    let bounds_min = Vec2::new(doc.world.bounds_min[0], doc.world.bounds_min[1]);
    let bounds_max = Vec2::new(doc.world.bounds_max[0], doc.world.bounds_max[1]);
    if bounds_min.x >= bounds_max.x || bounds_min.y >= bounds_max.y {
        return Err(invalid("world bounds are empty".into()));
    }

    let mut world = WorldState::open_area(bounds_min, bounds_max);
    for (i, wall) in doc.world.walls.iter().enumerate() {
        if wall.len() < 3 {
            return Err(invalid(format!("wall {i} has fewer than 3 vertices")));
        }
        let poly: Vec<Vec2> = wall.iter().map(|&[x, y]| Vec2::new(x, y)).collect();
        if !is_convex(&poly) {
            return Err(invalid(format!("wall {i} must be a convex polygon")));
        }
        world.walls.push(poly);
    }

    for (i, agent) in doc.agents.iter().enumerate() {
        let kind = match agent.kind.as_str() {
            "pedestrian" => ObstacleKind::Pedestrian,
            "car" => ObstacleKind::Car,
            other => return Err(invalid(format!("agent {i}: unknown kind `{other}`"))),
        };
        let start = Vec2::new(agent.start[0], agent.start[1]);
        if !world.contains(start) {
            return Err(invalid(format!("agent {i} starts outside world bounds")));
        }
        let legs: Vec<ScriptLeg> = agent
            .waypoints
            .iter()
            .enumerate()
            .map(|(j, w)| {
                if w.speed < 0.0 {
                    Err(invalid(format!("agent {i} waypoint {j}: negative speed")))
                } else {
                    Ok(ScriptLeg { target: Vec2::new(w.target[0], w.target[1]), speed: w.speed })
                }
            })
            .collect::<Result<_, _>>()?;
        let agent = Agent::new(kind, start, legs);
        for wall in &world.walls {
            if crate::gjk::convex_intersects(&agent.footprint(), wall) {
                return Err(invalid(format!("agent {i} overlaps static geometry at t = 0")));
            }
        }
        world.agents.push(agent);
    }

    if doc.robot.mass <= 0.0 {
        return Err(invalid(format!("robot mass must be positive, got {}", doc.robot.mass)));
    }
    let profile = RobotProfile {
        mass: doc.robot.mass,
        width: doc.robot.width,
        length: doc.robot.length,
        max_speed: doc.robot.max_speed,
        max_accel: doc.robot.max_accel,
        max_decel: doc.robot.max_decel,
        max_yaw_rate: doc.robot.max_yaw_rate,
    };
    profile.validate().map_err(|e| invalid(format!("robot profile: {e}")))?;
    world.robot.pose = Pose {
        position: Vec2::new(doc.robot.start[0], doc.robot.start[1]),
        heading: doc.robot.start[2],
    };
    if !world.contains(world.robot.pose.position) {
        return Err(invalid("robot starts outside world bounds".into()));
    }

    let sensor = SensorModel {
        beam_count: doc.sensor.beams,
        fov: doc.sensor.fov_deg.to_radians(),
        max_range: doc.sensor.max_range,
        error_area: doc.sensor.error_area,
    };
    sensor.validate().map_err(|e| invalid(format!("sensor: {e}")))?;

    if doc.mapping.grid_cells == 0 || doc.mapping.cell_size <= 0.0 {
        return Err(invalid("mapping grid must be non-empty with positive cells".into()));
    }
    if doc.mapping.lambda_prior < 0.0 {
        return Err(invalid("lambda_prior must be >= 0".into()));
    }
    // The cycle rate is fixed at 10 Hz of simulated time.
    let mapping = MappingConfig {
        existence_decay_rate: doc.mapping.tau,
        birth_gain: doc.mapping.gamma,
        cycle_dt: 0.1,
        population_size: doc.mapping.population,
        resample_speed_noise: doc.mapping.resample_speed_noise,
        kind_switch_probability: doc.mapping.kind_switch_probability,
    };
    mapping.validate().map_err(|e| invalid(format!("mapping: {e}")))?;

    let planner = PlannerConfig {
        max_risk: doc.planner.max_risk,
        linear_samples: doc.planner.linear_samples,
        angular_samples: doc.planner.angular_samples,
        horizon: doc.planner.horizon,
        time_step: doc.planner.time_step,
        goal: Vec2::new(doc.planner.goal[0], doc.planner.goal[1]),
        goal_tolerance: doc.planner.goal_tolerance,
        min_dynamic_lambda: doc.planner.min_dynamic_lambda,
    };
    planner.validate().map_err(|e| invalid(format!("planner: {e}")))?;

    if doc.run.duration <= 0.0 {
        return Err(invalid("run duration must be positive".into()));
    }

    Ok(Scenario {
        world,
        sensor,
        mapping,
        planner,
        profile,
        grid_cells: doc.mapping.grid_cells,
        cell_size: doc.mapping.cell_size,
        lambda_prior: doc.mapping.lambda_prior,
        duration: doc.run.duration,
        seed: doc.run.seed,
    })
}

fn is_convex(poly: &[Vec2]) -> bool {
    let n = poly.len();
    let mut sign = 0.0f64;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let c = poly[(i + 2) % n];
        let cross = (b - a).cross(c - b);
        if cross.abs() < 1e-12 {
            continue;
        }
        if sign == 0.0 {
            sign = cross.signum();
        } else if cross.signum() != sign {
            return false;
        }
    }
    true
}

/// Collect overrides from environment variables: `PREFIX_section__key=value`
/// maps to the dotted key `section.key` (double underscores become dots).
pub fn overrides_from_env(prefix: &str) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = std::env::vars()
        .filter_map(|(name, value)| {
            let rest = name.strip_prefix(prefix)?;
            if rest.is_empty() {
                return None;
            }
            Some((rest.replace("__", "."), value))
        })
        .collect();
    out.sort();
    out
}
