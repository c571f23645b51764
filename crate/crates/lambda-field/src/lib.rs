//! Tessellation-invariant occupancy mapping and risk-bounded planning for
//! dynamic 2D environments.
//!
//! The map stores collision intensities (rates per unit area) instead of
//! occupancy probabilities, so the collision probability of a path,
//! `1 - exp(-sum(da * E[lambda]))`, does not depend on the cell size.
//! Dynamic obstacles are tracked by a classed particle population over the
//! grid; per-cell velocity distributions feed a local planner that samples
//! (v, w) commands and bounds the expected physical risk (kinetic energy
//! by default) of every candidate trajectory.
//!
//! Module map:
//! - [`grid`]: the intensity grid, snapshots, refinement, export format.
//! - [`path`]: path plans and the closed-form collision probability.
//! - [`particles`]: the population, measurement updates, resampling.
//! - [`sensor`]: beam casting and hit/miss cell classification.
//! - [`velocity`]: per-cell speed/heading distribution fitting.
//! - [`planner`]: swept sets, risk expectation, command selection.
//! - [`world`]: deterministic simulation world and ground truth.
//! - [`scenario`]: scenario documents and overrides.
//! - [`pipeline`]: the mapping engine and the scenario runner.

pub mod error;
pub mod exec;
pub mod geometry;
pub mod gjk;
pub mod grid;
pub mod particles;
pub mod path;
pub mod pipeline;
pub mod planner;
pub mod scenario;
pub mod sensor;
pub mod velocity;
pub mod world;

pub use error::{FieldError, Result};
pub use exec::ExecMode;
pub use grid::{CellState, GridFrame, LambdaGrid, DYNAMIC_KIND_COUNT, LAMBDA_MAX};
pub use particles::{MappingConfig, ObstacleKind, Particle, StaticField};
pub use path::{PathPlan, PathStep};
pub use pipeline::{MappingEngine, RunResult, Runner};
pub use planner::{IncomingObstacle, PlannerConfig, RiskReport, RobotProfile};
pub use scenario::{load_scenario, load_scenario_with_overrides, Scenario, ScenarioError};
pub use sensor::{LidarScan, SensorModel};
pub use velocity::CellVelocityDistribution;
pub use world::{Command, Pose, WorldState};
