//! Risk assessment over candidate trajectories and risk-bounded command
//! selection: swept-set obstacle prediction, the per-obstacle collision
//! decomposition, the kinetic-energy risk function and the sampled
//! (v, w) local planner.

use std::collections::HashMap;

use crate::error::{FieldError, Result};
use crate::exec::{self, ExecMode};
use crate::geometry::{angle_diff, convex_hull, wrap_angle, Vec2};
use crate::gjk::convex_intersects;
use crate::grid::{GridFrame, LambdaGrid};
use crate::particles::{rect_footprint_cells, ObstacleKind};
use crate::path::{cell_collision_probability, PathPlan, PathStep};
use crate::velocity::{CellVelocityDistribution, KAPPA_MIN};
use crate::world::{Command, Pose};

/// Normal CDF.
fn phi(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2))
}

/// Probability mass of N(mu, sigma^2) over [lo, hi] intersected with the
/// two-sigma box [mu - 2 sigma, mu + 2 sigma], normalized by the box mass.
/// With sigma = 0 this degenerates to the indicator of mu in [lo, hi].
fn gaussian_box_mass(mu: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    if hi < lo {
        return 0.0;
    }
    if sigma <= 1e-12 {
        return if (lo..=hi).contains(&mu) { 1.0 } else { 0.0 };
    }
    let box_lo = mu - 2.0 * sigma;
    let box_hi = mu + 2.0 * sigma;
    let a = lo.max(box_lo);
    let b = hi.min(box_hi);
    if b <= a {
        return 0.0;
    }
    let box_mass = phi(2.0) - phi(-2.0);
    ((phi((b - mu) / sigma) - phi((a - mu) / sigma)) / box_mass).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug)]
pub struct RobotProfile {
    pub mass: f64,
    /// Width, m; defines the abscissa relation s = i * da / L.
    pub width: f64,
    pub length: f64,
    pub max_speed: f64,
    pub max_accel: f64,
    pub max_decel: f64,
    pub max_yaw_rate: f64,
}

impl Default for RobotProfile {
    fn default() -> Self {
        RobotProfile {
            mass: 150.0,
            width: 0.5,
            length: 0.7,
            max_speed: 0.5,
            max_accel: 5.0,
            max_decel: 50.0,
            max_yaw_rate: 1.2,
        }
    }
}

impl RobotProfile {
    pub fn validate(&self) -> Result<()> {
        let ok = self.mass > 0.0
            && self.width > 0.0
            && self.length > 0.0
            && self.max_speed > 0.0
            && self.max_accel > 0.0
            && self.max_decel > 0.0
            && self.max_yaw_rate > 0.0;
        if ok {
            Ok(())
        } else {
            Err(FieldError::InvalidGrid)
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PlannerConfig {
    /// Maximum admissible expected risk, joules.
    pub max_risk: f64,
    pub linear_samples: usize,
    pub angular_samples: usize,
    /// Rollout horizon, s.
    pub horizon: f64,
    /// Rollout integration step, s.
    pub time_step: f64,
    pub goal: Vec2,
    pub goal_tolerance: f64,
    /// Dynamic cells below this intensity are not converted to swept sets.
    pub min_dynamic_lambda: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            max_risk: 1.0,
            linear_samples: 11,
            angular_samples: 21,
            horizon: 3.0,
            time_step: 0.1,
            goal: Vec2::ZERO,
            goal_tolerance: 0.3,
            min_dynamic_lambda: 0.01,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_risk > 0.0
            && self.linear_samples >= 2
            && self.angular_samples >= 1
            && self.horizon > 0.0
            && self.time_step > 0.0
            && self.goal_tolerance > 0.0;
        if ok {
            Ok(())
        } else {
            Err(FieldError::InvalidGrid)
        }
    }
}

/// One obstacle bearing on a robot path cell: class, intensity discounted
/// by the probability of reaching the cell in time, speed projected on the
/// collision axis, mass, and its arrival/departure window.
#[derive(Clone, Copy, Debug)]
pub struct IncomingObstacle {
    pub kind: ObstacleKind,
    pub intensity: f64,
    /// Obstacle speed along the collision axis (positive away from the
    /// robot cell).
    pub speed: f64,
    pub mass: f64,
    pub arrival: f64,
    pub departure: f64,
    /// Unit vector from the robot cell toward the obstacle; `None` for the
    /// in-cell static obstacle (the robot heading is the axis).
    pub axis: Option<Vec2>,
}

impl IncomingObstacle {
    fn static_obstacle(lambda: f64, arrival: f64, departure: f64) -> Self {
        IncomingObstacle {
            kind: ObstacleKind::StaticCell,
            intensity: lambda,
            speed: 0.0,
            mass: f64::INFINITY,
            arrival,
            departure,
            axis: None,
        }
    }
}

/// Per-cell decomposition of the expected risk.
#[derive(Clone, Debug)]
pub struct CellRisk {
    pub cell: usize,
    pub time: f64,
    /// Probability that the first collision happens exactly here.
    pub first_collision_probability: f64,
    /// Per-obstacle collision probabilities, aligned with the obstacle list.
    pub shares: Vec<f64>,
    /// Risk contribution of this cell, joules.
    pub risk: f64,
}

#[derive(Clone, Debug)]
pub struct RiskReport {
    pub expected_risk: f64,
    pub collision_probability: f64,
    pub per_cell: Vec<CellRisk>,
    pub feasible: bool,
}

/// Probability of colliding with obstacle `k` out of the cell's obstacles:
/// (lambda_k / E) * (1 - exp(-da * E)); zero when the cell is empty.
pub fn per_obstacle_collision_probability(
    lambda_k: f64,
    expected_lambda: f64,
    area: f64,
) -> Result<f64> {
    if lambda_k < 0.0 || !lambda_k.is_finite() {
        return Err(FieldError::NegativeIntensity(lambda_k));
    }
    if lambda_k > expected_lambda * (1.0 + 1e-12) + 1e-300 {
        return Err(FieldError::IntensityExceedsCell { obstacle: lambda_k, cell: expected_lambda });
    }
    if expected_lambda <= 0.0 {
        return Ok(0.0);
    }
    Ok((lambda_k / expected_lambda) * cell_collision_probability(expected_lambda, area)?)
}

/// Maximum kinetic-energy gain of an inelastic collision between the robot
/// at `robot_speed` and the obstacle, both speeds on the collision axis.
/// Infinite obstacle mass (the static environment) stops the robot.
pub fn kinetic_energy_risk(robot_speed: f64, robot_mass: f64, obstacle: &IncomingObstacle) -> f64 {
    debug_assert!(robot_mass > 0.0);
    if obstacle.mass.is_infinite() {
        let v_final = obstacle.speed;
        return 0.5 * robot_mass * (robot_speed - v_final).powi(2);
    }
    let v_final = (robot_mass * robot_speed + obstacle.mass * obstacle.speed)
        / (robot_mass + obstacle.mass);
    let robot_term = 0.5 * robot_mass * (robot_speed - v_final).powi(2);
    let obstacle_term = 0.5 * obstacle.mass * (obstacle.speed - v_final).powi(2);
    robot_term.max(obstacle_term)
}

/// Expected value of the risk function over the path: the probability that
/// the first collision happens in cell i, times the per-obstacle share,
/// times r(i * da, obstacle).
pub fn path_risk_expectation<F>(
    path: &PathPlan,
    obstacles: &[Vec<IncomingObstacle>],
    risk_fn: F,
) -> RiskReport
where
    F: Fn(f64, &IncomingObstacle) -> f64,
{
    debug_assert_eq!(obstacles.len(), path.steps.len());
    let area = path.area_step;
    let mut survival_exponent: f64 = 0.0;
    let mut expected_risk = 0.0;
    let mut per_cell = Vec::with_capacity(path.steps.len());
    for (i, (step, cell_obstacles)) in path.steps.iter().zip(obstacles).enumerate() {
        let expected: f64 = cell_obstacles.iter().map(|o| o.intensity).sum();
        let abscissa_area = i as f64 * area;
        let p_cell = -(-area * expected).exp_m1();
        let k_i = (-survival_exponent).exp() * p_cell;
        let mut shares = Vec::with_capacity(cell_obstacles.len());
        let mut cell_risk = 0.0;
        if expected > 0.0 {
            for ob in cell_obstacles {
                let share = per_obstacle_collision_probability(ob.intensity, expected, area)
                    .unwrap_or(0.0);
                shares.push(share);
                cell_risk += (ob.intensity / expected) * risk_fn(abscissa_area, ob);
            }
        } else {
            shares.resize(cell_obstacles.len(), 0.0);
        }
        expected_risk += k_i * cell_risk;
        per_cell.push(CellRisk {
            cell: step.cell,
            time: step.time,
            first_collision_probability: k_i,
            shares,
            risk: k_i * cell_risk,
        });
        survival_exponent += area * expected;
    }
    RiskReport {
        expected_risk,
        collision_probability: -(-survival_exponent).exp_m1(),
        per_cell,
        feasible: true,
    }
}

// ---------------------------------------------------------------------------
// Swept sets.

/// Reachable set of one dynamic cell over the horizon: the cell footprint
/// translated along every heading within two sigma of the mean at speeds
/// up to two sigma above the mean, as a convex fan polygon (angular
/// discretization no coarser than 5 degrees). Below the usable
/// concentration the set degenerates to the full disc.
pub fn swept_set(
    footprint: &[Vec2],
    distribution: &CellVelocityDistribution,
    horizon: f64,
) -> Vec<Vec2> {
    let d_max = ((distribution.mean_speed + 2.0 * distribution.speed_std).max(0.0)) * horizon;
    let mut points: Vec<Vec2> = footprint.to_vec();
    if distribution.concentration < KAPPA_MIN {
        // Conservative fallback: full disc of radius d_max around the
        // footprint.
        for i in 0..36 {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / 36.0;
            let offset = Vec2::from_angle(theta) * d_max;
            for &v in footprint {
                points.push(v + offset);
            }
        }
    } else {
        // At the concentration cap the fit cannot distinguish headings any
        // further; treat the direction as exact.
        let sigma = if distribution.concentration >= crate::velocity::KAPPA_CAP {
            0.0
        } else {
            (1.0 / distribution.concentration).sqrt()
        };
        let span = 4.0 * sigma;
        let step_max = 5.0_f64.to_radians();
        let n = (span / step_max).ceil().max(1.0) as usize;
        // Circumscribe the continuous arc so intermediate headings stay
        // inside the hull.
        let d_eff = d_max / (0.5 * span / n as f64).cos();
        for i in 0..=n {
            let theta = distribution.mean_heading - 2.0 * sigma + span * i as f64 / n as f64;
            let offset = Vec2::from_angle(theta) * d_eff;
            for &v in footprint {
                points.push(v + offset);
            }
        }
    }
    convex_hull(&points)
}

/// One dynamic cell promoted to a predicted obstacle for the current
/// planning cycle.
#[derive(Clone, Debug)]
pub struct SweptObstacle {
    pub cell: usize,
    pub center: Vec2,
    pub lambda_by_kind: [f64; crate::grid::DYNAMIC_KIND_COUNT],
    pub distribution: CellVelocityDistribution,
    pub polygon: Vec<Vec2>,
    /// Grid cells geometrically intersected by the swept polygon.
    pub covered: Vec<usize>,
}

/// Convert every sufficiently intense dynamic cell of the snapshot into a
/// swept obstacle, and index the grid cells each one can reach. Cell
/// coverage is decided by convex intersection (GJK) between the swept
/// polygon and the cell square.
pub fn build_swept_obstacles(
    snapshot: &LambdaGrid,
    horizon: f64,
    min_dynamic_lambda: f64,
    mode: ExecMode,
) -> Vec<SweptObstacle> {
    let frame = snapshot.frame;
    let candidates: Vec<usize> = (0..snapshot.cells.len())
        .filter(|&c| {
            let cell = &snapshot.cells[c];
            cell.velocity.is_some() && cell.dynamic_total() > min_dynamic_lambda
        })
        .collect();
    exec::map_indexed(mode, candidates.len(), |i| {
        let cell = candidates[i];
        let state = &snapshot.cells[cell];
        let distribution = state.velocity.expect("filtered on velocity presence");
        let footprint = frame.cell_polygon(cell);
        let polygon = swept_set(&footprint, &distribution, horizon);
        let mut min = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &polygon {
            min = Vec2::new(min.x.min(p.x), min.y.min(p.y));
            max = Vec2::new(max.x.max(p.x), max.y.max(p.y));
        }
        let covered = frame
            .cells_overlapping_rect(min, max, -1.0)
            .into_iter()
            .filter(|&c| convex_intersects(&frame.cell_polygon(c), &polygon))
            .collect();
        SweptObstacle {
            cell,
            center: frame.center_of(cell),
            lambda_by_kind: state.lambda_by_kind,
            distribution,
            polygon,
            covered,
        }
    })
}

fn coverage_index(obstacles: &[SweptObstacle]) -> HashMap<usize, Vec<u32>> {
    let mut map: HashMap<usize, Vec<u32>> = HashMap::new();
    for (i, ob) in obstacles.iter().enumerate() {
        for &c in &ob.covered {
            map.entry(c).or_default().push(i as u32);
        }
    }
    map
}

// ---------------------------------------------------------------------------
// Candidate rollout.

/// A candidate trajectory: the swept path plan plus the per-step headings
/// and the final position of the rollout.
#[derive(Clone, Debug)]
pub struct Rollout {
    pub command: Command,
    pub path: PathPlan,
    pub headings: Vec<f64>,
    pub final_position: Vec2,
}

/// Roll a constant (v, w) command from `pose` over the horizon and collect
/// the cells swept by the robot footprint, with entry/exit times.
pub fn rollout(
    pose: Pose,
    command: Command,
    profile: &RobotProfile,
    config: &PlannerConfig,
    frame: &GridFrame,
) -> Rollout {
    let steps_n = (config.horizon / config.time_step).round().max(1.0) as usize;
    let dt = config.time_step;
    let mut entries: HashMap<usize, (f64, f64, f64)> = HashMap::new();
    let mut position = pose.position;
    let mut heading = pose.heading;
    let mut cells_buf: Vec<usize> = Vec::new();
    for k in 0..=steps_n {
        let t = k as f64 * dt;
        rect_footprint_cells(
            position,
            0.5 * profile.length,
            0.5 * profile.width,
            heading,
            frame,
            &mut cells_buf,
        );
        for &cell in &cells_buf {
            entries
                .entry(cell)
                .and_modify(|e| e.1 = t + dt)
                .or_insert((t, t + dt, heading));
        }
        // Advance one step along the arc.
        if command.angular.abs() < 1e-9 {
            position += Vec2::from_angle(heading) * (command.linear * dt);
        } else {
            let radius = command.linear / command.angular;
            let next = heading + command.angular * dt;
            position += Vec2::new(
                radius * (next.sin() - heading.sin()),
                radius * (heading.cos() - next.cos()),
            );
            heading = wrap_angle(next);
        }
    }
    let mut ordered: Vec<(usize, (f64, f64, f64))> = entries.into_iter().collect();
    ordered.sort_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(a.0.cmp(&b.0)));
    let steps = ordered
        .iter()
        .map(|&(cell, (entry, exit, _))| PathStep { cell, time: entry, exit_time: exit })
        .collect();
    let headings = ordered.iter().map(|&(_, (_, _, h))| h).collect();
    Rollout {
        command,
        path: PathPlan::new(steps, frame.cell_area(), profile.width)
            .expect("entry-sorted steps are ordered"),
        headings,
        final_position: position,
    }
}

// ---------------------------------------------------------------------------
// Obstacle/path intersection.

/// For every path cell, the obstacles (static and predicted dynamic) that
/// can occupy it while the robot does: the swept polygon must reach the
/// cell (GJK coverage) and the time windows must overlap. Dynamic
/// intensities are discounted by the probability that a two-sigma draw of
/// (speed, heading) reaches the cell inside the robot's occupancy window.
pub fn intersect_paths(
    rollout: &Rollout,
    snapshot: &LambdaGrid,
    obstacles: &[SweptObstacle],
    coverage: &HashMap<usize, Vec<u32>>,
    horizon: f64,
) -> Vec<Vec<IncomingObstacle>> {
    let frame = snapshot.frame;
    let half_diag = frame.cell_size * std::f64::consts::FRAC_1_SQRT_2;
    rollout
        .path
        .steps
        .iter()
        .zip(&rollout.headings)
        .map(|(step, &heading)| {
            let mut list = Vec::new();
            let lambda_static = snapshot.cells[step.cell].lambda_static;
            if lambda_static > 0.0 {
                list.push(IncomingObstacle::static_obstacle(
                    lambda_static,
                    step.time,
                    step.exit_time,
                ));
            }
            let Some(ids) = coverage.get(&step.cell) else {
                return list;
            };
            let cell_center = frame.center_of(step.cell);
            for &id in ids {
                let ob = &obstacles[id as usize];
                let offset = ob.center - cell_center;
                let dist = offset.length();
                let near = (dist - 2.0 * half_diag).max(0.0);
                let far = dist + 2.0 * half_diag;
                let dist_spec = &ob.distribution;
                let v_hi = (dist_spec.mean_speed + 2.0 * dist_spec.speed_std).max(0.0);
                let v_lo = (dist_spec.mean_speed - 2.0 * dist_spec.speed_std).max(0.0);
                let arrival = if near <= 0.0 {
                    0.0
                } else if v_hi <= 1e-9 {
                    continue;
                } else {
                    near / v_hi
                };
                let departure = if v_lo <= 1e-9 { horizon } else { (far / v_lo).min(horizon) };
                // Time-interval test against the robot's occupancy window.
                if arrival > step.exit_time || departure < step.time {
                    continue;
                }

                // Heading mass: the angular interval subtended from the
                // obstacle by the cell inflated by the footprint radius
                // (the same contact ball as the near/far distances).
                let angular_mass = if dist <= 2.0 * half_diag {
                    1.0
                } else {
                    let to_cell = (cell_center - ob.center).angle();
                    let half_angle = ((2.0 * half_diag) / dist).min(1.0).asin();
                    match dist_spec.heading_std() {
                        Some(sigma) => {
                            let rel = angle_diff(to_cell, dist_spec.mean_heading);
                            gaussian_box_mass(0.0, sigma, rel - half_angle, rel + half_angle)
                        }
                        // Full-circle fallback: uniform heading.
                        None => half_angle / std::f64::consts::PI,
                    }
                };
                if angular_mass <= 0.0 {
                    continue;
                }
                // Speed mass: speeds that put the obstacle in the cell
                // somewhere inside the robot's occupancy window.
                let t_out = step.exit_time.min(horizon);
                if t_out <= 0.0 {
                    continue;
                }
                let v_need_lo = near / t_out;
                let v_need_hi = if step.time <= 1e-9 { f64::INFINITY } else { far / step.time };
                let speed_mass =
                    gaussian_box_mass(dist_spec.mean_speed, dist_spec.speed_std, v_need_lo, v_need_hi);
                if speed_mass <= 0.0 {
                    continue;
                }

                let axis = if dist > 1e-9 {
                    offset * (1.0 / dist)
                } else {
                    Vec2::from_angle(heading)
                };
                let speed_on_axis = dist_spec.mean_velocity().dot(axis);
                for (k, &lambda) in ob.lambda_by_kind.iter().enumerate() {
                    let discounted = lambda * angular_mass * speed_mass;
                    if discounted > 1e-12 {
                        let kind = ObstacleKind::from_dynamic_index(k);
                        list.push(IncomingObstacle {
                            kind,
                            intensity: discounted,
                            speed: speed_on_axis,
                            mass: kind.mass(),
                            arrival,
                            departure,
                            axis: Some(axis),
                        });
                    }
                }
            }
            list
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Command selection.

#[derive(Clone, Copy, Debug)]
pub struct CandidateOutcome {
    pub command: Command,
    pub risk: f64,
    pub goal_distance: f64,
    pub feasible: bool,
}

#[derive(Clone, Debug)]
pub struct PlanDecision {
    pub command: Command,
    pub report: RiskReport,
    pub candidates: Vec<CandidateOutcome>,
}

/// Default risk function: kinetic energy of the inelastic collision, with
/// the robot speed projected on each obstacle's collision axis.
pub fn kinetic_risk_for_rollout<'a>(
    rollout: &'a Rollout,
    robot_mass: f64,
) -> impl Fn(f64, &IncomingObstacle) -> f64 + 'a {
    let area = rollout.path.area_step;
    move |abscissa_area: f64, ob: &IncomingObstacle| {
        let i = ((abscissa_area / area).round() as usize).min(rollout.headings.len().saturating_sub(1));
        let heading = rollout.headings.get(i).copied().unwrap_or(0.0);
        let robot_velocity = Vec2::from_angle(heading) * rollout.command.linear;
        let v_r = match ob.axis {
            Some(axis) => robot_velocity.dot(axis),
            None => rollout.command.linear,
        };
        kinetic_energy_risk(v_r, robot_mass, ob)
    }
}

/// Evaluate one candidate command against the snapshot.
fn evaluate_candidate<F>(
    command: Command,
    pose: Pose,
    snapshot: &LambdaGrid,
    obstacles: &[SweptObstacle],
    coverage: &HashMap<usize, Vec<u32>>,
    profile: &RobotProfile,
    config: &PlannerConfig,
    risk_scale: &F,
) -> (Rollout, RiskReport)
where
    F: Fn(f64, &IncomingObstacle, f64) -> f64,
{
    let ro = rollout(pose, command, profile, config, &snapshot.frame);
    let per_cell = intersect_paths(&ro, snapshot, obstacles, coverage, config.horizon);
    let report = {
        let kinetic = kinetic_risk_for_rollout(&ro, profile.mass);
        path_risk_expectation(&ro.path, &per_cell, |a, ob| risk_scale(a, ob, kinetic(a, ob)))
    };
    (ro, report)
}

/// Sample (v, w) commands, roll them out over the horizon and return the
/// command that minimizes the final distance to the goal subject to
/// expected risk <= max_risk; if no command qualifies, the risk-minimizing
/// one. The stop command (0, 0) is always in the sample set. `risk_scale`
/// post-processes the default kinetic risk (identity for the standard
/// planner), keeping the risk function pluggable.
pub fn plan_with_risk<F>(
    snapshot: &LambdaGrid,
    pose: Pose,
    profile: &RobotProfile,
    config: &PlannerConfig,
    risk_scale: F,
    mode: ExecMode,
) -> PlanDecision
where
    F: Fn(f64, &IncomingObstacle, f64) -> f64 + Sync + Send,
{
    let obstacles =
        build_swept_obstacles(snapshot, config.horizon, config.min_dynamic_lambda, mode);
    let coverage = coverage_index(&obstacles);

    let mut commands: Vec<Command> = Vec::new();
    for iv in 0..config.linear_samples {
        let v = profile.max_speed * iv as f64 / (config.linear_samples - 1) as f64;
        for iw in 0..config.angular_samples {
            let w = if config.angular_samples == 1 {
                0.0
            } else {
                -profile.max_yaw_rate
                    + 2.0 * profile.max_yaw_rate * iw as f64
                        / (config.angular_samples - 1) as f64
            };
            commands.push(Command { linear: v, angular: w });
        }
    }
    if !commands.iter().any(|c| c.linear == 0.0 && c.angular == 0.0) {
        commands.push(Command::default());
    }

    let outcomes: Vec<CandidateOutcome> = exec::map_indexed(mode, commands.len(), |i| {
        let command = commands[i];
        let (ro, report) = evaluate_candidate(
            command, pose, snapshot, &obstacles, &coverage, profile, config, &risk_scale,
        );
        CandidateOutcome {
            command,
            risk: report.expected_risk,
            goal_distance: ro.final_position.distance(config.goal),
            feasible: report.expected_risk <= config.max_risk,
        }
    });

    let chosen_idx = select_command(&outcomes);
    let command = outcomes[chosen_idx].command;
    let (_, mut report) = evaluate_candidate(
        command, pose, snapshot, &obstacles, &coverage, profile, config, &risk_scale,
    );
    report.feasible = outcomes[chosen_idx].feasible;
    PlanDecision { command, report, candidates: outcomes }
}

/// The standard planner with the unscaled kinetic-energy risk.
pub fn plan(
    snapshot: &LambdaGrid,
    pose: Pose,
    profile: &RobotProfile,
    config: &PlannerConfig,
    mode: ExecMode,
) -> PlanDecision {
    plan_with_risk(snapshot, pose, profile, config, |_, _, kinetic| kinetic, mode)
}

fn select_command(outcomes: &[CandidateOutcome]) -> usize {
    let key_feasible = |o: &CandidateOutcome| (o.goal_distance, o.risk, o.command.angular.abs());
    let key_fallback = |o: &CandidateOutcome| (o.risk, o.command.angular.abs(), o.command.linear);
    let mut best: Option<usize> = None;
    let any_feasible = outcomes.iter().any(|o| o.feasible);
    for (i, o) in outcomes.iter().enumerate() {
        if any_feasible && !o.feasible {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => {
                let (cur, old) = if any_feasible {
                    (key_feasible(o), key_feasible(&outcomes[b]))
                } else {
                    (key_fallback(o), key_fallback(&outcomes[b]))
                };
                cur.0 < old.0 - 1e-12
                    || ((cur.0 - old.0).abs() <= 1e-12
                        && (cur.1 < old.1 - 1e-12
                            || ((cur.1 - old.1).abs() <= 1e-12 && cur.2 < old.2 - 1e-12)))
            }
        };
        if better {
            best = Some(i);
        }
    }
    best.expect("the sample set always contains the stop command")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridFrame;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn frame() -> GridFrame {
        GridFrame::new(60, 60, 0.15, Vec2::new(-4.5, -4.5)).unwrap()
    }

    #[test]
    fn per_obstacle_examples() {
        // Single obstacle owns the whole cell probability.
        let p = per_obstacle_collision_probability(6.0, 6.0, 0.0225).unwrap();
        assert_relative_eq!(p, cell_collision_probability(6.0, 0.0225).unwrap());
        // Two equal obstacles split evenly.
        let half = per_obstacle_collision_probability(3.0, 6.0, 0.0225).unwrap();
        assert_relative_eq!(half, 0.5 * p, epsilon = 1e-15);
        // Frozen Monte Carlo oracle value for lambda_k = 2, E = 6, da = 0.1.
        assert_relative_eq!(
            per_obstacle_collision_probability(2.0, 6.0, 0.1).unwrap(),
            0.1503961213019912,
            epsilon = 1e-15
        );
        assert_eq!(per_obstacle_collision_probability(0.0, 0.0, 0.1).unwrap(), 0.0);
        assert!(per_obstacle_collision_probability(7.0, 6.0, 0.1).is_err());
    }

    /// Monte Carlo oracle over the exponential first-arrival location.
    #[test]
    fn per_obstacle_monte_carlo() {
        let (lambda_k, expected, area) = (2.0, 6.0, 0.1);
        let closed = per_obstacle_collision_probability(lambda_k, expected, area).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let trials = 1_000_000;
        let mut hits = 0u64;
        for _ in 0..trials {
            // First collision location ~ Exp(E) over crossed area.
            let a = -(1.0 - rng.random::<f64>()).ln() / expected;
            if a < area && rng.random::<f64>() < lambda_k / expected {
                hits += 1;
            }
        }
        let p_hat = hits as f64 / trials as f64;
        let se = (closed * (1.0 - closed) / trials as f64).sqrt();
        assert!((p_hat - closed).abs() < 3.0 * se);
    }

    #[test]
    fn kinetic_energy_examples() {
        // Equal velocities: no energy change.
        let ob = IncomingObstacle {
            kind: ObstacleKind::Car,
            intensity: 1.0,
            speed: 0.5,
            mass: 500.0,
            arrival: 0.0,
            departure: 1.0,
            axis: None,
        };
        assert_relative_eq!(kinetic_energy_risk(0.5, 150.0, &ob), 0.0);
        // Robot at 0.5 m/s vs infinite-mass wall.
        let wall = IncomingObstacle::static_obstacle(1.0, 0.0, 1.0);
        assert_relative_eq!(kinetic_energy_risk(0.5, 150.0, &wall), 18.75, epsilon = 1e-12);
        // Robot 150 kg at 0.5 m/s vs stationary 80 kg pedestrian
        // (momentum-conservation oracle).
        let ped = IncomingObstacle {
            kind: ObstacleKind::Pedestrian,
            intensity: 1.0,
            speed: 0.0,
            mass: 80.0,
            arrival: 0.0,
            departure: 1.0,
            axis: None,
        };
        assert_relative_eq!(
            kinetic_energy_risk(0.5, 150.0, &ped),
            4.253308128544424,
            epsilon = 1e-9
        );
    }

    #[test]
    fn risk_nonnegative_and_zero_iff_matched() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let ob = IncomingObstacle {
                kind: ObstacleKind::Car,
                intensity: 1.0,
                speed: rng.random_range(-2.0..2.0),
                mass: rng.random_range(10.0..1000.0),
                arrival: 0.0,
                departure: 1.0,
                axis: None,
            };
            let v = rng.random_range(-2.0..2.0);
            let r = kinetic_energy_risk(v, 150.0, &ob);
            assert!(r >= 0.0);
            if (v - ob.speed).abs() < 1e-12 {
                assert!(r < 1e-18);
            } else {
                assert!(r > 0.0);
            }
        }
    }

    fn synthetic_path(n: usize, area: f64) -> PathPlan {
        let steps = (0..n)
            .map(|i| PathStep { cell: i, time: i as f64 * 0.1, exit_time: (i + 1) as f64 * 0.1 })
            .collect();
        PathPlan::new(steps, area, 0.5).unwrap()
    }

    fn random_obstacles(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<IncomingObstacle>> {
        (0..n)
            .map(|_| {
                let count = rng.random_range(0..4usize);
                (0..count)
                    .map(|_| IncomingObstacle {
                        kind: ObstacleKind::Pedestrian,
                        intensity: rng.random_range(0.0..40.0),
                        speed: rng.random_range(-1.0..1.0),
                        mass: 80.0,
                        arrival: 0.0,
                        departure: 3.0,
                        axis: None,
                    })
                    .collect()
            })
            .collect()
    }

    /// With r = 1 the expected risk telescopes to the path collision
    /// probability.
    #[test]
    fn telescoping_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.random_range(1..40usize);
            let path = synthetic_path(n, 0.0225);
            let obstacles = random_obstacles(&mut rng, n);
            let report = path_risk_expectation(&path, &obstacles, |_, _| 1.0);
            assert!(
                (report.expected_risk - report.collision_probability).abs() < 1e-12,
                "telescoping broke: {} vs {}",
                report.expected_risk,
                report.collision_probability
            );
        }
    }

    #[test]
    fn zero_field_zero_risk() {
        let path = synthetic_path(10, 0.0225);
        let obstacles: Vec<Vec<IncomingObstacle>> = vec![Vec::new(); 10];
        let report = path_risk_expectation(&path, &obstacles, |_, _| 1.0);
        assert_eq!(report.expected_risk, 0.0);
        assert_eq!(report.collision_probability, 0.0);
    }

    /// Monte Carlo oracle for a single-cell path with one obstacle.
    #[test]
    fn single_cell_risk_monte_carlo() {
        let path = synthetic_path(1, 0.1);
        let ob = IncomingObstacle {
            kind: ObstacleKind::Pedestrian,
            intensity: 6.0,
            speed: 0.0,
            mass: 80.0,
            arrival: 0.0,
            departure: 1.0,
            axis: None,
        };
        let risk_value = 4.253308128544424; // robot 150 kg at 0.5 m/s oracle
        let report = path_risk_expectation(&path, &[vec![ob]], |_, o| {
            kinetic_energy_risk(0.5, 150.0, o)
        });
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let trials = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..trials {
            let a = -(1.0 - rng.random::<f64>()).ln() / 6.0;
            if a < 0.1 {
                acc += risk_value;
            }
        }
        let mc = acc / trials as f64;
        let p = -(-0.1f64 * 6.0).exp_m1();
        let se = risk_value * (p * (1.0 - p) / trials as f64).sqrt();
        assert!((mc - report.expected_risk).abs() < 3.0 * se);
    }

    /// Per-cell obstacle shares sum to the cell collision probability.
    #[test]
    fn share_decomposition_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..300 {
            let n_obstacles = rng.random_range(1..=8usize);
            let lambdas: Vec<f64> =
                (0..n_obstacles).map(|_| rng.random_range(0.0..50.0)).collect();
            let expected: f64 = lambdas.iter().sum();
            let area = 0.0225;
            let shares: f64 = lambdas
                .iter()
                .map(|&l| per_obstacle_collision_probability(l, expected, area).unwrap())
                .sum();
            let cell = cell_collision_probability(expected, area).unwrap();
            assert!((shares - cell).abs() < 1e-12);
        }
    }

    #[test]
    fn swept_set_degenerate_cases() {
        use crate::velocity::KAPPA_CAP;
        let f = frame();
        let cell = f.cell_at(Vec2::ZERO).unwrap();
        let footprint = f.cell_polygon(cell).to_vec();
        // Zero speed and spread: the polygon is the footprint.
        let d0 = CellVelocityDistribution {
            mean_speed: 0.0,
            speed_std: 0.0,
            mean_heading: 0.3,
            concentration: KAPPA_CAP,
        };
        let set = swept_set(&footprint, &d0, 3.0);
        assert_relative_eq!(
            crate::geometry::polygon_area(&set),
            f.cell_area(),
            epsilon = 1e-9
        );
        // Deterministic heading and speed: the footprint swept along a
        // single segment of length mu_v * horizon.
        let d1 = CellVelocityDistribution {
            mean_speed: 1.0,
            speed_std: 0.0,
            mean_heading: 0.0,
            concentration: KAPPA_CAP,
        };
        let set = swept_set(&footprint, &d1, 2.0);
        let area = crate::geometry::polygon_area(&set);
        let expect = f.cell_area() + f.cell_size * 2.0;
        assert_relative_eq!(area, expect, epsilon = 1e-9);
    }

    /// Containment sampling oracle: positions reachable with parameters
    /// inside the two-sigma box lie inside the swept polygon.
    #[test]
    fn swept_set_contains_two_sigma_box() {
        let f = frame();
        let cell = f.cell_at(Vec2::new(0.4, -0.3)).unwrap();
        let footprint = f.cell_polygon(cell).to_vec();
        let d = CellVelocityDistribution {
            mean_speed: 1.2,
            speed_std: 0.25,
            mean_heading: 0.8,
            concentration: 16.0,
        };
        let horizon = 2.5;
        let set = swept_set(&footprint, &d, horizon);
        let sigma_theta = (1.0 / d.concentration).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10_000 {
            let v = d.mean_speed + rng.random_range(-2.0..2.0) * d.speed_std;
            let theta = d.mean_heading + rng.random_range(-2.0..2.0) * sigma_theta;
            let t = rng.random_range(0.0..1.0) * horizon;
            let corner = footprint[rng.random_range(0..4)];
            let inner = rng.random_range(0.0..1.0);
            let centroid = Vec2::new(
                footprint.iter().map(|p| p.x).sum::<f64>() / 4.0,
                footprint.iter().map(|p| p.y).sum::<f64>() / 4.0,
            );
            let start = centroid + (corner - centroid) * inner;
            let pos = start + Vec2::from_angle(theta) * (v.max(0.0) * t);
            assert!(
                crate::geometry::point_in_polygon(pos, &set)
                    || on_boundary(pos, &set),
                "{pos:?} escaped the swept set"
            );
        }
    }

    fn on_boundary(p: Vec2, poly: &[Vec2]) -> bool {
        // Tolerant segment-distance check for points grazing the hull.
        (0..poly.len()).any(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % poly.len()];
            let ab = b - a;
            let t = ((p - a).dot(ab) / ab.length_squared()).clamp(0.0, 1.0);
            (a + ab * t - p).length() < 1e-6
        })
    }

    fn plain_snapshot(f: GridFrame) -> LambdaGrid {
        LambdaGrid::uniform(f, 0.0).unwrap()
    }

    #[test]
    fn disjoint_geometry_no_obstacles() {
        let f = frame();
        let mut snap = plain_snapshot(f);
        // Dynamic cell far away, moving away from the robot.
        let cell = f.cell_at(Vec2::new(4.0, 4.0)).unwrap();
        snap.cells[cell].lambda_by_kind = [100.0, 0.0];
        snap.cells[cell].velocity = Some(CellVelocityDistribution {
            mean_speed: 1.0,
            speed_std: 0.05,
            mean_heading: 0.78,
            concentration: 100.0,
        });
        let profile = RobotProfile::default();
        let config = PlannerConfig { goal: Vec2::new(0.0, 2.0), ..Default::default() };
        let obstacles = build_swept_obstacles(&snap, config.horizon, 0.01, ExecMode::Sequential);
        let coverage = coverage_index(&obstacles);
        let ro = rollout(
            Pose { position: Vec2::ZERO, heading: std::f64::consts::FRAC_PI_2 },
            Command { linear: 0.5, angular: 0.0 },
            &profile,
            &config,
            &f,
        );
        let per_cell = intersect_paths(&ro, &snap, &obstacles, &coverage, config.horizon);
        assert!(per_cell.iter().all(|l| l.is_empty()));
    }

    #[test]
    fn intersecting_geometry_disjoint_times_no_obstacles() {
        let f = frame();
        let mut snap = plain_snapshot(f);
        // A fast, tightly tracked obstacle crosses the far end of the
        // robot's lane early: its swept set covers those path cells, but it
        // has left them long before the robot arrives.
        let cell = f.cell_at(Vec2::new(1.6, -1.0)).unwrap();
        snap.cells[cell].lambda_by_kind = [100.0, 0.0];
        snap.cells[cell].velocity = Some(CellVelocityDistribution {
            mean_speed: 1.4,
            speed_std: 0.01,
            mean_heading: std::f64::consts::FRAC_PI_2, // toward +y
            concentration: 400.0,
        });
        let profile = RobotProfile::default();
        let config = PlannerConfig { horizon: 3.0, ..Default::default() };
        let obstacles = build_swept_obstacles(&snap, config.horizon, 0.01, ExecMode::Sequential);
        let coverage = coverage_index(&obstacles);
        let ro = rollout(
            Pose { position: Vec2::ZERO, heading: 0.0 },
            Command { linear: 0.5, angular: 0.0 },
            &profile,
            &config,
            &f,
        );
        // Geometry does intersect: the swept set covers lane cells near
        // x = 1.6 that the robot will sweep late in the horizon.
        let covered_lane_cells: Vec<usize> = ro
            .path
            .steps
            .iter()
            .map(|s| s.cell)
            .filter(|c| coverage.contains_key(c))
            .collect();
        assert!(!covered_lane_cells.is_empty(), "construction needs geometric overlap");
        let per_cell = intersect_paths(&ro, &snap, &obstacles, &coverage, config.horizon);
        for (step, obs) in ro.path.steps.iter().zip(&per_cell) {
            assert!(
                obs.iter().all(|o| o.kind == ObstacleKind::StaticCell),
                "cell {} flagged despite disjoint time intervals",
                step.cell
            );
        }
    }

    /// Perpendicular crossing compared against brute-force space-time
    /// sampling at 1 cm / 10 ms resolution.
    #[test]
    fn crossing_flags_match_dense_sampling() {
        let f = frame();
        let mut snap = plain_snapshot(f);
        let ob_pos = Vec2::new(1.2, -1.5);
        let ob_cell = f.cell_at(ob_pos).unwrap();
        snap.cells[ob_cell].lambda_by_kind = [100.0, 0.0];
        let dist = CellVelocityDistribution {
            mean_speed: 1.0,
            speed_std: 0.1,
            mean_heading: std::f64::consts::FRAC_PI_2, // toward +y
            concentration: 64.0,
        };
        snap.cells[ob_cell].velocity = Some(dist);
        let profile = RobotProfile::default();
        let config = PlannerConfig { horizon: 3.0, ..Default::default() };
        let obstacles = build_swept_obstacles(&snap, config.horizon, 0.01, ExecMode::Sequential);
        let coverage = coverage_index(&obstacles);
        let ro = rollout(
            Pose { position: Vec2::ZERO, heading: 0.0 },
            Command { linear: 0.5, angular: 0.0 },
            &profile,
            &config,
            &f,
        );
        let per_cell = intersect_paths(&ro, &snap, &obstacles, &coverage, config.horizon);
        let flagged: std::collections::BTreeSet<usize> = ro
            .path
            .steps
            .iter()
            .zip(&per_cell)
            .filter(|(_, obs)| obs.iter().any(|o| o.kind != ObstacleKind::StaticCell))
            .map(|(s, _)| s.cell)
            .collect();

        // Dense space-time oracle: move the obstacle's cell footprint at
        // two-sigma parameter extremes on a 1 cm / 10 ms lattice and record
        // the robot path cells it overlaps (axis-aligned square contact)
        // during the robot's own occupancy window.
        let sigma_theta = (1.0 / dist.concentration).sqrt();
        let mut oracle = std::collections::BTreeSet::new();
        let cell_center = f.center_of(ob_cell);
        let contact = f.cell_size; // Minkowski sum of two cell squares
        for step in &ro.path.steps {
            let target = f.center_of(step.cell);
            let mut reachable = false;
            let mut v = (dist.mean_speed - 2.0 * dist.speed_std).max(0.0);
            'outer: while v <= dist.mean_speed + 2.0 * dist.speed_std + 1e-9 {
                let mut th = dist.mean_heading - 2.0 * sigma_theta;
                while th <= dist.mean_heading + 2.0 * sigma_theta + 1e-9 {
                    let dir = Vec2::from_angle(th);
                    let mut t = 0.0;
                    while t <= config.horizon {
                        let pos = cell_center + dir * (v * t);
                        if (pos.x - target.x).abs() <= contact
                            && (pos.y - target.y).abs() <= contact
                            && t >= step.time - 0.01
                            && t <= step.exit_time + 0.01
                        {
                            reachable = true;
                            break 'outer;
                        }
                        t += 0.01;
                    }
                    th += 0.01; // ~0.01 rad steps
                }
                v += 0.01;
            }
            if reachable {
                oracle.insert(step.cell);
            }
        }
        // The analytic flags must cover the oracle (conservative), and the
        // slack from the bounding-radius inflation stays bounded.
        for c in &oracle {
            assert!(flagged.contains(c), "oracle cell {c} missing from flags");
        }
        let extra = flagged.difference(&oracle).count();
        assert!(extra <= 10, "too many extra flags: {extra} of {}", flagged.len());
    }

    #[test]
    fn empty_field_full_speed_toward_goal() {
        let f = frame();
        let snap = plain_snapshot(f);
        let profile = RobotProfile::default();
        let config = PlannerConfig { goal: Vec2::new(3.0, 0.0), ..Default::default() };
        let decision = plan(
            &snap,
            Pose { position: Vec2::ZERO, heading: 0.0 },
            &profile,
            &config,
            ExecMode::Sequential,
        );
        assert_relative_eq!(decision.command.linear, profile.max_speed);
        assert_relative_eq!(decision.command.angular, 0.0);
        assert_eq!(decision.report.expected_risk, 0.0);
    }

    #[test]
    fn blocked_corridor_selects_stop() {
        let f = frame();
        let mut snap = plain_snapshot(f);
        // A saturated static ring hugging the robot footprint: any motion
        // sweeps lethal cells, while turning in place stays clear.
        for cell in 0..f.len() {
            let c = f.center_of(cell);
            let d = c.distance(Vec2::ZERO);
            if (0.37..1.2).contains(&d) {
                snap.cells[cell].lambda_static = 1000.0;
            }
        }
        let profile = RobotProfile::default();
        // A tight risk budget keeps even a slow crawl into the ring
        // infeasible.
        let config =
            PlannerConfig { goal: Vec2::new(4.0, 0.0), max_risk: 0.05, ..Default::default() };
        let decision = plan(
            &snap,
            Pose { position: Vec2::ZERO, heading: 0.0 },
            &profile,
            &config,
            ExecMode::Sequential,
        );
        assert_relative_eq!(decision.command.linear, 0.0);
        assert_relative_eq!(decision.command.angular, 0.0);
    }

    #[test]
    fn infeasible_everywhere_returns_risk_argmin() {
        let f = frame();
        let mut snap = plain_snapshot(f);
        // Poorly tracked dynamic mass nearby: the disc fallback covers the
        // robot's surroundings, so even stopping is risky.
        for offset in [Vec2::new(0.8, 0.0), Vec2::new(-0.6, 0.5), Vec2::new(0.1, -0.9)] {
            let cell = f.cell_at(offset).unwrap();
            snap.cells[cell].lambda_by_kind = [500.0, 0.0];
            snap.cells[cell].velocity = Some(CellVelocityDistribution {
                mean_speed: 1.5,
                speed_std: 0.6,
                mean_heading: 0.0,
                concentration: 0.2, // below KAPPA_MIN: full-disc fallback
            });
        }
        let profile = RobotProfile::default();
        let config = PlannerConfig { goal: Vec2::new(4.0, 0.0), ..Default::default() };
        let decision = plan(
            &snap,
            Pose { position: Vec2::ZERO, heading: 0.0 },
            &profile,
            &config,
            ExecMode::Sequential,
        );
        assert!(decision.candidates.iter().all(|c| !c.feasible));
        assert!(!decision.report.feasible);
        // The argmin rule: the chosen command carries the lowest risk.
        let min_risk = decision
            .candidates
            .iter()
            .map(|c| c.risk)
            .fold(f64::INFINITY, f64::min);
        assert_relative_eq!(decision.report.expected_risk, min_risk, epsilon = 1e-9);
    }

    /// Scaling the risk function and the budget together must not change
    /// the chosen command.
    #[test]
    fn argmin_invariant_under_joint_scaling() {
        let f = frame();
        let mut snap = plain_snapshot(f);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for cell in 0..f.len() {
            if rng.random::<f64>() < 0.02 {
                snap.cells[cell].lambda_static = rng.random_range(0.0..400.0);
            }
        }
        let ob_cell = f.cell_at(Vec2::new(1.0, 0.6)).unwrap();
        snap.cells[ob_cell].lambda_by_kind = [120.0, 30.0];
        snap.cells[ob_cell].velocity = Some(CellVelocityDistribution {
            mean_speed: 1.0,
            speed_std: 0.3,
            mean_heading: -2.0,
            concentration: 9.0,
        });
        let profile = RobotProfile::default();
        let pose = Pose { position: Vec2::ZERO, heading: 0.2 };
        for scale in [3.0, 0.25, 1000.0] {
            let base = PlannerConfig { goal: Vec2::new(3.5, 0.5), ..Default::default() };
            let scaled = PlannerConfig { max_risk: base.max_risk * scale, ..base };
            let d0 = plan(&snap, pose, &profile, &base, ExecMode::Sequential);
            let d1 = plan_with_risk(
                &snap,
                pose,
                &profile,
                &scaled,
                |_, _, kinetic| kinetic * scale,
                ExecMode::Sequential,
            );
            assert_eq!(d0.command, d1.command, "scale {scale}");
        }
    }

    #[test]
    fn rollout_zero_speed_occupies_own_cells() {
        let f = frame();
        let profile = RobotProfile::default();
        let config = PlannerConfig::default();
        let ro = rollout(
            Pose { position: Vec2::ZERO, heading: 0.0 },
            Command::default(),
            &profile,
            &config,
            &f,
        );
        assert!(!ro.path.steps.is_empty());
        for step in &ro.path.steps {
            assert_eq!(step.time, 0.0);
            assert_relative_eq!(step.exit_time, config.horizon + config.time_step, epsilon = 1e-9);
        }
        assert_relative_eq!(ro.final_position.distance(Vec2::ZERO), 0.0);
    }

    /// The expected risk of a fixed continuous field and obstacle set is
    /// invariant under grid refinement.
    #[test]
    fn risk_tessellation_invariance() {
        // A path of N cells with a constant expected intensity per unit
        // area, refined k-fold: each cell splits into k^2 subcells at the
        // same intensity and times.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let coarse_frame = GridFrame::new(10, 1, 0.15, Vec2::ZERO).unwrap();
        for _ in 0..20 {
            let lambdas: Vec<f64> = (0..10).map(|_| rng.random_range(0.0..80.0)).collect();
            let path = synthetic_path(10, coarse_frame.cell_area());
            let obstacles: Vec<Vec<IncomingObstacle>> = lambdas
                .iter()
                .map(|&l| {
                    vec![IncomingObstacle {
                        kind: ObstacleKind::Pedestrian,
                        intensity: l,
                        speed: 0.3,
                        mass: 80.0,
                        arrival: 0.0,
                        departure: 3.0,
                        axis: None,
                    }]
                })
                .collect();
            let risk_fn =
                |_a: f64, ob: &IncomingObstacle| kinetic_energy_risk(0.5, 150.0, ob);
            let coarse = path_risk_expectation(&path, &obstacles, risk_fn).expected_risk;
            for factor in [2usize, 3] {
                let fine_path = path.refine(&coarse_frame, factor).unwrap();
                let fine_obstacles: Vec<Vec<IncomingObstacle>> = (0..fine_path.steps.len())
                    .map(|i| obstacles[i / (factor * factor)].clone())
                    .collect();
                let fine = path_risk_expectation(&fine_path, &fine_obstacles, risk_fn)
                    .expected_risk;
                assert!(
                    (coarse - fine).abs() < 1e-6,
                    "refinement {factor} drifted {coarse} vs {fine}"
                );
            }
        }
    }
}
