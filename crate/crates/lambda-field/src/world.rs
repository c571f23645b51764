//! Deterministic 2D world: convex static polygons, scripted agents, a
//! unicycle robot, and exact ground truth for evaluation.

use crate::geometry::{point_in_polygon, ray_circle, ray_polygon, wrap_angle, Vec2};
use crate::gjk::convex_intersects;
use crate::grid::GridFrame;
use crate::particles::{ObstacleKind, PEDESTRIAN_DIAMETER};
use crate::planner::RobotProfile;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub position: Vec2,
    pub heading: f64,
}

/// Velocity command (v, w) produced by the planner.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Command {
    pub linear: f64,
    pub angular: f64,
}

/// One waypoint of an agent script, reached at the given speed.
#[derive(Clone, Copy, Debug)]
pub struct ScriptLeg {
    pub target: Vec2,
    pub speed: f64,
}

/// Scripted dynamic agent (ground truth). Pedestrians are discs, cars are
/// oriented rectangles; the script is followed exactly.
#[derive(Clone, Debug)]
pub struct Agent {
    pub kind: ObstacleKind,
    pub position: Vec2,
    pub heading: f64,
    pub legs: Vec<ScriptLeg>,
    pub current_leg: usize,
}

impl Agent {
    pub fn new(kind: ObstacleKind, position: Vec2, legs: Vec<ScriptLeg>) -> Self {
        debug_assert_ne!(kind, ObstacleKind::StaticCell, "agents are dynamic");
        let heading = legs
            .first()
            .map(|l| (l.target - position).angle())
            .unwrap_or(0.0);
        Agent { kind, position, heading, legs, current_leg: 0 }
    }

    pub fn stationary(kind: ObstacleKind, position: Vec2) -> Self {
        Agent::new(kind, position, Vec::new())
    }

    /// Instantaneous scripted velocity.
    pub fn velocity(&self) -> Vec2 {
        match self.legs.get(self.current_leg) {
            None => Vec2::ZERO,
            Some(leg) => {
                let to = leg.target - self.position;
                let d = to.length();
                if d < 1e-9 || leg.speed <= 0.0 {
                    Vec2::ZERO
                } else {
                    to * (leg.speed / d)
                }
            }
        }
    }

    pub fn footprint(&self) -> Vec<Vec2> {
        // The agent footprint matches the corresponding particle class;
        // the cell-size argument only matters for static particles.
        self.kind.footprint_polygon(self.position, self.heading, 0.0)
    }

    fn advance(&mut self, dt: f64) {
        let mut remaining = dt;
        while remaining > 1e-12 {
            let Some(leg) = self.legs.get(self.current_leg).copied() else {
                break;
            };
            if leg.speed <= 0.0 {
                // Zero-speed leg parks the agent.
                break;
            }
            let to = leg.target - self.position;
            let dist = to.length();
            if dist < 1e-9 {
                self.current_leg += 1;
                continue;
            }
            let dir = to * (1.0 / dist);
            self.heading = dir.angle();
            let step = leg.speed * remaining;
            if step >= dist {
                self.position = leg.target;
                remaining -= dist / leg.speed;
                self.current_leg += 1;
            } else {
                self.position += dir * step;
                remaining = 0.0;
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RobotState {
    pub pose: Pose,
    pub speed: f64,
    pub command: Command,
}

/// Events reported by one world step.
#[derive(Clone, Debug, Default)]
pub struct StepEvents {
    pub collision: Option<String>,
}

#[derive(Clone, Debug)]
pub struct WorldState {
    pub bounds_min: Vec2,
    pub bounds_max: Vec2,
    /// Convex static polygons.
    pub walls: Vec<Vec<Vec2>>,
    pub agents: Vec<Agent>,
    pub robot: RobotState,
    pub clock: f64,
    pub collided: bool,
}

impl WorldState {
    pub fn open_area(bounds_min: Vec2, bounds_max: Vec2) -> Self {
        WorldState {
            bounds_min,
            bounds_max,
            walls: Vec::new(),
            agents: Vec::new(),
            robot: RobotState {
                pose: Pose { position: Vec2::ZERO, heading: 0.0 },
                speed: 0.0,
                command: Command::default(),
            },
            clock: 0.0,
            collided: false,
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.bounds_min.x
            && p.x <= self.bounds_max.x
            && p.y >= self.bounds_min.y
            && p.y <= self.bounds_max.y
    }

    /// Advance agents along their scripts, the robot under its last
    /// command (unicycle kinematics with bounded acceleration), and the
    /// clock. Contacts are reported, not resolved.
    pub fn step(&mut self, dt: f64, profile: &RobotProfile) -> StepEvents {
        debug_assert!(dt > 0.0);
        for agent in &mut self.agents {
            agent.advance(dt);
        }

        let robot = &mut self.robot;
        let v_target = robot.command.linear.clamp(0.0, profile.max_speed);
        let dv = v_target - robot.speed;
        let rate = if dv >= 0.0 { profile.max_accel } else { profile.max_decel };
        let dv = dv.clamp(-rate * dt, rate * dt);
        robot.speed += dv;
        let w = robot.command.angular.clamp(-profile.max_yaw_rate, profile.max_yaw_rate);

        let pose = &mut robot.pose;
        if w.abs() < 1e-9 {
            pose.position += Vec2::from_angle(pose.heading) * (robot.speed * dt);
        } else {
            let radius = robot.speed / w;
            let theta0 = pose.heading;
            let theta1 = theta0 + w * dt;
            pose.position += Vec2::new(
                radius * (theta1.sin() - theta0.sin()),
                radius * (theta0.cos() - theta1.cos()),
            );
            pose.heading = wrap_angle(theta1);
        }

        self.clock += dt;

        let mut events = StepEvents::default();
        let footprint = self.robot_footprint(profile);
        for wall in &self.walls {
            if convex_intersects(&footprint, wall) {
                self.collided = true;
                events.collision = Some("static".to_string());
            }
        }
        for (i, agent) in self.agents.iter().enumerate() {
            if convex_intersects(&footprint, &agent.footprint()) {
                self.collided = true;
                events.collision = Some(format!("agent {i}"));
            }
        }
        events
    }

    pub fn robot_footprint(&self, profile: &RobotProfile) -> Vec<Vec2> {
        crate::geometry::oriented_rect(
            self.robot.pose.position,
            0.5 * profile.length,
            0.5 * profile.width,
            self.robot.pose.heading,
        )
    }

    /// Range to the nearest static or agent surface along the ray, if any.
    pub fn raycast(&self, origin: Vec2, dir: Vec2) -> Option<f64> {
        let mut best: Option<f64> = None;
        let mut consider = |t: Option<f64>| {
            if let Some(t) = t {
                if t > 1e-9 {
                    best = Some(best.map_or(t, |cur: f64| cur.min(t)));
                }
            }
        };
        for wall in &self.walls {
            consider(ray_polygon(origin, dir, wall));
        }
        for agent in &self.agents {
            match agent.kind {
                ObstacleKind::Pedestrian => consider(ray_circle(
                    origin,
                    dir,
                    agent.position,
                    0.5 * PEDESTRIAN_DIAMETER,
                )),
                _ => consider(ray_polygon(origin, dir, &agent.footprint())),
            }
        }
        best
    }

    /// Ground-truth kinematics of one agent.
    pub fn agent_state(&self, index: usize) -> (Vec2, Vec2) {
        let a = &self.agents[index];
        (a.position, a.velocity())
    }

    /// Ground-truth static occupancy of a frame: cell centers inside any
    /// wall polygon.
    pub fn static_occupancy(&self, frame: &GridFrame) -> Vec<bool> {
        (0..frame.len())
            .map(|cell| {
                let c = frame.center_of(cell);
                self.walls.iter().any(|w| point_in_polygon(c, w))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn profile() -> RobotProfile {
        RobotProfile::default()
    }

    #[test]
    fn clock_only_with_zero_command() {
        let mut w = WorldState::open_area(Vec2::new(-5.0, -5.0), Vec2::new(5.0, 5.0));
        let p0 = w.robot.pose;
        let events = w.step(0.1, &profile());
        assert!(events.collision.is_none());
        assert_eq!(w.robot.pose, p0);
        assert_relative_eq!(w.clock, 0.1);
    }

    #[test]
    fn scripted_agent_constant_speed() {
        let mut w = WorldState::open_area(Vec2::new(-15.0, -15.0), Vec2::new(15.0, 15.0));
        w.agents.push(Agent::new(
            ObstacleKind::Pedestrian,
            Vec2::new(0.0, 0.0),
            vec![ScriptLeg { target: Vec2::new(10.0, 0.0), speed: 1.5 }],
        ));
        let mut last = w.agents[0].position;
        for _ in 0..40 {
            w.step(0.1, &profile());
            let now = w.agents[0].position;
            assert_relative_eq!(now.distance(last), 0.15, epsilon = 1e-9);
            last = now;
        }
        // Speed conserved between waypoints.
        assert_relative_eq!(w.agents[0].velocity().length(), 1.5, epsilon = 1e-9);
    }

    #[test]
    fn agent_crosses_waypoint_midstep() {
        let mut w = WorldState::open_area(Vec2::new(-15.0, -15.0), Vec2::new(15.0, 15.0));
        w.agents.push(Agent::new(
            ObstacleKind::Pedestrian,
            Vec2::ZERO,
            vec![
                ScriptLeg { target: Vec2::new(0.1, 0.0), speed: 1.0 },
                ScriptLeg { target: Vec2::new(0.1, 5.0), speed: 1.0 },
            ],
        ));
        w.step(0.2, &profile());
        // 0.1 m along +x then 0.1 m along +y.
        assert_relative_eq!(w.agents[0].position.x, 0.1, epsilon = 1e-9);
        assert_relative_eq!(w.agents[0].position.y, 0.1, epsilon = 1e-9);
    }

    #[test]
    fn unicycle_matches_closed_form_arc() {
        let prof = RobotProfile { max_accel: 1e6, ..profile() };
        let mut w = WorldState::open_area(Vec2::new(-5.0, -5.0), Vec2::new(5.0, 5.0));
        w.robot.command = Command { linear: 0.5, angular: 0.5 };
        let dt = 1e-3;
        for _ in 0..1000 {
            w.step(dt, &prof);
        }
        // Closed form after 1 s at (v, w) = (0.5, 0.5) from the origin.
        let (v, om, t) = (0.5_f64, 0.5_f64, 1.0_f64);
        let expect = Vec2::new(v / om * (om * t).sin(), v / om * (1.0 - (om * t).cos()));
        assert!((w.robot.pose.position - expect).length() < 1e-6);
        assert_relative_eq!(w.robot.pose.heading, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn acceleration_is_bounded() {
        let prof = RobotProfile { max_accel: 1.0, ..profile() };
        let mut w = WorldState::open_area(Vec2::new(-5.0, -5.0), Vec2::new(5.0, 5.0));
        w.robot.command = Command { linear: 0.5, angular: 0.0 };
        w.step(0.1, &prof);
        assert_relative_eq!(w.robot.speed, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn collision_with_wall_reported() {
        let mut w = WorldState::open_area(Vec2::new(-5.0, -5.0), Vec2::new(5.0, 5.0));
        w.walls.push(vec![
            Vec2::new(0.2, -1.0),
            Vec2::new(1.0, -1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.2, 1.0),
        ]);
        w.robot.command = Command { linear: 2.0, angular: 0.0 };
        let prof = RobotProfile { max_accel: 1e6, max_speed: 2.0, ..profile() };
        let mut hit = false;
        for _ in 0..20 {
            if w.step(0.1, &prof).collision.is_some() {
                hit = true;
                break;
            }
        }
        assert!(hit);
        assert!(w.collided);
    }

    #[test]
    fn occupancy_matches_polygon_rasterization() {
        let mut w = WorldState::open_area(Vec2::new(-5.0, -5.0), Vec2::new(5.0, 5.0));
        w.walls.push(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ]);
        let frame = GridFrame::new(20, 20, 0.5, Vec2::new(-5.0, -5.0)).unwrap();
        let occ = w.static_occupancy(&frame);
        for cell in 0..frame.len() {
            let c = frame.center_of(cell);
            let inside = c.x > 0.0 && c.x < 1.0 && c.y > 0.0 && c.y < 1.0;
            assert_eq!(occ[cell], inside, "cell {cell}");
        }
    }

    #[test]
    fn scripted_pose_is_exact_ground_truth() {
        let mut w = WorldState::open_area(Vec2::new(-15.0, -15.0), Vec2::new(15.0, 15.0));
        w.agents.push(Agent::new(
            ObstacleKind::Car,
            Vec2::new(-3.0, 2.0),
            vec![ScriptLeg { target: Vec2::new(7.0, 2.0), speed: 2.0 }],
        ));
        for _ in 0..15 {
            w.step(0.1, &profile());
        }
        let (pos, vel) = w.agent_state(0);
        assert_relative_eq!(pos.x, -3.0 + 2.0 * 1.5, epsilon = 1e-9);
        assert_relative_eq!(pos.y, 2.0, epsilon = 1e-9);
        assert_relative_eq!(vel.x, 2.0, epsilon = 1e-9);
    }
}
