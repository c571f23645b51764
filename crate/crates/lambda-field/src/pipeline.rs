//! Per-cycle orchestration: evolve, measure, resample, fit, plan, step.
//! The engine owns the static field and the particle population and
//! produces one immutable grid snapshot per cycle; the runner drives it
//! against the simulated world and records metrics.

use std::collections::HashMap;
use std::io::{self, Write};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::exec::{self, ExecMode};
use crate::geometry::Vec2;
use crate::grid::{CellState, GridFrame, LambdaGrid, DYNAMIC_KIND_COUNT};
use crate::particles::{
    self, estimate_intensity, existence_probability, footprint_cells_into, MappingConfig,
    MeasurementEvent, ObstacleKind, Particle, StaticField,
};
use crate::planner::{plan, PlanDecision, PlannerConfig, RobotProfile};
use crate::scenario::Scenario;
use crate::sensor::{cast_scan, classify_cells, LidarScan, ScanClassification, SensorModel};
use crate::velocity::{fit_cell_distribution, CellVelocityDistribution};
use crate::world::{Command, WorldState};

/// Wall-clock duration of each pipeline stage for one cycle, ms.
#[derive(Clone, Copy, Debug, Default)]
pub struct StageTimings {
    pub evolve_ms: f64,
    pub classify_ms: f64,
    pub measure_ms: f64,
    pub resample_ms: f64,
    pub fit_ms: f64,
    pub plan_ms: f64,
    pub step_ms: f64,
}

impl StageTimings {
    pub fn total_ms(&self) -> f64 {
        self.evolve_ms
            + self.classify_ms
            + self.measure_ms
            + self.resample_ms
            + self.fit_ms
            + self.plan_ms
            + self.step_ms
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

struct MeasureCell {
    denominator: f64,
    occupants: usize,
    static_weight: f64,
}

/// The mapping side of the cycle: static field plus dynamic population.
pub struct MappingEngine {
    statics: StaticField,
    population: Vec<Particle>,
    footprints: Vec<Vec<usize>>,
    config: MappingConfig,
    sensor: SensorModel,
    mode: ExecMode,
    cycle_index: u64,
    seed: u64,
    resample_rng: ChaCha8Rng,
    /// lambda * membership * existence per particle, from the last fit.
    particle_weights: Vec<f64>,
    miss_mask: Vec<bool>,
}

impl MappingEngine {
    pub fn new(
        frame: GridFrame,
        lambda_prior: f64,
        config: MappingConfig,
        sensor: SensorModel,
        seed: u64,
        mode: ExecMode,
    ) -> Self {
        let len = frame.len();
        MappingEngine {
            statics: StaticField::new(frame, lambda_prior),
            population: Vec::new(),
            footprints: Vec::new(),
            config,
            sensor,
            mode,
            cycle_index: 0,
            seed,
            resample_rng: ChaCha8Rng::seed_from_u64(seed ^ RESAMPLE_STREAM),
            particle_weights: Vec::new(),
            miss_mask: vec![false; len],
        }
    }

    pub fn frame(&self) -> GridFrame {
        self.statics.frame
    }

    pub fn statics(&self) -> &StaticField {
        &self.statics
    }

    pub fn population(&self) -> &[Particle] {
        &self.population
    }

    pub fn config(&self) -> &MappingConfig {
        &self.config
    }

    /// Scroll the robot-centered frame so `position` falls in the center
    /// cell. Particles live in the world frame and are unaffected.
    pub fn recenter(&mut self, position: Vec2) {
        let frame = self.statics.frame;
        let col = ((position.x - frame.origin.x) / frame.cell_size).floor() as isize;
        let row = ((position.y - frame.origin.y) / frame.cell_size).floor() as isize;
        let dcol = col - (frame.width / 2) as isize;
        let drow = row - (frame.height / 2) as isize;
        if dcol != 0 || drow != 0 {
            self.statics.scroll(dcol, drow);
        }
    }

    /// One mapping cycle against a classified scan: evolve, accumulate
    /// measurements, re-estimate intensities, resample with births, fit
    /// per-cell distributions, and export the snapshot.
    pub fn cycle(&mut self, scan: &LidarScan) -> (LambdaGrid, StageTimings) {
        let mut timings = StageTimings::default();
        let dt = self.config.cycle_dt;
        let frame = self.statics.frame;
        let area = frame.cell_area();
        let tau = self.config.existence_decay_rate;

        // Evolve. Per-particle noise streams are derived from the master
        // seed and the cycle index, so parallel scheduling cannot change
        // the result.
        let t = Instant::now();
        self.statics.age_all(dt);
        let cycle_seed = self.seed ^ (self.cycle_index).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        {
            let statics = &self.statics;
            exec::for_each_mut(self.mode, &mut self.population, |i, p| {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(cycle_seed ^ (i as u64).wrapping_mul(0xd134_2543_de82_ef95));
                particles::evolve(p, statics, dt, &mut rng);
            });
        }
        // Footprints move with the particles.
        let mut footprints = std::mem::take(&mut self.footprints);
        footprints.resize(self.population.len(), Vec::new());
        {
            let population = &self.population;
            exec::for_each_mut(self.mode, &mut footprints, |i, fp| {
                footprint_cells_into(&population[i], &frame, fp);
            });
        }
        self.footprints = footprints;
        timings.evolve_ms = ms_since(t);

        // Classify.
        let t = Instant::now();
        let classification = classify_cells(scan, &frame, &self.sensor);
        timings.classify_ms = ms_since(t);

        // Measure.
        let t = Instant::now();
        self.measure(&classification);
        timings.measure_ms = ms_since(t);

        // Resample.
        let t = Instant::now();
        let outcome = particles::resample_with_footprints(
            &self.population,
            &self.footprints,
            &self.statics,
            &classification.hit_regions,
            &self.config,
            &mut self.resample_rng,
        );
        self.population = outcome.population;
        self.footprints = outcome.footprints;
        timings.resample_ms = ms_since(t);

        // Fit and export.
        let t = Instant::now();
        let snapshot = self.build_snapshot(area, tau);
        timings.fit_ms = ms_since(t);

        self.cycle_index += 1;
        (snapshot, timings)
    }

    fn measure(&mut self, classification: &ScanClassification) {
        let frame = self.statics.frame;
        let area = frame.cell_area();
        let tau = self.config.existence_decay_rate;
        let error_area = self.sensor.error_area;

        // Existences are frozen at their pre-measurement values.
        let existences: Vec<f64> = self
            .population
            .iter()
            .map(|p| existence_probability(p, tau))
            .collect();

        // Occupancy of dynamic particles, in ascending particle order.
        let mut occupancy: HashMap<usize, Vec<u32>> = HashMap::new();
        for (i, cells) in self.footprints.iter().enumerate() {
            for &c in cells {
                occupancy.entry(c).or_default().push(i as u32);
            }
        }

        let mut hit_mult: HashMap<usize, u32> = HashMap::new();
        for region in &classification.hit_regions {
            for &c in &region.cells {
                *hit_mult.entry(c).or_insert(0) += 1;
            }
        }
        for &c in &classification.miss_cells {
            self.miss_mask[c] = true;
        }

        // Per-cell membership denominators over every measured cell. In a
        // hit cell a low-intensity static particle is treated as matching
        // the highest co-located intensity for this update only.
        let mut measures: HashMap<usize, MeasureCell> = HashMap::new();
        let mut measured_cells: Vec<usize> = Vec::with_capacity(
            hit_mult.len() + classification.miss_cells.len(),
        );
        measured_cells.extend(classification.hit_regions.iter().flat_map(|r| r.cells.iter()));
        measured_cells.extend(classification.miss_cells.iter());
        for &cell in &measured_cells {
            if measures.contains_key(&cell) {
                continue;
            }
            let members = occupancy.get(&cell);
            let lambda_static = self.statics.intensity(cell);
            let is_hit = hit_mult.contains_key(&cell);
            let (denominator, occupants, static_weight) = match members {
                None => {
                    let w = (lambda_static * area).exp_m1();
                    (w, 1, w)
                }
                Some(ids) => {
                    let mut lam_s_eff = lambda_static;
                    if is_hit {
                        for &i in ids {
                            lam_s_eff = lam_s_eff.max(self.population[i as usize].intensity);
                        }
                    }
                    let static_weight = (lam_s_eff * area).exp_m1();
                    let mut denom = static_weight;
                    for &i in ids {
                        denom += (self.population[i as usize].intensity * area).exp_m1();
                    }
                    (denom, ids.len() + 1, static_weight)
                }
            };
            measures.insert(cell, MeasureCell { denominator, occupants, static_weight });
        }

        // Dynamic accumulation: each particle owns its accumulators, so
        // the loop is parallel and order-independent.
        {
            let footprints = &self.footprints;
            let miss_mask = &self.miss_mask;
            let measures_ref = &measures;
            let hit_mult_ref = &hit_mult;
            let existences_ref = &existences;
            exec::for_each_mut(self.mode, &mut self.population, |i, p| {
                let mut touched = false;
                for &cell in &footprints[i] {
                    let is_miss = miss_mask[cell];
                    let mult = hit_mult_ref.get(&cell).copied().unwrap_or(0);
                    if mult == 0 && !is_miss {
                        continue;
                    }
                    let m = &measures_ref[&cell];
                    let membership = if m.denominator > 0.0 {
                        (p.intensity * area).exp_m1() / m.denominator
                    } else {
                        1.0 / m.occupants as f64
                    };
                    if mult > 0 {
                        particles::accumulate_measurement(
                            p,
                            MeasurementEvent::Hit,
                            (mult as f64 * membership).min(1.0),
                            existences_ref[i],
                        );
                        touched = true;
                    }
                    if is_miss {
                        particles::accumulate_measurement(
                            p,
                            MeasurementEvent::Miss,
                            membership.min(1.0),
                            existences_ref[i],
                        );
                        touched = true;
                    }
                }
                if touched {
                    p.intensity = estimate_intensity(p.hit_sum, p.miss_sum, error_area)
                        .expect("sensor error area validated");
                }
            });
        }

        // Static accumulation, sequential in measured-cell order.
        for &cell in &measured_cells {
            let m = &measures[&cell];
            let membership = if m.denominator > 0.0 {
                m.static_weight / m.denominator
            } else {
                1.0 / m.occupants as f64
            };
            let existence = self.statics.existence(cell, tau);
            if let Some(&mult) = hit_mult.get(&cell) {
                self.statics.accumulate(
                    cell,
                    MeasurementEvent::Hit,
                    (mult as f64 * membership).min(1.0) * existence,
                    error_area,
                );
            }
            if self.miss_mask[cell] {
                self.statics.accumulate(
                    cell,
                    MeasurementEvent::Miss,
                    membership.min(1.0) * existence,
                    error_area,
                );
            }
        }

        for &c in &classification.miss_cells {
            self.miss_mask[c] = false;
        }
    }

    fn build_snapshot(&mut self, area: f64, tau: f64) -> LambdaGrid {
        let frame = self.statics.frame;
        // Occupancy and per-cell denominators for the post-resample
        // population.
        let mut occupancy: HashMap<usize, Vec<u32>> = HashMap::new();
        for (i, cells) in self.footprints.iter().enumerate() {
            for &c in cells {
                occupancy.entry(c).or_default().push(i as u32);
            }
        }
        let existences: Vec<f64> = self
            .population
            .iter()
            .map(|p| existence_probability(p, tau))
            .collect();
        let denominators: HashMap<usize, (f64, usize)> = occupancy
            .iter()
            .map(|(&cell, ids)| {
                let mut denom = (self.statics.intensity(cell) * area).exp_m1();
                for &i in ids {
                    denom += (self.population[i as usize].intensity * area).exp_m1();
                }
                (cell, (denom, ids.len() + 1))
            })
            .collect();

        let statics = &self.statics;
        let population = &self.population;
        let occupancy_ref = &occupancy;
        let denominators_ref = &denominators;
        let existences_ref = &existences;
        let cells: Vec<CellState> = exec::map_indexed(self.mode, frame.len(), |cell| {
            let lambda_static = statics.intensity(cell);
            let static_existence = statics.existence(cell, tau);
            match occupancy_ref.get(&cell) {
                None => CellState {
                    // Alone in the cell the static particle has
                    // membership one.
                    lambda_static: lambda_static * static_existence,
                    lambda_by_kind: [0.0; DYNAMIC_KIND_COUNT],
                    velocity: None,
                },
                Some(ids) => {
                    let (denom, occupants) = denominators_ref[&cell];
                    let memb = |lambda: f64| {
                        if denom > 0.0 {
                            (lambda * area).exp_m1() / denom
                        } else {
                            1.0 / occupants as f64
                        }
                    };
                    let mut lambda_by_kind = [0.0; DYNAMIC_KIND_COUNT];
                    let mut samples: Vec<(Vec2, f64)> = Vec::with_capacity(ids.len());
                    for &i in ids {
                        let p = &population[i as usize];
                        let weight = p.intensity * memb(p.intensity) * existences_ref[i as usize];
                        if let Some(k) = p.kind.dynamic_index() {
                            lambda_by_kind[k] += weight;
                            if weight > 0.0 {
                                samples.push((p.velocity, weight));
                            }
                        }
                    }
                    CellState {
                        lambda_static: lambda_static * memb(lambda_static) * static_existence,
                        lambda_by_kind,
                        velocity: fit_cell_distribution(&samples),
                    }
                }
            }
        });

        // Pooled particle weights for the population-level estimate.
        self.particle_weights = exec::map_indexed(self.mode, population.len(), |i| {
            let p = &population[i];
            if p.kind == ObstacleKind::StaticCell {
                return 0.0;
            }
            let Some(anchor) = frame.cell_at(p.position) else {
                return 0.0;
            };
            let Some(&(denom, occupants)) = denominators_ref.get(&anchor) else {
                return 0.0;
            };
            let membership = if denom > 0.0 {
                (p.intensity * area).exp_m1() / denom
            } else {
                1.0 / occupants as f64
            };
            p.intensity * membership * existences_ref[i]
        });

        LambdaGrid { frame, cells }
    }

    /// Velocity estimate pooled over the whole dynamic population,
    /// weighted like the per-cell fits. `None` until any dynamic mass
    /// exists.
    pub fn population_velocity_estimate(&self) -> Option<CellVelocityDistribution> {
        let samples: Vec<(Vec2, f64)> = self
            .population
            .iter()
            .zip(&self.particle_weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(p, &w)| (p.velocity, w))
            .collect();
        fit_cell_distribution(&samples)
    }

    /// Debug dump: kind, position, velocity, intensity, accumulators and
    /// existence, one line per particle.
    pub fn write_population_dump<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "# kind x y vx vy lambda hit_sum miss_sum existence")?;
        let tau = self.config.existence_decay_rate;
        for p in &self.population {
            let kind = match p.kind {
                ObstacleKind::StaticCell => "static",
                ObstacleKind::Pedestrian => "pedestrian",
                ObstacleKind::Car => "car",
            };
            writeln!(
                w,
                "{} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6}",
                kind,
                p.position.x,
                p.position.y,
                p.velocity.x,
                p.velocity.y,
                p.intensity,
                p.hit_sum,
                p.miss_sum,
                existence_probability(p, tau)
            )?;
        }
        Ok(())
    }

    /// Polar distribution data per occupied cell: heading-binned weight
    /// and mean speed of the dynamic particles in the cell.
    pub fn polar_distributions(&self, bins: usize) -> Vec<(usize, f64, f64, f64)> {
        let frame = self.statics.frame;
        let mut per_cell: HashMap<usize, Vec<(f64, f64, f64)>> = HashMap::new();
        for (p, &w) in self.population.iter().zip(&self.particle_weights) {
            if w <= 0.0 || p.kind == ObstacleKind::StaticCell {
                continue;
            }
            if let Some(cell) = frame.cell_at(p.position) {
                per_cell.entry(cell).or_default().push((p.heading(), p.velocity.length(), w));
            }
        }
        let mut cells: Vec<usize> = per_cell.keys().copied().collect();
        cells.sort_unstable();
        let mut out = Vec::new();
        for cell in cells {
            let entries = &per_cell[&cell];
            for b in 0..bins {
                let lo = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * b as f64 / bins as f64;
                let hi = lo + 2.0 * std::f64::consts::PI / bins as f64;
                let center = 0.5 * (lo + hi);
                let mut weight = 0.0;
                let mut speed = 0.0;
                for &(heading, s, w) in entries {
                    if heading >= lo && heading < hi {
                        weight += w;
                        speed += w * s;
                    }
                }
                if weight > 0.0 {
                    out.push((cell, center, weight, speed / weight));
                }
            }
        }
        out
    }
}

/// Separates the resampling stream from the per-cycle evolution streams.
const RESAMPLE_STREAM: u64 = 0x7265_7361_6d70_6c65;

// ---------------------------------------------------------------------------
// Runner.

/// Per-cycle metric record. Deterministic for a fixed seed and scenario;
/// wall-clock timings are reported separately.
#[derive(Clone, Debug)]
pub struct CycleRecord {
    pub time: f64,
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
    pub command: Command,
    pub risk: f64,
    pub collision_probability: f64,
    pub kind_probability: [f64; DYNAMIC_KIND_COUNT],
    pub estimate: Option<CellVelocityDistribution>,
    pub collided: bool,
    pub goal_reached: bool,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub records: Vec<CycleRecord>,
    pub timings: Vec<StageTimings>,
    pub collided: bool,
    pub goal_reached: bool,
    pub goal_time: Option<f64>,
}

pub struct Runner {
    pub world: WorldState,
    pub engine: MappingEngine,
    pub planner_config: PlannerConfig,
    pub profile: RobotProfile,
    pub sensor: SensorModel,
    mode: ExecMode,
    goal_reached: bool,
}

impl Runner {
    pub fn new(scenario: &Scenario, mode: ExecMode) -> Self {
        let frame = GridFrame::centered(
            scenario.grid_cells,
            scenario.cell_size,
            scenario.world.robot.pose.position,
        )
        .expect("scenario validated");
        let engine = MappingEngine::new(
            frame,
            scenario.lambda_prior,
            scenario.mapping,
            scenario.sensor,
            scenario.seed,
            mode,
        );
        Runner {
            world: scenario.world.clone(),
            engine,
            planner_config: scenario.planner,
            profile: scenario.profile,
            sensor: scenario.sensor,
            mode,
            goal_reached: false,
        }
    }

    /// One full cycle: sense, map, plan, act. Returns the record, the
    /// snapshot and the timings.
    pub fn step_cycle(&mut self) -> (CycleRecord, LambdaGrid, StageTimings) {
        let dt = self.engine.config().cycle_dt;
        self.engine.recenter(self.world.robot.pose.position);
        let scan = cast_scan(&self.world, self.world.robot.pose, &self.sensor);
        let (snapshot, mut timings) = self.engine.cycle(&scan);

        let t = Instant::now();
        let decision: PlanDecision;
        if self.goal_reached {
            decision = PlanDecision {
                command: Command::default(),
                report: crate::planner::RiskReport {
                    expected_risk: 0.0,
                    collision_probability: 0.0,
                    per_cell: Vec::new(),
                    feasible: true,
                },
                candidates: Vec::new(),
            };
        } else {
            decision = plan(
                &snapshot,
                self.world.robot.pose,
                &self.profile,
                &self.planner_config,
                self.mode,
            );
        }
        timings.plan_ms = ms_since(t);

        let t = Instant::now();
        self.world.robot.command = decision.command;
        let events = self.world.step(dt, &self.profile);
        timings.step_ms = ms_since(t);

        if self.world.robot.pose.position.distance(self.planner_config.goal)
            <= self.planner_config.goal_tolerance
        {
            self.goal_reached = true;
        }

        let dynamic_totals = snapshot.cells.iter().fold([0.0; DYNAMIC_KIND_COUNT], |mut acc, c| {
            for (k, &l) in c.lambda_by_kind.iter().enumerate() {
                acc[k] += l;
            }
            acc
        });
        let total: f64 = dynamic_totals.iter().sum();
        let kind_probability = if total > 0.0 {
            [dynamic_totals[0] / total, dynamic_totals[1] / total]
        } else {
            [0.0; DYNAMIC_KIND_COUNT]
        };

        let record = CycleRecord {
            time: self.world.clock,
            position: self.world.robot.pose.position,
            heading: self.world.robot.pose.heading,
            speed: self.world.robot.speed,
            command: decision.command,
            risk: decision.report.expected_risk,
            collision_probability: decision.report.collision_probability,
            kind_probability,
            estimate: self.engine.population_velocity_estimate(),
            collided: events.collision.is_some(),
            goal_reached: self.goal_reached,
        };
        (record, snapshot, timings)
    }

    /// Run the whole scenario. Stops early on contact (collisions end the
    /// run) or once the goal is reached and the robot has stopped.
    pub fn run(&mut self, duration: f64) -> RunResult {
        self.run_with(duration, |_, _, _| {})
    }

    pub fn run_with<F>(&mut self, duration: f64, mut on_cycle: F) -> RunResult
    where
        F: FnMut(usize, &CycleRecord, &LambdaGrid),
    {
        let dt = self.engine.config().cycle_dt;
        let cycles = (duration / dt).round() as usize;
        let mut records = Vec::with_capacity(cycles);
        let mut timings = Vec::with_capacity(cycles);
        let mut collided = false;
        let mut goal_time = None;
        for cycle in 0..cycles {
            let (record, snapshot, timing) = self.step_cycle();
            on_cycle(cycle, &record, &snapshot);
            let hit = record.collided;
            if record.goal_reached && goal_time.is_none() {
                goal_time = Some(record.time);
            }
            records.push(record);
            timings.push(timing);
            if hit {
                collided = true;
                break;
            }
            if goal_time.is_some() {
                break;
            }
        }
        RunResult {
            records,
            timings,
            collided,
            goal_reached: goal_time.is_some(),
            goal_time,
        }
    }
}

/// Deterministic metrics writer: one line per cycle, stable formatting.
pub fn write_metrics<W: Write>(w: &mut W, records: &[CycleRecord]) -> io::Result<()> {
    writeln!(
        w,
        "time,x,y,heading,speed,cmd_v,cmd_w,risk,coll_prob,p_pedestrian,p_car,\
         est_speed,est_speed_sigma,est_heading,est_kappa,collided,goal_reached"
    )?;
    for r in records {
        let (es, ess, eh, ek) = match &r.estimate {
            Some(d) => (d.mean_speed, d.speed_std, d.mean_heading, d.concentration),
            None => (0.0, 0.0, 0.0, 0.0),
        };
        writeln!(
            w,
            "{:.3},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9e},{:.9e},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}",
            r.time,
            r.position.x,
            r.position.y,
            r.heading,
            r.speed,
            r.command.linear,
            r.command.angular,
            r.risk,
            r.collision_probability,
            r.kind_probability[0],
            r.kind_probability[1],
            es,
            ess,
            eh,
            ek,
            u8::from(r.collided),
            u8::from(r.goal_reached),
        )?;
    }
    Ok(())
}

pub fn write_timings<W: Write>(w: &mut W, timings: &[StageTimings]) -> io::Result<()> {
    writeln!(w, "cycle,evolve_ms,classify_ms,measure_ms,resample_ms,fit_ms,plan_ms,step_ms,total_ms")?;
    for (i, t) in timings.iter().enumerate() {
        writeln!(
            w,
            "{},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3}",
            i,
            t.evolve_ms,
            t.classify_ms,
            t.measure_ms,
            t.resample_ms,
            t.fit_ms,
            t.plan_ms,
            t.step_ms,
            t.total_ms()
        )?;
    }
    Ok(())
}

/// Synthetic single-cycle benchmark: a wall plus two scripted agents, a
/// populated engine at the requested size, timed over `cycles` cycles.
/// Returns per-stage medians in ms.
pub fn bench_cycle(
    population_size: usize,
    grid_cells: usize,
    cycles: usize,
    mode: ExecMode,
) -> (StageTimings, Vec<StageTimings>) {
    let mut world = WorldState::open_area(Vec2::new(-20.0, -20.0), Vec2::new(20.0, 20.0));
    world.walls.push(vec![
        Vec2::new(2.0, -8.0),
        Vec2::new(2.4, -8.0),
        Vec2::new(2.4, 8.0),
        Vec2::new(2.0, 8.0),
    ]);
    world.agents.push(crate::world::Agent::new(
        ObstacleKind::Pedestrian,
        Vec2::new(-4.0, 3.0),
        vec![crate::world::ScriptLeg { target: Vec2::new(4.0, 3.0), speed: 1.2 }],
    ));
    world.agents.push(crate::world::Agent::new(
        ObstacleKind::Car,
        Vec2::new(-6.0, -3.0),
        vec![crate::world::ScriptLeg { target: Vec2::new(6.0, -3.0), speed: 1.5 }],
    ));
    let frame = GridFrame::centered(grid_cells, 0.15, Vec2::ZERO).unwrap();
    let config = MappingConfig { population_size, ..Default::default() };
    let sensor = SensorModel::default();
    let mut engine = MappingEngine::new(frame, 0.0, config, sensor, 7, mode);
    let profile = RobotProfile::default();

    let mut all = Vec::with_capacity(cycles);
    for _ in 0..cycles {
        let scan = cast_scan(&world, world.robot.pose, &sensor);
        let (_, timings) = engine.cycle(&scan);
        world.step(0.1, &profile);
        all.push(timings);
    }
    let median = |pick: fn(&StageTimings) -> f64| -> f64 {
        let mut xs: Vec<f64> = all.iter().map(pick).collect();
        xs.sort_by(f64::total_cmp);
        xs[xs.len() / 2]
    };
    let medians = StageTimings {
        evolve_ms: median(|t| t.evolve_ms),
        classify_ms: median(|t| t.classify_ms),
        measure_ms: median(|t| t.measure_ms),
        resample_ms: median(|t| t.resample_ms),
        fit_ms: median(|t| t.fit_ms),
        plan_ms: 0.0,
        step_ms: 0.0,
    };
    (medians, all)
}
