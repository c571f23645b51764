//! Particle population over the intensity grid: the static field as one
//! immobile particle per cell, dynamic obstacle hypotheses with class,
//! footprint and velocity, and the evolve / measure / resample cycle.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{FieldError, Result};
use crate::geometry::{circle_polygon, oriented_rect, overlap_area_with_rect, Vec2};
use crate::grid::{GridFrame, LAMBDA_MAX};
use crate::sensor::HitRegion;

pub const PEDESTRIAN_DIAMETER: f64 = 0.40;
pub const CAR_LENGTH: f64 = 2.0;
pub const CAR_WIDTH: f64 = 1.0;
pub const PEDESTRIAN_MASS: f64 = 80.0;
pub const CAR_MASS: f64 = 500.0;

const CIRCLE_SIDES: usize = 16;

/// Obstacle class. Footprints are physical and do not depend on the
/// tessellation size; the static class has zero speed and acceleration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ObstacleKind {
    StaticCell,
    Pedestrian,
    Car,
}

impl ObstacleKind {
    pub const DYNAMIC: [ObstacleKind; 2] = [ObstacleKind::Pedestrian, ObstacleKind::Car];

    pub fn dynamic_index(self) -> Option<usize> {
        match self {
            ObstacleKind::StaticCell => None,
            ObstacleKind::Pedestrian => Some(0),
            ObstacleKind::Car => Some(1),
        }
    }

    pub fn from_dynamic_index(i: usize) -> ObstacleKind {
        ObstacleKind::DYNAMIC[i]
    }

    /// Mass used by the kinetic risk function. The static environment is
    /// the infinite-mass limit.
    pub fn mass(self) -> f64 {
        match self {
            ObstacleKind::StaticCell => f64::INFINITY,
            ObstacleKind::Pedestrian => PEDESTRIAN_MASS,
            ObstacleKind::Car => CAR_MASS,
        }
    }

    pub fn max_speed(self) -> f64 {
        match self {
            ObstacleKind::StaticCell => 0.0,
            ObstacleKind::Pedestrian => 3.0,
            ObstacleKind::Car => 15.0,
        }
    }

    /// Per-axis standard deviation of the random acceleration.
    /// Pedestrians change direction quicker; cars are faster but steadier.
    pub fn accel_std(self) -> f64 {
        match self {
            ObstacleKind::StaticCell => 0.0,
            ObstacleKind::Pedestrian => 1.0,
            ObstacleKind::Car => 0.5,
        }
    }

    /// Radius of the circumscribed circle of the footprint.
    pub fn bounding_radius(self, cell_size: f64) -> f64 {
        match self {
            ObstacleKind::StaticCell => cell_size * std::f64::consts::FRAC_1_SQRT_2,
            ObstacleKind::Pedestrian => 0.5 * PEDESTRIAN_DIAMETER,
            ObstacleKind::Car => 0.5 * (CAR_LENGTH * CAR_LENGTH + CAR_WIDTH * CAR_WIDTH).sqrt(),
        }
    }

    /// Footprint polygon at the given center. Cars align their long axis
    /// with `heading`; the static footprint is its own cell square.
    pub fn footprint_polygon(self, center: Vec2, heading: f64, cell_size: f64) -> Vec<Vec2> {
        match self {
            ObstacleKind::StaticCell => {
                let h = 0.5 * cell_size;
                vec![
                    center + Vec2::new(-h, -h),
                    center + Vec2::new(h, -h),
                    center + Vec2::new(h, h),
                    center + Vec2::new(-h, h),
                ]
            }
            ObstacleKind::Pedestrian => {
                circle_polygon(center, 0.5 * PEDESTRIAN_DIAMETER, CIRCLE_SIDES)
            }
            ObstacleKind::Car => oriented_rect(center, 0.5 * CAR_LENGTH, 0.5 * CAR_WIDTH, heading),
        }
    }
}

/// One obstacle hypothesis.
#[derive(Clone, Debug, PartialEq)]
pub struct Particle {
    pub kind: ObstacleKind,
    pub position: Vec2,
    pub velocity: Vec2,
    /// Estimated intensity, 1/m^2, in [0, LAMBDA_MAX].
    pub intensity: f64,
    pub hit_sum: f64,
    pub miss_sum: f64,
    /// Accumulated sum(da * lambda_static) over cells this particle has
    /// crossed since birth (dimensionless exposure).
    pub static_exposure: f64,
    /// Seconds since the last measurement hit.
    pub last_hit_age: f64,
}

impl Particle {
    pub fn new(kind: ObstacleKind, position: Vec2, velocity: Vec2) -> Self {
        Particle {
            kind,
            position,
            velocity,
            intensity: 0.0,
            hit_sum: 0.0,
            miss_sum: 0.0,
            static_exposure: 0.0,
            last_hit_age: 0.0,
        }
    }

    pub fn heading(&self) -> f64 {
        if self.velocity.length_squared() > 1e-18 {
            self.velocity.angle()
        } else {
            0.0
        }
    }

    pub fn footprint(&self, cell_size: f64) -> Vec<Vec2> {
        self.kind.footprint_polygon(self.position, self.heading(), cell_size)
    }
}

/// Filter parameters. The paper-level quantities are the existence decay
/// rate tau, the birth gain gamma and the cycle period; the rest are the
/// resampling knobs.
#[derive(Clone, Copy, Debug)]
pub struct MappingConfig {
    /// Existence decay rate, 1/s.
    pub existence_decay_rate: f64,
    /// Proportionality constant of birth weights.
    pub birth_gain: f64,
    /// Mapping cycle period, s.
    pub cycle_dt: f64,
    pub population_size: usize,
    /// Std of the Gaussian velocity perturbation applied at resampling, m/s.
    pub resample_speed_noise: f64,
    /// Probability that a resampled dynamic particle swaps class.
    pub kind_switch_probability: f64,
}

impl Default for MappingConfig {
    fn default() -> Self {
        MappingConfig {
            existence_decay_rate: 0.5,
            birth_gain: 1.0,
            cycle_dt: 0.1,
            population_size: 5000,
            resample_speed_noise: 0.3,
            kind_switch_probability: 0.01,
        }
    }
}

impl MappingConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.existence_decay_rate >= 0.0
            && self.birth_gain >= 0.0
            && self.cycle_dt > 0.0
            && self.resample_speed_noise >= 0.0
            && (0.0..1.0).contains(&self.kind_switch_probability);
        if ok {
            Ok(())
        } else {
            Err(FieldError::InvalidGrid)
        }
    }
}

// ---------------------------------------------------------------------------
// Static field: one immobile cell-sized particle per grid cell.

#[derive(Clone, Copy, Debug, Default)]
pub struct StaticCellRecord {
    pub hit_sum: f64,
    pub miss_sum: f64,
    pub intensity: f64,
    pub last_hit_age: f64,
}

/// The static part of the field, stored densely per cell. Scrolled when
/// the robot-centered frame moves; cells scrolled in start at the prior
/// intensity with empty accumulators.
#[derive(Clone, Debug)]
pub struct StaticField {
    pub frame: GridFrame,
    cells: Vec<StaticCellRecord>,
    lambda_prior: f64,
}

impl StaticField {
    pub fn new(frame: GridFrame, lambda_prior: f64) -> Self {
        let fresh = StaticCellRecord { intensity: lambda_prior, ..Default::default() };
        StaticField { frame, cells: vec![fresh; frame.len()], lambda_prior }
    }

    pub fn record(&self, cell: usize) -> &StaticCellRecord {
        &self.cells[cell]
    }

    pub fn intensity(&self, cell: usize) -> f64 {
        self.cells[cell].intensity
    }

    pub fn existence(&self, cell: usize, tau: f64) -> f64 {
        (-tau * self.cells[cell].last_hit_age).exp()
    }

    pub fn age_all(&mut self, dt: f64) {
        for c in &mut self.cells {
            c.last_hit_age += dt;
        }
    }

    /// Accumulate a measurement on the cell's static particle and refresh
    /// its intensity estimate.
    pub fn accumulate(&mut self, cell: usize, event: MeasurementEvent, amount: f64, error_area: f64) {
        if amount <= 0.0 {
            return;
        }
        let rec = &mut self.cells[cell];
        match event {
            MeasurementEvent::Hit => {
                rec.hit_sum += amount;
                rec.last_hit_age = 0.0;
            }
            MeasurementEvent::Miss => rec.miss_sum += amount,
        }
        rec.intensity = estimate_intensity(rec.hit_sum, rec.miss_sum, error_area)
            .expect("error area validated at construction");
    }

    /// Shift the frame by whole cells; contents move opposite to the frame.
    /// Exposed cells are reset to the prior.
    pub fn scroll(&mut self, dcol: isize, drow: isize) {
        if dcol == 0 && drow == 0 {
            return;
        }
        let fresh = StaticCellRecord { intensity: self.lambda_prior, ..Default::default() };
        let (w, h) = (self.frame.width as isize, self.frame.height as isize);
        let mut next = vec![fresh; self.cells.len()];
        for row in 0..h {
            let src_row = row + drow;
            if src_row < 0 || src_row >= h {
                continue;
            }
            for col in 0..w {
                let src_col = col + dcol;
                if src_col < 0 || src_col >= w {
                    continue;
                }
                next[(row * w + col) as usize] = self.cells[(src_row * w + src_col) as usize];
            }
        }
        self.cells = next;
        self.frame.origin += Vec2::new(
            dcol as f64 * self.frame.cell_size,
            drow as f64 * self.frame.cell_size,
        );
    }
}

// ---------------------------------------------------------------------------
// Per-operation math.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeasurementEvent {
    Hit,
    Miss,
}

/// Advance one particle by dt: v += a*dt with a ~ N(0, sigma^2 I), speed
/// clamped to the class profile, x += v*dt, exposure accumulated over
/// newly crossed cells, hit age incremented. Static particles only age.
pub fn evolve<R: Rng + ?Sized>(
    particle: &mut Particle,
    statics: &StaticField,
    dt: f64,
    rng: &mut R,
) {
    debug_assert!(dt > 0.0);
    if particle.kind != ObstacleKind::StaticCell {
        let sigma = particle.kind.accel_std();
        let ax: f64 = StandardNormal.sample(rng);
        let ay: f64 = StandardNormal.sample(rng);
        particle.velocity += Vec2::new(ax, ay) * (sigma * dt);
        clamp_speed(particle);

        let old = particle.position;
        particle.position += particle.velocity * dt;

        let from_cell = statics.frame.cell_at(old);
        let area = statics.frame.cell_area();
        for cell in statics.frame.supercover(old, particle.position) {
            if Some(cell) == from_cell {
                continue;
            }
            particle.static_exposure += area * statics.intensity(cell);
        }
    }
    particle.last_hit_age += dt;
}

fn clamp_speed(particle: &mut Particle) {
    let max = particle.kind.max_speed();
    let speed = particle.velocity.length();
    if speed > max {
        particle.velocity = if max > 0.0 {
            particle.velocity * (max / speed)
        } else {
            Vec2::ZERO
        };
    }
}

/// Membership weights exp(lambda * da) - 1 for the exactly-one-obstacle
/// conditioning, normalized to sum one. All-zero intensities degenerate to
/// the uniform distribution.
pub(crate) fn membership_from_lambda_areas(lambda_areas: &[f64]) -> Vec<f64> {
    let weights: Vec<f64> = lambda_areas.iter().map(|&la| la.exp_m1()).collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        let n = weights.len().max(1);
        return vec![1.0 / n as f64; weights.len()];
    }
    weights.into_iter().map(|w| w / total).collect()
}

/// Probability that each listed particle is the one obstacle occupying the
/// cell, given that exactly one of them is.
pub fn membership_probabilities(particles_in_cell: &[Particle], cell_area: f64) -> Vec<f64> {
    let lambda_areas: Vec<f64> =
        particles_in_cell.iter().map(|p| p.intensity * cell_area).collect();
    membership_from_lambda_areas(&lambda_areas)
}

/// Probability that the particle still tracks a real obstacle: it has not
/// crossed static intensity and was recently re-observed.
pub fn existence_probability(particle: &Particle, tau: f64) -> f64 {
    (-particle.static_exposure - tau * particle.last_hit_age).exp()
}

/// Add one hit or miss observation weighted by membership * existence.
/// A hit with positive weight re-anchors the particle in time.
pub fn accumulate_measurement(
    particle: &mut Particle,
    event: MeasurementEvent,
    membership: f64,
    existence: f64,
) {
    debug_assert!((0.0..=1.0).contains(&membership));
    debug_assert!((0.0..=1.0).contains(&existence));
    let amount = membership * existence;
    if amount <= 0.0 {
        return;
    }
    match event {
        MeasurementEvent::Hit => {
            particle.hit_sum += amount;
            particle.last_hit_age = 0.0;
        }
        MeasurementEvent::Miss => particle.miss_sum += amount,
    }
}

/// Maximum-expectation intensity from the hit/miss accumulators over an
/// error region of area `e`: (1/e) ln(1 + h/m), clamped to [0, LAMBDA_MAX].
pub fn estimate_intensity(hit_sum: f64, miss_sum: f64, error_area: f64) -> Result<f64> {
    if !(error_area > 0.0) {
        return Err(FieldError::InvalidErrorArea(error_area));
    }
    if hit_sum < 0.0 || miss_sum < 0.0 {
        return Err(FieldError::NegativeIntensity(hit_sum.min(miss_sum)));
    }
    if hit_sum == 0.0 {
        return Ok(0.0);
    }
    if miss_sum == 0.0 {
        return Ok(LAMBDA_MAX);
    }
    Ok(((1.0 + hit_sum / miss_sum).ln() / error_area).min(LAMBDA_MAX))
}

/// Expected intensity of a cell whose occupants are given with their
/// membership and existence probabilities.
pub(crate) fn expected_lambda(entries: impl Iterator<Item = (f64, f64, f64)>) -> f64 {
    entries.map(|(lambda, membership, existence)| lambda * membership * existence).sum()
}

/// Expected intensity of a cell from its full particle list (the static
/// cell particle included), marginalizing over which particle occupies the
/// cell and whether it exists.
pub fn expected_cell_lambda(particles_in_cell: &[Particle], cell_area: f64, tau: f64) -> f64 {
    debug_assert!(
        particles_in_cell.iter().any(|p| p.kind == ObstacleKind::StaticCell),
        "a static cell particle is always present"
    );
    let memberships = membership_probabilities(particles_in_cell, cell_area);
    expected_lambda(
        particles_in_cell
            .iter()
            .zip(&memberships)
            .map(|(p, &m)| (p.intensity, m, existence_probability(p, tau))),
    )
}

// ---------------------------------------------------------------------------
// Footprint rasterization: a particle is in every cell its footprint
// overlaps by at least half of the cell area, evaluated by polygon
// clipping (with exact fast paths away from footprint corners).

pub fn footprint_cells(particle: &Particle, frame: &GridFrame) -> Vec<usize> {
    let mut out = Vec::new();
    footprint_cells_into(particle, frame, &mut out);
    out
}

pub(crate) fn footprint_cells_into(particle: &Particle, frame: &GridFrame, out: &mut Vec<usize>) {
    out.clear();
    match particle.kind {
        ObstacleKind::StaticCell => {
            if let Some(cell) = frame.cell_at(particle.position) {
                out.push(cell);
            }
        }
        ObstacleKind::Pedestrian => {
            circle_cells(particle.position, 0.5 * PEDESTRIAN_DIAMETER, frame, out)
        }
        ObstacleKind::Car => rect_cells(
            particle.position,
            0.5 * CAR_LENGTH,
            0.5 * CAR_WIDTH,
            particle.heading(),
            frame,
            out,
        ),
    }
}

/// Cells an axis-oriented rectangle footprint overlaps by at least half a
/// cell (used for the robot's own swept path as well as car particles).
pub(crate) fn rect_footprint_cells(
    center: Vec2,
    half_len: f64,
    half_wid: f64,
    heading: f64,
    frame: &GridFrame,
    out: &mut Vec<usize>,
) {
    out.clear();
    rect_cells(center, half_len, half_wid, heading, frame, out);
}

fn cell_range(frame: &GridFrame, lo: f64, hi: f64, axis_extent: usize, origin: f64) -> (usize, usize) {
    let a = ((lo - origin) / frame.cell_size).floor().max(0.0) as usize;
    let b = (((hi - origin) / frame.cell_size).ceil() as isize).clamp(0, axis_extent as isize) as usize;
    (a, b)
}

fn circle_cells(center: Vec2, radius: f64, frame: &GridFrame, out: &mut Vec<usize>) {
    let half_area = 0.5 * frame.cell_area() - 1e-12;
    let half_diag = frame.cell_size * std::f64::consts::FRAC_1_SQRT_2;
    let (c0, c1) = cell_range(frame, center.x - radius, center.x + radius, frame.width, frame.origin.x);
    let (r0, r1) = cell_range(frame, center.y - radius, center.y + radius, frame.height, frame.origin.y);
    let mut poly: Option<Vec<Vec2>> = None;
    for row in r0..r1 {
        for col in c0..c1 {
            let cell = frame.index(col, row);
            let cc = frame.center_of(cell);
            let dist = cc.distance(center);
            if dist <= radius - half_diag {
                out.push(cell);
            } else if dist < radius + half_diag {
                let poly = poly.get_or_insert_with(|| circle_polygon(center, radius, CIRCLE_SIDES));
                let (min, max) = frame.cell_rect(cell);
                if overlap_area_with_rect(poly, min, max) >= half_area {
                    out.push(cell);
                }
            }
        }
    }
}

fn rect_cells(
    center: Vec2,
    half_len: f64,
    half_wid: f64,
    heading: f64,
    frame: &GridFrame,
    out: &mut Vec<usize>,
) {
    let half_diag = frame.cell_size * std::f64::consts::FRAC_1_SQRT_2;
    let half_area = 0.5 * frame.cell_area() - 1e-12;
    let fwd = Vec2::from_angle(heading);
    let side = fwd.perp();
    let reach = half_len.hypot(half_wid);
    let (c0, c1) = cell_range(frame, center.x - reach, center.x + reach, frame.width, frame.origin.x);
    let (r0, r1) = cell_range(frame, center.y - reach, center.y + reach, frame.height, frame.origin.y);
    let mut poly: Option<Vec<Vec2>> = None;
    for row in r0..r1 {
        for col in c0..c1 {
            let cell = frame.index(col, row);
            let rel = frame.center_of(cell) - center;
            let u = rel.dot(fwd).abs();
            let v = rel.dot(side).abs();
            if u <= half_len - half_diag && v <= half_wid - half_diag {
                out.push(cell);
            } else if u < half_len + half_diag && v < half_wid + half_diag {
                let du = half_len - u;
                let dv = half_wid - v;
                // Away from the rectangle corners a cell center inside the
                // rectangle overlaps by more than half (central symmetry of
                // the cell); near a corner fall back to clipping.
                let near_corner = du.abs() < half_diag && dv.abs() < half_diag;
                if !near_corner {
                    if du > 0.0 && dv > 0.0 {
                        out.push(cell);
                    }
                } else {
                    let poly = poly
                        .get_or_insert_with(|| oriented_rect(center, half_len, half_wid, heading));
                    let (min, max) = frame.cell_rect(cell);
                    if overlap_area_with_rect(poly, min, max) >= half_area {
                        out.push(cell);
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Resampling with births.

/// Normalizable weights of the joint draw: one entry per existing particle
/// and one per hit error region (birth).
#[derive(Clone, Debug)]
pub struct ResampleTable {
    pub weights: Vec<f64>,
    pub birth_weights: Vec<f64>,
}

impl ResampleTable {
    pub fn total(&self) -> f64 {
        self.weights.iter().sum::<f64>() + self.birth_weights.iter().sum::<f64>()
    }
}

pub(crate) struct CellAggregates {
    /// Flat list of (cell, aggregate index) pairs is avoided; lookup by map.
    map: std::collections::HashMap<usize, CellAggregate>,
}

pub(crate) struct CellAggregate {
    /// Sum of exp(lambda*da)-1 over dynamic occupants plus the static term.
    weight_sum: f64,
    occupants: usize,
    expected: f64,
}

impl CellAggregates {
    pub fn expected(&self, cell: usize) -> f64 {
        self.map.get(&cell).map_or(0.0, |a| a.expected)
    }

    fn membership_of(&self, cell: usize, lambda_area: f64) -> f64 {
        match self.map.get(&cell) {
            None => 0.0,
            Some(agg) => {
                if agg.weight_sum <= 0.0 {
                    1.0 / (agg.occupants as f64)
                } else {
                    lambda_area.exp_m1() / agg.weight_sum
                }
            }
        }
    }
}

/// Per-cell expected intensities and membership denominators over the
/// union of all particle footprints and the listed extra cells.
pub(crate) fn build_cell_aggregates(
    population: &[Particle],
    footprints: &[Vec<usize>],
    existences: &[f64],
    statics: &StaticField,
    extra_cells: impl Iterator<Item = usize>,
    tau: f64,
) -> CellAggregates {
    use std::collections::HashMap;
    let area = statics.frame.cell_area();
    let mut members: HashMap<usize, Vec<u32>> = HashMap::new();
    for (i, cells) in footprints.iter().enumerate() {
        for &c in cells {
            members.entry(c).or_default().push(i as u32);
        }
    }
    for c in extra_cells {
        members.entry(c).or_default();
    }
    let map = members
        .into_iter()
        .map(|(cell, ids)| {
            let static_la = statics.intensity(cell) * area;
            let mut weight_sum = static_la.exp_m1();
            for &i in &ids {
                weight_sum += (population[i as usize].intensity * area).exp_m1();
            }
            let occupants = ids.len() + 1;
            let expected = if weight_sum <= 0.0 {
                // All-zero intensities: uniform membership.
                let m = 1.0 / occupants as f64;
                let mut e = statics.intensity(cell) * m * statics.existence(cell, tau);
                for &i in &ids {
                    e += population[i as usize].intensity * m * existences[i as usize];
                }
                e
            } else {
                let mut e = statics.intensity(cell) * (static_la.exp_m1() / weight_sum)
                    * statics.existence(cell, tau);
                for &i in &ids {
                    let p = &population[i as usize];
                    e += p.intensity * ((p.intensity * area).exp_m1() / weight_sum)
                        * existences[i as usize];
                }
                e
            };
            (cell, CellAggregate { weight_sum, occupants, expected })
        })
        .collect();
    CellAggregates { map }
}

/// Joint resampling weights: each particle weighted by membership at its
/// anchor cell, existence, and the summed collision probability of its
/// footprint cells; each hit region contributes a birth weight
/// gamma * exp(-da * sum of expected intensities over the region).
pub fn build_resample_table(
    population: &[Particle],
    footprints: &[Vec<usize>],
    statics: &StaticField,
    hit_regions: &[HitRegion],
    config: &MappingConfig,
) -> ResampleTable {
    let tau = config.existence_decay_rate;
    let area = statics.frame.cell_area();
    let existences: Vec<f64> =
        population.iter().map(|p| existence_probability(p, tau)).collect();
    let aggregates = build_cell_aggregates(
        population,
        footprints,
        &existences,
        statics,
        hit_regions.iter().flat_map(|r| r.cells.iter().copied()),
        tau,
    );

    let weights: Vec<f64> = population
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let Some(anchor) = statics.frame.cell_at(p.position) else {
                return 0.0;
            };
            if footprints[i].is_empty() {
                return 0.0;
            }
            let membership = aggregates.membership_of(anchor, p.intensity * area);
            let cell_sum: f64 = footprints[i]
                .iter()
                .map(|&c| -(-area * aggregates.expected(c)).exp_m1())
                .sum();
            membership * existences[i] * cell_sum
        })
        .collect();

    let birth_weights: Vec<f64> = hit_regions
        .iter()
        .map(|r| {
            let sum: f64 = r.cells.iter().map(|&c| aggregates.expected(c)).sum();
            config.birth_gain * (-area * sum).exp()
        })
        .collect();

    ResampleTable { weights, birth_weights }
}

#[derive(Clone, Copy, Debug)]
enum Slot {
    Existing(usize),
    Birth(usize),
}

fn systematic_draw<R: Rng + ?Sized>(table: &ResampleTable, count: usize, rng: &mut R) -> Vec<Slot> {
    let total = table.total();
    let n_existing = table.weights.len();
    let mut slots = Vec::with_capacity(count);
    if total <= 0.0 || !total.is_finite() {
        // Degenerate: uniform resample over the existing population.
        for i in 0..count {
            slots.push(Slot::Existing(if n_existing == 0 { 0 } else { i % n_existing }));
        }
        return slots;
    }
    let step = total / count as f64;
    let mut pointer = rng.random_range(0.0..1.0) * step;
    let mut cumulative = 0.0;
    let mut idx = 0usize;
    let at = |i: usize| -> f64 {
        if i < n_existing {
            table.weights[i]
        } else {
            table.birth_weights[i - n_existing]
        }
    };
    let len = n_existing + table.birth_weights.len();
    let mut bound = at(0);
    for _ in 0..count {
        while pointer >= cumulative + bound && idx + 1 < len {
            cumulative += bound;
            idx += 1;
            bound = at(idx);
        }
        slots.push(if idx < n_existing {
            Slot::Existing(idx)
        } else {
            Slot::Birth(idx - n_existing)
        });
        pointer += step;
    }
    slots
}

pub(crate) struct ResampleOutcome {
    pub population: Vec<Particle>,
    pub footprints: Vec<Vec<usize>>,
}

pub(crate) fn resample_with_footprints<R: Rng + ?Sized>(
    population: &[Particle],
    footprints: &[Vec<usize>],
    statics: &StaticField,
    hit_regions: &[HitRegion],
    config: &MappingConfig,
    rng: &mut R,
) -> ResampleOutcome {
    let table = build_resample_table(population, footprints, statics, hit_regions, config);
    let slots = systematic_draw(&table, config.population_size, rng);

    let mut out = Vec::with_capacity(slots.len());
    let mut out_fp = Vec::with_capacity(slots.len());
    for slot in slots {
        match slot {
            Slot::Existing(i) => {
                if population.is_empty() {
                    continue;
                }
                let mut p = population[i].clone();
                let mut refresh_fp = false;
                if p.kind != ObstacleKind::StaticCell {
                    if config.kind_switch_probability > 0.0
                        && rng.random::<f64>() < config.kind_switch_probability
                    {
                        p.kind = match p.kind {
                            ObstacleKind::Pedestrian => ObstacleKind::Car,
                            ObstacleKind::Car => ObstacleKind::Pedestrian,
                            ObstacleKind::StaticCell => unreachable!(),
                        };
                        refresh_fp = true;
                    }
                    if config.resample_speed_noise > 0.0 {
                        let nx: f64 = StandardNormal.sample(rng);
                        let ny: f64 = StandardNormal.sample(rng);
                        p.velocity += Vec2::new(nx, ny) * config.resample_speed_noise;
                        clamp_speed(&mut p);
                        // Car footprints follow the velocity direction.
                        refresh_fp |= p.kind == ObstacleKind::Car;
                    }
                }
                let fp = if refresh_fp {
                    footprint_cells(&p, &statics.frame)
                } else {
                    footprints[i].clone()
                };
                out.push(p);
                out_fp.push(fp);
            }
            Slot::Birth(region_idx) => {
                let region = &hit_regions[region_idx];
                if region.cells.is_empty() {
                    continue;
                }
                let cell = region.cells[rng.random_range(0..region.cells.len())];
                let (min, max) = statics.frame.cell_rect(cell);
                let position = Vec2::new(
                    rng.random_range(min.x..max.x),
                    rng.random_range(min.y..max.y),
                );
                let kind = ObstacleKind::DYNAMIC[rng.random_range(0..ObstacleKind::DYNAMIC.len())];
                let speed = rng.random_range(0.0..kind.max_speed());
                let heading = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                let p = Particle::new(kind, position, Vec2::from_angle(heading) * speed);
                let fp = footprint_cells(&p, &statics.frame);
                out.push(p);
                out_fp.push(fp);
            }
        }
    }
    ResampleOutcome { population: out, footprints: out_fp }
}

/// Draw the next population: survivors are picked with the joint
/// membership/existence/collision weight and perturbed, new particles are
/// born in under-explained hit regions.
pub fn resample<R: Rng + ?Sized>(
    population: &[Particle],
    statics: &StaticField,
    hit_regions: &[HitRegion],
    config: &MappingConfig,
    rng: &mut R,
) -> Vec<Particle> {
    let footprints: Vec<Vec<usize>> =
        population.iter().map(|p| footprint_cells(p, &statics.frame)).collect();
    resample_with_footprints(population, &footprints, statics, hit_regions, config, rng).population
}
