//! Lidar beam model: range casting against the simulated world and the
//! hit/miss classification of grid cells, with an error region of area `e`
//! around every measured endpoint.

use std::io::{self, BufRead, Write};

use crate::error::{FieldError, Result};
use crate::geometry::Vec2;
use crate::grid::GridFrame;
use crate::world::{Pose, WorldState};

/// Range sensor with an error region: the true obstacle position of a hit
/// lies inside an axis-aligned square of area `error_area` centered on the
/// measurement.
#[derive(Clone, Copy, Debug)]
pub struct SensorModel {
    pub beam_count: usize,
    /// Angular field of view, rad, centered on the sensing heading.
    pub fov: f64,
    pub max_range: f64,
    pub error_area: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        SensorModel {
            beam_count: 181,
            fov: 2.0 * std::f64::consts::PI,
            max_range: 12.0,
            error_area: 0.0225,
        }
    }
}

impl SensorModel {
    pub fn validate(&self) -> Result<()> {
        if self.error_area > 0.0 && self.max_range > 0.0 && self.beam_count > 0 {
            Ok(())
        } else {
            Err(FieldError::InvalidErrorArea(self.error_area))
        }
    }

    pub fn beam_angles(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.beam_count;
        let full_circle = (self.fov - 2.0 * std::f64::consts::PI).abs() < 1e-9;
        (0..n).map(move |i| {
            if n == 1 {
                0.0
            } else if full_circle {
                // Avoid the duplicate beam at +pi.
                -self.fov / 2.0 + self.fov * i as f64 / n as f64
            } else {
                -self.fov / 2.0 + self.fov * i as f64 / (n - 1) as f64
            }
        })
    }
}

/// One beam: angle relative to the sensing heading and the measured range;
/// `None` is a max-range miss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Beam {
    pub angle: f64,
    pub range: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct LidarScan {
    pub pose: Pose,
    pub timestamp: f64,
    pub beams: Vec<Beam>,
}

/// Error region of one hit beam: the grid cells overlapping the square
/// centered on the measured endpoint.
#[derive(Clone, Debug)]
pub struct HitRegion {
    pub cells: Vec<usize>,
    pub center: Vec2,
}

/// Classified scan: cells crossed by beams without collision and one error
/// region per hit.
#[derive(Clone, Debug, Default)]
pub struct ScanClassification {
    pub miss_cells: Vec<usize>,
    pub hit_regions: Vec<HitRegion>,
}

/// Cast all beams from `pose` against the world's static geometry and
/// agents. Each beam returns the range to the nearest surface or a
/// max-range miss.
pub fn cast_scan(world: &WorldState, pose: Pose, model: &SensorModel) -> LidarScan {
    debug_assert!(world.contains(pose.position), "sensing pose must be inside world bounds");
    let beams = model
        .beam_angles()
        .map(|angle| {
            let dir = Vec2::from_angle(pose.heading + angle);
            let range = world
                .raycast(pose.position, dir)
                .filter(|&r| r <= model.max_range && r > 0.0);
            Beam { angle, range }
        })
        .collect();
    LidarScan { pose, timestamp: world.clock, beams }
}

/// Classify grid cells against one scan: cells traversed by a beam before
/// its error region are misses, cells overlapping an endpoint's error
/// region form that beam's hit region. Max-range beams contribute only
/// misses. No cell is both hit and miss for the same beam.
pub fn classify_cells(scan: &LidarScan, frame: &GridFrame, model: &SensorModel) -> ScanClassification {
    let origin = scan.pose.position;
    let half_side = 0.5 * model.error_area.sqrt();
    let mut miss_mask = vec![false; frame.len()];
    let mut miss_cells = Vec::new();
    let mut hit_regions = Vec::new();

    for beam in &scan.beams {
        let dir = Vec2::from_angle(scan.pose.heading + beam.angle);
        match beam.range {
            None => {
                let end = origin + dir * model.max_range;
                for cell in frame.supercover(origin, end) {
                    if !miss_mask[cell] {
                        miss_mask[cell] = true;
                        miss_cells.push(cell);
                    }
                }
            }
            Some(range) => {
                let endpoint = origin + dir * range;
                let rmin = endpoint - Vec2::new(half_side, half_side);
                let rmax = endpoint + Vec2::new(half_side, half_side);
                let cells = frame.cells_overlapping_rect(rmin, rmax, 1e-12);
                // The miss segment stops where the error region begins.
                let free_len = ray_box_entry(origin, dir, rmin, rmax).unwrap_or(range);
                if free_len > 1e-9 {
                    let end = origin + dir * free_len.min(range);
                    for cell in frame.supercover(origin, end) {
                        if !cells.contains(&cell) && !miss_mask[cell] {
                            miss_mask[cell] = true;
                            miss_cells.push(cell);
                        }
                    }
                }
                if !cells.is_empty() {
                    hit_regions.push(HitRegion { cells, center: endpoint });
                }
            }
        }
    }
    ScanClassification { miss_cells, hit_regions }
}

/// Distance along the ray at which it enters the axis-aligned box, if it
/// does; 0 when the origin is already inside.
fn ray_box_entry(origin: Vec2, dir: Vec2, min: Vec2, max: Vec2) -> Option<f64> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for (o, d, lo, hi) in [(origin.x, dir.x, min.x, max.x), (origin.y, dir.y, min.y, max.y)] {
        if d.abs() < 1e-15 {
            if o < lo || o > hi {
                return None;
            }
        } else {
            let a = (lo - o) / d;
            let b = (hi - o) / d;
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
    }
    if t0 > t1 || t1 < 0.0 {
        None
    } else {
        Some(t0.max(0.0))
    }
}

/// One line per scan: timestamp, pose, then `beam_count` ranges with `-`
/// marking a max-range miss.
pub fn write_scan_log<W: Write>(w: &mut W, scan: &LidarScan) -> io::Result<()> {
    write!(
        w,
        "{:.6} {:.9} {:.9} {:.9}",
        scan.timestamp, scan.pose.position.x, scan.pose.position.y, scan.pose.heading
    )?;
    for beam in &scan.beams {
        match beam.range {
            Some(r) => write!(w, " {r:.6}")?,
            None => write!(w, " -")?,
        }
    }
    writeln!(w)
}

/// Parse the log format written by [`write_scan_log`]. The beam angles are
/// reconstructed from the sensor model.
pub fn read_scan_log<R: BufRead>(r: &mut R, model: &SensorModel) -> io::Result<Vec<LidarScan>> {
    let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
    let mut scans = Vec::new();
    for line in r.lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut fields = t.split_whitespace();
        let timestamp: f64 =
            fields.next().ok_or_else(|| bad("empty record"))?.parse().map_err(|_| bad("bad timestamp"))?;
        let px: f64 = fields.next().ok_or_else(|| bad("missing pose"))?.parse().map_err(|_| bad("bad pose"))?;
        let py: f64 = fields.next().ok_or_else(|| bad("missing pose"))?.parse().map_err(|_| bad("bad pose"))?;
        let heading: f64 =
            fields.next().ok_or_else(|| bad("missing pose"))?.parse().map_err(|_| bad("bad pose"))?;
        let ranges: Vec<Option<f64>> = fields
            .map(|s| {
                if s == "-" {
                    Ok(None)
                } else {
                    s.parse::<f64>().map(Some).map_err(|_| bad("bad range"))
                }
            })
            .collect::<io::Result<_>>()?;
        if ranges.len() != model.beam_count {
            return Err(bad("beam count mismatch"));
        }
        let beams = model
            .beam_angles()
            .zip(ranges)
            .map(|(angle, range)| Beam { angle, range })
            .collect();
        scans.push(LidarScan {
            pose: Pose { position: Vec2::new(px, py), heading },
            timestamp,
            beams,
        });
    }
    Ok(scans)
}
