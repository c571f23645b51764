//! Robot-centered intensity grid: cell geometry, the exported snapshot the
//! planner consumes, refinement for tessellation checks, and the snapshot
//! text format.

use std::io::{self, BufRead, Write};

use crate::error::{FieldError, Result};
use crate::geometry::Vec2;
use crate::velocity::CellVelocityDistribution;

/// Cap applied to every stored intensity. At 15 cm cells the collision
/// probability of a capped cell is 1 - exp(-0.0225 * 1e3) ~ 1, so the cap
/// is behaviorally saturated.
pub const LAMBDA_MAX: f64 = 1e3;

/// Number of dynamic obstacle classes (pedestrian, car).
pub const DYNAMIC_KIND_COUNT: usize = 2;

/// Grid placement and indexing, shared by the snapshot, the static field
/// and the sensor classification. `origin` is the world position of the
/// lower-left corner of cell (0, 0); cells are squares of side `cell_size`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridFrame {
    pub width: usize,
    pub height: usize,
    pub cell_size: f64,
    pub origin: Vec2,
}

impl GridFrame {
    pub fn new(width: usize, height: usize, cell_size: f64, origin: Vec2) -> Result<Self> {
        if width == 0 || height == 0 || !(cell_size > 0.0) || !cell_size.is_finite() {
            return Err(FieldError::InvalidGrid);
        }
        Ok(GridFrame { width, height, cell_size, origin })
    }

    /// Frame centered on `center` with the given square dimension.
    pub fn centered(cells: usize, cell_size: f64, center: Vec2) -> Result<Self> {
        let half = 0.5 * cells as f64 * cell_size;
        GridFrame::new(cells, cells, cell_size, center - Vec2::new(half, half))
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_size * self.cell_size
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    pub fn col_row(&self, cell: usize) -> (usize, usize) {
        (cell % self.width, cell / self.width)
    }

    /// Cell containing a world point, if inside the grid.
    pub fn cell_at(&self, p: Vec2) -> Option<usize> {
        let fx = (p.x - self.origin.x) / self.cell_size;
        let fy = (p.y - self.origin.y) / self.cell_size;
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let col = fx as usize;
        let row = fy as usize;
        if col >= self.width || row >= self.height {
            None
        } else {
            Some(self.index(col, row))
        }
    }

    pub fn center_of(&self, cell: usize) -> Vec2 {
        let (col, row) = self.col_row(cell);
        self.origin
            + Vec2::new(
                (col as f64 + 0.5) * self.cell_size,
                (row as f64 + 0.5) * self.cell_size,
            )
    }

    pub fn cell_min(&self, cell: usize) -> Vec2 {
        let (col, row) = self.col_row(cell);
        self.origin + Vec2::new(col as f64 * self.cell_size, row as f64 * self.cell_size)
    }

    pub fn cell_rect(&self, cell: usize) -> (Vec2, Vec2) {
        let min = self.cell_min(cell);
        (min, min + Vec2::new(self.cell_size, self.cell_size))
    }

    pub fn cell_polygon(&self, cell: usize) -> [Vec2; 4] {
        let (min, max) = self.cell_rect(cell);
        [
            min,
            Vec2::new(max.x, min.y),
            max,
            Vec2::new(min.x, max.y),
        ]
    }

    pub fn world_center(&self) -> Vec2 {
        self.origin
            + Vec2::new(
                0.5 * self.width as f64 * self.cell_size,
                0.5 * self.height as f64 * self.cell_size,
            )
    }

    /// Cells whose interior overlaps the axis-aligned rectangle by more
    /// than `min_area`.
    pub fn cells_overlapping_rect(&self, min: Vec2, max: Vec2, min_area: f64) -> Vec<usize> {
        let mut out = Vec::new();
        let c0 = ((min.x - self.origin.x) / self.cell_size).floor().max(0.0) as usize;
        let r0 = ((min.y - self.origin.y) / self.cell_size).floor().max(0.0) as usize;
        let c1 = (((max.x - self.origin.x) / self.cell_size).ceil() as isize)
            .clamp(0, self.width as isize) as usize;
        let r1 = (((max.y - self.origin.y) / self.cell_size).ceil() as isize)
            .clamp(0, self.height as isize) as usize;
        for row in r0..r1 {
            for col in c0..c1 {
                let cell = self.index(col, row);
                let (cmin, cmax) = self.cell_rect(cell);
                let w = (max.x.min(cmax.x) - min.x.max(cmin.x)).max(0.0);
                let h = (max.y.min(cmax.y) - min.y.max(cmin.y)).max(0.0);
                if w * h > min_area {
                    out.push(cell);
                }
            }
        }
        out
    }

    /// Exact grid traversal of the segment [a, b] (Amanatides-Woo walk),
    /// clipped to the grid. Cells are returned in traversal order.
    pub fn supercover(&self, a: Vec2, b: Vec2) -> Vec<usize> {
        let mut cells = Vec::new();
        let size = self.cell_size;
        let rel_a = a - self.origin;
        let rel_b = b - self.origin;
        let dir = rel_b - rel_a;
        let len = dir.length();
        if len < 1e-12 {
            if let Some(c) = self.cell_at(a) {
                cells.push(c);
            }
            return cells;
        }
        let inv = dir * (1.0 / len);

        // Clip the segment to the grid interior.
        let (mut t0, mut t1) = (0.0_f64, len);
        for (o, d, extent) in [
            (rel_a.x, inv.x, self.width as f64 * size),
            (rel_a.y, inv.y, self.height as f64 * size),
        ] {
            if d.abs() < 1e-15 {
                if o < 0.0 || o > extent {
                    return cells;
                }
            } else {
                let ta = (0.0 - o) / d;
                let tb = (extent - o) / d;
                t0 = t0.max(ta.min(tb));
                t1 = t1.min(ta.max(tb));
            }
        }
        if t0 > t1 {
            return cells;
        }
        // Nudge inward so the start cell is well-defined on boundaries.
        let eps = 1e-9 * size;
        let start = rel_a + inv * (t0 + eps).min(len);
        let mut col = ((start.x / size) as isize).clamp(0, self.width as isize - 1);
        let mut row = ((start.y / size) as isize).clamp(0, self.height as isize - 1);

        let step_c: isize = if inv.x > 0.0 { 1 } else { -1 };
        let step_r: isize = if inv.y > 0.0 { 1 } else { -1 };
        let next_boundary = |i: isize, step: isize| -> f64 {
            if step > 0 {
                (i + 1) as f64 * size
            } else {
                i as f64 * size
            }
        };
        let mut t_max_x = if inv.x.abs() < 1e-15 {
            f64::INFINITY
        } else {
            (next_boundary(col, step_c) - rel_a.x) / inv.x
        };
        let mut t_max_y = if inv.y.abs() < 1e-15 {
            f64::INFINITY
        } else {
            (next_boundary(row, step_r) - rel_a.y) / inv.y
        };
        let t_delta_x = if inv.x.abs() < 1e-15 { f64::INFINITY } else { size / inv.x.abs() };
        let t_delta_y = if inv.y.abs() < 1e-15 { f64::INFINITY } else { size / inv.y.abs() };

        let t_end = t1 - eps;
        loop {
            cells.push(self.index(col as usize, row as usize));
            if t_max_x < t_max_y {
                if t_max_x > t_end {
                    break;
                }
                col += step_c;
                if col < 0 || col >= self.width as isize {
                    break;
                }
                t_max_x += t_delta_x;
            } else {
                if t_max_y > t_end {
                    break;
                }
                row += step_r;
                if row < 0 || row >= self.height as isize {
                    break;
                }
                t_max_y += t_delta_y;
            }
        }
        cells
    }
}

/// Exported per-cell state: the static intensity, one intensity per dynamic
/// class and the fitted velocity distribution when the cell is dynamic.
/// All intensities here are already weighted by membership and existence.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CellState {
    pub lambda_static: f64,
    pub lambda_by_kind: [f64; DYNAMIC_KIND_COUNT],
    pub velocity: Option<CellVelocityDistribution>,
}

impl CellState {
    pub fn dynamic_total(&self) -> f64 {
        self.lambda_by_kind.iter().sum()
    }

    /// Expected intensity of the cell: static plus every dynamic class.
    pub fn total_expected(&self) -> f64 {
        self.lambda_static + self.dynamic_total()
    }
}

/// Immutable grid snapshot produced once per mapping cycle and read by any
/// number of consumers (planner, exporters). Never mutated in place.
#[derive(Clone, Debug)]
pub struct LambdaGrid {
    pub frame: GridFrame,
    pub cells: Vec<CellState>,
}

impl LambdaGrid {
    pub fn new(frame: GridFrame, cells: Vec<CellState>) -> Result<Self> {
        if cells.len() != frame.len() {
            return Err(FieldError::InvalidGrid);
        }
        for cell in &cells {
            validate_intensity(cell.lambda_static)?;
            for &l in &cell.lambda_by_kind {
                validate_intensity(l)?;
            }
        }
        Ok(LambdaGrid { frame, cells })
    }

    pub fn uniform(frame: GridFrame, lambda_static: f64) -> Result<Self> {
        validate_intensity(lambda_static)?;
        let cells = vec![
            CellState { lambda_static, ..CellState::default() };
            frame.len()
        ];
        Ok(LambdaGrid { frame, cells })
    }

    pub fn cell(&self, idx: usize) -> Result<&CellState> {
        self.cells.get(idx).ok_or(FieldError::CellOutOfGrid { cell: idx, len: self.cells.len() })
    }

    /// Split every cell into `factor`^2 subcells carrying identical state.
    /// Total integrated intensity is preserved exactly.
    pub fn refine(&self, factor: usize) -> Result<LambdaGrid> {
        if factor == 0 {
            return Err(FieldError::ZeroRefineFactor);
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let frame = GridFrame::new(
            self.frame.width * factor,
            self.frame.height * factor,
            self.frame.cell_size / factor as f64,
            self.frame.origin,
        )?;
        let mut cells = Vec::with_capacity(frame.len());
        for row in 0..frame.height {
            for col in 0..frame.width {
                let parent = self.frame.index(col / factor, row / factor);
                cells.push(self.cells[parent].clone());
            }
        }
        Ok(LambdaGrid { frame, cells })
    }

    /// Row-major text dump: a header then one record per cell
    /// (lambda_static, lambda_pedestrian, lambda_car, mu_v, sigma_v,
    /// mu_theta, kappa_theta). Cells without a velocity distribution emit
    /// zeros for the four distribution fields.
    pub fn write_snapshot<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(
            w,
            "# lambda-grid {} {} {:.17e} {:.17e} {:.17e}",
            self.frame.width, self.frame.height, self.frame.cell_size,
            self.frame.origin.x, self.frame.origin.y
        )?;
        writeln!(w, "# lambda_static lambda_pedestrian lambda_car mu_v sigma_v mu_theta kappa_theta")?;
        for cell in &self.cells {
            let (mv, sv, mt, kt) = match &cell.velocity {
                Some(d) => (d.mean_speed, d.speed_std, d.mean_heading, d.concentration),
                None => (0.0, 0.0, 0.0, 0.0),
            };
            writeln!(
                w,
                "{:.9e} {:.9e} {:.9e} {:.9e} {:.9e} {:.9e} {:.9e}",
                cell.lambda_static,
                cell.lambda_by_kind[0],
                cell.lambda_by_kind[1],
                mv, sv, mt, kt
            )?;
        }
        Ok(())
    }

    /// Parse the format produced by [`LambdaGrid::write_snapshot`].
    pub fn read_snapshot<R: BufRead>(r: &mut R) -> io::Result<LambdaGrid> {
        let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
        let mut header = String::new();
        r.read_line(&mut header)?;
        let fields: Vec<&str> = header.trim().split_whitespace().collect();
        if fields.len() != 7 || fields[0] != "#" || fields[1] != "lambda-grid" {
            return Err(bad("missing snapshot header"));
        }
        let width: usize = fields[2].parse().map_err(|_| bad("bad width"))?;
        let height: usize = fields[3].parse().map_err(|_| bad("bad height"))?;
        let cell_size: f64 = fields[4].parse().map_err(|_| bad("bad cell size"))?;
        let ox: f64 = fields[5].parse().map_err(|_| bad("bad origin"))?;
        let oy: f64 = fields[6].parse().map_err(|_| bad("bad origin"))?;
        let frame = GridFrame::new(width, height, cell_size, Vec2::new(ox, oy))
            .map_err(|_| bad("bad frame"))?;
        let mut cells = Vec::with_capacity(frame.len());
        for line in r.lines() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let vals: Vec<f64> = t
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad("bad cell record"))?;
            if vals.len() != 7 {
                return Err(bad("cell record must have 7 fields"));
            }
            let velocity = if vals[6] > 0.0 || vals[3] != 0.0 || vals[4] != 0.0 {
                Some(CellVelocityDistribution {
                    mean_speed: vals[3],
                    speed_std: vals[4],
                    mean_heading: vals[5],
                    concentration: vals[6],
                })
            } else {
                None
            };
            cells.push(CellState {
                lambda_static: vals[0],
                lambda_by_kind: [vals[1], vals[2]],
                velocity,
            });
        }
        LambdaGrid::new(frame, cells).map_err(|e| bad(&e.to_string()))
    }
}

fn validate_intensity(lambda: f64) -> Result<()> {
    if !lambda.is_finite() || lambda < 0.0 {
        Err(FieldError::NegativeIntensity(lambda))
    } else {
        Ok(())
    }
}
