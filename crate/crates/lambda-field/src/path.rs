//! Closed-form path collision probability over an intensity grid.
//!
//! A path is an ordered sweep of cells with the area increment made
//! explicit, so the exponent sum(da * lambda) is dimensionless and the
//! resulting probability does not change when cells are subdivided.

use crate::error::{FieldError, Result};
use crate::grid::{GridFrame, LambdaGrid};

/// One crossed cell: the flat cell index, the traversal (entry) time used
/// to evaluate time-dependent expectations, and the exit time used for
/// occupancy-interval overlap by the planner.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathStep {
    pub cell: usize,
    pub time: f64,
    pub exit_time: f64,
}

/// Ordered cells crossed by one candidate trajectory of a robot of width
/// `robot_width`, each contributing `area_step` of crossed area.
#[derive(Clone, Debug)]
pub struct PathPlan {
    pub steps: Vec<PathStep>,
    pub area_step: f64,
    pub robot_width: f64,
}

impl PathPlan {
    pub fn new(steps: Vec<PathStep>, area_step: f64, robot_width: f64) -> Result<Self> {
        if !(area_step > 0.0) || !(robot_width > 0.0) {
            return Err(FieldError::NegativeArea(area_step.min(robot_width)));
        }
        for (i, pair) in steps.windows(2).enumerate() {
            if pair[1].time < pair[0].time {
                return Err(FieldError::UnorderedPath(i + 1));
            }
        }
        Ok(PathPlan { steps, area_step, robot_width })
    }

    pub fn total_area(&self) -> f64 {
        self.steps.len() as f64 * self.area_step
    }

    /// Curvilinear abscissa of step `i`: i * da / L.
    pub fn abscissa(&self, i: usize) -> f64 {
        i as f64 * self.area_step / self.robot_width
    }

    /// Map this path onto a grid refined by `factor`: every step becomes
    /// the factor^2 subcells of its parent cell, at the parent's times.
    /// The swept region, and hence the crossed area, is unchanged.
    pub fn refine(&self, frame: &GridFrame, factor: usize) -> Result<PathPlan> {
        if factor == 0 {
            return Err(FieldError::ZeroRefineFactor);
        }
        let fine_width = frame.width * factor;
        let mut steps = Vec::with_capacity(self.steps.len() * factor * factor);
        for step in &self.steps {
            if step.cell >= frame.len() {
                return Err(FieldError::CellOutOfGrid { cell: step.cell, len: frame.len() });
            }
            let (col, row) = frame.col_row(step.cell);
            for dr in 0..factor {
                for dc in 0..factor {
                    steps.push(PathStep {
                        cell: (row * factor + dr) * fine_width + (col * factor + dc),
                        time: step.time,
                        exit_time: step.exit_time,
                    });
                }
            }
        }
        PathPlan::new(steps, self.area_step / (factor * factor) as f64, self.robot_width)
    }
}

/// Probability that crossing `area` of constant expected intensity
/// `expected_lambda` produces a collision: 1 - exp(-area * lambda).
pub fn cell_collision_probability(expected_lambda: f64, area: f64) -> Result<f64> {
    if !expected_lambda.is_finite() || expected_lambda < 0.0 {
        return Err(FieldError::NegativeIntensity(expected_lambda));
    }
    if !area.is_finite() || area < 0.0 {
        return Err(FieldError::NegativeArea(area));
    }
    Ok(-(-area * expected_lambda).exp_m1())
}

/// Collision probability of a path over a grid snapshot, using the
/// snapshot's expected intensity (static plus dynamic) per crossed cell.
pub fn path_collision_probability(path: &PathPlan, field: &LambdaGrid) -> Result<f64> {
    let mut exponent = 0.0;
    for step in &path.steps {
        exponent += path.area_step * field.cell(step.cell)?.total_expected();
    }
    Ok(-(-exponent).exp_m1())
}

/// Collision probability when the per-step expected intensities at the
/// traversal times are supplied by the caller (particle filter / planner).
pub fn path_collision_probability_over(path: &PathPlan, expected: &[f64]) -> Result<f64> {
    debug_assert_eq!(expected.len(), path.steps.len());
    let mut exponent = 0.0;
    for &lambda in expected {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(FieldError::NegativeIntensity(lambda));
        }
        exponent += path.area_step * lambda;
    }
    Ok(-(-exponent).exp_m1())
}
