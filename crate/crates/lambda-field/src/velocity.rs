//! Per-cell velocity statistics: a normal model for speed and a Von Mises
//! model for heading, fitted from weighted particle velocities, plus the
//! per-class intensity aggregation the planner consumes.

use crate::error::{FieldError, Result};
use crate::geometry::Vec2;
use crate::particles::ObstacleKind;

/// Below this concentration the Gaussian heading approximation
/// sigma = sqrt(1/kappa) is refused and callers fall back to full-circle
/// uncertainty.
pub const KAPPA_MIN: f64 = 1.0;
/// Concentration cap for degenerate (single-direction) populations.
pub const KAPPA_CAP: f64 = 500.0;

/// Fitted velocity model of one dynamic cell. Speed is normal
/// (mean, std); heading is Von Mises (mean, concentration).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellVelocityDistribution {
    pub mean_speed: f64,
    pub speed_std: f64,
    pub mean_heading: f64,
    pub concentration: f64,
}

impl CellVelocityDistribution {
    /// Gaussian approximation of the heading spread, when usable.
    pub fn heading_std(&self) -> Option<f64> {
        von_mises_to_gaussian(self.concentration).ok()
    }

    pub fn mean_velocity(&self) -> Vec2 {
        Vec2::from_angle(self.mean_heading) * self.mean_speed
    }
}

/// sigma_theta = sqrt(1 / kappa); refused below [`KAPPA_MIN`] where the
/// approximation is poor.
pub fn von_mises_to_gaussian(kappa: f64) -> Result<f64> {
    if kappa < KAPPA_MIN {
        return Err(FieldError::ConcentrationTooLow { kappa, min: KAPPA_MIN });
    }
    Ok((1.0 / kappa).sqrt())
}

/// Ratio I1(x)/I0(x) of modified Bessel functions, evaluated with the
/// Gauss continued fraction. Stable for the whole range used here
/// (0 <= x <= KAPPA_CAP) where direct evaluation of I0 would overflow.
pub fn bessel_i1_i0_ratio(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    // I1/I0 = 1 / (2/x + 1/(4/x + 1/(6/x + ...))), evaluated backward.
    let mut value = 0.0;
    let depth = 64;
    for k in (1..=depth).rev() {
        value = 1.0 / (2.0 * k as f64 / x + value);
    }
    value
}

/// Maximum-likelihood concentration for a mean resultant length `r`:
/// solves I1(kappa)/I0(kappa) = r by bisection, seeded by the standard
/// small/large-r series approximations, and capped at [`KAPPA_CAP`].
pub fn kappa_from_resultant(r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    if r >= bessel_i1_i0_ratio(KAPPA_CAP) {
        return KAPPA_CAP;
    }
    // Series seeds: kappa ~ 2r + r^3 for small r, ~ 1/(2(1-r)) for large r.
    let seed = if r < 0.53 {
        2.0 * r + r.powi(3) + 5.0 * r.powi(5) / 6.0
    } else if r < 0.85 {
        -0.4 + 1.39 * r + 0.43 / (1.0 - r)
    } else {
        1.0 / (r.powi(3) - 4.0 * r * r + 3.0 * r)
    };
    let mut lo = (seed * 0.25).clamp(0.0, KAPPA_CAP);
    let mut hi = (seed * 4.0 + 1.0).min(KAPPA_CAP);
    while bessel_i1_i0_ratio(lo) > r && lo > 1e-12 {
        lo *= 0.5;
    }
    while bessel_i1_i0_ratio(hi) < r && hi < KAPPA_CAP {
        hi = (hi * 2.0).min(KAPPA_CAP);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo < 1e-12 * (1.0 + mid) {
            break;
        }
        if bessel_i1_i0_ratio(mid) < r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Weighted fit of the per-cell velocity model. Weights are expected to be
/// lambda * membership * existence per particle; entries with zero or
/// negative weight are ignored. Returns `None` when no weight remains.
pub fn fit_cell_distribution(samples: &[(Vec2, f64)]) -> Option<CellVelocityDistribution> {
    let mut w_total = 0.0;
    let mut speed_sum = 0.0;
    let mut speed_sq_sum = 0.0;
    let mut cos_sum = 0.0;
    let mut sin_sum = 0.0;
    let mut w_dir = 0.0;
    for &(v, w) in samples {
        if w <= 0.0 {
            continue;
        }
        let speed = v.length();
        w_total += w;
        speed_sum += w * speed;
        speed_sq_sum += w * speed * speed;
        // A zero-velocity sample has no heading; it contributes to the
        // speed statistics only.
        if speed > 1e-12 {
            let dir = v * (1.0 / speed);
            cos_sum += w * dir.x;
            sin_sum += w * dir.y;
            w_dir += w;
        }
    }
    if w_total <= 0.0 {
        return None;
    }
    let mean_speed = speed_sum / w_total;
    let var = (speed_sq_sum / w_total - mean_speed * mean_speed).max(0.0);
    let (mean_heading, concentration) = if w_dir > 0.0 {
        let c = cos_sum / w_dir;
        let s = sin_sum / w_dir;
        let resultant = c.hypot(s).min(1.0);
        (s.atan2(c), kappa_from_resultant(resultant))
    } else {
        (0.0, 0.0)
    };
    Some(CellVelocityDistribution {
        mean_speed,
        speed_std: var.sqrt(),
        mean_heading: crate::geometry::wrap_angle(mean_heading),
        concentration,
    })
}

/// Per-class intensity sums of one cell: for each dynamic class the sum of
/// lambda * membership * existence over that class's particles, with the
/// static contribution reported separately.
pub fn aggregate_class_intensities(
    entries: &[(ObstacleKind, f64, f64, f64)],
) -> ([f64; crate::grid::DYNAMIC_KIND_COUNT], f64) {
    let mut by_kind = [0.0; crate::grid::DYNAMIC_KIND_COUNT];
    let mut stat = 0.0;
    for &(kind, lambda, membership, existence) in entries {
        let term = lambda * membership * existence;
        match kind.dynamic_index() {
            Some(k) => by_kind[k] += term,
            None => stat += term,
        }
    }
    (by_kind, stat)
}
