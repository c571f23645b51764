//! Boolean convex-convex intersection test in 2D via the
//! Gilbert-Johnson-Keerthi algorithm on the Minkowski difference.

use crate::geometry::Vec2;

const MAX_ITERATIONS: usize = 48;
const EPS: f64 = 1e-12;

fn support(shape: &[Vec2], dir: Vec2) -> Vec2 {
    let mut best = shape[0];
    let mut best_dot = best.dot(dir);
    for &p in &shape[1..] {
        let d = p.dot(dir);
        if d > best_dot {
            best_dot = d;
            best = p;
        }
    }
    best
}

fn minkowski_support(a: &[Vec2], b: &[Vec2], dir: Vec2) -> Vec2 {
    support(a, dir) - support(b, -dir)
}

/// Direction perpendicular to `edge` pointing toward `toward`.
fn perp_toward(edge: Vec2, toward: Vec2) -> Vec2 {
    let p = edge.perp();
    if p.dot(toward) >= 0.0 {
        p
    } else {
        -p
    }
}

/// Whether two convex polygons intersect (touching counts as intersecting
/// up to floating-point tolerance).
pub fn convex_intersects(a: &[Vec2], b: &[Vec2]) -> bool {
    if a.is_empty() || b.is_empty() {
        return false;
    }

    let mut dir = {
        let ca = centroid(a);
        let cb = centroid(b);
        let d = cb - ca;
        if d.length_squared() < EPS {
            Vec2::new(1.0, 0.0)
        } else {
            d
        }
    };

    let mut simplex: Vec<Vec2> = Vec::with_capacity(3);
    simplex.push(minkowski_support(a, b, dir));
    dir = -simplex[0];

    for _ in 0..MAX_ITERATIONS {
        if dir.length_squared() < EPS {
            // Origin sits on the current simplex boundary.
            return true;
        }
        let p = minkowski_support(a, b, dir);
        if p.dot(dir) < -EPS {
            return false;
        }
        simplex.push(p);
        if evolve_simplex(&mut simplex, &mut dir) {
            return true;
        }
    }
    // No decision within the budget; the shapes are in a grazing
    // configuration. Treat as intersecting (conservative).
    true
}

fn centroid(poly: &[Vec2]) -> Vec2 {
    let mut c = Vec2::ZERO;
    for &p in poly {
        c += p;
    }
    c * (1.0 / poly.len() as f64)
}

fn evolve_simplex(simplex: &mut Vec<Vec2>, dir: &mut Vec2) -> bool {
    match simplex.len() {
        2 => {
            let b = simplex[0];
            let a = simplex[1];
            let ab = b - a;
            let ao = -a;
            if ab.dot(ao) > 0.0 {
                *dir = perp_toward(ab, ao);
            } else {
                simplex.remove(0);
                *dir = ao;
            }
            false
        }
        3 => {
            let c = simplex[0];
            let b = simplex[1];
            let a = simplex[2];
            let ab = b - a;
            let ac = c - a;
            let ao = -a;
            let ab_perp = perp_toward(ab, -ac);
            let ac_perp = perp_toward(ac, -ab);
            if ab_perp.dot(ao) > EPS {
                simplex.remove(0);
                *dir = ab_perp;
                false
            } else if ac_perp.dot(ao) > EPS {
                simplex.remove(1);
                *dir = ac_perp;
                false
            } else {
                true
            }
        }
        _ => false,
    }
}
