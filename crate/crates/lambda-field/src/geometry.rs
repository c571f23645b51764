//! Minimal 2D vector and convex-polygon toolbox shared by the grid, sensor,
//! world and planner modules. Polygons are counter-clockwise vertex lists.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        Vec2::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    /// Rotate 90 degrees counter-clockwise.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn length(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn length_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).length()
    }

    pub fn normalized(self) -> Vec2 {
        let len = self.length();
        if len > 0.0 {
            self * (1.0 / len)
        } else {
            Vec2::ZERO
        }
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn rotated(self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wrap an angle into [-pi, pi).
pub fn wrap_angle(theta: f64) -> f64 {
    let mut a = theta.rem_euclid(2.0 * PI);
    if a >= PI {
        a -= 2.0 * PI;
    }
    a
}

/// Signed smallest rotation from `b` to `a`, in [-pi, pi).
pub fn angle_diff(a: f64, b: f64) -> f64 {
    wrap_angle(a - b)
}

/// Shoelace area; positive for counter-clockwise polygons.
pub fn polygon_area(poly: &[Vec2]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        acc += a.cross(b);
    }
    0.5 * acc
}

/// Clip a polygon against the axis-aligned rectangle [min, max]
/// (Sutherland-Hodgman). The input need not be convex in x/y separately,
/// but callers here only pass convex polygons.
pub fn clip_polygon_to_rect(poly: &[Vec2], min: Vec2, max: Vec2) -> Vec<Vec2> {
    let mut current: Vec<Vec2> = poly.to_vec();
    let mut next: Vec<Vec2> = Vec::with_capacity(poly.len() + 4);

    // Each edge: (inside predicate, intersection with the boundary line).
    let edges: [(Box<dyn Fn(Vec2) -> bool>, Box<dyn Fn(Vec2, Vec2) -> Vec2>); 4] = [
        (
            Box::new(move |p: Vec2| p.x >= min.x),
            Box::new(move |a: Vec2, b: Vec2| lerp_at_x(a, b, min.x)),
        ),
        (
            Box::new(move |p: Vec2| p.x <= max.x),
            Box::new(move |a: Vec2, b: Vec2| lerp_at_x(a, b, max.x)),
        ),
        (
            Box::new(move |p: Vec2| p.y >= min.y),
            Box::new(move |a: Vec2, b: Vec2| lerp_at_y(a, b, min.y)),
        ),
        (
            Box::new(move |p: Vec2| p.y <= max.y),
            Box::new(move |a: Vec2, b: Vec2| lerp_at_y(a, b, max.y)),
        ),
    ];

    for (inside, cross) in &edges {
        next.clear();
        for i in 0..current.len() {
            let a = current[i];
            let b = current[(i + 1) % current.len()];
            let a_in = inside(a);
            let b_in = inside(b);
            if a_in {
                next.push(a);
                if !b_in {
                    next.push(cross(a, b));
                }
            } else if b_in {
                next.push(cross(a, b));
            }
        }
        std::mem::swap(&mut current, &mut next);
        if current.is_empty() {
            return current;
        }
    }
    current
}

fn lerp_at_x(a: Vec2, b: Vec2, x: f64) -> Vec2 {
    let t = (x - a.x) / (b.x - a.x);
    Vec2::new(x, a.y + t * (b.y - a.y))
}

fn lerp_at_y(a: Vec2, b: Vec2, y: f64) -> Vec2 {
    let t = (y - a.y) / (b.y - a.y);
    Vec2::new(a.x + t * (b.x - a.x), y)
}

/// Area of the overlap between a convex polygon and an axis-aligned cell.
pub fn overlap_area_with_rect(poly: &[Vec2], min: Vec2, max: Vec2) -> f64 {
    polygon_area(&clip_polygon_to_rect(poly, min, max)).abs()
}

/// Andrew's monotone chain. Returns a counter-clockwise hull without
/// duplicate endpoints. Collinear points are dropped.
pub fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup_by(|a, b| (*a - *b).length_squared() < 1e-24);
    let n = pts.len();
    if n < 3 {
        return pts;
    }
    let turns_right = |hull: &[Vec2], p: Vec2| {
        let q = hull[hull.len() - 1];
        let r = hull[hull.len() - 2];
        (q - r).cross(p - r) <= 1e-18
    };
    let mut lower: Vec<Vec2> = Vec::with_capacity(n);
    for &p in &pts {
        while lower.len() >= 2 && turns_right(&lower, p) {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Vec2> = Vec::with_capacity(n);
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && turns_right(&upper, p) {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Regular polygon approximating a disc, counter-clockwise.
pub fn circle_polygon(center: Vec2, radius: f64, sides: usize) -> Vec<Vec2> {
    (0..sides)
        .map(|i| {
            let theta = 2.0 * PI * (i as f64) / (sides as f64);
            center + Vec2::from_angle(theta) * radius
        })
        .collect()
}

/// Rectangle of the given half extents, rotated to `heading`, centered at
/// `center`; the `half_length` axis points along the heading.
pub fn oriented_rect(center: Vec2, half_length: f64, half_width: f64, heading: f64) -> Vec<Vec2> {
    let fwd = Vec2::from_angle(heading);
    let side = fwd.perp();
    vec![
        center + fwd * half_length + side * half_width,
        center - (fwd * half_length) + side * half_width,
        center - (fwd * half_length) - side * half_width,
        center + fwd * half_length - side * half_width,
    ]
}

/// Distance along the ray (origin, unit dir) to the segment [a, b], if any.
pub fn ray_segment(origin: Vec2, dir: Vec2, a: Vec2, b: Vec2) -> Option<f64> {
    let seg = b - a;
    let denom = dir.cross(seg);
    if denom.abs() < 1e-15 {
        return None;
    }
    let diff = a - origin;
    let t = diff.cross(seg) / denom;
    let u = diff.cross(dir) / denom;
    if t >= 0.0 && (0.0..=1.0).contains(&u) {
        Some(t)
    } else {
        None
    }
}

/// Distance along the ray to the first intersection with a circle, if any.
pub fn ray_circle(origin: Vec2, dir: Vec2, center: Vec2, radius: f64) -> Option<f64> {
    let oc = origin - center;
    let b = oc.dot(dir);
    let c = oc.length_squared() - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = -b - sq;
    let t1 = -b + sq;
    if t0 >= 0.0 {
        Some(t0)
    } else if t1 >= 0.0 {
        Some(t1)
    } else {
        None
    }
}

/// Distance along the ray to the boundary of a convex polygon, if any.
pub fn ray_polygon(origin: Vec2, dir: Vec2, poly: &[Vec2]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        if let Some(t) = ray_segment(origin, dir, a, b) {
            best = Some(best.map_or(t, |cur: f64| cur.min(t)));
        }
    }
    best
}

/// Winding-free inclusion test for convex or simple polygons.
pub fn point_in_polygon(p: Vec2, poly: &[Vec2]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let a = poly[i];
        let b = poly[j];
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}
