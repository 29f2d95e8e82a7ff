//! 2D vectors and the ray/segment kernel shared by sensing, collision and
//! course-progress queries.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Hits closer than this are reported as contact at distance zero.
pub const CONTACT_EPS: f64 = 1e-9;

const PARALLEL_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector pointing along `angle` (radians, counter-clockwise from +x).
    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c, s)
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn length(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn length_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn normalized(self) -> Vec2 {
        let len = self.length();
        Vec2::new(self.x / len, self.y / len)
    }

    /// Rotates counter-clockwise by `angle` radians.
    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).length()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Vec2::new(x, y)
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// A closed line segment. Zero-length segments are rejected when a track is
/// loaded; the kernel itself tolerates them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[Vec2; 2]", into = "[Vec2; 2]")]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub const fn new(a: Vec2, b: Vec2) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    /// Closest point on the segment to `p` and its parameter in `[0, 1]`.
    pub fn closest_point(&self, p: Vec2) -> (Vec2, f64) {
        let e = self.b - self.a;
        let len2 = e.length_squared();
        if len2 == 0.0 {
            return (self.a, 0.0);
        }
        let u = ((p - self.a).dot(e) / len2).clamp(0.0, 1.0);
        (self.a + e * u, u)
    }

    pub fn distance_to_point(&self, p: Vec2) -> f64 {
        self.closest_point(p).0.distance(p)
    }

    /// True when the two closed segments share at least one point.
    pub fn intersects(&self, other: &Segment) -> bool {
        let d1 = orient(other.a, other.b, self.a);
        let d2 = orient(other.a, other.b, self.b);
        let d3 = orient(self.a, self.b, other.a);
        let d4 = orient(self.a, self.b, other.b);
        if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
            && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
        {
            return true;
        }
        (d1 == 0.0 && on_segment(other, self.a))
            || (d2 == 0.0 && on_segment(other, self.b))
            || (d3 == 0.0 && on_segment(self, other.a))
            || (d4 == 0.0 && on_segment(self, other.b))
    }

    pub fn transformed(&self, f: impl Fn(Vec2) -> Vec2) -> Segment {
        Segment::new(f(self.a), f(self.b))
    }
}

impl From<[Vec2; 2]> for Segment {
    fn from([a, b]: [Vec2; 2]) -> Self {
        Segment::new(a, b)
    }
}

impl From<Segment> for [Vec2; 2] {
    fn from(s: Segment) -> Self {
        [s.a, s.b]
    }
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

// Assumes `p` is collinear with `seg`.
fn on_segment(seg: &Segment, p: Vec2) -> bool {
    p.x >= seg.a.x.min(seg.b.x)
        && p.x <= seg.a.x.max(seg.b.x)
        && p.y >= seg.a.y.min(seg.b.y)
        && p.y <= seg.a.y.max(seg.b.y)
}

/// Distance along a unit-length ray to the first point of `seg`, if any.
///
/// Collinear overlap reports the nearest point of the overlap (zero when the
/// origin lies on the segment). Hits closer than [`CONTACT_EPS`] snap to zero.
pub fn ray_segment_intersect(origin: Vec2, direction: Vec2, seg: &Segment) -> Option<f64> {
    debug_assert!(
        (direction.length() - 1.0).abs() <= 1e-9,
        "ray direction must be unit length, got |d| = {}",
        direction.length()
    );
    let e = seg.b - seg.a;
    let w = seg.a - origin;
    let denom = direction.cross(e);
    let scale = e.length().max(1.0);

    let t = if denom.abs() <= PARALLEL_EPS * scale {
        // Parallel. Only a collinear segment can be hit.
        if w.cross(direction).abs() > PARALLEL_EPS * scale.max(w.length()) {
            return None;
        }
        let ta = w.dot(direction);
        let tb = (seg.b - origin).dot(direction);
        let (lo, hi) = if ta <= tb { (ta, tb) } else { (tb, ta) };
        if hi < 0.0 {
            return None;
        }
        lo.max(0.0)
    } else {
        let t = w.cross(e) / denom;
        let u = w.cross(direction) / denom;
        if !(0.0..=1.0).contains(&u) || t < -CONTACT_EPS {
            return None;
        }
        t
    };
    Some(if t < CONTACT_EPS { 0.0 } else { t })
}

/// Wraps an angle into `(-π, π]`.
pub fn normalize_angle(a: f64) -> f64 {
    debug_assert!(a.is_finite());
    if a > -PI && a <= PI {
        return a;
    }
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}
