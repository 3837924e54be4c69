//! Planar geometric kernel: point/segment distances and the reachability and
//! clearance predicates that decide whether a pick-and-place drag is feasible.
//!
//! Every predicate uses strict inequalities, so a waypoint sitting exactly on
//! a threshold is infeasible.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A position (or displacement) on the table plane, in meters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ZERO: Self = Self { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the planar cross product.
    #[inline]
    pub fn cross(self, other: Self) -> f64 {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn dist(self, other: Self) -> f64 {
        (self - other).norm()
    }

    /// Unit vector in the same direction, or `None` for a (near) zero vector.
    #[inline]
    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if n > 0.0 && n.is_finite() {
            Some(self * (1.0 / n))
        } else {
            None
        }
    }

    /// Counter-clockwise rotation by `angle` radians.
    #[inline]
    pub fn rotated(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    #[inline]
    pub fn lerp(self, other: Self, t: f64) -> Self {
        self + (other - self) * t
    }

    #[inline]
    pub fn midpoint(self, other: Self) -> Self {
        Self::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: f64) -> Self {
        Self::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Point {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Self { x, y }
    }
}

/// Straight planar drag from `p1` (pick) to `p2` (place). May be degenerate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub p1: Point,
    pub p2: Point,
}

impl Segment {
    pub const fn new(p1: Point, p2: Point) -> Self {
        Self { p1, p2 }
    }

    pub fn length(&self) -> f64 {
        self.p1.dist(self.p2)
    }
}

/// Arm base position and the open annulus `(reach_min, reach_max)` it can serve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmSpec {
    pub base: Point,
    pub reach_min: f64,
    pub reach_max: f64,
}

/// A round obstacle. `clearance` is measured from the center and already
/// includes the obstacle radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    pub center: Point,
    pub radius: f64,
    pub clearance: f64,
}

/// Minimum distance from `p` to the segment.
///
/// Uses the perpendicular distance only when the orthogonal foot of `p` lies
/// strictly inside the segment; otherwise the nearer endpoint.
pub fn seg_point_min_dist(seg: Segment, p: Point) -> f64 {
    let d = seg.p2 - seg.p1;
    let len = d.norm();
    if len == 0.0 {
        return p.dist(seg.p1);
    }
    let from_p1 = p - seg.p1;
    let from_p2 = p - seg.p2;
    if d.dot(from_p1) > 0.0 && (-d).dot(from_p2) > 0.0 {
        (d.cross(from_p1) / len).abs()
    } else {
        p.dist(seg.p1).min(p.dist(seg.p2))
    }
}

/// Maximum distance from `p` to the segment, always attained at an endpoint.
pub fn seg_point_max_dist(seg: Segment, p: Point) -> f64 {
    p.dist(seg.p1).max(p.dist(seg.p2))
}

/// Whether a single waypoint lies in the arm's valid configuration space.
pub fn waypoint_valid(p: Point, arm: &ArmSpec, obstacles: &[Obstacle]) -> bool {
    let r = arm.base.dist(p);
    arm.reach_min < r
        && r < arm.reach_max
        && obstacles.iter().all(|o| o.center.dist(p) > o.clearance)
}

/// Whether every waypoint of the continuous drag lies in the arm's valid
/// configuration space. Exact: uses the min/max segment distances, no sampling.
pub fn sequence_feasible(seg: Segment, arm: &ArmSpec, obstacles: &[Obstacle]) -> bool {
    seg_point_min_dist(seg, arm.base) > arm.reach_min
        && seg_point_max_dist(seg, arm.base) < arm.reach_max
        && obstacles
            .iter()
            .all(|o| seg_point_min_dist(seg, o.center) > o.clearance)
}
