//! Planar geometry: configurations, car frames, convex obstacles and the
//! GJK collision query every planner stage is built on.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};
use thiserror::Error;

/// Distance under which two polygons are reported as colliding. Touching counts.
const CONTACT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon has a repeated vertex at index {0}")]
    RepeatedVertex(usize),
    #[error("polygon is not strictly convex at vertex {0}")]
    NotConvex(usize),
    #[error("invalid car dimensions: {0}")]
    InvalidDimensions(&'static str),
    #[error("steering angle {phi} exceeds the limit {phi_max}")]
    SteeringOutOfRange { phi: f64, phi_max: f64 },
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(mut a: f64) -> f64 {
    if !a.is_finite() {
        return a;
    }
    if a.abs() > 64.0 * PI {
        a %= 2.0 * PI;
    }
    while a > PI {
        a -= 2.0 * PI;
    }
    while a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Absolute angular difference in [0, pi].
pub fn angle_diff(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(a: f64) -> Self {
        Self::new(a.cos(), a.sin())
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Self) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn rotate(self, a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn distance(self, o: Self) -> f64 {
        (self - o).norm()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

/// Direction of travel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Direction {
    #[default]
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }

    pub fn from_sign(v: f64) -> Self {
        if v < 0.0 {
            Direction::Backward
        } else {
            Direction::Forward
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

impl From<Direction> for i8 {
    fn from(d: Direction) -> i8 {
        match d {
            Direction::Forward => 1,
            Direction::Backward => -1,
        }
    }
}

impl TryFrom<i8> for Direction {
    type Error = String;
    fn try_from(v: i8) -> Result<Self, String> {
        match v {
            1 => Ok(Direction::Forward),
            -1 => Ok(Direction::Backward),
            _ => Err(format!("direction must be +1 or -1, got {v}")),
        }
    }
}

/// Rear-axle pose plus the control (direction, steering) applied from it.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Configuration {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub s: Direction,
    pub phi: f64,
}

impl Configuration {
    /// Pose with forward direction and straight wheels.
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
            s: Direction::Forward,
            phi: 0.0,
        }
    }

    pub fn with_control(mut self, s: Direction, phi: f64) -> Self {
        self.s = s;
        self.phi = phi;
        self
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn heading(&self) -> Vec2 {
        Vec2::from_angle(self.theta)
    }

    pub fn same_pose(&self, o: &Configuration, tol: f64) -> bool {
        (self.x - o.x).abs() <= tol && (self.y - o.y).abs() <= tol && angle_diff(self.theta, o.theta) <= tol
    }

    /// Expresses `other` in this configuration's frame: (forward, left, heading offset).
    pub fn relative(&self, other: &Configuration) -> (f64, f64, f64) {
        let d = other.position() - self.position();
        let (s, c) = self.theta.sin_cos();
        (c * d.x + s * d.y, -s * d.x + c * d.y, wrap_angle(other.theta - self.theta))
    }
}

/// Geometric and kinematic vehicle parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarDimensions {
    pub w: f64,
    pub df: f64,
    pub dr: f64,
    pub b: f64,
    pub phimax: f64,
}

impl CarDimensions {
    pub fn new(w: f64, df: f64, dr: f64, b: f64, phimax: f64) -> Result<Self, GeomError> {
        let d = Self { w, df, dr, b, phimax };
        d.validate()?;
        Ok(d)
    }

    /// Renault Zoe, the vehicle used for all computational experiments.
    pub fn zoe() -> Self {
        Self {
            w: 1.625,
            df: 3.105,
            dr: 0.655,
            b: 2.450,
            phimax: 31.4_f64.to_radians(),
        }
    }

    pub fn validate(&self) -> Result<(), GeomError> {
        let lengths = [self.w, self.df, self.dr, self.b];
        if lengths.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(GeomError::InvalidDimensions("lengths must be positive"));
        }
        if !(self.phimax > 0.0 && self.phimax < PI / 2.0) {
            return Err(GeomError::InvalidDimensions("phimax must lie in (0, pi/2)"));
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.df + self.dr
    }

    pub fn min_turning_radius(&self) -> f64 {
        self.b / self.phimax.tan()
    }

    /// Curb-to-curb turning circle diameter.
    pub fn turning_circle_diameter(&self) -> f64 {
        let r = self.min_turning_radius() + self.w / 2.0;
        2.0 * (r * r + self.b * self.b).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec2,
    pub max: Vec2,
}

impl Aabb {
    pub fn of(points: &[Vec2]) -> Self {
        let mut min = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        Self { min, max }
    }

    pub fn overlaps(&self, o: &Aabb) -> bool {
        self.min.x <= o.max.x + CONTACT_TOLERANCE
            && o.min.x <= self.max.x + CONTACT_TOLERANCE
            && self.min.y <= o.max.y + CONTACT_TOLERANCE
            && o.min.y <= self.max.y + CONTACT_TOLERANCE
    }
}

/// Strictly convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<Vec2>,
    aabb: Aabb,
}

impl ConvexPolygon {
    /// Validates convexity. Clockwise input is reordered to counter-clockwise.
    pub fn new(mut vertices: Vec<Vec2>) -> Result<Self, GeomError> {
        let n = vertices.len();
        if n < 3 {
            return Err(GeomError::TooFewVertices(n));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if vertices[i].distance(vertices[j]) < 1e-12 {
                    return Err(GeomError::RepeatedVertex(j));
                }
            }
        }
        let area2: f64 = (0..n).map(|i| vertices[i].cross(vertices[(i + 1) % n])).sum();
        if area2 < 0.0 {
            vertices.reverse();
        }
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            if (b - a).cross(c - b) <= 0.0 {
                return Err(GeomError::NotConvex((i + 1) % n));
            }
        }
        // A star polygon passes the local turn test but winds more than once.
        let turning: f64 = (0..n)
            .map(|i| {
                let a = vertices[i];
                let b = vertices[(i + 1) % n];
                let c = vertices[(i + 2) % n];
                let e1 = b - a;
                let e2 = c - b;
                e1.cross(e2).atan2(e1.dot(e2))
            })
            .sum();
        if (turning - 2.0 * PI).abs() > 1e-6 {
            return Err(GeomError::NotConvex(0));
        }
        let aabb = Aabb::of(&vertices);
        Ok(Self { vertices, aabb })
    }

    /// Rectangle from its center, heading of the long axis and full extents.
    pub fn rectangle(center: Vec2, heading: f64, length: f64, width: f64) -> Self {
        let u = Vec2::from_angle(heading);
        let v = u.perp();
        let (hl, hw) = (length / 2.0, width / 2.0);
        let vertices = vec![
            center - u * hl - v * hw,
            center + u * hl - v * hw,
            center + u * hl + v * hw,
            center - u * hl + v * hw,
        ];
        let aabb = Aabb::of(&vertices);
        Self { vertices, aabb }
    }

    pub fn axis_aligned(min: Vec2, max: Vec2) -> Self {
        Self::rectangle((min + max) * 0.5, 0.0, max.x - min.x, max.y - min.y)
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn aabb(&self) -> &Aabb {
        &self.aabb
    }

    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        0.5 * (0..n)
            .map(|i| self.vertices[i].cross(self.vertices[(i + 1) % n]))
            .sum::<f64>()
    }

    pub fn centroid(&self) -> Vec2 {
        let n = self.vertices.len() as f64;
        self.vertices.iter().fold(Vec2::default(), |acc, p| acc + *p) * (1.0 / n)
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Point containment, boundary included within `tol`.
    pub fn contains(&self, p: Vec2, tol: f64) -> bool {
        self.edges().all(|(a, b)| {
            let e = b - a;
            e.cross(p - a) >= -tol * e.norm()
        })
    }

    fn support(&self, d: Vec2) -> Vec2 {
        let mut best = self.vertices[0];
        let mut best_dot = best.dot(d);
        for &v in &self.vertices[1..] {
            let dv = v.dot(d);
            if dv > best_dot {
                best = v;
                best_dot = dv;
            }
        }
        best
    }
}

/// Separation distance between two convex polygons via GJK; zero when they overlap.
pub fn gjk_distance(a: &ConvexPolygon, b: &ConvexPolygon) -> f64 {
    let support = |d: Vec2| a.support(d) - b.support(-d);
    let mut v = a.vertices[0] - b.vertices[0];
    let mut simplex: Vec<Vec2> = Vec::with_capacity(3);
    simplex.push(v);
    for _ in 0..64 {
        let vv = v.norm_sq();
        if vv <= 1e-24 {
            return 0.0;
        }
        let w = support(-v);
        // No further progress toward the origin: v is the closest point.
        if vv - v.dot(w) <= 1e-12 * vv.max(1e-12) {
            return vv.sqrt();
        }
        if simplex.iter().any(|p| (*p - w).norm_sq() <= 1e-24) {
            return vv.sqrt();
        }
        simplex.push(w);
        let (closest, reduced) = closest_on_simplex(&simplex);
        if reduced.len() == 3 {
            return 0.0;
        }
        simplex = reduced;
        v = closest;
    }
    v.norm()
}

/// Closest point to the origin on a 1-, 2- or 3-point simplex, plus the
/// minimal supporting subset. A full 3-point result means the origin is inside.
fn closest_on_simplex(s: &[Vec2]) -> (Vec2, Vec<Vec2>) {
    match s.len() {
        1 => (s[0], vec![s[0]]),
        2 => closest_on_segment(s[0], s[1]),
        _ => {
            let (a, b, c) = (s[0], s[1], s[2]);
            let area = (b - a).cross(c - a);
            if area.abs() > 1e-18 {
                let sign = area.signum();
                let inside = sign * (b - a).cross(-a) >= 0.0
                    && sign * (c - b).cross(-b) >= 0.0
                    && sign * (a - c).cross(-c) >= 0.0;
                if inside {
                    return (Vec2::default(), vec![a, b, c]);
                }
            }
            let mut best = closest_on_segment(a, b);
            for cand in [closest_on_segment(b, c), closest_on_segment(a, c)] {
                if cand.0.norm_sq() < best.0.norm_sq() {
                    best = cand;
                }
            }
            best
        }
    }
}

fn closest_on_segment(a: Vec2, b: Vec2) -> (Vec2, Vec<Vec2>) {
    let ab = b - a;
    let len2 = ab.norm_sq();
    if len2 <= 1e-24 {
        return (a, vec![a]);
    }
    let t = (-a).dot(ab) / len2;
    if t <= 0.0 {
        (a, vec![a])
    } else if t >= 1.0 {
        (b, vec![b])
    } else {
        (a + ab * t, vec![a, b])
    }
}

/// True iff the polygons overlap or touch.
pub fn collides(a: &ConvexPolygon, b: &ConvexPolygon) -> bool {
    if !a.aabb.overlaps(&b.aabb) {
        return false;
    }
    gjk_distance(a, b) <= CONTACT_TOLERANCE
}

/// Car frame rectangle for a configuration.
pub fn frame(c: &Configuration, d: &CarDimensions) -> ConvexPolygon {
    let u = c.heading();
    let v = u.perp();
    let p = c.position();
    let hw = d.w / 2.0;
    let vertices = vec![
        p - u * d.dr - v * hw,
        p + u * d.df - v * hw,
        p + u * d.df + v * hw,
        p - u * d.dr + v * hw,
    ];
    let aabb = Aabb::of(&vertices);
    ConvexPolygon { vertices, aabb }
}

pub fn configuration_collides(c: &Configuration, d: &CarDimensions, obstacles: &[ConvexPolygon]) -> bool {
    if obstacles.is_empty() {
        return false;
    }
    let f = frame(c, d);
    obstacles.iter().any(|o| collides(&f, o))
}

/// Index of the right-front corner in [`frame`] vertices.
pub const RIGHT_FRONT: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotKind {
    #[default]
    Parallel,
    Perpendicular,
}

/// Which way the car faces once parked in a perpendicular slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approach {
    Forward,
    #[default]
    Backward,
}

/// Rectangular parking slot. The entry side starts at `p` and runs along
/// `delta`; the slot interior lies to its left. Parallel slots are entered
/// through a long side, perpendicular slots through a short one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParkingSlot {
    pub p: Vec2,
    pub delta: f64,
    pub width: f64,
    pub length: f64,
    pub kind: SlotKind,
    #[serde(default)]
    pub approach: Approach,
}

/// Thickness of the obstacles standing in for slot sides.
pub const SIDE_THICKNESS: f64 = 1e-3;
/// Gap left between `p` and the side that starts there, so an entry whose
/// corner sits exactly on `p` is not reported as touching it.
pub const SIDE_TRIM: f64 = 1e-6;

impl ParkingSlot {
    pub fn new(p: Vec2, delta: f64, width: f64, length: f64, kind: SlotKind) -> Self {
        Self {
            p,
            delta: wrap_angle(delta),
            width,
            length,
            kind,
            approach: Approach::default(),
        }
    }

    pub fn with_approach(mut self, approach: Approach) -> Self {
        self.approach = approach;
        self
    }

    /// Length of the entry side.
    pub fn entry_length(&self) -> f64 {
        match self.kind {
            SlotKind::Parallel => self.length,
            SlotKind::Perpendicular => self.width,
        }
    }

    /// Extent of the slot away from the entry side.
    pub fn depth(&self) -> f64 {
        match self.kind {
            SlotKind::Parallel => self.width,
            SlotKind::Perpendicular => self.length,
        }
    }

    /// Unit vector along the entry side.
    pub fn along(&self) -> Vec2 {
        Vec2::from_angle(self.delta)
    }

    /// Unit vector pointing from the entry side into the slot.
    pub fn inward(&self) -> Vec2 {
        self.along().perp()
    }

    pub fn entry_side(&self) -> (Vec2, Vec2) {
        (self.p, self.p + self.along() * self.entry_length())
    }

    pub fn corners(&self) -> [Vec2; 4] {
        let (a, b) = self.entry_side();
        let n = self.inward() * self.depth();
        [a, b, b + n, a + n]
    }

    pub fn rectangle(&self) -> ConvexPolygon {
        let vertices = self.corners().to_vec();
        let aabb = Aabb::of(&vertices);
        ConvexPolygon { vertices, aabb }
    }

    /// The three non-entry sides as segments, in order: the side starting at
    /// `p`, the far side, and the side at the other end of the entry side.
    pub fn sides(&self) -> [(Vec2, Vec2); 3] {
        let [a, b, c, d] = self.corners();
        let n = self.inward();
        [(a + n * SIDE_TRIM, d), (d, c), (c, b + n * SIDE_TRIM)]
    }

    /// Non-entry sides as thin rectangles just outside the slot.
    pub fn side_obstacles(&self) -> Vec<ConvexPolygon> {
        self.sides()
            .iter()
            .map(|&(a, b)| {
                let e = b - a;
                let out = e.perp() * (SIDE_THICKNESS / e.norm());
                ConvexPolygon::new(vec![a, a + out, b + out, b]).expect("side rectangle")
            })
            .collect()
    }

    /// True when the whole frame lies within the slot rectangle.
    pub fn contains_frame(&self, f: &ConvexPolygon, tol: f64) -> bool {
        let r = self.rectangle();
        f.vertices().iter().all(|v| r.contains(*v, tol))
    }

    pub fn validate(&self, d: &CarDimensions) -> Result<(), GeomError> {
        if !(self.width > d.w) {
            return Err(GeomError::InvalidDimensions("slot width must exceed car width"));
        }
        if !(self.length >= d.df + d.dr) {
            return Err(GeomError::InvalidDimensions("slot length must admit the car"));
        }
        Ok(())
    }
}
