//! Motion kernel: the discrete kinematic model, Reeds-Shepp optimal curves
//! and the sampled [`Path`] representation shared by every planner stage.
//!
//! The Reeds-Shepp solver enumerates the CSC, CCC, CCCC, CCSC and CCSCC word
//! families together with their time-flip, reflection and backwards variants,
//! working in coordinates normalised by the minimum turning radius.

use crate::geom::{wrap_angle, CarDimensions, Configuration, Direction, GeomError};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// Default distance between consecutive path configurations, in meters.
pub const DEFAULT_STEP: f64 = 0.5;

const ZERO: f64 = 1e-10;
const MIN_SEGMENT: f64 = 1e-10;

/// Positive arc-length spacing between path configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDistance(f64);

impl StepDistance {
    pub fn new(delta: f64) -> Option<Self> {
        (delta.is_finite() && delta > 0.0).then_some(Self(delta))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for StepDistance {
    fn default() -> Self {
        Self(DEFAULT_STEP)
    }
}

/// One step of the discrete kinematic model.
pub fn kinematic_step(
    c: &Configuration,
    s: Direction,
    phi: f64,
    delta: f64,
    d: &CarDimensions,
) -> Result<Configuration, GeomError> {
    if phi.abs() > d.phimax + 1e-12 {
        return Err(GeomError::SteeringOutOfRange { phi, phi_max: d.phimax });
    }
    let ds = s.sign() * delta;
    Ok(Configuration {
        x: c.x + ds * c.theta.cos(),
        y: c.y + ds * c.theta.sin(),
        theta: wrap_angle(c.theta + ds / d.b * phi.tan()),
        s,
        phi,
    })
}

/// Exact motion along a circle of signed curvature `kappa` (zero for a
/// straight line) for a signed arc length `ds`.
pub fn advance(c: &Configuration, kappa: f64, ds: f64) -> Configuration {
    let mut out = *c;
    if kappa.abs() < 1e-12 {
        out.x += ds * c.theta.cos();
        out.y += ds * c.theta.sin();
    } else {
        let dth = kappa * ds;
        let r = 1.0 / kappa;
        out.x += r * ((c.theta + dth).sin() - c.theta.sin());
        out.y -= r * ((c.theta + dth).cos() - c.theta.cos());
        out.theta = wrap_angle(c.theta + dth);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SegmentKind {
    Left,
    Right,
    Straight,
}

impl SegmentKind {
    fn curvature_sign(self) -> f64 {
        match self {
            SegmentKind::Left => 1.0,
            SegmentKind::Right => -1.0,
            SegmentKind::Straight => 0.0,
        }
    }
}

/// One piece of a Reeds-Shepp curve. `length` is signed: negative means reverse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsSegment {
    pub kind: SegmentKind,
    pub length: f64,
}

impl RsSegment {
    pub fn direction(&self) -> Direction {
        Direction::from_sign(self.length)
    }
}

use SegmentKind::{Left as L, Right as R, Straight as S};

const WORDS: [[Option<SegmentKind>; 5]; 18] = [
    [Some(L), Some(R), Some(L), None, None],
    [Some(R), Some(L), Some(R), None, None],
    [Some(L), Some(R), Some(L), Some(R), None],
    [Some(R), Some(L), Some(R), Some(L), None],
    [Some(L), Some(R), Some(S), Some(L), None],
    [Some(R), Some(L), Some(S), Some(R), None],
    [Some(L), Some(S), Some(R), Some(L), None],
    [Some(R), Some(S), Some(L), Some(R), None],
    [Some(L), Some(R), Some(S), Some(R), None],
    [Some(R), Some(L), Some(S), Some(L), None],
    [Some(R), Some(S), Some(R), Some(L), None],
    [Some(L), Some(S), Some(L), Some(R), None],
    [Some(L), Some(S), Some(R), None, None],
    [Some(R), Some(S), Some(L), None, None],
    [Some(L), Some(S), Some(L), None, None],
    [Some(R), Some(S), Some(R), None, None],
    [Some(L), Some(R), Some(S), Some(L), Some(R)],
    [Some(R), Some(L), Some(S), Some(R), Some(L)],
];

/// Best word found so far, lengths normalised by the turning radius.
#[derive(Debug, Clone, Copy)]
struct Word {
    word: usize,
    lengths: [f64; 5],
    total: f64,
}

impl Word {
    fn none() -> Self {
        Self {
            word: 0,
            lengths: [0.0; 5],
            total: f64::INFINITY,
        }
    }

    fn offer(&mut self, word: usize, lengths: &[f64]) {
        let total: f64 = lengths.iter().map(|v| v.abs()).sum();
        // Strict comparison keeps the first family on ties.
        if total < self.total {
            self.word = word;
            self.lengths = [0.0; 5];
            self.lengths[..lengths.len()].copy_from_slice(lengths);
            self.total = total;
        }
    }
}

fn mod2pi(x: f64) -> f64 {
    let v = x % (2.0 * PI);
    if v < -PI {
        v + 2.0 * PI
    } else if v > PI {
        v - 2.0 * PI
    } else {
        v
    }
}

fn polar(x: f64, y: f64) -> (f64, f64) {
    ((x * x + y * y).sqrt(), y.atan2(x))
}

fn tau_omega(u: f64, v: f64, xi: f64, eta: f64, phi: f64) -> (f64, f64) {
    let delta = mod2pi(u - v);
    let a = u.sin() - delta.sin();
    let b = u.cos() - delta.cos() - 1.0;
    let t1 = (eta * a - xi * b).atan2(xi * a + eta * b);
    let t2 = 2.0 * (delta.cos() - v.cos() - u.cos()) + 3.0;
    let tau = if t2 < 0.0 { mod2pi(t1 + PI) } else { mod2pi(t1) };
    (tau, mod2pi(tau - u + v - phi))
}

fn lp_sp_lp(x: f64, y: f64, phi: f64) -> Option<(f64, f64, f64)> {
    let (u, t) = polar(x - phi.sin(), y - 1.0 + phi.cos());
    if t >= -ZERO {
        let v = mod2pi(phi - t);
        if v >= -ZERO {
            return Some((t, u, v));
        }
    }
    None
}

fn lp_sp_rp(x: f64, y: f64, phi: f64) -> Option<(f64, f64, f64)> {
    let (u1, t1) = polar(x + phi.sin(), y - 1.0 - phi.cos());
    let u1 = u1 * u1;
    if u1 >= 4.0 {
        let u = (u1 - 4.0).sqrt();
        let theta = 2.0_f64.atan2(u);
        let t = mod2pi(t1 + theta);
        let v = mod2pi(t - phi);
        if t >= -ZERO && v >= -ZERO {
            return Some((t, u, v));
        }
    }
    None
}

fn lp_rm_l(x: f64, y: f64, phi: f64) -> Option<(f64, f64, f64)> {
    let (u1, theta) = polar(x - phi.sin(), y - 1.0 + phi.cos());
    if u1 <= 4.0 {
        let u = -2.0 * (0.25 * u1).asin();
        let t = mod2pi(theta + 0.5 * u + PI);
        let v = mod2pi(phi - t + u);
        if t >= -ZERO && u <= ZERO {
            return Some((t, u, v));
        }
    }
    None
}

fn lp_rup_lum_rm(x: f64, y: f64, phi: f64) -> Option<(f64, f64, f64)> {
    let xi = x + phi.sin();
    let eta = y - 1.0 - phi.cos();
    let rho = 0.25 * (2.0 + (xi * xi + eta * eta).sqrt());
    if rho <= 1.0 {
        let u = rho.acos();
        let (t, v) = tau_omega(u, -u, xi, eta, phi);
        if t >= -ZERO && v <= ZERO {
            return Some((t, u, v));
        }
    }
    None
}

fn lp_rum_lum_rp(x: f64, y: f64, phi: f64) -> Option<(f64, f64, f64)> {
    let xi = x + phi.sin();
    let eta = y - 1.0 - phi.cos();
    let rho = (20.0 - xi * xi - eta * eta) / 16.0;
    if (0.0..=1.0).contains(&rho) {
        let u = -rho.acos();
        if u >= -0.5 * PI {
            let (t, v) = tau_omega(u, u, xi, eta, phi);
            if t >= -ZERO && v >= -ZERO {
                return Some((t, u, v));
            }
        }
    }
    None
}

fn lp_rm_sm_lm(x: f64, y: f64, phi: f64) -> Option<(f64, f64, f64)> {
    let (rho, theta) = polar(x - phi.sin(), y - 1.0 + phi.cos());
    if rho >= 2.0 {
        let r = (rho * rho - 4.0).sqrt();
        let u = 2.0 - r;
        let t = mod2pi(theta + r.atan2(-2.0));
        let v = mod2pi(phi - 0.5 * PI - t);
        if t >= -ZERO && u <= ZERO && v <= ZERO {
            return Some((t, u, v));
        }
    }
    None
}

fn lp_rm_sm_rm(x: f64, y: f64, phi: f64) -> Option<(f64, f64, f64)> {
    let xi = x + phi.sin();
    let eta = y - 1.0 - phi.cos();
    let (rho, theta) = polar(-eta, xi);
    if rho >= 2.0 {
        let t = theta;
        let u = 2.0 - rho;
        let v = mod2pi(t + 0.5 * PI - phi);
        if t >= -ZERO && u <= ZERO && v <= ZERO {
            return Some((t, u, v));
        }
    }
    None
}

fn lp_rm_s_lm_rp(x: f64, y: f64, phi: f64) -> Option<(f64, f64, f64)> {
    let xi = x + phi.sin();
    let eta = y - 1.0 - phi.cos();
    let (rho, _) = polar(xi, eta);
    if rho >= 2.0 {
        let u = 4.0 - (rho * rho - 4.0).sqrt();
        if u <= ZERO {
            let t = mod2pi(((4.0 - u) * xi - 2.0 * eta).atan2(-2.0 * xi + (u - 4.0) * eta));
            let v = mod2pi(t - phi);
            if t >= -ZERO && v >= -ZERO {
                return Some((t, u, v));
            }
        }
    }
    None
}

type Formula = fn(f64, f64, f64) -> Option<(f64, f64, f64)>;

/// Tries a formula on the base pose and its time-flip, reflection and
/// combined variants. `build` maps (t, u, v) and the time-flip sign to the
/// segment lengths.
fn try_variants(
    best: &mut Word,
    (x, y, phi): (f64, f64, f64),
    f: Formula,
    words: (usize, usize),
    build: impl Fn(f64, f64, f64, f64) -> [f64; 5],
    n: usize,
) {
    if let Some((t, u, v)) = f(x, y, phi) {
        best.offer(words.0, &build(t, u, v, 1.0)[..n]);
    }
    if let Some((t, u, v)) = f(-x, y, -phi) {
        best.offer(words.0, &build(t, u, v, -1.0)[..n]);
    }
    if let Some((t, u, v)) = f(x, -y, -phi) {
        best.offer(words.1, &build(t, u, v, 1.0)[..n]);
    }
    if let Some((t, u, v)) = f(-x, -y, phi) {
        best.offer(words.1, &build(t, u, v, -1.0)[..n]);
    }
}

fn backwards(x: f64, y: f64, phi: f64) -> (f64, f64, f64) {
    (x * phi.cos() + y * phi.sin(), x * phi.sin() - y * phi.cos(), phi)
}

fn csc(best: &mut Word, p: (f64, f64, f64)) {
    let b = |t: f64, u: f64, v: f64, k: f64| [k * t, k * u, k * v, 0.0, 0.0];
    try_variants(best, p, lp_sp_lp, (14, 15), b, 3);
    try_variants(best, p, lp_sp_rp, (12, 13), b, 3);
}

fn ccc(best: &mut Word, p: (f64, f64, f64)) {
    try_variants(best, p, lp_rm_l, (0, 1), |t, u, v, k| [k * t, k * u, k * v, 0.0, 0.0], 3);
    let pb = backwards(p.0, p.1, p.2);
    try_variants(best, pb, lp_rm_l, (0, 1), |t, u, v, k| [k * v, k * u, k * t, 0.0, 0.0], 3);
}

fn cccc(best: &mut Word, p: (f64, f64, f64)) {
    try_variants(best, p, lp_rup_lum_rm, (2, 3), |t, u, v, k| [k * t, k * u, -k * u, k * v, 0.0], 4);
    try_variants(best, p, lp_rum_lum_rp, (2, 3), |t, u, v, k| [k * t, k * u, k * u, k * v, 0.0], 4);
}

fn ccsc(best: &mut Word, p: (f64, f64, f64)) {
    let fwd = |t: f64, u: f64, v: f64, k: f64| [k * t, -k * FRAC_PI_2, k * u, k * v, 0.0];
    try_variants(best, p, lp_rm_sm_lm, (4, 5), fwd, 4);
    try_variants(best, p, lp_rm_sm_rm, (8, 9), fwd, 4);
    let pb = backwards(p.0, p.1, p.2);
    let bwd = |t: f64, u: f64, v: f64, k: f64| [k * v, k * u, -k * FRAC_PI_2, k * t, 0.0];
    try_variants(best, pb, lp_rm_sm_lm, (6, 7), bwd, 4);
    try_variants(best, pb, lp_rm_sm_rm, (10, 11), bwd, 4);
}

fn ccscc(best: &mut Word, p: (f64, f64, f64)) {
    let b = |t: f64, u: f64, v: f64, k: f64| [k * t, -k * FRAC_PI_2, k * u, -k * FRAC_PI_2, k * v];
    try_variants(best, p, lp_rm_s_lm_rp, (16, 17), b, 5);
}

/// Shortest Reeds-Shepp curve between two poses for a given turning radius.
#[derive(Debug, Clone, PartialEq)]
pub struct RsCurve {
    pub start: Configuration,
    pub r_min: f64,
    pub segments: Vec<RsSegment>,
}

impl RsCurve {
    pub fn length(&self) -> f64 {
        self.segments.iter().map(|s| s.length.abs()).sum()
    }

    /// Number of direction reversals inside the curve.
    pub fn cusps(&self) -> usize {
        self.segments
            .windows(2)
            .filter(|w| w[0].direction() != w[1].direction())
            .count()
    }

    pub fn end(&self) -> Configuration {
        self.segments.iter().fold(self.start, |c, s| {
            advance(&c, s.kind.curvature_sign() / self.r_min, s.length)
        })
    }
}

fn solve(c1: &Configuration, c2: &Configuration, r_min: f64) -> Word {
    let (lx, ly, dth) = c1.relative(c2);
    let p = (lx / r_min, ly / r_min, dth);
    let mut best = Word::none();
    csc(&mut best, p);
    ccc(&mut best, p);
    cccc(&mut best, p);
    ccsc(&mut best, p);
    ccscc(&mut best, p);
    best
}

/// Length of the shortest Reeds-Shepp curve between the poses of `c1` and `c2`.
pub fn rs_cost(c1: &Configuration, c2: &Configuration, r_min: f64) -> f64 {
    if c1.same_pose(c2, 0.0) {
        return 0.0;
    }
    solve(c1, c2, r_min).total * r_min
}

pub fn rs_curve(c1: &Configuration, c2: &Configuration, r_min: f64) -> RsCurve {
    let best = solve(c1, c2, r_min);
    let segments = WORDS[best.word]
        .iter()
        .zip(best.lengths)
        .filter_map(|(k, len)| k.map(|kind| RsSegment { kind, length: len * r_min }))
        .filter(|s| s.length.abs() > MIN_SEGMENT)
        .collect();
    RsCurve {
        start: *c1,
        r_min,
        segments,
    }
}

/// Samples the optimal curve from `c1` to `c2` so consecutive configurations
/// are at most `delta` apart in arc length. Every segment boundary, cusps
/// included, is a sample, and each configuration carries the control that
/// drives it to the next one. Both endpoints are always present.
pub fn rs_sample(c1: &Configuration, c2: &Configuration, d: &CarDimensions, delta: StepDistance) -> Path {
    let curve = rs_curve(c1, c2, d.min_turning_radius());
    sample_curve(&curve, c2, d, delta)
}

pub(crate) fn sample_curve(curve: &RsCurve, goal: &Configuration, d: &CarDimensions, delta: StepDistance) -> Path {
    let mut configs = Vec::new();
    let mut cur = curve.start;
    for seg in &curve.segments {
        let s = seg.direction();
        let phi = seg.kind.curvature_sign() * d.phimax;
        let kappa = seg.kind.curvature_sign() / curve.r_min;
        let n = (seg.length.abs() / delta.get() - 1e-9).ceil().max(1.0) as usize;
        let step = seg.length / n as f64;
        let seg_start = cur;
        for i in 0..n {
            let mut c = advance(&seg_start, kappa, step * i as f64);
            c.s = s;
            c.phi = phi;
            configs.push(c);
        }
        cur = advance(&seg_start, kappa, seg.length);
    }
    let (s, phi) = configs.last().map_or((c1_dir(curve), 0.0), |c| (c.s, c.phi));
    let mut last = *goal;
    last.s = s;
    last.phi = phi;
    configs.push(last);
    if let Some(first) = configs.first_mut() {
        first.x = curve.start.x;
        first.y = curve.start.y;
        first.theta = curve.start.theta;
    }
    Path { configs }
}

fn c1_dir(curve: &RsCurve) -> Direction {
    curve.start.s
}

/// Ordered configurations; each carries the control leading to its successor
/// and the last one repeats the control that reached it.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Path {
    pub configs: Vec<Configuration>,
}

impl Path {
    pub fn new(configs: Vec<Configuration>) -> Self {
        Self { configs }
    }

    pub fn single(c: Configuration) -> Self {
        Self { configs: vec![c] }
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn first(&self) -> Option<&Configuration> {
        self.configs.first()
    }

    pub fn last(&self) -> Option<&Configuration> {
        self.configs.last()
    }

    /// Sum of Reeds-Shepp lengths between consecutive configurations.
    pub fn cost(&self, r_min: f64) -> f64 {
        self.configs.windows(2).map(|w| rs_cost(&w[0], &w[1], r_min)).sum()
    }

    /// Cumulative direction changes up to and including each configuration.
    pub fn cumulative_direction_changes(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.configs.len());
        let mut count = 0;
        for (i, c) in self.configs.iter().enumerate() {
            if i > 0 && self.configs[i - 1].s != c.s {
                count += 1;
            }
            out.push(count);
        }
        out
    }

    pub fn direction_changes(&self) -> usize {
        self.cumulative_direction_changes().last().copied().unwrap_or(0)
    }

    /// Same poses in reverse order. Each configuration takes the control of
    /// the original step it now undoes, with the direction inverted.
    pub fn reversed(&self) -> Path {
        let n = self.configs.len();
        let mut configs: Vec<Configuration> = self.configs.iter().rev().copied().collect();
        for (k, c) in configs.iter_mut().take(n.saturating_sub(1)).enumerate() {
            let src = &self.configs[n - 2 - k];
            c.s = src.s.flipped();
            c.phi = src.phi;
        }
        if n >= 2 {
            configs[n - 1].s = configs[n - 2].s;
            configs[n - 1].phi = configs[n - 2].phi;
        }
        Path { configs }
    }

    /// Appends `other`, whose first configuration must coincide with our last.
    /// The shared configuration takes the control of `other`.
    pub fn join(&mut self, other: &Path) {
        if other.configs.is_empty() {
            return;
        }
        if self.configs.is_empty() {
            self.configs.extend_from_slice(&other.configs);
            return;
        }
        self.configs.pop();
        self.configs.extend_from_slice(&other.configs);
    }
}

/// Planner-level cost that may be infinite when no path exists.
pub fn optional_cost(p: Option<&Path>, r_min: f64) -> f64 {
    p.map_or(f64::INFINITY, |p| p.cost(r_min))
}
