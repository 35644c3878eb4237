//! In-slot planner: entry configuration candidates and the maneuver that
//! takes the car from an entry configuration to its parked pose.
//!
//! Motion inside the slot consists of maximum-steering arcs and straight
//! segments. Contact with slot sides is computed exactly: a rotating frame
//! first touches a segment either when one of its corners crosses the
//! segment or when a segment endpoint crosses one of its edges.

use crate::geom::{
    angle_diff, collides, frame, wrap_angle, Approach, CarDimensions, Configuration, ConvexPolygon, Direction,
    GeomError, ParkingSlot, SlotKind, Vec2, RIGHT_FRONT,
};
use crate::steer::{advance, Path, StepDistance};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SlotError {
    #[error("no entry configuration leads into the slot")]
    NoFeasibleEntry,
    #[error("slot kind does not match the requested planner")]
    WrongKind,
    #[error(transparent)]
    Invalid(#[from] GeomError),
}

/// Angle kept between the frame and a slot side when a move stops at contact.
const CONTACT_BACKOFF: f64 = 1e-6;
const MIN_PROGRESS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotParams {
    /// Heading discretisation of possible entry configurations.
    pub heading_step: f64,
    /// Largest heading error accepted for a parked car in a parallel slot.
    pub heading_tolerance: f64,
    /// Maximum number of backward-forward alternations after the first move.
    pub move_budget: usize,
    pub step: StepDistance,
    /// Drive-out increment for perpendicular entries.
    pub drive_out_step: f64,
    /// Final resolution of the perpendicular drive-out bisection.
    pub drive_out_tolerance: f64,
}

impl Default for SlotParams {
    fn default() -> Self {
        let step = StepDistance::default();
        Self {
            heading_step: 1f64.to_radians(),
            heading_tolerance: 2f64.to_radians(),
            move_budget: 10,
            step,
            drive_out_step: step.get() / 10.0,
            drive_out_tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryCandidate {
    pub entry: Configuration,
    pub goal: Configuration,
    pub in_slot_path: Path,
}

impl EntryCandidate {
    pub fn direction_changes(&self) -> usize {
        self.in_slot_path.direction_changes()
    }
}

/// Configuration whose right-front frame corner sits on `corner`.
fn corner_configuration(corner: Vec2, heading: f64, d: &CarDimensions) -> Configuration {
    let u = Vec2::from_angle(heading);
    let pos = corner - u * d.df + u.perp() * (d.w / 2.0);
    Configuration::new(pos.x, pos.y, heading)
}

/// Entry configurations of a parallel slot: right-front corner on `p`, heading
/// swept over a quarter turn, frame clear of the non-entry sides.
pub fn possible_entry_configurations(slot: &ParkingSlot, d: &CarDimensions, heading_step: f64) -> Vec<Configuration> {
    if !(heading_step > 0.0) {
        return Vec::new();
    }
    let sides = slot.side_obstacles();
    let n = (FRAC_PI_2 / heading_step + 1e-9).floor() as usize;
    (0..=n)
        .map(|i| corner_configuration(slot.p, slot.delta + PI + i as f64 * heading_step, d))
        .filter(|c| {
            let f = frame(c, d);
            !sides.iter().any(|s| collides(&f, s))
        })
        .collect()
}


/// Smallest rotation in `[0, limit]` (direction `dir`, +1 counter-clockwise)
/// at which `pt`, rotating about `center`, meets segment `a`-`b`.
fn circle_hits_segment(pt: Vec2, center: Vec2, dir: f64, limit: f64, a: Vec2, b: Vec2) -> Option<f64> {
    let r0 = pt - center;
    let rho2 = r0.norm_sq();
    if rho2 < 1e-24 {
        return None;
    }
    let e = b - a;
    let f = a - center;
    let qa = e.norm_sq();
    let qb = 2.0 * f.dot(e);
    let qc = f.norm_sq() - rho2;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 || qa < 1e-24 {
        return None;
    }
    let sq = disc.sqrt();
    let mut best: Option<f64> = None;
    for t in [(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)] {
        if !(-1e-12..=1.0 + 1e-12).contains(&t) {
            continue;
        }
        let x = a + e * t - center;
        let mut ang = dir * r0.cross(x).atan2(r0.dot(x));
        if ang < 0.0 {
            ang += 2.0 * PI;
        }
        if ang <= limit && best.is_none_or(|v| ang < v) {
            best = Some(ang);
        }
    }
    best
}

/// First rotation angle in `[0, limit]` at which any of the points `pts`,
/// rotating about `center` in direction `dir`, crosses one of `segments`.
pub fn corner_contact(pts: &[Vec2], center: Vec2, dir: f64, limit: f64, segments: &[(Vec2, Vec2)]) -> Option<f64> {
    pts.iter()
        .flat_map(|&p| segments.iter().filter_map(move |&(a, b)| circle_hits_segment(p, center, dir, limit, a, b)))
        .min_by(f64::total_cmp)
}

/// First rotation angle in `[0, limit]` at which the polygon `pts`, rotating
/// about `center` in direction `dir`, touches any of `segments`.
pub fn first_contact(pts: &[Vec2], center: Vec2, dir: f64, limit: f64, segments: &[(Vec2, Vec2)]) -> Option<f64> {
    let corners = corner_contact(pts, center, dir, limit, segments);
    let ends = segments
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .flat_map(|q| {
            (0..pts.len()).filter_map(move |i| circle_hits_segment(q, center, -dir, limit, pts[i], pts[(i + 1) % pts.len()]))
        })
        .min_by(f64::total_cmp);
    match (corners, ends) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

/// Maximum-steering arc: centre of rotation and rotation sign for a move.
fn arc_geometry(c: &Configuration, s: Direction, phi: f64, d: &CarDimensions) -> (f64, Vec2, f64) {
    let kappa = phi.tan() / d.b;
    let center = c.position() + c.heading().perp() * (1.0 / kappa);
    (kappa, center, (kappa * s.sign()).signum())
}

/// Appends samples of the motion from `c` over signed arc length `ds`,
/// excluding the endpoint, and returns the endpoint.
fn push_motion(out: &mut Vec<Configuration>, c: &Configuration, s: Direction, phi: f64, kappa: f64, dist: f64, step: f64) -> Configuration {
    let n = (dist / step - 1e-9).ceil().max(1.0) as usize;
    let ds = s.sign() * dist;
    for i in 0..n {
        out.push(advance(c, kappa, ds * i as f64 / n as f64).with_control(s, phi));
    }
    advance(c, kappa, ds).with_control(s, phi)
}

fn finish(mut configs: Vec<Configuration>, last: Configuration) -> Path {
    let (s, phi) = configs.last().map_or((last.s, last.phi), |c| (c.s, c.phi));
    configs.push(last.with_control(s, phi));
    Path::new(configs)
}

/// Simulates the alternating maximum-steering moves from one entry.
fn park_from(entry: &Configuration, slot: &ParkingSlot, d: &CarDimensions, params: &SlotParams) -> Option<EntryCandidate> {
    let sides = slot.sides();
    let target = slot.delta + PI;
    let r = d.min_turning_radius();
    let mut configs = Vec::new();
    let mut c = *entry;
    let mut s = Direction::Backward;
    for _ in 0..=params.move_budget {
        let phi = if s == Direction::Backward { d.phimax } else { -d.phimax };
        let (kappa, center, dir) = arc_geometry(&c, s, phi, d);
        let remaining = wrap_angle(c.theta - target).max(0.0);
        let f = frame(&c, d);
        let rot = match first_contact(f.vertices(), center, dir, remaining, &sides) {
            Some(hit) => (hit - CONTACT_BACKOFF).min(remaining),
            None => remaining,
        };
        if rot < MIN_PROGRESS {
            return None;
        }
        c = push_motion(&mut configs, &c, s, phi, kappa, rot * r, params.step.get());
        if angle_diff(c.theta, target) <= params.heading_tolerance && slot.contains_frame(&frame(&c, d), 1e-9) {
            let goal = c;
            return Some(EntryCandidate {
                entry: *entry,
                goal,
                in_slot_path: finish(configs, goal),
            });
        }
        s = s.flipped();
    }
    None
}

/// Plans parallel parking from every possible entry and keeps the candidates
/// with the fewest direction changes, cheapest first.
pub fn plan_parallel(slot: &ParkingSlot, d: &CarDimensions, params: &SlotParams) -> Result<Vec<EntryCandidate>, SlotError> {
    if slot.kind != SlotKind::Parallel {
        return Err(SlotError::WrongKind);
    }
    slot.validate(d)?;
    let r = d.min_turning_radius();
    let mut found: Vec<(usize, f64, EntryCandidate)> = possible_entry_configurations(slot, d, params.heading_step)
        .iter()
        .filter_map(|e| park_from(e, slot, d, params))
        .map(|c| (c.direction_changes(), c.in_slot_path.cost(r), c))
        .collect();
    let Some(min_changes) = found.iter().map(|f| f.0).min() else {
        return Err(SlotError::NoFeasibleEntry);
    };
    found.retain(|f| f.0 == min_changes);
    found.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(found.into_iter().map(|f| f.2).collect())
}

/// Parked pose of a perpendicular slot, centred across its width.
pub fn perpendicular_goal(slot: &ParkingSlot, d: &CarDimensions, approach: Approach) -> Configuration {
    let mid = slot.p + slot.along() * (slot.entry_length() / 2.0);
    let n = slot.inward();
    let (pos, heading) = match approach {
        Approach::Forward => (mid + n * d.dr, slot.delta + FRAC_PI_2),
        Approach::Backward => (mid + n * d.df, slot.delta - FRAC_PI_2),
    };
    Configuration::new(pos.x, pos.y, heading)
}

/// True when leaving `c` with maximum steering to either side in direction
/// `s` keeps the trailing frame corners from crossing the slot sides.
pub fn departure_clear(c: &Configuration, s: Direction, slot: &ParkingSlot, d: &CarDimensions) -> bool {
    let sides = slot.sides();
    let v = frame(c, d).vertices().to_vec();
    let trailing = match s {
        Direction::Forward => [v[0], v[3]],
        Direction::Backward => [v[1], v[2]],
    };
    [d.phimax, -d.phimax].iter().all(|&phi| {
        let (_, center, dir) = arc_geometry(c, s, phi, d);
        corner_contact(&trailing, center, dir, FRAC_PI_2, &sides).is_none()
    })
}

/// Plans perpendicular parking: the entry is the first pose on the straight
/// drive out of the slot from which a maximum-steering departure is clear.
pub fn plan_perpendicular(
    slot: &ParkingSlot,
    d: &CarDimensions,
    approach: Approach,
    params: &SlotParams,
) -> Result<EntryCandidate, SlotError> {
    if slot.kind != SlotKind::Perpendicular {
        return Err(SlotError::WrongKind);
    }
    slot.validate(d)?;
    let goal = perpendicular_goal(slot, d, approach);
    let out = match approach {
        Approach::Forward => Direction::Backward,
        Approach::Backward => Direction::Forward,
    };
    let at = |dist: f64| advance(&goal, 0.0, out.sign() * dist);
    let limit = slot.depth() + 2.0 * d.length();
    let mut lo = 0.0;
    let mut hi = None;
    let mut dist = 0.0;
    while dist <= limit {
        if departure_clear(&at(dist), out, slot, d) {
            hi = Some(dist);
            break;
        }
        lo = dist;
        dist += params.drive_out_step;
    }
    let mut hi = hi.ok_or(SlotError::NoFeasibleEntry)?;
    if hi > 0.0 {
        while hi - lo > params.drive_out_tolerance {
            let mid = 0.5 * (lo + hi);
            if departure_clear(&at(mid), out, slot, d) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    let s = out.flipped();
    let entry = at(hi).with_control(s, 0.0);
    let mut configs = Vec::new();
    let end = push_motion(&mut configs, &entry, s, 0.0, 0.0, hi, params.step.get());
    let goal = Configuration { x: goal.x, y: goal.y, theta: goal.theta, ..end };
    let in_slot_path = if hi > 0.0 { finish(configs, goal) } else { Path::single(goal) };
    Ok(EntryCandidate {
        entry: in_slot_path.configs[0],
        goal,
        in_slot_path,
    })
}

/// Entry candidates for any slot kind.
pub fn plan_slot(slot: &ParkingSlot, d: &CarDimensions, params: &SlotParams) -> Result<Vec<EntryCandidate>, SlotError> {
    match slot.kind {
        SlotKind::Parallel => plan_parallel(slot, d, params),
        SlotKind::Perpendicular => plan_perpendicular(slot, d, slot.approach, params).map(|c| vec![c]),
    }
}

/// True when no configuration of `path` touches the non-entry slot sides.
pub fn path_clear_of_sides(path: &Path, slot: &ParkingSlot, d: &CarDimensions) -> bool {
    let sides: Vec<ConvexPolygon> = slot.side_obstacles();
    path.configs.iter().all(|c| {
        let f = frame(c, d);
        !sides.iter().any(|s| collides(&f, s))
    })
}

/// Right-front corner of the frame at `c`.
pub fn right_front_corner(c: &Configuration, d: &CarDimensions) -> Vec2 {
    frame(c, d).vertices()[RIGHT_FRONT]
}
