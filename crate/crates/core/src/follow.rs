//! Simulated execution of a planned path by longitudinal and lateral
//! P controllers driving the kinematic car model.

use crate::geom::{wrap_angle, CarDimensions, Configuration, Direction};
use crate::steer::{advance, Path};
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

/// Arcs around an inflection must both be longer than this to split there.
pub const INFLECTION_SPLIT: f64 = 1.0;
/// Cross-track error that aborts a simulation.
pub const DIVERGENCE_LIMIT: f64 = 2.0;
/// Speed used to finish a segment the profile left short.
const CREEP_SPEED: f64 = 0.05;
const SEGMENT_TIMEOUT: f64 = 60.0;

#[derive(Debug, Error, PartialEq)]
pub enum FollowError {
    #[error("invalid follower parameter: {0}")]
    InvalidParams(&'static str),
    #[error("path has fewer than two configurations")]
    EmptyPath,
    #[error("cross-track error {error:.3} m exceeded the limit at t = {time:.2} s")]
    Diverged { time: f64, error: f64 },
    #[error("segment {0} did not finish")]
    Stalled(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FollowerParams {
    pub p_v: f64,
    pub p_theta: f64,
    /// Heading correction per meter of cross-track error, rad/m.
    pub p_lat: f64,
    pub v_max: f64,
    pub a_max: f64,
    pub control_rate: f64,
    pub steer_rate_limit: f64,
    /// Time constant of the lag between demanded and actual acceleration.
    pub actuation_delay: f64,
}

impl Default for FollowerParams {
    fn default() -> Self {
        Self {
            p_v: 1.0,
            p_theta: 1.5,
            p_lat: 0.25,
            v_max: 1.5,
            a_max: 0.5,
            control_rate: 50.0,
            steer_rate_limit: 0.6,
            actuation_delay: 0.0,
        }
    }
}

impl FollowerParams {
    pub fn validate(&self) -> Result<(), FollowError> {
        let positive = [self.v_max, self.a_max, self.control_rate, self.steer_rate_limit];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(FollowError::InvalidParams("speeds, rates and limits must be positive"));
        }
        if !(self.p_v >= 0.0 && self.p_theta >= 0.0 && self.p_lat >= 0.0 && self.actuation_delay >= 0.0) {
            return Err(FollowError::InvalidParams("gains and delay must be non-negative"));
        }
        Ok(())
    }
}

/// Trapezoidal speed profile over a segment of length `length`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Profile {
    pub length: f64,
    pub v_peak: f64,
    pub a: f64,
}

impl Profile {
    pub fn new(length: f64, v_max: f64, a_max: f64) -> Self {
        let v_peak = v_max.min((a_max * length).sqrt());
        Self { length, v_peak, a: a_max }
    }

    fn ramp(&self) -> f64 {
        self.v_peak / self.a
    }

    fn cruise(&self) -> f64 {
        if self.v_peak > 0.0 {
            (self.length - self.v_peak * self.ramp()) / self.v_peak
        } else {
            0.0
        }
    }

    /// Reference speed when `s` metres have been covered.
    pub fn speed_at(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, self.length);
        self.v_peak.min((2.0 * self.a * s).sqrt()).min((2.0 * self.a * (self.length - s)).sqrt())
    }

    pub fn duration(&self) -> f64 {
        2.0 * self.ramp() + self.cruise()
    }

    /// Reference (distance, speed, acceleration) at time `t`.
    pub fn at(&self, t: f64) -> (f64, f64, f64) {
        let (tr, tc) = (self.ramp(), self.cruise());
        let t = t.clamp(0.0, self.duration());
        if t < tr {
            (0.5 * self.a * t * t, self.a * t, self.a)
        } else if t < tr + tc {
            (0.5 * self.v_peak * tr + self.v_peak * (t - tr), self.v_peak, 0.0)
        } else {
            let u = (2.0 * tr + tc - t).max(0.0);
            (self.length - 0.5 * self.a * u * u, self.a * u, if u > 0.0 { -self.a } else { 0.0 })
        }
    }
}

/// Part of a path driven without stopping.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub direction: Direction,
    configs: Vec<Configuration>,
    stations: Vec<f64>,
    kappa: Vec<f64>,
    pub profile: Profile,
    rate: f64,
    /// Heading the shaped steering gains over the reference, every `SHIFT_STEP`.
    shift: Vec<f64>,
}

const SHIFT_STEP: f64 = 0.01;

impl Segment {
    fn new(configs: Vec<Configuration>, d: &CarDimensions, p: &FollowerParams) -> Self {
        let kappa: Vec<f64> = configs.iter().map(|c| c.phi.tan() / d.b).collect();
        let mut stations = vec![0.0];
        for (w, k) in configs.windows(2).zip(&kappa) {
            let len = step_length(&w[0], &w[1], *k);
            stations.push(stations.last().copied().unwrap_or(0.0) + len);
        }
        let length = *stations.last().unwrap_or(&0.0);
        let mut seg = Self {
            direction: configs[0].s,
            configs,
            stations,
            kappa,
            profile: Profile::new(length, p.v_max, p.a_max),
            rate: p.steer_rate_limit,
            shift: vec![0.0],
        };
        let n = (length / SHIFT_STEP).ceil() as usize;
        for i in 0..n {
            let (s0, s1) = (i as f64 * SHIFT_STEP, ((i + 1) as f64 * SHIFT_STEP).min(length));
            let mid = 0.5 * (s0 + s1);
            let gain = (seg.feedforward(mid).tan() / d.b - seg.kappa[seg.index(mid)]) * (s1 - s0);
            let last = seg.shift[i];
            seg.shift.push(last + gain);
        }
        seg
    }

    pub fn length(&self) -> f64 {
        self.profile.length
    }

    pub fn start(&self) -> Configuration {
        self.configs[0]
    }

    pub fn end(&self) -> Configuration {
        *self.configs.last().expect("non-empty")
    }

    fn index(&self, l: f64) -> usize {
        self.stations.partition_point(|&s| s <= l).saturating_sub(1).min(self.configs.len() - 1)
    }

    /// Reference pose and steering angle after travelling `l` along the segment.
    pub fn lookup(&self, l: f64) -> (Configuration, f64) {
        let l = l.clamp(0.0, self.length());
        let k = self.index(l);
        let c = self.configs[k];
        if k + 1 == self.configs.len() {
            return (c, self.configs[k.saturating_sub(1)].phi);
        }
        let ds = (l - self.stations[k]) * c.s.sign();
        (advance(&c, self.kappa[k], ds), c.phi)
    }

    /// Steering feed-forward at `l`. Every steering step of the reference
    /// becomes a linear ramp centred on it, as steep as the rate limit
    /// allows at the profile speed there.
    pub fn feedforward(&self, l: f64) -> f64 {
        let mut phi = self.configs[0].phi;
        for j in 1..self.configs.len() - 1 {
            let delta = self.configs[j].phi - self.configs[j - 1].phi;
            if delta == 0.0 {
                continue;
            }
            let half = 0.5 * delta.abs() * self.profile.speed_at(self.stations[j]) / self.rate;
            let x = l - self.stations[j];
            phi += if half > 0.0 {
                delta * ((x + half) / (2.0 * half)).clamp(0.0, 1.0)
            } else if x >= 0.0 {
                delta
            } else {
                0.0
            };
        }
        phi
    }

    /// Reference heading of the shaped steering after travelling `l`.
    pub fn shaped_heading(&self, l: f64) -> f64 {
        let (r, _) = self.lookup(l);
        let u = (l / SHIFT_STEP).clamp(0.0, (self.shift.len() - 1) as f64);
        let i = u.floor() as usize;
        let shift = match self.shift.get(i + 1) {
            Some(next) => self.shift[i] + (next - self.shift[i]) * (u - i as f64),
            None => self.shift[i],
        };
        wrap_angle(r.theta + self.direction.sign() * shift)
    }
}

fn step_length(a: &Configuration, b: &Configuration, kappa: f64) -> f64 {
    if kappa.abs() > 1e-12 {
        wrap_angle(b.theta - a.theta).abs() / kappa.abs()
    } else {
        (b.x - a.x).hypot(b.y - a.y)
    }
}

/// Splits `p` at every direction change and at inflections whose
/// neighbouring arcs are both longer than [`INFLECTION_SPLIT`].
pub fn split_segments(p: &Path, d: &CarDimensions, params: &FollowerParams) -> Vec<Segment> {
    let c = &p.configs;
    if c.len() < 2 {
        return Vec::new();
    }
    let mut cuts = vec![0];
    let n = c.len() - 1;
    let mut k = 1;
    while k < n {
        if c[k].s != c[k - 1].s {
            cuts.push(k);
        } else if c[k].phi * c[k - 1].phi < 0.0 {
            let kappa = |i: usize| c[i].phi.tan() / d.b;
            let run = |mut i: usize, step: isize| {
                let sign = c[i].phi.signum();
                let mut len = 0.0;
                loop {
                    let j = i as isize + step;
                    if j < 0 || j as usize >= n || c[j as usize].phi.signum() != sign || c[j as usize].s != c[i].s {
                        break len + step_length(&c[i], &c[i + 1], kappa(i));
                    }
                    len += step_length(&c[i], &c[i + 1], kappa(i));
                    i = j as usize;
                }
            };
            let before = run(k - 1, -1);
            let after = run(k, 1);
            if before > INFLECTION_SPLIT && after > INFLECTION_SPLIT {
                cuts.push(k);
            }
        }
        k += 1;
    }
    cuts.push(n);
    cuts.windows(2).map(|w| Segment::new(c[w[0]..=w[1]].to_vec(), d, params)).collect()
}

/// One control tick of the simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub a_dem: f64,
    pub phi_dem: f64,
    pub e_lat: f64,
    pub e_long: f64,
    pub e_theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
    pub segments: usize,
    pub final_pose: Configuration,
}

impl Trace {
    /// Final position error in the goal frame as (longitudinal, lateral).
    pub fn goal_error(&self, goal: &Configuration) -> (f64, f64) {
        let (fwd, left, _) = goal.relative(&self.final_pose);
        (fwd, left)
    }

    pub fn max_abs(&self, f: impl Fn(&TraceRow) -> f64) -> f64 {
        self.rows.iter().map(|r| f(r).abs()).fold(0.0, f64::max)
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "t,x,y,theta,v,a_dem,phi_dem,e_lat,e_long,e_theta")?;
        for r in &self.rows {
            writeln!(
                w,
                "{:.3},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                r.t, r.x, r.y, r.theta, r.v, r.a_dem, r.phi_dem, r.e_lat, r.e_long, r.e_theta
            )?;
        }
        Ok(())
    }
}

/// Drives `p` with the controllers and returns the per-tick trace.
pub fn simulate(p: &Path, d: &CarDimensions, params: &FollowerParams) -> Result<Trace, FollowError> {
    params.validate()?;
    if p.len() < 2 {
        return Err(FollowError::EmptyPath);
    }
    let segments = split_segments(p, d, params);
    let dt = 1.0 / params.control_rate;
    let dphi = params.steer_rate_limit * dt;
    let mut pose = p.configs[0];
    let mut phi = p.configs[0].phi;
    let mut rows = Vec::new();
    let mut t = 0.0;
    for (si, seg) in segments.iter().enumerate() {
        let sign = seg.direction.sign();
        let (mut speed, mut accel, mut l) = (0.0f64, 0.0f64, 0.0f64);
        let start_phi = seg.feedforward(0.0);
        while (phi - start_phi).abs() > 1e-9 {
            phi += (start_phi - phi).clamp(-dphi, dphi);
            t += dt;
            let (r, _) = seg.lookup(0.0);
            let (_, e_lat, _) = r.relative(&pose);
            rows.push(TraceRow {
                t,
                x: pose.x,
                y: pose.y,
                theta: pose.theta,
                v: 0.0,
                a_dem: 0.0,
                phi_dem: phi,
                e_lat,
                e_long: 0.0,
                e_theta: wrap_angle(r.theta - pose.theta),
            });
        }
        let mut ts = 0.0;
        while l < seg.length() {
            if ts > seg.profile.duration() + SEGMENT_TIMEOUT {
                return Err(FollowError::Stalled(si));
            }
            let (l_ref, mut v_ref, mut a_ref) = seg.profile.at(ts);
            if ts >= seg.profile.duration() {
                v_ref = CREEP_SPEED;
                a_ref = 0.0;
            }
            let (r, _) = seg.lookup(l);
            let phi_ref = seg.feedforward(l);
            let (_, lat, _) = r.relative(&pose);
            let e_theta = wrap_angle(seg.shaped_heading(l) - pose.theta - sign * (params.p_lat * lat).atan());
            let a_dem = a_ref + params.p_v * (v_ref - speed);
            let target = (phi_ref + sign * params.p_theta * e_theta).clamp(-d.phimax, d.phimax);
            let phi_dem = phi + (target - phi).clamp(-dphi, dphi);
            accel = if params.actuation_delay > 0.0 {
                accel + (a_dem - accel) * (dt / params.actuation_delay).min(1.0)
            } else {
                a_dem
            };
            phi = phi_dem;
            let new_speed = (speed + accel * dt).max(0.0);
            let mut ds = 0.5 * (speed + new_speed) * dt;
            if l + ds >= seg.length() {
                ds = seg.length() - l;
            }
            speed = new_speed;
            pose = advance(&pose, phi.tan() / d.b, sign * ds);
            l += ds;
            t += dt;
            ts += dt;
            let (r, _) = seg.lookup(l);
            let (_, e_lat, _) = r.relative(&pose);
            if e_lat.abs() > DIVERGENCE_LIMIT {
                return Err(FollowError::Diverged { time: t, error: e_lat.abs() });
            }
            rows.push(TraceRow {
                t,
                x: pose.x,
                y: pose.y,
                theta: pose.theta,
                v: sign * speed,
                a_dem,
                phi_dem,
                e_lat,
                e_long: l_ref - l,
                e_theta: wrap_angle(r.theta - pose.theta),
            });
        }
    }
    Ok(Trace {
        rows,
        segments: segments.len(),
        final_pose: pose,
    })
}
