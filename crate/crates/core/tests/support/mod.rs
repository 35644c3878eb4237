//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use parkrrt::geom::{wrap_angle, CarDimensions, Configuration, ConvexPolygon, Vec2};
use parkrrt::steer::{rs_sample, Path, StepDistance};
use rand::Rng;
use std::f64::consts::{FRAC_PI_2, PI};

#[derive(Clone, Copy, Debug)]
enum Seg {
    L,
    R,
    S,
}

/// A word family: segment kinds, and for each segment either a fixed
/// normalised length or the index of one of three free parameters together
/// with a multiplier.
#[derive(Clone, Debug)]
struct Family {
    kinds: Vec<Seg>,
    lens: Vec<Len>,
}

#[derive(Clone, Copy, Debug)]
enum Len {
    Free(usize, f64),
    Fixed(f64),
}

fn families() -> Vec<Family> {
    use Len::{Fixed, Free};
    use Seg::{L, R, S};
    let mut out = Vec::new();
    let f3 = |k: [Seg; 3]| Family {
        kinds: k.to_vec(),
        lens: vec![Free(0, 1.0), Free(1, 1.0), Free(2, 1.0)],
    };
    for k in [[L, S, L], [L, S, R], [R, S, L], [R, S, R], [L, R, L], [R, L, R]] {
        out.push(f3(k));
    }
    for k in [[L, R, L, R], [R, L, R, L]] {
        for m in [1.0, -1.0] {
            out.push(Family {
                kinds: k.to_vec(),
                lens: vec![Free(0, 1.0), Free(1, 1.0), Free(1, m), Free(2, 1.0)],
            });
        }
    }
    let ccsc = [[L, R, S, L], [L, R, S, R], [R, L, S, R], [R, L, S, L]];
    for k in ccsc {
        for q in [FRAC_PI_2, -FRAC_PI_2] {
            out.push(Family {
                kinds: k.to_vec(),
                lens: vec![Free(0, 1.0), Fixed(q), Free(1, 1.0), Free(2, 1.0)],
            });
            let mut rk = k.to_vec();
            rk.reverse();
            out.push(Family {
                kinds: rk,
                lens: vec![Free(0, 1.0), Free(1, 1.0), Fixed(q), Free(2, 1.0)],
            });
        }
    }
    for k in [[L, R, S, L, R], [R, L, S, R, L]] {
        for q1 in [FRAC_PI_2, -FRAC_PI_2] {
            for q2 in [FRAC_PI_2, -FRAC_PI_2] {
                out.push(Family {
                    kinds: k.to_vec(),
                    lens: vec![Free(0, 1.0), Fixed(q1), Free(1, 1.0), Fixed(q2), Free(2, 1.0)],
                });
            }
        }
    }
    out
}

fn lengths(f: &Family, p: [f64; 3]) -> Vec<f64> {
    f.lens
        .iter()
        .map(|l| match *l {
            Len::Free(i, m) => m * p[i],
            Len::Fixed(v) => v,
        })
        .collect()
}

/// Endpoint of the word and its Jacobian with respect to the free lengths.
fn endpoint(f: &Family, p: [f64; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let (mut x, mut y, mut th) = (0.0f64, 0.0f64, 0.0f64);
    let mut marks = Vec::with_capacity(5);
    for (k, t) in f.kinds.iter().zip(lengths(f, p)) {
        let kappa = match k {
            Seg::L => 1.0,
            Seg::R => -1.0,
            Seg::S => 0.0,
        };
        if kappa == 0.0 {
            x += t * th.cos();
            y += t * th.sin();
        } else {
            x += kappa * ((th + kappa * t).sin() - th.sin());
            y -= kappa * ((th + kappa * t).cos() - th.cos());
            th += kappa * t;
        }
        marks.push((x, y, th, kappa));
    }
    let mut jac = [[0.0; 3]; 3];
    for (l, &(px, py, h, kappa)) in f.lens.iter().zip(&marks) {
        if let Len::Free(j, m) = *l {
            // Lengthening a segment rotates the remainder about its centre.
            let (dx, dy) = (x - px, y - py);
            jac[0][j] += m * (-kappa * dy + h.cos());
            jac[1][j] += m * (kappa * dx + h.sin());
            jac[2][j] += m * kappa;
        }
    }
    ([x, y, th], jac)
}

fn residual(f: &Family, p: [f64; 3], goal: [f64; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let (e, j) = endpoint(f, p);
    ([e[0] - goal[0], e[1] - goal[1], wrap_angle(e[2] - goal[2])], j)
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    if d.abs() < 1e-14 {
        return None;
    }
    let mut out = [0.0; 3];
    for (i, o) in out.iter_mut().enumerate() {
        let mut m = a;
        for r in 0..3 {
            m[r][i] = b[r];
        }
        *o = det(m) / d;
    }
    Some(out)
}

fn newton(f: &Family, mut p: [f64; 3], goal: [f64; 3]) -> Option<[f64; 3]> {
    let norm = |r: [f64; 3]| (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    let (mut r, mut jac) = residual(f, p, goal);
    for _ in 0..40 {
        if norm(r) < 1e-12 {
            return Some(p);
        }
        let step = solve3(jac, [-r[0], -r[1], -r[2]])?;
        let mut scale = 1.0;
        loop {
            let q = [p[0] + scale * step[0], p[1] + scale * step[1], p[2] + scale * step[2]];
            let (rq, jq) = residual(f, q, goal);
            if norm(rq) < norm(r) || scale < 1e-3 {
                p = q;
                r = rq;
                jac = jq;
                break;
            }
            scale *= 0.5;
        }
        if p.iter().any(|v| v.abs() > 40.0) {
            return None;
        }
    }
    (norm(r) < 1e-9).then_some(p)
}

/// Shortest curve length found by solving every word family numerically
/// from a grid of starting points.
pub fn rs_oracle(c1: &Configuration, c2: &Configuration, r_min: f64) -> f64 {
    let (lx, ly, dth) = c1.relative(c2);
    let goal = [lx / r_min, ly / r_min, dth];
    if goal.iter().all(|v| v.abs() < 1e-12) {
        return 0.0;
    }
    let starts = [-3.0, -1.2, -0.3, 0.3, 1.2, 3.0];
    let mut best = f64::INFINITY;
    for f in families() {
        for &a in &starts {
            for &b in &starts {
                for &c in &starts {
                    if let Some(p) = newton(&f, [a, b, c], goal) {
                        best = best.min(lengths(&f, p).iter().map(|v| v.abs()).sum());
                    }
                }
            }
        }
    }
    best * r_min
}

/// Separating-axis overlap test; touching counts as overlap.
pub fn sat_overlap(a: &ConvexPolygon, b: &ConvexPolygon) -> bool {
    for poly in [a, b] {
        let v = poly.vertices();
        for i in 0..v.len() {
            let e = v[(i + 1) % v.len()] - v[i];
            let axis = Vec2::new(-e.y, e.x);
            let proj = |p: &ConvexPolygon| {
                p.vertices().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), q| {
                    let d = axis.dot(*q);
                    (lo.min(d), hi.max(d))
                })
            };
            let (a0, a1) = proj(a);
            let (b0, b1) = proj(b);
            let tol = 1e-12 * axis.norm();
            if a1 < b0 - tol || b1 < a0 - tol {
                return false;
            }
        }
    }
    true
}

/// Replays every step of the path with fine Euler integration using the
/// stored control and returns the worst pose error at the next configuration.
pub fn replay_error(path: &Path, d: &CarDimensions) -> f64 {
    let mut worst: f64 = 0.0;
    for w in path.configs.windows(2) {
        let (a, b) = (w[0], w[1]);
        let dist = if a.phi.abs() > 1e-12 {
            let r = d.b / a.phi.tan().abs();
            wrap_angle(b.theta - a.theta).abs() * r
        } else {
            (b.x - a.x).hypot(b.y - a.y)
        };
        let n = 2000;
        let h = dist / n as f64 * a.s.sign();
        let (mut x, mut y, mut th) = (a.x, a.y, a.theta);
        for _ in 0..n {
            let thm = th + 0.5 * h / d.b * a.phi.tan();
            x += h * thm.cos();
            y += h * thm.sin();
            th += h / d.b * a.phi.tan();
        }
        let e = (x - b.x).hypot(y - b.y).max(wrap_angle(th - b.theta).abs());
        worst = worst.max(e);
    }
    worst
}

/// Largest arc-length gap between consecutive configurations.
pub fn max_spacing(path: &Path, d: &CarDimensions) -> f64 {
    path.configs
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            if a.phi.abs() > 1e-12 {
                wrap_angle(b.theta - a.theta).abs() * d.b / a.phi.tan().abs()
            } else {
                (b.x - a.x).hypot(b.y - a.y)
            }
        })
        .fold(0.0, f64::max)
}

pub fn frame_polygon(c: &Configuration, d: &CarDimensions) -> ConvexPolygon {
    let h = c.theta;
    let f = Vec2::new(h.cos(), h.sin());
    let l = Vec2::new(-h.sin(), h.cos());
    let p = Vec2::new(c.x, c.y);
    let w = d.w / 2.0;
    ConvexPolygon::new(vec![
        p + f * d.df + l * w,
        p - f * d.dr + l * w,
        p - f * d.dr - l * w,
        p + f * d.df - l * w,
    ])
    .unwrap()
}

pub fn colliding_configs(path: &Path, d: &CarDimensions, obstacles: &[ConvexPolygon]) -> usize {
    path.configs
        .iter()
        .filter(|c| {
            let fp = frame_polygon(c, d);
            obstacles.iter().any(|o| sat_overlap(&fp, o))
        })
        .count()
}

pub const TAU: f64 = 2.0 * PI;

/// Pose reached from `g` by driving `l1` straight, turning `alpha` on a
/// circle of radius `r` and driving `l2` straight, all forward.
pub fn goal_zone_entry(g: &Configuration, l1: f64, l2: f64, alpha: f64, r: f64) -> Configuration {
    let local = Vec2::new(l1 + r * alpha.abs().sin(), alpha.signum() * r * (1.0 - alpha.cos()))
        + Vec2::new(alpha.cos(), alpha.sin()) * l2;
    let p = Vec2::new(g.x, g.y) + local.rotate(g.theta);
    Configuration::new(p.x, p.y, g.theta + alpha)
}

/// Straight-arc-straight lengths from the intersection of the two heading
/// lines: each leg must be at least the tangent length of the arc.
pub fn zone_oracle(g: &Configuration, e: &Configuration, r: f64) -> Option<(f64, f64)> {
    let alpha = wrap_angle(e.theta - g.theta);
    if alpha.abs() >= FRAC_PI_2 {
        return None;
    }
    let u = Vec2::new(g.theta.cos(), g.theta.sin());
    let v = Vec2::new(e.theta.cos(), e.theta.sin());
    let w = Vec2::new(e.x - g.x, e.y - g.y);
    if alpha.abs() < 1e-12 {
        let off = u.cross(w);
        return (off.abs() <= 1e-6).then_some((u.dot(w), 0.0));
    }
    // g + t1 u = e - t2 v
    let den = u.cross(v);
    let t1 = w.cross(v) / den;
    let t2 = u.cross(w) / den;
    let tan = r * (alpha.abs() / 2.0).tan();
    Some((t1 - tan, t2 - tan))
}

pub fn zone_member(g: &Configuration, e: &Configuration, r: f64) -> bool {
    zone_oracle(g, e, r).is_some_and(|(a, b)| a >= -1e-9 && b >= -1e-9)
}

pub fn random_pose(rng: &mut impl Rng, span: f64) -> Configuration {
    Configuration::new(rng.gen_range(-span..span), rng.gen_range(-span..span), rng.gen_range(-PI..PI))
}

/// Reeds-Shepp path through random waypoints together with car-sized
/// obstacles placed off the path.
pub fn random_feasible_path(rng: &mut impl Rng, waypoints: usize, obstacles: usize) -> (Path, Vec<ConvexPolygon>) {
    let d = CarDimensions::zoe();
    let mut p = Path::default();
    let mut prev = random_pose(rng, 15.0);
    for _ in 0..waypoints {
        let next = random_pose(rng, 15.0);
        p.join(&rs_sample(&prev, &next, &d, StepDistance::default()));
        prev = next;
    }
    let frames: Vec<ConvexPolygon> = p.configs.iter().map(|c| frame_polygon(c, &d)).collect();
    let mut obs = Vec::new();
    for _ in 0..obstacles * 20 {
        if obs.len() == obstacles {
            break;
        }
        let o = ConvexPolygon::rectangle(
            Vec2::new(rng.gen_range(-18.0..18.0), rng.gen_range(-18.0..18.0)),
            rng.gen_range(-PI..PI),
            4.084,
            1.771,
        );
        if !frames.iter().any(|f| sat_overlap(f, &o)) {
            obs.push(o);
        }
    }
    (p, obs)
}

/// Interesting configurations by the anchor scan, using [`zone_member`].
pub fn interesting_oracle(p: &Path, r: f64) -> Vec<usize> {
    let c = &p.configs;
    let n = c.len();
    let mut out = vec![0];
    let mut i = 0;
    while i + 1 < n {
        let mut j = i + 1;
        while j + 1 < n && zone_member(&c[i], &c[j + 1], r) {
            j += 1;
        }
        for k in i + 1..j {
            if c[k - 1].s != c[k].s {
                out.push(k);
            }
        }
        out.push(j);
        i = j;
    }
    out
}

/// Cheapest route over the interesting configurations found by trying every
/// subset of them, or `None` when there are more than `max` of them.
pub fn shortcut_oracle(p: &Path, obstacles: &[ConvexPolygon], max: usize) -> Option<f64> {
    let d = CarDimensions::zoe();
    let r = d.min_turning_radius();
    let c = &p.configs;
    let ids = interesting_oracle(p, r);
    let m = ids.len();
    if m > max {
        return None;
    }
    let mut w = vec![vec![f64::INFINITY; m]; m];
    for a in 0..m {
        for b in a + 1..m {
            if b == a + 1 {
                w[a][b] = Path::new(c[ids[a]..=ids[b]].to_vec()).cost(r);
            }
            if zone_member(&c[ids[a]], &c[ids[b]], r) {
                let s = rs_sample(&c[ids[a]], &c[ids[b]], &d, StepDistance::default());
                if colliding_configs(&s, &d, obstacles) == 0 {
                    w[a][b] = w[a][b].min(s.cost(r));
                }
            }
        }
    }
    let inner = m.saturating_sub(2);
    let mut best = p.cost(r);
    for mask in 0u32..(1 << inner) {
        let mut route = vec![0];
        route.extend((0..inner).filter(|k| mask >> k & 1 == 1).map(|k| k + 1));
        route.push(m - 1);
        let cost: f64 = route.windows(2).map(|x| w[x[0]][x[1]]).sum();
        best = best.min(cost);
    }
    Some(best)
}
