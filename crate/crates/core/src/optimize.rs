//! Path shortening by shortest path search over interesting configurations.

use crate::geom::{configuration_collides, CarDimensions, ConvexPolygon};
use crate::par::{self, Exec};
use crate::rrt::in_goal_zone;
use crate::steer::{rs_cost, rs_sample, Path, StepDistance};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Minimal improvement that keeps the optimisation loop running.
pub const IMPROVEMENT_EPS: f64 = 1e-6;

/// Indices of the interesting configurations of `p`: both ends, every
/// direction change, and the last configuration of each anchor's goal zone.
pub fn interesting_configurations(p: &Path, r_min: f64) -> Vec<usize> {
    let c = &p.configs;
    let n = c.len();
    if n == 0 {
        return Vec::new();
    }
    let cusp = |k: usize| k > 0 && k + 1 < n && c[k - 1].s != c[k].s;
    let mut out = vec![0];
    let mut i = 0;
    while i + 1 < n {
        let mut j = i + 1;
        while j + 1 < n && in_goal_zone(&c[i], &c[j + 1], r_min) {
            j += 1;
        }
        out.extend((i + 1..j).filter(|&k| cusp(k)));
        out.push(j);
        i = j;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Edge {
    Chain,
    Shortcut,
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then_with(|| o.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Shortest route over the interesting configurations of `p` using the
/// original chain between neighbours and collision-free Reeds-Shepp
/// shortcuts into goal zones. Never returns a costlier path.
pub fn dijkstra_shortcut(
    p: &Path,
    obstacles: &[ConvexPolygon],
    d: &CarDimensions,
    step: StepDistance,
    exec: Exec,
) -> Path {
    let r = d.min_turning_radius();
    let ids = interesting_configurations(p, r);
    let m = ids.len();
    if m < 2 {
        return p.clone();
    }
    let c = &p.configs;
    let chain: Vec<f64> = ids.windows(2).map(|w| Path::new(c[w[0]..=w[1]].to_vec()).cost(r)).collect();
    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|a| (a + 1..m).map(move |b| (a, b)))
        .filter(|&(a, b)| in_goal_zone(&c[ids[a]], &c[ids[b]], r))
        .collect();
    let shortcuts: Vec<Option<f64>> = par::map(exec, &pairs, |&(a, b)| {
        let s = rs_sample(&c[ids[a]], &c[ids[b]], d, step);
        let free = s.configs.iter().skip(1).all(|q| !configuration_collides(q, d, obstacles));
        free.then(|| rs_cost(&c[ids[a]], &c[ids[b]], r))
    });
    let mut adj: Vec<Vec<(usize, f64, Edge)>> = vec![Vec::new(); m];
    for (a, w) in chain.iter().enumerate() {
        adj[a].push((a + 1, *w, Edge::Chain));
    }
    for (&(a, b), w) in pairs.iter().zip(&shortcuts) {
        if let Some(w) = *w {
            adj[a].push((b, w, Edge::Shortcut));
        }
    }
    let mut dist = vec![f64::INFINITY; m];
    let mut prev: Vec<Option<(usize, Edge)>> = vec![None; m];
    let mut heap = BinaryHeap::new();
    dist[0] = 0.0;
    heap.push(Entry(0.0, 0));
    while let Some(Entry(du, u)) = heap.pop() {
        if du > dist[u] {
            continue;
        }
        for &(v, w, kind) in &adj[u] {
            let dv = du + w;
            if dv < dist[v] {
                dist[v] = dv;
                prev[v] = Some((u, kind));
                heap.push(Entry(dv, v));
            }
        }
    }
    let mut route = vec![(m - 1, Edge::Chain)];
    let mut v = m - 1;
    while let Some((u, kind)) = prev[v] {
        route.push((u, kind));
        v = u;
    }
    route.reverse();
    let mut out = Path::default();
    for w in route.windows(2) {
        let (a, b) = (w[0].0, w[1].0);
        let piece = match w[0].1 {
            Edge::Chain => Path::new(c[ids[a]..=ids[b]].to_vec()),
            Edge::Shortcut => rs_sample(&c[ids[a]], &c[ids[b]], d, step),
        };
        out.join(&piece);
    }
    if out.cost(r) < p.cost(r) {
        out
    } else {
        p.clone()
    }
}

/// Alternates forward and reversed shortcut passes while the cost improves.
pub fn optimize(p: &Path, obstacles: &[ConvexPolygon], d: &CarDimensions, step: StepDistance) -> Path {
    optimize_with(p, obstacles, d, step, Exec::Parallel)
}

pub fn optimize_with(p: &Path, obstacles: &[ConvexPolygon], d: &CarDimensions, step: StepDistance, exec: Exec) -> Path {
    let r = d.min_turning_radius();
    let mut best = p.clone();
    let mut cost = best.cost(r);
    loop {
        let fwd = dijkstra_shortcut(&best, obstacles, d, step, exec);
        let next = dijkstra_shortcut(&fwd.reversed(), obstacles, d, step, exec).reversed();
        let c = next.cost(r);
        if c >= cost {
            return best;
        }
        let improved = c < cost - IMPROVEMENT_EPS;
        best = next;
        cost = c;
        if !improved {
            return best;
        }
    }
}
