//! Out-of-slot planner: an anytime RRT that grows a tree of Reeds-Shepp
//! samples from the initial configuration toward the slot entry candidates.

use crate::geom::{angle_diff, configuration_collides, wrap_angle, CarDimensions, Configuration, ConvexPolygon, Vec2};
use crate::optimize::optimize;
use crate::slot::EntryCandidate;
use crate::steer::{rs_cost, rs_sample, Path, StepDistance};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::time::{Duration, Instant};

/// Switches for the individual planner enhancements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Enhancements {
    /// Nearest neighbour by the fast search heuristic instead of curve length.
    pub cost_heuristic: bool,
    pub goal_zone: bool,
    pub optimization: bool,
    pub anytime_reuse: bool,
    pub steer_toward_entry: bool,
    pub kd_index: bool,
    /// Extend by the whole steered path rather than a single step.
    pub multi_step: bool,
}

impl Enhancements {
    pub const ALL: Self = Self {
        cost_heuristic: true,
        goal_zone: true,
        optimization: true,
        anytime_reuse: true,
        steer_toward_entry: true,
        kd_index: true,
        multi_step: true,
    };

    /// Only the widely used extensions: anytime reuse, spatial index and
    /// steering toward the entry, on top of single-step extension.
    pub const WELL_KNOWN: Self = Self {
        cost_heuristic: false,
        goal_zone: false,
        optimization: false,
        anytime_reuse: true,
        steer_toward_entry: true,
        kd_index: true,
        multi_step: false,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerParams {
    pub max_iterations: usize,
    pub no_improvement_limit: usize,
    pub optimize_trigger: f64,
    pub reset_threshold: f64,
    pub step: StepDistance,
    pub heuristic_bf_weight: f64,
    pub enhancements: Enhancements,
    pub seed: u64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            no_improvement_limit: 5,
            optimize_trigger: 1.25,
            reset_threshold: 0.75,
            step: StepDistance::default(),
            heuristic_bf_weight: 0.1,
            enhancements: Enhancements::ALL,
            seed: 0,
        }
    }
}

impl PlannerParams {
    pub fn validate(&self) -> Result<(), &'static str> {
        if self.max_iterations == 0 {
            return Err("max_iterations must be positive");
        }
        if !(self.optimize_trigger >= 1.0) {
            return Err("optimize_trigger must be at least 1");
        }
        if !(self.reset_threshold > 0.0 && self.reset_threshold < 1.0) {
            return Err("reset_threshold must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Search heuristic between a tree configuration with `bf` cumulative
/// direction changes and a query configuration.
pub fn heuristic_cost(from: &Configuration, bf: usize, to: &Configuration, d: &CarDimensions, bf_weight: f64) -> f64 {
    let e = (to.x - from.x).hypot(to.y - from.y);
    let a = angle_diff(to.theta, from.theta);
    e.max(a * d.min_turning_radius()) + bf_weight * bf as f64
}

/// Straight and arc lengths `(l1, l2, alpha)` of the forward
/// straight-arc-straight motion from `g` to `entry`, if the turn is less than
/// a quarter turn. Lengths may be negative when the motion does not exist.
pub fn goal_zone_lengths(g: &Configuration, entry: &Configuration, r_min: f64) -> Option<(f64, f64, f64)> {
    let alpha = wrap_angle(entry.theta - g.theta);
    if alpha.abs() >= PI / 2.0 {
        return None;
    }
    let (x, y, _) = g.relative(entry);
    if alpha == 0.0 {
        return Some((x, 0.0, 0.0));
    }
    let sa = alpha.sin();
    let l2 = (y - alpha.signum() * r_min * (1.0 - alpha.cos())) / sa;
    let l1 = x - r_min * sa.abs() - l2 * alpha.cos();
    Some((l1, l2, alpha))
}

/// True when `entry` is reachable from `g` by a forward straight segment, a
/// minimum-radius arc and another forward straight segment.
pub fn in_goal_zone(g: &Configuration, entry: &Configuration, r_min: f64) -> bool {
    const TOL: f64 = 1e-9;
    match goal_zone_lengths(g, entry, r_min) {
        None => false,
        Some((l1, _, 0.0)) => {
            let (_, y, _) = g.relative(entry);
            y.abs() <= 1e-6 && l1 >= -TOL
        }
        Some((l1, l2, _)) => l1 >= -TOL && l2 >= -TOL,
    }
}

/// True when `entry` is reachable from `g` by a straight-arc-straight motion
/// driven entirely forward or entirely backward.
pub fn in_goal_zone_either(g: &Configuration, entry: &Configuration, r_min: f64) -> bool {
    let flip = |c: &Configuration| Configuration::new(c.x, c.y, c.theta + PI);
    in_goal_zone(g, entry, r_min) || in_goal_zone(&flip(g), &flip(entry), r_min)
}

/// Circular-mean pose of the entry candidates.
pub fn average_entry(candidates: &[EntryCandidate]) -> Configuration {
    let n = candidates.len().max(1) as f64;
    let (mut x, mut y, mut s, mut c) = (0.0, 0.0, 0.0, 0.0);
    for e in candidates {
        x += e.entry.x;
        y += e.entry.y;
        s += e.entry.theta.sin();
        c += e.entry.theta.cos();
    }
    Configuration::new(x / n, y / n, s.atan2(c))
}

/// Entry candidate closest to the circular mean of all candidates, used as the
/// target of steering so that an unobstructed steer ends on a candidate.
pub fn steering_target(candidates: &[EntryCandidate], r_min: f64) -> Configuration {
    let avg = average_entry(candidates);
    let d = |c: &Configuration| avg.position().distance(c.position()).max(r_min * angle_diff(avg.theta, c.theta));
    candidates
        .iter()
        .map(|c| c.entry)
        .min_by(|a, b| d(a).total_cmp(&d(b)))
        .unwrap_or(avg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Heuristic,
    ReedsShepp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    /// Pose plus the control of the edge from the parent.
    pub config: Configuration,
    pub parent: Option<usize>,
    pub cost: f64,
    pub bf: usize,
}

#[derive(Debug, Clone, Copy)]
struct KdPoint {
    x: f64,
    y: f64,
    th: f64,
    id: u32,
}

impl KdPoint {
    fn coord(&self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.th,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Bounds {
    lo: [f64; 3],
    hi: [f64; 3],
}

impl Bounds {
    const ALL: Bounds = Bounds {
        lo: [f64::NEG_INFINITY, f64::NEG_INFINITY, -PI],
        hi: [f64::INFINITY, f64::INFINITY, PI],
    };

    /// Lower bound of both metrics for any point inside the box.
    fn lower_bound(&self, q: &Configuration, kappa: f64) -> f64 {
        let dx = (self.lo[0] - q.x).max(q.x - self.hi[0]).max(0.0);
        let dy = (self.lo[1] - q.y).max(q.y - self.hi[1]).max(0.0);
        let da = if q.theta >= self.lo[2] && q.theta <= self.hi[2] {
            0.0
        } else {
            angle_diff(q.theta, self.lo[2]).min(angle_diff(q.theta, self.hi[2]))
        };
        dx.hypot(dy).max(kappa * da)
    }
}

/// Static balanced kd-tree stored in median order.
#[derive(Debug, Clone, Default)]
struct StaticKd {
    pts: Vec<KdPoint>,
}

impl StaticKd {
    fn build(mut pts: Vec<KdPoint>) -> Self {
        fn rec(p: &mut [KdPoint], depth: usize) {
            if p.len() <= 1 {
                return;
            }
            let axis = depth % 3;
            let mid = p.len() / 2;
            p.select_nth_unstable_by(mid, |a, b| a.coord(axis).total_cmp(&b.coord(axis)));
            let (l, r) = p.split_at_mut(mid);
            rec(l, depth + 1);
            rec(&mut r[1..], depth + 1);
        }
        rec(&mut pts, 0);
        Self { pts }
    }

    fn search(&self, q: &Configuration, kappa: f64, eval: &mut dyn FnMut(u32) -> f64, best: &mut (f64, u32)) {
        self.rec(0, self.pts.len(), 0, Bounds::ALL, q, kappa, eval, best);
    }

    #[allow(clippy::too_many_arguments)]
    fn rec(
        &self,
        lo: usize,
        hi: usize,
        depth: usize,
        b: Bounds,
        q: &Configuration,
        kappa: f64,
        eval: &mut dyn FnMut(u32) -> f64,
        best: &mut (f64, u32),
    ) {
        if lo >= hi || b.lower_bound(q, kappa) > best.0 {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let p = self.pts[mid];
        let c = eval(p.id);
        if c < best.0 || (c == best.0 && p.id < best.1) {
            *best = (c, p.id);
        }
        let axis = depth % 3;
        let split = p.coord(axis);
        let qv = match axis {
            0 => q.x,
            1 => q.y,
            _ => q.theta,
        };
        let mut left = b;
        left.hi[axis] = split;
        let mut right = b;
        right.lo[axis] = split;
        if qv <= split {
            self.rec(lo, mid, depth + 1, left, q, kappa, eval, best);
            self.rec(mid + 1, hi, depth + 1, right, q, kappa, eval, best);
        } else {
            self.rec(mid + 1, hi, depth + 1, right, q, kappa, eval, best);
            self.rec(lo, mid, depth + 1, left, q, kappa, eval, best);
        }
    }
}

/// Incremental spatial index over (x, y, theta) built from static kd-trees
/// of power-of-two sizes.
#[derive(Debug, Clone, Default)]
pub struct KdIndex {
    levels: Vec<StaticKd>,
}

impl KdIndex {
    fn insert(&mut self, c: &Configuration, id: usize) {
        let mut carry = vec![KdPoint {
            x: c.x,
            y: c.y,
            th: c.theta,
            id: id as u32,
        }];
        for level in self.levels.iter_mut() {
            if level.pts.is_empty() {
                *level = StaticKd::build(carry);
                return;
            }
            carry.append(&mut level.pts);
        }
        self.levels.push(StaticKd::build(carry));
    }

    fn nearest(&self, q: &Configuration, kappa: f64, eval: &mut dyn FnMut(u32) -> f64) -> Option<usize> {
        let mut best = (f64::INFINITY, u32::MAX);
        for level in self.levels.iter().rev() {
            level.search(q, kappa, eval, &mut best);
        }
        (best.1 != u32::MAX).then_some(best.1 as usize)
    }
}

/// Instrumentation counters of a planning run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub iterations: usize,
    pub find_path_calls: usize,
    pub nodes_added: usize,
    pub heuristic_evals: usize,
    pub rs_search_evals: usize,
    pub rs_connect_evals: usize,
    pub optimize_calls: usize,
}

/// RRT tree rooted at the initial configuration.
#[derive(Debug, Clone)]
pub struct Tree {
    nodes: Vec<Node>,
    index: Option<KdIndex>,
}

impl Tree {
    pub fn new(root: Configuration, kd_index: bool) -> Self {
        let mut t = Tree {
            nodes: Vec::new(),
            index: kd_index.then(KdIndex::default),
        };
        t.push(Node {
            config: root,
            parent: None,
            cost: 0.0,
            bf: 0,
        });
        t
    }

    fn push(&mut self, n: Node) -> usize {
        let id = self.nodes.len();
        if let Some(ix) = self.index.as_mut() {
            ix.insert(&n.config, id);
        }
        self.nodes.push(n);
        id
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Adds `configs[1..]` as a chain below `parent`; `configs[0]` must be the
    /// parent pose and every configuration carries its outgoing control.
    pub fn connect(&mut self, parent: usize, configs: &[Configuration], r_min: f64, counters: &mut Counters) -> Vec<usize> {
        let mut ids = Vec::with_capacity(configs.len().saturating_sub(1));
        let mut prev = parent;
        for w in configs.windows(2) {
            let p = self.nodes[prev];
            let incoming = w[1].with_control(w[0].s, w[0].phi);
            let changed = p.parent.is_some() && p.config.s != incoming.s;
            counters.rs_connect_evals += 1;
            let id = self.push(Node {
                config: incoming,
                parent: Some(prev),
                cost: p.cost + rs_cost(&p.config, &incoming, r_min),
                bf: p.bf + usize::from(changed),
            });
            ids.push(id);
            prev = id;
        }
        counters.nodes_added += ids.len();
        ids
    }

    /// Node minimising `metric` to `q`, ties broken by the lowest index.
    pub fn nearest(&self, q: &Configuration, metric: Metric, d: &CarDimensions, bf_weight: f64, counters: &mut Counters) -> usize {
        let r = d.min_turning_radius();
        let nodes = &self.nodes;
        let mut evals = 0usize;
        let mut eval = |id: u32| {
            evals += 1;
            let n = &nodes[id as usize];
            match metric {
                Metric::Heuristic => heuristic_cost(&n.config, n.bf, q, d, bf_weight),
                Metric::ReedsShepp => rs_cost(&n.config, q, r),
            }
        };
        let best = match &self.index {
            Some(ix) => ix.nearest(q, r, &mut eval).unwrap_or(0),
            None => {
                let mut best = (f64::INFINITY, 0usize);
                for id in 0..nodes.len() {
                    let c = eval(id as u32);
                    if c < best.0 {
                        best = (c, id);
                    }
                }
                best.1
            }
        };
        match metric {
            Metric::Heuristic => counters.heuristic_evals += evals,
            Metric::ReedsShepp => counters.rs_search_evals += evals,
        }
        best
    }

    /// Configurations from the root to `id`, each carrying its outgoing control.
    pub fn path_to(&self, id: usize) -> Path {
        let mut chain = Vec::new();
        let mut cur = Some(id);
        while let Some(c) = cur {
            chain.push(c);
            cur = self.nodes[c].parent;
        }
        chain.reverse();
        let mut configs: Vec<Configuration> = chain.iter().map(|&c| self.nodes[c].config).collect();
        for k in 0..configs.len().saturating_sub(1) {
            let next = configs[k + 1];
            configs[k].s = next.s;
            configs[k].phi = next.phi;
        }
        let n = configs.len();
        if n >= 2 {
            configs[n - 1].s = configs[n - 2].s;
            configs[n - 1].phi = configs[n - 2].phi;
        }
        Path::new(configs)
    }

    /// Checks parent links, costs and direction-change counts.
    pub fn check_invariants(&self, r_min: f64, step: f64) -> Result<(), String> {
        for (id, n) in self.nodes.iter().enumerate() {
            match n.parent {
                None if id != 0 => return Err(format!("node {id} has no parent")),
                None => {}
                Some(p) if p >= id => return Err(format!("node {id} has later parent {p}")),
                Some(p) => {
                    let pn = &self.nodes[p];
                    let c = rs_cost(&pn.config, &n.config, r_min);
                    if (pn.cost + c - n.cost).abs() > 1e-6 {
                        return Err(format!("node {id} cost mismatch"));
                    }
                    if c > step + 1e-6 {
                        return Err(format!("node {id} is {c} from its parent"));
                    }
                    let changed = pn.parent.is_some() && pn.config.s != n.config.s;
                    if n.bf != pn.bf + usize::from(changed) {
                        return Err(format!("node {id} direction changes mismatch"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Planning problem seen by the out-of-slot planner.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub init: Configuration,
    pub candidates: &'a [EntryCandidate],
    pub obstacles: &'a [ConvexPolygon],
    pub dims: CarDimensions,
}

/// Number of leading configurations of `configs[1..]` that are collision-free.
pub fn remove_colliding(configs: &[Configuration], obstacles: &[ConvexPolygon], d: &CarDimensions) -> usize {
    configs
        .iter()
        .skip(1)
        .take_while(|c| !configuration_collides(c, d, obstacles))
        .count()
}

/// Draws a configuration from the disc spanned by `init` and `entry`, or a
/// configuration of `prev` when the sample cannot improve on its cost.
#[allow(clippy::too_many_arguments)]
pub fn random_configuration(
    prev: Option<&Path>,
    prev_cost: f64,
    init: &Configuration,
    entry: &Configuration,
    d: &CarDimensions,
    metric: Metric,
    rng: &mut impl Rng,
) -> Configuration {
    let center = (init.position() + entry.position()) * 0.5;
    let radius = init.position().distance(entry.position());
    let rho = radius * rng.gen::<f64>().sqrt();
    let ang = rng.gen_range(-PI..PI);
    let th = -rng.gen_range(-PI..PI);
    let p = center + Vec2::from_angle(ang) * rho;
    let q = Configuration::new(p.x, p.y, th);
    if let Some(prev) = prev.filter(|p| !p.is_empty() && prev_cost.is_finite()) {
        let cost = |a: &Configuration, b: &Configuration| match metric {
            Metric::Heuristic => heuristic_cost(a, 0, b, d, 0.0),
            Metric::ReedsShepp => rs_cost(a, b, d.min_turning_radius()),
        };
        if cost(init, &q) + cost(&q, entry) > prev_cost {
            return *prev.configs.choose(rng).expect("non-empty");
        }
    }
    q
}

/// Result of one tree search.
#[derive(Debug, Clone)]
pub struct Found {
    pub path: Path,
    /// The path as found by the tree search, before optimisation.
    pub raw: Option<Path>,
    pub candidate: usize,
    pub cost: f64,
}

struct Search<'a, R: Rng> {
    problem: &'a Problem<'a>,
    params: &'a PlannerParams,
    tree: Tree,
    rng: &'a mut R,
    counters: &'a mut Counters,
    avg: Configuration,
    target: Configuration,
    r: f64,
}

impl<R: Rng> Search<'_, R> {
    fn metric(&self) -> Metric {
        if self.params.enhancements.cost_heuristic {
            Metric::Heuristic
        } else {
            Metric::ReedsShepp
        }
    }

    fn steer(&self, from: &Configuration, to: &Configuration) -> Path {
        rs_sample(from, to, &self.problem.dims, self.params.step)
    }

    /// Steers from `node` toward `to`, connects the collision-free prefix and
    /// returns the new node ids.
    fn extend(&mut self, node: usize, to: &Configuration, single: bool) -> Vec<usize> {
        let from = self.tree.node(node).config;
        let mut p = self.steer(&from, to);
        if single {
            p.configs.truncate(2);
        }
        let free = remove_colliding(&p.configs, self.problem.obstacles, &self.problem.dims);
        if free == 0 {
            return Vec::new();
        }
        self.tree.connect(node, &p.configs[..=free], self.r, self.counters)
    }

    fn accepts(&self, c: &Configuration, e: &Configuration) -> bool {
        let close = c.position().distance(e.position()) <= self.params.step.get();
        if self.params.enhancements.goal_zone {
            close && in_goal_zone_either(c, e, self.r)
        } else {
            close
        }
    }

    /// Attaches the first candidate accepted from node `id`.
    fn try_goal(&mut self, id: usize) -> Option<Found> {
        let c = self.tree.node(id).config;
        for (k, cand) in self.problem.candidates.iter().enumerate() {
            if !self.accepts(&c, &cand.entry) {
                continue;
            }
            let p = self.steer(&c, &cand.entry);
            if remove_colliding(&p.configs, self.problem.obstacles, &self.problem.dims) + 1 < p.len() {
                continue;
            }
            let ids = self.tree.connect(id, &p.configs, self.r, self.counters);
            let last = ids.last().copied().unwrap_or(id);
            let path = self.tree.path_to(last);
            return Some(Found {
                cost: self.tree.node(last).cost,
                path,
                raw: None,
                candidate: k,
            });
        }
        None
    }

    fn steer_toward_entry(&mut self, new_nodes: &[usize]) -> Option<Found> {
        let avg = self.target;
        for &k in new_nodes {
            let ids = self.extend(k, &avg, false);
            if let Some(&last) = ids.last() {
                if let Some(f) = self.try_goal(last) {
                    return Some(f);
                }
            }
        }
        None
    }
}

/// One tree search: grows a fresh tree until an entry candidate is reached or
/// the shared iteration budget runs out.
pub fn find_path_rrt(
    problem: &Problem,
    i: &mut usize,
    prev: Option<&Path>,
    params: &PlannerParams,
    rng: &mut impl Rng,
    counters: &mut Counters,
) -> Option<Found> {
    let en = params.enhancements;
    let r = problem.dims.min_turning_radius();
    let mut s = Search {
        problem,
        params,
        tree: Tree::new(problem.init, en.kd_index),
        rng,
        counters,
        avg: average_entry(problem.candidates),
        target: steering_target(problem.candidates, problem.dims.min_turning_radius()),
        r,
    };
    s.counters.find_path_calls += 1;
    let prev_cost = prev.map_or(f64::INFINITY, |p| p.cost(r));
    let metric = s.metric();
    while *i < params.max_iterations {
        *i += 1;
        s.counters.iterations += 1;
        let q = if *i == 1 {
            s.target
        } else {
            let prev = if en.anytime_reuse { prev } else { None };
            random_configuration(prev, prev_cost, &problem.init, &s.avg, &problem.dims, metric, s.rng)
        };
        let near = s.tree.nearest(&q, metric, &problem.dims, params.heuristic_bf_weight, s.counters);
        let new_nodes = s.extend(near, &q, !en.multi_step);
        if new_nodes.is_empty() {
            continue;
        }
        let found = if en.steer_toward_entry {
            s.steer_toward_entry(&new_nodes)
        } else {
            s.try_goal(*new_nodes.last().expect("non-empty"))
        };
        if found.is_some() {
            return found;
        }
    }
    None
}

/// Extends the tree by the single configuration one step from the nearest
/// node toward `q`, returning how many nodes were added (zero or one).
pub fn original_rrt_step(
    tree: &mut Tree,
    q: &Configuration,
    obstacles: &[ConvexPolygon],
    d: &CarDimensions,
    step: StepDistance,
    counters: &mut Counters,
) -> usize {
    let near = tree.nearest(q, Metric::ReedsShepp, d, 0.0, counters);
    let mut p = rs_sample(&tree.node(near).config, q, d, step);
    p.configs.truncate(2);
    if remove_colliding(&p.configs, obstacles, d) == 0 {
        return 0;
    }
    tree.connect(near, &p.configs, d.min_turning_radius(), counters).len()
}

/// Outcome of the anytime planning loop.
#[derive(Debug, Clone)]
pub struct PlanOutcome {
    /// Path from the initial configuration to the chosen entry.
    pub path: Option<Path>,
    /// The same path before optimisation, when it was optimised.
    pub unoptimized: Option<Path>,
    pub candidate: usize,
    pub cost: f64,
    pub counters: Counters,
    /// Every improvement of the incumbent, in order.
    pub improvements: Vec<Improvement>,
    pub optimize_time: Duration,
}

/// The incumbent path changed at `iteration` to one of cost `cost` ending at
/// entry `candidate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub iteration: usize,
    pub cost: f64,
    pub candidate: usize,
}

impl PlanOutcome {
    pub fn found(&self) -> bool {
        self.path.is_some()
    }
}

/// Anytime outer loop: repeated tree searches sharing one iteration budget,
/// with optimisation of promising paths.
pub fn plan(problem: &Problem, params: &PlannerParams) -> PlanOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut counters = Counters::default();
    let r = problem.dims.min_turning_radius();
    let mut best: Option<Found> = None;
    let mut best_cost = f64::INFINITY;
    let mut stale = 0;
    let mut i = 0;
    let mut improvements = Vec::new();
    let mut optimize_time = Duration::ZERO;
    if problem.candidates.is_empty() {
        return PlanOutcome {
            path: None,
            unoptimized: None,
            candidate: 0,
            cost: f64::INFINITY,
            counters,
            improvements,
            optimize_time,
        };
    }
    while i < params.max_iterations && stale < params.no_improvement_limit {
        let prev = best.as_ref().map(|b| &b.path);
        let found = find_path_rrt(problem, &mut i, prev, params, &mut rng, &mut counters);
        let mut cost = found.as_ref().map_or(f64::INFINITY, |f| f.path.cost(r));
        let mut found = found;
        if params.enhancements.optimization && cost < params.optimize_trigger * best_cost {
            if let Some(f) = found.as_mut() {
                counters.optimize_calls += 1;
                let t0 = Instant::now();
                f.raw = Some(f.path.clone());
                f.path = optimize(&f.path, problem.obstacles, &problem.dims, params.step);
                optimize_time += t0.elapsed();
                cost = f.path.cost(r);
                f.cost = cost;
            }
        }
        if cost < best_cost {
            if cost < params.reset_threshold * best_cost {
                stale = 0;
            }
            best_cost = cost;
            best = found;
            improvements.push(Improvement {
                iteration: i,
                cost,
                candidate: best.as_ref().map_or(0, |b| b.candidate),
            });
        } else {
            stale += 1;
        }
    }
    PlanOutcome {
        candidate: best.as_ref().map_or(0, |b| b.candidate),
        unoptimized: best.as_ref().and_then(|b| b.raw.clone()),
        path: best.map(|b| b.path),
        cost: best_cost,
        counters,
        improvements,
        optimize_time,
    }
}
