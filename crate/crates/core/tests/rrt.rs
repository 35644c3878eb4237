mod support;

use approx::assert_abs_diff_eq;
use parkrrt::geom::{CarDimensions, Configuration, ConvexPolygon, Vec2};
use parkrrt::rrt::{
    find_path_rrt, goal_zone_lengths, heuristic_cost, in_goal_zone, in_goal_zone_either, original_rrt_step, plan,
    random_configuration, remove_colliding, Counters, Enhancements, Metric, PlannerParams, Problem, Tree,
};
use parkrrt::slot::EntryCandidate;
use parkrrt::steer::{rs_cost, rs_sample, Path, StepDistance};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_2, PI};
use support::{colliding_configs, goal_zone_entry, random_pose, zone_member, zone_oracle};

fn zoe() -> CarDimensions {
    CarDimensions::zoe()
}

fn candidate(entry: Configuration) -> EntryCandidate {
    EntryCandidate {
        entry,
        goal: entry,
        in_slot_path: Path::single(entry),
    }
}

fn random_tree(rng: &mut ChaCha8Rng, n: usize, kd: bool) -> Tree {
    let r = zoe().min_turning_radius();
    let mut t = Tree::new(Configuration::new(0.0, 0.0, 0.0), kd);
    let mut c = Counters::default();
    for _ in 0..n {
        let parent = rng.gen_range(0..t.len());
        let from = t.node(parent).config;
        let to = random_pose(rng, 20.0);
        t.connect(parent, &[from, to], r, &mut c);
    }
    t
}

#[test]
fn kd_nearest_matches_linear_scan() {
    let d = zoe();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut c = Counters::default();
    for n in [1, 2, 7, 64, 300] {
        let seed: u64 = rng.gen();
        let with = random_tree(&mut ChaCha8Rng::seed_from_u64(seed), n, true);
        let without = random_tree(&mut ChaCha8Rng::seed_from_u64(seed), n, false);
        for _ in 0..200 {
            let q = random_pose(&mut rng, 25.0);
            for metric in [Metric::Heuristic, Metric::ReedsShepp] {
                let a = with.nearest(&q, metric, &d, 0.1, &mut c);
                let b = without.nearest(&q, metric, &d, 0.1, &mut c);
                assert_eq!(a, b, "n={n} metric={metric:?}");
            }
        }
    }
}

#[test]
fn kd_index_prunes_evaluations() {
    let d = zoe();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let t = random_tree(&mut rng, 2000, true);
    let mut c = Counters::default();
    for _ in 0..100 {
        t.nearest(&random_pose(&mut rng, 20.0), Metric::Heuristic, &d, 0.1, &mut c);
    }
    assert!(c.heuristic_evals < 100 * 2000 / 2, "{} evaluations", c.heuristic_evals);
}

#[test]
fn disc_samples_are_uniform() {
    let d = zoe();
    let init = Configuration::new(0.0, 0.0, 0.0);
    let entry = Configuration::new(10.0, 0.0, 1.0);
    let (center, radius) = (Vec2::new(5.0, 0.0), 10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 200_000;
    let mut bins = [[0u32; 10]; 10];
    let mut heading = [0u32; 10];
    for _ in 0..n {
        let q = random_configuration(None, f64::INFINITY, &init, &entry, &d, Metric::Heuristic, &mut rng);
        let rel = q.position() - center;
        let rho = rel.norm() / radius;
        assert!(rho <= 1.0 + 1e-12);
        let ring = ((rho * rho * 10.0) as usize).min(9);
        let sector = (((rel.y.atan2(rel.x) + PI) / (2.0 * PI) * 10.0) as usize).min(9);
        bins[ring][sector] += 1;
        heading[(((q.theta + PI) / (2.0 * PI) * 10.0) as usize).min(9)] += 1;
    }
    let expected = n as f64 / 100.0;
    let chi2: f64 = bins.iter().flatten().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    // 99 degrees of freedom, 0.1% tail
    assert!(chi2 < 148.2, "chi2 = {chi2}");
    let expected = n as f64 / 10.0;
    let chi2: f64 = heading.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    assert!(chi2 < 27.9, "heading chi2 = {chi2}");
}

#[test]
fn anytime_filter_returns_incumbent_configurations() {
    let d = zoe();
    let init = Configuration::new(0.0, 0.0, 0.0);
    let entry = Configuration::new(10.0, 0.0, 0.0);
    let prev = rs_sample(&init, &entry, &d, StepDistance::default());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for metric in [Metric::Heuristic, Metric::ReedsShepp] {
        for _ in 0..200 {
            let q = random_configuration(Some(&prev), 0.0, &init, &entry, &d, metric, &mut rng);
            assert!(prev.configs.contains(&q));
        }
    }
    let mut fresh = 0;
    for _ in 0..200 {
        let q = random_configuration(Some(&prev), 1e9, &init, &entry, &d, Metric::Heuristic, &mut rng);
        fresh += usize::from(!prev.configs.contains(&q));
    }
    assert_eq!(fresh, 200);
}

#[test]
fn remove_colliding_keeps_free_prefix() {
    let d = zoe();
    let p = rs_sample(
        &Configuration::new(0.0, 0.0, 0.0),
        &Configuration::new(20.0, 0.0, 0.0),
        &d,
        StepDistance::default(),
    );
    assert_eq!(remove_colliding(&p.configs, &[], &d), p.len() - 1);
    let wall = ConvexPolygon::axis_aligned(Vec2::new(10.0, -3.0), Vec2::new(11.0, 3.0));
    let free = remove_colliding(&p.configs, std::slice::from_ref(&wall), &d);
    // the front of the car (3.105 ahead of the rear axle) reaches x = 10 at x = 6.895
    let last = p.configs[free];
    assert!(last.x + d.df < 10.0);
    assert!(p.configs[free + 1].x + d.df >= 10.0);
    assert_eq!(colliding_configs(&Path::new(p.configs[..=free].to_vec()), &d, &[wall]), 0);
}

#[test]
fn unobstructed_entry_is_found_on_the_first_iteration() {
    let d = zoe();
    let cands = [candidate(Configuration::new(15.0, 0.0, 0.0))];
    let problem = Problem {
        init: Configuration::new(0.0, 0.0, 0.0),
        candidates: &cands,
        obstacles: &[],
        dims: d,
    };
    let params = PlannerParams::default();
    let mut i = 0;
    let mut c = Counters::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let f = find_path_rrt(&problem, &mut i, None, &params, &mut rng, &mut c).expect("path");
    assert_eq!(i, 1);
    assert_abs_diff_eq!(f.cost, 15.0, epsilon = 1e-9);
    assert_eq!(f.candidate, 0);
}

#[test]
fn plan_reaches_entry_around_an_obstacle() {
    let d = zoe();
    let cands = [candidate(Configuration::new(20.0, 0.0, 0.0))];
    let obstacles = [ConvexPolygon::axis_aligned(Vec2::new(9.0, -1.5), Vec2::new(11.0, 1.5))];
    let problem = Problem {
        init: Configuration::new(0.0, 0.0, 0.0),
        candidates: &cands,
        obstacles: &obstacles,
        dims: d,
    };
    for profile in [Enhancements::ALL, Enhancements::WELL_KNOWN] {
        let params = PlannerParams {
            enhancements: profile,
            ..PlannerParams::default()
        };
        let out = plan(&problem, &params);
        let p = out.path.expect("path");
        assert!(p.first().unwrap().same_pose(&problem.init, 1e-12));
        assert!(p.last().unwrap().same_pose(&cands[0].entry, 1e-9));
        assert_eq!(colliding_configs(&p, &d, &obstacles), 0);
        assert!(out.cost > 20.0);
        let costs: Vec<f64> = out.improvements.iter().map(|m| m.cost).collect();
        assert!(costs.windows(2).all(|w| w[1] < w[0]));
    }
}

#[test]
fn plan_is_deterministic() {
    let d = zoe();
    let cands = [candidate(Configuration::new(20.0, 3.0, 0.5))];
    let obstacles = [ConvexPolygon::axis_aligned(Vec2::new(9.0, -1.5), Vec2::new(11.0, 4.5))];
    let problem = Problem {
        init: Configuration::new(0.0, 0.0, 0.0),
        candidates: &cands,
        obstacles: &obstacles,
        dims: d,
    };
    let params = PlannerParams {
        seed: 42,
        ..PlannerParams::default()
    };
    let a = plan(&problem, &params);
    let b = plan(&problem, &params);
    assert_eq!(a.path, b.path);
    assert_eq!(a.counters, b.counters);
    assert_eq!(a.improvements, b.improvements);
}

#[test]
fn no_candidates_means_no_path() {
    let problem = Problem {
        init: Configuration::new(0.0, 0.0, 0.0),
        candidates: &[],
        obstacles: &[],
        dims: zoe(),
    };
    let out = plan(&problem, &PlannerParams::default());
    assert!(!out.found());
    assert!(out.cost.is_infinite());
}

#[test]
fn original_step_grows_tree_by_at_most_one_node() {
    let d = zoe();
    let r = d.min_turning_radius();
    let obstacles = [ConvexPolygon::axis_aligned(Vec2::new(4.0, -2.0), Vec2::new(6.0, 2.0))];
    let mut t = Tree::new(Configuration::new(0.0, 0.0, 0.0), true);
    let mut c = Counters::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..300 {
        let before = t.len();
        let q = random_pose(&mut rng, 15.0);
        let added = original_rrt_step(&mut t, &q, &obstacles, &d, StepDistance::default(), &mut c);
        assert!(added <= 1);
        assert_eq!(t.len(), before + added);
    }
    t.check_invariants(r, 0.5).unwrap();
    let configs: Vec<Configuration> = t.nodes().iter().map(|n| n.config).collect();
    assert_eq!(colliding_configs(&Path::new(configs), &d, &obstacles), 0);
}

#[test]
fn tree_paths_replay_their_edges() {
    let d = zoe();
    let r = d.min_turning_radius();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut t = Tree::new(Configuration::new(0.0, 0.0, 0.0), false);
    let mut c = Counters::default();
    for _ in 0..30 {
        let parent = rng.gen_range(0..t.len());
        let p = rs_sample(&t.node(parent).config, &random_pose(&mut rng, 10.0), &d, StepDistance::default());
        t.connect(parent, &p.configs, r, &mut c);
    }
    t.check_invariants(r, 0.5 + 1e-9).unwrap();
    let leaf = t.len() - 1;
    let path = t.path_to(leaf);
    assert!(support::replay_error(&path, &d) < 1e-3);
    assert_abs_diff_eq!(path.cost(r), t.node(leaf).cost, epsilon = 1e-6);
    assert_eq!(path.direction_changes(), t.node(leaf).bf);
}

#[test]
fn heuristic_lower_bounds_curve_length() {
    let d = zoe();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..2000 {
        let a = random_pose(&mut rng, 10.0);
        let b = random_pose(&mut rng, 10.0);
        assert!(heuristic_cost(&a, 0, &b, &d, 0.1) <= rs_cost(&a, &b, d.min_turning_radius()) + 1e-9);
    }
}

fn pose() -> impl Strategy<Value = Configuration> {
    (-20.0..20.0f64, -20.0..20.0f64, -PI..PI).prop_map(|(x, y, t)| Configuration::new(x, y, t))
}

proptest! {
    #[test]
    fn forward_constructed_entries_are_members(
        g in pose(),
        l1 in 0.0..10.0f64,
        l2 in 0.0..10.0f64,
        alpha in prop_oneof![-1.55..-1e-3f64, 1e-3..1.55f64],
    ) {
        let r = zoe().min_turning_radius();
        let e = goal_zone_entry(&g, l1, l2, alpha, r);
        prop_assert!(in_goal_zone(&g, &e, r));
        let (a, b, al) = goal_zone_lengths(&g, &e, r).unwrap();
        prop_assert!((a - l1).abs() < 1e-6 && (b - l2).abs() < 1e-6);
        prop_assert!((al - alpha).abs() < 1e-9);
    }

    #[test]
    fn quarter_turns_are_never_members(g in pose(), e in pose(), extra in 0.0..(PI / 2.0)) {
        let r = zoe().min_turning_radius();
        let turned = Configuration::new(e.x, e.y, g.theta + FRAC_PI_2 + extra);
        prop_assert!(!in_goal_zone(&g, &turned, r));
        let turned = Configuration::new(e.x, e.y, g.theta - FRAC_PI_2 - extra);
        prop_assert!(!in_goal_zone(&g, &turned, r));
    }

    #[test]
    fn membership_matches_tangent_oracle(g in pose(), e in pose()) {
        let r = zoe().min_turning_radius();
        let (a, b) = match (goal_zone_lengths(&g, &e, r), zone_oracle(&g, &e, r)) {
            (Some((l1, l2, al)), Some((o1, o2))) if al != 0.0 => ((l1, l2), (o1, o2)),
            (None, None) => return Ok(()),
            (Some((_, _, 0.0)), Some(_)) => return Ok(()),
            other => return Err(TestCaseError::fail(format!("disagree: {other:?}"))),
        };
        prop_assert!((a.0 - b.0).abs() < 1e-6 * (1.0 + b.0.abs()));
        prop_assert!((a.1 - b.1).abs() < 1e-6 * (1.0 + b.1.abs()));
        let robust = b.0.abs() > 1e-6 && b.1.abs() > 1e-6;
        if robust {
            prop_assert_eq!(in_goal_zone(&g, &e, r), zone_member(&g, &e, r));
        }
    }

    #[test]
    fn membership_is_rigid_invariant(g in pose(), e in pose(), t in pose()) {
        let r = zoe().min_turning_radius();
        let move_ = |c: &Configuration| {
            let p = Vec2::new(c.x, c.y).rotate(t.theta);
            Configuration::new(p.x + t.x, p.y + t.y, c.theta + t.theta)
        };
        let (g2, e2) = (move_(&g), move_(&e));
        match (goal_zone_lengths(&g, &e, r), goal_zone_lengths(&g2, &e2, r)) {
            (Some(a), Some(b)) => {
                prop_assert!((a.0 - b.0).abs() < 1e-9 * (1.0 + a.0.abs()));
                prop_assert!((a.1 - b.1).abs() < 1e-9 * (1.0 + a.1.abs()));
            }
            (None, None) => {}
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
    }

    #[test]
    fn reverse_motion_is_accepted_only_by_the_symmetric_test(
        g in pose(),
        l1 in 0.1..10.0f64,
        l2 in 0.1..10.0f64,
        alpha in prop_oneof![-1.5..-0.01f64, 0.01..1.5f64],
    ) {
        let r = zoe().min_turning_radius();
        let flip = |c: &Configuration| Configuration::new(c.x, c.y, c.theta + PI);
        let e = flip(&goal_zone_entry(&flip(&g), l1, l2, alpha, r));
        prop_assert!(!in_goal_zone(&g, &e, r));
        prop_assert!(in_goal_zone_either(&g, &e, r));
    }
}
