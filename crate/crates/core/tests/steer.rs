mod support;

use parkrrt::geom::{wrap_angle, CarDimensions, Configuration, Direction};
use parkrrt::steer::{advance, kinematic_step, rs_cost, rs_curve, rs_sample, Path, StepDistance};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{max_spacing, replay_error, rs_oracle};

fn random_pair(rng: &mut ChaCha8Rng, span: f64) -> (Configuration, Configuration) {
    let mut c = || {
        Configuration::new(
            rng.gen_range(-span..span),
            rng.gen_range(-span..span),
            rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
        )
    };
    (c(), c())
}

#[test]
fn rs_cost_matches_numerical_oracle() {
    let r = CarDimensions::zoe().min_turning_radius();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..60 {
        let (a, b) = random_pair(&mut rng, 12.0);
        let got = rs_cost(&a, &b, r);
        let want = rs_oracle(&a, &b, r);
        worst = worst.max((got - want).abs());
        assert!((got - want).abs() < 1e-6, "{a:?} -> {b:?}: kernel {got} oracle {want}");
    }
    eprintln!("worst deviation {worst:e}");
}

#[test]
fn rs_cost_close_range_matches_oracle() {
    let r = 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..40 {
        let (a, b) = random_pair(&mut rng, 1.5);
        let got = rs_cost(&a, &b, r);
        let want = rs_oracle(&a, &b, r);
        assert!((got - want).abs() < 1e-6, "{a:?} -> {b:?}: kernel {got} oracle {want}");
    }
}

#[test]
fn pure_rotation_in_place_is_not_free() {
    let r = CarDimensions::zoe().min_turning_radius();
    let a = Configuration::new(0.0, 0.0, 0.0);
    let b = Configuration::new(0.0, 0.0, std::f64::consts::PI);
    let got = rs_cost(&a, &b, r);
    assert!((got - rs_oracle(&a, &b, r)).abs() < 1e-6);
    assert!(got > 2.0 * r);
}

#[test]
fn kinematic_step_agrees_with_exact_arc_for_small_steps() {
    let d = CarDimensions::zoe();
    let c = Configuration::new(1.0, 2.0, 0.4);
    let mut e = c;
    let n = 1000;
    for _ in 0..n {
        e = kinematic_step(&e, Direction::Backward, -d.phimax, 5.0 / n as f64, &d).unwrap();
    }
    let x = advance(&c, -1.0 / d.min_turning_radius(), -5.0);
    assert!(e.same_pose(&x, 1e-2));
}

fn pose() -> impl Strategy<Value = Configuration> {
    (-15.0..15.0f64, -15.0..15.0f64, -3.2..3.2f64).prop_map(|(x, y, t)| Configuration::new(x, y, t))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rs_symmetric_under_swap(a in pose(), b in pose()) {
        let r = 4.0;
        prop_assert!((rs_cost(&a, &b, r) - rs_cost(&b, &a, r)).abs() < 1e-6);
    }

    #[test]
    fn rs_bounded_by_euclid_and_rotation(a in pose(), b in pose()) {
        let r = 4.0;
        let c = rs_cost(&a, &b, r);
        let e = (a.x - b.x).hypot(a.y - b.y);
        prop_assert!(c + 1e-9 >= e);
        prop_assert!(c + 1e-9 >= r * wrap_angle(b.theta - a.theta).abs());
    }

    #[test]
    fn rs_triangle_inequality(a in pose(), b in pose(), m in pose()) {
        let r = 4.0;
        prop_assert!(rs_cost(&a, &b, r) <= rs_cost(&a, &m, r) + rs_cost(&m, &b, r) + 1e-6);
    }

    #[test]
    fn rs_invariant_under_rigid_motion(a in pose(), b in pose(), dx in -5.0..5.0f64, dy in -5.0..5.0f64, rot in -3.0..3.0f64) {
        let r = 4.0;
        let t = |c: &Configuration| {
            let (s, co) = rot.sin_cos();
            Configuration::new(co * c.x - s * c.y + dx, s * c.x + co * c.y + dy, c.theta + rot)
        };
        prop_assert!((rs_cost(&a, &b, r) - rs_cost(&t(&a), &t(&b), r)).abs() < 1e-6);
    }

    #[test]
    fn curve_endpoint_is_goal(a in pose(), b in pose()) {
        let c = rs_curve(&a, &b, 4.0);
        prop_assert!(c.end().same_pose(&b, 1e-6));
    }

    #[test]
    fn sampled_path_is_replayable(a in pose(), b in pose(), delta in 0.1..1.0f64) {
        let d = CarDimensions::zoe();
        let p = rs_sample(&a, &b, &d, StepDistance::new(delta).unwrap());
        prop_assert!(p.first().unwrap().same_pose(&a, 1e-6));
        prop_assert!(p.last().unwrap().same_pose(&b, 1e-6));
        prop_assert!(max_spacing(&p, &d) <= delta + 1e-9);
        prop_assert!(replay_error(&p, &d) < 1e-3);
        prop_assert!(p.configs.iter().all(|c| c.phi.abs() <= d.phimax + 1e-12));
        let curve = rs_curve(&a, &b, d.min_turning_radius());
        prop_assert_eq!(p.direction_changes(), curve.cusps());
        prop_assert!((p.cost(d.min_turning_radius()) - curve.length()).abs() < 1e-6);
    }

    #[test]
    fn reversed_path_replays(a in pose(), b in pose()) {
        let d = CarDimensions::zoe();
        let p = rs_sample(&a, &b, &d, StepDistance::default());
        let r: Path = p.reversed();
        prop_assert!(replay_error(&r, &d) < 1e-3);
        prop_assert_eq!(r.reversed(), p);
    }
}
