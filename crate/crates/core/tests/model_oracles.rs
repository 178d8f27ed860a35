use nalgebra::Vector2;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use tvblf_core::plant::{default_bounds, verify_bounds, theta_true, ElState, EulerLagrange, Helicopter, HelicopterParams};
use tvblf_core::Vec2;

const PI: f64 = std::f64::consts::PI;

fn random_state(rng: &mut StdRng) -> (Vec2, Vec2) {
    (
        Vector2::new(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI)),
        Vector2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)),
    )
}

/// The two pitch/yaw equations of motion written out directly.
fn scalar_accel(p: &HelicopterParams, q: &Vec2, qd: &Vec2, tau: &Vec2) -> Vec2 {
    let (th, dth, dpsi) = (q[0], qd[0], qd[1]);
    let ml2 = p.m * p.l * p.l;
    let pitch = (tau[0] - p.b_p * dth - 0.5 * ml2 * (2.0 * th).sin() * dpsi * dpsi - p.m * p.g * p.l * th.cos())
        / (p.j_p + ml2);
    let yaw = (tau[1] - p.b_y * dpsi + ml2 * (2.0 * th).sin() * dth * dpsi) / (p.j_y + ml2 * th.cos().powi(2));
    Vec2::new(pitch, yaw)
}

#[test]
fn inertia_rate_minus_twice_coriolis_is_skew() {
    let h = Helicopter::default();
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..1000 {
        let (q, qd) = random_state(&mut rng);
        let mu = Vec2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let n = h.mass_matrix_rate(&q, &qd) - 2.0 * h.coriolis_matrix(&q, &qd);
        assert!(mu.dot(&(n * mu)).abs() < 1e-10);
        assert!((n + n.transpose()).amax() < 1e-15);
    }
}

#[test]
fn inertia_rate_matches_finite_difference() {
    let h = Helicopter::default();
    let mut rng = StdRng::seed_from_u64(12);
    for _ in 0..200 {
        let (q, qd) = random_state(&mut rng);
        let eps = 1e-6;
        let fd = (h.mass_matrix(&(q + eps * qd)) - h.mass_matrix(&(q - eps * qd))) / (2.0 * eps);
        assert!((fd - h.mass_matrix_rate(&q, &qd)).amax() < 1e-8);
    }
}

#[test]
fn regressor_reproduces_model_terms() {
    let h = Helicopter::default();
    let theta = h.theta();
    let mut rng = StdRng::seed_from_u64(13);
    for _ in 0..1000 {
        let (q, qd) = random_state(&mut rng);
        let a = Vec2::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
        let v = Vec2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let direct = h.mass_matrix(&q) * a + h.coriolis_matrix(&q, &qd) * v - h.friction(&qd) - h.gravity(&q);
        let resid = (h.regressor(&q, &qd, &a, &v) * theta - direct).norm();
        assert!(resid < 1e-10, "{resid}");
    }
}

#[test]
fn forward_dynamics_matches_scalar_equations() {
    let h = Helicopter::default();
    let mut rng = StdRng::seed_from_u64(14);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (q, qd) = random_state(&mut rng);
        let tau = Vec2::new(rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0));
        let a = h.forward_dynamics(&ElState::new(q, qd), &tau, &Vec2::zeros());
        let b = scalar_accel(&h.params, &q, &qd, &tau);
        worst = worst.max((a - b).norm() / b.norm().max(1.0));
    }
    assert!(worst < 1e-12, "{worst}");
}

#[test]
fn inertia_eigenvalues_within_rig_bounds() {
    let h = Helicopter::default();
    let b = default_bounds(&h.params);
    assert_eq!(b.km1, 0.0432);
    assert_eq!(b.km2, 0.0908);
    let mut rng = StdRng::seed_from_u64(15);
    for _ in 0..1000 {
        let q = Vec2::new(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
        let mu = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let quad = mu.dot(&(h.mass_matrix(&q) * mu));
        let n2 = mu.norm_squared();
        assert!(b.km1 * n2 <= quad * (1.0 + 1e-12));
        assert!(quad <= b.km2 * n2 * (1.0 + 1e-12), "{quad} vs {}", b.km2 * n2);
    }
}

#[test]
fn rig_bound_constants_hold_on_random_states() {
    let h = Helicopter::default();
    let mut rng = StdRng::seed_from_u64(16);
    let report = verify_bounds(&h, &default_bounds(&h.params), 5000, 5.0, &mut rng);
    assert!(report.violations.is_empty(), "{:?}", &report.violations[..report.violations.len().min(3)]);
    // The gravity bound is essentially tight.
    assert!(report.worst_ratio[2] > 0.999);
}

#[test]
fn shrunk_constants_are_caught() {
    let h = Helicopter::default();
    let mut b = default_bounds(&h.params);
    b.kg = 2.0;
    let mut rng = StdRng::seed_from_u64(17);
    let report = verify_bounds(&h, &b, 2000, 5.0, &mut rng);
    assert!(report.violations.iter().any(|v| v.property == "gravity"));
}

#[test]
fn true_parameter_norm() {
    let t = theta_true(&HelicopterParams::default());
    assert!((t.norm() - 2.659).abs() < 1e-3);
}
