use proptest::prelude::*;
use tvblf_core::envelopes::{phi_r_branches, phi_r_envelope, select_alpha, Envelope, PpfEnvelope, TimeGrid};

fn ppf_strategy() -> impl Strategy<Value = PpfEnvelope> {
    (0.01f64..50.0, 0.01f64..1.0, 0.01f64..5.0, 0.2f64..3.0)
        .prop_map(|(inf, gap, kappa, nu)| PpfEnvelope::new(inf * (1.0 + gap) + gap, inf, kappa, nu).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn ppf_is_monotone_and_bracketed(p in ppf_strategy(), t in 0.0f64..100.0, dt in 0.0f64..10.0) {
        let (a, b) = (p.value(t), p.value(t + dt));
        prop_assert!(b <= a);
        prop_assert!(a <= p.phi0 && a >= p.phi_inf);
    }

    #[test]
    fn convergence_time_round_trip(p in ppf_strategy(), frac in 0.01f64..0.99) {
        let eps = p.phi_inf + frac * (p.phi0 - p.phi_inf);
        let tc = p.convergence_time(eps).unwrap();
        let back = p.value(tc);
        prop_assert!(((back - eps) / eps).abs() < 1e-9, "{} vs {}", back, eps);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn derivative_matches_difference_quotient(p in ppf_strategy(), t in 0.05f64..50.0) {
        let h = 1e-5 * (1.0 + t);
        let fd = (p.value(t + h) - p.value(t - h)) / (2.0 * h);
        let d = p.derivative(t).unwrap();
        prop_assert!((fd - d).abs() < 1e-5 * (1.0 + d.abs()), "{} vs {}", fd, d);
    }

    #[test]
    fn envelope_json_round_trip(p in ppf_strategy(), c in 0.1f64..10.0) {
        let env = Envelope::PointwiseMin { members: vec![Envelope::Ppf(p), Envelope::constant(c)] }.shifted(-0.01);
        let text = serde_json::to_string(&env).unwrap();
        let back: Envelope = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, env);
    }

    #[test]
    fn filtered_error_envelope_respects_both_branches(
        pe in ppf_strategy(), ped_scale in 1.5f64..5.0, eps1 in 0.0f64..0.2,
    ) {
        let phi_e = Envelope::Ppf(pe);
        let phi_edot = Envelope::Ppf(PpfEnvelope { phi0: pe.phi0 * ped_scale, phi_inf: pe.phi_inf * ped_scale, ..pe });
        let grid = TimeGrid::new(20.0, 0.1).unwrap();
        let Ok(alpha) = select_alpha(&phi_e, &phi_edot, &grid, eps1) else { return Ok(()) };
        for t in grid.iter() {
            prop_assert!(alpha < phi_edot.value(t) / phi_e.value(t));
        }
        if let Ok((phi_r, eps2)) = phi_r_envelope(&phi_e, &phi_edot, alpha, &grid, None) {
            let [b1, b2] = phi_r_branches(&phi_e, &phi_edot, alpha);
            for t in grid.iter() {
                let v = phi_r.value(t);
                prop_assert!(v > 0.0);
                prop_assert!((v + eps2 - b1.value(t).min(b2.value(t))).abs() < 1e-12);
            }
        }
    }
}
