mod common;

use gridshape_core::tuning::{max_decay, FrontierSegment};
use gridshape_core::{
    achievable_frontier, analyze_modes, check_alpha_psi, frontier_project, fs_min_damping,
    fs_min_decay, tune_db, ControllerSpec, Error, Projection, StabilityRegion, TuningTargets,
};
use proptest::prelude::*;
use rand::Rng;

fn targets_within(rng: &mut rand_chacha::ChaCha8Rng, limit: f64) -> TuningTargets {
    TuningTargets {
        cos_psi_d: rng.gen_range(0.02..0.95),
        alpha_d: rng.gen_range(0.02..0.98) * limit,
        delta_p: rng.gen_range(0.01..0.5),
        delta_omega_d: rng.gen_range(0.002..0.05),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn closed_forms_match_numeric_minima(seed in any::<u64>(), n in 2usize..10, d_b in 0.0f64..150.0) {
        let mut rng = common::rng(seed);
        let params = common::random_params(&mut rng, n);
        let sp = common::random_spectrum(&mut rng, &params);
        let an = analyze_modes(&ControllerSpec::Fs { d_b }, &params, sp.mode_gains()).unwrap();
        let cd = fs_min_damping(&params, d_b, sp.lambda_n());
        let ca = fs_min_decay(&params, d_b, sp.lambda_2());
        prop_assert!((an.min_damping - cd).abs() <= 1e-9 * cd);
        prop_assert!((an.min_decay - ca).abs() <= 1e-9 * ca);
    }

    #[test]
    fn decay_rises_then_falls_in_droop(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let params = common::random_params(&mut rng, 3);
        let l2 = rng.gen_range(1.0..5000.0);
        let switch = 2.0 * (l2 * params.m).sqrt() - params.d - params.d_t;
        let samples: Vec<f64> = (0..200).map(|j| j as f64 * 0.01 * (switch.abs() + 10.0)).collect();
        let alpha: Vec<f64> = samples.iter().map(|&d| fs_min_decay(&params, d, l2)).collect();
        for (w, d) in alpha.windows(2).zip(samples.windows(2)) {
            if d[1] <= switch {
                prop_assert!(w[1] >= w[0] - 1e-12);
            } else if d[0] >= switch {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
        }
        prop_assert!(alpha.iter().all(|&a| a <= max_decay(&params, l2) * (1.0 + 1e-12)));
    }

    #[test]
    fn tuned_droop_meets_targets(seed in any::<u64>(), n in 2usize..10) {
        let mut rng = common::rng(seed);
        let params = common::random_params(&mut rng, n);
        let sp = common::random_spectrum(&mut rng, &params);
        let targets = targets_within(&mut rng, max_decay(&params, sp.lambda_2()));
        match tune_db(&params, &sp, &targets, None) {
            Ok(res) => {
                prop_assert!(res.achieved.cos_psi_bar >= targets.cos_psi_d * (1.0 - 1e-9));
                prop_assert!(res.achieved.alpha_bar >= targets.alpha_d * (1.0 - 1e-9));
                prop_assert!(res.d_b >= res.d_b_osc && res.d_b >= res.d_b_coi);
                let steady = targets.delta_p / ((params.d + res.d_b + params.d_t) * params.r_sum);
                prop_assert!(steady <= targets.delta_omega_d * (1.0 + 1e-9));
                let region = StabilityRegion::from_targets(targets.alpha_d, targets.cos_psi_d).unwrap();
                let an = analyze_modes(&ControllerSpec::Fs { d_b: res.d_b }, &params, sp.mode_gains()).unwrap();
                prop_assert!(check_alpha_psi(&an, &region).pass);
            }
            Err(e) => prop_assert!(e.is_infeasible(), "unexpected error {e}"),
        }
    }

    #[test]
    fn stricter_targets_never_need_less_droop(seed in any::<u64>(), n in 2usize..8, tighten in 1.0f64..1.5) {
        let mut rng = common::rng(seed);
        let params = common::random_params(&mut rng, n);
        let sp = common::random_spectrum(&mut rng, &params);
        let loose = targets_within(&mut rng, max_decay(&params, sp.lambda_2()));
        let strict = TuningTargets {
            cos_psi_d: (loose.cos_psi_d * tighten).min(1.0),
            delta_omega_d: loose.delta_omega_d / tighten,
            ..loose
        };
        if let (Ok(a), Ok(b)) = (tune_db(&params, &sp, &loose, None), tune_db(&params, &sp, &strict, None)) {
            prop_assert!(b.d_b >= a.d_b);
        }
    }

    #[test]
    fn frontier_is_ordered_and_on_the_closed_forms(seed in any::<u64>(), n in 2usize..8) {
        let mut rng = common::rng(seed);
        let params = common::random_params(&mut rng, n);
        let sp = common::random_spectrum(&mut rng, &params);
        let fr = achievable_frontier(&params, &sp, 64).unwrap();
        let pts = &fr.points;
        prop_assert!(pts.windows(2).all(|w| w[1].cos_psi >= w[0].cos_psi - 1e-12));
        prop_assert!(pts.windows(2).all(|w| w[1].d_b >= w[0].d_b - 1e-9 * w[0].d_b.abs().max(1.0)));
        for w in pts.windows(2) {
            if w[0].segment != FrontierSegment::Linear {
                prop_assert!(w[1].alpha <= w[0].alpha * (1.0 + 1e-12));
            }
        }
        for p in pts {
            let q = fr.point_at(p.d_b, p.segment);
            prop_assert!((q.cos_psi - p.cos_psi).abs() < 1e-9);
            prop_assert!((q.alpha - p.alpha).abs() < 1e-9 * p.alpha.max(1e-9));
        }
        // √(λ₂/m) is reached only if the decay switch lies at a non-negative droop
        let switch = 2.0 * (sp.lambda_2() * params.m).sqrt() - params.d - params.d_t;
        let top = if switch >= 0.0 { max_decay(&params, sp.lambda_2()) } else { fs_min_decay(&params, 0.0, sp.lambda_2()) };
        prop_assert!((fr.max_alpha() - top).abs() < 1e-9 * top);
    }

    #[test]
    fn projection_dominates_targets_and_fixes_pareto_points(seed in any::<u64>(), n in 2usize..8) {
        let mut rng = common::rng(seed);
        let params = common::random_params(&mut rng, n);
        let sp = common::random_spectrum(&mut rng, &params);
        let fr = achievable_frontier(&params, &sp, 64).unwrap();
        let targets = targets_within(&mut rng, max_decay(&params, sp.lambda_2()));
        if let Projection::Feasible { point } = frontier_project(&targets, &fr) {
            prop_assert!(point.cos_psi >= targets.cos_psi_d * (1.0 - 1e-9));
            prop_assert!(point.alpha >= targets.alpha_d * (1.0 - 1e-9));
        }
        for p in fr.points.iter().filter(|p| p.segment != FrontierSegment::Vertical) {
            let t = TuningTargets { cos_psi_d: p.cos_psi, alpha_d: p.alpha, ..targets };
            match frontier_project(&t, &fr) {
                Projection::Feasible { point } => {
                    prop_assert!((point.d_b - p.d_b).abs() < 1e-9 * p.d_b.max(1.0));
                    prop_assert!((point.cos_psi - p.cos_psi).abs() < 1e-9);
                    prop_assert!((point.alpha - p.alpha).abs() < 1e-9 * p.alpha);
                }
                Projection::Infeasible { reason } => prop_assert!(false, "frontier point rejected: {reason}"),
            }
        }
    }
}

#[test]
fn unreachable_decay_is_infeasible() {
    let mut rng = common::rng(3);
    let params = common::random_params(&mut rng, 4);
    let sp = common::random_spectrum(&mut rng, &params);
    let targets = TuningTargets {
        cos_psi_d: 0.1,
        alpha_d: 1.01 * max_decay(&params, sp.lambda_2()),
        delta_p: 0.1,
        delta_omega_d: 0.01,
    };
    assert!(matches!(
        tune_db(&params, &sp, &targets, None),
        Err(Error::InfeasibleDecayTarget { .. })
    ));
    let fr = achievable_frontier(&params, &sp, 32).unwrap();
    assert!(matches!(
        frontier_project(&targets, &fr),
        Projection::Infeasible { .. }
    ));
}
