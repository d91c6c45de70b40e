//! Acceptance suite. Prints one line per criterion and exits non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use gridshape_core::api::{self, CompareRequest};
use gridshape_core::locus::{closed_loop_poles, default_gain_grid, merge_gains};
use gridshape_core::stability::fit_envelope;
use gridshape_core::tuning::{max_decay, FrontierSegment, DEFAULT_FRONTIER_POINTS};
use gridshape_core::{
    achievable_frontier, analyze_modes, check_alpha_psi, fs_beats_vi, fs_min_damping, fs_min_decay,
    full_system_ss, locus_geometry, modal_step_response, mode_subsystem, scaled_controllers,
    step_response, trace_locus, tune_db, vi_mv_min, vi_rate_bound, CaseContext, Complex,
    ControllerSpec, RepresentativeParams, ScaledSpectrum, StabilityRegion, TuningTargets,
};
use rand::Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn paper_targets() -> TuningTargets {
    TuningTargets {
        cos_psi_d: 0.1,
        alpha_d: 0.2,
        delta_p: 0.2,
        delta_omega_d: 0.2 / 60.0,
    }
}

fn reference() -> CaseContext {
    CaseContext::new(common::reference_case()).expect("reference case loads")
}

fn p1() -> Check {
    let params =
        RepresentativeParams::homogeneous(15.37, 4.37, 15.0, 2.19, 3).map_err(|e| e.to_string())?;
    let spectrum =
        ScaledSpectrum::from_modes(vec![1.0; 3], &[120.0, 4967.96]).map_err(|e| e.to_string())?;
    let res =
        tune_db(&params, &spectrum, &paper_targets(), Some(0.0)).map_err(|e| e.to_string())?;
    let [damp, decay] = res.osc_terms;
    ensure((damp - 35.89).abs() <= 0.01, || {
        format!("damping component {damp}")
    })?;
    ensure((decay + 13.22).abs() <= 0.01, || {
        format!("decay component {decay}")
    })?;
    ensure((res.d_b_osc - 35.89).abs() <= 0.01, || {
        format!("d_b,osc {}", res.d_b_osc)
    })?;
    ensure((res.d_b - 35.89).abs() <= 0.01, || {
        format!("final d_b {}", res.d_b)
    })?;
    Ok(format!(
        "components ({damp:.4}, {decay:.4}), d_b,osc {:.4}, d_b {:.4}",
        res.d_b_osc, res.d_b
    ))
}

fn p2() -> Check {
    let ctx = reference();
    let unrounded = vi_mv_min(&ctx.params, 35.89);
    ensure(
        (ctx.params.tau - 2.1867).abs() < 1e-4 && (ctx.params.d - 4.3667).abs() < 1e-4,
        || format!("reference means tau {} d {}", ctx.params.tau, ctx.params.d),
    )?;
    ensure((unrounded - 264.16).abs() <= 0.05, || {
        format!("unrounded m_v,min {unrounded}")
    })?;
    let printed =
        RepresentativeParams::homogeneous(15.37, 4.37, 15.0, 2.19, 3).map_err(|e| e.to_string())?;
    let rounded = vi_mv_min(&printed, 35.89);
    ensure((rounded - 264.6).abs() <= 0.5, || {
        format!("rounded m_v,min {rounded}")
    })?;
    Ok(format!(
        "m_v,min {unrounded:.4} s (unrounded), {rounded:.4} s (rounded)"
    ))
}

fn p3() -> Check {
    let mut rng = common::rng(0x5eed_0003);
    let mut worst = 0.0f64;
    let draws = 200;
    for draw in 0..draws {
        let n = rng.gen_range(2..=12);
        let params = common::random_params(&mut rng, n);
        let spectrum = common::random_spectrum(&mut rng, &params);
        let d_b = rng.gen_range(0.0..150.0);
        let an = analyze_modes(&ControllerSpec::Fs { d_b }, &params, spectrum.mode_gains())
            .map_err(|e| e.to_string())?;
        let cd = fs_min_damping(&params, d_b, spectrum.lambda_n());
        let ca = fs_min_decay(&params, d_b, spectrum.lambda_2());
        worst = worst
            .max(rel(an.min_damping, cd))
            .max(rel(an.min_decay, ca));
        ensure(rel(an.min_damping, cd) <= 1e-9, || {
            format!("draw {draw}: damping {} vs {cd}", an.min_damping)
        })?;
        ensure(rel(an.min_decay, ca) <= 1e-9, || {
            format!("draw {draw}: decay {} vs {ca}", an.min_decay)
        })?;
        // the minimum is attained at k = n and k = 2; equal values elsewhere are ties
        let last = an.per_mode.last().unwrap();
        let first = an.per_mode.first().unwrap();
        ensure(
            last.k == n && rel(last.damping, an.min_damping) <= 1e-9,
            || format!("draw {draw}: damping minimum not attained at k = n"),
        )?;
        ensure(
            first.k == 2 && rel(first.decay, an.min_decay) <= 1e-9,
            || format!("draw {draw}: decay minimum not attained at k = 2"),
        )?;
    }
    Ok(format!("{draws} draws, worst relative gap {worst:.2e}"))
}

fn locus_matches_modes(
    spec: &ControllerSpec,
    params: &RepresentativeParams,
    spectrum: &ScaledSpectrum,
) -> Result<f64, String> {
    let geo = locus_geometry(spec, params).map_err(|e| e.to_string())?;
    let gains = spectrum.mode_gains();
    let grid = merge_gains(
        &default_gain_grid(&geo, spectrum.lambda_2(), spectrum.lambda_n()),
        gains,
    );
    let branches = trace_locus(spec, params, &grid).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for &lk in gains {
        let idx = grid
            .iter()
            .position(|&g| g == lk)
            .ok_or("mode gain missing from grid")?;
        let on_locus: Vec<Complex<f64>> = branches.iter().map(|b| b.points[idx].s()).collect();
        let poles = mode_subsystem(spec, params, lk)
            .poles()
            .map_err(|e| e.to_string())?;
        if poles.len() != on_locus.len() {
            return Err(format!(
                "{} mode poles vs {} branches",
                poles.len(),
                on_locus.len()
            ));
        }
        worst = worst.max(common::root_set_distance(&poles, &on_locus));
    }
    Ok(worst)
}

fn p4() -> Check {
    let mut rng = common::rng(0x5eed_0004);
    let mut worst = 0.0f64;
    for case in 0..50 {
        let n = rng.gen_range(2..=10);
        let params = common::random_params(&mut rng, n);
        let spectrum = common::random_spectrum(&mut rng, &params);
        let d_b = rng.gen_range(0.0..80.0);
        let vi = ControllerSpec::Vi {
            d_b,
            m_v: vi_mv_min(&params, d_b).max(0.0),
        };
        for spec in [ControllerSpec::Fs { d_b }, vi] {
            let d = locus_matches_modes(&spec, &params, &spectrum)
                .map_err(|e| format!("case {case} {}: {e}", spec.label()))?;
            ensure(d <= 1e-7, || {
                format!("case {case} {}: distance {d:.3e}", spec.label())
            })?;
            worst = worst.max(d);
        }
    }
    Ok(format!(
        "50 cases x (FS, VI), worst relative distance {worst:.2e}"
    ))
}

fn p5() -> Check {
    let mut rng = common::rng(0x5eed_0005);
    let (mut worst_w, mut worst_p) = (0.0f64, 0.0f64);
    for case in 0..100 {
        let n = rng.gen_range(2..=8);
        let params = common::random_params(&mut rng, n);
        let net = common::random_proportional_case(&mut rng, &params);
        let ctx = CaseContext::new(net).map_err(|e| e.to_string())?;
        let d_b = rng.gen_range(0.0..60.0);
        let spec = match case % 3 {
            0 => ControllerSpec::Fs { d_b },
            1 => ControllerSpec::Vi {
                d_b,
                m_v: rng.gen_range(0.0..2.0) * vi_mv_min(&params, d_b).max(1.0),
            },
            _ => ControllerSpec::None,
        };
        let u0: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.3..0.3)).collect();
        let modal = modal_step_response(&spec, &ctx.params, &ctx.spectrum, &u0, 40.0, 0.01)
            .map_err(|e| e.to_string())?;
        let sys = full_system_ss(&ctx.case, &scaled_controllers(&spec, &ctx.params))
            .map_err(|e| e.to_string())?;
        let direct = step_response(&sys, &u0, 40.0, 0.01).map_err(|e| e.to_string())?;
        let dw = modal.max_omega_diff(&direct);
        let dp = modal
            .p_inv
            .iter()
            .zip(&direct.p_inv)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0f64, f64::max);
        ensure(dw < 1e-6 && dp < 1e-6, || {
            format!(
                "case {case} ({}): omega {dw:.2e}, p_inv {dp:.2e}",
                spec.label()
            )
        })?;
        worst_w = worst_w.max(dw);
        worst_p = worst_p.max(dp);
    }
    Ok(format!(
        "100 cases, worst omega gap {worst_w:.2e} pu, worst p_inv gap {worst_p:.2e} pu"
    ))
}

fn p6() -> Check {
    let ctx = reference();
    let tuned = api::tune(&ctx, &paper_targets(), Some(0.0), false).map_err(|e| e.to_string())?;
    let d_b = tuned.result.d_b;
    let spec = ControllerSpec::Fs { d_b };
    let params = &ctx.params;
    let case = ctx.case.proportionalized(params);
    let sys =
        full_system_ss(&case, &scaled_controllers(&spec, params)).map_err(|e| e.to_string())?;
    let u0 = [-0.2, 0.0, 0.0];
    let resp = step_response(&sys, &u0, 40.0, 0.01).map_err(|e| e.to_string())?;

    let total = params.d + d_b + params.d_t;
    let final_coi = u0.iter().sum::<f64>() / (total * params.r_sum);
    let coi_gap = resp
        .t
        .iter()
        .zip(&resp.coi)
        .map(|(&t, &c)| (c - final_coi * (1.0 - (-total * t / params.m).exp())).abs())
        .fold(0.0f64, f64::max);
    ensure(coi_gap < 1e-8, || {
        format!("COI departs from first-order response by {coi_gap:.2e}")
    })?;

    let peak = resp.coi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let monotone = resp.coi.windows(2).all(|w| w[1] <= w[0] + 1e-12 * peak);
    ensure(monotone, || "COI is not monotone".into())?;

    let fit = fit_envelope(&resp, &ctx.steady_state(&spec, &u0)).map_err(|e| e.to_string())?;
    let reference_rate = fs_min_decay(params, d_b, ctx.spectrum.lambda_2());
    let ratio = fit.rate / reference_rate;
    ensure((0.95..=1.3).contains(&ratio), || {
        format!("envelope rate {:.4} is {ratio:.3} x closed form", fit.rate)
    })?;
    Ok(format!("d_b {d_b:.4}, COI gap {coi_gap:.2e} pu, monotone, envelope {:.4}/s = {ratio:.3} x {reference_rate:.4}/s", fit.rate))
}

fn p7() -> Check {
    let ctx = reference();
    let d_b = 35.89;
    let m_v = vi_mv_min(&ctx.params, d_b);
    let req = CompareRequest {
        d_b,
        m_v: Some(m_v),
        u0: vec![-0.2, 0.0, 0.0],
        t_end: api::COMPARE_T_END,
        dt: 0.01,
        include_series: false,
    };
    let report = api::compare(&ctx, &req).map_err(|e| e.to_string())?;
    let wn = vi_rate_bound(&ctx.params, d_b, m_v)
        .map_err(|e| e.to_string())?
        .omega_n;
    let (fs_rate, vi_rate) = (report.fs.envelope.rate, report.vi.envelope.rate);
    ensure(vi_rate <= 1.05 * wn, || {
        format!(
            "VI envelope {vi_rate:.4} exceeds 1.05 omega_n = {:.4}",
            1.05 * wn
        )
    })?;
    ensure(fs_rate > vi_rate, || {
        format!("FS envelope {fs_rate:.4} not faster than VI {vi_rate:.4}")
    })?;
    let lhs = fs_beats_vi(&ctx.params, d_b, m_v).lhs;
    ensure(lhs > 2.0, || format!("rate-comparison left side {lhs:.4}"))?;
    Ok(format!("FS {fs_rate:.4}/s > VI {vi_rate:.4}/s <= 1.05 x omega_n {wn:.4}/s, comparison lhs {lhs:.4}"))
}

fn p8() -> Check {
    let ctx = reference();
    let (params, sp) = (&ctx.params, &ctx.spectrum);
    let fr = achievable_frontier(params, sp, DEFAULT_FRONTIER_POINTS).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for p in &fr.points {
        let q = fr.point_at(p.d_b, p.segment);
        let gap = rel(q.cos_psi, p.cos_psi).max(rel(q.alpha, p.alpha));
        ensure(gap <= 1e-9, || {
            format!("point at d_b {} re-evaluates off by {gap:.2e}", p.d_b)
        })?;
        worst = worst.max(gap);
    }
    let top = max_decay(params, sp.lambda_2());
    let expected = (sp.lambda_2() / params.m).sqrt();
    ensure(
        rel(fr.max_alpha(), expected) <= 1e-9 && rel(top, expected) <= 1e-12,
        || {
            format!(
                "max decay {} vs sqrt(lambda_2/m) {expected}",
                fr.max_alpha()
            )
        },
    )?;

    let c_knee = (sp.lambda_2() / sp.lambda_n()).sqrt();
    let knee = fr
        .points
        .iter()
        .filter(|p| p.segment == FrontierSegment::Linear)
        .last()
        .ok_or("no linear segment")?;
    ensure(rel(knee.cos_psi, c_knee) <= 1e-12, || {
        format!("linear segment ends at {} not {c_knee}", knee.cos_psi)
    })?;
    let (ln, l2, m) = (sp.lambda_n(), sp.lambda_2(), params.m);
    let linear_side = (ln / m).sqrt() * c_knee;
    let nonlinear_side =
        (ln / m).sqrt() * c_knee - (ln * c_knee * c_knee / m - l2 / m).max(0.0).sqrt();
    ensure(
        rel(linear_side, nonlinear_side) <= 1e-9 && rel(knee.alpha, linear_side) <= 1e-9,
        || format!("branches meet at {linear_side} and {nonlinear_side}"),
    )?;
    // approaching the knee from the nonlinear side, the closed forms close the gap like √h
    let root_n = (ln * m).sqrt();
    let mut gaps = Vec::new();
    for h in [1e-4, 1e-6, 1e-8, 1e-10] {
        let c = c_knee * (1.0 + h);
        let q = fr.point_at(
            2.0 * root_n * c - params.d - params.d_t,
            FrontierSegment::Nonlinear,
        );
        gaps.push((knee.alpha - q.alpha).abs() / knee.alpha);
    }
    ensure(
        gaps.windows(2).all(|w| w[1] < w[0]) && gaps[3] < 1e-4,
        || format!("gap across knee does not close: {gaps:?}"),
    )?;
    Ok(format!(
        "{} points, worst round trip {worst:.2e}, max decay {:.6} = sqrt(lambda_2/m), knee at cos {c_knee:.6}",
        fr.points.len(),
        fr.max_alpha()
    ))
}

fn p9() -> Check {
    let mut rng = common::rng(0x5eed_0009);
    let (mut feasible, mut drawn) = (0, 0);
    while feasible < 50 {
        drawn += 1;
        if drawn > 5000 {
            return Err(format!(
                "only {feasible} feasible target sets in {drawn} draws"
            ));
        }
        let n = rng.gen_range(2..=10);
        let params = common::random_params(&mut rng, n);
        let sp = common::random_spectrum(&mut rng, &params);
        let targets = TuningTargets {
            cos_psi_d: rng.gen_range(0.02..0.95),
            alpha_d: rng.gen_range(0.02..0.98) * max_decay(&params, sp.lambda_2()),
            delta_p: rng.gen_range(0.01..0.5),
            delta_omega_d: rng.gen_range(0.002..0.05),
        };
        let Ok(res) = tune_db(&params, &sp, &targets, None) else {
            continue;
        };
        feasible += 1;
        let region = StabilityRegion::from_targets(targets.alpha_d, targets.cos_psi_d)
            .map_err(|e| e.to_string())?;
        let an = analyze_modes(
            &ControllerSpec::Fs { d_b: res.d_b },
            &params,
            sp.mode_gains(),
        )
        .map_err(|e| e.to_string())?;
        let check = check_alpha_psi(&an, &region);
        ensure(check.pass, || {
            let bad: Vec<usize> = check
                .modes
                .iter()
                .filter(|m| !m.pass)
                .map(|m| m.k)
                .collect();
            format!(
                "set {feasible}: modes {bad:?} outside the region at d_b {}",
                res.d_b
            )
        })?;
        // the tuned droop also places every pole individually
        for &lk in sp.mode_gains() {
            let poles = closed_loop_poles(&ControllerSpec::Fs { d_b: res.d_b }, &params, lk)
                .map_err(|e| e.to_string())?;
            ensure(poles.iter().all(|&s| region.contains(s)), || {
                format!("set {feasible}: pole outside at lambda {lk}")
            })?;
        }
    }
    Ok(format!(
        "{feasible} feasible target sets ({drawn} drawn), all modes inside the region"
    ))
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Check); 9] = [
        ("P1", Duration::from_millis(1), p1),
        ("P2", Duration::from_millis(1), p2),
        ("P3", Duration::from_secs(1), p3),
        ("P4", Duration::from_secs(2), p4),
        ("P5", Duration::from_secs(30), p5),
        ("P6", Duration::from_secs(5), p6),
        ("P7", Duration::from_secs(5), p7),
        ("P8", Duration::from_secs(1), p8),
        ("P9", Duration::from_secs(5), p9),
    ];
    let mut failed = 0;
    for (name, budget, run) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let timing = format!(
            "{:.3} ms / budget {:.0} ms",
            elapsed.as_secs_f64() * 1e3,
            budget.as_secs_f64() * 1e3
        );
        match outcome {
            Ok(detail) if elapsed <= budget => println!("{name} PASS [{timing}] {detail}"),
            Ok(detail) => {
                failed += 1;
                println!("{name} FAIL [{timing}] over budget; {detail}");
            }
            Err(why) => {
                failed += 1;
                println!("{name} FAIL [{timing}] {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} of 9 criteria failed");
        std::process::exit(1);
    }
    println!("all 9 criteria passed");
}
