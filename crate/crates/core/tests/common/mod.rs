#![allow(dead_code)]

use std::path::PathBuf;

use gridshape_core::{Bus, Line, NetworkCase, RepresentativeParams, ScaledSpectrum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn reference_case_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../cases/wscc9_weak.json")
}

pub fn reference_case() -> NetworkCase {
    NetworkCase::from_json(&std::fs::read_to_string(reference_case_path()).unwrap()).unwrap()
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Representative generator with `n` proportionality factors in `[0.3, 3]`.
pub fn random_params(rng: &mut ChaCha8Rng, n: usize) -> RepresentativeParams {
    let r = (0..n).map(|_| rng.gen_range(0.3..3.0)).collect();
    RepresentativeParams::new(
        rng.gen_range(2.0..30.0),
        rng.gen_range(0.2..10.0),
        rng.gen_range(2.0..30.0),
        rng.gen_range(0.5..5.0),
        r,
    )
    .unwrap()
}

/// Sorted `λ₂..λ_n`, log-uniform over `[1, 10⁴]`.
pub fn random_mode_gains(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut g: Vec<f64> = (1..n).map(|_| log_uniform(rng, 1.0, 1e4)).collect();
    g.sort_by(f64::total_cmp);
    g
}

/// Connected network (random spanning tree plus extra lines) whose buses are
/// exact `r_i` multiples of `params`.
pub fn random_proportional_case(
    rng: &mut ChaCha8Rng,
    params: &RepresentativeParams,
) -> NetworkCase {
    let n = params.n();
    let buses = params
        .r
        .iter()
        .enumerate()
        .map(|(i, &r)| Bus {
            id: i as u32 + 1,
            m: r * params.m,
            d: r * params.d,
            d_t: r * params.d_t,
            tau: params.tau,
            v_mag: rng.gen_range(0.95..1.05),
            theta0: rng.gen_range(-0.3..0.3),
        })
        .collect();
    let mut lines = Vec::new();
    let mut pairs = std::collections::HashSet::new();
    for i in 1..n {
        let j = rng.gen_range(0..i);
        pairs.insert((j, i));
        lines.push(Line {
            from: j as u32 + 1,
            to: i as u32 + 1,
            b: log_uniform(rng, 0.02, 2.0),
        });
    }
    for _ in 0..n / 2 {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let key = (a.min(b), a.max(b));
        if a != b && pairs.insert(key) {
            lines.push(Line {
                from: key.0 as u32 + 1,
                to: key.1 as u32 + 1,
                b: log_uniform(rng, 0.02, 2.0),
            });
        }
    }
    NetworkCase {
        buses,
        lines,
        f0: 60.0,
        s_base: 100.0,
        laplacian_override: None,
    }
}

pub fn random_spectrum(rng: &mut ChaCha8Rng, params: &RepresentativeParams) -> ScaledSpectrum {
    let gains = random_mode_gains(rng, params.n());
    ScaledSpectrum::from_modes(params.r.clone(), &gains).unwrap()
}

/// Relative distance between two equally sized root multisets, matched greedily
/// after sorting.
pub fn root_set_distance(
    a: &[gridshape_core::Complex<f64>],
    b: &[gridshape_core::Complex<f64>],
) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[j] = true;
        worst = worst.max(d / x.norm().max(1.0));
    }
    worst
}
