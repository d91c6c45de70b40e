use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gridshape_bench::{reference_context, ring_context};
use gridshape_core::api::{self, SimMode, SimulationRequest};
use gridshape_core::{analyze_modes, tune_db, vi_mv_min, ControllerSpec, TuningTargets};
use std::hint::black_box;

const TARGETS: TuningTargets = TuningTargets {
    cos_psi_d: 0.1,
    alpha_d: 0.2,
    delta_p: 0.2,
    delta_omega_d: 0.2 / 60.0,
};

fn tuning(c: &mut Criterion) {
    let ctx = reference_context();
    c.bench_function("tune_db/reference", |b| {
        b.iter(|| tune_db(&ctx.params, &ctx.spectrum, black_box(&TARGETS), Some(0.0)).unwrap())
    });
    c.bench_function("frontier/256", |b| {
        b.iter(|| api::frontier(&ctx, black_box(256)).unwrap())
    });
}

fn modes(c: &mut Criterion) {
    let mut g = c.benchmark_group("analyze_modes");
    for n in [10, 200] {
        let ctx = ring_context(n);
        let spec = ControllerSpec::Vi {
            d_b: 20.0,
            m_v: vi_mv_min(&ctx.params, 20.0).max(0.0),
        };
        g.bench_with_input(BenchmarkId::new("vi", n), &n, |b, _| {
            b.iter(|| {
                analyze_modes(black_box(&spec), &ctx.params, ctx.spectrum.mode_gains()).unwrap()
            })
        });
    }
    g.finish();
}

fn locus(c: &mut Criterion) {
    let ctx = reference_context();
    let mut g = c.benchmark_group("locus");
    let vi = ControllerSpec::Vi {
        d_b: 35.89,
        m_v: vi_mv_min(&ctx.params, 35.89),
    };
    for (name, spec) in [("fs", ControllerSpec::Fs { d_b: 35.89 }), ("vi", vi)] {
        g.bench_function(name, |b| {
            b.iter(|| api::locus(&ctx, black_box(&spec), None).unwrap())
        });
    }
    g.finish();
}

fn simulation(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulate");
    g.sample_size(10);
    for n in [10, 40] {
        let ctx = ring_context(n);
        let mut u0 = vec![0.0; n];
        u0[0] = -0.2;
        for mode in [SimMode::Modal, SimMode::Direct] {
            let req = SimulationRequest {
                controller: ControllerSpec::Fs { d_b: 20.0 },
                u0: u0.clone(),
                t_end: 20.0,
                dt: 0.01,
                onset: 0.0,
                mode,
                heterogeneous: false,
            };
            g.bench_with_input(
                BenchmarkId::new(format!("{mode:?}").to_lowercase(), n),
                &n,
                |b, _| b.iter(|| api::simulate(&ctx, black_box(&req)).unwrap()),
            );
        }
    }
    g.finish();
}

criterion_group!(benches, tuning, modes, locus, simulation);
criterion_main!(benches);
