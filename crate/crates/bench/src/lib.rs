//! Synthetic proportional cases for the benchmarks.

use gridshape_core::{Bus, CaseContext, Line, NetworkCase};

/// Ring of `n` buses with chords across from every fifth bus in the first
/// half (none below four buses). Bus parameters scale with
/// a size factor in `[0.5, 2)` so the case is exactly proportional.
pub fn ring_case(n: usize) -> NetworkCase {
    let buses = (0..n)
        .map(|i| {
            let r = 0.5 + 1.5 * ((i * 7919) % 97) as f64 / 97.0;
            Bus {
                id: i as u32 + 1,
                m: 15.0 * r,
                d: 4.0 * r,
                d_t: 15.0 * r,
                tau: 2.0,
                v_mag: 1.0,
                theta0: 0.0,
            }
        })
        .collect();
    let mut lines: Vec<Line> = (0..n)
        .map(|i| Line {
            from: i as u32 + 1,
            to: ((i + 1) % n) as u32 + 1,
            b: 0.5 + (i % 3) as f64 * 0.25,
        })
        .collect();
    if n >= 4 {
        lines.extend((0..n / 2).step_by(5).map(|i| Line {
            from: i as u32 + 1,
            to: (i + n / 2) as u32 + 1,
            b: 0.3,
        }));
    }
    NetworkCase {
        buses,
        lines,
        f0: 60.0,
        s_base: 100.0,
        laplacian_override: None,
    }
}

pub fn ring_context(n: usize) -> CaseContext {
    CaseContext::new(ring_case(n)).expect("ring case is valid")
}

pub fn reference_context() -> CaseContext {
    CaseContext::from_json(include_str!("../../../cases/wscc9_weak.json"))
        .expect("reference case is valid")
}
