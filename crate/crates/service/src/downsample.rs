//! Min/max bucket decimation of trajectories for large responses.

use gridshape_core::StepResponse;

/// Responses serializing beyond this many bytes are decimated.
pub const MAX_BODY_BYTES: usize = 1_000_000;
pub const MAX_POINTS: usize = 4000;

fn bucket_bounds(len: usize, buckets: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..buckets).map(move |k| (k * len / buckets, (k + 1) * len / buckets))
}

/// Keeps each series' minimum and maximum in every bucket, in time order.
/// Two points per bucket sit at the bucket's first and last sample times.
fn decimate(x: &[f64], buckets: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * buckets);
    for (a, b) in bucket_bounds(x.len(), buckets) {
        let slice = &x[a..b];
        let (mut lo, mut hi) = (0, 0);
        for (i, v) in slice.iter().enumerate() {
            if *v < slice[lo] {
                lo = i;
            }
            if *v > slice[hi] {
                hi = i;
            }
        }
        let (first, second) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        out.push(slice[first]);
        out.push(slice[second]);
    }
    out
}

/// Decimates to at most `max_points` samples per series; short responses
/// come back unchanged.
pub fn downsample(resp: &StepResponse, max_points: usize) -> StepResponse {
    let len = resp.len();
    if len <= max_points || max_points < 2 {
        return resp.clone();
    }
    let buckets = max_points / 2;
    let t = bucket_bounds(len, buckets)
        .flat_map(|(a, b)| [resp.t[a], resp.t[b - 1]])
        .collect();
    StepResponse {
        t,
        omega: resp.omega.iter().map(|x| decimate(x, buckets)).collect(),
        coi: decimate(&resp.coi, buckets),
        p_inv: resp.p_inv.iter().map(|x| decimate(x, buckets)).collect(),
        u0: resp.u0.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(len: usize) -> StepResponse {
        let t: Vec<f64> = (0..len).map(|k| k as f64 * 0.01).collect();
        let wave: Vec<f64> = t
            .iter()
            .map(|x| (7.0 * x).sin() * (-0.1 * x).exp())
            .collect();
        StepResponse {
            coi: wave.clone(),
            omega: vec![wave.clone(); 2],
            p_inv: vec![wave; 2],
            t,
            u0: vec![0.0; 2],
        }
    }

    #[test]
    fn keeps_extremes_and_length_bound() {
        let r = ramp(100_003);
        let d = downsample(&r, MAX_POINTS);
        assert!(d.len() <= MAX_POINTS);
        assert_eq!(d.omega[0].len(), d.len());
        let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(max(&d.coi), max(&r.coi));
        assert_eq!(min(&d.coi), min(&r.coi));
        assert!(d.t.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(d.t[0], r.t[0]);
        assert_eq!(*d.t.last().unwrap(), *r.t.last().unwrap());
    }

    #[test]
    fn short_series_pass_through() {
        let r = ramp(500);
        assert_eq!(downsample(&r, MAX_POINTS), r);
    }
}
