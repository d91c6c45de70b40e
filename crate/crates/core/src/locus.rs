//! Root loci of the FS and VI loop gains with the network eigenvalue as the
//! variable gain, plus the analytic geometry of each locus.

use nalgebra::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::RepresentativeParams;
use crate::poly::{complex_vec, sort_roots, Poly};
use crate::tf::{vi_quadratic, ControllerSpec};
use crate::tuning::vi_mv_min;

pub const DEFAULT_GRID_POINTS: usize = 400;
const DENSIFY: usize = 8;
const DENSIFY_BAND: f64 = 0.2;
const JUMP_FACTOR: f64 = 5.0;
const JUMP_WINDOW: usize = 8;

/// Open-loop gain `num(s)/den(s)` whose closed loop is `den + λ num = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopGain {
    pub num: Poly,
    pub den: Poly,
}

impl LoopGain {
    pub fn characteristic(&self, lambda: f64) -> Poly {
        self.den.add(&self.num.scale(lambda))
    }

    /// `|den + λ num|` relative to the coefficient magnitudes at `s`.
    pub fn residual(&self, lambda: f64, s: Complex<f64>) -> f64 {
        let value = self.den.eval(s) + self.num.eval(s) * lambda;
        let scale = self.den.magnitude_scale(s) + lambda * self.num.magnitude_scale(s);
        value.norm() / scale.max(f64::MIN_POSITIVE)
    }

    /// Real gain at which the locus passes through a real point `x`.
    fn real_gain(&self, x: f64) -> f64 {
        -self.den.eval_real(x) / self.num.eval_real(x)
    }
}

/// FS: `1/(s(ms + d+d_b+d_t))`. VI and no control: `(s + 1/τ)/(M s (s² + 2ξω_n s + ω_n²))`
/// with `M = m + m_v`.
pub fn loop_gain(spec: &ControllerSpec, params: &RepresentativeParams) -> LoopGain {
    let (m, d, d_t, tau) = (params.m, params.d, params.d_t, params.tau);
    match *spec {
        ControllerSpec::Fs { d_b } => LoopGain {
            num: Poly::constant(1.0),
            den: Poly::new(vec![0.0, d + d_b + d_t, m]),
        },
        ControllerSpec::Vi { .. } | ControllerSpec::None => {
            let (d_b, m_v) = (spec.d_b(), spec.m_v());
            let big_m = m + m_v;
            LoopGain {
                num: Poly::new(vec![1.0 / tau, 1.0]),
                den: Poly::new(vec![
                    0.0,
                    (d + d_b + d_t) / tau,
                    big_m / tau + d + d_b,
                    big_m,
                ]),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocusGeometry {
    #[serde(with = "complex_vec")]
    pub open_poles: Vec<Complex<f64>>,
    #[serde(with = "complex_vec")]
    pub open_zeros: Vec<Complex<f64>>,
    pub asymptote_center: f64,
    /// Degrees.
    pub asymptote_angles: Vec<f64>,
    pub break_points: Vec<f64>,
    /// Ratio of the leading coefficients of `den` and `num`.
    pub gain_scale: f64,
}

impl LocusGeometry {
    fn from_loop(lg: &LoopGain) -> Result<Self> {
        let open_poles = lg.den.roots()?;
        let open_zeros = if lg.num.degree() == 0 {
            Vec::new()
        } else {
            lg.num.roots()?
        };
        let excess = open_poles.len() - open_zeros.len();
        let sum_p: f64 = open_poles.iter().map(|p| p.re).sum();
        let sum_z: f64 = open_zeros.iter().map(|z| z.re).sum();
        let asymptote_center = (sum_p - sum_z) / excess as f64;
        let asymptote_angles = (0..excess)
            .map(|q| (2 * q + 1) as f64 * 180.0 / excess as f64)
            .collect();
        Ok(Self {
            open_poles,
            open_zeros,
            asymptote_center,
            asymptote_angles,
            break_points: Vec::new(),
            gain_scale: lg.den.leading() / lg.num.leading(),
        })
    }

    /// Magnitude condition: `λ = gain_scale · Π|s − p| / Π|s − z|`.
    pub fn gain_at_point(&self, s: Complex<f64>) -> f64 {
        let p: f64 = self.open_poles.iter().map(|p| (s - p).norm()).product();
        let z: f64 = self.open_zeros.iter().map(|z| (s - z).norm()).product();
        self.gain_scale * p / z
    }
}

/// Free-function form of [`LocusGeometry::gain_at_point`].
pub fn gain_at_point(geometry: &LocusGeometry, s: Complex<f64>) -> f64 {
    geometry.gain_at_point(s)
}

pub fn fs_locus_geometry(params: &RepresentativeParams, d_b: f64) -> Result<LocusGeometry> {
    let mut g = LocusGeometry::from_loop(&loop_gain(&ControllerSpec::Fs { d_b }, params))?;
    // two poles, no zeros: the break point is the midpoint of the poles
    g.asymptote_center = -(params.d + d_b + params.d_t) / (2.0 * params.m);
    g.break_points = vec![g.asymptote_center];
    Ok(g)
}

pub fn vi_locus_geometry(
    params: &RepresentativeParams,
    d_b: f64,
    m_v: f64,
) -> Result<LocusGeometry> {
    let m_v_min = vi_mv_min(params, d_b);
    if m_v < m_v_min - 1e-12 * m_v_min.abs().max(1.0) {
        return Err(Error::NadirConditionViolated { m_v, m_v_min });
    }
    let spec = ControllerSpec::Vi { d_b, m_v };
    generic_geometry(&spec, params)
}

fn generic_geometry(spec: &ControllerSpec, params: &RepresentativeParams) -> Result<LocusGeometry> {
    let lg = loop_gain(spec, params);
    let mut g = LocusGeometry::from_loop(&lg)?;
    if !matches!(spec, ControllerSpec::Fs { .. }) {
        let q = vi_quadratic(params, spec.d_b(), spec.m_v());
        g.asymptote_center = 0.5 / params.tau - q.xi * q.omega_n;
    }
    g.break_points = real_break_points(&lg)?;
    Ok(g)
}

/// Geometry for any controller kind. VI enforces the Nadir-free condition.
pub fn locus_geometry(
    spec: &ControllerSpec,
    params: &RepresentativeParams,
) -> Result<LocusGeometry> {
    match *spec {
        ControllerSpec::Fs { d_b } => fs_locus_geometry(params, d_b),
        ControllerSpec::Vi { d_b, m_v } => vi_locus_geometry(params, d_b, m_v),
        ControllerSpec::None => generic_geometry(spec, params),
    }
}

/// Real roots of `den'·num − den·num'` at which the locus gain is non-negative,
/// i.e. points of real-axis segments where branches meet.
fn real_break_points(lg: &LoopGain) -> Result<Vec<f64>> {
    let cond = lg
        .den
        .derivative()
        .mul(&lg.num)
        .sub(&lg.den.mul(&lg.num.derivative()));
    if cond.degree() == 0 {
        return Ok(Vec::new());
    }
    let scale = lg.den.roots()?.iter().map(|p| p.norm()).fold(1.0, f64::max);
    let mut out: Vec<f64> = Vec::new();
    for root in cond.roots()? {
        if root.im.abs() > 1e-6 * (scale + root.re.abs()) {
            continue;
        }
        let x = root.re;
        let lambda = lg.real_gain(x);
        let tol = 1e-9 * lg.den.magnitude_scale(Complex::new(x, 0.0))
            / lg.num.magnitude_scale(Complex::new(x, 0.0));
        if lambda.is_finite()
            && lambda >= -tol
            && !out.iter().any(|&y| (y - x).abs() < 1e-6 * scale)
        {
            out.push(x);
        }
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocusPoint {
    pub gain: f64,
    pub re: f64,
    pub im: f64,
}

impl LocusPoint {
    pub fn s(&self) -> Complex<f64> {
        Complex::new(self.re, self.im)
    }
}

/// One closed-loop pole trajectory over an ascending gain grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocusBranch {
    pub branch_id: usize,
    pub points: Vec<LocusPoint>,
}

impl LocusBranch {
    pub fn gains(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.gain).collect()
    }
}

/// 400 log-spaced gains over `[λ₂/100, 100 λ_n]`, refined eightfold within
/// ±20% of every break-point gain.
pub fn default_gain_grid(geometry: &LocusGeometry, lambda_2: f64, lambda_n: f64) -> Vec<f64> {
    let lo = lambda_2 / 100.0;
    let hi = 100.0 * lambda_n;
    let base = log_space(lo, hi, DEFAULT_GRID_POINTS);
    let break_gains: Vec<f64> = geometry
        .break_points
        .iter()
        .map(|&x| geometry.gain_at_point(Complex::new(x, 0.0)))
        .filter(|g| *g > 0.0 && g.is_finite())
        .collect();
    let near = |g: f64| {
        break_gains
            .iter()
            .any(|&b| (g - b).abs() <= DENSIFY_BAND * b)
    };
    let mut grid = Vec::with_capacity(base.len() * 2);
    for w in base.windows(2) {
        grid.push(w[0]);
        if near(w[0]) || near(w[1]) {
            let ratio = (w[1] / w[0]).powf(1.0 / DENSIFY as f64);
            grid.extend((1..DENSIFY).map(|j| w[0] * ratio.powi(j as i32)));
        }
    }
    grid.push(hi);
    grid
}

pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| {
            if i == count - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

/// Merges extra gains into a grid, keeping it ascending and duplicate-free.
/// Where a grid value and an extra gain coincide to rounding, the extra gain
/// is kept exactly.
pub fn merge_gains(grid: &[f64], extra: &[f64]) -> Vec<f64> {
    let mut all: Vec<(f64, bool)> = grid
        .iter()
        .map(|&g| (g, false))
        .chain(extra.iter().map(|&g| (g, true)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, bool)> = Vec::with_capacity(all.len());
    for (g, exact) in all {
        match out.last_mut() {
            Some(last) if (g - last.0).abs() <= 1e-12 * last.0.abs() => {
                if exact && !last.1 {
                    *last = (g, true);
                }
            }
            _ => out.push((g, exact)),
        }
    }
    out.into_iter().map(|(g, _)| g).collect()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Closed-loop roots at every gain, joined into branches by minimum total
/// displacement matching between consecutive gains.
///
/// Moves are divided by `√Δln λ` so uneven grids compare fairly: near a break
/// point roots move as `√Δλ` and stay bounded under this scaling, while away
/// from one an eightfold longer step costs only a factor `√8`. A move beyond
/// five times the median of the branch's last eight is reported as
/// [`Error::BranchJump`]. A step that crosses a break gain may cover
/// `√δ₁ + √δ₂` for gain distances `δ₁, δ₂` on either side, up to `√2` times
/// what the scaling allows, and gets that allowance.
pub fn trace_locus(
    spec: &ControllerSpec,
    params: &RepresentativeParams,
    grid: &[f64],
) -> Result<Vec<LocusBranch>> {
    spec.validate()?;
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty gain grid".into()));
    }
    if grid.iter().any(|g| !(*g > 0.0 && g.is_finite())) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "gain grid must be positive and strictly ascending".into(),
        ));
    }
    let lg = loop_gain(spec, params);
    let roots: Vec<Vec<Complex<f64>>> = grid
        .par_iter()
        .map(|&lambda| lg.characteristic(lambda).roots())
        .collect::<Result<_>>()?;

    let nb = roots[0].len();
    let scale = lg.den.roots()?.iter().map(|p| p.norm()).fold(1.0, f64::max);
    let floor = 1e-9 * scale;
    let break_gains: Vec<f64> = real_break_points(&lg)?
        .into_iter()
        .map(|x| lg.real_gain(x))
        .collect();
    let perms = permutations(nb);

    let mut tracks: Vec<Vec<Complex<f64>>> = roots[0].iter().map(|&z| vec![z]).collect();
    let mut moves: Vec<Vec<f64>> = vec![Vec::new(); nb];
    for (step, next) in roots.iter().enumerate().skip(1) {
        let prev: Vec<Complex<f64>> = tracks.iter().map(|t| *t.last().unwrap()).collect();
        let best = perms
            .iter()
            .map(|p| {
                (
                    p,
                    p.iter()
                        .enumerate()
                        .map(|(b, &j)| (next[j] - prev[b]).norm())
                        .sum::<f64>(),
                )
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
            .0;
        let root_dlog = (grid[step] / grid[step - 1]).ln().sqrt();
        let crossing = break_gains
            .iter()
            .any(|&g| g > grid[step - 1] && g <= grid[step]);
        let allowance = if crossing {
            std::f64::consts::SQRT_2
        } else {
            1.0
        };
        for (b, &j) in best.iter().enumerate() {
            let dist = (next[j] - prev[b]).norm();
            let history = &moves[b];
            if history.len() >= 3 {
                let start = history.len().saturating_sub(JUMP_WINDOW);
                let bound =
                    (allowance * JUMP_FACTOR * median(&mut history[start..].to_vec()) * root_dlog)
                        .max(floor);
                if dist > bound {
                    return Err(Error::BranchJump {
                        gain: grid[step],
                        distance: dist,
                        bound,
                    });
                }
            }
            moves[b].push(dist / root_dlog);
            tracks[b].push(next[j]);
        }
    }
    Ok(tracks
        .into_iter()
        .enumerate()
        .map(|(branch_id, pts)| LocusBranch {
            branch_id,
            points: grid
                .iter()
                .zip(pts)
                .map(|(&gain, s)| LocusPoint {
                    gain,
                    re: s.re,
                    im: s.im,
                })
                .collect(),
        })
        .collect())
}

/// Closed-loop poles at a single gain, sorted.
pub fn closed_loop_poles(
    spec: &ControllerSpec,
    params: &RepresentativeParams,
    lambda: f64,
) -> Result<Vec<Complex<f64>>> {
    let mut r = loop_gain(spec, params).characteristic(lambda).roots()?;
    sort_roots(&mut r);
    Ok(r)
}
