//! Pole-region checks, the closed-form FS damping and decay minima, rate
//! comparisons between FS and VI, and exponential envelope fits.

use nalgebra::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::StepResponse;
use crate::error::{Error, Result};
use crate::locus::closed_loop_poles;
use crate::netmodel::RepresentativeParams;
use crate::poly::complex_vec;
use crate::tf::{vi_quadratic, ControllerSpec};
use crate::tuning::vi_mv_min;

/// Poles closer than this to the origin have no defined damping ratio.
pub const ORIGIN_TOL: f64 = 1e-10;

/// Relative slack on region membership. Tuned droops put the binding pole
/// exactly on the region boundary, where eigensolver rounding decides the sign.
pub const REGION_RTOL: f64 = 1e-9;

/// `S_{α,ψ}`: `Re s ≤ −α` and `−Re s/|s| ≥ cos ψ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityRegion {
    pub alpha: f64,
    /// Half-angle in radians.
    pub psi: f64,
}

impl StabilityRegion {
    pub fn new(alpha: f64, psi: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&psi) {
            return Err(Error::InvalidInput(format!(
                "psi must lie in [0, pi/2), got {psi}"
            )));
        }
        Ok(Self { alpha, psi })
    }

    pub fn from_targets(alpha: f64, cos_psi: f64) -> Result<Self> {
        if !(cos_psi > 0.0 && cos_psi <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "cos psi must lie in (0, 1], got {cos_psi}"
            )));
        }
        Self::new(alpha, cos_psi.acos())
    }

    pub fn contains(&self, s: Complex<f64>) -> bool {
        if s.norm() < ORIGIN_TOL {
            return false;
        }
        s.re <= -self.alpha * (1.0 - REGION_RTOL) && pole_damping(s) >= self.psi.cos() - REGION_RTOL
    }
}

/// `−Re s/|s|`; exactly 1 on the negative real axis.
pub fn pole_damping(s: Complex<f64>) -> f64 {
    if s.im == 0.0 && s.re < 0.0 {
        return 1.0;
    }
    let r = s.norm();
    if r < ORIGIN_TOL {
        return 0.0;
    }
    -s.re / r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub k: usize,
    pub lambda_k: f64,
    #[serde(with = "complex_vec")]
    pub poles: Vec<Complex<f64>>,
    pub damping: f64,
    pub decay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeAnalysis {
    /// Oscillatory modes `k = 2..n` (1-based).
    pub per_mode: Vec<ModeReport>,
    pub min_damping: f64,
    pub min_decay: f64,
    pub argmin_damping_mode: usize,
    pub argmin_decay_mode: usize,
}

/// Closed-loop poles, damping and decay of every oscillatory mode.
///
/// `mode_gains` are `λ₂..λ_n`. Ties in the minima resolve to the lowest `k`.
pub fn analyze_modes(
    spec: &ControllerSpec,
    params: &RepresentativeParams,
    mode_gains: &[f64],
) -> Result<ModeAnalysis> {
    spec.validate()?;
    if mode_gains.is_empty() {
        return Err(Error::InvalidInput("no oscillatory modes".into()));
    }
    let per_mode: Vec<ModeReport> = mode_gains
        .par_iter()
        .enumerate()
        .map(|(i, &lambda_k)| -> Result<ModeReport> {
            let poles = closed_loop_poles(spec, params, lambda_k)?;
            let damping = poles
                .iter()
                .map(|&s| pole_damping(s))
                .fold(f64::INFINITY, f64::min);
            let decay = poles.iter().map(|s| -s.re).fold(f64::INFINITY, f64::min);
            Ok(ModeReport {
                k: i + 2,
                lambda_k,
                poles,
                damping,
                decay,
            })
        })
        .collect::<Result<_>>()?;
    let argmin = |f: fn(&ModeReport) -> f64| {
        per_mode
            .iter()
            .fold(None::<&ModeReport>, |best, m| match best {
                Some(b) if f(b) <= f(m) => Some(b),
                _ => Some(m),
            })
            .unwrap()
    };
    let dmin = argmin(|m| m.damping);
    let amin = argmin(|m| m.decay);
    Ok(ModeAnalysis {
        min_damping: dmin.damping,
        min_decay: amin.decay,
        argmin_damping_mode: dmin.k,
        argmin_decay_mode: amin.k,
        per_mode,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeCheck {
    pub k: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionCheck {
    pub region: StabilityRegion,
    pub modes: Vec<ModeCheck>,
    pub pass: bool,
}

pub fn check_alpha_psi(analysis: &ModeAnalysis, region: &StabilityRegion) -> RegionCheck {
    let modes: Vec<ModeCheck> = analysis
        .per_mode
        .iter()
        .map(|m| ModeCheck {
            k: m.k,
            pass: m.poles.iter().all(|&s| region.contains(s)),
        })
        .collect();
    let pass = modes.iter().all(|m| m.pass);
    RegionCheck {
        region: *region,
        modes,
        pass,
    }
}

fn total_damping(params: &RepresentativeParams, d_b: f64) -> f64 {
    params.d + d_b + params.d_t
}

/// Smallest damping ratio over the FS oscillatory modes (attained at `λ_n`).
pub fn fs_min_damping(params: &RepresentativeParams, d_b: f64, lambda_n: f64) -> f64 {
    let root = (lambda_n * params.m).sqrt();
    let total = total_damping(params, d_b);
    if total < 2.0 * root {
        total / (2.0 * root)
    } else {
        1.0
    }
}

/// Smallest decay rate over the FS oscillatory modes (attained at `λ₂`).
pub fn fs_min_decay(params: &RepresentativeParams, d_b: f64, lambda_2: f64) -> f64 {
    let m = params.m;
    let total = total_damping(params, d_b);
    let disc = total * total - 4.0 * lambda_2 * m;
    // a discriminant within rounding of zero is the double root itself
    if disc <= 8.0 * f64::EPSILON * total * total {
        total / (2.0 * m)
    } else {
        // (total − √disc)/(2m) without cancellation
        2.0 * lambda_2 / (total + disc.sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRates {
    pub coi_rate: f64,
    pub system_rate: f64,
}

pub fn fs_convergence_rate(
    params: &RepresentativeParams,
    d_b: f64,
    lambda_2: f64,
) -> ConvergenceRates {
    let rates = ConvergenceRates {
        coi_rate: total_damping(params, d_b) / params.m,
        system_rate: fs_min_decay(params, d_b, lambda_2),
    };
    debug_assert!(rates.coi_rate > rates.system_rate);
    rates
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViRateBound {
    pub omega_n: f64,
    pub xi: f64,
}

/// Rate ceiling `ω_n` of the VI response under the Nadir-free condition.
pub fn vi_rate_bound(params: &RepresentativeParams, d_b: f64, m_v: f64) -> Result<ViRateBound> {
    let m_v_min = vi_mv_min(params, d_b);
    if m_v < m_v_min * (1.0 - 1e-12) {
        return Err(Error::NadirConditionViolated { m_v, m_v_min });
    }
    let q = vi_quadratic(params, d_b, m_v);
    Ok(ViRateBound {
        omega_n: q.omega_n,
        xi: q.xi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateComparison {
    pub fs_faster: bool,
    /// `√(d+d_b+d_t) √((m+m_v)τ)/m`.
    pub lhs: f64,
    pub margin: f64,
}

pub fn fs_beats_vi(params: &RepresentativeParams, d_b: f64, m_v: f64) -> RateComparison {
    let lhs = total_damping(params, d_b).sqrt() * ((params.m + m_v) * params.tau).sqrt() / params.m;
    RateComparison {
        fs_faster: lhs > 2.0,
        lhs,
        margin: lhs - 2.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub rate: f64,
    pub amplitude: f64,
    /// RMS residual of the log-linear fit.
    pub residual: f64,
    pub samples: usize,
}

/// Fits `δ e^{−ρt}` to the peaks of `‖ω(t) − steady‖` after the global peak.
pub fn fit_envelope(resp: &StepResponse, steady: &[f64]) -> Result<EnvelopeFit> {
    if steady.len() != resp.n_buses() {
        return Err(Error::InvalidInput(
            "steady state has the wrong length".into(),
        ));
    }
    fit_envelope_series(&resp.t, &resp.deviation_norm(steady))
}

/// Envelope fit on a non-negative deviation series.
pub fn fit_envelope_series(t: &[f64], dev: &[f64]) -> Result<EnvelopeFit> {
    let (peak_idx, peak) =
        dev.iter().enumerate().fold(
            (0, 0.0f64),
            |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
        );
    let final_dev = dev.last().copied().unwrap_or(0.0);
    if !(peak > 0.0) || !(final_dev < 0.01 * peak) {
        return Err(Error::NotSettled {
            final_dev,
            peak_dev: peak,
        });
    }
    let floor = 1e-9 * peak;
    let tail = &dev[peak_idx..];
    let mut pts: Vec<(f64, f64)> = vec![(t[peak_idx], peak)];
    for i in 1..tail.len().saturating_sub(1) {
        let v = tail[i];
        if v >= tail[i - 1] && v > tail[i + 1] && v > floor {
            pts.push((t[peak_idx + i], v));
        }
    }
    if pts.len() < 3 {
        pts = tail
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > floor)
            .map(|(i, &v)| (t[peak_idx + i], v))
            .collect();
    }
    if pts.len() < 2 {
        return Err(Error::NotSettled {
            final_dev,
            peak_dev: peak,
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1.ln() - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts
        .iter()
        .map(|p| (p.1.ln() - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(EnvelopeFit {
        rate: -slope,
        amplitude: intercept.exp(),
        residual,
        samples: pts.len(),
    })
}
