//! Inverse-droop tuning for FS from frequency-security and oscillation
//! targets, the Nadir-free VI inertia, and the achievable damping/decay
//! frontier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{RepresentativeParams, ScaledSpectrum};
use crate::stability::{fs_min_damping, fs_min_decay};

pub const DEFAULT_FRONTIER_POINTS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningTargets {
    /// Minimum damping ratio, in (0, 1].
    pub cos_psi_d: f64,
    /// Minimum decay rate (1/s).
    pub alpha_d: f64,
    /// Largest net power imbalance (pu).
    pub delta_p: f64,
    /// Allowed steady-state frequency deviation (pu).
    pub delta_omega_d: f64,
}

impl TuningTargets {
    pub fn validate(&self) -> Result<()> {
        if !(self.cos_psi_d > 0.0 && self.cos_psi_d <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "cos_psi_d must lie in (0, 1], got {}",
                self.cos_psi_d
            )));
        }
        for (name, v) in [
            ("alpha_d", self.alpha_d),
            ("delta_p", self.delta_p),
            ("delta_omega_d", self.delta_omega_d),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Final droop below `2√(λ₂m) − d − d_t`: both closed forms on their
    /// linear branch.
    LinearBoth,
    /// Past the decay switch point but within the relaxed bound, so the
    /// decay target still holds on the nonlinear branch.
    RelaxedCoi,
    Infeasible,
    /// Droop beyond `2√(λ_n m) − d − d_t`: every mode is overdamped.
    SaturatedDamping,
}

/// Droop values at which the closed forms change branch, for given targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeBounds {
    /// `2√(λ₂m) − d − d_t`.
    pub decay_switch: f64,
    /// `2√(λ_n m) − d − d_t`.
    pub damping_saturation: f64,
    /// `(mα_d² + λ₂)/α_d − d − d_t`.
    pub relaxed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Achieved {
    pub cos_psi_bar: f64,
    pub alpha_bar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    /// Damping and decay terms before clamping at zero.
    pub osc_terms: [f64; 2],
    pub d_b_osc: f64,
    /// Value used in the composition (the override, when given).
    pub d_b_coi: f64,
    /// Value from the steady-state formula, reported even when overridden.
    pub d_b_coi_formula: f64,
    pub coi_overridden: bool,
    pub d_b: f64,
    pub regime: Regime,
    pub bounds: RegimeBounds,
    pub achieved: Achieved,
    pub m_v_min: f64,
}

fn base(params: &RepresentativeParams) -> f64 {
    params.d + params.d_t
}

/// Largest decay rate FS can reach, `√(λ₂/m)`.
pub fn max_decay(params: &RepresentativeParams, lambda_2: f64) -> f64 {
    (lambda_2 / params.m).sqrt()
}

/// `[2√(λ_n m) cos ψ_d − d − d_t, 2mα_d − d − d_t]`.
pub fn osc_terms(
    params: &RepresentativeParams,
    spectrum: &ScaledSpectrum,
    targets: &TuningTargets,
) -> [f64; 2] {
    let m = params.m;
    [
        2.0 * (spectrum.lambda_n() * m).sqrt() * targets.cos_psi_d - base(params),
        2.0 * m * targets.alpha_d - base(params),
    ]
}

pub fn tune_db_osc(
    params: &RepresentativeParams,
    spectrum: &ScaledSpectrum,
    targets: &TuningTargets,
) -> Result<f64> {
    targets.validate()?;
    let limit = max_decay(params, spectrum.lambda_2());
    if targets.alpha_d >= limit {
        return Err(Error::InfeasibleDecayTarget {
            alpha_d: targets.alpha_d,
            max_decay: limit,
        });
    }
    let [a, b] = osc_terms(params, spectrum, targets);
    Ok(0.0f64.max(a).max(b))
}

/// Droop keeping the steady-state COI deviation within `Δω_d` for `ΔP`.
pub fn tune_db_coi(params: &RepresentativeParams, targets: &TuningTargets) -> f64 {
    (targets.delta_p / (params.r_sum * targets.delta_omega_d) - base(params)).max(0.0)
}

pub fn regime_bounds(
    params: &RepresentativeParams,
    spectrum: &ScaledSpectrum,
    alpha_d: f64,
) -> RegimeBounds {
    let m = params.m;
    let l2 = spectrum.lambda_2();
    RegimeBounds {
        decay_switch: 2.0 * (l2 * m).sqrt() - base(params),
        damping_saturation: 2.0 * (spectrum.lambda_n() * m).sqrt() - base(params),
        relaxed: (m * alpha_d * alpha_d + l2) / alpha_d - base(params),
    }
}

/// `d_b = max(d_b,COI, d_b,osc)` with regime classification.
///
/// `coi_override` replaces the steady-state droop component, e.g. when the
/// uncontrolled response is already judged adequate.
pub fn tune_db(
    params: &RepresentativeParams,
    spectrum: &ScaledSpectrum,
    targets: &TuningTargets,
    coi_override: Option<f64>,
) -> Result<TuningResult> {
    targets.validate()?;
    if let Some(v) = coi_override {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "coi override must be non-negative, got {v}"
            )));
        }
    }
    let d_b_osc = tune_db_osc(params, spectrum, targets)?;
    let d_b_coi_formula = tune_db_coi(params, targets);
    let d_b_coi = coi_override.unwrap_or(d_b_coi_formula);
    let d_b = d_b_osc.max(d_b_coi);
    let bounds = regime_bounds(params, spectrum, targets.alpha_d);

    let regime = if d_b < bounds.decay_switch {
        Regime::LinearBoth
    } else if d_b > bounds.relaxed {
        return Err(if d_b_coi >= d_b_osc {
            Error::CoiDroopExceedsRelaxedBound {
                d_b_coi,
                bound: bounds.relaxed,
            }
        } else {
            Error::OscDroopExceedsDecayBound {
                d_b_osc,
                bound: bounds.relaxed,
            }
        });
    } else if d_b >= bounds.damping_saturation {
        Regime::SaturatedDamping
    } else {
        Regime::RelaxedCoi
    };

    Ok(TuningResult {
        osc_terms: osc_terms(params, spectrum, targets),
        d_b_osc,
        d_b_coi,
        d_b_coi_formula,
        coi_overridden: coi_override.is_some(),
        d_b,
        regime,
        bounds,
        achieved: Achieved {
            cos_psi_bar: fs_min_damping(params, d_b, spectrum.lambda_n()),
            alpha_bar: fs_min_decay(params, d_b, spectrum.lambda_2()),
        },
        m_v_min: vi_mv_min(params, d_b),
    })
}

/// Smallest virtual inertia for a Nadir-free VI response,
/// `τ(√d_t + √(d + d_b + d_t))² − m`.
pub fn vi_mv_min(params: &RepresentativeParams, d_b: f64) -> f64 {
    let s = params.d_t.sqrt() + (params.d + d_b + params.d_t).sqrt();
    params.tau * s * s - params.m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrontierSegment {
    /// Damping and decay both linear in `d_b`.
    Linear,
    /// Decay on its nonlinear branch, damping still linear.
    Nonlinear,
    /// Damping saturated at 1; decay falls as `d_b` grows.
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub cos_psi: f64,
    pub alpha: f64,
    pub d_b: f64,
    pub segment: FrontierSegment,
}

/// Achievable `(cos ψ̄, α̲)` pairs together with the model they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    pub points: Vec<FrontierPoint>,
    pub params: RepresentativeParams,
    pub lambda_2: f64,
    pub lambda_n: f64,
}

impl Frontier {
    pub fn point_at(&self, d_b: f64, segment: FrontierSegment) -> FrontierPoint {
        FrontierPoint {
            cos_psi: fs_min_damping(&self.params, d_b, self.lambda_n),
            alpha: fs_min_decay(&self.params, d_b, self.lambda_2),
            d_b,
            segment,
        }
    }

    pub fn max_alpha(&self) -> f64 {
        self.points.iter().map(|p| p.alpha).fold(0.0, f64::max)
    }
}

/// `count` points on `[a, b]` clustered towards both ends.
fn cosine_spaced(a: f64, b: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![a];
    }
    (0..count)
        .map(|j| {
            let u = 0.5 * (1.0 - (std::f64::consts::PI * j as f64 / (count - 1) as f64).cos());
            if j == count - 1 {
                b
            } else {
                a + (b - a) * u
            }
        })
        .collect()
}

/// Frontier traced by the closed-form minima as `d_b` grows from zero.
///
/// The vertical segment is sampled down to 1% of its top decay rate; it
/// continues towards zero decay as `d_b → ∞`.
pub fn achievable_frontier(
    params: &RepresentativeParams,
    spectrum: &ScaledSpectrum,
    n_points: usize,
) -> Result<Frontier> {
    if n_points < 2 {
        return Err(Error::InvalidInput(
            "frontier needs at least two points per branch".into(),
        ));
    }
    let (l2, ln, m) = (spectrum.lambda_2(), spectrum.lambda_n(), params.m);
    let root_n = (ln * m).sqrt();
    let c_lo = base(params) / (2.0 * root_n);
    let c_knee = (l2 / ln).sqrt().min(1.0);
    let mut points = Vec::with_capacity(3 * n_points);

    if c_lo <= c_knee {
        for c in cosine_spaced(c_lo, c_knee, n_points) {
            points.push(FrontierPoint {
                cos_psi: c,
                alpha: (ln / m).sqrt() * c,
                d_b: (2.0 * root_n * c - base(params)).max(0.0),
                segment: FrontierSegment::Linear,
            });
        }
    }
    let c_start = c_lo.max(c_knee);
    if c_start < 1.0 - 1e-9 {
        let cs = cosine_spaced(c_start, 1.0, n_points + 1);
        // the knee belongs to the linear branch when that branch exists, 1 to the vertical segment
        let skip_first = c_lo <= c_knee;
        for (j, &c) in cs.iter().enumerate() {
            if (j == 0 && skip_first) || j == cs.len() - 1 {
                continue;
            }
            // (a − b) written as (a² − b²)/(a + b) to avoid cancellation near c = 1
            let alpha =
                (l2 / m) / ((ln / m).sqrt() * c + (ln * c * c / m - l2 / m).max(0.0).sqrt());
            points.push(FrontierPoint {
                cos_psi: c,
                alpha,
                d_b: 2.0 * root_n * c - base(params),
                segment: FrontierSegment::Nonlinear,
            });
        }
    }
    let sat = (2.0 * root_n - base(params)).max(0.0);
    let alpha_top = fs_min_decay(params, sat, l2);
    for a in cosine_spaced(alpha_top, 0.01 * alpha_top, n_points) {
        points.push(FrontierPoint {
            cos_psi: 1.0,
            alpha: a,
            d_b: (m * a * a + l2) / a - base(params),
            segment: FrontierSegment::Vertical,
        });
    }
    if let Some(first) = points
        .iter_mut()
        .find(|p| p.segment == FrontierSegment::Vertical)
    {
        first.d_b = sat;
    }
    Ok(Frontier {
        points,
        params: params.clone(),
        lambda_2: l2,
        lambda_n: ln,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Projection {
    Feasible { point: FrontierPoint },
    Infeasible { reason: String },
}

/// Cheapest frontier point dominating the targets component-wise.
///
/// The damping target needs `d_b ≥ d₁`; the decay target holds on the
/// interval `[lo, hi]` around the decay peak. The answer is `max(d₁, lo)`
/// when it does not exceed `hi`.
pub fn frontier_project(targets: &TuningTargets, frontier: &Frontier) -> Projection {
    let p = &frontier.params;
    let (m, l2) = (p.m, frontier.lambda_2);
    let cos_d = targets.cos_psi_d;
    let alpha_d = targets.alpha_d;
    if !(cos_d > 0.0 && cos_d <= 1.0) || !(alpha_d > 0.0) {
        return Projection::Infeasible {
            reason: "targets out of range".into(),
        };
    }
    let limit = (l2 / m).sqrt();
    if alpha_d > limit * (1.0 + 1e-12) {
        return Projection::Infeasible {
            reason: format!("decay target {alpha_d} exceeds the largest achievable decay {limit}"),
        };
    }
    let d1 = (2.0 * (frontier.lambda_n * m).sqrt() * cos_d - base(p)).max(0.0);
    let lo = (2.0 * m * alpha_d - base(p)).max(0.0);
    let hi = (m * alpha_d * alpha_d + l2) / alpha_d - base(p);
    let d_b = d1.max(lo);
    let tol = 1e-12 * (1.0 + hi.abs());
    if d_b > hi + tol {
        return Projection::Infeasible {
            reason: format!(
                "damping target needs d_b = {d_b}, beyond {hi} where the decay target is lost"
            ),
        };
    }
    let point = frontier.point_at(d_b, segment_of(p, frontier, d_b));
    Projection::Feasible { point }
}

fn segment_of(p: &RepresentativeParams, frontier: &Frontier, d_b: f64) -> FrontierSegment {
    let switch = 2.0 * (frontier.lambda_2 * p.m).sqrt() - base(p);
    let sat = 2.0 * (frontier.lambda_n * p.m).sqrt() - base(p);
    if d_b >= sat {
        FrontierSegment::Vertical
    } else if d_b <= switch {
        FrontierSegment::Linear
    } else {
        FrontierSegment::Nonlinear
    }
}
