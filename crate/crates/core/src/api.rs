//! End-to-end workflows shared by the command line and the HTTP service.
//! Each returns a serializable report body; wrap it with
//! [`crate::report::envelope`] for output.

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    full_system_ss, modal_step_response, scaled_controllers, step_response, StepResponse,
    DEFAULT_DT, DEFAULT_T_END,
};
use crate::error::{Error, Result};
use crate::locus::{
    default_gain_grid, locus_geometry, merge_gains, trace_locus, LocusBranch, LocusGeometry,
};
use crate::netmodel::{
    build_laplacian, representative_params, scaled_spectrum, NetworkCase, RepresentativeParams,
    ScaledSpectrum,
};
use crate::report::case_hash;
use crate::stability::{
    analyze_modes, check_alpha_psi, fit_envelope, fs_beats_vi, fs_convergence_rate, fs_min_damping,
    fs_min_decay, vi_rate_bound, ConvergenceRates, EnvelopeFit, ModeReport, RateComparison,
    RegionCheck, StabilityRegion, ViRateBound,
};
use crate::tf::ControllerSpec;
use crate::tuning::{
    achievable_frontier, frontier_project, tune_db, vi_mv_min, FrontierPoint, Projection,
    TuningResult, TuningTargets, DEFAULT_FRONTIER_POINTS,
};

/// Parses a frequency deviation as `"200mHz"`, `"0.2Hz"` or a bare per-unit
/// number, returning per-unit on the nominal frequency `f0`.
pub fn parse_frequency_deviation(text: &str, f0: f64) -> Result<f64> {
    let t = text.trim();
    let lower = t.to_ascii_lowercase();
    let (number, scale) = if let Some(v) = lower.strip_suffix("mhz") {
        (v, 1e-3 / f0)
    } else if let Some(v) = lower.strip_suffix("hz") {
        (v, 1.0 / f0)
    } else if let Some(v) = lower.strip_suffix("pu") {
        (v, 1.0)
    } else {
        (lower.as_str(), 1.0)
    };
    let x: f64 = number
        .trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("cannot read frequency deviation {t:?}")))?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "frequency deviation must be positive, got {t:?}"
        )));
    }
    Ok(x * scale)
}

/// A validated case with its representative generator and scaled spectrum.
#[derive(Debug, Clone)]
pub struct CaseContext {
    pub case: NetworkCase,
    pub hash: String,
    pub params: RepresentativeParams,
    pub spectrum: ScaledSpectrum,
}

impl CaseContext {
    pub fn new(case: NetworkCase) -> Result<Self> {
        case.validate()?;
        let params = representative_params(&case)?;
        let l_b = build_laplacian(&case)?;
        let spectrum = scaled_spectrum(&l_b, &params.r)?;
        Ok(Self {
            hash: case_hash(&case),
            case,
            params,
            spectrum,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::new(NetworkCase::from_json(text)?)
    }

    pub fn n(&self) -> usize {
        self.case.n()
    }

    /// Steady-state bus frequency for a disturbance under the proportional model.
    pub fn steady_state(&self, spec: &ControllerSpec, u0: &[f64]) -> Vec<f64> {
        let total = self.params.d + spec.d_b() + self.params.d_t;
        vec![u0.iter().sum::<f64>() / (total * self.params.r_sum); self.n()]
    }

    fn check_u0(&self, u0: &[f64]) -> Result<()> {
        if u0.len() != self.n() {
            return Err(Error::InvalidInput(format!(
                "u0 has {} entries, case has {} buses",
                u0.len(),
                self.n()
            )));
        }
        if u0.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("u0 has non-finite entries".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub n: usize,
    pub params: RepresentativeParams,
    pub lambda: Vec<f64>,
    pub lambda_2: f64,
    pub lambda_n: f64,
    pub l_b: Vec<Vec<f64>>,
    pub l: Vec<Vec<f64>>,
    /// Eigenvectors as rows: `v[k]` is `v_{k+1}`.
    pub v: Vec<Vec<f64>>,
}

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

pub fn spectrum_report(ctx: &CaseContext) -> SpectrumReport {
    let s = &ctx.spectrum;
    SpectrumReport {
        n: s.n(),
        params: ctx.params.clone(),
        lambda: s.lambda.clone(),
        lambda_2: s.lambda_2(),
        lambda_n: s.lambda_n(),
        l_b: rows(&s.l_b),
        l: rows(&s.l),
        v: rows(&s.v.transpose()),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClosedForms {
    pub min_damping: f64,
    pub min_decay: f64,
    pub rates: ConvergenceRates,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub controller: ControllerSpec,
    pub params: RepresentativeParams,
    pub lambda_2: f64,
    pub lambda_n: f64,
    pub per_mode: Vec<ModeReport>,
    pub min_damping: f64,
    pub min_decay: f64,
    pub argmin_damping_mode: usize,
    pub argmin_decay_mode: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<ClosedForms>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vi_bound: Option<ViRateBound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region: Option<StabilityRegion>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region_check: Option<RegionCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pass: Option<bool>,
}

pub fn analyze(
    ctx: &CaseContext,
    spec: &ControllerSpec,
    region: Option<StabilityRegion>,
) -> Result<AnalysisReport> {
    let s = &ctx.spectrum;
    let a = analyze_modes(spec, &ctx.params, s.mode_gains())?;
    let closed_form = match *spec {
        ControllerSpec::Fs { d_b } => Some(ClosedForms {
            min_damping: fs_min_damping(&ctx.params, d_b, s.lambda_n()),
            min_decay: fs_min_decay(&ctx.params, d_b, s.lambda_2()),
            rates: fs_convergence_rate(&ctx.params, d_b, s.lambda_2()),
        }),
        _ => None,
    };
    let vi_bound = match *spec {
        ControllerSpec::Vi { d_b, m_v } => vi_rate_bound(&ctx.params, d_b, m_v).ok(),
        _ => None,
    };
    let region_check = region.as_ref().map(|r| check_alpha_psi(&a, r));
    Ok(AnalysisReport {
        controller: *spec,
        params: ctx.params.clone(),
        lambda_2: s.lambda_2(),
        lambda_n: s.lambda_n(),
        min_damping: a.min_damping,
        min_decay: a.min_decay,
        argmin_damping_mode: a.argmin_damping_mode,
        argmin_decay_mode: a.argmin_decay_mode,
        per_mode: a.per_mode,
        closed_form,
        vi_bound,
        pass: region_check.as_ref().map(|c| c.pass),
        region,
        region_check,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuningInputs {
    pub targets: TuningTargets,
    pub coi_override: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuningReport {
    pub inputs: TuningInputs,
    pub lambda_2: f64,
    pub lambda_n: f64,
    #[serde(flatten)]
    pub result: TuningResult,
    pub projection: Projection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frontier: Option<Vec<FrontierPoint>>,
}

pub fn tune(
    ctx: &CaseContext,
    targets: &TuningTargets,
    coi_override: Option<f64>,
    with_frontier: bool,
) -> Result<TuningReport> {
    let result = tune_db(&ctx.params, &ctx.spectrum, targets, coi_override)?;
    let frontier = achievable_frontier(&ctx.params, &ctx.spectrum, DEFAULT_FRONTIER_POINTS)?;
    Ok(TuningReport {
        inputs: TuningInputs {
            targets: *targets,
            coi_override,
        },
        lambda_2: ctx.spectrum.lambda_2(),
        lambda_n: ctx.spectrum.lambda_n(),
        result,
        projection: frontier_project(targets, &frontier),
        frontier: with_frontier.then_some(frontier.points),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocusReport {
    pub controller: ControllerSpec,
    pub geometry: LocusGeometry,
    /// Network eigenvalues `λ₂..λ_n`, where the modes sit on the locus.
    pub mode_gains: Vec<f64>,
    pub branches: Vec<LocusBranch>,
}

/// Traces the locus on the given grid, or on the default grid refined at the
/// mode gains.
pub fn locus(
    ctx: &CaseContext,
    spec: &ControllerSpec,
    grid: Option<Vec<f64>>,
) -> Result<LocusReport> {
    let geometry = locus_geometry(spec, &ctx.params)?;
    let s = &ctx.spectrum;
    let grid = match grid {
        Some(g) => g,
        None => merge_gains(
            &default_gain_grid(&geometry, s.lambda_2(), s.lambda_n()),
            s.mode_gains(),
        ),
    };
    let branches = trace_locus(spec, &ctx.params, &grid)?;
    Ok(LocusReport {
        controller: *spec,
        geometry,
        mode_gains: s.mode_gains().to_vec(),
        branches,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrontierReport {
    pub lambda_2: f64,
    pub lambda_n: f64,
    pub max_alpha: f64,
    pub points: Vec<FrontierPoint>,
}

pub fn frontier(ctx: &CaseContext, n_points: usize) -> Result<FrontierReport> {
    let f = achievable_frontier(&ctx.params, &ctx.spectrum, n_points)?;
    Ok(FrontierReport {
        lambda_2: f.lambda_2,
        lambda_n: f.lambda_n,
        max_alpha: f.max_alpha(),
        points: f.points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    #[default]
    Modal,
    Direct,
    Both,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationRequest {
    pub controller: ControllerSpec,
    pub u0: Vec<f64>,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Time of the step (s); the response is zero before it.
    #[serde(default)]
    pub onset: f64,
    #[serde(default)]
    pub mode: SimMode,
    /// Direct simulation on the case's own bus parameters instead of their
    /// proportional version.
    #[serde(default)]
    pub heterogeneous: bool,
}

fn default_t_end() -> f64 {
    DEFAULT_T_END
}

fn default_compare_t_end() -> f64 {
    COMPARE_T_END
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationReport {
    pub controller: ControllerSpec,
    pub mode: SimMode,
    pub heterogeneous: bool,
    pub onset: f64,
    pub steady_state: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modal: Option<StepResponse>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direct: Option<StepResponse>,
    /// Largest modal/direct frequency difference when both ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_discrepancy: Option<f64>,
}

pub fn simulate(ctx: &CaseContext, req: &SimulationRequest) -> Result<SimulationReport> {
    req.controller.validate()?;
    ctx.check_u0(&req.u0)?;
    if !(req.onset >= 0.0 && req.onset < req.t_end) {
        return Err(Error::InvalidInput(format!(
            "onset must lie in [0, t_end), got {}",
            req.onset
        )));
    }
    let span = req.t_end - req.onset;
    let modal = match req.mode {
        SimMode::Modal | SimMode::Both => Some(modal_step_response(
            &req.controller,
            &ctx.params,
            &ctx.spectrum,
            &req.u0,
            span,
            req.dt,
        )?),
        SimMode::Direct => None,
    };
    let mut steady = ctx.steady_state(&req.controller, &req.u0);
    let direct = match req.mode {
        SimMode::Direct | SimMode::Both => {
            let case = if req.heterogeneous {
                ctx.case.clone()
            } else {
                ctx.case.proportionalized(&ctx.params)
            };
            let controllers = scaled_controllers(&req.controller, &ctx.params);
            let sys = full_system_ss(&case, &controllers)?;
            if req.heterogeneous {
                let g = sys.ss.dc_gain()?;
                let u = nalgebra::DVector::from_column_slice(&req.u0);
                let y = g * u;
                steady = (0..ctx.n()).map(|i| y[i]).collect();
            }
            Some(step_response(&sys, &req.u0, span, req.dt)?)
        }
        SimMode::Modal => None,
    };
    let max_discrepancy = match (&modal, &direct) {
        (Some(a), Some(b)) => Some(a.max_omega_diff(b)),
        _ => None,
    };
    Ok(SimulationReport {
        controller: req.controller,
        mode: req.mode,
        heterogeneous: req.heterogeneous,
        onset: req.onset,
        steady_state: steady,
        modal: modal.map(|r| r.delayed(req.onset)),
        direct: direct.map(|r| r.delayed(req.onset)),
        max_discrepancy,
    })
}

/// Comparison horizon. A Nadir-free VI response decays at no more than `ω_n`,
/// which on weak networks is too slow to settle within the simulation default.
pub const COMPARE_T_END: f64 = 120.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareRequest {
    pub d_b: f64,
    /// Defaults to the Nadir-free minimum for `d_b`.
    #[serde(default)]
    pub m_v: Option<f64>,
    pub u0: Vec<f64>,
    #[serde(default = "default_compare_t_end")]
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub include_series: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControllerRun {
    pub controller: ControllerSpec,
    pub envelope: EnvelopeFit,
    /// Closed-form rate the fit is judged against: the FS minimum decay or
    /// the VI ceiling `ω_n`.
    pub reference_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response: Option<StepResponse>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareReport {
    pub d_b: f64,
    pub m_v: f64,
    pub m_v_min: f64,
    pub fs: ControllerRun,
    pub vi: ControllerRun,
    pub vi_bound: ViRateBound,
    pub rate_test: RateComparison,
    /// Whether the fitted FS envelope decays faster than the VI one.
    pub fitted_fs_faster: bool,
}

/// Paired FS and VI simulations at equal droop with envelope fits.
pub fn compare(ctx: &CaseContext, req: &CompareRequest) -> Result<CompareReport> {
    ctx.check_u0(&req.u0)?;
    let m_v_min = vi_mv_min(&ctx.params, req.d_b);
    let m_v = req.m_v.unwrap_or(m_v_min);
    let fs_spec = ControllerSpec::Fs { d_b: req.d_b };
    let vi_spec = ControllerSpec::Vi { d_b: req.d_b, m_v };
    fs_spec.validate()?;
    vi_spec.validate()?;
    let vi_bound = vi_rate_bound(&ctx.params, req.d_b, m_v)?;
    let run = |spec: ControllerSpec, reference_rate: f64| -> Result<ControllerRun> {
        let resp = modal_step_response(
            &spec,
            &ctx.params,
            &ctx.spectrum,
            &req.u0,
            req.t_end,
            req.dt,
        )?;
        let envelope = fit_envelope(&resp, &ctx.steady_state(&spec, &req.u0))?;
        Ok(ControllerRun {
            controller: spec,
            envelope,
            reference_rate,
            response: req.include_series.then_some(resp),
        })
    };
    let fs = run(
        fs_spec,
        fs_min_decay(&ctx.params, req.d_b, ctx.spectrum.lambda_2()),
    )?;
    let vi = run(vi_spec, vi_bound.omega_n)?;
    Ok(CompareReport {
        d_b: req.d_b,
        m_v,
        m_v_min,
        fitted_fs_faster: fs.envelope.rate > vi.envelope.rate,
        rate_test: fs_beats_vi(&ctx.params, req.d_b, m_v),
        vi_bound,
        fs,
        vi,
    })
}
