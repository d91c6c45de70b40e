//! `gridshape` command line: loads a case, runs one workflow and emits JSON
//! reports and CSV series.
//!
//! Exit status is 0 on success, 1 on invalid input or infeasible targets and
//! 2 on numerical failure; failures print `{code, message, detail}` JSON on
//! stderr.

pub mod tables;

use std::ffi::OsString;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use gridshape_core::api::{
    self, parse_frequency_deviation, CompareRequest, SimMode, SimulationRequest,
};
use gridshape_core::dynamics::DEFAULT_DT;
use gridshape_core::locus::log_space;
use gridshape_core::report::{envelope, to_pretty};
use gridshape_core::tuning::DEFAULT_FRONTIER_POINTS;
use gridshape_core::{
    vi_mv_min, CaseContext, ControllerSpec, StabilityRegion, StepResponse, TuningTargets,
};
use serde_json::{json, Value};

pub const THREADS_ENV: &str = "GRIDSHAPE_THREADS";
/// Disturbance onset (s) when none is given.
pub const DEFAULT_ONSET: f64 = 1.0;

#[derive(Debug, Parser)]
#[command(
    name = "gridshape",
    version,
    about = "Modal analysis and droop tuning for inverter frequency control"
)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
    /// Directory for artifacts; without it the JSON report goes to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-mode damping and decay, closed forms, optional region check.
    Analyze {
        #[command(flatten)]
        case: CaseArg,
        #[command(flatten)]
        controller: ControllerArgs,
        /// Region decay rate (1/s); needs --cospsi.
        #[arg(long, requires = "cospsi")]
        alpha: Option<f64>,
        /// Region damping ratio; needs --alpha.
        #[arg(long, requires = "alpha")]
        cospsi: Option<f64>,
    },
    /// Droop d_b meeting damping, decay and steady-state targets.
    Tune {
        #[command(flatten)]
        case: CaseArg,
        #[arg(long)]
        cospsi: f64,
        #[arg(long)]
        alpha: f64,
        /// Largest power imbalance (pu).
        #[arg(long)]
        dp: f64,
        /// Allowed steady-state deviation: "200mHz", "0.2Hz" or pu.
        #[arg(long)]
        dwd: String,
        /// Use this COI droop instead of the steady-state formula.
        #[arg(long)]
        coi_override: Option<f64>,
        #[arg(long)]
        with_frontier: bool,
    },
    /// Root-locus branches of the mode subsystem over the network gain.
    Locus {
        #[command(flatten)]
        case: CaseArg,
        #[command(flatten)]
        controller: ControllerArgs,
        /// Log-spaced gain grid: lowest gain; needs --grid-max and --grid-points.
        #[arg(long, requires_all = ["grid_max", "grid_points"])]
        grid_min: Option<f64>,
        #[arg(long, requires = "grid_min")]
        grid_max: Option<f64>,
        #[arg(long, requires = "grid_min")]
        grid_points: Option<usize>,
    },
    /// Achievable (damping, decay) pairs over the FS droop.
    Frontier {
        #[command(flatten)]
        case: CaseArg,
        #[arg(long, default_value_t = DEFAULT_FRONTIER_POINTS)]
        points: usize,
    },
    /// Step response to a power disturbance.
    Simulate {
        #[command(flatten)]
        case: CaseArg,
        #[command(flatten)]
        controller: ControllerArgs,
        #[command(flatten)]
        disturbance: Disturbance,
        #[arg(long, default_value_t = DEFAULT_ONSET)]
        onset: f64,
        #[arg(long, default_value_t = gridshape_core::dynamics::DEFAULT_T_END)]
        t_end: f64,
        /// Modal by default; direct when --heterogeneous is given.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Simulate the case's own bus parameters.
        #[arg(long)]
        heterogeneous: bool,
    },
    /// FS against VI at equal droop, with envelope fits and the rate test.
    Compare {
        #[command(flatten)]
        case: CaseArg,
        #[arg(long)]
        db: f64,
        /// Virtual inertia; the Nadir-free minimum when omitted.
        #[arg(long)]
        mv: Option<f64>,
        #[command(flatten)]
        disturbance: Disturbance,
        #[arg(long, default_value_t = api::COMPARE_T_END)]
        t_end: f64,
    },
    /// Start the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "gridshape-data")]
        data_dir: PathBuf,
        /// Allowed CORS origin, repeatable; "*" for any.
        #[arg(long)]
        cors: Vec<String>,
    },
}

#[derive(Debug, Args)]
pub struct CaseArg {
    /// Case file (JSON).
    #[arg(long = "case")]
    pub path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ControllerKind {
    Fs,
    Vi,
    None,
}

#[derive(Debug, Args)]
pub struct ControllerArgs {
    #[arg(long, value_enum, default_value_t = ControllerKind::Fs)]
    pub controller: ControllerKind,
    /// Inverter droop (pu).
    #[arg(long, default_value_t = 0.0)]
    pub db: f64,
    /// Virtual inertia for VI; the Nadir-free minimum when omitted.
    #[arg(long)]
    pub mv: Option<f64>,
}

impl ControllerArgs {
    pub fn spec(&self, ctx: &CaseContext) -> ControllerSpec {
        match self.controller {
            ControllerKind::Fs => ControllerSpec::Fs { d_b: self.db },
            ControllerKind::Vi => ControllerSpec::Vi {
                d_b: self.db,
                m_v: self
                    .mv
                    .unwrap_or_else(|| vi_mv_min(&ctx.params, self.db).max(0.0)),
            },
            ControllerKind::None => ControllerSpec::None,
        }
    }
}

#[derive(Debug, Args)]
pub struct Disturbance {
    /// Per-bus power step (pu), comma separated, e.g. "-0.2,0,0".
    #[arg(long, allow_hyphen_values = true)]
    pub u0: String,
    #[arg(long, default_value_t = DEFAULT_DT)]
    pub dt: f64,
}

impl Disturbance {
    fn vector(&self) -> Result<Vec<f64>, CliError> {
        self.u0
            .split(',')
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::usage(format!("cannot read u0 entry {:?}", x.trim())))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Modal,
    Direct,
    Both,
}

#[derive(Debug, Clone)]
pub struct CliError {
    pub exit: i32,
    pub code: String,
    pub message: String,
    pub detail: Value,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            exit: 1,
            code: "usage".into(),
            message: message.into(),
            detail: json!({}),
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self {
            exit: 1,
            code: "io_error".into(),
            message: format!("{}: {e}", path.display()),
            detail: json!({}),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({ "code": self.code, "message": self.message, "detail": self.detail })
    }
}

impl From<gridshape_core::Error> for CliError {
    fn from(e: gridshape_core::Error) -> Self {
        Self {
            exit: if e.is_numeric() { 2 } else { 1 },
            code: e.code().into(),
            message: e.to_string(),
            detail: e.detail(),
        }
    }
}

/// A named output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

struct Emitter {
    format: Format,
    artifacts: Vec<Artifact>,
}

impl Emitter {
    fn json(&self) -> bool {
        self.format != Format::Csv
    }

    fn csv(&self) -> bool {
        self.format != Format::Json
    }

    fn report<T: serde::Serialize>(
        &mut self,
        name: &str,
        kind: &str,
        hash: &str,
        body: &T,
    ) -> Result<(), CliError> {
        if self.json() {
            let value = envelope(kind, Some(hash), body)?;
            self.artifacts.push(Artifact {
                name: format!("{name}.json"),
                contents: to_pretty(&value) + "\n",
            });
        }
        Ok(())
    }

    fn table(&mut self, name: &str, table: tables::Table) {
        if self.csv() {
            let mut buf = Vec::new();
            tables::write(&mut buf, &table).expect("csv into memory");
            self.push_csv(name, buf);
        }
    }

    fn response(&mut self, name: &str, r: &StepResponse) -> Result<(), CliError> {
        if self.csv() {
            let mut buf = Vec::new();
            r.write_csv(&mut buf)?;
            self.push_csv(name, buf);
        }
        Ok(())
    }

    fn push_csv(&mut self, name: &str, buf: Vec<u8>) {
        self.artifacts.push(Artifact {
            name: format!("{name}.csv"),
            contents: String::from_utf8(buf).expect("csv is utf-8"),
        });
    }
}

fn load(case: &CaseArg) -> Result<CaseContext, CliError> {
    let text = fs::read_to_string(&case.path).map_err(|e| CliError::io(&case.path, e))?;
    Ok(CaseContext::from_json(&text)?)
}

/// Runs an analysis command and returns its artifacts.
pub fn run(config: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let mut em = Emitter {
        format: config.format,
        artifacts: Vec::new(),
    };
    match &config.command {
        Command::Analyze {
            case,
            controller,
            alpha,
            cospsi,
        } => {
            let ctx = load(case)?;
            let region = match (alpha, cospsi) {
                (Some(a), Some(c)) => Some(StabilityRegion::from_targets(*a, *c)?),
                _ => None,
            };
            let report = api::analyze(&ctx, &controller.spec(&ctx), region)?;
            em.report("analyze", "analysis", &ctx.hash, &report)?;
            em.table("analyze_modes", tables::modes(&report));
        }
        Command::Tune {
            case,
            cospsi,
            alpha,
            dp,
            dwd,
            coi_override,
            with_frontier,
        } => {
            let ctx = load(case)?;
            let targets = TuningTargets {
                cos_psi_d: *cospsi,
                alpha_d: *alpha,
                delta_p: *dp,
                delta_omega_d: parse_frequency_deviation(dwd, ctx.case.f0)?,
            };
            let report = api::tune(&ctx, &targets, *coi_override, *with_frontier || em.csv())?;
            em.report("tune", "tuning", &ctx.hash, &report)?;
            if let Some(points) = &report.frontier {
                em.table("tune_frontier", tables::frontier(points));
            }
        }
        Command::Locus {
            case,
            controller,
            grid_min,
            grid_max,
            grid_points,
        } => {
            let ctx = load(case)?;
            let grid = match (grid_min, grid_max, grid_points) {
                (Some(lo), Some(hi), Some(k)) => {
                    if !(*lo > 0.0 && hi > lo && *k >= 2) {
                        return Err(CliError::usage(
                            "grid needs 0 < --grid-min < --grid-max and --grid-points >= 2",
                        ));
                    }
                    Some(log_space(*lo, *hi, *k))
                }
                _ => None,
            };
            let report = api::locus(&ctx, &controller.spec(&ctx), grid)?;
            em.report("locus", "locus", &ctx.hash, &report)?;
            em.table("locus", tables::locus(&report));
        }
        Command::Frontier { case, points } => {
            let ctx = load(case)?;
            if *points < 2 {
                return Err(CliError::usage("--points must be at least 2"));
            }
            let report = api::frontier(&ctx, *points)?;
            em.report("frontier", "frontier", &ctx.hash, &report)?;
            em.table("frontier", tables::frontier(&report.points));
        }
        Command::Simulate {
            case,
            controller,
            disturbance,
            onset,
            t_end,
            mode,
            heterogeneous,
        } => {
            let ctx = load(case)?;
            let mode = match (mode, heterogeneous) {
                (Some(ModeArg::Modal), true) => {
                    return Err(CliError::usage(
                        "--heterogeneous needs --mode direct or both",
                    ));
                }
                (Some(ModeArg::Modal), false) | (None, false) => SimMode::Modal,
                (Some(ModeArg::Direct), _) | (None, true) => SimMode::Direct,
                (Some(ModeArg::Both), _) => SimMode::Both,
            };
            let req = SimulationRequest {
                controller: controller.spec(&ctx),
                u0: disturbance.vector()?,
                t_end: *t_end,
                dt: disturbance.dt,
                onset: *onset,
                mode,
                heterogeneous: *heterogeneous,
            };
            let report = api::simulate(&ctx, &req)?;
            em.report("simulate", "simulation", &ctx.hash, &report)?;
            if let Some(r) = &report.modal {
                em.response("simulate_modal", r)?;
            }
            if let Some(r) = &report.direct {
                em.response("simulate_direct", r)?;
            }
        }
        Command::Compare {
            case,
            db,
            mv,
            disturbance,
            t_end,
        } => {
            let ctx = load(case)?;
            let req = CompareRequest {
                d_b: *db,
                m_v: *mv,
                u0: disturbance.vector()?,
                t_end: *t_end,
                dt: disturbance.dt,
                include_series: em.csv(),
            };
            let report = api::compare(&ctx, &req)?;
            em.report("compare", "comparison", &ctx.hash, &report)?;
            for (name, run) in [("compare_fs", &report.fs), ("compare_vi", &report.vi)] {
                if let Some(r) = &run.response {
                    em.response(name, r)?;
                }
            }
        }
        Command::Serve { .. } => return Err(CliError::usage("serve does not produce artifacts")),
    }
    Ok(em.artifacts)
}

fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::usage(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(None),
    }
}

fn serve(
    host: &str,
    port: u16,
    data_dir: &Path,
    cors: &[String],
    threads: Option<usize>,
) -> Result<(), CliError> {
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|_| CliError::usage(format!("cannot bind to {host}:{port}")))?;
    let _ = tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .try_init();
    let mut rt = tokio::runtime::Builder::new_multi_thread();
    rt.enable_all();
    if let Some(n) = threads {
        rt.worker_threads(n).max_blocking_threads(n);
    }
    let rt = rt.build().map_err(|e| CliError::io(data_dir, e))?;
    let config = gridshape_service::ServiceConfig {
        data_dir: data_dir.into(),
        cors_origins: cors.to_vec(),
    };
    rt.block_on(gridshape_service::serve(config, addr))
        .map_err(|e| CliError::io(data_dir, e))
}

fn execute(config: &RunConfig, threads: Option<usize>) -> Result<(), CliError> {
    if let Command::Serve {
        host,
        port,
        data_dir,
        cors,
    } = &config.command
    {
        return serve(host, *port, data_dir, cors, threads);
    }
    let artifacts = run(config)?;
    match &config.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            for a in &artifacts {
                let path = dir.join(&a.name);
                fs::write(&path, &a.contents).map_err(|e| CliError::io(&path, e))?;
                println!("{}", path.display());
            }
        }
        None => {
            if config.format == Format::Csv {
                return Err(CliError::usage("--format csv needs --out"));
            }
            for a in artifacts.iter().filter(|a| a.name.ends_with(".json")) {
                print!("{}", a.contents);
            }
        }
    }
    Ok(())
}

/// Parses arguments, runs, and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let result = RunConfig::try_parse_from(args)
        .map_err(|e| match e.kind() {
            clap::error::ErrorKind::DisplayHelp
            | clap::error::ErrorKind::DisplayVersion
            | clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                let _ = e.print();
                None
            }
            _ => Some(CliError::usage(e.to_string().trim_end().to_string())),
        })
        .and_then(|config| {
            let threads = threads_from_env().map_err(Some)?;
            if let Some(n) = threads {
                // the pool can only be configured once per process
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            execute(&config, threads).map_err(Some)
        });
    match result {
        Ok(()) | Err(None) => 0,
        Err(Some(e)) => {
            eprintln!("{}", e.to_json());
            e.exit
        }
    }
}
