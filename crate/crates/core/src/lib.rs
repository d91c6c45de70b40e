//! Modal analysis and tuning of inverter frequency control on linearized
//! power networks.
//!
//! Under proportional bus parameters the network frequency dynamics split
//! into scalar subsystems, one per eigenvalue of the scaled Laplacian. The
//! crate builds those subsystems for frequency-shaping (FS) and
//! virtual-inertia (VI) inverters, traces their root loci, evaluates damping
//! and decay in closed form, tunes the inverter droop, and checks the result
//! against direct simulation of the full heterogeneous closed loop.
//!
//! ```
//! use gridshape_core::{RepresentativeParams, ScaledSpectrum, TuningTargets, tune_db};
//!
//! let params = RepresentativeParams::homogeneous(15.37, 4.37, 15.0, 2.19, 3).unwrap();
//! let spectrum = ScaledSpectrum::from_modes(vec![1.0; 3], &[120.0, 4967.96]).unwrap();
//! let targets = TuningTargets { cos_psi_d: 0.1, alpha_d: 0.2, delta_p: 0.2, delta_omega_d: 0.2 / 60.0 };
//! let tuned = tune_db(&params, &spectrum, &targets, Some(0.0)).unwrap();
//! assert!((tuned.d_b - 35.89).abs() < 0.01);
//! ```

pub mod api;
pub mod dynamics;
pub mod error;
pub mod locus;
pub mod netmodel;
pub mod poly;
pub mod report;
pub mod stability;
pub mod statespace;
pub mod tf;
pub mod tuning;

pub use nalgebra::Complex;

pub use api::CaseContext;
pub use dynamics::{
    full_system_ss, modal_step_response, scaled_controllers, step_response, BusController,
    BusSystem, StepResponse,
};
pub use error::{Error, Result};
pub use locus::{
    fs_locus_geometry, gain_at_point, locus_geometry, trace_locus, vi_locus_geometry, LocusBranch,
    LocusGeometry, LocusPoint,
};
pub use netmodel::{
    build_laplacian, representative_params, scaled_spectrum, Bus, Line, MeanInertia, NetworkCase,
    ProportionalityConvention, RepresentativeParams, ScaledSpectrum,
};
pub use poly::Poly;
pub use stability::{
    analyze_modes, check_alpha_psi, fit_envelope, fs_beats_vi, fs_convergence_rate, fs_min_damping,
    fs_min_decay, vi_rate_bound, EnvelopeFit, ModeAnalysis, StabilityRegion,
};
pub use statespace::StateSpace;
pub use tf::{controller_tf, generator_tf, mode_subsystem, ControllerSpec, RationalTF};
pub use tuning::{
    achievable_frontier, frontier_project, tune_db, tune_db_coi, tune_db_osc, vi_mv_min, Frontier,
    FrontierPoint, Projection, Regime, TuningResult, TuningTargets,
};
