use serde_json::{json, Value};
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid case: {0}")]
    InvalidCase(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("network graph is not connected")]
    DisconnectedGraph,

    #[error("line {from}-{to} has non-positive weight {weight} (equilibrium angle difference >= 90 degrees?)")]
    NonPositiveWeight { from: u32, to: u32, weight: f64 },

    #[error("laplacian override rejected: {0}")]
    InvalidOverride(String),

    #[error("eigensolver failed to converge")]
    EigensolveFailure,

    #[error(
        "bus {bus} has non-positive total inertia; controller feedthrough makes the loop algebraic"
    )]
    AlgebraicLoop { bus: usize },

    #[error("simulation state became non-finite at step {step}")]
    NonFiniteState { step: usize },

    #[error("virtual inertia {m_v} is below the Nadir-free minimum {m_v_min}")]
    NadirConditionViolated { m_v: f64, m_v_min: f64 },

    #[error("locus continuation jumped {distance:.3e} at gain {gain:.6e} (bound {bound:.3e}); refine the gain grid")]
    BranchJump {
        gain: f64,
        distance: f64,
        bound: f64,
    },

    #[error("response has not settled (final deviation {final_dev:.3e}, peak {peak_dev:.3e})")]
    NotSettled { final_dev: f64, peak_dev: f64 },

    #[error("decay target {alpha_d} is not below the largest achievable decay sqrt(lambda_2/m) = {max_decay}")]
    InfeasibleDecayTarget { alpha_d: f64, max_decay: f64 },

    #[error("COI droop {d_b_coi} exceeds the relaxed bound {bound} for the decay target")]
    CoiDroopExceedsRelaxedBound { d_b_coi: f64, bound: f64 },

    #[error("damping target needs droop {d_b_osc} beyond {bound}, where the decay target is lost")]
    OscDroopExceedsDecayBound { d_b_osc: f64, bound: f64 },
}

impl Error {
    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidCase(_) => "invalid_case",
            Error::InvalidInput(_) => "invalid_input",
            Error::DisconnectedGraph => "disconnected_graph",
            Error::NonPositiveWeight { .. } => "non_positive_weight",
            Error::InvalidOverride(_) => "invalid_override",
            Error::EigensolveFailure => "eigensolve_failure",
            Error::AlgebraicLoop { .. } => "algebraic_loop",
            Error::NonFiniteState { .. } => "non_finite_state",
            Error::NadirConditionViolated { .. } => "nadir_condition_violated",
            Error::BranchJump { .. } => "branch_jump",
            Error::NotSettled { .. } => "not_settled",
            Error::InfeasibleDecayTarget { .. } => "infeasible_decay_target",
            Error::CoiDroopExceedsRelaxedBound { .. } => "coi_droop_exceeds_relaxed_bound",
            Error::OscDroopExceedsDecayBound { .. } => "osc_droop_exceeds_decay_bound",
        }
    }

    /// Failures of the numerics rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::EigensolveFailure
                | Error::NonFiniteState { .. }
                | Error::BranchJump { .. }
                | Error::NotSettled { .. }
        )
    }

    /// Variant fields as JSON, with the violated bound for infeasible targets.
    pub fn detail(&self) -> Value {
        match self {
            Error::InvalidCase(m) | Error::InvalidInput(m) | Error::InvalidOverride(m) => {
                json!({ "reason": m })
            }
            Error::DisconnectedGraph | Error::EigensolveFailure => json!({}),
            Error::NonPositiveWeight { from, to, weight } => {
                json!({ "from": from, "to": to, "weight": weight })
            }
            Error::AlgebraicLoop { bus } => json!({ "bus": bus }),
            Error::NonFiniteState { step } => json!({ "step": step }),
            Error::NadirConditionViolated { m_v, m_v_min } => {
                json!({ "m_v": m_v, "m_v_min": m_v_min })
            }
            Error::BranchJump {
                gain,
                distance,
                bound,
            } => json!({ "gain": gain, "distance": distance, "bound": bound }),
            Error::NotSettled {
                final_dev,
                peak_dev,
            } => json!({ "final_dev": final_dev, "peak_dev": peak_dev }),
            Error::InfeasibleDecayTarget { alpha_d, max_decay } => {
                json!({ "alpha_d": alpha_d, "bound": max_decay })
            }
            Error::CoiDroopExceedsRelaxedBound { d_b_coi, bound } => {
                json!({ "d_b_coi": d_b_coi, "bound": bound })
            }
            Error::OscDroopExceedsDecayBound { d_b_osc, bound } => {
                json!({ "d_b_osc": d_b_osc, "bound": bound })
            }
        }
    }

    /// Tuning targets that cannot be met.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::InfeasibleDecayTarget { .. }
                | Error::CoiDroopExceedsRelaxedBound { .. }
                | Error::OscDroopExceedsDecayBound { .. }
        )
    }
}
