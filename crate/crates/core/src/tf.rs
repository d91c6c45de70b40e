//! Rational transfer functions for the generator, the inverter controllers and
//! the decoupled per-mode subsystems.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::RepresentativeParams;
use crate::poly::Poly;
use crate::statespace::StateSpace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalTF {
    pub num: Poly,
    pub den: Poly,
}

impl RationalTF {
    pub fn new(num: Poly, den: Poly) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::InvalidInput(
                "transfer function with zero denominator".into(),
            ));
        }
        Ok(Self { num, den })
    }

    pub fn zero() -> Self {
        Self {
            num: Poly::zero(),
            den: Poly::constant(1.0),
        }
    }

    pub fn eval(&self, s: Complex<f64>) -> Complex<f64> {
        self.num.eval(s) / self.den.eval(s)
    }

    pub fn dc_gain(&self) -> f64 {
        self.num.eval_real(0.0) / self.den.eval_real(0.0)
    }

    pub fn is_proper(&self) -> bool {
        self.num.is_zero() || self.num.degree() <= self.den.degree()
    }

    pub fn poles(&self) -> Result<Vec<Complex<f64>>> {
        self.den.roots()
    }

    pub fn zeros(&self) -> Result<Vec<Complex<f64>>> {
        if self.num.is_zero() {
            return Ok(Vec::new());
        }
        self.num.roots()
    }

    /// Series connection.
    pub fn mul(&self, other: &RationalTF) -> RationalTF {
        RationalTF {
            num: self.num.mul(&other.num),
            den: self.den.mul(&other.den),
        }
    }

    /// Controllable canonical realization. Requires a proper function.
    pub fn to_ss(&self) -> Result<StateSpace> {
        if !self.is_proper() {
            return Err(Error::InvalidInput("improper transfer function".into()));
        }
        let n = self.den.degree();
        let lead = self.den.leading();
        let a: Vec<f64> = self.den.coeffs().iter().map(|c| c / lead).collect();
        let mut b: Vec<f64> = self.num.coeffs().iter().map(|c| c / lead).collect();
        b.resize(n + 1, 0.0);
        let d = b[n];
        let mut am = DMatrix::zeros(n, n);
        for i in 0..n.saturating_sub(1) {
            am[(i, i + 1)] = 1.0;
        }
        for j in 0..n {
            am[(n - 1, j)] = -a[j];
        }
        let mut bm = DMatrix::zeros(n, 1);
        if n > 0 {
            bm[(n - 1, 0)] = 1.0;
        }
        let cm = DMatrix::from_fn(1, n, |_, j| b[j] - d * a[j]);
        let dm = DMatrix::from_element(1, 1, d);
        StateSpace::new(am, bm, cm, dm)
    }
}

/// Inverter control law on the representative bus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ControllerSpec {
    /// Frequency shaping: `d_t/(τs+1) − (d_b + d_t)`.
    Fs {
        d_b: f64,
    },
    /// Virtual inertia: `−(m_v s + d_b)`.
    Vi {
        d_b: f64,
        m_v: f64,
    },
    None,
}

impl ControllerSpec {
    pub fn d_b(&self) -> f64 {
        match *self {
            ControllerSpec::Fs { d_b } | ControllerSpec::Vi { d_b, .. } => d_b,
            ControllerSpec::None => 0.0,
        }
    }

    pub fn m_v(&self) -> f64 {
        match *self {
            ControllerSpec::Vi { m_v, .. } => m_v,
            _ => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (d_b, m_v) = (self.d_b(), self.m_v());
        if !(d_b >= 0.0 && d_b.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "d_b must be non-negative, got {d_b}"
            )));
        }
        if !(m_v >= 0.0 && m_v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "m_v must be non-negative, got {m_v}"
            )));
        }
        Ok(())
    }

    pub fn label(&self) -> &'static str {
        match self {
            ControllerSpec::Fs { .. } => "fs",
            ControllerSpec::Vi { .. } => "vi",
            ControllerSpec::None => "none",
        }
    }
}

/// `(τs+1)/(mτs² + (m+dτ)s + d + d_t)`.
pub fn generator_tf(m: f64, d: f64, d_t: f64, tau: f64) -> RationalTF {
    RationalTF {
        num: Poly::new(vec![1.0, tau]),
        den: Poly::new(vec![d + d_t, m + d * tau, m * tau]),
    }
}

pub fn controller_tf(spec: &ControllerSpec, d_t: f64, tau: f64) -> RationalTF {
    match *spec {
        ControllerSpec::Fs { d_b } => {
            // d_t/(τs+1) − (d_b+d_t) over the common denominator
            let k = d_b + d_t;
            RationalTF {
                num: Poly::new(vec![d_t - k, -k * tau]),
                den: Poly::new(vec![1.0, tau]),
            }
        }
        ControllerSpec::Vi { d_b, m_v } => RationalTF {
            num: Poly::new(vec![-d_b, -m_v]),
            den: Poly::constant(1.0),
        },
        ControllerSpec::None => RationalTF::zero(),
    }
}

/// Natural frequency and damping of the quadratic factor in the VI loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViQuadratic {
    pub omega_n: f64,
    pub xi: f64,
}

pub fn vi_quadratic(params: &RepresentativeParams, d_b: f64, m_v: f64) -> ViQuadratic {
    let big_m = params.m + m_v;
    let total = params.d + d_b + params.d_t;
    let omega_n = (total / (big_m * params.tau)).sqrt();
    let xi = (1.0 / params.tau + (params.d + d_b) / big_m) / (2.0 * omega_n);
    ViQuadratic { omega_n, xi }
}

/// Scalar subsystem seen by mode `k` with scaled-Laplacian eigenvalue `λ_k`.
///
/// The common `s` factor is cancelled when `λ_k = 0`, and for FS the turbine
/// lag `(τs+1)` cancels against the filter, leaving a second-order system.
pub fn mode_subsystem(
    spec: &ControllerSpec,
    params: &RepresentativeParams,
    lambda_k: f64,
) -> RationalTF {
    let (m, d, d_t, tau) = (params.m, params.d, params.d_t, params.tau);
    match *spec {
        ControllerSpec::Fs { d_b } => {
            let total = d + d_b + d_t;
            if lambda_k == 0.0 {
                RationalTF {
                    num: Poly::constant(1.0),
                    den: Poly::new(vec![total, m]),
                }
            } else {
                RationalTF {
                    num: Poly::s(),
                    den: Poly::new(vec![lambda_k, total, m]),
                }
            }
        }
        ControllerSpec::Vi { .. } | ControllerSpec::None => {
            let (d_b, m_v) = (spec.d_b(), spec.m_v());
            let big_m = m + m_v;
            let total = d + d_b + d_t;
            // M(s² + 2ξω_n s + ω_n²) = M s² + (M/τ + d + d_b) s + total/τ
            let q = [total / tau, big_m / tau + d + d_b, big_m];
            if lambda_k == 0.0 {
                RationalTF {
                    num: Poly::new(vec![1.0 / tau, 1.0]),
                    den: Poly::new(q.to_vec()),
                }
            } else {
                RationalTF {
                    num: Poly::new(vec![0.0, 1.0 / tau, 1.0]),
                    den: Poly::new(vec![lambda_k / tau, q[0] + lambda_k, q[1], q[2]]),
                }
            }
        }
    }
}
