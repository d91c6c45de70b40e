//! Closed-loop bus dynamics: the full heterogeneous state-space model and the
//! modal (decoupled) step response for proportional cases.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{build_laplacian, NetworkCase, RepresentativeParams, ScaledSpectrum};
use crate::statespace::{time_grid, StateSpace};
use crate::tf::{controller_tf, mode_subsystem, ControllerSpec};

pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_T_END: f64 = 40.0;

/// Controller installed at a single bus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BusController {
    /// `d_t/(τs+1) − (d_b + d_t)` with the filter's own `d_t`, `τ`.
    Fs {
        d_b: f64,
        d_t: f64,
        tau: f64,
    },
    /// `−(m_v s + d_b)`.
    Vi {
        d_b: f64,
        m_v: f64,
    },
    None,
}

/// Per-bus controllers `ĉ_i = r_i ĉ_o` built from the representative design.
pub fn scaled_controllers(
    spec: &ControllerSpec,
    params: &RepresentativeParams,
) -> Vec<BusController> {
    params
        .r
        .iter()
        .map(|&r| match *spec {
            ControllerSpec::Fs { d_b } => BusController::Fs {
                d_b: r * d_b,
                d_t: r * params.d_t,
                tau: params.tau,
            },
            ControllerSpec::Vi { d_b, m_v } => BusController::Vi {
                d_b: r * d_b,
                m_v: r * m_v,
            },
            ControllerSpec::None => BusController::None,
        })
        .collect()
}

/// State-space model of the interconnected buses with the bookkeeping needed
/// to interpret its outputs.
#[derive(Debug, Clone)]
pub struct BusSystem {
    /// Inputs: bus power disturbances. Outputs: `ω_1..ω_n` then `p_b,1..p_b,n`.
    pub ss: StateSpace,
    /// `m̌_i = m_i + m_v,i`, the weights of the COI frequency.
    pub total_inertia: Vec<f64>,
}

impl BusSystem {
    pub fn n_buses(&self) -> usize {
        self.total_inertia.len()
    }
}

/// Assembles the closed loop of generators, turbines, inverters and network.
///
/// States per bus are the frequency and turbine power, plus one filter state
/// for each FS inverter, followed by `n−1` angle differences `θ_j − θ_n`.
/// Virtual inertia is folded into the swing equation as `m_i + m_v,i`.
pub fn full_system_ss(case: &NetworkCase, controllers: &[BusController]) -> Result<BusSystem> {
    let n = case.n();
    if controllers.len() != n {
        return Err(Error::InvalidInput(format!(
            "{} controllers for {n} buses",
            controllers.len()
        )));
    }
    let l_b = build_laplacian(case)?;

    let mut filter_index = vec![None; n];
    let mut n_c = 0;
    for (i, c) in controllers.iter().enumerate() {
        match *c {
            BusController::Fs { d_b, d_t, tau } => {
                if !(d_b >= 0.0 && d_t >= 0.0 && tau > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "bus {i}: invalid FS controller"
                    )));
                }
                filter_index[i] = Some(2 * n + n_c);
                n_c += 1;
            }
            BusController::Vi { d_b, m_v } => {
                if !(d_b >= 0.0 && d_b.is_finite() && m_v.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "bus {i}: invalid VI controller"
                    )));
                }
            }
            BusController::None => {}
        }
    }
    let delta0 = 2 * n + n_c;
    let nx = delta0 + n - 1;

    let mut a = DMatrix::zeros(nx, nx);
    let mut b = DMatrix::zeros(nx, n);
    let mut c = DMatrix::zeros(2 * n, nx);
    let mut d = DMatrix::zeros(2 * n, n);
    let mut total_inertia = Vec::with_capacity(n);

    for (i, bus) in case.buses.iter().enumerate() {
        let m_v = match controllers[i] {
            BusController::Vi { m_v, .. } => m_v,
            _ => 0.0,
        };
        let big_m = bus.m + m_v;
        if !(big_m > 0.0) {
            return Err(Error::AlgebraicLoop { bus: i });
        }
        total_inertia.push(big_m);
        let damping = bus.d
            + match controllers[i] {
                BusController::Fs { d_b, d_t, .. } => d_b + d_t,
                BusController::Vi { d_b, .. } => d_b,
                BusController::None => 0.0,
            };
        let (w, pt) = (i, n + i);
        a[(w, w)] = -damping / big_m;
        a[(w, pt)] = 1.0 / big_m;
        for j in 0..n - 1 {
            a[(w, delta0 + j)] = -l_b[(i, j)] / big_m;
        }
        b[(w, i)] = 1.0 / big_m;
        a[(pt, w)] = -bus.d_t / bus.tau;
        a[(pt, pt)] = -1.0 / bus.tau;
        if let (BusController::Fs { d_t, tau, .. }, Some(xc)) = (controllers[i], filter_index[i]) {
            a[(w, xc)] = 1.0 / big_m;
            a[(xc, w)] = d_t / tau;
            a[(xc, xc)] = -1.0 / tau;
        }
    }
    for j in 0..n - 1 {
        a[(delta0 + j, j)] = 1.0;
        a[(delta0 + j, n - 1)] -= 1.0;
    }
    for i in 0..n {
        c[(i, i)] = 1.0;
        match controllers[i] {
            BusController::Fs { d_b, d_t, .. } => {
                c[(n + i, filter_index[i].unwrap())] = 1.0;
                c[(n + i, i)] = -(d_b + d_t);
            }
            BusController::Vi { d_b, m_v } => {
                // p_b = −m_v ω̇ − d_b ω with ω̇ taken from the swing row
                for j in 0..nx {
                    c[(n + i, j)] = -m_v * a[(i, j)];
                }
                c[(n + i, i)] -= d_b;
                d[(n + i, i)] = -m_v * b[(i, i)];
            }
            BusController::None => {}
        }
    }
    Ok(BusSystem {
        ss: StateSpace::new(a, b, c, d)?,
        total_inertia,
    })
}

/// Sampled bus trajectories after a step disturbance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResponse {
    pub t: Vec<f64>,
    /// `omega[bus][sample]`, frequency deviation (pu).
    pub omega: Vec<Vec<f64>>,
    /// Inertia-weighted average frequency (pu).
    pub coi: Vec<f64>,
    /// `p_inv[bus][sample]`, inverter injection (pu).
    pub p_inv: Vec<Vec<f64>>,
    pub u0: Vec<f64>,
}

fn coi_series(omega: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    let len = omega.first().map_or(0, Vec::len);
    (0..len)
        .map(|k| {
            omega
                .iter()
                .zip(weights)
                .map(|(w, m)| m * w[k])
                .sum::<f64>()
                / total
        })
        .collect()
}

impl StepResponse {
    pub fn n_buses(&self) -> usize {
        self.omega.len()
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Shifts the response so the step happens at `onset`, padding the
    /// beginning with zeros on the same grid.
    pub fn delayed(&self, onset: f64) -> StepResponse {
        let dt = if self.t.len() > 1 {
            self.t[1] - self.t[0]
        } else {
            0.0
        };
        let shift = if dt > 0.0 {
            (onset / dt).round() as usize
        } else {
            0
        };
        if shift == 0 {
            return self.clone();
        }
        let total = self.t.len() + shift;
        let pad = |s: &Vec<f64>| {
            let mut out = vec![0.0; shift];
            out.extend_from_slice(s);
            out
        };
        StepResponse {
            t: (0..total).map(|k| k as f64 * dt).collect(),
            omega: self.omega.iter().map(pad).collect(),
            coi: pad(&self.coi),
            p_inv: self.p_inv.iter().map(pad).collect(),
            u0: self.u0.clone(),
        }
    }

    /// Euclidean norm of `ω(t) − steady` at every sample.
    pub fn deviation_norm(&self, steady: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                self.omega
                    .iter()
                    .zip(steady)
                    .map(|(w, s)| (w[k] - s).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }

    /// Largest absolute difference in `ω` over buses and samples.
    pub fn max_omega_diff(&self, other: &StepResponse) -> f64 {
        self.omega
            .iter()
            .zip(&other.omega)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.omega
            .iter()
            .chain(&self.p_inv)
            .chain(std::iter::once(&self.coi))
            .flatten()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    /// CSV with header `t, omega_1..omega_n, coi, pinv_1..pinv_n`, numbers
    /// at report precision.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let num = |x: f64| {
            let r = crate::report::round_sig(x, crate::report::SIGNIFICANT_DIGITS);
            if r == 0.0 {
                "0".to_string()
            } else {
                r.to_string()
            }
        };
        let io = |e: csv::Error| Error::InvalidInput(format!("csv output failed: {e}"));
        let mut w = csv::Writer::from_writer(out);
        let n = self.n_buses();
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("omega_{i}")));
        header.push("coi".into());
        header.extend((1..=n).map(|i| format!("pinv_{i}")));
        w.write_record(&header).map_err(io)?;
        for k in 0..self.len() {
            let mut row = Vec::with_capacity(2 * n + 2);
            row.push(num(self.t[k]));
            row.extend(self.omega.iter().map(|s| num(s[k])));
            row.push(num(self.coi[k]));
            row.extend(self.p_inv.iter().map(|s| num(s[k])));
            w.write_record(&row).map_err(io)?;
        }
        w.flush()
            .map_err(|e| Error::InvalidInput(format!("csv output failed: {e}")))?;
        Ok(())
    }
}

/// Step response of the assembled bus system.
pub fn step_response(sys: &BusSystem, u0: &[f64], t_end: f64, dt: f64) -> Result<StepResponse> {
    let n = sys.n_buses();
    let tr = sys.ss.step(u0, t_end, dt)?;
    let mut y = tr.y;
    let p_inv = y.split_off(n);
    let omega = y;
    let coi = coi_series(&omega, &sys.total_inertia);
    Ok(StepResponse {
        t: tr.t,
        omega,
        coi,
        p_inv,
        u0: u0.to_vec(),
    })
}

/// Step response assembled from the decoupled modes of a proportional case.
///
/// `ω(t) = (Σu₀/Σr) z₁(t) 𝟙 + Σ_{k≥2} z_k(t) μ_k` with
/// `μ_k = R^{-1/2} v_k v_kᵀ R^{-1/2} u₀`; the inverter injection at bus `i`
/// is `r_i` times the same sum taken over the step responses of `ĉ_o z_k`.
pub fn modal_step_response(
    spec: &ControllerSpec,
    params: &RepresentativeParams,
    spectrum: &ScaledSpectrum,
    u0: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<StepResponse> {
    spec.validate()?;
    let n = spectrum.n();
    if u0.len() != n || params.n() != n {
        return Err(Error::InvalidInput(format!(
            "disturbance has {} entries, case has {n} buses",
            u0.len()
        )));
    }
    let t = time_grid(t_end, dt)?;
    let r = &spectrum.r;
    let r_sum: f64 = r.iter().sum();
    let inv_half = DVector::from_iterator(n, r.iter().map(|x| 1.0 / x.sqrt()));
    let scaled_u = inv_half.component_mul(&DVector::from_column_slice(u0));
    let weights: Vec<DVector<f64>> = (0..n)
        .map(|k| {
            if k == 0 {
                DVector::from_element(n, u0.iter().sum::<f64>() / r_sum)
            } else {
                let v = spectrum.v.column(k);
                inv_half.component_mul(&v) * v.dot(&scaled_u)
            }
        })
        .collect();

    let c_o = controller_tf(spec, params.d_t, params.tau);
    let modes: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|k| -> Result<(Vec<f64>, Vec<f64>)> {
            let lambda = if k == 0 { 0.0 } else { spectrum.lambda[k] };
            let z = mode_subsystem(spec, params, lambda);
            let zs = z.to_ss()?.step(&[1.0], t_end, dt)?.y.remove(0);
            let q = if c_o.num.is_zero() {
                vec![0.0; zs.len()]
            } else {
                c_o.mul(&z).to_ss()?.step(&[1.0], t_end, dt)?.y.remove(0)
            };
            Ok((zs, q))
        })
        .collect::<Result<_>>()?;

    let len = t.len();
    let mut omega = vec![vec![0.0; len]; n];
    let mut p_inv = vec![vec![0.0; len]; n];
    for (w, (zs, q)) in weights.iter().zip(&modes) {
        for i in 0..n {
            let wi = w[i];
            for k in 0..len {
                omega[i][k] += wi * zs[k];
                p_inv[i][k] += r[i] * wi * q[k];
            }
        }
    }
    let inertia: Vec<f64> = r.iter().map(|ri| ri * (params.m + spec.m_v())).collect();
    let coi = coi_series(&omega, &inertia);
    Ok(StepResponse {
        t,
        omega,
        coi,
        p_inv,
        u0: u0.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{representative_params, scaled_spectrum, Bus, Line};

    fn two_bus() -> NetworkCase {
        let bus = |id, m| Bus {
            id,
            m,
            d: 1.0,
            d_t: 8.0,
            tau: 1.5,
            v_mag: 1.0,
            theta0: 0.0,
        };
        NetworkCase {
            buses: vec![bus(1, 6.0), bus(2, 4.0)],
            lines: vec![Line {
                from: 1,
                to: 2,
                b: 0.2,
            }],
            f0: 50.0,
            s_base: 100.0,
            laplacian_override: None,
        }
    }

    #[test]
    fn state_count_and_hurwitz() {
        let case = two_bus();
        let ctl = [
            BusController::Fs {
                d_b: 3.0,
                d_t: 8.0,
                tau: 1.5,
            },
            BusController::None,
        ];
        let sys = full_system_ss(&case, &ctl).unwrap();
        assert_eq!(sys.ss.n_states(), 2 * 2 + 1 + 1);
        assert!(sys.ss.is_hurwitz().unwrap());
    }

    #[test]
    fn negative_total_inertia_is_algebraic_loop() {
        let ctl = [
            BusController::Vi {
                d_b: 0.0,
                m_v: -7.0,
            },
            BusController::None,
        ];
        assert_eq!(
            full_system_ss(&two_bus(), &ctl).unwrap_err(),
            Error::AlgebraicLoop { bus: 0 }
        );
    }

    #[test]
    fn steady_state_matches_total_damping() {
        let case = two_bus();
        let ctl = [
            BusController::Fs {
                d_b: 3.0,
                d_t: 8.0,
                tau: 1.5,
            },
            BusController::Vi { d_b: 2.0, m_v: 5.0 },
        ];
        let sys = full_system_ss(&case, &ctl).unwrap();
        let g = sys.ss.dc_gain().unwrap();
        let expected = 1.0 / (1.0 + 3.0 + 8.0 + 1.0 + 2.0 + 8.0);
        assert!((g[(0, 0)] - expected).abs() < 1e-12);
        assert!((g[(1, 0)] - expected).abs() < 1e-12);
    }

    #[test]
    fn modal_matches_direct_on_two_bus() {
        let case = two_bus();
        let params = representative_params(&case).unwrap();
        let prop = case.proportionalized(&params);
        let spectrum = scaled_spectrum(&build_laplacian(&prop).unwrap(), &params.r).unwrap();
        for spec in [
            ControllerSpec::Fs { d_b: 2.5 },
            ControllerSpec::Vi {
                d_b: 2.5,
                m_v: 30.0,
            },
        ] {
            let sys = full_system_ss(&prop, &scaled_controllers(&spec, &params)).unwrap();
            let direct = step_response(&sys, &[-0.1, 0.05], 20.0, 0.01).unwrap();
            let modal =
                modal_step_response(&spec, &params, &spectrum, &[-0.1, 0.05], 20.0, 0.01).unwrap();
            assert!(direct.max_omega_diff(&modal) < 1e-9);
            let pinv = direct
                .p_inv
                .iter()
                .zip(&modal.p_inv)
                .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
                .fold(0.0, f64::max);
            assert!(pinv < 1e-9, "{spec:?} {pinv}");
        }
    }

    #[test]
    fn delayed_pads_with_zeros() {
        let resp = StepResponse {
            t: vec![0.0, 0.5, 1.0],
            omega: vec![vec![1.0, 2.0, 3.0]],
            coi: vec![1.0, 2.0, 3.0],
            p_inv: vec![vec![0.0; 3]],
            u0: vec![1.0],
        };
        let d = resp.delayed(1.0);
        assert_eq!(d.t, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(d.omega[0], vec![0.0, 0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn csv_header() {
        let resp = StepResponse {
            t: vec![0.0],
            omega: vec![vec![0.0], vec![0.0]],
            coi: vec![0.0],
            p_inv: vec![vec![0.0], vec![0.0]],
            u0: vec![0.0, 0.0],
        };
        let mut buf = Vec::new();
        resp.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,omega_1,omega_2,coi,pinv_1,pinv_2\n"));
    }
}
