//! Network cases, the network Laplacian and its proportionality-scaled spectrum.
//!
//! All quantities are per-unit on the case's power base with time in seconds.
//! The Laplacian carries the `Ω₀ = 2πF₀` factor, so its scaled eigenvalues are
//! directly the loop gains seen by the modal subsystems.

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative threshold separating the zero eigenvalue from the rest.
pub const ZERO_EIGEN_RTOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: u32,
    /// Generator inertia (s).
    pub m: f64,
    /// Generator damping (pu).
    pub d: f64,
    /// Turbine inverse droop (pu).
    pub d_t: f64,
    /// Turbine time constant (s).
    pub tau: f64,
    /// Voltage magnitude (pu).
    #[serde(default = "one")]
    pub v_mag: f64,
    /// Equilibrium angle (rad).
    #[serde(default)]
    pub theta0: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: u32,
    pub to: u32,
    /// Susceptance (pu).
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCase {
    pub buses: Vec<Bus>,
    #[serde(default)]
    pub lines: Vec<Line>,
    /// Nominal frequency (Hz).
    pub f0: f64,
    /// Power base (MVA).
    pub s_base: f64,
    /// Row-major `n×n` network Laplacian (pu·rad/s) used verbatim instead of
    /// the line-built one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub laplacian_override: Option<Vec<Vec<f64>>>,
}

impl NetworkCase {
    /// Parses and validates a case file.
    pub fn from_json(text: &str) -> Result<Self> {
        let case: NetworkCase =
            serde_json::from_str(text).map_err(|e| Error::InvalidCase(e.to_string()))?;
        case.validate()?;
        Ok(case)
    }

    pub fn n(&self) -> usize {
        self.buses.len()
    }

    /// Nominal angular frequency `2πF₀` (rad/s).
    pub fn omega0(&self) -> f64 {
        2.0 * PI * self.f0
    }

    pub fn validate(&self) -> Result<()> {
        if self.buses.is_empty() {
            return Err(Error::InvalidCase("case has no buses".into()));
        }
        if !(self.f0 > 0.0 && self.f0.is_finite()) {
            return Err(Error::InvalidCase(format!(
                "f0 must be positive, got {}",
                self.f0
            )));
        }
        if !(self.s_base > 0.0 && self.s_base.is_finite()) {
            return Err(Error::InvalidCase(format!(
                "s_base must be positive, got {}",
                self.s_base
            )));
        }
        let mut ids = HashSet::new();
        for bus in &self.buses {
            if !ids.insert(bus.id) {
                return Err(Error::InvalidCase(format!("duplicate bus id {}", bus.id)));
            }
            for (name, value) in [
                ("m", bus.m),
                ("d", bus.d),
                ("d_t", bus.d_t),
                ("tau", bus.tau),
                ("v_mag", bus.v_mag),
            ] {
                if !(value > 0.0 && value.is_finite()) {
                    return Err(Error::InvalidCase(format!(
                        "bus {}: {name} must be positive, got {value}",
                        bus.id
                    )));
                }
            }
            if !bus.theta0.is_finite() {
                return Err(Error::InvalidCase(format!(
                    "bus {}: theta0 is not finite",
                    bus.id
                )));
            }
        }
        let mut pairs = HashSet::new();
        for line in &self.lines {
            if line.from == line.to {
                return Err(Error::InvalidCase(format!(
                    "line {0}-{0} is a self loop",
                    line.from
                )));
            }
            for end in [line.from, line.to] {
                if !ids.contains(&end) {
                    return Err(Error::InvalidCase(format!(
                        "line references unknown bus {end}"
                    )));
                }
            }
            let key = (line.from.min(line.to), line.from.max(line.to));
            if !pairs.insert(key) {
                return Err(Error::InvalidCase(format!(
                    "duplicate line {}-{}",
                    key.0, key.1
                )));
            }
            if !(line.b > 0.0 && line.b.is_finite()) {
                return Err(Error::InvalidCase(format!(
                    "line {}-{}: susceptance must be positive, got {}",
                    line.from, line.to, line.b
                )));
            }
        }
        match &self.laplacian_override {
            Some(rows) => {
                let m = override_matrix(rows, self.n())?;
                validate_laplacian(&m).map_err(|e| match e {
                    Error::DisconnectedGraph => Error::DisconnectedGraph,
                    other => Error::InvalidOverride(other.to_string()),
                })?;
            }
            None => {
                let edges: Vec<(usize, usize)> = {
                    let index = self.index_map();
                    self.lines
                        .iter()
                        .map(|l| (index[&l.from], index[&l.to]))
                        .collect()
                };
                if !is_connected(self.n(), &edges) {
                    return Err(Error::DisconnectedGraph);
                }
            }
        }
        Ok(())
    }

    fn index_map(&self) -> HashMap<u32, usize> {
        self.buses
            .iter()
            .enumerate()
            .map(|(i, b)| (b.id, i))
            .collect()
    }

    /// The same topology with bus parameters replaced by `r_i`-scaled copies of
    /// the representative generator, so the proportionality assumption holds
    /// exactly.
    pub fn proportionalized(&self, params: &RepresentativeParams) -> NetworkCase {
        let mut case = self.clone();
        for (bus, &r) in case.buses.iter_mut().zip(&params.r) {
            bus.m = r * params.m;
            bus.d = r * params.d;
            bus.d_t = r * params.d_t;
            bus.tau = params.tau;
        }
        case
    }
}

fn override_matrix(rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidOverride(format!("expected a {n}x{n} matrix")));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidOverride("non-finite entry".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn is_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(i, j) in edges {
        adj[i].push(j);
        adj[j].push(i);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// Checks symmetry, zero row sums and connectivity of the off-diagonal
/// sparsity pattern.
pub fn validate_laplacian(l_b: &DMatrix<f64>) -> Result<()> {
    let n = l_b.nrows();
    if l_b.ncols() != n {
        return Err(Error::InvalidInput("laplacian must be square".into()));
    }
    let scale = max_abs(l_b).max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in 0..i {
            if (l_b[(i, j)] - l_b[(j, i)]).abs() > 1e-9 * scale {
                return Err(Error::InvalidInput(format!(
                    "laplacian is not symmetric at ({i},{j})"
                )));
            }
        }
        let row: f64 = l_b.row(i).iter().sum();
        if row.abs() > 1e-9 * scale {
            return Err(Error::InvalidInput(format!(
                "laplacian row {i} sums to {row}"
            )));
        }
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..i {
            if l_b[(i, j)] != 0.0 {
                edges.push((i, j));
            }
        }
    }
    if !is_connected(n, &edges) {
        return Err(Error::DisconnectedGraph);
    }
    Ok(())
}

/// Builds the network Laplacian `L_B`.
///
/// Off-diagonal `(i,j)` is `−Ω₀|V_i||V_j|B_ij cos(θ_i0 − θ_j0)` per line and the
/// diagonal zeroes each row sum. An override, when present, is returned as is.
pub fn build_laplacian(case: &NetworkCase) -> Result<DMatrix<f64>> {
    let n = case.n();
    if let Some(rows) = &case.laplacian_override {
        let m = override_matrix(rows, n)?;
        validate_laplacian(&m).map_err(|e| match e {
            Error::DisconnectedGraph => Error::DisconnectedGraph,
            other => Error::InvalidOverride(other.to_string()),
        })?;
        return Ok(m);
    }
    let index = case.index_map();
    let omega0 = case.omega0();
    let mut l_b = DMatrix::<f64>::zeros(n, n);
    let mut edges = Vec::with_capacity(case.lines.len());
    for line in &case.lines {
        let (i, j) = (index[&line.from], index[&line.to]);
        let (bi, bj) = (&case.buses[i], &case.buses[j]);
        let w = omega0 * bi.v_mag * bj.v_mag * line.b * (bi.theta0 - bj.theta0).cos();
        if !(w > 0.0) {
            return Err(Error::NonPositiveWeight {
                from: line.from,
                to: line.to,
                weight: w,
            });
        }
        l_b[(i, j)] -= w;
        l_b[(j, i)] -= w;
        edges.push((i, j));
    }
    if !is_connected(n, &edges) {
        return Err(Error::DisconnectedGraph);
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| l_b[(i, j)]).sum();
        l_b[(i, i)] = -off;
    }
    Ok(l_b)
}

/// Representative generator parameters and proportionality factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeParams {
    pub m: f64,
    pub d: f64,
    pub d_t: f64,
    pub tau: f64,
    pub r: Vec<f64>,
    pub r_sum: f64,
}

impl RepresentativeParams {
    pub fn new(m: f64, d: f64, d_t: f64, tau: f64, r: Vec<f64>) -> Result<Self> {
        for (name, v) in [("m", m), ("d", d), ("d_t", d_t), ("tau", tau)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if r.is_empty() || r.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::InvalidInput(
                "proportionality factors must be positive".into(),
            ));
        }
        let r_sum = r.iter().sum();
        Ok(Self {
            m,
            d,
            d_t,
            tau,
            r,
            r_sum,
        })
    }

    /// All buses identical: `r_i = 1`.
    pub fn homogeneous(m: f64, d: f64, d_t: f64, tau: f64, n: usize) -> Result<Self> {
        Self::new(m, d, d_t, tau, vec![1.0; n])
    }

    pub fn n(&self) -> usize {
        self.r.len()
    }
}

/// How heterogeneous buses are mapped onto a representative generator.
pub trait ProportionalityConvention {
    fn representative(&self, buses: &[Bus]) -> Result<RepresentativeParams>;
}

/// `m` is the mean inertia and `r_i = m_i / m`; damping and turbine droop are
/// totals divided by `Σr_i`, the time constant is the plain mean.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanInertia;

impl ProportionalityConvention for MeanInertia {
    fn representative(&self, buses: &[Bus]) -> Result<RepresentativeParams> {
        if buses.is_empty() {
            return Err(Error::InvalidInput("no buses".into()));
        }
        let n = buses.len() as f64;
        let m = buses.iter().map(|b| b.m).sum::<f64>() / n;
        let r: Vec<f64> = buses.iter().map(|b| b.m / m).collect();
        let r_sum: f64 = r.iter().sum();
        let d = buses.iter().map(|b| b.d).sum::<f64>() / r_sum;
        let d_t = buses.iter().map(|b| b.d_t).sum::<f64>() / r_sum;
        let tau = buses.iter().map(|b| b.tau).sum::<f64>() / n;
        RepresentativeParams::new(m, d, d_t, tau, r)
    }
}

pub fn representative_params(case: &NetworkCase) -> Result<RepresentativeParams> {
    MeanInertia.representative(&case.buses)
}

/// Eigen-structure of the scaled Laplacian `L = R^{-1/2} L_B R^{-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledSpectrum {
    pub r: Vec<f64>,
    pub l_b: DMatrix<f64>,
    pub l: DMatrix<f64>,
    /// Eigenvalues, non-decreasing.
    pub lambda: Vec<f64>,
    /// Orthonormal eigenvectors as columns, each with its largest-magnitude
    /// entry positive.
    pub v: DMatrix<f64>,
}

impl ScaledSpectrum {
    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    /// Fiedler eigenvalue.
    pub fn lambda_2(&self) -> f64 {
        self.lambda[1]
    }

    pub fn lambda_n(&self) -> f64 {
        *self.lambda.last().unwrap()
    }

    /// Oscillatory-mode gains `λ₂..λ_n`.
    pub fn mode_gains(&self) -> &[f64] {
        &self.lambda[1..]
    }

    /// Builds a network with the prescribed spectrum: `v₁ ∝ R^{1/2}𝟙` is
    /// completed to an orthonormal basis by a Householder reflection and
    /// `L_B = R^{1/2} V Λ Vᵀ R^{1/2}`.
    pub fn from_modes(r: Vec<f64>, mode_gains: &[f64]) -> Result<Self> {
        let n = r.len();
        if mode_gains.len() + 1 != n {
            return Err(Error::InvalidInput(format!(
                "{} mode gains for {n} buses",
                mode_gains.len()
            )));
        }
        if mode_gains.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidInput("mode gains must be positive".into()));
        }
        let r_sum: f64 = r.iter().sum();
        let v1 = DVector::from_iterator(n, r.iter().map(|x| (x / r_sum).sqrt()));
        let mut e1 = DVector::zeros(n);
        e1[0] = 1.0;
        let w = &v1 - &e1;
        let basis = if w.norm() < 1e-14 {
            DMatrix::identity(n, n)
        } else {
            let w = w.normalize();
            DMatrix::identity(n, n) - 2.0 * &w * w.transpose()
        };
        let mut lambda = vec![0.0];
        lambda.extend_from_slice(mode_gains);
        let diag = DMatrix::from_diagonal(&DVector::from_vec(lambda));
        let l = &basis * diag * basis.transpose();
        let half = DMatrix::from_diagonal(&DVector::from_iterator(n, r.iter().map(|x| x.sqrt())));
        let l_b = &half * l * &half;
        let l_b = (&l_b + l_b.transpose()) * 0.5;
        scaled_spectrum(&l_b, &r)
    }
}

/// Eigendecomposition of the scaled Laplacian.
pub fn scaled_spectrum(l_b: &DMatrix<f64>, r: &[f64]) -> Result<ScaledSpectrum> {
    let n = l_b.nrows();
    if n < 2 {
        return Err(Error::InvalidInput(
            "spectrum needs at least two buses".into(),
        ));
    }
    if r.len() != n {
        return Err(Error::InvalidInput(format!(
            "{} factors for {n} buses",
            r.len()
        )));
    }
    if r.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::InvalidInput(
            "proportionality factors must be positive".into(),
        ));
    }
    validate_laplacian(l_b)?;
    let inv_half =
        DMatrix::from_diagonal(&DVector::from_iterator(n, r.iter().map(|x| 1.0 / x.sqrt())));
    let l = &inv_half * l_b * &inv_half;
    let l = (&l + l.transpose()) * 0.5;

    let eig =
        SymmetricEigen::try_new(l.clone(), f64::EPSILON, 10_000).ok_or(Error::EigensolveFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lambda: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut v = DMatrix::<f64>::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let mut vec = eig.eigenvectors.column(k).into_owned();
        let pivot = vec
            .iter()
            .copied()
            .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            vec.neg_mut();
        }
        v.set_column(col, &vec);
    }

    let top = lambda[n - 1];
    if !(top > 0.0)
        || lambda[0].abs() >= ZERO_EIGEN_RTOL * top
        || lambda[1] <= ZERO_EIGEN_RTOL * top
    {
        return Err(Error::DisconnectedGraph);
    }
    Ok(ScaledSpectrum {
        r: r.to_vec(),
        l_b: l_b.clone(),
        l,
        lambda,
        v,
    })
}
