//! Continuous-time state-space models and their exact step responses.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::poly::sort_roots;

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

/// Sampled outputs: `y[output][sample]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
}

/// Uniform time grid `0, dt, ..., t_end` (rounded to whole steps).
pub fn time_grid(t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "dt must be positive, got {dt}"
        )));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "t_end must be non-negative, got {t_end}"
        )));
    }
    let steps = (t_end / dt).round() as usize;
    Ok((0..=steps).map(|k| k as f64 * dt).collect())
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let ok = a.ncols() == n
            && b.nrows() == n
            && c.ncols() == n
            && d.nrows() == c.nrows()
            && d.ncols() == b.ncols();
        if !ok {
            return Err(Error::InvalidInput(
                "inconsistent state-space dimensions".into(),
            ));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn eigenvalues(&self) -> Result<Vec<Complex<f64>>> {
        if self.n_states() == 0 {
            return Ok(Vec::new());
        }
        let mut ev = crate::poly::eigenvalues(self.a.clone())?;
        sort_roots(&mut ev);
        Ok(ev)
    }

    pub fn is_hurwitz(&self) -> Result<bool> {
        Ok(self.eigenvalues()?.iter().all(|z| z.re < 0.0))
    }

    /// `C (sI − A)^{-1} B + D` for single-input single-output systems.
    pub fn eval_siso(&self, s: Complex<f64>) -> Complex<f64> {
        let n = self.n_states();
        let m = DMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j { s } else { Complex::new(0.0, 0.0) };
            diag - Complex::new(self.a[(i, j)], 0.0)
        });
        let b = DVector::from_fn(n, |i, _| Complex::new(self.b[(i, 0)], 0.0));
        let x = m
            .lu()
            .solve(&b)
            .unwrap_or_else(|| DVector::from_element(n, Complex::new(f64::NAN, 0.0)));
        let cx: Complex<f64> = (0..n).map(|j| x[j] * self.c[(0, j)]).sum();
        cx + self.d[(0, 0)]
    }

    /// Steady-state gain `D − C A^{-1} B`.
    pub fn dc_gain(&self) -> Result<DMatrix<f64>> {
        if self.n_states() == 0 {
            return Ok(self.d.clone());
        }
        let x = self
            .a
            .clone()
            .lu()
            .solve(&self.b)
            .ok_or_else(|| Error::InvalidInput("state matrix is singular".into()))?;
        Ok(&self.d - &self.c * x)
    }

    /// Response to the step `u(t) = u0` for `t ≥ 0` from a zero state.
    ///
    /// Uses the exact zero-order-hold map obtained from the exponential of
    /// `[[A, B u0], [0, 0]] dt`, so the only error is floating point.
    pub fn step(&self, u0: &[f64], t_end: f64, dt: f64) -> Result<Trajectory> {
        if u0.len() != self.n_inputs() {
            return Err(Error::InvalidInput(format!(
                "input has {} entries, system expects {}",
                u0.len(),
                self.n_inputs()
            )));
        }
        let t = time_grid(t_end, dt)?;
        let n = self.n_states();
        let u = DVector::from_column_slice(u0);
        let bu = &self.b * &u;
        let du = &self.d * &u;

        let mut aug = DMatrix::zeros(n + 1, n + 1);
        aug.view_mut((0, 0), (n, n)).copy_from(&self.a);
        aug.view_mut((0, n), (n, 1)).copy_from(&bu);
        let phi = (aug * dt).exp();
        let ad = phi.view((0, 0), (n, n)).into_owned();
        let bd = phi.view((0, n), (n, 1)).into_owned();

        let mut y = vec![Vec::with_capacity(t.len()); self.n_outputs()];
        let mut x = DVector::zeros(n);
        for step in 0..t.len() {
            if step > 0 {
                x = &ad * &x + &bd;
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteState { step });
                }
            }
            let out = &self.c * &x + &du;
            for (series, v) in y.iter_mut().zip(out.iter()) {
                series.push(*v);
            }
        }
        Ok(Trajectory { t, y })
    }
}
