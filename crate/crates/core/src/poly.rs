//! Real polynomials in ascending-power form and their roots.
//!
//! Roots come from the eigenvalues of a balanced companion matrix, which
//! keeps accuracy uniform across the quadratic and cubic characteristic
//! polynomials used by the loci without closed-form branch cuts.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polynomial with coefficients in ascending powers: `c[0] + c[1] s + ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn new(coeffs: impl Into<Vec<f64>>) -> Self {
        let mut p = Poly(coeffs.into());
        p.trim();
        p
    }

    pub fn zero() -> Self {
        Poly(vec![0.0])
    }

    pub fn constant(c: f64) -> Self {
        Poly(vec![c])
    }

    /// Monomial `s`.
    pub fn s() -> Self {
        Poly(vec![0.0, 1.0])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    fn trim(&mut self) {
        while self.0.len() > 1 && *self.0.last().unwrap() == 0.0 {
            self.0.pop();
        }
        if self.0.is_empty() {
            self.0.push(0.0);
        }
    }

    pub fn degree(&self) -> usize {
        self.0.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn leading(&self) -> f64 {
        *self.0.last().unwrap()
    }

    pub fn eval(&self, s: Complex<f64>) -> Complex<f64> {
        self.0
            .iter()
            .rev()
            .fold(Complex::new(0.0, 0.0), |acc, &c| acc * s + c)
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// `Σ |c_i| |s|^i`, the natural scale for residual checks.
    pub fn magnitude_scale(&self, s: Complex<f64>) -> f64 {
        let r = s.norm();
        self.0.iter().rev().fold(0.0, |acc, &c| acc * r + c.abs())
    }

    pub fn derivative(&self) -> Poly {
        if self.0.len() <= 1 {
            return Poly::zero();
        }
        Poly::new(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| c * i as f64)
                .collect::<Vec<_>>(),
        )
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        let out: Vec<f64> = (0..n)
            .map(|i| self.0.get(i).copied().unwrap_or(0.0) + other.0.get(i).copied().unwrap_or(0.0))
            .collect();
        Poly::new(out)
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, &a) in self.0.iter().enumerate() {
            for (j, &b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn scale(&self, k: f64) -> Poly {
        Poly::new(self.0.iter().map(|c| c * k).collect::<Vec<_>>())
    }

    /// Roots via eigenvalues of the balanced companion matrix.
    pub fn roots(&self) -> Result<Vec<Complex<f64>>> {
        let n = self.degree();
        if self.is_zero() {
            return Err(Error::InvalidInput("roots of the zero polynomial".into()));
        }
        // Exact zero roots are peeled off so the companion matrix stays nonsingular.
        let zeros = self.0.iter().take_while(|&&c| c == 0.0).count();
        let core: Vec<f64> = self.0[zeros..].to_vec();
        let deg = core.len() - 1;
        let mut roots = vec![Complex::new(0.0, 0.0); zeros];
        match deg {
            0 => {}
            1 => roots.push(Complex::new(-core[0] / core[1], 0.0)),
            _ => {
                let lead = core[deg];
                let mut c = DMatrix::<f64>::zeros(deg, deg);
                for i in 1..deg {
                    c[(i, i - 1)] = 1.0;
                }
                for i in 0..deg {
                    c[(i, deg - 1)] = -core[i] / lead;
                }
                roots.extend(eigenvalues(c)?);
            }
        }
        debug_assert_eq!(roots.len(), n);
        sort_roots(&mut roots);
        Ok(roots)
    }
}

/// Eigenvalues of a real square matrix, unsorted.
///
/// The matrix is balanced first. If the shifted QR iteration stalls, which
/// happens on highly repeated eigenvalues, the deflation tolerance is
/// loosened in steps up to `1e-13` relative before giving up.
pub fn eigenvalues(mut a: DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    balance(&mut a);
    for eps in [f64::EPSILON, 16.0 * f64::EPSILON, 1e-13] {
        if let Some(schur) = a.clone().try_schur(eps, 10_000) {
            return Ok(quasi_triangular_eigenvalues(&schur.unpack().1));
        }
    }
    Err(Error::EigensolveFailure)
}

/// Eigenvalues of the 1×1 and 2×2 diagonal blocks of a real Schur form.
fn quasi_triangular_eigenvalues(t: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let n = t.nrows();
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let mid = 0.5 * (a + d);
            let half = 0.5 * (a - d);
            let disc = half * half + b * c;
            if disc >= 0.0 {
                let r = disc.sqrt();
                out.push(Complex::new(mid + r, 0.0));
                out.push(Complex::new(mid - r, 0.0));
            } else {
                let w = (-disc).sqrt();
                out.push(Complex::new(mid, w));
                out.push(Complex::new(mid, -w));
            }
            i += 2;
        } else {
            out.push(Complex::new(t[(i, i)], 0.0));
            i += 1;
        }
    }
    out
}

/// Orders roots by real part, then imaginary part.
pub fn sort_roots(roots: &mut [Complex<f64>]) {
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// Diagonal similarity scaling by powers of two so row and column norms are
/// comparable (Parlett-Reinsch). Eigenvalues are unchanged.
pub fn balance(a: &mut DMatrix<f64>) {
    const RADIX: f64 = 2.0;
    let n = a.nrows();
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= RADIX * RADIX;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * s {
                converged = false;
                let inv = 1.0 / f;
                for j in 0..n {
                    a[(i, j)] *= inv;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
    }
}

/// Serde adapter writing complex lists as `[{"re": .., "im": ..}]`.
pub mod complex_vec {
    use nalgebra::Complex;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Point {
        re: f64,
        im: f64,
    }

    pub fn serialize<S: Serializer>(v: &[Complex<f64>], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|z| Point { re: z.re, im: z.im }))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex<f64>>, D::Error> {
        let pts = Vec::<Point>::deserialize(d)?;
        Ok(pts.into_iter().map(|p| Complex::new(p.re, p.im)).collect())
    }
}
