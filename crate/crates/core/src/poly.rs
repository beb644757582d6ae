//! Univariate polynomials: companion-matrix roots, interpolation and
//! Sylvester resultants.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::det;
use crate::scalar::Scalar;

/// A real polynomial with coefficients in ascending order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    pub coeffs: Vec<f64>,
}

impl Poly {
    /// Builds a polynomial; trailing exact zeros are dropped.
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, x: Complex<f64>) -> Complex<f64> {
        self.coeffs.iter().rev().fold(Complex::new(0.0, 0.0), |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(self.coeffs.iter().enumerate().skip(1).map(|(i, &c)| i as f64 * c).collect())
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let len = self.coeffs.len().max(other.coeffs.len());
        let get = |p: &Poly, i: usize| p.coeffs.get(i).copied().unwrap_or(0.0);
        Poly::new((0..len).map(|i| get(self, i) + get(other, i)).collect())
    }

    pub fn scale(&self, f: f64) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * f).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Poly::default();
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    /// Largest absolute coefficient.
    pub fn norm_inf(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Drops leading coefficients that are negligible relative to the largest one.
    pub fn trimmed(&self, rel: f64) -> Poly {
        let scale = self.norm_inf();
        let mut c = self.coeffs.clone();
        while c.len() > 1 && c.last().is_some_and(|x| x.abs() <= rel * scale) {
            c.pop();
        }
        Poly::new(c)
    }

    /// All complex roots, from the eigenvalues of the companion matrix followed
    /// by a few Newton steps on the polynomial itself.
    pub fn roots(&self) -> Vec<Complex<f64>> {
        let Some(deg) = self.degree() else { return Vec::new() };
        if deg == 0 {
            return Vec::new();
        }
        // strip roots at zero
        let zeros = self.coeffs.iter().take_while(|&&c| c == 0.0).count();
        let reduced = Poly::new(self.coeffs[zeros..].to_vec());
        let mut out = vec![Complex::new(0.0, 0.0); zeros];
        let m = reduced.degree().unwrap_or(0);
        if m == 0 {
            return out;
        }
        let lead = reduced.leading();
        let companion = DMatrix::from_fn(m, m, |i, j| {
            if i == 0 {
                -reduced.coeffs[m - 1 - j] / lead
            } else if i == j + 1 {
                1.0
            } else {
                0.0
            }
        });
        let dp = reduced.derivative();
        for z in companion.complex_eigenvalues().iter() {
            let mut z = *z;
            for _ in 0..8 {
                let f = reduced.eval_complex(z);
                let g = dp.eval_complex(z);
                if g.norm() == 0.0 {
                    break;
                }
                let step = f / g;
                let next = z - step;
                if !next.re.is_finite() || !next.im.is_finite() || reduced.eval_complex(next).norm() > f.norm() {
                    break;
                }
                z = next;
                if step.norm() <= 1e-16 * z.norm().max(1.0) {
                    break;
                }
            }
            out.push(z);
        }
        out
    }

    /// Real roots in ascending order; a complex root counts as real when
    /// `|Im z| < tol · max(1, |z|)`.
    pub fn real_roots(&self, tol: f64) -> Vec<f64> {
        let mut r: Vec<f64> = self
            .roots()
            .into_iter()
            .filter(|z| z.im.abs() < tol * z.norm().max(1.0))
            .map(|z| z.re)
            .collect();
        r.sort_by(f64::total_cmp);
        r
    }
}

/// Coefficients (ascending) of the unique polynomial of degree `< nodes.len()`
/// through `(nodes[i], values[i])`, by Newton divided differences.
pub fn interpolate<S: Scalar>(nodes: &[S], values: &[S]) -> Result<Vec<S>> {
    let m = nodes.len();
    if values.len() != m {
        return Err(Error::DimensionMismatch(format!("{m} nodes, {} values", values.len())));
    }
    let mut dd = values.to_vec();
    for j in 1..m {
        for i in (j..m).rev() {
            let h = nodes[i].clone() - nodes[i - j].clone();
            if h.is_zero() {
                return Err(Error::SingularSystem("repeated interpolation node".into()));
            }
            dd[i] = (dd[i].clone() - dd[i - 1].clone()) / h;
        }
    }
    // Horner on the Newton form: p = dd[m-1]; p = p·(x − x_i) + dd[i]
    let mut coeffs = vec![S::zero(); m];
    for i in (0..m).rev() {
        let mut next = vec![S::zero(); m];
        for (e, c) in coeffs.iter().enumerate() {
            if e + 1 < m {
                next[e + 1] = next[e + 1].clone() + c.clone();
            }
            next[e] = next[e].clone() - c.clone() * nodes[i].clone();
        }
        next[0] = next[0].clone() + dd[i].clone();
        coeffs = next;
    }
    Ok(coeffs)
}

/// `count` Chebyshev nodes of the first kind on `[lo, hi]`.
pub fn chebyshev_nodes(count: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..count)
        .map(|i| {
            let t = (std::f64::consts::PI * (2 * i + 1) as f64 / (2 * count) as f64).cos();
            0.5 * (lo + hi) + 0.5 * (hi - lo) * t
        })
        .collect()
}

/// Sylvester matrix of `p` and `q` (ascending coefficients).
pub fn sylvester_matrix<S: Scalar>(p: &[S], q: &[S]) -> Result<Vec<Vec<S>>> {
    if p.len() < 2 && q.len() < 2 {
        return Err(Error::Precondition("resultant of two constants".into()));
    }
    let m = p.len() - 1;
    let n = q.len() - 1;
    let size = m + n;
    let mut rows = Vec::with_capacity(size);
    for shift in 0..n {
        let mut r = vec![S::zero(); size];
        for (i, c) in p.iter().rev().enumerate() {
            r[shift + i] = c.clone();
        }
        rows.push(r);
    }
    for shift in 0..m {
        let mut r = vec![S::zero(); size];
        for (i, c) in q.iter().rev().enumerate() {
            r[shift + i] = c.clone();
        }
        rows.push(r);
    }
    Ok(rows)
}

/// Resultant `Res(p, q)` as the Sylvester determinant.
pub fn resultant<S: Scalar>(p: &[S], q: &[S]) -> Result<S> {
    det(&sylvester_matrix(p, q)?)
}

/// `|Res(p, q)|` divided by the product of the Sylvester row norms; lies in
/// `[0, 1]` by Hadamard's inequality and is 0 exactly when `p` and `q` share a root.
pub fn normalized_resultant(p: &Poly, q: &Poly) -> Result<f64> {
    let s = sylvester_matrix(&p.coeffs, &q.coeffs)?;
    let norms: f64 = s.iter().map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt()).product();
    if norms == 0.0 {
        return Ok(0.0);
    }
    Ok(det(&s)?.abs() / norms)
}
