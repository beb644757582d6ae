//! Parametric families and their forward maps to moment and cumulant series.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tps::{Layout, TruncatedSeries};

/// Tolerance for float-valued constraint checks (weight sums, centering, symmetry).
const FLOAT_TOL: f64 = 1e-9;

fn approx_zero<S: Scalar>(x: &S) -> bool {
    if S::EXACT {
        x.is_zero()
    } else {
        x.magnitude() < FLOAT_TOL
    }
}

fn check_matrix<S>(m: &[Vec<S>], n: usize, what: &str) -> Result<()> {
    if m.len() != n || m.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch(format!("{what} must be {n}×{n}")));
    }
    Ok(())
}

fn check_symmetric<S: Scalar>(m: &[Vec<S>]) -> Result<()> {
    for i in 0..m.len() {
        for j in i + 1..m.len() {
            if !approx_zero(&(m[i][j].clone() - m[j][i].clone())) {
                return Err(Error::InvalidParams(format!("covariance not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

fn check_weights<S: Scalar>(weights: &[S]) -> Result<()> {
    let sum = weights.iter().cloned().fold(S::zero(), |a, b| a + b);
    if !approx_zero(&(sum.clone() - S::one())) {
        return Err(Error::InvalidParams(format!("weights sum to {sum:?}, not 1")));
    }
    Ok(())
}

/// A Gaussian `N(μ, Σ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams<S = f64> {
    pub mean: Vec<S>,
    pub cov: Vec<Vec<S>>,
}

/// A finite mixture of point masses `Σ λ_i δ_{μ_i}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiracMixtureParams<S = f64> {
    pub points: Vec<Vec<S>>,
    pub weights: Vec<S>,
}

/// A Dirac mixture with `Σ λ_i = 1` and `Σ λ_i μ_i = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct CenteredDiracParams<S = f64>(DiracMixtureParams<S>);

/// A homoscedastic Gaussian mixture `Σ λ_i N(μ_i, Σ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomoscedasticParams<S = f64> {
    pub means: Vec<Vec<S>>,
    pub weights: Vec<S>,
    pub cov: Vec<Vec<S>>,
}

/// The symmetric multivariate Laplace distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaplaceParams<S = f64> {
    pub location: Vec<S>,
    pub cov: Vec<Vec<S>>,
}

impl<S: Scalar> GaussianParams<S> {
    pub fn nvars(&self) -> usize {
        self.mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        check_matrix(&self.cov, self.nvars(), "covariance")?;
        check_symmetric(&self.cov)
    }
}

impl<S: Scalar> DiracMixtureParams<S> {
    pub fn nvars(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn ncomponents(&self) -> usize {
        self.points.len()
    }

    /// Checks shapes only; weights are allowed to be arbitrary.
    pub fn validate_shape(&self) -> Result<()> {
        let n = self.nvars();
        if self.points.is_empty() {
            return Err(Error::InvalidParams("mixture has no components".into()));
        }
        if self.weights.len() != self.points.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} points",
                self.weights.len(),
                self.points.len()
            )));
        }
        if self.points.iter().any(|p| p.len() != n) {
            return Err(Error::DimensionMismatch("points of different dimension".into()));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_shape()?;
        check_weights(&self.weights)
    }

    /// `Σ λ_i μ_i`.
    pub fn mean(&self) -> Vec<S> {
        let mut m = vec![S::zero(); self.nvars()];
        for (p, w) in self.points.iter().zip(&self.weights) {
            for (mi, pi) in m.iter_mut().zip(p) {
                *mi = mi.clone() + w.clone() * pi.clone();
            }
        }
        m
    }
}

impl<S: Scalar> CenteredDiracParams<S> {
    pub fn new(p: DiracMixtureParams<S>) -> Result<Self> {
        p.validate()?;
        if let Some(c) = p.mean().iter().find(|c| !approx_zero(*c)) {
            return Err(Error::Precondition(format!("mixture is not centered: mean coordinate {c:?}")));
        }
        Ok(CenteredDiracParams(p))
    }

    pub fn inner(&self) -> &DiracMixtureParams<S> {
        &self.0
    }
}

impl<S: Scalar> HomoscedasticParams<S> {
    pub fn nvars(&self) -> usize {
        self.cov.len()
    }

    pub fn ncomponents(&self) -> usize {
        self.means.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.nvars();
        if n == 0 {
            return Err(Error::InvalidParams("empty covariance".into()));
        }
        check_matrix(&self.cov, n, "covariance")?;
        check_symmetric(&self.cov)?;
        self.dirac_part().validate()?;
        if self.means[0].len() != n {
            return Err(Error::DimensionMismatch(format!(
                "means have dimension {}, covariance {n}",
                self.means[0].len()
            )));
        }
        Ok(())
    }

    /// The mixing measure `Σ λ_i δ_{μ_i}`.
    pub fn dirac_part(&self) -> DiracMixtureParams<S> {
        DiracMixtureParams { points: self.means.clone(), weights: self.weights.clone() }
    }
}

/// Cumulant series `uᵗμ + ½uᵗΣu` of a Gaussian.
pub fn gaussian_cumulants<S: Scalar>(p: &GaussianParams<S>, d: usize) -> Result<TruncatedSeries<S>> {
    p.validate()?;
    let n = p.nvars();
    TruncatedSeries::linear(n, d, &p.mean)?.add(&TruncatedSeries::half_quadratic(n, d, &p.cov)?)
}

/// Moment series `exp(uᵗμ + ½uᵗΣu)` of a Gaussian.
pub fn gaussian_moments<S: Scalar>(p: &GaussianParams<S>, d: usize) -> Result<TruncatedSeries<S>> {
    gaussian_cumulants(p, d)?.exp()
}

/// Moment series `Σ λ_i exp(uᵗμ_i)`; the raw moment `m_a` is `Σ λ_i μ_i^a`.
pub fn dirac_mixture_moments<S: Scalar>(p: &DiracMixtureParams<S>, d: usize) -> Result<TruncatedSeries<S>> {
    p.validate_shape()?;
    let layout = Layout::get(p.nvars(), d)?;
    let mut coeffs = vec![S::zero(); layout.len()];
    for (point, w) in p.points.iter().zip(&p.weights) {
        for (c, v) in coeffs.iter_mut().zip(layout.monomial_values(point)) {
            *c = c.clone() + w.clone() * v;
        }
    }
    for (i, c) in coeffs.iter_mut().enumerate() {
        *c = c.clone() / S::from_i64(layout.factorial(i) as i64);
    }
    TruncatedSeries::from_coeffs(&layout, coeffs)
}

/// Moment series of a homoscedastic mixture, computed as
/// `M_{N(0,Σ)} · M_{Σλ_iδ_{μ_i}}`.
pub fn homoscedastic_moments<S: Scalar>(p: &HomoscedasticParams<S>, d: usize) -> Result<TruncatedSeries<S>> {
    p.validate()?;
    let n = p.nvars();
    let noise = GaussianParams { mean: vec![S::zero(); n], cov: p.cov.clone() };
    gaussian_moments(&noise, d)?.mul(&dirac_mixture_moments(&p.dirac_part(), d)?)
}

/// Cumulant series of a homoscedastic mixture.
pub fn homoscedastic_cumulants<S: Scalar>(p: &HomoscedasticParams<S>, d: usize) -> Result<TruncatedSeries<S>> {
    homoscedastic_moments(p, d)?.log()
}

impl<S: Scalar> CenteredDiracParams<S> {
    /// Cumulants of orders `3..=d` of the Dirac mixture; lower orders are zero.
    pub fn phi(&self, d: usize) -> Result<TruncatedSeries<S>> {
        Ok(dirac_mixture_moments(&self.0, d)?.log()?.orders_between(3, d))
    }
}

/// Cumulants of orders `3..=d` of a centered Dirac mixture.
pub fn phi<S: Scalar>(p: &DiracMixtureParams<S>, d: usize) -> Result<TruncatedSeries<S>> {
    CenteredDiracParams::new(p.clone())?.phi(d)
}

/// Moment series `exp(uᵗμ) / (1 − ½uᵗΣu)` of the symmetric Laplace distribution.
pub fn laplace_moments<S: Scalar>(p: &LaplaceParams<S>, d: usize) -> Result<TruncatedSeries<S>> {
    let n = p.location.len();
    check_matrix(&p.cov, n, "covariance")?;
    check_symmetric(&p.cov)?;
    let shift = TruncatedSeries::linear(n, d, &p.location)?.exp()?;
    let q = TruncatedSeries::half_quadratic(n, d, &p.cov)?;
    let mut geometric = TruncatedSeries::one(n, d)?;
    let mut power = TruncatedSeries::one(n, d)?;
    for _ in 0..d / 2 {
        power = power.mul(&q)?;
        geometric = geometric.add(&power)?;
    }
    shift.mul(&geometric)
}

/// A lower-triangular `L` with `LLᵗ = Σ`, using diagonal pivoting so that
/// singular PSD matrices (including `Σ = 0`) are accepted.
pub fn psd_factor(cov: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = cov.len();
    check_matrix(cov, n, "covariance")?;
    if cov.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParams("covariance has non-finite entries".into()));
    }
    if let Some(chol) = nalgebra::DMatrix::from_fn(n, n, |i, j| cov[i][j]).cholesky() {
        let l = chol.l();
        return Ok((0..n).map(|i| (0..n).map(|j| l[(i, j)]).collect()).collect());
    }
    let scale = cov.iter().flatten().fold(1.0f64, |m, x| m.max(x.abs()));
    let tol = 1e-12 * scale * n as f64;
    let mut a: Vec<Vec<f64>> = cov.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        let (piv, &dmax) = (j..n)
            .map(|i| (i, &a[i][i]))
            .max_by(|x, y| x.1.total_cmp(y.1))
            .expect("non-empty");
        if dmax < -tol {
            return Err(Error::NotPsd);
        }
        if dmax <= tol {
            break;
        }
        a.swap(j, piv);
        for row in a.iter_mut() {
            row.swap(j, piv);
        }
        perm.swap(j, piv);
        l.swap(j, piv);
        let pivot = dmax.sqrt();
        l[j][j] = pivot;
        for i in j + 1..n {
            l[i][j] = a[i][j] / pivot;
        }
        for i in j + 1..n {
            for k in j + 1..=i {
                let v = a[i][k] - l[i][j] * l[k][j];
                a[i][k] = v;
                a[k][i] = v;
            }
        }
    }
    // undo the permutation: row perm[i] of the original corresponds to row i of l
    let mut out = vec![vec![0.0; n]; n];
    for (i, &p) in perm.iter().enumerate() {
        out[p] = l[i].clone();
    }
    for i in 0..n {
        for j in 0..n {
            let v: f64 = (0..n).map(|k| out[i][k] * out[j][k]).sum();
            if (v - cov[i][j]).abs() > 1e-9 * scale {
                return Err(Error::NotPsd);
            }
        }
    }
    Ok(out)
}

/// Draws `count` i.i.d. observations, one row per observation.
pub fn sample_mixture(p: &HomoscedasticParams<f64>, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    p.validate()?;
    if p.weights.iter().any(|&w| !(w >= 0.0)) {
        return Err(Error::InvalidParams("sampling needs nonnegative weights".into()));
    }
    let factor = psd_factor(&p.cov)?;
    let n = p.nvars();
    let pick = WeightedIndex::new(&p.weights).map_err(|e| Error::InvalidParams(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let c = pick.sample(&mut rng);
        let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let row = (0..n)
            .map(|i| p.means[c][i] + (0..=i.min(n - 1)).map(|j| factor[i][j] * z[j]).sum::<f64>())
            .collect();
        out.push(row);
    }
    Ok(out)
}
