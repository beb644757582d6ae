//! Method-of-moments recovery: sample cumulants, the closed-form estimator for
//! two-component mixtures, and the univariate moment-matrix pipeline.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{det, solve};
use crate::models::{homoscedastic_cumulants, homoscedastic_moments, HomoscedasticParams};
use crate::poly::{chebyshev_nodes, interpolate, Poly};
use crate::scalar::Scalar;
use crate::tps::{Layout, MultiIndex, Space, TruncatedSeries};

/// Roots with `|Im z| < ROOT_IMAG_TOL · max(1, |z|)` are treated as real.
pub const ROOT_IMAG_TOL: f64 = 1e-9;
/// `1 − 4γ` below this triggers a near-symmetric conditioning warning.
const NEAR_SYMMETRIC: f64 = 1e-3;
/// Univariate weights below this indicate fewer components than requested.
const TINY_WEIGHT: f64 = 1e-6;

/// Raw moments `m_1..m_d` of a univariate distribution (`m_0 = 1`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnivariateMoments<S = f64> {
    pub m: Vec<S>,
}

impl<S: Scalar> UnivariateMoments<S> {
    pub fn new(m: Vec<S>) -> Self {
        UnivariateMoments { m }
    }

    pub fn order(&self) -> usize {
        self.m.len()
    }

    /// `m_j`, with `m_0 = 1`.
    pub fn get(&self, j: usize) -> S {
        if j == 0 {
            S::one()
        } else {
            self.m[j - 1].clone()
        }
    }

    /// Moments of `a X + b`.
    pub fn affine(&self, a: &S, b: &S) -> Self {
        let d = self.order();
        let mut out = Vec::with_capacity(d);
        for j in 1..=d {
            let mut acc = S::zero();
            for i in 0..=j {
                let c = S::from_i64(binom(j, i) as i64);
                acc = acc + c * a.powi(i as u32) * self.get(i) * b.powi((j - i) as u32);
            }
            out.push(acc);
        }
        UnivariateMoments { m: out }
    }

    /// Moments of the series coefficients, `m_j = j! c_j`.
    pub fn from_series(s: &TruncatedSeries<S>) -> Result<Self> {
        if s.nvars() != 1 {
            return Err(Error::DimensionMismatch(format!("univariate moments from a series in {} variables", s.nvars())));
        }
        Ok(UnivariateMoments { m: s.moments()[1..].to_vec() })
    }

    pub fn to_series(&self) -> Result<TruncatedSeries<S>> {
        let entries: Vec<_> = std::iter::once((MultiIndex::new(vec![0]), S::one()))
            .chain(self.m.iter().enumerate().map(|(i, v)| (MultiIndex::new(vec![i as u32 + 1]), v.clone())))
            .collect();
        TruncatedSeries::from_moments(1, self.order(), &entries)
    }
}

fn binom(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    (0..k as u64).fold(1u64, |acc, i| acc * (n as u64 - i) / (i + 1))
}

/// One recovered parameter set with its diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub params: HomoscedasticParams<f64>,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Highest moment or cumulant order used.
    pub order_used: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pivot: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Real roots of the polynomial the selected value was taken from.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub candidate_roots: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
    /// `residuals[j − 1]` is the largest input-vs-refit discrepancy at order `j`.
    pub residuals: Vec<f64>,
    pub covariance_psd: bool,
    pub negative_weights: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Sample cumulants up to order `d` of the rows of `data`.
///
/// Moments are accumulated about the sample mean and translated back in
/// cumulant space, which keeps rounding independent of the location.
pub fn sample_cumulants(data: &[Vec<f64>], d: usize) -> Result<TruncatedSeries<f64>> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let n = data[0].len();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    if let Some(i) = data.iter().position(|r| r.len() != n) {
        return Err(Error::DimensionMismatch(format!("row {i} has {} columns, expected {n}", data[i].len())));
    }
    if data.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParams("data contains non-finite values".into()));
    }
    let count = data.len() as f64;
    let mean: Vec<f64> = (0..n).map(|j| data.iter().map(|r| r[j]).sum::<f64>() / count).collect();
    let layout = Layout::get(n, d)?;
    let mut sums = vec![0.0; layout.len()];
    let mut centred = vec![0.0; n];
    for row in data {
        for j in 0..n {
            centred[j] = row[j] - mean[j];
        }
        for (s, v) in sums.iter_mut().zip(layout.monomial_values(&centred)) {
            *s += v;
        }
    }
    let coeffs = sums.iter().enumerate().map(|(i, s)| s / count / layout.factorial(i) as f64).collect();
    let mut moments = TruncatedSeries::from_coeffs(&layout, coeffs)?;
    moments.set_coeff(&MultiIndex::new(vec![0; n]), 1.0)?;
    let identity: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    moments.log()?.affine_action(&identity, &mean, Space::Cumulant)
}

/// `f_j(λ)` for `j ∈ {3, 4, 5}`: coefficient of `L^j` in
/// `log(λ e^L + (1−λ) e^{−λL/(1−λ)})`.
pub fn f_coeff<S: Scalar>(lambda: &S, j: usize) -> Result<S> {
    let one = S::one();
    let lc = one.clone() - lambda.clone();
    if lc.is_zero() {
        return Err(Error::Precondition("f_j has a pole at λ = 1".into()));
    }
    let gamma = lambda.clone() * lc.clone();
    let two = S::from_i64(2);
    let base = gamma.clone() / lc.powi(j as u32);
    Ok(match j {
        3 => base * (one - two * lambda.clone()) / S::from_i64(6),
        4 => base * (one - S::from_i64(6) * gamma) / S::from_i64(24),
        5 => base * (one.clone() - two * lambda.clone()) * (one - S::from_i64(12) * gamma) / S::from_i64(120),
        _ => return Err(Error::InvalidParams(format!("f_j only defined for j = 3, 4, 5, got {j}"))),
    })
}

/// `a(γ) = ∛3 (1 − 6γ) / (2 ∛(4γ(1 − 4γ)²))`.
pub fn a_of_gamma(gamma: f64) -> f64 {
    3f64.cbrt() * (1.0 - 6.0 * gamma) / (2.0 * (4.0 * gamma * (1.0 - 4.0 * gamma).powi(2)).cbrt())
}

/// `b(γ) = ∛(9/2000) (1 − 12γ) / ∛(γ²(1 − 4γ))`, the order-five analogue of `a(γ)`.
pub fn b_of_gamma(gamma: f64) -> f64 {
    (9.0f64 / 2000.0).cbrt() * (1.0 - 12.0 * gamma) / (gamma * gamma * (1.0 - 4.0 * gamma)).cbrt()
}

/// `(256a³+324)γ³ − (128a³+162)γ² + (16a³+27)γ − 3/2`, ascending in `γ`.
pub fn gamma_cubic(a: f64) -> Poly {
    let a3 = a * a * a;
    Poly::new(vec![-1.5, 16.0 * a3 + 27.0, -(128.0 * a3 + 162.0), 256.0 * a3 + 324.0])
}

/// All real roots of [`gamma_cubic`].
pub fn gamma_candidates(a: f64) -> Vec<f64> {
    gamma_cubic(a).trimmed(1e-14).real_roots(ROOT_IMAG_TOL)
}

/// The unique root of the γ-cubic in `(0, ¼)`.
pub fn gamma_from_a(a: f64) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::InvalidParams(format!("a = {a} is not finite")));
    }
    let roots = gamma_candidates(a);
    let inside: Vec<f64> = roots.iter().copied().filter(|&g| g > 0.0 && g < 0.25).collect();
    let pick = match inside.as_slice() {
        [g] => Some(*g),
        [] => {
            // tolerate roots pushed just outside the interval by rounding
            let tol = 1e-9;
            roots.iter().copied().filter(|&g| g > -tol && g < 0.25 + tol).map(|g| g.clamp(f64::MIN_POSITIVE, 0.25 - f64::EPSILON)).next()
        }
        many => many.iter().copied().min_by(|x, y| (a_of_gamma(*x) - a).abs().total_cmp(&(a_of_gamma(*y) - a).abs())),
    };
    let g = pick.ok_or_else(|| Error::InconsistentMoments(format!("no root of the γ-cubic in (0, 1/4) for a = {a}")))?;
    Ok(polish_gamma(g, a))
}

/// Newton steps on `a(γ) − a` inside `(0, ¼)`.
fn polish_gamma(mut g: f64, a: f64) -> f64 {
    for _ in 0..4 {
        let f = a_of_gamma(g) - a;
        let h = 1e-7 * g.min(0.25 - g);
        if h <= 0.0 {
            break;
        }
        let df = (a_of_gamma(g + h) - a_of_gamma(g - h)) / (2.0 * h);
        let next = g - f / df;
        if !(next > 0.0 && next < 0.25) || (a_of_gamma(next) - a).abs() >= f.abs() {
            break;
        }
        g = next;
    }
    g
}

/// Closed-form root of the γ-cubic, real for `a > −3∛3/4`; `None` otherwise.
pub fn gamma_closed_form(a: f64) -> Option<f64> {
    let a3 = a * a * a;
    let d = 64.0 * a3 + 81.0;
    if d <= 0.0 {
        return None;
    }
    if a == 0.0 {
        return Some(1.0 / 6.0);
    }
    let inner = 262144.0 * a3.powi(5) + 995328.0 * a3.powi(4) + 1259712.0 * a3.powi(3) + 531441.0 * a3 * a3;
    let eta = (-4096.0 * a3.powi(3) - 10368.0 * a3 * a3 - 6561.0 * a3 + 9.0 * inner.max(0.0).sqrt()).cbrt();
    if eta == 0.0 {
        return None;
    }
    Some(4.0 * a3 / (3.0 * eta) + eta / (3.0 * d) + 1.0 / 6.0)
}

fn principal(s: &TruncatedSeries<f64>, i: usize, order: u32) -> Result<f64> {
    Ok(*s.coeff(&MultiIndex::unit(s.nvars(), i, order))?)
}

/// Covariance matrix `κ_2` from a cumulant series.
pub fn second_cumulants(s: &TruncatedSeries<f64>) -> Result<Vec<Vec<f64>>> {
    let n = s.nvars();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut e = vec![0u32; n];
            e[i] += 1;
            e[j] += 1;
            out[i][j] = s.moment(&MultiIndex::new(e))?;
        }
    }
    Ok(out)
}

fn is_psd(m: &[Vec<f64>]) -> bool {
    let n = m.len();
    let mat = DMatrix::from_fn(n, n, |i, j| 0.5 * (m[i][j] + m[j][i]));
    let scale = mat.amax().max(1e-300);
    mat.symmetric_eigenvalues().iter().all(|&e| e >= -1e-9 * scale)
}

/// Largest discrepancy per order between two series, relative to the scale of
/// the reference coefficients of that order.
fn residuals_by_order(reference: &TruncatedSeries<f64>, fit: &TruncatedSeries<f64>) -> Vec<f64> {
    let layout = reference.layout();
    (1..=reference.degree())
        .map(|o| {
            let r = layout.order_range(o);
            let scale = reference.coeffs()[r.clone()].iter().fold(0.0f64, |m, c| m.max(c.abs())).max(1e-300);
            r.map(|i| (reference.coeffs()[i] - fit.coeffs()[i]).abs()).fold(0.0, f64::max) / scale.max(1.0)
        })
        .collect()
}

/// Two-component estimator from cumulants of order 4 or more.
///
/// With order-4 data both label assignments are returned; with order 5 or
/// more the order-5 cumulant selects the γ root and a single estimate with
/// `λ_1 ≤ ½` is returned.
pub fn fit_k2(cumulants: &TruncatedSeries<f64>) -> Result<Vec<Estimate>> {
    if cumulants.degree() < 4 {
        return Err(Error::InsufficientOrder { needed: 4, got: cumulants.degree() });
    }
    fit_k2_order(cumulants, cumulants.degree().min(5))
}

/// As [`fit_k2`] but using only cumulants up to `order` (4 or 5).
pub fn fit_k2_order(cumulants: &TruncatedSeries<f64>, order: usize) -> Result<Vec<Estimate>> {
    if !(4..=5).contains(&order) {
        return Err(Error::InvalidParams(format!("order must be 4 or 5, got {order}")));
    }
    if cumulants.degree() < order {
        return Err(Error::InsufficientOrder { needed: order, got: cumulants.degree() });
    }
    if cumulants.constant_term().abs() > 1e-9 {
        return Err(Error::Precondition("cumulant series must have zero constant term".into()));
    }
    let n = cumulants.nvars();
    let k2 = second_cumulants(cumulants)?;
    let var_scale = (0..n).map(|i| k2[i][i].abs()).fold(0.0, f64::max).max(1e-300);
    let c3: Vec<f64> = (0..n).map(|i| principal(cumulants, i, 3)).collect::<Result<_>>()?;
    let pivot = (0..n).max_by(|&x, &y| c3[x].abs().total_cmp(&c3[y].abs())).expect("n ≥ 1");
    if c3[pivot].abs() <= 1e-10 * var_scale.powf(1.5) {
        return Err(Error::SymmetricMixture);
    }
    let root = c3[pivot].cbrt();
    // direction of L from the mixed coefficients c_{2e_p + e_j} = 3 f_3 L_p² L_j
    let mut direction = vec![0.0; n];
    for (j, v) in direction.iter_mut().enumerate() {
        *v = if j == pivot {
            root
        } else {
            let mut e = vec![0u32; n];
            e[pivot] = 2;
            e[j] = 1;
            root * cumulants.coeff(&MultiIndex::new(e))? / (3.0 * c3[pivot])
        };
    }
    let a = principal(cumulants, pivot, 4)? / root.powi(4);

    let mut warnings = Vec::new();
    let (gamma, b, candidates) = if order == 4 {
        (gamma_from_a(a)?, None, gamma_candidates(a))
    } else {
        let b = principal(cumulants, pivot, 5)? / root.powi(5);
        let roots = gamma_candidates(a);
        let admissible: Vec<f64> = roots.iter().copied().filter(|&g| g != 0.0 && g < 0.25).collect();
        let g = admissible
            .iter()
            .copied()
            .min_by(|x, y| (b_of_gamma(*x) - b).abs().total_cmp(&(b_of_gamma(*y) - b).abs()))
            .ok_or_else(|| Error::InconsistentMoments(format!("no admissible root of the γ-cubic for a = {a}")))?;
        let g = if g > 0.0 { polish_gamma(g, a) } else { g };
        let mismatch = (b_of_gamma(g) - b).abs() / b.abs().max(1.0);
        if mismatch > 1e-3 {
            warnings.push(format!("order-5 cumulant disagrees with the selected root (relative gap {mismatch:.3e})"));
        }
        (g, Some(b), roots)
    };
    if !(gamma > 0.0 && gamma < 0.25) {
        warnings.push(format!("γ = {gamma} outside (0, 1/4): weights are not a probability vector"));
    }
    let disc = 1.0 - 4.0 * gamma;
    if disc < NEAR_SYMMETRIC {
        warnings.push(format!("near-symmetric mixture: 1 − 4γ = {disc:.3e}; estimates are poorly conditioned"));
    }
    let root = disc.max(0.0).sqrt();
    let low = 0.5 * (1.0 - root);
    let labels: Vec<f64> = if order == 4 { vec![low, 1.0 - low] } else { vec![low] };

    let mean: Vec<f64> = (0..n).map(|i| principal(cumulants, i, 1)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for l1 in labels {
        let l2 = 1.0 - l1;
        let scale = f_coeff(&l1, 3)?.cbrt();
        if scale == 0.0 || l2 == 0.0 {
            return Err(Error::SymmetricMixture);
        }
        let mu1: Vec<f64> = direction.iter().map(|r| r / scale).collect();
        let mu2: Vec<f64> = mu1.iter().map(|x| -(l1 / l2) * x).collect();
        let mut cov = k2.clone();
        for i in 0..n {
            for j in 0..n {
                cov[i][j] -= l1 * mu1[i] * mu1[j] + l2 * mu2[i] * mu2[j];
            }
        }
        let means = vec![
            mu1.iter().zip(&mean).map(|(x, m)| x + m).collect(),
            mu2.iter().zip(&mean).map(|(x, m)| x + m).collect(),
        ];
        let params = HomoscedasticParams { means, weights: vec![l1, l2], cov };
        let fit = homoscedastic_cumulants(&params, cumulants.degree())?;
        let diagnostics = Diagnostics {
            order_used: order,
            pivot: Some(pivot),
            a: Some(a),
            b,
            gamma: Some(gamma),
            candidate_roots: candidates.clone(),
            variance: None,
            residuals: residuals_by_order(cumulants, &fit),
            covariance_psd: is_psd(&params.cov),
            negative_weights: l1 < 0.0 || l2 < 0.0,
            warnings: warnings.clone(),
        };
        out.push(Estimate { params, diagnostics });
    }
    Ok(out)
}

/// Coefficient of `m_{j−2i} s^i` in `m̃_j`: `j! / ((−2)^i i! (j−2i)!)`.
fn tilde_coeff(j: usize, i: usize) -> i64 {
    let double_fact: u64 = (1..=i as u64).map(|t| 2 * t - 1).product();
    let c = binom(j, 2 * i) * double_fact;
    if i.is_multiple_of(2) {
        c as i64
    } else {
        -(c as i64)
    }
}

/// Moments of the mixing measure after removing Gaussian noise of variance `s`:
/// `m̃_j = Σ_i j!/((−2)^i i!(j−2i)!) m_{j−2i} s^i`.
pub fn tilde_moments<S: Scalar>(m: &UnivariateMoments<S>, s: &S) -> UnivariateMoments<S> {
    let out = (1..=m.order())
        .map(|j| {
            (0..=j / 2).fold(S::zero(), |acc, i| {
                acc + S::from_i64(tilde_coeff(j, i)) * m.get(j - 2 * i) * s.powi(i as u32)
            })
        })
        .collect();
    UnivariateMoments { m: out }
}

/// The `(k+1)×(k+1)` Hankel matrix `[m_{i+j}]`.
pub fn hankel<S: Scalar>(m: &UnivariateMoments<S>, k: usize) -> Result<Vec<Vec<S>>> {
    if m.order() < 2 * k {
        return Err(Error::InsufficientOrder { needed: 2 * k, got: m.order() });
    }
    Ok((0..=k).map(|i| (0..=k).map(|j| m.get(i + j)).collect()).collect())
}

/// `D_k(s) = det(Hankel_k(m̃(s)))` evaluated directly.
pub fn variance_det<S: Scalar>(m: &UnivariateMoments<S>, k: usize, s: &S) -> Result<S> {
    det(&hankel(&tilde_moments(m, s), k)?)
}

/// Degree of `D_k` in `s`, `C(k+1, 2)`.
pub fn variance_poly_degree(k: usize) -> usize {
    k * (k + 1) / 2
}

/// Coefficients of `D_k(s)` by exact interpolation at `s = 0, 1, …, C(k+1,2)`.
pub fn variance_poly_exact<S: Scalar>(m: &UnivariateMoments<S>, k: usize) -> Result<Vec<S>> {
    let deg = variance_poly_degree(k);
    let nodes: Vec<S> = (0..=deg).map(|i| S::from_i64(i as i64)).collect();
    let vals = nodes.iter().map(|s| variance_det(m, k, s)).collect::<Result<Vec<_>>>()?;
    interpolate(&nodes, &vals)
}

/// `D_k(s)` in double precision, interpolated at Chebyshev nodes on `[0, h]`
/// where `h` is the central second moment.
pub fn variance_poly(m: &UnivariateMoments<f64>, k: usize) -> Result<Poly> {
    let h = central_variance(m)?;
    let h = if h > 0.0 { h } else { 1.0 };
    variance_poly_on(m, k, h)
}

fn variance_poly_on(m: &UnivariateMoments<f64>, k: usize, h: f64) -> Result<Poly> {
    let deg = variance_poly_degree(k);
    let nodes = chebyshev_nodes(deg + 1, 0.0, h);
    let vals = nodes.iter().map(|s| variance_det(m, k, s)).collect::<Result<Vec<_>>>()?;
    Ok(Poly::new(interpolate(&nodes, &vals)?))
}

fn central_variance(m: &UnivariateMoments<f64>) -> Result<f64> {
    if m.order() < 2 {
        return Err(Error::InsufficientOrder { needed: 2, got: m.order() });
    }
    Ok(m.get(2) - m.get(1) * m.get(1))
}

/// Standardizes moments to mean 0 and variance 1; returns `(z, mean, sd)`.
pub fn standardize(m: &UnivariateMoments<f64>) -> Result<(UnivariateMoments<f64>, f64, f64)> {
    let var = central_variance(m)?;
    if var.is_nan() || var <= 0.0 || !var.is_finite() {
        return Err(Error::RankDeficient(format!("non-positive variance {var}")));
    }
    let mean = m.get(1);
    let sd = var.sqrt();
    Ok((m.affine(&(1.0 / sd), &(-mean / sd)), mean, sd))
}

/// Nodes of the Gauss quadrature rule for the moments `m̃`: the roots of the
/// degree-`k` polynomial `P_k(t) = det[[H], [1, t, …, t^k]]`, where `H` holds
/// the rows `(m̃_i, …, m̃_{i+k})`, `i < k`.
pub fn quadrature_rule(mt: &UnivariateMoments<f64>, k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::InvalidParams("k must be positive".into()));
    }
    if mt.order() < 2 * k - 1 {
        return Err(Error::InsufficientOrder { needed: 2 * k - 1, got: mt.order() });
    }
    let lead = DMatrix::from_fn(k, k, |i, j| mt.get(i + j));
    let sv = lead.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if smax.is_nan() || smax <= 0.0 || smin / smax < 1e-10 {
        return Err(Error::RankDeficient(format!(
            "{k}×{k} moment matrix has condition {:.3e}; fewer than {k} distinct atoms",
            if smin > 0.0 { smax / smin } else { f64::INFINITY }
        )));
    }
    let coeffs = quadrature_poly(mt, k)?;
    let p = Poly::new(coeffs);
    let roots = p.real_roots(ROOT_IMAG_TOL);
    if roots.len() != k {
        return Err(Error::RankDeficient(format!("quadrature polynomial has {} real roots, expected {k}", roots.len())));
    }
    Ok(roots)
}

/// Coefficients of `P_k(t)`: cofactors of the power row.
pub fn quadrature_poly<S: Scalar>(mt: &UnivariateMoments<S>, k: usize) -> Result<Vec<S>> {
    (0..=k)
        .map(|i| {
            // rows r = 0..k-1, columns j ≠ i of [m̃_{r+j}]
            let minor: Vec<Vec<S>> = (0..k).map(|r| (0..=k).filter(|&j| j != i).map(|j| mt.get(r + j)).collect()).collect();
            let d = det(&minor)?;
            Ok(if (i + k).is_multiple_of(2) { d } else { -d })
        })
        .collect()
}

/// Solves `Σ_j λ_j t_j^i = m̃_i` for `i < k`.
pub fn vandermonde_weights<S: Scalar>(locations: &[S], mt: &UnivariateMoments<S>) -> Result<Vec<S>> {
    let k = locations.len();
    if k == 0 {
        return Err(Error::InvalidParams("no locations".into()));
    }
    if mt.order() + 1 < k {
        return Err(Error::InsufficientOrder { needed: k - 1, got: mt.order() });
    }
    for i in 0..k {
        for j in i + 1..k {
            let gap = locations[i].clone() - locations[j].clone();
            let scale = locations[i].magnitude().max(locations[j].magnitude()).max(1.0);
            if gap.is_zero() || (!S::EXACT && gap.magnitude() < 1e-12 * scale) {
                return Err(Error::SingularSystem(format!("locations {i} and {j} coincide")));
            }
        }
    }
    let v: Vec<Vec<S>> = (0..k).map(|i| locations.iter().map(|t| t.powi(i as u32)).collect()).collect();
    let rhs: Vec<S> = (0..k).map(|i| mt.get(i)).collect();
    solve(&v, &rhs)
}

/// Newton refinement of a root of `D_k` using the direct determinant.
fn refine_variance(z: &UnivariateMoments<f64>, k: usize, mut s: f64, hi: f64) -> f64 {
    for _ in 0..6 {
        let Ok(f) = variance_det(z, k, &s) else { break };
        let h = 1e-6 * hi;
        let (Ok(fp), Ok(fm)) = (variance_det(z, k, &(s + h)), variance_det(z, k, &(s - h))) else { break };
        let df = (fp - fm) / (2.0 * h);
        if df == 0.0 || !df.is_finite() {
            break;
        }
        let next = (s - f / df).max(0.0);
        match variance_det(z, k, &next) {
            Ok(g) if g.abs() < f.abs() => s = next,
            _ => break,
        }
    }
    s
}

/// Univariate `k`-component recovery from moments of order `≥ 2k`.
///
/// The common variance is the smallest non-negative root of `D_k`; atoms are
/// the quadrature nodes of the noise-free moments and weights solve the
/// Vandermonde system.
pub fn fit_1d(m: &UnivariateMoments<f64>, k: usize) -> Result<Estimate> {
    if k == 0 {
        return Err(Error::InvalidParams("k must be positive".into()));
    }
    if m.order() < 2 * k {
        return Err(Error::InsufficientOrder { needed: 2 * k, got: m.order() });
    }
    if m.m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParams("moments must be finite".into()));
    }
    let var = central_variance(m)?;
    if k == 1 {
        if var < -1e-12 * m.get(2).abs().max(1.0) {
            return Err(Error::ModelMismatch(format!("negative variance {var}")));
        }
        let params = HomoscedasticParams { means: vec![vec![m.get(1)]], weights: vec![1.0], cov: vec![vec![var.max(0.0)]] };
        return finish_1d(m, params, 2, vec![var], var.max(0.0));
    }
    let (z, mean, sd) = standardize(m)?;
    let poly = variance_poly_on(&z, k, 1.0)?;
    let tol = 1e-9;
    let mut roots: Vec<f64> = poly.trimmed(1e-13).real_roots(ROOT_IMAG_TOL).into_iter().filter(|&r| r >= -tol).collect();
    roots.sort_by(f64::total_cmp);
    let Some(&first) = roots.first() else {
        return Err(Error::ModelMismatch("variance polynomial has no non-negative real root".into()));
    };
    let s = refine_variance(&z, k, first.max(0.0), 1.0);
    let mt = tilde_moments(&z, &s);
    let atoms = quadrature_rule(&mt, k)?;
    let weights = vandermonde_weights(&atoms, &mt)?;
    if let Some(w) = weights.iter().find(|w| w.abs() < TINY_WEIGHT) {
        return Err(Error::RankDeficient(format!("recovered weight {w:.3e} is negligible; fewer than {k} components")));
    }
    let params = HomoscedasticParams {
        means: atoms.iter().map(|t| vec![mean + sd * t]).collect(),
        weights,
        cov: vec![vec![s * sd * sd]],
    };
    let candidates = roots.iter().map(|r| r * sd * sd).collect();
    finish_1d(m, params, 2 * k, candidates, s * sd * sd)
}

fn finish_1d(
    m: &UnivariateMoments<f64>,
    params: HomoscedasticParams<f64>,
    order_used: usize,
    candidates: Vec<f64>,
    variance: f64,
) -> Result<Estimate> {
    let fit = UnivariateMoments::from_series(&homoscedastic_moments(&params, m.order())?)?;
    let residuals = m
        .m
        .iter()
        .zip(&fit.m)
        .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
        .collect();
    let negative_weights = params.weights.iter().any(|&w| w < 0.0);
    let mut warnings = Vec::new();
    if negative_weights {
        warnings.push("recovered weights include negative values".into());
    }
    let covariance_psd = params.cov[0][0] >= 0.0;
    Ok(Estimate {
        params,
        diagnostics: Diagnostics {
            order_used,
            candidate_roots: candidates,
            variance: Some(variance),
            residuals,
            covariance_psd,
            negative_weights,
            warnings,
            ..Diagnostics::default()
        },
    })
}

/// Result of evaluating the degree-7 plane curve on its parametrization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SepticReport {
    pub gammas: Vec<f64>,
    /// Relative residuals with `z = γ(1−4γ)(1−γ)³(1−12γ)` as printed.
    pub printed: Vec<f64>,
    /// Relative residuals with `z = γ(1−4γ)²(1−γ)³(1−12γ)`.
    pub corrected: Vec<f64>,
}

impl SepticReport {
    pub fn max_printed(&self) -> f64 {
        self.printed.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_corrected(&self) -> f64 {
        self.corrected.iter().copied().fold(0.0, f64::max)
    }
}

const SEPTIC: [(f64, u32, u32, u32); 12] = [
    (849346560.0, 5, 2, 0),
    (-679477248.0, 4, 3, 0),
    (-29491200.0, 5, 1, 1),
    (2674483200.0, 4, 2, 1),
    (-2439217152.0, 3, 3, 1),
    (256000.0, 5, 0, 2),
    (79744000.0, 4, 1, 2),
    (2415168000.0, 3, 2, 2),
    (-2616192000.0, 2, 3, 2),
    (499500000.0, 2, 2, 3),
    (-406500000.0, 1, 3, 3),
    (474609375.0, 0, 3, 4),
];

/// `|F(x,y,z)| / Σ|terms|` for the printed septic `F`.
pub fn septic_residual(x: f64, y: f64, z: f64) -> f64 {
    let terms: Vec<f64> = SEPTIC.iter().map(|&(c, i, j, l)| c * x.powi(i as i32) * y.powi(j as i32) * z.powi(l as i32)).collect();
    let total: f64 = terms.iter().sum();
    let scale: f64 = terms.iter().map(|t| t.abs()).sum();
    if scale == 0.0 {
        0.0
    } else {
        total.abs() / scale
    }
}

/// The printed map `γ ↦ [x, y, z]`, optionally with the squared `(1−4γ)` factor in `z`.
pub fn septic_point(gamma: f64, corrected_z: bool) -> (f64, f64, f64) {
    let g = gamma;
    let x = 3.0 / 32.0 * (1.0 - 6.0 * g).powi(3) * (1.0 - g).powi(3) * (1.0 - 12.0 * g);
    let y = 15.0 / 128.0 * (1.0 - 6.0 * g).powi(5) * (1.0 - 4.0 * g).powi(2);
    let p = if corrected_z { 2 } else { 1 };
    let z = g * (1.0 - 4.0 * g).powi(p) * (1.0 - g).powi(3) * (1.0 - 12.0 * g);
    (x, y, z)
}

/// Evaluates the septic at the given parameter values, both as printed and
/// with the corrected `z` coordinate.
pub fn septic_check(gammas: &[f64]) -> SepticReport {
    let eval = |corr: bool| {
        gammas
            .iter()
            .map(|&g| {
                let (x, y, z) = septic_point(g, corr);
                septic_residual(x, y, z)
            })
            .collect()
    };
    SepticReport { gammas: gammas.to_vec(), printed: eval(false), corrected: eval(true) }
}
