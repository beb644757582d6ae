//! Membership tests for univariate homoscedastic secants and estimation of
//! the number of mixture components.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{tilde_moments, UnivariateMoments};
use crate::linalg::det;
use crate::poly::{chebyshev_nodes, interpolate, normalized_resultant, Poly};
use crate::scalar::Scalar;
use crate::tps::{MultiIndex, TruncatedSeries};

/// Default acceptance threshold for the normalized residual on exact input.
pub const DEFAULT_THRESHOLD: f64 = 1e-8;
/// Bootstrap thresholds are this multiple of the bootstrap minor variance.
pub const BOOTSTRAP_FACTOR: f64 = 9.0;

/// `P_3 = 2m_1³ − 3m_1m_2 + m_3`.
pub fn eval_p3<S: Scalar>(m1: &S, m2: &S, m3: &S) -> S {
    S::from_i64(2) * m1.powi(3) - S::from_i64(3) * m1.clone() * m2.clone() + m3.clone()
}

/// Third cumulant of `(1, m_1, m_2, m_3)` through the series logarithm.
pub fn p3_cumulant_form<S: Scalar>(m1: &S, m2: &S, m3: &S) -> Result<S> {
    let entries = [
        (MultiIndex::new(vec![0]), S::one()),
        (MultiIndex::new(vec![1]), m1.clone()),
        (MultiIndex::new(vec![2]), m2.clone()),
        (MultiIndex::new(vec![3]), m3.clone()),
    ];
    TruncatedSeries::from_moments(1, 3, &entries)?.log()?.moment(&MultiIndex::new(vec![3]))
}

/// `P_5 = 108κ_3⁶ − 32κ_3²κ_4³ + 36κ_3³κ_4κ_5 − κ_4²κ_5² + κ_3κ_5³`.
pub fn eval_p5<S: Scalar>(k3: &S, k4: &S, k5: &S) -> S {
    let c = |v: i64| S::from_i64(v);
    c(108) * k3.powi(6) - c(32) * k3.powi(2) * k4.powi(3) + c(36) * k3.powi(3) * k4.clone() * k5.clone()
        - k4.powi(2) * k5.powi(2)
        + k3.clone() * k5.powi(3)
}

/// Maximal minors of the `(k+1)×(d−k+1)` matrix `[m̃_{i+j}(s)]` as polynomials in `s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HankelPencil {
    pub k: usize,
    pub d: usize,
    /// Column subsets, one per minor.
    pub columns: Vec<Vec<usize>>,
    pub minors: Vec<Poly>,
}

impl HankelPencil {
    pub fn eval(&self, s: f64) -> Vec<f64> {
        self.minors.iter().map(|p| p.eval(s)).collect()
    }

    /// `Σ p_i(s)² / Σ ‖p_i‖²`, with `‖·‖` the coefficient 2-norm.
    pub fn residual(&self, s: f64) -> f64 {
        let norm = self.norm_sq();
        if norm == 0.0 {
            return 0.0;
        }
        self.eval(s).iter().map(|v| v * v).sum::<f64>() / norm
    }

    pub fn norm_sq(&self) -> f64 {
        self.minors.iter().flat_map(|p| p.coeffs.iter()).map(|c| c * c).sum()
    }

    /// `Σ p_i(s)²` as a polynomial.
    pub fn sum_of_squares(&self) -> Poly {
        self.minors.iter().fold(Poly::default(), |acc, p| acc.add(&p.mul(p)))
    }
}

fn subsets(n: usize, r: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < r - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, r, &mut Vec::new(), &mut out);
    out
}

fn check_pencil(m_order: usize, k: usize, d: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParams("k must be positive".into()));
    }
    if d < 2 * k {
        return Err(Error::InsufficientOrder { needed: 2 * k, got: d });
    }
    if m_order < d {
        return Err(Error::InsufficientOrder { needed: d, got: m_order });
    }
    Ok(())
}

/// Values of every maximal minor at a given `s`.
pub fn pencil_minors_at<S: Scalar>(m: &UnivariateMoments<S>, k: usize, d: usize, s: &S) -> Result<Vec<S>> {
    check_pencil(m.order(), k, d)?;
    let mt = tilde_moments(m, s);
    subsets(d - k + 1, k + 1)
        .iter()
        .map(|cols| {
            let minor: Vec<Vec<S>> = (0..=k).map(|i| cols.iter().map(|&j| mt.get(i + j)).collect()).collect();
            det(&minor)
        })
        .collect()
}

/// Degree bound in `s` of the minor on the given columns.
fn minor_degree(k: usize, cols: &[usize]) -> usize {
    (k * (k + 1) / 2 + cols.iter().sum::<usize>()) / 2
}

/// Expands the pencil by interpolation at Chebyshev nodes on `[0, h]`.
pub fn hankel_pencil_on(m: &UnivariateMoments<f64>, k: usize, d: usize, h: f64) -> Result<HankelPencil> {
    check_pencil(m.order(), k, d)?;
    let columns = subsets(d - k + 1, k + 1);
    let deg = columns.iter().map(|c| minor_degree(k, c)).max().unwrap_or(0);
    let nodes = chebyshev_nodes(deg + 1, 0.0, h);
    let values = nodes.iter().map(|s| pencil_minors_at(m, k, d, s)).collect::<Result<Vec<_>>>()?;
    let minors = (0..columns.len())
        .map(|i| {
            let v: Vec<f64> = values.iter().map(|row| row[i]).collect();
            let c = interpolate(&nodes, &v)?;
            Ok(Poly::new(c[..=minor_degree(k, &columns[i]).min(c.len() - 1)].to_vec()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HankelPencil { k, d, columns, minors })
}

/// The pencil of `m` with nodes on `[0, m_2]`.
pub fn hankel_pencil(m: &UnivariateMoments<f64>, k: usize, d: usize) -> Result<HankelPencil> {
    let h = if m.order() >= 2 && m.get(2) > 0.0 { m.get(2) } else { 1.0 };
    hankel_pencil_on(m, k, d, h)
}

/// Outcome of a secant membership test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipVerdict {
    pub k: usize,
    pub on_model: bool,
    pub residual: f64,
    /// Minimizing common variance, in the units of the input.
    pub witness_s: f64,
    pub threshold: f64,
    /// Normalized Sylvester resultant of two random minor combinations; small
    /// values corroborate a common root but do not decide the verdict.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resultant: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipOptions {
    pub threshold: f64,
    /// Highest moment order used; all available moments by default.
    pub order: Option<usize>,
    pub seed: u64,
}

impl Default for MembershipOptions {
    fn default() -> Self {
        MembershipOptions { threshold: DEFAULT_THRESHOLD, order: None, seed: 0 }
    }
}

/// Standardized moments with the mean and scale used.
fn standardized(m: &UnivariateMoments<f64>) -> (UnivariateMoments<f64>, f64, f64) {
    let mean = m.get(1);
    let var = m.get(2) - mean * mean;
    if var > 0.0 && var.is_finite() {
        let sd = var.sqrt();
        (m.affine(&(1.0 / sd), &(-mean / sd)), mean, sd)
    } else {
        (m.affine(&1.0, &(-mean)), mean, 1.0)
    }
}

/// Global minimum of the pencil residual on `[0, hi]`: endpoints, critical
/// points of the sum of squares, and a coarse grid as a safeguard.
fn minimize_residual(p: &HankelPencil, hi: f64) -> (f64, f64) {
    let q = p.sum_of_squares();
    let mut cands: Vec<f64> = vec![0.0, hi];
    cands.extend(q.derivative().trimmed(1e-15).real_roots(1e-7).into_iter().filter(|&s| (0.0..=hi).contains(&s)));
    cands.extend((1..200).map(|i| hi * i as f64 / 200.0));
    cands
        .into_iter()
        .map(|s| (p.residual(s), s))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(r, s)| (r.max(0.0), s))
        .unwrap_or((f64::INFINITY, 0.0))
}

fn resultant_check(p: &HankelPencil, seed: u64) -> Option<f64> {
    if p.minors.len() < 2 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (p.k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut combo = || {
        p.minors.iter().fold(Poly::default(), |acc, m| {
            let w: f64 = rng.random_range(-1.0..1.0);
            acc.add(&m.scale(w / m.norm_inf().max(1e-300)))
        })
    };
    let (a, b) = (combo().trimmed(1e-12), combo().trimmed(1e-12));
    if a.degree().unwrap_or(0) == 0 && b.degree().unwrap_or(0) == 0 {
        return None;
    }
    normalized_resultant(&a, &b).ok()
}

/// Tests whether `m` lies on the `k`-th homoscedastic secant, using the
/// default options.
pub fn secant_membership(m: &UnivariateMoments<f64>, k: usize) -> Result<MembershipVerdict> {
    secant_membership_with(m, k, &MembershipOptions::default())
}

pub fn secant_membership_with(m: &UnivariateMoments<f64>, k: usize, opts: &MembershipOptions) -> Result<MembershipVerdict> {
    let d = opts.order.unwrap_or(m.order());
    if d < 2 * k + 1 {
        return Err(Error::InsufficientOrder { needed: 2 * k + 1, got: d });
    }
    if m.m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParams("moments must be finite".into()));
    }
    let (z, _, sd) = standardized(m);
    let pencil = hankel_pencil_on(&z, k, d, 1.0)?;
    let (residual, s) = minimize_residual(&pencil, 1.0);
    Ok(MembershipVerdict {
        k,
        on_model: residual < opts.threshold,
        residual,
        witness_s: s * sd * sd,
        threshold: opts.threshold,
        resultant: resultant_check(&pencil, opts.seed),
    })
}

/// Estimated number of components with the verdicts that led to it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentCount {
    /// Smallest accepted `k`, or `k_max + 1` when none is accepted.
    pub k: usize,
    pub verdicts: Vec<MembershipVerdict>,
}

/// Smallest `k ≤ k_max` accepted by [`secant_membership`].
pub fn estimate_components(m: &UnivariateMoments<f64>, k_max: usize) -> Result<ComponentCount> {
    estimate_components_with(m, k_max, &MembershipOptions::default())
}

pub fn estimate_components_with(m: &UnivariateMoments<f64>, k_max: usize, opts: &MembershipOptions) -> Result<ComponentCount> {
    if k_max == 0 {
        return Err(Error::InvalidParams("k_max must be positive".into()));
    }
    let d = opts.order.unwrap_or(m.order());
    if d < 2 * k_max + 1 {
        return Err(Error::InsufficientOrder { needed: 2 * k_max + 1, got: d });
    }
    let mut verdicts = Vec::new();
    for k in 1..=k_max {
        let v = secant_membership_with(m, k, opts)?;
        let accept = v.on_model;
        verdicts.push(v);
        if accept {
            return Ok(ComponentCount { k, verdicts });
        }
    }
    Ok(ComponentCount { k: k_max + 1, verdicts })
}

/// Raw sample moments `m_1..m_d` of univariate data.
pub fn sample_moments_1d(data: &[f64], d: usize) -> Result<UnivariateMoments<f64>> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParams("data contains non-finite values".into()));
    }
    let n = data.len() as f64;
    let mut sums = vec![0.0; d];
    for &x in data {
        let mut p = 1.0;
        for s in sums.iter_mut() {
            p *= x;
            *s += p;
        }
    }
    Ok(UnivariateMoments::new(sums.into_iter().map(|s| s / n).collect()))
}

/// Bootstrap calibration of the membership threshold at `k`.
///
/// The pencil of the full sample is evaluated at its minimizing `s`; each
/// replicate contributes the normalized squared deviation of its minors from
/// the full-sample minors there. The threshold is [`BOOTSTRAP_FACTOR`] times
/// the mean deviation.
pub fn bootstrap_threshold(data: &[f64], k: usize, d: usize, replicates: usize, seed: u64) -> Result<f64> {
    if replicates == 0 {
        return Err(Error::InvalidParams("at least one bootstrap replicate is needed".into()));
    }
    let full = sample_moments_1d(data, d)?;
    let (z, mean, sd) = standardized(&full);
    let pencil = hankel_pencil_on(&z, k, d, 1.0)?;
    let (_, s) = minimize_residual(&pencil, 1.0);
    let base = pencil_minors_at(&z, k, d, &s)?;
    let norm = pencil.norm_sq().max(1e-300);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut resample = vec![0.0; data.len()];
    let mut total = 0.0;
    for _ in 0..replicates {
        for x in resample.iter_mut() {
            *x = (data[rng.random_range(0..data.len())] - mean) / sd;
        }
        let zb = sample_moments_1d(&resample, d)?;
        let mb = pencil_minors_at(&zb, k, d, &s)?;
        total += mb.iter().zip(&base).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / norm;
    }
    Ok(BOOTSTRAP_FACTOR * total / replicates as f64)
}

/// Component count from raw data with bootstrap-calibrated thresholds.
pub fn estimate_components_sample(data: &[f64], k_max: usize, replicates: usize, seed: u64) -> Result<ComponentCount> {
    if k_max == 0 {
        return Err(Error::InvalidParams("k_max must be positive".into()));
    }
    let d = 2 * k_max + 1;
    let m = sample_moments_1d(data, d)?;
    let mut verdicts = Vec::new();
    for k in 1..=k_max {
        let threshold = bootstrap_threshold(data, k, d, replicates, seed)?;
        let opts = MembershipOptions { threshold, order: Some(d), seed };
        let v = secant_membership_with(&m, k, &opts)?;
        let accept = v.on_model;
        verdicts.push(v);
        if accept {
            return Ok(ComponentCount { k, verdicts });
        }
    }
    Ok(ComponentCount { k: k_max + 1, verdicts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{homoscedastic_cumulants, homoscedastic_moments, sample_mixture, HomoscedasticParams};
    use crate::scalar::ratio;
    use num_rational::BigRational;

    fn mix(means: &[f64], weights: &[f64], var: f64) -> HomoscedasticParams<f64> {
        HomoscedasticParams { means: means.iter().map(|&m| vec![m]).collect(), weights: weights.to_vec(), cov: vec![vec![var]] }
    }

    fn moments(p: &HomoscedasticParams<f64>, d: usize) -> UnivariateMoments<f64> {
        UnivariateMoments::from_series(&homoscedastic_moments(p, d).unwrap()).unwrap()
    }

    #[test]
    fn p3_examples() {
        assert_eq!(eval_p3(&1.0, &3.0, &7.0), 0.0);
        assert_eq!(eval_p3(&0.0, &2.5, &0.0), 0.0);
        let m = moments(&mix(&[0.0, 3.0], &[0.3, 0.7], 1.0), 3);
        assert!(eval_p3(&m.m[0], &m.m[1], &m.m[2]).abs() > 1e-3);
        let (a, b, c) = (ratio(3, 7), ratio(-2, 5), ratio(11, 3));
        assert_eq!(eval_p3(&a, &b, &c), p3_cumulant_form(&a, &b, &c).unwrap());
    }

    #[test]
    fn p5_examples() {
        assert_eq!(eval_p5(&0.0, &0.0, &4.2), 0.0);
        let p = HomoscedasticParams {
            means: vec![vec![ratio(1, 2)], vec![ratio(-3, 1)]],
            weights: vec![ratio(2, 7), ratio(5, 7)],
            cov: vec![vec![ratio(4, 3)]],
        };
        let k = homoscedastic_cumulants(&p, 5).unwrap();
        let kap = |j: u32| k.moment(&MultiIndex::new(vec![j])).unwrap();
        assert_eq!(eval_p5(&kap(3), &kap(4), &kap(5)), ratio(0, 1));
        let t = ratio(3, 2);
        let (a, b, c) = (ratio(2, 1), ratio(-1, 3), ratio(5, 4));
        let scaled = eval_p5(&(a.clone() * t.powi(3)), &(b.clone() * t.powi(4)), &(c.clone() * t.powi(5)));
        assert_eq!(scaled, eval_p5(&a, &b, &c) * t.powi(18));
    }

    #[test]
    fn pencil_k1_matches_hand_expansion() {
        // m̃_1 = m_1, m̃_2 = m_2 − s, m̃_3 = m_3 − 3 s m_1
        let m = UnivariateMoments::new(vec![ratio(1, 1), ratio(3, 1), ratio(7, 1)]);
        let s = ratio(5, 4);
        let got = pencil_minors_at(&m, 1, 3, &s).unwrap();
        let (m1, m2, m3) = (ratio(1, 1), ratio(3, 1) - s.clone(), ratio(7, 1) - ratio(3, 1) * s.clone());
        let want: Vec<BigRational> = vec![m2.clone() - m1.clone() * m1.clone(), m3.clone() - m1.clone() * m2.clone(), m1 * m3 - m2.clone() * m2];
        assert_eq!(got, want);
        let at_truth = pencil_minors_at(&m, 1, 3, &ratio(2, 1)).unwrap();
        assert!(at_truth.iter().all(|v| *v == ratio(0, 1)));
        assert!(hankel_pencil(&UnivariateMoments::new(vec![1.0, 3.0, 7.0]), 2, 3).is_err());
    }

    #[test]
    fn pencil_vanishes_on_two_mixture() {
        let p = mix(&[-1.0, 2.0], &[0.4, 0.6], 0.7);
        let m = moments(&p, 5);
        let pencil = hankel_pencil(&m, 2, 5).unwrap();
        assert_eq!(pencil.minors.len(), 4);
        let scale = pencil.norm_sq().sqrt();
        let vals = pencil.eval(0.7);
        assert!(vals.iter().all(|v| v.abs() < 1e-9 * scale), "{vals:?} {scale} {pencil:?}");
    }

    #[test]
    fn membership_examples() {
        let g = mix(&[1.0], &[1.0], 2.0);
        let v = secant_membership(&moments(&g, 3), 1).unwrap();
        assert!(v.on_model);
        assert!((v.witness_s - 2.0).abs() < 1e-6, "{v:?}");

        let p = mix(&[0.0, 3.0], &[0.3, 0.7], 1.0);
        let v = secant_membership(&moments(&p, 5), 1).unwrap();
        assert!(!v.on_model, "{v:?}");
        let v = secant_membership(&moments(&p, 5), 2).unwrap();
        assert!(v.on_model, "{v:?}");
        assert!((v.witness_s - 1.0).abs() < 1e-5, "{v:?}");
        assert!(v.resultant.unwrap() < 1e-6);
    }

    #[test]
    fn off_model_residual_is_bounded_away() {
        let m = UnivariateMoments::new(vec![0.3, 1.7, -0.4, 6.1, 2.2]);
        let v = secant_membership(&m, 2).unwrap();
        assert!(!v.on_model && v.residual > 1e-6, "{v:?}");
    }

    #[test]
    fn component_counts() {
        let g = mix(&[-0.5], &[1.0], 1.3);
        assert_eq!(estimate_components(&moments(&g, 7), 3).unwrap().k, 1);
        let p = mix(&[0.0, 4.0], &[0.45, 0.55], 1.0);
        let c = estimate_components(&moments(&p, 7), 3).unwrap();
        assert_eq!(c.k, 2);
        assert_eq!(c.verdicts.len(), 2);
        let m = UnivariateMoments::new(vec![0.3, 1.7, -0.4, 6.1, 2.2]);
        assert_eq!(estimate_components(&m, 2).unwrap().k, 3);
    }

    #[test]
    fn nesting() {
        let g = mix(&[0.2], &[1.0], 0.8);
        let m = moments(&g, 5);
        assert!(secant_membership(&m, 1).unwrap().on_model);
        assert!(secant_membership(&m, 2).unwrap().on_model);
    }

    #[test]
    fn noisy_two_mixture() {
        let p = mix(&[0.0, 4.0], &[0.4, 0.6], 1.0);
        let data: Vec<f64> = sample_mixture(&p, 100_000, 3).unwrap().into_iter().map(|r| r[0]).collect();
        let c = estimate_components_sample(&data, 2, 30, 1).unwrap();
        assert_eq!(c.k, 2, "{c:?}");
    }
}
