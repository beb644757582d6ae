//! Dimensions, fiber dimensions and defects of homoscedastic secant varieties.
//!
//! The dimension of the image of a polynomial map equals the rank of its
//! Jacobian at a general point. Jacobians are computed exactly by evaluating
//! the forward maps over dual numbers, and the generic rank is taken as the
//! maximum rank over several random integer points.

use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{rank, rational_rank, Matrix};
use crate::models::{dirac_mixture_moments, homoscedastic_moments, DiracMixtureParams, HomoscedasticParams};
use crate::scalar::{Dual, Fp, Scalar};
use crate::tps::TruncatedSeries;

pub const MAX_N: usize = 8;
pub const MAX_D: usize = 6;
pub const MAX_K: usize = 12;

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of homoscedastic mixture parameters, `nk + (k−1) + n(n+1)/2`.
pub fn parameter_count(n: usize, k: usize) -> usize {
    n * k + k - 1 + n * (n + 1) / 2
}

/// Number of moments of orders `1..=d` in `n` variables, `C(n+d, d) − 1`.
pub fn ambient_dim(n: usize, d: usize) -> usize {
    binomial(n + d, d) - 1
}

/// How ranks of integer matrices are computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankEngine {
    /// Rational arithmetic with fraction-free elimination.
    #[default]
    Exact,
    /// Elimination modulo the prime `2^61 − 1`; never exceeds the rational rank.
    Modular,
}

/// Controls the random-point rank estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankOptions {
    pub engine: RankEngine,
    /// At least this many points are always evaluated.
    pub min_trials: usize,
    /// Sampling stops after this many points even without agreement.
    pub max_trials: usize,
    /// Point coordinates are uniform integers in `[-bound, bound]`.
    pub entry_bound: i64,
}

impl Default for RankOptions {
    fn default() -> Self {
        RankOptions { engine: RankEngine::default(), min_trials: 2, max_trials: 6, entry_bound: 1000 }
    }
}

/// One row of a defect table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefectReport {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub par: usize,
    pub ambient: usize,
    pub expected: usize,
    pub dim: usize,
    pub delta_fiber: usize,
    pub defect: usize,
    pub trials: usize,
}

impl DefectReport {
    fn from_dim(n: usize, k: usize, d: usize, dim: usize, trials: usize) -> Self {
        let par = parameter_count(n, k);
        let ambient = ambient_dim(n, d);
        let delta_fiber = par - dim;
        DefectReport {
            n,
            k,
            d,
            par,
            ambient,
            expected: par.min(ambient),
            dim,
            delta_fiber,
            defect: delta_fiber - par.saturating_sub(ambient),
            trials,
        }
    }
}

/// Dimension data for the plain Veronese secant `Sec_k(V_{n,d})`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VeroneseReport {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub dim: usize,
    pub delta_fiber: usize,
    pub defect: usize,
    pub trials: usize,
}

fn check_envelope(n: usize, k: usize, d: usize) -> Result<()> {
    if n == 0 || k == 0 || d == 0 {
        return Err(Error::InvalidParams(format!("n, k, d must be positive, got ({n}, {k}, {d})")));
    }
    if n > MAX_N || k > MAX_K || d > MAX_D {
        return Err(Error::Envelope(format!(
            "(n, k, d) = ({n}, {k}, {d}) outside n ≤ {MAX_N}, k ≤ {MAX_K}, d ≤ {MAX_D}"
        )));
    }
    Ok(())
}

fn cell_rng(seed: u64, tag: u64, n: usize, k: usize, d: usize) -> ChaCha8Rng {
    let cell = ((n as u64) << 40) | ((k as u64) << 24) | ((d as u64) << 8) | tag;
    ChaCha8Rng::seed_from_u64(seed ^ cell.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Free coordinates of a homoscedastic point: means (component-major),
/// the first `k−1` weights, then the upper triangle of `Σ` row by row.
pub fn flatten_params<S: Scalar>(p: &HomoscedasticParams<S>) -> Vec<S> {
    let n = p.nvars();
    let k = p.ncomponents();
    let mut out: Vec<S> = p.means.iter().flatten().cloned().collect();
    out.extend(p.weights[..k - 1].iter().cloned());
    for i in 0..n {
        out.extend(p.cov[i][i..].iter().cloned());
    }
    out
}

/// Inverse of [`flatten_params`]; the last weight is `1 − Σ λ_i`.
pub fn unflatten_params<S: Scalar>(n: usize, k: usize, x: &[S]) -> Result<HomoscedasticParams<S>> {
    if x.len() != parameter_count(n, k) {
        return Err(Error::DimensionMismatch(format!(
            "{} coordinates, expected {}",
            x.len(),
            parameter_count(n, k)
        )));
    }
    let means = x[..n * k].chunks(n).map(<[S]>::to_vec).collect();
    let mut weights = x[n * k..n * k + k - 1].to_vec();
    let rest = weights.iter().cloned().fold(S::one(), |a, b| a - b);
    weights.push(rest);
    let mut cov = vec![vec![S::zero(); n]; n];
    let mut it = x[n * k + k - 1..].iter();
    for i in 0..n {
        for j in i..n {
            let v = it.next().expect("length checked").clone();
            cov[i][j] = v.clone();
            cov[j][i] = v;
        }
    }
    Ok(HomoscedasticParams { means, weights, cov })
}

fn tangent_moments<S: Scalar>(s: &TruncatedSeries<Dual<S>>, from_order: usize) -> Vec<S> {
    let layout = s.layout();
    let start = layout.order_range(from_order).start;
    s.coeffs()[start..]
        .iter()
        .enumerate()
        .map(|(i, c)| S::from_i64(layout.factorial(start + i) as i64) * c.tangent.clone())
        .collect()
}

/// Jacobian of the map `parameters ↦ (m_a)_{1 ≤ |a| ≤ d}` at `point`, one row per
/// free parameter in [`flatten_params`] order.
pub fn moment_map_jacobian<S: Scalar>(point: &HomoscedasticParams<S>, d: usize) -> Result<Matrix<S>> {
    point.validate()?;
    let n = point.nvars();
    let k = point.ncomponents();
    let x = flatten_params(point);
    (0..x.len())
        .map(|j| {
            let duals: Vec<Dual<S>> = x
                .iter()
                .enumerate()
                .map(|(i, v)| if i == j { Dual::variable(v.clone()) } else { Dual::constant(v.clone()) })
                .collect();
            let p = unflatten_params(n, k, &duals)?;
            Ok(tangent_moments(&homoscedastic_moments(&p, d)?, 1))
        })
        .collect()
}

/// Reduction of a rational modulo `2^61 − 1`; `None` when the denominator vanishes.
pub fn rational_to_fp(r: &BigRational) -> Option<Fp> {
    let p = BigInt::from(Fp::MODULUS);
    let reduce = |x: &BigInt| {
        let v: BigInt = ((x % &p) + &p) % &p;
        Fp::new(u64::try_from(v).expect("reduced below modulus"))
    };
    reduce(r.denom()).inverse().map(|inv| reduce(r.numer()) * inv)
}

/// Rank of the moment-map Jacobian at a specific point.
pub fn jacobian_rank_at(point: &HomoscedasticParams<BigRational>, d: usize, engine: RankEngine) -> Result<usize> {
    match engine {
        RankEngine::Exact => Ok(rational_rank(&moment_map_jacobian(point, d)?)),
        RankEngine::Modular => {
            let conv = |x: &BigRational| rational_to_fp(x).ok_or_else(|| Error::InvalidParams("denominator divisible by the modulus".into()));
            let fp = HomoscedasticParams {
                means: point.means.iter().map(|m| m.iter().map(conv).collect()).collect::<Result<_>>()?,
                weights: point.weights.iter().map(conv).collect::<Result<_>>()?,
                cov: point.cov.iter().map(|r| r.iter().map(conv).collect()).collect::<Result<_>>()?,
            };
            Ok(rank(&moment_map_jacobian(&fp, d)?))
        }
    }
}

/// Maximum of `eval` over random trials: at least `min_trials`, then until the
/// top value has been seen twice or equals `ceiling`.
fn generic_max(opts: &RankOptions, ceiling: usize, mut eval: impl FnMut() -> Result<usize>) -> Result<(usize, usize)> {
    let mut best = 0;
    let mut hits = 0;
    let mut trials = 0;
    while trials < opts.max_trials.max(1) {
        let r = eval()?;
        trials += 1;
        if r > best {
            best = r;
            hits = 1;
        } else if r == best {
            hits += 1;
        }
        if trials >= opts.min_trials && (hits >= 2 || best == ceiling) {
            break;
        }
    }
    Ok((best, trials))
}

fn random_int(rng: &mut ChaCha8Rng, bound: i64) -> i64 {
    rng.random_range(-bound..=bound)
}

fn random_integer_point<S: Scalar>(rng: &mut ChaCha8Rng, n: usize, k: usize, bound: i64) -> HomoscedasticParams<S> {
    let x: Vec<S> = (0..parameter_count(n, k)).map(|_| S::from_i64(random_int(rng, bound))).collect();
    unflatten_params(n, k, &x).expect("length matches")
}

fn generic_jacobian_rank<S: Scalar>(
    n: usize,
    k: usize,
    d: usize,
    rng: &mut ChaCha8Rng,
    opts: &RankOptions,
    rank_of: impl Fn(&Matrix<S>) -> usize,
) -> Result<(usize, usize)> {
    let ceiling = parameter_count(n, k).min(ambient_dim(n, d));
    generic_max(opts, ceiling, || {
        let p: HomoscedasticParams<S> = random_integer_point(rng, n, k, opts.entry_bound);
        Ok(rank_of(&moment_map_jacobian(&p, d)?))
    })
}

/// Dimension, fiber dimension and defect of `Sec^H_k(G_{n,d})`.
pub fn defect_report(n: usize, k: usize, d: usize, seed: u64) -> Result<DefectReport> {
    defect_report_with(n, k, d, seed, &RankOptions::default())
}

pub fn defect_report_with(n: usize, k: usize, d: usize, seed: u64, opts: &RankOptions) -> Result<DefectReport> {
    check_envelope(n, k, d)?;
    let mut rng = cell_rng(seed, 1, n, k, d);
    let (dim, trials) = match opts.engine {
        RankEngine::Exact => generic_jacobian_rank::<BigRational>(n, k, d, &mut rng, opts, |m| rational_rank(m))?,
        RankEngine::Modular => generic_jacobian_rank::<Fp>(n, k, d, &mut rng, opts, |m| rank(m))?,
    };
    Ok(DefectReport::from_dim(n, k, d, dim, trials))
}

/// Jacobian of the centered cumulant map `φ_{n,k,d}` in its `(k−1)(n+1)` free
/// coordinates `(λ_1..λ_{k−1}, μ_1..μ_{k−1})`, with `λ_k = 1 − Σλ_i` and
/// `μ_k = −Σ λ_i μ_i / λ_k`.
pub fn phi_jacobian<S: Scalar>(n: usize, k: usize, d: usize, free: &[S]) -> Result<Matrix<S>> {
    let m = (k - 1) * (n + 1);
    if free.len() != m {
        return Err(Error::DimensionMismatch(format!("{} coordinates, expected {m}", free.len())));
    }
    (0..m)
        .map(|j| {
            let x: Vec<Dual<S>> = free
                .iter()
                .enumerate()
                .map(|(i, v)| if i == j { Dual::variable(v.clone()) } else { Dual::constant(v.clone()) })
                .collect();
            let mut weights: Vec<Dual<S>> = x[..k - 1].to_vec();
            let last = weights.iter().cloned().fold(Dual::one_value(), |a, b| a - b);
            if last.value.is_zero() {
                return Err(Error::Precondition("last weight vanishes".into()));
            }
            let mut points: Vec<Vec<Dual<S>>> = x[k - 1..].chunks(n).map(<[Dual<S>]>::to_vec).collect();
            let mut centre = vec![Dual::<S>::constant(S::zero()); n];
            for (w, p) in weights.iter().zip(&points) {
                for (c, v) in centre.iter_mut().zip(p) {
                    *c = c.clone() + w.clone() * v.clone();
                }
            }
            points.push(centre.into_iter().map(|c| -(c / last.clone())).collect());
            weights.push(last);
            let dirac = DiracMixtureParams { points, weights };
            let cumulants = dirac_mixture_moments(&dirac, d)?.log()?;
            Ok(tangent_moments(&cumulants, 3))
        })
        .collect()
}

impl<S: Scalar> Dual<S> {
    fn one_value() -> Self {
        Dual::constant(S::one())
    }
}

/// Generic rank of the Jacobian of `φ_{n,k,d}`; the fiber dimension is
/// `(k−1)(n+1) − rank`.
pub fn phi_rank(n: usize, k: usize, d: usize, seed: u64) -> Result<usize> {
    phi_rank_with(n, k, d, seed, &RankOptions::default())
}

pub fn phi_rank_with(n: usize, k: usize, d: usize, seed: u64, opts: &RankOptions) -> Result<usize> {
    check_envelope(n, k, d)?;
    if k == 1 || d < 3 {
        return Ok(0);
    }
    let m = (k - 1) * (n + 1);
    let ceiling = m.min(ambient_dim(n, d) - n - n * (n + 1) / 2);
    let mut rng = cell_rng(seed, 2, n, k, d);
    let bound = opts.entry_bound;
    let (r, _) = generic_max(opts, ceiling, || loop {
        let raw: Vec<i64> = (0..m).map(|_| random_int(&mut rng, bound)).collect();
        if raw[..k - 1].iter().sum::<i64>() == 1 {
            continue;
        }
        return match opts.engine {
            RankEngine::Exact => {
                let x: Vec<BigRational> = raw.iter().map(|&v| <BigRational as Scalar>::from_i64(v)).collect();
                Ok(rational_rank(&phi_jacobian(n, k, d, &x)?))
            }
            RankEngine::Modular => {
                let x: Vec<Fp> = raw.iter().map(|&v| Fp::from_i64(v)).collect();
                Ok(rank(&phi_jacobian(n, k, d, &x)?))
            }
        };
    })?;
    Ok(r)
}

/// Jacobian of `(μ_1..μ_k, λ_1..λ_{k−1}) ↦ (Σ λ_i μ_i^a)_{1 ≤ |a| ≤ d}` with
/// `λ_k = 1 − Σ λ_i`.
pub fn veronese_jacobian<S: Scalar>(n: usize, k: usize, d: usize, x: &[S]) -> Result<Matrix<S>> {
    let par = n * k + k - 1;
    if x.len() != par {
        return Err(Error::DimensionMismatch(format!("{} coordinates, expected {par}", x.len())));
    }
    (0..par)
        .map(|j| {
            let v: Vec<Dual<S>> = x
                .iter()
                .enumerate()
                .map(|(i, t)| if i == j { Dual::variable(t.clone()) } else { Dual::constant(t.clone()) })
                .collect();
            let mut weights = v[n * k..].to_vec();
            let last = weights.iter().cloned().fold(Dual::one_value(), |a, b| a - b);
            weights.push(last);
            let points = v[..n * k].chunks(n).map(<[Dual<S>]>::to_vec).collect();
            let s = dirac_mixture_moments(&DiracMixtureParams { points, weights }, d)?;
            Ok(tangent_moments(&s, 1))
        })
        .collect()
}

/// Dimension of `Sec_k(V_{n,d})` in moment coordinates from the map
/// `(λ_1..λ_{k−1}, μ_1..μ_k) ↦ (Σ λ_i μ_i^a)_{1 ≤ |a| ≤ d}`.
pub fn veronese_report(n: usize, k: usize, d: usize, seed: u64) -> Result<VeroneseReport> {
    veronese_report_with(n, k, d, seed, &RankOptions::default())
}

pub fn veronese_report_with(n: usize, k: usize, d: usize, seed: u64, opts: &RankOptions) -> Result<VeroneseReport> {
    check_envelope(n, k, d)?;
    let par = n * k + k - 1;
    let ambient = ambient_dim(n, d);
    let mut rng = cell_rng(seed, 3, n, k, d);
    let bound = opts.entry_bound;
    let (dim, trials) = generic_max(opts, par.min(ambient), || {
        let raw: Vec<i64> = (0..par).map(|_| random_int(&mut rng, bound)).collect();
        match opts.engine {
            RankEngine::Exact => {
                let x: Vec<BigRational> = raw.iter().map(|&v| <BigRational as Scalar>::from_i64(v)).collect();
                Ok(rational_rank(&veronese_jacobian(n, k, d, &x)?))
            }
            RankEngine::Modular => {
                let x: Vec<Fp> = raw.iter().map(|&v| Fp::from_i64(v)).collect();
                Ok(rank(&veronese_jacobian(n, k, d, &x)?))
            }
        }
    })?;
    let delta_fiber = par - dim;
    let defect = delta_fiber - ((n + 1) * k).saturating_sub(binomial(n + d, d));
    Ok(VeroneseReport { n, k, d, dim, delta_fiber, defect, trials })
}

/// Defect `δ^V_{n,k,d}` predicted by the Alexander–Hirschowitz classification.
pub fn ah_defect(n: usize, k: usize, d: usize) -> usize {
    if d == 2 && 2 <= k && k <= n {
        return k * (k - 1) / 2 - ((n + 1) * k).saturating_sub(binomial(n + 2, 2));
    }
    match (n, k, d) {
        (2, 5, 4) | (3, 9, 4) | (4, 7, 3) | (4, 14, 4) => 1,
        _ => 0,
    }
}

/// Predicted defect `δ^H_{n,k,3}` from the closed-form classification of
/// cubic homoscedastic secants.
pub fn classify_d3(n: usize, k: usize) -> usize {
    if n >= 2 && k == 2 {
        return 1;
    }
    if (k == 3 || k == 4) && n >= k {
        return 2;
    }
    if (n, k) == (5, 7) {
        return 1;
    }
    if n >= 4 {
        let upper = n * n + 2 * n + 6;
        let top = n * n + 3 * n + 2;
        if 6 * (n + 1) < 6 * k && 6 * k <= upper {
            return k - n - 1;
        }
        if upper <= 6 * k && 6 * k < top {
            return n * (top - 6 * k) / 6;
        }
    }
    0
}

/// Predicted fiber dimension `Δ^H_{n,k,3} = δ + max(par − N, 0)`.
pub fn predicted_delta_d3(n: usize, k: usize) -> usize {
    classify_d3(n, k) + parameter_count(n, k).saturating_sub(ambient_dim(n, 3))
}

/// One printed row of the reference table for `d = 3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TableRow {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub par: usize,
    pub ambient: usize,
    pub expected: usize,
    pub dim: usize,
    pub defect: usize,
    pub delta_fiber: usize,
}

const fn row(n: usize, k: usize, par: usize, ambient: usize, expected: usize, dim: usize, defect: usize, delta_fiber: usize) -> TableRow {
    TableRow { n, k, d: 3, par, ambient, expected, dim, defect, delta_fiber }
}

/// Reference values for `Sec^H_k(G_{n,3})`, `n ≤ 7`.
pub const TABLE1: [TableRow; 36] = [
    row(1, 1, 2, 3, 2, 2, 0, 0),
    row(1, 2, 4, 3, 3, 3, 0, 1),
    row(2, 2, 8, 9, 8, 7, 1, 1),
    row(2, 3, 11, 9, 9, 9, 0, 2),
    row(3, 2, 13, 19, 13, 12, 1, 1),
    row(3, 3, 17, 19, 17, 15, 2, 2),
    row(3, 4, 21, 19, 19, 19, 0, 2),
    row(4, 2, 19, 34, 19, 18, 1, 1),
    row(4, 3, 24, 34, 24, 22, 2, 2),
    row(4, 4, 29, 34, 29, 27, 2, 2),
    row(4, 5, 34, 34, 34, 34, 0, 0),
    row(5, 2, 26, 55, 26, 25, 1, 1),
    row(5, 3, 32, 55, 32, 30, 2, 2),
    row(5, 4, 38, 55, 38, 36, 2, 2),
    row(5, 5, 44, 55, 44, 44, 0, 0),
    row(5, 6, 50, 55, 50, 50, 0, 0),
    row(5, 7, 56, 55, 55, 54, 1, 2),
    row(6, 2, 34, 83, 34, 33, 1, 1),
    row(6, 3, 41, 83, 41, 39, 2, 2),
    row(6, 4, 48, 83, 48, 46, 2, 2),
    row(6, 5, 55, 83, 55, 55, 0, 0),
    row(6, 6, 62, 83, 62, 62, 0, 0),
    row(6, 7, 69, 83, 69, 69, 0, 0),
    row(6, 8, 76, 83, 76, 75, 1, 1),
    row(6, 9, 83, 83, 83, 81, 2, 2),
    row(7, 2, 43, 119, 43, 42, 1, 1),
    row(7, 3, 51, 119, 51, 49, 2, 2),
    row(7, 4, 59, 119, 59, 57, 2, 2),
    row(7, 5, 67, 119, 67, 67, 0, 0),
    row(7, 6, 75, 119, 75, 75, 0, 0),
    row(7, 7, 83, 119, 83, 83, 0, 0),
    row(7, 8, 91, 119, 91, 91, 0, 0),
    row(7, 9, 99, 119, 99, 98, 1, 1),
    row(7, 10, 107, 119, 107, 105, 2, 2),
    row(7, 11, 115, 119, 115, 112, 3, 3),
    row(7, 12, 123, 119, 119, 119, 0, 4),
];

/// Reference row for `(n, k, 3)`, if tabulated.
pub fn table1_row(n: usize, k: usize, d: usize) -> Option<&'static TableRow> {
    TABLE1.iter().find(|r| (r.n, r.k, r.d) == (n, k, d))
}

/// Cells of the reference table for `n` in `ns`: `k` from 2 (from 1 when
/// `n = 1`) up to the first `k` with `par ≥ N`.
pub fn table1_cells(ns: impl IntoIterator<Item = usize>) -> Vec<(usize, usize, usize)> {
    let mut cells = Vec::new();
    for n in ns {
        let mut k = if n == 1 { 1 } else { 2 };
        loop {
            cells.push((n, k, 3));
            if parameter_count(n, k) >= ambient_dim(n, 3) {
                break;
            }
            k += 1;
        }
    }
    cells
}

/// Computes reports for many cells in parallel; output order follows `cells`.
pub fn defect_table(cells: &[(usize, usize, usize)], seed: u64, opts: &RankOptions) -> Result<Vec<DefectReport>> {
    cells.par_iter().map(|&(n, k, d)| defect_report_with(n, k, d, seed, opts)).collect()
}

/// A disagreement between a computed report and a reference value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Mismatch {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub source: &'static str,
    pub field: &'static str,
    pub expected: usize,
    pub got: usize,
}

/// Compares reports with the reference table (when tabulated) and, for
/// `d = 3`, with [`classify_d3`].
pub fn check_reports(reports: &[DefectReport]) -> Vec<Mismatch> {
    let mut out = Vec::new();
    for r in reports {
        let mut push = |source, field, expected, got| {
            if expected != got {
                out.push(Mismatch { n: r.n, k: r.k, d: r.d, source, field, expected, got });
            }
        };
        if let Some(t) = table1_row(r.n, r.k, r.d) {
            push("table", "par", t.par, r.par);
            push("table", "N", t.ambient, r.ambient);
            push("table", "exp", t.expected, r.expected);
            push("table", "dim", t.dim, r.dim);
            push("table", "delta", t.defect, r.defect);
            push("table", "Delta", t.delta_fiber, r.delta_fiber);
        }
        if r.d == 3 {
            push("classification", "delta", classify_d3(r.n, r.k), r.defect);
            push("classification", "Delta", predicted_delta_d3(r.n, r.k), r.delta_fiber);
        }
    }
    out
}

/// Aligned text table in the column order `n k d par N exp dim δ Δ`.
pub fn format_table(reports: &[DefectReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>3} {:>3} {:>3} {:>5} {:>5} {:>5} {:>5} {:>3} {:>3}", "n", "k", "d", "par", "N", "exp", "dim", "δ", "Δ");
    for r in reports {
        let _ = writeln!(
            s,
            "{:>3} {:>3} {:>3} {:>5} {:>5} {:>5} {:>5} {:>3} {:>3}",
            r.n, r.k, r.d, r.par, r.ambient, r.expected, r.dim, r.defect, r.delta_fiber
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;

    #[test]
    fn counts() {
        assert_eq!(parameter_count(2, 2), 8);
        assert_eq!(ambient_dim(2, 3), 9);
        assert_eq!(parameter_count(7, 12), 123);
        for n in 1..8 {
            for k in 1..13 {
                // (n+1)(k + n/2) − 1
                assert_eq!(2 * (parameter_count(n, k) + 1), (n + 1) * (2 * k + n));
            }
        }
    }

    #[test]
    fn table_cells_match_reference() {
        let cells = table1_cells(1..=7);
        let want: Vec<_> = TABLE1.iter().map(|r| (r.n, r.k, r.d)).collect();
        assert_eq!(cells, want);
        for r in &TABLE1 {
            assert_eq!(r.par, parameter_count(r.n, r.k));
            assert_eq!(r.ambient, ambient_dim(r.n, 3));
            assert_eq!(r.expected, r.par.min(r.ambient));
            assert_eq!(r.delta_fiber, r.par - r.dim);
            assert_eq!(r.defect, classify_d3(r.n, r.k));
        }
    }

    #[test]
    fn flatten_round_trip() {
        let p = HomoscedasticParams {
            means: vec![vec![ratio(1, 1), ratio(2, 1)], vec![ratio(3, 1), ratio(4, 1)], vec![ratio(5, 1), ratio(6, 1)]],
            weights: vec![ratio(1, 2), ratio(1, 3), ratio(1, 6)],
            cov: vec![vec![ratio(7, 1), ratio(8, 1)], vec![ratio(8, 1), ratio(9, 1)]],
        };
        let x = flatten_params(&p);
        assert_eq!(x.len(), parameter_count(2, 3));
        assert_eq!(unflatten_params(2, 3, &x).unwrap(), p);
    }

    #[test]
    fn small_reports() {
        let r = defect_report(2, 2, 3, 0).unwrap();
        assert_eq!((r.par, r.ambient, r.dim, r.delta_fiber, r.defect), (8, 9, 7, 1, 1));
        let r = defect_report(1, 1, 3, 0).unwrap();
        assert_eq!((r.par, r.dim, r.delta_fiber, r.defect), (2, 2, 0, 0));
        for n in 1..4 {
            assert_eq!(defect_report(n, 1, 2, 5).unwrap().dim, n + n * (n + 1) / 2);
        }
    }

    #[test]
    fn engines_agree() {
        let modular = RankOptions { engine: RankEngine::Modular, ..RankOptions::default() };
        for (n, k) in [(2, 2), (3, 3), (2, 3)] {
            let a = defect_report_with(n, k, 3, 1, &modular).unwrap();
            let b = defect_report(n, k, 3, 1).unwrap();
            assert_eq!(a.dim, b.dim);
            assert_eq!(phi_rank_with(n, k, 3, 1, &modular).unwrap(), phi_rank(n, k, 3, 1).unwrap());
        }
    }

    #[test]
    fn degenerate_point_is_rank_deficient() {
        let z = ratio(0, 1);
        let p = HomoscedasticParams {
            means: vec![vec![z.clone(), z.clone()], vec![z.clone(), z.clone()]],
            weights: vec![ratio(1, 2), ratio(1, 2)],
            cov: vec![vec![z.clone(), z.clone()], vec![z.clone(), z.clone()]],
        };
        let generic = defect_report(2, 2, 3, 0).unwrap().dim;
        for engine in [RankEngine::Exact, RankEngine::Modular] {
            assert!(jacobian_rank_at(&p, 3, engine).unwrap() < generic);
        }
    }

    #[test]
    fn phi_matches_fiber_dimension() {
        assert_eq!(phi_rank(2, 2, 3, 0).unwrap(), 2);
        assert_eq!(phi_rank(5, 7, 3, 0).unwrap(), 34);
        assert_eq!(phi_rank(3, 1, 3, 0).unwrap(), 0);
    }

    #[test]
    fn veronese_examples() {
        assert_eq!(veronese_report(2, 5, 4, 0).unwrap().defect, 1);
        let v = veronese_report(1, 2, 3, 0).unwrap();
        assert_eq!((v.dim, v.defect), (3, 0));
        for n in 2..5 {
            for k in 2..=n {
                assert_eq!(veronese_report(n, k, 2, 0).unwrap().delta_fiber, k * (k - 1) / 2);
            }
        }
    }

    #[test]
    fn classification_examples() {
        for n in 2..8 {
            assert_eq!(classify_d3(n, 2), 1);
        }
        assert_eq!(classify_d3(5, 7), 1);
        assert_eq!((classify_d3(7, 12), predicted_delta_d3(7, 12)), (0, 4));
        assert_eq!(classify_d3(1, 2), 0);
    }

    #[test]
    fn envelope_is_enforced() {
        assert!(matches!(defect_report(9, 2, 3, 0), Err(Error::Envelope(_))));
        assert!(matches!(defect_report(2, 13, 3, 0), Err(Error::Envelope(_))));
        assert!(matches!(defect_report(2, 2, 7, 0), Err(Error::Envelope(_))));
    }

    #[test]
    fn check_flags_mismatch() {
        let mut r = defect_report(2, 2, 3, 0).unwrap();
        assert!(check_reports(std::slice::from_ref(&r)).is_empty());
        r.dim = 8;
        r.delta_fiber = 0;
        r.defect = 0;
        assert!(!check_reports(&[r]).is_empty());
    }

    #[test]
    fn text_table_has_header_and_rows() {
        let r = defect_report(2, 2, 3, 0).unwrap();
        let t = format_table(&[r]);
        assert!(t.lines().next().unwrap().contains("par"));
        assert!(t.lines().nth(1).unwrap().trim().ends_with("7   1   1"));
    }
}
