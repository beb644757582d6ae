//! Truncated multivariate power series.
//!
//! A [`TruncatedSeries`] lives in `S[[u_1, …, u_n]] / (u_1, …, u_n)^{d+1}` and
//! stores generating-function coefficients `c_a = m_a / a!`, so moment and
//! cumulant series multiply, exponentiate and take logarithms without factorial
//! bookkeeping. Raw moments are recovered with [`TruncatedSeries::moment`].
//!
//! Coefficients are stored densely in graded lexicographic order: all
//! monomials of order 0, then order 1 (`u_1, …, u_n`), then order 2
//! (`u_1², u_1u_2, …`), and so on.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest number of variables supported.
pub const MAX_VARS: usize = 8;
/// Largest truncation degree supported for two or more variables.
pub const MAX_DEGREE: usize = 8;
/// Largest truncation degree supported for univariate series.
pub const MAX_DEGREE_UNIVARIATE: usize = 16;

/// Exponent vector `(a_1, …, a_n)` of a monomial `u_1^{a_1} ⋯ u_n^{a_n}`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    /// `power · e_var` in `nvars` variables.
    pub fn unit(nvars: usize, var: usize, power: u32) -> Self {
        let mut e = vec![0; nvars];
        e[var] = power;
        MultiIndex(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    /// Total degree `|a|`.
    pub fn order(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    /// `a! = a_1! ⋯ a_n!`.
    pub fn factorial(&self) -> u64 {
        self.0.iter().map(|&e| (1..=e as u64).product::<u64>()).product()
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.0 {
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        MultiIndex(v)
    }
}

impl From<&[u32]> for MultiIndex {
    fn from(v: &[u32]) -> Self {
        MultiIndex(v.to_vec())
    }
}

/// Monomial ordering and multiplication table for one `(nvars, degree)` pair.
///
/// Layouts are immutable and shared between all series of the same shape.
#[derive(Debug)]
pub struct Layout {
    nvars: usize,
    degree: usize,
    monomials: Vec<MultiIndex>,
    lookup: HashMap<Vec<u32>, usize>,
    /// `order_start[j]` is the position of the first monomial of order `j`.
    order_start: Vec<usize>,
    /// `(i, j, k)` with `monomial[i] + monomial[j] = monomial[k]`.
    products: Vec<(usize, usize, usize)>,
    /// For order ≥ 1: index of `a - e_v` and the variable `v` (first nonzero).
    parents: Vec<Option<(usize, usize)>>,
    factorials: Vec<u64>,
}

fn push_monomials(nvars: usize, order: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if prefix.len() + 1 == nvars {
        prefix.push(order);
        out.push(MultiIndex(prefix.clone()));
        prefix.pop();
        return;
    }
    for first in (0..=order).rev() {
        prefix.push(first);
        push_monomials(nvars, order - first, prefix, out);
        prefix.pop();
    }
}

impl Layout {
    fn build(nvars: usize, degree: usize) -> Layout {
        let mut monomials = Vec::new();
        let mut order_start = Vec::with_capacity(degree + 2);
        for order in 0..=degree {
            order_start.push(monomials.len());
            push_monomials(nvars, order as u32, &mut Vec::with_capacity(nvars), &mut monomials);
        }
        order_start.push(monomials.len());

        let lookup: HashMap<Vec<u32>, usize> =
            monomials.iter().enumerate().map(|(i, m)| (m.0.clone(), i)).collect();

        let mut products = Vec::new();
        for (i, a) in monomials.iter().enumerate() {
            let rest = degree - a.order();
            for (j, b) in monomials[..order_start[rest + 1]].iter().enumerate() {
                let sum: Vec<u32> = a.0.iter().zip(&b.0).map(|(x, y)| x + y).collect();
                products.push((i, j, lookup[&sum]));
            }
        }

        let parents = monomials
            .iter()
            .map(|m| {
                let v = m.0.iter().position(|&e| e > 0)?;
                let mut p = m.0.clone();
                p[v] -= 1;
                Some((lookup[&p], v))
            })
            .collect();
        let factorials = monomials.iter().map(MultiIndex::factorial).collect();

        Layout { nvars, degree, monomials, lookup, order_start, products, parents, factorials }
    }

    /// Shared layout for `nvars` variables truncated above `degree`.
    pub fn get(nvars: usize, degree: usize) -> Result<Arc<Layout>> {
        if nvars == 0 || nvars > MAX_VARS {
            return Err(Error::Envelope(format!("nvars = {nvars} not in 1..={MAX_VARS}")));
        }
        let max = if nvars == 1 { MAX_DEGREE_UNIVARIATE } else { MAX_DEGREE };
        if degree > max {
            return Err(Error::Envelope(format!("degree = {degree} exceeds {max} for {nvars} variables")));
        }
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Layout>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        Ok(guard
            .entry((nvars, degree))
            .or_insert_with(|| Arc::new(Layout::build(nvars, degree)))
            .clone())
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of coefficients, `C(n + d, d)`.
    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[MultiIndex] {
        &self.monomials
    }

    pub fn index_of(&self, a: &MultiIndex) -> Option<usize> {
        if a.nvars() != self.nvars {
            return None;
        }
        self.lookup.get(&a.0).copied()
    }

    /// Positions of all monomials of the given order.
    pub fn order_range(&self, order: usize) -> std::ops::Range<usize> {
        if order > self.degree {
            return self.monomials.len()..self.monomials.len();
        }
        self.order_start[order]..self.order_start[order + 1]
    }

    pub fn factorial(&self, idx: usize) -> u64 {
        self.factorials[idx]
    }

    /// Values of every monomial `x^a` at the point `x`, in layout order.
    pub fn monomial_values<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let mut out = Vec::with_capacity(self.len());
        out.push(S::one());
        for p in &self.parents[1..] {
            let (parent, var) = p.expect("order >= 1 has a parent");
            let v = out[parent].clone() * x[var].clone();
            out.push(v);
        }
        out
    }
}

/// Which affine hyperplane a series belongs to; selects how translations act.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    /// `c_0 = 1`; translations multiply by `exp(uᵗb)`.
    Moment,
    /// `c_0 = 0`; translations add `uᵗb`.
    Cumulant,
}

/// Power series in `nvars` variables modulo monomials of order `> degree`.
#[derive(Clone)]
pub struct TruncatedSeries<S> {
    layout: Arc<Layout>,
    coeffs: Vec<S>,
}

impl<S: PartialEq> PartialEq for TruncatedSeries<S> {
    fn eq(&self, other: &Self) -> bool {
        self.layout.nvars == other.layout.nvars
            && self.layout.degree == other.layout.degree
            && self.coeffs == other.coeffs
    }
}

impl<S: fmt::Debug> fmt::Debug for TruncatedSeries<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut map = f.debug_map();
        for (m, c) in self.layout.monomials.iter().zip(&self.coeffs) {
            map.entry(m, c);
        }
        map.finish()
    }
}

impl<S: Scalar> TruncatedSeries<S> {
    pub fn zero(nvars: usize, degree: usize) -> Result<Self> {
        let layout = Layout::get(nvars, degree)?;
        Ok(Self::zero_like(&layout))
    }

    pub fn one(nvars: usize, degree: usize) -> Result<Self> {
        let mut s = Self::zero(nvars, degree)?;
        s.coeffs[0] = S::one();
        Ok(s)
    }

    pub fn zero_like(layout: &Arc<Layout>) -> Self {
        TruncatedSeries { layout: layout.clone(), coeffs: vec![S::zero(); layout.len()] }
    }

    /// Builds a series from coefficients in layout order.
    pub fn from_coeffs(layout: &Arc<Layout>, coeffs: Vec<S>) -> Result<Self> {
        if coeffs.len() != layout.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for a layout of {}",
                coeffs.len(),
                layout.len()
            )));
        }
        Ok(TruncatedSeries { layout: layout.clone(), coeffs })
    }

    pub fn from_fn(nvars: usize, degree: usize, mut f: impl FnMut(&MultiIndex) -> S) -> Result<Self> {
        let layout = Layout::get(nvars, degree)?;
        let coeffs = layout.monomials.iter().map(&mut f).collect();
        Ok(TruncatedSeries { layout, coeffs })
    }

    /// The linear form `uᵗv`.
    pub fn linear(nvars: usize, degree: usize, v: &[S]) -> Result<Self> {
        if v.len() != nvars {
            return Err(Error::DimensionMismatch(format!("vector of length {} for {nvars} variables", v.len())));
        }
        let mut s = Self::zero(nvars, degree)?;
        for (i, x) in v.iter().enumerate() {
            if let Some(idx) = s.layout.index_of(&MultiIndex::unit(nvars, i, 1)) {
                s.coeffs[idx] = x.clone();
            }
        }
        Ok(s)
    }

    /// The quadratic form `½ uᵗΣu` of a symmetric matrix.
    pub fn half_quadratic(nvars: usize, degree: usize, sigma: &[Vec<S>]) -> Result<Self> {
        check_square(sigma, nvars)?;
        let mut s = Self::zero(nvars, degree)?;
        if degree < 2 {
            return Ok(s);
        }
        let half = S::from_ratio(1, 2);
        for i in 0..nvars {
            for j in i..nvars {
                let mut e = vec![0; nvars];
                e[i] += 1;
                e[j] += 1;
                let idx = s.layout.index_of(&MultiIndex(e)).expect("order 2 monomial");
                s.coeffs[idx] = if i == j {
                    half.clone() * sigma[i][i].clone()
                } else {
                    half.clone() * (sigma[i][j].clone() + sigma[j][i].clone())
                };
            }
        }
        Ok(s)
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn nvars(&self) -> usize {
        self.layout.nvars
    }

    pub fn degree(&self) -> usize {
        self.layout.degree
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<S> {
        self.coeffs
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &S)> {
        self.layout.monomials.iter().zip(&self.coeffs)
    }

    pub fn constant_term(&self) -> &S {
        &self.coeffs[0]
    }

    fn index(&self, a: &MultiIndex) -> Result<usize> {
        if a.nvars() != self.nvars() {
            return Err(Error::DimensionMismatch(format!(
                "index {a:?} for a series in {} variables",
                self.nvars()
            )));
        }
        self.layout
            .index_of(a)
            .ok_or_else(|| Error::IndexOutOfRange { index: a.0.clone(), degree: self.degree() })
    }

    /// Stored generating-function coefficient `c_a`.
    pub fn coeff(&self, a: &MultiIndex) -> Result<&S> {
        Ok(&self.coeffs[self.index(a)?])
    }

    pub fn set_coeff(&mut self, a: &MultiIndex, value: S) -> Result<()> {
        let idx = self.index(a)?;
        self.coeffs[idx] = value;
        Ok(())
    }

    /// Raw moment (or cumulant) `a! · c_a`.
    pub fn moment(&self, a: &MultiIndex) -> Result<S> {
        let idx = self.index(a)?;
        Ok(S::from_i64(self.layout.factorial(idx) as i64) * self.coeffs[idx].clone())
    }

    /// All raw moments in layout order.
    pub fn moments(&self) -> Vec<S> {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| S::from_i64(self.layout.factorial(i) as i64) * c.clone())
            .collect()
    }

    /// Builds a series from raw moments `(a, m_a)`; unspecified entries are zero.
    pub fn from_moments(nvars: usize, degree: usize, entries: &[(MultiIndex, S)]) -> Result<Self> {
        let mut s = Self::zero(nvars, degree)?;
        for (a, m) in entries {
            let idx = s.index(a)?;
            s.coeffs[idx] = m.clone() / S::from_i64(s.layout.factorial(idx) as i64);
        }
        Ok(s)
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.nvars() != other.nvars() || self.degree() != other.degree() {
            return Err(Error::DimensionMismatch(format!(
                "series shapes (n={}, d={}) and (n={}, d={})",
                self.nvars(),
                self.degree(),
                other.nvars(),
                other.degree()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(self.zip_with(other, |a, b| a.clone() + b.clone()))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(self.zip_with(other, |a, b| a.clone() - b.clone()))
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&S, &S) -> S) -> Self {
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| f(a, b)).collect();
        TruncatedSeries { layout: self.layout.clone(), coeffs }
    }

    pub fn scale(&self, factor: &S) -> Self {
        self.map_coeffs(|c| c.clone() * factor.clone())
    }

    pub fn neg(&self) -> Self {
        self.map_coeffs(|c| -c.clone())
    }

    fn map_coeffs(&self, f: impl Fn(&S) -> S) -> Self {
        TruncatedSeries { layout: self.layout.clone(), coeffs: self.coeffs.iter().map(f).collect() }
    }

    /// Converts coefficients to another scalar type.
    pub fn convert<T: Scalar>(&self, f: impl Fn(&S) -> T) -> TruncatedSeries<T> {
        TruncatedSeries { layout: self.layout.clone(), coeffs: self.coeffs.iter().map(f).collect() }
    }

    /// Cauchy product truncated at the common degree.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(self.mul_same_shape(other))
    }

    fn mul_same_shape(&self, other: &Self) -> Self {
        let mut out = vec![S::zero(); self.coeffs.len()];
        let mut skip = usize::MAX;
        for &(i, j, k) in &self.layout.products {
            if i == skip {
                continue;
            }
            let a = &self.coeffs[i];
            if a.is_zero() {
                skip = i;
                continue;
            }
            let b = &other.coeffs[j];
            if !b.is_zero() {
                out[k] = std::mem::replace(&mut out[k], S::zero()) + a.clone() * b.clone();
            }
        }
        TruncatedSeries { layout: self.layout.clone(), coeffs: out }
    }

    /// Truncated exponential `Σ_{j ≤ d} K^j / j!`; requires `c_0 = 0`.
    pub fn exp(&self) -> Result<Self> {
        if !self.constant_term().is_negligible() {
            return Err(Error::Precondition(format!(
                "exp needs a zero constant term, got {:?}",
                self.constant_term()
            )));
        }
        let mut k = self.clone();
        k.coeffs[0] = S::zero();
        // Horner: 1 + K(1 + K/2(1 + K/3(…)))
        let mut acc = Self::one_like(&self.layout);
        for j in (1..=self.degree()).rev() {
            let term = k.mul_same_shape(&acc).scale(&(S::one() / S::from_i64(j as i64)));
            acc = term;
            acc.coeffs[0] = acc.coeffs[0].clone() + S::one();
        }
        Ok(acc)
    }

    /// Truncated logarithm `Σ_{j ≤ d} (-1)^{j+1} (M - 1)^j / j`; requires `c_0 = 1`.
    pub fn log(&self) -> Result<Self> {
        if !(self.constant_term().clone() - S::one()).is_negligible() {
            return Err(Error::Precondition(format!(
                "log needs constant term 1, got {:?}",
                self.constant_term()
            )));
        }
        let mut x = self.clone();
        x.coeffs[0] = S::zero();
        let d = self.degree();
        if d == 0 {
            return Ok(Self::zero_like(&self.layout));
        }
        let sign = |j: usize| if j % 2 == 1 { S::one() } else { -S::one() };
        let mut acc = Self::zero_like(&self.layout);
        acc.coeffs[0] = sign(d) / S::from_i64(d as i64);
        for j in (1..d).rev() {
            acc = x.mul_same_shape(&acc);
            acc.coeffs[0] = acc.coeffs[0].clone() + sign(j) / S::from_i64(j as i64);
        }
        Ok(x.mul_same_shape(&acc))
    }

    fn one_like(layout: &Arc<Layout>) -> Self {
        let mut s = Self::zero_like(layout);
        s.coeffs[0] = S::one();
        s
    }

    /// Drops all coefficients of order greater than `degree`.
    pub fn truncate(&self, degree: usize) -> Result<Self> {
        if degree > self.degree() {
            return Err(Error::Precondition(format!(
                "cannot truncate degree {} series to higher degree {degree}",
                self.degree()
            )));
        }
        let layout = Layout::get(self.nvars(), degree)?;
        let coeffs = self.coeffs[..layout.len()].to_vec();
        Ok(TruncatedSeries { layout, coeffs })
    }

    /// Keeps only the coefficients with `lo ≤ |a| ≤ hi`.
    pub fn orders_between(&self, lo: usize, hi: usize) -> Self {
        let mut out = Self::zero_like(&self.layout);
        for order in lo..=hi.min(self.degree()) {
            for idx in self.layout.order_range(order) {
                out.coeffs[idx] = self.coeffs[idx].clone();
            }
        }
        out
    }

    /// The homogeneous piece of the given order.
    pub fn homogeneous_part(&self, order: usize) -> Self {
        self.orders_between(order, order)
    }

    /// Action of `x ↦ Ax + b`: substitutes `u ↦ Aᵗu`, then multiplies by
    /// `exp(uᵗb)` (moment space) or adds `uᵗb` (cumulant space).
    pub fn affine_action(&self, a: &[Vec<S>], b: &[S], space: Space) -> Result<Self> {
        let n = self.nvars();
        check_square(a, n)?;
        if b.len() != n {
            return Err(Error::DimensionMismatch(format!("shift of length {} for {n} variables", b.len())));
        }
        let d = self.degree();
        // ℓ_i(u) = (Aᵗu)_i = Σ_j A_ji u_j, and its powers up to d.
        let forms: Vec<Self> = (0..n)
            .map(|i| {
                let col: Vec<S> = (0..n).map(|j| a[j][i].clone()).collect();
                Self::linear(n, d, &col).expect("shape checked")
            })
            .collect();
        let powers: Vec<Vec<Self>> = forms
            .iter()
            .map(|f| {
                let mut p = vec![Self::one_like(&self.layout)];
                for e in 1..=d {
                    let next = p[e - 1].mul_same_shape(f);
                    p.push(next);
                }
                p
            })
            .collect();

        let mut out = Self::zero_like(&self.layout);
        for (m, c) in self.layout.monomials.iter().zip(&self.coeffs) {
            if c.is_zero() {
                continue;
            }
            let mut term = Self::one_like(&self.layout);
            for (i, &e) in m.0.iter().enumerate() {
                if e > 0 {
                    term = term.mul_same_shape(&powers[i][e as usize]);
                }
            }
            for (o, t) in out.coeffs.iter_mut().zip(term.coeffs) {
                *o = o.clone() + c.clone() * t;
            }
        }

        let shift = Self::linear(n, d, b)?;
        match space {
            Space::Moment => Ok(out.mul_same_shape(&shift.exp()?)),
            Space::Cumulant => out.add(&shift),
        }
    }
}

fn check_square<S>(m: &[Vec<S>], n: usize) -> Result<()> {
    if m.len() != n || m.iter().any(|row| row.len() != n) {
        return Err(Error::DimensionMismatch(format!("expected a {n}×{n} matrix")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;
    use num_rational::BigRational;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> BigRational {
        ratio(n, d)
    }

    #[test]
    fn layout_is_graded_lex() {
        let l = Layout::get(2, 2).unwrap();
        let m: Vec<Vec<u32>> = l.monomials().iter().map(|m| m.exponents().to_vec()).collect();
        assert_eq!(m, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(Layout::get(7, 3).unwrap().len(), 120);
    }

    #[test]
    fn mul_by_one_is_identity() {
        let s = TruncatedSeries::from_fn(2, 3, |m| q(m.order() as i64 + 1, 3)).unwrap();
        let one = TruncatedSeries::one(2, 3).unwrap();
        assert_eq!(s.mul(&one).unwrap(), s);
    }

    #[test]
    fn square_truncates_at_degree_one() {
        let s = TruncatedSeries::from_coeffs(&Layout::get(1, 1).unwrap(), vec![q(1, 1), q(1, 1)]).unwrap();
        assert_eq!(s.mul(&s).unwrap().coeffs(), &[q(1, 1), q(2, 1)]);
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let a = TruncatedSeries::<f64>::one(2, 3).unwrap();
        let b = TruncatedSeries::<f64>::one(2, 4).unwrap();
        assert!(matches!(a.mul(&b), Err(Error::DimensionMismatch(_))));
        let c = TruncatedSeries::<f64>::one(3, 3).unwrap();
        assert!(matches!(a.add(&c), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn exp_of_zero_is_one() {
        let z = TruncatedSeries::<BigRational>::zero(3, 4).unwrap();
        assert_eq!(z.exp().unwrap(), TruncatedSeries::one(3, 4).unwrap());
    }

    #[test]
    fn exp_gives_gaussian_moments() {
        // K = u + u²/2: mean 1, variance 1
        let k = TruncatedSeries::from_coeffs(&Layout::get(1, 3).unwrap(), vec![q(0, 1), q(1, 1), q(1, 2), q(0, 1)])
            .unwrap();
        let m = k.exp().unwrap();
        let raw: Vec<_> = (1..=3).map(|j| m.moment(&MultiIndex::new(vec![j])).unwrap()).collect();
        assert_eq!(raw, vec![q(1, 1), q(2, 1), q(4, 1)]);
    }

    #[test]
    fn exp_and_log_check_constant_term() {
        let one = TruncatedSeries::<f64>::one(2, 3).unwrap();
        assert!(matches!(one.exp(), Err(Error::Precondition(_))));
        let zero = TruncatedSeries::<f64>::zero(2, 3).unwrap();
        assert!(matches!(zero.log(), Err(Error::Precondition(_))));
        assert_eq!(one.log().unwrap(), zero);
    }

    #[test]
    fn factorial_accessors() {
        let mut s = TruncatedSeries::<BigRational>::zero(1, 3).unwrap();
        s.set_coeff(&MultiIndex::new(vec![2]), q(1, 2)).unwrap();
        assert_eq!(s.moment(&MultiIndex::new(vec![2])).unwrap(), q(1, 1));

        let mut t = TruncatedSeries::<BigRational>::zero(2, 3).unwrap();
        t.set_coeff(&MultiIndex::new(vec![3, 0]), q(1, 6)).unwrap();
        assert_eq!(t.moment(&MultiIndex::new(vec![3, 0])).unwrap(), q(1, 1));

        assert!(matches!(
            t.moment(&MultiIndex::new(vec![2, 2])),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn identity_affine_action_is_noop() {
        let s = TruncatedSeries::from_fn(2, 3, |m| q(m.exponents()[0] as i64 + 2, m.order() as i64 + 1)).unwrap();
        let id = vec![vec![q(1, 1), q(0, 1)], vec![q(0, 1), q(1, 1)]];
        let zero = vec![q(0, 1), q(0, 1)];
        assert_eq!(s.affine_action(&id, &zero, Space::Moment).unwrap(), s);
    }

    #[test]
    fn translation_in_cumulant_space_shifts_first_order_only() {
        let s = TruncatedSeries::from_fn(2, 4, |m| if m.order() == 0 { q(0, 1) } else { q(m.order() as i64, 7) })
            .unwrap();
        let id = vec![vec![q(1, 1), q(0, 1)], vec![q(0, 1), q(1, 1)]];
        let b = vec![q(3, 2), q(-5, 1)];
        let t = s.affine_action(&id, &b, Space::Cumulant).unwrap();
        let diff = t.sub(&s).unwrap();
        for (m, c) in diff.iter() {
            let expected = if m.order() == 1 { b[m.exponents().iter().position(|&e| e == 1).unwrap()].clone() } else { q(0, 1) };
            assert_eq!(*c, expected, "at {m:?}");
        }
    }

    #[test]
    fn scaling_moments_by_constant() {
        let m = TruncatedSeries::from_fn(1, 5, |a| q(a.order() as i64 * 2 + 1, 5)).unwrap();
        let c = q(-3, 2);
        let t = m.affine_action(&[vec![c.clone()]], &[q(0, 1)], Space::Moment).unwrap();
        for j in 0..=5u32 {
            let a = MultiIndex::new(vec![j]);
            assert_eq!(t.moment(&a).unwrap(), c.powi(j) * m.moment(&a).unwrap());
        }
    }

    #[test]
    fn moment_space_translation_matches_cumulant_space() {
        // exp(log(M) + uᵗb) = M · exp(uᵗb), with a general linear part too.
        let m = TruncatedSeries::from_fn(2, 4, |a| if a.order() == 0 { q(1, 1) } else { q(a.exponents()[1] as i64 - 1, 3 + a.order() as i64) })
            .unwrap();
        let a = vec![vec![q(2, 1), q(-1, 3)], vec![q(1, 2), q(1, 1)]];
        let b = vec![q(1, 4), q(-2, 1)];
        let via_moments = m.affine_action(&a, &b, Space::Moment).unwrap();
        let via_cumulants = m.log().unwrap().affine_action(&a, &b, Space::Cumulant).unwrap().exp().unwrap();
        assert_eq!(via_moments, via_cumulants);
    }

    fn small_rational() -> impl Strategy<Value = BigRational> {
        (-20i64..=20, 1i64..=9).prop_map(|(n, d)| ratio(n, d))
    }

    fn cumulant_series() -> impl Strategy<Value = TruncatedSeries<BigRational>> {
        (1usize..=3, 1usize..=5).prop_flat_map(|(n, d)| {
            let len = Layout::get(n, d).unwrap().len();
            proptest::collection::vec(small_rational(), len).prop_map(move |mut c| {
                c[0] = ratio(0, 1);
                TruncatedSeries::from_coeffs(&Layout::get(n, d).unwrap(), c).unwrap()
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn log_exp_round_trip(k in cumulant_series()) {
            let m = k.exp().unwrap();
            prop_assert_eq!(m.constant_term().clone(), ratio(1, 1));
            prop_assert_eq!(m.log().unwrap(), k);
        }

        #[test]
        fn mul_is_commutative_and_associative(a in cumulant_series()) {
            let b = a.exp().unwrap();
            let c = a.scale(&ratio(-2, 3)).exp().unwrap();
            prop_assert_eq!(a.mul(&b).unwrap(), b.mul(&a).unwrap());
            prop_assert_eq!(a.mul(&b).unwrap().mul(&c).unwrap(), a.mul(&b.mul(&c).unwrap()).unwrap());
            prop_assert_eq!(a.mul(&b.add(&c).unwrap()).unwrap(), a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap());
        }

        #[test]
        fn log_turns_products_into_sums(a in cumulant_series()) {
            let b = a.scale(&ratio(3, 5)).orders_between(1, 2);
            let mx = a.exp().unwrap();
            let my = b.exp().unwrap();
            prop_assert_eq!(mx.mul(&my).unwrap().log().unwrap(), a.add(&b).unwrap());
        }

        #[test]
        fn truncation_commutes_with_exp(k in cumulant_series()) {
            let d = k.degree();
            if d > 1 {
                let lower = k.truncate(d - 1).unwrap();
                prop_assert_eq!(k.exp().unwrap().truncate(d - 1).unwrap(), lower.exp().unwrap());
            }
        }

        #[test]
        fn moments_round_trip(k in cumulant_series()) {
            let m = k.exp().unwrap();
            let entries: Vec<_> = m.layout().monomials().iter().cloned().zip(m.moments()).collect();
            let back = TruncatedSeries::from_moments(m.nvars(), m.degree(), &entries).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
