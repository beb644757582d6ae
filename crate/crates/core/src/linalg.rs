//! Dense linear algebra over generic fields, with a fraction-free rank for
//! exact rationals.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major dense matrix.
pub type Matrix<S> = Vec<Vec<S>>;

fn ncols<S>(m: &[Vec<S>]) -> usize {
    m.first().map_or(0, Vec::len)
}

fn float_tol<S: Scalar>(m: &[Vec<S>]) -> f64 {
    let scale = m.iter().flatten().fold(0.0f64, |a, x| a.max(x.magnitude()));
    scale * 1e-10 * (m.len().max(ncols(m)).max(1) as f64)
}

/// Index of the pivot in column `col` among rows `from..`: first nonzero for
/// exact fields, largest magnitude above the tolerance for floats.
fn find_pivot<S: Scalar>(a: &[Vec<S>], col: usize, from: usize, tol: f64) -> Option<usize> {
    if S::EXACT {
        (from..a.len()).find(|&r| !a[r][col].is_zero())
    } else {
        (from..a.len())
            .filter(|&r| a[r][col].magnitude() > tol)
            .max_by(|&x, &y| a[x][col].magnitude().total_cmp(&a[y][col].magnitude()))
    }
}

/// Reduces `a` to row echelon form in place and returns the pivot columns.
fn echelon<S: Scalar>(a: &mut [Vec<S>], tol: f64) -> Vec<usize> {
    let cols = ncols(a);
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..cols {
        if row == a.len() {
            break;
        }
        let Some(p) = find_pivot(a, col, row, tol) else { continue };
        a.swap(row, p);
        let inv = S::one() / a[row][col].clone();
        for r in row + 1..a.len() {
            if a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone() * inv.clone();
            for c in col..cols {
                let v = a[r][c].clone() - f.clone() * a[row][c].clone();
                a[r][c] = v;
            }
        }
        pivots.push(col);
        row += 1;
    }
    pivots
}

/// Rank by Gaussian elimination. Exact for exact fields; floats use a
/// relative tolerance of `1e-10 · max|a_ij| · max(rows, cols)`.
pub fn rank<S: Scalar>(m: &[Vec<S>]) -> usize {
    let tol = float_tol(m);
    echelon(&mut m.to_vec(), tol).len()
}

/// Determinant of a square matrix.
pub fn det<S: Scalar>(m: &[Vec<S>]) -> Result<S> {
    let n = m.len();
    if m.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch("determinant of a non-square matrix".into()));
    }
    let mut a = m.to_vec();
    let mut acc = S::one();
    for col in 0..n {
        let p = if S::EXACT {
            (col..n).find(|&r| !a[r][col].is_zero())
        } else {
            (col..n).max_by(|&x, &y| a[x][col].magnitude().total_cmp(&a[y][col].magnitude()))
        };
        let Some(p) = p.filter(|&p| !a[p][col].is_zero()) else { return Ok(S::zero()) };
        if p != col {
            a.swap(p, col);
            acc = -acc;
        }
        let inv = S::one() / a[col][col].clone();
        for r in col + 1..n {
            let f = a[r][col].clone() * inv.clone();
            if f.is_zero() {
                continue;
            }
            for c in col..n {
                let v = a[r][c].clone() - f.clone() * a[col][c].clone();
                a[r][c] = v;
            }
        }
        acc = acc * a[col][col].clone();
    }
    Ok(acc)
}

/// Solves the square system `a x = b`.
pub fn solve<S: Scalar>(a: &[Vec<S>], b: &[S]) -> Result<Vec<S>> {
    let n = a.len();
    if a.iter().any(|r| r.len() != n) || b.len() != n {
        return Err(Error::DimensionMismatch(format!("system of {n} equations with mismatched sizes")));
    }
    let mut aug: Matrix<S> = a.iter().zip(b).map(|(r, x)| r.iter().cloned().chain([x.clone()]).collect()).collect();
    let tol = float_tol(a);
    let pivots = echelon(&mut aug, tol);
    if pivots.len() < n || pivots[n - 1] != n - 1 {
        return Err(Error::SingularSystem(format!("{n}×{n} system has rank {}", pivots.len().min(n))));
    }
    let mut x = vec![S::zero(); n];
    for i in (0..n).rev() {
        let mut v = aug[i][n].clone();
        for j in i + 1..n {
            v = v - aug[i][j].clone() * x[j].clone();
        }
        x[i] = v / aug[i][i].clone();
    }
    Ok(x)
}

/// Rank of an integer matrix by Bareiss fraction-free elimination.
pub fn bareiss_rank(mut a: Matrix<BigInt>) -> usize {
    let rows = a.len();
    let cols = ncols(&a);
    let mut prev = BigInt::one();
    let mut rank = 0;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let Some(p) = (rank..rows).find(|&r| !a[r][col].is_zero()) else { continue };
        a.swap(rank, p);
        for r in rank + 1..rows {
            for c in col + 1..cols {
                let v = (&a[rank][col] * &a[r][c] - &a[r][col] * &a[rank][c]) / &prev;
                a[r][c] = v;
            }
            a[r][col] = BigInt::zero();
        }
        prev = a[rank][col].clone();
        rank += 1;
    }
    rank
}

/// Exact rank of a rational matrix: rows are scaled to integers, then
/// eliminated fraction-free.
pub fn rational_rank(m: &[Vec<BigRational>]) -> usize {
    let ints = m
        .iter()
        .map(|row| {
            let l = row.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
            let mut r: Vec<BigInt> = row.iter().map(|x| x.numer() * (&l / x.denom())).collect();
            let g = r.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
            if !g.is_zero() && !g.is_one() {
                for x in r.iter_mut() {
                    *x = &*x / &g;
                }
            }
            r
        })
        .collect();
    bareiss_rank(ints)
}

/// Largest absolute entry, as a float.
pub fn max_abs(m: &[Vec<BigRational>]) -> f64 {
    m.iter().flatten().map(|x| crate::scalar::rational_to_f64(&x.abs())).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{ratio, Fp};
    use proptest::prelude::*;

    fn q(n: i64) -> BigRational {
        ratio(n, 1)
    }

    #[test]
    fn ranks_of_small_matrices() {
        let m = vec![vec![q(1), q(2), q(3)], vec![q(2), q(4), q(6)], vec![q(1), q(0), q(1)]];
        assert_eq!(rational_rank(&m), 2);
        assert_eq!(rank(&m), 2);
        let f: Matrix<f64> = vec![vec![1.0, 2.0], vec![2.0, 4.0 + 1e-14]];
        assert_eq!(rank(&f), 1);
        assert_eq!(rational_rank(&[vec![q(0), q(0)]]), 0);
        assert_eq!(rational_rank(&[] as &[Vec<BigRational>]), 0);
    }

    #[test]
    fn determinant_and_solve() {
        let m = vec![vec![q(2), q(1)], vec![q(1), q(3)]];
        assert_eq!(det(&m).unwrap(), q(5));
        assert_eq!(solve(&m, &[q(3), q(4)]).unwrap(), vec![q(1), q(1)]);
        let s = vec![vec![q(1), q(1)], vec![q(1), q(1)]];
        assert!(matches!(solve(&s, &[q(1), q(2)]), Err(Error::SingularSystem(_))));
        assert_eq!(det(&s).unwrap(), q(0));
    }

    fn int_matrix() -> impl Strategy<Value = Vec<Vec<i64>>> {
        (1usize..7, 1usize..7).prop_flat_map(|(r, c)| {
            proptest::collection::vec(proptest::collection::vec(-3i64..=3, c), r)
        })
    }

    proptest! {
        #[test]
        fn bareiss_agrees_with_rational_elimination(m in int_matrix(), rank_cut in 0usize..4) {
            // make some rows dependent
            let mut m = m;
            if m.len() > rank_cut + 1 {
                let base = m[0].clone();
                for row in m.iter_mut().skip(rank_cut + 1) {
                    for (x, b) in row.iter_mut().zip(&base) {
                        *x = 2 * *b;
                    }
                }
            }
            let r: Matrix<BigRational> = m.iter().map(|row| row.iter().map(|&x| q(x)).collect()).collect();
            let f: Matrix<Fp> = m.iter().map(|row| row.iter().map(|&x| Fp::from_i64(x)).collect()).collect();
            let exact = rank(&r);
            prop_assert_eq!(rational_rank(&r), exact);
            prop_assert_eq!(rank(&f), exact);
        }

        #[test]
        fn det_is_multiplicative(a in proptest::collection::vec(-5i64..=5, 9), b in proptest::collection::vec(-5i64..=5, 9)) {
            let to = |v: &[i64]| -> Matrix<BigRational> { v.chunks(3).map(|r| r.iter().map(|&x| q(x)).collect()).collect() };
            let (ma, mb) = (to(&a), to(&b));
            let prod: Matrix<BigRational> = (0..3)
                .map(|i| (0..3).map(|j| (0..3).map(|k| ma[i][k].clone() * mb[k][j].clone()).sum()).collect())
                .collect();
            prop_assert_eq!(det(&prod).unwrap(), det(&ma).unwrap() * det(&mb).unwrap());
        }
    }
}
