//! Exact integer and rational linear algebra: fraction-free rank and left
//! null space bases. No floating point anywhere in this module.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{One, Signed, Zero};

/// Rank over the rationals of an integer matrix, by fraction-free (Bareiss)
/// elimination. Rows of `matrix` must all have the same length.
pub fn rank(matrix: &[Vec<i64>]) -> usize {
    let n_rows = matrix.len();
    let n_cols = matrix.first().map_or(0, |r| r.len());
    if n_rows == 0 || n_cols == 0 {
        return 0;
    }
    let mut a: Vec<Vec<BigInt>> = matrix
        .iter()
        .map(|row| row.iter().map(|&x| BigInt::from(x)).collect())
        .collect();

    let mut prev = BigInt::one();
    let mut rank = 0;
    for col in 0..n_cols {
        // Smallest-magnitude pivot keeps the intermediate entries modest.
        let pivot_row = (rank..n_rows)
            .filter(|&r| !a[r][col].is_zero())
            .min_by_key(|&r| a[r][col].abs());
        let Some(pivot_row) = pivot_row else {
            continue;
        };
        a.swap(rank, pivot_row);
        for r in rank + 1..n_rows {
            for c in col + 1..n_cols {
                let v = (&a[rank][col] * &a[r][c] - &a[r][col] * &a[rank][c]) / &prev;
                a[r][c] = v;
            }
            a[r][col] = BigInt::zero();
        }
        prev = a[rank][col].clone();
        rank += 1;
        if rank == n_rows {
            break;
        }
    }
    rank
}

/// Reduced row echelon form over the rationals, in place. Returns the pivot
/// column indices.
fn rref(a: &mut Vec<Vec<BigRational>>) -> Vec<usize> {
    let n_rows = a.len();
    let n_cols = a.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..n_cols {
        let Some(pivot_row) = (row..n_rows).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(row, pivot_row);
        let pivot = a[row][col].clone();
        for c in col..n_cols {
            let v = &a[row][c] / &pivot;
            a[row][c] = v;
        }
        for r in 0..n_rows {
            if r != row && !a[r][col].is_zero() {
                let factor = a[r][col].clone();
                for c in col..n_cols {
                    let v = &a[r][c] - &factor * &a[row][c];
                    a[r][c] = v;
                }
            }
        }
        pivots.push(col);
        row += 1;
        if row == n_rows {
            break;
        }
    }
    pivots
}

/// Basis of the left null space `{ v : v^T M = 0 }` of an integer matrix,
/// one primitive integer vector per basis element.
///
/// Computed as the kernel of `M^T` via rational reduced row echelon form;
/// each free variable yields one basis vector.
pub fn left_nullspace(matrix: &[Vec<i64>]) -> Vec<Vec<BigRational>> {
    let n_rows = matrix.len();
    let n_cols = matrix.first().map_or(0, |r| r.len());
    // Transpose: kernel vectors live in dimension n_rows.
    let mut at: Vec<Vec<BigRational>> = (0..n_cols)
        .map(|c| {
            (0..n_rows)
                .map(|r| BigRational::from_integer(BigInt::from(matrix[r][c])))
                .collect()
        })
        .collect();
    if n_rows == 0 {
        return Vec::new();
    }
    let pivots = rref(&mut at);
    let free: Vec<usize> = (0..n_rows).filter(|c| !pivots.contains(c)).collect();
    let mut basis = Vec::with_capacity(free.len());
    for &f in &free {
        let mut v = vec![BigRational::zero(); n_rows];
        v[f] = BigRational::one();
        for (row, &p) in pivots.iter().enumerate() {
            v[p] = -at[row][f].clone();
        }
        basis.push(primitive_integer_scale(&v));
    }
    basis
}

/// Scales a rational vector to the primitive integer form: integer entries
/// with overall gcd 1 and the first nonzero entry positive. Zero vectors are
/// returned unchanged.
pub fn primitive_integer_scale(v: &[BigRational]) -> Vec<BigRational> {
    let mut lcm = BigInt::one();
    for x in v {
        lcm = num::integer::lcm(lcm, x.denom().clone());
    }
    let ints: Vec<BigInt> = v.iter().map(|x| (x * BigRational::from_integer(lcm.clone())).to_integer()).collect();
    let mut gcd = BigInt::zero();
    for x in &ints {
        gcd = num::integer::gcd(gcd, x.clone());
    }
    if gcd.is_zero() {
        return v.to_vec();
    }
    let sign = ints
        .iter()
        .find(|x| !x.is_zero())
        .map(|x| if x.is_negative() { -BigInt::one() } else { BigInt::one() })
        .unwrap_or_else(BigInt::one);
    ints.into_iter()
        .map(|x| BigRational::from_integer(x / (&gcd * &sign)))
        .collect()
}

/// Checks `v^T M = 0` exactly.
pub fn is_left_null_vector(matrix: &[Vec<i64>], v: &[BigRational]) -> bool {
    let n_rows = matrix.len();
    if v.len() != n_rows {
        return false;
    }
    let n_cols = matrix.first().map_or(0, |r| r.len());
    for c in 0..n_cols {
        let mut acc = BigRational::zero();
        for r in 0..n_rows {
            acc += &v[r] * BigRational::from_integer(BigInt::from(matrix[r][c]));
        }
        if !acc.is_zero() {
            return false;
        }
    }
    true
}
