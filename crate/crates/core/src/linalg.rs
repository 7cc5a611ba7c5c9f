//! Dense least squares by Householder QR.
//!
//! Only the small systems of the pattern fit go through here (a few dozen
//! columns at most), so a plain row-major implementation is enough.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Solve `min ‖A x − b‖₂` for an `m × n` row-major `a` with `m ≥ n`.
///
/// Fails with [`Error::RankDeficient`] when a diagonal entry of R falls
/// below `rcond · max|R_ii|`.
pub fn lstsq<T: Scalar>(mut a: Vec<T>, mut b: Vec<T>, m: usize, n: usize) -> Result<Vec<T>> {
    assert_eq!(a.len(), m * n);
    assert_eq!(b.len(), m);
    if m < n {
        return Err(Error::RankDeficient { params: n, samples: m, rank: m });
    }
    let mut diag = vec![T::zero(); n];
    for j in 0..n {
        let norm = (j..m).map(|i| a[i * n + j] * a[i * n + j]).sum::<T>().sqrt();
        if norm == T::zero() {
            diag[j] = T::zero();
            continue;
        }
        let alpha = if a[j * n + j] > T::zero() { -norm } else { norm };
        // v = x − alpha e1, stored in place of column j
        a[j * n + j] -= alpha;
        let vnorm2 = (j..m).map(|i| a[i * n + j] * a[i * n + j]).sum::<T>();
        if vnorm2 > T::zero() {
            for c in (j + 1)..n {
                let dot = (j..m).map(|i| a[i * n + j] * a[i * n + c]).sum::<T>();
                let f = T::lit(2.0) * dot / vnorm2;
                for i in j..m {
                    let vij = a[i * n + j];
                    a[i * n + c] -= f * vij;
                }
            }
            let dot = (j..m).map(|i| a[i * n + j] * b[i]).sum::<T>();
            let f = T::lit(2.0) * dot / vnorm2;
            for i in j..m {
                b[i] -= f * a[i * n + j];
            }
        }
        diag[j] = alpha;
    }

    let scale = diag.iter().fold(T::zero(), |acc, d| acc.max(d.abs()));
    let rcond = T::epsilon() * T::from_usize(m.max(n) * 10).unwrap_or_else(T::one);
    let rank = diag.iter().filter(|d| d.abs() > rcond * scale).count();
    if scale == T::zero() || rank < n {
        return Err(Error::RankDeficient { params: n, samples: m, rank });
    }

    let mut x = vec![T::zero(); n];
    for j in (0..n).rev() {
        let mut s = b[j];
        for c in (j + 1)..n {
            s -= a[j * n + c] * x[c];
        }
        x[j] = s / diag[j];
    }
    Ok(x)
}
