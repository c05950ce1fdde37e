//! Row-major matrix kernels used by the dense and convolution layers.
//!
//! Loops are ordered so the innermost loop streams contiguous rows, which the
//! compiler vectorizes. Accumulation order is fixed, so results are
//! bit-reproducible.

use alloc::vec;
use alloc::vec::Vec;

/// `a[m×k] · b[k×n]`, written into `c[m×n]` (overwritten).
pub(crate) fn matmul_into(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let out = &mut c[i * n..(i + 1) * n];
        out.iter_mut().for_each(|x| *x = 0.0);
        let lhs = &a[i * k..(i + 1) * k];
        for (p, &av) in lhs.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let rhs = &b[p * n..(p + 1) * n];
            for (o, &bv) in out.iter_mut().zip(rhs) {
                *o += av * bv;
            }
        }
    }
}

pub(crate) fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    matmul_into(a, b, &mut c, m, k, n);
    c
}

/// `aᵀ · b` for `a[m×k]`, `b[m×n]`, giving `[k×n]`.
pub(crate) fn matmul_tn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    let mut c = vec![0.0; k * n];
    for i in 0..m {
        let lhs = &a[i * k..(i + 1) * k];
        let rhs = &b[i * n..(i + 1) * n];
        for (p, &av) in lhs.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let out = &mut c[p * n..(p + 1) * n];
            for (o, &bv) in out.iter_mut().zip(rhs) {
                *o += av * bv;
            }
        }
    }
    c
}

/// `a · bᵀ` for `a[m×n]`, `b[k×n]`, giving `[m×k]`.
pub(crate) fn matmul_nt(a: &[f64], b: &[f64], m: usize, n: usize, k: usize) -> Vec<f64> {
    let bt = transpose(b, k, n);
    matmul(a, &bt, m, n, k)
}

pub(crate) fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = a[r * cols + c];
        }
    }
    t
}

/// Column sums of `a[m×n]`.
pub(crate) fn col_sums(a: &[f64], m: usize, n: usize) -> Vec<f64> {
    let mut s = vec![0.0; n];
    for i in 0..m {
        for (acc, &v) in s.iter_mut().zip(&a[i * n..(i + 1) * n]) {
            *acc += v;
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_agree_with_definition() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2×3
        let b = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0]; // 3×2
        assert_eq!(matmul(&a, &b, 2, 3, 2), vec![4.0, 5.0, 10.0, 11.0]);
        // aᵀ·a is 3×3
        let ata = matmul_tn(&a, &a, 2, 3, 3);
        assert_eq!(
            ata,
            vec![17.0, 22.0, 27.0, 22.0, 29.0, 36.0, 27.0, 36.0, 45.0]
        );
        // a·aᵀ is 2×2
        assert_eq!(matmul_nt(&a, &a, 2, 3, 2), vec![14.0, 32.0, 32.0, 77.0]);
        assert_eq!(col_sums(&a, 2, 3), vec![5.0, 7.0, 9.0]);
    }
}
