//! Small dense matrix kernels behind convolution and dense layers.
//!
//! Every output element is reduced in ascending index order starting from
//! `0.0`, so results are bit-identical to a naive triple loop regardless of
//! the register blocking used here.

use alloc::vec;
use alloc::vec::Vec;

const MR: usize = 4;
const NR: usize = 4;

/// `c[m×n] = a[m×k] · b[k×n]`, all row-major.
pub(crate) fn matmul(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let full_n = n - n % NR;
    let full_m = m - m % MR;
    let mut panel: Vec<f64> = vec![0.0; k * NR];
    for j0 in (0..full_n).step_by(NR) {
        for (p, dst) in panel.chunks_exact_mut(NR).enumerate() {
            dst.copy_from_slice(&b[p * n + j0..p * n + j0 + NR]);
        }
        for i0 in (0..full_m).step_by(MR) {
            let a0 = &a[i0 * k..(i0 + 1) * k];
            let a1 = &a[(i0 + 1) * k..(i0 + 2) * k];
            let a2 = &a[(i0 + 2) * k..(i0 + 3) * k];
            let a3 = &a[(i0 + 3) * k..(i0 + 4) * k];
            let mut acc = [[0.0f64; NR]; MR];
            for ((((bp, &x0), &x1), &x2), &x3) in
                panel.chunks_exact(NR).zip(a0).zip(a1).zip(a2).zip(a3)
            {
                for j in 0..NR {
                    acc[0][j] += x0 * bp[j];
                    acc[1][j] += x1 * bp[j];
                    acc[2][j] += x2 * bp[j];
                    acc[3][j] += x3 * bp[j];
                }
            }
            for (r, row) in acc.iter().enumerate() {
                c[(i0 + r) * n + j0..(i0 + r) * n + j0 + NR].copy_from_slice(row);
            }
        }
        for i in full_m..m {
            let ai = &a[i * k..(i + 1) * k];
            let mut acc = [0.0f64; NR];
            for (bp, &x) in panel.chunks_exact(NR).zip(ai) {
                for j in 0..NR {
                    acc[j] += x * bp[j];
                }
            }
            c[i * n + j0..i * n + j0 + NR].copy_from_slice(&acc);
        }
    }
    for i in 0..m {
        for j in full_n..n {
            let mut acc = 0.0;
            for p in 0..k {
                acc += a[i * k + p] * b[p * n + j];
            }
            c[i * n + j] = acc;
        }
    }
}

/// `c[m×n] = a[m×k] · b[n×k]ᵀ`, all row-major.
pub(crate) fn matmul_bt(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    const KC: usize = 256;
    let full_n = n - n % NR;
    let full_m = m - m % MR;
    c.fill(0.0);
    for p0 in (0..k).step_by(KC) {
        let p1 = (p0 + KC).min(k);
        let len = p1 - p0;
        for i0 in (0..full_m).step_by(MR) {
            for j0 in (0..full_n).step_by(NR) {
                let mut acc = [[0.0f64; NR]; MR];
                for (r, acc_r) in acc.iter_mut().enumerate() {
                    acc_r.copy_from_slice(&c[(i0 + r) * n + j0..(i0 + r) * n + j0 + NR]);
                }
                let ar: [&[f64]; MR] = core::array::from_fn(|r| &a[(i0 + r) * k + p0..(i0 + r) * k + p1]);
                let br: [&[f64]; NR] = core::array::from_fn(|j| &b[(j0 + j) * k + p0..(j0 + j) * k + p1]);
                for q in 0..len {
                    let y = [br[0][q], br[1][q], br[2][q], br[3][q]];
                    for r in 0..MR {
                        let x = ar[r][q];
                        for j in 0..NR {
                            acc[r][j] += x * y[j];
                        }
                    }
                }
                for (r, acc_r) in acc.iter().enumerate() {
                    c[(i0 + r) * n + j0..(i0 + r) * n + j0 + NR].copy_from_slice(acc_r);
                }
            }
        }
        for i in 0..m {
            let js: &mut dyn Iterator<Item = usize> =
                if i < full_m { &mut (full_n..n) } else { &mut (0..n) };
            for j in js {
                let ai = &a[i * k + p0..i * k + p1];
                let bj = &b[j * k + p0..j * k + p1];
                let mut acc = c[i * n + j];
                for (&x, &y) in ai.iter().zip(bj) {
                    acc += x * y;
                }
                c[i * n + j] = acc;
            }
        }
    }
}

/// Row-major transpose of an `rows×cols` matrix.
pub(crate) fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = a[r * cols + c];
        }
    }
    t
}
