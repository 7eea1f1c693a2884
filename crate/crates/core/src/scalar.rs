//! Floating-point abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar used throughout the crate: `f32` or `f64`.
///
/// Besides the usual `num_traits` bounds it carries a dense matrix-multiply
/// hook so the tape can dispatch to an optimized kernel per type.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// `c += a · b` for strided row/column-major operands.
    ///
    /// `a` is `m × k`, `b` is `k × n`, `c` is `m × n`.
    #[allow(clippy::too_many_arguments)]
    fn gemm_acc(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        c: &mut [Self],
        rsc: isize,
        csc: isize,
    );

    /// Converts an `f64` literal. Never fails for finite input.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("representable literal")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

macro_rules! impl_scalar {
    ($t:ty, $kernel:ident) => {
        impl Scalar for $t {
            #[inline]
            fn gemm_acc(
                m: usize,
                k: usize,
                n: usize,
                a: &[Self],
                rsa: isize,
                csa: isize,
                b: &[Self],
                rsb: isize,
                csb: isize,
                c: &mut [Self],
                rsc: isize,
                csc: isize,
            ) {
                if m == 0 || n == 0 || k == 0 {
                    return;
                }
                // SAFETY: callers pass slices that cover the strided extents;
                // `check_extent` asserts it.
                check_extent(m, k, a.len(), rsa, csa);
                check_extent(k, n, b.len(), rsb, csb);
                check_extent(m, n, c.len(), rsc, csc);
                unsafe {
                    matrixmultiply::$kernel(
                        m,
                        k,
                        n,
                        1.0,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        1.0,
                        c.as_mut_ptr(),
                        rsc,
                        csc,
                    );
                }
            }
        }
    };
}

#[inline]
fn check_extent(rows: usize, cols: usize, len: usize, rs: isize, cs: isize) {
    let last = (rows as isize - 1) * rs + (cols as isize - 1) * cs;
    assert!(
        rs >= 0 && cs >= 0 && (last as usize) < len,
        "gemm operand out of bounds"
    );
}

impl_scalar!(f64, dgemm);
impl_scalar!(f32, sgemm);

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(m: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for l in 0..k {
                    c[i * n + j] += a[i * k + l] * b[l * n + j];
                }
            }
        }
        c
    }

    #[test]
    fn gemm_matches_naive_and_accumulates() {
        let (m, k, n) = (3, 4, 5);
        let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.91).cos()).collect();
        let mut c = vec![1.0; m * n];
        f64::gemm_acc(
            m, k, n, &a, k as isize, 1, &b, n as isize, 1, &mut c, n as isize, 1,
        );
        let want = naive(m, k, n, &a, &b);
        for (got, w) in c.iter().zip(&want) {
            assert!((got - (w + 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn gemm_transposed_operand() {
        // b given as its transpose (n × k, row-major)
        let (m, k, n) = (2, 3, 2);
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let bt = [1.0, 0.0, -1.0, 2.0, 1.0, 0.0];
        let mut c = vec![0.0; 4];
        f64::gemm_acc(m, k, n, &a, 3, 1, &bt, 1, 3, &mut c, 2, 1);
        assert_eq!(c, vec![-2.0, 4.0, -2.0, 13.0]);
    }
}
