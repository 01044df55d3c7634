//! Safe wrapper over the `matrixmultiply` GEMM kernel.
#![allow(unsafe_code)]

/// Shape of a row-major operand, optionally read transposed.
#[derive(Clone, Copy)]
pub(crate) struct Op<'a> {
    pub data: &'a [f64],
    /// Rows and columns as stored.
    pub rows: usize,
    pub cols: usize,
    pub transpose: bool,
}

impl<'a> Op<'a> {
    pub fn new(data: &'a [f64], rows: usize, cols: usize) -> Self {
        Op {
            data,
            rows,
            cols,
            transpose: false,
        }
    }

    pub fn t(self) -> Self {
        Op {
            transpose: !self.transpose,
            ..self
        }
    }

    fn shape(&self) -> (usize, usize) {
        if self.transpose {
            (self.cols, self.rows)
        } else {
            (self.rows, self.cols)
        }
    }

    fn strides(&self) -> (isize, isize) {
        if self.transpose {
            (1, self.cols as isize)
        } else {
            (self.cols as isize, 1)
        }
    }
}

/// `C ← beta·C + op(A)·op(B)` with `C` row-major `m × n`.
pub(crate) fn gemm(a: Op<'_>, b: Op<'_>, beta: f64, c: &mut [f64]) {
    let (m, k) = a.shape();
    let (kb, n) = b.shape();
    assert_eq!(k, kb, "inner dimensions differ");
    assert!(a.data.len() >= a.rows * a.cols && b.data.len() >= b.rows * b.cols);
    assert!(c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c[..m * n].iter_mut().for_each(|v| *v *= beta);
        return;
    }
    let (rsa, csa) = a.strides();
    let (rsb, csb) = b.strides();
    // SAFETY: the asserts above guarantee every index the kernel touches,
    // (m-1)*rs + (k-1)*cs etc., lies inside the borrowed slices, and `c` is
    // uniquely borrowed so it cannot alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> alloc::vec::Vec<f64> {
        let mut c = alloc::vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                c[i * n + j] = (0..k).map(|p| a[i * k + p] * b[p * n + j]).sum();
            }
        }
        c
    }

    #[test]
    fn matches_naive_in_all_transpositions() {
        let (m, k, n) = (5, 7, 3);
        let a: alloc::vec::Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: alloc::vec::Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.11).cos()).collect();
        let want = naive(&a, &b, m, k, n);
        let mut c = alloc::vec![0.0; m * n];
        gemm(Op::new(&a, m, k), Op::new(&b, k, n), 0.0, &mut c);
        assert!(c.iter().zip(&want).all(|(x, y)| (x - y).abs() < 1e-12));

        // transposed storage of both operands
        let at: alloc::vec::Vec<f64> = (0..k * m).map(|i| a[(i % m) * k + i / m]).collect();
        let bt: alloc::vec::Vec<f64> = (0..n * k).map(|i| b[(i % k) * n + i / k]).collect();
        let mut c2 = alloc::vec![1.0; m * n];
        gemm(Op::new(&at, k, m).t(), Op::new(&bt, n, k).t(), 1.0, &mut c2);
        assert!(c2.iter().zip(&want).all(|(x, y)| (x - 1.0 - y).abs() < 1e-12));
    }
}
