//! Safe wrapper over the strided `dgemm` kernel.

/// Read-only strided matrix view into a flat buffer.
#[derive(Clone, Copy)]
pub(crate) struct View<'a> {
    pub data: &'a [f64],
    pub off: usize,
    pub rs: usize,
    pub cs: usize,
}

impl<'a> View<'a> {
    pub fn new(data: &'a [f64], off: usize, rs: usize, cs: usize) -> Self {
        Self { data, off, rs, cs }
    }
}

fn check_bounds(len: usize, off: usize, rows: usize, cols: usize, rs: usize, cs: usize) {
    if rows == 0 || cols == 0 {
        return;
    }
    let last = off + (rows - 1) * rs + (cols - 1) * cs;
    assert!(last < len, "gemm view out of bounds: {last} >= {len}");
}

/// `c[m×n] = alpha · a[m×k] · b[k×n] + beta · c`, all operands strided.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: View<'_>,
    b: View<'_>,
    beta: f64,
    c: &mut [f64],
    c_off: usize,
    rsc: usize,
    csc: usize,
) {
    check_bounds(a.data.len(), a.off, m, k, a.rs, a.cs);
    check_bounds(b.data.len(), b.off, k, n, b.rs, b.cs);
    check_bounds(c.len(), c_off, m, n, rsc, csc);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: every address touched by the kernel lies within the slices
    // (checked above); `c` is exclusively borrowed and cannot alias `a`/`b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr().add(a.off),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr().add(b.off),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.as_mut_ptr().add(c_off),
            rsc as isize,
            csc as isize,
        );
    }
}

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
    fn matches_naive_product() {
        let a: Vec<f64> = (0..6).map(|x| x as f64 * 0.5 - 1.0).collect();
        let b: Vec<f64> = (0..12).map(|x| (x as f64).sin()).collect();
        let mut c = vec![0.0; 8];
        gemm(2, 3, 4, 1.0, View::new(&a, 0, 3, 1), View::new(&b, 0, 4, 1), 0.0, &mut c, 0, 4, 1);
        let want = naive(2, 3, 4, &a, &b);
        for (x, y) in c.iter().zip(&want) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    #[should_panic(expected = "out of bounds")]
    fn rejects_out_of_bounds_view() {
        let a = vec![0.0; 4];
        let mut c = vec![0.0; 4];
        gemm(2, 3, 2, 1.0, View::new(&a, 0, 3, 1), View::new(&a, 0, 2, 1), 0.0, &mut c, 0, 2, 1);
    }
}
