//! Internal linear solvers: matrix-free conjugate gradients for the
//! symmetric positive definite implicit step, and a one-shot banded
//! Gaussian elimination with partial pivoting for Newton systems.

use crate::error::{CoreError, Result};

/// Conjugate gradients on a symmetric positive definite operator.
///
/// `x` carries the initial guess in and the solution out. Convergence is
/// declared when the 2-norm residual drops below `rel_tol * ||b||`.
pub(crate) fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<usize> {
    let n = b.len();
    let norm_b = dot(b, b).sqrt();
    if norm_b == 0.0 {
        x.fill(0.0);
        return Ok(0);
    }
    let target = rel_tol * norm_b;

    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect();
    let mut rr = dot(&r, &r);
    if rr.sqrt() <= target {
        return Ok(0);
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; n];

    for iter in 1..=max_iter {
        apply(&p, &mut ap);
        let p_ap = dot(&p, &ap);
        if !(p_ap > 0.0) {
            return Err(CoreError::LinearSolveFailed {
                residual: rr.sqrt() / norm_b,
                iterations: iter,
            });
        }
        let alpha = rr / p_ap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_next = dot(&r, &r);
        if rr_next.sqrt() <= target {
            return Ok(iter);
        }
        let beta = rr_next / rr;
        rr = rr_next;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    Err(CoreError::LinearSolveFailed {
        residual: rr.sqrt() / norm_b,
        iterations: max_iter,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Band matrix with lower bandwidth `bl` and upper bandwidth `bu`; row i
/// stores columns `i - bl ..= i + bu + bl` (the extra `bl` absorbs pivot
/// fill-in).
pub(crate) struct BandMatrix {
    n: usize,
    bl: usize,
    bu: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn new(n: usize, bl: usize, bu: usize) -> BandMatrix {
        let width = 2 * bl + bu + 1;
        BandMatrix {
            n,
            bl,
            bu,
            width,
            data: vec![0.0; n * width],
        }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.bl >= i && j <= i + self.bu + self.bl);
        i * self.width + (j + self.bl - i)
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    /// Solve `A x = rhs` in place by banded Gaussian elimination with
    /// partial pivoting; consumes the matrix contents.
    pub fn solve_in_place(mut self, rhs: &mut [f64]) -> Result<()> {
        assert_eq!(rhs.len(), self.n);
        let n = self.n;
        for k in 0..n {
            // pivot search within the lower band
            let last = (k + self.bl).min(n - 1);
            let mut piv = k;
            let mut best = 0.0;
            for i in k..=last {
                let v = self.data[self.slot(i, k)].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(CoreError::LinearSolveFailed {
                    residual: f64::INFINITY,
                    iterations: k,
                });
            }
            let hi = (k + self.bu + self.bl).min(n - 1);
            if piv != k {
                for j in k..=hi {
                    let a = self.slot(k, j);
                    let b = self.slot(piv, j);
                    self.data.swap(a, b);
                }
                rhs.swap(k, piv);
            }
            let pivot = self.data[self.slot(k, k)];
            for i in (k + 1)..=last {
                let m = self.data[self.slot(i, k)] / pivot;
                if m == 0.0 {
                    continue;
                }
                let sk = self.slot(i, k);
                self.data[sk] = 0.0;
                for j in (k + 1)..=hi {
                    let akj = self.data[self.slot(k, j)];
                    let s = self.slot(i, j);
                    self.data[s] -= m * akj;
                }
                rhs[i] -= m * rhs[k];
            }
        }
        // back substitution
        for k in (0..n).rev() {
            let hi = (k + self.bu + self.bl).min(n - 1);
            let mut acc = rhs[k];
            for j in (k + 1)..=hi {
                acc -= self.data[self.slot(k, j)] * rhs[j];
            }
            rhs[k] = acc / self.data[self.slot(k, k)];
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cg_solves_shifted_laplacian() {
        // (I + tridiag(-1, 2, -1)) x = b
        let n = 50;
        let apply = |v: &[f64], out: &mut [f64]| {
            for i in 0..n {
                let left = if i > 0 { v[i - 1] } else { 0.0 };
                let right = if i + 1 < n { v[i + 1] } else { 0.0 };
                out[i] = v[i] + (2.0 * v[i] - left - right);
            }
        };
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).sin()).collect();
        let mut x = vec![0.0; n];
        conjugate_gradient(&apply, &b, &mut x, 1e-13, 1000).unwrap();
        let mut ax = vec![0.0; n];
        apply(&x, &mut ax);
        for i in 0..n {
            assert!((ax[i] - b[i]).abs() < 1e-11);
        }
    }

    #[test]
    fn cg_zero_rhs_returns_zero() {
        let apply = |v: &[f64], out: &mut [f64]| out.copy_from_slice(v);
        let b = vec![0.0; 5];
        let mut x = vec![1.0; 5];
        conjugate_gradient(&apply, &b, &mut x, 1e-12, 10).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn banded_solver_matches_dense_reference() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let n = rng.gen_range(3..40);
            let bl = rng.gen_range(1..3.min(n));
            let bu = rng.gen_range(1..3.min(n));
            let mut dense = vec![vec![0.0; n]; n];
            let mut band = BandMatrix::new(n, bl, bu);
            for i in 0..n {
                for j in 0..n {
                    if j + bl >= i && j <= i + bu {
                        let v: f64 = rng.gen_range(-1.0..1.0);
                        let v = if i == j { v + 4.0 } else { v };
                        dense[i][j] = v;
                        band.add(i, j, v);
                    }
                }
            }
            let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut rhs = vec![0.0; n];
            for i in 0..n {
                rhs[i] = (0..n).map(|j| dense[i][j] * xs[j]).sum();
            }
            band.solve_in_place(&mut rhs).unwrap();
            for i in 0..n {
                assert!(
                    (rhs[i] - xs[i]).abs() < 1e-9,
                    "n={n} bl={bl} bu={bu}: x[{i}] = {} vs {}",
                    rhs[i],
                    xs[i]
                );
            }
        }
    }

    #[test]
    fn banded_solver_pivots_through_zero_diagonal() {
        // [[0, 1], [1, 0]] needs the row swap
        let mut band = BandMatrix::new(2, 1, 1);
        band.add(0, 1, 1.0);
        band.add(1, 0, 1.0);
        let mut rhs = vec![3.0, 7.0];
        band.solve_in_place(&mut rhs).unwrap();
        assert_eq!(rhs, vec![7.0, 3.0]);
    }
}
