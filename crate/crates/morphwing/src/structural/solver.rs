//! Dense symmetric linear algebra sized for frame models of a few
//! thousand DOF: Cholesky factorization/solve, LDLT inertia counting and
//! power iteration. Column-major full storage; the trailing rank-1 updates
//! stream whole columns and fan out across threads when the `parallel`
//! feature is on.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::StructuralError;

/// Column-major dense symmetric matrix.
#[derive(Debug, Clone)]
pub struct DenseMatrix {
    pub n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[c * self.n + r]
    }

    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        self.data[c * self.n + r] += v;
    }

    pub fn shift_diagonal(&mut self, s: f64) {
        for j in 0..self.n {
            self.data[j * self.n + j] += s;
        }
    }

    /// y = A x, using full (both-triangle) storage.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n;
        y.fill(0.0);
        for j in 0..n {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            let col = &self.data[j * n..(j + 1) * n];
            for r in 0..n {
                y[r] += col[r] * xj;
            }
        }
    }

    /// Largest eigenvalue magnitude by power iteration (SPD usage).
    pub fn largest_eigenvalue(&self, iters: usize) -> f64 {
        let n = self.n;
        if n == 0 {
            return 0.0;
        }
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64 * 0.1).collect();
        let mut y = vec![0.0; n];
        let mut lambda = 0.0;
        for _ in 0..iters {
            self.matvec(&x, &mut y);
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            lambda = norm;
            for i in 0..n {
                x[i] = y[i] / norm;
            }
        }
        lambda
    }

    /// In-place lower Cholesky (upper triangle left stale).
    pub fn cholesky_in_place(&mut self) -> Result<(), StructuralError> {
        self.chol_impl(true)
    }

    /// Sequential variant kept callable regardless of features, for
    /// benchmarking the parallel path against it.
    pub fn cholesky_in_place_seq(&mut self) -> Result<(), StructuralError> {
        self.chol_impl(false)
    }

    fn chol_impl(&mut self, parallel: bool) -> Result<(), StructuralError> {
        let n = self.n;
        for j in 0..n {
            let off = j * n;
            let d = self.data[off + j];
            if !(d > 0.0) || !d.is_finite() {
                return Err(StructuralError::NotPositiveDefinite { pivot: j, value: d });
            }
            let s = d.sqrt();
            for r in j..n {
                self.data[off + r] /= s;
            }
            let (head, tail) = self.data.split_at_mut((j + 1) * n);
            let colj = &head[off..off + n];
            let update = |(m, colk): (usize, &mut [f64])| {
                let k = j + 1 + m;
                let l = colj[k];
                if l != 0.0 {
                    for r in k..n {
                        colk[r] -= l * colj[r];
                    }
                }
            };
            #[cfg(feature = "parallel")]
            if parallel {
                tail.par_chunks_mut(n).enumerate().for_each(update);
            } else {
                tail.chunks_mut(n).enumerate().for_each(update);
            }
            #[cfg(not(feature = "parallel"))]
            {
                let _ = parallel;
                tail.chunks_mut(n).enumerate().for_each(update);
            }
        }
        Ok(())
    }

    /// Solve L L^T x = b in place, after [`Self::cholesky_in_place`].
    pub fn cholesky_solve(&self, b: &mut [f64]) {
        let n = self.n;
        // Forward: L y = b, column-oriented.
        for j in 0..n {
            let col = &self.data[j * n..(j + 1) * n];
            b[j] /= col[j];
            let yj = b[j];
            for r in (j + 1)..n {
                b[r] -= col[r] * yj;
            }
        }
        // Backward: L^T x = y; row j of L^T is column j of L.
        for j in (0..n).rev() {
            let col = &self.data[j * n..(j + 1) * n];
            let mut s = b[j];
            for r in (j + 1)..n {
                s -= col[r] * b[r];
            }
            b[j] = s / col[j];
        }
    }

    /// Number of negative pivots of the unpivoted LDL^T factorization;
    /// equals the number of eigenvalues below zero when the factorization
    /// does not break down (guaranteed here for shifted stiffness
    /// matrices whose shift avoids the spectrum).
    pub fn ldlt_negative_pivots(mut self) -> Result<usize, StructuralError> {
        let n = self.n;
        let mut negatives = 0;
        for j in 0..n {
            let off = j * n;
            let d = self.data[off + j];
            if d == 0.0 || !d.is_finite() {
                return Err(StructuralError::IndefiniteBreakdown { pivot: j });
            }
            if d < 0.0 {
                negatives += 1;
            }
            let (head, tail) = self.data.split_at_mut((j + 1) * n);
            let colj = &head[off..off + n];
            let update = |(m, colk): (usize, &mut [f64])| {
                let k = j + 1 + m;
                let l = colj[k] / d;
                if l != 0.0 {
                    for r in k..n {
                        colk[r] -= l * colj[r];
                    }
                }
            };
            #[cfg(feature = "parallel")]
            tail.par_chunks_mut(n).enumerate().for_each(update);
            #[cfg(not(feature = "parallel"))]
            tail.chunks_mut(n).enumerate().for_each(update);
        }
        Ok(negatives)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spd(n: usize) -> DenseMatrix {
        // Diagonally dominant symmetric matrix.
        let mut m = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let v = 1.0 / (1.0 + (i as f64 - j as f64).abs());
                m.add(i, j, v);
            }
            m.add(i, i, n as f64);
        }
        m
    }

    #[test]
    fn cholesky_solve_recovers_rhs() {
        let a = spd(40);
        let x_true: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = vec![0.0; 40];
        a.matvec(&x_true, &mut b);
        let mut f = a.clone();
        f.cholesky_in_place().unwrap();
        f.cholesky_solve(&mut b);
        for (xa, xb) in b.iter().zip(&x_true) {
            assert_relative_eq!(xa, xb, epsilon = 1e-10);
        }
    }

    #[test]
    fn parallel_and_sequential_factorizations_agree() {
        let a = spd(33);
        let mut fa = a.clone();
        let mut fb = a.clone();
        fa.cholesky_in_place().unwrap();
        fb.cholesky_in_place_seq().unwrap();
        for j in 0..33 {
            for i in j..33 {
                assert_relative_eq!(fa.get(i, j), fb.get(i, j), epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn not_positive_definite_reported() {
        let mut m = DenseMatrix::zeros(3);
        m.add(0, 0, 1.0);
        m.add(1, 1, -2.0);
        m.add(2, 2, 1.0);
        assert!(matches!(
            m.cholesky_in_place(),
            Err(StructuralError::NotPositiveDefinite { pivot: 1, .. })
        ));
    }

    #[test]
    fn inertia_counts_negative_eigenvalues() {
        // diag(3, -1, 2, -5) in a rotated basis keeps its inertia.
        let d = [3.0, -1.0, 2.0, -5.0];
        let c = 0.6f64;
        let s = 0.8f64;
        // Rotate in the (0,1) and (2,3) planes.
        let mut m = DenseMatrix::zeros(4);
        m.add(0, 0, c * c * d[0] + s * s * d[1]);
        m.add(1, 1, s * s * d[0] + c * c * d[1]);
        m.add(0, 1, c * s * (d[0] - d[1]));
        m.add(1, 0, c * s * (d[0] - d[1]));
        m.add(2, 2, c * c * d[2] + s * s * d[3]);
        m.add(3, 3, s * s * d[2] + c * c * d[3]);
        m.add(2, 3, c * s * (d[2] - d[3]));
        m.add(3, 2, c * s * (d[2] - d[3]));
        assert_eq!(m.ldlt_negative_pivots().unwrap(), 2);
    }

    #[test]
    fn power_iteration_dominant_eigenvalue() {
        let mut m = DenseMatrix::zeros(3);
        for (i, v) in [5.0, 2.0, 1.0].iter().enumerate() {
            m.add(i, i, *v);
        }
        assert_relative_eq!(m.largest_eigenvalue(100), 5.0, epsilon = 1e-9);
    }
}
