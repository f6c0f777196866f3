//! Dense LDL^T factorization of the quasidefinite KKT system.
//!
//! The interior-point iteration factors
//! `[[H + delta I, A^T], [A, -delta I]]` once per iteration with diagonal
//! (1x1) pivots in fixed order, which exists for quasidefinite matrices
//! under any symmetric permutation; the fixed order keeps re-solves
//! bitwise deterministic. Solves refine twice against the unregularized
//! matrix.

use nalgebra::{DMatrix, DVector};

pub(crate) struct KktSystem {
    dim: usize,
    /// Split point: rows `0..pos_dim` regularize with `+delta`, the rest
    /// with `-delta`.
    pos_dim: usize,
    delta: f64,
    /// Unregularized matrix, kept for iterative refinement.
    raw: DMatrix<f64>,
    /// Factor storage: strict lower triangle of L, D on the diagonal.
    factor: DMatrix<f64>,
    /// Smallest pivot magnitude tolerated before bumping.
    pivot_floor: f64,
    pub degenerate: bool,
}

impl KktSystem {
    pub fn new(dim: usize, pos_dim: usize, delta: f64) -> Self {
        KktSystem {
            dim,
            pos_dim,
            delta,
            raw: DMatrix::zeros(dim, dim),
            factor: DMatrix::zeros(dim, dim),
            pivot_floor: 0.0,
            degenerate: false,
        }
    }

    /// The matrix to assemble into before calling [`KktSystem::factorize`].
    pub fn matrix_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.raw
    }

    /// Factors the regularized copy of the assembled matrix. Returns false
    /// only if a non-finite value appears.
    pub fn factorize(&mut self) -> bool {
        let n = self.dim;
        self.factor.copy_from(&self.raw);
        let mut max_diag = 0.0f64;
        for j in 0..n {
            max_diag = max_diag.max(self.factor[(j, j)].abs());
        }
        self.pivot_floor = (1e-14 * (1.0 + max_diag)).max(f64::MIN_POSITIVE);
        for j in 0..n {
            let reg = if j < self.pos_dim { self.delta } else { -self.delta };
            self.factor[(j, j)] += reg;
        }
        self.degenerate = false;

        let data = self.factor.as_mut_slice(); // column-major
        for j in 0..n {
            let mut d = data[j * n + j];
            if !d.is_finite() {
                return false;
            }
            if d.abs() < self.pivot_floor {
                // Signed bump keeps the factorization quasidefinite.
                d = if j < self.pos_dim { self.pivot_floor } else { -self.pivot_floor };
                self.degenerate = true;
            }
            data[j * n + j] = d;
            let inv = 1.0 / d;
            // Scale column j below the diagonal.
            for i in (j + 1)..n {
                data[j * n + i] *= inv;
            }
            // Trailing update of the lower triangle.
            let (col_j, rest) = data[j * n..].split_at_mut(n);
            for k in (j + 1)..n {
                let f = col_j[k] * d;
                if f == 0.0 {
                    continue;
                }
                let col_k = &mut rest[(k - j - 1) * n..(k - j) * n];
                for i in k..n {
                    col_k[i] -= col_j[i] * f;
                }
            }
        }
        true
    }

    fn solve_factored(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let n = self.dim;
        let data = self.factor.as_slice();
        let mut x = rhs.clone();
        // Forward: L y = rhs.
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                let col = &data[j * n..(j + 1) * n];
                for i in (j + 1)..n {
                    x[i] -= col[i] * xj;
                }
            }
        }
        // Diagonal.
        for j in 0..n {
            x[j] /= data[j * n + j];
        }
        // Backward: L^T x = y.
        for j in (0..n).rev() {
            let col = &data[j * n..(j + 1) * n];
            let mut acc = x[j];
            for i in (j + 1)..n {
                acc -= col[i] * x[i];
            }
            x[j] = acc;
        }
        x
    }

    /// Solves against the unregularized matrix with two refinement passes.
    pub fn solve_refined(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut x = self.solve_factored(rhs);
        for _ in 0..4 {
            let residual = rhs - self.apply_raw(&x);
            let corr = self.solve_factored(&residual);
            x += corr;
        }
        x
    }

    /// Applies the unregularized symmetric matrix (stored lower triangle).
    fn apply_raw(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.dim;
        let data = self.raw.as_slice();
        let mut out = DVector::zeros(n);
        for j in 0..n {
            let xj = x[j];
            let col = &data[j * n..(j + 1) * n];
            // Diagonal and below.
            let mut acc = col[j] * xj;
            for i in (j + 1)..n {
                out[i] += col[i] * xj;
                acc += col[i] * x[i];
            }
            out[j] += acc;
        }
        out
    }
}
