//! Dense symmetric matrices and cone membership primitives.
//!
//! Everything downstream (lifted maps, the conic solver, certification)
//! reduces to a handful of operations implemented here: spectral
//! decomposition, PSD tests with explicit margins, Kronecker products, and
//! second-order cone membership under both coordinate conventions.

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Cap on the dimension of materialized Kronecker products.
pub const MAX_KRON_DIM: usize = 4096;

/// Absolute/relative tolerance pair used by every cone membership test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeTol {
    pub abs: f64,
    pub rel: f64,
}

impl Default for ConeTol {
    /// Matches the solver feasibility tolerance so certification never
    /// rejects solver-feasible points.
    fn default() -> Self {
        ConeTol { abs: 1e-8, rel: 1e-8 }
    }
}

impl ConeTol {
    pub fn new(abs: f64, rel: f64) -> Result<Self> {
        if !(abs.is_finite() && rel.is_finite() && abs >= 0.0 && rel >= 0.0) {
            return Err(Error::Config(format!(
                "tolerances must be finite and nonnegative, got abs={abs}, rel={rel}"
            )));
        }
        Ok(ConeTol { abs, rel })
    }

    /// Threshold `abs + rel * scale` for a quantity of the given scale.
    pub fn threshold(&self, scale: f64) -> f64 {
        self.abs + self.rel * scale
    }
}

/// Dense symmetric matrix; construction symmetrizes and rejects non-finite
/// entries, so `get(i, j) == get(j, i)` holds exactly from then on.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    data: DMatrix<f64>,
}

impl SymMatrix {
    /// Builds from a dense square matrix, averaging `(a + a^T) / 2`.
    pub fn from_dense(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Shape(format!(
                "symmetric matrix must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let dim = a.nrows();
        let mut data = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            for i in j..dim {
                let v = if i == j { a[(i, i)] } else { 0.5 * (a[(i, j)] + a[(j, i)]) };
                if !v.is_finite() {
                    return Err(Error::Shape(format!("non-finite entry at ({i}, {j})")));
                }
                data[(i, j)] = v;
                data[(j, i)] = v;
            }
        }
        Ok(SymMatrix { data })
    }

    /// Builds from `f(i, j)`; only `i <= j` is evaluated.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            for i in 0..=j {
                let v = f(i, j);
                data[(i, j)] = v;
                data[(j, i)] = v;
            }
        }
        SymMatrix { data }
    }

    /// Builds from row slices (used by tests and file loading).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::Shape(format!(
                    "row {i} has length {}, expected {dim}",
                    r.len()
                )));
            }
        }
        Self::from_dense(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
    }

    pub fn zeros(dim: usize) -> Self {
        SymMatrix { data: DMatrix::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix { data: DMatrix::identity(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    /// Sets the `(i, j)` and `(j, i)` entries together.
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[(i, j)] = v;
        self.data[(j, i)] = v;
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.norm()
    }

    /// Trace inner product `<A, B>`.
    pub fn inner(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.dim(), other.dim(), "inner product dimension mismatch");
        self.data.dot(&other.data)
    }

    /// Quadratic form `v^T A v`.
    pub fn quad_form(&self, v: &nalgebra::DVector<f64>) -> f64 {
        assert_eq!(v.len(), self.dim(), "quadratic form dimension mismatch");
        v.dot(&(&self.data * v))
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix { data: &self.data * s }
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim(), other.dim(), "sum dimension mismatch");
        SymMatrix { data: &self.data + &other.data }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim(), other.dim(), "difference dimension mismatch");
        SymMatrix { data: &self.data - &other.data }
    }
}

/// Eigendecomposition of a symmetric matrix, eigenvalues descending and
/// eigenvector columns in matching order.
#[derive(Debug, Clone)]
pub struct Spectral {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl Spectral {
    pub fn min_eigenvalue(&self) -> f64 {
        *self.values.last().expect("spectral of empty matrix")
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.values[0]
    }
}

/// Full spectral decomposition `A = V diag(l) V^T`, eigenvalues sorted
/// descending.
pub fn spectral(a: &SymMatrix) -> Result<Spectral> {
    let dim = a.dim();
    if dim == 0 {
        return Err(Error::Shape("spectral of empty matrix".into()));
    }
    let eig = a
        .data
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 20_000)
        .ok_or_else(|| Error::Numerical(format!("symmetric eigensolver stalled (dim {dim})")))?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .expect("finite eigenvalues")
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(dim, dim);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(Spectral { values, vectors })
}

/// PSD test: `(is_psd, min_eig)` with `is_psd <=> min_eig >= -(abs + rel*||A||_F)`.
pub fn psd_check(a: &SymMatrix, tol: ConeTol) -> Result<(bool, f64)> {
    let spec = spectral(a)?;
    let min_eig = spec.min_eigenvalue();
    Ok((min_eig >= -tol.threshold(a.frobenius_norm()), min_eig))
}

/// Dense Kronecker product; block `(i, j)` of the result is `A[i][j] * B`.
pub fn kron(a: &SymMatrix, b: &SymMatrix) -> Result<SymMatrix> {
    let (p, q) = (a.dim(), b.dim());
    let dim = p
        .checked_mul(q)
        .filter(|&d| d <= MAX_KRON_DIM)
        .ok_or_else(|| {
            Error::Size(format!("kron product dimension {p}*{q} exceeds cap {MAX_KRON_DIM}"))
        })?;
    let mut out = DMatrix::zeros(dim, dim);
    for bi in 0..p {
        for bj in 0..p {
            let s = a.get(bi, bj);
            if s == 0.0 {
                continue;
            }
            for i in 0..q {
                for j in 0..q {
                    out[(bi * q + i, bj * q + j)] = s * b.get(i, j);
                }
            }
        }
    }
    Ok(SymMatrix { data: out })
}

/// Which coordinate of a second-order cone vector carries the norm bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SocConvention {
    /// `||(v_1, ..., v_{k-1})|| <= v_k` (the lifted-space convention).
    LastCoord,
    /// `||(v_2, ..., v_k)|| <= v_1` (the solver-internal convention).
    FirstCoord,
}

/// Second-order cone membership with signed margin.
///
/// For `LastCoord` the margin is `v_k - ||(v_1..v_{k-1})||`; membership holds
/// iff the margin is at least `-(abs + rel*||v||)`.
pub fn soc_contains(v: &[f64], convention: SocConvention, tol: ConeTol) -> (bool, f64) {
    assert!(!v.is_empty(), "second-order cone vector must be nonempty");
    let norm_all = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let margin = match convention {
        SocConvention::LastCoord => {
            let head: f64 = v[..v.len() - 1].iter().map(|x| x * x).sum::<f64>().sqrt();
            v[v.len() - 1] - head
        }
        SocConvention::FirstCoord => {
            let tail: f64 = v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
            v[0] - tail
        }
    };
    (margin >= -tol.threshold(norm_all), margin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_sym(rng: &mut ChaCha8Rng, dim: usize) -> SymMatrix {
        SymMatrix::from_fn(dim, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn spectral_closed_forms() {
        let a = SymMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let s = spectral(&a).unwrap();
        assert!((s.values[0] - 1.5).abs() < 1e-12);
        assert!((s.values[1] - 0.5).abs() < 1e-12);

        let s = spectral(&SymMatrix::identity(3)).unwrap();
        for v in &s.values {
            assert!((v - 1.0).abs() < 1e-12);
        }

        let a = SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let s = spectral(&a).unwrap();
        assert!((s.values[0] - 1.0).abs() < 1e-12);
        assert!((s.values[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_reconstruction_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for &dim in &[2usize, 7, 40, 150] {
            let a = random_sym(&mut rng, dim);
            let s = spectral(&a).unwrap();
            let lam = DMatrix::from_diagonal(&DVector::from_vec(s.values.clone()));
            let recon = &s.vectors * lam * s.vectors.transpose();
            let err = (recon - a.as_matrix()).norm();
            assert!(
                err <= 1e-10 * (1.0 + a.frobenius_norm()),
                "dim {dim}: reconstruction error {err:e}"
            );
            // descending order
            for w in s.values.windows(2) {
                assert!(w[0] >= w[1]);
            }
            // orthonormal columns
            let gram = s.vectors.transpose() * &s.vectors;
            assert!((gram - DMatrix::<f64>::identity(dim, dim)).norm() < 1e-10);
        }
    }

    #[test]
    fn psd_check_examples() {
        let tol = ConeTol::default();
        let a = SymMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let (ok, min_eig) = psd_check(&a, tol).unwrap();
        assert!(ok);
        assert!((min_eig - 0.5).abs() < 1e-12);

        let a = SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let (ok, min_eig) = psd_check(&a, tol).unwrap();
        assert!(!ok);
        assert!((min_eig + 1.0).abs() < 1e-12);

        let (ok, min_eig) = psd_check(&SymMatrix::zeros(3), tol).unwrap();
        assert!(ok);
        assert_eq!(min_eig, 0.0);
    }

    #[test]
    fn kron_examples() {
        let i2 = SymMatrix::identity(2);
        let k = kron(&i2, &i2).unwrap();
        assert_eq!(k, SymMatrix::identity(4));

        let a = SymMatrix::from_rows(&[vec![1.0, -0.5], vec![-0.5, 1.0]]).unwrap();
        let b = SymMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let k = kron(&a, &b).unwrap();
        assert_eq!(k.dim(), 4);
        assert!((k.get(0, 2) + 0.5).abs() < 1e-15);
        assert!((k.get(0, 3) + 0.25).abs() < 1e-15);
        // full block expansion cross-check
        for i in 0..4 {
            for j in 0..4 {
                let expect = a.get(i / 2, j / 2) * b.get(i % 2, j % 2);
                assert_eq!(k.get(i, j), expect);
            }
        }

        let s = SymMatrix::from_rows(&[vec![2.0]]).unwrap();
        let k = kron(&s, &b).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(k.get(i, j), 2.0 * b.get(i, j));
            }
        }
    }

    #[test]
    fn kron_size_guard() {
        let a = SymMatrix::zeros(80);
        let b = SymMatrix::zeros(80);
        assert!(matches!(kron(&a, &b), Err(Error::Size(_))));
    }

    #[test]
    fn kron_preserves_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let tol = ConeTol::default();
        let mut checked = 0;
        for _ in 0..1000 {
            let p = rng.random_range(1..4usize);
            let q = rng.random_range(1..4usize);
            // Gram matrices are PSD by construction.
            let ga = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
            let gb = DMatrix::from_fn(q, q, |_, _| rng.random_range(-1.0..1.0));
            let a = SymMatrix::from_dense(&ga * ga.transpose()).unwrap();
            let b = SymMatrix::from_dense(&gb * gb.transpose()).unwrap();
            if !psd_check(&a, tol).unwrap().0 || !psd_check(&b, tol).unwrap().0 {
                continue;
            }
            let k = kron(&a, &b).unwrap();
            assert!(psd_check(&k, tol).unwrap().0, "kron of PSD factors must be PSD");
            checked += 1;
        }
        assert!(checked > 900);
    }

    #[test]
    fn soc_examples() {
        let tol = ConeTol::default();
        let (inside, margin) = soc_contains(&[2.0, 1.0, 3.0], SocConvention::LastCoord, tol);
        assert!(inside);
        assert!((margin - (3.0 - 5.0f64.sqrt())).abs() < 1e-12);

        let (inside, margin) = soc_contains(&[2.0, 0.0, 2.0], SocConvention::LastCoord, tol);
        assert!(inside);
        assert_eq!(margin, 0.0);

        let (inside, margin) = soc_contains(&[2.0, 0.0, 0.0], SocConvention::LastCoord, tol);
        assert!(!inside);
        assert_eq!(margin, -2.0);

        // FirstCoord mirrors with the leading coordinate.
        let (inside, margin) = soc_contains(&[3.0, 2.0, 1.0], SocConvention::FirstCoord, tol);
        assert!(inside);
        assert!((margin - (3.0 - 5.0f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn soc_scale_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let tol = ConeTol { abs: 0.0, rel: 0.0 };
        for _ in 0..500 {
            let k = rng.random_range(1..8usize);
            let v: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
            let s = rng.random_range(0.1..10.0);
            let scaled: Vec<f64> = v.iter().map(|x| x * s).collect();
            let (in1, m1) = soc_contains(&v, SocConvention::LastCoord, tol);
            let (in2, m2) = soc_contains(&scaled, SocConvention::LastCoord, tol);
            assert_eq!(in1, in2);
            assert!((m2 - s * m1).abs() <= 1e-12 * (1.0 + m1.abs() * s));
        }
    }

    #[test]
    fn symmetrization_is_exact() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.7, 2.0]);
        let s = SymMatrix::from_dense(a).unwrap();
        assert_eq!(s.get(0, 1), s.get(1, 0));
        assert_eq!(s.get(0, 1), 0.5 * (0.3 + 0.7));
    }

    #[test]
    fn rejects_non_finite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, f64::NAN, 2.0]);
        assert!(matches!(SymMatrix::from_dense(a), Err(Error::Shape(_))));
    }
}
