//! Linear and affine maps of the lifted space.
//!
//! The lifted variable ordering is fixed everywhere as `(x_1..x_n, t, x_0)`,
//! with `t` modeling `||x||^2` and `x_0` the homogenization coordinate; the
//! structure matrices `Q`, `P` and vectors `d_i` below are stated in exactly
//! this order.

use nalgebra::{DMatrix, DVector};

use crate::instance::BallQcqpInstance;
use crate::matcone::SymMatrix;
use crate::{Error, Result};

/// The structure data of an instance:
///
/// * `w^T Q w = 2 (t x_0 - ||x||^2)`, so `<Q, Z> = 0` ties `t` to `tr(X)`,
/// * `P w = (2x, t - x_0, t + x_0)` relates `Q` to the second-order cone,
/// * `<d_i, w> = r_i^2 - ||x - c_i||^2` for lifted points `w = (x, ||x||^2, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureMatrices {
    pub q: SymMatrix,
    pub p: DMatrix<f64>,
    pub d: Vec<DVector<f64>>,
}

pub fn structure_matrices(inst: &BallQcqpInstance) -> StructureMatrices {
    let n = inst.n();
    let dim = n + 2;
    let mut q = SymMatrix::zeros(dim);
    for i in 0..n {
        q.set_sym(i, i, -2.0);
    }
    q.set_sym(n, n + 1, 1.0);

    let mut p = DMatrix::zeros(dim, dim);
    for i in 0..n {
        p[(i, i)] = 2.0;
    }
    p[(n, n)] = 1.0;
    p[(n, n + 1)] = -1.0;
    p[(n + 1, n)] = 1.0;
    p[(n + 1, n + 1)] = 1.0;

    let d = (0..inst.m())
        .map(|i| {
            let c = inst.center(i);
            let r = inst.radius(i);
            let mut di = DVector::zeros(dim);
            for k in 0..n {
                di[k] = 2.0 * c[k];
            }
            di[n] = -1.0;
            di[n + 1] = r * r - c.norm_squared();
            di
        })
        .collect();

    StructureMatrices { q, p, d }
}

/// Lift `x` to `w = (x, ||x||^2, 1)`.
pub fn lift_point(x: &DVector<f64>) -> DVector<f64> {
    let n = x.len();
    let mut w = DVector::zeros(n + 2);
    for i in 0..n {
        w[i] = x[i];
    }
    w[n] = x.norm_squared();
    w[n + 1] = 1.0;
    w
}

/// A symmetric matrix over the lifted coordinates `(x, t, x_0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedMatrix {
    z: SymMatrix,
}

impl LiftedMatrix {
    pub fn new(z: SymMatrix) -> Result<Self> {
        if z.dim() < 3 {
            return Err(Error::Shape(format!(
                "lifted matrix needs dimension n + 2 >= 3, got {}",
                z.dim()
            )));
        }
        Ok(LiftedMatrix { z })
    }

    /// Rank-one lift `w w^T` of a point.
    pub fn rank_one(x: &DVector<f64>) -> Self {
        let w = lift_point(x);
        let z = SymMatrix::from_dense(&w * w.transpose()).expect("finite outer product");
        LiftedMatrix { z }
    }

    pub fn n(&self) -> usize {
        self.z.dim() - 2
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.z
    }

    /// The homogenization entry `Z[x_0, x_0]`.
    pub fn corner(&self) -> f64 {
        let n = self.n();
        self.z.get(n + 1, n + 1)
    }

    /// The entry `Z[t, x_0]`, which models `||x||^2` when the corner is 1.
    pub fn t_entry(&self) -> f64 {
        let n = self.n();
        self.z.get(n, n + 1)
    }

    /// The entry `Z[t, t]`.
    pub fn tt_entry(&self) -> f64 {
        let n = self.n();
        self.z.get(n, n)
    }

    /// The column block `Z[x, t]`.
    pub fn tx_column(&self) -> DVector<f64> {
        let n = self.n();
        DVector::from_fn(n, |i, _| self.z.get(i, n))
    }

    /// Projection `pi(Z) = (pi_X(Z), pi_x(Z))`: the top-left `n x n` block
    /// and the `(x, x_0)` column.
    pub fn project(&self) -> (SymMatrix, DVector<f64>) {
        let n = self.n();
        let x_mat = SymMatrix::from_fn(n, |i, j| self.z.get(i, j));
        let x_vec = DVector::from_fn(n, |i, _| self.z.get(i, n + 1));
        (x_mat, x_vec)
    }
}

/// Arrow matrix of a ball constraint: `r` on the diagonal, `x - c` on the
/// last row/column; PSD iff `||x - c|| <= r` (eigenvalues are `r` and
/// `r ± ||x - c||`).
pub fn arrow(x: &DVector<f64>, c: &DVector<f64>, r: f64) -> SymMatrix {
    arrow_hom(x, c, r, 1.0)
}

/// Arrow matrix with the constant terms weighted by the homogenization
/// coordinate: diagonal `s * r`, border `x - s * c`. `arrow_hom(x, c, r, 1)`
/// is the plain arrow matrix.
pub fn arrow_hom(x: &DVector<f64>, c: &DVector<f64>, r: f64, s: f64) -> SymMatrix {
    let n = x.len();
    assert_eq!(c.len(), n, "arrow: center dimension mismatch");
    let mut a = SymMatrix::zeros(n + 1);
    for i in 0..n {
        a.set_sym(i, i, s * r);
        a.set_sym(i, n, x[i] - s * c[i]);
    }
    a.set_sym(n, n, s * r);
    a
}

fn check_pair(inst: &BallQcqpInstance, i: usize, j: usize) -> Result<()> {
    if i >= inst.m() || j >= inst.m() {
        return Err(Error::Config(format!(
            "ball indices ({i}, {j}) out of range for m = {}",
            inst.m()
        )));
    }
    if i == j {
        return Err(Error::Config("ball indices must be distinct".into()));
    }
    Ok(())
}

/// The Kronecker RLT map for the ball pair `(i, j)`: the linearization of
/// `A_j(x) (x) A_i(x)` in `(X, x)` at homogenization weight 1.
///
/// Block layout over an `(n+1) x (n+1)` grid of `(n+1) x (n+1)` blocks:
/// diagonal blocks `r_j * A_i(x)`, last block-column `H_k(X, x)`, zeros
/// elsewhere. Affine in `(X, x)`.
pub fn kron_map(
    x_mat: &SymMatrix,
    x: &DVector<f64>,
    inst: &BallQcqpInstance,
    i: usize,
    j: usize,
) -> Result<SymMatrix> {
    kron_map_hom(x_mat, x, 1.0, inst, i, j)
}

/// Homogenized Kronecker RLT map, linear in `(X, x, s)` where `s` weights
/// the constant terms. With atoms `X = sum_k a_k x_k x_k^T`,
/// `x = sum_k a_k x_k`, `s = sum_k a_k`, this equals
/// `sum_k a_k A_j(x_k) (x) A_i(x_k)` for arbitrary real weights.
pub fn kron_map_hom(
    x_mat: &SymMatrix,
    x: &DVector<f64>,
    s: f64,
    inst: &BallQcqpInstance,
    i: usize,
    j: usize,
) -> Result<SymMatrix> {
    check_pair(inst, i, j)?;
    let n = inst.n();
    if x_mat.dim() != n || x.len() != n {
        return Err(Error::Shape(format!(
            "kron map expects X {n}x{n} and x of length {n}"
        )));
    }
    let ci = inst.center(i);
    let cj = inst.center(j);
    let ri = inst.radius(i);
    let rj = inst.radius(j);
    let block = n + 1;
    let dim = block * block;
    let inner = arrow_hom(x, ci, ri, s);
    let mut out = SymMatrix::zeros(dim);

    // Diagonal blocks r_j * A_i.
    for blk in 0..block {
        let off = blk * block;
        for a in 0..block {
            for b in a..block {
                out.set_sym(off + a, off + b, rj * inner.get(a, b));
            }
        }
    }
    // Border blocks H_k linearizing (x_k - c_j[k]) * A_i(x).
    let corner_off = n * block;
    for k in 0..n {
        let off = k * block;
        let lead = (x[k] - s * cj[k]) * ri;
        for a in 0..n {
            // X_k - x_k c_i - c_j[k] x + s c_j[k] c_i, entry a.
            let v = x_mat.get(a, k) - x[k] * ci[a] - cj[k] * x[a] + s * cj[k] * ci[a];
            out.set_sym(off + a, corner_off + n, v);
            out.set_sym(off + n, corner_off + a, v);
            out.set_sym(off + a, corner_off + a, lead);
        }
        out.set_sym(off + n, corner_off + n, lead);
    }
    Ok(out)
}

/// The Zhen et al. two-norm block for the pair `(i, j)`:
/// `[[r_i^2 I, B], [B^T, r_j^2 I]]` with
/// `B = X - x c_j^T - c_i x^T + c_i c_j^T`; PSD iff `||B||_2 <= r_i r_j`.
pub fn zhen_map(
    x_mat: &SymMatrix,
    x: &DVector<f64>,
    inst: &BallQcqpInstance,
    i: usize,
    j: usize,
) -> Result<SymMatrix> {
    check_pair(inst, i, j)?;
    let n = inst.n();
    if x_mat.dim() != n || x.len() != n {
        return Err(Error::Shape(format!(
            "zhen map expects X {n}x{n} and x of length {n}"
        )));
    }
    let ci = inst.center(i);
    let cj = inst.center(j);
    let ri2 = inst.radius(i) * inst.radius(i);
    let rj2 = inst.radius(j) * inst.radius(j);
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for a in 0..n {
        out[(a, a)] = ri2;
        out[(n + a, n + a)] = rj2;
        for b in 0..n {
            let v = x_mat.get(a, b) - x[a] * cj[b] - ci[a] * x[b] + ci[a] * cj[b];
            out[(a, n + b)] = v;
            out[(n + b, a)] = v;
        }
    }
    SymMatrix::from_dense(out)
}

/// A vector in `R^{(n+1)^2}` read as `(v^1, b_1, ..., v^{n+1}, b_{n+1})`
/// with `v^j` of length `n`.
#[derive(Debug, Clone, Copy)]
pub struct KronVectorView<'a> {
    data: &'a [f64],
    n: usize,
}

impl<'a> KronVectorView<'a> {
    pub fn new(data: &'a [f64], n: usize) -> Result<Self> {
        if data.len() != (n + 1) * (n + 1) {
            return Err(Error::Shape(format!(
                "kron vector must have length {}, got {}",
                (n + 1) * (n + 1),
                data.len()
            )));
        }
        Ok(KronVectorView { data, n })
    }

    /// The `j`-th vector part, `j` in `0..=n`.
    pub fn v(&self, j: usize) -> &'a [f64] {
        let start = j * (self.n + 1);
        &self.data[start..start + self.n]
    }

    /// The `j`-th scalar part, `j` in `0..=n`.
    pub fn b(&self, j: usize) -> f64 {
        self.data[j * (self.n + 1) + self.n]
    }

    pub fn as_slice(&self) -> &'a [f64] {
        self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{example_e1, BallQcqpInstance, GenParams};
    use crate::matcone::{kron, soc_contains, spectral, ConeTol, SocConvention};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn structure_matrices_e1() {
        let e1 = example_e1();
        let s = structure_matrices(&e1);
        assert_eq!(s.d[0].as_slice(), &[0.0, -1.0, 1.0]);
        assert_eq!(s.d[1].as_slice(), &[2.0, -1.0, 0.0]);

        let q_expect = [[-2.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(s.q.get(i, j), q_expect[i][j]);
            }
        }
        let p_expect = [[2.0, 0.0, 0.0], [0.0, 1.0, -1.0], [0.0, 1.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(s.p[(i, j)], p_expect[i][j]);
            }
        }
    }

    #[test]
    fn lift_point_examples() {
        let w = lift_point(&DVector::from_vec(vec![0.5]));
        assert_eq!(w.as_slice(), &[0.5, 0.25, 1.0]);
        let w = lift_point(&DVector::zeros(3));
        assert_eq!(w.as_slice(), &[0.0, 0.0, 0.0, 0.0, 1.0]);
        let w = lift_point(&DVector::from_vec(vec![1.0, 1.0]));
        assert_eq!(w.as_slice(), &[1.0, 1.0, 2.0, 1.0]);
    }

    #[test]
    fn d_vectors_evaluate_ball_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..100u64 {
            let inst = BallQcqpInstance::generate(&GenParams {
                seed,
                n: 3,
                m: 3,
                ..GenParams::default()
            })
            .unwrap();
            let s = structure_matrices(&inst);
            let x = DVector::from_fn(3, |_, _| rng.random_range(-3.0..3.0));
            let w = lift_point(&x);
            let res = inst.ball_residuals(&x).unwrap();
            for i in 0..inst.m() {
                assert!((s.d[i].dot(&w) - res[i]).abs() <= 1e-12 * (1.0 + res[i].abs()));
            }
        }
    }

    #[test]
    fn projection_examples() {
        let z = LiftedMatrix::rank_one(&DVector::from_vec(vec![0.5]));
        let (x_mat, x) = z.project();
        assert_eq!(x_mat.get(0, 0), 0.25);
        assert_eq!(x[0], 0.5);

        let z = LiftedMatrix::new(SymMatrix::identity(4)).unwrap();
        let (x_mat, x) = z.project();
        assert_eq!(x_mat, SymMatrix::identity(2));
        assert_eq!(x, DVector::zeros(2));
    }

    #[test]
    fn projection_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 3;
        let z1 = SymMatrix::from_fn(n + 2, |_, _| rng.random_range(-1.0..1.0));
        let z2 = SymMatrix::from_fn(n + 2, |_, _| rng.random_range(-1.0..1.0));
        let sum = LiftedMatrix::new(z1.add(&z2)).unwrap();
        let (xs, vs) = sum.project();
        let (x1, v1) = LiftedMatrix::new(z1).unwrap().project();
        let (x2, v2) = LiftedMatrix::new(z2).unwrap().project();
        assert_eq!(xs, x1.add(&x2));
        assert_eq!(vs, v1 + v2);
    }

    #[test]
    fn arrow_examples() {
        let a = arrow(
            &DVector::from_vec(vec![0.5]),
            &DVector::from_vec(vec![0.0]),
            1.0,
        );
        assert_eq!(a.get(0, 0), 1.0);
        assert_eq!(a.get(0, 1), 0.5);
        assert_eq!(a.get(1, 1), 1.0);

        let c = DVector::from_vec(vec![0.3, -0.2]);
        let a = arrow(&c, &c, 2.0);
        assert_eq!(a, SymMatrix::identity(3).scale(2.0));

        // On the sphere the arrow matrix is singular: eigenvalues r +- ||x-c||.
        let x = DVector::from_vec(vec![1.0, 0.0]);
        let a = arrow(&x, &DVector::zeros(2), 1.0);
        let s = spectral(&a).unwrap();
        assert!(s.min_eigenvalue().abs() < 1e-12);
        assert!((s.max_eigenvalue() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn kron_map_e1_hand_value() {
        let e1 = example_e1();
        let x_mat = SymMatrix::from_rows(&[vec![0.25]]).unwrap();
        let x = DVector::from_vec(vec![0.5]);
        let k = kron_map(&x_mat, &x, &e1, 0, 1).unwrap();
        let expect = [
            [1.0, 0.5, -0.5, -0.25],
            [0.5, 1.0, -0.25, -0.5],
            [-0.5, -0.25, 1.0, 0.5],
            [-0.25, -0.5, 0.5, 1.0],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (k.get(i, j) - expect[i][j]).abs() < 1e-15,
                    "entry ({i},{j}): {} vs {}",
                    k.get(i, j),
                    expect[i][j]
                );
            }
        }
    }

    #[test]
    fn kron_map_rank_one_equals_kron_of_arrows() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for seed in 0..50u64 {
            let inst = BallQcqpInstance::generate(&GenParams {
                seed,
                n: 3,
                m: 3,
                ..GenParams::default()
            })
            .unwrap();
            let x = DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
            let xxt = SymMatrix::from_dense(&x * x.transpose()).unwrap();
            for (i, j) in [(0usize, 1usize), (1, 0), (0, 2), (2, 1)] {
                let lhs = kron_map(&xxt, &x, &inst, i, j).unwrap();
                let rhs = kron(
                    &arrow(&x, inst.center(j), inst.radius(j)),
                    &arrow(&x, inst.center(i), inst.radius(i)),
                )
                .unwrap();
                let gap = lhs.sub(&rhs).frobenius_norm();
                assert!(
                    gap <= 1e-12 * (1.0 + lhs.frobenius_norm()),
                    "seed {seed} pair ({i},{j}): gap {gap:e}"
                );
            }
        }
    }

    #[test]
    fn kron_map_is_affine() {
        let inst = BallQcqpInstance::generate(&GenParams { seed: 21, n: 2, m: 2, ..GenParams::default() })
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let rand_pair = |rng: &mut ChaCha8Rng| {
            let x = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
            let xm = SymMatrix::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
            (xm, x)
        };
        let (x1m, x1) = rand_pair(&mut rng);
        let (x2m, x2) = rand_pair(&mut rng);
        let mid_m = x1m.add(&x2m).scale(0.5);
        let mid_x = (&x1 + &x2) * 0.5;
        let lhs = kron_map(&mid_m, &mid_x, &inst, 0, 1).unwrap();
        let rhs = kron_map(&x1m, &x1, &inst, 0, 1)
            .unwrap()
            .add(&kron_map(&x2m, &x2, &inst, 0, 1).unwrap())
            .scale(0.5);
        assert!(lhs.sub(&rhs).frobenius_norm() <= 1e-13 * (1.0 + lhs.frobenius_norm()));
    }

    #[test]
    fn zhen_map_examples() {
        let e1 = example_e1();
        let x_mat = SymMatrix::from_rows(&[vec![0.25]]).unwrap();
        let x = DVector::from_vec(vec![0.5]);
        let z = zhen_map(&x_mat, &x, &e1, 0, 1).unwrap();
        assert_eq!(z.get(0, 0), 1.0);
        assert_eq!(z.get(1, 1), 1.0);
        assert!((z.get(0, 1) + 0.25).abs() < 1e-15);

        // Rank-one strictly inside both balls: PSD.
        let x = DVector::from_vec(vec![0.5]);
        let xxt = SymMatrix::from_dense(&x * x.transpose()).unwrap();
        let z = zhen_map(&xxt, &x, &e1, 0, 1).unwrap();
        let s = spectral(&z).unwrap();
        assert!(s.min_eigenvalue() > 0.0);

        // Coincident centers at the 2-norm equality case: singular.
        let inst = BallQcqpInstance::new(
            vec![DVector::zeros(2), DVector::zeros(2)],
            vec![1.0, 2.0],
            example_e1_objective_2d(),
            None,
        )
        .unwrap();
        let x = DVector::from_vec(vec![(2.0f64).sqrt(), 0.0]); // ||x||^2 = 2 = r1 r2
        let xxt = SymMatrix::from_dense(&x * x.transpose()).unwrap();
        let z = zhen_map(&xxt, &x, &inst, 0, 1).unwrap();
        let s = spectral(&z).unwrap();
        assert!(s.min_eigenvalue().abs() < 1e-12);
    }

    fn example_e1_objective_2d() -> crate::instance::Objective {
        crate::instance::Objective {
            a: SymMatrix::identity(2).scale(-1.0),
            b: DVector::zeros(2),
            c0: 0.0,
        }
    }

    #[test]
    fn zhen_psd_iff_two_norm_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let tol = ConeTol::default();
        for seed in 0..100u64 {
            let inst = BallQcqpInstance::generate(&GenParams {
                seed,
                n: 3,
                m: 2,
                ..GenParams::default()
            })
            .unwrap();
            let x = DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
            let xm = SymMatrix::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
            let z = zhen_map(&xm, &x, &inst, 0, 1).unwrap();
            let (is_psd, _) = crate::matcone::psd_check(&z, tol).unwrap();
            let ci = inst.center(0);
            let cj = inst.center(1);
            let b = DMatrix::from_fn(3, 3, |a, bb| {
                xm.get(a, bb) - x[a] * cj[bb] - ci[a] * x[bb] + ci[a] * cj[bb]
            });
            let sv = b.svd(false, false);
            let smax = sv.singular_values.max();
            let bound = inst.radius(0) * inst.radius(1);
            let expect = smax <= bound + 1e-9 * (1.0 + bound);
            assert_eq!(is_psd, expect, "seed {seed}: smax {smax} vs bound {bound}");
        }
    }

    #[test]
    fn fact_qp_relation_random() {
        // w^T Q w >= 0  <=>  P w in L u (-L);  equality <=> boundary.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let tol = ConeTol { abs: 1e-9, rel: 1e-9 };
        for n in 1..=5usize {
            let inst = BallQcqpInstance::generate(&GenParams {
                seed: n as u64,
                n,
                m: 2,
                ..GenParams::default()
            })
            .unwrap();
            let s = structure_matrices(&inst);
            for _ in 0..2000 {
                let w = DVector::from_fn(n + 2, |_, _| rng.random_range(-1.0..1.0));
                let qval = s.q.quad_form(&w);
                let pw = &s.p * &w;
                let pw_slice: Vec<f64> = pw.iter().copied().collect();
                let neg: Vec<f64> = pw.iter().map(|v| -v).collect();
                let (in_pos, m_pos) = soc_contains(&pw_slice, SocConvention::LastCoord, tol);
                let (in_neg, m_neg) = soc_contains(&neg, SocConvention::LastCoord, tol);
                let member = in_pos || in_neg;
                let thr = tol.threshold(w.norm_squared());
                if qval >= thr {
                    assert!(member, "w={w:?} qval={qval}");
                } else if qval <= -thr {
                    assert!(!member, "w={w:?} qval={qval} margins {m_pos} {m_neg}");
                }
            }
        }
    }

    #[test]
    fn kron_vector_view_layout() {
        let data: Vec<f64> = (0..9).map(|v| v as f64).collect();
        let view = KronVectorView::new(&data, 2).unwrap();
        assert_eq!(view.v(0), &[0.0, 1.0]);
        assert_eq!(view.b(0), 2.0);
        assert_eq!(view.v(2), &[6.0, 7.0]);
        assert_eq!(view.b(2), 8.0);
        assert!(KronVectorView::new(&data[..8], 2).is_err());
    }

    #[test]
    fn pair_index_errors() {
        let e1 = example_e1();
        let xm = SymMatrix::zeros(1);
        let x = DVector::zeros(1);
        assert!(kron_map(&xm, &x, &e1, 0, 0).is_err());
        assert!(kron_map(&xm, &x, &e1, 0, 5).is_err());
        assert!(zhen_map(&xm, &x, &e1, 1, 1).is_err());
    }
}
