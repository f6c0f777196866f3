//! Standard-form conic programs and the embedded interior-point solver.
//!
//! A [`ConicProgram`] holds a flattened variable split into cone blocks
//! (free, nonnegative, second-order, PSD in scaled symmetric vectorization),
//! a linear objective, and dense linear equality constraints. Builders
//! produce constraints in natural affine-in-cone form; [`canonicalize`]
//! rewrites them with slack blocks. [`solve`] runs a homogeneous self-dual
//! interior-point method with Nesterov-Todd scaling and Mehrotra
//! predictor-corrector steps; see [`ipm`] for the loop.

mod cones;
mod ipm;
mod kkt;

use nalgebra::{DMatrix, DVector};

use crate::matcone::{SocConvention, SymMatrix};
use crate::{Error, Result};

pub const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Length of the scaled symmetric vectorization of a `d x d` matrix.
pub fn svec_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Position of entry `(i, j)`, `i >= j`, in column-major lower-triangle
/// ordering: `(0,0), (1,0), ..., (d-1,0), (1,1), ...`.
pub fn svec_index(d: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    j * (2 * d - j + 1) / 2 + (i - j)
}

/// Scaled symmetric vectorization: off-diagonal entries are multiplied by
/// `sqrt(2)` so that `<svec(A), svec(B)> = <A, B>`.
pub fn svec(a: &SymMatrix) -> DVector<f64> {
    let d = a.dim();
    let mut v = DVector::zeros(svec_len(d));
    let mut k = 0;
    for j in 0..d {
        for i in j..d {
            v[k] = if i == j { a.get(i, i) } else { SQRT_2 * a.get(i, j) };
            k += 1;
        }
    }
    v
}

/// Inverse of [`svec`]. Exact on the diagonal; off-diagonal entries divide
/// by `sqrt(2)` and can differ from the pre-image by one ulp (rounding in
/// `x * sqrt(2) / sqrt(2)` is not always invertible).
pub fn smat(v: &[f64]) -> Result<SymMatrix> {
    let d = dim_from_svec_len(v.len())?;
    let mut a = SymMatrix::zeros(d);
    let mut k = 0;
    for j in 0..d {
        for i in j..d {
            let val = if i == j { v[k] } else { v[k] / SQRT_2 };
            a.set_sym(i, j, val);
            k += 1;
        }
    }
    Ok(a)
}

fn dim_from_svec_len(len: usize) -> Result<usize> {
    let mut d = 0usize;
    while svec_len(d) < len {
        d += 1;
    }
    if svec_len(d) != len {
        return Err(Error::Shape(format!("length {len} is not a triangular number")));
    }
    Ok(d)
}

/// One block of the flattened conic variable. `Soc` uses the FirstCoord
/// convention internally; `Psd(d)` occupies `d(d+1)/2` scaled-vectorization
/// coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeBlock {
    Free(usize),
    Nonneg(usize),
    Soc(usize),
    Psd(usize),
}

impl ConeBlock {
    /// Number of flattened variable coordinates the block occupies.
    pub fn var_len(&self) -> usize {
        match *self {
            ConeBlock::Free(k) | ConeBlock::Nonneg(k) | ConeBlock::Soc(k) => k,
            ConeBlock::Psd(d) => svec_len(d),
        }
    }
}

/// Standard-form program: minimize `objective . v + obj_offset` subject to
/// `aeq v = beq` and `v` in the product of cone blocks.
#[derive(Debug, Clone)]
pub struct ConicProgram {
    pub blocks: Vec<ConeBlock>,
    pub objective: DVector<f64>,
    pub obj_offset: f64,
    pub aeq: DMatrix<f64>,
    pub beq: DVector<f64>,
}

impl ConicProgram {
    pub fn num_vars(&self) -> usize {
        self.blocks.iter().map(ConeBlock::var_len).sum()
    }

    pub fn num_equalities(&self) -> usize {
        self.aeq.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.objective.len() != n {
            return Err(Error::Shape(format!(
                "objective length {} does not match variable dimension {n}",
                self.objective.len()
            )));
        }
        if self.aeq.ncols() != n {
            return Err(Error::Shape(format!(
                "equality matrix has {} columns, expected {n}",
                self.aeq.ncols()
            )));
        }
        if self.beq.len() != self.aeq.nrows() {
            return Err(Error::Shape(format!(
                "equality rhs length {} does not match {} rows",
                self.beq.len(),
                self.aeq.nrows()
            )));
        }
        let finite = self.objective.iter().all(|x| x.is_finite())
            && self.aeq.iter().all(|x| x.is_finite())
            && self.beq.iter().all(|x| x.is_finite())
            && self.obj_offset.is_finite();
        if !finite {
            return Err(Error::Shape("program contains non-finite data".into()));
        }
        for b in &self.blocks {
            if b.var_len() == 0 {
                return Err(Error::Shape("zero-length cone block".into()));
            }
        }
        Ok(())
    }

    /// Text dump of blocks, objective, and equality triplets, for
    /// cross-solver debugging. Not a stability contract.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        writeln!(out, "conic-program v1").unwrap();
        write!(out, "blocks:").unwrap();
        for b in &self.blocks {
            match b {
                ConeBlock::Free(k) => write!(out, " free({k})"),
                ConeBlock::Nonneg(k) => write!(out, " nonneg({k})"),
                ConeBlock::Soc(k) => write!(out, " soc({k})"),
                ConeBlock::Psd(d) => write!(out, " psd({d})"),
            }
            .unwrap();
        }
        writeln!(out).unwrap();
        writeln!(out, "offset: {:e}", self.obj_offset).unwrap();
        write!(out, "objective:").unwrap();
        for (i, val) in self.objective.iter().enumerate() {
            if *val != 0.0 {
                write!(out, " {i}:{val:e}").unwrap();
            }
        }
        writeln!(out).unwrap();
        for r in 0..self.aeq.nrows() {
            write!(out, "eq {r}:").unwrap();
            for c in 0..self.aeq.ncols() {
                let val = self.aeq[(r, c)];
                if val != 0.0 {
                    write!(out, " {c}:{val:e}").unwrap();
                }
            }
            writeln!(out, " = {:e}", self.beq[r]).unwrap();
        }
        out
    }
}

/// Cone of an affine constraint `F u + g in K` before canonicalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlackCone {
    Nonneg,
    /// Rows are in the stated convention; canonicalization permutes to the
    /// internal FirstCoord layout.
    Soc(SocConvention),
    /// Rows are svec coordinates of a symmetric `d x d` affine map.
    Psd(usize),
}

/// One affine-in-cone constraint `map . u + offset in cone`.
#[derive(Debug, Clone)]
pub struct AffineConeConstraint {
    pub map: DMatrix<f64>,
    pub offset: DVector<f64>,
    pub cone: SlackCone,
}

/// A program in natural affine form: decision variables `u`, direct
/// equalities, and affine-in-cone constraints.
#[derive(Debug, Clone)]
pub struct AffineConeSystem {
    pub num_vars: usize,
    pub objective: DVector<f64>,
    pub obj_offset: f64,
    /// Rows `a . u = rhs`.
    pub eq_rows: Vec<(DVector<f64>, f64)>,
    pub constraints: Vec<AffineConeConstraint>,
}

impl AffineConeSystem {
    pub fn new(num_vars: usize) -> Self {
        AffineConeSystem {
            num_vars,
            objective: DVector::zeros(num_vars),
            obj_offset: 0.0,
            eq_rows: Vec::new(),
            constraints: Vec::new(),
        }
    }

    pub fn push_equality(&mut self, row: DVector<f64>, rhs: f64) {
        self.eq_rows.push((row, rhs));
    }

    pub fn push_constraint(&mut self, map: DMatrix<f64>, offset: DVector<f64>, cone: SlackCone) {
        self.constraints.push(AffineConeConstraint { map, offset, cone });
    }
}

/// Rewrites an affine-cone system in standard form: the decision variables
/// become a leading Free block and every constraint `F u + g in K` gains a
/// slack block `s in K` with equalities `F u - s = -g`. Exact duplicate
/// equality rows are dropped.
pub fn canonicalize(sys: &AffineConeSystem) -> Result<ConicProgram> {
    let nu = sys.num_vars;
    if sys.objective.len() != nu {
        return Err(Error::Shape(format!(
            "objective length {} does not match {} decision variables",
            sys.objective.len(),
            nu
        )));
    }
    let mut blocks = vec![ConeBlock::Free(nu)];
    let mut slack_total = 0usize;
    for c in &sys.constraints {
        let rows = c.map.nrows();
        if c.map.ncols() != nu {
            return Err(Error::Shape(format!(
                "constraint map has {} columns, expected {nu}",
                c.map.ncols()
            )));
        }
        if c.offset.len() != rows {
            return Err(Error::Shape(format!(
                "constraint offset length {} does not match {rows} rows",
                c.offset.len()
            )));
        }
        let block = match c.cone {
            SlackCone::Nonneg => ConeBlock::Nonneg(rows),
            SlackCone::Soc(_) => {
                if rows < 2 {
                    return Err(Error::Shape("second-order cone needs dimension >= 2".into()));
                }
                ConeBlock::Soc(rows)
            }
            SlackCone::Psd(d) => {
                if svec_len(d) != rows {
                    return Err(Error::Shape(format!(
                        "psd({d}) constraint needs {} svec rows, got {rows}",
                        svec_len(d)
                    )));
                }
                ConeBlock::Psd(d)
            }
        };
        blocks.push(block);
        slack_total += rows;
    }
    for (row, _) in &sys.eq_rows {
        if row.len() != nu {
            return Err(Error::Shape(format!(
                "equality row length {} does not match {nu} decision variables",
                row.len()
            )));
        }
    }

    let total_vars = nu + slack_total;
    let total_rows = sys.eq_rows.len() + slack_total;
    let mut aeq = DMatrix::zeros(total_rows, total_vars);
    let mut beq = DVector::zeros(total_rows);
    let mut row = 0;
    for (r, rhs) in &sys.eq_rows {
        for c in 0..nu {
            aeq[(row, c)] = r[c];
        }
        beq[row] = *rhs;
        row += 1;
    }
    let mut slack_col = nu;
    for c in &sys.constraints {
        let rows = c.map.nrows();
        // Local row order inside the slack block; SOC constraints stated in
        // LastCoord order move their norm-bound row first.
        let order: Vec<usize> = match c.cone {
            SlackCone::Soc(SocConvention::LastCoord) => {
                std::iter::once(rows - 1).chain(0..rows - 1).collect()
            }
            _ => (0..rows).collect(),
        };
        for (local, &src) in order.iter().enumerate() {
            for col in 0..nu {
                aeq[(row, col)] = c.map[(src, col)];
            }
            aeq[(row, slack_col + local)] = -1.0;
            beq[row] = -c.offset[src];
            row += 1;
        }
        slack_col += rows;
    }

    let (aeq, beq) = drop_duplicate_rows(aeq, beq);

    let mut objective = DVector::zeros(total_vars);
    for i in 0..nu {
        objective[i] = sys.objective[i];
    }
    let prog = ConicProgram { blocks, objective, obj_offset: sys.obj_offset, aeq, beq };
    prog.validate()?;
    Ok(prog)
}

fn drop_duplicate_rows(aeq: DMatrix<f64>, beq: DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
    use std::collections::HashMap;
    let rows = aeq.nrows();
    let mut keep = Vec::with_capacity(rows);
    let mut seen: HashMap<u64, Vec<usize>> = HashMap::new();
    'rows: for r in 0..rows {
        let mut hash = 0xcbf29ce484222325u64;
        let mut absorb = |bits: u64| {
            hash ^= bits;
            hash = hash.wrapping_mul(0x100000001b3);
        };
        for c in 0..aeq.ncols() {
            absorb(aeq[(r, c)].to_bits());
        }
        absorb(beq[r].to_bits());
        let bucket = seen.entry(hash).or_default();
        for &prev in bucket.iter() {
            let same = (0..aeq.ncols()).all(|c| {
                aeq[(r, c)].to_bits() == aeq[(prev, c)].to_bits()
            }) && beq[r].to_bits() == beq[prev].to_bits();
            if same {
                continue 'rows;
            }
        }
        bucket.push(r);
        keep.push(r);
    }
    if keep.len() == rows {
        return (aeq, beq);
    }
    let mut a2 = DMatrix::zeros(keep.len(), aeq.ncols());
    let mut b2 = DVector::zeros(keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        for c in 0..aeq.ncols() {
            a2[(dst, c)] = aeq[(src, c)];
        }
        b2[dst] = beq[src];
    }
    (a2, b2)
}

/// Termination status of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    IterLimit,
    Numerical,
}

/// KKT residuals of the returned iterate (normalized).
#[derive(Debug, Clone, Copy)]
pub struct Residuals {
    pub primal_feas: f64,
    pub dual_feas: f64,
    pub gap: f64,
}

/// Solver output. On `Optimal`, `primal` is the de-homogenized variable
/// `v / tau` and `dual` the equality multipliers `y / tau`. On an
/// infeasibility status the corresponding slot carries the (unnormalized)
/// certificate ray.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub primal_value: f64,
    pub dual_value: f64,
    pub primal: DVector<f64>,
    pub dual: DVector<f64>,
    pub residuals: Residuals,
    pub iterations: usize,
}

/// Interior-point settings; the defaults match the certification tolerances.
#[derive(Debug, Clone, Copy)]
pub struct SolverSettings {
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_iter: usize,
    pub step_frac: f64,
    pub static_reg: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            feas_tol: 1e-8,
            gap_tol: 1e-8,
            max_iter: 200,
            step_frac: 0.99,
            static_reg: 1e-8,
        }
    }
}

/// Solves a canonicalized program. Structural defects return an error;
/// numerical trouble is reported through [`SolveStatus`], never a panic.
pub fn solve(prog: &ConicProgram, settings: &SolverSettings) -> Result<SolveResult> {
    prog.validate()?;
    Ok(ipm::solve_hsde(prog, settings))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svec_examples() {
        let v = svec(&SymMatrix::identity(2));
        assert_eq!(v.as_slice(), &[1.0, 0.0, 1.0]);

        let a = SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let v = svec(&a);
        assert_eq!(v.as_slice(), &[0.0, SQRT_2, 0.0]);
        assert_eq!(smat(v.as_slice()).unwrap(), a);
    }

    #[test]
    fn svec_preserves_inner_products() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let d = rng.random_range(1..8usize);
            let a = SymMatrix::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
            let b = SymMatrix::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
            let lhs = svec(&a).dot(&svec(&b));
            let rhs = a.inner(&b);
            assert!((lhs - rhs).abs() <= 1e-14 * (1.0 + rhs.abs()).max(1.0));
        }
    }

    #[test]
    fn svec_roundtrip_within_ulp() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let d = rng.random_range(1..7usize);
            let a = SymMatrix::from_fn(d, |_, _| rng.random_range(-10.0..10.0));
            let back = smat(svec(&a).as_slice()).unwrap();
            for i in 0..d {
                assert_eq!(back.get(i, i), a.get(i, i), "diagonal is exact");
                for j in 0..i {
                    let (x, y) = (a.get(i, j), back.get(i, j));
                    let ulp = (x.abs() * f64::EPSILON).max(f64::MIN_POSITIVE);
                    assert!((x - y).abs() <= ulp, "off-diagonal within one ulp");
                }
            }
        }
    }

    #[test]
    fn smat_length_check() {
        assert!(matches!(smat(&[1.0, 2.0]), Err(Error::Shape(_))));
        assert!(smat(&[1.0, 2.0, 3.0]).is_ok());
    }

    #[test]
    fn svec_index_matches_layout() {
        let d = 5;
        let mut expected = 0;
        for j in 0..d {
            for i in j..d {
                assert_eq!(svec_index(d, i, j), expected);
                assert_eq!(svec_index(d, j, i), expected);
                expected += 1;
            }
        }
    }

    #[test]
    fn canonicalize_structure() {
        // One SOC constraint in LastCoord order plus a scalar inequality.
        let mut sys = AffineConeSystem::new(2);
        sys.objective = DVector::from_vec(vec![1.0, 0.0]);
        let map = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        sys.push_constraint(
            map,
            DVector::from_vec(vec![0.0, 0.0, 2.0]),
            SlackCone::Soc(SocConvention::LastCoord),
        );
        sys.push_constraint(
            DMatrix::from_row_slice(1, 2, &[1.0, -1.0]),
            DVector::from_vec(vec![-3.0]),
            SlackCone::Nonneg,
        );
        sys.push_equality(DVector::from_vec(vec![1.0, 1.0]), 1.0);

        let prog = canonicalize(&sys).unwrap();
        assert_eq!(
            prog.blocks,
            vec![ConeBlock::Free(2), ConeBlock::Soc(3), ConeBlock::Nonneg(1)]
        );
        assert_eq!(prog.num_vars(), 6);
        assert_eq!(prog.num_equalities(), 5);
        // SOC slack block starts at FirstCoord: its first equality row holds
        // the original last (norm-bound) constraint row.
        assert_eq!(prog.aeq[(1, 0)], 1.0);
        assert_eq!(prog.aeq[(1, 1)], 1.0);
        assert_eq!(prog.beq[1], -2.0);
        assert_eq!(prog.aeq[(1, 2)], -1.0);
    }

    #[test]
    fn canonicalize_drops_duplicate_rows() {
        let mut sys = AffineConeSystem::new(1);
        sys.objective = DVector::from_vec(vec![1.0]);
        sys.push_equality(DVector::from_vec(vec![1.0]), 2.0);
        sys.push_equality(DVector::from_vec(vec![1.0]), 2.0);
        let prog = canonicalize(&sys).unwrap();
        assert_eq!(prog.num_equalities(), 1);
    }

    #[test]
    fn equality_only_program_has_no_slacks() {
        let mut sys = AffineConeSystem::new(2);
        sys.objective = DVector::from_vec(vec![1.0, 1.0]);
        sys.push_equality(DVector::from_vec(vec![1.0, -1.0]), 0.0);
        let prog = canonicalize(&sys).unwrap();
        assert_eq!(prog.blocks, vec![ConeBlock::Free(2)]);
    }

    #[test]
    fn dump_mentions_structure() {
        let mut sys = AffineConeSystem::new(1);
        sys.objective = DVector::from_vec(vec![1.0]);
        sys.push_constraint(
            DMatrix::from_row_slice(1, 1, &[1.0]),
            DVector::from_vec(vec![-1.0]),
            SlackCone::Nonneg,
        );
        let prog = canonicalize(&sys).unwrap();
        let dump = prog.dump();
        assert!(dump.contains("free(1)"));
        assert!(dump.contains("nonneg(1)"));
        assert!(dump.contains("eq 0:"));
    }
}
