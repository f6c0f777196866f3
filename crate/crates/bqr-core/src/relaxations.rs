//! Conic-program builders for the relaxation ladder.
//!
//! Five relaxations of `min q(x)` over the ball intersection are supported:
//!
//! * `Shor` — the base SDP `[[X, x], [x^T, 1]] >= 0` with the trace-ball
//!   rows, optionally strengthened by linear RLT products, Kronecker RLT
//!   blocks, or the Zhen two-norm blocks;
//! * `BurerCm` — the lifted relaxation over `Z in S^{n+2}` with one extra
//!   variable modeling `||x||^2`;
//! * `ExactM2` — its two-ball variant with `<Q, Z> >= 0` and
//!   `d1^T Z d2 = 0`, exact for `m = 2`;
//! * `Moment2` — the full level-2 moment relaxation over pseudomoments of
//!   degree up to 4.
//!
//! Builders keep the natural affine-in-cone system next to the
//! canonicalized program so solutions and hand-built candidates can be
//! checked against the original constraints.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::instance::BallQcqpInstance;
use crate::liftmaps::{kron_map, lift_point, structure_matrices, zhen_map, LiftedMatrix};
use crate::matcone::{soc_contains, spectral, ConeTol, SocConvention, SymMatrix};
use crate::solver::{
    canonicalize, smat, solve, svec, svec_len, AffineConeSystem, ConicProgram, SlackCone,
    SolveResult, SolverSettings,
};
use crate::{Error, Result};

/// The relaxation ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelaxationKind {
    Shor,
    ShorKron,
    ShorZhen,
    BurerCm,
    ExactM2,
    Moment2,
}

impl RelaxationKind {
    pub const ALL: [RelaxationKind; 6] = [
        RelaxationKind::Shor,
        RelaxationKind::ShorKron,
        RelaxationKind::ShorZhen,
        RelaxationKind::BurerCm,
        RelaxationKind::ExactM2,
        RelaxationKind::Moment2,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RelaxationKind::Shor => "shor",
            RelaxationKind::ShorKron => "shor-kron",
            RelaxationKind::ShorZhen => "shor-zhen",
            RelaxationKind::BurerCm => "burer-cm",
            RelaxationKind::ExactM2 => "exact-m2",
            RelaxationKind::Moment2 => "moment2",
        }
    }

    pub fn requires_two_balls(&self) -> bool {
        matches!(self, RelaxationKind::ExactM2)
    }
}

impl std::str::FromStr for RelaxationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shor" => Ok(RelaxationKind::Shor),
            "shor-kron" => Ok(RelaxationKind::ShorKron),
            "shor-zhen" => Ok(RelaxationKind::ShorZhen),
            "burer-cm" | "burer" => Ok(RelaxationKind::BurerCm),
            "exact-m2" => Ok(RelaxationKind::ExactM2),
            "moment2" => Ok(RelaxationKind::Moment2),
            other => Err(Error::Config(format!(
                "unknown relaxation '{other}' (expected shor | shor-kron | shor-zhen | burer-cm | exact-m2 | moment2)"
            ))),
        }
    }
}

/// Options for the Shor-family builders.
#[derive(Debug, Clone, Copy, Default)]
pub struct RelaxOptions {
    /// Adds the scalar linear-RLT products of ball pairs,
    /// `|tr(X) - (c_i + c_j)^T x + c_i^T c_j| <= r_i r_j`.
    pub include_linear_rlt: bool,
}

/// How to read the decision variables back out of a solution vector.
#[derive(Debug, Clone)]
pub enum Decode {
    /// `u = svec(Z)`, `Z in S^{n+2}`.
    Lifted { n: usize },
    /// `u = (svec(X), x)`.
    ShorPair { n: usize },
    /// `u = y` indexed by the listed monomials (graded lexicographic).
    Moment { n: usize, monomials: Vec<Vec<u8>> },
}

/// A relaxation ready to solve: the natural affine system, its
/// canonicalized program, and the decode map.
#[derive(Debug, Clone)]
pub struct BuiltRelaxation {
    pub kind: RelaxationKind,
    pub system: AffineConeSystem,
    pub program: ConicProgram,
    pub decode: Decode,
}

/// Pseudomoment values keyed by monomial exponent vectors.
#[derive(Debug, Clone)]
pub struct MomentSolution {
    pub n: usize,
    pub values: DVector<f64>,
    pub monomials: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
}

impl MomentSolution {
    pub fn moment(&self, alpha: &[u8]) -> f64 {
        match self.index.get(alpha) {
            Some(&i) => self.values[i],
            None => panic!("monomial {alpha:?} outside the degree-4 table"),
        }
    }

    /// Assembles the lifted pseudomoment matrix over the basis
    /// `(x_1, ..., x_n, sum_k x_k^2, 1)`.
    pub fn lifted_matrix(&self) -> LiftedMatrix {
        let n = self.n;
        let mut z = SymMatrix::zeros(n + 2);
        let mono = |parts: &[(usize, u8)]| {
            let mut alpha = vec![0u8; n];
            for &(var, pow) in parts {
                alpha[var] += pow;
            }
            self.moment(&alpha)
        };
        for i in 0..n {
            for j in i..n {
                z.set_sym(i, j, mono(&[(i, 1), (j, 1)]));
            }
            let mut xi_norm = 0.0;
            for k in 0..n {
                if k == i {
                    xi_norm += mono(&[(i, 3)]);
                } else {
                    xi_norm += mono(&[(i, 1), (k, 2)]);
                }
            }
            z.set_sym(i, n, xi_norm);
            z.set_sym(i, n + 1, mono(&[(i, 1)]));
        }
        let mut norm_sq = 0.0;
        let mut norm_sq_sq = 0.0;
        for k in 0..n {
            norm_sq += mono(&[(k, 2)]);
            for l in 0..n {
                if l == k {
                    norm_sq_sq += mono(&[(k, 4)]);
                } else {
                    norm_sq_sq += mono(&[(k, 2), (l, 2)]);
                }
            }
        }
        z.set_sym(n, n, norm_sq_sq);
        z.set_sym(n, n + 1, norm_sq);
        z.set_sym(n + 1, n + 1, mono(&[]));
        LiftedMatrix::new(z).expect("dimension n + 2")
    }

    pub fn from_values(n: usize, monomials: Vec<Vec<u8>>, values: DVector<f64>) -> Result<Self> {
        if values.len() != monomials.len() {
            return Err(Error::Shape(format!(
                "{} values vs {} monomials",
                values.len(),
                monomials.len()
            )));
        }
        let index = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        Ok(MomentSolution { n, values, monomials, index })
    }

    /// Dirac pseudomoments of a point: `y_alpha = x^alpha`.
    pub fn dirac(n: usize, monomials: &[Vec<u8>], x: &DVector<f64>) -> MomentSolution {
        let values = DVector::from_iterator(
            monomials.len(),
            monomials.iter().map(|alpha| {
                alpha
                    .iter()
                    .enumerate()
                    .map(|(k, &p)| x[k].powi(p as i32))
                    .product::<f64>()
            }),
        );
        let index = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        MomentSolution { n, values, monomials: monomials.to_vec(), index }
    }
}

impl BuiltRelaxation {
    pub fn solve(&self, settings: &SolverSettings) -> Result<SolveResult> {
        solve(&self.program, settings)
    }

    fn decision(&self, result: &SolveResult) -> DVector<f64> {
        result.primal.rows(0, self.system.num_vars).into_owned()
    }

    pub fn decode_lifted(&self, result: &SolveResult) -> Result<LiftedMatrix> {
        match self.decode {
            Decode::Lifted { .. } => LiftedMatrix::new(smat(self.decision(result).as_slice())?),
            _ => Err(Error::Config("relaxation does not decode to a lifted matrix".into())),
        }
    }

    pub fn decode_pair(&self, result: &SolveResult) -> Result<(SymMatrix, DVector<f64>)> {
        match self.decode {
            Decode::ShorPair { n } => {
                let u = self.decision(result);
                Ok(split_shor_vars(&u, n))
            }
            _ => Err(Error::Config("relaxation does not decode to (X, x)".into())),
        }
    }

    pub fn decode_moments(&self, result: &SolveResult) -> Result<MomentSolution> {
        match &self.decode {
            Decode::Moment { n, monomials } => {
                let values = self.decision(result);
                let index = monomials
                    .iter()
                    .enumerate()
                    .map(|(i, m)| (m.clone(), i))
                    .collect();
                Ok(MomentSolution { n: *n, values, monomials: monomials.clone(), index })
            }
            _ => Err(Error::Config("relaxation does not decode to moments".into())),
        }
    }

    /// The rank-one / Dirac candidate decision vector at a point.
    pub fn dirac_candidate(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.decode {
            Decode::Lifted { .. } => {
                let w = lift_point(x);
                let z = SymMatrix::from_dense(&w * w.transpose()).expect("finite lift");
                svec(&z)
            }
            Decode::ShorPair { n } => {
                let xxt = SymMatrix::from_dense(x * x.transpose()).expect("finite outer product");
                let mut u = DVector::zeros(svec_len(*n) + n);
                u.rows_mut(0, svec_len(*n)).copy_from(&svec(&xxt));
                u.rows_mut(svec_len(*n), *n).copy_from(x);
                u
            }
            Decode::Moment { n, monomials } => MomentSolution::dirac(*n, monomials, x).values,
        }
    }

    /// Margins of a decision vector against the natural (pre-slack)
    /// constraints: worst equality residual (as `-|residual|`), worst cone
    /// margin (scale-normalized), and the objective value.
    pub fn candidate_margins(&self, u: &DVector<f64>) -> CandidateCheck {
        let tol_free = ConeTol { abs: 0.0, rel: 0.0 };
        let mut worst_eq = f64::INFINITY;
        for (row, rhs) in &self.system.eq_rows {
            let resid = row.dot(u) - rhs;
            worst_eq = worst_eq.min(-resid.abs() / (1.0 + rhs.abs()));
        }
        let mut worst_cone = f64::INFINITY;
        for c in &self.system.constraints {
            let val = &c.map * u + &c.offset;
            let margin = match c.cone {
                SlackCone::Nonneg => val.iter().fold(f64::INFINITY, |m, &v| m.min(v)),
                SlackCone::Soc(conv) => soc_contains(val.as_slice(), conv, tol_free).1,
                SlackCone::Psd(_) => {
                    let m = smat(val.as_slice()).expect("svec rows");
                    let scale = 1.0 + m.frobenius_norm();
                    match spectral(&m) {
                        Ok(s) => s.min_eigenvalue() / scale,
                        Err(_) => f64::NEG_INFINITY,
                    }
                }
            };
            worst_cone = worst_cone.min(margin);
        }
        let objective = self.system.objective.dot(u) + self.system.obj_offset;
        CandidateCheck { worst_equality: worst_eq, worst_cone_margin: worst_cone, objective }
    }
}

/// Result of checking a candidate decision vector against the natural
/// constraint system.
#[derive(Debug, Clone, Copy)]
pub struct CandidateCheck {
    /// `-|a^T u - rhs| / (1 + |rhs|)`, minimized over equality rows.
    pub worst_equality: f64,
    /// Worst cone membership margin across all constraints.
    pub worst_cone_margin: f64,
    pub objective: f64,
}

impl CandidateCheck {
    pub fn feasible_within(&self, tol: f64) -> bool {
        self.worst_equality >= -tol && self.worst_cone_margin >= -tol
    }
}

/// Splits the Shor decision vector `u = (svec(X), x)`.
fn split_shor_vars(u: &DVector<f64>, n: usize) -> (SymMatrix, DVector<f64>) {
    let lx = svec_len(n);
    let x_mat = smat(&u.as_slice()[..lx]).expect("svec block");
    let x = DVector::from_column_slice(&u.as_slice()[lx..lx + n]);
    (x_mat, x)
}

/// Probes an affine symmetric-matrix-valued map into svec rows `(F, g)`
/// with `svec(f(u)) = F u + g`.
fn probe_sym_affine(
    num_vars: usize,
    f: impl Fn(&DVector<f64>) -> SymMatrix,
) -> (DMatrix<f64>, DVector<f64>) {
    let zero = DVector::zeros(num_vars);
    let g = svec(&f(&zero));
    let rows = g.len();
    let mut fm = DMatrix::zeros(rows, num_vars);
    let mut e = DVector::zeros(num_vars);
    for k in 0..num_vars {
        e[k] = 1.0;
        let col = svec(&f(&e)) - &g;
        fm.set_column(k, &col);
        e[k] = 0.0;
    }
    (fm, g)
}

/// Dispatch over the ladder.
pub fn build(
    inst: &BallQcqpInstance,
    kind: RelaxationKind,
    opts: RelaxOptions,
) -> Result<BuiltRelaxation> {
    match kind {
        RelaxationKind::Shor => build_shor_with(inst, false, false, opts.include_linear_rlt),
        RelaxationKind::ShorKron => build_shor_with(inst, true, false, opts.include_linear_rlt),
        RelaxationKind::ShorZhen => build_shor_with(inst, false, true, opts.include_linear_rlt),
        RelaxationKind::BurerCm => build_burer(inst),
        RelaxationKind::ExactM2 => build_exact_m2(inst),
        RelaxationKind::Moment2 => build_moment2(inst),
    }
}

/// Shor relaxation with optional Kronecker / Zhen strengthenings.
pub fn build_shor(
    inst: &BallQcqpInstance,
    with_kron: bool,
    with_zhen: bool,
) -> Result<BuiltRelaxation> {
    build_shor_with(inst, with_kron, with_zhen, false)
}

fn build_shor_with(
    inst: &BallQcqpInstance,
    with_kron: bool,
    with_zhen: bool,
    with_linear_rlt: bool,
) -> Result<BuiltRelaxation> {
    let n = inst.n();
    let m = inst.m();
    let lx = svec_len(n);
    let nu = lx + n;
    let mut sys = AffineConeSystem::new(nu);

    // Objective <A, X> + 2 b^T x + c0 over u = (svec(X), x).
    let obj = inst.objective();
    let mut c = DVector::zeros(nu);
    c.rows_mut(0, lx).copy_from(&svec(&obj.a));
    for k in 0..n {
        c[lx + k] = 2.0 * obj.b[k];
    }
    sys.objective = c;
    sys.obj_offset = obj.c0;

    // [[X, x], [x^T, 1]] >= 0.
    let (f, mut g) = probe_sym_affine(nu, |u| {
        let (x_mat, x) = split_shor_vars(u, n);
        let mut mm = SymMatrix::zeros(n + 1);
        for i in 0..n {
            for j in i..n {
                mm.set_sym(i, j, x_mat.get(i, j));
            }
            mm.set_sym(i, n, x[i]);
        }
        mm
    });
    g[crate::solver::svec_index(n + 1, n, n)] += 1.0;
    sys.push_constraint(f, g, SlackCone::Psd(n + 1));

    // Trace-ball rows r_i^2 - tr(X) + 2 c_i^T x - ||c_i||^2 >= 0.
    for i in 0..m {
        let ci = inst.center(i);
        let ri = inst.radius(i);
        let mut row = DMatrix::zeros(1, nu);
        for k in 0..n {
            row[(0, crate::solver::svec_index(n, k, k))] = -1.0;
            row[(0, lx + k)] = 2.0 * ci[k];
        }
        let off = DVector::from_vec(vec![ri * ri - ci.norm_squared()]);
        sys.push_constraint(row, off, SlackCone::Nonneg);
    }

    if with_linear_rlt {
        // Two-sided products of ball pairs:
        // -r_i r_j <= tr(X) - (c_i + c_j)^T x + c_i^T c_j <= r_i r_j.
        for i in 0..m {
            for j in (i + 1)..m {
                let ci = inst.center(i);
                let cj = inst.center(j);
                let rr = inst.radius(i) * inst.radius(j);
                let dot_cc = ci.dot(cj);
                for sign in [1.0, -1.0] {
                    let mut row = DMatrix::zeros(1, nu);
                    for k in 0..n {
                        row[(0, crate::solver::svec_index(n, k, k))] = -sign;
                        row[(0, lx + k)] = sign * (ci[k] + cj[k]);
                    }
                    let off = DVector::from_vec(vec![rr - sign * dot_cc]);
                    sys.push_constraint(row, off, SlackCone::Nonneg);
                }
            }
        }
    }

    if with_kron {
        for i in 0..m {
            for j in (i + 1)..m {
                let (f, g) = probe_sym_affine(nu, |u| {
                    let (x_mat, x) = split_shor_vars(u, n);
                    kron_map(&x_mat, &x, inst, i, j).expect("valid pair")
                });
                sys.push_constraint(f, g, SlackCone::Psd((n + 1) * (n + 1)));
            }
        }
    }

    if with_zhen {
        for i in 0..m {
            for j in (i + 1)..m {
                let (f, g) = probe_sym_affine(nu, |u| {
                    let (x_mat, x) = split_shor_vars(u, n);
                    zhen_map(&x_mat, &x, inst, i, j).expect("valid pair")
                });
                sys.push_constraint(f, g, SlackCone::Psd(2 * n));
            }
        }
    }

    let program = canonicalize(&sys)?;
    let kind = match (with_kron, with_zhen) {
        (true, _) => RelaxationKind::ShorKron,
        (false, true) => RelaxationKind::ShorZhen,
        _ => RelaxationKind::Shor,
    };
    Ok(BuiltRelaxation { kind, system: sys, program, decode: Decode::ShorPair { n } })
}

/// The lifted relaxation: `Z >= 0`, `<Q, Z> = 0`, `P Z d_i` in the
/// second-order cone for every ball, all pairwise `d_i^T Z d_j >= 0`
/// (diagonal included), and the corner normalized to one.
pub fn build_burer(inst: &BallQcqpInstance) -> Result<BuiltRelaxation> {
    if inst.m() < 2 {
        return Err(Error::Config("lifted relaxation needs at least two balls".into()));
    }
    let mut sys = burer_base(inst);
    let s = structure_matrices(inst);
    sys.push_equality(svec(&s.q), 0.0);
    for i in 0..inst.m() {
        for j in i..inst.m() {
            sys.push_constraint(
                pair_row(&s.d[i], &s.d[j], sys.num_vars),
                DVector::zeros(1),
                SlackCone::Nonneg,
            );
        }
    }
    let program = canonicalize(&sys)?;
    Ok(BuiltRelaxation {
        kind: RelaxationKind::BurerCm,
        system: sys,
        program,
        decode: Decode::Lifted { n: inst.n() },
    })
}

/// The exact two-ball variant: `<Q, Z> >= 0` and `d1^T Z d2 = 0`.
pub fn build_exact_m2(inst: &BallQcqpInstance) -> Result<BuiltRelaxation> {
    if inst.m() != 2 {
        return Err(Error::Config(format!(
            "exact-m2 applies to exactly two balls, instance has m = {}",
            inst.m()
        )));
    }
    let mut sys = burer_base(inst);
    let s = structure_matrices(inst);
    let nu = sys.num_vars;
    sys.push_constraint(
        DMatrix::from_row_slice(1, nu, svec(&s.q).as_slice()),
        DVector::zeros(1),
        SlackCone::Nonneg,
    );
    sys.push_equality(
        pair_row(&s.d[0], &s.d[1], nu).row(0).transpose().clone_owned(),
        0.0,
    );
    let program = canonicalize(&sys)?;
    Ok(BuiltRelaxation {
        kind: RelaxationKind::ExactM2,
        system: sys,
        program,
        decode: Decode::Lifted { n: inst.n() },
    })
}

/// Shared part of the lifted builders: variables `svec(Z)`, the PSD block,
/// the corner normalization, the SOC-RLT constraints, and the objective.
fn burer_base(inst: &BallQcqpInstance) -> AffineConeSystem {
    let n = inst.n();
    let dim = n + 2;
    let nu = svec_len(dim);
    let mut sys = AffineConeSystem::new(nu);

    // Objective <C, Z> with C carrying A on the x-block and b on the
    // (x, x0) border, so <C, Z> = <A, X> + 2 b^T x.
    let obj = inst.objective();
    let mut cmat = SymMatrix::zeros(dim);
    for i in 0..n {
        for j in i..n {
            cmat.set_sym(i, j, obj.a.get(i, j));
        }
        cmat.set_sym(i, n + 1, obj.b[i]);
    }
    sys.objective = svec(&cmat);
    sys.obj_offset = obj.c0;

    // Z itself is PSD.
    sys.push_constraint(DMatrix::identity(nu, nu), DVector::zeros(nu), SlackCone::Psd(dim));

    // Corner normalization.
    let mut corner = DVector::zeros(nu);
    corner[crate::solver::svec_index(dim, dim - 1, dim - 1)] = 1.0;
    sys.push_equality(corner, 1.0);

    // SOC-RLT blocks P Z d_i in L^{n+2}.
    let s = structure_matrices(inst);
    for i in 0..inst.m() {
        let mut f = DMatrix::zeros(dim, nu);
        let mut col = 0usize;
        for b in 0..dim {
            for a in b..dim {
                let scale = if a == b { 1.0 } else { 1.0 / crate::solver::SQRT_2 };
                for r in 0..dim {
                    let mut coef = s.p[(r, a)] * s.d[i][b];
                    if a != b {
                        coef += s.p[(r, b)] * s.d[i][a];
                    }
                    f[(r, col)] += scale * coef;
                }
                col += 1;
            }
        }
        sys.push_constraint(f, DVector::zeros(dim), SlackCone::Soc(SocConvention::LastCoord));
    }
    sys
}

/// Row for the scalar `d_i^T Z d_j` as a functional of `svec(Z)`.
fn pair_row(di: &DVector<f64>, dj: &DVector<f64>, nu: usize) -> DMatrix<f64> {
    let outer = di * dj.transpose();
    let symm = SymMatrix::from_dense(0.5 * (&outer + outer.transpose())).expect("finite outer");
    DMatrix::from_row_slice(1, nu, svec(&symm).as_slice())
}

/// Monomial exponent vectors of total degree at most `max_deg`, graded
/// lexicographic (degree first, then lexicographic descending on the
/// exponent of the earliest variable).
pub fn monomials_up_to(n: usize, max_deg: u8) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut current = vec![0u8; n];
    for deg in 0..=max_deg {
        emit_monomials(n, 0, deg, &mut current, &mut out);
    }
    out
}

fn emit_monomials(
    n: usize,
    pos: usize,
    remaining: u8,
    current: &mut Vec<u8>,
    out: &mut Vec<Vec<u8>>,
) {
    if pos == n - 1 {
        current[pos] = remaining;
        out.push(current.clone());
        current[pos] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        current[pos] = e;
        emit_monomials(n, pos + 1, remaining - e, current, out);
        current[pos] = 0;
    }
}

/// Sparse polynomial as (exponent vector, coefficient) pairs.
type Poly = Vec<(Vec<u8>, f64)>;

/// `g_i(x) = (r_i^2 - ||c_i||^2) + 2 c_i^T x - sum_k x_k^2`.
fn ball_poly(inst: &BallQcqpInstance, i: usize) -> Poly {
    let n = inst.n();
    let ci = inst.center(i);
    let ri = inst.radius(i);
    let mut terms = vec![(vec![0u8; n], ri * ri - ci.norm_squared())];
    for k in 0..n {
        if ci[k] != 0.0 {
            let mut alpha = vec![0u8; n];
            alpha[k] = 1;
            terms.push((alpha, 2.0 * ci[k]));
        }
        let mut alpha = vec![0u8; n];
        alpha[k] = 2;
        terms.push((alpha, -1.0));
    }
    terms
}

fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    let mut acc: HashMap<Vec<u8>, f64> = HashMap::new();
    for (ea, ca) in a {
        for (eb, cb) in b {
            let alpha: Vec<u8> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
            *acc.entry(alpha).or_insert(0.0) += ca * cb;
        }
    }
    let mut out: Poly = acc.into_iter().collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// The full level-2 moment relaxation: pseudomoments of degree up to 4,
/// the degree-2 moment matrix, one localizing matrix per ball, and the
/// pairwise scalar products.
pub fn build_moment2(inst: &BallQcqpInstance) -> Result<BuiltRelaxation> {
    const MAX_N: usize = 10;
    let n = inst.n();
    if n > MAX_N {
        return Err(Error::Size(format!(
            "moment relaxation capped at n = {MAX_N}, instance has n = {n}"
        )));
    }
    let m = inst.m();
    let monomials = monomials_up_to(n, 4);
    let index: HashMap<Vec<u8>, usize> = monomials
        .iter()
        .enumerate()
        .map(|(i, m)| (m.clone(), i))
        .collect();
    let nu = monomials.len();
    let deg2_count = monomials.iter().filter(|mm| degree(mm) <= 2).count();
    let deg1_count = n + 1;

    let mut sys = AffineConeSystem::new(nu);

    // Objective M(q).
    let obj = inst.objective();
    let mut c = DVector::zeros(nu);
    for k in 0..n {
        let mut alpha = vec![0u8; n];
        alpha[k] = 1;
        c[index[&alpha]] += 2.0 * obj.b[k];
        for l in k..n {
            let mut alpha = vec![0u8; n];
            alpha[k] += 1;
            alpha[l] += 1;
            let coef = if k == l { obj.a.get(k, k) } else { 2.0 * obj.a.get(k, l) };
            c[index[&alpha]] += coef;
        }
    }
    sys.objective = c;
    sys.obj_offset = obj.c0;

    // M(1) = 1.
    let mut one = DVector::zeros(nu);
    one[index[&vec![0u8; n]]] = 1.0;
    sys.push_equality(one, 1.0);

    // Degree-2 moment matrix M2(y) >= 0. The graded order makes the first
    // deg2_count monomials exactly the degree <= 2 basis.
    {
        let rows = svec_len(deg2_count);
        let mut f = DMatrix::zeros(rows, nu);
        let mut row = 0usize;
        for b in 0..deg2_count {
            for a in b..deg2_count {
                let gamma: Vec<u8> = monomials[a]
                    .iter()
                    .zip(&monomials[b])
                    .map(|(x, y)| x + y)
                    .collect();
                let scale = if a == b { 1.0 } else { crate::solver::SQRT_2 };
                f[(row, index[&gamma])] += scale;
                row += 1;
            }
        }
        sys.push_constraint(f, DVector::zeros(rows), SlackCone::Psd(deg2_count));
    }

    // Localizing matrices M1(g_i y) >= 0.
    for i in 0..m {
        let gi = ball_poly(inst, i);
        let rows = svec_len(deg1_count);
        let mut f = DMatrix::zeros(rows, nu);
        let mut row = 0usize;
        for b in 0..deg1_count {
            for a in b..deg1_count {
                let scale = if a == b { 1.0 } else { crate::solver::SQRT_2 };
                for (e, coef) in &gi {
                    let gamma: Vec<u8> = monomials[a]
                        .iter()
                        .zip(&monomials[b])
                        .zip(e)
                        .map(|((x, y), z)| x + y + z)
                        .collect();
                    f[(row, index[&gamma])] += scale * coef;
                }
                row += 1;
            }
        }
        sys.push_constraint(f, DVector::zeros(rows), SlackCone::Psd(deg1_count));
    }

    // Scalar products M(g_i g_j) >= 0 for i <= j.
    for i in 0..m {
        let gi = ball_poly(inst, i);
        for j in i..m {
            let gj = ball_poly(inst, j);
            let prod = poly_mul(&gi, &gj);
            let mut row = DMatrix::zeros(1, nu);
            for (e, coef) in &prod {
                row[(0, index[e])] += coef;
            }
            sys.push_constraint(row, DVector::zeros(1), SlackCone::Nonneg);
        }
    }

    let program = canonicalize(&sys)?;
    Ok(BuiltRelaxation {
        kind: RelaxationKind::Moment2,
        system: sys,
        program,
        decode: Decode::Moment { n, monomials },
    })
}

fn degree(alpha: &[u8]) -> u8 {
    alpha.iter().sum()
}

/// Linear-functional maximization over the section `{tr Z = 1}` of the
/// two-ball cone (no corner normalization), used to hunt extreme rays.
pub fn build_c2_section(inst: &BallQcqpInstance, objective: &SymMatrix) -> Result<BuiltRelaxation> {
    if inst.m() != 2 {
        return Err(Error::Config("the section program is defined for m = 2".into()));
    }
    let n = inst.n();
    let dim = n + 2;
    if objective.dim() != dim {
        return Err(Error::Shape(format!(
            "section objective must be {dim}x{dim}, got {}",
            objective.dim()
        )));
    }
    let mut sys = burer_base(inst);
    // burer_base normalizes the corner; the section normalizes the trace
    // instead so no extreme ray of the cone is cut off.
    sys.eq_rows.clear();
    let s = structure_matrices(inst);
    sys.push_equality(svec(&s.q), 0.0);
    sys.push_equality(svec(&SymMatrix::identity(dim)), 1.0);
    sys.push_constraint(
        pair_row(&s.d[0], &s.d[1], sys.num_vars),
        DVector::zeros(1),
        SlackCone::Nonneg,
    );
    // Maximize <objective, Z>.
    sys.objective = -svec(objective);
    sys.obj_offset = 0.0;
    let program = canonicalize(&sys)?;
    Ok(BuiltRelaxation {
        kind: RelaxationKind::BurerCm,
        system: sys,
        program,
        decode: Decode::Lifted { n },
    })
}
