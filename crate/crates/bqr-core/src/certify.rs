//! Eigenvalue-level certification of the relaxation structure.
//!
//! Every check here re-verifies memberships from raw matrices by spectral
//! decomposition and norm evaluation; nothing trusts the solver's own
//! residuals. Checks report a [`CertReport`] whose `worst_margin` is
//! normalized so that `pass <=> worst_margin >= -tol`; hypothesis
//! violations come back as [`Error::Precondition`] instead of a failed
//! report.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::instance::{BallQcqpInstance, Objective};
use crate::liftmaps::{
    arrow, kron_map_hom, lift_point, structure_matrices, zhen_map, KronVectorView, LiftedMatrix,
};
use crate::matcone::{kron, soc_contains, spectral, ConeTol, SocConvention, SymMatrix};
use crate::relaxations::{build_c2_section, build_moment2, MomentSolution};
use crate::solver::{SolveResult, SolverSettings};
use crate::{Error, Result};

/// Eigenvalues count as nonzero above this fraction of the largest one.
pub const RANK_REL_THRESHOLD: f64 = 1e-6;

/// Outcome of one certification check.
#[derive(Debug, Clone, Serialize)]
pub struct CertReport {
    pub name: String,
    pub pass: bool,
    /// Normalized so that `pass <=> worst_margin >= -tol` for the tolerance
    /// recorded in `details`.
    pub worst_margin: f64,
    pub details: String,
}

impl CertReport {
    fn from_margins(name: &str, tol: f64, margins: &[(String, f64)]) -> CertReport {
        let (worst_name, worst) = margins
            .iter()
            .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite margins"))
            .map(|(n, v)| (n.clone(), *v))
            .unwrap_or_else(|| ("none".into(), f64::INFINITY));
        CertReport {
            name: name.to_string(),
            pass: worst >= -tol,
            worst_margin: worst,
            details: format!("tol={tol:e}; worst={worst_name}"),
        }
    }
}

/// Normalized membership margins of `Z` in the lifted cone: PSD, the trace
/// tie `<Q, Z> = 0`, every `P Z d_i` second-order membership, and the
/// pairwise scalars `d_i^T Z d_j >= 0` (diagonal included). Optionally the
/// corner normalization.
pub fn cm_margins(
    z: &LiftedMatrix,
    inst: &BallQcqpInstance,
    with_corner: bool,
) -> Result<Vec<(String, f64)>> {
    let mut out = pair_margins_impl(z, inst, None)?;
    if with_corner {
        out.push(("corner".into(), -(z.corner() - 1.0).abs()));
    }
    Ok(out)
}

/// Margins of the two-ball pair cone: PSD, `<Q, Z> = 0`, the two
/// second-order memberships, and the single cross scalar.
pub fn pair_cone_margins(
    z: &LiftedMatrix,
    inst: &BallQcqpInstance,
    i: usize,
    j: usize,
) -> Result<Vec<(String, f64)>> {
    pair_margins_impl(z, inst, Some((i, j)))
}

fn pair_margins_impl(
    z: &LiftedMatrix,
    inst: &BallQcqpInstance,
    pair: Option<(usize, usize)>,
) -> Result<Vec<(String, f64)>> {
    let s = structure_matrices(inst);
    let zm = z.matrix();
    let z_scale = 1.0 + zm.frobenius_norm();
    let mut out = Vec::new();

    let spec = spectral(zm)?;
    out.push(("psd".into(), spec.min_eigenvalue() / z_scale));

    let qz = s.q.inner(zm);
    out.push(("q-trace".into(), -qz.abs() / z_scale));

    let balls: Vec<usize> = match pair {
        Some((i, j)) => vec![i, j],
        None => (0..inst.m()).collect(),
    };
    for &i in &balls {
        let pzd = &s.p * zm.as_matrix() * &s.d[i];
        let (_, margin) = soc_contains(
            pzd.as_slice(),
            SocConvention::LastCoord,
            ConeTol { abs: 0.0, rel: 0.0 },
        );
        out.push((format!("soc-rlt[{i}]"), margin / (1.0 + pzd.norm())));
    }
    match pair {
        Some((i, j)) => {
            let val = s.d[i].dot(&(zm.as_matrix() * &s.d[j]));
            let scale = 1.0 + s.d[i].norm() * s.d[j].norm() * zm.frobenius_norm();
            out.push((format!("lin-rlt[{i},{j}]"), val / scale));
        }
        None => {
            for i in 0..inst.m() {
                for j in i..inst.m() {
                    let val = s.d[i].dot(&(zm.as_matrix() * &s.d[j]));
                    let scale = 1.0 + s.d[i].norm() * s.d[j].norm() * zm.frobenius_norm();
                    out.push((format!("lin-rlt[{i},{j}]"), val / scale));
                }
            }
        }
    }
    Ok(out)
}

/// The sign and boundary equivalences between `w^T Q w` and the
/// second-order membership of `P w`.
pub fn fact_qp_check(w: &DVector<f64>, tol: ConeTol) -> CertReport {
    let k = w.len();
    assert!(k >= 3, "lifted vector needs length n + 2 >= 3");
    let n = k - 2;
    let x_norm_sq: f64 = w.rows(0, n).norm_squared();
    let qval = 2.0 * (w[n] * w[n + 1] - x_norm_sq);
    let mut pw = DVector::zeros(k);
    for i in 0..n {
        pw[i] = 2.0 * w[i];
    }
    pw[n] = w[n] - w[n + 1];
    pw[n + 1] = w[n] + w[n + 1];

    let tol_q = tol.threshold(w.norm_squared());
    let (in_pos, m_pos) = soc_contains(pw.as_slice(), SocConvention::LastCoord, tol);
    let neg: Vec<f64> = pw.iter().map(|v| -v).collect();
    let (in_neg, m_neg) = soc_contains(&neg, SocConvention::LastCoord, tol);
    let member = in_pos || in_neg;
    let sign_ok = (qval >= -tol_q) == member;

    let tol_p = tol.threshold(pw.norm());
    let closest = m_pos.abs().min(m_neg.abs());
    let boundary_ok = (qval.abs() <= tol_q) == (closest <= tol_p);

    let confidence = qval.abs().min(closest);
    CertReport {
        name: "fact-qp".into(),
        pass: sign_ok && boundary_ok,
        worst_margin: if sign_ok && boundary_ok { confidence } else { -confidence },
        details: format!(
            "qval={qval:e}, soc margins ({m_pos:e}, {m_neg:e}), sign_ok={sign_ok}, boundary_ok={boundary_ok}"
        ),
    }
}

/// Rank-one lifts are cone members exactly when the point is feasible.
pub fn rank_one_feasibility(x: &DVector<f64>, inst: &BallQcqpInstance, tol: f64) -> Result<CertReport> {
    let z = LiftedMatrix::rank_one(x);
    let margins = cm_margins(&z, inst, false)?;
    let worst_member = margins
        .iter()
        .map(|(_, v)| *v)
        .fold(f64::INFINITY, f64::min);
    let residuals = inst.ball_residuals(x)?;
    let worst_res = residuals
        .iter()
        .enumerate()
        .map(|(i, &g)| g / (1.0 + inst.radius(i) * inst.radius(i)))
        .fold(f64::INFINITY, f64::min);
    let member = worst_member >= -tol;
    let in_s = worst_res >= -tol;
    let agree = member == in_s;
    let confidence = worst_member.abs().min(worst_res.abs());
    Ok(CertReport {
        name: "rank-one".into(),
        pass: agree,
        worst_margin: if agree { confidence } else { -confidence },
        details: format!(
            "member margin {worst_member:e}, residual margin {worst_res:e}, tol={tol:e}"
        ),
    })
}

fn require_pair_membership(
    z: &LiftedMatrix,
    inst: &BallQcqpInstance,
    i: usize,
    j: usize,
    tol: f64,
) -> Result<()> {
    let margins = pair_cone_margins(z, inst, i, j)?;
    for (name, margin) in &margins {
        if *margin < -tol {
            return Err(Error::Precondition(format!(
                "input violates pair-cone membership: {name} margin {margin:e} < -{tol:e}"
            )));
        }
    }
    Ok(())
}

/// Kronecker domination: pair-cone members project onto PSD Kronecker RLT
/// blocks. The map is evaluated in homogenized form at the corner of `Z`,
/// so the check is scale-correct on the whole cone.
pub fn kron_domination(
    z: &LiftedMatrix,
    inst: &BallQcqpInstance,
    i: usize,
    j: usize,
    tol: f64,
) -> Result<CertReport> {
    require_pair_membership(z, inst, i, j, tol)?;
    let (x_mat, x) = z.project();
    let k = kron_map_hom(&x_mat, &x, z.corner(), inst, i, j)?;
    let spec = spectral(&k)?;
    let scale = 1.0 + k.frobenius_norm();
    let margin = spec.min_eigenvalue() / scale;
    Ok(CertReport {
        name: format!("kron-dom[{i},{j}]"),
        pass: margin >= -tol,
        worst_margin: margin,
        details: format!("min eig {:e}, scale {scale:e}, tol={tol:e}", spec.min_eigenvalue()),
    })
}

/// Zhen redundancy: normalized pair-cone members satisfy the two-norm
/// block.
pub fn zhen_domination(
    z: &LiftedMatrix,
    inst: &BallQcqpInstance,
    i: usize,
    j: usize,
    tol: f64,
) -> Result<CertReport> {
    require_pair_membership(z, inst, i, j, tol)?;
    if (z.corner() - 1.0).abs() > tol {
        return Err(Error::Precondition(format!(
            "corner must be 1 within {tol:e}, got {}",
            z.corner()
        )));
    }
    let (x_mat, x) = z.project();
    let zb = zhen_map(&x_mat, &x, inst, i, j)?;
    let spec = spectral(&zb)?;
    let scale = 1.0 + zb.frobenius_norm();
    let margin = spec.min_eigenvalue() / scale;
    Ok(CertReport {
        name: format!("zhen-dom[{i},{j}]"),
        pass: margin >= -tol,
        worst_margin: margin,
        details: format!("min eig {:e}, scale {scale:e}, tol={tol:e}", spec.min_eigenvalue()),
    })
}

/// The scalar pieces of one SOC-RLT constraint at a normalized `Z`:
/// `P Z d_i = (xi + 2 delta x; beta - delta; beta + delta)`.
#[derive(Debug, Clone)]
pub struct SocRltComponents {
    pub xi: DVector<f64>,
    pub beta: f64,
    pub delta: f64,
    pub report: CertReport,
}

pub fn socrlt_components(
    z: &LiftedMatrix,
    inst: &BallQcqpInstance,
    i: usize,
    tol: f64,
) -> Result<SocRltComponents> {
    if (z.corner() - 1.0).abs() > tol {
        return Err(Error::Precondition(format!(
            "corner must be 1 within {tol:e}, got {}",
            z.corner()
        )));
    }
    if i >= inst.m() {
        return Err(Error::Config(format!("ball index {i} out of range")));
    }
    let (x_mat, x) = z.project();
    let t = z.t_entry();
    let ztx = z.tx_column();
    let ztt = z.tt_entry();
    let ci = inst.center(i);
    let ai = inst.radius(i) * inst.radius(i) - ci.norm_squared();

    let delta = 2.0 * x.dot(ci) - t + ai;
    let beta = 2.0 * ztx.dot(ci) - ztt + t * ai;
    let xi = (x_mat.as_matrix() * ci) * 4.0 - &x * (4.0 * x.dot(ci)) - &ztx * 2.0 + &x * (2.0 * t);

    let head = &xi + &x * (2.0 * delta);
    let lhs = head.norm_squared();
    let soc_margin = (4.0 * beta * delta - lhs) / (1.0 + lhs);
    let margins = vec![
        ("beta".into(), beta),
        ("delta".into(), delta),
        ("soc-equivalent".into(), soc_margin),
    ];
    let report = CertReport::from_margins(&format!("soc-rlt-components[{i}]"), tol, &margins);
    Ok(SocRltComponents { xi, beta, delta, report })
}

/// The trace and matrix-order consequences of one ball constraint.
pub fn trace_rlt_check(
    z: &LiftedMatrix,
    inst: &BallQcqpInstance,
    i: usize,
    tol: f64,
) -> Result<CertReport> {
    let zm = z.matrix();
    let z_scale = 1.0 + zm.frobenius_norm();
    if (z.corner() - 1.0).abs() > tol {
        return Err(Error::Precondition(format!(
            "corner must be 1 within {tol:e}, got {}",
            z.corner()
        )));
    }
    let spec = spectral(zm)?;
    if spec.min_eigenvalue() < -tol * z_scale {
        return Err(Error::Precondition(format!(
            "Z must be PSD within {tol:e}, min eig {:e}",
            spec.min_eigenvalue()
        )));
    }
    let s = structure_matrices(inst);
    let qz = s.q.inner(zm);
    if qz.abs() > tol * z_scale {
        return Err(Error::Precondition(format!(
            "Z must satisfy <Q, Z> = 0 within {tol:e}, got {qz:e}"
        )));
    }
    let (x_mat, x) = z.project();
    let ci = inst.center(i);
    let ri2 = inst.radius(i) * inst.radius(i);
    let n = inst.n();
    let b = SymMatrix::from_fn(n, |a, bb| {
        x_mat.get(a, bb) - x[a] * ci[bb] - ci[a] * x[bb] + ci[a] * ci[bb]
    });
    let trace_margin = (ri2 - (0..n).map(|k| b.get(k, k)).sum::<f64>()) / (1.0 + ri2);
    let shifted = SymMatrix::from_fn(n, |a, bb| {
        let eye = if a == bb { ri2 } else { 0.0 };
        eye - b.get(a, bb)
    });
    let order_margin = spectral(&shifted)?.min_eigenvalue() / (1.0 + ri2);
    let margins = vec![
        ("trace".into(), trace_margin),
        ("matrix-order".into(), order_margin),
    ];
    Ok(CertReport::from_margins(&format!("trace-rlt[{i}]"), tol, &margins))
}

/// The composite 2n x 2n PSD block built from the pair `(i, j)` shifts of
/// `X`, valid whenever `Z` is PSD with unit corner.
pub fn implied_psd_check(
    z: &LiftedMatrix,
    inst: &BallQcqpInstance,
    i: usize,
    j: usize,
    tol: f64,
) -> Result<CertReport> {
    if (z.corner() - 1.0).abs() > tol {
        return Err(Error::Precondition("corner must be 1".into()));
    }
    let spec = spectral(z.matrix())?;
    if spec.min_eigenvalue() < -tol * (1.0 + z.matrix().frobenius_norm()) {
        return Err(Error::Precondition("Z must be PSD".into()));
    }
    let (x_mat, x) = z.project();
    let n = inst.n();
    let shift = |ca: &DVector<f64>, cb: &DVector<f64>, a: usize, bb: usize| {
        x_mat.get(a, bb) - x[a] * cb[bb] - ca[a] * x[bb] + ca[a] * cb[bb]
    };
    let ci = inst.center(i);
    let cj = inst.center(j);
    let big = SymMatrix::from_fn(2 * n, |a, bb| {
        let (ca, ia) = if a < n { (ci, a) } else { (cj, a - n) };
        let (cb, ib) = if bb < n { (ci, bb) } else { (cj, bb - n) };
        shift(ca, cb, ia, ib)
    });
    let margin = spectral(&big)?.min_eigenvalue() / (1.0 + big.frobenius_norm());
    Ok(CertReport {
        name: format!("implied-psd[{i},{j}]"),
        pass: margin >= -tol,
        worst_margin: margin,
        details: format!("tol={tol:e}"),
    })
}

/// Weights and points realizing a rank-r decomposition into lifted
/// rank-one atoms.
#[derive(Debug, Clone)]
pub struct DecompositionCertificate {
    pub weights: Vec<f64>,
    pub points: Vec<DVector<f64>>,
    pub count: usize,
}

impl DecompositionCertificate {
    pub fn new(weights: Vec<f64>, points: Vec<DVector<f64>>) -> Result<Self> {
        if weights.len() != points.len() {
            return Err(Error::Shape(format!(
                "{} weights vs {} points",
                weights.len(),
                points.len()
            )));
        }
        if weights.iter().any(|&a| !(a > 0.0)) {
            return Err(Error::Config("weights must be strictly positive".into()));
        }
        let count = weights.len();
        Ok(DecompositionCertificate { weights, points, count })
    }

    /// `sum_i alpha_i w_i w_i^T` over the lifted atoms.
    pub fn reconstruct(&self) -> LiftedMatrix {
        let n = self.points[0].len();
        let mut acc = DMatrix::zeros(n + 2, n + 2);
        for (a, x) in self.weights.iter().zip(&self.points) {
            let w = lift_point(x);
            acc += &w * w.transpose() * *a;
        }
        LiftedMatrix::new(SymMatrix::from_dense(acc).expect("finite atoms")).expect("n + 2")
    }
}

/// Numerical rank by the relative eigenvalue threshold.
pub fn rank_estimate(z: &LiftedMatrix) -> Result<usize> {
    let spec = spectral(z.matrix())?;
    let max = spec.values[0];
    if max <= 0.0 {
        return Ok(0);
    }
    Ok(spec.values.iter().filter(|&&v| v > RANK_REL_THRESHOLD * max).count())
}

/// Verifies a decomposition certificate against the non-rank-one
/// extreme-ray structure: reconstruction, a strictly interior first atom,
/// the remaining atoms on the first sphere, and `P Z d_2` on the cone
/// boundary.
pub fn verify_decomposition(
    zbar: &LiftedMatrix,
    cert: &DecompositionCertificate,
    inst: &BallQcqpInstance,
    tol: f64,
) -> Result<CertReport> {
    if inst.m() != 2 {
        return Err(Error::Precondition("decomposition structure applies to m = 2".into()));
    }
    let r = rank_estimate(zbar)?;
    if r < 2 {
        return Err(Error::Precondition(format!(
            "theorem applies to rank > 1, estimated rank {r}"
        )));
    }
    let mut margins: Vec<(String, f64)> = Vec::new();

    let recon = cert.reconstruct();
    let z_norm = zbar.matrix().frobenius_norm().max(f64::MIN_POSITIVE);
    let err = zbar.matrix().sub(recon.matrix()).frobenius_norm() / z_norm;
    margins.push(("reconstruction".into(), -err));

    let res1 = inst.ball_residuals(&cert.points[0])?;
    let strict = res1
        .iter()
        .enumerate()
        .map(|(i, &g)| g / (1.0 + inst.radius(i) * inst.radius(i)))
        .fold(f64::INFINITY, f64::min);
    // Strict interiority: margin positive beyond the tolerance.
    margins.push(("interior-atom".into(), strict - 2.0 * tol));

    let c1 = inst.center(0);
    let r1 = inst.radius(0);
    for (k, x) in cert.points.iter().enumerate().skip(1) {
        let dist = (x - c1).norm();
        margins.push((format!("sphere-atom[{k}]"), -(dist - r1).abs() / (1.0 + r1)));
    }

    let s = structure_matrices(inst);
    let pzd2 = &s.p * zbar.matrix().as_matrix() * &s.d[1];
    let (_, soc_margin) = soc_contains(
        pzd2.as_slice(),
        SocConvention::LastCoord,
        ConeTol { abs: 0.0, rel: 0.0 },
    );
    margins.push(("pzd2-boundary".into(), -soc_margin.abs() / (1.0 + pzd2.norm())));

    margins.push((
        "atom-count".into(),
        if cert.count == r { 0.0 } else { -1.0 },
    ));

    Ok(CertReport::from_margins("decomposition", tol, &margins))
}

/// Best-effort decomposition of a rank-r cone member into lifted rank-one
/// atoms within its numerical range space. The returned certificate has
/// already passed [`verify_decomposition`]; anything else comes back as
/// [`Error::DecompositionNotFound`].
pub fn decompose_extreme_ray(
    zbar: &LiftedMatrix,
    inst: &BallQcqpInstance,
    tol: f64,
) -> Result<DecompositionCertificate> {
    if inst.m() != 2 {
        return Err(Error::Precondition("decomposition applies to m = 2".into()));
    }
    {
        let margins = cm_margins(zbar, inst, false)?;
        for (name, margin) in &margins {
            if *margin < -tol {
                return Err(Error::Precondition(format!(
                    "input not in the two-ball cone: {name} margin {margin:e}"
                )));
            }
        }
    }
    let r = rank_estimate(zbar)?;
    if r < 2 {
        return Err(Error::Precondition(format!("rank {r} input; atoms need rank >= 2")));
    }
    let spec = spectral(zbar.matrix())?;
    let dim = zbar.matrix().dim();
    // Range-space factor B with Z ~ B B^T.
    let mut basis = DMatrix::zeros(dim, r);
    for k in 0..r {
        let lam = spec.values[k].max(0.0).sqrt();
        basis.set_column(k, &(spec.vectors.column(k) * lam));
    }
    let s = structure_matrices(inst);
    let d1 = &s.d[0];

    let atoms = if r == 2 {
        search_rotation_2d(&basis, &s.q, d1)
    } else {
        search_rotation_nd(&basis, &s.q, d1, r)
    };
    let atoms = atoms.ok_or_else(|| {
        Error::DecompositionNotFound("rotation search found no consistent atom set".into())
    })?;

    // Scale each atom to unit corner: alpha = corner^2.
    let n = dim - 2;
    let mut weights = Vec::with_capacity(r);
    let mut points = Vec::with_capacity(r);
    for u in &atoms {
        let corner = u[n + 1];
        if corner.abs() < 1e-9 {
            return Err(Error::DecompositionNotFound(
                "atom with vanishing homogenization coordinate".into(),
            ));
        }
        let sgn = corner.signum();
        let w = u * sgn;
        weights.push(w[n + 1] * w[n + 1]);
        points.push(w.rows(0, n) / w[n + 1]);
    }
    // Interior atom first.
    let mut order: Vec<usize> = (0..r).collect();
    let g1: Vec<f64> = points
        .iter()
        .map(|x| inst.ball_residuals(x).map(|g| g[0]).unwrap_or(f64::NEG_INFINITY))
        .collect();
    order.sort_by(|&a, &b| g1[b].partial_cmp(&g1[a]).expect("finite residuals"));
    let cert = DecompositionCertificate::new(
        order.iter().map(|&k| weights[k]).collect(),
        order.iter().map(|&k| points[k].clone()).collect(),
    )?;

    let report = verify_decomposition(zbar, &cert, inst, tol)?;
    if !report.pass {
        return Err(Error::DecompositionNotFound(format!(
            "candidate certificate failed validation: {}",
            report.details
        )));
    }
    Ok(cert)
}

/// Atom residual: lifted-structure consistency plus first-sphere
/// conditions for all but the interior atom.
fn atom_residuals(cols: &[DVector<f64>], q: &SymMatrix, d1: &DVector<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * cols.len() - 1);
    for (k, u) in cols.iter().enumerate() {
        let qu = q.quad_form(u) / (1.0 + u.norm_squared());
        out.push(qu);
        if k > 0 {
            out.push(d1.dot(u) / (1.0 + d1.norm() * u.norm()));
        }
    }
    out
}

fn residual_norm_sq(cols: &[DVector<f64>], q: &SymMatrix, d1: &DVector<f64>) -> f64 {
    atom_residuals(cols, q, d1).iter().map(|v| v * v).sum()
}

/// Exhaustive angle scan plus golden-section polish for rank 2.
fn search_rotation_2d(
    basis: &DMatrix<f64>,
    q: &SymMatrix,
    d1: &DVector<f64>,
) -> Option<Vec<DVector<f64>>> {
    let cols_at = |theta: f64| -> Vec<DVector<f64>> {
        let (s, c) = theta.sin_cos();
        let u1 = basis.column(0) * c + basis.column(1) * s;
        let u2 = basis.column(0) * (-s) + basis.column(1) * c;
        vec![u1, u2]
    };
    let f = |theta: f64| residual_norm_sq(&cols_at(theta), q, d1);

    let steps = 720;
    let mut best = (f(0.0), 0.0);
    for k in 1..steps {
        let theta = std::f64::consts::PI * k as f64 / steps as f64;
        let v = f(theta);
        if v < best.0 {
            best = (v, theta);
        }
    }
    // Golden-section refinement around the best grid point.
    let width = std::f64::consts::PI / steps as f64;
    let (mut lo, mut hi) = (best.1 - width, best.1 + width);
    let phi = 0.5 * (3.0 - 5.0f64.sqrt());
    for _ in 0..120 {
        let d = hi - lo;
        let a = lo + phi * d;
        let b = hi - phi * d;
        if f(a) < f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let theta = 0.5 * (lo + hi);
    let cols = cols_at(theta);
    // Both atom orderings are covered by the later interior-first sort.
    Some(cols)
}

/// Gauss-Newton over a Givens-angle parametrization for rank >= 3, with
/// seeded multistart.
fn search_rotation_nd(
    basis: &DMatrix<f64>,
    q: &SymMatrix,
    d1: &DVector<f64>,
    r: usize,
) -> Option<Vec<DVector<f64>>> {
    let pairs: Vec<(usize, usize)> = (0..r)
        .flat_map(|a| ((a + 1)..r).map(move |b| (a, b)))
        .collect();
    let num_angles = pairs.len();
    let cols_at = |angles: &[f64]| -> Vec<DVector<f64>> {
        let mut rot = DMatrix::<f64>::identity(r, r);
        for (idx, &(a, b)) in pairs.iter().enumerate() {
            let (s, c) = angles[idx].sin_cos();
            // Apply the Givens rotation on columns a, b.
            for row in 0..r {
                let va = rot[(row, a)];
                let vb = rot[(row, b)];
                rot[(row, a)] = c * va + s * vb;
                rot[(row, b)] = -s * va + c * vb;
            }
        }
        let prod = basis * rot;
        (0..r).map(|k| prod.column(k).into_owned()).collect()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in 0..24 {
        let mut angles: Vec<f64> = if start == 0 {
            vec![0.0; num_angles]
        } else {
            (0..num_angles)
                .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
                .collect()
        };
        let mut mu = 1e-4;
        for _ in 0..200 {
            let res = atom_residuals(&cols_at(&angles), q, d1);
            let fval: f64 = res.iter().map(|v| v * v).sum();
            if fval < 1e-24 {
                break;
            }
            // Numeric Jacobian.
            let h = 1e-7;
            let mut jac = DMatrix::zeros(res.len(), num_angles);
            for p in 0..num_angles {
                let mut shifted = angles.clone();
                shifted[p] += h;
                let res_h = atom_residuals(&cols_at(&shifted), q, d1);
                for (row, (rh, r0)) in res_h.iter().zip(&res).enumerate() {
                    jac[(row, p)] = (rh - r0) / h;
                }
            }
            let jt = jac.transpose();
            let mut lhs = &jt * &jac;
            for p in 0..num_angles {
                lhs[(p, p)] += mu;
            }
            let rhs = -(&jt * DVector::from_column_slice(&res));
            let step = match lhs.lu().solve(&rhs) {
                Some(s) => s,
                None => break,
            };
            let mut cand = angles.clone();
            for p in 0..num_angles {
                cand[p] += step[p];
            }
            let cand_f = residual_norm_sq(&cols_at(&cand), q, d1);
            if cand_f < fval {
                angles = cand;
                mu = (mu * 0.3).max(1e-12);
            } else {
                mu *= 4.0;
                if mu > 1e8 {
                    break;
                }
            }
        }
        let fval = residual_norm_sq(&cols_at(&angles), q, d1);
        if best.as_ref().map_or(true, |(bf, _)| fval < *bf) {
            best = Some((fval, angles));
        }
    }
    best.map(|(_, angles)| cols_at(&angles))
}

/// The PSD matrix `[[sum a_i e_i I, sum a_i e_i x_i], [., sum a_i e_i |x_i|^2]]`
/// built from a certificate's second-ball residuals, plus the two scalar
/// gates implied by `P Z d_2` membership.
pub fn m_matrix_check(
    cert: &DecompositionCertificate,
    inst: &BallQcqpInstance,
    tol: f64,
) -> Result<CertReport> {
    if inst.m() != 2 {
        return Err(Error::Precondition("the M-matrix argument applies to m = 2".into()));
    }
    let zbar = cert.reconstruct();
    let s = structure_matrices(inst);
    let pzd2 = &s.p * zbar.matrix().as_matrix() * &s.d[1];
    let (inside, soc_margin) = soc_contains(
        pzd2.as_slice(),
        SocConvention::LastCoord,
        ConeTol { abs: tol, rel: tol },
    );
    if !inside {
        return Err(Error::Precondition(format!(
            "P Z d2 outside the cone (margin {soc_margin:e})"
        )));
    }
    let n = inst.n();
    let mut sum_ae = 0.0;
    let mut sum_ae_normsq = 0.0;
    let mut sum_ae_x = DVector::zeros(n);
    for (a, x) in cert.weights.iter().zip(&cert.points) {
        let eta = inst.ball_residuals(x)?[1];
        sum_ae += a * eta;
        sum_ae_normsq += a * eta * x.norm_squared();
        sum_ae_x += x * (a * eta);
    }
    let mut m = SymMatrix::zeros(n + 1);
    for k in 0..n {
        m.set_sym(k, k, sum_ae);
        m.set_sym(k, n, sum_ae_x[k]);
    }
    m.set_sym(n, n, sum_ae_normsq);
    let m_scale = 1.0 + m.frobenius_norm();
    let eig_margin = spectral(&m)?.min_eigenvalue() / m_scale;
    let gate_sum = (sum_ae + sum_ae_normsq) / m_scale;
    let gate_prod = (sum_ae * sum_ae_normsq - sum_ae_x.norm_squared()) / (m_scale * m_scale);
    let margins = vec![
        ("m-psd".into(), eig_margin),
        ("gate-sum".into(), gate_sum),
        ("gate-product".into(), gate_prod),
    ];
    Ok(CertReport::from_margins("m-matrix", tol, &margins))
}

/// The comparison inequality bounding the Kronecker quadratic form below
/// by the weighted second-ball residual.
pub fn compare_kron_inequality(
    x: &DVector<f64>,
    v: &[f64],
    inst: &BallQcqpInstance,
    i: usize,
    j: usize,
    tol: f64,
) -> Result<CertReport> {
    let n = inst.n();
    let view = KronVectorView::new(v, n)?;
    let ri = inst.radius(i);
    let rj = inst.radius(j);
    let res = inst.ball_residuals(x)?;
    let dist_i = (x - inst.center(i)).norm();
    let on_sphere_i = (dist_i - ri).abs() <= tol.max(1e-9) * (1.0 + ri);
    let strictly_inside = res[i] > 0.0 && res[j] > 0.0;
    if !(on_sphere_i || strictly_inside) {
        return Err(Error::Precondition(format!(
            "hypothesis needs x on sphere {i} or strictly inside both balls (residuals {:?})",
            res
        )));
    }
    let big = kron(
        &arrow(x, inst.center(j), rj),
        &arrow(x, inst.center(i), ri),
    )?;
    let vv = DVector::from_column_slice(v);
    let lhs = big.quad_form(&vv);
    let tail = DVector::from_column_slice(view.v(n));
    let shifted = &tail * ri + (x - inst.center(i)) * view.b(n);
    let rhs = res[j] / (ri * rj) * shifted.norm_squared();
    let margin = (lhs - rhs) / (1.0 + lhs.abs() + rhs.abs());
    Ok(CertReport {
        name: format!("compare-kron[{i},{j}]"),
        pass: margin >= -tol,
        worst_margin: margin,
        details: format!("lhs={lhs:e}, rhs={rhs:e}, tol={tol:e}"),
    })
}

/// Exactness of the homogenized Kronecker linearization on arbitrary real
/// combinations of rank-one atoms.
pub fn kron_linearity(
    points: &[DVector<f64>],
    weights: &[f64],
    inst: &BallQcqpInstance,
    i: usize,
    j: usize,
) -> Result<CertReport> {
    if points.len() != weights.len() || points.is_empty() {
        return Err(Error::Shape("points and weights must match and be nonempty".into()));
    }
    let n = inst.n();
    let mut x_mat = SymMatrix::zeros(n);
    let mut x_vec = DVector::zeros(n);
    let mut total = 0.0;
    let mut rhs_acc = SymMatrix::zeros((n + 1) * (n + 1));
    for (a, p) in weights.iter().zip(points) {
        let outer = SymMatrix::from_dense(p * p.transpose()).expect("finite outer");
        x_mat = x_mat.add(&outer.scale(*a));
        x_vec += p * *a;
        total += a;
        let term = kron(
            &arrow(p, inst.center(j), inst.radius(j)),
            &arrow(p, inst.center(i), inst.radius(i)),
        )?;
        rhs_acc = rhs_acc.add(&term.scale(*a));
    }
    let lhs = kron_map_hom(&x_mat, &x_vec, total, inst, i, j)?;
    let gap = lhs.sub(&rhs_acc).frobenius_norm();
    let scale = 1.0 + lhs.frobenius_norm();
    let threshold = 1e-10;
    Ok(CertReport {
        name: format!("kron-linearity[{i},{j}]"),
        pass: gap <= threshold * scale,
        worst_margin: -gap / scale,
        details: format!("frobenius gap {gap:e}, relative threshold {threshold:e}"),
    })
}

/// Maps a feasible level-2 pseudomoment vector onto the lifted cone and
/// re-verifies every membership family.
pub fn moment_implies_burer(
    moments: &MomentSolution,
    inst: &BallQcqpInstance,
    tol: f64,
) -> Result<CertReport> {
    let built = build_moment2(inst)?;
    let check = built.candidate_margins(&moments.values);
    if !check.feasible_within(tol) {
        return Err(Error::Precondition(format!(
            "pseudomoments infeasible for the moment relaxation (eq {:e}, cone {:e})",
            check.worst_equality, check.worst_cone_margin
        )));
    }
    let z = moments.lifted_matrix();
    let margins = cm_margins(&z, inst, true)?;
    Ok(CertReport::from_margins("moment-implies", tol, &margins))
}

/// Maximizes a seeded random linear functional over the trace-one section
/// of the two-ball cone; optimal vertices are extreme rays with
/// probability one. Returns the decoded matrix with its solve result.
pub fn hunt_extreme_ray(
    inst: &BallQcqpInstance,
    seed: u64,
    settings: &SolverSettings,
) -> Result<(LiftedMatrix, SolveResult)> {
    let n = inst.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = SymMatrix::from_fn(n + 2, |_, _| rng.random_range(-1.0..1.0));
    let built = build_c2_section(inst, &c)?;
    let res = built.solve(settings)?;
    let z = built.decode_lifted(&res)?;
    Ok((z, res))
}

/// Deterministic two-ball instance whose spheres cross, plus a synthetic
/// rank-2 member of the cone satisfying the full decomposition structure:
/// one strictly interior atom and one atom on both spheres.
pub fn synthetic_rank2(
    n: usize,
    seed: u64,
) -> Result<(BallQcqpInstance, LiftedMatrix, DecompositionCertificate)> {
    if n < 2 {
        return Err(Error::Config("synthetic decompositions need n >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r1 = 1.0;
    let d = rng.random_range(0.4..1.1);
    let r2 = rng.random_range((1.0f64 - d).abs() + 0.1..d + 0.9);
    let mut c2 = DVector::zeros(n);
    c2[0] = d;
    let inst = BallQcqpInstance::new(
        vec![DVector::zeros(n), c2],
        vec![r1, r2],
        Objective {
            a: SymMatrix::from_fn(n, |_, _| rng.random_range(-1.0..1.0)),
            b: DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)),
            c0: 0.0,
        },
        None,
    )?;

    // Sphere intersection: x1 = h, remaining radius rho.
    let h = (1.0 + d * d - r2 * r2) / (2.0 * d);
    let rho_sq = 1.0 - h * h;
    if rho_sq <= 1e-6 {
        return Err(Error::Numerical("spheres are tangent; retry another seed".into()));
    }
    let rho = rho_sq.sqrt();
    let mut omega = DVector::zeros(n - 1);
    for k in 0..n - 1 {
        omega[k] = rng.random_range(-1.0..1.0);
    }
    if omega.norm() < 1e-9 {
        omega[0] = 1.0;
    }
    let omega: DVector<f64> = omega.clone() / omega.norm();
    let mut x2 = DVector::zeros(n);
    x2[0] = h;
    for k in 0..n - 1 {
        x2[k + 1] = rho * omega[k];
    }

    // Interior atom near the lens center, jittered but strictly inside.
    let mut x1 = DVector::zeros(n);
    x1[0] = h;
    for k in 0..n {
        x1[k] += 0.2 * rho * rng.random_range(-1.0..1.0) / (n as f64).sqrt();
    }
    let res = inst.ball_residuals(&x1)?;
    if res.iter().any(|&g| g <= 1e-6) {
        return Err(Error::Numerical("jittered atom left the lens; retry another seed".into()));
    }

    let weights = vec![rng.random_range(0.3..1.5), rng.random_range(0.3..1.5)];
    let cert = DecompositionCertificate::new(weights, vec![x1, x2])?;
    let zbar = cert.reconstruct();
    Ok((inst, zbar, cert))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{example_e1, GenParams};

    const TOL: f64 = 1e-9;

    #[test]
    fn fact_qp_examples() {
        let tol = ConeTol { abs: 1e-9, rel: 1e-9 };
        let r = fact_qp_check(&DVector::from_vec(vec![1.0, 2.0, 1.0]), tol);
        assert!(r.pass, "{}", r.details);
        let r = fact_qp_check(&DVector::from_vec(vec![1.0, 1.0, 1.0]), tol);
        assert!(r.pass, "{}", r.details);
        let r = fact_qp_check(&DVector::from_vec(vec![1.0, 0.0, 0.0]), tol);
        assert!(r.pass, "{}", r.details);
    }

    #[test]
    fn rank_one_feasibility_examples() {
        let e1 = example_e1();
        // Rank-one lifts sit exactly on the PSD and SOC boundaries, so the
        // agreement margin is zero but never negative.
        let r = rank_one_feasibility(&DVector::from_vec(vec![0.5]), &e1, 1e-7).unwrap();
        assert!(r.pass && r.worst_margin >= 0.0, "{}", r.details);
        let r = rank_one_feasibility(&DVector::from_vec(vec![2.0]), &e1, 1e-7).unwrap();
        assert!(r.pass, "{}", r.details);
        let r = rank_one_feasibility(&DVector::from_vec(vec![0.0]), &e1, 1e-7).unwrap();
        assert!(r.pass, "{}", r.details);
    }

    #[test]
    fn kron_domination_on_rank_one() {
        let inst = BallQcqpInstance::generate(&GenParams {
            seed: 7,
            n: 3,
            m: 3,
            ..GenParams::default()
        })
        .unwrap();
        let x = inst.witness().unwrap().clone();
        let z = LiftedMatrix::rank_one(&x);
        for (i, j) in [(0usize, 1usize), (1, 2), (0, 2), (2, 0)] {
            let r = kron_domination(&z, &inst, i, j, 1e-7).unwrap();
            assert!(r.pass, "pair ({i},{j}): {}", r.details);
        }
    }

    #[test]
    fn domination_preconditions() {
        let e1 = example_e1();
        // Violates the cross linear-RLT scalar: diag(1, 1, eps) has
        // d1^T Z d2 = 2*0*... build Z with negative pair value.
        let mut zm = SymMatrix::zeros(3);
        zm.set_sym(0, 0, 1.0);
        zm.set_sym(1, 1, 1.0);
        zm.set_sym(2, 2, 1.0);
        zm.set_sym(0, 2, -5.0);
        let z = LiftedMatrix::new(zm).unwrap();
        assert!(matches!(
            kron_domination(&z, &e1, 0, 1, 1e-7),
            Err(Error::Precondition(_))
        ));

        // Scaled corner trips the Zhen precondition.
        let x = DVector::from_vec(vec![0.2]);
        let z2 = LiftedMatrix::rank_one(&x);
        let scaled = LiftedMatrix::new(z2.matrix().scale(2.0)).unwrap();
        assert!(matches!(
            zhen_domination(&scaled, &e1, 0, 1, 1e-7),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn zhen_domination_on_rank_one_interior() {
        let e1 = example_e1();
        let z = LiftedMatrix::rank_one(&DVector::from_vec(vec![0.5]));
        let r = zhen_domination(&z, &e1, 0, 1, 1e-7).unwrap();
        assert!(r.pass && r.worst_margin > 0.0, "{}", r.details);
    }

    #[test]
    fn socrlt_hand_values() {
        let e1 = example_e1();
        let z = LiftedMatrix::rank_one(&DVector::from_vec(vec![0.5]));
        let c = socrlt_components(&z, &e1, 0, 1e-9).unwrap();
        assert!((c.delta - 0.75).abs() < 1e-14);
        assert!((c.beta - 0.1875).abs() < 1e-14);
        assert!(c.xi.norm() < 1e-14);
        assert!(c.report.pass, "{}", c.report.details);

        let c = socrlt_components(&z, &e1, 1, 1e-9).unwrap();
        assert!((c.delta - 0.75).abs() < 1e-14);
        assert!(c.report.pass);

        // Outside ball 0 at rank one: delta < 0 and P Z d0 leaves the cone.
        let z = LiftedMatrix::rank_one(&DVector::from_vec(vec![2.0]));
        let c = socrlt_components(&z, &e1, 0, 1e-9).unwrap();
        assert!(c.delta < 0.0);
        assert!(!c.report.pass);
        let s = structure_matrices(&e1);
        let pzd = &s.p * z.matrix().as_matrix() * &s.d[0];
        let (inside, _) = soc_contains(
            pzd.as_slice(),
            SocConvention::LastCoord,
            ConeTol::default(),
        );
        assert!(!inside);
    }

    #[test]
    fn socrlt_matches_pzd_identity() {
        // (xi + 2 delta x; beta - delta; beta + delta) must equal P Z d_i
        // for any unit-corner Z, not just rank-one ones.
        use rand::prelude::*;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for seed in 0..30u64 {
            let inst = BallQcqpInstance::generate(&GenParams {
                seed,
                n: 3,
                m: 2,
                ..GenParams::default()
            })
            .unwrap();
            let mut zm = SymMatrix::from_fn(5, |_, _| rng.random_range(-1.0..1.0));
            zm.set_sym(4, 4, 1.0);
            let z = LiftedMatrix::new(zm).unwrap();
            let s = structure_matrices(&inst);
            for i in 0..2 {
                let c = socrlt_components(&z, &inst, i, 1e-9).unwrap();
                let pzd = &s.p * z.matrix().as_matrix() * &s.d[i];
                let head = &c.xi + z.project().1 * (2.0 * c.delta);
                for k in 0..3 {
                    assert!((pzd[k] - head[k]).abs() < 1e-10, "x component {k}");
                }
                assert!((pzd[3] - (c.beta - c.delta)).abs() < 1e-10);
                assert!((pzd[4] - (c.beta + c.delta)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn trace_rlt_examples() {
        let e1 = example_e1();
        let z = LiftedMatrix::rank_one(&DVector::from_vec(vec![0.5]));
        let r = trace_rlt_check(&z, &e1, 0, 1e-9).unwrap();
        assert!(r.pass, "{}", r.details);

        // t decoupled from tr(X) violates <Q, Z> = 0.
        let mut zm = z.matrix().clone();
        zm.set_sym(1, 2, 0.7);
        let bad = LiftedMatrix::new(zm).unwrap();
        assert!(matches!(
            trace_rlt_check(&bad, &e1, 0, 1e-9),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn decomposition_roundtrip() {
        for seed in 0..10u64 {
            let (inst, zbar, cert) = match synthetic_rank2(3, seed) {
                Ok(t) => t,
                Err(_) => continue,
            };
            let report = verify_decomposition(&zbar, &cert, &inst, 1e-8).unwrap();
            assert!(report.pass, "seed {seed}: {}", report.details);
            let found = decompose_extreme_ray(&zbar, &inst, 1e-8).unwrap();
            let recon = found.reconstruct();
            let err = zbar.matrix().sub(recon.matrix()).frobenius_norm()
                / zbar.matrix().frobenius_norm();
            assert!(err <= 1e-8, "seed {seed}: reconstruction {err:e}");
            let m = m_matrix_check(&found, &inst, 1e-8).unwrap();
            assert!(m.pass, "seed {seed}: {}", m.details);
        }
    }

    #[test]
    fn decomposition_preconditions() {
        let (inst, _, cert) = synthetic_rank2(2, 1).unwrap();
        let rank1 = LiftedMatrix::rank_one(&cert.points[0]);
        assert!(matches!(
            decompose_extreme_ray(&rank1, &inst, 1e-8),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            verify_decomposition(&rank1, &cert, &inst, 1e-8),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn verify_rejects_interior_second_atom() {
        let (inst, _, cert) = synthetic_rank2(2, 2).unwrap();
        // Swap in a strictly interior second atom; condition (c) fails.
        let mut points = cert.points.clone();
        points[1] = points[0].clone_owned() * 0.99;
        let bad = DecompositionCertificate::new(cert.weights.clone(), points).unwrap();
        let zbar = bad.reconstruct();
        if rank_estimate(&zbar).unwrap() < 2 {
            return;
        }
        let report = verify_decomposition(&zbar, &bad, &inst, 1e-8).unwrap();
        assert!(!report.pass);
        assert!(report.details.contains("sphere-atom"), "{}", report.details);
    }

    #[test]
    fn m_matrix_single_interior_atom() {
        let (inst, _, cert) = synthetic_rank2(2, 3).unwrap();
        let single = DecompositionCertificate::new(
            vec![cert.weights[0]],
            vec![cert.points[0].clone()],
        )
        .unwrap();
        let r = m_matrix_check(&single, &inst, 1e-9).unwrap();
        assert!(r.pass, "{}", r.details);
    }

    #[test]
    fn compare_kron_hand_value() {
        let e1 = example_e1();
        let x = DVector::from_vec(vec![0.5]);
        let v = [0.0, 0.0, 1.0, 0.0];
        let r = compare_kron_inequality(&x, &v, &e1, 0, 1, TOL).unwrap();
        assert!(r.pass, "{}", r.details);
        assert!(r.details.contains("lhs=1e0"), "{}", r.details);

        let zero = [0.0; 4];
        let r = compare_kron_inequality(&x, &zero, &e1, 0, 1, TOL).unwrap();
        assert!(r.pass);

        // Outside both balls: hypothesis violated.
        let far = DVector::from_vec(vec![5.0]);
        assert!(matches!(
            compare_kron_inequality(&far, &v, &e1, 0, 1, TOL),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn kron_linearity_examples() {
        use rand::prelude::*;
        let inst = BallQcqpInstance::generate(&GenParams {
            seed: 9,
            n: 2,
            m: 2,
            ..GenParams::default()
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p1 = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
        let p2 = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));

        let r = kron_linearity(&[p1.clone()], &[1.0], &inst, 0, 1).unwrap();
        assert!(r.pass && r.worst_margin > -1e-14, "{}", r.details);

        let r = kron_linearity(&[p1.clone(), p2.clone()], &[0.3, 0.7], &inst, 0, 1).unwrap();
        assert!(r.pass, "{}", r.details);

        let r = kron_linearity(&[p1, p2], &[1.0, -1.0], &inst, 0, 1).unwrap();
        assert!(r.pass, "{}", r.details);
    }

    #[test]
    fn moment_implication_on_dirac_and_box() {
        let inst = BallQcqpInstance::generate(&GenParams {
            seed: 13,
            n: 2,
            m: 2,
            ..GenParams::default()
        })
        .unwrap();
        let monos = crate::relaxations::monomials_up_to(2, 4);
        let w = inst.witness().unwrap().clone();
        let dirac = MomentSolution::dirac(2, &monos, &w);
        let r = moment_implies_burer(&dirac, &inst, 1e-7).unwrap();
        assert!(r.pass, "{}", r.details);

        // Uniform measure over a small box inside the feasible set:
        // y_alpha = prod (u^(a+1) - l^(a+1)) / ((a+1)(u - l)).
        let half = 0.05;
        let values = DVector::from_iterator(
            monos.len(),
            monos.iter().map(|alpha| {
                alpha
                    .iter()
                    .enumerate()
                    .map(|(k, &a)| {
                        let lo = w[k] - half;
                        let hi = w[k] + half;
                        let p = a as i32 + 1;
                        (hi.powi(p) - lo.powi(p)) / (p as f64 * (hi - lo))
                    })
                    .product::<f64>()
            }),
        );
        let boxm = MomentSolution::from_values(2, monos.clone(), values).unwrap();
        let r = moment_implies_burer(&boxm, &inst, 1e-7).unwrap();
        assert!(r.pass, "{}", r.details);
    }

    #[test]
    fn report_serialization() {
        let report = CertReport {
            name: "demo".into(),
            pass: true,
            worst_margin: 0.5,
            details: "ok".into(),
        };
        let json = serde_json::to_string(&[report]).unwrap();
        assert!(json.contains("\"worst_margin\":0.5"), "{json}");
    }
}
