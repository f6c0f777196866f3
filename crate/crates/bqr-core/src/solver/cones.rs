//! Cone layout and Nesterov-Todd scalings for the interior-point loop.
//!
//! Every operation is expressed per block; the three conic families share
//! the same interface: scaled point `lambda = W z = W^{-T} s`, applications
//! of `W` and its inverses, the materialized `(W^T W)^{-1}` diagonal block
//! for the KKT system, Jordan-algebra products on the scaled space, and
//! maximal feasible steps.

use nalgebra::{DMatrix, DVector};

use super::{smat, svec, ConeBlock};
use crate::matcone::SymMatrix;

/// Where each conic block lives inside the flattened variable `v` and the
/// conic-only dual `z`.
#[derive(Debug, Clone)]
pub(crate) struct BlockRef {
    pub kind: BlockKind,
    /// Offset inside `v`.
    pub v_start: usize,
    /// Offset inside the conic-only vector `z`.
    pub z_start: usize,
    /// Flattened length.
    pub len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BlockKind {
    Nonneg,
    Soc,
    Psd(usize),
}

#[derive(Debug, Clone)]
pub(crate) struct ConeLayout {
    pub blocks: Vec<BlockRef>,
    pub num_vars: usize,
    pub conic_dim: usize,
    /// Barrier degree: one per nonnegative coordinate, one per SOC block,
    /// the matrix dimension per PSD block.
    pub degree: f64,
}

impl ConeLayout {
    pub fn new(blocks: &[ConeBlock]) -> ConeLayout {
        let mut refs = Vec::new();
        let mut v_off = 0usize;
        let mut z_off = 0usize;
        let mut degree = 0.0;
        for b in blocks {
            let len = b.var_len();
            match *b {
                ConeBlock::Free(_) => {}
                ConeBlock::Nonneg(k) => {
                    refs.push(BlockRef { kind: BlockKind::Nonneg, v_start: v_off, z_start: z_off, len });
                    z_off += len;
                    degree += k as f64;
                }
                ConeBlock::Soc(_) => {
                    refs.push(BlockRef { kind: BlockKind::Soc, v_start: v_off, z_start: z_off, len });
                    z_off += len;
                    degree += 1.0;
                }
                ConeBlock::Psd(d) => {
                    refs.push(BlockRef { kind: BlockKind::Psd(d), v_start: v_off, z_start: z_off, len });
                    z_off += len;
                    degree += d as f64;
                }
            }
            v_off += len;
        }
        ConeLayout { blocks: refs, num_vars: v_off, conic_dim: z_off, degree }
    }

    /// Central initial point `e` on the conic coordinates.
    pub fn identity_point(&self) -> DVector<f64> {
        let mut e = DVector::zeros(self.conic_dim);
        for b in &self.blocks {
            write_identity(b, &mut e.as_mut_slice()[b.z_start..b.z_start + b.len]);
        }
        e
    }

    /// Scatter-add a conic-only vector into a full variable vector.
    pub fn scatter_add(&self, zlike: &DVector<f64>, out: &mut DVector<f64>, sign: f64) {
        for b in &self.blocks {
            for k in 0..b.len {
                out[b.v_start + k] += sign * zlike[b.z_start + k];
            }
        }
    }
}

fn write_identity(b: &BlockRef, out: &mut [f64]) {
    match b.kind {
        BlockKind::Nonneg => out.fill(1.0),
        BlockKind::Soc => {
            out.fill(0.0);
            out[0] = 1.0;
        }
        BlockKind::Psd(d) => {
            out.fill(0.0);
            let mut k = 0;
            for j in 0..d {
                for i in j..d {
                    if i == j {
                        out[k] = 1.0;
                    }
                    k += 1;
                }
            }
        }
    }
}

/// NT scaling state of one block at the current iterate.
pub(crate) enum Scaling {
    Nonneg {
        w: Vec<f64>,
        lambda: Vec<f64>,
    },
    Soc {
        /// `sqrt(|s|_J / |z|_J)`, the determinant of the scaling point.
        eta: f64,
        /// Jordan square root `u` of the NT point `w`, so `W = 2uu^T - eta J`.
        u: DVector<f64>,
        lambda: DVector<f64>,
    },
    Psd {
        d: usize,
        r: DMatrix<f64>,
        rinv: DMatrix<f64>,
        /// Inverse factors of the primal/dual points, for step computations.
        ls_inv: DMatrix<f64>,
        lz_inv: DMatrix<f64>,
        sigma: DVector<f64>,
    },
}

fn jneg(x: &[f64]) -> DVector<f64> {
    // J x = (x_0, -x_rest)
    let mut out = DVector::from_column_slice(x);
    for i in 1..out.len() {
        out[i] = -out[i];
    }
    out
}

/// Eigen factorization helpers for PSD blocks. Returns `(u, d)` with
/// eigenvalues clamped to a strictly positive floor; errors if the point is
/// meaningfully indefinite.
fn psd_factors(m: &SymMatrix) -> Result<(DMatrix<f64>, DVector<f64>), String> {
    let spec = crate::matcone::spectral(m).map_err(|e| e.to_string())?;
    let max = spec.values[0].max(0.0);
    let min = spec.min_eigenvalue();
    if min < -1e-7 * (1.0 + max) {
        return Err(format!("iterate left the PSD cone (min eig {min:e})"));
    }
    let floor = (1e-14 * (1.0 + max)).max(f64::MIN_POSITIVE);
    let d = DVector::from_iterator(spec.values.len(), spec.values.iter().map(|&x| x.max(floor)));
    Ok((spec.vectors, d))
}

impl Scaling {
    pub fn compute(kind: BlockKind, s: &[f64], z: &[f64]) -> Result<Scaling, String> {
        match kind {
            BlockKind::Nonneg => {
                let mut w = Vec::with_capacity(s.len());
                let mut lambda = Vec::with_capacity(s.len());
                for (&si, &zi) in s.iter().zip(z) {
                    if si <= 0.0 || zi <= 0.0 {
                        return Err(format!("nonnegative iterate left the cone ({si:e}, {zi:e})"));
                    }
                    w.push((si / zi).sqrt());
                    lambda.push((si * zi).sqrt());
                }
                Ok(Scaling::Nonneg { w, lambda })
            }
            BlockKind::Soc => {
                let res_s = soc_residual(s);
                let res_z = soc_residual(z);
                if res_s <= 0.0 || s[0] <= 0.0 || res_z <= 0.0 || z[0] <= 0.0 {
                    return Err("second-order iterate left the cone".into());
                }
                let nrms = res_s.sqrt();
                let nrmz = res_z.sqrt();
                let st: Vec<f64> = s.iter().map(|x| x / nrms).collect();
                let zt: Vec<f64> = z.iter().map(|x| x / nrmz).collect();
                let dot: f64 = st.iter().zip(&zt).map(|(a, b)| a * b).sum();
                let gamma = ((1.0 + dot) / 2.0).sqrt();
                // NT point w = eta * (s~ + J z~) / (2 gamma), with w^T J w = eta^2.
                let eta = (nrms / nrmz).sqrt();
                let jzt = jneg(&zt);
                let mut w = DVector::from_column_slice(&st);
                w += &jzt;
                w *= eta / (2.0 * gamma);
                // Jordan square root u of w: W = Q_u = 2uu^T - eta J.
                let u0 = ((w[0] + eta) / 2.0).sqrt();
                let mut u = w;
                u[0] = u0;
                for i in 1..u.len() {
                    u[i] /= 2.0 * u0;
                }
                let scaling = Scaling::Soc { eta, u, lambda: DVector::zeros(s.len()) };
                let lambda = scaling.apply_w(z);
                if let Scaling::Soc { eta, u, .. } = scaling {
                    Ok(Scaling::Soc { eta, u, lambda })
                } else {
                    unreachable!()
                }
            }
            BlockKind::Psd(d) => {
                let sm = smat(s).map_err(|e| e.to_string())?;
                let zm = smat(z).map_err(|e| e.to_string())?;
                let (us, ds) = psd_factors(&sm)?;
                let (uz, dz) = psd_factors(&zm)?;
                let sqrt_ds = ds.map(|x| x.sqrt());
                let sqrt_dz = dz.map(|x| x.sqrt());
                // L_s = U_s D_s^{1/2}; L_z likewise.
                let mut ls = us.clone();
                for j in 0..d {
                    let f = sqrt_ds[j];
                    for i in 0..d {
                        ls[(i, j)] *= f;
                    }
                }
                let mut lz = uz.clone();
                for j in 0..d {
                    let f = sqrt_dz[j];
                    for i in 0..d {
                        lz[(i, j)] *= f;
                    }
                }
                let m = lz.transpose() * &ls;
                let svd = m.svd(true, true);
                let u = svd.u.as_ref().expect("svd with u");
                let vt = svd.v_t.as_ref().expect("svd with v_t");
                let sigma = svd.singular_values.clone();
                for &sv in sigma.iter() {
                    if !(sv > 0.0) {
                        return Err("degenerate NT scaling (zero singular value)".into());
                    }
                }
                // R = L_s V Sigma^{-1/2};  R^{-1} = Sigma^{-1/2} U^T L_z^T.
                let mut v = vt.transpose();
                for j in 0..d {
                    let f = 1.0 / sigma[j].sqrt();
                    for i in 0..d {
                        v[(i, j)] *= f;
                    }
                }
                let r = &ls * v;
                let mut ut = u.transpose();
                for i in 0..d {
                    let f = 1.0 / sigma[i].sqrt();
                    for j in 0..d {
                        ut[(i, j)] *= f;
                    }
                }
                let rinv = ut * lz.transpose();
                // L_s^{-1} = D_s^{-1/2} U_s^T.
                let mut ls_inv = us.transpose();
                for i in 0..d {
                    let f = 1.0 / sqrt_ds[i];
                    for j in 0..d {
                        ls_inv[(i, j)] *= f;
                    }
                }
                let mut lz_inv = uz.transpose();
                for i in 0..d {
                    let f = 1.0 / sqrt_dz[i];
                    for j in 0..d {
                        lz_inv[(i, j)] *= f;
                    }
                }
                Ok(Scaling::Psd { d, r, rinv, ls_inv, lz_inv, sigma })
            }
        }
    }

    /// The scaled point `lambda`.
    pub fn lambda(&self) -> DVector<f64> {
        match self {
            Scaling::Nonneg { lambda, .. } => DVector::from_column_slice(lambda),
            Scaling::Soc { lambda, .. } => lambda.clone(),
            Scaling::Psd { d, sigma, .. } => {
                let mut m = SymMatrix::zeros(*d);
                for i in 0..*d {
                    m.set_sym(i, i, sigma[i]);
                }
                svec(&m)
            }
        }
    }

    pub fn apply_w(&self, x: &[f64]) -> DVector<f64> {
        match self {
            Scaling::Nonneg { w, .. } => {
                DVector::from_iterator(x.len(), x.iter().zip(w).map(|(xi, wi)| xi * wi))
            }
            Scaling::Soc { eta, u, .. } => {
                // W x = 2 u (u^T x) - eta J x.
                let dot = u.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                let mut out = jneg(x);
                out *= -*eta;
                out.axpy(2.0 * dot, u, 1.0);
                out
            }
            Scaling::Psd { r, .. } => congruence(x, &r.transpose(), r),
        }
    }

    pub fn apply_winv(&self, x: &[f64]) -> DVector<f64> {
        match self {
            Scaling::Nonneg { w, .. } => {
                DVector::from_iterator(x.len(), x.iter().zip(w).map(|(xi, wi)| xi / wi))
            }
            Scaling::Soc { eta, u, .. } => {
                // W^{-1} x = (2/eta^2) q (q^T x) - (1/eta) J x, q = J u.
                let q = jneg(u.as_slice());
                let dot = q.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                let mut out = jneg(x);
                out *= -1.0 / *eta;
                out.axpy(2.0 * dot / (eta * eta), &q, 1.0);
                out
            }
            Scaling::Psd { rinv, .. } => congruence(x, &rinv.transpose(), rinv),
        }
    }

    pub fn apply_winvt(&self, x: &[f64]) -> DVector<f64> {
        match self {
            Scaling::Nonneg { .. } | Scaling::Soc { .. } => self.apply_winv(x),
            Scaling::Psd { rinv, .. } => congruence(x, rinv, &rinv.transpose()),
        }
    }

    /// Writes the dense `(W^T W)^{-1}` block at `(offset, offset)` of `kkt`.
    pub fn add_hinv(&self, kkt: &mut DMatrix<f64>, offset: usize) {
        match self {
            Scaling::Nonneg { w, .. } => {
                for (k, wi) in w.iter().enumerate() {
                    kkt[(offset + k, offset + k)] += 1.0 / (wi * wi);
                }
            }
            Scaling::Soc { eta, u, .. } => {
                // W^{-2} = Q_{u^{-2}} = 2 m m^T - (1/eta^2) J with m = (u^{-1})^2.
                let k = u.len();
                let q = jneg(u.as_slice()); // eta * u^{-1}
                let mut m = DVector::zeros(k);
                m[0] = q.norm_squared();
                for i in 1..k {
                    m[i] = 2.0 * q[0] * q[i];
                }
                m /= eta * eta;
                let f = 1.0 / (eta * eta);
                for i in 0..k {
                    for j in 0..k {
                        let mut v = 2.0 * m[i] * m[j];
                        if i == j {
                            v -= if i == 0 { f } else { -f };
                        }
                        kkt[(offset + i, offset + j)] += v;
                    }
                }
            }
            Scaling::Psd { d, rinv, .. } => {
                let g = rinv.transpose() * rinv; // Omega^{-1}, symmetric
                let dd = *d;
                let mut col = 0usize;
                let mut buf = DMatrix::zeros(dd, dd);
                for l in 0..dd {
                    for k in l..dd {
                        // G E_kl G written into buf.
                        let scale = if k == l { 1.0 } else { 1.0 / super::SQRT_2 };
                        for i in 0..dd {
                            for j in 0..dd {
                                let mut v = g[(i, k)] * g[(l, j)];
                                if k != l {
                                    v += g[(i, l)] * g[(k, j)];
                                }
                                buf[(i, j)] = scale * v;
                            }
                        }
                        // svec(buf) into KKT column.
                        let mut row = 0usize;
                        for jj in 0..dd {
                            for ii in jj..dd {
                                let v = if ii == jj {
                                    buf[(ii, ii)]
                                } else {
                                    super::SQRT_2 * 0.5 * (buf[(ii, jj)] + buf[(jj, ii)])
                                };
                                kkt[(offset + row, offset + col)] += v;
                                row += 1;
                            }
                        }
                        col += 1;
                    }
                }
            }
        }
    }

    /// Maximal step to the cone boundary from the block's primal point.
    pub fn max_step_primal(&self, s: &[f64], ds: &[f64]) -> f64 {
        match self {
            Scaling::Nonneg { .. } => nonneg_step(s, ds),
            Scaling::Soc { .. } => soc_step(s, ds),
            Scaling::Psd { ls_inv, .. } => psd_step(ds, ls_inv),
        }
    }

    /// Maximal step to the cone boundary from the block's dual point.
    pub fn max_step_dual(&self, z: &[f64], dz: &[f64]) -> f64 {
        match self {
            Scaling::Nonneg { .. } => nonneg_step(z, dz),
            Scaling::Soc { .. } => soc_step(z, dz),
            Scaling::Psd { lz_inv, .. } => psd_step(dz, lz_inv),
        }
    }

    /// Jordan product in the scaled space.
    pub fn jordan_product(&self, a: &[f64], b: &[f64]) -> DVector<f64> {
        match self {
            Scaling::Nonneg { .. } => {
                DVector::from_iterator(a.len(), a.iter().zip(b).map(|(x, y)| x * y))
            }
            Scaling::Soc { .. } => {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let mut out = DVector::zeros(a.len());
                out[0] = dot;
                for i in 1..a.len() {
                    out[i] = a[0] * b[i] + b[0] * a[i];
                }
                out
            }
            Scaling::Psd { .. } => {
                let am = smat(a).expect("svec length");
                let bm = smat(b).expect("svec length");
                let prod = am.as_matrix() * bm.as_matrix();
                let sym = SymMatrix::from_dense(0.5 * (&prod + prod.transpose()))
                    .expect("finite product");
                svec(&sym)
            }
        }
    }

    /// Solves `lambda o u = rhs` for `u` (Jordan division by the scaled point).
    pub fn lambda_divide(&self, rhs: &[f64]) -> DVector<f64> {
        match self {
            Scaling::Nonneg { lambda, .. } => DVector::from_iterator(
                rhs.len(),
                rhs.iter().zip(lambda).map(|(r, l)| r / l),
            ),
            Scaling::Soc { lambda, .. } => {
                let l0 = lambda[0];
                let lbar = lambda.rows(1, lambda.len() - 1);
                let a = l0 * l0 - lbar.norm_squared();
                let rbar_dot: f64 = rhs[1..]
                    .iter()
                    .zip(lbar.iter())
                    .map(|(x, y)| x * y)
                    .sum();
                let u0 = (l0 * rhs[0] - rbar_dot) / a;
                let mut out = DVector::zeros(rhs.len());
                out[0] = u0;
                for i in 1..rhs.len() {
                    out[i] = (rhs[i] - u0 * lambda[i]) / l0;
                }
                out
            }
            Scaling::Psd { d, sigma, .. } => {
                let rm = smat(rhs).expect("svec length");
                let mut um = SymMatrix::zeros(*d);
                for j in 0..*d {
                    for i in j..*d {
                        um.set_sym(i, j, 2.0 * rm.get(i, j) / (sigma[i] + sigma[j]));
                    }
                }
                svec(&um)
            }
        }
    }

    /// `lambda o lambda` in the scaled space.
    pub fn lambda_squared(&self) -> DVector<f64> {
        match self {
            Scaling::Nonneg { lambda, .. } => {
                DVector::from_iterator(lambda.len(), lambda.iter().map(|l| l * l))
            }
            Scaling::Soc { lambda, .. } => {
                let mut out = DVector::zeros(lambda.len());
                out[0] = lambda.norm_squared();
                for i in 1..lambda.len() {
                    out[i] = 2.0 * lambda[0] * lambda[i];
                }
                out
            }
            Scaling::Psd { d, sigma, .. } => {
                let mut m = SymMatrix::zeros(*d);
                for i in 0..*d {
                    m.set_sym(i, i, sigma[i] * sigma[i]);
                }
                svec(&m)
            }
        }
    }

    /// `sigma mu e` in the scaled space.
    pub fn scaled_identity(&self, value: f64) -> DVector<f64> {
        match self {
            Scaling::Nonneg { lambda, .. } => DVector::from_element(lambda.len(), value),
            Scaling::Soc { lambda, .. } => {
                let mut out = DVector::zeros(lambda.len());
                out[0] = value;
                out
            }
            Scaling::Psd { d, .. } => {
                let mut m = SymMatrix::zeros(*d);
                for i in 0..*d {
                    m.set_sym(i, i, value);
                }
                svec(&m)
            }
        }
    }
}

/// Congruence `left * mat(x) * right` in svec coordinates.
fn congruence(x: &[f64], left: &DMatrix<f64>, right: &DMatrix<f64>) -> DVector<f64> {
    let xm = smat(x).expect("svec length");
    let prod = left * xm.as_matrix() * right;
    let sym = SymMatrix::from_dense(0.5 * (&prod + prod.transpose())).expect("finite congruence");
    svec(&sym)
}

fn soc_residual(x: &[f64]) -> f64 {
    let tail: f64 = x[1..].iter().map(|v| v * v).sum();
    x[0] * x[0] - tail
}

fn nonneg_step(s: &[f64], ds: &[f64]) -> f64 {
    let mut alpha = f64::INFINITY;
    for (&si, &di) in s.iter().zip(ds) {
        if di < 0.0 {
            alpha = alpha.min(-si / di);
        }
    }
    alpha
}

/// Largest step keeping `s + alpha ds` in the second-order cone. The cone
/// slice along the ray is an interval starting at 0 because the gauge
/// `x_0 - ||x_rest||` is concave; the first root of the quadratic
/// `(s_0 + a d_0)^2 - ||s_rest + a d_rest||^2` marks its end.
fn soc_step(s: &[f64], ds: &[f64]) -> f64 {
    let c = soc_residual(s);
    if c <= 0.0 {
        return 0.0;
    }
    let a = soc_bilinear(ds, ds);
    let b = 2.0 * soc_bilinear(s, ds);
    let mut best = f64::INFINITY;
    if a.abs() < 1e-300 {
        if b < 0.0 {
            best = -c / b;
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let q = -0.5 * (b + b.signum() * sq);
            let (r1, r2) = if b == 0.0 {
                let r = (-c / a).max(0.0).sqrt();
                (-r, r)
            } else {
                (q / a, c / q)
            };
            for r in [r1, r2] {
                if r > 0.0 && r.is_finite() {
                    best = best.min(r);
                }
            }
        }
    }
    best
}

fn soc_bilinear(x: &[f64], y: &[f64]) -> f64 {
    let mut out = x[0] * y[0];
    for i in 1..x.len() {
        out -= x[i] * y[i];
    }
    out
}

/// Largest step keeping `S + alpha mat(ds)` PSD given `L^{-1}` with
/// `S = L L^T`: the reciprocal of the most negative eigenvalue of
/// `L^{-1} mat(ds) L^{-T}`.
fn psd_step(ds: &[f64], l_inv: &DMatrix<f64>) -> f64 {
    let dm = smat(ds).expect("svec length");
    let prod = l_inv * dm.as_matrix() * l_inv.transpose();
    let sym = SymMatrix::from_dense(0.5 * (&prod + prod.transpose())).expect("finite step matrix");
    match crate::matcone::spectral(&sym) {
        Ok(spec) => {
            let min = spec.min_eigenvalue();
            if min < 0.0 {
                -1.0 / min
            } else {
                f64::INFINITY
            }
        }
        Err(_) => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::svec_len;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_interior_soc(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
        let tail: Vec<f64> = (0..k - 1).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = tail.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut v = vec![norm + rng.random_range(0.1..1.5)];
        v.extend(tail);
        v
    }

    fn random_psd_svec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
        let g = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        let m = &g * g.transpose() + DMatrix::identity(d, d) * 0.3;
        svec(&SymMatrix::from_dense(m).unwrap()).as_slice().to_vec()
    }

    #[test]
    fn nonneg_scaling_identities() {
        let s = [2.0, 0.5, 1.0];
        let z = [0.5, 2.0, 1.0];
        let sc = Scaling::compute(BlockKind::Nonneg, &s, &z).unwrap();
        let lam = sc.lambda();
        let wz = sc.apply_w(&z);
        let winvt_s = sc.apply_winvt(&s);
        for i in 0..3 {
            assert!((lam[i] - wz[i]).abs() < 1e-14);
            assert!((lam[i] - winvt_s[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn soc_scaling_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let k = rng.random_range(2..6usize);
            let s = random_interior_soc(&mut rng, k);
            let z = random_interior_soc(&mut rng, k);
            let sc = Scaling::compute(BlockKind::Soc, &s, &z).unwrap();
            let lam = sc.lambda();
            let winvt_s = sc.apply_winvt(&s);
            for i in 0..k {
                assert!(
                    (lam[i] - winvt_s[i]).abs() <= 1e-10 * (1.0 + lam[i].abs()),
                    "W z and W^-T s must agree"
                );
            }
            // W^{ -1} W = I
            let x: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let roundtrip = sc.apply_winv(sc.apply_w(&x).as_slice());
            for i in 0..k {
                assert!((roundtrip[i] - x[i]).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn psd_scaling_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..40 {
            let d = rng.random_range(2..5usize);
            let s = random_psd_svec(&mut rng, d);
            let z = random_psd_svec(&mut rng, d);
            let sc = Scaling::compute(BlockKind::Psd(d), &s, &z).unwrap();
            let lam = sc.lambda();
            let wz = sc.apply_w(&z);
            let winvt_s = sc.apply_winvt(&s);
            for i in 0..lam.len() {
                assert!((lam[i] - wz[i]).abs() < 1e-9 * (1.0 + lam[i].abs()));
                assert!((lam[i] - winvt_s[i]).abs() < 1e-9 * (1.0 + lam[i].abs()));
            }
            let x: Vec<f64> = (0..svec_len(d)).map(|_| rng.random_range(-1.0..1.0)).collect();
            let roundtrip = sc.apply_winv(sc.apply_w(&x).as_slice());
            for i in 0..x.len() {
                assert!((roundtrip[i] - x[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn hinv_matches_operator() {
        // The materialized (W^T W)^{-1} block must agree with
        // W^{-1} W^{-T} applied to basis vectors.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for kind in [BlockKind::Nonneg, BlockKind::Soc, BlockKind::Psd(3)] {
            let (s, z, len) = match kind {
                BlockKind::Nonneg => {
                    let s: Vec<f64> = (0..4).map(|_| rng.random_range(0.2..2.0)).collect();
                    let z: Vec<f64> = (0..4).map(|_| rng.random_range(0.2..2.0)).collect();
                    (s, z, 4)
                }
                BlockKind::Soc => (
                    random_interior_soc(&mut rng, 4),
                    random_interior_soc(&mut rng, 4),
                    4,
                ),
                BlockKind::Psd(d) => {
                    let s = random_psd_svec(&mut rng, d);
                    let z = random_psd_svec(&mut rng, d);
                    (s, z, svec_len(d))
                }
            };
            let sc = Scaling::compute(kind, &s, &z).unwrap();
            let mut h = DMatrix::zeros(len, len);
            sc.add_hinv(&mut h, 0);
            for j in 0..len {
                let mut e = vec![0.0; len];
                e[j] = 1.0;
                let expect = sc.apply_winv(sc.apply_winvt(&e).as_slice());
                for i in 0..len {
                    assert!(
                        (h[(i, j)] - expect[i]).abs() <= 1e-9 * (1.0 + expect[i].abs()),
                        "{kind:?} column {j} row {i}: {} vs {}",
                        h[(i, j)],
                        expect[i]
                    );
                }
            }
        }
    }

    #[test]
    fn step_computations() {
        // Nonnegative.
        assert_eq!(nonneg_step(&[1.0, 2.0], &[-0.5, 1.0]), 2.0);
        assert_eq!(nonneg_step(&[1.0], &[1.0]), f64::INFINITY);

        // SOC: from the axis toward the boundary.
        let s = [1.0, 0.0, 0.0];
        let ds = [0.0, 1.0, 0.0];
        let a = soc_step(&s, &ds);
        assert!((a - 1.0).abs() < 1e-12);

        // direction inside the cone: unbounded.
        let ds = [1.0, 0.5, 0.0];
        assert_eq!(soc_step(&s, &ds), f64::INFINITY);

        // PSD: identity minus t * diag(2, 0) hits the boundary at 1/2.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let _ = &mut rng;
        let s = svec(&SymMatrix::identity(2));
        let mut dm = SymMatrix::zeros(2);
        dm.set_sym(0, 0, -2.0);
        let ds = svec(&dm);
        let sc = Scaling::compute(BlockKind::Psd(2), s.as_slice(), s.as_slice()).unwrap();
        let a = sc.max_step_primal(s.as_slice(), ds.as_slice());
        assert!((a - 0.5).abs() < 1e-10);
    }

    #[test]
    fn lambda_divide_inverts_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for kind in [BlockKind::Nonneg, BlockKind::Soc, BlockKind::Psd(3)] {
            let (s, z) = match kind {
                BlockKind::Nonneg => (
                    (0..5).map(|_| rng.random_range(0.2..2.0)).collect::<Vec<_>>(),
                    (0..5).map(|_| rng.random_range(0.2..2.0)).collect::<Vec<_>>(),
                ),
                BlockKind::Soc => (
                    random_interior_soc(&mut rng, 5),
                    random_interior_soc(&mut rng, 5),
                ),
                BlockKind::Psd(d) => (random_psd_svec(&mut rng, d), random_psd_svec(&mut rng, d)),
            };
            let sc = Scaling::compute(kind, &s, &z).unwrap();
            let lam = sc.lambda();
            let rhs: Vec<f64> = (0..s.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let u = sc.lambda_divide(&rhs);
            let back = sc.jordan_product(lam.as_slice(), u.as_slice());
            for i in 0..rhs.len() {
                assert!(
                    (back[i] - rhs[i]).abs() <= 1e-9 * (1.0 + rhs[i].abs()),
                    "{kind:?}: jordan division failed at {i}"
                );
            }
        }
    }
}
