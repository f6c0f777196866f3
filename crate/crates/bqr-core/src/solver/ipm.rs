//! Homogeneous self-dual interior-point method.
//!
//! Variables `(v, y, z, tau, kappa)` evolve toward a solution of
//!
//! ```text
//!   A v - b tau                 = 0
//!   -A^T y - S^T z + c tau      = 0     (z lives on the conic coordinates)
//!   b^T y - c^T v - kappa       = 0
//!   v in K, z in K*, tau, kappa >= 0
//! ```
//!
//! with Nesterov-Todd scaling and Mehrotra predictor-corrector steps. Each
//! iteration factors one quasidefinite KKT matrix and performs three solves
//! against it. `tau -> 0` with `kappa > 0` yields an infeasibility
//! certificate instead of an optimum.

use nalgebra::DVector;

use super::cones::{ConeLayout, Scaling};
use super::kkt::KktSystem;
use super::{ConicProgram, Residuals, SolveResult, SolveStatus, SolverSettings};

struct State {
    v: DVector<f64>,
    y: DVector<f64>,
    z: DVector<f64>,
    tau: f64,
    kappa: f64,
}

pub(crate) fn solve_hsde(prog: &ConicProgram, settings: &SolverSettings) -> SolveResult {
    let layout = ConeLayout::new(&prog.blocks);
    let n = layout.num_vars;
    let p = prog.num_equalities();
    let a = &prog.aeq;
    let b = &prog.beq;
    let c = &prog.objective;
    let degree = layout.degree + 1.0;

    let mut st = State {
        v: initial_v(&layout, n),
        y: DVector::zeros(p),
        z: layout.identity_point(),
        tau: 1.0,
        kappa: 1.0,
    };

    let scale_b = 1.0 + b.norm();
    let scale_c = 1.0 + c.norm();

    let mut kkt = KktSystem::new(n + p, n, settings.static_reg);
    // Best iterate by worst normalized residual; failures and the
    // iteration cap report it instead of whatever the last step produced.
    let mut best: Option<(f64, State, Residuals, usize)> = None;

    let mut iter = 0;
    while iter < settings.max_iter {
        // Residuals of the homogeneous embedding.
        let r_p = a * &st.v - b * st.tau;
        let mut r_d = c * st.tau;
        r_d -= a.transpose() * &st.y;
        layout.scatter_add(&st.z, &mut r_d, -1.0);
        let r_g = b.dot(&st.y) - c.dot(&st.v) - st.kappa;

        // Convergence metrics at the de-homogenized point.
        let pobj = c.dot(&st.v) / st.tau;
        let dobj = b.dot(&st.y) / st.tau;
        let pres = (a * &st.v / st.tau - b).norm() / scale_b;
        let dres = {
            let mut d = a.transpose() * &st.y;
            layout.scatter_add(&st.z, &mut d, 1.0);
            d /= st.tau;
            d -= c;
            d.norm() / scale_c
        };
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs().max(dobj.abs()));

        if trace_enabled() {
            eprintln!(
                "ipm iter {iter:3}: pres {pres:9.2e} dres {dres:9.2e} gap {gap:9.2e} tau {:9.2e} kappa {:9.2e}",
                st.tau, st.kappa
            );
        }
        if pres <= settings.feas_tol && dres <= settings.feas_tol && gap <= settings.gap_tol {
            return finish(prog, &layout, &st, SolveStatus::Optimal, pres, dres, gap, iter);
        }
        let merit = pres.max(dres).max(gap);
        let best_merit = best.as_ref().map_or(f64::INFINITY, |(m, ..)| *m);
        if merit < best_merit {
            best = Some((
                merit,
                State {
                    v: st.v.clone(),
                    y: st.y.clone(),
                    z: st.z.clone(),
                    tau: st.tau,
                    kappa: st.kappa,
                },
                Residuals { primal_feas: pres, dual_feas: dres, gap },
                iter,
            ));
        } else if merit > 1e5 * best_merit && best_merit < 1e-4 {
            // The iterate blew up after near-convergence; the factorization
            // quality floor was reached. Report the best iterate.
            return finish_best(prog, best, settings);
        }

        // Infeasibility certificates on the homogeneous ray.
        let by = b.dot(&st.y);
        if by > 0.0 {
            let mut cert = a.transpose() * &st.y;
            layout.scatter_add(&st.z, &mut cert, 1.0);
            if cert.norm() / by <= settings.feas_tol * scale_c {
                return finish(prog, &layout, &st, SolveStatus::PrimalInfeasible, pres, dres, gap, iter);
            }
        }
        let cv = c.dot(&st.v);
        if cv < 0.0 {
            if (a * &st.v).norm() / (-cv) <= settings.feas_tol * scale_b {
                return finish(prog, &layout, &st, SolveStatus::DualInfeasible, pres, dres, gap, iter);
            }
        }
        if st.tau < 1e-12 * st.kappa.max(1.0) {
            // The ray collapsed without a clean certificate.
            return finish_best(prog, best, settings);
        }

        // NT scalings at the current iterate.
        let mut scalings = Vec::with_capacity(layout.blocks.len());
        let mut scaling_ok = true;
        for blk in &layout.blocks {
            let s_slice = &st.v.as_slice()[blk.v_start..blk.v_start + blk.len];
            let z_slice = &st.z.as_slice()[blk.z_start..blk.z_start + blk.len];
            match Scaling::compute(blk.kind, s_slice, z_slice) {
                Ok(s) => scalings.push(s),
                Err(msg) => {
                    if trace_enabled() {
                        eprintln!("ipm: scaling failure: {msg}");
                    }
                    scaling_ok = false;
                    break;
                }
            }
        }
        if !scaling_ok {
            return finish_best(prog, best, settings);
        }

        let mu = (layout
            .blocks
            .iter()
            .map(|blk| {
                let s_slice = &st.v.as_slice()[blk.v_start..blk.v_start + blk.len];
                let z_slice = &st.z.as_slice()[blk.z_start..blk.z_start + blk.len];
                s_slice.iter().zip(z_slice).map(|(a, b)| a * b).sum::<f64>()
            })
            .sum::<f64>()
            + st.tau * st.kappa)
            / degree;

        // Assemble and factor the KKT matrix for this iteration.
        {
            let m = kkt.matrix_mut();
            m.fill(0.0);
            for (blk, sc) in layout.blocks.iter().zip(&scalings) {
                sc.add_hinv(m, blk.v_start);
            }
            for r in 0..p {
                for col in 0..n {
                    let val = a[(r, col)];
                    if val != 0.0 {
                        m[(n + r, col)] = val;
                        m[(col, n + r)] = val;
                    }
                }
            }
        }
        if !kkt.factorize() {
            return finish_best(prog, best, settings);
        }

        // Constant-direction solve K(-c, b), reused by both steps. The
        // Schur scalar kappa/tau - c.p1 - b.q1 equals kappa/tau + p1' H p1
        // in exact arithmetic; the sum-of-squares form stays positive when
        // cancellation would flip its sign near convergence.
        let (p1, q1) = kkt_solve(&kkt, n, p, &neg(c), b);
        let mut denom_reg = st.kappa / st.tau;
        for (blk, sc) in layout.blocks.iter().zip(&scalings) {
            let seg = &p1.as_slice()[blk.v_start..blk.v_start + blk.len];
            denom_reg += sc.apply_winvt(seg).norm_squared();
        }
        if !denom_reg.is_finite() || denom_reg <= 0.0 {
            if trace_enabled() {
                eprintln!("ipm: degenerate Schur scalar {denom_reg:e}");
            }
            return finish_best(prog, best, settings);
        }

        // Predictor (affine) direction: drive residuals and complementarity
        // to zero.
        let lambdas: Vec<DVector<f64>> = scalings.iter().map(|s| s.lambda()).collect();
        let bz_aff: Vec<DVector<f64>> = lambdas.iter().map(|l| -l).collect();
        let aff = solve_direction(
            &kkt, &layout, &scalings, n, p, a, b, c,
            &neg(&r_d), &neg(&r_p), -r_g, &bz_aff, -st.tau * st.kappa,
            &p1, &q1, denom_reg, &st,
        );
        let aff = match aff {
            Some(d) => d,
            None => return finish_best(prog, best, settings),
        };

        let alpha_aff = max_step(&layout, &scalings, &st, &aff).min(1.0);
        let mu_aff = mu_after(&layout, &st, &aff, alpha_aff, degree);
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Combined direction with Mehrotra correction.
        let mut bz_comb = Vec::with_capacity(lambdas.len());
        for ((blk, sc), _lam) in layout.blocks.iter().zip(&scalings).zip(&lambdas) {
            let dv_aff = &aff.v.as_slice()[blk.v_start..blk.v_start + blk.len];
            let dz_aff = &aff.z.as_slice()[blk.z_start..blk.z_start + blk.len];
            let ws = sc.apply_winvt(dv_aff);
            let wz = sc.apply_w(dz_aff);
            let corr = sc.jordan_product(ws.as_slice(), wz.as_slice());
            let mut target = sc.scaled_identity(sigma * mu);
            target -= sc.lambda_squared();
            target -= corr;
            bz_comb.push(sc.lambda_divide(target.as_slice()));
        }
        let shrink = 1.0 - sigma;
        let btk = sigma * mu - st.tau * st.kappa - aff.tau * aff.kappa;
        let comb = solve_direction(
            &kkt, &layout, &scalings, n, p, a, b, c,
            &scaled(&r_d, -shrink), &scaled(&r_p, -shrink), -shrink * r_g, &bz_comb, btk,
            &p1, &q1, denom_reg, &st,
        );
        let comb = match comb {
            Some(d) => d,
            None => return finish_best(prog, best, settings),
        };

        let alpha_max = max_step(&layout, &scalings, &st, &comb);
        let alpha = (settings.step_frac * alpha_max).min(1.0);
        if alpha <= 1e-13 {
            if trace_enabled() {
                eprintln!("ipm: vanishing step alpha_max {alpha_max:e}");
            }
            return finish_best(prog, best, settings);
        }

        if trace_enabled() {
            eprintln!("        sigma {sigma:9.2e} alpha {alpha:9.2e} mu {mu:9.2e}");
        }
        st.v += &comb.v * alpha;
        st.y += &comb.y * alpha;
        st.z += &comb.z * alpha;
        st.tau += alpha * comb.tau;
        st.kappa += alpha * comb.kappa;
        iter += 1;
    }

    finish_best(prog, best, settings)
}

/// Reports the best recorded iterate: optimal if it meets the tolerances,
/// iteration-limited when only the cap stopped an otherwise-progressing
/// run, numerical otherwise.
fn finish_best(
    prog: &ConicProgram,
    best: Option<(f64, State, Residuals, usize)>,
    settings: &SolverSettings,
) -> SolveResult {
    match best {
        Some((_, st, res, iter)) => {
            let status = if res.primal_feas <= settings.feas_tol
                && res.dual_feas <= settings.feas_tol
                && res.gap <= settings.gap_tol
            {
                SolveStatus::Optimal
            } else if iter + 1 >= settings.max_iter {
                SolveStatus::IterLimit
            } else {
                SolveStatus::Numerical
            };
            let primal = &st.v / st.tau;
            let dual = &st.y / st.tau;
            let pval = prog.objective.dot(&primal) + prog.obj_offset;
            let dval = prog.beq.dot(&dual) + prog.obj_offset;
            SolveResult {
                status,
                primal_value: pval,
                dual_value: dval,
                primal,
                dual,
                residuals: res,
                iterations: iter,
            }
        }
        None => SolveResult {
            status: SolveStatus::Numerical,
            primal_value: f64::NAN,
            dual_value: f64::NAN,
            primal: DVector::zeros(prog.num_vars()),
            dual: DVector::zeros(prog.num_equalities()),
            residuals: Residuals { primal_feas: f64::NAN, dual_feas: f64::NAN, gap: f64::NAN },
            iterations: 0,
        },
    }
}

fn trace_enabled() -> bool {
    static TRACE: std::sync::OnceLock<bool> = std::sync::OnceLock::new();
    *TRACE.get_or_init(|| std::env::var_os("BQR_IPM_TRACE").is_some())
}

fn initial_v(layout: &ConeLayout, n: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    let e = layout.identity_point();
    layout.scatter_add(&e, &mut v, 1.0);
    v
}

fn neg(x: &DVector<f64>) -> DVector<f64> {
    -x
}

fn scaled(x: &DVector<f64>, s: f64) -> DVector<f64> {
    x * s
}

struct Direction {
    v: DVector<f64>,
    y: DVector<f64>,
    z: DVector<f64>,
    tau: f64,
    kappa: f64,
}

/// Solves the reduced KKT system `[[H, A^T], [A, 0]] (x, q) = (bx, by)`.
fn kkt_solve(
    kkt: &KktSystem,
    n: usize,
    p: usize,
    bx: &DVector<f64>,
    by: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let mut rhs = DVector::zeros(n + p);
    rhs.rows_mut(0, n).copy_from(bx);
    rhs.rows_mut(n, p).copy_from(by);
    let sol = kkt.solve_refined(&rhs);
    (sol.rows(0, n).into_owned(), sol.rows(n, p).into_owned())
}

/// One Newton direction of the embedding for the given right-hand sides.
#[allow(clippy::too_many_arguments)]
fn solve_direction(
    kkt: &KktSystem,
    layout: &ConeLayout,
    scalings: &[Scaling],
    n: usize,
    p: usize,
    a: &nalgebra::DMatrix<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
    rd_rhs: &DVector<f64>,
    rp_rhs: &DVector<f64>,
    rg_rhs: f64,
    bz: &[DVector<f64>],
    btk: f64,
    p1: &DVector<f64>,
    q1: &DVector<f64>,
    denom_reg: f64,
    st: &State,
) -> Option<Direction> {
    // r~d = rd_rhs + S^T W^{-1} bz.
    let mut rtilde = rd_rhs.clone();
    for ((blk, sc), bzk) in layout.blocks.iter().zip(scalings).zip(bz) {
        let winv = sc.apply_winv(bzk.as_slice());
        for k in 0..blk.len {
            rtilde[blk.v_start + k] += winv[k];
        }
    }
    let (p0, q0) = kkt_solve(kkt, n, p, &rtilde, rp_rhs);
    let dtau = (rg_rhs + c.dot(&p0) + b.dot(&q0) + btk / st.tau) / denom_reg;
    if !dtau.is_finite() {
        return None;
    }
    let dv = &p0 + p1 * dtau;
    let dyhat = &q0 + q1 * dtau;
    // Recover dz from the dual-feasibility Newton row
    // (-A^T dy - S^T dz + c dtau = rd_rhs); this stays O(1)-conditioned
    // where the scaled form (W^T W)^{-1} S dv would amplify solve error by
    // 1/mu near convergence.
    let dz_full = a.transpose() * &dyhat + c * dtau - rd_rhs;
    let mut dz = DVector::zeros(layout.conic_dim);
    for blk in &layout.blocks {
        for k in 0..blk.len {
            dz[blk.z_start + k] = dz_full[blk.v_start + k];
        }
    }
    let dy = -&dyhat;
    let dkappa = (btk - st.kappa * dtau) / st.tau;
    if !dkappa.is_finite() || dv.iter().any(|x| !x.is_finite()) || dz.iter().any(|x| !x.is_finite())
    {
        return None;
    }
    Some(Direction { v: dv, y: dy, z: dz, tau: dtau, kappa: dkappa })
}

/// Maximal step keeping every conic quantity (and tau, kappa) feasible.
fn max_step(layout: &ConeLayout, scalings: &[Scaling], st: &State, dir: &Direction) -> f64 {
    let mut alpha = f64::INFINITY;
    for (blk, sc) in layout.blocks.iter().zip(scalings) {
        let s_slice = &st.v.as_slice()[blk.v_start..blk.v_start + blk.len];
        let ds = &dir.v.as_slice()[blk.v_start..blk.v_start + blk.len];
        alpha = alpha.min(sc.max_step_primal(s_slice, ds));
        let z_slice = &st.z.as_slice()[blk.z_start..blk.z_start + blk.len];
        let dz = &dir.z.as_slice()[blk.z_start..blk.z_start + blk.len];
        alpha = alpha.min(sc.max_step_dual(z_slice, dz));
    }
    if dir.tau < 0.0 {
        alpha = alpha.min(-st.tau / dir.tau);
    }
    if dir.kappa < 0.0 {
        alpha = alpha.min(-st.kappa / dir.kappa);
    }
    alpha
}

fn mu_after(layout: &ConeLayout, st: &State, dir: &Direction, alpha: f64, degree: f64) -> f64 {
    let mut total = (st.tau + alpha * dir.tau) * (st.kappa + alpha * dir.kappa);
    for blk in &layout.blocks {
        for k in 0..blk.len {
            let s = st.v[blk.v_start + k] + alpha * dir.v[blk.v_start + k];
            let z = st.z[blk.z_start + k] + alpha * dir.z[blk.z_start + k];
            total += s * z;
        }
    }
    total / degree
}

#[allow(clippy::too_many_arguments)]
fn finish(
    prog: &ConicProgram,
    _layout: &ConeLayout,
    st: &State,
    status: SolveStatus,
    pres: f64,
    dres: f64,
    gap: f64,
    iterations: usize,
) -> SolveResult {
    let (primal, dual, pval, dval) = match status {
        SolveStatus::PrimalInfeasible | SolveStatus::DualInfeasible => {
            // Certificates stay on the homogeneous ray.
            (st.v.clone(), st.y.clone(), f64::NAN, f64::NAN)
        }
        _ => {
            let primal = &st.v / st.tau;
            let dual = &st.y / st.tau;
            let pval = prog.objective.dot(&primal) + prog.obj_offset;
            let dval = prog.beq.dot(&dual) + prog.obj_offset;
            (primal, dual, pval, dval)
        }
    };
    SolveResult {
        status,
        primal_value: pval,
        dual_value: dval,
        primal,
        dual,
        residuals: Residuals { primal_feas: pres, dual_feas: dres, gap },
        iterations,
    }
}
