//! Ground-truth global minimization at desk scale.
//!
//! For small dimensions a dense lattice over the bounding box of the first
//! ball is scanned, feasibility-filtered, and the best candidates polished
//! by projected gradient descent; larger dimensions fall back to seeded
//! multistart. Values are upper bounds on the true minimum and anchor the
//! exactness and bound-ordering tests.

use nalgebra::DVector;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::batch::{self, ExecMode};
use crate::instance::BallQcqpInstance;
use crate::{Error, Result};

/// How the optimum was located.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    Grid,
    Multistart,
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub best_x: DVector<f64>,
    pub best_value: f64,
    pub evaluations: u64,
    pub method: OracleMethod,
}

/// Grid dimension limit; beyond this only multistart applies.
pub const GRID_MAX_N: usize = 4;
/// Lattice size cap. The stated per-axis resolution (1e-3 of the radius)
/// is kept whenever the full lattice fits under the cap and coarsened
/// otherwise; polish recovers the lost digits.
const GRID_POINT_CAP: usize = 8_500_000;
/// How many best lattice points get polished.
const GRID_POLISH_TOP: usize = 200;

/// Projects onto the feasible set by cyclic projection onto the balls
/// (each a closed-form radial projection). Converges for intersecting
/// balls.
pub fn project_feasible(
    x0: &DVector<f64>,
    inst: &BallQcqpInstance,
    max_sweeps: usize,
) -> Result<DVector<f64>> {
    let mut x = x0.clone();
    for _ in 0..max_sweeps {
        let mut worst: f64 = 0.0;
        for i in 0..inst.m() {
            let c = inst.center(i);
            let r = inst.radius(i);
            let d = &x - c;
            let dist = d.norm();
            if dist > r {
                x = c + d * (r / dist);
            }
            worst = worst.max(dist - r);
        }
        let res = inst.ball_residuals(&x)?;
        if res.iter().all(|&g| g >= -1e-10) {
            return Ok(x);
        }
    }
    Err(Error::Numerical(format!(
        "cyclic projection did not converge in {max_sweeps} sweeps"
    )))
}

/// Gradient of `q` at `x`: `2 A x + 2 b`.
fn gradient(inst: &BallQcqpInstance, x: &DVector<f64>) -> DVector<f64> {
    let obj = inst.objective();
    (obj.a.as_matrix() * x + &obj.b) * 2.0
}

/// Projected gradient descent with backtracking, to stationarity 1e-9.
fn polish(inst: &BallQcqpInstance, start: &DVector<f64>, evals: &mut u64) -> Result<(DVector<f64>, f64)> {
    let mut x = project_feasible(start, inst, 500)?;
    let mut fx = inst.evaluate_q(&x)?;
    *evals += 1;
    let mut step = 1.0;
    for _ in 0..400 {
        let g = gradient(inst, &x);
        let mut improved = false;
        // Backtracking on the projected step.
        let mut s = step;
        for _ in 0..40 {
            let cand = project_feasible(&(&x - &g * s), inst, 500)?;
            let fc = inst.evaluate_q(&cand)?;
            *evals += 1;
            let move_sq = (&cand - &x).norm_squared();
            if fc <= fx - 1e-4 * move_sq / s.max(1e-12) {
                x = cand;
                fx = fc;
                step = (s * 2.0).min(1.0);
                improved = true;
                break;
            }
            s *= 0.5;
        }
        if !improved {
            break;
        }
        // Stationarity: projected step shorter than tolerance.
        let probe = project_feasible(&(&x - gradient(inst, &x) * 1e-4), inst, 500)?;
        if (&probe - &x).norm() <= 1e-9 * 1e-4 * (1.0 + x.norm()) {
            break;
        }
    }
    Ok((x, fx))
}

/// Lexicographic tie-break: smaller value wins; near-equal values keep the
/// lexicographically smallest point.
fn better(value: f64, x: &DVector<f64>, best_value: f64, best_x: &DVector<f64>) -> bool {
    let tol = 1e-12 * (1.0 + best_value.abs());
    if value < best_value - tol {
        return true;
    }
    if value > best_value + tol {
        return false;
    }
    for (a, b) in x.iter().zip(best_x.iter()) {
        if a < b {
            return true;
        }
        if a > b {
            return false;
        }
    }
    false
}

/// Global minimum of `q` over the feasible set. Grid scan for
/// `n <= GRID_MAX_N` (seed-independent), seeded multistart otherwise.
pub fn global_min(inst: &BallQcqpInstance, budget: usize, seed: u64) -> Result<OracleResult> {
    if inst.n() <= GRID_MAX_N {
        grid_min(inst)
    } else {
        multistart_min(inst, budget, seed)
    }
}

/// Dense lattice over the bounding box of ball 1, feasibility-filtered,
/// then projected-gradient polish from the best lattice points. The
/// polished value is also cross-checked from 100 deterministic interior
/// starts.
pub fn grid_min(inst: &BallQcqpInstance) -> Result<OracleResult> {
    let n = inst.n();
    if n > GRID_MAX_N {
        return Err(Error::Config(format!(
            "grid oracle supports n <= {GRID_MAX_N}, instance has n = {n}"
        )));
    }
    let c1 = inst.center(0);
    let r1 = inst.radius(0);
    // Target resolution 1e-3 r, coarsened to fit the point cap.
    let mut per_axis = 2001usize;
    while per_axis > 9 && per_axis.pow(n as u32) > GRID_POINT_CAP {
        per_axis = (per_axis - 1) / 2 + 1;
    }
    let step = 2.0 * r1 / (per_axis - 1) as f64;

    // Parallel scan over the leading axis; each worker keeps its best
    // candidates and the fixed reduction order keeps results deterministic.
    let keep = GRID_POLISH_TOP;
    let slices = batch::map_indices(per_axis, ExecMode::Parallel, |i0| {
        let mut best: Vec<(f64, DVector<f64>)> = Vec::new();
        let mut evals = 0u64;
        let mut x = DVector::zeros(n);
        x[0] = c1[0] - r1 + step * i0 as f64;
        let mut idx = vec![0usize; n];
        loop {
            for k in 1..n {
                x[k] = c1[k] - r1 + step * idx[k] as f64;
            }
            evals += 1;
            if inst.ball_residuals(&x).expect("dimension checked").iter().all(|&g| g >= 0.0) {
                let v = inst.evaluate_q(&x).expect("dimension checked");
                if best.len() < keep {
                    best.push((v, x.clone()));
                    best.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
                } else if v < best[keep - 1].0 {
                    best[keep - 1] = (v, x.clone());
                    best.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
                }
            }
            // Odometer over axes 1..n.
            let mut k = 1;
            loop {
                if k >= n {
                    return (best, evals);
                }
                idx[k] += 1;
                if idx[k] < per_axis {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    });

    let mut evaluations = 0u64;
    let mut candidates: Vec<(f64, DVector<f64>)> = Vec::new();
    for (slice, ev) in slices {
        evaluations += ev;
        candidates.extend(slice);
    }
    candidates.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("finite")
            .then_with(|| a.1.iter().partial_cmp(b.1.iter()).expect("finite"))
    });
    candidates.truncate(GRID_POLISH_TOP);

    // Deterministic extra starts guard against lattice-width basins.
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e3779b9);
    let mut starts: Vec<DVector<f64>> = candidates.into_iter().map(|(_, x)| x).collect();
    if let Some(w) = inst.witness() {
        starts.push(w.clone());
    }
    for _ in 0..400 {
        starts.push(DVector::from_fn(n, |k, _| {
            c1[k] + r1 * rng.random_range(-1.0..1.0)
        }));
    }

    let mut best_x: Option<DVector<f64>> = None;
    let mut best_value = f64::INFINITY;
    for s in &starts {
        let (x, v) = polish(inst, s, &mut evaluations)?;
        if best_x.as_ref().map_or(true, |bx| better(v, &x, best_value, bx)) {
            best_value = v;
            best_x = Some(x);
        }
    }
    // Projected gradient cannot slide along sphere-sphere intersections, so
    // those manifolds (points for n = 2, circles for n = 3, spheres for
    // n = 4) are scanned directly.
    for (x, v) in corner_candidates(inst, &mut evaluations)? {
        if best_x.as_ref().map_or(true, |bx| better(v, &x, best_value, bx)) {
            best_value = v;
            best_x = Some(x);
        }
    }
    let best_x = best_x.ok_or_else(|| Error::Numerical("no feasible point found".into()))?;
    Ok(OracleResult { best_x, best_value, evaluations, method: OracleMethod::Grid })
}

/// Best feasible points on every pairwise sphere intersection.
fn corner_candidates(
    inst: &BallQcqpInstance,
    evals: &mut u64,
) -> Result<Vec<(DVector<f64>, f64)>> {
    let n = inst.n();
    let mut out = Vec::new();
    if n < 2 {
        return Ok(out);
    }
    let feas_tol = 1e-9;
    let mut consider = |x: DVector<f64>, out: &mut Vec<(DVector<f64>, f64)>, evals: &mut u64| {
        if let Ok(res) = inst.ball_residuals(&x) {
            *evals += 1;
            if res.iter().all(|&g| g >= -feas_tol) {
                let v = inst.evaluate_q(&x).expect("dimension checked");
                out.push((x, v));
            }
        }
    };
    for i in 0..inst.m() {
        for j in (i + 1)..inst.m() {
            let (c1, r1) = (inst.center(i), inst.radius(i));
            let (c2, r2) = (inst.center(j), inst.radius(j));
            let d = c2 - c1;
            let dist = d.norm();
            if dist <= 1e-12 || dist >= r1 + r2 || dist <= (r1 - r2).abs() {
                continue; // nested, disjoint, or concentric: no corner
            }
            let h = (dist * dist + r1 * r1 - r2 * r2) / (2.0 * dist);
            let rho_sq = r1 * r1 - h * h;
            if rho_sq <= 0.0 {
                continue;
            }
            let rho = rho_sq.sqrt();
            let dhat = &d / dist;
            let base = c1 + &dhat * h;
            match n {
                2 => {
                    let perp = DVector::from_vec(vec![-dhat[1], dhat[0]]);
                    consider(&base + &perp * rho, &mut out, evals);
                    consider(&base - &perp * rho, &mut out, evals);
                }
                3 => {
                    let (u, v) = plane_basis(&dhat);
                    let point =
                        |theta: f64| &base + (&u * theta.cos() + &v * theta.sin()) * rho;
                    let samples = 8192;
                    let mut best = (f64::INFINITY, 0.0f64);
                    for k in 0..samples {
                        let theta = 2.0 * std::f64::consts::PI * k as f64 / samples as f64;
                        let q = inst.evaluate_q(&point(theta)).expect("dimension checked");
                        *evals += 1;
                        if q < best.0 {
                            best = (q, theta);
                        }
                    }
                    // Golden-section around the best sample.
                    let width = 2.0 * std::f64::consts::PI / samples as f64;
                    let (mut lo, mut hi) = (best.1 - width, best.1 + width);
                    let phi = 0.5 * (3.0 - 5.0f64.sqrt());
                    for _ in 0..80 {
                        let span = hi - lo;
                        let a = lo + phi * span;
                        let b = hi - phi * span;
                        *evals += 2;
                        if inst.evaluate_q(&point(a)).expect("dim")
                            < inst.evaluate_q(&point(b)).expect("dim")
                        {
                            hi = b;
                        } else {
                            lo = a;
                        }
                    }
                    consider(point(0.5 * (lo + hi)), &mut out, evals);
                }
                _ => {
                    // Fibonacci sampling of the corner 2-sphere (n = 4).
                    let basis = sphere_basis(&dhat, n);
                    let samples = 40_000;
                    let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
                    let mut best: Option<(f64, DVector<f64>)> = None;
                    for k in 0..samples {
                        let zc = 1.0 - 2.0 * (k as f64 + 0.5) / samples as f64;
                        let rr = (1.0 - zc * zc).sqrt();
                        let theta = golden * k as f64;
                        let mut x = base.clone();
                        x += &basis[0] * (rho * rr * theta.cos());
                        x += &basis[1] * (rho * rr * theta.sin());
                        x += &basis[2] * (rho * zc);
                        let q = inst.evaluate_q(&x).expect("dimension checked");
                        *evals += 1;
                        if best.as_ref().map_or(true, |(bq, _)| q < *bq) {
                            best = Some((q, x));
                        }
                    }
                    if let Some((_, x)) = best {
                        consider(x, &mut out, evals);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Two orthonormal vectors spanning the plane perpendicular to `dhat`
/// (dimension 3).
fn plane_basis(dhat: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let mut seed = DVector::zeros(3);
    seed[if dhat[0].abs() < 0.9 { 0 } else { 1 }] = 1.0;
    let u = (&seed - dhat * dhat.dot(&seed)).normalize();
    let v = DVector::from_vec(vec![
        dhat[1] * u[2] - dhat[2] * u[1],
        dhat[2] * u[0] - dhat[0] * u[2],
        dhat[0] * u[1] - dhat[1] * u[0],
    ]);
    (u, v)
}

/// Orthonormal basis of the hyperplane perpendicular to `dhat` via
/// Gram-Schmidt over coordinate seeds.
fn sphere_basis(dhat: &DVector<f64>, n: usize) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for k in 0..n {
        if basis.len() == n - 1 {
            break;
        }
        let mut cand = DVector::zeros(n);
        cand[k] = 1.0;
        cand -= dhat * dhat.dot(&cand);
        for b in &basis {
            let proj = b.dot(&cand);
            cand -= b * proj;
        }
        let norm = cand.norm();
        if norm > 1e-8 {
            basis.push(cand / norm);
        }
    }
    basis
}

/// Seeded multistart: `budget` random interior starts, each polished by
/// projected gradient; reduction in start order for determinism.
pub fn multistart_min(inst: &BallQcqpInstance, budget: usize, seed: u64) -> Result<OracleResult> {
    let n = inst.n();
    let c1 = inst.center(0);
    let r1 = inst.radius(0);
    let budget = budget.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts: Vec<DVector<f64>> = Vec::with_capacity(budget);
    if let Some(w) = inst.witness() {
        starts.push(w.clone());
    }
    while starts.len() < budget {
        starts.push(DVector::from_fn(n, |k, _| c1[k] + r1 * rng.random_range(-1.0..1.0)));
    }
    let polished = batch::map_ordered(&starts, ExecMode::Parallel, |s| {
        let mut evals = 0u64;
        polish(inst, s, &mut evals).map(|(x, v)| (x, v, evals))
    });
    let mut best_x: Option<DVector<f64>> = None;
    let mut best_value = f64::INFINITY;
    let mut evaluations = 0u64;
    for item in polished {
        let (x, v, ev) = item?;
        evaluations += ev;
        if best_x.as_ref().map_or(true, |bx| better(v, &x, best_value, bx)) {
            best_value = v;
            best_x = Some(x);
        }
    }
    let best_x = best_x.ok_or_else(|| Error::Numerical("no feasible start".into()))?;
    Ok(OracleResult { best_x, best_value, evaluations, method: OracleMethod::Multistart })
}
