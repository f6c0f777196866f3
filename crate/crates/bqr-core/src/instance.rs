//! Ball-constrained QCQP instances: data model, random generation with a
//! guaranteed interior witness, and JSON persistence.

use std::path::Path;

use nalgebra::DVector;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::matcone::{ConeTol, SymMatrix};
use crate::{Error, Result};

/// Quadratic objective `q(x) = x^T A x + 2 b^T x + c0`.
///
/// The factor 2 on the linear term makes the lifted objective
/// `<A, X> + 2 b^T x + c0` an exact linearization.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub a: SymMatrix,
    pub b: DVector<f64>,
    pub c0: f64,
}

/// `min q(x)` over `S = { x : ||x - c_i|| <= r_i, i = 1..m }`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallQcqpInstance {
    n: usize,
    m: usize,
    centers: Vec<DVector<f64>>,
    radii: Vec<f64>,
    objective: Objective,
    witness: Option<DVector<f64>>,
}

/// Parameters for [`BallQcqpInstance::generate`].
#[derive(Debug, Clone, Copy)]
pub struct GenParams {
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    /// Witness coordinates are drawn uniformly from `[-spread, spread]`.
    pub spread: f64,
    /// Radii are drawn uniformly from this closed interval.
    pub radius_range: (f64, f64),
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams { seed: 0, n: 2, m: 2, spread: 1.0, radius_range: (0.5, 1.5) }
    }
}

impl BallQcqpInstance {
    pub fn new(
        centers: Vec<DVector<f64>>,
        radii: Vec<f64>,
        objective: Objective,
        witness: Option<DVector<f64>>,
    ) -> Result<Self> {
        let m = centers.len();
        if m < 2 {
            return Err(Error::Config(format!("need at least 2 balls, got {m}")));
        }
        if radii.len() != m {
            return Err(Error::Schema(format!(
                "radii: expected {m} entries matching centers, got {}",
                radii.len()
            )));
        }
        let n = centers[0].len();
        if n == 0 {
            return Err(Error::Config("variable dimension must be positive".into()));
        }
        for (i, c) in centers.iter().enumerate() {
            if c.len() != n {
                return Err(Error::Schema(format!(
                    "centers[{i}]: expected length {n}, got {}",
                    c.len()
                )));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::Schema(format!("centers[{i}]: non-finite entry")));
            }
        }
        for (i, &r) in radii.iter().enumerate() {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::Schema(format!("radii must be positive, got radii[{i}] = {r}")));
            }
        }
        if objective.a.dim() != n {
            return Err(Error::Schema(format!(
                "objective.A: expected {n}x{n}, got {0}x{0}",
                objective.a.dim()
            )));
        }
        if objective.b.len() != n {
            return Err(Error::Schema(format!(
                "objective.b: expected length {n}, got {}",
                objective.b.len()
            )));
        }
        if !objective.c0.is_finite() || objective.b.iter().any(|v| !v.is_finite()) {
            return Err(Error::Schema("objective: non-finite entry".into()));
        }
        if let Some(w) = &witness {
            if w.len() != n {
                return Err(Error::Schema(format!(
                    "witness: expected length {n}, got {}",
                    w.len()
                )));
            }
        }
        Ok(BallQcqpInstance { n, m, centers, radii, objective, witness })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn center(&self, i: usize) -> &DVector<f64> {
        &self.centers[i]
    }

    pub fn radius(&self, i: usize) -> f64 {
        self.radii[i]
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn witness(&self) -> Option<&DVector<f64>> {
        self.witness.as_ref()
    }

    /// Evaluates `q(x) = x^T A x + 2 b^T x + c0`.
    pub fn evaluate_q(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.objective.a.quad_form(x) + 2.0 * self.objective.b.dot(x) + self.objective.c0)
    }

    /// Ball residuals `g_i(x) = r_i^2 - ||x - c_i||^2`.
    pub fn ball_residuals(&self, x: &DVector<f64>) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok((0..self.m)
            .map(|i| {
                let d = x - &self.centers[i];
                self.radii[i] * self.radii[i] - d.norm_squared()
            })
            .collect())
    }

    /// Membership test: `inside <=> g_i(x) >= -tol.abs` for all `i`.
    pub fn contains(&self, x: &DVector<f64>, tol: ConeTol) -> Result<(bool, Vec<f64>)> {
        let residuals = self.ball_residuals(x)?;
        let inside = residuals.iter().all(|&g| g >= -tol.abs);
        Ok((inside, residuals))
    }

    /// First exit point of the ray `from + t dir` (t >= 0) through the
    /// feasible set, together with the index of the ball whose sphere it
    /// lies on. `from` must be feasible and `dir` nonzero.
    pub fn boundary_exit(&self, from: &DVector<f64>, dir: &DVector<f64>) -> Result<(DVector<f64>, usize)> {
        self.check_dim(from)?;
        self.check_dim(dir)?;
        let norm = dir.norm();
        if norm <= 0.0 {
            return Err(Error::Config("boundary_exit needs a nonzero direction".into()));
        }
        let u = dir / norm;
        let mut best: Option<(f64, usize)> = None;
        for i in 0..self.m {
            let w = from - &self.centers[i];
            // ||w + t u||^2 = r^2: t^2 + 2 (w.u) t + (||w||^2 - r^2) = 0.
            let b = w.dot(&u);
            let c = w.norm_squared() - self.radii[i] * self.radii[i];
            let disc = b * b - c;
            if disc < 0.0 {
                continue;
            }
            let t = -b + disc.sqrt();
            if t >= 0.0 && best.map_or(true, |(tb, _)| t < tb) {
                best = Some((t, i));
            }
        }
        let (t, ball) = best.ok_or_else(|| {
            Error::Numerical("ray never crosses a ball boundary from a feasible point".into())
        })?;
        Ok((from + u * t, ball))
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::Shape(format!(
                "point has length {}, instance dimension is {}",
                x.len(),
                self.n
            )));
        }
        Ok(())
    }

    /// Deterministic random instance with a strictly interior witness point.
    ///
    /// A witness `x_w` is drawn first and every center is placed within
    /// distance `0.9 r_i` of it, so the feasible set has nonempty interior
    /// (a Slater point). The objective is a dense symmetric matrix with
    /// entries in `[-1, 1]`, generically indefinite.
    pub fn generate(params: &GenParams) -> Result<Self> {
        let GenParams { seed, n, m, spread, radius_range: (lo, hi) } = *params;
        if n < 1 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if m < 2 {
            return Err(Error::Config(format!("m must be at least 2, got {m}")));
        }
        if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo <= hi) {
            return Err(Error::Config(format!(
                "radius range must satisfy 0 < lo <= hi, got ({lo}, {hi})"
            )));
        }
        if !(spread.is_finite() && spread >= 0.0) {
            return Err(Error::Config(format!("spread must be nonnegative, got {spread}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let witness = DVector::from_fn(n, |_, _| rng.random_range(-spread..=spread));
        let mut centers = Vec::with_capacity(m);
        let mut radii = Vec::with_capacity(m);
        for _ in 0..m {
            let r = rng.random_range(lo..=hi);
            // Direction via normalized Gaussian, distance a fraction of 0.9 r.
            let dir = DVector::from_fn(n, |_, _| gaussian(&mut rng));
            let norm = dir.norm();
            let dir = if norm > 1e-12 { dir / norm } else { DVector::zeros(n) };
            let dist = 0.9 * r * rng.random_range(0.0..1.0);
            centers.push(&witness + dir * dist);
            radii.push(r);
        }
        let a = {
            let mut draw = || rng.random_range(-1.0..1.0);
            let mut vals = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let v = draw();
                    vals[i * n + j] = v;
                    vals[j * n + i] = v;
                }
            }
            SymMatrix::from_dense(nalgebra::DMatrix::from_row_slice(n, n, &vals))?
        };
        let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let c0 = rng.random_range(-1.0..1.0);
        BallQcqpInstance::new(centers, radii, Objective { a, b, c0 }, Some(witness))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = InstanceFile::from_instance(self);
        let text = serde_json::to_string_pretty(&file)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: InstanceFile = serde_json::from_str(&text)?;
        file.into_instance()
    }
}

/// Box-Muller from two uniforms; enough for center directions.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// On-disk schema. Numbers round-trip bit-exactly (shortest decimal form).
#[derive(Serialize, Deserialize)]
struct InstanceFile {
    n: usize,
    m: usize,
    centers: Vec<Vec<f64>>,
    radii: Vec<f64>,
    objective: ObjectiveFile,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ObjectiveFile {
    /// Full symmetric matrix, row-major.
    #[serde(rename = "A")]
    a: Vec<f64>,
    b: Vec<f64>,
    c0: f64,
}

impl InstanceFile {
    fn from_instance(inst: &BallQcqpInstance) -> Self {
        let n = inst.n;
        let mut a = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                a.push(inst.objective.a.get(i, j));
            }
        }
        InstanceFile {
            n,
            m: inst.m,
            centers: inst.centers.iter().map(|c| c.iter().copied().collect()).collect(),
            radii: inst.radii.clone(),
            objective: ObjectiveFile {
                a,
                b: inst.objective.b.iter().copied().collect(),
                c0: inst.objective.c0,
            },
            witness: inst.witness.as_ref().map(|w| w.iter().copied().collect()),
        }
    }

    fn into_instance(self) -> Result<BallQcqpInstance> {
        if self.centers.len() != self.m {
            return Err(Error::Schema(format!(
                "centers: expected m={} entries, got {}",
                self.m,
                self.centers.len()
            )));
        }
        for (i, c) in self.centers.iter().enumerate() {
            if c.len() != self.n {
                return Err(Error::Schema(format!(
                    "centers[{i}]: expected length n={}, got {}",
                    self.n,
                    c.len()
                )));
            }
        }
        if self.objective.a.len() != self.n * self.n {
            return Err(Error::Schema(format!(
                "objective.A: expected {} entries (row-major {0}x{0} for n={1}), got {2}",
                self.n * self.n,
                self.n,
                self.objective.a.len()
            )));
        }
        let a_mat = nalgebra::DMatrix::from_row_slice(self.n, self.n, &self.objective.a);
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if (a_mat[(i, j)] - a_mat[(j, i)]).abs() > 1e-12 * (1.0 + a_mat[(i, j)].abs()) {
                    return Err(Error::Schema(format!(
                        "objective.A: entry ({i},{j}) is not symmetric"
                    )));
                }
            }
        }
        let objective = Objective {
            a: SymMatrix::from_dense(a_mat)?,
            b: DVector::from_vec(self.objective.b),
            c0: self.objective.c0,
        };
        BallQcqpInstance::new(
            self.centers.into_iter().map(DVector::from_vec).collect(),
            self.radii,
            objective,
            self.witness.map(DVector::from_vec),
        )
    }
}

/// The two-ball line instance used throughout the tests:
/// `n = 1`, `c1 = 0`, `r1 = 1`, `c2 = 1`, `r2 = 1`, `q(x) = -x^2`,
/// so `S = [0, 1]` and the global minimum is `-1` at `x = 1`.
pub fn example_e1() -> BallQcqpInstance {
    BallQcqpInstance::new(
        vec![DVector::from_vec(vec![0.0]), DVector::from_vec(vec![1.0])],
        vec![1.0, 1.0],
        Objective {
            a: SymMatrix::from_rows(&[vec![-1.0]]).unwrap(),
            b: DVector::from_vec(vec![0.0]),
            c0: 0.0,
        },
        Some(DVector::from_vec(vec![0.5])),
    )
    .expect("E1 is valid")
}
