use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::{DMatrix, Matrix3};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{fit_rotation, TriangleMesh, Vec3};
use crate::solvers::ordering::reverse_cuthill_mckee;
use crate::solvers::{fit_rigid, MotionCompletionProblem};

pub const DEFAULT_LAMBDA_DATA: f64 = 1.0;

/// Energies below this fraction of the rest-shape scale count as zero.
const ZERO_ENERGY: f64 = 1e-24;
/// Slack, relative to the rest-shape scale, for the monotonicity check.
const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeWeights {
    /// Cotangent weights, clamped at zero.
    #[default]
    Cotangent,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintMode {
    /// Visible vertices are fixed at their observed positions.
    #[default]
    Hard,
    /// Visible vertices are pulled towards their observed positions with
    /// penalty `weight`.
    Soft { weight: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArapConfig {
    pub weights: EdgeWeights,
    pub max_iterations: usize,
    /// Stop once the relative energy decrease of an iteration falls below this.
    pub tolerance: f64,
    pub constraints: ConstraintMode,
}

impl Default for ArapConfig {
    fn default() -> Self {
        Self {
            weights: EdgeWeights::Cotangent,
            max_iterations: 100,
            tolerance: 1e-6,
            constraints: ConstraintMode::Hard,
        }
    }
}

impl ArapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return Err(Error::Config(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if let ConstraintMode::Soft { weight } = self.constraints {
            if !(weight > 0.0) || !weight.is_finite() {
                return Err(Error::Config(format!("soft constraint weight must be positive, got {weight}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Objective after initialization, then after every iteration.
    pub energies: Vec<f64>,
    pub final_energy: f64,
    /// `Σ w |p_i - p_j|²` over the rest shape; scale for energy comparisons.
    pub energy_scale: f64,
    pub converged: bool,
    pub wall_time_s: f64,
}

impl SolveReport {
    /// True when no iteration raised the energy beyond round-off.
    pub fn is_non_increasing(&self) -> bool {
        let slack = MONOTONE_SLACK * self.energy_scale;
        self.energies.windows(2).all(|w| w[1] <= w[0] + slack)
    }

    /// `key = value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "iterations = {}", self.iterations);
        let _ = writeln!(s, "final_energy = {:e}", self.final_energy);
        let _ = writeln!(s, "converged = {}", self.converged);
        let _ = writeln!(s, "non_increasing = {}", self.is_non_increasing());
        let _ = writeln!(s, "wall_time_s = {:.6}", self.wall_time_s);
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArapResult {
    /// Per-vertex motion for every vertex of the mesh.
    pub motion: Vec<Vec3>,
    pub report: SolveReport,
}

/// Symmetric adjacency with positive edge weights.
fn edge_weights(mesh: &TriangleMesh, scheme: EdgeWeights) -> Vec<Vec<(usize, f64)>> {
    let mut acc: BTreeMap<(u32, u32), f64> = mesh.edges().into_iter().map(|[a, b]| ((a, b), 0.0)).collect();
    let key = |a: u32, b: u32| if a < b { (a, b) } else { (b, a) };
    match scheme {
        EdgeWeights::Uniform => acc.values_mut().for_each(|w| *w = 1.0),
        EdgeWeights::Cotangent => {
            let v = mesh.vertices();
            for t in mesh.triangles() {
                for k in 0..3 {
                    let (a, b, c) = (t[k], t[(k + 1) % 3], t[(k + 2) % 3]);
                    let u = v[b as usize] - v[a as usize];
                    let w = v[c as usize] - v[a as usize];
                    let cross = u.cross(&w).norm();
                    if cross > 0.0 {
                        *acc.get_mut(&key(b, c)).expect("triangle edge") += 0.5 * u.dot(&w) / cross;
                    }
                }
            }
        }
    }
    let mut nbrs = vec![Vec::new(); mesh.vertex_count()];
    for ((a, b), w) in acc {
        if w > 0.0 {
            nbrs[a as usize].push((b as usize, w));
            nbrs[b as usize].push((a as usize, w));
        }
    }
    nbrs
}

/// Local-global minimizer of
/// `Σ_i Σ_j w_ij |(x_i - x_j) - R_i (p_i - p_j)|² + Σ_i c_i |x_i - q_i|²`
/// with some `x_i` optionally fixed.
struct Problem<'a> {
    rest: &'a [Vec3],
    nbrs: Vec<Vec<(usize, f64)>>,
    data: Vec<Option<(f64, Vec3)>>,
    fixed: Vec<Option<Vec3>>,
}

impl Problem<'_> {
    fn energy_scale(&self) -> f64 {
        self.nbrs
            .iter()
            .enumerate()
            .flat_map(|(i, n)| n.iter().map(move |&(j, w)| w * (self.rest[i] - self.rest[j]).norm_squared()))
            .sum()
    }

    fn check_connected(&self) -> Result<()> {
        let n = self.rest.len();
        let mut seen: Vec<bool> = (0..n).map(|i| self.fixed[i].is_some() || self.data[i].is_some()).collect();
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| seen[i]).collect();
        while let Some(i) = queue.pop_front() {
            for &(j, _) in &self.nbrs[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        let lost: Vec<u32> = (0..n as u32).filter(|&i| !seen[i as usize]).collect();
        if lost.is_empty() {
            Ok(())
        } else {
            Err(Error::UnconstrainedComponent { vertices: lost })
        }
    }

    fn rotations(&self, x: &[Vec3]) -> Vec<Matrix3<f64>> {
        (0..x.len())
            .into_par_iter()
            .map(|i| {
                let cov = self.nbrs[i].iter().fold(Matrix3::zeros(), |acc, &(j, w)| {
                    acc + (self.rest[i] - self.rest[j]) * (x[i] - x[j]).transpose() * w
                });
                fit_rotation(&cov).unwrap_or_else(Matrix3::identity)
            })
            .collect()
    }

    fn energy(&self, x: &[Vec3], rot: &[Matrix3<f64>]) -> f64 {
        (0..x.len())
            .into_par_iter()
            .map(|i| {
                let arap: f64 = self.nbrs[i]
                    .iter()
                    .map(|&(j, w)| w * ((x[i] - x[j]) - rot[i] * (self.rest[i] - self.rest[j])).norm_squared())
                    .sum();
                let data = self.data[i].map_or(0.0, |(c, q)| c * (x[i] - q).norm_squared());
                arap + data
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum()
    }

    fn solve(&self, init: Vec<Vec3>, config: &ArapConfig) -> Result<(Vec<Vec3>, SolveReport)> {
        let start = Instant::now();
        self.check_connected()?;
        let n = self.rest.len();
        let mut x = init;
        for (i, f) in self.fixed.iter().enumerate() {
            if let Some(p) = f {
                x[i] = *p;
            }
        }
        let free: Vec<usize> = (0..n).filter(|&i| self.fixed[i].is_none()).collect();
        let scale = self.energy_scale();

        let mut rot = self.rotations(&x);
        let mut energies = vec![self.energy(&x, &rot)];
        let mut converged = free.is_empty() || energies[0] <= ZERO_ENERGY * scale;

        if !converged {
            let system = GlobalSystem::new(self, &free)?;
            for _ in 0..config.max_iterations {
                system.solve(self, &rot, &mut x);
                rot = self.rotations(&x);
                let e = self.energy(&x, &rot);
                let prev = *energies.last().expect("initial energy");
                energies.push(e);
                if e > prev + MONOTONE_SLACK * scale {
                    log::warn!("energy increased from {prev:e} to {e:e}");
                }
                if prev - e <= config.tolerance * prev || e <= ZERO_ENERGY * scale {
                    converged = true;
                    break;
                }
            }
        }
        let report = SolveReport {
            iterations: energies.len() - 1,
            final_energy: *energies.last().expect("initial energy"),
            energies,
            energy_scale: scale,
            converged,
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        Ok((x, report))
    }
}

/// Factored system matrix over the free vertices, in fill-reducing order.
struct GlobalSystem {
    /// `perm[k]` = vertex at position `k`.
    perm: Vec<usize>,
    chol: CscCholesky<f64>,
}

impl GlobalSystem {
    fn new(problem: &Problem, free: &[usize]) -> Result<Self> {
        let n = problem.rest.len();
        let mut local = vec![usize::MAX; n];
        for (k, &v) in free.iter().enumerate() {
            local[v] = k;
        }
        let adjacency: Vec<Vec<usize>> = free
            .iter()
            .map(|&v| {
                problem.nbrs[v]
                    .iter()
                    .filter_map(|&(j, _)| (local[j] != usize::MAX).then_some(local[j]))
                    .collect()
            })
            .collect();
        let order = reverse_cuthill_mckee(&adjacency);
        let mut pos = vec![0; free.len()];
        for (k, &l) in order.iter().enumerate() {
            pos[l] = k;
        }

        let mut coo = CooMatrix::new(free.len(), free.len());
        for (l, &v) in free.iter().enumerate() {
            let row = pos[l];
            let mut diag = problem.data[v].map_or(0.0, |(c, _)| 0.5 * c);
            for &(j, w) in &problem.nbrs[v] {
                diag += w;
                if local[j] != usize::MAX {
                    coo.push(row, pos[local[j]], -w);
                }
            }
            coo.push(row, row, diag);
        }
        let chol = CscCholesky::factor(&CscMatrix::from(&coo))
            .map_err(|e| Error::Numerical(format!("global system factorization failed: {e}")))?;
        let perm = order.iter().map(|&l| free[l]).collect();
        Ok(Self { perm, chol })
    }

    /// Optimal free positions for fixed rotations, written into `x`.
    fn solve(&self, problem: &Problem, rot: &[Matrix3<f64>], x: &mut [Vec3]) {
        let rhs_rows: Vec<Vec3> = self
            .perm
            .par_iter()
            .map(|&i| {
                let mut b = problem.data[i].map_or(Vec3::zeros(), |(c, q)| q * (0.5 * c));
                for &(j, w) in &problem.nbrs[i] {
                    b += (rot[i] + rot[j]) * (problem.rest[i] - problem.rest[j]) * (0.5 * w);
                    if let Some(xj) = problem.fixed[j] {
                        b += xj * w;
                    }
                }
                b
            })
            .collect();
        let rhs = DMatrix::from_fn(rhs_rows.len(), 3, |r, c| rhs_rows[r][c]);
        let sol = self.chol.solve(&rhs);
        for (k, &i) in self.perm.iter().enumerate() {
            x[i] = Vec3::new(sol[(k, 0)], sol[(k, 1)], sol[(k, 2)]);
        }
    }
}

/// Completes the motion of hidden vertices by ARAP deformation, starting
/// from the best rigid fit of the visible motion.
pub fn arap_complete(problem: &MotionCompletionProblem, config: &ArapConfig) -> Result<ArapResult> {
    config.validate()?;
    let mesh = problem.mesh();
    let rest = mesh.vertices();
    let init: Vec<Vec3> = match fit_rigid(problem) {
        Ok(fit) => rest.iter().zip(&fit.motion).map(|(p, m)| p + m).collect(),
        Err(Error::DegenerateGeometry(reason)) => {
            log::debug!("rigid initialization unavailable ({reason}); using mean visible motion");
            let mean = problem.visible_motion().iter().sum::<Vec3>() / problem.visible().len() as f64;
            rest.iter().map(|p| p + mean).collect()
        }
        Err(e) => return Err(e),
    };

    let n = rest.len();
    let mut fixed = vec![None; n];
    let mut data = vec![None; n];
    for (&i, m) in problem.visible().iter().zip(problem.visible_motion()) {
        let target = rest[i as usize] + m;
        match config.constraints {
            ConstraintMode::Hard => fixed[i as usize] = Some(target),
            ConstraintMode::Soft { weight } => data[i as usize] = Some((weight, target)),
        }
    }
    let arap = Problem {
        rest,
        nbrs: edge_weights(mesh, config.weights),
        data,
        fixed,
    };
    let (x, report) = arap.solve(init, config)?;
    let mut motion: Vec<Vec3> = x.iter().zip(rest).map(|(x, p)| x - p).collect();
    if config.constraints == ConstraintMode::Hard {
        for (&i, m) in problem.visible().iter().zip(problem.visible_motion()) {
            motion[i as usize] = *m;
        }
    }
    Ok(ArapResult { motion, report })
}

/// Regularizes a dense predicted motion field with the ARAP prior, weighing
/// agreement with the prediction by `lambda_data`.
pub fn arap_post_process(
    mesh: &TriangleMesh,
    predicted: &[Vec3],
    lambda_data: f64,
    config: &ArapConfig,
) -> Result<ArapResult> {
    config.validate()?;
    if predicted.len() != mesh.vertex_count() {
        return Err(Error::invalid(format!(
            "{} motion vectors for {} vertices",
            predicted.len(),
            mesh.vertex_count()
        )));
    }
    if !predicted.iter().all(|m| m.iter().all(|c| c.is_finite())) {
        return Err(Error::invalid("predicted motion contains non-finite values"));
    }
    if !(lambda_data > 0.0) || !lambda_data.is_finite() {
        return Err(Error::invalid(format!("lambda_data must be positive, got {lambda_data}")));
    }
    let rest = mesh.vertices();
    let targets: Vec<Vec3> = rest.iter().zip(predicted).map(|(p, m)| p + m).collect();
    let arap = Problem {
        rest,
        nbrs: edge_weights(mesh, config.weights),
        data: targets.iter().map(|q| Some((lambda_data, *q))).collect(),
        fixed: vec![None; rest.len()],
    };
    let (x, report) = arap.solve(targets, config)?;
    let motion = x.iter().zip(rest).map(|(x, p)| x - p).collect();
    Ok(ArapResult { motion, report })
}
