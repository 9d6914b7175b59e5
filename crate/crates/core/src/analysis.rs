//! Space-time error norms, discrete energy and experimental orders of convergence.

use crate::error::Result;
use crate::fem::{ElementQuadrature, FeSpace};
use crate::lifting::LiftedTrajectory;
use crate::problems::WaveProblem;
use crate::quadrature::gauss_rule;
use crate::stepper::{SlabTrajectory, TimePartition};

/// Anything that yields `(u0, u1)` coefficient vectors on a time partition.
pub trait Trajectory {
    fn partition(&self) -> &TimePartition;
    /// Value on slab `s` at time `t`.
    fn eval_in_slab(&self, slab: usize, t: f64) -> [Vec<f64>; 2];
}

impl Trajectory for SlabTrajectory {
    fn partition(&self) -> &TimePartition {
        SlabTrajectory::partition(self)
    }

    fn eval_in_slab(&self, slab: usize, t: f64) -> [Vec<f64>; 2] {
        SlabTrajectory::eval_in_slab(self, slab, t)
    }
}

impl Trajectory for LiftedTrajectory {
    fn partition(&self) -> &TimePartition {
        LiftedTrajectory::partition(self)
    }

    fn eval_in_slab(&self, slab: usize, t: f64) -> [Vec<f64>; 2] {
        LiftedTrajectory::eval_in_slab(self, slab, t)
    }
}

/// Reference solution `u`, `d_t u`, `grad u` to measure against.
pub trait ExactField {
    fn u(&self, x1: f64, x2: f64, t: f64) -> f64;
    fn dtu(&self, x1: f64, x2: f64, t: f64) -> f64;
    fn grad(&self, x1: f64, x2: f64, t: f64) -> [f64; 2];
}

impl ExactField for WaveProblem {
    fn u(&self, x1: f64, x2: f64, t: f64) -> f64 {
        WaveProblem::u(self, x1, x2, t)
    }

    fn dtu(&self, x1: f64, x2: f64, t: f64) -> f64 {
        WaveProblem::dtu(self, x1, x2, t)
    }

    fn grad(&self, x1: f64, x2: f64, t: f64) -> [f64; 2] {
        WaveProblem::grad(self, x1, x2, t)
    }
}

/// The zero field; useful for measuring norms of discrete functions.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroField;

impl ExactField for ZeroField {
    fn u(&self, _: f64, _: f64, _: f64) -> f64 {
        0.0
    }

    fn dtu(&self, _: f64, _: f64, _: f64) -> f64 {
        0.0
    }

    fn grad(&self, _: f64, _: f64, _: f64) -> [f64; 2] {
        [0.0, 0.0]
    }
}

/// Squared spatial errors at one instant.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SpatialErrors {
    pub e0_sq: f64,
    pub e1_sq: f64,
    pub grad_e0_sq: f64,
}

impl SpatialErrors {
    pub fn energy(&self) -> f64 {
        (self.grad_e0_sq + self.e1_sq).sqrt()
    }
}

/// Precomputed per-cell quadrature for repeated spatial error evaluation.
pub struct ErrorEvaluator<'a> {
    space: &'a FeSpace,
    quad: ElementQuadrature,
    points: Vec<[f64; 2]>,
    local_dofs: Vec<Vec<Option<usize>>>,
    jac: f64,
    grad_scale: f64,
}

impl<'a> ErrorEvaluator<'a> {
    /// Uses `r + 3` Gauss points per direction.
    pub fn new(space: &'a FeSpace) -> Result<Self> {
        Self::with_points(space, space.degree() + 3)
    }

    pub fn with_points(space: &'a FeSpace, points_per_dir: usize) -> Result<Self> {
        let quad = space.element_quadrature(points_per_dir)?;
        let ncells = space.mesh().num_cells();
        let mut points = Vec::with_capacity(ncells * quad.len());
        let mut local_dofs = Vec::with_capacity(ncells);
        for c in 0..ncells {
            for xi in &quad.points {
                points.push(space.map_point(c, *xi));
            }
            local_dofs.push(space.cell_dofs(c).iter().map(|&g| space.interior_index(g)).collect());
        }
        let h = space.mesh().cell_size;
        Ok(ErrorEvaluator {
            space,
            quad,
            points,
            local_dofs,
            jac: 0.25 * h * h,
            grad_scale: 2.0 / h,
        })
    }

    pub fn space(&self) -> &FeSpace {
        self.space
    }

    /// Errors of several discrete states against the same exact field at time `t`.
    pub fn errors_many(&self, states: &[&[Vec<f64>; 2]], exact: &dyn ExactField, t: f64) -> Vec<SpatialErrors> {
        let nq = self.quad.len();
        let mut out = vec![SpatialErrors::default(); states.len()];
        let mut local0 = vec![0.0; self.local_dofs.first().map_or(0, |d| d.len())];
        let mut local1 = local0.clone();
        for (c, dofs) in self.local_dofs.iter().enumerate() {
            let cell_points = &self.points[c * nq..(c + 1) * nq];
            let exact_vals: Vec<(f64, f64, [f64; 2])> = cell_points
                .iter()
                .map(|x| (exact.u(x[0], x[1], t), exact.dtu(x[0], x[1], t), exact.grad(x[0], x[1], t)))
                .collect();
            for (state, acc) in states.iter().zip(out.iter_mut()) {
                for (l, d) in dofs.iter().enumerate() {
                    let (a, b) = d.map_or((0.0, 0.0), |i| (state[0][i], state[1][i]));
                    local0[l] = a;
                    local1[l] = b;
                }
                for q in 0..nq {
                    let (mut v0, mut v1, mut g0, mut g1) = (0.0, 0.0, 0.0, 0.0);
                    let phi = &self.quad.values[q];
                    let dphi = &self.quad.grads[q];
                    for l in 0..local0.len() {
                        v0 += local0[l] * phi[l];
                        v1 += local1[l] * phi[l];
                        g0 += local0[l] * dphi[l][0];
                        g1 += local0[l] * dphi[l][1];
                    }
                    let (u, ut, gu) = exact_vals[q];
                    let w = self.quad.weights[q] * self.jac;
                    let e0 = u - v0;
                    let e1 = ut - v1;
                    let ex = gu[0] - g0 * self.grad_scale;
                    let ey = gu[1] - g1 * self.grad_scale;
                    acc.e0_sq += w * e0 * e0;
                    acc.e1_sq += w * e1 * e1;
                    acc.grad_e0_sq += w * (ex * ex + ey * ey);
                }
            }
        }
        out
    }

    pub fn errors(&self, state: &[Vec<f64>; 2], exact: &dyn ExactField, t: f64) -> SpatialErrors {
        self.errors_many(&[state], exact, t)[0]
    }
}

/// The six space-time error quantities of one solution.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErrorNorms {
    pub e0_linf: f64,
    pub e1_linf: f64,
    pub e0_l2: f64,
    pub e1_l2: f64,
    pub energy_linf: f64,
    pub energy_l2: f64,
}

impl ErrorNorms {
    pub const NAMES: [&'static str; 6] = ["e0_linf", "e1_linf", "e0_l2", "e1_l2", "energy_linf", "energy_l2"];

    pub fn as_array(&self) -> [f64; 6] {
        [self.e0_linf, self.e1_linf, self.e0_l2, self.e1_l2, self.energy_linf, self.energy_l2]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        ErrorNorms {
            e0_linf: a[0],
            e1_linf: a[1],
            e0_l2: a[2],
            e1_l2: a[3],
            energy_linf: a[4],
            energy_l2: a[5],
        }
    }
}

/// Sampling used by [`compute_error_norms`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sampling {
    /// equispaced samples per slab for the `L^inf` norms (`t = T` is added)
    pub samples_per_slab: usize,
    /// Gauss points per slab for the `L^2` norms
    pub time_quad_pts: usize,
}

impl Sampling {
    /// 1000 samples per slab, `k + 3` Gauss points.
    pub fn for_degree(k: usize) -> Self {
        Sampling {
            samples_per_slab: 1000,
            time_quad_pts: k + 3,
        }
    }
}

/// Sample times `t_s + j tau_s / m` for every slab and `j < m`, followed by `T`.
pub fn sample_grid(partition: &TimePartition, samples_per_slab: usize) -> Vec<(usize, f64)> {
    let m = samples_per_slab.max(1);
    let mut grid = Vec::with_capacity(partition.num_slabs() * m + 1);
    for s in 0..partition.num_slabs() {
        let (t0, tau) = (partition.times()[s], partition.tau(s));
        for j in 0..m {
            grid.push((s, t0 + j as f64 * tau / m as f64));
        }
    }
    grid.push((partition.num_slabs() - 1, partition.end()));
    grid
}

/// All six norms for each solution in `solutions` (which must share one partition).
pub fn compute_error_norms(
    solutions: &[&dyn Trajectory],
    evaluator: &ErrorEvaluator,
    exact: &dyn ExactField,
    sampling: Sampling,
) -> Result<Vec<ErrorNorms>> {
    let Some(first) = solutions.first() else {
        return Ok(Vec::new());
    };
    let partition = first.partition();
    let mut norms = vec![ErrorNorms::default(); solutions.len()];

    for (slab, t) in sample_grid(partition, sampling.samples_per_slab) {
        let states: Vec<[Vec<f64>; 2]> = solutions.iter().map(|s| s.eval_in_slab(slab, t)).collect();
        let refs: Vec<&[Vec<f64>; 2]> = states.iter().collect();
        for (n, e) in norms.iter_mut().zip(evaluator.errors_many(&refs, exact, t)) {
            n.e0_linf = n.e0_linf.max(e.e0_sq.sqrt());
            n.e1_linf = n.e1_linf.max(e.e1_sq.sqrt());
            n.energy_linf = n.energy_linf.max(e.energy());
        }
    }

    let rule = gauss_rule(sampling.time_quad_pts.max(1))?;
    let mut sums = vec![[0.0f64; 3]; solutions.len()];
    for s in 0..partition.num_slabs() {
        let half = 0.5 * partition.tau(s);
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let t = partition.to_physical(s, x);
            let states: Vec<[Vec<f64>; 2]> = solutions.iter().map(|sol| sol.eval_in_slab(s, t)).collect();
            let refs: Vec<&[Vec<f64>; 2]> = states.iter().collect();
            for (acc, e) in sums.iter_mut().zip(evaluator.errors_many(&refs, exact, t)) {
                acc[0] += half * w * e.e0_sq;
                acc[1] += half * w * e.e1_sq;
                acc[2] += half * w * (e.grad_e0_sq + e.e1_sq);
            }
        }
    }
    for (n, acc) in norms.iter_mut().zip(&sums) {
        n.e0_l2 = acc[0].sqrt();
        n.e1_l2 = acc[1].sqrt();
        n.energy_l2 = acc[2].sqrt();
    }
    Ok(norms)
}

/// `(||e0||_{L^inf(L^2)}, ||e1||_{L^inf(L^2)})` over the sampling grid.
pub fn linf_l2_error(
    solution: &dyn Trajectory,
    evaluator: &ErrorEvaluator,
    exact: &dyn ExactField,
    samples_per_slab: usize,
) -> Result<(f64, f64)> {
    let n = compute_error_norms(&[solution], evaluator, exact, Sampling { samples_per_slab, time_quad_pts: 1 })?[0];
    Ok((n.e0_linf, n.e1_linf))
}

/// `(||e0||_{L^2(L^2)}, ||e1||_{L^2(L^2)})` with Gauss quadrature in time.
pub fn l2_l2_error(
    solution: &dyn Trajectory,
    evaluator: &ErrorEvaluator,
    exact: &dyn ExactField,
    time_quad_pts: usize,
) -> Result<(f64, f64)> {
    let n = compute_error_norms(&[solution], evaluator, exact, Sampling { samples_per_slab: 1, time_quad_pts })?[0];
    Ok((n.e0_l2, n.e1_l2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyMode {
    Linf,
    L2,
}

/// `sqrt(||grad e0||^2 + ||e1||^2)`, maximized over the grid or integrated in time.
pub fn energy_error(
    solution: &dyn Trajectory,
    evaluator: &ErrorEvaluator,
    exact: &dyn ExactField,
    mode: EnergyMode,
    sampling: Sampling,
) -> Result<f64> {
    let n = compute_error_norms(&[solution], evaluator, exact, sampling)?[0];
    Ok(match mode {
        EnergyMode::Linf => n.energy_linf,
        EnergyMode::L2 => n.energy_l2,
    })
}

/// `U1^T M U1 + U0^T A U0` at the time node `t_n`.
pub fn discrete_energy(traj: &SlabTrajectory, space: &FeSpace, n: usize) -> f64 {
    let u0 = traj.value_at_time_node(0, n);
    let u1 = traj.value_at_time_node(1, n);
    space.mass().quadratic_form(u1) + space.stiffness().quadratic_form(u0)
}

/// `log(e_{i-1}/e_i)/log(ratio)`; `None` for the first entry and for non-positive errors.
pub fn eoc(errors: &[f64], ratio: f64) -> Vec<Option<f64>> {
    let mut out = Vec::with_capacity(errors.len());
    for (i, &e) in errors.iter().enumerate() {
        if i == 0 {
            out.push(None);
            continue;
        }
        let prev = errors[i - 1];
        out.push(if prev > 0.0 && e > 0.0 {
            Some((prev / e).ln() / ratio.ln())
        } else {
            None
        });
    }
    out
}
