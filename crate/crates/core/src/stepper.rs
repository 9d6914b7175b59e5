//! cGP(k) time stepping for the method-of-lines system
//!
//! ```text
//! M d_t u0 - M u1 = 0
//! M d_t u1 + A u0 = b_f(t)
//! ```
//!
//! On each slab both components are polynomials of degree `k`, represented by
//! their values at the `k+1` Gauss-Lobatto points. The value at the left node is
//! inherited from the previous slab; the `k` remaining node values of each
//! component are found from one `2 k N` block system. Test functions are the
//! Lagrange polynomials of degree `k-1` at the `k` Gauss points and every time
//! integral uses the Gauss-Lobatto rule.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{ElementQuadrature, FeSpace};
use crate::linalg::{lu_factor, CsrMatrix, LuFactor};
use crate::problems::WaveProblem;
use crate::quadrature::{gauss_lobatto_rule, gauss_rule, NodalBasis, Rule1D};

pub type LoadFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// Semi-discrete wave system in coefficient form.
#[derive(Clone)]
pub struct MolSystem {
    mass: CsrMatrix,
    stiffness: CsrMatrix,
    load: LoadFn,
    initial: [Vec<f64>; 2],
    solver_tol: f64,
}

impl std::fmt::Debug for MolSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MolSystem").field("dim", &self.dim()).finish()
    }
}

impl MolSystem {
    pub fn new(mass: CsrMatrix, stiffness: CsrMatrix, load: LoadFn, initial: [Vec<f64>; 2]) -> Result<Self> {
        let n = mass.nrows();
        if mass.ncols() != n || stiffness.nrows() != n || stiffness.ncols() != n {
            return Err(Error::invalid("mass and stiffness must be square of equal size"));
        }
        if initial.iter().any(|v| v.len() != n) {
            return Err(Error::invalid("initial vectors do not match the system size"));
        }
        Ok(MolSystem {
            mass,
            stiffness,
            load,
            initial,
            solver_tol: crate::fem::PROJECTION_TOL,
        })
    }

    /// Sets the relative CG tolerance of mass solves.
    pub fn with_solver_tol(mut self, tol: f64) -> Self {
        self.solver_tol = tol;
        self
    }

    pub fn solver_tol(&self) -> f64 {
        self.solver_tol
    }

    pub fn dim(&self) -> usize {
        self.mass.nrows()
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn initial(&self) -> &[Vec<f64>; 2] {
        &self.initial
    }

    /// Assembled load `b_f(t)`.
    pub fn load(&self, t: f64) -> Vec<f64> {
        (self.load)(t)
    }
}

/// How the discrete initial data are obtained from `u_0`, `u_1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialMode {
    Ritz,
    Interpolate,
}

impl std::str::FromStr for InitialMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ritz" => Ok(InitialMode::Ritz),
            "interpolate" => Ok(InitialMode::Interpolate),
            other => Err(Error::invalid(format!("unknown initial mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for InitialMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InitialMode::Ritz => "ritz",
            InitialMode::Interpolate => "interpolate",
        })
    }
}

pub fn make_system(space: Arc<FeSpace>, problem: &WaveProblem, mode: InitialMode) -> Result<MolSystem> {
    let initial = match mode {
        InitialMode::Ritz => [space.ritz_project(&problem.u0)?, space.ritz_project(&problem.u1)?],
        InitialMode::Interpolate => [space.interpolate(&problem.u0), space.interpolate(&problem.u1)],
    };
    let quad: ElementQuadrature = space.element_quadrature(space.degree() + 2)?;
    let f = problem.rhs_f.clone();
    let sp = space.clone();
    let load: LoadFn = Arc::new(move |t| sp.assemble_load_with(&quad, |x1, x2| f(x1, x2, t)));
    Ok(MolSystem::new(space.mass().clone(), space.stiffness().clone(), load, initial)?.with_solver_tol(space.solver_tol()))
}

/// Time grid `0 = t_0 < ... < t_N = T` with the Gauss-Lobatto nodes of each slab.
///
/// Slabs are indexed from 0 here: slab `s` is `(t_s, t_{s+1}]`.
#[derive(Debug, Clone)]
pub struct TimePartition {
    times: Vec<f64>,
    degree: usize,
    lobatto: Rule1D,
    uniform_tau: Option<f64>,
}

impl TimePartition {
    pub fn uniform(final_time: f64, steps: usize, degree: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::invalid("need at least one time step"));
        }
        let tau = final_time / steps as f64;
        let mut times: Vec<f64> = (0..=steps).map(|n| n as f64 * tau).collect();
        times[steps] = final_time;
        let mut p = Self::from_grid(times, degree)?;
        p.uniform_tau = Some(tau);
        Ok(p)
    }

    pub fn from_grid(times: Vec<f64>, degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::invalid("temporal degree must be at least 1"));
        }
        if times.len() < 2 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("time grid must be strictly increasing with at least one slab"));
        }
        Ok(TimePartition {
            times,
            degree,
            lobatto: gauss_lobatto_rule(degree + 1)?,
            uniform_tau: None,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_slabs(&self) -> usize {
        self.times.len() - 1
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Step size of slab `s`; uniform grids report the same value for every slab.
    pub fn tau(&self, slab: usize) -> f64 {
        self.uniform_tau.unwrap_or(self.times[slab + 1] - self.times[slab])
    }

    pub fn max_tau(&self) -> f64 {
        (0..self.num_slabs()).map(|s| self.tau(s)).fold(0.0, f64::max)
    }

    pub fn lobatto(&self) -> &Rule1D {
        &self.lobatto
    }

    /// Physical time of reference point `xhat` in slab `s`.
    pub fn to_physical(&self, slab: usize, xhat: f64) -> f64 {
        let (a, b) = (self.times[slab], self.times[slab + 1]);
        0.5 * (a + b) + 0.5 * (b - a) * xhat
    }

    pub fn to_reference(&self, slab: usize, t: f64) -> f64 {
        let (a, b) = (self.times[slab], self.times[slab + 1]);
        (2.0 * t - (a + b)) / (b - a)
    }

    /// Gauss-Lobatto nodes `t_{s,0} = t_s, ..., t_{s,k} = t_{s+1}`.
    pub fn slab_nodes(&self, slab: usize) -> Vec<f64> {
        let mut nodes: Vec<f64> = self.lobatto.nodes.iter().map(|&x| self.to_physical(slab, x)).collect();
        nodes[0] = self.times[slab];
        nodes[self.degree] = self.times[slab + 1];
        nodes
    }

    /// Slab containing `t`: slab 0 for `t = t_0`, otherwise the `s` with `t in (t_s, t_{s+1}]`.
    pub fn locate(&self, t: f64) -> Result<usize> {
        let (start, end) = (self.start(), self.end());
        let slack = 1e-14 * (end - start).abs().max(1.0);
        if !(t >= start - slack && t <= end + slack) {
            return Err(Error::OutOfRange { t, start, end });
        }
        let idx = self.times.partition_point(|&x| x < t);
        Ok(idx.saturating_sub(1).min(self.num_slabs() - 1))
    }
}

/// Reference-interval coefficients shared by every slab of a given degree.
#[derive(Debug, Clone)]
pub struct TimeStencil {
    degree: usize,
    lobatto: Rule1D,
    basis: NodalBasis,
    /// `alpha[j][nu] = w_nu psi_j(x_nu)`, `j < k`, `nu <= k`
    alpha: Vec<Vec<f64>>,
    /// `coupling[j][mu] = sum_nu alpha[j][nu] D[nu][mu]`
    coupling: Vec<Vec<f64>>,
}

impl TimeStencil {
    pub fn new(degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::invalid("temporal degree must be at least 1"));
        }
        let lobatto = gauss_lobatto_rule(degree + 1)?;
        let basis = NodalBasis::new(&lobatto.nodes)?;
        let test = NodalBasis::new(&gauss_rule(degree)?.nodes)?;
        let mut alpha = vec![vec![0.0; degree + 1]; degree];
        for nu in 0..=degree {
            let psi = test.values(lobatto.nodes[nu]);
            for j in 0..degree {
                alpha[j][nu] = lobatto.weights[nu] * psi[j];
            }
        }
        let d = basis.diff_matrix();
        let coupling = (0..degree)
            .map(|j| {
                (0..=degree)
                    .map(|mu| (0..=degree).map(|nu| alpha[j][nu] * d[nu][mu]).sum())
                    .collect()
            })
            .collect();
        Ok(TimeStencil {
            degree,
            lobatto,
            basis,
            alpha,
            coupling,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn basis(&self) -> &NodalBasis {
        &self.basis
    }

    pub fn lobatto(&self) -> &Rule1D {
        &self.lobatto
    }

    pub fn alpha(&self) -> &[Vec<f64>] {
        &self.alpha
    }

    pub fn coupling(&self) -> &[Vec<f64>] {
        &self.coupling
    }
}

/// The slab system as a linear operator on the `2 k N` unknowns.
///
/// Unknown layout is interleaved by spatial dof: index `i * 2k + c * k + (mu - 1)`
/// holds component `c` at Gauss-Lobatto node `mu` for dof `i`. Equation rows use
/// the same layout with `c` the equation and `mu - 1` replaced by the test index.
/// Rows are scaled by `tau/2`.
pub struct BlockOperator<'a> {
    stencil: &'a TimeStencil,
    mass: &'a CsrMatrix,
    stiffness: &'a CsrMatrix,
    tau: f64,
}

impl<'a> BlockOperator<'a> {
    pub fn new(stencil: &'a TimeStencil, mass: &'a CsrMatrix, stiffness: &'a CsrMatrix, tau: f64) -> Self {
        BlockOperator {
            stencil,
            mass,
            stiffness,
            tau,
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.stencil.degree * self.mass.nrows()
    }

    #[inline]
    fn index(&self, dof: usize, comp: usize, local: usize) -> usize {
        let k = self.stencil.degree;
        dof * 2 * k + comp * k + local
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let k = self.stencil.degree;
        let n = self.mass.nrows();
        let half = 0.5 * self.tau;
        // per node mu: M u0, M u1, A u0
        let gather = |comp: usize, mu: usize| -> Vec<f64> { (0..n).map(|i| x[self.index(i, comp, mu - 1)]).collect() };
        let mut mu0 = Vec::with_capacity(k);
        let mut mu1 = Vec::with_capacity(k);
        let mut au0 = Vec::with_capacity(k);
        for mu in 1..=k {
            let u0 = gather(0, mu);
            let u1 = gather(1, mu);
            mu0.push(self.mass.mul_vec(&u0));
            mu1.push(self.mass.mul_vec(&u1));
            au0.push(self.stiffness.mul_vec(&u0));
        }
        let c = &self.stencil.coupling;
        let a = &self.stencil.alpha;
        let mut y = vec![0.0; self.dim()];
        for i in 0..n {
            for j in 0..k {
                let mut r0 = 0.0;
                let mut r1 = 0.0;
                for mu in 1..=k {
                    r0 += c[j][mu] * mu0[mu - 1][i] - half * a[j][mu] * mu1[mu - 1][i];
                    r1 += c[j][mu] * mu1[mu - 1][i] + half * a[j][mu] * au0[mu - 1][i];
                }
                y[self.index(i, 0, j)] = r0;
                y[self.index(i, 1, j)] = r1;
            }
        }
        y
    }

    pub fn assemble(&self) -> CsrMatrix {
        let k = self.stencil.degree;
        let n = self.mass.nrows();
        let half = 0.5 * self.tau;
        let c = &self.stencil.coupling;
        let a = &self.stencil.alpha;
        let mut trip = Vec::new();
        for i in 0..n {
            let (mcols, mvals) = self.mass.row(i);
            let (acols, avals) = self.stiffness.row(i);
            for j in 0..k {
                for mu in 1..=k {
                    for (&l, &m) in mcols.iter().zip(mvals) {
                        trip.push((self.index(i, 0, j), self.index(l, 0, mu - 1), c[j][mu] * m));
                        trip.push((self.index(i, 0, j), self.index(l, 1, mu - 1), -half * a[j][mu] * m));
                        trip.push((self.index(i, 1, j), self.index(l, 1, mu - 1), c[j][mu] * m));
                    }
                    for (&l, &v) in acols.iter().zip(avals) {
                        trip.push((self.index(i, 1, j), self.index(l, 0, mu - 1), half * a[j][mu] * v));
                    }
                }
            }
        }
        let dim = self.dim();
        CsrMatrix::from_triplets(dim, dim, &trip)
    }

    /// Right-hand side for known left values `prev` and loads `b_f` at all `k+1` nodes.
    pub fn rhs(&self, prev: [&[f64]; 2], loads: &[Vec<f64>]) -> Vec<f64> {
        let k = self.stencil.degree;
        let n = self.mass.nrows();
        let half = 0.5 * self.tau;
        let c = &self.stencil.coupling;
        let a = &self.stencil.alpha;
        let m0 = self.mass.mul_vec(prev[0]);
        let m1 = self.mass.mul_vec(prev[1]);
        let a0 = self.stiffness.mul_vec(prev[0]);
        let mut y = vec![0.0; self.dim()];
        for i in 0..n {
            for j in 0..k {
                let load: f64 = (0..=k).map(|nu| a[j][nu] * loads[nu][i]).sum();
                y[self.index(i, 0, j)] = -c[j][0] * m0[i] + half * a[j][0] * m1[i];
                y[self.index(i, 1, j)] = -c[j][0] * m1[i] - half * a[j][0] * a0[i] + half * load;
            }
        }
        y
    }

    /// Splits a solution vector into per-node component vectors (`mu = 1..=k`).
    pub fn unpack(&self, x: &[f64]) -> [Vec<Vec<f64>>; 2] {
        let k = self.stencil.degree;
        let n = self.mass.nrows();
        let comp = |c: usize| -> Vec<Vec<f64>> {
            (0..k).map(|m| (0..n).map(|i| x[self.index(i, c, m)]).collect()).collect()
        };
        [comp(0), comp(1)]
    }

    /// Inverse of [`BlockOperator::unpack`].
    pub fn pack(&self, values: &SlabValues) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        for (c, nodes) in [&values.u0, &values.u1].into_iter().enumerate() {
            for (m, v) in nodes.iter().enumerate() {
                for (i, &vi) in v.iter().enumerate() {
                    x[self.index(i, c, m)] = vi;
                }
            }
        }
        x
    }
}

/// Unknown node values of one slab, `mu = 1..=k`.
#[derive(Debug, Clone)]
pub struct SlabValues {
    pub u0: Vec<Vec<f64>>,
    pub u1: Vec<Vec<f64>>,
}

/// Sequential slab solver that reuses the LU factorization while the step size is unchanged.
pub struct Stepper<'a> {
    system: &'a MolSystem,
    partition: &'a TimePartition,
    stencil: TimeStencil,
    cached: Option<(f64, LuFactor)>,
}

impl<'a> Stepper<'a> {
    pub fn new(system: &'a MolSystem, partition: &'a TimePartition) -> Result<Self> {
        Ok(Stepper {
            system,
            partition,
            stencil: TimeStencil::new(partition.degree())?,
            cached: None,
        })
    }

    pub fn stencil(&self) -> &TimeStencil {
        &self.stencil
    }

    pub fn step(&mut self, slab: usize, prev: [&[f64]; 2]) -> Result<SlabValues> {
        if slab >= self.partition.num_slabs() {
            return Err(Error::invalid(format!("slab {slab} does not exist")));
        }
        let n = self.system.dim();
        if prev[0].len() != n || prev[1].len() != n {
            return Err(Error::invalid("previous values do not match the system size"));
        }
        let tau = self.partition.tau(slab);
        let op = BlockOperator::new(&self.stencil, &self.system.mass, &self.system.stiffness, tau);
        let reuse = matches!(&self.cached, Some((t, _)) if *t == tau);
        if !reuse {
            let lu = lu_factor(&op.assemble()).map_err(|e| e.with_context(format!("factorizing slab system (tau = {tau})")))?;
            self.cached = Some((tau, lu));
        }
        let loads: Vec<Vec<f64>> = self.partition.slab_nodes(slab).iter().map(|&t| self.system.load(t)).collect();
        let rhs = op.rhs(prev, &loads);
        let x = self.cached.as_ref().expect("factorized above").1.solve(&rhs)?;
        let [u0, u1] = op.unpack(&x);
        Ok(SlabValues { u0, u1 })
    }
}

/// One slab solve (factorizes from scratch).
pub fn cgp_step(system: &MolSystem, partition: &TimePartition, slab: usize, prev: [&[f64]; 2]) -> Result<SlabValues> {
    Stepper::new(system, partition)?.step(slab, prev)
}

/// Continuous piecewise degree-`k` trajectory of `(u0, u1)`.
///
/// Node values are stored globally: slab `s` owns nodes `s k ..= s k + k`, so the
/// node shared by neighbouring slabs is stored once.
#[derive(Debug, Clone)]
pub struct SlabTrajectory {
    partition: TimePartition,
    basis: NodalBasis,
    nodes: [Vec<Vec<f64>>; 2],
}

impl SlabTrajectory {
    pub fn from_nodal(partition: TimePartition, u0: Vec<Vec<f64>>, u1: Vec<Vec<f64>>) -> Result<Self> {
        let expected = partition.num_slabs() * partition.degree() + 1;
        if u0.len() != expected || u1.len() != expected {
            return Err(Error::invalid(format!("expected {expected} node values per component")));
        }
        let basis = NodalBasis::new(&partition.lobatto().nodes)?;
        Ok(SlabTrajectory {
            partition,
            basis,
            nodes: [u0, u1],
        })
    }

    pub fn partition(&self) -> &TimePartition {
        &self.partition
    }

    pub fn degree(&self) -> usize {
        self.partition.degree()
    }

    pub fn dim(&self) -> usize {
        self.nodes[0][0].len()
    }

    /// Node values of component `comp` on slab `s` (`k+1` vectors).
    pub fn slab_nodes(&self, comp: usize, slab: usize) -> &[Vec<f64>] {
        let k = self.degree();
        &self.nodes[comp][slab * k..=slab * k + k]
    }

    pub fn node_value(&self, comp: usize, slab: usize, mu: usize) -> &[f64] {
        &self.nodes[comp][slab * self.degree() + mu]
    }

    /// Value at `t_n` (`n = 0..=N`).
    pub fn value_at_time_node(&self, comp: usize, n: usize) -> &[f64] {
        &self.nodes[comp][n * self.degree()]
    }

    pub(crate) fn time_basis(&self) -> &NodalBasis {
        &self.basis
    }

    /// Value of both components on slab `s` at physical time `t` (may lie outside the slab).
    pub fn eval_in_slab(&self, slab: usize, t: f64) -> [Vec<f64>; 2] {
        let x = self.partition.to_reference(slab, t);
        let w = self.basis.values(x);
        [combine(self.slab_nodes(0, slab), &w), combine(self.slab_nodes(1, slab), &w)]
    }

    /// Physical time derivative on slab `s`.
    pub fn deriv_in_slab(&self, slab: usize, t: f64) -> [Vec<f64>; 2] {
        let x = self.partition.to_reference(slab, t);
        let scale = 2.0 / self.partition.tau(slab);
        let w: Vec<f64> = self.basis.derivatives(x).into_iter().map(|d| d * scale).collect();
        [combine(self.slab_nodes(0, slab), &w), combine(self.slab_nodes(1, slab), &w)]
    }

    pub fn evaluate(&self, t: f64) -> Result<[Vec<f64>; 2]> {
        let s = self.partition.locate(t)?;
        Ok(self.eval_in_slab(s, t))
    }
}

pub(crate) fn combine(vectors: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; vectors[0].len()];
    for (v, &w) in vectors.iter().zip(weights) {
        if w != 0.0 {
            for (o, x) in out.iter_mut().zip(v) {
                *o += w * x;
            }
        }
    }
    out
}

pub fn integrate(system: &MolSystem, partition: &TimePartition) -> Result<SlabTrajectory> {
    let mut stepper = Stepper::new(system, partition)?;
    let k = partition.degree();
    let total = partition.num_slabs() * k + 1;
    let mut u0 = Vec::with_capacity(total);
    let mut u1 = Vec::with_capacity(total);
    u0.push(system.initial[0].clone());
    u1.push(system.initial[1].clone());
    for s in 0..partition.num_slabs() {
        let last = u0.len() - 1;
        let values = stepper
            .step(s, [&u0[last], &u1[last]])
            .map_err(|e| e.with_context(format!("time step {}", s + 1)))?;
        u0.extend(values.u0);
        u1.extend(values.u1);
    }
    SlabTrajectory::from_nodal(partition.clone(), u0, u1)
}

pub fn evaluate(traj: &SlabTrajectory, t: f64) -> Result<[Vec<f64>; 2]> {
    traj.evaluate(t)
}
