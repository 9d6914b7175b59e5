//! Post-processing that turns the continuous degree-`k` cGP trajectory into a
//! continuously differentiable piecewise degree-`k+1` one.
//!
//! On slab `s` the lifted function is `w(t) - c_s theta_s(t)`, where `theta_s`
//! vanishes at all Gauss-Lobatto nodes of the slab and has unit derivative at its
//! left end. The jump vectors `c_s` are fixed from left to right so that the time
//! derivative is continuous, starting from a prescribed derivative at `t = 0`.
//! Because `theta_s` vanishes at the nodes, the lifted and the original
//! trajectory agree there.

use crate::error::{Error, Result};
use crate::linalg::{cg_solve, CsrMatrix};
use crate::stepper::{combine, MolSystem, SlabTrajectory, TimePartition};

/// `theta(t) = alpha * prod_mu (xhat - xhat_mu)` in reference coordinates of one slab.
#[derive(Debug, Clone)]
pub struct ThetaPoly {
    slab: usize,
    tau: f64,
    ref_nodes: Vec<f64>,
    alpha: f64,
}

impl ThetaPoly {
    pub fn slab(&self) -> usize {
        self.slab
    }

    /// Scale factor of the product form.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Value at reference point `xhat`.
    pub fn value_ref(&self, xhat: f64) -> f64 {
        self.alpha * self.ref_nodes.iter().map(|&n| xhat - n).product::<f64>()
    }

    /// Physical time derivative at reference point `xhat`.
    pub fn deriv_ref(&self, xhat: f64) -> f64 {
        let m = self.ref_nodes.len();
        let mut sum = 0.0;
        for skip in 0..m {
            sum += (0..m)
                .filter(|&i| i != skip)
                .map(|i| xhat - self.ref_nodes[i])
                .product::<f64>();
        }
        self.alpha * sum * 2.0 / self.tau
    }
}

pub fn build_theta(partition: &TimePartition, slab: usize, degree: usize) -> Result<ThetaPoly> {
    if degree == 0 {
        return Err(Error::invalid("lifting needs degree k >= 1"));
    }
    if degree != partition.degree() {
        return Err(Error::invalid("degree does not match the time partition"));
    }
    if slab >= partition.num_slabs() {
        return Err(Error::invalid(format!("slab {slab} does not exist")));
    }
    let ref_nodes = partition.lobatto().nodes.clone();
    let tau = partition.tau(slab);
    // d/dt prod(xhat - x_mu) at xhat = -1 is (2/tau) prod_{mu >= 1} (-1 - x_mu)
    let p: f64 = ref_nodes[1..].iter().map(|&n| -1.0 - n).product();
    let alpha = tau / (2.0 * p);
    Ok(ThetaPoly {
        slab,
        tau,
        ref_nodes,
        alpha,
    })
}

/// Derivative of the lifted trajectory at `t = 0`:
/// `(U1_0, M^{-1}(b_f(0) - A U0_0))`.
pub fn initial_derivative(system: &MolSystem) -> Result<[Vec<f64>; 2]> {
    let [u0, u1] = system.initial();
    let mut rhs = system.load(0.0);
    let au0 = system.stiffness().mul_vec(u0);
    for (r, a) in rhs.iter_mut().zip(&au0) {
        *r -= a;
    }
    let v = mass_solve(system.mass(), &rhs, system.solver_tol())?;
    Ok([u1.clone(), v])
}

pub(crate) fn mass_solve(mass: &CsrMatrix, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
    cg_solve(mass, rhs, tol, 2 * mass.nrows() + 100)
}

#[derive(Debug, Clone)]
pub struct LiftedTrajectory {
    base: SlabTrajectory,
    init_deriv: [Vec<f64>; 2],
    jumps: Vec<[Vec<f64>; 2]>,
    thetas: Vec<ThetaPoly>,
}

impl LiftedTrajectory {
    /// Lifts `base` given the derivative at `t = 0`.
    pub fn new(base: SlabTrajectory, init_deriv: [Vec<f64>; 2]) -> Result<Self> {
        let partition = base.partition().clone();
        let k = partition.degree();
        if init_deriv.iter().any(|v| v.len() != base.dim()) {
            return Err(Error::invalid("initial derivative does not match the trajectory size"));
        }
        let thetas = (0..partition.num_slabs())
            .map(|s| build_theta(&partition, s, k))
            .collect::<Result<Vec<_>>>()?;
        let mut jumps = Vec::with_capacity(partition.num_slabs());
        let mut incoming = init_deriv.clone();
        for (s, theta) in thetas.iter().enumerate() {
            let left = base.deriv_in_slab(s, partition.times()[s]);
            let c = [sub(&left[0], &incoming[0]), sub(&left[1], &incoming[1])];
            let right = base.deriv_in_slab(s, partition.times()[s + 1]);
            let dtheta = theta.deriv_ref(1.0);
            incoming = [axpby(&right[0], -dtheta, &c[0]), axpby(&right[1], -dtheta, &c[1])];
            jumps.push(c);
        }
        Ok(LiftedTrajectory {
            base,
            init_deriv,
            jumps,
            thetas,
        })
    }

    pub fn base(&self) -> &SlabTrajectory {
        &self.base
    }

    pub fn partition(&self) -> &TimePartition {
        self.base.partition()
    }

    pub fn init_deriv(&self) -> &[Vec<f64>; 2] {
        &self.init_deriv
    }

    /// Jump pair `c` used on slab `s`.
    pub fn jump(&self, slab: usize) -> &[Vec<f64>; 2] {
        &self.jumps[slab]
    }

    pub fn theta(&self, slab: usize) -> &ThetaPoly {
        &self.thetas[slab]
    }

    pub fn eval_in_slab(&self, slab: usize, t: f64) -> [Vec<f64>; 2] {
        let xhat = self.partition().to_reference(slab, t);
        let th = self.thetas[slab].value_ref(xhat);
        let [b0, b1] = self.base.eval_in_slab(slab, t);
        let c = &self.jumps[slab];
        [axpby(&b0, -th, &c[0]), axpby(&b1, -th, &c[1])]
    }

    pub fn deriv_in_slab(&self, slab: usize, t: f64) -> [Vec<f64>; 2] {
        let xhat = self.partition().to_reference(slab, t);
        let dth = self.thetas[slab].deriv_ref(xhat);
        let [d0, d1] = self.base.deriv_in_slab(slab, t);
        let c = &self.jumps[slab];
        [axpby(&d0, -dth, &c[0]), axpby(&d1, -dth, &c[1])]
    }

    pub fn evaluate(&self, t: f64) -> Result<[Vec<f64>; 2]> {
        let s = self.partition().locate(t)?;
        Ok(self.eval_in_slab(s, t))
    }

    pub fn evaluate_deriv(&self, t: f64) -> Result<[Vec<f64>; 2]> {
        let s = self.partition().locate(t)?;
        if t <= self.partition().start() {
            return Ok(self.init_deriv.clone());
        }
        Ok(self.deriv_in_slab(s, t))
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `a + beta * b`
fn axpby(a: &[f64], beta: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + beta * y).collect()
}

pub fn lift(traj: SlabTrajectory, system: &MolSystem) -> Result<LiftedTrajectory> {
    let init = initial_derivative(system)?;
    LiftedTrajectory::new(traj, init)
}

pub fn lifted_eval(lifted: &LiftedTrajectory, t: f64) -> Result<[Vec<f64>; 2]> {
    lifted.evaluate(t)
}

pub fn lifted_deriv_eval(lifted: &LiftedTrajectory, t: f64) -> Result<[Vec<f64>; 2]> {
    lifted.evaluate_deriv(t)
}

/// Gauss-Lobatto Lagrange interpolant of the load on slab `s` at time `t`.
pub fn interpolated_load(system: &MolSystem, traj: &SlabTrajectory, slab: usize, t: f64) -> Vec<f64> {
    let partition = traj.partition();
    let loads: Vec<Vec<f64>> = partition.slab_nodes(slab).iter().map(|&tn| system.load(tn)).collect();
    let w = traj.time_basis().values(partition.to_reference(slab, t));
    combine(&loads, &w)
}
