#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stwave::fem::{build_space, unit_square_mesh, FeSpace, SpatialFunction};
use stwave::lifting::{interpolated_load, LiftedTrajectory};
use stwave::linalg::CsrMatrix;
use stwave::problems::WaveProblem;
use stwave::quadrature::gauss_rule;
use stwave::stepper::{integrate, make_system, InitialMode, LoadFn, MolSystem, SlabTrajectory, TimePartition};

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `||a - b|| / max(||b||, floor)`
pub fn rel_diff(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b).max(floor)
}

pub fn space(level: usize, r: usize) -> Arc<FeSpace> {
    Arc::new(build_space(unit_square_mesh(level), r).unwrap())
}

pub fn system(space: &Arc<FeSpace>, problem: &WaveProblem) -> MolSystem {
    make_system(space.clone(), problem, InitialMode::Ritz).unwrap()
}

/// Wraps coefficients of `space` as a function with exact gradient.
pub fn discrete_function(space: &Arc<FeSpace>, y: &[f64]) -> SpatialFunction {
    let locate = |s: &FeSpace, x: f64, z: f64| {
        let n = s.mesh().cells_per_side;
        let h = s.mesh().cell_size;
        let cx = ((x / h) as usize).min(n - 1);
        let cy = ((z / h) as usize).min(n - 1);
        let c = cy * n + cx;
        let o = s.cell_origin(c);
        (c, [2.0 * (x - o[0]) / h - 1.0, 2.0 * (z - o[1]) / h - 1.0])
    };
    let (s1, y1) = (space.clone(), y.to_vec());
    let (s2, y2) = (space.clone(), y.to_vec());
    SpatialFunction::with_gradient(
        move |x, z| {
            let (c, xi) = locate(&s1, x, z);
            s1.eval_in_cell(&y1, c, xi)
        },
        move |x, z| {
            let (c, xi) = locate(&s2, x, z);
            s2.grad_in_cell(&y2, c, xi)
        },
    )
}

fn dense(a: &CsrMatrix) -> DMatrix<f64> {
    let d = a.to_dense();
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| d[i][j])
}

fn lagrange(nodes: &[f64], i: usize, x: f64) -> f64 {
    nodes
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &xj)| (x - xj) / (nodes[i] - xj))
        .product()
}

fn lagrange_deriv(nodes: &[f64], i: usize, x: f64) -> f64 {
    let mut s = 0.0;
    for m in 0..nodes.len() {
        if m == i {
            continue;
        }
        let mut p = 1.0 / (nodes[i] - nodes[m]);
        for j in 0..nodes.len() {
            if j != i && j != m {
                p *= (x - nodes[j]) / (nodes[i] - nodes[j]);
            }
        }
        s += p;
    }
    s
}

/// cGP(2) slab solve from the variational form, assembled densely and solved by
/// dense LU. Returns the node values at `mu = 1, 2` as `[u0, u1]`.
pub fn brute_force_cgp2_slab(system: &MolSystem, t0: f64, tau: f64, prev: [&[f64]; 2]) -> [Vec<Vec<f64>>; 2] {
    let gl = [-1.0, 0.0, 1.0];
    let gl_w = [1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0];
    let g = 1.0 / 3.0f64.sqrt();
    let gauss = [-g, g];
    let n = system.dim();
    let m = dense(system.mass());
    let a = dense(system.stiffness());
    let rule = gauss_rule(6).unwrap();
    let int = |f: &dyn Fn(f64) -> f64| rule.nodes.iter().zip(&rule.weights).map(|(&x, &w)| w * f(x)).sum::<f64>();
    // d[j][mu] = int phi_mu' psi_j, e[j][mu] = tau/2 int phi_mu psi_j
    let d: Vec<Vec<f64>> = (0..2)
        .map(|j| (0..3).map(|mu| int(&|x| lagrange_deriv(&gl, mu, x) * lagrange(&gauss, j, x))).collect())
        .collect();
    let e: Vec<Vec<f64>> = (0..2)
        .map(|j| (0..3).map(|mu| 0.5 * tau * int(&|x| lagrange(&gl, mu, x) * lagrange(&gauss, j, x))).collect())
        .collect();
    let loads: Vec<Vec<f64>> = gl.iter().map(|&x| system.load(t0 + 0.5 * tau * (x + 1.0))).collect();

    // unknown blocks: [u0^1, u0^2, u1^1, u1^2]
    let mut big = DMatrix::<f64>::zeros(4 * n, 4 * n);
    let mut rhs = DVector::<f64>::zeros(4 * n);
    let p0 = DVector::from_column_slice(prev[0]);
    let p1 = DVector::from_column_slice(prev[1]);
    for j in 0..2 {
        let r0 = j * n;
        let r1 = (2 + j) * n;
        for mu in 1..3 {
            let c0 = (mu - 1) * n;
            let c1 = (1 + mu) * n;
            let mut blk = big.view_mut((r0, c0), (n, n));
            blk += &m * d[j][mu];
            let mut blk = big.view_mut((r0, c1), (n, n));
            blk += &m * -e[j][mu];
            let mut blk = big.view_mut((r1, c1), (n, n));
            blk += &m * d[j][mu];
            let mut blk = big.view_mut((r1, c0), (n, n));
            blk += &a * e[j][mu];
        }
        let r0v = -(&m * &p0) * d[j][0] + (&m * &p1) * e[j][0];
        let mut r1v = -(&m * &p1) * d[j][0] - (&a * &p0) * e[j][0];
        for nu in 0..3 {
            let q = 0.5 * tau * gl_w[nu] * lagrange(&gauss, j, gl[nu]);
            r1v += DVector::from_column_slice(&loads[nu]) * q;
        }
        rhs.rows_mut(r0, n).copy_from(&r0v);
        rhs.rows_mut(r1, n).copy_from(&r1v);
    }
    let x = big.lu().solve(&rhs).expect("dense slab system is regular");
    let block = |b: usize| x.rows(b * n, n).iter().copied().collect::<Vec<f64>>();
    [vec![block(0), block(1)], vec![block(2), block(3)]]
}

/// Jump on slab `s` from the closed form: slab derivative at `t_s` minus the
/// right-hand side of the semi-discrete system evaluated with the GL load interpolant.
pub fn closed_form_jump(system: &MolSystem, base: &SlabTrajectory, slab: usize) -> [Vec<f64>; 2] {
    let t = base.partition().times()[slab];
    let d = base.deriv_in_slab(slab, t);
    let [u0, u1] = base.eval_in_slab(slab, t);
    let b = interpolated_load(system, base, slab, t);
    let au0 = system.stiffness().mul_vec(&u0);
    let rhs: Vec<f64> = b.iter().zip(&au0).map(|(x, y)| x - y).collect();
    let mut v = dense_solve(system.mass(), &rhs);
    for (vi, di) in v.iter_mut().zip(&d[1]) {
        *vi = di - *vi;
    }
    let c0: Vec<f64> = d[0].iter().zip(&u1).map(|(x, y)| x - y).collect();
    [c0, v]
}

/// Worst deviation of the recursive jumps from the closed form, relative to the
/// largest jump of the same component (single jumps may nearly vanish).
pub fn jump_recursion_error(system: &MolSystem, lifted: &LiftedTrajectory) -> f64 {
    let slabs = lifted.partition().num_slabs();
    let closed: Vec<[Vec<f64>; 2]> = (0..slabs).map(|s| closed_form_jump(system, lifted.base(), s)).collect();
    let mut worst = 0.0f64;
    for comp in 0..2 {
        let scale = closed.iter().map(|c| norm(&c[comp])).fold(f64::MIN_POSITIVE, f64::max);
        for (s, c) in closed.iter().enumerate() {
            let d: Vec<f64> = lifted.jump(s)[comp].iter().zip(&c[comp]).map(|(x, y)| x - y).collect();
            worst = worst.max(norm(&d) / scale);
        }
    }
    worst
}

fn dense_solve(a: &CsrMatrix, b: &[f64]) -> Vec<f64> {
    let x = dense(a).lu().solve(&DVector::from_column_slice(b)).unwrap();
    x.iter().copied().collect()
}

/// Relative residuals of `M d_t L u0 - M u1` and `M d_t L u1 + A u0 - b_I` at `t` in slab `s`.
pub fn lifted_residual(system: &MolSystem, lifted: &LiftedTrajectory, slab: usize, t: f64) -> [f64; 2] {
    let m = system.mass();
    let a = system.stiffness();
    let dl = lifted.deriv_in_slab(slab, t);
    let [u0, u1] = lifted.base().eval_in_slab(slab, t);
    let b = interpolated_load(system, lifted.base(), slab, t);
    let mdl0 = m.mul_vec(&dl[0]);
    let mu1 = m.mul_vec(&u1);
    let r0: Vec<f64> = mdl0.iter().zip(&mu1).map(|(x, y)| x - y).collect();
    let mdl1 = m.mul_vec(&dl[1]);
    let au0 = a.mul_vec(&u0);
    let r1: Vec<f64> = mdl1.iter().zip(&au0).zip(&b).map(|((x, y), z)| x + y - z).collect();
    let s0 = norm(&mdl0).max(norm(&mu1)).max(f64::MIN_POSITIVE);
    let s1 = norm(&mdl1).max(norm(&au0)).max(norm(&b)).max(f64::MIN_POSITIVE);
    [norm(&r0) / s0, norm(&r1) / s1]
}

/// Uniform partition of `[0, T]` with `steps` slabs.
pub fn partition(problem: &WaveProblem, steps: usize, k: usize) -> TimePartition {
    TimePartition::uniform(problem.final_time, steps, k).unwrap()
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Worst relative node error when the exact solution is a degree-`deg` polynomial in time.
pub fn polynomial_run(k: usize, deg: usize, seed: u64) -> f64 {
    let space = space(1, 2);
    let n = space.num_interior();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coef: Vec<Vec<f64>> = (0..=deg).map(|_| random_vec(&mut rng, n)).collect();
    let eval = move |c: &[Vec<f64>], t: f64, d: usize| -> Vec<f64> {
        // d-th time derivative of sum_j c_j t^j
        let mut out = vec![0.0; c[0].len()];
        for (j, cj) in c.iter().enumerate().skip(d) {
            let f: f64 = (j - d + 1..=j).map(|x| x as f64).product::<f64>() * t.powi((j - d) as i32);
            for (o, v) in out.iter_mut().zip(cj) {
                *o += f * v;
            }
        }
        out
    };
    let (m, a) = (space.mass().clone(), space.stiffness().clone());
    let (mc, ac, cc) = (m.clone(), a.clone(), coef.clone());
    let load: LoadFn = Arc::new(move |t| {
        let acc = mc.mul_vec(&eval(&cc, t, 2));
        let au = ac.mul_vec(&eval(&cc, t, 0));
        acc.iter().zip(&au).map(|(x, y)| x + y).collect()
    });
    let system = MolSystem::new(m, a, load, [eval(&coef, 0.0, 0), eval(&coef, 0.0, 1)]).unwrap();
    let partition = TimePartition::from_grid(vec![0.0, 0.13, 0.3, 0.55, 0.7, 1.0], k).unwrap();
    let traj = integrate(&system, &partition).unwrap();
    let mut worst = 0.0f64;
    for s in 0..partition.num_slabs() {
        for (mu, &t) in partition.slab_nodes(s).iter().enumerate() {
            for comp in 0..2 {
                let exact = eval(&coef, t, comp);
                worst = worst.max(rel_diff(traj.node_value(comp, s, mu), &exact, 1.0));
            }
        }
    }
    worst
}
