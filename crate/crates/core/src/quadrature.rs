//! Quadrature rules and nodal Lagrange bases on the reference interval `[-1, 1]`.
//!
//! All temporal work of the time stepper happens on the reference interval; a
//! slab `[t_{n-1}, t_n]` is reached through the affine map
//! `t = (t_{n-1} + t_n)/2 + (tau/2) * x`, so integrals pick up a factor `tau/2`
//! and derivatives a factor `2/tau`.

use crate::error::{Error, Result};

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// Nodes and weights of a quadrature rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule1D {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1D {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrates `f` over `[-1, 1]`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Rule mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> Rule1D {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        Rule1D {
            nodes: self.nodes.iter().map(|x| mid + half * x).collect(),
            weights: self.weights.iter().map(|w| half * w).collect(),
        }
    }
}

/// Legendre polynomial `P_n(x)` and its derivative, via the three-term recurrence.
pub(crate) fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    for j in 2..=n {
        let jf = j as f64;
        let p_next = ((2.0 * jf - 1.0) * x * p - (jf - 1.0) * p_prev) / jf;
        p_prev = p;
        p = p_next;
    }
    // P'_n from the derivative identity (1 - x^2) P'_n = n (P_{n-1} - x P_n);
    // at the endpoints use the closed form P'_n(+-1) = (+-1)^{n-1} n(n+1)/2.
    let nf = n as f64;
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        let s = if x > 0.0 || n % 2 == 1 { 1.0 } else { -1.0 };
        s * nf * (nf + 1.0) / 2.0
    } else {
        nf * (p_prev - x * p) / (1.0 - x * x)
    };
    (p, dp)
}

/// Second derivative of `P_n` from the Legendre ODE `(1-x^2)P'' = 2xP' - n(n+1)P`.
fn legendre_dd(n: usize, x: f64) -> f64 {
    let (p, dp) = legendre(n, x);
    let nf = n as f64;
    (2.0 * x * dp - nf * (nf + 1.0) * p) / (1.0 - x * x)
}

fn newton<F>(mut x: f64, f: F) -> f64
where
    F: Fn(f64) -> (f64, f64),
{
    for _ in 0..NEWTON_MAX_ITER {
        let (val, der) = f(x);
        let dx = val / der;
        x -= dx;
        if dx.abs() <= NEWTON_TOL {
            break;
        }
    }
    x
}

/// `m`-point Gauss-Legendre rule, exact for polynomials of degree `2m - 1`.
pub fn gauss_rule(m: usize) -> Result<Rule1D> {
    let (nodes, weights) = match m {
        0 => return Err(Error::invalid("Gauss rule needs at least one point")),
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (3.0f64 / 5.0).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let s = (6.0f64 / 5.0).sqrt();
            let a = ((3.0 - 2.0 * s) / 7.0).sqrt();
            let b = ((3.0 + 2.0 * s) / 7.0).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
        _ => {
            let mf = m as f64;
            let mut nodes = Vec::with_capacity(m);
            let mut weights = Vec::with_capacity(m);
            for i in 0..m {
                // Chebyshev guess, ascending order.
                let guess = -(std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
                let x = newton(guess, |x| legendre(m, x));
                let (_, dp) = legendre(m, x);
                nodes.push(x);
                weights.push(2.0 / ((1.0 - x * x) * dp * dp));
            }
            symmetrize(&mut nodes, &mut weights);
            (nodes, weights)
        }
    };
    Ok(Rule1D { nodes, weights })
}

/// `m`-point Gauss-Lobatto rule (both endpoints included), exact for
/// polynomials of degree `2m - 3`.
pub fn gauss_lobatto_rule(m: usize) -> Result<Rule1D> {
    let (nodes, weights) = match m {
        0 | 1 => {
            return Err(Error::invalid(
                "Gauss-Lobatto rule needs at least two points",
            ))
        }
        2 => (vec![-1.0, 1.0], vec![1.0, 1.0]),
        3 => (vec![-1.0, 0.0, 1.0], vec![1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0]),
        4 => {
            let a = 1.0 / 5f64.sqrt();
            (
                vec![-1.0, -a, a, 1.0],
                vec![1.0 / 6.0, 5.0 / 6.0, 5.0 / 6.0, 1.0 / 6.0],
            )
        }
        _ => {
            // Interior nodes are the roots of P'_{m-1}.
            let deg = m - 1;
            let mf = m as f64;
            let wscale = 2.0 / (mf * (mf - 1.0));
            let mut nodes = vec![-1.0];
            let mut weights = vec![wscale];
            for i in 1..deg {
                let guess = -(std::f64::consts::PI * i as f64 / deg as f64).cos();
                let x = newton(guess, |x| (legendre(deg, x).1, legendre_dd(deg, x)));
                let (p, _) = legendre(deg, x);
                nodes.push(x);
                weights.push(wscale / (p * p));
            }
            nodes.push(1.0);
            weights.push(wscale);
            symmetrize(&mut nodes, &mut weights);
            (nodes, weights)
        }
    };
    Ok(Rule1D { nodes, weights })
}

/// Enforces exact mirror symmetry of nodes and weights.
fn symmetrize(nodes: &mut [f64], weights: &mut [f64]) {
    let m = nodes.len();
    for i in 0..m / 2 {
        let j = m - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -x;
        nodes[j] = x;
        weights[i] = w;
        weights[j] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
}

/// Lagrange basis of a node set together with its differentiation matrix
/// `diff[i][j] = L_j'(node_i)`.
#[derive(Debug, Clone)]
pub struct NodalBasis {
    nodes: Vec<f64>,
    bary: Vec<f64>,
    diff: Vec<Vec<f64>>,
}

impl NodalBasis {
    pub fn new(nodes: &[f64]) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::invalid("nodal basis needs at least one node"));
        }
        let m = nodes.len();
        for i in 0..m {
            for j in 0..i {
                if nodes[i] == nodes[j] {
                    return Err(Error::invalid(format!("duplicate node {}", nodes[i])));
                }
            }
        }
        let bary: Vec<f64> = (0..m)
            .map(|j| {
                let prod: f64 = (0..m)
                    .filter(|&i| i != j)
                    .map(|i| nodes[j] - nodes[i])
                    .product();
                1.0 / prod
            })
            .collect();
        let mut diff = vec![vec![0.0; m]; m];
        for i in 0..m {
            let mut diag = 0.0;
            for j in 0..m {
                if i != j {
                    diff[i][j] = bary[j] / (bary[i] * (nodes[i] - nodes[j]));
                    diag -= diff[i][j];
                }
            }
            diff[i][i] = diag;
        }
        Ok(NodalBasis {
            nodes: nodes.to_vec(),
            bary,
            diff,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn diff_matrix(&self) -> &[Vec<f64>] {
        &self.diff
    }

    /// Values `L_j(x)` of every basis polynomial.
    pub fn values(&self, x: f64) -> Vec<f64> {
        let m = self.nodes.len();
        (0..m)
            .map(|j| {
                (0..m)
                    .filter(|&i| i != j)
                    .map(|i| x - self.nodes[i])
                    .product::<f64>()
                    * self.bary[j]
            })
            .collect()
    }

    /// Derivatives `L_j'(x)` of every basis polynomial.
    pub fn derivatives(&self, x: f64) -> Vec<f64> {
        let m = self.nodes.len();
        (0..m)
            .map(|j| {
                let mut sum = 0.0;
                for l in (0..m).filter(|&l| l != j) {
                    let prod: f64 = (0..m)
                        .filter(|&i| i != j && i != l)
                        .map(|i| x - self.nodes[i])
                        .product();
                    sum += prod;
                }
                sum * self.bary[j]
            })
            .collect()
    }

    /// `sum_j coeffs[j] * L_j(x)` for vector-valued coefficients.
    pub fn eval<V: AsRef<[f64]>>(&self, coeffs: &[V], x: f64) -> Result<Vec<f64>> {
        self.combine(coeffs, &self.values(x))
    }

    /// `sum_j coeffs[j] * L_j'(x)` (reference-coordinate derivative).
    pub fn eval_derivative<V: AsRef<[f64]>>(&self, coeffs: &[V], x: f64) -> Result<Vec<f64>> {
        self.combine(coeffs, &self.derivatives(x))
    }

    fn combine<V: AsRef<[f64]>>(&self, coeffs: &[V], weights: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() != self.nodes.len() {
            return Err(Error::invalid(format!(
                "expected {} coefficient vectors, got {}",
                self.nodes.len(),
                coeffs.len()
            )));
        }
        let dim = coeffs[0].as_ref().len();
        let mut out = vec![0.0; dim];
        for (c, &w) in coeffs.iter().zip(weights) {
            let c = c.as_ref();
            if c.len() != dim {
                return Err(Error::invalid("coefficient vectors differ in length"));
            }
            if w != 0.0 {
                for (o, v) in out.iter_mut().zip(c) {
                    *o += w * v;
                }
            }
        }
        Ok(out)
    }
}

pub fn nodal_basis(nodes: &[f64]) -> Result<NodalBasis> {
    NodalBasis::new(nodes)
}

pub fn eval_lagrange<V: AsRef<[f64]>>(basis: &NodalBasis, coeffs: &[V], x: f64) -> Result<Vec<f64>> {
    basis.eval(coeffs, x)
}
