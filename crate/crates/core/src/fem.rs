//! Continuous `Q_r` finite elements on uniform square meshes of the unit square
//! with homogeneous Dirichlet boundary conditions.
//!
//! Degrees of freedom live on the `(r n + 1)^2` equispaced lattice, numbered
//! lexicographically with `x1` running fastest. Boundary lattice points are
//! eliminated; the interior points are renumbered `0..n_interior`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{cg_solve_counted, CsrMatrix};
use crate::quadrature::{gauss_rule, NodalBasis};

pub type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(f64, f64) -> [f64; 2] + Send + Sync>;

/// Relative tolerance of the projection solves.
pub const PROJECTION_TOL: f64 = 1e-12;

/// A scalar function on the closed unit square, optionally with its gradient.
#[derive(Clone)]
pub struct SpatialFunction {
    value: ScalarFn,
    gradient: Option<GradientFn>,
}

impl SpatialFunction {
    pub fn new(value: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        SpatialFunction {
            value: Arc::new(value),
            gradient: None,
        }
    }

    pub fn with_gradient(
        value: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(f64, f64) -> [f64; 2] + Send + Sync + 'static,
    ) -> Self {
        SpatialFunction {
            value: Arc::new(value),
            gradient: Some(Arc::new(gradient)),
        }
    }

    pub fn zero() -> Self {
        Self::with_gradient(|_, _| 0.0, |_, _| [0.0, 0.0])
    }

    #[inline]
    pub fn value(&self, x1: f64, x2: f64) -> f64 {
        (self.value)(x1, x2)
    }

    #[inline]
    pub fn gradient(&self, x1: f64, x2: f64) -> Option<[f64; 2]> {
        self.gradient.as_ref().map(|g| g(x1, x2))
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }
}

impl std::fmt::Debug for SpatialFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpatialFunction")
            .field("has_gradient", &self.has_gradient())
            .finish()
    }
}

/// Uniform mesh of `(0,1)^2` into `n x n` square cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh {
    pub cells_per_side: usize,
    pub cell_size: f64,
    pub level: usize,
}

impl Mesh {
    pub fn num_cells(&self) -> usize {
        self.cells_per_side * self.cells_per_side
    }

    pub fn num_vertices(&self) -> usize {
        (self.cells_per_side + 1).pow(2)
    }

    /// Cell diameter `sqrt(2) * cell_size`.
    pub fn diameter(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.cell_size
    }
}

/// Level `l` has `2^(l+1)` cells per side, so level 0 is the 4-cell mesh.
pub fn unit_square_mesh(level: usize) -> Mesh {
    let n = 1usize << (level + 1);
    Mesh {
        cells_per_side: n,
        cell_size: 1.0 / n as f64,
        level,
    }
}

/// Tensor-product Gauss rule on the reference square with basis tables of the
/// `Q_r` element at its points.
#[derive(Debug, Clone)]
pub struct ElementQuadrature {
    /// reference coordinates in `[-1,1]^2`
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    /// `values[q][p]`: local basis `p` at point `q`
    pub values: Vec<Vec<f64>>,
    /// `grads[q][p]`: reference gradient of local basis `p` at point `q`
    pub grads: Vec<Vec<[f64; 2]>>,
}

impl ElementQuadrature {
    fn new(basis_1d: &NodalBasis, points_per_dir: usize) -> Result<Self> {
        let rule = gauss_rule(points_per_dir)?;
        let nb = basis_1d.len();
        let vals_1d: Vec<Vec<f64>> = rule.nodes.iter().map(|&x| basis_1d.values(x)).collect();
        let ders_1d: Vec<Vec<f64>> = rule.nodes.iter().map(|&x| basis_1d.derivatives(x)).collect();
        let mut out = ElementQuadrature {
            points: Vec::new(),
            weights: Vec::new(),
            values: Vec::new(),
            grads: Vec::new(),
        };
        for (qy, (&y, &wy)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
            for (qx, (&x, &wx)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
                out.points.push([x, y]);
                out.weights.push(wx * wy);
                let mut v = Vec::with_capacity(nb * nb);
                let mut g = Vec::with_capacity(nb * nb);
                for b in 0..nb {
                    for a in 0..nb {
                        v.push(vals_1d[qx][a] * vals_1d[qy][b]);
                        g.push([ders_1d[qx][a] * vals_1d[qy][b], vals_1d[qx][a] * ders_1d[qy][b]]);
                    }
                }
                out.values.push(v);
                out.grads.push(g);
            }
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// The discrete space `V_h` with its assembled interior mass and stiffness matrices.
#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: Mesh,
    degree: usize,
    lattice_side: usize,
    basis_1d: NodalBasis,
    interior_index: Vec<Option<usize>>,
    interior_lattice: Vec<usize>,
    cell_dofs: Vec<Vec<usize>>,
    full_mass: CsrMatrix,
    full_stiffness: CsrMatrix,
    mass: CsrMatrix,
    stiffness: CsrMatrix,
    solver_tol: f64,
}

pub fn build_space(mesh: Mesh, degree: usize) -> Result<FeSpace> {
    FeSpace::new(mesh, degree)
}

impl FeSpace {
    pub fn new(mesh: Mesh, degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::invalid("polynomial degree must be at least 1"));
        }
        let n = mesh.cells_per_side;
        let side = degree * n + 1;
        let ref_nodes: Vec<f64> = (0..=degree)
            .map(|i| -1.0 + 2.0 * i as f64 / degree as f64)
            .collect();
        let basis_1d = NodalBasis::new(&ref_nodes)?;

        let mut interior_index = vec![None; side * side];
        let mut interior_lattice = Vec::new();
        for j in 1..side - 1 {
            for i in 1..side - 1 {
                let g = j * side + i;
                interior_index[g] = Some(interior_lattice.len());
                interior_lattice.push(g);
            }
        }

        let mut cell_dofs = Vec::with_capacity(n * n);
        for cy in 0..n {
            for cx in 0..n {
                let mut dofs = Vec::with_capacity((degree + 1).pow(2));
                for b in 0..=degree {
                    for a in 0..=degree {
                        dofs.push((cy * degree + b) * side + cx * degree + a);
                    }
                }
                cell_dofs.push(dofs);
            }
        }

        let mut space = FeSpace {
            mesh,
            degree,
            lattice_side: side,
            basis_1d,
            interior_index,
            interior_lattice,
            cell_dofs,
            full_mass: CsrMatrix::identity(0),
            full_stiffness: CsrMatrix::identity(0),
            mass: CsrMatrix::identity(0),
            stiffness: CsrMatrix::identity(0),
            solver_tol: PROJECTION_TOL,
        };
        let (full_mass, full_stiffness) = space.assemble_full()?;
        space.mass = full_mass.submatrix(&space.interior_lattice);
        space.stiffness = full_stiffness.submatrix(&space.interior_lattice);
        space.full_mass = full_mass;
        space.full_stiffness = full_stiffness;
        Ok(space)
    }

    /// Sets the relative CG tolerance used by the projections.
    pub fn with_solver_tol(mut self, tol: f64) -> Self {
        self.solver_tol = tol;
        self
    }

    pub fn solver_tol(&self) -> f64 {
        self.solver_tol
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_lattice_dofs(&self) -> usize {
        self.lattice_side * self.lattice_side
    }

    pub fn num_interior(&self) -> usize {
        self.interior_lattice.len()
    }

    pub fn lattice_side(&self) -> usize {
        self.lattice_side
    }

    /// Physical coordinates of a lattice point.
    pub fn lattice_coord(&self, g: usize) -> [f64; 2] {
        let step = 1.0 / (self.lattice_side - 1) as f64;
        [(g % self.lattice_side) as f64 * step, (g / self.lattice_side) as f64 * step]
    }

    pub fn interior_index(&self, g: usize) -> Option<usize> {
        self.interior_index[g]
    }

    pub fn interior_lattice(&self) -> &[usize] {
        &self.interior_lattice
    }

    /// Lattice indices of the local dofs of cell `c` (local order: `x1` fastest).
    pub fn cell_dofs(&self, c: usize) -> &[usize] {
        &self.cell_dofs[c]
    }

    /// Interior mass matrix `M`.
    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    /// Interior stiffness matrix `A`.
    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    /// Mass matrix over all lattice dofs, boundary included.
    pub fn full_mass(&self) -> &CsrMatrix {
        &self.full_mass
    }

    pub fn full_stiffness(&self) -> &CsrMatrix {
        &self.full_stiffness
    }

    pub fn element_quadrature(&self, points_per_dir: usize) -> Result<ElementQuadrature> {
        ElementQuadrature::new(&self.basis_1d, points_per_dir)
    }

    /// Lower-left corner of cell `c`.
    pub fn cell_origin(&self, c: usize) -> [f64; 2] {
        let n = self.mesh.cells_per_side;
        let h = self.mesh.cell_size;
        [(c % n) as f64 * h, (c / n) as f64 * h]
    }

    /// Maps a reference point of cell `c` to physical coordinates.
    #[inline]
    pub fn map_point(&self, c: usize, xi: [f64; 2]) -> [f64; 2] {
        let o = self.cell_origin(c);
        let half = 0.5 * self.mesh.cell_size;
        [o[0] + half * (xi[0] + 1.0), o[1] + half * (xi[1] + 1.0)]
    }

    fn assemble_full(&self) -> Result<(CsrMatrix, CsrMatrix)> {
        let quad = self.element_quadrature(self.degree + 1)?;
        let nloc = (self.degree + 1).pow(2);
        let h = self.mesh.cell_size;
        let jac = 0.25 * h * h;
        // all cells are translates of each other, so one element matrix serves
        let mut me = vec![vec![0.0; nloc]; nloc];
        let mut ke = vec![vec![0.0; nloc]; nloc];
        for q in 0..quad.len() {
            let w = quad.weights[q];
            for p in 0..nloc {
                for s in 0..nloc {
                    me[p][s] += w * jac * quad.values[q][p] * quad.values[q][s];
                    let gp = quad.grads[q][p];
                    let gs = quad.grads[q][s];
                    // (h/2)^2 * (2/h)^2 = 1
                    ke[p][s] += w * (gp[0] * gs[0] + gp[1] * gs[1]);
                }
            }
        }
        let ndof = self.num_lattice_dofs();
        let mut mt = Vec::with_capacity(self.cell_dofs.len() * nloc * nloc);
        let mut kt = Vec::with_capacity(self.cell_dofs.len() * nloc * nloc);
        for dofs in &self.cell_dofs {
            for (p, &gp) in dofs.iter().enumerate() {
                for (s, &gs) in dofs.iter().enumerate() {
                    mt.push((gp, gs, me[p][s]));
                    kt.push((gp, gs, ke[p][s]));
                }
            }
        }
        Ok((
            CsrMatrix::from_triplets(ndof, ndof, &mt),
            CsrMatrix::from_triplets(ndof, ndof, &kt),
        ))
    }

    /// Load vector `b_i = int g phi_i` over interior test functions, with
    /// `(r+2)^2` Gauss points per cell.
    pub fn assemble_load(&self, g: &SpatialFunction) -> Result<Vec<f64>> {
        let quad = self.element_quadrature(self.degree + 2)?;
        Ok(self.assemble_load_with(&quad, |x1, x2| g.value(x1, x2)))
    }

    /// Load vector for a plain closure, reusing a precomputed quadrature.
    pub fn assemble_load_with(&self, quad: &ElementQuadrature, g: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let h = self.mesh.cell_size;
        let jac = 0.25 * h * h;
        let mut b = vec![0.0; self.num_interior()];
        let mut local = vec![0.0; self.cell_dofs.first().map_or(0, |d| d.len())];
        for (c, dofs) in self.cell_dofs.iter().enumerate() {
            local.iter_mut().for_each(|v| *v = 0.0);
            for q in 0..quad.len() {
                let x = self.map_point(c, quad.points[q]);
                let gw = g(x[0], x[1]) * quad.weights[q] * jac;
                for (l, phi) in local.iter_mut().zip(&quad.values[q]) {
                    *l += gw * phi;
                }
            }
            for (&gd, &l) in dofs.iter().zip(&local) {
                if let Some(i) = self.interior_index[gd] {
                    b[i] += l;
                }
            }
        }
        b
    }

    /// `c_i = int grad g . grad phi_i`.
    fn assemble_gradient_load(&self, g: &SpatialFunction) -> Result<Vec<f64>> {
        if !g.has_gradient() {
            return Err(Error::invalid("Ritz projection requires a gradient"));
        }
        let quad = self.element_quadrature(self.degree + 2)?;
        let h = self.mesh.cell_size;
        // jacobian (h/2)^2 times one factor 2/h from the test gradient
        let scale = 0.5 * h;
        let mut c_vec = vec![0.0; self.num_interior()];
        for (c, dofs) in self.cell_dofs.iter().enumerate() {
            for q in 0..quad.len() {
                let x = self.map_point(c, quad.points[q]);
                let grad = g.gradient(x[0], x[1]).expect("checked above");
                let w = quad.weights[q] * scale;
                for (&gd, gphi) in dofs.iter().zip(&quad.grads[q]) {
                    if let Some(i) = self.interior_index[gd] {
                        c_vec[i] += w * (grad[0] * gphi[0] + grad[1] * gphi[1]);
                    }
                }
            }
        }
        Ok(c_vec)
    }

    /// `L^2` projection `P_h g`.
    pub fn l2_project(&self, g: &SpatialFunction) -> Result<Vec<f64>> {
        let b = self.assemble_load(g)?;
        self.solve_spd(&self.mass, &b)
    }

    /// Elliptic (Ritz) projection `R_h g`.
    pub fn ritz_project(&self, g: &SpatialFunction) -> Result<Vec<f64>> {
        let c = self.assemble_gradient_load(g)?;
        self.solve_spd(&self.stiffness, &c)
    }

    /// Nodal interpolant on the interior lattice.
    pub fn interpolate(&self, g: &SpatialFunction) -> Vec<f64> {
        self.interior_lattice
            .iter()
            .map(|&gd| {
                let [x1, x2] = self.lattice_coord(gd);
                g.value(x1, x2)
            })
            .collect()
    }

    pub(crate) fn solve_spd(&self, a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
        let cap = 2 * a.nrows() + 100;
        cg_solve_counted(a, b, self.solver_tol, cap).map(|o| o.x)
    }

    /// Value of the discrete function at a point of cell `c` given in reference coordinates.
    pub fn eval_in_cell(&self, coeffs: &[f64], c: usize, xi: [f64; 2]) -> f64 {
        let vx = self.basis_1d.values(xi[0]);
        let vy = self.basis_1d.values(xi[1]);
        let nb = self.degree + 1;
        let mut s = 0.0;
        for (l, &gd) in self.cell_dofs[c].iter().enumerate() {
            if let Some(i) = self.interior_index[gd] {
                s += coeffs[i] * vx[l % nb] * vy[l / nb];
            }
        }
        s
    }

    /// Physical gradient of the discrete function at a point of cell `c`.
    pub fn grad_in_cell(&self, coeffs: &[f64], c: usize, xi: [f64; 2]) -> [f64; 2] {
        let (vx, dx) = (self.basis_1d.values(xi[0]), self.basis_1d.derivatives(xi[0]));
        let (vy, dy) = (self.basis_1d.values(xi[1]), self.basis_1d.derivatives(xi[1]));
        let nb = self.degree + 1;
        let scale = 2.0 / self.mesh.cell_size;
        let mut g = [0.0; 2];
        for (l, &gd) in self.cell_dofs[c].iter().enumerate() {
            if let Some(i) = self.interior_index[gd] {
                g[0] += coeffs[i] * dx[l % nb] * vy[l / nb];
                g[1] += coeffs[i] * vx[l % nb] * dy[l / nb];
            }
        }
        [g[0] * scale, g[1] * scale]
    }

    /// `||u_h - reference||_{L^2}` with `quad_pts` Gauss points per direction.
    pub fn l2_error(&self, coeffs: &[f64], reference: &SpatialFunction, quad_pts: usize) -> Result<f64> {
        self.check_error_args(coeffs, quad_pts)?;
        let quad = self.element_quadrature(quad_pts)?;
        let h = self.mesh.cell_size;
        let jac = 0.25 * h * h;
        let mut sum = 0.0;
        for (c, dofs) in self.cell_dofs.iter().enumerate() {
            for q in 0..quad.len() {
                let x = self.map_point(c, quad.points[q]);
                let mut uh = 0.0;
                for (&gd, phi) in dofs.iter().zip(&quad.values[q]) {
                    if let Some(i) = self.interior_index[gd] {
                        uh += coeffs[i] * phi;
                    }
                }
                let e = reference.value(x[0], x[1]) - uh;
                sum += quad.weights[q] * jac * e * e;
            }
        }
        Ok(sum.sqrt())
    }

    /// `||grad(u_h - reference)||_{L^2}`; the reference must carry a gradient.
    pub fn h1_seminorm_error(&self, coeffs: &[f64], reference: &SpatialFunction, quad_pts: usize) -> Result<f64> {
        self.check_error_args(coeffs, quad_pts)?;
        if !reference.has_gradient() {
            return Err(Error::invalid("H1 error needs the reference gradient"));
        }
        let quad = self.element_quadrature(quad_pts)?;
        let h = self.mesh.cell_size;
        let jac = 0.25 * h * h;
        let gscale = 2.0 / h;
        let mut sum = 0.0;
        for (c, dofs) in self.cell_dofs.iter().enumerate() {
            for q in 0..quad.len() {
                let x = self.map_point(c, quad.points[q]);
                let mut gh = [0.0; 2];
                for (&gd, gphi) in dofs.iter().zip(&quad.grads[q]) {
                    if let Some(i) = self.interior_index[gd] {
                        gh[0] += coeffs[i] * gphi[0] * gscale;
                        gh[1] += coeffs[i] * gphi[1] * gscale;
                    }
                }
                let g = reference.gradient(x[0], x[1]).expect("checked above");
                let (e0, e1) = (g[0] - gh[0], g[1] - gh[1]);
                sum += quad.weights[q] * jac * (e0 * e0 + e1 * e1);
            }
        }
        Ok(sum.sqrt())
    }

    fn check_error_args(&self, coeffs: &[f64], quad_pts: usize) -> Result<()> {
        if coeffs.len() != self.num_interior() {
            return Err(Error::invalid(format!(
                "coefficient vector has length {}, expected {}",
                coeffs.len(),
                self.num_interior()
            )));
        }
        if quad_pts < self.degree + 1 {
            return Err(Error::invalid("error quadrature needs at least r+1 points"));
        }
        Ok(())
    }
}

pub fn assemble_load(space: &FeSpace, g: &SpatialFunction) -> Result<Vec<f64>> {
    space.assemble_load(g)
}

pub fn l2_project(space: &FeSpace, g: &SpatialFunction) -> Result<Vec<f64>> {
    space.l2_project(g)
}

pub fn ritz_project(space: &FeSpace, g: &SpatialFunction) -> Result<Vec<f64>> {
    space.ritz_project(g)
}

pub fn spatial_l2_norm(space: &FeSpace, coeffs: &[f64], reference: &SpatialFunction, quad_pts: usize) -> Result<f64> {
    space.l2_error(coeffs, reference, quad_pts)
}
