//! Compressed-row sparse matrices and the two solvers the scheme needs:
//! Jacobi-preconditioned CG for the SPD mass/stiffness systems and a banded
//! LU with partial pivoting for the nonsymmetric slab system.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed
    /// in the order they appear, so the result is deterministic.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(i, j, _) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            counts[i + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        // bucket by row, stable in input order
        let mut fill = counts.clone();
        let mut buckets = vec![(0usize, 0.0f64); triplets.len()];
        for &(i, j, v) in triplets {
            buckets[fill[i]] = (j, v);
            fill[i] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..nrows {
            let row = &mut buckets[counts[i]..counts[i + 1]];
            row.sort_by_key(|&(j, _)| j);
            let mut k = 0;
            while k < row.len() {
                let j = row[k].0;
                let mut sum = 0.0;
                while k < row.len() && row[k].0 == j {
                    sum += row[k].1;
                    k += 1;
                }
                col_idx.push(j);
                values.push(sum);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        let triplets: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &triplets)
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut triplets = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, &triplets)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |p| vals[p])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "dimension mismatch in mat-vec");
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    /// `x^T A x`
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }

    /// Restriction to the rows and columns selected by `keep` (in order).
    pub fn submatrix(&self, keep: &[usize]) -> CsrMatrix {
        let mut map = vec![usize::MAX; self.ncols];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let mut triplets = Vec::new();
        for (new_i, &old_i) in keep.iter().enumerate() {
            let (cols, vals) = self.row(old_i);
            for (&j, &v) in cols.iter().zip(vals) {
                if map[j] != usize::MAX {
                    triplets.push((new_i, map[j], v));
                }
            }
        }
        CsrMatrix::from_triplets(keep.len(), keep.len(), &triplets)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in out.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row[j] = v;
            }
        }
        out
    }

    /// `max |A_ij - A_ji|`
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Lower and upper bandwidths.
    pub fn bandwidths(&self) -> (usize, usize) {
        let (mut kl, mut ku) = (0, 0);
        for i in 0..self.nrows {
            let (cols, _) = self.row(i);
            if let (Some(&first), Some(&last)) = (cols.first(), cols.last()) {
                kl = kl.max(i.saturating_sub(first));
                ku = ku.max(last.saturating_sub(i));
            }
        }
        (kl, ku)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `||A x - b|| / ||b||` (or the absolute residual when `b = 0`).
pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: f64 = ax.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let nb = norm2(b);
    if nb > 0.0 {
        r / nb
    } else {
        r
    }
}

/// Result of a CG run.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Jacobi-preconditioned conjugate gradients. Stops once
/// `||A x - b|| <= tol * ||b||`.
pub fn cg_solve(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    cg_solve_counted(a, b, tol, max_iter).map(|o| o.x)
}

pub fn cg_solve_counted(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<CgOutcome> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::invalid("cg_solve needs a square system"));
    }
    let nb = norm2(b);
    let mut x = vec![0.0; n];
    if nb == 0.0 {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            residual: 0.0,
        });
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut res = 1.0;
    for it in 0..max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NonConvergence {
                iterations: it,
                residual: res,
            });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        res = norm2(&r) / nb;
        if res <= tol {
            return Ok(CgOutcome {
                x,
                iterations: it + 1,
                residual: res,
            });
        }
        for ((zi, ri), di) in z.iter_mut().zip(&r).zip(&inv_diag) {
            *zi = ri * di;
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: res,
    })
}

/// LU factorization with partial pivoting in LAPACK-style band storage.
///
/// Column `j` holds rows `j - ku - kl ..= j + kl`; the extra `kl` rows above the
/// original band absorb the fill produced by row interchanges.
#[derive(Debug, Clone)]
pub struct LuFactor {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    pivots: Vec<usize>,
}

impl LuFactor {
    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.ldab + (self.kl + self.ku + i - j)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::invalid(format!(
                "right-hand side has length {}, expected {}",
                b.len(),
                self.n
            )));
        }
        let n = self.n;
        let kv = self.kl + self.ku;
        let mut x = b.to_vec();
        // forward: P and unit-lower L
        for j in 0..n {
            let p = self.pivots[j];
            if p != j {
                x.swap(j, p);
            }
            let xj = x[j];
            if xj != 0.0 {
                let km = self.kl.min(n - 1 - j);
                let base = self.idx(j, j);
                for (off, xi) in x[j + 1..=j + km].iter_mut().enumerate() {
                    *xi -= self.ab[base + 1 + off] * xj;
                }
            }
        }
        // backward: U with bandwidth kl + ku
        for j in (0..n).rev() {
            let base = self.idx(j, j);
            x[j] /= self.ab[base];
            let xj = x[j];
            if xj != 0.0 {
                let start = j.saturating_sub(kv);
                for i in start..j {
                    x[i] -= self.ab[base - (j - i)] * xj;
                }
            }
        }
        Ok(x)
    }
}

pub fn lu_factor(a: &CsrMatrix) -> Result<LuFactor> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::invalid("LU factorization needs a square matrix"));
    }
    let (kl, ku) = a.bandwidths();
    let ldab = 2 * kl + ku + 1;
    let mut f = LuFactor {
        n,
        kl,
        ku,
        ldab,
        ab: vec![0.0; ldab * n],
        pivots: vec![0; n],
    };
    for i in 0..n {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            let k = f.idx(i, j);
            f.ab[k] = v;
        }
    }

    let scale = a.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut ju = 0usize;
    for j in 0..n {
        let km = kl.min(n - 1 - j);
        let diag = f.idx(j, j);
        let mut jp = 0;
        let mut best = f.ab[diag].abs();
        for off in 1..=km {
            let v = f.ab[diag + off].abs();
            if v > best {
                best = v;
                jp = off;
            }
        }
        if best == 0.0 || best <= f64::EPSILON * scale * 1e-6 {
            return Err(Error::Singular { column: j });
        }
        f.pivots[j] = j + jp;
        ju = ju.max((j + ku + jp).min(n - 1));
        if jp != 0 {
            for c in j..=ju {
                let a1 = f.idx(j, c);
                let a2 = f.idx(j + jp, c);
                f.ab.swap(a1, a2);
            }
        }
        let piv = f.ab[diag];
        for off in 1..=km {
            f.ab[diag + off] /= piv;
        }
        let (head, tail) = f.ab.split_at_mut((j + 1) * ldab);
        let lcol = &head[diag + 1..diag + 1 + km];
        for c in j + 1..=ju {
            let base = c * ldab - (j + 1) * ldab;
            let ujc = tail[base + kl + ku + j - c];
            if ujc == 0.0 {
                continue;
            }
            let start = base + kl + ku + j + 1 - c;
            for (a, &l) in tail[start..start + km].iter_mut().zip(lcol) {
                *a -= l * ujc;
            }
        }
    }
    Ok(f)
}

pub fn lu_solve(factor: &LuFactor, b: &[f64]) -> Result<Vec<f64>> {
    factor.solve(b)
}
