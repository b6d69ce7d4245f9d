//! Dense and sparse linear-algebra kernels used throughout the crate.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Solves `a x = b` by LU with two rounds of iterative refinement.
///
/// Returns the solution and the max-norm residual of the refined solution.
pub fn solve_refined(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let lu = a.clone().lu();
    let mut x = lu.solve(b).ok_or(Error::SingularSystem)?;
    for _ in 0..2 {
        let r = b - a * &x;
        match lu.solve(&r) {
            Some(dx) => x += dx,
            None => return Err(Error::SingularSystem),
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    let residual = (b - a * &x).amax();
    Ok((x, residual))
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues in descending order.
#[derive(Clone, Debug)]
pub struct SymEig {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, aligned with `values`.
    pub vectors: DMatrix<f64>,
}

pub fn sym_eigen_desc(m: &DMatrix<f64>) -> SymEig {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    SymEig { values, vectors }
}

/// Largest eigenvalue of a symmetric matrix.
pub fn sym_max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Compressed sparse row storage.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for r in 0..n {
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            n,
            indptr,
            indices,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate().take(self.n) {
            let (cols, vals) = self.row(r);
            *out = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Result of a Lanczos run: the largest Ritz value and its vector.
#[derive(Clone, Debug)]
pub struct RitzPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Largest eigenpair of a symmetric operator by Lanczos with full
/// reorthogonalization.
///
/// `deflate` is an orthonormal set removed from the Krylov space (for example
/// the trivial eigenvector). The Ritz value never falls below the Rayleigh
/// quotient of `start`, so a start vector with a known quotient certifies a
/// lower bound.
pub fn lanczos_top<F>(
    n: usize,
    op: F,
    start: &[f64],
    deflate: &[Vec<f64>],
    max_iter: usize,
    tol: f64,
) -> Result<RitzPair>
where
    F: Fn(&[f64], &mut [f64]),
{
    let project = |v: &mut [f64]| {
        for d in deflate {
            let c = dot(d, v);
            axpy(-c, d, v);
        }
    };
    let mut q0 = start.to_vec();
    project(&mut q0);
    let nrm = norm(&q0);
    if !(nrm > 0.0) {
        return Err(Error::BadParameter("Lanczos start vector vanishes after deflation".into()));
    }
    q0.iter_mut().for_each(|x| *x /= nrm);

    let max_iter = max_iter.min(n - deflate.len()).max(1);
    let mut basis: Vec<Vec<f64>> = vec![q0];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut best: Option<(f64, DVector<f64>, f64)> = None;

    for j in 0..max_iter {
        op(&basis[j], &mut w);
        project(&mut w);
        let a = dot(&basis[j], &w);
        alphas.push(a);
        axpy(-a, &basis[j], &mut w);
        if j > 0 {
            axpy(-betas[j - 1], &basis[j - 1], &mut w);
        }
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                axpy(-c, q, &mut w);
            }
            project(&mut w);
        }
        let b = norm(&w);
        let k = j + 1;
        let check = k % 8 == 0 || k == max_iter || b < 1e-13;
        if check {
            let t = DMatrix::from_fn(k, k, |r, c| {
                if r == c {
                    alphas[r]
                } else if r + 1 == c {
                    betas[r]
                } else if c + 1 == r {
                    betas[c]
                } else {
                    0.0
                }
            });
            let eig = sym_eigen_desc(&t);
            let s = eig.vectors.column(0).into_owned();
            let res = b * s[k - 1].abs();
            best = Some((eig.values[0], s, res));
            if res <= tol * eig.values[0].abs().max(1.0) || b < 1e-13 || k == max_iter {
                break;
            }
        }
        betas.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }

    let (value, s, residual) = best.expect("at least one Lanczos check runs");
    let mut vector = vec![0.0; n];
    for (i, coef) in s.iter().enumerate() {
        axpy(*coef, &basis[i], &mut vector);
    }
    Ok(RitzPair {
        value,
        vector,
        iterations: s.len(),
        residual,
    })
}

/// Conjugate gradients for a symmetric positive-definite operator.
///
/// Returns the solution, the iteration count and the final residual norm
/// relative to `‖b‖`.
pub fn conjugate_gradient<F>(
    op: F,
    b: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize, f64)>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for it in 0..max_iter {
        let rel = rr.sqrt() / bnorm;
        if rel <= rel_tol {
            return Ok((x, it, rel));
        }
        op(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SingularSystem);
        }
        let alpha = rr / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_new;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: rr.sqrt() / bnorm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn laplacian_path(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |r, c| {
            if r == c {
                2.0
            } else if r.abs_diff(c) == 1 {
                -1.0
            } else {
                0.0
            }
        })
    }

    #[test]
    fn refined_solve_has_small_residual() {
        let a = laplacian_path(30);
        let b = DVector::from_element(30, 1.0);
        let (x, res) = solve_refined(&a, &b).unwrap();
        assert!(res < 1e-12);
        // closed form x_i = (i+1)(n-i)/2
        for i in 0..30 {
            assert_abs_diff_eq!(x[i], ((i + 1) * (30 - i)) as f64 / 2.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn singular_system_is_reported() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_element(2, 1.0);
        assert!(matches!(solve_refined(&a, &b), Err(Error::SingularSystem)));
    }

    #[test]
    fn lanczos_matches_dense_top_eigenvalue() {
        let n = 200;
        let a = laplacian_path(n);
        let csr = Csr::from_dense(&a);
        let start: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.37).sin()).collect();
        let ritz = lanczos_top(n, |x, y| csr.matvec(x, y), &start, &[], 300, 1e-12).unwrap();
        let exact = 2.0 - 2.0 * (std::f64::consts::PI * n as f64 / (n as f64 + 1.0)).cos();
        assert_abs_diff_eq!(ritz.value, exact, epsilon = 1e-9);
    }

    #[test]
    fn cg_agrees_with_lu() {
        let a = laplacian_path(50);
        let csr = Csr::from_dense(&a);
        let b: Vec<f64> = (0..50).map(|i| (i as f64).cos()).collect();
        let (x, _, _) = conjugate_gradient(|v, out| csr.matvec(v, out), &b, 1e-13, 500).unwrap();
        let (y, _) = solve_refined(&a, &DVector::from_vec(b)).unwrap();
        for i in 0..50 {
            assert_abs_diff_eq!(x[i], y[i], epsilon = 1e-9);
        }
    }
}
