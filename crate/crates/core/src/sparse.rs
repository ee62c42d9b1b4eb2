//! Compressed sparse rows and a preconditioned conjugate gradient solver.
//!
//! The stiffness operators assembled in this crate are symmetric positive
//! semidefinite with a few nonzeros per row, so a matrix-free style solver
//! is enough: the only dense work is vector arithmetic. The conjugate
//! gradient below is preconditioned with a positive diagonal; running it
//! with the lumped mass matrix as preconditioner is the same iteration as
//! plain conjugate gradient in the mass-weighted inner product.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CgError {
    #[error("operator is not positive definite (p'Ap = {value:e} at iteration {iteration})")]
    NotPositiveDefinite { iteration: u32, value: f64 },
    #[error("no convergence after {iterations} iterations, relative residual {relative_residual:e}")]
    NoConvergence {
        iterations: u32,
        relative_residual: f64,
    },
}

/// Symmetric sparse matrix in compressed row storage.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<u32>,
    val: Vec<f64>,
}

impl CsrMatrix {
    /// Assembles from unordered triplets, accumulating duplicates.
    pub fn from_triplets(n: usize, triplets: &[(u32, u32, f64)]) -> Self {
        let mut sorted: Vec<(u32, u32, f64)> = triplets.to_vec();
        sorted.sort_by_key(|&(i, j, _)| (i, j));
        let mut rows: Vec<u32> = Vec::with_capacity(sorted.len());
        let mut col = Vec::with_capacity(sorted.len());
        let mut val: Vec<f64> = Vec::with_capacity(sorted.len());
        for &(i, j, v) in &sorted {
            debug_assert!((i as usize) < n && (j as usize) < n);
            if rows.last() == Some(&i) && col.last() == Some(&j) {
                *val.last_mut().unwrap() += v;
            } else {
                rows.push(i);
                col.push(j);
                val.push(v);
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for &i in &rows {
            row_ptr[i as usize + 1] += 1;
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            n,
            row_ptr,
            col,
            val,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.val[k] * x[self.col[k] as usize];
            }
            y[i] = acc;
        }
    }

    /// `x' A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; self.n];
        self.mul_vec(x, &mut y);
        x.iter().zip(&y).map(|(a, b)| a * b).sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.val[self.row_ptr[i]..self.row_ptr[i + 1]].iter().sum())
            .collect()
    }

    fn get(&self, i: usize, j: u32) -> f64 {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        match self.col[lo..hi].binary_search(&j) {
            Ok(k) => self.val[lo + k],
            Err(_) => 0.0,
        }
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn symmetry_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col[k] as usize;
                worst = worst.max((self.val[k] - self.get(j, i as u32)).abs());
            }
        }
        worst
    }

    pub fn entries(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i as u32, self.col[k], self.val[k]))
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CgStats {
    pub iterations: u32,
    pub relative_residual: f64,
}

/// Preconditioned conjugate gradient for symmetric positive definite
/// operators. `precond_diag` must be strictly positive; convergence is
/// measured in the preconditioner norm relative to the right-hand side.
/// The iteration aborts with an error when a search direction certifies
/// that the operator is indefinite.
pub fn conjugate_gradient<F>(
    apply: F,
    precond_diag: &[f64],
    rhs: &[f64],
    x0: &[f64],
    rel_tol: f64,
    max_iterations: u32,
) -> Result<(Vec<f64>, CgStats), CgError>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = rhs.len();
    let mut x = x0.to_vec();
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut z: Vec<f64> = r.iter().zip(precond_diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let rhs_norm: f64 = rhs
        .iter()
        .zip(precond_diag)
        .map(|(b, d)| b * b / d)
        .sum::<f64>()
        .sqrt();
    if rhs_norm == 0.0 {
        return Ok((
            vec![0.0; n],
            CgStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let target = rel_tol * rhs_norm;
    let mut ap = vec![0.0; n];
    for iteration in 0..max_iterations {
        if rz.max(0.0).sqrt() <= target {
            return Ok((
                x,
                CgStats {
                    iterations: iteration,
                    relative_residual: rz.max(0.0).sqrt() / rhs_norm,
                },
            ));
        }
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(CgError::NotPositiveDefinite {
                iteration,
                value: pap,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] / precond_diag[i];
        }
        let rz_next: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rel = rz.max(0.0).sqrt() / rhs_norm;
    if rel <= rel_tol {
        return Ok((
            x,
            CgStats {
                iterations: max_iterations,
                relative_residual: rel,
            },
        ));
    }
    Err(CgError::NoConvergence {
        iterations: max_iterations,
        relative_residual: rel,
    })
}
