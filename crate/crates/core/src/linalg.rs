//! Dense symmetric matrices and the cyclic Jacobi eigensolver.
//!
//! The matrices here are small (the kagome star is 12x12), so a plain
//! row-major `Vec<f64>` and Jacobi rotations are all that is needed. Jacobi is
//! unconditionally stable for real symmetric input and produces eigenvectors
//! that are orthonormal to working precision, including inside degenerate
//! subspaces.

use thiserror::Error;

/// Sweep cap for [`jacobi_eigen`].
pub const MAX_SWEEPS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("Jacobi iteration did not converge within {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    ConvergenceFailure { sweeps: usize, off_norm: f64 },
    #[error("matrix contains non-finite entries")]
    NonFinite,
}

/// Square matrix stored row-major. Named for its main use; symmetry is
/// maintained by [`SymMatrix::set_sym`] and checked by [`SymMatrix::is_symmetric`].
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "row {i} has wrong length");
            m.data[i * n..(i + 1) * n].copy_from_slice(row);
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    /// Set both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.set(i, j, v);
        self.set(j, i, v);
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    pub fn matmul(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = SymMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn mat_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n.max(1)).map(<[f64]>::to_vec).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    fn off_diagonal_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                s += self.get(i, j).powi(2);
            }
        }
        (2.0 * s).sqrt()
    }

    fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Eigen-decomposition with eigenvalues in ascending order.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// `vectors[j]` is the unit eigenvector belonging to `values[j]`.
    /// Empty when vectors were not requested.
    pub vectors: Vec<Vec<f64>>,
    pub sweeps: usize,
}

/// Cyclic Jacobi eigen-decomposition of a real symmetric matrix.
///
/// Only the upper triangle of `a` is read. Convergence is declared when the
/// off-diagonal Frobenius norm drops below `1e-15` of the full norm; the
/// eigenvectors are accumulated only when `want_vectors` is set.
pub fn jacobi_eigen(a: &SymMatrix, want_vectors: bool) -> Result<Eigen, LinalgError> {
    let n = a.dim();
    if a.data.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let mut m = a.clone();
    for i in 0..n {
        for j in 0..i {
            m.set(i, j, m.get(j, i));
        }
    }
    let mut v = if want_vectors { SymMatrix::identity(n) } else { SymMatrix::zeros(0) };

    let scale = m.frobenius_norm();
    let tol = scale * 1e-15;
    let mut sweeps = 0;

    while m.off_diagonal_norm() > tol {
        if sweeps == MAX_SWEEPS {
            return Err(LinalgError::ConvergenceFailure {
                sweeps,
                off_norm: m.off_diagonal_norm(),
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                // Rotation angle chosen so the (p, q) entry vanishes; `t` is
                // the smaller root of t^2 + 2 theta t - 1 = 0.
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                m.set(p, p, app - t * apq);
                m.set(q, q, aqq + t * apq);
                m.set_sym(p, q, 0.0);
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = m.get(k, p);
                    let akq = m.get(k, q);
                    m.set_sym(k, p, c * akp - s * akq);
                    m.set_sym(k, q, s * akp + c * akq);
                }
                if want_vectors {
                    for k in 0..n {
                        let vkp = v.get(k, p);
                        let vkq = v.get(k, q);
                        v.set(k, p, c * vkp - s * vkq);
                        v.set(k, q, s * vkp + c * vkq);
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(i, i).total_cmp(&m.get(j, j)));
    let values = order.iter().map(|&i| m.get(i, i)).collect();
    let vectors = if want_vectors {
        order
            .iter()
            .map(|&col| {
                let mut vec: Vec<f64> = (0..n).map(|k| v.get(k, col)).collect();
                canonical_sign(&mut vec);
                vec
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(Eigen { values, vectors, sweeps })
}

/// Fix the sign of an eigenvector so its largest-magnitude component
/// (first one on ties) is positive.
pub fn canonical_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
