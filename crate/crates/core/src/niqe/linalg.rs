//! Dense symmetric eigensolver and pseudo-inverse for small covariance matrices.

use crate::Scalar;

/// Eigen-decomposition of a symmetric matrix: `a = V · diag(values) · Vᵀ`.
/// `vectors` is row-major with eigenvectors stored as columns.
#[derive(Clone, Debug)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    pub vectors: Vec<T>,
    pub dim: usize,
}

/// Cyclic Jacobi rotations. `a` is row-major `dim × dim` and must be symmetric.
pub fn symmetric_eigen<T: Scalar>(a: &[T], dim: usize) -> SymmetricEigen<T> {
    assert_eq!(a.len(), dim * dim);
    let mut m = a.to_vec();
    let mut v = vec![T::zero(); dim * dim];
    for i in 0..dim {
        v[i * dim + i] = T::one();
    }
    let idx = |r: usize, c: usize| r * dim + c;
    let scale: T = m.iter().map(|x| *x * *x).sum::<T>().sqrt();
    let tol = T::epsilon() * T::epsilon() * scale * scale;

    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..dim {
            for q in p + 1..dim {
                off = off + m[idx(p, q)] * m[idx(p, q)];
            }
        }
        if off <= tol || off == T::zero() {
            break;
        }
        for p in 0..dim {
            for q in p + 1..dim {
                let apq = m[idx(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let app = m[idx(p, p)];
                let aqq = m[idx(q, q)];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..dim {
                    let mkp = m[idx(k, p)];
                    let mkq = m[idx(k, q)];
                    m[idx(k, p)] = c * mkp - s * mkq;
                    m[idx(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..dim {
                    let mpk = m[idx(p, k)];
                    let mqk = m[idx(q, k)];
                    m[idx(p, k)] = c * mpk - s * mqk;
                    m[idx(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..dim {
                    let vkp = v[idx(k, p)];
                    let vkq = v[idx(k, q)];
                    v[idx(k, p)] = c * vkp - s * vkq;
                    v[idx(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let values = (0..dim).map(|i| m[idx(i, i)]).collect();
    SymmetricEigen {
        values,
        vectors: v,
        dim,
    }
}

/// Eigenvalues at or below this are treated as zero.
pub fn rank_cutoff<T: Scalar>(values: &[T]) -> T {
    let max = values.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    let rel = T::lit(1e-10).max(T::from_count(values.len()) * T::epsilon());
    rel * max.max(T::one())
}

impl<T: Scalar> SymmetricEigen<T> {
    /// `xᵀ · A⁺ · x` without forming the pseudo-inverse.
    pub fn pinv_quadratic_form(&self, x: &[T]) -> T {
        let cutoff = rank_cutoff(&self.values);
        let mut acc = T::zero();
        for k in 0..self.dim {
            let lambda = self.values[k];
            if lambda <= cutoff {
                continue;
            }
            let proj: T = (0..self.dim).map(|i| self.vectors[i * self.dim + k] * x[i]).sum();
            acc = acc + proj * proj / lambda;
        }
        acc
    }

    /// Moore–Penrose pseudo-inverse, row-major.
    pub fn pinv(&self) -> Vec<T> {
        let n = self.dim;
        let cutoff = rank_cutoff(&self.values);
        let mut out = vec![T::zero(); n * n];
        for k in 0..n {
            let lambda = self.values[k];
            if lambda <= cutoff {
                continue;
            }
            let inv = T::one() / lambda;
            for i in 0..n {
                let vik = self.vectors[i * n + k] * inv;
                for j in 0..n {
                    out[i * n + j] = out[i * n + j] + vik * self.vectors[j * n + k];
                }
            }
        }
        out
    }
}
