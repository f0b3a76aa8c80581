// SPDX-License-Identifier: Apache-2.0

//! Small dense linear-algebra kernels.

use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::C64;

/// `a^H b`.
pub fn cdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).fold(C64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
}

pub fn cnorm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

pub fn cnorm(a: &[C64]) -> f64 {
    cnorm_sqr(a).sqrt()
}

/// Unit-norm copy of `a`, or `None` when `a` has zero (or non-finite) norm.
pub fn normalized(a: &[C64]) -> Option<Vec<C64>> {
    let n = cnorm(a);
    if n > 0.0 && n.is_finite() {
        Some(a.iter().map(|x| x / n).collect())
    } else {
        None
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn euclidean_sqr(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    euclidean_sqr(a, b).sqrt()
}

/// Full eigendecomposition of a dense symmetric `n x n` row-major matrix by
/// cyclic Jacobi rotations. Eigenvalues are returned in decreasing order;
/// eigenvector `i` is column `i` of the returned row-major matrix.
pub fn jacobi_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]));
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (col, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[k * n + col] = v[k * n + src];
        }
    }
    (values, vectors)
}

/// Symmetric eigenpairs returned by [`top_eigenpairs`].
#[derive(Debug, Clone)]
pub struct EigenPairs {
    /// Largest eigenvalues, decreasing.
    pub values: Vec<f64>,
    /// `vectors[i]` is the unit eigenvector of `values[i]`.
    pub vectors: Vec<Vec<f64>>,
}

fn matvec(a: &[f64], n: usize, x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = dot(&a[i * n..(i + 1) * n], x);
    }
}

fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    // two passes of classical Gram-Schmidt keep the basis orthogonal to
    // machine precision
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, w);
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi -= c * qi;
            }
        }
    }
}

/// Deterministic pseudo-random start vector (xorshift).
fn start_vector(n: usize, salt: u64) -> Vec<f64> {
    let mut s = 0x2545_f491_4f6c_dd1d_u64 ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    (0..n)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

/// The `k` algebraically largest eigenpairs of a dense symmetric `n x n`
/// row-major matrix.
///
/// Lanczos iteration with full reorthogonalization; Ritz pairs are accepted
/// once every residual `|beta_m s_m|` falls below `tol` times the spectral
/// scale.
pub fn top_eigenpairs(a: &[f64], n: usize, k: usize, tol: f64) -> EigenPairs {
    assert_eq!(a.len(), n * n);
    let k = k.min(n);
    if n <= 64 {
        let (vals, vecs) = jacobi_eigen(a, n);
        return EigenPairs {
            values: vals[..k].to_vec(),
            vectors: (0..k).map(|c| (0..n).map(|r| vecs[r * n + c]).collect()).collect(),
        };
    }
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut q = start_vector(n, 0);
    let qn = dot(&q, &q).sqrt();
    q.iter_mut().for_each(|x| *x /= qn);
    let mut w = vec![0.0; n];
    let mut restarts = 1u64;
    let check_every = 8;
    loop {
        matvec(a, n, &q, &mut w);
        let alpha_j = dot(&q, &w);
        basis.push(q.clone());
        alpha.push(alpha_j);
        orthogonalize(&mut w, &basis);
        let beta_j = dot(&w, &w).sqrt();
        let m = basis.len();
        let spectral = alpha.iter().chain(beta.iter()).fold(0.0_f64, |s, x| s.max(x.abs())).max(beta_j);
        let breakdown = beta_j <= 1e-12 * spectral.max(f64::MIN_POSITIVE);

        if m == n || (m >= k && (m.is_multiple_of(check_every) || breakdown)) {
            // Ritz values of the tridiagonal projection
            let mut t = vec![0.0; m * m];
            for i in 0..m {
                t[i * m + i] = alpha[i];
                if i + 1 < m {
                    t[i * m + i + 1] = beta[i];
                    t[(i + 1) * m + i] = beta[i];
                }
            }
            let (vals, svecs) = jacobi_eigen(&t, m);
            let scale = vals.iter().fold(0.0_f64, |s, x| s.max(x.abs())).max(f64::MIN_POSITIVE);
            let resid_beta = if breakdown { 0.0 } else { beta_j };
            let converged = (0..k).all(|i| (resid_beta * svecs[(m - 1) * m + i]).abs() <= tol * scale);
            // on breakdown the Krylov space is invariant and its Ritz pairs are exact
            if m == n || converged {
                let values = vals[..k].to_vec();
                let vectors = (0..k)
                    .map(|c| {
                        let mut v = vec![0.0; n];
                        for (r, qr) in basis.iter().enumerate() {
                            let s = svecs[r * m + c];
                            for (vi, qi) in v.iter_mut().zip(qr) {
                                *vi += s * qi;
                            }
                        }
                        let nv = dot(&v, &v).sqrt();
                        v.iter_mut().for_each(|x| *x /= nv);
                        v
                    })
                    .collect();
                return EigenPairs { values, vectors };
            }
        }

        if breakdown {
            // restart in the orthogonal complement of the Krylov space found so far
            let mut fresh = start_vector(n, restarts);
            restarts += 1;
            orthogonalize(&mut fresh, &basis);
            let fnorm = dot(&fresh, &fresh).sqrt();
            fresh.iter_mut().for_each(|x| *x /= fnorm);
            beta.push(0.0);
            q = fresh;
        } else {
            beta.push(beta_j);
            q = w.iter().map(|x| x / beta_j).collect();
        }
    }
}
