//! Small dense helpers shared by the operator modules.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Kronecker product `a ⊗ b` with `a` as the slow (major) index.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for j in 0..ac {
        for i in 0..ar {
            let x = a[(i, j)];
            if x == ZERO {
                continue;
            }
            for q in 0..bc {
                for p in 0..br {
                    out[(i * br + p, j * bc + q)] = x * b[(p, q)];
                }
            }
        }
    }
    out
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `max |m - m†|` entrywise.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// `(m + m†) / 2`.
pub fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Hilbert–Schmidt pairing `tr(x† y)`, computed entrywise.
pub fn hs_pairing(x: &CMatrix, y: &CMatrix) -> C64 {
    x.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum()
}

/// `tr(x y)` without forming the product.
pub fn trace_of_product(x: &CMatrix, y: &CMatrix) -> C64 {
    let n = x.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += x[(i, k)] * y[(k, i)];
        }
    }
    acc
}

/// Induced 1-norm (maximum absolute column sum).
pub fn one_norm(m: &CMatrix) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Induced 2-norm (largest singular value).
pub fn spectral_norm(m: &CMatrix) -> f64 {
    m.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut vals: Vec<f64> = symmetrize(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    vals.sort_by(f64::total_cmp);
    vals
}

pub fn max_abs_slice(v: &[C64]) -> f64 {
    v.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn norm_slice(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_matches_index_formula() {
        let a = CMatrix::from_fn(2, 3, |i, j| c(i as f64 + 1.0, j as f64));
        let b = CMatrix::from_fn(3, 2, |i, j| c(j as f64, -(i as f64)));
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (6, 6));
        for i in 0..2 {
            for j in 0..3 {
                for p in 0..3 {
                    for q in 0..2 {
                        assert_eq!(k[(i * 3 + p, j * 2 + q)], a[(i, j)] * b[(p, q)]);
                    }
                }
            }
        }
    }

    #[test]
    fn pairing_is_trace_of_adjoint_product() {
        let x = CMatrix::from_fn(4, 4, |i, j| {
            c((i * 3 + j) as f64, (i as f64) - (j as f64) * 0.5)
        });
        let y = CMatrix::from_fn(4, 4, |i, j| c((i + j) as f64 * 0.25, 1.0 - i as f64));
        let direct = trace(&(x.adjoint() * &y));
        assert!((hs_pairing(&x, &y) - direct).norm() < 1e-12);
        assert!((trace_of_product(&x, &y) - trace(&(&x * &y))).norm() < 1e-12);
    }

    #[test]
    fn symmetrize_removes_antihermitian_part() {
        let m = CMatrix::from_fn(3, 3, |i, j| c(i as f64 - j as f64, (i * j) as f64));
        assert!(hermitian_deviation(&m) > 0.0);
        assert_eq!(hermitian_deviation(&symmetrize(&m)), 0.0);
    }
}
