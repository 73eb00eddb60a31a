//! Matrix exponentials for the vectorised generator.
//!
//! [`expm_dense`] is the Padé(13) scaling-and-squaring method on a dense
//! matrix. [`expm_action`] computes `e^{tA}v` for a sparse [`SuperOperator`]
//! by splitting `t` into substeps of norm at most `theta` and summing the
//! Taylor series of each substep to working precision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::SuperOperator;
use crate::linalg::{max_abs_slice, one_norm, CMatrix, C64};

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;
const MAX_SQUARINGS: i32 = 64;
const MAX_SUBSTEPS: f64 = 1e7;

/// Tuning of [`expm_action`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaylorParams {
    /// Largest 1-norm of `A·h` allowed in a substep.
    pub theta: f64,
    /// Maximum Taylor order per substep.
    pub max_order: usize,
    /// Relative truncation tolerance.
    pub tol: f64,
}

impl Default for TaylorParams {
    fn default() -> Self {
        Self {
            theta: 1.0,
            max_order: 60,
            tol: f64::EPSILON / 2.0,
        }
    }
}

/// How `e^{𝔸t}` is realised.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpmStrategy {
    /// Dense propagator when the superoperator is small, Taylor action otherwise.
    #[default]
    Auto,
    /// Dense Padé(13) propagator per distinct step.
    Pade,
    /// Scaled Taylor action on the sparse operator.
    Taylor,
}

/// Superoperator dimension up to which `Auto` picks the dense propagator.
pub const AUTO_DENSE_LIMIT: usize = 400;

/// `e^A` by Padé(13) scaling and squaring.
pub fn expm_dense(a: &CMatrix) -> Result<CMatrix> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm_dense requires a square matrix");
    if n == 0 {
        return Ok(a.clone());
    }
    let norm = one_norm(a);
    if !norm.is_finite() {
        return Err(Error::ExpmOverflow { norm });
    }
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    if s > MAX_SQUARINGS {
        return Err(Error::ExpmOverflow { norm });
    }
    let a = a.scale(0.5f64.powi(s));
    let id = CMatrix::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = |k: usize| C64::new(PADE13[k], 0.0);

    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9))
        + &a6 * b(7)
        + &a4 * b(5)
        + &a2 * b(3)
        + &id * b(1);
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8))
        + &a6 * b(6)
        + &a4 * b(4)
        + &a2 * b(2)
        + &id * b(0);

    let lu = (&v - &u).lu();
    let mut r = lu.solve(&(&v + &u)).ok_or(Error::SingularPade)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

/// `e^{tA} v` for the sparse operator `A`.
pub fn expm_action(
    op: &SuperOperator,
    v: &[C64],
    t: f64,
    params: &TaylorParams,
) -> Result<Vec<C64>> {
    let mut f = v.to_vec();
    if t == 0.0 {
        return Ok(f);
    }
    let norm = op.norm_one() * t.abs();
    if !norm.is_finite() {
        return Err(Error::ExpmOverflow { norm });
    }
    let steps = (norm / params.theta).ceil().max(1.0);
    if steps > MAX_SUBSTEPS {
        return Err(Error::ExpmOverflow { norm });
    }
    let steps = steps as usize;
    let h = t / steps as f64;
    let mut term = vec![C64::new(0.0, 0.0); f.len()];
    let mut next = vec![C64::new(0.0, 0.0); f.len()];
    for _ in 0..steps {
        term.copy_from_slice(&f);
        let mut prev_size = f64::INFINITY;
        let mut converged = false;
        for j in 1..=params.max_order {
            op.matvec(&term, &mut next);
            let factor = C64::new(h / j as f64, 0.0);
            for (x, y) in term.iter_mut().zip(&next) {
                *x = y * factor;
            }
            for (acc, x) in f.iter_mut().zip(&term) {
                *acc += x;
            }
            let size = max_abs_slice(&term);
            if size + prev_size <= params.tol * max_abs_slice(&f) {
                converged = true;
                break;
            }
            prev_size = size;
        }
        if !converged && max_abs_slice(&f) > 0.0 {
            return Err(Error::ExpmNoConvergence(params.max_order));
        }
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock_space::TruncatedSpace;
    use crate::generator::SandwichTerm;
    use crate::linalg::{c, max_abs, ONE};

    /// Plain Taylor sum with many terms; only valid for small norms.
    fn taylor_reference(a: &CMatrix, terms: usize) -> CMatrix {
        let n = a.nrows();
        let mut out = CMatrix::identity(n, n);
        let mut p = CMatrix::identity(n, n);
        for k in 1..terms {
            p = &p * a / C64::new(k as f64, 0.0);
            out += &p;
        }
        out
    }

    #[test]
    fn pade_matches_series_and_closed_forms() {
        let a = CMatrix::from_fn(5, 5, |i, j| {
            c(
                ((i * 7 + j * 3) % 5) as f64 * 0.1 - 0.2,
                (i as f64 - j as f64) * 0.05,
            )
        });
        assert!(max_abs(&(expm_dense(&a).unwrap() - taylor_reference(&a, 40))) < 1e-13);
        // Rotation generator: e^{θJ} = [[cos, -sin], [sin, cos]].
        let theta = 7.3;
        let j = CMatrix::from_row_slice(
            2,
            2,
            &[c(0.0, 0.0), c(-theta, 0.0), c(theta, 0.0), c(0.0, 0.0)],
        );
        let e = expm_dense(&j).unwrap();
        let want = CMatrix::from_row_slice(
            2,
            2,
            &[
                c(theta.cos(), 0.0),
                c(-theta.sin(), 0.0),
                c(theta.sin(), 0.0),
                c(theta.cos(), 0.0),
            ],
        );
        assert!(max_abs(&(e - want)) < 1e-13);
        let z = CMatrix::zeros(3, 3);
        assert_eq!(expm_dense(&z).unwrap(), CMatrix::identity(3, 3));
    }

    #[test]
    fn pade_overflow_reported() {
        let mut a = CMatrix::zeros(2, 2);
        a[(0, 0)] = c(1e300, 0.0);
        a[(1, 1)] = c(1e300, 0.0);
        assert!(matches!(expm_dense(&a), Err(Error::ExpmOverflow { .. })));
    }

    #[test]
    fn action_agrees_with_dense() {
        let space = TruncatedSpace::new(2);
        let d = space.dim_total();
        let q = CMatrix::from_fn(d, d, |i, j| {
            if i.abs_diff(j) <= 2 {
                c(0.3 * i as f64 - 0.1 * j as f64, 0.2)
            } else {
                c(0.0, 0.0)
            }
        });
        let terms = [SandwichTerm {
            q,
            r: CMatrix::identity(d, d),
            scale: ONE,
        }];
        let op = SuperOperator::assemble(space, 4, &terms).unwrap();
        let dense = op.to_dense(false).unwrap();
        let v: Vec<C64> = (0..d * d)
            .map(|k| c((k as f64).sin(), (k as f64 * 0.3).cos()))
            .collect();
        for t in [0.0, 0.1, 1.7, -0.8] {
            let got = expm_action(&op, &v, t, &TaylorParams::default()).unwrap();
            let e = expm_dense(&(dense.clone() * C64::new(t, 0.0))).unwrap();
            let want = e * nalgebra::DVector::from_column_slice(&v);
            let err = got
                .iter()
                .zip(want.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-11 * want.norm(), "t={t} err={err}");
        }
    }
}
