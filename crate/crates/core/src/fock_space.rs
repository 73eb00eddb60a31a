//! The truncated space `F_cutoff ⊗ C²` and its elementary operators.
//!
//! Basis ordering is spin-fastest: `flat = 2n + s` with `s = 0` for `s+` and
//! `s = 1` for `s-`. Every operator here is a dense `dim_total × dim_total`
//! matrix; amplitudes that would leave the cutoff subspace are dropped.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kron, CMatrix, ONE, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Spin {
    #[serde(rename = "+")]
    Up,
    #[serde(rename = "-")]
    Down,
}

impl Spin {
    pub fn offset(self) -> usize {
        match self {
            Spin::Up => 0,
            Spin::Down => 1,
        }
    }

    /// Eigenvalue of σ3.
    pub fn sign(self) -> f64 {
        match self {
            Spin::Up => 1.0,
            Spin::Down => -1.0,
        }
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Spin::Up => "+",
            Spin::Down => "-",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisIndex {
    pub n: usize,
    pub spin: Spin,
}

impl BasisIndex {
    pub fn new(n: usize, spin: Spin) -> Self {
        Self { n, spin }
    }
}

impl fmt::Display for BasisIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{},{}>", self.n, self.spin)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TruncatedSpace {
    cutoff: usize,
}

impl TruncatedSpace {
    pub fn new(cutoff: usize) -> Self {
        Self { cutoff }
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim_field(&self) -> usize {
        self.cutoff + 1
    }

    pub fn dim_total(&self) -> usize {
        2 * (self.cutoff + 1)
    }

    pub fn flat_index(&self, idx: BasisIndex) -> Result<usize> {
        if idx.n > self.cutoff {
            return Err(Error::PhotonOutOfRange {
                n: idx.n,
                cutoff: self.cutoff,
            });
        }
        Ok(2 * idx.n + idx.spin.offset())
    }

    pub fn decode(&self, flat: usize) -> Result<BasisIndex> {
        if flat >= self.dim_total() {
            return Err(Error::FlatIndexOutOfRange {
                index: flat,
                dim: self.dim_total(),
            });
        }
        let spin = if flat.is_multiple_of(2) {
            Spin::Up
        } else {
            Spin::Down
        };
        Ok(BasisIndex::new(flat / 2, spin))
    }

    /// Photon number of a flat index; no range check.
    #[inline]
    pub fn photon_number(flat: usize) -> usize {
        flat / 2
    }

    pub fn basis(&self) -> impl Iterator<Item = BasisIndex> {
        (0..=self.cutoff)
            .flat_map(|n| [BasisIndex::new(n, Spin::Up), BasisIndex::new(n, Spin::Down)])
    }

    /// Number of flat indices with photon number at most `cap`.
    pub fn dim_up_to(&self, cap: usize) -> usize {
        2 * (cap.min(self.cutoff) + 1)
    }
}

/// A complex matrix on a [`TruncatedSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    space: TruncatedSpace,
    matrix: CMatrix,
}

impl DenseOperator {
    pub fn new(space: TruncatedSpace, matrix: CMatrix) -> Result<Self> {
        let d = space.dim_total();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::ShapeMismatch {
                expected: d,
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        Ok(Self { space, matrix })
    }

    pub fn zeros(space: TruncatedSpace) -> Self {
        let d = space.dim_total();
        Self {
            space,
            matrix: CMatrix::zeros(d, d),
        }
    }

    pub fn identity(space: TruncatedSpace) -> Self {
        let d = space.dim_total();
        Self {
            space,
            matrix: CMatrix::identity(d, d),
        }
    }

    /// `field ⊗ spin` for a `(cutoff+1)²` field matrix and a 2×2 spin matrix.
    pub fn from_factors(space: TruncatedSpace, field: &CMatrix, spin: &CMatrix) -> Self {
        debug_assert_eq!(field.nrows(), space.dim_field());
        debug_assert_eq!(spin.nrows(), 2);
        Self {
            space,
            matrix: kron(field, spin),
        }
    }

    /// `|i⟩⟨j|`.
    pub fn outer(space: TruncatedSpace, i: BasisIndex, j: BasisIndex) -> Result<Self> {
        let mut op = Self::zeros(space);
        op.matrix[(space.flat_index(i)?, space.flat_index(j)?)] = ONE;
        Ok(op)
    }

    pub fn space(&self) -> TruncatedSpace {
        self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Self {
            space: self.space,
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn entry(&self, row: BasisIndex, col: BasisIndex) -> Result<crate::linalg::C64> {
        Ok(self.matrix[(self.space.flat_index(row)?, self.space.flat_index(col)?)])
    }
}

/// Truncated single-mode annihilation matrix on the field factor alone.
pub fn field_annihilation(cutoff: usize) -> CMatrix {
    let d = cutoff + 1;
    let mut a = CMatrix::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = crate::linalg::c((n as f64).sqrt(), 0.0);
    }
    a
}

fn spin_identity() -> CMatrix {
    CMatrix::identity(2, 2)
}

/// `a ⊗ I₂` with `⟨n-1|a|n⟩ = √n`.
pub fn build_annihilation(space: TruncatedSpace) -> DenseOperator {
    DenseOperator::from_factors(space, &field_annihilation(space.cutoff()), &spin_identity())
}

/// `a† ⊗ I₂`, the conjugate transpose of [`build_annihilation`].
pub fn build_creation(space: TruncatedSpace) -> DenseOperator {
    build_annihilation(space).adjoint()
}

/// `I_field ⊗ σ_which` for `which ∈ {1, 3}`.
pub fn build_pauli(which: u8, space: TruncatedSpace) -> Result<DenseOperator> {
    let sigma = match which {
        1 => CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        3 => CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        other => return Err(Error::UnsupportedPauli(other)),
    };
    Ok(DenseOperator::from_factors(
        space,
        &CMatrix::identity(space.dim_field(), space.dim_field()),
        &sigma,
    ))
}

/// `a†a ⊗ I₂`, diagonal with entries `n`.
pub fn build_number(space: TruncatedSpace) -> DenseOperator {
    let d = space.dim_total();
    let mut m = CMatrix::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = crate::linalg::c(TruncatedSpace::photon_number(i) as f64, 0.0);
    }
    DenseOperator { space, matrix: m }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, max_abs};

    fn idx(n: usize, spin: Spin) -> BasisIndex {
        BasisIndex::new(n, spin)
    }

    #[test]
    fn annihilation_entries() {
        let space = TruncatedSpace::new(3);
        let a = build_annihilation(space);
        assert_eq!(
            a.entry(idx(0, Spin::Up), idx(1, Spin::Up)).unwrap(),
            c(1.0, 0.0)
        );
        assert_eq!(
            a.entry(idx(1, Spin::Up), idx(2, Spin::Up)).unwrap(),
            c(2f64.sqrt(), 0.0)
        );
        assert_eq!(a.entry(idx(0, Spin::Down), idx(1, Spin::Up)).unwrap(), ZERO);
        for s in [Spin::Up, Spin::Down] {
            let col = space.flat_index(idx(0, s)).unwrap();
            assert!(a.matrix().column(col).iter().all(|z| *z == ZERO));
        }
    }

    #[test]
    fn truncated_commutator_has_boundary_defect() {
        // Field part of a a† - a† a at cutoff 3 is diag(1, 1, 1, -3).
        let space = TruncatedSpace::new(3);
        let a = build_annihilation(space);
        let ad = build_creation(space);
        let comm = a.matrix() * ad.matrix() - ad.matrix() * a.matrix();
        let expected = [1.0, 1.0, 1.0, -3.0];
        for i in 0..space.dim_total() {
            for j in 0..space.dim_total() {
                let want = if i == j { expected[i / 2] } else { 0.0 };
                assert!((comm[(i, j)] - c(want, 0.0)).norm() < 1e-14, "({i},{j})");
            }
        }
    }

    #[test]
    fn creation_boundary_and_adjoint() {
        let space = TruncatedSpace::new(3);
        let a = build_annihilation(space);
        let ad = build_creation(space);
        assert_eq!(ad.entry(idx(1, Spin::Up), idx(0, Spin::Up)).unwrap(), ONE);
        for s in [Spin::Up, Spin::Down] {
            let col = space.flat_index(idx(3, s)).unwrap();
            assert!(ad.matrix().column(col).iter().all(|z| *z == ZERO));
        }
        assert_eq!(ad.matrix(), &a.matrix().adjoint());
    }

    #[test]
    fn pauli_matrices() {
        let space = TruncatedSpace::new(4);
        let s3 = build_pauli(3, space).unwrap();
        let s1 = build_pauli(1, space).unwrap();
        for n in 0..=4 {
            assert_eq!(s3.entry(idx(n, Spin::Up), idx(n, Spin::Up)).unwrap(), ONE);
            assert_eq!(
                s3.entry(idx(n, Spin::Down), idx(n, Spin::Down)).unwrap(),
                -ONE
            );
            assert_eq!(s1.entry(idx(n, Spin::Up), idx(n, Spin::Down)).unwrap(), ONE);
        }
        let sq = s1.matrix() * s1.matrix();
        assert_eq!(sq, CMatrix::identity(10, 10));
        let a = build_annihilation(space);
        for s in [&s1, &s3] {
            let comm = a.matrix() * s.matrix() - s.matrix() * a.matrix();
            assert_eq!(max_abs(&comm), 0.0);
        }
        assert!(matches!(
            build_pauli(2, space),
            Err(Error::UnsupportedPauli(2))
        ));
    }

    #[test]
    fn flat_index_ordering() {
        let space = TruncatedSpace::new(5);
        assert_eq!(space.flat_index(idx(0, Spin::Up)).unwrap(), 0);
        assert_eq!(space.flat_index(idx(0, Spin::Down)).unwrap(), 1);
        assert_eq!(space.flat_index(idx(1, Spin::Up)).unwrap(), 2);
        for k in 0..space.dim_total() {
            assert_eq!(space.flat_index(space.decode(k).unwrap()).unwrap(), k);
        }
        assert_eq!(space.basis().count(), space.dim_total());
        assert!(space.flat_index(idx(6, Spin::Up)).is_err());
        assert!(space.decode(12).is_err());
    }

    #[test]
    fn number_operator_is_ad_a() {
        let space = TruncatedSpace::new(6);
        let ad_a = build_creation(space).matrix() * build_annihilation(space).matrix();
        assert!(max_abs(&(ad_a - build_number(space).matrix())) < 1e-14);
    }

    #[test]
    fn field_and_spin_operators_commute() {
        let space = TruncatedSpace::new(3);
        let ad = build_creation(space);
        let s1 = build_pauli(1, space).unwrap();
        let comm = ad.matrix() * s1.matrix() - s1.matrix() * ad.matrix();
        assert_eq!(max_abs(&comm), 0.0);
    }

    #[test]
    fn operator_shape_checked() {
        let space = TruncatedSpace::new(2);
        assert!(DenseOperator::new(space, CMatrix::zeros(5, 6)).is_err());
        assert!(DenseOperator::new(space, CMatrix::zeros(6, 6)).is_ok());
    }
}
