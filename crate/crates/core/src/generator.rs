//! The generator `𝔸ρ = -i[H, ρ] + γ Dρ` and its adjoint `𝔸† = i[H, ·] + γ D†`.
//!
//! Two realisations are provided. [`GeneratorApplier`] applies the map to a
//! matrix with dense products; [`SuperOperator`] is the vectorised map in
//! compressed-row storage under column stacking, `vec(QρR) = (Rᵀ ⊗ Q) vec(ρ)`.
//! Superoperator rows and columns are indexed `i + j·d` for the matrix entry
//! `(i, j)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock_space::{
    build_number, build_pauli, field_annihilation, BasisIndex, DenseOperator, TruncatedSpace,
};
use crate::linalg::{hermitian_deviation, kron, one_norm, symmetrize, CMatrix, C64, I, ONE, ZERO};
use crate::poly_ops::{apply_pairs, check_symmetric, DissipatorSpec, PolyOperator};

/// Hermiticity tolerance enforced when a [`DensityMatrix`] is constructed.
pub const DENSITY_HERMITICITY_TOLERANCE: f64 = 1e-12;
/// Largest superoperator dimension (`dim_total²`) assembled densely without force.
pub const DENSE_SUPEROPERATOR_LIMIT: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Cavity frequency ω_c.
    pub omega_c: f64,
    /// Molecular frequency ω_a.
    pub omega_a: f64,
    /// Dipole coupling p.
    pub coupling: f64,
    /// Damping rate γ; zero selects the unitary regime.
    pub gamma: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.omega_c.is_finite() && self.omega_c > 0.0) {
            return bad(format!("omega_c must be positive, got {}", self.omega_c));
        }
        if !(self.omega_a.is_finite() && self.omega_a > 0.0) {
            return bad(format!("omega_a must be positive, got {}", self.omega_a));
        }
        if !self.coupling.is_finite() {
            return bad(format!("coupling must be finite, got {}", self.coupling));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return bad(format!("gamma must be nonnegative, got {}", self.gamma));
        }
        Ok(())
    }
}

/// A Hermitian matrix on the truncated space.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    op: DenseOperator,
}

impl DensityMatrix {
    pub fn new(space: TruncatedSpace, matrix: CMatrix) -> Result<Self> {
        Self::from_operator(DenseOperator::new(space, matrix)?)
    }

    pub fn from_operator(op: DenseOperator) -> Result<Self> {
        let deviation = hermitian_deviation(op.matrix());
        if deviation > DENSITY_HERMITICITY_TOLERANCE {
            return Err(Error::NotHermitian {
                deviation,
                tolerance: DENSITY_HERMITICITY_TOLERANCE,
            });
        }
        Ok(Self { op })
    }

    /// Accept `matrix` if its Hermiticity deviation is within `tolerance`, then
    /// replace it by its Hermitian part.
    pub fn symmetrized(space: TruncatedSpace, matrix: CMatrix, tolerance: f64) -> Result<Self> {
        let deviation = hermitian_deviation(&matrix);
        if deviation > tolerance {
            return Err(Error::NotHermitian {
                deviation,
                tolerance,
            });
        }
        Ok(Self {
            op: DenseOperator::new(space, symmetrize(&matrix))?,
        })
    }

    pub fn zeros(space: TruncatedSpace) -> Self {
        Self {
            op: DenseOperator::zeros(space),
        }
    }

    /// `|idx⟩⟨idx|`.
    pub fn projector(space: TruncatedSpace, idx: BasisIndex) -> Result<Self> {
        Ok(Self {
            op: DenseOperator::outer(space, idx, idx)?,
        })
    }

    /// `Σ wᵢ |idxᵢ⟩⟨idxᵢ|`.
    pub fn mixture(space: TruncatedSpace, components: &[(BasisIndex, f64)]) -> Result<Self> {
        let d = space.dim_total();
        let mut m = CMatrix::zeros(d, d);
        for &(idx, w) in components {
            let k = space.flat_index(idx)?;
            m[(k, k)] += C64::new(w, 0.0);
        }
        Self::new(space, m)
    }

    pub fn space(&self) -> TruncatedSpace {
        self.op.space()
    }

    pub fn matrix(&self) -> &CMatrix {
        self.op.matrix()
    }

    pub fn as_operator(&self) -> &DenseOperator {
        &self.op
    }

    pub fn into_matrix(self) -> CMatrix {
        self.op.into_matrix()
    }

    /// `‖ρ‖_HS = sqrt(Σ |ρ_ij|²)`.
    pub fn hs_norm(&self) -> f64 {
        self.matrix().norm()
    }

    /// Largest photon number carrying a nonzero entry (row or column).
    pub fn support_cap(&self) -> usize {
        let m = self.matrix();
        let mut cap = 0;
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if m[(i, j)] != ZERO {
                    cap = cap
                        .max(TruncatedSpace::photon_number(i))
                        .max(TruncatedSpace::photon_number(j));
                }
            }
        }
        cap
    }
}

/// `H = ω_c a†a + ½ω_a σ3 + p((a + a†) ⊗ σ1 + Aᵉ)`.
pub fn build_hamiltonian(
    params: &ModelParams,
    pump: &PolyOperator,
    space: TruncatedSpace,
) -> Result<DenseOperator> {
    params.validate()?;
    let sym = check_symmetric(pump, space);
    if !sym.symmetric {
        return Err(Error::PumpNotSymmetric(sym.max_deviation));
    }
    let number = build_number(space).into_matrix();
    let sigma3 = build_pauli(3, space)?.into_matrix();
    let a = field_annihilation(space.cutoff());
    let quadrature = &a + a.adjoint();
    let sigma1 = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
    let interaction = kron(&quadrature, &sigma1) + pump.eval(space).into_matrix();
    let h = number.scale(params.omega_c)
        + sigma3.scale(0.5 * params.omega_a)
        + interaction.scale(params.coupling);
    DenseOperator::new(space, h)
}

fn word(w: &str, scale: f64) -> PolyOperator {
    PolyOperator::scalar_word(w, C64::new(scale, 0.0)).expect("built-in word")
}

/// `D₁ρ = aρa† - ½a†aρ - ½ρa†a`.
pub fn d1_spec() -> DissipatorSpec {
    DissipatorSpec::new(vec![
        (word("a", 1.0), word("ad", 1.0)),
        (word("ad a", -0.5), PolyOperator::identity()),
        (PolyOperator::identity(), word("ad a", -0.5)),
    ])
}

/// `D₁†ρ = a†ρa - ½ρa†a - ½a†aρ`: the sandwich swaps, the anticommutator part stays.
pub fn d1_adjoint_spec() -> DissipatorSpec {
    DissipatorSpec::new(vec![
        (word("ad", 1.0), word("a", 1.0)),
        (word("ad a", -0.5), PolyOperator::identity()),
        (PolyOperator::identity(), word("ad a", -0.5)),
    ])
}

/// `-i(Hρ - ρH)` on raw matrices.
pub fn commutator_part(h: &CMatrix, rho: &CMatrix) -> CMatrix {
    (h * rho - rho * h) * (-I)
}

/// `Kρ = -i[H, ρ]`.
pub fn apply_k(h: &DenseOperator, rho: &DensityMatrix) -> DenseOperator {
    DenseOperator::new(rho.space(), commutator_part(h.matrix(), rho.matrix()))
        .expect("shapes match")
}

/// `Dρ = Σⱼ QⱼρRⱼ` with truncated matrices.
pub fn apply_dissipator(d: &DissipatorSpec, rho: &DensityMatrix) -> DenseOperator {
    let pairs = d.eval_pairs(rho.space());
    DenseOperator::new(rho.space(), apply_pairs(&pairs, rho.matrix())).expect("shapes match")
}

/// A linear map on matrices over a truncated space.
pub trait LinearGenerator: Sync {
    fn space(&self) -> TruncatedSpace;

    fn apply(&self, rho: &CMatrix) -> CMatrix;

    /// An upper estimate of the induced norm, used for step-size diagnostics.
    fn norm_estimate(&self) -> f64;
}

/// Matrix-free generator. With `adjoint` set it applies `-K + γD`, where the
/// caller supplies the adjoint dissipator.
#[derive(Clone, Debug)]
pub struct GeneratorApplier {
    space: TruncatedSpace,
    h: CMatrix,
    pairs: Vec<(CMatrix, CMatrix)>,
    gamma: f64,
    k_sign: f64,
}

impl GeneratorApplier {
    pub fn new(h: &DenseOperator, d: &DissipatorSpec, gamma: f64) -> Self {
        let space = h.space();
        Self {
            space,
            h: h.matrix().clone(),
            pairs: d.eval_pairs(space),
            gamma,
            k_sign: 1.0,
        }
    }

    /// `-K + γ D_adj` for the adjoint dissipator `d_adjoint`.
    pub fn adjoint(h: &DenseOperator, d_adjoint: &DissipatorSpec, gamma: f64) -> Self {
        Self {
            k_sign: -1.0,
            ..Self::new(h, d_adjoint, gamma)
        }
    }

    /// The zero map.
    pub fn zero(space: TruncatedSpace) -> Self {
        let d = space.dim_total();
        Self {
            space,
            h: CMatrix::zeros(d, d),
            pairs: Vec::new(),
            gamma: 0.0,
            k_sign: 1.0,
        }
    }
}

impl LinearGenerator for GeneratorApplier {
    fn space(&self) -> TruncatedSpace {
        self.space
    }

    fn apply(&self, rho: &CMatrix) -> CMatrix {
        let mut out = commutator_part(&self.h, rho);
        if self.k_sign < 0.0 {
            out.neg_mut();
        }
        if self.gamma != 0.0 {
            out += apply_pairs(&self.pairs, rho).scale(self.gamma);
        }
        out
    }

    fn norm_estimate(&self) -> f64 {
        let diss: f64 = self
            .pairs
            .iter()
            .map(|(q, r)| one_norm(q) * one_norm(r))
            .sum();
        2.0 * one_norm(&self.h) + self.gamma * diss
    }
}

/// `N = max(2, deg P, maxⱼ[deg Qⱼ + deg Rⱼ])`.
pub fn generator_bandwidth(pump: &PolyOperator, d: &DissipatorSpec) -> usize {
    2usize.max(pump.degree()).max(d.bandwidth())
}

/// One Kronecker term `scale · (Rᵀ ⊗ Q)` of a vectorised generator.
#[derive(Clone, Debug)]
pub struct SandwichTerm {
    pub q: CMatrix,
    pub r: CMatrix,
    pub scale: C64,
}

/// Terms of `±K + γD` (`k_sign = -1` with an adjoint dissipator gives `𝔸†`).
pub fn generator_terms(
    h: &DenseOperator,
    d: &DissipatorSpec,
    gamma: f64,
    k_sign: f64,
) -> Vec<SandwichTerm> {
    let space = h.space();
    let id = CMatrix::identity(space.dim_total(), space.dim_total());
    let mut terms = vec![
        SandwichTerm {
            q: h.matrix().clone(),
            r: id.clone(),
            scale: -I * k_sign,
        },
        SandwichTerm {
            q: id,
            r: h.matrix().clone(),
            scale: I * k_sign,
        },
    ];
    if gamma != 0.0 {
        for (q, r) in d.eval_pairs(space) {
            terms.push(SandwichTerm {
                q,
                r,
                scale: C64::new(gamma, 0.0),
            });
        }
    }
    terms
}

/// Vectorised generator in compressed-row storage with a declared bandwidth.
///
/// Row `i + j·d` holds the coupling of output entry `(i, j)` to input entries
/// `(k, l)` at column `k + l·d`; no stored entry has
/// `|n_k - n_i| + |n_l - n_j| > bandwidth`.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperOperator {
    space: TruncatedSpace,
    bandwidth: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
}

/// `|n_k - n_i| + |n_l - n_j|` for superoperator position `(row, col)`.
pub fn coupling_distance(d: usize, row: usize, col: usize) -> usize {
    let (i, j) = (row % d, row / d);
    let (k, l) = (col % d, col / d);
    let pn = TruncatedSpace::photon_number;
    pn(i).abs_diff(pn(k)) + pn(j).abs_diff(pn(l))
}

fn nonzeros(m: &CMatrix) -> Vec<(usize, usize, C64)> {
    let mut out = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v != ZERO {
                out.push((i, j, v));
            }
        }
    }
    out
}

impl SuperOperator {
    /// Assemble `Σ scale·(Rᵀ ⊗ Q)`, rejecting any entry outside the band.
    pub fn assemble(
        space: TruncatedSpace,
        bandwidth: usize,
        terms: &[SandwichTerm],
    ) -> Result<Self> {
        let d = space.dim_total();
        let pn = TruncatedSpace::photon_number;
        let mut coo: Vec<(usize, usize, C64)> = Vec::new();
        for term in terms {
            let qs = nonzeros(&term.q);
            let rs = nonzeros(&term.r);
            coo.reserve(qs.len() * rs.len());
            for &(l, j, rv) in &rs {
                let right = pn(l).abs_diff(pn(j));
                for &(i, k, qv) in &qs {
                    let dist = pn(i).abs_diff(pn(k)) + right;
                    if dist > bandwidth {
                        return Err(Error::BandViolation {
                            n: pn(i),
                            n_prime: pn(j),
                            k: pn(k),
                            k_prime: pn(l),
                            bandwidth,
                        });
                    }
                    coo.push((i + j * d, k + l * d, term.scale * qv * rv));
                }
            }
        }
        coo.sort_unstable_by_key(|&(r, c, _)| (r, c));

        let n = d * d;
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(coo.len());
        let mut values: Vec<C64> = Vec::with_capacity(coo.len());
        let mut iter = coo.into_iter().peekable();
        while let Some((r, c, mut v)) = iter.next() {
            while let Some(&(r2, c2, v2)) = iter.peek() {
                if r2 == r && c2 == c {
                    v += v2;
                    iter.next();
                } else {
                    break;
                }
            }
            if v != ZERO {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            space,
            bandwidth,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn space(&self) -> TruncatedSpace {
        self.space
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// `dim_total²`.
    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.dim());
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[p] * x[self.col_idx[p]];
            }
            *out = acc;
        }
    }

    /// Stored entries as `(row, col, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim()).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1])
                .map(move |p| (r, self.col_idx[p], self.values[p]))
        })
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn norm_one(&self) -> f64 {
        let mut cols = vec![0.0f64; self.dim()];
        for (&c, v) in self.col_idx.iter().zip(&self.values) {
            cols[c] += v.norm();
        }
        cols.into_iter().fold(0.0, f64::max)
    }

    /// Dense copy; refused above [`DENSE_SUPEROPERATOR_LIMIT`] unless `force`.
    pub fn to_dense(&self, force: bool) -> Result<CMatrix> {
        let n = self.dim();
        if n > DENSE_SUPEROPERATOR_LIMIT && !force {
            return Err(Error::DenseRefused {
                dim: n,
                limit: DENSE_SUPEROPERATOR_LIMIT,
            });
        }
        let mut m = CMatrix::zeros(n, n);
        for (r, c, v) in self.entries() {
            m[(r, c)] = v;
        }
        Ok(m)
    }

    pub fn negated(&self) -> Self {
        Self {
            values: self.values.iter().map(|v| -v).collect(),
            ..self.clone()
        }
    }

    /// Largest coupling distance among stored entries (a scan, for reporting).
    pub fn max_coupling_distance(&self) -> usize {
        let d = self.space.dim_total();
        self.entries()
            .map(|(r, c, _)| coupling_distance(d, r, c))
            .max()
            .unwrap_or(0)
    }
}

impl LinearGenerator for SuperOperator {
    fn space(&self) -> TruncatedSpace {
        self.space
    }

    fn apply(&self, rho: &CMatrix) -> CMatrix {
        let d = self.space.dim_total();
        let mut out = CMatrix::zeros(d, d);
        self.matvec(rho.as_slice(), out.as_mut_slice());
        out
    }

    fn norm_estimate(&self) -> f64 {
        self.norm_one()
    }
}

/// Dense `Σ scale·(Rᵀ ⊗ Q)` by explicit Kronecker products; an independent
/// route to the same matrix as [`SuperOperator::assemble`].
pub fn assemble_dense(
    space: TruncatedSpace,
    terms: &[SandwichTerm],
    force: bool,
) -> Result<CMatrix> {
    let d = space.dim_total();
    if d * d > DENSE_SUPEROPERATOR_LIMIT && !force {
        return Err(Error::DenseRefused {
            dim: d * d,
            limit: DENSE_SUPEROPERATOR_LIMIT,
        });
    }
    let mut out = CMatrix::zeros(d * d, d * d);
    for t in terms {
        out += kron(&t.r.transpose(), &t.q) * t.scale;
    }
    Ok(out)
}

/// Vectorise `𝔸 = K + γD`.
pub fn build_superoperator(
    h: &DenseOperator,
    d: &DissipatorSpec,
    params: &ModelParams,
    pump: &PolyOperator,
) -> Result<SuperOperator> {
    let terms = generator_terms(h, d, params.gamma, 1.0);
    SuperOperator::assemble(h.space(), generator_bandwidth(pump, d), &terms)
}

/// Vectorise `𝔸† = -K + γD†` from the adjoint dissipator.
pub fn build_adjoint_superoperator(
    h: &DenseOperator,
    d_adjoint: &DissipatorSpec,
    params: &ModelParams,
    pump: &PolyOperator,
) -> Result<SuperOperator> {
    let terms = generator_terms(h, d_adjoint, params.gamma, -1.0);
    SuperOperator::assemble(h.space(), generator_bandwidth(pump, d_adjoint), &terms)
}
