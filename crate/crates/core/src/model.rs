//! A model specification independent of the cutoff, and its assembly at a
//! given cutoff.

use crate::certify::sample_finite_rank;
use crate::error::{Error, Result};
use crate::fock_space::{BasisIndex, DenseOperator, Spin, TruncatedSpace};
use crate::generator::{
    build_adjoint_superoperator, build_hamiltonian, build_superoperator, generator_bandwidth,
    DensityMatrix, GeneratorApplier, ModelParams, SuperOperator,
};
use crate::linalg::{CMatrix, C64};
use crate::poly_ops::{DissipatorSpec, PolyOperator};

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub params: ModelParams,
    pub pump: PolyOperator,
    pub dissipator: DissipatorSpec,
}

impl ModelSpec {
    pub fn bandwidth(&self) -> usize {
        generator_bandwidth(&self.pump, &self.dissipator)
    }

    pub fn assemble(&self, cutoff: usize) -> Result<Model> {
        let space = TruncatedSpace::new(cutoff);
        let hamiltonian = build_hamiltonian(&self.params, &self.pump, space)?;
        let superoperator =
            build_superoperator(&hamiltonian, &self.dissipator, &self.params, &self.pump)?;
        let applier = GeneratorApplier::new(&hamiltonian, &self.dissipator, self.params.gamma);
        Ok(Model {
            space,
            spec: self.clone(),
            hamiltonian,
            superoperator,
            applier,
        })
    }
}

/// A model assembled on a truncated space.
#[derive(Clone, Debug)]
pub struct Model {
    pub space: TruncatedSpace,
    pub spec: ModelSpec,
    pub hamiltonian: DenseOperator,
    pub superoperator: SuperOperator,
    pub applier: GeneratorApplier,
}

impl Model {
    pub fn adjoint_dissipator(&self) -> DissipatorSpec {
        self.spec.dissipator.adjoint()
    }

    pub fn adjoint_superoperator(&self) -> Result<SuperOperator> {
        build_adjoint_superoperator(
            &self.hamiltonian,
            &self.adjoint_dissipator(),
            &self.spec.params,
            &self.spec.pump,
        )
    }

    pub fn adjoint_applier(&self) -> GeneratorApplier {
        GeneratorApplier::adjoint(
            &self.hamiltonian,
            &self.adjoint_dissipator(),
            self.spec.params.gamma,
        )
    }
}

/// Initial conditions that can be rebuilt at any sufficiently large cutoff.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    Projector(BasisIndex),
    /// Diagonal mixture of basis projectors.
    Mixture(Vec<(BasisIndex, f64)>),
    /// Seeded finite-rank Hermitian sample (eigenvalues in `[-1, 1]`).
    Random {
        rank: usize,
        support_cap: usize,
        seed: u64,
    },
    /// Normalised pure state with amplitudes `αⁿ/√n!` for `n ≤ support_cap`.
    Coherent {
        alpha: C64,
        spin: Spin,
        support_cap: usize,
    },
}

impl InitialState {
    /// Largest photon number the state occupies.
    pub fn support_cap(&self) -> usize {
        match self {
            InitialState::Projector(idx) => idx.n,
            InitialState::Mixture(parts) => parts.iter().map(|(idx, _)| idx.n).max().unwrap_or(0),
            InitialState::Random { support_cap, .. }
            | InitialState::Coherent { support_cap, .. } => *support_cap,
        }
    }

    pub fn build(&self, space: TruncatedSpace) -> Result<DensityMatrix> {
        if self.support_cap() > space.cutoff() {
            return Err(Error::InitialState(format!(
                "support reaches n = {} beyond cutoff {}",
                self.support_cap(),
                space.cutoff()
            )));
        }
        match self {
            InitialState::Projector(idx) => DensityMatrix::projector(space, *idx),
            InitialState::Mixture(parts) => DensityMatrix::mixture(space, parts),
            InitialState::Random {
                rank,
                support_cap,
                seed,
            } => Ok(sample_finite_rank(space, *rank, *support_cap, *seed)?.assemble()),
            InitialState::Coherent {
                alpha,
                spin,
                support_cap,
            } => {
                let d = space.dim_total();
                let mut psi = vec![C64::new(0.0, 0.0); d];
                let mut amp = C64::new(1.0, 0.0);
                for n in 0..=*support_cap {
                    if n > 0 {
                        amp = amp * alpha / (n as f64).sqrt();
                    }
                    psi[space.flat_index(BasisIndex::new(n, *spin))?] = amp;
                }
                let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                let m = CMatrix::from_fn(d, d, |i, j| psi[i] * psi[j].conj() / (norm * norm));
                DensityMatrix::symmetrized(space, m, 1e-14)
            }
        }
    }
}
