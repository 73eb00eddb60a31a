//! Damped driven Jaynes–Cummings dynamics on a truncated Fock space.
//!
//! The master equation `dρ/dt = -i[H, ρ] + γ Dρ` is realised on the space
//! `F_cutoff ⊗ C²` spanned by `|n, s⟩` with `0 ≤ n ≤ cutoff`. The crate
//! builds the ladder and spin operators ([`fock_space`]), polynomial pumping
//! and dissipation specifications ([`poly_ops`]), the generator in matrix-free
//! and vectorised form ([`generator`]), numerical audits of the algebraic
//! identities behind the contraction-semigroup construction ([`certify`]), and
//! time evolution with observables ([`evolve`]).

pub mod certify;
pub mod error;
pub mod evolve;
pub mod expm;
pub mod fock_space;
pub mod generator;
pub mod linalg;
pub mod model;
pub mod poly_ops;

pub use error::{Error, Result};
pub use fock_space::{BasisIndex, DenseOperator, Spin, TruncatedSpace};
pub use generator::{DensityMatrix, GeneratorApplier, LinearGenerator, ModelParams, SuperOperator};
pub use model::{InitialState, Model, ModelSpec};
pub use poly_ops::{DissipatorSpec, PolyOperator};
