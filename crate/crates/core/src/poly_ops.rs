//! Polynomials in `a`, `a†` with 2×2 matrix coefficients.
//!
//! A [`PolyOperator`] is a list of terms `(word, coeff)` where a word is a
//! finite sequence of ladder letters. Words are kept exactly as written (no
//! normal ordering), so `"ad a"` and `"a ad"` are different terms. A word is
//! evaluated as the matrix product of its letters in written order and then
//! tensored with its coefficient on the spin factor.
//!
//! Text format: a word is a whitespace-separated list of the tokens `a` and
//! `ad`; the empty string is the identity. A complex number is written
//! `re+im i` (for example `-0.5+0i`, `1e-3-2i`).

use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::certify::sample_finite_rank;
use crate::error::{Error, Result};
use crate::fock_space::{field_annihilation, DenseOperator, TruncatedSpace};
use crate::linalg::{hermitian_deviation, kron, CMatrix, C64};

/// Maximum `‖Dρ - (Dρ)†‖` accepted by [`check_dissipator_hermiticity_preserving`].
pub const HERMITICITY_TOLERANCE: f64 = 1e-10;
/// Interior symmetry tolerance of [`check_symmetric`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Letter {
    A,
    Ad,
}

impl Letter {
    pub fn swapped(self) -> Self {
        match self {
            Letter::A => Letter::Ad,
            Letter::Ad => Letter::A,
        }
    }
}

impl FromStr for Letter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" => Ok(Letter::A),
            "ad" => Ok(Letter::Ad),
            other => Err(Error::UnknownToken(other.to_string())),
        }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Letter::A => "a",
            Letter::Ad => "ad",
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Word(pub Vec<Letter>);

impl Word {
    pub fn identity() -> Self {
        Word(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The word whose evaluation is the adjoint of this one's.
    pub fn adjoint(&self) -> Self {
        Word(self.0.iter().rev().map(|l| l.swapped()).collect())
    }

    /// Net photon-number shift (`#ad - #a`).
    pub fn shift(&self) -> isize {
        self.0
            .iter()
            .map(|l| if *l == Letter::Ad { 1 } else { -1 })
            .sum()
    }

    fn eval_field(&self, cutoff: usize) -> CMatrix {
        let d = cutoff + 1;
        let mut out = CMatrix::identity(d, d);
        if self.0.is_empty() {
            return out;
        }
        let a = field_annihilation(cutoff);
        let ad = a.adjoint();
        for letter in &self.0 {
            out = match letter {
                Letter::A => &out * &a,
                Letter::Ad => &out * &ad,
            };
        }
        out
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.split_whitespace()
            .map(str::parse)
            .collect::<Result<Vec<_>>>()
            .map(Word)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(" "))
    }
}

/// Parse `re+im i` (whitespace ignored). A bare real number is also accepted.
pub fn parse_complex(s: &str) -> Result<C64> {
    let err = || Error::MalformedComplex(s.to_string());
    let compact: String = s.chars().filter(|ch| !ch.is_whitespace()).collect();
    if compact.is_empty() {
        return Err(err());
    }
    let Some(body) = compact.strip_suffix('i') else {
        return compact
            .parse::<f64>()
            .map(|re| C64::new(re, 0.0))
            .map_err(|_| err());
    };
    // Split at the last sign that is not a leading sign or an exponent sign.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'))
        .ok_or_else(err)?;
    let re: f64 = body[..split].parse().map_err(|_| err())?;
    let im_str = &body[split..];
    let im: f64 = match im_str {
        "+" => 1.0,
        "-" => -1.0,
        _ => im_str.parse().map_err(|_| err())?,
    };
    Ok(C64::new(re, im))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub word: Word,
    pub coeff: Matrix2<C64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PolyOperator {
    pub terms: Vec<Term>,
}

impl PolyOperator {
    pub fn zero() -> Self {
        Self::default()
    }

    /// The identity operator (empty word, coefficient `I₂`).
    pub fn identity() -> Self {
        Self::from_word(Word::identity(), Matrix2::identity())
    }

    pub fn from_word(word: Word, coeff: Matrix2<C64>) -> Self {
        Self {
            terms: vec![Term { word, coeff }],
        }
    }

    /// A single term with scalar coefficient `scale · I₂`.
    pub fn scalar_word(word: &str, scale: C64) -> Result<Self> {
        Ok(Self::from_word(word.parse()?, Matrix2::identity() * scale))
    }

    pub fn push(&mut self, word: Word, coeff: Matrix2<C64>) {
        self.terms.push(Term { word, coeff });
    }

    pub fn plus(mut self, other: &PolyOperator) -> Self {
        self.terms.extend(other.terms.iter().cloned());
        self
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Maximum word length over the terms; `0` for the empty polynomial.
    pub fn degree(&self) -> usize {
        self.terms.iter().map(|t| t.word.len()).max().unwrap_or(0)
    }

    /// Largest `|photon shift|` of any term.
    pub fn max_shift(&self) -> usize {
        self.terms
            .iter()
            .map(|t| t.word.shift().unsigned_abs())
            .max()
            .unwrap_or(0)
    }

    /// Formal adjoint: reversed, letter-swapped words with `coeff†`.
    pub fn adjoint(&self) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    word: t.word.adjoint(),
                    coeff: t.coeff.adjoint(),
                })
                .collect(),
        }
    }

    pub fn eval(&self, space: TruncatedSpace) -> DenseOperator {
        let d = space.dim_total();
        let mut out = CMatrix::zeros(d, d);
        for term in &self.terms {
            let field = term.word.eval_field(space.cutoff());
            let spin = CMatrix::from_fn(2, 2, |i, j| term.coeff[(i, j)]);
            out += kron(&field, &spin);
        }
        DenseOperator::new(space, out).expect("polynomial evaluation has the space's shape")
    }
}

/// `eval_poly` in operation form.
pub fn eval_poly(p: &PolyOperator, space: TruncatedSpace) -> DenseOperator {
    p.eval(space)
}

pub fn degree(p: &PolyOperator) -> usize {
    p.degree()
}

/// `Dρ = Σⱼ Qⱼ ρ Rⱼ`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DissipatorSpec {
    pub pairs: Vec<(PolyOperator, PolyOperator)>,
}

impl DissipatorSpec {
    pub fn new(pairs: Vec<(PolyOperator, PolyOperator)>) -> Self {
        Self { pairs }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `maxⱼ (deg Qⱼ + deg Rⱼ)`, `0` for the empty spec.
    pub fn bandwidth(&self) -> usize {
        self.pairs
            .iter()
            .map(|(q, r)| q.degree() + r.degree())
            .max()
            .unwrap_or(0)
    }

    /// Adjoint with respect to the pairing `tr(x† y)`: `ρ ↦ Σⱼ Qⱼ† ρ Rⱼ†`.
    pub fn adjoint(&self) -> Self {
        Self {
            pairs: self
                .pairs
                .iter()
                .map(|(q, r)| (q.adjoint(), r.adjoint()))
                .collect(),
        }
    }

    /// Evaluate every `(Qⱼ, Rⱼ)` on `space`.
    pub fn eval_pairs(&self, space: TruncatedSpace) -> Vec<(CMatrix, CMatrix)> {
        self.pairs
            .iter()
            .map(|(q, r)| (q.eval(space).into_matrix(), r.eval(space).into_matrix()))
            .collect()
    }
}

/// Apply already-evaluated sandwich pairs to `rho`.
pub fn apply_pairs(pairs: &[(CMatrix, CMatrix)], rho: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(rho.nrows(), rho.ncols());
    for (q, r) in pairs {
        out += q * rho * r;
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymmetryCheck {
    pub symmetric: bool,
    pub max_deviation: f64,
    /// Largest photon number included in the comparison, `None` if the
    /// interior is empty.
    pub interior_cap: Option<usize>,
}

/// Compare `eval(p)` with its conjugate transpose on rows and columns with
/// `n ≤ cutoff - deg(p)`.
pub fn check_symmetric(p: &PolyOperator, space: TruncatedSpace) -> SymmetryCheck {
    let Some(cap) = space.cutoff().checked_sub(p.degree()) else {
        return SymmetryCheck {
            symmetric: true,
            max_deviation: 0.0,
            interior_cap: None,
        };
    };
    let m = p.eval(space).into_matrix();
    let k = space.dim_up_to(cap);
    let block = m.view((0, 0), (k, k)).into_owned();
    let dev = hermitian_deviation(&block);
    SymmetryCheck {
        symmetric: dev <= SYMMETRY_TOLERANCE,
        max_deviation: dev,
        interior_cap: Some(cap),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HermiticityReport {
    pub samples: usize,
    pub max_deviation: f64,
    pub pass: bool,
}

/// Sample interior-supported Hermitian finite-rank `ρ` and measure
/// `max ‖Dρ - (Dρ)†‖`.
pub fn check_dissipator_hermiticity_preserving(
    d: &DissipatorSpec,
    space: TruncatedSpace,
    samples: usize,
    seed: u64,
) -> Result<HermiticityReport> {
    if samples == 0 {
        return Err(Error::InvalidSample(
            "at least one sample is required".into(),
        ));
    }
    let buffer = d.bandwidth().max(2);
    let support_cap = space.cutoff().checked_sub(buffer).ok_or_else(|| {
        Error::InvalidSample(format!(
            "cutoff {} leaves no interior for buffer {buffer}",
            space.cutoff()
        ))
    })?;
    let pairs = d.eval_pairs(space);
    let max_rank = space.dim_up_to(support_cap).min(3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_deviation: f64 = 0.0;
    for _ in 0..samples {
        let rank = rng.random_range(1..=max_rank);
        let sample = sample_finite_rank(space, rank, support_cap, rng.random())?;
        let rho = sample.assemble();
        let out = apply_pairs(&pairs, rho.matrix());
        max_deviation = max_deviation.max(hermitian_deviation(&out));
    }
    Ok(HermiticityReport {
        samples,
        max_deviation,
        pass: max_deviation <= HERMITICITY_TOLERANCE,
    })
}

/// Coefficient `scale · I₂`.
pub fn scalar(scale: C64) -> Matrix2<C64> {
    Matrix2::identity() * scale
}

/// Coefficient from four entries in row-major order `[c₊₊, c₊₋, c₋₊, c₋₋]`.
pub fn coeff_from_row_major(entries: [C64; 4]) -> Matrix2<C64> {
    Matrix2::new(entries[0], entries[1], entries[2], entries[3])
}
