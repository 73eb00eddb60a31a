//! Numerical audits of the identities behind the contraction argument.
//!
//! Every check compares a claimed identity against plain matrix traces. The
//! brute-force value `tr(ρ·Dρ)` ([`quadratic_form_direct`]) is the arbiter for
//! every quadratic-form statement; spectral re-expansions are measured against
//! it. Nonpositivity of the dissipator is recorded as a measurement with sign
//! statistics, never assumed.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock_space::{
    build_annihilation, build_creation, BasisIndex, DenseOperator, Spin, TruncatedSpace,
};
use crate::generator::{commutator_part, d1_spec, DensityMatrix};
use crate::linalg::{hermitian_deviation, hs_pairing, trace_of_product, CMatrix, C64, ZERO};
use crate::poly_ops::{apply_pairs, DissipatorSpec};

/// Relative tolerance for identities that are exact matrix algebra.
pub const IDENTITY_TOLERANCE: f64 = 1e-11;
/// Absolute tolerance where a basis completion is involved.
pub const SPECTRAL_TOLERANCE: f64 = 1e-10;
/// Hermiticity tolerance accepted by [`hs_inner`].
pub const HS_INPUT_TOLERANCE: f64 = 1e-10;
/// Relative imaginary residual tolerated by [`hs_inner`].
pub const HS_IMAG_TOLERANCE: f64 = 1e-13;
/// Quadratic-form values with magnitude at or below this count as zero.
pub const SIGN_ZERO_THRESHOLD: f64 = 1e-12;
/// Orthonormality tolerance for sample frames.
pub const FRAME_TOLERANCE: f64 = 1e-12;
/// Photon levels kept free between a sample's support and the cutoff.
pub const INTERIOR_BUFFER: usize = 2;

/// `⟨ρ₁, ρ₂⟩_HS = tr(ρ₁ρ₂)` for Hermitian inputs.
pub fn hs_inner(rho1: &DenseOperator, rho2: &DenseOperator) -> Result<f64> {
    let (a, b) = (rho1.matrix(), rho2.matrix());
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            expected: a.nrows(),
            rows: b.nrows(),
            cols: b.ncols(),
        });
    }
    for m in [a, b] {
        let deviation = hermitian_deviation(m);
        if deviation > HS_INPUT_TOLERANCE {
            return Err(Error::NotHermitian {
                deviation,
                tolerance: HS_INPUT_TOLERANCE,
            });
        }
    }
    let value = trace_of_product(a, b);
    let scale = (a.norm() * b.norm()).max(1.0);
    if value.im.abs() > HS_IMAG_TOLERANCE * scale {
        return Err(Error::NotHermitian {
            deviation: value.im.abs(),
            tolerance: HS_IMAG_TOLERANCE * scale,
        });
    }
    Ok(value.re)
}

/// `ρ = Σᵢ ρᵢ eᵢ eᵢ†` with orthonormal `eᵢ` supported on `n ≤ support_cap`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteRankSample {
    pub space: TruncatedSpace,
    pub support_cap: usize,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<DVector<C64>>,
}

impl FiniteRankSample {
    /// Build from an explicit spectral resolution; the frame must be
    /// orthonormal and supported on `n ≤ support_cap`.
    pub fn from_spectrum(
        space: TruncatedSpace,
        support_cap: usize,
        eigenvalues: Vec<f64>,
        eigenvectors: Vec<DVector<C64>>,
    ) -> Result<Self> {
        if eigenvalues.len() != eigenvectors.len() || eigenvalues.is_empty() {
            return Err(Error::InvalidSample(
                "eigenvalue and eigenvector counts differ or are zero".into(),
            ));
        }
        if support_cap > space.cutoff() {
            return Err(Error::InvalidSample(format!(
                "support cap {support_cap} exceeds cutoff {}",
                space.cutoff()
            )));
        }
        let inside = space.dim_up_to(support_cap);
        for (i, v) in eigenvectors.iter().enumerate() {
            if v.len() != space.dim_total() {
                return Err(Error::InvalidSample(
                    "eigenvector has the wrong length".into(),
                ));
            }
            if v.iter().skip(inside).any(|z| *z != ZERO) {
                return Err(Error::InvalidSample(format!(
                    "eigenvector {i} leaves the support"
                )));
            }
            for (j, w) in eigenvectors.iter().enumerate().take(i + 1) {
                let g = v.dotc(w);
                let want = if i == j { 1.0 } else { 0.0 };
                if (g - C64::new(want, 0.0)).norm() > FRAME_TOLERANCE {
                    return Err(Error::InvalidSample(format!(
                        "frame not orthonormal at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self {
            space,
            support_cap,
            eigenvalues,
            eigenvectors,
        })
    }

    /// Diagonal sample `Σ wᵢ |idxᵢ⟩⟨idxᵢ|`.
    pub fn from_basis(space: TruncatedSpace, components: &[(BasisIndex, f64)]) -> Result<Self> {
        let mut cap = 0;
        let mut vecs = Vec::new();
        let mut vals = Vec::new();
        for &(idx, w) in components {
            let k = space.flat_index(idx)?;
            let mut v = DVector::zeros(space.dim_total());
            v[k] = C64::new(1.0, 0.0);
            vecs.push(v);
            vals.push(w);
            cap = cap.max(idx.n);
        }
        Self::from_spectrum(space, cap, vals, vecs)
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn assemble(&self) -> DensityMatrix {
        let d = self.space.dim_total();
        let mut m = CMatrix::zeros(d, d);
        for (lambda, v) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            m += (v * v.adjoint()).scale(*lambda);
        }
        // Rank-one outer products are Hermitian up to the conjugation rounding.
        DensityMatrix::symmetrized(self.space, m, FRAME_TOLERANCE)
            .expect("outer products are Hermitian")
    }

    /// Complete the eigenframe to an orthonormal basis of the whole space;
    /// returns the basis as columns and the matching (zero-padded) eigenvalues.
    pub fn completed_frame(&self) -> (CMatrix, Vec<f64>) {
        let d = self.space.dim_total();
        let mut basis: Vec<DVector<C64>> = self.eigenvectors.clone();
        let mut values = self.eigenvalues.clone();
        for k in 0..d {
            if basis.len() == d {
                break;
            }
            let mut v = DVector::<C64>::zeros(d);
            v[k] = C64::new(1.0, 0.0);
            for _ in 0..2 {
                for b in &basis {
                    let proj = b.dotc(&v);
                    v -= b * proj;
                }
            }
            let norm = v.norm();
            if norm > 1e-6 {
                basis.push(v / C64::new(norm, 0.0));
                values.push(0.0);
            }
        }
        debug_assert_eq!(basis.len(), d);
        (CMatrix::from_columns(&basis), values)
    }
}

/// Seeded finite-rank Hermitian sample: Gram–Schmidt on complex Gaussian
/// vectors supported on `n ≤ support_cap`, eigenvalues uniform in `[-1, 1]`.
pub fn sample_finite_rank(
    space: TruncatedSpace,
    rank: usize,
    support_cap: usize,
    seed: u64,
) -> Result<FiniteRankSample> {
    if space.cutoff() < INTERIOR_BUFFER || support_cap > space.cutoff() - INTERIOR_BUFFER {
        return Err(Error::InvalidSample(format!(
            "support cap {support_cap} must not exceed cutoff - {INTERIOR_BUFFER} (cutoff {})",
            space.cutoff()
        )));
    }
    let inside = space.dim_up_to(support_cap);
    if rank == 0 || rank > inside {
        return Err(Error::InvalidSample(format!(
            "rank {rank} not in 1..={inside} for support cap {support_cap}"
        )));
    }
    let d = space.dim_total();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut frame: Vec<DVector<C64>> = Vec::with_capacity(rank);
    while frame.len() < rank {
        let mut v = DVector::<C64>::zeros(d);
        for k in 0..inside {
            v[k] = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        }
        for _ in 0..2 {
            for b in &frame {
                let proj = b.dotc(&v);
                v -= b * proj;
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            frame.push(v / C64::new(norm, 0.0));
        }
    }
    let eigenvalues = (0..rank).map(|_| rng.random_range(-1.0..=1.0)).collect();
    Ok(FiniteRankSample {
        space,
        support_cap,
        eigenvalues,
        eigenvectors: frame,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckKind {
    /// Exact matrix algebra; a failure is a defect.
    Identity,
    /// A measured property (hypothesis or claim); reported, never fatal.
    Measurement,
}

/// One audit line. The serialised key set is fixed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditEntry {
    pub check: String,
    pub samples: usize,
    pub max_violation: f64,
    pub n_positive: usize,
    pub n_zero: usize,
    pub n_negative: usize,
    pub extremal_value: f64,
    pub pass: bool,
    #[serde(skip)]
    pub kind: CheckKind,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct AuditReport {
    pub entries: Vec<AuditEntry>,
}

impl AuditReport {
    pub fn extend(&mut self, entries: impl IntoIterator<Item = AuditEntry>) {
        self.entries.extend(entries);
    }

    pub fn get(&self, check: &str) -> Option<&AuditEntry> {
        self.entries.iter().find(|e| e.check == check)
    }

    /// True iff every exact-identity check passed.
    pub fn identities_pass(&self) -> bool {
        self.entries
            .iter()
            .filter(|e| e.kind == CheckKind::Identity)
            .all(|e| e.pass)
    }
}

/// Accumulates signed values into sign statistics.
#[derive(Clone, Debug, Default)]
struct Tally {
    samples: usize,
    n_positive: usize,
    n_zero: usize,
    n_negative: usize,
    max_violation: f64,
    max_value: Option<f64>,
    largest: f64,
}

impl Tally {
    fn add(&mut self, value: f64, violation: f64) {
        self.samples += 1;
        if value > SIGN_ZERO_THRESHOLD {
            self.n_positive += 1;
        } else if value < -SIGN_ZERO_THRESHOLD {
            self.n_negative += 1;
        } else {
            self.n_zero += 1;
        }
        self.max_violation = self.max_violation.max(violation);
        self.max_value = Some(self.max_value.map_or(value, |m: f64| m.max(value)));
        if value.abs() > self.largest.abs() {
            self.largest = value;
        }
    }

    /// Identity check: extremal value is the largest-magnitude sample.
    fn identity(self, check: &str, tolerance: f64) -> AuditEntry {
        AuditEntry {
            check: check.to_string(),
            samples: self.samples,
            max_violation: self.max_violation,
            n_positive: self.n_positive,
            n_zero: self.n_zero,
            n_negative: self.n_negative,
            extremal_value: self.largest,
            pass: self.max_violation <= tolerance,
            kind: CheckKind::Identity,
        }
    }

    /// Nonpositivity measurement: extremal value is the maximum.
    fn nonpositivity(self, check: &str) -> AuditEntry {
        let max_value = self.max_value.unwrap_or(0.0);
        AuditEntry {
            check: check.to_string(),
            samples: self.samples,
            max_violation: max_value.max(0.0),
            n_positive: self.n_positive,
            n_zero: self.n_zero,
            n_negative: self.n_negative,
            extremal_value: max_value,
            pass: self.n_positive == 0,
            kind: CheckKind::Measurement,
        }
    }

    /// Agreement measurement against a tolerance.
    fn agreement(self, check: &str, tolerance: f64) -> AuditEntry {
        AuditEntry {
            kind: CheckKind::Measurement,
            ..self.identity(check, tolerance)
        }
    }
}

/// Draw `count` interior samples with random rank from a master seed.
fn interior_samples(
    space: TruncatedSpace,
    buffer: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<FiniteRankSample>> {
    let cap = space
        .cutoff()
        .checked_sub(buffer.max(INTERIOR_BUFFER))
        .ok_or_else(|| {
            Error::InvalidSample(format!(
                "cutoff {} too small for buffer {buffer}",
                space.cutoff()
            ))
        })?;
    let max_rank = space.dim_up_to(cap).min(4);
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let rank = master.random_range(1..=max_rank);
            sample_finite_rank(space, rank, cap, master.random())
        })
        .collect()
}

/// Antisymmetry `⟨Kρ₁, ρ₂⟩ = -⟨ρ₁, Kρ₂⟩` and vanishing form `⟨ρ, Kρ⟩ = 0`,
/// relative to `‖ρ₁‖‖ρ₂‖‖H‖` (Frobenius norms).
pub fn audit_k(h: &DenseOperator, samples: usize, seed: u64) -> Result<Vec<AuditEntry>> {
    let space = h.space();
    let hm = h.matrix();
    let h_norm = hm.norm().max(f64::MIN_POSITIVE);
    let firsts = interior_samples(space, INTERIOR_BUFFER, samples, seed)?;
    let seconds = interior_samples(
        space,
        INTERIOR_BUFFER,
        samples,
        seed ^ 0x9e37_79b9_7f4a_7c15,
    )?;
    let mut anti = Tally::default();
    let mut quad = Tally::default();
    for (s1, s2) in firsts.iter().zip(&seconds) {
        let r1 = s1.assemble();
        let r2 = s2.assemble();
        let k1 = commutator_part(hm, r1.matrix());
        let k2 = commutator_part(hm, r2.matrix());
        let sum = hs_pairing(&k1, r2.matrix()) + hs_pairing(r1.matrix(), &k2);
        anti.add(sum.re, sum.norm() / (r1.hs_norm() * r2.hs_norm() * h_norm));
        let q = hs_pairing(r1.matrix(), &k1);
        quad.add(q.re, q.norm() / (r1.hs_norm() * r1.hs_norm() * h_norm));
    }
    Ok(vec![
        anti.identity("k_antisymmetry", IDENTITY_TOLERANCE),
        quad.identity("k_zero_quadratic_form", IDENTITY_TOLERANCE),
    ])
}

fn dissipator_scale(pairs: &[(CMatrix, CMatrix)]) -> f64 {
    pairs
        .iter()
        .map(|(q, r)| q.norm() * r.norm())
        .sum::<f64>()
        .max(1.0)
}

/// `tr(ρ₁·Dρ₂) = tr((D†ρ₁)·ρ₂)` over interior pairs, relative to
/// `‖ρ₁‖‖ρ₂‖ Σⱼ‖Qⱼ‖‖Rⱼ‖`. With `D† = (Q†, R†)` this holds when `D` preserves
/// Hermiticity.
pub fn audit_adjoint_pair(
    d: &DissipatorSpec,
    d_adj: &DissipatorSpec,
    space: TruncatedSpace,
    samples: usize,
    seed: u64,
) -> Result<AuditEntry> {
    let pairs = d.eval_pairs(space);
    let adj_pairs = d_adj.eval_pairs(space);
    let scale = dissipator_scale(&pairs);
    let buffer = d.bandwidth().max(d_adj.bandwidth());
    let firsts = interior_samples(space, buffer, samples, seed)?;
    let seconds = interior_samples(space, buffer, samples, seed ^ 0x5851_f42d_4c95_7f2d)?;
    let mut tally = Tally::default();
    for (s1, s2) in firsts.iter().zip(&seconds) {
        let r1 = s1.assemble();
        let r2 = s2.assemble();
        let lhs = trace_of_product(r1.matrix(), &apply_pairs(&pairs, r2.matrix()));
        let rhs = trace_of_product(&apply_pairs(&adj_pairs, r1.matrix()), r2.matrix());
        let diff = lhs - rhs;
        tally.add(diff.re, diff.norm() / (r1.hs_norm() * r2.hs_norm() * scale));
    }
    Ok(tally.identity("dissipator_adjoint_duality", IDENTITY_TOLERANCE))
}

/// Ground-truth oracle: assemble `ρ`, apply `D` by plain matrix products and
/// return `tr(ρ·Dρ)`.
pub fn quadratic_form_direct(d: &DissipatorSpec, sample: &FiniteRankSample) -> f64 {
    let rho = sample.assemble();
    let mut d_rho = CMatrix::zeros(rho.matrix().nrows(), rho.matrix().ncols());
    for (q, r) in d.eval_pairs(sample.space) {
        d_rho += &q * rho.matrix() * &r;
    }
    trace_of_product(rho.matrix(), &d_rho).re
}

/// The two spectral expansions of `⟨ρ, D₁ρ⟩` next to the direct value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralForms {
    pub direct: f64,
    /// `Σ a_ik a†_ki (ρᵢρ_k - ρ_k²)`.
    pub line2: f64,
    /// `-½ Σ |a_ik|² (ρᵢ - ρ_k)²`.
    pub final_line: f64,
}

/// Expand `⟨ρ, D₁ρ⟩` in the completed eigenframe of `sample`.
pub fn quadratic_form_spectral(sample: &FiniteRankSample) -> SpectralForms {
    let space = sample.space;
    let (frame, rho) = sample.completed_frame();
    let a = frame.adjoint() * build_annihilation(space).matrix() * &frame;
    let ad = frame.adjoint() * build_creation(space).matrix() * &frame;
    let d = rho.len();
    let mut line2 = ZERO;
    let mut final_line = 0.0;
    for i in 0..d {
        for k in 0..d {
            line2 += a[(i, k)] * ad[(k, i)] * (rho[i] * rho[k] - rho[k] * rho[k]);
            final_line += -0.5 * a[(i, k)].norm_sqr() * (rho[i] - rho[k]).powi(2);
        }
    }
    SpectralForms {
        direct: quadratic_form_direct(&d1_spec(), sample),
        line2: line2.re,
        final_line,
    }
}

/// The three fixed probes: vacuum, one-photon projector, and
/// `2|0,+⟩⟨0,+| + |1,+⟩⟨1,+|`.
pub fn fixed_probes(space: TruncatedSpace) -> Result<Vec<(&'static str, FiniteRankSample)>> {
    let up = |n| BasisIndex::new(n, Spin::Up);
    Ok(vec![
        (
            "vacuum",
            FiniteRankSample::from_basis(space, &[(up(0), 1.0)])?,
        ),
        (
            "one_photon",
            FiniteRankSample::from_basis(space, &[(up(1), 1.0)])?,
        ),
        (
            "mixture",
            FiniteRankSample::from_basis(space, &[(up(0), 2.0), (up(1), 1.0)])?,
        ),
    ])
}

/// Measure nonpositivity of `D` and `D†` on seeded samples plus the fixed
/// probes. For `D = D₁` also compare both spectral expansions with the direct
/// oracle, overall and per probe.
pub fn audit_h3(
    d: &DissipatorSpec,
    d_adj: &DissipatorSpec,
    space: TruncatedSpace,
    samples: usize,
    seed: u64,
) -> Result<Vec<AuditEntry>> {
    let buffer = d.bandwidth().max(d_adj.bandwidth());
    let mut pool = interior_samples(space, buffer, samples, seed)?;
    let probes = fixed_probes(space)?;
    pool.extend(probes.iter().map(|(_, s)| s.clone()));

    let mut forward = Tally::default();
    let mut backward = Tally::default();
    for s in &pool {
        forward.add(quadratic_form_direct(d, s), 0.0);
        backward.add(quadratic_form_direct(d_adj, s), 0.0);
    }
    let mut out = vec![
        forward.nonpositivity("h3_dissipator_nonpositive"),
        backward.nonpositivity("h3_adjoint_nonpositive"),
    ];

    if *d == d1_spec() {
        let mut line2 = Tally::default();
        let mut final_line = Tally::default();
        for s in &pool {
            let f = quadratic_form_spectral(s);
            line2.add(f.line2 - f.direct, (f.line2 - f.direct).abs());
            final_line.add(f.final_line - f.direct, (f.final_line - f.direct).abs());
        }
        out.push(line2.identity("spectral_line2_vs_direct", SPECTRAL_TOLERANCE));
        out.push(final_line.agreement("spectral_final_line_vs_direct", SPECTRAL_TOLERANCE));
        for (name, s) in &probes {
            let f = quadratic_form_spectral(s);
            let mut value = Tally::default();
            value.add(f.direct, 0.0);
            out.push(value.nonpositivity(&format!("direct_form_probe_{name}")));
            let mut gap = Tally::default();
            gap.add(f.final_line - f.direct, (f.final_line - f.direct).abs());
            out.push(gap.agreement(
                &format!("final_line_discrepancy_probe_{name}"),
                SPECTRAL_TOLERANCE,
            ));
        }
    }
    Ok(out)
}
