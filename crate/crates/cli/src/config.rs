//! Scenario files: TOML with strict keys, turned into validated core types.

use std::path::{Path, PathBuf};

use jcaudit_core::evolve::{MatrixEntry, Method, SolverConfig};
use jcaudit_core::expm::{ExpmStrategy, TaylorParams};
use jcaudit_core::generator::d1_spec;
use jcaudit_core::linalg::C64;
use jcaudit_core::poly_ops::{
    coeff_from_row_major, parse_complex, scalar, DissipatorSpec, PolyOperator, Word,
};
use jcaudit_core::{BasisIndex, InitialState, ModelParams, ModelSpec, Spin};
use serde::Deserialize;

use crate::presets;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Syntax(#[from] toml::de::Error),
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
    #[error("unknown preset {0:?} (available: {list})", list = presets::NAMES.join(", "))]
    UnknownPreset(String),
}

fn invalid(key: impl Into<String>, message: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        message: message.to_string(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: RawModel,
    initial_state: RawInitial,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    certify: CertifySettings,
    converge: Option<RawConverge>,
    #[serde(default)]
    bench: BenchSettings,
    #[serde(default)]
    outputs: OutputSettings,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    cutoff: usize,
    omega_c: f64,
    omega_a: f64,
    coupling: f64,
    gamma: f64,
    #[serde(default)]
    pump: Vec<RawTerm>,
    dissipator_preset: Option<String>,
    #[serde(default)]
    dissipator: Vec<RawPair>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerm {
    word: String,
    coeff: Option<RawCoeff>,
}

/// A scalar (number or `"re+im i"`) times `I₂`, or a row-major 2×2 block.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawCoeff {
    Real(f64),
    Scalar(String),
    Matrix([String; 4]),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPair {
    q: Vec<RawTerm>,
    r: Vec<RawTerm>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum RawInitial {
    Projector {
        n: usize,
        spin: String,
    },
    Mixture {
        components: Vec<RawComponent>,
    },
    Random {
        rank: usize,
        support_cap: usize,
        seed: Option<u64>,
    },
    Coherent {
        alpha: String,
        spin: String,
        support_cap: usize,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawComponent {
    n: usize,
    spin: String,
    weight: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    #[serde(default = "default_method")]
    method: Method,
    #[serde(default = "default_dt")]
    dt: f64,
    #[serde(default = "default_t_final")]
    t_final: f64,
    #[serde(default)]
    expm: ExpmStrategy,
}

fn default_method() -> Method {
    Method::Expm
}
fn default_dt() -> f64 {
    0.1
}
fn default_t_final() -> f64 {
    1.0
}

impl Default for RawSolver {
    fn default() -> Self {
        Self {
            method: default_method(),
            dt: default_dt(),
            t_final: default_t_final(),
            expm: ExpmStrategy::Auto,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySettings {
    /// Samples for the K and adjoint-pair identities.
    #[serde(default = "default_identity_samples")]
    pub samples: usize,
    /// Samples for the quadratic-form sign statistics.
    #[serde(default = "default_h3_samples")]
    pub h3_samples: usize,
    #[serde(default = "default_hermiticity_samples")]
    pub hermiticity_samples: usize,
}

fn default_identity_samples() -> usize {
    100
}
fn default_h3_samples() -> usize {
    1000
}
fn default_hermiticity_samples() -> usize {
    50
}

impl Default for CertifySettings {
    fn default() -> Self {
        Self {
            samples: default_identity_samples(),
            h3_samples: default_h3_samples(),
            hermiticity_samples: default_hermiticity_samples(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConverge {
    cutoffs: Vec<usize>,
    /// Entries written `"n,s,n',s'"`, e.g. `"1,+,0,-"`.
    probes: Vec<String>,
    t_final: f64,
    #[serde(default = "default_residual_dt")]
    residual_dt: f64,
    #[serde(default = "default_t_final")]
    residual_t_final: f64,
}

fn default_residual_dt() -> f64 {
    1e-3
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergeSettings {
    pub cutoffs: Vec<usize>,
    pub probes: Vec<MatrixEntry>,
    pub t_final: f64,
    /// Coarse rk4 step; the fine run uses half of it.
    pub residual_dt: f64,
    pub residual_t_final: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSettings {
    #[serde(default = "default_bench_cutoffs")]
    pub cutoffs: Vec<usize>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub force_dense: bool,
    #[serde(default = "default_dt_bench")]
    pub dt: f64,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
}

fn default_bench_cutoffs() -> Vec<usize> {
    vec![4, 8, 12, 16]
}
fn default_repeats() -> usize {
    5
}
fn default_dt_bench() -> f64 {
    1e-2
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self {
            cutoffs: default_bench_cutoffs(),
            repeats: default_repeats(),
            force_dense: false,
            dt: default_dt_bench(),
            t_final: default_t_final(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSettings {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_trajectory")]
    pub trajectory: String,
    #[serde(default = "default_summary")]
    pub summary: String,
    #[serde(default = "default_audit")]
    pub audit: String,
    #[serde(default = "default_convergence")]
    pub convergence: String,
    #[serde(default = "default_bench")]
    pub bench: String,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_trajectory() -> String {
    "trajectory.csv".into()
}
fn default_summary() -> String {
    "summary.json".into()
}
fn default_audit() -> String {
    "audit.json".into()
}
fn default_convergence() -> String {
    "convergence.json".into()
}
fn default_bench() -> String {
    "bench.json".into()
}

impl Default for OutputSettings {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
            trajectory: default_trajectory(),
            summary: default_summary(),
            audit: default_audit(),
            convergence: default_convergence(),
            bench: default_bench(),
        }
    }
}

/// A validated scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub cutoff: usize,
    pub spec: ModelSpec,
    pub initial: InitialState,
    pub solver: SolverConfig,
    pub certify: CertifySettings,
    pub converge: Option<ConvergeSettings>,
    pub bench: BenchSettings,
    pub outputs: OutputSettings,
    pub seed: u64,
}

impl Scenario {
    /// Parse scenario text. `seed` feeds every sampler the file does not
    /// seed itself.
    pub fn from_toml(text: &str, seed: u64) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text)?;
        raw.validate(seed)
    }

    /// Load a file, or an embedded preset when `path` reads `preset:NAME`.
    pub fn load(path: &Path, seed: u64) -> Result<Self, ConfigError> {
        let text = match path.to_str().and_then(|s| s.strip_prefix("preset:")) {
            Some(name) => presets::text(name)
                .ok_or_else(|| ConfigError::UnknownPreset(name.to_string()))?
                .to_string(),
            None => std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.to_path_buf(),
                source,
            })?,
        };
        Self::from_toml(&text, seed)
    }
}

pub fn parse_spin(s: &str) -> Option<Spin> {
    match s.trim() {
        "+" | "up" => Some(Spin::Up),
        "-" | "\u{2212}" | "down" => Some(Spin::Down),
        _ => None,
    }
}

fn spin_at(key: &str, s: &str) -> Result<Spin, ConfigError> {
    parse_spin(s).ok_or_else(|| {
        invalid(
            key,
            format!("unknown spin label {s:?} (use \"+\" or \"-\")"),
        )
    })
}

/// `"n,s,n',s'"` as a matrix entry.
pub fn parse_probe(s: &str) -> Option<MatrixEntry> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return None;
    }
    let n = parts[0].parse().ok()?;
    let n2 = parts[2].parse().ok()?;
    Some((
        BasisIndex::new(n, parse_spin(parts[1])?),
        BasisIndex::new(n2, parse_spin(parts[3])?),
    ))
}

fn complex_at(key: &str, s: &str) -> Result<C64, ConfigError> {
    parse_complex(s).map_err(|e| invalid(key, e))
}

fn poly_at(key: &str, terms: &[RawTerm]) -> Result<PolyOperator, ConfigError> {
    let mut p = PolyOperator::zero();
    for (i, t) in terms.iter().enumerate() {
        let k = format!("{key}[{i}]");
        let word: Word = t
            .word
            .parse()
            .map_err(|e| invalid(format!("{k}.word"), e))?;
        let coeff = match &t.coeff {
            None => scalar(C64::new(1.0, 0.0)),
            Some(RawCoeff::Real(x)) => scalar(C64::new(*x, 0.0)),
            Some(RawCoeff::Scalar(s)) => scalar(complex_at(&format!("{k}.coeff"), s)?),
            Some(RawCoeff::Matrix(m)) => {
                let mut entries = [C64::new(0.0, 0.0); 4];
                for (j, s) in m.iter().enumerate() {
                    entries[j] = complex_at(&format!("{k}.coeff[{j}]"), s)?;
                }
                coeff_from_row_major(entries)
            }
        };
        p.push(word, coeff);
    }
    Ok(p)
}

fn positive(key: &str, x: f64) -> Result<f64, ConfigError> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(invalid(key, format!("must be a positive number, got {x}")))
    }
}

impl RawConfig {
    fn validate(self, seed: u64) -> Result<Scenario, ConfigError> {
        let m = &self.model;
        if m.cutoff < 1 {
            return Err(invalid("model.cutoff", "must be at least 1"));
        }
        let params = ModelParams {
            omega_c: m.omega_c,
            omega_a: m.omega_a,
            coupling: m.coupling,
            gamma: m.gamma,
        };
        params.validate().map_err(|e| invalid("model", e))?;
        let pump = poly_at("model.pump", &m.pump)?;
        let dissipator = match (&m.dissipator_preset, m.dissipator.is_empty()) {
            (Some(_), false) => {
                return Err(invalid(
                    "model.dissipator",
                    "give either dissipator_preset or dissipator pairs, not both",
                ))
            }
            (Some(name), true) if name == "d1" => d1_spec(),
            (Some(name), true) => {
                return Err(invalid(
                    "model.dissipator_preset",
                    format!("unknown dissipator preset {name:?}"),
                ))
            }
            (None, true) => DissipatorSpec::empty(),
            (None, false) => {
                let mut pairs = Vec::new();
                for (i, pair) in m.dissipator.iter().enumerate() {
                    let q = poly_at(&format!("model.dissipator[{i}].q"), &pair.q)?;
                    let r = poly_at(&format!("model.dissipator[{i}].r"), &pair.r)?;
                    pairs.push((q, r));
                }
                DissipatorSpec::new(pairs)
            }
        };
        let spec = ModelSpec {
            params,
            pump,
            dissipator,
        };

        let initial = match self.initial_state {
            RawInitial::Projector { n, spin } => {
                InitialState::Projector(BasisIndex::new(n, spin_at("initial_state.spin", &spin)?))
            }
            RawInitial::Mixture { components } => {
                if components.is_empty() {
                    return Err(invalid(
                        "initial_state.components",
                        "mixture needs at least one component",
                    ));
                }
                let mut parts = Vec::new();
                for (i, c) in components.iter().enumerate() {
                    let spin = spin_at(&format!("initial_state.components[{i}].spin"), &c.spin)?;
                    parts.push((BasisIndex::new(c.n, spin), c.weight));
                }
                InitialState::Mixture(parts)
            }
            RawInitial::Random {
                rank,
                support_cap,
                seed: own,
            } => InitialState::Random {
                rank,
                support_cap,
                seed: own.unwrap_or(seed),
            },
            RawInitial::Coherent {
                alpha,
                spin,
                support_cap,
            } => InitialState::Coherent {
                alpha: complex_at("initial_state.alpha", &alpha)?,
                spin: spin_at("initial_state.spin", &spin)?,
                support_cap,
            },
        };
        if initial.support_cap() > m.cutoff {
            return Err(invalid(
                "initial_state",
                format!(
                    "support reaches n = {} beyond model.cutoff = {}",
                    initial.support_cap(),
                    m.cutoff
                ),
            ));
        }

        if !(self.solver.t_final.is_finite() && self.solver.t_final >= 0.0) {
            return Err(invalid("solver.t_final", "must be finite and nonnegative"));
        }
        let solver = SolverConfig {
            method: self.solver.method,
            dt: positive("solver.dt", self.solver.dt)?,
            t_final: self.solver.t_final,
            expm: self.solver.expm,
            taylor: TaylorParams::default(),
        };

        let converge = match self.converge {
            None => None,
            Some(c) => {
                let mut probes = Vec::new();
                for (i, s) in c.probes.iter().enumerate() {
                    probes.push(parse_probe(s).ok_or_else(|| {
                        invalid(
                            format!("converge.probes[{i}]"),
                            format!("expected \"n,s,n',s'\", got {s:?}"),
                        )
                    })?);
                }
                Some(ConvergeSettings {
                    cutoffs: c.cutoffs,
                    probes,
                    t_final: c.t_final,
                    residual_dt: positive("converge.residual_dt", c.residual_dt)?,
                    residual_t_final: positive("converge.residual_t_final", c.residual_t_final)?,
                })
            }
        };
        if self.bench.repeats == 0 {
            return Err(invalid("bench.repeats", "must be at least 1"));
        }

        Ok(Scenario {
            cutoff: m.cutoff,
            spec,
            initial,
            solver,
            certify: self.certify,
            converge,
            bench: self.bench,
            outputs: self.outputs,
            seed,
        })
    }
}
