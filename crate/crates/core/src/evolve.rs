//! Time evolution under `U(t) = e^{𝔸t}` and the measurements taken along it.
//!
//! Two independent paths are provided: the exponential of the vectorised
//! generator ([`evolve_expm`]) and classical fourth-order Runge–Kutta on the
//! matrix-free applier ([`evolve_rk4`]). Each serves as the other's oracle.
//! After every step the state must be Hermitian to within
//! [`STEP_HERMITICITY_TOLERANCE`]; it is then replaced by its Hermitian part.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expm::{expm_action, expm_dense, ExpmStrategy, TaylorParams, AUTO_DENSE_LIMIT};
use crate::fock_space::{BasisIndex, Spin, TruncatedSpace};
use crate::generator::{DensityMatrix, LinearGenerator, ModelParams, SuperOperator};
use crate::linalg::{hermitian_eigenvalues, trace, CMatrix, C64};
use crate::model::{InitialState, ModelSpec};
use crate::poly_ops::PolyOperator;

pub const STEP_HERMITICITY_TOLERANCE: f64 = 1e-10;
/// RK4 halts once `‖ρ‖_HS` exceeds this multiple of its initial value.
pub const DIVERGENCE_FACTOR: f64 = 1e3;
/// Relative slack allowed when checking `‖ρ(t)‖ ≤ ‖ρ(0)‖`.
pub const CONTRACTION_SLACK: f64 = 1e-9;
/// Absolute slack of the `d/dt‖ρ‖² ≤ γ‖ρ‖²` envelope.
pub const ENVELOPE_SLACK: f64 = 1e-8;
/// Order-4 window for the ratio of errors under step halving.
pub const ORDER4_RATIO_WINDOW: (f64, f64) = (12.0, 20.0);
pub const PHOTON_DECAY_TOLERANCE: f64 = 1e-6;
pub const SIGMA3_DRIFT_TOLERANCE: f64 = 1e-9;
pub const CONVERGENCE_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Observables {
    pub trace: C64,
    pub hs_norm: f64,
    pub photon_number: f64,
    pub inversion: f64,
    pub min_eigenvalue: f64,
}

/// Trace, HS norm, `tr(a†a ρ)`, `tr(σ3 ρ)` and the smallest eigenvalue of
/// `(ρ + ρ†)/2`.
pub fn observables(rho: &DensityMatrix) -> Observables {
    let m = rho.matrix();
    let mut photon = C64::new(0.0, 0.0);
    let mut inversion = C64::new(0.0, 0.0);
    for k in 0..m.nrows() {
        photon += m[(k, k)] * TruncatedSpace::photon_number(k) as f64;
        let sign = if k.is_multiple_of(2) {
            Spin::Up
        } else {
            Spin::Down
        }
        .sign();
        inversion += m[(k, k)] * sign;
    }
    Observables {
        trace: trace(m),
        hs_norm: rho.hs_norm(),
        photon_number: photon.re,
        inversion: inversion.re,
        min_eigenvalue: hermitian_eigenvalues(m).first().copied().unwrap_or(0.0),
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub observables: Vec<Observables>,
}

impl Trajectory {
    fn new(times: Vec<f64>, states: Vec<DensityMatrix>) -> Self {
        let observables = states.iter().map(observables).collect();
        Self {
            times,
            states,
            observables,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &DensityMatrix {
        self.states.last().expect("trajectories are never empty")
    }

    /// CSV with header `t,trace_re,trace_im,hs_norm,n_photon,sigma3,min_eig`,
    /// 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,trace_re,trace_im,hs_norm,n_photon,sigma3,min_eig")?;
        for (t, o) in self.times.iter().zip(&self.observables) {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                t,
                o.trace.re,
                o.trace.im,
                o.hs_norm,
                o.photon_number,
                o.inversion,
                o.min_eigenvalue
            )?;
        }
        Ok(())
    }

    pub fn summary(&self) -> TrajectorySummary {
        let first = self.observables[0];
        TrajectorySummary {
            points: self.len(),
            t_final: *self.times.last().unwrap_or(&0.0),
            trace_drift: self
                .observables
                .iter()
                .map(|o| (o.trace - first.trace).norm())
                .fold(0.0, f64::max),
            min_eigenvalue: self
                .observables
                .iter()
                .map(|o| o.min_eigenvalue)
                .fold(f64::INFINITY, f64::min),
            hs_norm_drift: self
                .observables
                .iter()
                .map(|o| (o.hs_norm - first.hs_norm).abs())
                .fold(0.0, f64::max),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrajectorySummary {
    pub points: usize,
    pub t_final: f64,
    pub trace_drift: f64,
    pub min_eigenvalue: f64,
    pub hs_norm_drift: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Expm,
    Rk4,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    /// RK4 step, or output spacing for `expm`.
    pub dt: f64,
    pub t_final: f64,
    #[serde(default)]
    pub expm: ExpmStrategy,
    #[serde(default)]
    pub taylor: TaylorParams,
}

/// `k·dt` for `k = 0..=n` with `n·dt = t_final`.
pub fn uniform_grid(dt: f64, t_final: f64) -> Result<Vec<f64>> {
    if !(t_final.is_finite() && t_final >= 0.0) {
        return Err(Error::InvalidGrid(format!(
            "t_final must be finite and nonnegative, got {t_final}"
        )));
    }
    if t_final == 0.0 {
        return Ok(vec![0.0]);
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidGrid(format!("dt must be positive, got {dt}")));
    }
    let n = (t_final / dt).round();
    if n < 1.0 || (n * dt - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return Err(Error::InvalidGrid(format!(
            "t_final {t_final} is not a multiple of dt {dt}"
        )));
    }
    let n = n as usize;
    Ok((0..=n)
        .map(|k| if k == n { t_final } else { k as f64 * dt })
        .collect())
}

fn warn_if_not_interior(rho0: &DensityMatrix, bandwidth: usize) {
    let space = rho0.space();
    if rho0.support_cap() + bandwidth > space.cutoff() {
        log::warn!(
            "initial state reaches n = {} within bandwidth {} of cutoff {}",
            rho0.support_cap(),
            bandwidth,
            space.cutoff()
        );
    }
}

fn step_state(space: TruncatedSpace, m: CMatrix) -> Result<DensityMatrix> {
    DensityMatrix::symmetrized(space, m, STEP_HERMITICITY_TOLERANCE)
}

/// `ρ(t_k) = unvec(e^{𝔸t_k} vec ρ₀)` on `times`, which must start at 0 and
/// increase. Consecutive states are related by `e^{𝔸(t_{k+1} - t_k)}`.
pub fn evolve_expm(
    gen: &SuperOperator,
    rho0: &DensityMatrix,
    times: &[f64],
    strategy: ExpmStrategy,
    taylor: &TaylorParams,
) -> Result<Trajectory> {
    if times.first() != Some(&0.0) {
        return Err(Error::InvalidGrid("time grid must start at 0".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0] || !w[1].is_finite()) {
        return Err(Error::InvalidGrid(
            "time grid must be strictly increasing".into(),
        ));
    }
    warn_if_not_interior(rho0, gen.bandwidth());
    let space = rho0.space();
    let d = space.dim_total();
    let dense = match strategy {
        ExpmStrategy::Pade => true,
        ExpmStrategy::Taylor => false,
        ExpmStrategy::Auto => gen.dim() <= AUTO_DENSE_LIMIT,
    };
    let generator = if dense {
        Some(gen.to_dense(false)?)
    } else {
        None
    };
    let mut propagators: HashMap<u64, CMatrix> = HashMap::new();

    let mut states = Vec::with_capacity(times.len());
    states.push(rho0.clone());
    for w in times.windows(2) {
        let h = w[1] - w[0];
        let prev = states.last().expect("seeded with rho0").matrix();
        let next = match &generator {
            Some(a) => {
                let u = match propagators.get(&h.to_bits()) {
                    Some(u) => u,
                    None => {
                        let u = expm_dense(&(a * C64::new(h, 0.0)))?;
                        propagators.entry(h.to_bits()).or_insert(u)
                    }
                };
                let v = u * nalgebra::DVector::from_column_slice(prev.as_slice());
                CMatrix::from_column_slice(d, d, v.as_slice())
            }
            None => CMatrix::from_vec(d, d, expm_action(gen, prev.as_slice(), h, taylor)?),
        };
        states.push(step_state(space, next)?);
    }
    Ok(Trajectory::new(times.to_vec(), states))
}

/// Classical four-stage Runge–Kutta with fixed step `config.dt` to
/// `config.t_final`, storing every step.
pub fn evolve_rk4(
    gen: &dyn LinearGenerator,
    rho0: &DensityMatrix,
    config: &SolverConfig,
) -> Result<Trajectory> {
    let times = uniform_grid(config.dt, config.t_final)?;
    let dt = config.dt;
    let estimate = gen.norm_estimate();
    if dt * estimate > 1.0 {
        log::warn!("rk4 step dt = {dt} times generator norm estimate {estimate:.3e} exceeds 1");
    }
    let space = rho0.space();
    let limit = DIVERGENCE_FACTOR * rho0.hs_norm();
    let half = C64::new(0.5 * dt, 0.0);
    let full = C64::new(dt, 0.0);
    let sixth = C64::new(dt / 6.0, 0.0);

    let mut states = Vec::with_capacity(times.len());
    states.push(rho0.clone());
    for &t in &times[1..] {
        let rho = states.last().expect("seeded with rho0").matrix();
        let k1 = gen.apply(rho);
        let k2 = gen.apply(&(rho + &k1 * half));
        let k3 = gen.apply(&(rho + &k2 * half));
        let k4 = gen.apply(&(rho + &k3 * full));
        let next = rho + (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * sixth;
        let norm = next.norm();
        if limit > 0.0 && (norm.is_nan() || norm > limit) {
            return Err(Error::Divergence { t, norm, limit });
        }
        states.push(step_state(space, next)?);
    }
    Ok(Trajectory::new(times, states))
}

/// Dispatch on `config.method` over the grid `k·dt`.
pub fn evolve(
    model: &crate::model::Model,
    rho0: &DensityMatrix,
    config: &SolverConfig,
) -> Result<Trajectory> {
    match config.method {
        Method::Expm => {
            let times = uniform_grid(config.dt, config.t_final)?;
            evolve_expm(
                &model.superoperator,
                rho0,
                &times,
                config.expm,
                &config.taylor,
            )
        }
        Method::Rk4 => evolve_rk4(&model.applier, rho0, config),
    }
}

fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 3 {
        return Err(Error::InvalidGrid(
            "at least three grid points are required".into(),
        ));
    }
    let dt = times[1] - times[0];
    let span = times.last().copied().unwrap_or(0.0).abs().max(1.0);
    for (k, t) in times.iter().enumerate() {
        if (t - (times[0] + k as f64 * dt)).abs() > 1e-9 * span {
            return Err(Error::InvalidGrid(format!(
                "grid is not uniform at index {k}"
            )));
        }
    }
    Ok(dt)
}

/// An entry `⟨row|ρ|col⟩`.
pub type MatrixEntry = (BasisIndex, BasisIndex);

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualReport {
    pub dt: f64,
    pub max_residual: f64,
    pub per_entry: Vec<f64>,
}

/// Residual of `ρ_e(t) - ρ_e(0) - ∫₀ᵗ [𝔸ρ(τ)]_e dτ` with composite Simpson
/// quadrature over the stored states, evaluated at every even grid index.
pub fn check_generalized_solution(
    traj: &Trajectory,
    gen: &dyn LinearGenerator,
    entries: &[MatrixEntry],
) -> Result<ResidualReport> {
    let dt = uniform_step(&traj.times)?;
    let space = gen.space();
    let flat: Vec<(usize, usize)> = entries
        .iter()
        .map(|(r, c)| Ok((space.flat_index(*r)?, space.flat_index(*c)?)))
        .collect::<Result<_>>()?;
    let rates: Vec<Vec<C64>> = traj
        .states
        .iter()
        .map(|s| {
            let f = gen.apply(s.matrix());
            flat.iter().map(|&(i, j)| f[(i, j)]).collect()
        })
        .collect();
    let start: Vec<C64> = flat
        .iter()
        .map(|&(i, j)| traj.states[0].matrix()[(i, j)])
        .collect();
    let mut integral = vec![C64::new(0.0, 0.0); flat.len()];
    let mut per_entry = vec![0.0f64; flat.len()];
    let w = C64::new(dt / 3.0, 0.0);
    let mut k = 2;
    while k < traj.len() {
        for e in 0..flat.len() {
            integral[e] += (rates[k - 2][e] + rates[k - 1][e] * 4.0 + rates[k][e]) * w;
            let (i, j) = flat[e];
            let residual = traj.states[k].matrix()[(i, j)] - start[e] - integral[e];
            per_entry[e] = per_entry[e].max(residual.norm());
        }
        k += 2;
    }
    let max_residual = per_entry.iter().copied().fold(0.0, f64::max);
    Ok(ResidualReport {
        dt,
        max_residual,
        per_entry,
    })
}

/// Step-halving comparison of two error measurements.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScalingReport {
    pub coarse: f64,
    pub fine: f64,
    pub ratio: f64,
    /// `coarse / dt_coarse⁴`.
    pub constant: f64,
    pub pass: bool,
}

/// Pass iff halving the step reduces the error by a factor inside
/// [`ORDER4_RATIO_WINDOW`].
pub fn order4_scaling(coarse: f64, fine: f64, dt_coarse: f64) -> ScalingReport {
    let ratio = coarse / fine;
    let (lo, hi) = ORDER4_RATIO_WINDOW;
    ScalingReport {
        coarse,
        fine,
        ratio,
        constant: coarse / dt_coarse.powi(4),
        pass: (lo..=hi).contains(&ratio),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormGrowthReport {
    pub gamma: f64,
    pub initial_hs_norm: f64,
    pub max_hs_norm: f64,
    /// `max_k ‖ρ(t_{k+1})‖ / ‖ρ(t_k)‖`.
    pub max_step_ratio: f64,
    /// `max_k Δ log‖ρ‖² / Δt`.
    pub max_log_derivative: f64,
    /// One-sided second-order estimate of `d/dt ‖ρ‖²` at `t = 0`.
    pub initial_slope: Option<f64>,
    /// `‖ρ(t)‖ ≤ ‖ρ(0)‖` on every grid point.
    pub contraction_holds: bool,
    /// `d/dt‖ρ‖² ≤ γ‖ρ‖² + slack` on every grid interval.
    pub envelope_holds: bool,
}

impl NormGrowthReport {
    pub fn lines(&self) -> Vec<String> {
        let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
        vec![
            format!(
                "{} contraction ||rho(t)||_HS <= ||rho(0)||_HS for all grid t (max {:.12e} vs initial {:.12e})",
                verdict(self.contraction_holds),
                self.max_hs_norm,
                self.initial_hs_norm
            ),
            format!(
                "{} envelope d/dt ||rho||^2 <= gamma ||rho||^2 + {:e} (max log-derivative {:.6e})",
                verdict(self.envelope_holds),
                ENVELOPE_SLACK,
                self.max_log_derivative
            ),
            match self.initial_slope {
                Some(s) => format!("initial slope d/dt ||rho||^2 at t=0: {s:.9e}"),
                None => "initial slope unavailable (fewer than two grid points)".to_string(),
            },
        ]
    }
}

/// Measure growth of the HS norm along `traj`.
pub fn norm_growth_audit(traj: &Trajectory, params: &ModelParams) -> NormGrowthReport {
    let norms: Vec<f64> = traj.observables.iter().map(|o| o.hs_norm).collect();
    let sq: Vec<f64> = norms.iter().map(|n| n * n).collect();
    let t = &traj.times;
    let n0 = norms[0];
    let mut max_step_ratio: f64 = 1.0;
    let mut max_log_derivative = f64::NEG_INFINITY;
    let mut envelope_holds = true;
    for k in 0..norms.len().saturating_sub(1) {
        let h = t[k + 1] - t[k];
        if norms[k] > 0.0 {
            max_step_ratio = max_step_ratio.max(norms[k + 1] / norms[k]);
            max_log_derivative = max_log_derivative.max((sq[k + 1].ln() - sq[k].ln()) / h);
        }
        let slope = (sq[k + 1] - sq[k]) / h;
        if slope > params.gamma * 0.5 * (sq[k] + sq[k + 1]) + ENVELOPE_SLACK {
            envelope_holds = false;
        }
    }
    if norms.len() < 2 {
        max_log_derivative = 0.0;
    }
    let initial_slope = match norms.len() {
        0 | 1 => None,
        2 => Some((sq[1] - sq[0]) / (t[1] - t[0])),
        _ => {
            let h = t[1] - t[0];
            if ((t[2] - t[1]) - h).abs() <= 1e-12 * h.max(1.0) {
                Some((-3.0 * sq[0] + 4.0 * sq[1] - sq[2]) / (2.0 * h))
            } else {
                Some((sq[1] - sq[0]) / h)
            }
        }
    };
    let max_hs_norm = norms.iter().copied().fold(0.0, f64::max);
    NormGrowthReport {
        gamma: params.gamma,
        initial_hs_norm: n0,
        max_hs_norm,
        max_step_ratio,
        max_log_derivative,
        initial_slope,
        contraction_holds: norms.iter().all(|n| *n <= n0 * (1.0 + CONTRACTION_SLACK)),
        envelope_holds,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhotonDecayReport {
    pub m: usize,
    pub gamma: f64,
    pub max_relative_deviation: f64,
    pub sigma3_drift: f64,
    pub pass: bool,
}

/// Damped free field (`p = 0`, `γ > 0`) from `|m,+⟩⟨m,+|`: compare `⟨a†a⟩(t)`
/// with `m·e^{-γt}` on `t ∈ [0, 2/γ]`.
pub fn photon_decay_check(
    params: &ModelParams,
    cutoff: usize,
    m: usize,
    points: usize,
    strategy: ExpmStrategy,
) -> Result<PhotonDecayReport> {
    params.validate()?;
    if params.coupling != 0.0 || params.gamma <= 0.0 {
        return Err(Error::InvalidParameter(
            "photon decay check needs coupling = 0 and gamma > 0".into(),
        ));
    }
    if m + 4 > cutoff {
        return Err(Error::InitialState(format!(
            "m = {m} needs cutoff >= m + 4, got {cutoff}"
        )));
    }
    if points < 2 {
        return Err(Error::InvalidGrid(
            "at least two grid points are required".into(),
        ));
    }
    let spec = ModelSpec {
        params: *params,
        pump: PolyOperator::zero(),
        dissipator: crate::generator::d1_spec(),
    };
    let model = spec.assemble(cutoff)?;
    let rho0 = InitialState::Projector(BasisIndex::new(m, Spin::Up)).build(model.space)?;
    let t_end = 2.0 / params.gamma;
    let times: Vec<f64> = (0..points)
        .map(|k| t_end * k as f64 / (points - 1) as f64)
        .collect();
    let traj = evolve_expm(
        &model.superoperator,
        &rho0,
        &times,
        strategy,
        &TaylorParams::default(),
    )?;
    let s0 = traj.observables[0].inversion;
    let mut max_rel: f64 = 0.0;
    let mut drift: f64 = 0.0;
    for (t, o) in traj.times.iter().zip(&traj.observables) {
        let expected = m as f64 * (-params.gamma * t).exp();
        let dev = (o.photon_number - expected).abs();
        max_rel = max_rel.max(if m == 0 { dev } else { dev / expected });
        drift = drift.max((o.inversion - s0).abs());
    }
    Ok(PhotonDecayReport {
        m,
        gamma: params.gamma,
        max_relative_deviation: max_rel,
        sigma3_drift: drift,
        pass: max_rel <= PHOTON_DECAY_TOLERANCE && drift <= SIGMA3_DRIFT_TOLERANCE,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub cutoffs: Vec<usize>,
    pub t_final: f64,
    /// `values[i][p]` is probe `p` at `cutoffs[i]`, as `(re, im)`.
    pub values: Vec<Vec<(f64, f64)>>,
    /// `increments[i][p] = |values[i+1][p] - values[i][p]|`.
    pub increments: Vec<Vec<f64>>,
    /// Largest increment per cutoff step.
    pub max_increments: Vec<f64>,
    pub monotone: bool,
    pub pass: bool,
}

/// Evolve the same initial state at each cutoff to `t_final` and tabulate the
/// change of each probe entry between consecutive cutoffs.
pub fn truncation_convergence(
    spec: &ModelSpec,
    initial: &InitialState,
    cutoffs: &[usize],
    probes: &[MatrixEntry],
    t_final: f64,
    strategy: ExpmStrategy,
) -> Result<ConvergenceTable> {
    if cutoffs.len() < 2 {
        return Err(Error::InvalidProbe(
            "at least two cutoffs are required".into(),
        ));
    }
    if cutoffs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidProbe(
            "cutoffs must be strictly increasing".into(),
        ));
    }
    let smallest = cutoffs[0];
    if initial.support_cap() > smallest {
        return Err(Error::InitialState(format!(
            "initial state reaches n = {} beyond the smallest cutoff {smallest}",
            initial.support_cap()
        )));
    }
    let reach = smallest.checked_sub(spec.bandwidth()).ok_or_else(|| {
        Error::InvalidProbe(format!(
            "smallest cutoff {smallest} is below the bandwidth {}",
            spec.bandwidth()
        ))
    })?;
    for (r, c) in probes {
        if r.n > reach || c.n > reach {
            return Err(Error::InvalidProbe(format!(
                "probe ({r}, {c}) lies beyond smallest cutoff {smallest} minus bandwidth {}",
                spec.bandwidth()
            )));
        }
    }

    let runs: Vec<Result<Vec<C64>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = cutoffs
            .iter()
            .map(|&cutoff| {
                scope.spawn(move || -> Result<Vec<C64>> {
                    let model = spec.assemble(cutoff)?;
                    let rho0 = initial.build(model.space)?;
                    let traj = evolve_expm(
                        &model.superoperator,
                        &rho0,
                        &[0.0, t_final],
                        strategy,
                        &TaylorParams::default(),
                    )?;
                    let last = traj.last().matrix();
                    probes
                        .iter()
                        .map(|(r, c)| {
                            Ok(last[(model.space.flat_index(*r)?, model.space.flat_index(*c)?)])
                        })
                        .collect()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("convergence worker panicked"))
            .collect()
    });
    let values: Vec<Vec<C64>> = runs.into_iter().collect::<Result<_>>()?;
    let increments: Vec<Vec<f64>> = values
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .map(|(a, b)| (b - a).norm())
                .collect()
        })
        .collect();
    let max_increments: Vec<f64> = increments
        .iter()
        .map(|row| row.iter().copied().fold(0.0, f64::max))
        .collect();
    let monotone = max_increments.windows(2).all(|w| w[1] <= w[0]);
    let pass = *max_increments
        .last()
        .expect("two cutoffs give one increment")
        <= CONVERGENCE_TOLERANCE;
    Ok(ConvergenceTable {
        cutoffs: cutoffs.to_vec(),
        t_final,
        values: values
            .iter()
            .map(|row| row.iter().map(|z| (z.re, z.im)).collect())
            .collect(),
        increments,
        max_increments,
        monotone,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{d1_spec, GeneratorApplier};
    use crate::linalg::{c, max_abs};

    fn up(n: usize) -> BasisIndex {
        BasisIndex::new(n, Spin::Up)
    }

    fn damped(gamma: f64) -> ModelSpec {
        ModelSpec {
            params: ModelParams {
                omega_c: 1.0,
                omega_a: 1.0,
                coupling: 0.0,
                gamma,
            },
            pump: PolyOperator::zero(),
            dissipator: d1_spec(),
        }
    }

    #[test]
    fn observables_of_basis_states() {
        let space = TruncatedSpace::new(8);
        let o = observables(&DensityMatrix::projector(space, up(5)).unwrap());
        assert_eq!(
            (o.photon_number, o.inversion, o.trace, o.hs_norm),
            (5.0, 1.0, c(1.0, 0.0), 1.0)
        );
        let mix = DensityMatrix::mixture(
            space,
            &[(up(0), 0.5), (BasisIndex::new(0, Spin::Down), 0.5)],
        )
        .unwrap();
        let o = observables(&mix);
        assert_eq!(o.inversion, 0.0);
        assert!((o.hs_norm - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(o.min_eigenvalue >= 0.0);
    }

    #[test]
    fn expm_at_zero_is_identity() {
        let model = damped(0.5).assemble(6).unwrap();
        let rho0 = InitialState::Coherent {
            alpha: c(0.7, 0.2),
            spin: Spin::Up,
            support_cap: 3,
        }
        .build(model.space)
        .unwrap();
        let traj = evolve_expm(
            &model.superoperator,
            &rho0,
            &[0.0],
            ExpmStrategy::Auto,
            &TaylorParams::default(),
        )
        .unwrap();
        assert_eq!(traj.states[0], rho0);
        assert!(evolve_expm(
            &model.superoperator,
            &rho0,
            &[0.1, 0.2],
            ExpmStrategy::Auto,
            &TaylorParams::default()
        )
        .is_err());
    }

    #[test]
    fn pade_and_taylor_trajectories_agree() {
        let spec = ModelSpec {
            params: ModelParams {
                omega_c: 1.0,
                omega_a: 1.2,
                coupling: 0.4,
                gamma: 0.3,
            },
            pump: PolyOperator::scalar_word("ad a", c(1.0, 0.0)).unwrap(),
            dissipator: d1_spec(),
        };
        let model = spec.assemble(7).unwrap();
        let rho0 = InitialState::Coherent {
            alpha: c(0.6, 0.0),
            spin: Spin::Down,
            support_cap: 4,
        }
        .build(model.space)
        .unwrap();
        let times = uniform_grid(0.25, 2.0).unwrap();
        let p = evolve_expm(
            &model.superoperator,
            &rho0,
            &times,
            ExpmStrategy::Pade,
            &TaylorParams::default(),
        )
        .unwrap();
        let t = evolve_expm(
            &model.superoperator,
            &rho0,
            &times,
            ExpmStrategy::Taylor,
            &TaylorParams::default(),
        )
        .unwrap();
        for (a, b) in p.states.iter().zip(&t.states) {
            assert!(max_abs(&(a.matrix() - b.matrix())) < 1e-12);
        }
    }

    #[test]
    fn zero_generator_gives_constant_trajectory() {
        let space = TruncatedSpace::new(5);
        let rho0 = InitialState::Random {
            rank: 2,
            support_cap: 3,
            seed: 4,
        }
        .build(space)
        .unwrap();
        let cfg = SolverConfig {
            method: Method::Rk4,
            dt: 0.01,
            t_final: 0.2,
            expm: ExpmStrategy::Auto,
            taylor: TaylorParams::default(),
        };
        let zero = GeneratorApplier::zero(space);
        let traj = evolve_rk4(&zero, &rho0, &cfg).unwrap();
        assert_eq!(traj.len(), 21);
        assert!(traj.states.iter().all(|s| s == &rho0));
        let r =
            check_generalized_solution(&traj, &zero, &[(up(0), up(0)), (up(1), up(0))]).unwrap();
        assert_eq!(r.max_residual, 0.0);
    }

    #[test]
    fn grid_validation() {
        assert_eq!(uniform_grid(0.1, 0.0).unwrap(), vec![0.0]);
        assert_eq!(
            uniform_grid(0.25, 1.0).unwrap(),
            vec![0.0, 0.25, 0.5, 0.75, 1.0]
        );
        assert!(uniform_grid(0.3, 1.0).is_err());
        assert!(uniform_grid(-0.1, 1.0).is_err());
        let traj = Trajectory::new(
            vec![0.0, 0.1, 0.3],
            vec![DensityMatrix::zeros(TruncatedSpace::new(2)); 3],
        );
        let zero = GeneratorApplier::zero(TruncatedSpace::new(2));
        assert!(matches!(
            check_generalized_solution(&traj, &zero, &[]),
            Err(Error::InvalidGrid(_))
        ));
    }

    #[test]
    fn rk4_divergence_detected() {
        // An anti-damped "dissipator" ρ ↦ +10ρ grows like e^{10t}.
        let space = TruncatedSpace::new(2);
        let spec = crate::poly_ops::DissipatorSpec::new(vec![(
            PolyOperator::identity(),
            PolyOperator::identity(),
        )]);
        let h = crate::fock_space::DenseOperator::zeros(space);
        let gen = GeneratorApplier::new(&h, &spec, 10.0);
        let rho0 = DensityMatrix::projector(space, up(0)).unwrap();
        let cfg = SolverConfig {
            method: Method::Rk4,
            dt: 0.01,
            t_final: 2.0,
            expm: ExpmStrategy::Auto,
            taylor: TaylorParams::default(),
        };
        assert!(matches!(
            evolve_rk4(&gen, &rho0, &cfg),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn vacuum_decay_check_is_constant() {
        let params = ModelParams {
            omega_c: 1.0,
            omega_a: 1.0,
            coupling: 0.0,
            gamma: 0.5,
        };
        let r = photon_decay_check(&params, 6, 0, 11, ExpmStrategy::Auto).unwrap();
        assert_eq!(r.max_relative_deviation, 0.0);
        assert!(r.pass);
        assert!(photon_decay_check(&params, 6, 3, 11, ExpmStrategy::Auto).is_err());
        let coupled = ModelParams {
            coupling: 0.1,
            ..params
        };
        assert!(photon_decay_check(&coupled, 10, 2, 11, ExpmStrategy::Auto).is_err());
    }

    #[test]
    fn photon_decay_small_cutoff() {
        let params = ModelParams {
            omega_c: 1.0,
            omega_a: 1.0,
            coupling: 0.0,
            gamma: 0.5,
        };
        let r = photon_decay_check(&params, 7, 3, 21, ExpmStrategy::Auto).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn csv_has_contract_header() {
        let space = TruncatedSpace::new(3);
        let traj = Trajectory::new(
            vec![0.0],
            vec![DensityMatrix::projector(space, up(1)).unwrap()],
        );
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,trace_re,trace_im,hs_norm,n_photon,sigma3,min_eig"
        );
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 7);
        assert_eq!(row[4], "1.0000000000000000e0");
    }

    #[test]
    fn convergence_validation_and_fixed_point() {
        let spec = damped(0.4);
        let vac = InitialState::Projector(up(0));
        let probes = [(up(0), up(0)), (up(1), up(0))];
        let table =
            truncation_convergence(&spec, &vac, &[6, 8, 10], &probes, 1.0, ExpmStrategy::Auto)
                .unwrap();
        assert!(table.increments.iter().flatten().all(|x| *x == 0.0));
        assert!(table.pass && table.monotone);
        assert!(
            truncation_convergence(&spec, &vac, &[6, 6], &probes, 1.0, ExpmStrategy::Auto).is_err()
        );
        assert!(
            truncation_convergence(&spec, &vac, &[6], &probes, 1.0, ExpmStrategy::Auto).is_err()
        );
        let deep = [(up(5), up(0))];
        assert!(matches!(
            truncation_convergence(&spec, &vac, &[6, 8], &deep, 1.0, ExpmStrategy::Auto),
            Err(Error::InvalidProbe(_))
        ));
        let wide = InitialState::Projector(up(7));
        assert!(matches!(
            truncation_convergence(&spec, &wide, &[6, 8], &probes, 1.0, ExpmStrategy::Auto),
            Err(Error::InitialState(_))
        ));
    }

    #[test]
    fn unreached_entries_stay_zero() {
        // Damping only lowers photon number: entries above the support stay 0.
        let spec = damped(0.7);
        let init = InitialState::Coherent {
            alpha: c(0.5, 0.1),
            spin: Spin::Up,
            support_cap: 2,
        };
        let probes = [(up(4), up(4)), (up(4), up(0))];
        let table =
            truncation_convergence(&spec, &init, &[6, 8, 12], &probes, 2.0, ExpmStrategy::Auto)
                .unwrap();
        assert!(table
            .values
            .iter()
            .flatten()
            .all(|(re, im)| re.abs() <= 1e-12 && im.abs() <= 1e-12));
    }
}
