use std::path::Path;
use std::time::Instant;

use jcaudit_core::evolve::{evolve_expm, evolve_rk4, uniform_grid, Method, SolverConfig};
use jcaudit_core::expm::TaylorParams;
use jcaudit_core::generator::{
    assemble_dense, build_hamiltonian, build_superoperator, generator_terms,
};
use jcaudit_core::{BasisIndex, Error as CoreError, InitialState, Spin};
use serde::Serialize;

use super::Outcome;
use crate::config::Scenario;
use crate::output::write_json;

#[derive(Clone, Debug, Serialize)]
pub struct Timing {
    pub repeats: usize,
    pub mean_s: f64,
    /// Unbiased sample variance; 0 for a single repeat.
    pub variance_s2: f64,
    pub min_s: f64,
}

impl Timing {
    fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let variance = if samples.len() > 1 {
            samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Timing {
            repeats: samples.len(),
            mean_s: mean,
            variance_s2: variance,
            min_s: samples.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

fn time<T>(
    repeats: usize,
    mut f: impl FnMut() -> anyhow::Result<T>,
) -> anyhow::Result<(Timing, T)> {
    let mut samples = Vec::with_capacity(repeats);
    let mut last = None;
    for _ in 0..repeats {
        let start = Instant::now();
        last = Some(f()?);
        samples.push(start.elapsed().as_secs_f64());
    }
    Ok((
        Timing::from_samples(&samples),
        last.expect("at least one repeat"),
    ))
}

#[derive(Clone, Debug, Serialize)]
pub struct CutoffBench {
    pub cutoff: usize,
    pub dim_total: usize,
    pub superoperator_dim: usize,
    pub bandwidth: usize,
    pub nnz: usize,
    pub dense_entries: usize,
    /// `nnz / dim_total²`: stored entries per row of the superoperator.
    pub nnz_per_row: f64,
    pub sparse_assembly: Timing,
    /// `None` when the dense route was refused.
    pub dense_assembly: Option<Timing>,
    pub expm_run: Timing,
    pub rk4_run: Timing,
}

#[derive(Clone, Debug, Serialize)]
pub struct Environment {
    pub crate_version: &'static str,
    pub os: &'static str,
    pub arch: &'static str,
    pub available_parallelism: usize,
    pub debug_assertions: bool,
    pub unix_time_s: u64,
}

impl Environment {
    pub fn capture() -> Self {
        Environment {
            crate_version: env!("CARGO_PKG_VERSION"),
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            available_parallelism: std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1),
            debug_assertions: cfg!(debug_assertions),
            unix_time_s: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub environment: Environment,
    pub t_final: f64,
    pub rk4_dt: f64,
    pub cutoffs: Vec<CutoffBench>,
}

pub fn bench_cutoff(scenario: &Scenario, cutoff: usize) -> anyhow::Result<CutoffBench> {
    let settings = &scenario.bench;
    let spec = &scenario.spec;
    let model = spec.assemble(cutoff)?;
    let space = model.space;
    let h = build_hamiltonian(&spec.params, &spec.pump, space)?;
    let (sparse_assembly, sup) = time(settings.repeats, || {
        Ok(build_superoperator(
            &h,
            &spec.dissipator,
            &spec.params,
            &spec.pump,
        )?)
    })?;
    let terms = generator_terms(&h, &spec.dissipator, spec.params.gamma, 1.0);
    let dense_assembly = match assemble_dense(space, &terms, settings.force_dense) {
        Err(CoreError::DenseRefused { .. }) => None,
        Err(e) => return Err(e.into()),
        Ok(_) => Some(
            time(settings.repeats, || {
                Ok(assemble_dense(space, &terms, true)?)
            })?
            .0,
        ),
    };

    let initial = if scenario.initial.support_cap() + spec.bandwidth() <= cutoff {
        scenario.initial.clone()
    } else {
        InitialState::Projector(BasisIndex::new(0, Spin::Up))
    };
    let rho0 = initial.build(space)?;
    let grid = [0.0, settings.t_final];
    let (expm_run, _) = time(settings.repeats, || {
        Ok(evolve_expm(
            &sup,
            &rho0,
            &grid,
            scenario.solver.expm,
            &TaylorParams::default(),
        )?)
    })?;
    uniform_grid(settings.dt, settings.t_final)?;
    let cfg = SolverConfig {
        method: Method::Rk4,
        dt: settings.dt,
        t_final: settings.t_final,
        ..scenario.solver
    };
    let (rk4_run, _) = time(settings.repeats, || {
        Ok(evolve_rk4(&model.applier, &rho0, &cfg)?)
    })?;

    let d = space.dim_total();
    Ok(CutoffBench {
        cutoff,
        dim_total: d,
        superoperator_dim: d * d,
        bandwidth: sup.bandwidth(),
        nnz: sup.nnz(),
        dense_entries: d.pow(4),
        nnz_per_row: sup.nnz() as f64 / (d * d) as f64,
        sparse_assembly,
        dense_assembly,
        expm_run,
        rk4_run,
    })
}

pub fn run(scenario: &Scenario, out: &Path) -> anyhow::Result<Outcome> {
    let settings = &scenario.bench;
    let cutoffs = settings
        .cutoffs
        .iter()
        .map(|&c| bench_cutoff(scenario, c))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let report = BenchReport {
        environment: Environment::capture(),
        t_final: settings.t_final,
        rk4_dt: settings.dt,
        cutoffs,
    };
    let path = out.join(&scenario.outputs.bench);
    write_json(&path, &report)?;
    let lines = report
        .cutoffs
        .iter()
        .map(|c| {
            format!(
                "cutoff {:>3}: nnz {:>8} of {:>12} dense, sparse {:.3e}s, dense {}, expm {:.3e}s, rk4 {:.3e}s",
                c.cutoff,
                c.nnz,
                c.dense_entries,
                c.sparse_assembly.mean_s,
                c.dense_assembly.as_ref().map_or("refused".to_string(), |t| format!("{:.3e}s", t.mean_s)),
                c.expm_run.mean_s,
                c.rk4_run.mean_s
            )
        })
        .collect();
    Ok(Outcome {
        lines,
        files: vec![path],
        success: true,
    })
}
