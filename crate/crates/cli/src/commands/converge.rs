use std::path::Path;

use anyhow::Context;
use jcaudit_core::evolve::{
    check_generalized_solution, evolve_rk4, order4_scaling, truncation_convergence,
    ConvergenceTable, Method, ResidualReport, ScalingReport, SolverConfig,
};
use serde::Serialize;

use super::{verdict, Outcome};
use crate::config::Scenario;
use crate::output::write_json;

#[derive(Clone, Debug, Serialize)]
pub struct ResidualStudy {
    pub cutoff: usize,
    pub coarse: ResidualReport,
    pub fine: ResidualReport,
    pub scaling: ScalingReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergeReport {
    pub table: ConvergenceTable,
    pub residual: ResidualStudy,
}

/// Generalised-solution residuals of rk4 runs at `dt` and `dt/2`.
pub fn residual_study(scenario: &Scenario, dt: f64, t_final: f64) -> anyhow::Result<ResidualStudy> {
    let settings = scenario
        .converge
        .as_ref()
        .context("scenario has no [converge] section")?;
    let model = scenario.spec.assemble(scenario.cutoff)?;
    let rho0 = scenario.initial.build(model.space)?;
    let mut reports = Vec::new();
    for step in [dt, dt / 2.0] {
        let cfg = SolverConfig {
            method: Method::Rk4,
            dt: step,
            t_final,
            ..scenario.solver
        };
        let traj = evolve_rk4(&model.applier, &rho0, &cfg)?;
        reports.push(check_generalized_solution(
            &traj,
            &model.applier,
            &settings.probes,
        )?);
    }
    let fine = reports.pop().expect("two runs");
    let coarse = reports.pop().expect("two runs");
    let scaling = order4_scaling(coarse.max_residual, fine.max_residual, dt);
    Ok(ResidualStudy {
        cutoff: scenario.cutoff,
        coarse,
        fine,
        scaling,
    })
}

pub fn report(scenario: &Scenario) -> anyhow::Result<ConvergeReport> {
    let settings = scenario
        .converge
        .as_ref()
        .context("scenario has no [converge] section")?;
    let table = truncation_convergence(
        &scenario.spec,
        &scenario.initial,
        &settings.cutoffs,
        &settings.probes,
        settings.t_final,
        scenario.solver.expm,
    )?;
    let residual = residual_study(scenario, settings.residual_dt, settings.residual_t_final)?;
    Ok(ConvergeReport { table, residual })
}

pub fn run(scenario: &Scenario, out: &Path) -> anyhow::Result<Outcome> {
    let report = report(scenario)?;
    let path = out.join(&scenario.outputs.convergence);
    write_json(&path, &report)?;

    let t = &report.table;
    let mut lines: Vec<String> = t
        .cutoffs
        .windows(2)
        .zip(&t.max_increments)
        .map(|(w, inc)| format!("cutoff {} -> {}: max increment {:.3e}", w[0], w[1], inc))
        .collect();
    lines.push(format!(
        "{} last increment within tolerance; monotone decrease: {}",
        verdict(t.pass),
        t.monotone
    ));
    let r = &report.residual;
    lines.push(format!(
        "generalised-solution residual at cutoff {}: dt={} {:.3e}, dt={} {:.3e}, ratio {:.3}",
        r.cutoff,
        r.coarse.dt,
        r.coarse.max_residual,
        r.fine.dt,
        r.fine.max_residual,
        r.scaling.ratio
    ));
    lines.push(format!(
        "{} order-4 residual scaling",
        verdict(r.scaling.pass)
    ));
    Ok(Outcome {
        lines,
        files: vec![path],
        success: true,
    })
}
