use std::path::Path;

use jcaudit_core::evolve::{
    evolve, norm_growth_audit, NormGrowthReport, Trajectory, TrajectorySummary,
};
use jcaudit_core::generator::d1_spec;
use jcaudit_core::InitialState;
use serde::Serialize;

use super::Outcome;
use crate::config::Scenario;
use crate::output::{write_atomic, write_json};

#[derive(Clone, Debug, Serialize)]
pub struct PhotonFit {
    pub m: usize,
    pub gamma: f64,
    pub max_relative_deviation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EvolveSummary {
    pub trajectory: TrajectorySummary,
    pub norm_growth: NormGrowthReport,
    pub norm_growth_lines: Vec<String>,
    /// `⟨a†a⟩(t)` against `m·e^{-γt}`, for a damped free field started in a
    /// basis projector.
    pub photon_fit: Option<PhotonFit>,
}

fn photon_fit(scenario: &Scenario, traj: &Trajectory) -> Option<PhotonFit> {
    let spec = &scenario.spec;
    let InitialState::Projector(idx) = scenario.initial else {
        return None;
    };
    if spec.params.coupling != 0.0 || spec.params.gamma <= 0.0 || spec.dissipator != d1_spec() {
        return None;
    }
    let m = idx.n;
    let gamma = spec.params.gamma;
    let max_relative_deviation = traj
        .times
        .iter()
        .zip(&traj.observables)
        .map(|(t, o)| {
            let expected = m as f64 * (-gamma * t).exp();
            let dev = (o.photon_number - expected).abs();
            if m == 0 {
                dev
            } else {
                dev / expected
            }
        })
        .fold(0.0, f64::max);
    Some(PhotonFit {
        m,
        gamma,
        max_relative_deviation,
    })
}

pub fn trajectory(scenario: &Scenario) -> anyhow::Result<Trajectory> {
    let model = scenario.spec.assemble(scenario.cutoff)?;
    let rho0 = scenario.initial.build(model.space)?;
    Ok(evolve(&model, &rho0, &scenario.solver)?)
}

pub fn summarize(scenario: &Scenario, traj: &Trajectory) -> EvolveSummary {
    let norm_growth = norm_growth_audit(traj, &scenario.spec.params);
    EvolveSummary {
        trajectory: traj.summary(),
        norm_growth_lines: norm_growth.lines(),
        norm_growth,
        photon_fit: photon_fit(scenario, traj),
    }
}

pub fn run(scenario: &Scenario, out: &Path) -> anyhow::Result<Outcome> {
    let traj = trajectory(scenario)?;
    let summary = summarize(scenario, &traj);
    let csv_path = out.join(&scenario.outputs.trajectory);
    let mut csv = Vec::new();
    traj.write_csv(&mut csv)?;
    write_atomic(&csv_path, &csv)?;
    let summary_path = out.join(&scenario.outputs.summary);
    write_json(&summary_path, &summary)?;

    let t = &summary.trajectory;
    let mut lines = vec![
        format!("{} grid points to t = {}", t.points, t.t_final),
        format!("trace drift {:.3e}", t.trace_drift),
        format!("hs_norm drift {:.3e}", t.hs_norm_drift),
        format!("min eigenvalue {:.6e}", t.min_eigenvalue),
    ];
    lines.extend(summary.norm_growth_lines.iter().cloned());
    if let Some(fit) = &summary.photon_fit {
        lines.push(format!(
            "photon number vs {}e^(-{}t): max relative deviation {:.3e}",
            fit.m, fit.gamma, fit.max_relative_deviation
        ));
    }
    Ok(Outcome {
        lines,
        files: vec![csv_path, summary_path],
        success: true,
    })
}
