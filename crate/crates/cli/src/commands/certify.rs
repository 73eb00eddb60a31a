use std::path::Path;

use jcaudit_core::certify::{
    audit_adjoint_pair, audit_h3, audit_k, AuditEntry, AuditReport, CheckKind,
};
use jcaudit_core::poly_ops::check_dissipator_hermiticity_preserving;
use jcaudit_core::Model;

use super::{verdict, Outcome};
use crate::config::Scenario;
use crate::output::write_json;

/// Structural band check of the assembled generator.
pub fn band_entry(model: &Model) -> AuditEntry {
    let bandwidth = model.superoperator.bandwidth();
    let reach = model.superoperator.max_coupling_distance();
    AuditEntry {
        check: "band_structure".into(),
        samples: model.superoperator.nnz(),
        max_violation: reach.saturating_sub(bandwidth) as f64,
        n_positive: 0,
        n_zero: 0,
        n_negative: 0,
        extremal_value: reach as f64,
        pass: reach <= bandwidth,
        kind: CheckKind::Identity,
    }
}

/// Every audit the scenario admits. Dissipator checks are skipped when
/// `γ = 0` or no dissipator is configured.
pub fn audit(scenario: &Scenario) -> anyhow::Result<AuditReport> {
    let model = scenario.spec.assemble(scenario.cutoff)?;
    let space = model.space;
    let seed = scenario.seed;
    let settings = &scenario.certify;
    let mut report = AuditReport::default();
    report.extend(audit_k(&model.hamiltonian, settings.samples, seed)?);
    report.extend([band_entry(&model)]);

    let d = &scenario.spec.dissipator;
    if scenario.spec.params.gamma != 0.0 && !d.is_empty() {
        let d_adj = model.adjoint_dissipator();
        report.extend([audit_adjoint_pair(
            d,
            &d_adj,
            space,
            settings.samples,
            seed.wrapping_add(1),
        )?]);
        let herm = check_dissipator_hermiticity_preserving(
            d,
            space,
            settings.hermiticity_samples,
            seed.wrapping_add(2),
        )?;
        report.extend([AuditEntry {
            check: "dissipator_hermiticity_preserving".into(),
            samples: herm.samples,
            max_violation: herm.max_deviation,
            n_positive: 0,
            n_zero: 0,
            n_negative: 0,
            extremal_value: herm.max_deviation,
            pass: herm.pass,
            kind: CheckKind::Identity,
        }]);
        report.extend(audit_h3(
            d,
            &d_adj,
            space,
            settings.h3_samples,
            seed.wrapping_add(3),
        )?);
    }
    Ok(report)
}

pub fn describe(entry: &AuditEntry) -> String {
    match entry.kind {
        CheckKind::Identity => format!(
            "{} {} max_violation={:.3e} samples={}",
            verdict(entry.pass),
            entry.check,
            entry.max_violation,
            entry.samples
        ),
        CheckKind::Measurement => {
            let mut line = format!(
                "MEASURED {} (+{} 0:{} -{} of {}) extremal={:.6e}",
                entry.check,
                entry.n_positive,
                entry.n_zero,
                entry.n_negative,
                entry.samples,
                entry.extremal_value
            );
            if entry.check.starts_with("h3_") {
                line.push_str(if entry.pass {
                    " nonpositivity holds"
                } else {
                    " nonpositivity violated"
                });
            }
            line
        }
    }
}

pub fn run(scenario: &Scenario, out: &Path) -> anyhow::Result<Outcome> {
    let report = audit(scenario)?;
    let path = out.join(&scenario.outputs.audit);
    write_json(&path, &report)?;
    Ok(Outcome {
        lines: report.entries.iter().map(describe).collect(),
        files: vec![path],
        success: report.identities_pass(),
    })
}
