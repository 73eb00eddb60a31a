use std::path::Path;
use std::process::Command;

use jcaudit::commands::{bench, certify, converge, evolve};
use jcaudit::{presets, ConfigError, Scenario};
use jcaudit_core::Error as CoreError;

const SMALL: &str = r#"
[model]
cutoff = 8
omega_c = 1.0
omega_a = 1.5
coupling = 0.3
gamma = 0.4
dissipator_preset = "d1"
pump = [{ word = "a" }, { word = "ad" }]

[initial_state]
kind = "random"
rank = 2
support_cap = 3

[solver]
method = "expm"
dt = 0.1
t_final = 1.0

[certify]
samples = 20
h3_samples = 50
hermiticity_samples = 10
"#;

fn small(seed: u64) -> Scenario {
    Scenario::from_toml(SMALL, seed).unwrap()
}

fn exe() -> Command {
    Command::new(env!("CARGO_BIN_EXE_jcaudit"))
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

#[test]
fn unknown_key_is_rejected() {
    let text = SMALL.replace("gamma = 0.4", "gamma = 0.4\ngama = 0.4");
    let err = Scenario::from_toml(&text, 0).unwrap_err();
    assert!(matches!(err, ConfigError::Syntax(_)));
    assert!(err.to_string().contains("gama"), "{err}");
}

#[test]
fn malformed_token_is_named() {
    let text = SMALL.replace(r#"{ word = "ad" }"#, r#"{ word = "ad b" }"#);
    let err = Scenario::from_toml(&text, 0).unwrap_err().to_string();
    assert!(err.contains("model.pump[1].word"), "{err}");
    assert!(err.contains("`b`"), "{err}");
}

#[test]
fn bad_values_are_reported_with_keys() {
    let cases = [
        ("dt = 0.1", "dt = -0.1", "solver.dt"),
        ("support_cap = 3", "support_cap = 9", "initial_state"),
        (
            r#"dissipator_preset = "d1""#,
            r#"dissipator_preset = "d2""#,
            "model.dissipator_preset",
        ),
    ];
    for (from, to, key) in cases {
        let err = Scenario::from_toml(&SMALL.replace(from, to), 0)
            .unwrap_err()
            .to_string();
        assert!(err.starts_with(key), "{to}: {err}");
    }
}

#[test]
fn explicit_dissipator_pairs_match_preset() {
    let text = SMALL.replace(
        r#"dissipator_preset = "d1""#,
        r#"dissipator = [
    { q = [{ word = "a" }], r = [{ word = "ad" }] },
    { q = [{ word = "ad a", coeff = -0.5 }], r = [{ word = "" }] },
    { q = [{ word = "" }], r = [{ word = "ad a", coeff = "-0.5+0i" }] },
]"#,
    );
    let explicit = Scenario::from_toml(&text, 0).unwrap();
    let a = certify::audit(&explicit).unwrap();
    let b = certify::audit(&small(0)).unwrap();
    for (x, y) in a.entries.iter().zip(&b.entries) {
        assert_eq!(x.check, y.check);
        assert!(
            (x.max_violation - y.max_violation).abs() < 1e-14,
            "{}",
            x.check
        );
        assert_eq!(
            (x.n_positive, x.n_negative),
            (y.n_positive, y.n_negative),
            "{}",
            x.check
        );
    }
}

#[test]
fn matrix_coefficients_parse() {
    let text = SMALL.replace(
        r#"pump = [{ word = "a" }, { word = "ad" }]"#,
        r#"pump = [{ word = "ad a", coeff = ["1", "0", "0", "-1"] }]"#,
    );
    let s = Scenario::from_toml(&text, 0).unwrap();
    assert_eq!(s.spec.pump.terms.len(), 1);
    let bad = text.replace(r#""-1""#, r#""-1+x""#);
    let err = Scenario::from_toml(&bad, 0).unwrap_err().to_string();
    assert!(err.starts_with("model.pump[0].coeff[3]"), "{err}");
}

#[test]
fn certify_default_d1_config() {
    let report = certify::audit(&presets::load("jc-full", 0).unwrap()).unwrap();
    assert!(report.identities_pass());
    let h3 = report.get("h3_dissipator_nonpositive").unwrap();
    assert!(
        h3.n_positive > 0 && h3.n_negative > 0,
        "both signs present with the fixed probes"
    );
    assert!(!h3.pass);
    for probe in ["vacuum", "one_photon", "mixture"] {
        assert!(report
            .get(&format!("final_line_discrepancy_probe_{probe}"))
            .is_some());
    }
}

#[test]
fn certify_without_damping_audits_k_only() {
    let report = certify::audit(&presets::load("unitary", 0).unwrap()).unwrap();
    let checks: Vec<&str> = report.entries.iter().map(|e| e.check.as_str()).collect();
    assert_eq!(
        checks,
        ["k_antisymmetry", "k_zero_quadratic_form", "band_structure"]
    );
}

#[test]
fn audit_json_has_contract_keys() {
    let dir = tempfile::tempdir().unwrap();
    certify::run(&small(0), dir.path()).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&read(dir.path(), "audit.json")).unwrap();
    let first = v.as_array().unwrap()[0].as_object().unwrap();
    let mut keys: Vec<&str> = first.keys().map(String::as_str).collect();
    keys.sort_unstable();
    assert_eq!(
        keys,
        [
            "check",
            "extremal_value",
            "max_violation",
            "n_negative",
            "n_positive",
            "n_zero",
            "pass",
            "samples"
        ]
    );
}

#[test]
fn outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        certify::run(&small(5), dir.path()).unwrap();
        evolve::run(&small(5), dir.path()).unwrap();
    }
    for name in ["audit.json", "trajectory.csv", "summary.json"] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name}");
    }
    let c = tempfile::tempdir().unwrap();
    evolve::run(&small(6), c.path()).unwrap();
    assert_ne!(
        read(a.path(), "trajectory.csv"),
        read(c.path(), "trajectory.csv")
    );
}

#[test]
fn zero_duration_gives_one_row() {
    let text = SMALL.replace("t_final = 1.0", "t_final = 0.0");
    let s = Scenario::from_toml(&text, 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    evolve::run(&s, dir.path()).unwrap();
    let csv = String::from_utf8(read(dir.path(), "trajectory.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("0.0000000000000000e0,"));
}

#[test]
fn unitary_preset_is_isometric() {
    let s = presets::load("unitary", 0).unwrap();
    let summary = evolve::summarize(&s, &evolve::trajectory(&s).unwrap());
    assert!(summary.trajectory.hs_norm_drift <= 1e-9);
    assert!(summary.trajectory.trace_drift <= 1e-9);
    assert!(summary.norm_growth.max_step_ratio <= 1.0 + 1e-9);
}

#[test]
fn damped_preset_photon_column() {
    let s = presets::load("damped", 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    evolve::run(&s, dir.path()).unwrap();
    let csv = String::from_utf8(read(dir.path(), "trajectory.csv")).unwrap();
    let mut rows = csv.lines();
    let header: Vec<&str> = rows.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "n_photon").unwrap();
    let mut worst: f64 = 0.0;
    for row in rows {
        let fields: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
        let expected = 5.0 * (-0.5 * fields[0]).exp();
        worst = worst.max((fields[col] - expected).abs() / expected);
    }
    assert!(worst <= 1e-6, "{worst}");
}

#[test]
fn rk4_solver_runs_and_diverges_loudly() {
    let text = SMALL
        .replace(r#"method = "expm""#, r#"method = "rk4""#)
        .replace("dt = 0.1", "dt = 0.001");
    let s = Scenario::from_toml(&text, 0).unwrap();
    let rk4 = evolve::trajectory(&s).unwrap();
    let ex = evolve::trajectory(&small(0)).unwrap();
    let diff = rk4.last().matrix() - ex.last().matrix();
    assert!(diff.iter().all(|z| z.norm() < 1e-9));

    let unstable = text
        .replace("dt = 0.001", "dt = 1.0")
        .replace("t_final = 1.0", "t_final = 40.0");
    let unstable = unstable.replace("omega_c = 1.0", "omega_c = 6.0");
    let err = evolve::trajectory(&Scenario::from_toml(&unstable, 0).unwrap()).unwrap_err();
    assert!(
        matches!(
            err.downcast_ref::<CoreError>(),
            Some(CoreError::Divergence { .. })
        ),
        "{err}"
    );
}

#[test]
fn converge_validation() {
    let base = presets::text("jc-full").unwrap();
    let repeated = base.replace("cutoffs = [12, 16, 24]", "cutoffs = [16, 16]");
    assert!(converge::report(&Scenario::from_toml(&repeated, 0).unwrap()).is_err());
    let deep = base.replace(r#""3,+,3,-"]"#, r#""30,+,0,+"]"#);
    let err = converge::report(&Scenario::from_toml(&deep, 0).unwrap()).unwrap_err();
    assert!(
        matches!(
            err.downcast_ref::<CoreError>(),
            Some(CoreError::InvalidProbe(_))
        ),
        "{err}"
    );
    let bad = base.replace(r#""0,+,0,-""#, r#""0,x,0,-""#);
    assert!(Scenario::from_toml(&bad, 0)
        .unwrap_err()
        .to_string()
        .starts_with("converge.probes[0]"));
    assert!(converge::report(&small(0)).is_err());
}

#[test]
fn bench_reports_sparse_counts_and_refuses_large_dense() {
    let text = format!("{SMALL}\n[bench]\ncutoffs = [3, 50]\nrepeats = 2\nt_final = 0.1\n");
    let s = Scenario::from_toml(&text, 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    bench::run(&s, dir.path()).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&read(dir.path(), "bench.json")).unwrap();
    let rows = v["cutoffs"].as_array().unwrap();
    assert!(rows[0]["dense_assembly"].is_object());
    assert!(rows[1]["dense_assembly"].is_null());
    assert_eq!(rows[1]["superoperator_dim"], 102 * 102);
    let nnz = rows[1]["nnz"].as_u64().unwrap();
    assert!(nnz > 0 && nnz < 102 * 102 * 102 * 102 / 100);
    assert_eq!(rows[0]["sparse_assembly"]["repeats"], 2);
    assert!(v["environment"]["available_parallelism"].as_u64().unwrap() >= 1);
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let out = exe()
        .args(["certify", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("PASS k_antisymmetry"));
    assert!(stdout.contains("MEASURED h3_dissipator_nonpositive"));

    std::fs::write(
        &cfg,
        SMALL.replace(r#"{ word = "ad" }"#, r#"{ word = "b" }"#),
    )
    .unwrap();
    let out = exe()
        .args(["evolve", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`b`"));

    let out = exe()
        .args(["evolve", "--config", "preset:nope"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = exe()
        .args([
            "evolve",
            "--config",
            "preset:one-photon",
            "--seed",
            "3",
            "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("trajectory.csv").exists());
}
