use std::process::Command as Process;

use clap::Parser;
use mlz_cli::*;
use mlz_core::Error;
use tempfile::tempdir;

fn run(args: &[&str]) -> anyhow::Result<RunReport> {
    let argv: Vec<String> = std::iter::once("mlz").chain(args.iter().copied()).map(String::from).collect();
    let cli = Cli::try_parse_from(&argv).expect("arguments parse");
    dispatch(&cli, argv)
}

fn bin() -> Process {
    Process::new(env!("CARGO_BIN_EXE_mlz"))
}

#[test]
fn exported_bosonic6_round_trips() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("b6");
    let status = bin().args(["catalog", "build", "bosonic6", "--out"]).arg(&out).output().unwrap().status;
    assert!(status.success());
    let built: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let model = parse_model_file(&out.join("model.json")).unwrap();
    assert_eq!(built["model_fingerprint"].as_str().unwrap(), fingerprint(&model));
    assert!(out.join("analytic.csv").exists());

    let path = out.join("model.json");
    let again = run(&["check", "--ic1", "-m", path.to_str().unwrap()]).unwrap();
    assert_eq!(again.model_fingerprint.as_deref(), Some(fingerprint(&model).as_str()));
}

#[test]
fn degenerate_file_names_the_coupling() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"levels": [{"slope": 1, "offset": 0}, {"slope": 1, "offset": 2}, {"slope": -1, "offset": 0}],
            "couplings": [{"i": 1, "j": 3, "g": 0.2}, {"i": 1, "j": 2, "g": 0.1}]}"#,
    )
    .unwrap();
    let err = parse_model_file(&path).unwrap_err();
    assert!(matches!(err.downcast_ref::<Error>(), Some(Error::DegenerateSlopeCoupling { .. })));
    assert!(format!("{err:#}").contains("$.couplings[1]"), "{err:#}");

    let out = bin().args(["simulate", "-m"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("$.couplings[1]"));
}

#[test]
fn do3_is_a_tree_with_vacuous_crossing_check() {
    let r = run(&["check", "--name", "do3"]).unwrap();
    assert!(r.all_pass());
    assert_eq!(r.outputs["ic1"]["cycles"].as_array().unwrap().len(), 0);
    assert_eq!(r.outputs["ic2"]["vacuous"], true);
    assert!(bin().args(["check", "--name", "do3"]).output().unwrap().status.success());
}

#[test]
fn detuned_model_fails_the_comparison() {
    let out = bin()
        .args(["compare", "--name", "four-state-ic1-broken", "--T", "500", "--dt", "2e-3", "--against", "ansatz"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["outputs"]["max_deviation"].as_f64().unwrap() > 5e-3);

    let check = bin().args(["check", "--ic1", "--name", "four-state-ic1-broken"]).output().unwrap();
    assert_eq!(check.status.code(), Some(1));
}

#[test]
fn distorted_sweep_is_flat_and_matches() {
    let r = run(&[
        "sweep",
        "--name",
        "distorted-bosonic6",
        "--params",
        "e1=-1,g=0.38,gamma=0.779",
        "--sweep",
        "e2:0.8:2.4:3",
        "--mode",
        "compare",
    ])
    .unwrap();
    assert!(r.all_pass(), "{:?}", r.verdicts);
    let csv = &r.tables["sweep"];
    let rows: Vec<Vec<f64>> = csv.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][0], 0.8);
    assert_eq!(rows[2][0], 2.4);
    for r in &rows[1..] {
        let spread = r[1..37].iter().zip(&rows[0][1..37]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(spread < 2e-3, "{spread}");
    }
}

#[test]
fn csv_is_stable_across_runs() {
    let args = ["simulate", "--name", "do3", "--T", "300", "--dt", "2e-3", "--format", "csv"];
    let a = bin().args(args).output().unwrap();
    let b = bin().args(args).output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "final\\initial,1,2,3");
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn four_state_sweep_resolves_constraints_in_order() {
    let out = bin()
        .env("MLZ_THREADS", "2")
        .args(["sweep", "--name", "four-state", "--sweep", "b:-1.2:1.2:5", "--mode", "ansatz", "--format", "csv"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let bs: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(bs, vec![-1.2, -0.6, 0.0, 0.6, 1.2]);
    let analytic = run(&["sweep", "--name", "four-state", "--sweep", "b:-1.2:1.2:5", "--mode", "analytic"]).unwrap();
    for (a, b) in text.lines().zip(analytic.tables["sweep"].lines()).skip(1) {
        let a: Vec<f64> = a.split(',').map(|v| v.parse().unwrap()).collect();
        let b: Vec<f64> = b.split(',').map(|v| v.parse().unwrap()).collect();
        let d = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(d < 1e-10, "{d}");
    }
}

#[test]
fn sector_matches_catalog_build() {
    let sector = run(&[
        "sector",
        "--statistics",
        "fermion",
        "--N",
        "4",
        "--NF",
        "2",
        "--x",
        "-0.5",
        "--energies",
        "-1,0,1.5",
        "--couplings",
        "0.55,0.4125,0.4675",
    ])
    .unwrap();
    let built = run(&["catalog", "build", "fermionic"]).unwrap();
    assert_eq!(sector.model_fingerprint, built.model_fingerprint);
    assert_eq!(sector.outputs["basis"].as_array().unwrap().len(), 6);
    assert!(run(&["sector", "--statistics", "fermion", "--N", "5", "--NF", "2", "--energies", "0,1", "--couplings", "1,1"]).is_err());
}

#[test]
fn spectrum_table_shape() {
    let r = run(&["spectrum", "--name", "do3", "--t-min", "-4", "--t-max", "4", "--points", "9"]).unwrap();
    let lines: Vec<&str> = r.tables["spectrum"].lines().collect();
    assert_eq!(lines[0], "t,E1,E2,E3");
    assert_eq!(lines.len(), 10);
}

#[test]
fn catalog_listing_and_errors() {
    let r = run(&["catalog", "list"]).unwrap();
    assert_eq!(r.outputs["entries"].as_array().unwrap().len(), 8);
    let err = run(&["catalog", "show", "nope"]).unwrap_err();
    assert!(matches!(err.downcast_ref::<Error>(), Some(Error::UnknownModel(_))));
    let err = run(&["simulate", "--name", "do3", "--params", "bogus=1"]).unwrap_err();
    assert!(matches!(err.downcast_ref::<Error>(), Some(Error::SchemaViolation(_))), "{err:#}");
}

#[test]
fn sweep_spec_parsing() {
    let s = SweepSpec::parse("b:-1:1:3").unwrap();
    assert_eq!(s.points(), vec![-1.0, 0.0, 1.0]);
    assert_eq!(SweepSpec::parse("x:2:5:1").unwrap().points(), vec![2.0]);
    assert!(SweepSpec::parse("b:-1:1").is_err());
    assert!(SweepSpec::parse("b:-1:1:0").is_err());
}
