use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const HEADER: &str = "t,F,rho11,rho22,rho33,re_rho12,im_rho12,trace,herm_err";

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lambda-heom"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("LAMBDA_HEOM_OUT")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn csv_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    names
}

fn column(dir: &Path, file: &str, index: usize) -> Vec<f64> {
    fs::read_to_string(dir.join(file))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(index).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn uncoupled_simulation_keeps_unit_fidelity() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["simulate", "--set", "Gamma=0", "--set", "t_end=2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let files = csv_files(dir.path());
    assert_eq!(files.len(), 1);
    let text = fs::read_to_string(dir.path().join(&files[0])).unwrap();
    assert_eq!(text.lines().next().unwrap(), HEADER);
    let f = column(dir.path(), &files[0], 1);
    assert_eq!(f.len(), 41);
    assert!(f.iter().all(|x| (x - 1.0).abs() < 1e-12));
    let m = manifest(dir.path());
    assert_eq!(m["runs"][0]["csv"], files[0].as_str());
    assert_eq!(m["config"]["baths"]["a"]["Gamma"], 0.0);
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn floats_use_seventeen_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(dir.path(), &["simulate", "--set", "t_end=0.1", "--set", "N=2"]).status.success());
    let text = fs::read_to_string(dir.path().join(&csv_files(dir.path())[0])).unwrap();
    for field in text.lines().nth(1).unwrap().split(',') {
        let mantissa = field.split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.replace('.', "").len(), 17, "{field}");
    }
}

#[test]
fn sweep_is_independent_of_worker_count_and_replays_exactly() {
    let one = tempfile::tempdir().unwrap();
    let many = tempfile::tempdir().unwrap();
    let replay = tempfile::tempdir().unwrap();
    let args = ["sweep", "--axis", "Gamma", "--values", "1,0.5,0.1", "--set", "t_end=3", "--set", "N=4"];
    let o = run(one.path(), &[&args[..], &["--workers", "1"]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(run(many.path(), &[&args[..], &["--workers", "3"]].concat()).status.success());
    let manifest_path = one.path().join("manifest.json");
    let o = run(replay.path(), &["simulate", "--config", manifest_path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));

    let files = csv_files(one.path());
    assert_eq!(files.len(), 3);
    assert_eq!(files, csv_files(many.path()));
    assert_eq!(files, csv_files(replay.path()));
    for f in &files {
        let a = fs::read(one.path().join(f)).unwrap();
        assert_eq!(a, fs::read(many.path().join(f)).unwrap());
        assert_eq!(a, fs::read(replay.path().join(f)).unwrap());
    }

    let m = manifest(one.path());
    let referenced: Vec<&str> = m["runs"].as_array().unwrap().iter().map(|r| r["csv"].as_str().unwrap()).collect();
    let mut sorted = referenced.clone();
    sorted.sort_unstable();
    assert_eq!(sorted, files);
    assert_eq!(m["runs"][2]["config"]["baths"]["b"]["Gamma"], 0.1);

    let finals: Vec<f64> = files.iter().map(|f| *column(one.path(), f, 1).last().unwrap()).collect();
    assert!(finals[0] < finals[1] && finals[1] < finals[2], "{finals:?}");
}

#[test]
fn fixed_area_preset_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["sweep", "--preset", "fixed-area", "--axis", "tau", "--values", "0.4,0.2", "--set", "t_end=0.4", "--set", "N=2"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifest(dir.path());
    let pulse = &m["runs"][1]["config"]["pulse"];
    assert_eq!(pulse["enabled"], true);
    assert_eq!(pulse["tau"], 0.2);
    assert_eq!(pulse["delta"], 0.1);
    assert!((pulse["h"].as_f64().unwrap() - 6.0).abs() < 1e-12);
}

#[test]
fn convergence_reports_pairwise_deltas() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["convergence", "--orders", "0,0", "--threshold", "1e-12", "--set", "t_end=1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifest(dir.path());
    assert_eq!(m["verdict"], "PASS");
    assert_eq!(m["convergence"]["pairs"][0]["max_delta"], 0.0);
    assert_eq!(csv_files(dir.path()).len(), 2);

    let fail = tempfile::tempdir().unwrap();
    let o = run(
        fail.path(),
        &["convergence", "--orders", "1,4", "--threshold", "1e-8", "--set", "Gamma=1", "--set", "t_end=2"],
    );
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert_eq!(manifest(fail.path())["verdict"], "FAIL");
}

#[test]
fn config_errors_name_the_field_and_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["simulate", "--set", "baths.a.gamma=-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("baths.a"), "{}", stderr(&o));

    let cfg = dir.path().join("job.json");
    fs::write(&cfg, r#"{"params": {"omega1": -1, "omega_3": 0}}"#).unwrap();
    let o = run(dir.path(), &["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("params.omega_3"), "{}", stderr(&o));

    let o = run(dir.path(), &["simulate", "--set", "method=lindblad"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("hierarchy"));

    let o = run(dir.path(), &["sweep", "--axis", "dt", "--values", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(csv_files(dir.path()).is_empty());
}

#[test]
fn cutoff_leakage_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "simulate", "--set", "method=oracle", "--set", "Gamma=3", "--set", "t_end=1", "--set", "oracle.modes=21",
            "--set", "oracle.window=8", "--set", "oracle.n_max=1",
        ],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("cutoff"));
}

#[test]
fn unconverged_oracle_makes_validation_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "validate", "--set", "Gamma=3", "--set", "oracle.modes=21", "--set", "oracle.window=8", "--set",
            "oracle.n_max=1", "--set", "validation.oracle_t_end=1", "--set", "validation.markov_t_end=1",
        ],
    );
    assert_ne!(o.status.code(), Some(3), "{}", stderr(&o));
    let m = manifest(dir.path());
    let checks = m["validation"]["checks"].as_array().unwrap();
    let oracle = checks.iter().find(|c| c["name"] == "oracle").unwrap();
    assert_eq!(oracle["verdict"], "INCONCLUSIVE");
    assert!(oracle["deviation"].is_null());
}

#[test]
fn plots_are_deterministic_and_need_curves() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["sweep", "--axis", "Gamma", "--values", "1,0.5,0.1", "--set", "t_end=2", "--set", "N=3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest_path = dir.path().join("manifest.json");
    let first = dir.path().join("a.svg");
    let second = dir.path().join("b.svg");
    for target in [&first, &second] {
        let o = run(
            dir.path(),
            &["plot", "--manifest", manifest_path.to_str().unwrap(), "--output", target.to_str().unwrap()],
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let svg = fs::read_to_string(&first).unwrap();
    assert_eq!(svg, fs::read_to_string(&second).unwrap());
    assert_eq!(svg.matches("<polyline").count(), 3);
    assert!(svg.contains(">Gamma=0.5</text>"));

    let empty = tempfile::tempdir().unwrap();
    let target = empty.path().join("none.svg");
    let o = run(empty.path(), &["plot", "--output", target.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!target.exists());

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "time,F\n0,1\n").unwrap();
    let o = run(dir.path(), &["plot", bad.to_str().unwrap(), "--output", target.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("header"));
}

#[test]
fn output_directory_defaults_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_lambda-heom"))
        .args(["simulate", "--set", "t_end=0.1", "--set", "method=markov"])
        .env("LAMBDA_HEOM_OUT", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("manifest.json").exists());
    assert_eq!(csv_files(&out).len(), 1);
}
