use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_netgame"));
    c.env_remove("NETGAME_THREADS");
    c
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_spec(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|x| x.unwrap().iter().map(String::from).collect())
        .collect()
}

#[test]
fn validate_example_succeeds() {
    let tmp = TempDir::new().unwrap();
    let o = run(
        &["validate", "--config", example("example1.json").to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(tmp.path().join("validation.json").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "validate");
    assert_eq!(manifest["spec"]["lambda"][0][0], 25.0);
    assert!(manifest["timings_ms"]["total"].is_number());
}

#[test]
fn indefinite_r2_is_a_validation_failure() {
    let tmp = TempDir::new().unwrap();
    let body = std::fs::read_to_string(example("example1.json"))
        .unwrap()
        .replace("\"R2\": [[0.5]]", "\"R2\": [[-0.5]]");
    let spec = write_spec(tmp.path(), "bad.json", &body);
    let o = run(&["validate", "--config", spec.to_str().unwrap()], &tmp.path().join("o"));
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("R2"), "{}", stderr(&o));
    let o = run(&["solve", "--config", spec.to_str().unwrap()], &tmp.path().join("o"));
    assert_eq!(code(&o), 2);
}

#[test]
fn malformed_json_reports_location() {
    let tmp = TempDir::new().unwrap();
    let spec = write_spec(tmp.path(), "broken.json", "{\n  \"A\": [[1.5]],\n  \"B1\": [[1.0]\n}\n");
    let o = run(&["validate", "--config", spec.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_with_config_code() {
    let tmp = TempDir::new().unwrap();
    let ex1 = example("example1.json");
    let ex1 = ex1.to_str().unwrap();
    assert_eq!(code(&run(&["nash", "--config", ex1, "--bogus"], tmp.path())), 1);
    assert_eq!(
        code(&run(
            &["steady-state", "--config", ex1, "--p", "1.5", "--q", "0.5"],
            tmp.path()
        )),
        1
    );
    let o = run(
        &[
            "simulate",
            "--config",
            ex1,
            "--p",
            "0.4",
            "--q",
            "0.5",
            "--horizon",
            "0.015",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("multiple"));
    let o = bin()
        .args(["solve", "--config", ex1, "--out"])
        .arg(tmp.path())
        .env("NETGAME_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn solve_prints_riccati_solutions() {
    let tmp = TempDir::new().unwrap();
    let o = run(
        &["solve", "--config", example("example1.json").to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("7.1231"), "{}", stdout(&o));
    let o = run(
        &["solve", "--config", example("pursuit_evasion.json").to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).matches("0.7071").count(), 2);
    let rows = read_csv(&tmp.path().join("riccati.csv"));
    assert_eq!(rows[0][..3], ["P", "0", "0"]);
    let p: f64 = rows[0][3].parse().unwrap();
    assert!((p - 0.5f64.sqrt()).abs() < 1e-12);
}

#[test]
fn skew_drift_with_equal_input_gramians_is_a_solver_failure() {
    let tmp = TempDir::new().unwrap();
    let spec = write_spec(
        tmp.path(),
        "ill.json",
        r#"{"A": [[0, 1], [-1, 0]], "B1": [[1, 0], [0, 1]], "B2": [[1, 0], [0, 1]],
            "G": [[1, 0], [0, 1]], "Q": [[0, 0], [0, 0]], "R1": [[1, 0], [0, 1]],
            "R2": [[1, 0], [0, 1]], "lambda": [[1, 1], [1, 1]], "h": 0.01,
            "Sigma0": [[1, 0], [0, 1]]}"#,
    );
    let o = run(&["solve", "--config", spec.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("imaginary axis"), "{}", stderr(&o));
}

#[test]
fn capped_search_is_non_convergence() {
    let tmp = TempDir::new().unwrap();
    let ex1 = example("example1.json");
    let o = run(
        &[
            "nash",
            "--config",
            ex1.to_str().unwrap(),
            "--solver",
            "direct",
            "--max-outer",
            "1",
            "--starts",
            "2",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 4, "{}", stderr(&o));
}

#[test]
fn single_cell_sweep_is_the_nash_equilibrium() {
    let tmp = TempDir::new().unwrap();
    let ex1 = example("example1.json");
    let ex1 = ex1.to_str().unwrap();
    let o = run(
        &[
            "sweep", "--config", ex1, "--solver", "direct", "--l11", "25", "--l22", "15",
        ],
        &tmp.path().join("s"),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let sweep = read_csv(&tmp.path().join("s/sweep.csv"));
    assert_eq!(sweep.len(), 1);
    let o = run(&["nash", "--config", ex1, "--solver", "direct"], &tmp.path().join("n"));
    assert_eq!(code(&o), 0);
    let ne = read_csv(&tmp.path().join("n/nash_equilibria.csv"));
    assert_eq!(ne.len(), 1);
    for (a, b) in [(&sweep[0][2], &ne[0][0]), (&sweep[0][3], &ne[0][1])] {
        let (a, b): (f64, f64) = (a.parse().unwrap(), b.parse().unwrap());
        assert!((a - b).abs() < 1e-3, "{a} vs {b}");
    }
}

#[test]
fn exhaustive_nash_writes_both_curves() {
    let tmp = TempDir::new().unwrap();
    let pe = example("pursuit_evasion.json");
    let o = run(
        &[
            "nash",
            "--config",
            pe.to_str().unwrap(),
            "--method",
            "exhaustive",
            "--grid",
            "0.05",
            "--solver",
            "direct",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let curves = read_csv(&tmp.path().join("best_response.csv"));
    assert_eq!(curves.iter().filter(|r| r[0] == "1").count(), 21);
    assert_eq!(curves.iter().filter(|r| r[0] == "2").count(), 21);
    let ne = read_csv(&tmp.path().join("nash_equilibria.csv"));
    assert_eq!(ne.len(), 1);
    let p: f64 = ne[0][0].parse().unwrap();
    assert!((p - 0.831).abs() < 0.05, "{p}");
}

#[test]
fn simulate_writes_trajectory_and_summary() {
    let tmp = TempDir::new().unwrap();
    let pe = example("pursuit_evasion.json");
    let o = run(
        &[
            "simulate",
            "--config",
            pe.to_str().unwrap(),
            "--p",
            "0.8",
            "--q",
            "0.9",
            "--horizon",
            "2",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(tmp.path().join("trajectory.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "time,x1,x2,xhat1_1,xhat1_2,xhat2_1,xhat2_2,e1_1,e1_2,e2_1,e2_2,u1_1,u1_2,u2_1,u2_2,gamma1,gamma2"
    );
    assert_eq!(lines.count(), 200);
    assert!(!text.contains("-0,"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("simulation.json")).unwrap()).unwrap();
    assert_eq!(summary["ticks"], 200);
}

#[test]
fn ensemble_mode_reports_tolerance_verdict() {
    let tmp = TempDir::new().unwrap();
    let ex1 = example("example1.json");
    let o = run(
        &[
            "simulate",
            "--config",
            ex1.to_str().unwrap(),
            "--p",
            "0.4",
            "--q",
            "0.5",
            "--ensemble",
            "20",
            "--ticks",
            "20000",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(
        stdout(&o).contains("covariance within max(5%, 3 SE): PASS"),
        "{}",
        stdout(&o)
    );
    let rows = read_csv(&tmp.path().join("ensemble_sigma.csv"));
    assert_eq!(rows.len(), 4);
}

#[test]
fn seeded_outputs_repeat_byte_for_byte() {
    let tmp = TempDir::new().unwrap();
    let ex1 = example("example1.json");
    let args = [
        "simulate",
        "--config",
        ex1.to_str().unwrap(),
        "--seed",
        "42",
        "--horizon",
        "20",
        "--p",
        "0.4",
        "--q",
        "0.5",
    ];
    let a = run(&args, &tmp.path().join("a"));
    let b = run(&args, &tmp.path().join("b"));
    assert_eq!((code(&a), code(&b)), (0, 0));
    let read = |d: &str| std::fs::read(tmp.path().join(d).join("trajectory.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    let mut other = args.to_vec();
    other[4] = "43";
    run(&other, &tmp.path().join("c"));
    assert_ne!(read("a"), read("c"));
}
