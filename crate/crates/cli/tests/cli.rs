use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_carleman-lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL_STABILITY: [&str; 4] = ["--override", "run.samples=4", "--override", "run.grids=[41, 81]"];

#[test]
fn identical_config_and_seed_give_identical_directories() {
    let tmp = tempfile::tempdir().unwrap();
    for sub in ["a", "b"] {
        let out = tmp.path().join(sub);
        let mut args = vec!["stability", "--seed", "5", "--out", out.to_str().unwrap()];
        args.extend(SMALL_STABILITY);
        assert!(run(&args).status.success());
        let out = tmp.path().join(format!("ns-{sub}"));
        let ns = [
            "noise-study",
            "--grid",
            "31",
            "--override",
            "run.replicates=2",
            "--out",
            out.to_str().unwrap(),
        ];
        assert!(run(&ns).status.success());
    }
    assert_eq!(read_dir_sorted(&tmp.path().join("a")), read_dir_sorted(&tmp.path().join("b")));
    assert_eq!(read_dir_sorted(&tmp.path().join("ns-a")), read_dir_sorted(&tmp.path().join("ns-b")));
    let other = tmp.path().join("c");
    let mut args = vec!["stability", "--seed", "6", "--out", other.to_str().unwrap()];
    args.extend(SMALL_STABILITY);
    assert!(run(&args).status.success());
    assert_ne!(
        std::fs::read(tmp.path().join("a/stability.csv")).unwrap(),
        std::fs::read(other.join("stability.csv")).unwrap()
    );
}

#[test]
fn manifest_records_hash_seed_grid_and_versions() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("m");
    let mut args = vec!["stability", "--seed", "9", "--out", out.to_str().unwrap()];
    args.extend(SMALL_STABILITY);
    assert!(run(&args).status.success());
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["seed"], 9);
    assert_eq!(m["grid"], serde_json::json!([41, 81]));
    assert_eq!(m["subcommand"], "stability");
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    assert!(m["version"].is_string() && m["library_version"].is_string());
    let names: Vec<&str> = m["artifacts"].as_array().unwrap().iter().map(|a| a["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"stability.csv") && names.contains(&"stability.json"));
}

#[test]
fn below_critical_time_is_rejected_unless_exploratory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    let mut args = vec!["stability", "--T", "1.0", "--out", out.to_str().unwrap()];
    args.extend(SMALL_STABILITY);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&o.stderr);
    assert!(msg.contains("critical time") && msg.contains("Lipschitz stability"), "{msg}");
    assert!(!out.exists());

    args.push("--exploratory");
    assert!(run(&args).status.success());
    let rep = json(&out.join("stability.json"));
    assert_eq!(rep["exploratory"], true);
    assert!(rep["constants"]["c0"].is_null());
}

#[test]
fn config_violations_exit_with_two() {
    let cases: [&[&str]; 4] = [
        &["forward", "--override", "source.r=t"],
        &["forward", "--override", "run.dt=0.5"],
        &["forward", "--override", "nonsense.key=1"],
        &["forward", "--override", "geometry.x0=[0.5]"],
    ];
    for args in cases {
        let tmp = tempfile::tempdir().unwrap();
        let mut a = args.to_vec();
        let out = tmp.path().join("o");
        a.extend(["--out", out.to_str().unwrap()]);
        let o = run(&a);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = run(&["forward", "--override", "source.r=t", "--out", "/nonexistent/never"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("r0 > 0 fails"));
}

#[test]
fn numerical_failures_exit_with_three() {
    // A source vanishing on Omega0 leaves no point for the exponent fit.
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("h");
    let o = run(&[
        "stability",
        "--override",
        "scenario=parabolic",
        "--override",
        "source.family=profile",
        "--override",
        "source.f=\"abs(0.45 - x) + (0.45 - x)\"",
        "--override",
        "run.dt=0.01",
        "--grid",
        "41",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn carleman_writes_one_row_per_s() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("c");
    let cfg = configs_dir().join("lemma_suite.toml");
    let o = run(&[
        "carleman",
        "--config",
        cfg.to_str().unwrap(),
        "--grid",
        "40",
        "--override",
        "run.nt=40",
        "--override",
        "weight.lambdas=[1.0]",
        "--s-min",
        "1",
        "--s-max",
        "8",
        "--s-steps",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("carleman_H1_lambda1.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "s,ln_lhs,ln_rhs_source,ln_rhs_boundary,ln_rhs_timecap,ratio");
    assert_eq!(lines.len(), 5);
    assert_eq!(json(&out.join("carleman.json"))["entries"].as_array().unwrap().len(), 6);
}

#[test]
fn report_merges_summaries_with_constant_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("lip");
    let mut args = vec!["stability", "--out", a.to_str().unwrap()];
    args.extend(SMALL_STABILITY);
    assert!(run(&args).status.success());
    let b = tmp.path().join("obs");
    let obs = ["observe", "--grid", "41", "--override", "run.samples=2", "--out", b.to_str().unwrap()];
    assert!(run(&obs).status.success());
    let r = tmp.path().join("rep");
    let o = run(&[
        "report",
        a.join("stability.json").to_str().unwrap(),
        b.join("observability.json").to_str().unwrap(),
        "--out",
        r.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let table = std::fs::read_to_string(r.join("report.csv")).unwrap();
    let rows: Vec<Vec<&str>> = table.lines().map(|l| l.split(',').collect()).collect();
    let header = &rows[0];
    for name in ["c0", "kappa0", "kappa1", "kappa2", "sigma0", "sigma1", "mu"] {
        assert!(header.contains(&name), "{name}");
    }
    let col = |n: &str| header.iter().position(|h| *h == n).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[1][col("experiment")], "lipschitz");
    assert!(rows[1][col("c0")].parse::<f64>().unwrap() > 0.0);
    let (k1, k2) = (
        rows[2][col("kappa1")].parse::<f64>().unwrap(),
        rows[2][col("kappa2")].parse::<f64>().unwrap(),
    );
    assert!(k2 > k1);
    assert_eq!(String::from_utf8_lossy(&o.stdout), table);
}

#[test]
fn shipped_configs_load_and_run_a_forward_solve() {
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("f");
        let o = run(&[
            "forward",
            "--config",
            path.to_str().unwrap(),
            "--grid",
            "21",
            "--override",
            "run.dt=0.01",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&o.stderr));
        let header = std::fs::read(out.join("field.bin")).unwrap();
        assert!(header.len() > 64);
    }
}

#[test]
fn reconstruct_recovers_the_profile_without_noise() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r");
    let o = run(&["reconstruct", "--grid", "81", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = json(&out.join("reconstruction.json"));
    assert!(rep["error"]["global"].as_f64().unwrap() < 1e-2);
    assert_eq!(rep["converged"], true);
    let csv = std::fs::read_to_string(out.join("reconstruction.csv")).unwrap();
    assert_eq!(csv.lines().count(), 80);
}
