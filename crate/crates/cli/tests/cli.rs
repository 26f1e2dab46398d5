use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_toric-spectra"));
    c.env_remove("TORIC_SPECTRA_THREADS");
    c
}

fn polytope(name: &str) -> String {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../polytopes");
    root.join(name).to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Data rows after the column line, skipping `#` lines.
fn table(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let columns = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (columns, rows)
}

fn body(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with("# stamp"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn validate_reports_delzant() {
    let o = run(&["validate", "--polytope", &polytope("simplex2.json")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("delzant: true, vertices: 3"), "{}", stdout(&o));
}

#[test]
fn density_is_constant_on_the_interval() {
    let o = run(&["density", "--polytope", &polytope("interval.json"), "--N", "10", "--grid", "101"]);
    assert_eq!(o.status.code(), Some(0));
    let (columns, rows) = table(&stdout(&o));
    assert_eq!(columns, ["y0", "density"]);
    assert_eq!(rows.len(), 101);
    for r in rows {
        let d: f64 = r[1].parse().unwrap();
        assert!((d - 11.0).abs() <= 1e-6, "{r:?}");
    }
}

#[test]
fn em_check_counts_square_lattice_points() {
    let o = run(&[
        "em-check",
        "--polytope",
        &polytope("square.json"),
        "--f",
        "poly:1",
        "--N",
        "4",
        "--order",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let (columns, rows) = table(&stdout(&o));
    let col = |name: &str| columns.iter().position(|c| c == name).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][col("riemann_sum_exact")], "25/16");
    let rs: f64 = rows[0][col("riemann_sum")].parse().unwrap();
    let em: f64 = rows[0][col("em_sum")].parse().unwrap();
    assert_eq!(rs, 25.0 / 16.0);
    assert!((em - rs).abs() <= 1e-9, "{em}");
}

#[test]
fn identical_runs_give_identical_bodies() {
    let dir = std::env::temp_dir().join(format!("toric-spectra-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut outputs = Vec::new();
    for (i, stamp) in [false, true, false].into_iter().enumerate() {
        let out = dir.join(format!("run{i}.csv"));
        let mut args = vec![
            "transform".to_string(),
            "--polytope".into(),
            polytope("square.json"),
            "--N-grid".into(),
            "5,17".into(),
            "--x".into(),
            "0.3,0.6".into(),
            "--f".into(),
            "poly:1@1,1;2@0,3".into(),
            "--out".into(),
            out.to_string_lossy().into_owned(),
        ];
        if stamp {
            args.push("--stamp".into());
        }
        let o = bin().args(&args).output().unwrap();
        assert_eq!(o.status.code(), Some(0));
        outputs.push(std::fs::read_to_string(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[2]);
    assert!(outputs[1].contains("# stamp: unix "));
    assert_eq!(body(&outputs[0]), body(&outputs[1]));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn header_records_version_hash_and_parameters() {
    let o = run(&["lattice", "--polytope", &polytope("interval.json"), "--N", "3"]);
    let text = stdout(&o);
    assert!(text.contains(&format!("# toric-spectra: {}", env!("CARGO_PKG_VERSION"))));
    let hash = text
        .lines()
        .find_map(|l| l.strip_prefix("# polytope-sha256: "))
        .unwrap();
    assert_eq!(hash.len(), 64);
    assert!(text.contains("# params: {\"N\":3"));
    // The hash is of the canonical document, not of the file bytes.
    let dir = std::env::temp_dir().join(format!("toric-spectra-hash-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let spaced = dir.join("interval.json");
    std::fs::write(
        &spaced,
        "{ \"dim\" : 1,\n  \"facets\": [ {\"normal\": [-1], \"offset\": 0},\n {\"normal\": [1], \"offset\": 1} ] }\n",
    )
    .unwrap();
    let o2 = run(&["lattice", "--polytope", spaced.to_str().unwrap(), "--N", "3"]);
    assert!(stdout(&o2).contains(hash));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn csv_floats_carry_seventeen_significant_digits() {
    let o = run(&["transform", "--polytope", &polytope("interval.json"), "--N", "7", "--x", "0.3", "--f", "poly:1@1"]);
    let (_, rows) = table(&stdout(&o));
    let v = &rows[0][1];
    let mantissa = v.split('e').next().unwrap().replace(['-', '.'], "");
    assert_eq!(mantissa.len(), 17, "{v}");
    let parsed: f64 = v.parse().unwrap();
    assert!((parsed - (7.0 * 0.3 + 1.0) / 9.0).abs() < 1e-9);
}

#[test]
fn json_output_parses() {
    let o = run(&[
        "moments",
        "--polytope",
        &polytope("interval.json"),
        "--N",
        "40",
        "--k",
        "20",
        "--m",
        "2",
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["header"]["command"], "moments");
    let ratio = v["rows"][0]["ratio"].as_f64().unwrap();
    assert!((ratio - 1.0).abs() < 0.05, "{ratio}");
}

#[test]
fn exit_codes() {
    let interval = polytope("interval.json");
    let unknown_flag = run(&["density", "--polytope", &interval, "--N", "3", "--frobnicate"]);
    assert_eq!(unknown_flag.status.code(), Some(64));
    assert!(!unknown_flag.stderr.is_empty());
    assert_eq!(run(&["bogus"]).status.code(), Some(64));
    assert_eq!(run(&["density", "--N", "3"]).status.code(), Some(64));

    let bad = run(&["validate", "--polytope", &polytope("nondelzant.json")]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("unimodularity"));

    let outside = run(&["transform", "--polytope", &interval, "--N", "3", "--x", "1.5", "--f", "poly:1"]);
    assert_eq!(outside.status.code(), Some(2));

    let degenerate_grid = run(&[
        "expand",
        "--polytope",
        &interval,
        "--x",
        "0.5",
        "--f",
        "poly:1@1",
        "--N-grid",
        "20,20,20,20,20,20,20",
    ]);
    assert_eq!(degenerate_grid.status.code(), Some(3));

    let missing = run(&["validate", "--polytope", "/nonexistent/polytope.json"]);
    assert_eq!(missing.status.code(), Some(1));

    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn thread_cap_from_flag_or_environment() {
    let interval = polytope("interval.json");
    let args = ["pair", "--polytope", interval.as_str(), "--N", "6"];
    let flag = bin().args(args).args(["--threads", "2"]).output().unwrap();
    assert_eq!(flag.status.code(), Some(0));
    let env = bin().args(args).env("TORIC_SPECTRA_THREADS", "1").output().unwrap();
    assert_eq!(env.status.code(), Some(0));
    assert_eq!(table(&stdout(&flag)).1, table(&stdout(&env)).1);
    let junk = bin().args(args).env("TORIC_SPECTRA_THREADS", "many").output().unwrap();
    assert_eq!(junk.status.code(), Some(64));
}

#[test]
fn orthant_model_reproduces_gamma_moments() {
    let o = run(&["transform", "--model", "orthant", "--N", "10", "--x", "0.4", "--f", "poly:1@3"]);
    assert_eq!(o.status.code(), Some(0));
    let (_, rows) = table(&stdout(&o));
    let v: f64 = rows[0][1].parse().unwrap();
    let exact = (0.4 + 0.1) * (0.4 + 0.2) * (0.4 + 0.3);
    assert!((v - exact).abs() < 1e-10, "{v} vs {exact}");
}

#[test]
fn trapezoid_mass_matches_lattice_count() {
    let o = run(&["pair", "--polytope", &polytope("trapezoid.json"), "--N", "4"]);
    let (columns, rows) = table(&stdout(&o));
    let col = |name: &str| columns.iter().position(|c| c == name).unwrap();
    let count: f64 = rows[0][col("lattice_points")].parse().unwrap();
    let mass: f64 = rows[0][col("pair")].parse().unwrap();
    assert_eq!(count, 35.0);
    assert!((mass / count - 1.0).abs() < 1e-8);
}
