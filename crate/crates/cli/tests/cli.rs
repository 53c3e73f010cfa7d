use std::path::PathBuf;
use std::process::{Command, Output};

use steklov_trace_cli::{run, CommandName, RawConfig, RunConfig, VERSION};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_steklov-trace"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn tmp(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn lib_run(command: CommandName, pairs: &[&str]) -> String {
    let mut raw = RawConfig::default();
    for p in pairs {
        raw.set_pair(p).unwrap();
    }
    run(&RunConfig::resolve(command, &raw).unwrap()).unwrap().csv
}

fn value_of(csv: &str, key: &str) -> f64 {
    csv.lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")))
        .unwrap_or_else(|| panic!("no {key} row"))
        .parse()
        .unwrap()
}

#[test]
fn header_echoes_version_and_resolved_config() {
    let out = bin(&["kp", "--set", "n_max=4", "--seed", "11"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(format!("# steklov-trace {VERSION}").as_str()));
    assert_eq!(lines.next(), Some("# command = kp"));
    assert!(text.contains("# n_max = 4\n"));
    assert!(text.contains("# seed = 11\n"));
    assert!(text.contains("\n3,2,1.77245385090552,"));
}

#[test]
fn config_file_and_overrides() {
    let path = tmp("run.cfg");
    std::fs::write(&path, "# planar run\nmesh = square\nresolution = 2\nq = 2\n").unwrap();
    let out_path = tmp("steklov.csv");
    let out = bin(&[
        "steklov",
        "--config",
        path.to_str().unwrap(),
        "--set",
        "resolution=1",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&out_path).unwrap();
    assert!(csv.contains("# resolution = 1\n") && csv.contains("# q = 2\n"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 5);
}

#[test]
fn exit_codes_separate_config_audit_and_runtime_failures() {
    assert_eq!(bin(&["kp", "--set", "colour=red"]).status.code(), Some(2));
    assert_eq!(bin(&["oracle", "--set", "n=6"]).status.code(), Some(2));
    assert_eq!(bin(&["kp", "--config", "/nonexistent/run.cfg"]).status.code(), Some(2));
    assert_ne!(bin(&["plot"]).status.code(), Some(0));
    // One iteration cannot meet the residual tolerance.
    let out = bin(&["steklov", "--set", "max_iters=1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stdout).unwrap().contains("# audit converged: FAIL"));
    let missing = bin(&["steklov", "--set", "mesh_file=/nonexistent/mesh.txt"]);
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn mesh_file_round_trip_matches_generated_mesh() {
    let mesh = steklov_trace::fem::generate_mesh(steklov_trace::fem::MeshShape::Disk, 2).unwrap();
    let path = tmp("disk2.mesh");
    std::fs::write(&path, mesh.to_text()).unwrap();
    let from_file = lib_run(CommandName::Steklov, &[&format!("mesh_file={}", path.display()), "resolution=2"]);
    let generated = lib_run(CommandName::Steklov, &["mesh=disk", "resolution=2"]);
    let body = |s: &str| s.lines().filter(|l| !l.starts_with("# mesh_file")).collect::<Vec<_>>().join("\n");
    assert_eq!(body(&from_file), body(&generated));
}

#[test]
fn expand_reports_documented_examples() {
    let csv = lib_run(CommandName::Expand, &["n=5", "p=2", "lambdas=1,1,1,1"]);
    assert!((value_of(&csv, "first_order") + 1.5).abs() < 1e-14);
    assert!((value_of(&csv, "E") + 21.0 / 32.0).abs() < 1e-14);

    let csv = lib_run(CommandName::Expand, &["n=3", "p=1.5", "lambdas=0.5,0.1"]);
    assert!(csv.contains("# good_point = true (H > 0)"));

    let csv = lib_run(CommandName::Expand, &["n=3", "p=2.5", "lambdas=1,1"]);
    assert!(csv.contains("# good_point = not applicable"));
    assert!(csv.contains("\nA2,none\n"));
}

#[test]
fn kp_skips_invalid_pairs_with_a_note() {
    let csv = lib_run(CommandName::Kp, &["n_min=3", "n_max=3", "p_grid=2,3"]);
    assert!(csv.contains("# skipped N=3 p=3: p must be < N"));
    assert_eq!(csv.lines().filter(|l| l.starts_with("3,")).count(), 1);
}

#[test]
fn flat_oracle_quotient_tends_to_one() {
    let csv = lib_run(CommandName::Oracle, &["n=3", "p=1.5", "eps_per_decade=4"]);
    let quotients: Vec<f64> = csv
        .lines()
        .skip_while(|l| !l.starts_with("epsilon,"))
        .skip(1)
        .take_while(|l| !l.starts_with('#'))
        .map(|l| l.split(',').nth(4).unwrap().parse().unwrap())
        .collect();
    assert_eq!(quotients.len(), 5);
    assert!(quotients.iter().all(|q| (q - 1.0).abs() < 1e-2));
    assert!((quotients[0] - 1.0).abs() < (quotients[4] - 1.0).abs());
}

#[test]
fn shapeopt_alpha_zero_row_equals_plain_lambda() {
    let csv = lib_run(
        CommandName::Shapeopt,
        &["mesh=square", "resolution=2", "q=2", "alphas=0,0.125", "random_holes=5"],
    );
    let plain = lib_run(CommandName::Steklov, &["mesh=square", "resolution=2", "q=2"]);
    let lambda: f64 = plain.lines().find_map(|l| l.strip_prefix("# lambda = ")).unwrap().parse().unwrap();
    let row = csv.lines().find(|l| l.starts_with("0,0,")).unwrap();
    let at_zero: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
    assert_eq!(at_zero, lambda);
    assert!(csv.contains("\nalpha,element_index\n"));
}
