use std::path::Path;
use std::process::{Command, Output};

fn colonies(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_colonies"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn zero_variance_estimate_is_exact() {
    let out = colonies(&[
        "estimate",
        "--functional",
        "mean_total_resource",
        "--a",
        "1",
        "--mu",
        "0.5",
        "--r0",
        "10",
        "--t",
        "2",
        "--method",
        "spinal",
        "--trajectories",
        "1000",
        "--seed",
        "7",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("method,functional,t,estimate,std_error,n_traj,wall_ms,seed")
    );
    let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(fields[0], "spinal");
    assert!(fields[3].starts_with("27.18281828"), "{}", fields[3]);
    assert_eq!(fields[4], "0");
    assert_eq!(fields[7], "7");
}

#[test]
fn invalid_parameters_exit_with_one() {
    let out = colonies(&["estimate", "--mu", "-2", "--trajectories", "10"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mu must be non-negative"));
    let out = colonies(&["estimate", "--trajectories", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let out = colonies(&["estimate", "--functional", "median_resource"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_flag_prints_usage() {
    let out = colonies(&["estimate", "--colour", "blue"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(colonies(&["figure", "4"]).status.code(), Some(1));
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let out = colonies(&["estimate", "--trajectories", "10", "--out", "/nonexistent-dir/x.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let args = [
        "estimate",
        "--method",
        "both",
        "--trajectories",
        "3000",
        "--seed",
        "99",
        "--n0",
        "3",
        "--t",
        "1.5",
    ];
    let a = colonies(&args);
    let b = colonies(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    // 2 methods × 8 default functionals + header
    assert_eq!(stdout(&a).lines().count(), 17);
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "# mean resource run\na=1\nmu=0.5\nr0=10\nt=2\nfunctional=mean_total_resource\nseed=3\n",
    )
    .unwrap();
    let out = colonies(&[
        "--config",
        cfg.to_str().unwrap(),
        "estimate",
        "--trajectories",
        "50",
        "--seed",
        "8",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("spinal,mean_total_resource,2,27.18281828"), "{row}");
    assert!(row.ends_with(",8"), "flag should override the file: {row}");
}

#[test]
fn simulate_writes_path_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("path.csv");
    let out = colonies(&[
        "simulate",
        "--method",
        "spinal",
        "--n0",
        "2",
        "--t",
        "1",
        "--grid",
        "0.25",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = read(&path);
    assert_eq!(text.lines().next(), Some("time,label,trait,spine"));
    assert!(text.lines().any(|l| l.starts_with("1,")));
    let direct = colonies(&["simulate", "--t", "0.5"]);
    assert_eq!(stdout(&direct).lines().next(), Some("time,label,trait"));
    assert_eq!(colonies(&["simulate", "--method", "both"]).status.code(), Some(1));
}

#[test]
fn compare_reports_both_methods() {
    let out = colonies(&[
        "compare",
        "--functional",
        "mean_total_resource",
        "--trajectories",
        "200",
        "--a",
        "1.5",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("method,functional,t,estimate,std_error,sample_variance"));
    assert!(rows[1].starts_with("direct,") && rows[2].starts_with("spinal,"));
    assert!(rows[1].contains(",analytic,"));
}

#[test]
fn figures_write_data_and_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    for (id, header) in [
        ("1", "lambda,t,estimate,std_error,n_traj"),
        ("3", "intrinsic_variance,t,rank,mean_share,std_error,n_surviving"),
        (
            "5",
            "panel,functional,t,method,n_traj,estimate,std_error,wall_ms,relative_error,efficiency_ratio",
        ),
    ] {
        let out = colonies(&["figure", id, "--trajectories", "40", "--out", out_dir]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let data = read(&dir.path().join(format!("figure{id}.csv")));
        assert_eq!(data.lines().next(), Some(header));
        assert!(data.lines().count() > 2);
        let oracle = read(&dir.path().join(format!("figure{id}_oracle.csv")));
        assert_eq!(oracle.lines().next(), Some("t,quantity,lower,upper,point"));
    }
    let fig1 = read(&dir.path().join("figure1.csv"));
    for lambda in ["1", "3", "6", "10"] {
        assert!(fig1.lines().any(|l| l.starts_with(&format!("{lambda},8,"))));
    }
    let first = read(&dir.path().join("figure1.csv"));
    colonies(&["figure", "1", "--trajectories", "40", "--out", out_dir]);
    assert_eq!(first, read(&dir.path().join("figure1.csv")));
}
