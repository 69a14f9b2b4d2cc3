use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn srwe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srwe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
        .display()
        .to_string()
}

fn out_dir(dir: &tempfile::TempDir) -> String {
    dir.path().display().to_string()
}

#[test]
fn srwe_writes_profile_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = srwe(&[
        "srwe",
        "--config",
        &config("default.json"),
        "--epsilon",
        "2",
        "--out",
        &out_dir(&dir),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(report.starts_with("epsilon,class,count,lambda,robust_cost,gap,certified"));
    assert!(report.lines().nth(1).unwrap().contains(",true,"));
    let profile = std::fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    assert_eq!(profile.lines().count(), 1 + 24);
    assert!(o.stdout.is_empty());
}

#[test]
fn verify_accepts_the_solution_and_rejects_a_tampered_copy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("default.json");
    let o = srwe(&["srwe", "--config", &cfg, "--epsilon", "2", "--out", &out_dir(&dir)]);
    assert_eq!(o.status.code(), Some(0));
    let path: PathBuf = dir.path().join("profile.csv");
    let o = srwe(&["verify", "--config", &cfg, "--profile", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    // Move 0.3 kWh from the busiest hour to an idle open hour: still feasible.
    let text = std::fs::read_to_string(&path).unwrap();
    let mut rows: Vec<Vec<String>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    let value = |r: &Vec<String>| r[3].parse::<f64>().unwrap();
    let busiest = (0..rows.len())
        .max_by(|a, b| value(&rows[*a]).total_cmp(&value(&rows[*b])))
        .unwrap();
    let idle = rows.iter().position(|r| r[2] == "6").unwrap();
    let (a, b) = (value(&rows[busiest]) - 0.3, value(&rows[idle]) + 0.3);
    rows[busiest][3] = a.to_string();
    rows[idle][3] = b.to_string();
    let mut tampered = String::from("epsilon,class,hour,action_kw\n");
    for r in rows {
        tampered.push_str(&r.join(","));
        tampered.push('\n');
    }
    let bad = dir.path().join("tampered.csv");
    std::fs::write(&bad, tampered).unwrap();
    let o = srwe(&["verify", "--config", &cfg, "--profile", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(
        stderr.contains("gap") && stderr.contains("NOT an equilibrium"),
        "{stderr}"
    );
}

#[test]
fn oracle_check_passes_for_seed_seven() {
    let dir = tempfile::tempdir().unwrap();
    let o = srwe(&["oracle-check", "--seed", "7", "--out", &out_dir(&dir)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(dir.path().join("oracle_check.csv")).unwrap();
    assert_eq!(table.lines().count(), 101);
    assert!(!table.contains("false"));
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, "").unwrap();
    let o = srwe(&["srwe", "--config", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("scenario"));

    let unknown = dir.path().join("unknown.json");
    std::fs::write(&unknown, r#"{"scenario": "ev_charging", "solver": {"rho_": 2}}"#).unwrap();
    let o = srwe(&["srwe", "--config", unknown.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rho_"));

    let o = srwe(&["srwe", "--config", "/nonexistent/config.json"]);
    assert_eq!(o.status.code(), Some(1));
    let o = srwe(&["srwe", "--epsilon", "-1", "--out", &out_dir(&dir)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn non_convergence_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("short.json");
    std::fs::write(&cfg, r#"{"scenario": "poa", "solver": {"max_iter": 1, "rho": 0.01}}"#).unwrap();
    let o = srwe(&[
        "poa",
        "--config",
        cfg.to_str().unwrap(),
        "--epsilon",
        "1",
        "--out",
        &out_dir(&dir),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let o = srwe(&[
        "srwe",
        "--config",
        cfg.to_str().unwrap(),
        "--epsilon",
        "1",
        "--out",
        &out_dir(&dir),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn svg_output_and_plot_command() {
    let dir = tempfile::tempdir().unwrap();
    let o = srwe(&[
        "valley",
        "--epsilon",
        "0",
        "--epsilon",
        "2",
        "--format",
        "csv+svg",
        "--out",
        &out_dir(&dir),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let valley = std::fs::read_to_string(dir.path().join("valley_filling.csv")).unwrap();
    assert!(valley.starts_with("hour,0,2,non_pev\n"));
    assert!(dir.path().join("valley_filling.svg").exists());
    std::fs::remove_file(dir.path().join("aggregates.svg")).unwrap();
    let o = srwe(&["plot", "--out", &out_dir(&dir)]);
    assert_eq!(o.status.code(), Some(0));
    let svg = std::fs::read_to_string(dir.path().join("aggregates.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn thread_cap_does_not_change_results() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for (dir, threads) in [(&a, "1"), (&b, "4")] {
        let o = Command::new(env!("CARGO_BIN_EXE_srwe"))
            .args([
                "srwe",
                "--epsilon",
                "0",
                "--epsilon",
                "1",
                "--epsilon",
                "3",
                "--out",
                &out_dir(dir),
            ])
            .env("SRWE_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["profile.csv", "report.csv", "aggregates.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}
