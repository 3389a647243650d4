use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn claw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_claw")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = claw(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn field(stdout: &str, name: &str) -> f64 {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(name).filter(|r| r.starts_with(' ')))
        .unwrap_or_else(|| panic!("{name} missing from {stdout}"))
        .trim()
        .parse()
        .unwrap()
}

fn csv_value(csv: &str, x: f64) -> f64 {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').collect::<Vec<_>>())
        .find(|c| c[0].parse::<f64>().unwrap() == x)
        .map(|c| c[1].parse().unwrap())
        .unwrap()
}

#[test]
fn design_inverts_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("design.csv");
    let stdout = ok(&["design", "--R", "15", "--L-total", "180", "--D", "90", "--out", p(&csv)]);
    let d = field(&stdout, "d_mm");
    assert!((d - 34.2478).abs() < 1e-3, "{d}");
    assert!((field(&stdout, "X_allow_mm") - 38.0).abs() < 1e-12);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "R_mm,L_total_mm,d_mm,L_clamp_mm,L_joint_arm_mm,X0_mm,D_mm,L_bc_mm,X_max_mm,X_allow_mm");
    assert_eq!(lines.next().unwrap().split(',').count(), 10);
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1, "no temp files left behind");

    let back = ok(&["design", "--R", "15", "--L-total", "180", "--d", &d.to_string()]);
    assert!((field(&back, "D_mm") - 90.0).abs() < 1e-9);
}

#[test]
fn design_sweep_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    ok(&["design", "--sweep", "R=10:1:20,L_total=160:10:200", "--out", p(&csv)]);
    let text = std::fs::read_to_string(&csv).unwrap();
    let x_allow: Vec<f64> = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert!(x_allow.len() > 10);
    assert!(x_allow.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn design_errors() {
    let bad = claw(&["design", "--R", "100"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("error"));
    assert_eq!(claw(&["design", "--d", "30", "--D", "90"]).status.code(), Some(2));
    assert_eq!(claw(&["design", "--sweep", "Q=1:1:2"]).status.code(), Some(2));
    assert_eq!(claw(&["design", "--bogus"]).status.code(), Some(2));
}

#[test]
fn characterize_full_lock_doubles_y_force() {
    let dir = tempfile::tempdir().unwrap();
    let free = dir.path().join("free.csv");
    let full = dir.path().join("full.csv");
    ok(&["characterize", "--axis", "y", "--mode", "free", "--out", p(&free)]);
    ok(&["characterize", "--axis", "y", "--mode", "full_lock", "--out", p(&full)]);
    let free = std::fs::read_to_string(free).unwrap();
    let full = std::fs::read_to_string(full).unwrap();
    assert!(free.starts_with("deflection_mm,force_N,mode\n"));
    assert_eq!(free.lines().count(), 42);
    let ratio = csv_value(&full, 15.0) / csv_value(&free, 15.0);
    assert!((ratio - 2.0).abs() <= 0.3, "{ratio}");
    assert!(full.lines().skip(1).all(|l| l.ends_with(",full_lock")));

    let yaw = ok(&["characterize", "--axis", "yaw", "--mode", "half_lock", "--steps", "6"]);
    let rows: Vec<&str> = yaw.lines().collect();
    assert_eq!(rows[0], "deflection_deg,torque_Nm,mode");
    assert_eq!(rows.len(), 8);
    assert!(rows[7].starts_with("30,"));
    assert_eq!(claw(&["characterize", "--axis", "w", "--mode", "free"]).status.code(), Some(2));
    assert_eq!(claw(&["characterize", "--axis", "x", "--mode", "locked"]).status.code(), Some(2));
}

#[test]
fn simulate_missing_file_is_a_domain_error() {
    let out = claw(&["simulate", "missing.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing.json") && err.contains("No such file"), "{err}");
}

#[test]
fn simulate_reports_invalid_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    let mut v: serde_json::Value = serde_json::from_str(&ok(&["print-config"])).unwrap();
    v["geometry"]["hole_clearance"] = serde_json::json!(-1.0);
    std::fs::write(&cfg, v.to_string()).unwrap();
    let out = claw(&["simulate", p(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("geometry.hole_clearance"));
}

#[test]
fn simulate_runs_and_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("peg.json");
    let defaults = ok(&["simulate", "--print-config"]);
    std::fs::write(&cfg, &defaults).unwrap();
    for key in ["kind", "geometry", "initial_misalignment", "mode_schedule", "gains", "estop", "seed", "spec_version"] {
        assert!(defaults.contains(&format!("\"{key}\"")), "{key}");
    }

    let single = ok(&["simulate", p(&cfg)]);
    let mut lines = single.lines();
    assert_eq!(lines.next().unwrap(), "offset_x_mm,offset_y_mm,gripper,outcome,depth_mm,peak_force_N,elapsed_s");
    assert!(lines.next().unwrap().starts_with("0,0,claw_free,success,"));

    let results = dir.path().join("results.csv");
    ok(&["simulate", p(&cfg), "--sweep", "1:0.5", "--grippers", "claw_free,rigid", "--seed", "7", "--out", p(&results)]);
    let text = std::fs::read_to_string(&results).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 9);
    assert_eq!(text.lines().filter(|l| l.contains(",rigid,")).count(), 9);
    let again = dir.path().join("again.csv");
    ok(&["simulate", p(&cfg), "--sweep", "1:0.5", "--grippers", "claw_free,rigid", "--seed", "7", "--out", p(&again)]);
    assert_eq!(text, std::fs::read_to_string(&again).unwrap());

    assert_eq!(claw(&["simulate", p(&cfg), "--sweep", "1"]).status.code(), Some(2));
    assert_eq!(claw(&["simulate"]).status.code(), Some(2));
}

#[test]
fn record_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("door.json");
    ok(&["print-config", "--kind", "door_handle", "--gripper", "claw_full", "--out", p(&cfg)]);
    let log = dir.path().join("variable.csv");
    ok(&["record", p(&cfg), "--lever", "free-on-latch", "--started", "2026-01-01T00:00:00Z", "--out", p(&log)]);
    let recorded = std::fs::read_to_string(&log).unwrap();
    assert!(recorded.starts_with("# claw-episode v1 scenario="));
    assert!(recorded.lines().next().unwrap().ends_with("gripper=claw_full started=2026-01-01T00:00:00Z"));
    assert!(recorded.contains(",free,0,") && recorded.contains(",full_lock,0,"));

    let same = dir.path().join("same.csv");
    ok(&["replay", p(&log), "--config", p(&cfg), "--out", p(&same)]);
    assert_eq!(recorded, std::fs::read_to_string(&same).unwrap());
    // The default door config is found from the header hash alone.
    assert_eq!(recorded, ok(&["replay", p(&log)]));

    let free = ok(&["replay", p(&log), "--mode-override", "free"]);
    let last = free.lines().last().unwrap();
    assert!(last.contains(",1,estop:"), "{last}");

    let sched = dir.path().join("schedule.json");
    std::fs::write(&sched, r#"[{"t": 0.0, "mode": "full_lock"}]"#).unwrap();
    let full = ok(&["replay", p(&log), "--mode-override", p(&sched)]);
    assert!(!full.contains(",free,"));
    assert!(!full.contains(",1,estop"));

    let mut other = serde_json::from_str::<serde_json::Value>(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    other["seed"] = serde_json::json!(99);
    let other_cfg = dir.path().join("other.json");
    std::fs::write(&other_cfg, other.to_string()).unwrap();
    let mismatch = claw(&["replay", p(&log), "--config", p(&other_cfg)]);
    assert_eq!(mismatch.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&mismatch.stderr).contains("hash"));

    let broken = dir.path().join("broken.csv");
    std::fs::write(&broken, recorded.replacen("t_s", "time", 1)).unwrap();
    let out = claw(&["replay", p(&broken)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn print_config_round_trips() {
    for kind in ["peg_in_hole", "door_handle", "wall_touch"] {
        let text = ok(&["print-config", "--kind", kind, "--gripper", "rigid", "--seed", "3"]);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["kind"], kind);
        assert_eq!(v["gripper"], "rigid");
        assert_eq!(v["seed"], 3);
    }
    assert_eq!(claw(&["print-config", "--kind", "sock"]).status.code(), Some(2));
}

#[test]
fn serve_lists_sessions_and_persists_logs() {
    let dir = tempfile::tempdir().unwrap();
    let logs = dir.path().join("logs");
    let mut child = Command::new(env!("CARGO_BIN_EXE_claw"))
        .args(["serve", "--bind", "127.0.0.1:0", "--log-dir", p(&logs), "--max-sessions", "2", "--no-pacing"])
        .env("CLAW_LOG", "debug")
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut first = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut first).unwrap();
    let addr = first.trim().strip_prefix("listening on http://").expect("address line").to_string();

    let request = |req: String| {
        let mut s = std::net::TcpStream::connect(&addr).unwrap();
        s.write_all(req.as_bytes()).unwrap();
        let mut resp = String::new();
        s.read_to_string(&mut resp).unwrap();
        resp
    };
    let get = |path: &str| request(format!("GET {path} HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n"));
    let post = |body: &str| {
        request(format!(
            "POST /api/sessions HTTP/1.1\r\nHost: x\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        ))
    };

    let empty = get("/api/sessions");
    assert!(empty.starts_with("HTTP/1.1 200") && empty.ends_with("[]"), "{empty}");
    let cfg = ok(&["print-config"]);
    assert!(post(&cfg).starts_with("HTTP/1.1 201"));
    assert!(post(&cfg).starts_with("HTTP/1.1 201"));
    let full = post(&cfg);
    assert!(full.starts_with("HTTP/1.1 503") && full.contains("capacity-exceeded"), "{full}");
    assert!(get("/").starts_with("HTTP/1.1 200"));
    assert!(logs.is_dir());
    child.kill().unwrap();
    child.wait().unwrap();
}

#[test]
fn serve_rejects_bad_pacing() {
    assert_eq!(claw(&["serve", "--time-scale", "0"]).status.code(), Some(1));
    assert_eq!(claw(&["serve", "--time-scale", "2", "--no-pacing"]).status.code(), Some(2));
    assert_eq!(claw(&["serve", "--bind", "nowhere"]).status.code(), Some(2));
}

#[test]
fn help_lists_every_flag() {
    let cases: [(&str, &[&str]); 7] = [
        ("design", &["--R", "--L-total", "--d", "--D", "--L-clamp", "--L-joint-arm", "--X0", "--sweep", "--out"]),
        ("characterize", &["--axis", "--mode", "--steps", "--out"]),
        ("simulate", &["--sweep", "--out", "--print-config", "--grippers"]),
        ("record", &["--lever", "--started", "--out"]),
        ("replay", &["--mode-override", "--config", "--out"]),
        ("serve", &["--bind", "--log-dir", "--max-sessions", "--time-scale", "--no-pacing"]),
        ("print-config", &["--kind", "--gripper", "--out"]),
    ];
    for (cmd, flags) in cases {
        let help = ok(&[cmd, "--help"]);
        for flag in flags.iter().chain(&["--verbose", "--seed"]) {
            assert!(help.split_whitespace().any(|w| w.trim_end_matches([',', '.']) == *flag), "{cmd} --help lacks {flag}");
        }
    }
    let top = ok(&["--help"]);
    for cmd in ["design", "characterize", "simulate", "record", "replay", "serve", "print-config"] {
        assert!(top.contains(cmd));
    }
    assert_eq!(claw(&[]).status.code(), Some(2));
}
