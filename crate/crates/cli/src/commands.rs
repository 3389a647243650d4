use crate::{CharacterizeArgs, Cli, Command, DesignArgs, LeverArg, PrintConfigArgs, RecordArgs, ReplayArgs, ServeArgs, SimulateArgs};
use anyhow::{anyhow, bail, Context, Result};
use claw_core::geometry::{
    analyze, compute_joint_distance, csv_row, sweep_designs, DesignConstraints, DesignRanges, LeafSpringSpec,
    CSV_HEADER, DEFAULT_X_MAX,
};
use claw_core::scenario::{
    axis_offsets, misalignment_sweep, results_csv, run_scripted, tolerance, GripperKind, LeverPolicy,
    ScenarioConfig, ScenarioKind, SweepPoint,
};
use claw_core::teleop::{replay, EpisodeLog, ModeOverride};
use claw_core::wristmodel::WristModel;
use claw_core::StiffnessMode;
use claw_server::{Pacing, ServerConfig};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

pub fn run(cli: Cli) -> Result<()> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Design(a) => design(a, out),
        Command::Characterize(a) => characterize(a, out),
        Command::Simulate(a) => simulate(a, cli.seed, out),
        Command::Record(a) => record(a, cli.seed, out),
        Command::Replay(a) => replay_cmd(a, cli.seed, out),
        Command::Serve(a) => serve(a),
        Command::PrintConfig(a) => print_config(a, cli.seed, out),
    }
}

/// Writes `content` to `path` via a temp file in the same directory, or to stdout.
fn emit(out: Option<&Path>, content: &str) -> Result<()> {
    let Some(path) = out else {
        let mut stdout = std::io::stdout().lock();
        stdout.write_all(content.as_bytes())?;
        return Ok(stdout.flush()?);
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).with_context(|| format!("creating a file in {}", dir.display()))?;
    tmp.write_all(content.as_bytes())?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    tracing::info!(path = %path.display(), bytes = content.len(), "wrote");
    Ok(())
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    let mut cfg = ScenarioConfig::from_json(&text).map_err(|e| anyhow!("invalid config {}: {e}", path.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn design(a: &DesignArgs, out: Option<&Path>) -> Result<()> {
    let d = match a.d {
        Some(d) => d,
        None => compute_joint_distance(a.big_d.unwrap_or(90.0), a.l_total, a.r)?,
    };
    let spec = match a.x0 {
        Some(x0) => LeafSpringSpec { r: a.r, l_total: a.l_total, d, l_clamp: a.l_clamp, l_joint_arm: a.l_joint_arm, x0 },
        None => LeafSpringSpec::with_target_x_max(a.r, a.l_total, d, a.l_clamp, a.l_joint_arm, DEFAULT_X_MAX),
    };
    if let Some(sweep) = &a.sweep {
        let ranges = DesignRanges::pinned(&spec).parse_overrides(sweep)?;
        let designs = sweep_designs(&ranges, &DesignConstraints::default())?;
        tracing::info!(count = designs.len(), "feasible designs");
        let mut csv = format!("{CSV_HEADER}\n");
        for (s, g) in &designs {
            csv.push_str(&csv_row(s, g));
            csv.push('\n');
        }
        return emit(out, &csv);
    }
    let geom = analyze(&spec)?;
    let fields = [
        ("R_mm", spec.r),
        ("L_total_mm", spec.l_total),
        ("d_mm", spec.d),
        ("L_clamp_mm", spec.l_clamp),
        ("L_joint_arm_mm", spec.l_joint_arm),
        ("X0_mm", spec.x0),
        ("D_mm", geom.width),
        ("L_bc_mm", geom.l_bc),
        ("X_max_mm", geom.x_max),
        ("X_allow_mm", geom.x_allow),
    ];
    for (name, v) in fields {
        println!("{name:<16}{v}");
    }
    if let Some(path) = out {
        emit(Some(path), &format!("{CSV_HEADER}\n{}\n", csv_row(&spec, &geom)))?;
    }
    Ok(())
}

/// Rows of `deflection, force, mode` from zero to the envelope bound.
pub fn characterize_csv(wrist: &WristModel, axis: claw_core::Axis, mode: StiffnessMode, steps: u32) -> String {
    let (_, hi) = wrist.envelope().map_or((0.0, 0.0), |e| e.bounds(axis, mode));
    let mut s = String::from(if axis.is_rotation() { "deflection_deg,torque_Nm,mode\n" } else { "deflection_mm,force_N,mode\n" });
    for i in 0..=steps {
        let x = hi * i as f64 / steps as f64;
        // Force applied to hold the deflection, so positive along the axis.
        let f = -wrist.axis_reaction(axis, x, mode) + 0.0;
        let _ = writeln!(s, "{x},{f},{mode}");
    }
    s
}

fn characterize(a: &CharacterizeArgs, out: Option<&Path>) -> Result<()> {
    emit(out, &characterize_csv(&WristModel::claw_default(), a.axis, a.mode, a.steps))
}

fn simulate(a: &SimulateArgs, seed: Option<u64>, out: Option<&Path>) -> Result<()> {
    if a.print_config {
        let mut cfg = ScenarioConfig::default_for(a.kind.into());
        cfg.seed = seed.unwrap_or(cfg.seed);
        return emit(out, &format!("{}\n", cfg.to_json_pretty()));
    }
    let path = a.config.as_deref().ok_or_else(|| anyhow!("a config file is required"))?;
    let cfg = load_config(path, seed)?;
    let grippers = if a.grippers.is_empty() { vec![cfg.gripper] } else { a.grippers.clone() };
    let mut points = Vec::new();
    for &g in &grippers {
        match a.sweep {
            Some((max, step)) => {
                let pts = misalignment_sweep(&cfg, g, &axis_offsets(max, step)).map_err(|e| anyhow!("invalid config: {e}"))?;
                let ok = pts.iter().filter(|p| p.outcome == claw_core::scenario::Outcome::Success).count();
                eprintln!(
                    "{g}: {ok}/{} succeeded, tolerance x {} mm, y {} mm",
                    pts.len(),
                    tolerance(&pts, false),
                    tolerance(&pts, true)
                );
                points.extend(pts);
            }
            None => {
                let mut c = cfg.clone();
                c.gripper = g;
                let r = run_scripted(&c, LeverPolicy::Schedule).map_err(|e| anyhow!("invalid config: {e}"))?;
                eprintln!("{g}: {} after {} s", r.status.outcome, r.status.elapsed);
                points.push(SweepPoint {
                    offset_x: c.initial_misalignment.x,
                    offset_y: c.initial_misalignment.y,
                    gripper: g,
                    outcome: r.status.outcome,
                    depth: r.status.insertion_depth,
                    peak_force: r.peak_force,
                    elapsed: r.status.elapsed,
                });
            }
        }
    }
    emit(out, &results_csv(&points))
}

fn record(a: &RecordArgs, seed: Option<u64>, out: Option<&Path>) -> Result<()> {
    let cfg = load_config(&a.config, seed)?;
    let started = a
        .started
        .clone()
        .unwrap_or_else(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
    if started.is_empty() || started.contains(char::is_whitespace) {
        bail!("--started must be a single token, got `{started}`");
    }
    let policy = match a.lever {
        LeverArg::Schedule => LeverPolicy::Schedule,
        LeverArg::FreeOnLatch => LeverPolicy::FreeOnLatch,
    };
    let run = run_scripted(&cfg, policy).map_err(|e| anyhow!("invalid config: {e}"))?;
    let log = EpisodeLog::from_run(&cfg, started, &run);
    emit(out, &log.to_csv_string())?;
    eprintln!("{} after {} s, {} rows, peak force {} N", run.status.outcome, run.status.elapsed, log.rows.len(), run.peak_force);
    Ok(())
}

/// The default config (any kind, any gripper) whose hash matches, if one does.
fn default_config_for(hash: &str, seed: Option<u64>) -> Option<ScenarioConfig> {
    [ScenarioKind::PegInHole, ScenarioKind::DoorHandle, ScenarioKind::WallTouch].into_iter().find_map(|kind| {
        GripperKind::ALL.into_iter().find_map(|g| {
            let mut cfg = ScenarioConfig::default_for(kind);
            cfg.gripper = g;
            cfg.seed = seed.unwrap_or(cfg.seed);
            (cfg.config_hash() == hash).then_some(cfg)
        })
    })
}

fn replay_cmd(a: &ReplayArgs, seed: Option<u64>, out: Option<&Path>) -> Result<()> {
    let file = std::fs::File::open(&a.episode).with_context(|| format!("cannot read episode {}", a.episode.display()))?;
    let log = EpisodeLog::read_from(std::io::BufReader::new(file)).with_context(|| format!("in {}", a.episode.display()))?;
    let cfg = match &a.config {
        Some(p) => load_config(p, seed)?,
        None => default_config_for(&log.header.scenario_hash, seed).ok_or_else(|| {
            anyhow!("no default config matches scenario hash {}; pass --config", log.header.scenario_hash)
        })?,
    };
    let over = match &a.mode_override {
        None => None,
        Some(s) => Some(match s.parse::<StiffnessMode>() {
            Ok(m) => ModeOverride::Fixed(m),
            Err(_) => {
                let text = std::fs::read_to_string(s)
                    .with_context(|| format!("`{s}` is neither a stiffness mode nor a readable schedule file"))?;
                ModeOverride::parse(&text).map_err(|e| anyhow!("{s}: {e}"))?
            }
        }),
    };
    let r = replay(&log, &cfg, over.as_ref())?;
    emit(out, &r.log.to_csv_string())?;
    eprintln!("{} after {} s, peak force {} N", r.status.outcome, r.status.elapsed, r.peak_force);
    Ok(())
}

fn serve(a: &ServeArgs) -> Result<()> {
    let pacing = if a.no_pacing { Pacing::Unpaced } else { Pacing::real_time(a.time_scale).map_err(|e| anyhow!(e))? };
    if a.max_sessions == 0 {
        bail!("--max-sessions must be at least 1");
    }
    if let Some(dir) = &a.log_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let config = ServerConfig {
        max_sessions: a.max_sessions,
        log_dir: a.log_dir.clone(),
        pacing,
        log_ttl: Duration::from_secs(a.log_ttl),
        assets_dir: a.assets.clone(),
    };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(a.bind).await.with_context(|| format!("binding {}", a.bind))?;
        println!("listening on http://{}", listener.local_addr()?);
        std::io::stdout().flush()?;
        tokio::select! {
            r = claw_server::serve_on(listener, config) => r.context("server failed")?,
            _ = tokio::signal::ctrl_c() => tracing::info!("interrupted"),
        }
        Ok(())
    })
}

fn print_config(a: &PrintConfigArgs, seed: Option<u64>, out: Option<&Path>) -> Result<()> {
    let mut cfg = ScenarioConfig::default_for(a.kind.into());
    cfg.gripper = a.gripper;
    cfg.seed = seed.unwrap_or(cfg.seed);
    emit(out, &format!("{}\n", cfg.to_json_pretty()))
}
