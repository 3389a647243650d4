mod commands;

use clap::{Args, Parser, Subcommand, ValueEnum};
use claw_core::geometry::{DesignRanges, LeafSpringSpec, DEFAULT_L_CLAMP, DEFAULT_L_JOINT_ARM};
use claw_core::scenario::{GripperKind, ScenarioKind};
use claw_core::{Axis, StiffnessMode};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "claw", version, about = "Design, simulate and teleoperate the CLAW soft wrist")]
pub struct Cli {
    /// More log output (repeat for debug). CLAW_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Seed recorded in the scenario config; runs are otherwise deterministic.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Write the primary artifact here instead of stdout (atomic).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Leaf-spring loop geometry: width, stroke limit and allowable displacement.
    Design(DesignArgs),
    /// Force or torque against deflection along one axis, envelope-limited.
    Characterize(CharacterizeArgs),
    /// Run a scenario config, optionally over a misalignment grid.
    Simulate(SimulateArgs),
    /// Run a scenario's scripted leader and write the episode log.
    Record(RecordArgs),
    /// Re-run an episode log, optionally with a different lever schedule.
    Replay(ReplayArgs),
    /// Host simulation sessions over HTTP and a WebSocket stream.
    Serve(ServeArgs),
    /// Print a default scenario config.
    PrintConfig(PrintConfigArgs),
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    /// Arc radius R (mm).
    #[arg(long = "R", default_value_t = 15.0, allow_negative_numbers = true)]
    pub r: f64,
    /// Total spring length between joint axes (mm).
    #[arg(long = "L-total", default_value_t = 180.0, allow_negative_numbers = true)]
    pub l_total: f64,
    /// Inter-axial joint distance d (mm).
    #[arg(long = "d", value_name = "MM", conflicts_with = "big_d", allow_negative_numbers = true)]
    pub d: Option<f64>,
    /// Target loop width D (mm); d is solved from it. Defaults to 90 when neither is given.
    #[arg(long = "D", value_name = "MM", allow_negative_numbers = true)]
    pub big_d: Option<f64>,
    /// Clamped length at the finger unit (mm).
    #[arg(long = "L-clamp", default_value_t = DEFAULT_L_CLAMP, allow_negative_numbers = true)]
    pub l_clamp: f64,
    /// Joint-to-arc length (mm).
    #[arg(long = "L-joint-arm", default_value_t = DEFAULT_L_JOINT_ARM, allow_negative_numbers = true)]
    pub l_joint_arm: f64,
    /// Unloaded clamp position (mm). Defaults to the value giving X_max = 47.5 mm.
    #[arg(long = "X0", allow_negative_numbers = true)]
    pub x0: Option<f64>,
    /// Grid over spec fields, e.g. `R=10:1:20,L_total=150:10:200`; writes the CSV report.
    #[arg(long, value_name = "RANGE-SPEC", value_parser = parse_range_spec)]
    pub sweep: Option<String>,
}

#[derive(Debug, Args)]
pub struct CharacterizeArgs {
    /// x, y, z, roll, pitch or yaw.
    #[arg(long, value_parser = str::parse::<Axis>)]
    pub axis: Axis,
    /// free, half_lock or full_lock.
    #[arg(long, value_parser = str::parse::<StiffnessMode>)]
    pub mode: StiffnessMode,
    /// Intervals between zero and the envelope bound.
    #[arg(long, default_value_t = 40, value_parser = clap::value_parser!(u32).range(1..))]
    pub steps: u32,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario config (JSON).
    #[arg(required_unless_present = "print_config")]
    pub config: Option<PathBuf>,
    /// Lateral offset grid `MAX:STEP` (mm) along X and Y, added to the config's misalignment.
    #[arg(long, value_name = "MAX:STEP", value_parser = parse_offset_grid)]
    pub sweep: Option<(f64, f64)>,
    /// Grippers to sweep (comma separated). Defaults to the config's gripper.
    #[arg(long, value_delimiter = ',', value_parser = str::parse::<GripperKind>)]
    pub grippers: Vec<GripperKind>,
    /// Print every default (geometry, gains, e-stop limits) and exit.
    #[arg(long)]
    pub print_config: bool,
    /// Scenario kind for --print-config.
    #[arg(long, value_enum, default_value_t = KindArg::PegInHole, requires = "print_config")]
    pub kind: KindArg,
}

#[derive(Debug, Args)]
pub struct RecordArgs {
    /// Scenario config (JSON).
    pub config: PathBuf,
    /// How the scripted operator moves the lever.
    #[arg(long, value_enum, default_value_t = LeverArg::Schedule)]
    pub lever: LeverArg,
    /// Start stamp for the log header. Defaults to now (UTC).
    #[arg(long, value_name = "ISO8601")]
    pub started: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Episode log (CSV).
    pub episode: PathBuf,
    /// Lever override: a mode name, or a JSON schedule file of `{t, mode}` entries.
    #[arg(long, value_name = "MODE|SCHEDULE.JSON")]
    pub mode_override: Option<String>,
    /// Scenario config the log was recorded with. Defaults are tried when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Listen address; port 0 picks a free port.
    #[arg(long, default_value = "127.0.0.1:8080", value_name = "ADDR:PORT")]
    pub bind: std::net::SocketAddr,
    /// Terminal sessions' episode logs are written here.
    #[arg(long, value_name = "PATH")]
    pub log_dir: Option<PathBuf>,
    /// Concurrent unfinished sessions.
    #[arg(long, default_value_t = claw_server::DEFAULT_MAX_SESSIONS, value_name = "N")]
    pub max_sessions: usize,
    /// Simulated seconds per wall-clock second, 0.1 to 10.
    #[arg(long, default_value_t = 1.0, conflicts_with = "no_pacing")]
    pub time_scale: f64,
    /// Step sessions as fast as commands arrive.
    #[arg(long)]
    pub no_pacing: bool,
    /// Static UI assets served at `/`.
    #[arg(long, value_name = "DIR")]
    pub assets: Option<PathBuf>,
    /// Seconds a finished session stays listed.
    #[arg(long, default_value_t = claw_server::DEFAULT_LOG_TTL.as_secs(), value_name = "SECS")]
    pub log_ttl: u64,
}

#[derive(Debug, Args)]
pub struct PrintConfigArgs {
    #[arg(long, value_enum, default_value_t = KindArg::PegInHole)]
    pub kind: KindArg,
    #[arg(long, default_value = "claw_free", value_parser = str::parse::<GripperKind>)]
    pub gripper: GripperKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum KindArg {
    PegInHole,
    DoorHandle,
    WallTouch,
}

impl From<KindArg> for ScenarioKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::PegInHole => ScenarioKind::PegInHole,
            KindArg::DoorHandle => ScenarioKind::DoorHandle,
            KindArg::WallTouch => ScenarioKind::WallTouch,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LeverArg {
    /// Follow the config's mode schedule.
    Schedule,
    /// Flip to free once the door latch releases.
    FreeOnLatch,
}

fn parse_range_spec(s: &str) -> Result<String, String> {
    DesignRanges::pinned(&LeafSpringSpec::reference()).parse_overrides(s).map_err(|e| e.to_string())?;
    Ok(s.to_string())
}

fn parse_offset_grid(s: &str) -> Result<(f64, f64), String> {
    let (max, step) = s.split_once(':').ok_or("expected MAX:STEP")?;
    let max: f64 = max.trim().parse().map_err(|e| format!("max: {e}"))?;
    let step: f64 = step.trim().parse().map_err(|e| format!("step: {e}"))?;
    if !(max.is_finite() && max >= 0.0) {
        return Err("max must be a non-negative number".into());
    }
    if !(step.is_finite() && step > 0.0) {
        return Err("step must be positive".into());
    }
    Ok((max, step))
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_env("CLAW_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    init_logging(cli.verbose);
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
