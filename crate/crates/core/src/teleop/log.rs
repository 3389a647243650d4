//! Episode logs: one CSV row per 20 ms command window, preceded by a
//! comment header naming the scenario.

use crate::controller::COMMAND_PERIOD;
use crate::lockstate::StiffnessMode;
use crate::scenario::{
    run_commands, GripperKind, ModeEvent, RunResult, Sample, ScenarioConfig, ScenarioStatus, SPEC_VERSION,
};
use crate::types::{Deflection6, Pose6, Wrench6};
use std::io::{BufRead, Write};

pub const COLUMNS: [&str; 22] = [
    "t_s", "x_mm", "y_mm", "z_mm", "roll_deg", "pitch_deg", "yaw_deg", "dx_mm", "dy_mm", "dz_mm", "droll_deg",
    "dpitch_deg", "dyaw_deg", "fx_N", "fy_N", "fz_N", "tx_Nm", "ty_Nm", "tz_Nm", "mode", "estop", "event",
];

const MAGIC: &str = "# claw-episode";
const GRID_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("episode log version {found} is not supported (expected {expected})")]
    VersionMismatch { found: String, expected: u32 },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("log was recorded for scenario {log} but the config hashes to {config}")]
    HashMismatch { log: String, config: String },
    #[error("schedule conflict: {0}")]
    ScheduleConflict(String),
    #[error("invalid scenario: {0}")]
    Config(#[from] crate::scenario::ConfigError),
}

impl LogError {
    fn malformed(line: usize, message: impl Into<String>) -> Self {
        LogError::Malformed { line, message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpisodeHeader {
    pub spec_version: u32,
    pub scenario_hash: String,
    pub gripper: GripperKind,
    /// ISO 8601 timestamp, kept verbatim.
    pub started: String,
}

impl EpisodeHeader {
    pub fn new(cfg: &ScenarioConfig, started: impl Into<String>) -> Self {
        Self { spec_version: SPEC_VERSION, scenario_hash: cfg.config_hash(), gripper: cfg.gripper, started: started.into() }
    }

    pub fn line(&self) -> String {
        format!(
            "{MAGIC} v{} scenario={} gripper={} started={}",
            self.spec_version, self.scenario_hash, self.gripper, self.started
        )
    }

    pub fn parse(line: &str) -> Result<Self, LogError> {
        let rest = line
            .trim_end_matches(['\r', '\n'])
            .strip_prefix(MAGIC)
            .ok_or_else(|| LogError::malformed(1, format!("expected header starting with `{MAGIC}`")))?;
        let mut parts = rest.split_whitespace();
        let version = parts.next().ok_or_else(|| LogError::malformed(1, "missing version"))?;
        let spec_version = version
            .strip_prefix('v')
            .and_then(|v| v.parse::<u32>().ok())
            .filter(|&v| v == SPEC_VERSION)
            .ok_or_else(|| LogError::VersionMismatch { found: version.to_string(), expected: SPEC_VERSION })?;
        let (mut hash, mut gripper, mut started) = (None, None, None);
        for part in parts {
            let (key, value) =
                part.split_once('=').ok_or_else(|| LogError::malformed(1, format!("expected key=value, got `{part}`")))?;
            let slot = match key {
                "scenario" => &mut hash,
                "gripper" => &mut gripper,
                "started" => &mut started,
                _ => return Err(LogError::malformed(1, format!("unknown header key `{key}`"))),
            };
            *slot = Some(value.to_string());
        }
        let need = |v: Option<String>, key: &str| v.ok_or_else(|| LogError::malformed(1, format!("header lacks `{key}=`")));
        let gripper = need(gripper, "gripper")?.parse::<GripperKind>().map_err(|e| LogError::malformed(1, e))?;
        Ok(Self { spec_version, scenario_hash: need(hash, "scenario")?, gripper, started: need(started, "started")? })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRow {
    pub t: f64,
    /// Commanded TCP pose for the window starting at `t`.
    pub pose: Pose6,
    pub deflection: Deflection6,
    pub wrench: Wrench6,
    /// Lever position for the window starting at `t`.
    pub mode: StiffnessMode,
    pub estop: bool,
    /// `;`-separated event labels since the previous row, empty when none.
    pub event: String,
}

impl EpisodeRow {
    pub fn from_sample(s: &Sample) -> Self {
        let event = s.events.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(";");
        Self {
            t: s.t,
            pose: s.command,
            deflection: s.plant.wrist_deflection,
            wrench: s.plant.measured_wrench,
            mode: s.lever,
            estop: s.estop,
            event,
        }
    }

    fn fields(&self) -> Vec<String> {
        let mut f = vec![self.t.to_string()];
        f.extend(self.pose.to_array().iter().map(f64::to_string));
        f.extend(self.deflection.to_array().iter().map(f64::to_string));
        f.extend(self.wrench.to_array().iter().map(f64::to_string));
        f.push(self.mode.to_string());
        f.push(u8::from(self.estop).to_string());
        f.push(self.event.clone());
        f
    }

    fn parse(rec: &csv::StringRecord, line: usize) -> Result<Self, LogError> {
        if rec.len() != COLUMNS.len() {
            return Err(LogError::malformed(line, format!("expected {} fields, got {}", COLUMNS.len(), rec.len())));
        }
        let num = |i: usize| -> Result<f64, LogError> {
            let v: f64 = rec[i].parse().map_err(|_| LogError::malformed(line, format!("{}: not a number", COLUMNS[i])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(LogError::malformed(line, format!("{}: not finite", COLUMNS[i])))
            }
        };
        let six = |from: usize| -> Result<[f64; 6], LogError> {
            let mut a = [0.0; 6];
            for (k, v) in a.iter_mut().enumerate() {
                *v = num(from + k)?;
            }
            Ok(a)
        };
        let estop = match &rec[20] {
            "0" => false,
            "1" => true,
            other => return Err(LogError::malformed(line, format!("estop: expected 0 or 1, got `{other}`"))),
        };
        Ok(Self {
            t: num(0)?,
            pose: six(1)?.into(),
            deflection: six(7)?.into(),
            wrench: six(13)?.into(),
            mode: rec[19].parse().map_err(|e| LogError::malformed(line, e))?,
            estop,
            event: rec[21].to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub header: EpisodeHeader,
    pub rows: Vec<EpisodeRow>,
}

impl EpisodeLog {
    pub fn new(header: EpisodeHeader) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn from_samples(header: EpisodeHeader, samples: &[Sample]) -> Self {
        Self { header, rows: samples.iter().map(EpisodeRow::from_sample).collect() }
    }

    pub fn from_run(cfg: &ScenarioConfig, started: impl Into<String>, run: &RunResult) -> Self {
        Self::from_samples(EpisodeHeader::new(cfg, started), &run.samples)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), LogError> {
        writeln!(out, "{}", self.header.line())?;
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(COLUMNS).map_err(csv_io)?;
        for row in &self.rows {
            w.write_record(row.fields()).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("log is utf-8")
    }

    /// Parses and checks a log: header first, exact column set, rows on the
    /// 20 ms grid starting at zero. The last row may instead carry the stamp
    /// of an e-stop or slip inside the final window.
    pub fn read_from<R: BufRead>(mut input: R) -> Result<Self, LogError> {
        let mut first = String::new();
        if input.read_line(&mut first)? == 0 {
            return Err(LogError::malformed(1, "empty file"));
        }
        let header = EpisodeHeader::parse(&first)?;
        let mut r = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(input);
        let names = r.headers().map_err(|e| LogError::malformed(2, e.to_string()))?;
        if names.iter().ne(COLUMNS) {
            return Err(LogError::malformed(2, format!("expected columns {}", COLUMNS.join(","))));
        }
        let mut rows: Vec<EpisodeRow> = Vec::new();
        let mut halted_at = None;
        for (i, rec) in r.records().enumerate() {
            let line = i + 3;
            let rec = rec.map_err(|e| LogError::malformed(line, e.to_string()))?;
            let row = EpisodeRow::parse(&rec, line)?;
            if let Some(at) = halted_at {
                return Err(LogError::malformed(line, format!("row after the halting row on line {at}")));
            }
            let on_grid = (row.t - i as f64 * COMMAND_PERIOD).abs() <= GRID_TOL;
            let in_last_window = i > 0 && row.t > (i - 1) as f64 * COMMAND_PERIOD && row.t < i as f64 * COMMAND_PERIOD;
            if !on_grid {
                let halted = row.estop || row.event.split(';').any(|e| e == "slip" || e.starts_with("estop:"));
                if !(halted && in_last_window) {
                    return Err(LogError::malformed(line, format!("t_s {} is off the {COMMAND_PERIOD} s grid", row.t)));
                }
                halted_at = Some(line);
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn parse(text: &str) -> Result<Self, LogError> {
        Self::read_from(text.as_bytes())
    }

    pub fn duration(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.t)
    }
}

fn csv_io(e: csv::Error) -> LogError {
    LogError::Io(e.into())
}

/// Replacement for a log's recorded mode channel.
#[derive(Debug, Clone, PartialEq)]
pub enum ModeOverride {
    Fixed(StiffnessMode),
    /// Lever positions from `t` onward; before the first entry the
    /// scenario's initial mode applies.
    Schedule(Vec<ModeEvent>),
}

impl ModeOverride {
    /// Accepts a mode name or a JSON array of `{t, mode}` entries.
    pub fn parse(text: &str) -> Result<Self, String> {
        if let Ok(m) = text.trim().parse::<StiffnessMode>() {
            return Ok(ModeOverride::Fixed(m));
        }
        serde_json::from_str::<Vec<ModeEvent>>(text)
            .map(ModeOverride::Schedule)
            .map_err(|e| format!("expected a stiffness mode or a JSON schedule: {e}"))
    }
}

#[derive(Debug, Clone)]
pub struct ReplayResult {
    pub log: EpisodeLog,
    pub status: ScenarioStatus,
    pub peak_force: f64,
}

/// Feeds the log's poses back as commands, one per 20 ms window, and
/// records a new log with the same header. The lever follows the recorded
/// mode column unless overridden.
pub fn replay(log: &EpisodeLog, cfg: &ScenarioConfig, over: Option<&ModeOverride>) -> Result<ReplayResult, LogError> {
    if log.header.spec_version != SPEC_VERSION {
        return Err(LogError::VersionMismatch { found: format!("v{}", log.header.spec_version), expected: SPEC_VERSION });
    }
    let hash = cfg.config_hash();
    if hash != log.header.scenario_hash {
        return Err(LogError::HashMismatch { log: log.header.scenario_hash.clone(), config: hash });
    }
    let levers: Vec<StiffnessMode> = match over {
        None => log.rows.iter().map(|r| r.mode).collect(),
        Some(ModeOverride::Fixed(m)) => vec![*m; log.rows.len()],
        Some(ModeOverride::Schedule(events)) => {
            check_schedule(cfg, events)?;
            log.rows
                .iter()
                .map(|r| {
                    events.iter().take_while(|e| e.t <= r.t + GRID_TOL).last().map_or(cfg.initial_mode(), |e| e.mode)
                })
                .collect()
        }
    };
    // Seat the lock in the first window's mode so the replay does not open
    // with a carrier transit the recording never had.
    let mut run_cfg = cfg.clone();
    if let Some(&first) = levers.first() {
        run_cfg.mode_schedule = vec![ModeEvent { t: 0.0, mode: first }];
    }
    let windows: Vec<_> = log.rows.iter().zip(&levers).map(|(r, &m)| (r.pose, Some(m))).collect();
    let run = run_commands(&run_cfg, &windows)?;
    Ok(ReplayResult {
        log: EpisodeLog::from_samples(log.header.clone(), &run.samples),
        status: run.status,
        peak_force: run.peak_force,
    })
}

fn check_schedule(cfg: &ScenarioConfig, events: &[ModeEvent]) -> Result<(), LogError> {
    if cfg.mode_schedule.iter().any(|e| e.t > 0.0) {
        return Err(LogError::ScheduleConflict(
            "the scenario carries its own mode schedule; drop it or use a fixed mode override".into(),
        ));
    }
    for (i, e) in events.iter().enumerate() {
        if !e.t.is_finite() || e.t < 0.0 {
            return Err(LogError::ScheduleConflict(format!("entry {i}: t must be finite and non-negative")));
        }
    }
    for (i, w) in events.windows(2).enumerate() {
        if w[1].t < w[0].t {
            return Err(LogError::ScheduleConflict(format!("entry {}: times must be non-decreasing", i + 1)));
        }
        if w[1].t == w[0].t && w[1].mode != w[0].mode {
            return Err(LogError::ScheduleConflict(format!("entries {i} and {} give different modes at t={}", i + 1, w[0].t)));
        }
    }
    Ok(())
}
