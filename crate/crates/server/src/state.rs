//! Session table shared by every request handler.

use crate::error::ApiError;
use crate::worker::{Control, Outbound, Pacing, Worker};
use claw_core::scenario::{Outcome, ScenarioConfig};
use claw_core::teleop::{EpisodeLog, FollowerSession, Role, TeleopMessage};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};
use tokio::sync::{broadcast, mpsc};

pub const DEFAULT_MAX_SESSIONS: usize = 16;
pub const DEFAULT_LOG_TTL: Duration = Duration::from_secs(3600);
const BROADCAST_DEPTH: usize = 1024;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub max_sessions: usize,
    /// Terminal sessions' episode logs are written here as `<id>.csv`.
    pub log_dir: Option<PathBuf>,
    pub pacing: Pacing,
    /// How long a terminal session is kept in memory.
    pub log_ttl: Duration,
    /// Served at `/`; a placeholder page when unset.
    pub assets_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            max_sessions: DEFAULT_MAX_SESSIONS,
            log_dir: None,
            pacing: Pacing::RealTime { time_scale: 1.0 },
            log_ttl: DEFAULT_LOG_TTL,
            assets_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Idle,
    Running,
    Terminal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDescriptor {
    pub session_id: String,
    pub scenario: ScenarioConfig,
    pub created: String,
    pub state: SessionState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

struct Entry {
    desc: SessionDescriptor,
    control: mpsc::UnboundedSender<Control>,
    out: broadcast::Sender<Outbound>,
    started: bool,
    commander: bool,
    log: Option<EpisodeLog>,
    terminal_at: Option<Instant>,
}

pub struct Shared {
    pub config: ServerConfig,
    sessions: Mutex<BTreeMap<String, Entry>>,
}

impl Shared {
    fn table(&self) -> MutexGuard<'_, BTreeMap<String, Entry>> {
        // A panicking handler must not wedge the whole server.
        self.sessions.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub(crate) fn mark_running(&self, id: &str) {
        if let Some(e) = self.table().get_mut(id) {
            e.desc.state = SessionState::Running;
        }
    }

    pub(crate) fn mark_terminal(&self, id: &str, log: EpisodeLog, outcome: Outcome, reason: &str) {
        let persisted = self.config.log_dir.as_ref().map(|dir| persist(dir, id, &log));
        if let Some(Err(e)) = &persisted {
            tracing::warn!(session = %id, "could not persist episode log: {e}");
        }
        if let Some(e) = self.table().get_mut(id) {
            e.desc.state = SessionState::Terminal;
            e.desc.outcome = Some(outcome);
            e.desc.reason = Some(reason.to_string());
            e.log = Some(log);
            e.terminal_at = Some(Instant::now());
        }
    }
}

fn persist(dir: &std::path::Path, id: &str, log: &EpisodeLog) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(log.to_csv_string().as_bytes())?;
    tmp.persist(dir.join(format!("{id}.csv"))).map_err(|e| e.error)?;
    Ok(())
}

/// Outbound half of an attachment.
pub enum Attachment {
    Live { frames: broadcast::Receiver<Outbound>, commander: Option<Commander> },
    /// The session already ended; its log is streamed back read-only.
    Replay { log: EpisodeLog, outcome: Option<Outcome>, reason: String },
}

/// Command channel of the one client allowed to steer a session. Dropping
/// it frees the slot.
pub struct Commander {
    shared: Arc<Shared>,
    id: String,
    control: mpsc::UnboundedSender<Control>,
}

impl Commander {
    pub fn send(&self, msg: TeleopMessage) -> bool {
        self.control.send(Control::Command(msg)).is_ok()
    }
}

impl Drop for Commander {
    fn drop(&mut self) {
        let _ = self.control.send(Control::CommanderGone);
        if let Some(e) = self.shared.table().get_mut(&self.id) {
            e.commander = false;
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub(crate) shared: Arc<Shared>,
}

impl AppState {
    pub fn new(config: ServerConfig) -> Self {
        Self { shared: Arc::new(Shared { config, sessions: Mutex::new(BTreeMap::new()) }) }
    }

    pub fn config(&self) -> &ServerConfig {
        &self.shared.config
    }

    /// Allocates a paused simulation. Must be called inside a tokio runtime.
    pub fn create_session(&self, scenario: ScenarioConfig) -> Result<SessionDescriptor, ApiError> {
        scenario.validate()?;
        let created = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
        let session = FollowerSession::new(scenario.clone(), created.clone())?;
        let mut table = self.shared.table();
        let live = table.values().filter(|e| e.desc.state != SessionState::Terminal).count();
        if live >= self.shared.config.max_sessions {
            return Err(ApiError::CapacityExceeded { max: self.shared.config.max_sessions });
        }
        let id = uuid::Uuid::new_v4().simple().to_string();
        let desc = SessionDescriptor {
            session_id: id.clone(),
            scenario,
            created,
            state: SessionState::Idle,
            outcome: None,
            reason: None,
        };
        let (tx, rx) = mpsc::unbounded_channel();
        let (out, _) = broadcast::channel(BROADCAST_DEPTH);
        let worker =
            Worker { shared: self.shared.clone(), id: id.clone(), session, rx, out: out.clone(), pacing: self.shared.config.pacing };
        tokio::spawn(worker.run());
        table.insert(
            id,
            Entry { desc: desc.clone(), control: tx, out, started: false, commander: false, log: None, terminal_at: None },
        );
        Ok(desc)
    }

    pub fn list(&self) -> Vec<SessionDescriptor> {
        self.shared.table().values().map(|e| e.desc.clone()).collect()
    }

    pub fn get(&self, id: &str) -> Result<SessionDescriptor, ApiError> {
        self.shared.table().get(id).map(|e| e.desc.clone()).ok_or_else(|| ApiError::UnknownSession(id.into()))
    }

    /// Stops the session's worker and forgets it.
    pub fn delete(&self, id: &str) -> Result<(), ApiError> {
        self.shared.table().remove(id).map(|_| ()).ok_or_else(|| ApiError::UnknownSession(id.into()))
    }

    /// Episode log of a terminal session.
    pub fn log(&self, id: &str) -> Result<Option<EpisodeLog>, ApiError> {
        self.shared.table().get(id).map(|e| e.log.clone()).ok_or_else(|| ApiError::UnknownSession(id.into()))
    }

    /// Subscribes to a session and starts its clock if this is the first
    /// client. `Role::Leader` claims the commander slot.
    pub fn attach(&self, id: &str, role: Role) -> Result<Attachment, ApiError> {
        if role == Role::Follower {
            return Err(ApiError::BadRequest("clients attach as leader or observer".into()));
        }
        let mut table = self.shared.table();
        let e = table.get_mut(id).ok_or_else(|| ApiError::UnknownSession(id.into()))?;
        if e.desc.state == SessionState::Terminal {
            let log = e.log.clone().unwrap_or_else(|| EpisodeLog::new(header_for(&e.desc)));
            return Ok(Attachment::Replay { log, outcome: e.desc.outcome, reason: e.desc.reason.clone().unwrap_or_default() });
        }
        let commander = if role == Role::Leader {
            if e.commander {
                return Err(ApiError::CommanderConflict(id.into()));
            }
            e.commander = true;
            let _ = e.control.send(Control::CommanderJoined);
            Some(Commander { shared: self.shared.clone(), id: id.into(), control: e.control.clone() })
        } else {
            None
        };
        let frames = e.out.subscribe();
        if !e.started {
            e.started = true;
            let _ = e.control.send(Control::Start);
        }
        Ok(Attachment::Live { frames, commander })
    }

    /// Makes the session's stepper panic on its next window.
    #[doc(hidden)]
    pub fn inject_fault(&self, id: &str) -> Result<(), ApiError> {
        let table = self.shared.table();
        let e = table.get(id).ok_or_else(|| ApiError::UnknownSession(id.into()))?;
        let _ = e.control.send(Control::Fault);
        Ok(())
    }

    /// Drops terminal sessions older than the log TTL. Returns how many went.
    pub fn reap_expired(&self) -> usize {
        let ttl = self.shared.config.log_ttl;
        let mut table = self.shared.table();
        let before = table.len();
        table.retain(|_, e| e.terminal_at.is_none_or(|t| t.elapsed() < ttl));
        before - table.len()
    }
}

fn header_for(desc: &SessionDescriptor) -> claw_core::teleop::EpisodeHeader {
    claw_core::teleop::EpisodeHeader::new(&desc.scenario, desc.created.clone())
}
