//! Line-delimited JSON session service over TCP, one thread per connection.
//! Sessions opened here are logged with driver `human`.

use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use super::protocol::{ChecklistDelta, CommandFrame, EventFrame, SessionCommand, SessionEvent, PROTOCOL_VERSION};
use super::store::EpisodeStore;
use super::{Session, SessionConfig, SessionError};
use crate::trajectory::TrajectoryLog;

pub const HUMAN_DRIVER: &str = "human";

/// Protocol state of one client: at most one live session at a time.
pub struct Connection {
    store: Arc<EpisodeStore>,
    config: SessionConfig,
    log_dir: Option<PathBuf>,
    session: Option<Session>,
    last_seq: u64,
    /// Logs of sessions this connection has closed.
    pub logs: Vec<TrajectoryLog>,
}

impl Connection {
    pub fn new(store: Arc<EpisodeStore>, config: SessionConfig, log_dir: Option<PathBuf>) -> Self {
        Self { store, config, log_dir, session: None, last_seq: 0, logs: Vec::new() }
    }

    pub fn hello(&self) -> EventFrame {
        EventFrame { seq: 0, event: SessionEvent::Hello { protocol_version: PROTOCOL_VERSION, episodes: self.store.ids() } }
    }

    /// Answers one command line with exactly one event.
    pub fn handle_line(&mut self, line: &str) -> EventFrame {
        let value: serde_json::Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => return EventFrame::error(0, "malformed", e.to_string()),
        };
        let Some(seq) = value.get("seq").and_then(serde_json::Value::as_u64) else {
            return EventFrame::error(0, "malformed", "missing seq");
        };
        if seq <= self.last_seq {
            return EventFrame::error(seq, "out_of_order", format!("seq must exceed {}", self.last_seq));
        }
        self.last_seq = seq;
        let frame: CommandFrame = match serde_json::from_value(value) {
            Ok(f) => f,
            Err(e) => return EventFrame::error(seq, "malformed", e.to_string()),
        };
        match self.handle(frame.command) {
            Ok(event) => EventFrame { seq: frame.seq, event },
            Err(e) => {
                let code = match e {
                    SessionError::UnknownEpisode(_) => "unknown_episode",
                    SessionError::SessionClosed => "session_closed",
                    SessionError::NoEpisode => "no_episode",
                    _ => "internal",
                };
                EventFrame::error(frame.seq, code, e.to_string())
            }
        }
    }

    fn observation_event(s: &Session) -> SessionEvent {
        let ep = s.episode();
        SessionEvent::Observation {
            episode_id: ep.id.clone(),
            observation: s.observe(),
            checklist: ep.checklist.iter().map(ToString::to_string).collect(),
            satisfied: s.checklist_flags().to_vec(),
            total_actions: s.world().agent.total_actions,
            nav_steps: s.world().agent.nav_steps,
            manip_steps: s.world().agent.manip_steps,
        }
    }

    fn handle(&mut self, cmd: SessionCommand) -> Result<SessionEvent, SessionError> {
        match cmd {
            SessionCommand::Reset { episode_id } => {
                let ep = self.store.get(&episode_id)?.clone();
                self.close_session()?;
                let s = Session::new(ep, self.config.clone(), HUMAN_DRIVER);
                let event = Self::observation_event(&s);
                self.session = Some(s);
                Ok(event)
            }
            SessionCommand::Step { action } => {
                let s = self.session.as_mut().ok_or(SessionError::NoEpisode)?;
                let before = s.checklist_flags().to_vec();
                let r = s.step(&action)?;
                Ok(SessionEvent::ActionResult {
                    action_index: r.record.action_index,
                    metric_step: r.record.metric_step,
                    result: r.result,
                    observation: r.observation,
                    done: r.done,
                    nav_steps: s.world().agent.nav_steps,
                    manip_steps: s.world().agent.manip_steps,
                    checklist: ChecklistDelta::between(&before, s.checklist_flags()),
                })
            }
            SessionCommand::Observe => Ok(Self::observation_event(self.session.as_ref().ok_or(SessionError::NoEpisode)?)),
            SessionCommand::Snapshot => {
                let s = self.session.as_ref().ok_or(SessionError::NoEpisode)?;
                let world = serde_json::from_str(&s.snapshot()).expect("snapshot is JSON");
                Ok(SessionEvent::Snapshot { world })
            }
            SessionCommand::End => {
                let s = self.session.as_mut().ok_or(SessionError::NoEpisode)?;
                let report = s.end();
                let log_file = self.close_session()?.map(|p| p.display().to_string());
                Ok(SessionEvent::Metrics { report, log_file })
            }
        }
    }

    /// Ends the live session, keeping and writing its log.
    pub fn close_session(&mut self) -> Result<Option<PathBuf>, SessionError> {
        let Some(s) = self.session.take() else { return Ok(None) };
        let log = s.into_log();
        let path = match &self.log_dir {
            Some(dir) => Some(write_log(dir, &log)?),
            None => None,
        };
        self.logs.push(log);
        Ok(path)
    }
}

/// Writes a log under a fresh `<episode>-<driver>-<n>.jsonl` name.
pub fn write_log(dir: &Path, log: &TrajectoryLog) -> Result<PathBuf, SessionError> {
    std::fs::create_dir_all(dir)?;
    for n in 0.. {
        let path = dir.join(format!("{}-{}-{n}.jsonl", log.header.episode_id, log.header.driver));
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(f) => {
                let mut w = std::io::BufWriter::new(f);
                log.write_jsonl(&mut w)?;
                w.flush()?;
                return Ok(path);
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    unreachable!("unbounded search for a free file name")
}

/// Runs the protocol over any line stream until the client disconnects.
pub fn serve_stream(reader: impl BufRead, mut writer: impl Write, conn: &mut Connection) -> std::io::Result<()> {
    let send = |w: &mut dyn Write, f: &EventFrame| -> std::io::Result<()> {
        writeln!(w, "{}", serde_json::to_string(f).expect("events serialize"))?;
        w.flush()
    };
    send(&mut writer, &conn.hello())?;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event = conn.handle_line(&line);
        send(&mut writer, &event)?;
    }
    Ok(())
}

pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks until the accept loop ends.
    pub fn join(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    /// Stops accepting new connections. Open connections run to completion.
    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn handle_client(stream: TcpStream, mut conn: Connection) {
    let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
    log::info!("client {peer} connected");
    // Request/response traffic: small frames must not wait for coalescing.
    if let Err(e) = stream.set_nodelay(true) {
        log::warn!("client {peer}: {e}");
    }
    let reader = match stream.try_clone() {
        Ok(s) => BufReader::new(s),
        Err(e) => {
            log::warn!("client {peer}: {e}");
            return;
        }
    };
    if let Err(e) = serve_stream(reader, &stream, &mut conn) {
        log::warn!("client {peer}: {e}");
    }
    if let Err(e) = conn.close_session() {
        log::warn!("client {peer}: could not write log: {e}");
    }
    log::info!("client {peer} disconnected");
}

/// Binds and starts accepting clients on a background thread.
pub fn serve(
    addr: impl ToSocketAddrs + std::fmt::Display,
    store: Arc<EpisodeStore>,
    config: SessionConfig,
    log_dir: Option<PathBuf>,
) -> Result<ServerHandle, SessionError> {
    let listener =
        TcpListener::bind(&addr).map_err(|source| SessionError::BindFailure { addr: addr.to_string(), source })?;
    let local = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&stop);
    let thread = std::thread::spawn(move || {
        for stream in listener.incoming() {
            if flag.load(Ordering::SeqCst) {
                break;
            }
            match stream {
                Ok(s) => {
                    let conn = Connection::new(Arc::clone(&store), config.clone(), log_dir.clone());
                    std::thread::spawn(move || handle_client(s, conn));
                }
                Err(e) => log::warn!("accept failed: {e}"),
            }
        }
    });
    Ok(ServerHandle { addr: local, stop, thread: Some(thread) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate_layout, Action};
    use crate::task::{generate_episode, Scenario};

    fn store() -> Arc<EpisodeStore> {
        Arc::new(EpisodeStore::new([generate_episode(&generate_layout(8), Scenario::WorkStudy, 8).unwrap()]))
    }

    fn cmd(seq: u64, c: SessionCommand) -> String {
        serde_json::to_string(&CommandFrame { seq, command: c }).unwrap()
    }

    #[test]
    fn malformed_and_out_of_order_commands_keep_the_session() {
        let st = store();
        let id = st.ids()[0].clone();
        let mut c = Connection::new(st, SessionConfig::default(), None);
        assert!(matches!(c.hello().event, SessionEvent::Hello { protocol_version: PROTOCOL_VERSION, .. }));
        let e = c.handle_line(&cmd(1, SessionCommand::Reset { episode_id: id }));
        assert!(matches!(e.event, SessionEvent::Observation { .. }));
        let e = c.handle_line("{\"seq\": 2, \"command\": \"fly\"}");
        assert_eq!(e.seq, 2);
        assert!(matches!(e.event, SessionEvent::Error { .. }));
        let e = c.handle_line(&cmd(2, SessionCommand::Observe));
        assert!(matches!(&e.event, SessionEvent::Error { code, .. } if code == "out_of_order"));
        let e = c.handle_line(&cmd(3, SessionCommand::Step { action: Action::RotateLeft }));
        assert!(matches!(e.event, SessionEvent::ActionResult { action_index: 0, .. }));
    }

    #[test]
    fn unknown_episode_is_an_error_event() {
        let mut c = Connection::new(store(), SessionConfig::default(), None);
        let e = c.handle_line(&cmd(1, SessionCommand::Reset { episode_id: "missing".into() }));
        assert!(matches!(&e.event, SessionEvent::Error { code, .. } if code == "unknown_episode"));
        let e = c.handle_line(&cmd(2, SessionCommand::Step { action: Action::Stop }));
        assert!(matches!(&e.event, SessionEvent::Error { code, .. } if code == "no_episode"));
    }
}
