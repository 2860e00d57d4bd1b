use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::sync::Arc;

use longact::session::*;
use longact::sim::{generate_layout, Action};
use longact::task::{generate_episode, Episode, Scenario};
use longact::trajectory::TrajectoryLog;

fn episode(seed: u64) -> Episode {
    generate_episode(&generate_layout(seed), Scenario::ALL[(seed % 4) as usize], seed).unwrap()
}

/// Step totals straight from the raw records: five successful moves make a
/// navigation step, each successful turn or tilt is one, each successful
/// interaction is one manipulation step.
fn recount(log: &TrajectoryLog) -> (u64, u64) {
    let (mut quanta, mut nav, mut manip) = (0u64, 0u64, 0u64);
    for r in log.records.iter().filter(|r| r.result.success) {
        match r.action {
            Action::MoveAhead | Action::MoveBack | Action::MoveLeft | Action::MoveRight => quanta += 1,
            Action::RotateLeft | Action::RotateRight | Action::LookUp | Action::LookDown => nav += 1,
            Action::Stop => {}
            _ => manip += 1,
        }
    }
    (nav + quanta / 5, manip)
}

struct Client {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    seq: u64,
}

impl Client {
    fn connect(addr: std::net::SocketAddr) -> (Self, EventFrame) {
        let writer = TcpStream::connect(addr).unwrap();
        writer.set_nodelay(true).unwrap();
        let mut c = Client { reader: BufReader::new(writer.try_clone().unwrap()), writer, seq: 0 };
        let hello = c.read();
        (c, hello)
    }

    fn read(&mut self) -> EventFrame {
        let mut line = String::new();
        self.reader.read_line(&mut line).unwrap();
        serde_json::from_str(&line).unwrap()
    }

    fn raw(&mut self, line: &str) -> EventFrame {
        writeln!(self.writer, "{line}").unwrap();
        self.read()
    }

    fn send(&mut self, command: SessionCommand) -> EventFrame {
        self.seq += 1;
        let ev = self.raw(&serde_json::to_string(&CommandFrame { seq: self.seq, command }).unwrap());
        assert_eq!(ev.seq, self.seq, "event correlates with its command");
        ev
    }
}

#[test]
fn teleop_session_over_tcp_replays_offline() {
    let ep = episode(21);
    let store = Arc::new(EpisodeStore::new([ep.clone()]));
    let dir = tempfile::tempdir().unwrap();
    let server = serve("127.0.0.1:0", store, SessionConfig::default(), Some(dir.path().to_owned())).unwrap();

    let (mut c, hello) = Client::connect(server.local_addr());
    assert_eq!(hello.seq, 0);
    assert!(matches!(hello.event, SessionEvent::Hello { protocol_version: PROTOCOL_VERSION, .. }));

    let ev = c.send(SessionCommand::Reset { episode_id: ep.id.clone() });
    assert!(matches!(ev.event, SessionEvent::Observation { .. }));

    let bad = c.raw("this is not json");
    assert!(matches!(bad.event, SessionEvent::Error { .. }));

    let mut last_satisfied = 0;
    for a in ep.witness_plan.iter().chain([&Action::Stop]) {
        match c.send(SessionCommand::Step { action: a.clone() }).event {
            SessionEvent::ActionResult { result, checklist, .. } => {
                assert!(result.success, "{result:?}");
                assert!(checklist.satisfied >= last_satisfied);
                last_satisfied = checklist.satisfied;
            }
            other => panic!("unexpected {other:?}"),
        }
    }
    let SessionEvent::Metrics { report, log_file } = c.send(SessionCommand::End).event else { panic!("no metrics") };
    assert!(report.sr);

    let log = TrajectoryLog::read_jsonl(BufReader::new(std::fs::File::open(log_file.unwrap()).unwrap())).unwrap();
    assert_eq!(log.header.driver, "human");
    assert_eq!(replay(&ep, &log, &SessionConfig::default()).unwrap(), report);
    assert_eq!(recount(&log), (report.nav_steps, report.manip_steps));
    server.shutdown();
}

#[test]
fn concurrent_clients_do_not_share_state() {
    let eps = [episode(22), episode(23)];
    let store = Arc::new(EpisodeStore::new(eps.clone()));
    let server = serve("127.0.0.1:0", store, SessionConfig::default(), None).unwrap();
    let addr = server.local_addr();
    let handles: Vec<_> = eps
        .iter()
        .cloned()
        .map(|ep| {
            std::thread::spawn(move || {
                let (mut c, _) = Client::connect(addr);
                c.send(SessionCommand::Reset { episode_id: ep.id.clone() });
                for a in ep.witness_plan.iter().take(40) {
                    c.send(SessionCommand::Step { action: a.clone() });
                }
                match c.send(SessionCommand::Observe).event {
                    SessionEvent::Observation { episode_id, total_actions, .. } => (episode_id, total_actions),
                    other => panic!("unexpected {other:?}"),
                }
            })
        })
        .collect();
    for (h, ep) in handles.into_iter().zip(&eps) {
        let (id, n) = h.join().unwrap();
        assert_eq!(id, ep.id);
        assert_eq!(n, 40.min(ep.witness_plan.len() as u64));
    }
    server.shutdown();
}

#[test]
fn binding_a_taken_port_fails() {
    let server = serve("127.0.0.1:0", Arc::new(EpisodeStore::default()), SessionConfig::default(), None).unwrap();
    let again = serve(server.local_addr(), Arc::new(EpisodeStore::default()), SessionConfig::default(), None);
    assert!(matches!(again, Err(SessionError::BindFailure { .. })));
    server.shutdown();
}

#[test]
fn agent_logs_replay_and_recount() {
    for seed in 30..34 {
        let ep = episode(seed);
        let mut r = ReasonerKind::GreedyTemplate.build(&ep);
        let run = run_agent_episode(&ep, r.as_mut(), &Default::default(), &[]);
        let log = TrajectoryLog::from_jsonl(&run.log.to_jsonl()).unwrap();
        assert_eq!(replay(&ep, &log, &SessionConfig::default()).unwrap(), run.report);
        assert_eq!(recount(&log), (run.report.nav_steps, run.report.manip_steps));
        assert!(log.records.windows(2).all(|w| w[0].satisfied <= w[1].satisfied));
    }
}

#[test]
fn cap_is_enforced_by_the_session() {
    let ep = episode(5);
    let mut s = Session::new(ep, SessionConfig::default(), "script");
    let mut last = None;
    for i in 1..=16_000u64 {
        let r = s.step(&Action::RotateLeft).unwrap();
        if r.done {
            last = Some((i, r.result.error));
            break;
        }
    }
    assert_eq!(last, Some((16_000, Some(longact::sim::ErrorCode::EpisodeCapExceeded))));
    assert!(matches!(s.step(&Action::RotateLeft), Err(SessionError::SessionClosed)));
}
