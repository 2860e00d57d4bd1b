//! Reasoner backed by an outside process speaking newline-delimited JSON.
//!
//! Each request is one line `{"schema_version", "role", "payload"}` and each
//! reply one line `{"result": ...}`. A reply that fails to parse is retried
//! once with the parse error attached as `"error"`.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::critic::{CriticContext, Review};
use super::dag::{Goal, GoalDag};
use super::reasoner::{DecomposeRequest, Reasoner, SkillCall};
use super::refine::{RefinedGoal, SubGoal};
use super::AgentError;
use crate::memory::{EpisodicMemory, ExperienceRule, HistoryEntry};
use crate::sim::{Action, ActionResult, Observation};

pub const REASONER_SCHEMA_VERSION: u32 = 1;

/// History entries sent along with a refine request.
const HISTORY_WINDOW: usize = 32;

/// Sends one request line and returns one reply line.
pub trait Transport {
    fn exchange(&mut self, line: &str) -> Result<String, AgentError>;
}

pub struct ProcessTransport {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl ProcessTransport {
    pub fn spawn(program: &str, args: &[String]) -> std::io::Result<Self> {
        let mut child = Command::new(program).args(args).stdin(Stdio::piped()).stdout(Stdio::piped()).spawn()?;
        let stdin = child.stdin.take().ok_or_else(|| std::io::Error::other("no stdin"))?;
        let stdout = BufReader::new(child.stdout.take().ok_or_else(|| std::io::Error::other("no stdout"))?);
        Ok(Self { child, stdin, stdout })
    }
}

impl Transport for ProcessTransport {
    fn exchange(&mut self, line: &str) -> Result<String, AgentError> {
        let io = |e: std::io::Error| AgentError::Reasoner(e.to_string());
        writeln!(self.stdin, "{line}").map_err(io)?;
        self.stdin.flush().map_err(io)?;
        let mut reply = String::new();
        if self.stdout.read_line(&mut reply).map_err(io)? == 0 {
            return Err(AgentError::Reasoner("reasoner process closed its output".into()));
        }
        Ok(reply)
    }
}

impl Drop for ProcessTransport {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

#[derive(Serialize)]
struct Request<'a, P: Serialize> {
    schema_version: u32,
    role: &'a str,
    payload: &'a P,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Deserialize)]
#[serde(bound = "T: DeserializeOwned")]
struct Reply<T> {
    result: T,
}

#[derive(Serialize)]
struct RefinePayload<'a> {
    goal: &'a Goal,
    history: &'a [HistoryEntry],
    experience: &'a [ExperienceRule],
}

#[derive(Serialize)]
struct TranslatePayload<'a> {
    subgoal: &'a SubGoal,
    observation: &'a Observation,
}

#[derive(Serialize)]
struct CritiquePayload<'a> {
    subgoal_kind: &'a str,
    subgoal: &'a str,
    action: Option<&'a Action>,
    result: &'a ActionResult,
    attempt: usize,
    context: &'a str,
}

pub struct ExternalReasoner<T: Transport> {
    transport: T,
    name: String,
}

impl<T: Transport> ExternalReasoner<T> {
    pub fn new(transport: T, name: impl Into<String>) -> Self {
        Self { transport, name: name.into() }
    }

    fn call<P: Serialize, R: DeserializeOwned>(&mut self, role: &str, payload: &P) -> Result<R, AgentError> {
        let mut error = None;
        for _ in 0..2 {
            let req = Request { schema_version: REASONER_SCHEMA_VERSION, role, payload, error: error.take() };
            let line = serde_json::to_string(&req).map_err(|e| AgentError::Reasoner(e.to_string()))?;
            let reply = self.transport.exchange(&line)?;
            match serde_json::from_str::<Reply<R>>(reply.trim()) {
                Ok(r) => return Ok(r.result),
                Err(e) => error = Some(format!("unparseable {role} reply: {e}")),
            }
        }
        Err(AgentError::Reasoner(error.unwrap_or_default()))
    }
}

impl<T: Transport> Reasoner for ExternalReasoner<T> {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn decompose(&mut self, req: &DecomposeRequest) -> Result<GoalDag, AgentError> {
        self.call("decompose", req).map_err(|e| AgentError::MalformedPlan(e.to_string()))
    }

    fn refine(&mut self, goal: &Goal, epi: &EpisodicMemory) -> Result<RefinedGoal, AgentError> {
        let start = epi.history.len().saturating_sub(HISTORY_WINDOW);
        let payload = RefinePayload { goal, history: &epi.history[start..], experience: &epi.experience };
        self.call("refine", &payload).map_err(|e| AgentError::MalformedRefinement(e.to_string()))
    }

    fn translate(&mut self, subgoal: &SubGoal, obs: &Observation) -> SkillCall {
        self.call("translate", &TranslatePayload { subgoal, observation: obs })
            .unwrap_or_else(|_| SkillCall::Skill { subgoal: subgoal.clone() })
    }

    fn critique(&mut self, ctx: &CriticContext<'_>) -> Option<Review> {
        let payload = CritiquePayload {
            subgoal_kind: ctx.subgoal_kind,
            subgoal: &ctx.subgoal,
            action: ctx.action,
            result: ctx.result,
            attempt: ctx.attempt,
            context: &ctx.context,
        };
        self.call::<_, Option<Review>>("critique", &payload).ok().flatten()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::reasoner::SceneSummary;
    use std::collections::VecDeque;

    struct Canned {
        replies: VecDeque<String>,
        sent: Vec<String>,
    }

    impl Transport for Canned {
        fn exchange(&mut self, line: &str) -> Result<String, AgentError> {
            self.sent.push(line.to_owned());
            self.replies.pop_front().ok_or_else(|| AgentError::Reasoner("no reply".into()))
        }
    }

    fn req() -> DecomposeRequest {
        DecomposeRequest { instruction: "Open the fridge.".into(), scene: SceneSummary::default(), feedback: None }
    }

    #[test]
    fn malformed_reply_is_retried_once_with_the_error() {
        let t = Canned {
            replies: ["not json".to_owned(), r#"{"result":{"nodes":{},"edges":[]}}"#.to_owned()].into(),
            sent: Vec::new(),
        };
        let mut r = ExternalReasoner::new(t, "canned");
        let dag = r.decompose(&req()).unwrap();
        assert!(dag.nodes.is_empty());
        assert_eq!(r.transport.sent.len(), 2);
        let retry: serde_json::Value = serde_json::from_str(&r.transport.sent[1]).unwrap();
        assert_eq!(retry["role"], "decompose");
        assert!(retry["error"].as_str().unwrap().contains("unparseable"));
    }

    #[test]
    fn two_bad_replies_fail_the_call() {
        let t = Canned { replies: ["{}".to_owned(), "[]".to_owned()].into(), sent: Vec::new() };
        let mut r = ExternalReasoner::new(t, "canned");
        assert!(matches!(r.decompose(&req()), Err(AgentError::MalformedPlan(_))));
    }

    #[test]
    fn translate_falls_back_to_the_skill() {
        let t = Canned { replies: VecDeque::new(), sent: Vec::new() };
        let mut r = ExternalReasoner::new(t, "canned");
        let obs: Observation = crate::sim::WorldState::from_layout(
            crate::sim::generate_layout(1),
            crate::sim::SimConfig::default(),
        )
        .render_observation();
        let sg = SubGoal::PutDownHeld;
        assert_eq!(r.translate(&sg, &obs), SkillCall::Skill { subgoal: sg });
    }
}
