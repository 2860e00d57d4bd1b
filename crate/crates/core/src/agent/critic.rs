//! Closed-loop supervision: Pass, Refine or Replan after each primitive,
//! plus the experience pool of resolved failures.

use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::memory::{EpisodicEvent, EpisodicMemory, ExperienceRule, Remedy, RulePattern};
use crate::sim::{Action, ActionResult, ErrorCode};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "directive")]
pub enum CriticDirective {
    Pass,
    Refine { hint: String },
    Replan { reason: String },
}

impl std::fmt::Display for CriticDirective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CriticDirective::Pass => write!(f, "Pass"),
            CriticDirective::Refine { hint } => write!(f, "Refine({hint})"),
            CriticDirective::Replan { reason } => write!(f, "Replan({reason})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FailureSignature {
    pub subgoal_kind: String,
    pub error: ErrorCode,
    /// Category of the object acted on, or empty.
    pub context: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperiencePoolEntry {
    pub signature: FailureSignature,
    pub resolution: Remedy,
    pub validated: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperiencePool {
    pub entries: Vec<ExperiencePoolEntry>,
}

impl ExperiencePool {
    pub fn validated_resolution(&self, sig: &FailureSignature) -> Option<Remedy> {
        self.entries.iter().find(|e| e.validated && e.signature == *sig).map(|e| e.resolution)
    }

    /// Notes that `remedy` is being tried for `sig`.
    pub fn record_attempt(&mut self, sig: &FailureSignature, remedy: Remedy) {
        if !self.entries.iter().any(|e| e.signature == *sig && e.resolution == remedy) {
            self.entries.push(ExperiencePoolEntry { signature: sig.clone(), resolution: remedy, validated: false });
        }
    }

    /// The retry after `remedy` succeeded.
    pub fn validate(&mut self, sig: &FailureSignature, remedy: Remedy) -> Option<&ExperiencePoolEntry> {
        let e = self.entries.iter_mut().find(|e| e.signature == *sig && e.resolution == remedy)?;
        e.validated = true;
        Some(e)
    }
}

/// Everything the critic sees about one primitive outcome.
pub struct CriticContext<'a> {
    pub subgoal_kind: &'a str,
    pub subgoal: String,
    pub action: Option<&'a Action>,
    pub result: &'a ActionResult,
    /// Consecutive failures of this subgoal, counting this one.
    pub attempt: usize,
    pub context: String,
}

impl CriticContext<'_> {
    pub fn signature(&self) -> Option<FailureSignature> {
        self.result.error.map(|error| FailureSignature {
            subgoal_kind: self.subgoal_kind.to_owned(),
            error,
            context: self.context.clone(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Review {
    pub directive: CriticDirective,
    /// Local fix attached to a Refine.
    pub remedy: Option<Remedy>,
    pub diagnostic: String,
}

/// Local fixes to try for each failure code, in order.
pub fn remedies_for(code: ErrorCode) -> &'static [Remedy] {
    use Remedy::*;
    match code {
        ErrorCode::NotVisible => &[RotateToward, OpenContainer],
        ErrorCode::NotReachable => &[StepCloser, RotateToward],
        ErrorCode::Collision => &[ReplanPath],
        ErrorCode::HandFull => &[PutDownHeld],
        ErrorCode::NoKnife => &[FetchKnife],
        ErrorCode::ClosedReceptacle => &[OpenContainer],
        ErrorCode::InvalidTarget => &[RotateToward, PlaceOnSurface],
        ErrorCode::HandEmpty => &[StepCloser],
        ErrorCode::EpisodeCapExceeded | ErrorCode::EpisodeTerminated => &[],
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Critic {
    /// Refine directives per subgoal before escalating to Replan.
    pub refine_budget: usize,
    pub pool: ExperiencePool,
}

impl Critic {
    pub fn new(refine_budget: usize) -> Self {
        Self { refine_budget, pool: ExperiencePool::default() }
    }

    pub fn review(&self, ctx: &CriticContext<'_>) -> Review {
        let Some(sig) = ctx.signature() else {
            return Review { directive: CriticDirective::Pass, remedy: None, diagnostic: String::new() };
        };
        let why = format!("{} failed during `{}`: {}", ctx.action.map_or("skill", Action::name), ctx.subgoal, ctx.result.message);
        let table = remedies_for(sig.error);
        if table.is_empty() {
            return Review { directive: CriticDirective::Replan { reason: why.clone() }, remedy: None, diagnostic: why };
        }
        if ctx.attempt == 1 {
            if let Some(r) = self.pool.validated_resolution(&sig) {
                return Review {
                    directive: CriticDirective::Refine { hint: r.text().into() },
                    remedy: Some(r),
                    diagnostic: format!("{why}; known fix"),
                };
            }
        }
        if ctx.attempt <= self.refine_budget {
            let r = table[(ctx.attempt - 1) % table.len()];
            Review { directive: CriticDirective::Refine { hint: r.text().into() }, remedy: Some(r), diagnostic: why }
        } else {
            let reason = format!("{} consecutive failures of `{}`", ctx.attempt, ctx.subgoal);
            Review { directive: CriticDirective::Replan { reason }, remedy: None, diagnostic: why }
        }
    }
}

/// Writes a validated resolution into episodic experience, once per pattern.
pub fn distill_experience(entry: &ExperiencePoolEntry, mut epi: EpisodicMemory) -> Result<EpisodicMemory, AgentError> {
    if !entry.validated {
        return Err(AgentError::NotValidated);
    }
    epi.record(EpisodicEvent::Experience(ExperienceRule {
        pattern: RulePattern { subgoal_kind: entry.signature.subgoal_kind.clone(), error: entry.signature.error },
        guidance: entry.resolution.text().into(),
        remedy: entry.resolution,
        origin_episode: entry.signature.context.clone(),
    }));
    Ok(epi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn review(c: &Critic, code: Option<ErrorCode>, attempt: usize) -> Review {
        let result = match code {
            Some(e) => ActionResult::fail(e, "x"),
            None => ActionResult::ok("ok"),
        };
        c.review(&CriticContext {
            subgoal_kind: "PickUp",
            subgoal: "pick up object 3".into(),
            action: None,
            result: &result,
            attempt,
            context: "mug".into(),
        })
    }

    #[test]
    fn success_passes() {
        assert_eq!(review(&Critic::new(2), None, 0).directive, CriticDirective::Pass);
    }

    #[test]
    fn first_not_visible_rotates() {
        let r = review(&Critic::new(2), Some(ErrorCode::NotVisible), 1);
        assert_eq!(r.directive, CriticDirective::Refine { hint: "rotate toward target".into() });
    }

    #[test]
    fn escalates_after_budget() {
        let c = Critic::new(2);
        let kinds: Vec<_> = (1..=3).map(|a| review(&c, Some(ErrorCode::NotVisible), a).directive).collect();
        assert!(matches!(kinds[0], CriticDirective::Refine { .. }));
        assert!(matches!(kinds[1], CriticDirective::Refine { .. }));
        assert!(matches!(kinds[2], CriticDirective::Replan { .. }));
    }

    #[test]
    fn distillation_requires_validation_and_dedups() {
        let sig = FailureSignature { subgoal_kind: "Slice".into(), error: ErrorCode::InvalidTarget, context: "bread".into() };
        let mut e = ExperiencePoolEntry { signature: sig, resolution: Remedy::PlaceOnSurface, validated: false };
        assert_eq!(distill_experience(&e, EpisodicMemory::default()), Err(AgentError::NotValidated));
        e.validated = true;
        let once = distill_experience(&e, EpisodicMemory::default()).unwrap();
        let twice = distill_experience(&e, once.clone()).unwrap();
        assert_eq!(once.experience.len(), 1);
        assert_eq!(once, twice);
    }
}
