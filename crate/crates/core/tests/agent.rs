use longact::agent::*;
use longact::sim::*;
use longact::task::{evaluate_all, generate_episode, Scenario};

/// A layout whose first sliceable object sits inside a closed fridge.
fn bread_in_fridge(seed: u64) -> (WorldState, String) {
    let mut layout = generate_layout(seed);
    let fridge = layout.objects.iter().find(|o| o.category == "fridge").expect("kitchen has a fridge").id;
    let food = layout.objects.iter_mut().find(|o| o.has(Affordance::Sliceable)).expect("something sliceable");
    food.states.parent_receptacle = Some(fridge);
    let label = food.label();
    layout.objects.iter_mut().find(|o| o.id == fridge).unwrap().states.open = Some(false);
    (WorldState::from_layout(layout, SimConfig::default()), format!("Slice the {label}."))
}

/// Passes everything through but fails every slice.
struct NoSlicing(DirectEnv);

impl Environment for NoSlicing {
    fn observation(&self) -> Observation {
        self.0.observation()
    }
    fn step(&mut self, a: &Action) -> StepOutcome {
        if matches!(a, Action::Slice { .. }) {
            let r = self.0.step(&Action::LookDown);
            return StepOutcome { result: ActionResult::fail(ErrorCode::NotReachable, "injected"), ..r };
        }
        self.0.step(a)
    }
    fn annotate(&mut self, d: Option<&str>, g: Option<&str>) {
        self.0.annotate(d, g)
    }
    fn is_done(&self) -> bool {
        self.0.is_done()
    }
    fn floor_plan(&self) -> HouseLayout {
        self.0.floor_plan()
    }
}

fn no_seeds() -> AgentConfig {
    AgentConfig { seed_experience: false, ..AgentConfig::default() }
}

#[test]
fn persistent_failure_refines_twice_then_replans() {
    let (world, instruction) = bread_in_fridge(3);
    let mut env = NoSlicing(DirectEnv::new(world));
    let out = run_episode(&mut env, &instruction, &mut GreedyTemplateReasoner::default(), &AgentConfig::default(), &[]);
    let kinds: Vec<&str> = out
        .directives
        .iter()
        .filter(|d| d.subgoal_kind == "Slice")
        .take(3)
        .map(|d| match d.directive {
            CriticDirective::Refine { .. } => "refine",
            CriticDirective::Replan { .. } => "replan",
            CriticDirective::Pass => "pass",
        })
        .collect();
    assert_eq!(kinds, ["refine", "refine", "replan"]);
    assert_eq!(out.dag.skipped.len(), 1, "goal given up after the replan budget");
    assert!(env.0.annotations.iter().any(|(_, d, _)| d.as_deref().is_some_and(|d| d.starts_with("Replan"))));
}

#[test]
fn distilled_experience_cuts_failures_next_episode() {
    let (world, instruction) = bread_in_fridge(3);
    let mut env = DirectEnv::new(world.clone());
    let mut r = GreedyTemplateReasoner::default();
    let first = run_episode(&mut env, &instruction, &mut r, &no_seeds(), &[]);
    assert!(first.failed_attempts > 0);
    assert!(first.dag.completed.len() == 1, "{first:?}");
    assert!(first.experience.iter().any(|e| e.pattern.subgoal_kind == "Slice"));

    let mut env = DirectEnv::new(world);
    let second = run_episode(&mut env, &instruction, &mut r, &no_seeds(), &first.experience);
    assert!(second.failed_attempts < first.failed_attempts, "{} vs {}", second.failed_attempts, first.failed_attempts);
    assert!(env.world.objects.values().any(|o| o.states.sliced == Some(true)));
}

#[test]
fn without_carry_over_nothing_is_learned() {
    let (world, instruction) = bread_in_fridge(3);
    let cfg = AgentConfig { cross_episode_experience: false, ..no_seeds() };
    let mut env = DirectEnv::new(world);
    let out = run_episode(&mut env, &instruction, &mut GreedyTemplateReasoner::default(), &cfg, &[]);
    assert!(out.experience.is_empty());
}

#[test]
fn empty_plan_only_stops() {
    let mut env = DirectEnv::new(WorldState::from_layout(generate_layout(1), SimConfig::default()));
    let out = run_episode(&mut env, "Do nothing.", &mut NoopReasoner, &AgentConfig::default(), &[]);
    assert!(out.goal_order.is_empty());
    assert_eq!(env.world.agent.total_actions, 1);
    assert_eq!(env.world.agent.metric_steps(), 0);
    assert!(env.world.terminated);
}

#[test]
fn random_policy_stops_at_the_cap() {
    let cfg = SimConfig { action_cap: 200, ..SimConfig::default() };
    let mut env = DirectEnv::new(WorldState::from_layout(generate_layout(2), cfg));
    run_episode(&mut env, "anything", &mut RandomReasoner::new(7, 10_000), &AgentConfig::default(), &[]);
    assert_eq!(env.world.agent.total_actions, 200);
    assert!(env.world.terminated);
}

#[test]
fn oracle_plan_reaches_success() {
    let ep = generate_episode(&generate_layout(11), Scenario::DiningKitchen, 11).unwrap();
    let mut env = DirectEnv::new(WorldState::from_layout(ep.layout.clone(), SimConfig::default()));
    let out = run_episode(&mut env, &ep.instruction_detailed, &mut OracleReasoner::new(&ep), &AgentConfig::default(), &[]);
    assert!(out.error.is_none());
    assert!(evaluate_all(&env.world, &ep.checklist).iter().all(|b| *b));
    assert!(out.dag.respects_order(&out.goal_order));
}
