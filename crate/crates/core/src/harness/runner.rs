use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::record::{GameRecord, RecordHeader, SeedInfo, SCHEMA_VERSION, SEED_DERIVATION};
use super::HarnessError;
use crate::agents::{
    random_team, Action, Agent, AgentAbort, AgentFault, DeductionAgent, Journal, LegalAction, LlmAgent,
    LlmAgentConfig, Observation, RandomAgent, ScriptedEvilAgent, Strategy,
};
use crate::codeact::Sandbox;
use crate::event::Actor;
use crate::game::{BallotSheet, GameConfig, GameState, Phase, PlayerId, Role, Side, NUM_PLAYERS};
use crate::info::{
    knowledge_for, render_action_description, render_global_prompt, GlobalPrompt, KnowledgeView,
    PromptBundle, PromptTemplates,
};
use crate::llm::LlmClient;
use crate::memory::{build_leader_memory, public_facts, GlobalMemory, KeyInfoPatterns, DEFAULT_WINDOW};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of game `index` in a tournament with seed `base`.
pub fn derive_game_seed(base: u64, index: u64) -> u64 {
    splitmix64(base.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Private stream for the agent at `seat`.
pub fn derive_agent_seed(game_seed: u64, seat: PlayerId) -> u64 {
    splitmix64(game_seed ^ (u64::from(seat.get()) << 56))
}

fn runner_seed(game_seed: u64) -> u64 {
    splitmix64(game_seed ^ 0xFA11_BAC0_0000_0000)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AgentSpec {
    Random,
    ScriptedEvil,
    Deduction,
    /// `None` uses the context's default strategy.
    Llm(Option<Strategy>),
}

impl FromStr for AgentSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        match lower.split_once(':') {
            Some(("llm", strat)) => Ok(AgentSpec::Llm(Some(strat.parse()?))),
            None => match lower.as_str() {
                "random" => Ok(AgentSpec::Random),
                "scripted-evil" => Ok(AgentSpec::ScriptedEvil),
                "deduction" => Ok(AgentSpec::Deduction),
                "llm" => Ok(AgentSpec::Llm(None)),
                _ => Err(format!(
                    "unknown agent {s:?} (expected random, scripted-evil, deduction, llm or llm:<strategy>)"
                )),
            },
            _ => Err(format!("unknown agent {s:?}")),
        }
    }
}

impl fmt::Display for AgentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentSpec::Random => f.write_str("random"),
            AgentSpec::ScriptedEvil => f.write_str("scripted-evil"),
            AgentSpec::Deduction => f.write_str("deduction"),
            AgentSpec::Llm(None) => f.write_str("llm"),
            AgentSpec::Llm(Some(s)) => write!(f, "llm:{s}"),
        }
    }
}

/// Which agent plays each seat once roles are dealt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Lineup {
    BySide { just: AgentSpec, evil: AgentSpec },
    BySeat([AgentSpec; NUM_PLAYERS]),
}

impl Lineup {
    pub fn spec_for(&self, seat: PlayerId, side: Side) -> AgentSpec {
        match self {
            Lineup::BySide { just, evil } => match side {
                Side::Just => *just,
                Side::Evil => *evil,
            },
            Lineup::BySeat(seats) => seats[seat.slot()],
        }
    }

    fn uses_llm(&self) -> bool {
        match self {
            Lineup::BySide { just, evil } => [just, evil].iter().any(|s| matches!(s, AgentSpec::Llm(_))),
            Lineup::BySeat(seats) => seats.iter().any(|s| matches!(s, AgentSpec::Llm(_))),
        }
    }
}

/// Shared model resources for LLM seats.
#[derive(Clone)]
pub struct LlmContext {
    pub client: Arc<dyn LlmClient>,
    pub sandbox: Option<Arc<Sandbox>>,
    pub default_strategy: Strategy,
    pub temperature_text: f64,
}

#[derive(Clone)]
pub struct RunSettings {
    pub game: GameConfig,
    pub lineup: Lineup,
    pub window: usize,
    pub templates: Arc<PromptTemplates>,
    pub key_info: Arc<KeyInfoPatterns>,
    pub llm: Option<LlmContext>,
}

impl RunSettings {
    pub fn new(game: GameConfig, lineup: Lineup) -> Self {
        Self {
            game,
            lineup,
            window: DEFAULT_WINDOW,
            templates: Arc::new(PromptTemplates::builtin()),
            key_info: KeyInfoPatterns::builtin(),
            llm: None,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.game.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.lineup.uses_llm() && self.llm.is_none() {
            return Err(HarnessError::Config(
                "an LLM seat needs a model endpoint or a mock fixture".into(),
            ));
        }
        if self.window == 0 {
            return Err(HarnessError::Config("memory window must be at least 1".into()));
        }
        Ok(())
    }
}

fn build_agent(
    spec: AgentSpec,
    view: &KnowledgeView,
    seed: u64,
    settings: &RunSettings,
) -> Result<Box<dyn Agent>, HarnessError> {
    Ok(match spec {
        AgentSpec::Random => Box::new(RandomAgent::new(seed)),
        AgentSpec::Deduction => Box::new(DeductionAgent::new(seed)),
        AgentSpec::ScriptedEvil => Box::new(
            ScriptedEvilAgent::new(view, seed).map_err(|e| HarnessError::Config(e.to_string()))?,
        ),
        AgentSpec::Llm(strategy) => {
            let ctx = settings
                .llm
                .as_ref()
                .ok_or_else(|| HarnessError::Config("LLM seat without a model".into()))?;
            let strategy = strategy.unwrap_or(ctx.default_strategy);
            let mut cfg = LlmAgentConfig::new(strategy);
            cfg.temperature_text = ctx.temperature_text;
            cfg.codeact_template = settings.templates.codeact.clone();
            if strategy == Strategy::Codeact && ctx.sandbox.is_none() {
                return Err(HarnessError::Config("the codeact strategy needs an interpreter".into()));
            }
            Box::new(LlmAgent::new(ctx.client.clone(), ctx.sandbox.clone(), cfg, seed))
        }
    })
}

struct Table<'a> {
    state: GameState,
    settings: &'a RunSettings,
    agents: Vec<Box<dyn Agent>>,
    views: Vec<KnowledgeView>,
    globals: Vec<GlobalPrompt>,
    memories: Vec<GlobalMemory>,
    synced: usize,
    rng: ChaCha8Rng,
}

impl Table<'_> {
    fn sync_memories(&mut self) {
        let log = self.state.log();
        for entry in &log[self.synced..] {
            for m in &mut self.memories {
                m.ingest_event(entry);
            }
        }
        self.synced = log.len();
    }

    fn observe(&mut self, p: PlayerId, legal: LegalAction) -> Result<Observation, HarnessError> {
        self.sync_memories();
        let s = &self.state;
        let action = render_action_description(s, p, &self.settings.templates)?;
        let history = self.memories[p.slot()].render_game_history();
        let view = &self.views[p.slot()];
        let leader_memory = (s.phase() == Phase::TeamSelection).then(|| build_leader_memory(s, view));
        Ok(Observation {
            player: p,
            phase: s.phase(),
            round: s.round(),
            attempt: s.attempt(),
            leader: s.leader(),
            legal,
            bundle: PromptBundle::new(&self.globals[p.slot()], history, action),
            knowledge: view.clone(),
            public_facts: public_facts(s),
            proposal: s.proposal().cloned(),
            leader_memory,
            config: s.config().clone(),
            discussion_so_far: s.discussion().to_vec(),
        })
    }

    fn ask(&mut self, p: PlayerId, legal: LegalAction) -> Result<Action, HarnessError> {
        let obs = self.observe(p, legal)?;
        let mut journal = Journal::new();
        let result = self.agents[p.slot()].act(&obs, &mut journal);
        self.flush(p, &mut journal);
        result.map_err(HarnessError::Abort)
    }

    fn flush(&mut self, p: PlayerId, journal: &mut Journal) {
        for e in journal.drain() {
            self.state.record_external(Actor::Player(p), e.payload, e.text);
        }
    }

    fn illegal(&mut self, p: PlayerId, message: String, raw: String) {
        let mut j = Journal::new();
        j.fault(p, AgentFault::IllegalAction { message }, raw, true);
        self.flush(p, &mut j);
    }

    fn step(&mut self) -> Result<(), HarnessError> {
        match self.state.phase() {
            Phase::LeaderAssignment => {
                self.state.assign_leader()?;
            }
            Phase::TeamSelection => {
                let leader = self.state.leader().expect("leader assigned");
                let size = self.state.current_team_size();
                let action = self.ask(leader, LegalAction::SelectTeam { size })?;
                let attempt = match &action {
                    Action::SelectTeam { members, statement } => {
                        self.state.propose_team(leader, members, statement.clone()).map_err(|e| e.to_string())
                    }
                    other => Err(format!("expected a team, got {other:?}")),
                };
                if let Err(message) = attempt {
                    self.illegal(leader, message, format!("{action:?}"));
                    let team = random_team(&mut self.rng, size);
                    self.state.propose_team(leader, &team, None)?;
                }
            }
            Phase::Discussion => {
                let speaker = self.state.next_speaker().expect("discussion has a speaker");
                let text = match self.ask(speaker, LegalAction::Discuss)? {
                    Action::Discuss { text } => text,
                    other => {
                        self.illegal(speaker, "expected discussion".into(), format!("{other:?}"));
                        String::new()
                    }
                };
                self.state.discuss(speaker, text)?;
            }
            Phase::TeamVote => {
                let mut sheet = BallotSheet::new();
                let mut reasoning = BTreeMap::new();
                for p in PlayerId::all() {
                    match self.ask(p, LegalAction::TeamVote)? {
                        Action::TeamVote { approve, reasoning: r } => {
                            sheet.cast(p, approve);
                            if let Some(r) = r {
                                reasoning.insert(p, r);
                            }
                        }
                        other => {
                            self.illegal(p, "expected a ballot".into(), format!("{other:?}"));
                            sheet.cast(p, false);
                        }
                    }
                }
                self.state.submit_ballots(sheet, reasoning)?;
            }
            Phase::QuestExecution => {
                let team = self.state.quest_team().expect("quest team").clone();
                let mut requested = BTreeMap::new();
                for p in team {
                    match self.ask(p, LegalAction::QuestVote)? {
                        Action::QuestVote { succeed } => {
                            requested.insert(p, succeed);
                        }
                        other => self.illegal(p, "expected a quest vote".into(), format!("{other:?}")),
                    }
                }
                self.state.execute_quest(&requested)?;
            }
            Phase::Assassination => {
                let assassin = self.state.roles().seat_of(Role::Assassin);
                let action = self.ask(assassin, LegalAction::Assassinate)?;
                let done = match &action {
                    Action::Assassinate { target } => {
                        self.state.assassinate(assassin, *target).map(|_| ()).map_err(|e| e.to_string())
                    }
                    other => Err(format!("expected a target, got {other:?}")),
                };
                if let Err(message) = done {
                    self.illegal(assassin, message, format!("{action:?}"));
                    let others: Vec<u8> = PlayerId::all()
                        .filter(|&p| p != assassin)
                        .map(PlayerId::get)
                        .collect();
                    let target = *others.choose(&mut self.rng).expect("other seats");
                    self.state.assassinate(assassin, target)?;
                }
            }
            Phase::Finished => {}
        }
        Ok(())
    }
}

/// Plays one game to completion. `settings.game.seed` is the game seed.
pub fn play_game(settings: &RunSettings, game_id: &str, seeds: SeedInfo) -> Result<GameRecord, HarnessError> {
    settings.validate()?;
    let state = GameState::with_id(settings.game.clone(), game_id)?;
    let roles = *state.roles();
    let game_seed = settings.game.seed;
    let views: Vec<KnowledgeView> = PlayerId::all().map(|p| knowledge_for(&roles, p)).collect();
    let agents = PlayerId::all()
        .map(|p| {
            let spec = settings.lineup.spec_for(p, roles.side_of(p));
            build_agent(spec, &views[p.slot()], derive_agent_seed(game_seed, p), settings)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let kinds = agents.iter().map(|a| a.kind()).collect();
    let globals = views.iter().map(|v| render_global_prompt(v, &settings.templates)).collect();
    let memories = PlayerId::all()
        .map(|p| GlobalMemory::with_patterns(p, settings.window, settings.key_info.clone()))
        .collect();
    let mut table = Table {
        state,
        settings,
        agents,
        views,
        globals,
        memories,
        synced: 0,
        rng: ChaCha8Rng::seed_from_u64(runner_seed(game_seed)),
    };
    let mut aborted = None;
    while !table.state.is_finished() {
        match table.step() {
            Ok(()) => {}
            Err(HarnessError::Abort(AgentAbort { player, message })) => {
                aborted = Some(format!("seat {player}: {message}"));
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let outcome = table.state.outcome();
    Ok(GameRecord {
        header: RecordHeader {
            schema_version: SCHEMA_VERSION,
            game_id: game_id.to_string(),
            config: settings.game.clone(),
            config_hash: settings.game.hash(),
            seeds,
            roles,
            agents: kinds,
        },
        events: table.state.into_log(),
        outcome,
        aborted,
    })
}

/// Game `index` of a tournament: derives its seed and id, then plays it.
pub fn play_indexed(settings: &RunSettings, base_seed: u64, index: u64) -> Result<GameRecord, HarnessError> {
    let game_seed = derive_game_seed(base_seed, index);
    let mut s = settings.clone();
    s.game.seed = game_seed;
    let seeds = SeedInfo {
        base_seed,
        game_index: index,
        game_seed,
        derivation: SEED_DERIVATION.into(),
    };
    play_game(&s, &format!("g{index:05}-{game_seed:016x}"), seeds)
}
