//! Pluggable players. An agent sees one `Observation` per decision and
//! returns an `Action`; anything worth auditing (model calls, code runs,
//! recovered faults) goes into the `Journal`, which the runner appends to the
//! game log as hidden entries.

mod deduction;
mod llm;
pub mod parse;
mod random;
mod scripted;
mod strategy;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use deduction::DeductionAgent;
pub use llm::{LlmAgent, LlmAgentConfig};
pub(crate) use random::random_team;
pub use random::RandomAgent;
pub use scripted::ScriptedEvilAgent;
pub use strategy::Strategy;

use crate::codeact::{ExecStatus, ExecutionResult};
use crate::event::EventPayload;
use crate::game::{GameConfig, Phase, PlayerId, TeamProposal};
use crate::info::{KnowledgeView, PromptBundle};
use crate::llm::LlmExchange;
use crate::memory::{LeaderMemory, PublicFact};

/// A recoverable agent failure, recorded in the log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AgentFault {
    TeamSize { required: usize, selected: usize },
    InvalidPlayer { player: u32 },
    NoPlayersFound,
    VoteParse { message: String },
    Transport { message: String },
    CodeFailure { status: ExecStatus, message: String },
    Contradiction,
    IllegalAction { message: String },
    AssassinParse,
}

impl From<&parse::TeamParseError> for AgentFault {
    fn from(e: &parse::TeamParseError) -> Self {
        match *e {
            parse::TeamParseError::WrongSize { required, selected } => {
                AgentFault::TeamSize { required, selected }
            }
            parse::TeamParseError::NoPlayersFound => AgentFault::NoPlayersFound,
            parse::TeamParseError::InvalidPlayer(player) => AgentFault::InvalidPlayer { player },
        }
    }
}

/// An unrecoverable failure: the game is aborted.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("agent at seat {player} aborted: {message}")]
pub struct AgentAbort {
    pub player: PlayerId,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LegalAction {
    SelectTeam { size: usize },
    Discuss,
    TeamVote,
    QuestVote,
    Assassinate,
}

/// Everything a seat may legitimately use for one decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub player: PlayerId,
    pub phase: Phase,
    pub round: u8,
    pub attempt: u8,
    pub leader: Option<PlayerId>,
    pub legal: LegalAction,
    pub bundle: PromptBundle,
    pub knowledge: KnowledgeView,
    pub public_facts: Vec<PublicFact>,
    pub proposal: Option<TeamProposal>,
    /// Present only for the leader during team selection.
    pub leader_memory: Option<LeaderMemory>,
    pub config: GameConfig,
    pub discussion_so_far: Vec<(PlayerId, String)>,
}

impl Observation {
    pub fn team_size(&self) -> usize {
        self.config.team_size(self.round)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    SelectTeam { members: Vec<u8>, statement: Option<String> },
    Discuss { text: String },
    TeamVote { approve: bool, reasoning: Option<String> },
    /// `true` asks for success; the engine enforces the side's vote regardless.
    QuestVote { succeed: bool },
    Assassinate { target: u8 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct JournalEntry {
    pub payload: EventPayload,
    pub text: String,
}

/// Audit entries produced while deciding.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Journal {
    entries: Vec<JournalEntry>,
}

impl Journal {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fault(&mut self, agent: PlayerId, fault: AgentFault, raw_output: impl Into<String>, fallback_used: bool) {
        let text = format!(
            "Agent error at seat {agent}: {fault:?}{}",
            if fallback_used { " (fallback used)" } else { "" }
        );
        self.entries.push(JournalEntry {
            payload: EventPayload::AgentError {
                agent,
                fault,
                raw_output: raw_output.into(),
                fallback_used,
            },
            text,
        });
    }

    pub fn exchange(&mut self, agent: PlayerId, exchange: LlmExchange) {
        let text = format!("Model call ({}) by seat {agent}.", exchange.request.tag.as_str());
        self.entries.push(JournalEntry {
            payload: EventPayload::LlmExchange { agent, exchange },
            text,
        });
    }

    pub fn execution(&mut self, agent: PlayerId, attempt: u32, program: String, result: ExecutionResult) {
        let text = format!("Code run {attempt} by seat {agent}: {:?}.", result.status);
        self.entries.push(JournalEntry {
            payload: EventPayload::CodeExecution {
                agent,
                attempt,
                program,
                result,
            },
            text,
        });
    }

    pub fn entries(&self) -> &[JournalEntry] {
        &self.entries
    }

    pub fn drain(&mut self) -> Vec<JournalEntry> {
        std::mem::take(&mut self.entries)
    }
}

pub trait Agent: Send {
    /// Short kind label stored in the game record header.
    fn kind(&self) -> String;
    fn act(&mut self, obs: &Observation, journal: &mut Journal) -> Result<Action, AgentAbort>;
}
