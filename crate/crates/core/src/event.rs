//! Append-only game event log.
//!
//! Every engine transition appends at least one entry. Entries carry both a
//! structured payload (used by replay, memory and the analyzer) and the
//! rendered text agents see in their history.

use serde::{Deserialize, Serialize};

use crate::agents::AgentFault;
use crate::codeact::ExecutionResult;
use crate::game::{Phase, PlayerId, QuestOutcome, Side, Team};
use crate::info::RoleAssignment;
use crate::llm::LlmExchange;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Moderator,
    Player(PlayerId),
}

impl Actor {
    pub fn player(self) -> Option<PlayerId> {
        match self {
            Actor::Player(p) => Some(p),
            Actor::Moderator => None,
        }
    }
}

/// Who may observe an entry. `Hidden` entries are audit-only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Visibility {
    Public,
    Private(PlayerId),
    Hidden,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    ModeratorNote,
    Discussion,
    TeamProposed,
    Ballot,
    BallotResult,
    QuestVote,
    QuestResult,
    AssassinationResult,
    AgentError,
    LlmExchange,
    CodeExecution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "note", rename_all = "snake_case")]
pub enum Note {
    RolesDealt { roles: RoleAssignment },
    LeaderAssigned { leader: PlayerId, team_size: usize },
    DiscussionOpened,
    VotingOpened,
    ForcedApproval,
    AssassinationOpened,
    GameOver { quest_winner: Side },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventPayload {
    ModeratorNote {
        #[serde(flatten)]
        note: Note,
    },
    Discussion {
        speaker: PlayerId,
    },
    TeamProposed {
        leader: PlayerId,
        members: Team,
    },
    Ballot {
        voter: PlayerId,
        approve: bool,
        reasoning: Option<String>,
    },
    BallotResult {
        approvals: usize,
        rejections: usize,
        approved: bool,
        forced: bool,
    },
    QuestVote {
        voter: PlayerId,
        /// What the agent asked for; `None` when it expressed no preference.
        attempted: Option<bool>,
        counted: bool,
    },
    QuestResult {
        round: u8,
        leader: PlayerId,
        team: Team,
        success: bool,
        /// Only present when sabotage counts are public.
        sabotage_count: Option<usize>,
        forced: bool,
    },
    AssassinationResult {
        assassin: PlayerId,
        target: PlayerId,
        hit: bool,
    },
    AgentError {
        agent: PlayerId,
        fault: AgentFault,
        raw_output: String,
        fallback_used: bool,
    },
    LlmExchange {
        agent: PlayerId,
        exchange: LlmExchange,
    },
    CodeExecution {
        agent: PlayerId,
        attempt: u32,
        program: String,
        result: ExecutionResult,
    },
}

impl EventPayload {
    pub fn kind(&self) -> EventKind {
        match self {
            EventPayload::ModeratorNote { .. } => EventKind::ModeratorNote,
            EventPayload::Discussion { .. } => EventKind::Discussion,
            EventPayload::TeamProposed { .. } => EventKind::TeamProposed,
            EventPayload::Ballot { .. } => EventKind::Ballot,
            EventPayload::BallotResult { .. } => EventKind::BallotResult,
            EventPayload::QuestVote { .. } => EventKind::QuestVote,
            EventPayload::QuestResult { .. } => EventKind::QuestResult,
            EventPayload::AssassinationResult { .. } => EventKind::AssassinationResult,
            EventPayload::AgentError { .. } => EventKind::AgentError,
            EventPayload::LlmExchange { .. } => EventKind::LlmExchange,
            EventPayload::CodeExecution { .. } => EventKind::CodeExecution,
        }
    }

    /// Entries written by the harness rather than by an engine transition.
    pub fn is_external(&self) -> bool {
        matches!(
            self.kind(),
            EventKind::AgentError | EventKind::LlmExchange | EventKind::CodeExecution
        )
    }

    pub(crate) fn quest_outcome(outcome: &QuestOutcome, reveal_count: bool) -> Self {
        EventPayload::QuestResult {
            round: outcome.round,
            leader: outcome.leader,
            team: outcome.team.clone(),
            success: outcome.success,
            sabotage_count: reveal_count.then_some(outcome.sabotage_count),
            forced: outcome.forced,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLogEntry {
    pub seq: u64,
    pub game_id: String,
    pub round: u8,
    pub attempt: u8,
    pub phase: Phase,
    pub actor: Actor,
    pub visibility: Visibility,
    pub payload: EventPayload,
    pub text: String,
}

impl EventLogEntry {
    pub fn kind(&self) -> EventKind {
        self.payload.kind()
    }

    pub fn visible_to(&self, player: PlayerId) -> bool {
        match self.visibility {
            Visibility::Public => true,
            Visibility::Private(p) => p == player,
            Visibility::Hidden => false,
        }
    }

    /// One transcript line, e.g. `Moderator: ...` or `Player 3: ...`.
    pub fn transcript_line(&self) -> String {
        match self.actor {
            Actor::Moderator => format!("Moderator: {}", self.text),
            Actor::Player(p) => format!("Player {p}: {}", self.text),
        }
    }
}
