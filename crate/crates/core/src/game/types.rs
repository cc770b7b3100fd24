use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::GameError;

pub const NUM_PLAYERS: usize = 7;
pub const NUM_EVIL: usize = 3;
pub const NUM_ROUNDS: usize = 5;

/// A seat at the table, numbered 1 through 7.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct PlayerId(u8);

impl PlayerId {
    pub fn new(index: u8) -> Option<Self> {
        (1..=NUM_PLAYERS as u8).contains(&index).then_some(Self(index))
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Zero-based slot, for indexing per-seat arrays.
    pub fn slot(self) -> usize {
        self.0 as usize - 1
    }

    pub fn from_slot(slot: usize) -> Self {
        assert!(slot < NUM_PLAYERS, "seat slot {slot} out of range");
        Self(slot as u8 + 1)
    }

    pub fn all() -> impl Iterator<Item = PlayerId> + Clone {
        (1..=NUM_PLAYERS as u8).map(PlayerId)
    }

    /// Sequential leader rotation, wrapping 7 back to 1.
    pub fn next(self) -> Self {
        Self(self.0 % NUM_PLAYERS as u8 + 1)
    }

    pub(crate) fn bit(self) -> u8 {
        1 << self.slot()
    }
}

impl TryFrom<u8> for PlayerId {
    type Error = GameError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        PlayerId::new(value).ok_or(GameError::InvalidPlayer(value as u32))
    }
}

impl From<PlayerId> for u8 {
    fn from(p: PlayerId) -> u8 {
        p.0
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub type Team = BTreeSet<PlayerId>;

pub(crate) fn team_mask(team: &Team) -> u8 {
    team.iter().fold(0, |m, p| m | p.bit())
}

pub(crate) fn mask_team(mask: u8) -> Team {
    PlayerId::all().filter(|p| mask & p.bit() != 0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Just,
    Evil,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Just => "just",
            Side::Evil => "evil",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Merlin,
    Percival,
    Servant,
    Morgana,
    Assassin,
    Minion,
}

impl Role {
    /// The seven cards dealt each game, in canonical (sorted) order.
    pub const DECK: [Role; NUM_PLAYERS] = [
        Role::Merlin,
        Role::Percival,
        Role::Servant,
        Role::Servant,
        Role::Morgana,
        Role::Assassin,
        Role::Minion,
    ];

    pub const ALL: [Role; 6] = [
        Role::Merlin,
        Role::Percival,
        Role::Servant,
        Role::Morgana,
        Role::Assassin,
        Role::Minion,
    ];

    pub fn side(self) -> Side {
        match self {
            Role::Merlin | Role::Percival | Role::Servant => Side::Just,
            Role::Morgana | Role::Assassin | Role::Minion => Side::Evil,
        }
    }

    /// Display name as used in prompts.
    pub fn title(self) -> &'static str {
        match self {
            Role::Merlin => "Merlin",
            Role::Percival => "Percival",
            Role::Servant => "Loyal Servant of Arthur",
            Role::Morgana => "Morgana",
            Role::Assassin => "Assassin",
            Role::Minion => "Minion of Mordred",
        }
    }

    pub fn parse(name: &str) -> Option<Role> {
        let lower = name.trim().to_ascii_lowercase();
        Role::ALL.into_iter().find(|r| {
            format!("{r:?}").to_ascii_lowercase() == lower || r.title().to_ascii_lowercase() == lower
        })
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    LeaderAssignment,
    TeamSelection,
    Discussion,
    TeamVote,
    QuestExecution,
    Assassination,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeamProposal {
    pub round: u8,
    pub attempt: u8,
    pub leader: PlayerId,
    pub members: Team,
}

/// Secret approve/reject ballots for one proposal, one per seat.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BallotSheet {
    approvals: BTreeMap<PlayerId, bool>,
}

impl BallotSheet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_fn(mut f: impl FnMut(PlayerId) -> bool) -> Self {
        Self {
            approvals: PlayerId::all().map(|p| (p, f(p))).collect(),
        }
    }

    pub fn cast(&mut self, voter: PlayerId, approve: bool) {
        self.approvals.insert(voter, approve);
    }

    pub fn get(&self, voter: PlayerId) -> Option<bool> {
        self.approvals.get(&voter).copied()
    }

    pub fn len(&self) -> usize {
        self.approvals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.approvals.is_empty()
    }

    pub fn approvals(&self) -> usize {
        self.approvals.values().filter(|&&a| a).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = (PlayerId, bool)> + '_ {
        self.approvals.iter().map(|(&p, &a)| (p, a))
    }

    pub fn missing(&self) -> Vec<PlayerId> {
        PlayerId::all().filter(|p| !self.approvals.contains_key(p)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestOutcome {
    pub round: u8,
    /// Proposer of the executed team.
    pub leader: PlayerId,
    pub team: Team,
    pub sabotage_count: usize,
    pub success: bool,
    /// The team was adopted after the final rejected attempt of the round.
    pub forced: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameOutcome {
    pub quest_winner: Side,
    pub assassination_target: Option<PlayerId>,
    pub assassination_hit: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposalRecord {
    pub proposal: TeamProposal,
    pub ballots: BallotSheet,
    pub approved: bool,
    pub forced: bool,
}

pub(crate) fn ordinal_round(round: u8) -> &'static str {
    match round {
        1 => "initial",
        2 => "second",
        3 => "third",
        4 => "fourth",
        5 => "fifth",
        _ => "unknown",
    }
}

/// "1", "1 and 2", "1, 2, and 6".
pub(crate) fn join_numbers<I, T>(items: I) -> String
where
    I: IntoIterator<Item = T>,
    T: fmt::Display,
{
    let items: Vec<String> = items.into_iter().map(|i| i.to_string()).collect();
    match items.len() {
        0 => String::new(),
        1 => items[0].clone(),
        2 => format!("{} and {}", items[0], items[1]),
        n => format!("{}, and {}", items[..n - 1].join(", "), items[n - 1]),
    }
}

/// "player 2" / "players 1 and 2" / "players 2, 4, and 7".
pub(crate) fn players_phrase(team: &Team) -> String {
    if team.len() == 1 {
        format!("player {}", team.iter().next().unwrap())
    } else {
        format!("players {}", join_numbers(team.iter()))
    }
}
