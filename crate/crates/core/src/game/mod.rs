//! The rules engine: a deterministic state machine over the round pipeline
//! (leader assignment, team selection, discussion, team vote, quest
//! execution) plus the optional assassination phase.

mod config;
pub mod rules;
mod types;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use config::{
    ConfigError, GameConfig, MAJORITY, MAX_PROPOSAL_ATTEMPTS, SABOTAGE_THRESHOLDS, TEAM_SIZES,
};
pub use rules::{quest_winner, resolve_quest, rotate_leader, tally_approval};
pub use types::{
    BallotSheet, GameOutcome, Phase, PlayerId, ProposalRecord, QuestOutcome, Role, Side, Team,
    TeamProposal, NUM_EVIL, NUM_PLAYERS, NUM_ROUNDS,
};
pub(crate) use types::{join_numbers, mask_team, ordinal_round, players_phrase, team_mask};

use crate::event::{Actor, EventLogEntry, EventPayload, Note, Visibility};
use crate::info::{deal_roles, RoleAssignment};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GameError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("player {0} does not exist (seats are 1..=7)")]
    InvalidPlayer(u32),
    #[error("team must have {expected} members, got {found}")]
    SizeViolation { expected: usize, found: usize },
    #[error("player {0} listed more than once")]
    DuplicatePlayer(PlayerId),
    #[error("ballots missing for {0:?}")]
    IncompleteBallot(Vec<PlayerId>),
    #[error("{action} is not allowed in phase {phase:?}")]
    Protocol { action: &'static str, phase: Phase },
    #[error("player {expected} must act next, not player {found}")]
    OutOfTurn { expected: PlayerId, found: PlayerId },
    #[error("player {0} is not the Assassin")]
    NotAssassin(PlayerId),
    #[error("player {0} is not on the quest team")]
    NotOnTeam(PlayerId),
}

/// Result of submitting a full ballot sheet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoteResult {
    Approved,
    /// Rejected on the last allowed attempt; the team is adopted anyway.
    ForceApproved,
    Rejected,
}

/// Full mutable state of one game, including its event log.
#[derive(Debug, Clone, PartialEq)]
pub struct GameState {
    config: GameConfig,
    game_id: String,
    roles: RoleAssignment,
    rng: ChaCha8Rng,
    round: u8,
    attempt: u8,
    leader: Option<PlayerId>,
    phase: Phase,
    proposal: Option<TeamProposal>,
    discussion: Vec<(PlayerId, String)>,
    quest_history: Vec<QuestOutcome>,
    proposal_history: Vec<ProposalRecord>,
    quest_winner: Option<Side>,
    assassination: Option<(PlayerId, bool)>,
    log: Vec<EventLogEntry>,
}

impl GameState {
    /// Starts a game: validates the config and deals roles from the seeded stream.
    pub fn new(config: GameConfig) -> Result<Self, GameError> {
        let game_id = format!("game-{:016x}", config.seed);
        Self::with_id(config, game_id)
    }

    pub fn with_id(config: GameConfig, game_id: impl Into<String>) -> Result<Self, GameError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let roles = deal_roles(&mut rng);
        let mut state = Self {
            config,
            game_id: game_id.into(),
            roles,
            rng,
            round: 1,
            attempt: 1,
            leader: None,
            phase: Phase::LeaderAssignment,
            proposal: None,
            discussion: Vec::new(),
            quest_history: Vec::new(),
            proposal_history: Vec::new(),
            quest_winner: None,
            assassination: None,
            log: Vec::new(),
        };
        state.append(
            Actor::Moderator,
            Visibility::Hidden,
            EventPayload::ModeratorNote {
                note: Note::RolesDealt { roles },
            },
            "Roles have been dealt.".to_string(),
        );
        Ok(state)
    }

    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn game_id(&self) -> &str {
        &self.game_id
    }

    pub fn roles(&self) -> &RoleAssignment {
        &self.roles
    }

    pub fn round(&self) -> u8 {
        self.round
    }

    pub fn attempt(&self) -> u8 {
        self.attempt
    }

    pub fn leader(&self) -> Option<PlayerId> {
        self.leader
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn current_team_size(&self) -> usize {
        self.config.team_size(self.round)
    }

    pub fn proposal(&self) -> Option<&TeamProposal> {
        self.proposal.as_ref()
    }

    pub fn discussion(&self) -> &[(PlayerId, String)] {
        &self.discussion
    }

    pub fn quest_history(&self) -> &[QuestOutcome] {
        &self.quest_history
    }

    pub fn proposal_history(&self) -> &[ProposalRecord] {
        &self.proposal_history
    }

    pub fn log(&self) -> &[EventLogEntry] {
        &self.log
    }

    pub fn into_log(self) -> Vec<EventLogEntry> {
        self.log
    }

    pub fn is_finished(&self) -> bool {
        self.phase == Phase::Finished
    }

    /// The quest result if a side has reached three, independent of phase.
    pub fn check_game_end(&self) -> Option<GameOutcome> {
        let quest_winner = self.quest_winner?;
        Some(GameOutcome {
            quest_winner,
            assassination_target: self.assassination.map(|(t, _)| t),
            assassination_hit: self.assassination.map(|(_, h)| h),
        })
    }

    /// Final outcome; `None` until the game is finished.
    pub fn outcome(&self) -> Option<GameOutcome> {
        if self.is_finished() {
            self.check_game_end()
        } else {
            None
        }
    }

    /// The seat the current phase is waiting on, when exactly one seat acts.
    pub fn next_speaker(&self) -> Option<PlayerId> {
        if self.phase != Phase::Discussion {
            return None;
        }
        PlayerId::new(self.discussion.len() as u8 + 1)
    }

    /// Appends an entry produced outside the engine (agent errors, model
    /// exchanges, code executions). These never change game state.
    pub fn record_external(&mut self, actor: Actor, payload: EventPayload, text: String) -> u64 {
        debug_assert!(payload.is_external());
        self.append(actor, Visibility::Hidden, payload, text)
    }

    fn append(
        &mut self,
        actor: Actor,
        visibility: Visibility,
        payload: EventPayload,
        text: String,
    ) -> u64 {
        let seq = self.log.len() as u64;
        self.log.push(EventLogEntry {
            seq,
            game_id: self.game_id.clone(),
            round: self.round,
            attempt: self.attempt,
            phase: self.phase,
            actor,
            visibility,
            payload,
            text,
        });
        seq
    }

    fn note(&mut self, note: Note, text: String) {
        self.append(
            Actor::Moderator,
            Visibility::Public,
            EventPayload::ModeratorNote { note },
            text,
        );
    }

    fn require(&self, phase: Phase, action: &'static str) -> Result<(), GameError> {
        if self.phase == phase {
            Ok(())
        } else {
            Err(GameError::Protocol {
                action,
                phase: self.phase,
            })
        }
    }

    /// Draws the round-1 leader uniformly from the game's seeded stream.
    pub fn assign_first_leader(&mut self) -> Result<PlayerId, GameError> {
        self.require(Phase::LeaderAssignment, "assign_first_leader")?;
        if self.leader.is_some() || self.round != 1 || self.attempt != 1 {
            return Err(GameError::Protocol {
                action: "assign_first_leader",
                phase: self.phase,
            });
        }
        let leader = PlayerId::from_slot(self.rng.random_range(0..NUM_PLAYERS));
        self.install_leader(leader);
        Ok(leader)
    }

    /// Leader assignment at the start of a round: random in round 1, otherwise
    /// the successor of the last proposer.
    pub fn assign_leader(&mut self) -> Result<PlayerId, GameError> {
        self.require(Phase::LeaderAssignment, "assign_leader")?;
        match self.leader {
            None => self.assign_first_leader(),
            Some(prev) => {
                let leader = rotate_leader(prev);
                self.install_leader(leader);
                Ok(leader)
            }
        }
    }

    fn install_leader(&mut self, leader: PlayerId) {
        self.leader = Some(leader);
        self.phase = Phase::TeamSelection;
        let team_size = self.current_team_size();
        self.note(
            Note::LeaderAssigned { leader, team_size },
            format!(
                "Round {}, proposal attempt {}: player {leader} is the team leader.",
                self.round, self.attempt
            ),
        );
    }

    /// Validates and records the leader's team. `statement` is the leader's
    /// own wording, when it has one.
    pub fn propose_team(
        &mut self,
        leader: PlayerId,
        members: &[u8],
        statement: Option<String>,
    ) -> Result<TeamProposal, GameError> {
        self.require(Phase::TeamSelection, "propose_team")?;
        let current = self.leader.expect("leader set in team selection");
        if leader != current {
            return Err(GameError::OutOfTurn {
                expected: current,
                found: leader,
            });
        }
        let mut team = Team::new();
        for &m in members {
            let p = PlayerId::try_from(m)?;
            if !team.insert(p) {
                return Err(GameError::DuplicatePlayer(p));
            }
        }
        let expected = self.current_team_size();
        if team.len() != expected {
            return Err(GameError::SizeViolation {
                expected,
                found: team.len(),
            });
        }
        let proposal = TeamProposal {
            round: self.round,
            attempt: self.attempt,
            leader,
            members: team.clone(),
        };
        let statement = statement.unwrap_or_else(|| {
            format!(
                "I choose {} for the quest.",
                join_numbers(team.iter().map(|p| format!("player {p}")))
            )
        });
        self.append(
            Actor::Player(leader),
            Visibility::Public,
            EventPayload::TeamProposed {
                leader,
                members: team.clone(),
            },
            statement,
        );
        let quoted = team
            .iter()
            .map(|p| format!("'player {p}'"))
            .collect::<Vec<_>>()
            .join(", ");
        self.proposal = Some(proposal.clone());
        self.discussion.clear();
        if self.config.communication_enabled {
            self.phase = Phase::Discussion;
            self.note(
                Note::DiscussionOpened,
                format!(
                    "The selected team by the leader include [{quoted}]. Now everyone discuss if you agree the team."
                ),
            );
        } else {
            self.phase = Phase::TeamVote;
            self.note(
                Note::VotingOpened,
                format!(
                    "The selected team by the leader include [{quoted}]. Now everyone vote on whether to approve the team."
                ),
            );
        }
        Ok(proposal)
    }

    /// Records one discussion utterance; seats speak once each in ascending order.
    pub fn discuss(&mut self, speaker: PlayerId, text: String) -> Result<(), GameError> {
        self.require(Phase::Discussion, "discuss")?;
        let expected = self.next_speaker().expect("discussion has a next speaker");
        if speaker != expected {
            return Err(GameError::OutOfTurn {
                expected,
                found: speaker,
            });
        }
        self.append(
            Actor::Player(speaker),
            Visibility::Public,
            EventPayload::Discussion { speaker },
            text.clone(),
        );
        self.discussion.push((speaker, text));
        if self.discussion.len() == NUM_PLAYERS {
            self.phase = Phase::TeamVote;
            self.note(
                Note::VotingOpened,
                "The discussion is over. Now everyone vote on whether to approve the team."
                    .to_string(),
            );
        }
        Ok(())
    }

    /// Tallies a complete ballot sheet and advances the pipeline.
    pub fn submit_ballots(
        &mut self,
        ballots: BallotSheet,
        mut reasoning: BTreeMap<PlayerId, String>,
    ) -> Result<VoteResult, GameError> {
        self.require(Phase::TeamVote, "submit_ballots")?;
        let approved = tally_approval(&ballots, self.config.majority)?;
        for (voter, approve) in ballots.iter() {
            let verb = if approve { "approve" } else { "reject" };
            self.append(
                Actor::Player(voter),
                Visibility::Private(voter),
                EventPayload::Ballot {
                    voter,
                    approve,
                    reasoning: reasoning.remove(&voter),
                },
                format!("You (player {voter}) voted to {verb} the team."),
            );
        }
        let approvals = ballots.approvals();
        let rejections = NUM_PLAYERS - approvals;
        let forced = !approved && self.attempt >= self.config.max_proposal_attempts;
        let verdict = if approved { "approved" } else { "rejected" };
        self.append(
            Actor::Moderator,
            Visibility::Public,
            EventPayload::BallotResult {
                approvals,
                rejections,
                approved,
                forced,
            },
            format!("The team was {verdict} with {approvals} votes in favour and {rejections} against."),
        );
        let proposal = self.proposal.clone().expect("proposal present in team vote");
        self.proposal_history.push(ProposalRecord {
            proposal,
            ballots,
            approved,
            forced,
        });
        if approved {
            self.phase = Phase::QuestExecution;
            Ok(VoteResult::Approved)
        } else {
            self.handle_rejection();
            Ok(if forced {
                VoteResult::ForceApproved
            } else {
                VoteResult::Rejected
            })
        }
    }

    /// After a rejected tally: the next seat leads a new attempt, except on the
    /// final attempt where the rejected team is adopted as-is.
    fn handle_rejection(&mut self) {
        if self.attempt >= self.config.max_proposal_attempts {
            self.phase = Phase::QuestExecution;
            self.note(
                Note::ForcedApproval,
                "Five consecutive proposals were rejected, so this team is automatically formed."
                    .to_string(),
            );
            return;
        }
        self.attempt += 1;
        self.proposal = None;
        self.phase = Phase::TeamSelection;
        let next = rotate_leader(self.leader.expect("leader set"));
        self.install_leader(next);
    }

    pub fn quest_team(&self) -> Option<&Team> {
        match self.phase {
            Phase::QuestExecution => self.proposal.as_ref().map(|p| &p.members),
            _ => None,
        }
    }

    /// Runs the quest. Agents' requested votes are recorded but the counted
    /// vote always follows the voter's side.
    pub fn execute_quest(
        &mut self,
        requested: &BTreeMap<PlayerId, bool>,
    ) -> Result<QuestOutcome, GameError> {
        self.require(Phase::QuestExecution, "execute_quest")?;
        let proposal = self.proposal.clone().expect("approved proposal");
        if let Some(stray) = requested.keys().find(|p| !proposal.members.contains(p)) {
            return Err(GameError::NotOnTeam(*stray));
        }
        for &voter in &proposal.members {
            let counted = self.roles.side_of(voter) == Side::Just;
            let attempted = requested.get(&voter).copied();
            let mut text = format!(
                "You voted for the quest to {}.",
                if counted { "succeed" } else { "fail" }
            );
            if attempted.is_some_and(|a| a != counted) {
                text.push_str(" Your requested vote was overridden by the rules of your side.");
            }
            self.append(
                Actor::Player(voter),
                Visibility::Private(voter),
                EventPayload::QuestVote {
                    voter,
                    attempted,
                    counted,
                },
                text,
            );
        }
        let forced = self
            .proposal_history
            .last()
            .is_some_and(|r| r.forced && r.proposal == proposal);
        let outcome = resolve_quest(
            &self.config,
            self.round,
            proposal.leader,
            &proposal.members,
            &self.roles,
            forced,
        );
        let reveal = self.config.reveal_sabotage_count;
        self.append(
            Actor::Moderator,
            Visibility::Public,
            EventPayload::quest_outcome(&outcome, reveal),
            quest_sentence(
                outcome.round,
                &outcome.team,
                outcome.success,
                reveal.then_some(outcome.sabotage_count),
            ),
        );
        self.quest_history.push(outcome.clone());
        self.proposal = None;
        if self.quest_winner.is_none() {
            self.quest_winner = quest_winner(&self.quest_history);
        }
        let last_round = self.round as usize == NUM_ROUNDS;
        match self.quest_winner {
            Some(winner) if last_round || !self.config.play_all_rounds => self.conclude(winner),
            _ => {
                self.round += 1;
                self.attempt = 1;
                self.phase = Phase::LeaderAssignment;
            }
        }
        Ok(outcome)
    }

    fn conclude(&mut self, winner: Side) {
        if winner == Side::Just && self.config.assassination_enabled {
            self.phase = Phase::Assassination;
            self.note(
                Note::AssassinationOpened,
                "The just side has completed three quests. The Assassin must now identify Merlin."
                    .to_string(),
            );
        } else {
            self.finish(winner);
        }
    }

    fn finish(&mut self, winner: Side) {
        self.phase = Phase::Finished;
        self.note(
            Note::GameOver {
                quest_winner: winner,
            },
            format!("The game is over. The {winner} side won by quests."),
        );
    }

    pub fn assassinate(&mut self, caller: PlayerId, target: u8) -> Result<GameOutcome, GameError> {
        self.require(Phase::Assassination, "assassinate")?;
        if self.roles.role_of(caller) != Role::Assassin {
            return Err(GameError::NotAssassin(caller));
        }
        let target = PlayerId::try_from(target)?;
        let hit = self.roles.role_of(target) == Role::Merlin;
        self.assassination = Some((target, hit));
        self.append(
            Actor::Player(caller),
            Visibility::Public,
            EventPayload::AssassinationResult {
                assassin: caller,
                target,
                hit,
            },
            format!(
                "The Assassin chose player {target}, who {} Merlin.",
                if hit { "is" } else { "is not" }
            ),
        );
        let winner = self.quest_winner.expect("assassination follows a just win");
        self.finish(winner);
        Ok(self.outcome().expect("finished"))
    }
}

/// Public wording of a quest result.
pub(crate) fn quest_sentence(round: u8, team: &Team, success: bool, count: Option<usize>) -> String {
    let mut s = format!(
        "In the {} round, {} were selected for the quest, which ended in {}.",
        ordinal_round(round),
        players_phrase(team),
        if success { "success" } else { "failure" }
    );
    if let Some(n) = count {
        s.push_str(&format!(
            " The quest received {n} fail vote{}.",
            if n == 1 { "" } else { "s" }
        ));
    }
    s
}
