//! Pure rule functions shared by the engine, the replayer and the tests.

use super::config::GameConfig;
use super::types::{BallotSheet, PlayerId, QuestOutcome, Side, Team};
use super::GameError;
use crate::info::RoleAssignment;

/// Quest results needed by one side to decide the game.
pub const QUESTS_TO_WIN: usize = 3;

pub fn rotate_leader(current: PlayerId) -> PlayerId {
    current.next()
}

/// A proposal passes when at least `majority` (4 of 7) seats approve.
pub fn tally_approval(ballots: &BallotSheet, majority: usize) -> Result<bool, GameError> {
    let missing = ballots.missing();
    if !missing.is_empty() {
        return Err(GameError::IncompleteBallot(missing));
    }
    Ok(ballots.approvals() >= majority)
}

/// Executes a quest under mandatory sabotage: every evil member votes fail.
pub fn resolve_quest(
    config: &GameConfig,
    round: u8,
    leader: PlayerId,
    team: &Team,
    roles: &RoleAssignment,
    forced: bool,
) -> QuestOutcome {
    let sabotage_count = team.iter().filter(|&&p| roles.side_of(p) == Side::Evil).count();
    QuestOutcome {
        round,
        leader,
        team: team.clone(),
        sabotage_count,
        success: sabotage_count < config.sabotage_threshold(round),
        forced,
    }
}

/// The side that first reached three quest results, scanning in round order.
pub fn quest_winner(history: &[QuestOutcome]) -> Option<Side> {
    let (mut wins, mut fails) = (0, 0);
    for q in history {
        if q.success {
            wins += 1;
        } else {
            fails += 1;
        }
        if wins == QUESTS_TO_WIN {
            return Some(Side::Just);
        }
        if fails == QUESTS_TO_WIN {
            return Some(Side::Evil);
        }
    }
    None
}
