use std::collections::BTreeMap;

use thiserror::Error;

use super::record::GameRecord;
use crate::event::{EventLogEntry, EventPayload};
use crate::game::{BallotSheet, GameError, GameOutcome, GameState, Phase};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReplayError {
    #[error("record config hash {found} does not match its config ({expected})")]
    ConfigHash { expected: String, found: String },
    #[error("dealt roles differ from the record header")]
    Roles,
    #[error("replay diverges at seq {seq}: {detail}")]
    ReplayMismatch { seq: u64, detail: String },
    #[error("replay ended with outcome {found:?}, record says {expected:?}")]
    Outcome {
        expected: Option<GameOutcome>,
        found: Option<GameOutcome>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub events_checked: usize,
    pub outcome: Option<GameOutcome>,
}

fn mismatch(seq: usize, detail: impl Into<String>) -> ReplayError {
    ReplayError::ReplayMismatch {
        seq: seq as u64,
        detail: detail.into(),
    }
}

/// Re-drives the engine with the recorded actions and checks that every
/// generated entry, and the outcome, equal the recording.
pub fn replay(record: &GameRecord) -> Result<ReplayReport, ReplayError> {
    let h = &record.header;
    let expected = h.config.hash();
    if h.config_hash != expected {
        return Err(ReplayError::ConfigHash {
            expected,
            found: h.config_hash.clone(),
        });
    }
    let mut state = GameState::with_id(h.config.clone(), h.game_id.clone())
        .map_err(|e| mismatch(0, e.to_string()))?;
    if state.roles() != &h.roles {
        return Err(ReplayError::Roles);
    }
    let events = &record.events;
    let mut checked = 0;
    compare(&state, events, &mut checked)?;
    while checked < events.len() {
        let i = checked;
        let e = &events[i];
        let fail = |err: GameError| mismatch(i, err.to_string());
        if e.payload.is_external() {
            state.record_external(e.actor, e.payload.clone(), e.text.clone());
        } else {
            match (state.phase(), &e.payload) {
                (Phase::LeaderAssignment, _) => {
                    state.assign_leader().map_err(fail)?;
                }
                (Phase::TeamSelection, EventPayload::TeamProposed { leader, members }) => {
                    let ids: Vec<u8> = members.iter().map(|p| p.get()).collect();
                    state.propose_team(*leader, &ids, Some(e.text.clone())).map_err(fail)?;
                }
                (Phase::Discussion, EventPayload::Discussion { speaker }) => {
                    state.discuss(*speaker, e.text.clone()).map_err(fail)?;
                }
                (Phase::TeamVote, EventPayload::Ballot { .. }) => {
                    let mut sheet = BallotSheet::new();
                    let mut reasoning = BTreeMap::new();
                    for b in contiguous(events, i) {
                        if let EventPayload::Ballot {
                            voter,
                            approve,
                            reasoning: r,
                        } = &b.payload
                        {
                            sheet.cast(*voter, *approve);
                            if let Some(r) = r {
                                reasoning.insert(*voter, r.clone());
                            }
                        }
                    }
                    state.submit_ballots(sheet, reasoning).map_err(fail)?;
                }
                (Phase::QuestExecution, EventPayload::QuestVote { .. }) => {
                    let mut requested = BTreeMap::new();
                    for v in contiguous(events, i) {
                        if let EventPayload::QuestVote {
                            voter,
                            attempted: Some(a),
                            ..
                        } = &v.payload
                        {
                            requested.insert(*voter, *a);
                        }
                    }
                    state.execute_quest(&requested).map_err(fail)?;
                }
                (Phase::Assassination, EventPayload::AssassinationResult { assassin, target, .. }) => {
                    state.assassinate(*assassin, target.get()).map_err(fail)?;
                }
                (phase, payload) => {
                    return Err(mismatch(
                        i,
                        format!("recorded {:?} cannot occur in phase {phase:?}", payload.kind()),
                    ))
                }
            }
        }
        compare(&state, events, &mut checked)?;
        if checked == i {
            return Err(mismatch(i, "no progress"));
        }
    }
    let found = state.outcome();
    if found != record.outcome {
        return Err(ReplayError::Outcome {
            expected: record.outcome.clone(),
            found,
        });
    }
    Ok(ReplayReport {
        events_checked: checked,
        outcome: found,
    })
}

/// Entries of the same kind starting at `from`.
fn contiguous(events: &[EventLogEntry], from: usize) -> impl Iterator<Item = &EventLogEntry> {
    let kind = events[from].kind();
    events[from..].iter().take_while(move |e| e.kind() == kind)
}

fn compare(state: &GameState, events: &[EventLogEntry], checked: &mut usize) -> Result<(), ReplayError> {
    let log = state.log();
    for seq in *checked..log.len() {
        match events.get(seq) {
            None => return Err(mismatch(seq, "replay produced entries past the end of the record")),
            Some(rec) if rec != &log[seq] => {
                return Err(mismatch(
                    seq,
                    format!("recorded {:?}, replay produced {:?}", rec.text, log[seq].text),
                ))
            }
            Some(_) => {}
        }
    }
    *checked = log.len();
    Ok(())
}
