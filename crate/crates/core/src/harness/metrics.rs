use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::record::GameRecord;
use crate::analyzer::{analyze, summarize, AnalyzerPatterns, HallucinationSummary};
use crate::event::EventPayload;
use crate::game::{Side, NUM_ROUNDS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("no games to report on")]
    NoGames,
}

/// A rate with its denominator. `value` is `None` when the denominator is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub numerator: u64,
    pub denominator: u64,
    pub value: Option<f64>,
}

impl Rate {
    pub fn new(numerator: u64, denominator: u64) -> Self {
        Self {
            numerator,
            denominator,
            value: (denominator > 0).then(|| numerator as f64 / denominator as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// e.g. `communication=on reveal_counts=off rounds=early-stop`.
    pub mode: String,
    pub n_games: u64,
    pub n_aborted: u64,
    pub n_quests: u64,
    pub n_just_leader_teams: u64,
    pub n_proposals: u64,
    pub n_rejected_proposals: u64,
    /// Games whose quests were won by the just side.
    pub game_win: Rate,
    /// Just quest wins where the assassination also missed (or was disabled).
    pub game_win_after_assassination: Rate,
    pub quest_win: Rate,
    pub team_acc: Rate,
    pub per_round_quest_win: [Rate; NUM_ROUNDS],
    pub hallucination_counts: HallucinationSummary,
}

fn mode(records: &[GameRecord]) -> String {
    let c = &records[0].header.config;
    let on = |b: bool| if b { "on" } else { "off" };
    format!(
        "communication={} reveal_counts={} rounds={}",
        on(c.communication_enabled),
        on(c.reveal_sabotage_count),
        if c.play_all_rounds { "all" } else { "early-stop" }
    )
}

/// Aggregates completed records. Aborted games only count in `n_aborted`.
pub fn compute_metrics(records: &[GameRecord]) -> Result<MetricsReport, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::NoGames);
    }
    let done: Vec<&GameRecord> = records.iter().filter(|r| r.aborted.is_none() && r.outcome.is_some()).collect();
    let mut wins = 0;
    let mut wins_after = 0;
    let mut quests = 0;
    let mut quest_wins = 0;
    let mut just_teams = 0;
    let mut just_team_wins = 0;
    let mut proposals = 0;
    let mut rejected = 0;
    let mut per_round = [(0u64, 0u64); NUM_ROUNDS];
    for r in &done {
        let outcome = r.outcome.as_ref().expect("filtered");
        if outcome.quest_winner == Side::Just {
            wins += 1;
            if outcome.assassination_hit != Some(true) {
                wins_after += 1;
            }
        }
        for e in &r.events {
            match &e.payload {
                EventPayload::QuestResult {
                    round, leader, success, ..
                } => {
                    quests += 1;
                    let slot = &mut per_round[*round as usize - 1];
                    slot.1 += 1;
                    if *success {
                        quest_wins += 1;
                        slot.0 += 1;
                    }
                    if r.header.roles.side_of(*leader) == Side::Just {
                        just_teams += 1;
                        just_team_wins += u64::from(*success);
                    }
                }
                EventPayload::BallotResult { approved, .. } => {
                    proposals += 1;
                    rejected += u64::from(!approved);
                }
                _ => {}
            }
        }
    }
    let patterns = AnalyzerPatterns::builtin();
    let done_owned: Vec<GameRecord> = done.iter().map(|r| (*r).clone()).collect();
    let findings: Vec<_> = done_owned.iter().flat_map(|r| analyze(r, &patterns)).collect();
    let n = done.len() as u64;
    Ok(MetricsReport {
        mode: mode(records),
        n_games: n,
        n_aborted: records.len() as u64 - n,
        n_quests: quests,
        n_just_leader_teams: just_teams,
        n_proposals: proposals,
        n_rejected_proposals: rejected,
        game_win: Rate::new(wins, n),
        game_win_after_assassination: Rate::new(wins_after, n),
        quest_win: Rate::new(quest_wins, quests),
        team_acc: Rate::new(just_team_wins, just_teams),
        per_round_quest_win: per_round.map(|(w, t)| Rate::new(w, t)),
        hallucination_counts: summarize(&findings, &done_owned),
    })
}
