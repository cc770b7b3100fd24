//! Offline audit of game records for mechanically checkable hallucinations:
//! wrong-size or invalid team selections, votes contradicting their own
//! reasoning, harness fallbacks, and discussion claims that contradict the
//! public quest history.
//!
//! Claim extraction uses a fixed, narrow pattern grammar shipped in
//! `resources/analyzer_patterns.txt`. Text outside that grammar is not judged,
//! and role claims are never flagged.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::AgentFault;
use crate::event::{EventKind, EventLogEntry, EventPayload};
use crate::game::{PlayerId, Team};
use crate::harness::GameRecord;

const BUILTIN: &str = include_str!("../../resources/analyzer_patterns.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FindingKind {
    TeamSizeViolation,
    InvalidPlayerRef,
    VoteReasoningMismatch,
    CounterfactualClaim,
    ParseFallbackUsed,
}

impl FindingKind {
    pub const ALL: [FindingKind; 5] = [
        FindingKind::TeamSizeViolation,
        FindingKind::InvalidPlayerRef,
        FindingKind::VoteReasoningMismatch,
        FindingKind::CounterfactualClaim,
        FindingKind::ParseFallbackUsed,
    ];
}

impl fmt::Display for FindingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyFinding {
    pub game_id: String,
    pub seq: u64,
    pub actor: PlayerId,
    pub kind: FindingKind,
    pub detail: String,
    /// The recorded event the claim contradicts, when there is one.
    pub evidence_seq: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatternError {
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("section [{0}] is missing or empty")]
    MissingSection(&'static str),
}

#[derive(Debug, Clone)]
pub struct AnalyzerPatterns {
    approve_contradicts: Vec<Regex>,
    reject_contradicts: Vec<Regex>,
    player_on_round: Vec<Regex>,
    round_result: Vec<Regex>,
    player_been_on_quest: Vec<Regex>,
}

const SECTIONS: [(&str, &[&str]); 5] = [
    ("vote.approve_contradicts", &[]),
    ("vote.reject_contradicts", &[]),
    ("claim.player_on_round", &["player", "round"]),
    ("claim.round_result", &["round", "result"]),
    ("claim.player_been_on_quest", &["player"]),
];

impl AnalyzerPatterns {
    pub fn parse(source: &str) -> Result<Self, PatternError> {
        let mut sections: BTreeMap<&str, Vec<Regex>> = BTreeMap::new();
        let mut current: Option<&str> = None;
        for (i, raw) in source.lines().enumerate() {
            let line = raw.trim();
            let invalid = |message: String| PatternError::Invalid { line: i + 1, message };
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let (known, _) = SECTIONS
                    .iter()
                    .find(|(s, _)| *s == name)
                    .ok_or_else(|| invalid(format!("unknown section [{name}]")))?;
                current = Some(known);
                continue;
            }
            let name = current.ok_or_else(|| invalid("pattern before any section".into()))?;
            let re = Regex::new(line).map_err(|e| invalid(e.to_string()))?;
            let (_, groups) = SECTIONS.iter().find(|(s, _)| *s == name).expect("known section");
            if let Some(g) = groups.iter().find(|g| !re.capture_names().any(|n| n == Some(**g))) {
                return Err(invalid(format!("pattern lacks the named group {g:?}")));
            }
            sections.entry(name).or_default().push(re);
        }
        let mut take = |name: &'static str| {
            sections
                .remove(name)
                .filter(|v| !v.is_empty())
                .ok_or(PatternError::MissingSection(name))
        };
        Ok(Self {
            approve_contradicts: take(SECTIONS[0].0)?,
            reject_contradicts: take(SECTIONS[1].0)?,
            player_on_round: take(SECTIONS[2].0)?,
            round_result: take(SECTIONS[3].0)?,
            player_been_on_quest: take(SECTIONS[4].0)?,
        })
    }

    pub fn builtin() -> Arc<Self> {
        static CELL: OnceLock<Arc<AnalyzerPatterns>> = OnceLock::new();
        CELL.get_or_init(|| Arc::new(Self::parse(BUILTIN).expect("builtin analyzer patterns")))
            .clone()
    }
}

fn finding(
    record: &GameRecord,
    e: &EventLogEntry,
    actor: PlayerId,
    kind: FindingKind,
    detail: String,
    evidence_seq: Option<u64>,
) -> ConsistencyFinding {
    ConsistencyFinding {
        game_id: record.header.game_id.clone(),
        seq: e.seq,
        actor,
        kind,
        detail,
        evidence_seq,
    }
}

/// Wrong-size or invalid raw team selections, votes whose reasoning states
/// the opposite vote, and every logged fallback.
pub fn check_structural(record: &GameRecord, patterns: &AnalyzerPatterns) -> Vec<ConsistencyFinding> {
    let mut out = Vec::new();
    for e in &record.events {
        match &e.payload {
            EventPayload::AgentError {
                agent,
                fault,
                fallback_used,
                ..
            } => {
                match fault {
                    AgentFault::TeamSize { required, selected } => out.push(finding(
                        record,
                        e,
                        *agent,
                        FindingKind::TeamSizeViolation,
                        format!("selected {selected} players for a {required}-player team"),
                        None,
                    )),
                    AgentFault::InvalidPlayer { player } => out.push(finding(
                        record,
                        e,
                        *agent,
                        FindingKind::InvalidPlayerRef,
                        format!("referred to nonexistent player {player}"),
                        None,
                    )),
                    _ => {}
                }
                if *fallback_used {
                    out.push(finding(
                        record,
                        e,
                        *agent,
                        FindingKind::ParseFallbackUsed,
                        format!("harness fallback after {fault:?}"),
                        None,
                    ));
                }
            }
            EventPayload::Ballot {
                voter,
                approve,
                reasoning: Some(reasoning),
            } => {
                let contra = if *approve {
                    &patterns.approve_contradicts
                } else {
                    &patterns.reject_contradicts
                };
                if let Some(m) = contra.iter().find_map(|re| re.find(reasoning)) {
                    let vote = if *approve { "approve" } else { "reject" };
                    out.push(finding(
                        record,
                        e,
                        *voter,
                        FindingKind::VoteReasoningMismatch,
                        format!("voted {vote} but reasoned {:?}", m.as_str()),
                        None,
                    ));
                }
            }
            _ => {}
        }
    }
    out
}

struct PastQuest {
    seq: u64,
    round: u8,
    team: Team,
    success: bool,
}

fn round_word(word: &str, past: &[PastQuest]) -> Option<u8> {
    Some(match word.to_ascii_lowercase().as_str() {
        "first" | "initial" => 1,
        "second" => 2,
        "third" => 3,
        "fourth" => 4,
        "fifth" => 5,
        "last" | "previous" => past.last()?.round,
        _ => return None,
    })
}

fn player_of(c: &Captures<'_>) -> Option<PlayerId> {
    PlayerId::new(c.name("player")?.as_str().parse().ok()?)
}

/// Discussion claims about quest membership and results checked against the
/// quest history public at the time of the utterance.
pub fn check_claims(record: &GameRecord, patterns: &AnalyzerPatterns) -> Vec<ConsistencyFinding> {
    let mut out = Vec::new();
    let mut past: Vec<PastQuest> = Vec::new();
    for e in &record.events {
        match &e.payload {
            EventPayload::QuestResult {
                round, team, success, ..
            } => past.push(PastQuest {
                seq: e.seq,
                round: *round,
                team: team.clone(),
                success: *success,
            }),
            EventPayload::Discussion { speaker } => {
                for (detail, evidence) in contradicted_claims(&e.text, &past, patterns) {
                    out.push(finding(
                        record,
                        e,
                        *speaker,
                        FindingKind::CounterfactualClaim,
                        detail,
                        Some(evidence),
                    ));
                }
            }
            _ => {}
        }
    }
    out
}

fn contradicted_claims(text: &str, past: &[PastQuest], p: &AnalyzerPatterns) -> Vec<(String, u64)> {
    let mut out = Vec::new();
    let quest_in = |round: u8| past.iter().find(|q| q.round == round);
    for c in p.player_on_round.iter().flat_map(|re| re.captures_iter(text)) {
        let (Some(player), Some(q)) = (
            player_of(&c),
            c.name("round").and_then(|r| round_word(r.as_str(), past)).and_then(quest_in),
        ) else {
            continue;
        };
        let claimed_on = c.name("neg").is_none();
        if q.team.contains(&player) != claimed_on {
            out.push((format!("{:?} contradicts the round {} team", &c[0], q.round), q.seq));
        }
    }
    for c in p.round_result.iter().flat_map(|re| re.captures_iter(text)) {
        let Some(q) = c.name("round").and_then(|r| round_word(r.as_str(), past)).and_then(quest_in) else {
            continue;
        };
        let claimed_success = c["result"].to_ascii_lowercase().starts_with("succe");
        if q.success != claimed_success {
            out.push((format!("{:?} contradicts the round {} result", &c[0], q.round), q.seq));
        }
    }
    for c in p.player_been_on_quest.iter().flat_map(|re| re.captures_iter(text)) {
        let Some(player) = player_of(&c) else { continue };
        let claimed_on = c.name("neg").is_none();
        let window: &[PastQuest] = if c.name("recent").is_some() {
            past.last().map(std::slice::from_ref).unwrap_or(&[])
        } else {
            past
        };
        let hit = window.iter().find(|q| q.team.contains(&player));
        match (claimed_on, hit) {
            (false, Some(q)) => {
                out.push((format!("{:?} but player {player} was on the round {} team", &c[0], q.round), q.seq))
            }
            (true, None) if !window.is_empty() => {
                let last = window.last().expect("non-empty");
                out.push((format!("{:?} but player {player} was on no quest team", &c[0]), last.seq))
            }
            _ => {}
        }
    }
    out
}

/// Structural and claim findings for one record, ordered by seq.
pub fn analyze(record: &GameRecord, patterns: &AnalyzerPatterns) -> Vec<ConsistencyFinding> {
    let mut all = check_structural(record, patterns);
    all.extend(check_claims(record, patterns));
    all.sort_by(|a, b| (a.seq, a.kind).cmp(&(b.seq, b.kind)));
    all
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HallucinationSummary {
    pub counts: BTreeMap<FindingKind, u64>,
    pub utterances: u64,
    /// Findings per 100 discussion utterances; `None` without utterances.
    pub per_100_utterances: BTreeMap<FindingKind, Option<f64>>,
}

pub fn summarize(findings: &[ConsistencyFinding], records: &[GameRecord]) -> HallucinationSummary {
    let mut counts: BTreeMap<FindingKind, u64> = FindingKind::ALL.iter().map(|&k| (k, 0)).collect();
    for f in findings {
        *counts.entry(f.kind).or_default() += 1;
    }
    let utterances = records
        .iter()
        .flat_map(|r| &r.events)
        .filter(|e| e.kind() == EventKind::Discussion)
        .count() as u64;
    let per_100_utterances = counts
        .iter()
        .map(|(&k, &n)| (k, (utterances > 0).then(|| n as f64 * 100.0 / utterances as f64)))
        .collect();
    HallucinationSummary {
        counts,
        utterances,
        per_100_utterances,
    }
}
