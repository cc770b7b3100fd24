//! Two-tier agent memory: a per-seat global memory (key information plus the
//! last `k` visible entries) and the leader memory assembled at team
//! selection from the authoritative quest history.

use std::collections::VecDeque;
use std::sync::{Arc, OnceLock};

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use crate::event::{EventKind, EventLogEntry};
use crate::game::{quest_sentence, GameState, PlayerId, Team};
use crate::info::{KnowledgeView, PrivateFact};

pub const DEFAULT_WINDOW: usize = 15;

/// Identity-claim detectors for discussion text, one regex per line.
#[derive(Debug, Clone)]
pub struct KeyInfoPatterns {
    patterns: Vec<Regex>,
}

impl KeyInfoPatterns {
    pub fn parse(source: &str) -> Result<Self, regex::Error> {
        let patterns = source
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| RegexBuilder::new(l).case_insensitive(true).build())
            .collect::<Result<_, _>>()?;
        Ok(Self { patterns })
    }

    pub fn builtin() -> Arc<Self> {
        static BUILTIN: OnceLock<Arc<KeyInfoPatterns>> = OnceLock::new();
        BUILTIN
            .get_or_init(|| {
                Arc::new(
                    Self::parse(include_str!("../resources/key_info_patterns.txt"))
                        .expect("builtin key-info patterns compile"),
                )
            })
            .clone()
    }

    pub fn matches(&self, text: &str) -> bool {
        self.patterns.iter().any(|r| r.is_match(text))
    }
}

/// Whether an entry is kept beyond the sliding window.
pub fn is_key_info(entry: &EventLogEntry, patterns: &KeyInfoPatterns) -> bool {
    match entry.kind() {
        EventKind::ModeratorNote
        | EventKind::TeamProposed
        | EventKind::BallotResult
        | EventKind::QuestResult
        | EventKind::AssassinationResult => true,
        EventKind::Discussion => patterns.matches(&entry.text),
        _ => false,
    }
}

#[derive(Debug, Clone)]
pub struct GlobalMemory {
    owner: PlayerId,
    k: usize,
    key_info: Vec<EventLogEntry>,
    window: VecDeque<EventLogEntry>,
    patterns: Arc<KeyInfoPatterns>,
}

impl GlobalMemory {
    pub fn new(owner: PlayerId, k: usize) -> Self {
        Self::with_patterns(owner, k, KeyInfoPatterns::builtin())
    }

    pub fn with_patterns(owner: PlayerId, k: usize, patterns: Arc<KeyInfoPatterns>) -> Self {
        Self {
            owner,
            k,
            key_info: Vec::new(),
            window: VecDeque::with_capacity(k + 1),
            patterns,
        }
    }

    pub fn owner(&self) -> PlayerId {
        self.owner
    }

    /// Ingests an entry if the owner may see it. Returns whether it was taken.
    pub fn ingest_event(&mut self, entry: &EventLogEntry) -> bool {
        if !entry.visible_to(self.owner) {
            return false;
        }
        if is_key_info(entry, &self.patterns) {
            self.key_info.push(entry.clone());
        }
        self.window.push_back(entry.clone());
        while self.window.len() > self.k {
            self.window.pop_front();
        }
        true
    }

    pub fn window(&self) -> impl Iterator<Item = &EventLogEntry> {
        self.window.iter()
    }

    pub fn key_info(&self) -> &[EventLogEntry] {
        &self.key_info
    }

    /// Chronological history text: key information that has left the window,
    /// then the window verbatim. Empty when nothing has been observed.
    pub fn render_game_history(&self) -> String {
        let oldest_in_window = self.window.front().map_or(u64::MAX, |e| e.seq);
        let digest: Vec<String> = self
            .key_info
            .iter()
            .filter(|e| e.seq < oldest_in_window)
            .map(EventLogEntry::transcript_line)
            .collect();
        let recent: Vec<String> = self.window.iter().map(EventLogEntry::transcript_line).collect();
        let mut out = String::new();
        if !digest.is_empty() {
            out.push_str("Key information from earlier:\n");
            out.push_str(&digest.join("\n"));
        }
        if !recent.is_empty() {
            if !out.is_empty() {
                out.push_str("\n\n");
            }
            out.push_str("Recent messages:\n");
            out.push_str(&recent.join("\n"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestResultKind {
    Success,
    Failure,
}

/// One executed quest as every player saw it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicFact {
    pub round: u8,
    pub team: Team,
    pub result: QuestResultKind,
    pub sabotage_count: Option<usize>,
}

impl PublicFact {
    pub fn success(&self) -> bool {
        self.result == QuestResultKind::Success
    }

    pub fn text(&self) -> String {
        quest_sentence(self.round, &self.team, self.success(), self.sabotage_count)
    }
}

/// Public quest facts straight from the engine's quest history.
pub fn public_facts(state: &GameState) -> Vec<PublicFact> {
    let reveal = state.config().reveal_sabotage_count;
    state
        .quest_history()
        .iter()
        .map(|q| PublicFact {
            round: q.round,
            team: q.team.clone(),
            result: if q.success {
                QuestResultKind::Success
            } else {
                QuestResultKind::Failure
            },
            sabotage_count: reveal.then_some(q.sabotage_count),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeaderMemory {
    pub private_facts: Vec<PrivateFact>,
    pub public_facts: Vec<PublicFact>,
}

/// Rebuilt from the engine every time it is needed; never cached.
pub fn build_leader_memory(state: &GameState, leader_view: &KnowledgeView) -> LeaderMemory {
    LeaderMemory {
        private_facts: leader_view.private_facts.clone(),
        public_facts: public_facts(state),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{Actor, EventPayload, Note, Visibility};
    use crate::game::{BallotSheet, GameConfig, Phase, Role};
    use crate::info::{knowledge_for, RoleAssignment};
    use std::collections::BTreeMap;

    fn p(i: u8) -> PlayerId {
        PlayerId::new(i).unwrap()
    }

    fn entry(seq: u64, actor: Actor, visibility: Visibility, payload: EventPayload, text: &str) -> EventLogEntry {
        EventLogEntry {
            seq,
            game_id: "t".into(),
            round: 1,
            attempt: 1,
            phase: Phase::Discussion,
            actor,
            visibility,
            payload,
            text: text.into(),
        }
    }

    fn talk(seq: u64, speaker: u8, text: &str) -> EventLogEntry {
        entry(
            seq,
            Actor::Player(p(speaker)),
            Visibility::Public,
            EventPayload::Discussion { speaker: p(speaker) },
            text,
        )
    }

    #[test]
    fn key_info_rules() {
        let pat = KeyInfoPatterns::builtin();
        assert!(is_key_info(&talk(0, 1, "I am Merlin"), &pat));
        assert!(is_key_info(&talk(0, 1, "I think player 4 is evil."), &pat));
        assert!(is_key_info(&talk(0, 1, "Players 2 and 3 are trustworthy"), &pat));
        assert!(!is_key_info(&talk(0, 1, "let's proceed"), &pat));
        let q = entry(
            0,
            Actor::Moderator,
            Visibility::Public,
            EventPayload::QuestResult {
                round: 1,
                leader: p(1),
                team: Team::new(),
                success: true,
                sabotage_count: None,
                forced: false,
            },
            "",
        );
        assert!(is_key_info(&q, &pat));
    }

    #[test]
    fn window_evicts_oldest_beyond_k() {
        let mut m = GlobalMemory::new(p(1), 15);
        for i in 0..16 {
            m.ingest_event(&talk(i, 2, &format!("chat {i}")));
        }
        let seqs: Vec<u64> = m.window().map(|e| e.seq).collect();
        assert_eq!(seqs.len(), 15);
        assert_eq!(seqs[0], 1);
    }

    #[test]
    fn moderator_notes_survive_eviction() {
        let mut m = GlobalMemory::new(p(1), 3);
        let note = entry(
            0,
            Actor::Moderator,
            Visibility::Public,
            EventPayload::ModeratorNote {
                note: Note::DiscussionOpened,
            },
            "note",
        );
        m.ingest_event(&note);
        for i in 1..10 {
            m.ingest_event(&talk(i, 2, "nothing"));
        }
        assert!(m.window().all(|e| e.seq != 0));
        assert_eq!(m.key_info()[0].seq, 0);
        let hist = m.render_game_history();
        assert!(hist.starts_with("Key information from earlier:\nModerator: note"));
    }

    #[test]
    fn others_ballots_not_ingested() {
        let mut m = GlobalMemory::new(p(1), 15);
        let ballot = |voter: u8| {
            entry(
                0,
                Actor::Player(p(voter)),
                Visibility::Private(p(voter)),
                EventPayload::Ballot {
                    voter: p(voter),
                    approve: true,
                    reasoning: None,
                },
                "",
            )
        };
        assert!(!m.ingest_event(&ballot(2)));
        assert!(m.ingest_event(&ballot(1)));
    }

    #[test]
    fn empty_history_renders_empty() {
        assert_eq!(GlobalMemory::new(p(1), 15).render_game_history(), "");
    }

    #[test]
    fn twenty_messages_k15() {
        let mut m = GlobalMemory::new(p(1), 15);
        for i in 0..20 {
            m.ingest_event(&talk(i, 2, if i == 0 { "I am Percival" } else { "ok" }));
        }
        let hist = m.render_game_history();
        let recent = hist.split("Recent messages:\n").nth(1).unwrap();
        assert_eq!(recent.lines().count(), 15);
        assert!(hist.contains("Player 2: I am Percival"));
    }

    fn fixed_roles() -> RoleAssignment {
        use Role::*;
        RoleAssignment::from_roles([Morgana, Assassin, Merlin, Percival, Servant, Minion, Servant])
            .unwrap()
    }

    #[test]
    fn leader_memory_tracks_quest_history() {
        // find a seed whose deal puts evil on seats 1 or 2 so the first quest fails
        let mut seed = 0;
        let mut state = loop {
            let s = GameState::new(GameConfig {
                communication_enabled: false,
                ..GameConfig::default().with_seed(seed)
            })
            .unwrap();
            if s.roles().side_of(p(1)) == crate::game::Side::Evil {
                break s;
            }
            seed += 1;
        };
        let leader = state.assign_leader().unwrap();
        let view = knowledge_for(state.roles(), leader);
        assert!(build_leader_memory(&state, &view).public_facts.is_empty());
        state.propose_team(leader, &[1, 2], None).unwrap();
        state
            .submit_ballots(BallotSheet::from_fn(|_| true), BTreeMap::new())
            .unwrap();
        state.execute_quest(&BTreeMap::new()).unwrap();
        let mem = build_leader_memory(&state, &view);
        assert_eq!(
            mem.public_facts,
            vec![PublicFact {
                round: 1,
                team: [p(1), p(2)].into_iter().collect(),
                result: QuestResultKind::Failure,
                sabotage_count: None,
            }]
        );
        assert_eq!(
            mem.public_facts[0].text(),
            "In the initial round, players 1 and 2 were selected for the quest, which ended in failure."
        );
    }

    #[test]
    fn percival_leader_memory_has_pair() {
        let state = GameState::new(GameConfig::default()).unwrap();
        let view = knowledge_for(&fixed_roles(), p(4));
        let mem = build_leader_memory(&state, &view);
        assert!(mem.private_facts[0].text.contains("Among players 1 and 3"));
    }
}
