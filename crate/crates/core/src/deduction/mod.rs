//! Possible-worlds deduction.
//!
//! A world is an evil triple (side level) or a full seat-to-role assignment
//! (role level, used only when a constraint names a role). Beliefs are exact
//! rationals: the fraction of consistent worlds in which a seat is just.

mod oracle;
mod text;

use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use oracle::brute_force_oracle;
pub use text::{parse_constraints, render_constraints};

use crate::game::{team_mask, GameConfig, PlayerId, Role, Side, Team, NUM_EVIL, NUM_PLAYERS};
use crate::info::{FactKind, KnowledgeView, RoleAssignment};
use crate::memory::PublicFact;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeductionError {
    #[error("constraints admit no world")]
    Contradiction,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Constraint {
    IsGood { player: PlayerId },
    IsEvil { player: PlayerId },
    AtLeastKEvil { players: Team, k: usize },
    AtMostKEvil { players: Team, k: usize },
    ExactlyKEvil { players: Team, k: usize },
    /// Forces role-level enumeration.
    HasRole { player: PlayerId, role: Role },
}

impl Constraint {
    pub fn all_players() -> Team {
        PlayerId::all().collect()
    }

    /// The standing rule: exactly three evil seats.
    pub fn global() -> Self {
        Constraint::ExactlyKEvil {
            players: Self::all_players(),
            k: NUM_EVIL,
        }
    }

    pub fn needs_roles(&self) -> bool {
        matches!(self, Constraint::HasRole { .. })
    }

    /// Evaluated against an evil bitmask. Role constraints must use `holds_roles`.
    fn holds_mask(&self, evil: u8) -> bool {
        let count = |s: &Team| (team_mask(s) & evil).count_ones() as usize;
        match self {
            Constraint::IsGood { player } => evil & player.bit() == 0,
            Constraint::IsEvil { player } => evil & player.bit() != 0,
            Constraint::AtLeastKEvil { players, k } => count(players) >= *k,
            Constraint::AtMostKEvil { players, k } => count(players) <= *k,
            Constraint::ExactlyKEvil { players, k } => count(players) == *k,
            Constraint::HasRole { .. } => unreachable!("role constraint at side level"),
        }
    }

    fn holds_roles(&self, roles: &[Role; NUM_PLAYERS], evil: u8) -> bool {
        match self {
            Constraint::HasRole { player, role } => roles[player.slot()] == *role,
            other => other.holds_mask(evil),
        }
    }

    /// Whether the constraint is true of an actual deal.
    pub fn holds(&self, assignment: &RoleAssignment) -> bool {
        self.holds_roles(assignment.roles(), team_mask(&assignment.evil_set()))
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&text::render_one(self))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Rule,
    PrivateFact,
    QuestHistory,
    Manual,
}

/// Deduplicated constraints; the global three-evil rule is always present once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSet {
    items: Vec<(Constraint, Provenance)>,
}

impl Default for ConstraintSet {
    fn default() -> Self {
        Self::new()
    }
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self {
            items: vec![(Constraint::global(), Provenance::Rule)],
        }
    }

    /// Adds a constraint unless an identical one is already present.
    pub fn add(&mut self, c: Constraint, provenance: Provenance) -> bool {
        if self.items.iter().any(|(x, _)| *x == c) {
            return false;
        }
        self.items.push((c, provenance));
        true
    }

    pub fn extend(&mut self, cs: impl IntoIterator<Item = Constraint>, provenance: Provenance) {
        for c in cs {
            self.add(c, provenance);
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Constraint, Provenance)> {
        self.items.iter()
    }

    pub fn constraints(&self) -> impl Iterator<Item = &Constraint> {
        self.items.iter().map(|(c, _)| c)
    }

    pub fn level(&self) -> EnumerationLevel {
        if self.constraints().any(Constraint::needs_roles) {
            EnumerationLevel::RoleLevel
        } else {
            EnumerationLevel::SideLevel
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnumerationLevel {
    /// The 35 evil triples.
    SideLevel,
    /// The 2520 distinct seatings of the deck.
    RoleLevel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeliefState {
    pub level: EnumerationLevel,
    pub n_worlds: u64,
    pub p_good: [Ratio<u64>; NUM_PLAYERS],
}

impl BeliefState {
    pub fn p_good(&self, p: PlayerId) -> Ratio<u64> {
        self.p_good[p.slot()]
    }

    pub fn p_evil(&self, p: PlayerId) -> Ratio<u64> {
        Ratio::from_integer(1) - self.p_good(p)
    }

    /// Seats known to be just (probability one).
    pub fn certainly_good(&self) -> Team {
        PlayerId::all()
            .filter(|&p| self.p_good(p) == Ratio::from_integer(1))
            .collect()
    }

    pub fn certainly_evil(&self) -> Team {
        PlayerId::all()
            .filter(|&p| self.p_good(p) == Ratio::from_integer(0))
            .collect()
    }

    pub fn p_good_f64(&self) -> [f64; NUM_PLAYERS] {
        self.p_good.map(|r| *r.numer() as f64 / *r.denom() as f64)
    }
}

/// Evil triples as bitmasks, lexicographic in seat order.
pub fn side_worlds() -> impl Iterator<Item = u8> {
    (0..NUM_PLAYERS).flat_map(|i| {
        (i + 1..NUM_PLAYERS).flat_map(move |j| {
            (j + 1..NUM_PLAYERS).map(move |k| (1u8 << i) | (1 << j) | (1 << k))
        })
    })
}

/// Every distinct seating of the deck, via lexicographic next-permutation.
pub fn role_worlds() -> impl Iterator<Item = [Role; NUM_PLAYERS]> {
    let mut next = Some(Role::DECK);
    std::iter::from_fn(move || {
        let cur = next?;
        let mut perm = cur;
        next = next_permutation(&mut perm).then_some(perm);
        Some(cur)
    })
}

fn next_permutation<T: Ord>(v: &mut [T]) -> bool {
    let Some(i) = v.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = v.iter().rposition(|x| *x > v[i]).expect("pivot has a successor");
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

fn evil_mask(roles: &[Role; NUM_PLAYERS]) -> u8 {
    roles
        .iter()
        .enumerate()
        .filter(|(_, r)| r.side() == Side::Evil)
        .fold(0, |m, (i, _)| m | (1 << i))
}

fn finish(level: EnumerationLevel, n: u64, good: [u64; NUM_PLAYERS]) -> Result<BeliefState, DeductionError> {
    if n == 0 {
        return Err(DeductionError::Contradiction);
    }
    Ok(BeliefState {
        level,
        n_worlds: n,
        p_good: good.map(|g| Ratio::new(g, n)),
    })
}

/// Exact posterior over consistent worlds.
pub fn belief(cs: &ConstraintSet) -> Result<BeliefState, DeductionError> {
    let level = cs.level();
    let mut n = 0u64;
    let mut good = [0u64; NUM_PLAYERS];
    let mut tally = |evil: u8| {
        n += 1;
        for (i, g) in good.iter_mut().enumerate() {
            if evil & (1 << i) == 0 {
                *g += 1;
            }
        }
    };
    match level {
        EnumerationLevel::SideLevel => {
            for evil in side_worlds() {
                if cs.constraints().all(|c| c.holds_mask(evil)) {
                    tally(evil);
                }
            }
        }
        EnumerationLevel::RoleLevel => {
            for roles in role_worlds() {
                let evil = evil_mask(&roles);
                if cs.constraints().all(|c| c.holds_roles(&roles, evil)) {
                    tally(evil);
                }
            }
        }
    }
    finish(level, n, good)
}

/// The evil triples consistent with a side-level set, as teams.
pub fn consistent_evil_sets(cs: &ConstraintSet) -> Vec<Team> {
    side_worlds()
        .filter(|&m| cs.constraints().all(|c| !c.needs_roles() && c.holds_mask(m)))
        .map(crate::game::mask_team)
        .collect()
}

/// The `n` seats most likely to be just; ties go to the lower seat.
pub fn select_team(beliefs: &BeliefState, n: usize) -> Team {
    let mut seats: Vec<PlayerId> = PlayerId::all().collect();
    seats.sort_by(|a, b| beliefs.p_good(*b).cmp(&beliefs.p_good(*a)).then(a.cmp(b)));
    seats.into_iter().take(n).collect()
}

/// Constraints a seat can assert from its own private knowledge.
pub fn facts_from_private(view: &KnowledgeView) -> Vec<Constraint> {
    let me = view.player;
    let mut out = vec![match view.side() {
        Side::Just => Constraint::IsGood { player: me },
        Side::Evil => Constraint::IsEvil { player: me },
    }];
    for fact in &view.private_facts {
        match &fact.kind {
            FactKind::EvilSet(_) | FactKind::EvilTeammates(_) => {
                let evil = evil_set_of(&fact.kind);
                for p in PlayerId::all() {
                    out.push(if evil.contains(&p) {
                        Constraint::IsEvil { player: p }
                    } else {
                        Constraint::IsGood { player: p }
                    });
                }
            }
            FactKind::MerlinMorganaPair(pair) => out.push(Constraint::ExactlyKEvil {
                players: pair.iter().copied().collect(),
                k: 1,
            }),
        }
    }
    out.sort();
    out.dedup();
    out
}

fn evil_set_of(kind: &FactKind) -> Team {
    match kind {
        FactKind::EvilSet(t) => t.clone(),
        FactKind::EvilTeammates(m) => m.iter().map(|(p, _)| *p).collect(),
        FactKind::MerlinMorganaPair(_) => Team::new(),
    }
}

/// What an executed quest proves, given that evil members always sabotage.
pub fn facts_from_history(history: &[PublicFact], config: &GameConfig) -> Vec<Constraint> {
    history
        .iter()
        .map(|f| {
            let players = f.team.clone();
            let threshold = config.sabotage_threshold(f.round);
            match (f.sabotage_count, f.success()) {
                (Some(k), _) => Constraint::ExactlyKEvil { players, k },
                (None, false) => Constraint::AtLeastKEvil { players, k: threshold },
                (None, true) if threshold == 1 => Constraint::ExactlyKEvil { players, k: 0 },
                (None, true) => Constraint::AtMostKEvil {
                    players,
                    k: threshold - 1,
                },
            }
        })
        .collect()
}

/// The full constraint set for one seat at one point in the game.
pub fn constraints_for(view: &KnowledgeView, history: &[PublicFact], config: &GameConfig) -> ConstraintSet {
    let mut cs = ConstraintSet::new();
    cs.extend(facts_from_private(view), Provenance::PrivateFact);
    cs.extend(facts_from_history(history, config), Provenance::QuestHistory);
    cs
}
