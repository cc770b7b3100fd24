use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{Action, Agent, AgentAbort, Journal, LegalAction, Observation};
use crate::game::{PlayerId, Side, Team};
use crate::info::{FactKind, KnowledgeView};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("the scripted evil agent cannot play just seat {0}")]
pub struct NotEvilSeat(pub PlayerId);

/// Evil seats this player knows about (always includes itself when evil).
pub(crate) fn known_evil(view: &KnowledgeView) -> Team {
    let mut evil = Team::new();
    if view.side() == Side::Evil {
        evil.insert(view.player);
    }
    for fact in &view.private_facts {
        match &fact.kind {
            FactKind::EvilTeammates(m) => evil.extend(m.iter().map(|(p, _)| *p)),
            FactKind::EvilSet(t) if view.side() == Side::Evil => evil.extend(t.iter().copied()),
            _ => {}
        }
    }
    evil
}

/// Fixed evil policy shared with the deduction agent's evil seats: stack
/// teams with evil, back any team holding an evil seat, always sabotage.
pub(crate) fn evil_policy<R: Rng + ?Sized>(obs: &Observation, rng: &mut R) -> Action {
    let evil = known_evil(&obs.knowledge);
    let mut just: Vec<u8> = PlayerId::all()
        .filter(|p| !evil.contains(p))
        .map(PlayerId::get)
        .collect();
    match obs.legal {
        LegalAction::SelectTeam { size } => {
            let mut members: Vec<u8> = std::iter::once(obs.player)
                .chain(evil.iter().copied().filter(|&p| p != obs.player))
                .take(size)
                .map(PlayerId::get)
                .collect();
            just.shuffle(rng);
            members.extend(just.into_iter().take(size - members.len()));
            members.sort_unstable();
            Action::SelectTeam { members, statement: None }
        }
        LegalAction::Discuss => {
            let target = just.choose(rng).expect("just seats exist");
            Action::Discuss {
                text: format!("I suspect player {target} is on the evil side."),
            }
        }
        LegalAction::TeamVote => Action::TeamVote {
            approve: obs
                .proposal
                .as_ref()
                .is_some_and(|p| p.members.iter().any(|m| evil.contains(m))),
            reasoning: None,
        },
        LegalAction::QuestVote => Action::QuestVote { succeed: false },
        LegalAction::Assassinate => Action::Assassinate {
            target: *just.choose(rng).expect("just seats exist"),
        },
    }
}

pub struct ScriptedEvilAgent {
    rng: ChaCha8Rng,
}

impl ScriptedEvilAgent {
    pub fn new(view: &KnowledgeView, seed: u64) -> Result<Self, NotEvilSeat> {
        if view.side() != Side::Evil {
            return Err(NotEvilSeat(view.player));
        }
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }
}

impl Agent for ScriptedEvilAgent {
    fn kind(&self) -> String {
        "scripted-evil".into()
    }

    fn act(&mut self, obs: &Observation, _journal: &mut Journal) -> Result<Action, AgentAbort> {
        Ok(evil_policy(obs, &mut self.rng))
    }
}
