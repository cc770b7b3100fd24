use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Action, Agent, AgentAbort, Journal, LegalAction, Observation};
use crate::game::{PlayerId, Side};

/// A uniformly random team of `n` seats, sorted.
pub(crate) fn random_team<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<u8> {
    let mut seats: Vec<u8> = PlayerId::all().map(PlayerId::get).collect();
    seats.shuffle(rng);
    seats.truncate(n);
    seats.sort_unstable();
    seats
}

/// Uniform choices everywhere; quest votes follow its side.
pub struct RandomAgent {
    rng: ChaCha8Rng,
}

impl RandomAgent {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Agent for RandomAgent {
    fn kind(&self) -> String {
        "random".into()
    }

    fn act(&mut self, obs: &Observation, _journal: &mut Journal) -> Result<Action, AgentAbort> {
        Ok(match obs.legal {
            LegalAction::SelectTeam { size } => Action::SelectTeam {
                members: random_team(&mut self.rng, size),
                statement: None,
            },
            LegalAction::Discuss => Action::Discuss {
                text: "I have no strong opinion about this team.".into(),
            },
            LegalAction::TeamVote => Action::TeamVote {
                approve: self.rng.random_bool(0.5),
                reasoning: None,
            },
            LegalAction::QuestVote => Action::QuestVote {
                succeed: obs.knowledge.side() == Side::Just,
            },
            LegalAction::Assassinate => {
                let evil = crate::agents::scripted::known_evil(&obs.knowledge);
                let candidates: Vec<u8> = PlayerId::all()
                    .filter(|p| !evil.contains(p))
                    .map(PlayerId::get)
                    .collect();
                Action::Assassinate {
                    target: *candidates.choose(&mut self.rng).expect("a just seat exists"),
                }
            }
        })
    }
}
