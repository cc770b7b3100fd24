use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::random::random_team;
use super::scripted::evil_policy;
use super::{Action, Agent, AgentAbort, AgentFault, Journal, LegalAction, Observation};
use crate::deduction::{belief, constraints_for, select_team, BeliefState, DeductionError};
use crate::game::{PlayerId, Side, Team};

pub(crate) const NEUTRAL_DISCUSSION: &str =
    "I will back this team only if its members are the players most likely to be good given the quest results so far.";

fn beliefs(obs: &Observation) -> Result<BeliefState, DeductionError> {
    belief(&constraints_for(&obs.knowledge, &obs.public_facts, &obs.config))
}

/// Approve iff every member is at least as likely to be good as the n-th
/// most trusted seat.
pub(crate) fn approves(b: &BeliefState, team: &Team, n: usize) -> bool {
    let mut ranked: Vec<Ratio<u64>> = PlayerId::all().map(|p| b.p_good(p)).collect();
    ranked.sort_by(|a, b| b.cmp(a));
    let cutoff = ranked[n.clamp(1, ranked.len()) - 1];
    team.iter().all(|&m| b.p_good(m) >= cutoff)
}

/// The deduction policy for any seat; evil seats use the scripted policy.
pub(crate) fn deduction_policy<R: Rng + ?Sized>(obs: &Observation, rng: &mut R, journal: &mut Journal) -> Action {
    if obs.knowledge.side() == Side::Evil {
        return evil_policy(obs, rng);
    }
    match obs.legal {
        LegalAction::SelectTeam { size } => match beliefs(obs) {
            Ok(b) => Action::SelectTeam {
                members: select_team(&b, size).into_iter().map(PlayerId::get).collect(),
                statement: None,
            },
            Err(_) => {
                journal.fault(obs.player, AgentFault::Contradiction, "", true);
                Action::SelectTeam {
                    members: random_team(rng, size),
                    statement: None,
                }
            }
        },
        LegalAction::Discuss => Action::Discuss {
            text: NEUTRAL_DISCUSSION.into(),
        },
        LegalAction::TeamVote => {
            let team = obs.proposal.as_ref().map(|p| p.members.clone()).unwrap_or_default();
            let approve = match beliefs(obs) {
                Ok(b) => approves(&b, &team, team.len()),
                Err(_) => {
                    journal.fault(obs.player, AgentFault::Contradiction, "", true);
                    true
                }
            };
            Action::TeamVote { approve, reasoning: None }
        }
        LegalAction::QuestVote => Action::QuestVote { succeed: true },
        // only reachable through a misconfigured seat; any target is legal
        LegalAction::Assassinate => Action::Assassinate { target: obs.player.get() },
    }
}

/// Exact possible-worlds reasoning over private knowledge and quest results.
pub struct DeductionAgent {
    rng: ChaCha8Rng,
}

impl DeductionAgent {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Agent for DeductionAgent {
    fn kind(&self) -> String {
        "deduction".into()
    }

    fn act(&mut self, obs: &Observation, journal: &mut Journal) -> Result<Action, AgentAbort> {
        Ok(deduction_policy(obs, &mut self.rng, journal))
    }
}
