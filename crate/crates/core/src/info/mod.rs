//! Role dealing and the asymmetric-knowledge model.

mod prompt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use prompt::{
    render_action_description, render_global_prompt, GlobalPrompt, PromptBundle, PromptTemplates,
    TemplateError,
};

use crate::game::{join_numbers, PlayerId, Role, Side, Team, NUM_PLAYERS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("role multiset must be {expected:?}, got {found:?}")]
pub struct AssignmentError {
    expected: [Role; NUM_PLAYERS],
    found: Vec<Role>,
}

/// Seat-indexed roles for one game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Role>", into = "Vec<Role>")]
pub struct RoleAssignment([Role; NUM_PLAYERS]);

impl RoleAssignment {
    /// Builds an assignment from seat-ordered roles, checking the deck.
    pub fn from_roles(roles: [Role; NUM_PLAYERS]) -> Result<Self, AssignmentError> {
        let mut sorted = roles;
        sorted.sort();
        if sorted != Role::DECK {
            return Err(AssignmentError {
                expected: Role::DECK,
                found: roles.to_vec(),
            });
        }
        Ok(Self(roles))
    }

    pub fn roles(&self) -> &[Role; NUM_PLAYERS] {
        &self.0
    }

    pub fn role_of(&self, p: PlayerId) -> Role {
        self.0[p.slot()]
    }

    pub fn side_of(&self, p: PlayerId) -> Side {
        self.role_of(p).side()
    }

    pub fn seats_of(&self, role: Role) -> Vec<PlayerId> {
        PlayerId::all().filter(|&p| self.role_of(p) == role).collect()
    }

    /// Seat of a role held by exactly one player.
    pub fn seat_of(&self, role: Role) -> PlayerId {
        self.seats_of(role)[0]
    }

    pub fn evil_set(&self) -> Team {
        PlayerId::all().filter(|&p| self.side_of(p) == Side::Evil).collect()
    }

    pub fn just_set(&self) -> Team {
        PlayerId::all().filter(|&p| self.side_of(p) == Side::Just).collect()
    }
}

impl TryFrom<Vec<Role>> for RoleAssignment {
    type Error = AssignmentError;

    fn try_from(v: Vec<Role>) -> Result<Self, Self::Error> {
        let roles: [Role; NUM_PLAYERS] = v.clone().try_into().map_err(|_| AssignmentError {
            expected: Role::DECK,
            found: v,
        })?;
        Self::from_roles(roles)
    }
}

impl From<RoleAssignment> for Vec<Role> {
    fn from(a: RoleAssignment) -> Vec<Role> {
        a.0.to_vec()
    }
}

/// Shuffles the deck: uniform over the 7!/2! distinct seatings.
pub fn deal_roles<R: Rng + ?Sized>(rng: &mut R) -> RoleAssignment {
    let mut deck = Role::DECK;
    deck.shuffle(rng);
    RoleAssignment(deck)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactKind {
    /// Merlin: the evil seats, without their roles.
    EvilSet(Team),
    /// Percival: Merlin and Morgana, indistinguishably.
    MerlinMorganaPair([PlayerId; 2]),
    /// Evil seats: every evil seat with its role.
    EvilTeammates(Vec<(PlayerId, Role)>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivateFact {
    pub kind: FactKind,
    pub text: String,
}

impl PrivateFact {
    fn new(kind: FactKind) -> Self {
        let text = match &kind {
            FactKind::EvilSet(team) => format!(
                "Players {} belong to the evil side.",
                join_numbers(team.iter())
            ),
            FactKind::MerlinMorganaPair([a, b]) => format!(
                "Among players {a} and {b}, one is good and the other evil, but you can't discern who is who."
            ),
            FactKind::EvilTeammates(members) => {
                let seats = join_numbers(members.iter().map(|(p, _)| p));
                let labels = join_numbers(
                    members
                        .iter()
                        .map(|(p, r)| format!("player {p} is {}", article_title(*r))),
                );
                format!("Players {seats} belong to the evil side: {labels}.")
            }
        };
        Self { kind, text }
    }
}

fn article_title(role: Role) -> String {
    match role {
        Role::Merlin | Role::Percival | Role::Morgana => role.title().to_string(),
        _ => format!("the {}", role.title()),
    }
}

/// What one seat privately knows at the start of the game.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeView {
    pub player: PlayerId,
    pub own_role: Role,
    pub private_facts: Vec<PrivateFact>,
}

impl KnowledgeView {
    pub fn side(&self) -> Side {
        self.own_role.side()
    }
}

pub fn knowledge_for(assignment: &RoleAssignment, player: PlayerId) -> KnowledgeView {
    let own_role = assignment.role_of(player);
    let private_facts = match own_role {
        Role::Merlin => vec![PrivateFact::new(FactKind::EvilSet(assignment.evil_set()))],
        Role::Percival => {
            let mut pair = [
                assignment.seat_of(Role::Merlin),
                assignment.seat_of(Role::Morgana),
            ];
            pair.sort();
            vec![PrivateFact::new(FactKind::MerlinMorganaPair(pair))]
        }
        Role::Servant => Vec::new(),
        Role::Morgana | Role::Assassin | Role::Minion => {
            let members = assignment
                .evil_set()
                .into_iter()
                .map(|p| (p, assignment.role_of(p)))
                .collect();
            vec![PrivateFact::new(FactKind::EvilTeammates(members))]
        }
    };
    KnowledgeView {
        player,
        own_role,
        private_facts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(i: u8) -> PlayerId {
        PlayerId::new(i).unwrap()
    }

    fn fixed() -> RoleAssignment {
        use Role::*;
        // evil at 1, 2, 6; Merlin at 3, Morgana at 1
        RoleAssignment::from_roles([Morgana, Assassin, Merlin, Percival, Servant, Minion, Servant])
            .unwrap()
    }

    #[test]
    fn deal_is_valid_and_seeded() {
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let x = deal_roles(&mut a);
            assert_eq!(x, deal_roles(&mut b));
            let mut sorted = *x.roles();
            sorted.sort();
            assert_eq!(sorted, Role::DECK);
        }
    }

    #[test]
    fn assignment_rejects_bad_deck() {
        use Role::*;
        assert!(RoleAssignment::from_roles([Merlin; 7]).is_err());
        let json = serde_json::to_string(&fixed()).unwrap();
        assert_eq!(serde_json::from_str::<RoleAssignment>(&json).unwrap(), fixed());
        assert!(serde_json::from_str::<RoleAssignment>(r#"["Merlin"]"#).is_err());
    }

    #[test]
    fn merlin_sees_evil_set_without_labels() {
        let v = knowledge_for(&fixed(), p(3));
        assert_eq!(v.own_role, Role::Merlin);
        assert_eq!(v.private_facts.len(), 1);
        assert_eq!(
            v.private_facts[0].kind,
            FactKind::EvilSet([p(1), p(2), p(6)].into_iter().collect())
        );
        assert_eq!(v.private_facts[0].text, "Players 1, 2, and 6 belong to the evil side.");
        for word in ["Morgana", "Assassin", "Minion"] {
            assert!(!v.private_facts[0].text.contains(word));
        }
    }

    #[test]
    fn percival_pair_text() {
        use Role::*;
        let a = RoleAssignment::from_roles([Merlin, Servant, Percival, Morgana, Servant, Assassin, Minion])
            .unwrap();
        let v = knowledge_for(&a, p(3));
        assert_eq!(v.private_facts[0].kind, FactKind::MerlinMorganaPair([p(1), p(4)]));
        assert_eq!(
            v.private_facts[0].text,
            "Among players 1 and 4, one is good and the other evil, but you can't discern who is who."
        );
    }

    #[test]
    fn servant_knows_nothing() {
        assert!(knowledge_for(&fixed(), p(5)).private_facts.is_empty());
    }

    #[test]
    fn evil_sees_labelled_teammates() {
        let v = knowledge_for(&fixed(), p(2));
        match &v.private_facts[0].kind {
            FactKind::EvilTeammates(m) => {
                assert_eq!(m, &vec![(p(1), Role::Morgana), (p(2), Role::Assassin), (p(6), Role::Minion)])
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(
            v.private_facts[0].text,
            "Players 1, 2, and 6 belong to the evil side: player 1 is Morgana, player 2 is the Assassin, and player 6 is the Minion of Mordred."
        );
    }
}
