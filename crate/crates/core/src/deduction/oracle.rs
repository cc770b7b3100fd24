//! Reference enumerator, deliberately sharing nothing with the fast path:
//! it builds seatings by recursive placement and checks constraints with set
//! operations. Counts are over full seatings, so compare `p_good`, not
//! `n_worlds`.

use std::collections::BTreeSet;

use num_rational::Ratio;

use super::{BeliefState, Constraint, ConstraintSet, DeductionError, EnumerationLevel};
use crate::game::{PlayerId, Role, Side, NUM_PLAYERS};

fn seatings() -> Vec<Vec<Role>> {
    fn place(remaining: &mut Vec<(Role, usize)>, acc: &mut Vec<Role>, out: &mut Vec<Vec<Role>>) {
        if acc.len() == NUM_PLAYERS {
            out.push(acc.clone());
            return;
        }
        for i in 0..remaining.len() {
            if remaining[i].1 == 0 {
                continue;
            }
            remaining[i].1 -= 1;
            acc.push(remaining[i].0);
            place(remaining, acc, out);
            acc.pop();
            remaining[i].1 += 1;
        }
    }
    let mut counts: Vec<(Role, usize)> = Vec::new();
    for r in Role::DECK {
        match counts.iter_mut().find(|(x, _)| *x == r) {
            Some(c) => c.1 += 1,
            None => counts.push((r, 1)),
        }
    }
    let mut out = Vec::new();
    place(&mut counts, &mut Vec::new(), &mut out);
    out
}

fn satisfied(c: &Constraint, seating: &[Role]) -> bool {
    let evil: BTreeSet<u8> = (1..=NUM_PLAYERS as u8)
        .filter(|&i| seating[i as usize - 1].side() == Side::Evil)
        .collect();
    let evil_in = |players: &BTreeSet<PlayerId>| {
        players.iter().filter(|p| evil.contains(&p.get())).count()
    };
    match c {
        Constraint::IsGood { player } => !evil.contains(&player.get()),
        Constraint::IsEvil { player } => evil.contains(&player.get()),
        Constraint::AtLeastKEvil { players, k } => evil_in(players) >= *k,
        Constraint::AtMostKEvil { players, k } => evil_in(players) <= *k,
        Constraint::ExactlyKEvil { players, k } => evil_in(players) == *k,
        Constraint::HasRole { player, role } => seating[player.get() as usize - 1] == *role,
    }
}

/// Brute-force posterior over every seating of the deck.
pub fn brute_force_oracle(cs: &ConstraintSet) -> Result<BeliefState, DeductionError> {
    let mut total = 0u64;
    let mut good = [0u64; NUM_PLAYERS];
    for seating in seatings() {
        if cs.constraints().all(|c| satisfied(c, &seating)) {
            total += 1;
            for (i, r) in seating.iter().enumerate() {
                if r.side() == Side::Just {
                    good[i] += 1;
                }
            }
        }
    }
    if total == 0 {
        return Err(DeductionError::Contradiction);
    }
    Ok(BeliefState {
        level: EnumerationLevel::RoleLevel,
        n_worlds: total,
        p_good: good.map(|g| Ratio::new(g, total)),
    })
}
