// Line-oriented constraint syntax:
//
//   good 5
//   evil 1
//   exactly 1 evil in {1,3}
//   at least 2 evil in {1,2,4}
//   at most 1 evil in {2,3,5,7}
//   role 3 Merlin
//
// Blank lines and `#` comments are ignored.

use super::{Constraint, ConstraintSet, DeductionError, Provenance};
use crate::game::{PlayerId, Role, Team};

pub(super) fn render_one(c: &Constraint) -> String {
    let set = |t: &Team| {
        let inner: Vec<String> = t.iter().map(|p| p.to_string()).collect();
        format!("{{{}}}", inner.join(","))
    };
    match c {
        Constraint::IsGood { player } => format!("good {player}"),
        Constraint::IsEvil { player } => format!("evil {player}"),
        Constraint::AtLeastKEvil { players, k } => format!("at least {k} evil in {}", set(players)),
        Constraint::AtMostKEvil { players, k } => format!("at most {k} evil in {}", set(players)),
        Constraint::ExactlyKEvil { players, k } => format!("exactly {k} evil in {}", set(players)),
        Constraint::HasRole { player, role } => format!("role {player} {role}"),
    }
}

/// All constraints except the implicit global rule, one per line.
pub fn render_constraints(cs: &ConstraintSet) -> String {
    cs.iter()
        .filter(|(_, prov)| *prov != Provenance::Rule)
        .map(|(c, _)| render_one(c) + "\n")
        .collect()
}

/// Parses constraint text into a set marked `Manual`.
pub fn parse_constraints(src: &str) -> Result<ConstraintSet, DeductionError> {
    let mut cs = ConstraintSet::new();
    for (idx, raw) in src.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let c = parse_line(line).map_err(|message| DeductionError::Parse {
            line: idx + 1,
            message,
        })?;
        cs.add(c, Provenance::Manual);
    }
    Ok(cs)
}

fn player(tok: &str) -> Result<PlayerId, String> {
    let n: u8 = tok.parse().map_err(|_| format!("expected a seat number, got {tok:?}"))?;
    PlayerId::new(n).ok_or_else(|| format!("seat {n} is out of range"))
}

fn seat_set(tok: &str) -> Result<Team, String> {
    let inner = tok
        .strip_prefix('{')
        .and_then(|s| s.strip_suffix('}'))
        .ok_or_else(|| format!("expected {{a,b,...}}, got {tok:?}"))?;
    inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(player)
        .collect()
}

fn parse_line(line: &str) -> Result<Constraint, String> {
    let words: Vec<&str> = line.split_whitespace().collect();
    let counted = |k: &str, rest: &[&str]| -> Result<(usize, Team), String> {
        let k: usize = k.parse().map_err(|_| format!("expected a count, got {k:?}"))?;
        match rest {
            ["evil", "in", set @ ..] if !set.is_empty() => Ok((k, seat_set(&set.concat())?)),
            _ => Err("expected `<k> evil in {...}`".into()),
        }
    };
    match words.as_slice() {
        ["good", p] => Ok(Constraint::IsGood { player: player(p)? }),
        ["evil", p] => Ok(Constraint::IsEvil { player: player(p)? }),
        ["exactly", k, rest @ ..] => {
            let (k, players) = counted(k, rest)?;
            Ok(Constraint::ExactlyKEvil { players, k })
        }
        ["at", "least", k, rest @ ..] => {
            let (k, players) = counted(k, rest)?;
            Ok(Constraint::AtLeastKEvil { players, k })
        }
        ["at", "most", k, rest @ ..] => {
            let (k, players) = counted(k, rest)?;
            Ok(Constraint::AtMostKEvil { players, k })
        }
        ["role", p, r] => Ok(Constraint::HasRole {
            player: player(p)?,
            role: Role::parse(r).ok_or_else(|| format!("unknown role {r:?}"))?,
        }),
        _ => Err(format!("unrecognised constraint {line:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_render() {
        let src = "# notes\nexactly 0 evil in {2,4,7}\nat least 1 evil in { 1, 2, 4 }\nat most 1 evil in {2,3,5,7}\ngood 5\nevil 1\nrole 3 Merlin\n";
        let cs = parse_constraints(src).unwrap();
        assert_eq!(cs.len(), 7);
        let rendered = render_constraints(&cs);
        assert!(rendered.contains("at least 1 evil in {1,2,4}\n"));
        assert_eq!(parse_constraints(&rendered).unwrap(), cs);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_constraints("good 1\ngood 8\n").unwrap_err();
        assert_eq!(
            err,
            DeductionError::Parse {
                line: 2,
                message: "seat 8 is out of range".into()
            }
        );
        assert!(parse_constraints("mostly evil").is_err());
        assert!(parse_constraints("role 1 Jester").is_err());
    }
}
