//! Parsers for free-text model answers.

use std::sync::OnceLock;

use regex::Regex;
use serde_json::Value;
use thiserror::Error;

use crate::game::{PlayerId, Team, NUM_PLAYERS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TeamParseError {
    #[error("the team must have exactly {required} players, but {selected} were selected")]
    WrongSize { required: usize, selected: usize },
    #[error("no player numbers were found in the answer")]
    NoPlayersFound,
    #[error("player {0} does not exist; players are numbered 1 to 7")]
    InvalidPlayer(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VoteParseError {
    #[error("no JSON object was found in the answer")]
    NoJson,
    #[error("the JSON object has no string field \"{0}\"")]
    MissingField(&'static str),
    #[error("the vote must be \"approve\" or \"reject\", not {0:?}")]
    BadVote(String),
}

fn re(cell: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).expect("static regex"))
}

fn numbers_in(s: &str) -> Vec<u32> {
    static NUM: OnceLock<Regex> = OnceLock::new();
    re(&NUM, r"\d+")
        .find_iter(s)
        .map(|m| m.as_str().parse().unwrap_or(u32::MAX))
        .collect()
}

/// The text after the last `Final Answer:` marker, if any.
pub fn final_answer(text: &str) -> Option<&str> {
    let lower = text.to_ascii_lowercase();
    let at = lower.rfind("final answer")?;
    let rest = &text[at + "final answer".len()..];
    Some(rest.trim_start_matches([':', ' ', '\t']).trim())
}

/// Extracts a team from prose such as "I choose player 2, player 3, and
/// myself", "[1, 4]" or "2 and 5".
pub fn parse_team_selection(text: &str, team_size: usize, me: PlayerId) -> Result<Team, TeamParseError> {
    static CONTEXT: OnceLock<Regex> = OnceLock::new();
    static BRACKET: OnceLock<Regex> = OnceLock::new();
    static BARE: OnceLock<Regex> = OnceLock::new();
    static MYSELF: OnceLock<Regex> = OnceLock::new();
    let context = re(
        &CONTEXT,
        r"(?i)\bplayers?\s*#?\d+(?:\s*(?:,\s*and|,|and|&)\s*(?:players?\s*#?)?\d+)*",
    );
    let bracket = re(&BRACKET, r"\[([^\]]*)\]");
    let bare = re(&BARE, r"(?i)^\s*\d+(?:\s*(?:,\s*and|,|and|&|\s)\s*\d+)*\s*\.?\s*$");
    let myself = re(&MYSELF, r"(?i)\bmyself\b|\bme\s*(?:,|and\b)|(?:,|\band)\s*me\b");

    let groups: Vec<Vec<u32>> = context.find_iter(text).map(|m| numbers_in(m.as_str())).collect();
    let mut nums: Vec<u32> = match groups.first() {
        Some(first) if dedup(first.clone()).len() + usize::from(myself.is_match(text)) == team_size => {
            first.clone()
        }
        Some(_) => groups.concat(),
        None => match bracket.captures(text) {
            Some(c) => numbers_in(&c[1]),
            None if bare.is_match(text) => numbers_in(text),
            None => Vec::new(),
        },
    };
    if myself.is_match(text) {
        nums.push(me.get() as u32);
    }
    let nums = dedup(nums);
    if nums.is_empty() {
        return Err(TeamParseError::NoPlayersFound);
    }
    if let Some(&bad) = nums.iter().find(|&&n| n == 0 || n as usize > NUM_PLAYERS) {
        return Err(TeamParseError::InvalidPlayer(bad));
    }
    if nums.len() != team_size {
        return Err(TeamParseError::WrongSize {
            required: team_size,
            selected: nums.len(),
        });
    }
    Ok(nums.into_iter().map(|n| PlayerId::from_slot(n as usize - 1)).collect())
}

fn dedup(v: Vec<u32>) -> Vec<u32> {
    let mut out = Vec::with_capacity(v.len());
    for n in v {
        if !out.contains(&n) {
            out.push(n);
        }
    }
    out
}

/// First well-formed JSON object with `reasoning` and `vote`. Returns
/// `(approve, reasoning)`.
pub fn parse_vote(text: &str) -> Result<(bool, String), VoteParseError> {
    let mut first_err = None;
    for (i, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        let Some(Ok(Value::Object(obj))) = stream.next() else {
            continue;
        };
        let checked = (|| {
            let reasoning = obj
                .get("reasoning")
                .and_then(Value::as_str)
                .ok_or(VoteParseError::MissingField("reasoning"))?;
            let vote = obj
                .get("vote")
                .and_then(Value::as_str)
                .ok_or(VoteParseError::MissingField("vote"))?;
            match vote.trim().to_ascii_lowercase().as_str() {
                "approve" => Ok((true, reasoning.to_string())),
                "reject" => Ok((false, reasoning.to_string())),
                _ => Err(VoteParseError::BadVote(vote.to_string())),
            }
        })();
        match checked {
            Ok(v) => return Ok(v),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    Err(first_err.unwrap_or(VoteParseError::NoJson))
}

/// The assassin's target: the first "player N", else the first number.
pub fn parse_assassination(text: &str) -> Option<u8> {
    static PLAYER: OnceLock<Regex> = OnceLock::new();
    let player = re(&PLAYER, r"(?i)\bplayer\s*#?(\d+)");
    let n: u32 = match player.captures(text) {
        Some(c) => c[1].parse().ok()?,
        None => *numbers_in(text).first()?,
    };
    (1..=NUM_PLAYERS as u32).contains(&n).then_some(n as u8)
}
