use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::parse::final_answer;

/// Prompting strategy for an LLM seat. `CodeAct` changes only the leader's
/// team selection; its other decisions are prompted like `Base`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Base,
    Cot,
    React,
    Codeact,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Base, Strategy::Cot, Strategy::React, Strategy::Codeact];

    /// Appended to the user message for text calls.
    pub fn instruction(self) -> Option<&'static str> {
        match self {
            Strategy::Cot => Some(
                "Think through the situation step by step before answering. End your reply with a line of the form \"Final Answer: <your answer>\".",
            ),
            Strategy::React => Some(
                "Work in alternating lines of the form \"Thought: ...\" and \"Action: ...\". When you are done, end your reply with a line of the form \"Final Answer: <your answer>\".",
            ),
            Strategy::Base | Strategy::Codeact => None,
        }
    }

    /// The part of a reply that carries the decision.
    pub fn answer<'a>(self, reply: &'a str) -> &'a str {
        match self {
            Strategy::Cot | Strategy::React => final_answer(reply).unwrap_or(reply).trim(),
            Strategy::Base | Strategy::Codeact => reply.trim(),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Base => "base",
            Strategy::Cot => "cot",
            Strategy::React => "react",
            Strategy::Codeact => "codeact",
        })
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.to_string() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown strategy {s:?} (expected base, cot, react or codeact)"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_answer() {
        assert_eq!("CoT".parse::<Strategy>(), Ok(Strategy::Cot));
        assert!("tot".parse::<Strategy>().is_err());
        let reply = "Thought: hmm\nFinal Answer: player 3";
        assert_eq!(Strategy::React.answer(reply), "player 3");
        assert_eq!(Strategy::Base.answer(" x "), "x");
    }
}
