//! Code-driven team selection for the leader: the model writes a program over
//! the leader memory, the sandbox runs it, and failures are fed back for
//! revision a bounded number of times.

mod sandbox;

use std::sync::OnceLock;

use regex::Regex;

pub use sandbox::{
    resolve_interpreter, ExecStatus, ExecutionResult, Isolation, Sandbox, SandboxConfig, SandboxError,
};

use crate::agents::parse::{final_answer, parse_team_selection, TeamParseError};
use crate::agents::{AgentFault, Journal};
use crate::game::{PlayerId, Team, NUM_PLAYERS};
use crate::llm::{ChatMessage, LlmClient, LlmError, LlmExchange, LlmRequest, RequestTag};
use crate::memory::LeaderMemory;

pub const DEFAULT_MAX_ATTEMPTS: u32 = 3;
pub const DEFAULT_CODE_TEMPERATURE: f64 = 0.0;

/// Fills the code prompt from the leader memory.
pub fn render_codeact_prompt(template: &str, memory: &LeaderMemory, team_size: usize) -> String {
    let private = if memory.private_facts.is_empty() {
        "You have no private information.".to_string()
    } else {
        memory
            .private_facts
            .iter()
            .map(|f| f.text.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    };
    let public = if memory.public_facts.is_empty() {
        "(no quest results yet)".to_string()
    } else {
        memory
            .public_facts
            .iter()
            .map(|f| f.text())
            .collect::<Vec<_>>()
            .join("\n")
    };
    template
        .replace("{PRIVATE_INFORMATION}", &private)
        .replace("{PUBLIC_INFORMATION}", &public)
        .replace("{TEAM_NUMBER}", &team_size.to_string())
}

/// The program in a reply: a fenced block, else whatever follows
/// `Action Output:` (up to any `Observation:`), else the whole reply.
pub fn extract_code(reply: &str) -> String {
    static FENCE: OnceLock<Regex> = OnceLock::new();
    let fence = FENCE.get_or_init(|| {
        Regex::new(r"(?s)```[ \t]*(?:python3?|py)?[ \t]*\r?\n(.*?)```").expect("static regex")
    });
    if let Some(c) = fence.captures(reply) {
        return c[1].to_string();
    }
    if let Some(at) = reply.find("Action Output:") {
        let rest = &reply[at + "Action Output:".len()..];
        let end = rest.find("\nObservation:").unwrap_or(rest.len());
        return rest[..end].trim_matches('\n').to_string() + "\n";
    }
    reply.to_string()
}

/// The team printed by a program: a bracketed list on the last non-empty
/// line, otherwise a `Final Answer` sentence.
pub fn parse_final_team(stdout: &str, team_size: usize, me: PlayerId) -> Result<Team, TeamParseError> {
    static BRACKET: OnceLock<Regex> = OnceLock::new();
    static NUM: OnceLock<Regex> = OnceLock::new();
    let bracket = BRACKET.get_or_init(|| Regex::new(r"\[([^\]]*)\]").expect("static regex"));
    let num = NUM.get_or_init(|| Regex::new(r"\d+").expect("static regex"));
    let last = stdout.lines().rev().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    if let Some(c) = bracket.captures(last) {
        let mut seats: Vec<u32> = Vec::new();
        for m in num.find_iter(&c[1]) {
            let n: u32 = m.as_str().parse().unwrap_or(u32::MAX);
            if n == 0 || n as usize > NUM_PLAYERS {
                return Err(TeamParseError::InvalidPlayer(n));
            }
            if !seats.contains(&n) {
                seats.push(n);
            }
        }
        if seats.is_empty() {
            return Err(TeamParseError::NoPlayersFound);
        }
        if seats.len() != team_size {
            return Err(TeamParseError::WrongSize {
                required: team_size,
                selected: seats.len(),
            });
        }
        return Ok(seats.into_iter().map(|n| PlayerId::from_slot(n as usize - 1)).collect());
    }
    match final_answer(stdout) {
        Some(answer) => parse_team_selection(answer, team_size, me),
        None => parse_team_selection(last, team_size, me),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodeActConfig {
    pub max_attempts: u32,
    pub temperature: f64,
}

impl Default for CodeActConfig {
    fn default() -> Self {
        Self {
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            temperature: DEFAULT_CODE_TEMPERATURE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeActOutcome {
    pub team: Team,
    pub attempts: u32,
    pub fallback_used: bool,
}

fn tail(s: &str, max: usize) -> &str {
    let start = s.len().saturating_sub(max);
    let start = (start..=s.len()).find(|&i| s.is_char_boundary(i)).unwrap_or(s.len());
    &s[start..]
}

fn revise_message(program: &str, feedback: &str, team_size: usize) -> String {
    format!(
        "The program did not produce a usable answer.\nProgram:\n```python\n{program}\n```\nError:\n{feedback}\nPlease revise the program. It must print the final {team_size} players as a list, for example [1, 2]."
    )
}

/// Generate, run, and revise until a program prints a legal team or the
/// attempt budget runs out; then `fallback` decides. Only fatal model errors
/// escape.
#[allow(clippy::too_many_arguments)]
pub fn self_debug_loop(
    client: &dyn LlmClient,
    sandbox: &Sandbox,
    prompt: &str,
    team_size: usize,
    agent: PlayerId,
    config: &CodeActConfig,
    journal: &mut Journal,
    fallback: impl FnOnce(&mut Journal) -> Team,
) -> Result<CodeActOutcome, LlmError> {
    let mut messages = vec![ChatMessage::user(prompt)];
    for attempt in 1..=config.max_attempts {
        let last = attempt == config.max_attempts;
        let request = LlmRequest {
            tag: RequestTag::Code,
            messages: messages.clone(),
            temperature: config.temperature,
        };
        let reply = client.complete(&request);
        journal.exchange(
            agent,
            LlmExchange {
                model: client.model().to_string(),
                request,
                response: reply.as_ref().ok().cloned(),
                error: reply.as_ref().err().map(ToString::to_string),
            },
        );
        let reply = match reply {
            Ok(r) => r,
            Err(e) if e.is_fatal() => return Err(e),
            Err(e) => {
                journal.fault(agent, AgentFault::Transport { message: e.to_string() }, "", last);
                continue;
            }
        };
        let program = extract_code(&reply);
        let result = sandbox.run(&program);
        journal.execution(agent, attempt, program.clone(), result.clone());
        let feedback = if result.succeeded() {
            match parse_final_team(&result.stdout, team_size, agent) {
                Ok(team) => {
                    return Ok(CodeActOutcome {
                        team,
                        attempts: attempt,
                        fallback_used: false,
                    })
                }
                Err(e) => {
                    journal.fault(agent, AgentFault::from(&e), result.stdout.clone(), last);
                    format!("{e}. The program printed:\n{}", tail(&result.stdout, 2000))
                }
            }
        } else {
            let message = match result.status {
                ExecStatus::Timeout => "the program exceeded its time limit".to_string(),
                ExecStatus::OutputTruncated => "the program printed too much output".to_string(),
                _ => tail(&result.stderr, 2000).to_string(),
            };
            journal.fault(
                agent,
                AgentFault::CodeFailure {
                    status: result.status,
                    message: message.clone(),
                },
                reply.clone(),
                last,
            );
            message
        };
        messages.push(ChatMessage::assistant(reply));
        messages.push(ChatMessage::user(revise_message(&program, &feedback, team_size)));
    }
    Ok(CodeActOutcome {
        team: fallback(journal),
        attempts: config.max_attempts,
        fallback_used: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Role;
    use crate::info::{knowledge_for, RoleAssignment};
    use crate::llm::{MockLlm, MockRule};
    use crate::memory::{PublicFact, QuestResultKind};

    fn p(i: u8) -> PlayerId {
        PlayerId::new(i).unwrap()
    }

    fn t(xs: &[u8]) -> Team {
        xs.iter().map(|&i| p(i)).collect()
    }

    #[test]
    fn code_extraction_order() {
        assert_eq!(extract_code("Here:\n```python\nprint(1)\n```\nDone"), "print(1)\n");
        assert_eq!(
            extract_code("Action: Python_REPL\nAction Output: \nprint([1,2])\n\nObservation: [1, 2]"),
            " \nprint([1,2])\n"
        );
        assert_eq!(extract_code("print(3)"), "print(3)");
    }

    #[test]
    fn final_team_parsing() {
        assert_eq!(parse_final_team("noise\n[2, 3, 4, 6]\n\n", 4, p(1)), Ok(t(&[2, 3, 4, 6])));
        assert_eq!(
            parse_final_team("[2, 3, 4, 6, 7]\n", 4, p(1)),
            Err(TeamParseError::WrongSize { required: 4, selected: 5 })
        );
        assert_eq!(parse_final_team("[0, 3]", 2, p(1)), Err(TeamParseError::InvalidPlayer(0)));
        assert_eq!(
            parse_final_team("Final Answer: Players 2, 3, 4, and 6.\n", 4, p(1)),
            Ok(t(&[2, 3, 4, 6]))
        );
    }

    #[test]
    fn prompt_rendering() {
        use Role::*;
        let a = RoleAssignment::from_roles([Merlin, Servant, Percival, Morgana, Servant, Assassin, Minion])
            .unwrap();
        let view = knowledge_for(&a, p(3));
        let template = crate::info::PromptTemplates::builtin().codeact;
        let empty = LeaderMemory {
            private_facts: view.private_facts.clone(),
            public_facts: vec![],
        };
        let text = render_codeact_prompt(&template, &empty, 3);
        assert!(text.contains("Among players 1 and 4"));
        assert!(text.contains("(no quest results yet)"));
        assert!(text.contains("selects 3 players most likely to be good person. Please print the final 3 players."));
        let mem = LeaderMemory {
            private_facts: vec![],
            public_facts: vec![PublicFact {
                round: 1,
                team: t(&[1, 3]),
                result: QuestResultKind::Failure,
                sabotage_count: None,
            }],
        };
        let text = render_codeact_prompt(&template, &mem, 2);
        assert!(text.contains("In the initial round, players 1 and 3 were selected for the quest, which ended in failure."));
    }

    fn sandbox() -> Sandbox {
        let mut cfg = SandboxConfig::new(resolve_interpreter("python3").unwrap());
        cfg.per_run_timeout = std::time::Duration::from_secs(10);
        Sandbox::new(cfg).unwrap()
    }

    fn rule(response: &str) -> MockRule {
        MockRule {
            tag: None,
            pattern: None,
            response: response.into(),
            repeat: 1,
        }
    }

    #[test]
    fn two_attempt_self_debug() {
        let mock = MockLlm::new(vec![
            rule("```python\nprint(good_players)\n```"),
            rule("```python\ngood_players = [2, 3]\nprint(good_players)\n```"),
        ])
        .unwrap();
        let mut journal = Journal::new();
        let out = self_debug_loop(&mock, &sandbox(), "prompt", 2, p(1), &CodeActConfig::default(), &mut journal, |_| {
            unreachable!()
        })
        .unwrap();
        assert_eq!(out, CodeActOutcome { team: t(&[2, 3]), attempts: 2, fallback_used: false });
        let reqs = mock.requests();
        assert_eq!(reqs.len(), 2);
        assert_eq!(reqs[0].temperature, 0.0);
        assert_eq!(reqs[1].messages.len(), 3);
        assert!(reqs[1].messages[2].content.contains("NameError"));
        assert!(reqs[1].messages[2].content.contains("print(good_players)"));
    }

    #[test]
    fn exhausted_attempts_fall_back() {
        let mock = MockLlm::new(vec![MockRule { repeat: 0, ..rule("print([1, 2, 3])") }]).unwrap();
        let mut journal = Journal::new();
        let out = self_debug_loop(&mock, &sandbox(), "p", 2, p(1), &CodeActConfig::default(), &mut journal, |_| t(&[6, 7]))
            .unwrap();
        assert!(out.fallback_used);
        assert_eq!(out.team, t(&[6, 7]));
        let faults = journal
            .entries()
            .iter()
            .filter(|e| matches!(e.payload, crate::event::EventPayload::AgentError { .. }))
            .count();
        assert_eq!(faults, 3);
    }

    #[test]
    fn fatal_model_error_escapes() {
        let mock = MockLlm::new(vec![]).unwrap();
        let mut journal = Journal::new();
        let err = self_debug_loop(&mock, &sandbox(), "p", 2, p(1), &CodeActConfig::default(), &mut journal, |_| t(&[1, 2]));
        assert!(matches!(err, Err(LlmError::FixtureExhausted { .. })));
    }
}
