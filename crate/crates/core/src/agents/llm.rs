use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::deduction::deduction_policy;
use super::parse::{parse_assassination, parse_team_selection, parse_vote};
use super::{Action, Agent, AgentAbort, AgentFault, Journal, LegalAction, Observation, Strategy};
use crate::codeact::{render_codeact_prompt, self_debug_loop, CodeActConfig, Sandbox};
use crate::game::{PlayerId, Side};
use crate::llm::{ChatMessage, LlmClient, LlmError, LlmExchange, LlmRequest, RequestTag};

#[derive(Debug, Clone)]
pub struct LlmAgentConfig {
    pub strategy: Strategy,
    pub temperature_text: f64,
    pub code: CodeActConfig,
    /// Code prompt template with `{PRIVATE_INFORMATION}`, `{PUBLIC_INFORMATION}`
    /// and `{TEAM_NUMBER}` slots.
    pub codeact_template: String,
}

impl LlmAgentConfig {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            strategy,
            temperature_text: 0.7,
            code: CodeActConfig::default(),
            codeact_template: crate::info::PromptTemplates::builtin().codeact,
        }
    }
}

/// A seat played by a chat model. Unusable answers get one reprompt quoting
/// the parse error; a second failure falls back to the deduction policy
/// (votes fall back to approve).
pub struct LlmAgent {
    client: Arc<dyn LlmClient>,
    sandbox: Option<Arc<Sandbox>>,
    config: LlmAgentConfig,
    rng: ChaCha8Rng,
}

struct Rejection {
    fault: AgentFault,
    message: String,
}

impl LlmAgent {
    pub fn new(client: Arc<dyn LlmClient>, sandbox: Option<Arc<Sandbox>>, config: LlmAgentConfig, seed: u64) -> Self {
        Self {
            client,
            sandbox,
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn abort(player: PlayerId, e: LlmError) -> AgentAbort {
        AgentAbort {
            player,
            message: e.to_string(),
        }
    }

    /// One call plus at most one reprompt. `None` means use the fallback.
    fn ask<T>(
        &mut self,
        obs: &Observation,
        tag: RequestTag,
        journal: &mut Journal,
        parse: impl Fn(&str) -> Result<T, Rejection>,
    ) -> Result<Option<T>, AgentAbort> {
        let strategy = self.config.strategy;
        let mut user = obs.bundle.user_text();
        if let Some(extra) = strategy.instruction() {
            user.push_str("\n\n");
            user.push_str(extra);
        }
        let mut messages = vec![ChatMessage::system(obs.bundle.system_text()), ChatMessage::user(user)];
        for round in 0..2 {
            let request = LlmRequest {
                tag,
                messages: messages.clone(),
                temperature: self.config.temperature_text,
            };
            let reply = self.client.complete(&request);
            journal.exchange(
                obs.player,
                LlmExchange {
                    model: self.client.model().to_string(),
                    request,
                    response: reply.as_ref().ok().cloned(),
                    error: reply.as_ref().err().map(ToString::to_string),
                },
            );
            let reply = match reply {
                Ok(r) => r,
                Err(e) if e.is_fatal() => return Err(Self::abort(obs.player, e)),
                Err(e) => {
                    journal.fault(obs.player, AgentFault::Transport { message: e.to_string() }, "", true);
                    return Ok(None);
                }
            };
            match parse(strategy.answer(&reply)) {
                Ok(v) => return Ok(Some(v)),
                Err(Rejection { fault, message }) => {
                    let last = round == 1;
                    journal.fault(obs.player, fault, reply.clone(), last);
                    messages.push(ChatMessage::assistant(reply));
                    messages.push(ChatMessage::user(format!(
                        "Your previous answer could not be used: {message}. Please answer again in the requested format."
                    )));
                }
            }
        }
        Ok(None)
    }

    fn select_team(&mut self, obs: &Observation, size: usize, journal: &mut Journal) -> Result<Action, AgentAbort> {
        if self.config.strategy == Strategy::Codeact {
            if let (Some(sandbox), Some(memory)) = (self.sandbox.clone(), obs.leader_memory.as_ref()) {
                let prompt = render_codeact_prompt(&self.config.codeact_template, memory, size);
                let rng = &mut self.rng;
                let outcome = self_debug_loop(
                    self.client.as_ref(),
                    &sandbox,
                    &prompt,
                    size,
                    obs.player,
                    &self.config.code,
                    journal,
                    |j| match deduction_policy(obs, rng, j) {
                        Action::SelectTeam { members, .. } => {
                            members.into_iter().filter_map(PlayerId::new).collect()
                        }
                        _ => unreachable!("team selection yields a team"),
                    },
                )
                .map_err(|e| Self::abort(obs.player, e))?;
                return Ok(Action::SelectTeam {
                    members: outcome.team.into_iter().map(PlayerId::get).collect(),
                    statement: None,
                });
            }
        }
        let me = obs.player;
        let parsed = self.ask(obs, RequestTag::TeamSelection, journal, |answer| {
            parse_team_selection(answer, size, me)
                .map(|team| (team, answer.to_string()))
                .map_err(|e| Rejection {
                    fault: AgentFault::from(&e),
                    message: e.to_string(),
                })
        })?;
        Ok(match parsed {
            Some((team, statement)) => Action::SelectTeam {
                members: team.into_iter().map(PlayerId::get).collect(),
                statement: Some(statement),
            },
            None => deduction_policy(obs, &mut self.rng, journal),
        })
    }
}

impl Agent for LlmAgent {
    fn kind(&self) -> String {
        format!("llm:{}", self.config.strategy)
    }

    fn act(&mut self, obs: &Observation, journal: &mut Journal) -> Result<Action, AgentAbort> {
        match obs.legal {
            LegalAction::SelectTeam { size } => self.select_team(obs, size, journal),
            LegalAction::Discuss => {
                let text = self.ask(obs, RequestTag::Discussion, journal, |answer| {
                    if answer.trim().is_empty() {
                        Err(Rejection {
                            fault: AgentFault::IllegalAction {
                                message: "empty discussion".into(),
                            },
                            message: "the reply was empty".into(),
                        })
                    } else {
                        Ok(answer.trim().to_string())
                    }
                })?;
                Ok(match text {
                    Some(text) => Action::Discuss { text },
                    None => deduction_policy(obs, &mut self.rng, journal),
                })
            }
            LegalAction::TeamVote => {
                let vote = self.ask(obs, RequestTag::Vote, journal, |answer| {
                    parse_vote(answer).map_err(|e| Rejection {
                        fault: AgentFault::VoteParse { message: e.to_string() },
                        message: e.to_string(),
                    })
                })?;
                Ok(match vote {
                    Some((approve, reasoning)) => Action::TeamVote {
                        approve,
                        reasoning: Some(reasoning),
                    },
                    None => Action::TeamVote {
                        approve: true,
                        reasoning: None,
                    },
                })
            }
            LegalAction::QuestVote => Ok(Action::QuestVote {
                succeed: obs.knowledge.side() == Side::Just,
            }),
            LegalAction::Assassinate => {
                let target = self.ask(obs, RequestTag::Assassination, journal, |answer| {
                    parse_assassination(answer).ok_or(Rejection {
                        fault: AgentFault::AssassinParse,
                        message: "name exactly one player between 1 and 7".into(),
                    })
                })?;
                Ok(match target {
                    Some(target) => Action::Assassinate { target },
                    None => deduction_policy(obs, &mut self.rng, journal),
                })
            }
        }
    }
}
