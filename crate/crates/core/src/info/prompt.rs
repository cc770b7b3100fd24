//! Observation prompts. The game rule, role text and role identification form
//! the fixed global prompt; game history and the action description are
//! re-rendered at every step.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::KnowledgeView;
use crate::game::{GameError, GameState, Phase, PlayerId, Role};

#[derive(Debug, Error)]
#[error("cannot read prompt template {path}: {source}")]
pub struct TemplateError {
    path: PathBuf,
    source: io::Error,
}

/// Plain-text prompt templates keyed by role or phase. The built-in set is
/// compiled in; `load_dir` overrides any file present in a directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub game_rule: String,
    pub roles: BTreeMap<Role, String>,
    pub team_selection: String,
    pub discussion: String,
    pub team_vote: String,
    pub quest_vote: String,
    pub assassination: String,
    pub codeact: String,
}

fn trimmed(s: &str) -> String {
    s.trim_end_matches(['\n', '\r']).to_string()
}

fn role_file(role: Role) -> &'static str {
    match role {
        Role::Merlin => "role_merlin.txt",
        Role::Percival => "role_percival.txt",
        Role::Servant => "role_servant.txt",
        Role::Morgana => "role_morgana.txt",
        Role::Assassin => "role_assassin.txt",
        Role::Minion => "role_minion.txt",
    }
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PromptTemplates {
    pub fn builtin() -> Self {
        macro_rules! res {
            ($name:literal) => {
                trimmed(include_str!(concat!("../../resources/prompts/", $name)))
            };
        }
        let roles = BTreeMap::from([
            (Role::Merlin, res!("role_merlin.txt")),
            (Role::Percival, res!("role_percival.txt")),
            (Role::Servant, res!("role_servant.txt")),
            (Role::Morgana, res!("role_morgana.txt")),
            (Role::Assassin, res!("role_assassin.txt")),
            (Role::Minion, res!("role_minion.txt")),
        ]);
        Self {
            game_rule: res!("game_rule.txt"),
            roles,
            team_selection: res!("action_team_selection.txt"),
            discussion: res!("action_discussion.txt"),
            team_vote: res!("action_team_vote.txt"),
            quest_vote: res!("action_quest_vote.txt"),
            assassination: res!("action_assassination.txt"),
            codeact: res!("codeact.txt"),
        }
    }

    pub fn load_dir(dir: &Path) -> Result<Self, TemplateError> {
        let mut t = Self::builtin();
        let read = |name: &str, slot: &mut String| -> Result<(), TemplateError> {
            let path = dir.join(name);
            match fs::read_to_string(&path) {
                Ok(s) => {
                    *slot = trimmed(&s);
                    Ok(())
                }
                Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(()),
                Err(source) => Err(TemplateError { path, source }),
            }
        };
        read("game_rule.txt", &mut t.game_rule)?;
        read("action_team_selection.txt", &mut t.team_selection)?;
        read("action_discussion.txt", &mut t.discussion)?;
        read("action_team_vote.txt", &mut t.team_vote)?;
        read("action_quest_vote.txt", &mut t.quest_vote)?;
        read("action_assassination.txt", &mut t.assassination)?;
        read("codeact.txt", &mut t.codeact)?;
        for role in Role::ALL {
            let slot = t.roles.get_mut(&role).expect("all roles present");
            read(role_file(role), slot)?;
        }
        Ok(t)
    }
}

fn fill(template: &str, player: PlayerId, team_size: usize) -> String {
    template
        .replace("{player}", &player.to_string())
        .replace("{team_size}", &team_size.to_string())
}

/// The fixed part of a seat's observation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalPrompt {
    pub game_rule: String,
    pub role_assignment: String,
    pub role_identification: String,
}

/// All five observation parts for one step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub game_rule: String,
    pub role_assignment: String,
    pub role_identification: String,
    pub game_history: String,
    pub action_description: String,
}

impl PromptBundle {
    pub fn new(global: &GlobalPrompt, game_history: String, action_description: String) -> Self {
        Self {
            game_rule: global.game_rule.clone(),
            role_assignment: global.role_assignment.clone(),
            role_identification: global.role_identification.clone(),
            game_history,
            action_description,
        }
    }

    /// Global prompt as one system message.
    pub fn system_text(&self) -> String {
        let mut s = format!("{}\n\n{}", self.game_rule, self.role_assignment);
        if !self.role_identification.is_empty() {
            s.push_str("\n\nModerator: ");
            s.push_str(&self.role_identification);
        }
        s
    }

    /// Real-time prompt: history followed by the action description.
    pub fn user_text(&self) -> String {
        if self.game_history.is_empty() {
            format!("Moderator: {}", self.action_description)
        } else {
            format!(
                "Game history:\n{}\n\nModerator: {}",
                self.game_history, self.action_description
            )
        }
    }
}

pub fn render_global_prompt(view: &KnowledgeView, templates: &PromptTemplates) -> GlobalPrompt {
    GlobalPrompt {
        game_rule: templates.game_rule.clone(),
        role_assignment: templates.roles[&view.own_role].clone(),
        role_identification: view
            .private_facts
            .iter()
            .map(|f| f.text.as_str())
            .collect::<Vec<_>>()
            .join(" "),
    }
}

/// Moderator instruction for the seat the current phase is waiting on.
pub fn render_action_description(
    state: &GameState,
    player: PlayerId,
    templates: &PromptTemplates,
) -> Result<String, GameError> {
    let n = state.current_team_size();
    let template = match state.phase() {
        Phase::TeamSelection => {
            let leader = state.leader().expect("leader assigned");
            if player != leader {
                return Err(GameError::OutOfTurn {
                    expected: leader,
                    found: player,
                });
            }
            &templates.team_selection
        }
        Phase::Discussion => {
            let expected = state.next_speaker().expect("discussion in progress");
            if player != expected {
                return Err(GameError::OutOfTurn {
                    expected,
                    found: player,
                });
            }
            &templates.discussion
        }
        Phase::TeamVote => &templates.team_vote,
        Phase::QuestExecution => {
            if !state.quest_team().is_some_and(|t| t.contains(&player)) {
                return Err(GameError::NotOnTeam(player));
            }
            &templates.quest_vote
        }
        Phase::Assassination => {
            if state.roles().role_of(player) != Role::Assassin {
                return Err(GameError::NotAssassin(player));
            }
            &templates.assassination
        }
        phase @ (Phase::LeaderAssignment | Phase::Finished) => {
            return Err(GameError::Protocol {
                action: "render_action_description",
                phase,
            })
        }
    };
    Ok(fill(template, player, n))
}
