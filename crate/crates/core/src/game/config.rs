use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::types::{NUM_PLAYERS, NUM_ROUNDS};

pub const TEAM_SIZES: [usize; NUM_ROUNDS] = [2, 3, 3, 4, 4];
pub const SABOTAGE_THRESHOLDS: [usize; NUM_ROUNDS] = [1, 1, 1, 2, 2];
pub const MAJORITY: usize = 4;
pub const MAX_PROPOSAL_ATTEMPTS: u8 = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid game config: {field} = {found}, expected {expected}")]
pub struct ConfigError {
    pub field: &'static str,
    pub found: String,
    pub expected: String,
}

/// Rule constants and per-game switches.
///
/// The numeric rule fields are fixed for the seven-player game and only exist
/// so that a recorded configuration is self-describing; `validate` rejects
/// anything else.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameConfig {
    pub num_players: usize,
    pub team_sizes: [usize; NUM_ROUNDS],
    pub sabotage_thresholds: [usize; NUM_ROUNDS],
    pub majority: usize,
    pub max_proposal_attempts: u8,
    pub communication_enabled: bool,
    pub reveal_sabotage_count: bool,
    pub assassination_enabled: bool,
    /// Keep playing all five rounds after a side has three quest results.
    pub play_all_rounds: bool,
    pub seed: u64,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            num_players: NUM_PLAYERS,
            team_sizes: TEAM_SIZES,
            sabotage_thresholds: SABOTAGE_THRESHOLDS,
            majority: MAJORITY,
            max_proposal_attempts: MAX_PROPOSAL_ATTEMPTS,
            communication_enabled: true,
            reveal_sabotage_count: false,
            assassination_enabled: true,
            play_all_rounds: false,
            seed: 0,
        }
    }
}

impl GameConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn check<T: PartialEq + std::fmt::Debug>(
            field: &'static str,
            found: &T,
            expected: &T,
        ) -> Result<(), ConfigError> {
            if found == expected {
                Ok(())
            } else {
                Err(ConfigError {
                    field,
                    found: format!("{found:?}"),
                    expected: format!("{expected:?}"),
                })
            }
        }
        check("num_players", &self.num_players, &NUM_PLAYERS)?;
        check("team_sizes", &self.team_sizes, &TEAM_SIZES)?;
        check("sabotage_thresholds", &self.sabotage_thresholds, &SABOTAGE_THRESHOLDS)?;
        check("majority", &self.majority, &MAJORITY)?;
        check("max_proposal_attempts", &self.max_proposal_attempts, &MAX_PROPOSAL_ATTEMPTS)?;
        Ok(())
    }

    /// Team size for a 1-based round.
    pub fn team_size(&self, round: u8) -> usize {
        self.team_sizes[round as usize - 1]
    }

    pub fn sabotage_threshold(&self, round: u8) -> usize {
        self.sabotage_thresholds[round as usize - 1]
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}
