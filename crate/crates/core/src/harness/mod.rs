//! Tournament orchestration: running games with seeded agents, persisting
//! records as JSON Lines, replaying them through the engine and aggregating
//! metrics.

mod metrics;
mod record;
mod replay;
mod runner;

use std::fs;
use std::path::PathBuf;

use rayon::prelude::*;
use thiserror::Error;

pub use metrics::{compute_metrics, MetricsError, MetricsReport, Rate};
pub use record::{
    read_dir, GameRecord, RecordError, RecordHeader, SeedInfo, SCHEMA_VERSION, SEED_DERIVATION,
};
pub use replay::{replay, ReplayError, ReplayReport};
pub use runner::{
    derive_agent_seed, derive_game_seed, play_game, play_indexed, splitmix64, AgentSpec, Lineup,
    LlmContext, RunSettings,
};

use crate::agents::AgentAbort;
use crate::game::GameError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Abort(AgentAbort),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Clone)]
pub struct TournamentConfig {
    pub settings: RunSettings,
    pub n_games: u64,
    pub base_seed: u64,
    pub parallelism: usize,
    /// Records and `metrics.json` are written here when set.
    pub output_dir: Option<PathBuf>,
}

pub struct TournamentResult {
    pub records: Vec<GameRecord>,
    pub metrics: MetricsReport,
}

/// Plays `n_games` games on a pool of `parallelism` workers. Records come
/// back in game-index order, so the report does not depend on scheduling.
pub fn run_tournament(t: &TournamentConfig) -> Result<TournamentResult, HarnessError> {
    if t.n_games == 0 {
        return Err(MetricsError::NoGames.into());
    }
    t.settings.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(t.parallelism.max(1))
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let records = pool.install(|| {
        (0..t.n_games)
            .into_par_iter()
            .map(|g| play_indexed(&t.settings, t.base_seed, g))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let metrics = compute_metrics(&records)?;
    if let Some(dir) = &t.output_dir {
        let io = |source| HarnessError::Io {
            path: dir.clone(),
            source,
        };
        fs::create_dir_all(dir).map_err(io)?;
        for (g, r) in records.iter().enumerate() {
            r.write_file(&dir.join(format!("game-{g:05}.jsonl")))?;
        }
        let json = serde_json::to_string_pretty(&metrics).expect("metrics serialize");
        fs::write(dir.join("metrics.json"), json + "\n").map_err(io)?;
    }
    Ok(TournamentResult { records, metrics })
}
