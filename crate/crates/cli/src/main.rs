use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use avalonplay::agents::Strategy;
use avalonplay::analyzer::{analyze, summarize, AnalyzerPatterns, HallucinationSummary};
use avalonplay::codeact::{resolve_interpreter, Sandbox, SandboxConfig};
use avalonplay::game::GameConfig;
use avalonplay::harness::{
    compute_metrics, read_dir, replay, run_tournament, AgentSpec, GameRecord, Lineup, LlmContext,
    MetricsReport, Rate, RunSettings, TournamentConfig,
};
use avalonplay::llm::{HttpConfig, HttpLlmClient, LlmClient, MockLlm};

#[derive(Parser)]
#[command(name = "avalonplay", version, about = "Seven-player Avalon benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play a tournament and write records plus metrics.json.
    Run(RunArgs),
    /// Re-drive a record through the engine and check it reproduces.
    Replay { file: PathBuf },
    /// Aggregate metrics over a directory of records.
    Metrics {
        dir: PathBuf,
        /// Print the JSON report instead of the summary table.
        #[arg(long)]
        json: bool,
    },
    /// Audit one record or a directory of records.
    Analyze {
        path: PathBuf,
        /// Write findings as JSON Lines here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl From<Switch> for bool {
    fn from(s: Switch) -> bool {
        matches!(s, Switch::On)
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 30)]
    games: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// random | deduction | llm[:strategy]
    #[arg(long, default_value = "deduction")]
    just: AgentSpec,
    /// random | scripted-evil | deduction | llm[:strategy]
    #[arg(long, default_value = "scripted-evil")]
    evil: AgentSpec,
    /// Strategy for plain `llm` seats.
    #[arg(long, default_value = "base")]
    strategy: Strategy,
    #[arg(long, value_enum, default_value = "on")]
    communication: Switch,
    #[arg(long, value_enum, default_value = "off")]
    reveal_counts: Switch,
    #[arg(long, value_enum, default_value = "off")]
    play_all_rounds: Switch,
    #[arg(long, value_enum, default_value = "on")]
    assassination: Switch,
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Memory window: number of recent messages kept verbatim.
    #[arg(long, default_value_t = 15)]
    window: usize,
    #[arg(long, requires = "llm_model", conflicts_with = "mock_llm")]
    llm_base_url: Option<String>,
    #[arg(long, requires = "llm_base_url")]
    llm_model: Option<String>,
    /// Serve model replies from a fixture file instead of an endpoint.
    #[arg(long)]
    mock_llm: Option<PathBuf>,
    /// Interpreter for generated programs.
    #[arg(long, default_value = "python3")]
    interpreter: String,
    /// Per-run timeout for generated programs, in seconds.
    #[arg(long, default_value_t = 10)]
    code_timeout: u64,
    #[arg(long)]
    keep_scratch: bool,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Replay { file } => {
            let record = GameRecord::read_file(&file)?;
            let report = replay(&record).with_context(|| format!("replaying {}", file.display()))?;
            println!(
                "{}: replay ok, {} events checked, outcome {}",
                file.display(),
                report.events_checked,
                serde_json::to_string(&report.outcome)?
            );
            Ok(())
        }
        Command::Metrics { dir, json } => {
            let records = read_dir(&dir)?;
            let report = compute_metrics(&records)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", table(&report));
            }
            Ok(())
        }
        Command::Analyze { path, out } => analyze_cmd(&path, out.as_deref()),
    }
}

fn run(args: RunArgs) -> Result<()> {
    let game = GameConfig {
        communication_enabled: args.communication.into(),
        reveal_sabotage_count: args.reveal_counts.into(),
        play_all_rounds: args.play_all_rounds.into(),
        assassination_enabled: args.assassination.into(),
        ..GameConfig::default()
    };
    let mut settings = RunSettings::new(
        game,
        Lineup::BySide {
            just: args.just,
            evil: args.evil,
        },
    );
    settings.window = args.window;
    let uses_llm = [args.just, args.evil].iter().any(|s| matches!(s, AgentSpec::Llm(_)));
    if uses_llm {
        let client: Arc<dyn LlmClient> = match (&args.mock_llm, &args.llm_base_url, &args.llm_model) {
            (Some(fixture), _, _) => Arc::new(MockLlm::from_file(fixture)?),
            (None, Some(url), Some(model)) => Arc::new(HttpLlmClient::new(HttpConfig::new(url, model))),
            _ => bail!("LLM seats need --llm-base-url and --llm-model, or --mock-llm"),
        };
        let wants_code = args.strategy == Strategy::Codeact
            || [args.just, args.evil].contains(&AgentSpec::Llm(Some(Strategy::Codeact)));
        let sandbox = if wants_code {
            let mut cfg = SandboxConfig::new(resolve_interpreter(&args.interpreter)?);
            cfg.per_run_timeout = Duration::from_secs(args.code_timeout);
            cfg.keep_scratch = args.keep_scratch;
            Some(Arc::new(Sandbox::new(cfg)?))
        } else {
            None
        };
        settings.llm = Some(LlmContext {
            client,
            sandbox,
            default_strategy: args.strategy,
            temperature_text: 0.7,
        });
    }
    let result = run_tournament(&TournamentConfig {
        settings,
        n_games: args.games,
        base_seed: args.seed,
        parallelism: args.parallelism,
        output_dir: Some(args.out.clone()),
    })?;
    print!("{}", table(&result.metrics));
    println!("records and metrics.json written to {}", args.out.display());
    Ok(())
}

fn analyze_cmd(path: &Path, out: Option<&Path>) -> Result<()> {
    let records = if path.is_dir() {
        read_dir(path)?
    } else {
        vec![GameRecord::read_file(path)?]
    };
    let patterns = AnalyzerPatterns::builtin();
    let findings: Vec<_> = records.iter().flat_map(|r| analyze(r, &patterns)).collect();
    let mut lines = String::new();
    for f in &findings {
        lines.push_str(&serde_json::to_string(f)?);
        lines.push('\n');
    }
    let summary = summarize(&findings, &records);
    match out {
        Some(file) => {
            fs::write(file, lines).with_context(|| format!("writing {}", file.display()))?;
            print!("{}", summary_text(&summary, records.len()));
        }
        None => {
            io::stdout().write_all(lines.as_bytes())?;
            eprint!("{}", summary_text(&summary, records.len()));
        }
    }
    Ok(())
}

fn summary_text(s: &HallucinationSummary, n_records: usize) -> String {
    let mut t = format!("{n_records} records, {} discussion utterances\n", s.utterances);
    for (kind, n) in &s.counts {
        let rate = s.per_100_utterances[kind].map_or("n/a".to_string(), |r| format!("{r:.2}"));
        t.push_str(&format!("{:<24}{n:>6}   per 100 utterances: {rate}\n", kind.to_string()));
    }
    t
}

fn rate(r: &Rate) -> String {
    match r.value {
        Some(v) => format!("{v:.3} ({}/{})", r.numerator, r.denominator),
        None => format!("undefined (0/{})", r.denominator),
    }
}

fn table(m: &MetricsReport) -> String {
    let mut t = format!(
        "mode: {}\ngames: {} (aborted {})\nquests: {}\n",
        m.mode, m.n_games, m.n_aborted, m.n_quests
    );
    t.push_str(&format!("game win:              {}\n", rate(&m.game_win)));
    t.push_str(&format!("game win (assassin):   {}\n", rate(&m.game_win_after_assassination)));
    t.push_str(&format!("quest win:             {}\n", rate(&m.quest_win)));
    t.push_str(&format!("team acc:              {}\n", rate(&m.team_acc)));
    for (i, r) in m.per_round_quest_win.iter().enumerate() {
        t.push_str(&format!("round {} quest win:     {}\n", i + 1, rate(r)));
    }
    t.push_str(&format!(
        "proposals: {} (rejected {})\n",
        m.n_proposals, m.n_rejected_proposals
    ));
    t.push_str(&summary_text(&m.hallucination_counts, m.n_games as usize));
    t
}
