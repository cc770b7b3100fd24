//! Acceptance suite. Each criterion prints one PASS/FAIL line; the test fails
//! if any criterion fails. Criteria run one after another so that the wall
//! clock budgets are not shared with sibling tests.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::net::TcpListener;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use avalonplay::agents::Strategy;
use avalonplay::analyzer::{analyze, AnalyzerPatterns, FindingKind};
use avalonplay::codeact::{resolve_interpreter, ExecStatus, Sandbox, SandboxConfig};
use avalonplay::deduction::{
    belief, brute_force_oracle, facts_from_history, facts_from_private, parse_constraints, select_team,
    Constraint, ConstraintSet, Provenance,
};
use avalonplay::event::{EventKind, EventPayload, Note};
use avalonplay::game::{
    resolve_quest, tally_approval, BallotSheet, GameConfig, GameState, Phase, PlayerId, Role, Side,
    Team, VoteResult, NUM_PLAYERS, NUM_ROUNDS,
};
use avalonplay::harness::{
    play_indexed, replay, run_tournament, AgentSpec, GameRecord, Lineup, LlmContext, MetricsReport,
    RunSettings, TournamentConfig,
};
use avalonplay::info::{deal_roles, knowledge_for, RoleAssignment};
use avalonplay::llm::{LlmClient, MockLlm, RequestTag};
use avalonplay::memory::{PublicFact, QuestResultKind};

// Budgets and thresholds.
const C1_SETS: usize = 500;
const C1_BUDGET: Duration = Duration::from_secs(10);
const C3_BUDGET: Duration = Duration::from_secs(5);
const C4_GAMES: u64 = 1000;
const C4_BUDGET: Duration = Duration::from_secs(60);
const C4_TEAM_ACC_MARGIN: f64 = 0.15;
const C5_DEALS: u64 = 10_000;
const C7_TIMEOUT: Duration = Duration::from_secs(1);
const C7_KILL_SLACK: Duration = Duration::from_secs(1);
const C8_GAMES: u64 = 100;

type Outcome = Result<String, String>;

fn p(i: u8) -> PlayerId {
    PlayerId::new(i).unwrap()
}

fn team(xs: &[u8]) -> Team {
    xs.iter().map(|&i| p(i)).collect()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn subsets(n: usize) -> Vec<Team> {
    (0u32..1 << NUM_PLAYERS)
        .filter(|m| m.count_ones() as usize == n)
        .map(|m| (0..NUM_PLAYERS).filter(|i| m >> i & 1 == 1).map(PlayerId::from_slot).collect())
        .collect()
}

/// A role assignment whose evil seats are exactly `evil`.
fn assignment_with_evil(evil: &Team) -> RoleAssignment {
    let mut evil_roles = [Role::Morgana, Role::Assassin, Role::Minion].into_iter();
    let mut good_roles = [Role::Merlin, Role::Percival, Role::Servant, Role::Servant].into_iter();
    let roles: Vec<Role> = PlayerId::all()
        .map(|q| {
            if evil.contains(&q) {
                evil_roles.next().unwrap()
            } else {
                good_roles.next().unwrap()
            }
        })
        .collect();
    RoleAssignment::from_roles(roles.try_into().unwrap()).unwrap()
}

fn random_subset(rng: &mut ChaCha8Rng) -> Team {
    let size = rng.random_range(1..=NUM_PLAYERS);
    let mut seats: Vec<PlayerId> = PlayerId::all().collect();
    seats.shuffle(rng);
    seats.into_iter().take(size).collect()
}

/// Mostly true statements about a hidden deal, with some random noise so that
/// contradictions also occur.
fn random_constraint(rng: &mut ChaCha8Rng, truth: &RoleAssignment) -> Constraint {
    let players = random_subset(rng);
    let evil_in = players.iter().filter(|&&q| truth.side_of(q) == Side::Evil).count();
    let honest = rng.random_bool(0.8);
    let k = if honest { evil_in } else { rng.random_range(0..=players.len()) };
    let seat = PlayerId::from_slot(rng.random_range(0..NUM_PLAYERS));
    match rng.random_range(0..6) {
        0 if honest == (truth.side_of(seat) == Side::Just) => Constraint::IsGood { player: seat },
        0 | 1 => Constraint::IsEvil { player: seat },
        2 => Constraint::AtLeastKEvil {
            players,
            k: k.saturating_sub(rng.random_range(0..2)),
        },
        3 => Constraint::AtMostKEvil {
            k: (k + rng.random_range(0..2)).min(NUM_PLAYERS),
            players,
        },
        4 => Constraint::ExactlyKEvil { players, k },
        _ => Constraint::HasRole {
            player: seat,
            role: if honest {
                truth.role_of(seat)
            } else {
                Role::ALL[rng.random_range(0..Role::ALL.len())]
            },
        },
    }
}

fn c1_belief_matches_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let start = Instant::now();
    let (mut consistent, mut role_level) = (0, 0);
    for i in 0..C1_SETS {
        let truth = deal_roles(&mut rng);
        let mut cs = ConstraintSet::new();
        for _ in 0..rng.random_range(1..=5) {
            cs.add(random_constraint(&mut rng, &truth), Provenance::Manual);
        }
        let fast = belief(&cs);
        let slow = brute_force_oracle(&cs);
        match (&fast, &slow) {
            (Ok(a), Ok(b)) => {
                ensure(a.p_good == b.p_good, || format!("set {i}: {:?} vs {:?}\n{cs:?}", a.p_good, b.p_good))?;
                consistent += 1;
                role_level += usize::from(cs.constraints().any(Constraint::needs_roles));
            }
            (Err(a), Err(b)) => ensure(a == b, || format!("set {i}: errors differ"))?,
            _ => return Err(format!("set {i}: belief {fast:?} but oracle {slow:?}")),
        }
    }
    let elapsed = start.elapsed();
    ensure(consistent >= C1_SETS / 4, || format!("only {consistent} consistent sets"))?;
    ensure(elapsed < C1_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{C1_SETS} sets ({consistent} consistent, {role_level} role-level) equal in {elapsed:.2?}"
    ))
}

fn c2_appendix_constraints() -> Outcome {
    let cs = parse_constraints(
        "exactly 0 evil in {2,4,7}\n\
         exactly 1 evil in {1,3}\n\
         at least 1 evil in {1,2,4}\n\
         at most 1 evil in {2,3,5,7}\n",
    )
    .map_err(|e| e.to_string())?;
    let b = belief(&cs).map_err(|e| e.to_string())?;
    for i in [2, 3, 4, 7] {
        ensure(b.p_good(p(i)) == Ratio::from_integer(1), || format!("p_good({i}) = {}", b.p_good(p(i))))?;
    }
    for i in [1, 5, 6] {
        ensure(b.p_good(p(i)) == Ratio::from_integer(0), || format!("p_good({i}) = {}", b.p_good(p(i))))?;
    }
    let chosen = select_team(&b, 4);
    ensure(chosen == team(&[2, 3, 4, 7]), || format!("selected {chosen:?}"))?;
    Ok("good = {2,3,4,7}, evil = {1,5,6}, team {2,3,4,7}".into())
}

fn c3_engine_rules() -> Outcome {
    let start = Instant::now();
    let config = GameConfig::default();
    let evil_sets = subsets(3);
    ensure(evil_sets.len() == 35, || "expected 35 evil sets".into())?;
    let mut quests = 0;
    for evil in &evil_sets {
        let roles = assignment_with_evil(evil);
        for round in 1..=NUM_ROUNDS as u8 {
            let (size, threshold) = ([2, 3, 3, 4, 4][round as usize - 1], [1, 1, 1, 2, 2][round as usize - 1]);
            for t in subsets(size) {
                let fails = t.intersection(evil).count();
                let q = resolve_quest(&config, round, p(1), &t, &roles, false);
                ensure(q.sabotage_count == fails && q.success == (fails < threshold), || {
                    format!("round {round} team {t:?} evil {evil:?}: {q:?}")
                })?;
                quests += 1;
            }
        }
    }
    for mask in 0u32..1 << NUM_PLAYERS {
        let sheet = BallotSheet::from_fn(|q| mask >> q.slot() & 1 == 1);
        let approved = tally_approval(&sheet, config.majority).map_err(|e| e.to_string())?;
        ensure(approved == (mask.count_ones() * 2 > NUM_PLAYERS as u32), || format!("sheet {mask:07b}"))?;
    }
    for seed in 0..20 {
        let mut g = GameState::new(GameConfig::default().with_seed(seed)).map_err(|e| e.to_string())?;
        g.assign_leader().map_err(|e| e.to_string())?;
        for attempt in 1..=5u8 {
            let leader = g.leader().unwrap();
            let n = g.current_team_size();
            let members: Vec<u8> = (1..=n as u8).collect();
            g.propose_team(leader, &members, None).map_err(|e| e.to_string())?;
            while let Some(s) = g.next_speaker() {
                g.discuss(s, "...".into()).map_err(|e| e.to_string())?;
            }
            let r = g
                .submit_ballots(BallotSheet::from_fn(|_| false), BTreeMap::new())
                .map_err(|e| e.to_string())?;
            let want = if attempt == 5 { VoteResult::ForceApproved } else { VoteResult::Rejected };
            ensure(r == want, || format!("seed {seed} attempt {attempt}: {r:?}"))?;
        }
        ensure(g.phase() == Phase::QuestExecution, || format!("seed {seed}: phase {:?}", g.phase()))?;
        ensure(
            g.log().iter().any(|e| matches!(&e.payload, EventPayload::ModeratorNote { note: Note::ForcedApproval })),
            || "no forced-approval note".into(),
        )?;
        let q = g.execute_quest(&BTreeMap::new()).map_err(|e| e.to_string())?;
        ensure(q.forced, || "quest not marked forced".into())?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < C3_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("{quests} quests, 128 ballot sheets, forced approval on 20 deals in {elapsed:.2?}"))
}

fn tournament(just: AgentSpec, parallelism: usize) -> Result<(MetricsReport, Duration), String> {
    let start = Instant::now();
    let t = TournamentConfig {
        settings: RunSettings::new(
            GameConfig::default(),
            Lineup::BySide {
                just,
                evil: AgentSpec::ScriptedEvil,
            },
        ),
        n_games: C4_GAMES,
        base_seed: 0xC4,
        parallelism,
        output_dir: None,
    };
    let r = run_tournament(&t).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(elapsed < C4_BUDGET, || format!("{just} x{parallelism} took {elapsed:?}"))?;
    Ok((r.metrics, elapsed))
}

/// Bit-level identity, including every float.
fn same_report(a: &MetricsReport, b: &MetricsReport) -> bool {
    let bits = |m: &MetricsReport| {
        let mut v: Vec<Option<u64>> = vec![m.game_win.value.map(f64::to_bits)];
        v.push(m.quest_win.value.map(f64::to_bits));
        v.push(m.team_acc.value.map(f64::to_bits));
        v.extend(m.per_round_quest_win.iter().map(|r| r.value.map(f64::to_bits)));
        v
    };
    a == b && bits(a) == bits(b) && serde_json::to_string(a).unwrap() == serde_json::to_string(b).unwrap()
}

fn c4_tournament() -> Outcome {
    let (first, t1) = tournament(AgentSpec::Deduction, 1)?;
    let (again, _) = tournament(AgentSpec::Deduction, 1)?;
    let (wide, t8) = tournament(AgentSpec::Deduction, 8)?;
    ensure(same_report(&first, &again), || "repeated run differs".into())?;
    ensure(same_report(&first, &wide), || "parallelism 1 and 8 differ".into())?;
    let (baseline, _) = tournament(AgentSpec::Random, 8)?;
    let ded = first.team_acc.value.ok_or("deduction team acc undefined")?;
    let rnd = baseline.team_acc.value.ok_or("random team acc undefined")?;
    ensure(first.n_aborted == 0, || "aborted games".into())?;
    ensure(ded - rnd >= C4_TEAM_ACC_MARGIN, || format!("team acc {ded:.3} vs random {rnd:.3}"))?;
    Ok(format!(
        "identical reports; team acc {ded:.3} vs random {rnd:.3}; {t1:.1?} (x1), {t8:.1?} (x8)"
    ))
}

fn c5_knowledge_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC5);
    let mut checked = 0usize;
    for deal in 0..C5_DEALS {
        let config = GameConfig {
            reveal_sabotage_count: deal % 2 == 1,
            ..GameConfig::default()
        };
        let truth = deal_roles(&mut rng);
        for seat in PlayerId::all() {
            for c in facts_from_private(&knowledge_for(&truth, seat)) {
                ensure(c.holds(&truth), || format!("deal {deal} seat {seat}: {c} is false"))?;
                checked += 1;
            }
        }
        let mut history = Vec::new();
        for round in 1..=NUM_ROUNDS as u8 {
            let mut seats: Vec<PlayerId> = PlayerId::all().collect();
            seats.shuffle(&mut rng);
            let t: Team = seats.into_iter().take(config.team_size(round)).collect();
            let q = resolve_quest(&config, round, p(1), &t, &truth, false);
            history.push(PublicFact {
                round,
                team: q.team,
                result: if q.success { QuestResultKind::Success } else { QuestResultKind::Failure },
                sabotage_count: config.reveal_sabotage_count.then_some(q.sabotage_count),
            });
        }
        for c in facts_from_history(&history, &config) {
            ensure(c.holds(&truth), || format!("deal {deal}: history constraint {c} is false"))?;
            checked += 1;
        }
    }
    Ok(format!("{C5_DEALS} deals, {checked} constraints hold"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn python_sandbox(timeout: Duration, cap: usize) -> Result<Sandbox, String> {
    let mut cfg = SandboxConfig::new(resolve_interpreter("python3").map_err(|e| e.to_string())?);
    cfg.per_run_timeout = timeout;
    cfg.output_cap = cap;
    Sandbox::new(cfg).map_err(|e| e.to_string())
}

/// Base seed whose first game deals evil = {4,5,7} with seat 6 leading first,
/// so seat 3 leads the fifth round when every team is approved.
const C6_BASE_SEED: u64 = 25;

fn c6_mock_llm_game() -> Outcome {
    let mock = Arc::new(MockLlm::from_file(&fixture("table4_game.json")).map_err(|e| e.to_string())?);
    let client: Arc<dyn LlmClient> = mock.clone();
    let seat_strategies = [
        Strategy::Base,
        Strategy::Codeact,
        Strategy::Cot,
        Strategy::React,
        Strategy::Base,
        Strategy::Cot,
        Strategy::React,
    ];
    let mut settings = RunSettings::new(
        GameConfig::default(),
        Lineup::BySeat(seat_strategies.map(|s| AgentSpec::Llm(Some(s)))),
    );
    settings.llm = Some(LlmContext {
        client,
        sandbox: Some(Arc::new(python_sandbox(Duration::from_secs(10), 64 * 1024)?)),
        default_strategy: Strategy::Base,
        temperature_text: 0.7,
    });
    let record = play_indexed(&settings, C6_BASE_SEED, 0).map_err(|e| e.to_string())?;
    ensure(record.aborted.is_none(), || format!("aborted: {:?}", record.aborted))?;
    ensure(record.header.roles.evil_set() == team(&[4, 5, 7]), || "unexpected deal".into())?;
    ensure(mock.unused_rules() == 0, || format!("{} fixture rules unused", mock.unused_rules()))?;

    // every strategy's prompt path was taken
    let requests = mock.requests();
    let kinds: BTreeSet<&str> = record.header.agents.iter().map(String::as_str).collect();
    ensure(kinds.len() == 4, || format!("agents {kinds:?}"))?;
    for s in [Strategy::Cot, Strategy::React] {
        let text = s.instruction().unwrap();
        ensure(requests.iter().any(|r| r.last_user().is_some_and(|u| u.ends_with(text))), || {
            format!("no {s} prompt")
        })?;
    }
    let code_calls = requests.iter().filter(|r| r.tag == RequestTag::Code).count();
    ensure(code_calls == 2, || format!("{code_calls} code calls"))?;
    let runs: Vec<ExecStatus> = record
        .events
        .iter()
        .filter_map(|e| match &e.payload {
            EventPayload::CodeExecution { result, .. } => Some(result.status),
            _ => None,
        })
        .collect();
    ensure(runs == [ExecStatus::RuntimeError, ExecStatus::Ok], || format!("code runs {runs:?}"))?;
    let reprompts = requests
        .iter()
        .filter(|r| r.tag == RequestTag::Vote && r.messages.len() > 2)
        .count();
    ensure(reprompts == 1, || format!("{reprompts} vote reprompts"))?;

    // the fifth-round discussion is the case-study transcript
    let r5: Vec<&str> = record
        .events
        .iter()
        .filter(|e| e.round == 5 && e.kind() == EventKind::Discussion)
        .map(|e| e.text.as_str())
        .collect();
    ensure(r5.len() == 7 && r5[4].starts_with("The inclusion of player 6, who hasn't been"), || {
        format!("round 5 discussion {r5:?}")
    })?;
    let leader_line = record
        .events
        .iter()
        .find(|e| e.round == 5 && e.kind() == EventKind::TeamProposed)
        .map(|e| e.text.as_str());
    ensure(
        leader_line == Some("I choose player 2, player 3,  player 6, and player 7 for the quest."),
        || format!("round 5 leader said {leader_line:?}"),
    )?;
    ensure(
        record.outcome.as_ref().is_some_and(|o| o.quest_winner == Side::Just),
        || format!("outcome {:?}", record.outcome),
    )?;

    // replays exactly
    let reloaded = GameRecord::from_jsonl(&record.to_jsonl()).map_err(|e| e.to_string())?;
    ensure(reloaded == record, || "record does not round-trip".into())?;
    let report = replay(&reloaded).map_err(|e| e.to_string())?;
    ensure(report.outcome == record.outcome && report.events_checked == record.events.len(), || {
        "replay outcome differs".into()
    })?;

    // exactly the injected findings
    let findings = analyze(&record, &AnalyzerPatterns::builtin());
    let mut counts: BTreeMap<FindingKind, usize> = BTreeMap::new();
    for f in &findings {
        *counts.entry(f.kind).or_default() += 1;
    }
    let want: BTreeMap<FindingKind, usize> = [
        (FindingKind::VoteReasoningMismatch, 1),
        (FindingKind::TeamSizeViolation, 1),
        (FindingKind::CounterfactualClaim, 1),
    ]
    .into();
    ensure(counts == want, || format!("findings {findings:#?}"))?;
    let claim = findings.iter().find(|f| f.kind == FindingKind::CounterfactualClaim).unwrap();
    let round4 = record.events.iter().find(|e| {
        matches!(&e.payload, EventPayload::QuestResult { round: 4, .. })
    });
    ensure(claim.actor == p(5) && claim.evidence_seq == round4.map(|e| e.seq), || format!("{claim:?}"))?;
    Ok(format!(
        "{} events, {} model calls, 4 strategies, findings {:?}",
        record.events.len(),
        requests.len(),
        counts
    ))
}

fn c7_sandbox() -> Outcome {
    let listener = TcpListener::bind("127.0.0.1:0").map_err(|e| e.to_string())?;
    listener.set_nonblocking(true).map_err(|e| e.to_string())?;
    let port = listener.local_addr().unwrap().port();
    let sb = python_sandbox(C7_TIMEOUT, 4096)?;
    let probe = format!(
        "import socket\n\
         for target in [('127.0.0.1', {port}), ('1.1.1.1', 53)]:\n\
         \x20   try:\n\
         \x20       socket.create_connection(target, timeout=2).close()\n\
         \x20       print('CONNECTED', target)\n\
         \x20   except OSError as e:\n\
         \x20       print('BLOCKED', target, type(e).__name__)\n"
    );
    let r = sb.run(&probe);
    ensure(r.status == ExecStatus::Ok, || format!("probe status {:?}: {}", r.status, r.stderr))?;
    ensure(!r.stdout.contains("CONNECTED") && r.stdout.matches("BLOCKED").count() == 2, || {
        format!("probe printed {:?}", r.stdout)
    })?;
    if let Ok((mut s, _)) = listener.accept() {
        let mut buf = [0u8; 1];
        let _ = s.read(&mut buf);
        return Err("the listener received a connection".into());
    }

    let start = Instant::now();
    let r = sb.run("while True:\n    pass\n");
    let elapsed = start.elapsed();
    ensure(r.status == ExecStatus::Timeout, || format!("loop status {:?}", r.status))?;
    ensure(elapsed <= C7_TIMEOUT + C7_KILL_SLACK, || format!("loop killed after {elapsed:?}"))?;

    let r = sb.run("import sys\nsys.stdout.write('x' * 100000)\n");
    ensure(r.status == ExecStatus::OutputTruncated, || format!("flood status {:?}", r.status))?;
    ensure(r.stdout.len() <= 4096, || format!("kept {} bytes", r.stdout.len()))?;
    Ok(format!(
        "network blocked, loop killed after {elapsed:.2?}, flood truncated (landlock abi {:?})",
        sb.isolation().landlock_abi
    ))
}

fn c8_record_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC8);
    let specs = [AgentSpec::Random, AgentSpec::Deduction];
    let mut events = 0;
    for g in 0..C8_GAMES {
        let config = GameConfig {
            communication_enabled: rng.random_bool(0.5),
            reveal_sabotage_count: rng.random_bool(0.5),
            play_all_rounds: rng.random_bool(0.3),
            assassination_enabled: rng.random_bool(0.7),
            ..GameConfig::default()
        };
        let evil = if rng.random_bool(0.5) { AgentSpec::ScriptedEvil } else { AgentSpec::Random };
        let just = specs[rng.random_range(0..specs.len())];
        let settings = RunSettings::new(config, Lineup::BySide { just, evil });
        let record = play_indexed(&settings, 0xC8, g).map_err(|e| e.to_string())?;
        let mut bytes = Vec::new();
        record.write(&mut bytes).map_err(|e| e.to_string())?;
        let loaded = GameRecord::load(bytes.as_slice()).map_err(|e| e.to_string())?;
        ensure(loaded == record, || format!("game {g} does not round-trip"))?;
        let report = replay(&loaded).map_err(|e| format!("game {g}: {e}"))?;
        ensure(report.outcome.is_some() && report.outcome == record.outcome, || {
            format!("game {g}: replay outcome differs")
        })?;
        events += record.events.len();
    }
    Ok(format!("{C8_GAMES} games, {events} events round-tripped and replayed"))
}

#[test]
fn acceptance_suite() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("C1 belief equals brute-force oracle", c1_belief_matches_oracle),
        ("C2 appendix constraint set", c2_appendix_constraints),
        ("C3 engine rules exhaustive", c3_engine_rules),
        ("C4 tournament determinism and team acc", c4_tournament),
        ("C5 knowledge soundness", c5_knowledge_soundness),
        ("C6 mock-LLM end-to-end game", c6_mock_llm_game),
        ("C7 sandbox limits", c7_sandbox),
        ("C8 record round-trip and replay", c8_record_round_trip),
    ];
    let mut failed = Vec::new();
    for (name, run) in criteria {
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                println!("FAIL {name}: {why}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
