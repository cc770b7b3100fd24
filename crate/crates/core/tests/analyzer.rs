use avalonplay::agents::AgentFault;
use avalonplay::analyzer::{analyze, summarize, AnalyzerPatterns, FindingKind};
use avalonplay::event::{Actor, EventKind, EventLogEntry, EventPayload, Visibility};
use avalonplay::game::{GameConfig, PlayerId, Team};
use avalonplay::harness::{play_indexed, AgentSpec, GameRecord, Lineup, RunSettings};

fn clean_game(seed: u64) -> GameRecord {
    let settings = RunSettings::new(
        GameConfig::default(),
        Lineup::BySide {
            just: AgentSpec::Deduction,
            evil: AgentSpec::ScriptedEvil,
        },
    );
    // need a game that reaches round 3 with a discussion
    (seed..)
        .map(|s| play_indexed(&settings, s, 0).unwrap())
        .find(|r| r.events.iter().any(|e| e.round >= 3 && e.kind() == EventKind::Discussion))
        .unwrap()
}

fn round_team(r: &GameRecord, round: u8) -> Team {
    r.events
        .iter()
        .find_map(|e| match &e.payload {
            EventPayload::QuestResult { round: q, team, .. } if *q == round => Some(team.clone()),
            _ => None,
        })
        .unwrap()
}

fn fault(r: &mut GameRecord, fault: AgentFault, fallback_used: bool) {
    let agent = PlayerId::new(2).unwrap();
    r.events.push(EventLogEntry {
        seq: r.events.len() as u64,
        game_id: r.header.game_id.clone(),
        round: 1,
        attempt: 1,
        phase: avalonplay::game::Phase::TeamSelection,
        actor: Actor::Player(agent),
        visibility: Visibility::Hidden,
        payload: EventPayload::AgentError {
            agent,
            fault,
            raw_output: String::new(),
            fallback_used,
        },
        text: String::new(),
    });
}

#[test]
fn scripted_self_play_has_no_findings() {
    let patterns = AnalyzerPatterns::builtin();
    for s in 0..40 {
        assert!(analyze(&clean_game(s), &patterns).is_empty());
    }
}

#[test]
fn injected_violations_are_all_found() {
    let mut r = clean_game(100);
    let first = round_team(&r, 1);
    let second = round_team(&r, 2);
    let outside = PlayerId::all().find(|p| !first.contains(p)).unwrap().get();
    let inside = first.iter().next().unwrap().get();
    let latest_member = second.iter().next().unwrap().get();
    let talk: Vec<usize> = r
        .events
        .iter()
        .enumerate()
        .filter(|(_, e)| e.round >= 3 && e.kind() == EventKind::Discussion)
        .map(|(i, _)| i)
        .collect();
    assert!(talk.len() >= 7);
    let lies = [
        format!("Player {outside} was on the first quest, so I trust them."),
        format!("I think player {inside} was not on the initial quest."),
        format!("Player {latest_member}, who hasn't been on a quest recently, deserves a chance."),
    ];
    let truths = [
        format!("Player {inside} was on the first quest."),
        "I am Merlin, believe me.".to_string(),
        "Player 3 is evil and I can prove it.".to_string(),
        "This team looks fine.".to_string(),
    ];
    for (k, text) in lies.iter().chain(&truths).enumerate() {
        r.events[talk[k]].text = text.clone();
    }
    let mut votes = r
        .events
        .iter_mut()
        .filter(|e| e.kind() == EventKind::Ballot);
    for (approve, why) in [(true, "I disagree with this team."), (false, "I agree, it is solid.")] {
        let e = votes.next().unwrap();
        if let EventPayload::Ballot {
            approve: a, reasoning, ..
        } = &mut e.payload
        {
            *a = approve;
            *reasoning = Some(why.into());
        }
    }
    if let Some(e) = votes.next() {
        if let EventPayload::Ballot { approve, reasoning, .. } = &mut e.payload {
            *reasoning = Some(if *approve { "I support it." } else { "I reject it." }.into());
        }
    }
    fault(&mut r, AgentFault::TeamSize { required: 4, selected: 5 }, false);
    fault(&mut r, AgentFault::TeamSize { required: 2, selected: 1 }, false);
    fault(&mut r, AgentFault::InvalidPlayer { player: 9 }, false);
    fault(&mut r, AgentFault::NoPlayersFound, true);
    fault(&mut r, AgentFault::VoteParse { message: "no JSON".into() }, true);
    fault(&mut r, AgentFault::VoteParse { message: "no JSON".into() }, false);

    let findings = analyze(&r, &AnalyzerPatterns::builtin());
    let s = summarize(&findings, std::slice::from_ref(&r));
    assert_eq!(findings.len(), 10, "{findings:#?}");
    assert_eq!(s.counts[&FindingKind::CounterfactualClaim], 3);
    assert_eq!(s.counts[&FindingKind::VoteReasoningMismatch], 2);
    assert_eq!(s.counts[&FindingKind::TeamSizeViolation], 2);
    assert_eq!(s.counts[&FindingKind::InvalidPlayerRef], 1);
    assert_eq!(s.counts[&FindingKind::ParseFallbackUsed], 2);
    for f in findings.iter().filter(|f| f.kind == FindingKind::CounterfactualClaim) {
        let evidence = f.evidence_seq.expect("claims cite the quest they contradict");
        assert!(evidence < f.seq);
        assert!(r.events.iter().any(|e| e.seq == evidence && e.kind() == EventKind::QuestResult));
    }
    let utterances = r.events.iter().filter(|e| e.kind() == EventKind::Discussion).count() as u64;
    assert_eq!(s.utterances, utterances);
    let rate = s.per_100_utterances[&FindingKind::CounterfactualClaim].unwrap();
    assert!((rate - 300.0 / utterances as f64).abs() < 1e-12);
}

#[test]
fn claims_about_unplayed_rounds_are_not_judged() {
    let mut r = clean_game(200);
    let i = r.events.iter().position(|e| e.kind() == EventKind::Discussion).unwrap();
    r.events[i].text = "Player 1 was on the fifth quest and the last quest failed.".into();
    assert!(analyze(&r, &AnalyzerPatterns::builtin()).is_empty());
}
