use std::sync::Arc;

use meaning_core::seed::{fixtures, seed_lexicon};
use meaning_core::{Action, ContextId, EngineConfig, Error, IndexKind, Mood, Session};

fn seed() -> Session {
    Session::new(Arc::new(seed_lexicon(64).unwrap()), EngineConfig::default())
}

#[test]
fn walk_very_fast_echoes_the_speed_parameter() {
    let mut s = seed();
    let o = s.interpret("walk very fast");
    assert_eq!(o.action, Action::Accepted);
    assert!(o.trace.iter().any(|t| t.contains("parameters by centroid rule")), "{:?}", o.trace);
    let params = &o.chosen.unwrap().clauses[0].parameters;
    assert!(!params.is_empty());
}

#[test]
fn history_is_append_only_and_versions_grow() {
    let mut s = seed();
    let mut seen = Vec::new();
    for p in ["walk", "walk faster", "stand still faster", "blorp"] {
        let v = s.version();
        s.interpret(p);
        assert!(s.version() > v);
        seen.push(p.to_string());
        assert_eq!(s.history().iter().map(|h| h.phrase.clone()).collect::<Vec<_>>(), seen);
        assert_eq!(s.checkpoints().len(), s.history().len());
    }
    assert_eq!(s.history()[2].action, Action::ClarificationRequested);
}

#[test]
fn conditional_phrases_change_nothing() {
    let mut s = seed();
    s.interpret("drive fast");
    let before = s.state().clone();
    let o = s.interpret("if I was driving very slowly");
    assert_eq!(o.chosen.as_ref().unwrap().candidate.mood, Mood::Conditional);
    assert_eq!(o.action, Action::Accepted);
    assert_eq!(s.state(), &before);
}

#[test]
fn elliptical_modifiers_follow_the_active_context() {
    let mut s = seed();
    let walk = s.interpret("walk").chosen.unwrap().clauses[0].context.id.clone();
    let o = s.interpret("faster");
    assert_eq!(o.action, Action::Accepted);
    assert_eq!(o.chosen.unwrap().clauses[0].context.id, walk);
    assert_eq!(s.active(), Some(&walk));
}

#[test]
fn contexts_are_indexed_by_role() {
    let mut s = seed();
    s.interpret("walk");
    s.interpret("car is fast but heavy");
    let h = &s.state().hierarchy;
    assert!(h.lookup(IndexKind::Actions, "walk").is_some());
    assert!(h.lookup(IndexKind::Objects, "car").is_some());
    assert!(h.lookup(IndexKind::NarrativeParts, "car/but").is_some());
    assert_eq!(h.get(&ContextId::new("car/but")).unwrap().parent, Some(ContextId::new("car")));
}

#[test]
fn homonyms_without_context_keep_both_readings() {
    let lex = Arc::new(fixtures::homonym_lexicon(32).unwrap());
    let s = Session::new(lex.clone(), EngineConfig::default());
    assert_eq!(s.candidates("bank is steep").unwrap().len(), 2);
    let mut s = Session::new(lex, EngineConfig::default());
    s.interpret("river is wide");
    assert_eq!(s.candidates("bank is steep").unwrap().len(), 1);
    let o = s.interpret("bank is solvent");
    assert_ne!(o.action, Action::ClarificationRequested, "{:?}", o.trace);
}

#[test]
fn replay_recovers_with_more_spares() {
    let lex = Arc::new(fixtures::replay_lexicon(32).unwrap());
    let mut s = Session::new(lex, EngineConfig { spare_limit: 0, ..Default::default() });
    s.interpret("move");
    let o = s.interpret("faster");
    assert_eq!(o.action, Action::ClarificationRequested);
    let before = s.clone();
    assert!(!s.reinterpret_window(2, 0).applied);
    assert!(!s.reinterpret_window(2, 3).applied);
    assert_eq!(s, before);
    let r = s.reinterpret_window(2, 2);
    assert!(r.applied);
    assert_eq!(r.outcomes.len(), 2);
    assert_eq!(r.last().unwrap().action, Action::RetriedSpareContext);
    assert_eq!(s.history().len(), 4);
    assert!(s.history()[2..].iter().all(|h| h.replay));
    assert!(s.version() > before.version());
}

#[test]
fn failed_replay_is_rolled_back() {
    let mut s = seed();
    s.interpret("walk");
    s.interpret("stand still faster");
    let before = s.clone();
    let r = s.reinterpret_window(3, 1);
    assert!(!r.applied);
    assert_eq!(s, before);
}

#[test]
fn session_documents_report_paths() {
    let lex = Arc::new(seed_lexicon(16).unwrap());
    let mut s = Session::new(lex.clone(), EngineConfig::default());
    s.interpret("walk fast");
    let mut doc: serde_json::Value = serde_json::from_str(&s.to_json().unwrap()).unwrap();
    doc["config"]["spare_limit"] = serde_json::json!("two");
    match Session::from_json(&doc.to_string(), lex) {
        Err(Error::Document { path, .. }) => assert!(path.contains("spare_limit"), "{path}"),
        other => panic!("expected a document error, got {other:?}"),
    }
}

#[test]
fn identical_inputs_give_identical_sessions() {
    let phrases = ["walk very fast", "faster", "car is heavy", "go ne", "slow or fast", "drive fast"];
    let mut a = seed();
    let mut b = seed();
    for p in phrases {
        assert_eq!(a.interpret(p), b.interpret(p));
    }
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
}

#[test]
fn candidate_guard_prefilters_every_word() {
    let lex = Arc::new(fixtures::homonym_lexicon(32).unwrap());
    let mut s = Session::new(lex, EngineConfig { candidate_guard: 1, ..Default::default() });
    s.interpret("river is wide");
    assert_eq!(s.candidates("bank is steep").unwrap().len(), 1);
}
