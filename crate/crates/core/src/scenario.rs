//! Batch scenarios: phrases with expectations, run against fresh sessions.
//!
//! ```text
//! # comment
//! session                      start a fresh session
//! config threshold 0.4         comprehension setting, or spare_limit / candidate_guard
//! > walk faster                interpret a phrase
//! replay 2 2                   reinterpret the last 2 phrases with 2 spares
//! expect action accepted
//! expect flags no_change, vagueness_increase
//! expect no-flags
//! expect candidate-flags vagueness_increase
//! expect max 0.5 0.02
//! expect effector quickness 0.75 1.0
//! expect no-effector
//! expect candidates 1
//! expect context bank#0
//! ```
//!
//! Expectations refer to the most recent phrase or replay.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::interpreter::{EngineConfig, InterpretationOutcome, Session};
use crate::lexicon::Lexicon;

#[derive(Clone, Debug, PartialEq)]
pub enum Expectation {
    Action(String),
    Flags(Vec<String>),
    NoFlags,
    /// Flags of the first evaluated candidate, whether or not it was chosen.
    CandidateFlags(Vec<String>),
    Max {
        value: f64,
        tolerance: f64,
    },
    Effector {
        axis: String,
        low: f64,
        high: f64,
    },
    NoEffector,
    Candidates(usize),
    Context(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Step {
    Session,
    Config { key: String, value: f64 },
    Phrase(String),
    Replay { spare_limit: usize, window: usize },
    Expect(Expectation),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    /// Steps with their 1-based line numbers.
    pub steps: Vec<(usize, Step)>,
}

fn words(list: &str) -> Vec<String> {
    let mut v: Vec<String> =
        list.split([',', ' ']).map(str::trim).filter(|w| !w.is_empty()).map(str::to_string).collect();
    v.sort();
    v
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario> {
        let mut steps = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| Error::Scenario { line, message };
            let num = |s: Option<&str>, what: &str| -> Result<f64> {
                s.and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| err(format!("expected a number for {what}")))
            };
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            if let Some(p) = t.strip_prefix('>') {
                let p = p.trim();
                if p.is_empty() {
                    return Err(err("empty phrase".into()));
                }
                steps.push((line, Step::Phrase(p.to_string())));
                continue;
            }
            let mut parts = t.split_whitespace();
            let step = match parts.next() {
                Some("session") => Step::Session,
                Some("config") => {
                    let key = parts.next().ok_or_else(|| err("config needs a key".into()))?.to_string();
                    Step::Config { value: num(parts.next(), &key)?, key }
                }
                Some("replay") => {
                    let spare_limit = num(parts.next(), "spare limit")? as usize;
                    Step::Replay { spare_limit, window: num(parts.next(), "window")? as usize }
                }
                Some("expect") => {
                    let kind = parts.next().ok_or_else(|| err("expect needs a kind".into()))?;
                    let rest: Vec<&str> = parts.by_ref().collect();
                    let exp = match kind {
                        "action" => Expectation::Action(rest.join(" ")),
                        "flags" => Expectation::Flags(words(&rest.join(" "))),
                        "no-flags" => Expectation::NoFlags,
                        "candidate-flags" => Expectation::CandidateFlags(words(&rest.join(" "))),
                        "max" => Expectation::Max {
                            value: num(rest.first().copied(), "max")?,
                            tolerance: num(rest.get(1).copied(), "tolerance")?,
                        },
                        "effector" => Expectation::Effector {
                            axis: rest.first().ok_or_else(|| err("effector needs an axis".into()))?.to_string(),
                            low: num(rest.get(1).copied(), "low")?,
                            high: num(rest.get(2).copied(), "high")?,
                        },
                        "no-effector" => Expectation::NoEffector,
                        "candidates" => Expectation::Candidates(num(rest.first().copied(), "candidates")? as usize),
                        "context" => Expectation::Context(rest.join(" ")),
                        other => return Err(err(format!("unknown expectation `{other}`"))),
                    };
                    Step::Expect(exp)
                }
                Some(other) => return Err(err(format!("unknown directive `{other}`"))),
                None => continue,
            };
            steps.push((line, step));
        }
        Ok(Scenario { steps })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioReport {
    pub lines: Vec<String>,
    pub passed: usize,
    pub failed: usize,
}

impl ScenarioReport {
    pub fn success(&self) -> bool {
        self.failed == 0
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for l in &self.lines {
            out.push_str(l);
            out.push('\n');
        }
        let _ = writeln!(out, "{} expectation(s) met, {} failed", self.passed, self.failed);
        out
    }
}

/// One-line digest of an outcome, as printed by the runner and the REPL.
pub fn summarize(o: &InterpretationOutcome) -> String {
    let mut s = o.action.name().to_string();
    if let Some(c) = &o.chosen {
        let _ = write!(s, " {} in {}", c.candidate.structure(), c.region.context().id);
        let flags = o.flag_names();
        if !flags.is_empty() {
            let _ = write!(s, " flags [{}]", flags.join(", "));
        }
        let _ = write!(s, " score {:.4} max {:.4}", c.report.aggregate, c.region.stats().max);
    }
    if let Some((axis, v)) = o.effector() {
        let _ = write!(s, " command {axis} = {v:.4}");
    }
    if let Some(q) = &o.clarification {
        let _ = write!(s, " asks \"{q}\"");
    }
    s
}

fn check(e: &Expectation, o: &InterpretationOutcome) -> std::result::Result<(), String> {
    let sorted = |mut v: Vec<String>| {
        v.sort();
        v
    };
    let flags = sorted(o.flag_names().into_iter().map(str::to_string).collect());
    match e {
        Expectation::Action(a) if o.action.name() == a => Ok(()),
        Expectation::Action(_) => Err(o.action.name().to_string()),
        Expectation::Flags(want) if *want == flags => Ok(()),
        Expectation::Flags(_) => Err(format!("[{}]", flags.join(", "))),
        Expectation::NoFlags if o.chosen.is_some() && flags.is_empty() => Ok(()),
        Expectation::NoFlags => Err(format!("[{}]", flags.join(", "))),
        Expectation::CandidateFlags(want) => {
            let got = o.candidates.iter().find(|c| c.error.is_none()).map(|c| sorted(c.flags.clone()));
            match got {
                Some(g) if g == *want => Ok(()),
                Some(g) => Err(format!("[{}]", g.join(", "))),
                None => Err("no evaluated candidate".into()),
            }
        }
        Expectation::Max { value, tolerance } => match &o.chosen {
            Some(c) => {
                let m = c.region.stats().max;
                if (m - value).abs() <= *tolerance {
                    Ok(())
                } else {
                    Err(format!("{m:.6}"))
                }
            }
            None => Err("no interpretation".into()),
        },
        Expectation::Effector { axis, low, high } => match o.effector() {
            Some((a, v)) if a.as_str() == axis && (*low..=*high).contains(&v) => Ok(()),
            Some((a, v)) => Err(format!("{a} = {v:.6}")),
            None => Err("no command".into()),
        },
        Expectation::NoEffector => match o.effector() {
            None => Ok(()),
            Some((a, v)) => Err(format!("{a} = {v:.6}")),
        },
        Expectation::Candidates(n) if o.candidates.len() == *n => Ok(()),
        Expectation::Candidates(_) => Err(o.candidates.len().to_string()),
        Expectation::Context(id) => match &o.chosen {
            Some(c) if c.region.context().id.as_str() == id => Ok(()),
            Some(c) => Err(c.region.context().id.to_string()),
            None => Err("no interpretation".into()),
        },
    }
}

fn describe_expectation(e: &Expectation) -> String {
    match e {
        Expectation::Action(a) => format!("action {a}"),
        Expectation::Flags(f) => format!("flags [{}]", f.join(", ")),
        Expectation::NoFlags => "no flags".into(),
        Expectation::CandidateFlags(f) => format!("candidate flags [{}]", f.join(", ")),
        Expectation::Max { value, tolerance } => format!("max {value} ± {tolerance}"),
        Expectation::Effector { axis, low, high } => format!("command on {axis} in [{low}, {high}]"),
        Expectation::NoEffector => "no command".into(),
        Expectation::Candidates(n) => format!("{n} candidate(s)"),
        Expectation::Context(c) => format!("context {c}"),
    }
}

fn apply_setting(config: &mut EngineConfig, key: &str, value: f64) -> Result<()> {
    match key {
        "spare_limit" => config.spare_limit = value as usize,
        "candidate_guard" => config.candidate_guard = value as usize,
        _ => config.comprehension.set(key, value)?,
    }
    config.validate()
}

/// Run a scenario. Only parse-level problems are errors; unmet
/// expectations are counted in the report.
pub fn run(scenario: &Scenario, lexicon: Arc<Lexicon>, config: &EngineConfig) -> Result<ScenarioReport> {
    let mut config = config.clone();
    let mut session = Session::new(lexicon.clone(), config.clone());
    let mut last: Option<InterpretationOutcome> = None;
    let mut report = ScenarioReport { lines: Vec::new(), passed: 0, failed: 0 };
    for (line, step) in &scenario.steps {
        match step {
            Step::Session => {
                session = Session::new(lexicon.clone(), config.clone());
                last = None;
                report.lines.push(format!("{line:>4}  new session"));
            }
            Step::Config { key, value } => {
                apply_setting(&mut config, key, *value)
                    .map_err(|e| Error::Scenario { line: *line, message: e.to_string() })?;
                session.set_config(config.clone())?;
                report.lines.push(format!("{line:>4}  config {key} = {value}"));
            }
            Step::Phrase(p) => {
                let o = session.interpret(p);
                report.lines.push(format!("{line:>4}  > {p}: {}", summarize(&o)));
                last = Some(o);
            }
            Step::Replay { spare_limit, window } => {
                let r = session.reinterpret_window(*spare_limit, *window);
                let tail = r.last().map(summarize).unwrap_or_else(|| "nothing replayed".into());
                report.lines.push(format!("{line:>4}  replay {window}: applied {} {tail}", r.applied));
                last = r.outcomes.last().cloned();
            }
            Step::Expect(e) => {
                let what = describe_expectation(e);
                let verdict = match &last {
                    Some(o) => check(e, o),
                    None => Err("no phrase yet".into()),
                };
                match verdict {
                    Ok(()) => {
                        report.passed += 1;
                        report.lines.push(format!("{line:>4}  ok   {what}"));
                    }
                    Err(got) => {
                        report.failed += 1;
                        report.lines.push(format!("{line:>4}  FAIL {what}: got {got}"));
                    }
                }
            }
        }
    }
    Ok(report)
}
