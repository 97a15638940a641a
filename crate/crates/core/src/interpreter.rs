//! Phrase interpretation: controlled grammar, candidate enumeration,
//! comprehension scoring and the spare-context retry loop.
//!
//! Grammar, after inflection, multiword joining and stopword removal:
//!
//! ```text
//! Phrase    := ["if"] Clause ["but" Clause]
//! Clause    := ["is"] Verb Mods | Chain* Noun ["is" Mods] | Mods
//! Mods      := Chain* Comparative*
//! Chain     := Term (("and" | "or") Term)*
//! Term      := (Hedge | "not")* Adjective
//! ```
//!
//! Qualitative adjectives modify the head's parameter region (block
//! composition); comparatives act on the narrative region as further line
//! elements. Without a head every element goes on the line.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::comprehension::{assess, Assessment, ComprehensionConfig, ComprehensionReport, EffectorOutcome};
use crate::error::{Error, Result};
use crate::hierarchy::{ContextHierarchy, IndexKind, SpareBuffer, SpareSnapshot};
use crate::lexicon::{Lexicon, PartOfSpeech, Sense};
use crate::operator::{compose_block, Junction, MeaningOperator, PhraseOperator};
use crate::region::{AxisId, Context, ContextId, Region, DEFAULT_RESOLUTION};

pub const KEYWORD_IF: &str = "if";
pub const KEYWORD_IS: &str = "is";
pub const KEYWORD_BUT: &str = "but";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mood {
    Imperative,
    Realis,
    Conditional,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Accepted,
    RetriedSpareContext,
    ClarificationRequested,
}

impl Action {
    pub fn name(self) -> &'static str {
        match self {
            Action::Accepted => "accepted",
            Action::RetriedSpareContext => "retried_spare_context",
            Action::ClarificationRequested => "clarification_requested",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub comprehension: ComprehensionConfig,
    pub spare_limit: usize,
    /// Candidate count from which every word is prefiltered by
    /// internal-axis overlap with the active context.
    pub candidate_guard: usize,
    pub grid_resolution: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            comprehension: ComprehensionConfig::default(),
            spare_limit: 2,
            candidate_guard: 32,
            grid_resolution: DEFAULT_RESOLUTION,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        self.comprehension.validate()?;
        if self.grid_resolution < 2 {
            return Err(Error::Config("grid_resolution must be at least 2".into()));
        }
        if self.candidate_guard == 0 {
            return Err(Error::Config("candidate_guard must be positive".into()));
        }
        Ok(())
    }
}

/// Lemmas of a phrase, ready for parsing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokens {
    pub lemmas: Vec<String>,
    /// The phrase opened with a reset prefix such as "forget everything".
    pub reset: bool,
}

pub fn tokenize(lex: &Lexicon, text: &str) -> Result<Tokens> {
    let raw: Vec<String> = text
        .split(|c: char| !(c.is_alphanumeric() || c == '-'))
        .filter(|s| !s.is_empty())
        .map(str::to_lowercase)
        .collect();
    let m = &lex.morphology;
    let mut start = 0;
    for prefix in &m.reset_prefixes {
        let words: Vec<&str> = prefix.split_whitespace().collect();
        if !words.is_empty() && raw.len() >= words.len() && raw.iter().zip(&words).all(|(a, b)| a == b) {
            start = words.len();
            break;
        }
    }
    let reset = start > 0;
    let inflected: Vec<String> =
        raw[start..].iter().map(|w| m.inflections.get(w).cloned().unwrap_or_else(|| w.clone())).collect();
    let mut joined = Vec::new();
    let mut i = 0;
    while i < inflected.len() {
        let hit = m
            .multiword
            .iter()
            .map(|(k, v)| (k.split_whitespace().collect::<Vec<_>>(), v))
            .filter(|(ws, _)| !ws.is_empty() && inflected.len() - i >= ws.len())
            .filter(|(ws, _)| ws.iter().zip(&inflected[i..]).all(|(a, b)| a == b))
            .max_by_key(|(ws, _)| ws.len());
        match hit {
            Some((ws, lemma)) => {
                joined.push(lemma.clone());
                i += ws.len();
            }
            None => {
                joined.push(inflected[i].clone());
                i += 1;
            }
        }
    }
    let lemmas: Vec<String> = joined.into_iter().filter(|w| !m.stopwords.contains(w)).collect();
    let unknown: Vec<String> = lemmas.iter().filter(|w| !is_keyword(w) && lex.entry(w).is_none()).cloned().collect();
    if !unknown.is_empty() {
        return Err(Error::UnknownWords(unknown));
    }
    if lemmas.is_empty() {
        return Err(Error::EmptyPhrase);
    }
    Ok(Tokens { lemmas, reset })
}

fn is_keyword(w: &str) -> bool {
    w == KEYWORD_IF || w == KEYWORD_IS
}

/// Application tree over token positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Word {
        token: usize,
    },
    /// Hedge or negation at `token` applied to the parameters of `operand`.
    Modified {
        token: usize,
        operand: Box<Node>,
    },
    Junction {
        token: usize,
        junction: Junction,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn render(&self, tokens: &[String]) -> String {
        match self {
            Node::Word { token } => tokens[*token].clone(),
            Node::Modified { token, operand } => format!("{}({})", tokens[*token], operand.render(tokens)),
            Node::Junction { token, left, right, .. } => {
                format!("({} {} {})", left.render(tokens), tokens[*token], right.render(tokens))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClauseTree {
    /// Verb or noun heading the clause.
    pub head: Option<usize>,
    /// Modifiers composed into the head, innermost first.
    pub block: Vec<Node>,
    /// Operators applied to the narrative region after the head.
    pub line: Vec<Node>,
}

impl ClauseTree {
    fn render(&self, tokens: &[String]) -> String {
        let mut parts = Vec::new();
        if let Some(h) = self.head {
            let mut s = tokens[h].clone();
            for b in &self.block {
                s = format!("{s}[{}]", b.render(tokens));
            }
            parts.push(s);
        }
        parts.extend(self.line.iter().map(|n| n.render(tokens)));
        parts.join(" → ")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParseCandidate {
    pub tokens: Vec<String>,
    pub mood: Mood,
    pub reset: bool,
    pub clauses: Vec<ClauseTree>,
    /// Sense index per token (0 for keywords and connectives).
    pub sense_choices: Vec<usize>,
}

impl ParseCandidate {
    pub fn structure(&self) -> String {
        self.clauses.iter().map(|c| c.render(&self.tokens)).collect::<Vec<_>>().join(" | but | ")
    }

    /// Word/sense pairs for words with more than one reading.
    pub fn senses(&self, lex: &Lexicon) -> Vec<String> {
        self.tokens
            .iter()
            .zip(&self.sense_choices)
            .filter(|(w, _)| lex.lookup(w).len() > 1)
            .map(|(w, i)| match lex.lookup(w)[*i].tags.first() {
                Some(tag) => format!("{w}#{i}({tag})"),
                None => format!("{w}#{i}"),
            })
            .collect()
    }
}

fn pos_of(lex: &Lexicon, w: &str) -> Option<PartOfSpeech> {
    lex.entry(w).map(|e| e.pos)
}

/// All bracketings of `terms` joined by `junctions`, leftmost split first.
fn bracketings(terms: &[Node], junctions: &[(usize, Junction)]) -> Vec<Node> {
    if terms.len() == 1 {
        return vec![terms[0].clone()];
    }
    let mut out = Vec::new();
    for split in 1..terms.len() {
        let (tok, j) = junctions[split - 1];
        for l in bracketings(&terms[..split], &junctions[..split - 1]) {
            for r in bracketings(&terms[split..], &junctions[split..]) {
                out.push(Node::Junction { token: tok, junction: j, left: Box::new(l.clone()), right: Box::new(r) });
            }
        }
    }
    out
}

/// Parsed modifiers: alternatives for each adjective chain, then comparatives.
struct Mods {
    chains: Vec<Vec<Node>>,
    comparatives: Vec<Node>,
}

fn parse_mods(lex: &Lexicon, tokens: &[String], range: std::ops::Range<usize>) -> Result<Mods> {
    let mut chains = Vec::new();
    let mut comparatives = Vec::new();
    let mut i = range.start;
    let bad = |i: usize, what: &str| Error::Ungrammatical(format!("`{}` {what}", tokens[i]));
    while i < range.end {
        if pos_of(lex, &tokens[i]) == Some(PartOfSpeech::CompAdjective) {
            comparatives.push(Node::Word { token: i });
            i += 1;
            continue;
        }
        if !comparatives.is_empty() {
            return Err(bad(i, "after a comparative"));
        }
        let mut terms = Vec::new();
        let mut junctions = Vec::new();
        loop {
            let mut prefix = Vec::new();
            while i < range.end
                && matches!(pos_of(lex, &tokens[i]), Some(PartOfSpeech::AdverbHedge | PartOfSpeech::Negation))
            {
                prefix.push(i);
                i += 1;
            }
            if i >= range.end || pos_of(lex, &tokens[i]) != Some(PartOfSpeech::QualAdjective) {
                let at = i.min(range.end - 1);
                return Err(bad(at, "where an adjective was expected"));
            }
            let mut node = Node::Word { token: i };
            for p in prefix.into_iter().rev() {
                node = Node::Modified { token: p, operand: Box::new(node) };
            }
            terms.push(node);
            i += 1;
            let junction = match tokens.get(i).map(String::as_str) {
                Some("and") if i < range.end => Junction::And,
                Some("or") if i < range.end => Junction::Or,
                _ => break,
            };
            junctions.push((i, junction));
            i += 1;
            if i >= range.end {
                return Err(bad(i - 1, "ends the phrase"));
            }
        }
        chains.push(bracketings(&terms, &junctions));
    }
    Ok(Mods { chains, comparatives })
}

fn cartesian(chains: &[Vec<Node>]) -> Vec<Vec<Node>> {
    chains.iter().fold(vec![Vec::new()], |acc, alts| {
        acc.iter()
            .flat_map(|prefix| {
                alts.iter().map(move |n| {
                    let mut v = prefix.clone();
                    v.push(n.clone());
                    v
                })
            })
            .collect()
    })
}

fn parse_clause(lex: &Lexicon, tokens: &[String], range: std::ops::Range<usize>) -> Result<Vec<ClauseTree>> {
    let mut start = range.start;
    if tokens.get(start).map(String::as_str) == Some(KEYWORD_IS) {
        start += 1;
    }
    if start >= range.end {
        return Err(Error::Ungrammatical("clause without content".into()));
    }
    if let Some(t) = (start..range.end).find(|&i| tokens[i] == KEYWORD_IF) {
        return Err(Error::Ungrammatical(format!("`if` in position {t}")));
    }
    if pos_of(lex, &tokens[start]) == Some(PartOfSpeech::Verb) {
        let mods = parse_mods(lex, tokens, start + 1..range.end)?;
        return Ok(cartesian(&mods.chains)
            .into_iter()
            .map(|block| ClauseTree { head: Some(start), block, line: mods.comparatives.clone() })
            .collect());
    }
    if let Some(noun) = (start..range.end).find(|&i| pos_of(lex, &tokens[i]) == Some(PartOfSpeech::Noun)) {
        let pre = parse_mods(lex, tokens, start..noun)?;
        if !pre.comparatives.is_empty() {
            return Err(Error::Ungrammatical("comparative before a noun".into()));
        }
        let mut after = noun + 1;
        if tokens.get(after).map(String::as_str) == Some(KEYWORD_IS) && after < range.end {
            after += 1;
        }
        let post = parse_mods(lex, tokens, after..range.end)?;
        let chains: Vec<Vec<Node>> = pre.chains.into_iter().chain(post.chains).collect();
        return Ok(cartesian(&chains)
            .into_iter()
            .map(|block| ClauseTree { head: Some(noun), block, line: post.comparatives.clone() })
            .collect());
    }
    let mods = parse_mods(lex, tokens, start..range.end)?;
    Ok(cartesian(&mods.chains)
        .into_iter()
        .map(|mut line| {
            line.extend(mods.comparatives.iter().cloned());
            ClauseTree { head: None, block: Vec::new(), line }
        })
        .collect())
}

/// Every structure the grammar licenses, crossed with every sense choice.
pub fn parse(lex: &Lexicon, tokens: &Tokens) -> Result<Vec<ParseCandidate>> {
    let t = &tokens.lemmas;
    if t.is_empty() {
        return Err(Error::EmptyPhrase);
    }
    let mut start = 0;
    let mood = if t[0] == KEYWORD_IF {
        start = 1;
        Mood::Conditional
    } else if pos_of(lex, &t[0]) == Some(PartOfSpeech::Verb) {
        Mood::Imperative
    } else {
        Mood::Realis
    };
    let buts: Vec<usize> = (start..t.len()).filter(|&i| t[i] == KEYWORD_BUT).collect();
    let ranges = match buts.as_slice() {
        [] => std::iter::once(start..t.len()).collect(),
        [b] => vec![start..*b, b + 1..t.len()],
        _ => return Err(Error::Ungrammatical("more than one `but`".into())),
    };
    let mut per_clause = Vec::new();
    for r in ranges {
        per_clause.push(parse_clause(lex, t, r)?);
    }
    let structures = per_clause.iter().fold(vec![Vec::new()], |acc: Vec<Vec<ClauseTree>>, alts| {
        acc.iter()
            .flat_map(|p| {
                alts.iter().map(move |c| {
                    let mut v = p.clone();
                    v.push(c.clone());
                    v
                })
            })
            .collect()
    });
    let counts: Vec<usize> = t.iter().map(|w| lex.lookup(w).len().max(1)).collect();
    let choices = sense_product(&counts.iter().map(|&n| (0..n).collect()).collect::<Vec<_>>());
    let mut out = Vec::new();
    for clauses in &structures {
        for c in &choices {
            out.push(ParseCandidate {
                tokens: t.clone(),
                mood,
                reset: tokens.reset,
                clauses: clauses.clone(),
                sense_choices: c.clone(),
            });
        }
    }
    Ok(out)
}

fn sense_product(options: &[Vec<usize>]) -> Vec<Vec<usize>> {
    options.iter().fold(vec![Vec::new()], |acc, opts| {
        acc.iter()
            .flat_map(|p| {
                opts.iter().map(move |o| {
                    let mut v = p.clone();
                    v.push(*o);
                    v
                })
            })
            .collect()
    })
}

/// Narrative-side result of one clause.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClauseResult {
    pub context: Context,
    pub phrase: PhraseOperator,
    pub region: Region,
    /// Numeric parameters of the head, read by the centroid rule.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parameters: Vec<(AxisId, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChosenInterpretation {
    pub candidate: ParseCandidate,
    pub phrase: PhraseOperator,
    pub region: Region,
    pub report: ComprehensionReport,
    pub clauses: Vec<ClauseResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub index: usize,
    pub structure: String,
    pub senses: Vec<String>,
    pub context: Option<ContextId>,
    pub score: Option<f64>,
    pub flags: Vec<String>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpretationOutcome {
    pub phrase: String,
    pub chosen: Option<ChosenInterpretation>,
    pub candidates: Vec<CandidateSummary>,
    pub alternatives_kept: usize,
    pub action: Action,
    pub trace: Vec<String>,
    pub clarification: Option<String>,
}

impl InterpretationOutcome {
    pub fn report(&self) -> Option<&ComprehensionReport> {
        self.chosen.as_ref().map(|c| &c.report)
    }

    pub fn flag_names(&self) -> Vec<&'static str> {
        match &self.chosen {
            Some(c) => c.report.flag_names(),
            None => Vec::new(),
        }
    }

    pub fn effector(&self) -> Option<(AxisId, f64)> {
        self.chosen.as_ref().and_then(|c| c.report.effector_command())
    }
}

/// Outcome of replaying a window of recent phrases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Replay {
    /// The replayed state replaced the session state.
    pub applied: bool,
    pub outcomes: Vec<InterpretationOutcome>,
}

impl Replay {
    pub fn last(&self) -> Option<&InterpretationOutcome> {
        self.outcomes.last()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub phrase: String,
    pub action: Action,
    /// Chosen structure and its flags, or the clarification.
    pub digest: String,
    /// Entry produced by a replay rather than by direct input.
    pub replay: bool,
    pub trace: Vec<String>,
}

/// Everything a phrase can change; checkpointed before each phrase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub hierarchy: ContextHierarchy,
    pub regions: BTreeMap<ContextId, Region>,
    pub active: Option<ContextId>,
    pub spare: SpareBuffer,
}

impl SessionState {
    fn new(spare_limit: usize) -> Self {
        SessionState {
            hierarchy: ContextHierarchy::new(),
            regions: BTreeMap::new(),
            active: None,
            spare: SpareBuffer::new(spare_limit),
        }
    }

    /// Stored region of a context; unspecified if nothing was said yet.
    pub fn region_of(&self, context: &Context) -> Region {
        self.regions.get(&context.id).cloned().unwrap_or_else(|| Region::empty(context.clone()))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionDocument {
    config: EngineConfig,
    state: SessionState,
    history: Vec<HistoryEntry>,
    checkpoints: Vec<SessionState>,
    version: u64,
}

#[derive(Clone, Copy)]
enum SourceMode<'a> {
    Current,
    Spare(&'a SpareSnapshot),
    Fresh,
}

enum Target {
    Head { kind: IndexKind, key: String, axes: Vec<AxisId> },
    Elliptical { axes: Vec<AxisId> },
}

struct BuiltClause {
    target: Target,
    line: Vec<MeaningOperator>,
    parameters: Vec<(AxisId, f64)>,
}

struct Evaluation {
    hierarchy: ContextHierarchy,
    clauses: Vec<ClauseResult>,
    report: ComprehensionReport,
}

/// A narrative: the lexicon, the knowledge state and its history.
#[derive(Clone, Debug)]
pub struct Session {
    lexicon: Arc<Lexicon>,
    config: EngineConfig,
    state: SessionState,
    history: Vec<HistoryEntry>,
    checkpoints: Vec<SessionState>,
    version: u64,
}

impl PartialEq for Session {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.state == other.state
            && self.history == other.history
            && self.checkpoints == other.checkpoints
            && self.version == other.version
    }
}

impl Session {
    pub fn new(lexicon: Arc<Lexicon>, config: EngineConfig) -> Self {
        let state = SessionState::new(config.spare_limit);
        Session { lexicon, config, state, history: Vec::new(), checkpoints: Vec::new(), version: 0 }
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn set_config(&mut self, config: EngineConfig) -> Result<()> {
        config.validate()?;
        self.state.spare.set_limit(config.spare_limit);
        self.config = config;
        self.version += 1;
        Ok(())
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    /// State before each history entry.
    pub fn checkpoints(&self) -> &[SessionState] {
        &self.checkpoints
    }

    /// Incremented by every mutation.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn active(&self) -> Option<&ContextId> {
        self.state.active.as_ref()
    }

    pub fn region(&self, id: &ContextId) -> Option<&Region> {
        self.state.regions.get(id)
    }

    pub fn context(&self, id: &ContextId) -> Option<&Context> {
        self.state.hierarchy.get(id)
    }

    pub fn spare(&self) -> &SpareBuffer {
        &self.state.spare
    }

    /// Resolve a context by id or, failing that, by index key.
    pub fn find_context(&self, name: &str) -> Option<&Context> {
        let h = &self.state.hierarchy;
        h.get(&ContextId::new(name)).or_else(|| {
            [IndexKind::Objects, IndexKind::Actions, IndexKind::NarrativeParts, IndexKind::Locations]
                .into_iter()
                .find_map(|k| h.lookup(k, name))
                .and_then(|id| h.get(id))
        })
    }

    pub fn parse(&self, text: &str) -> Result<Vec<ParseCandidate>> {
        parse(&self.lexicon, &tokenize(&self.lexicon, text)?)
    }

    /// Candidates after the homonym prefilter, as `interpret` evaluates them.
    pub fn candidates(&self, text: &str) -> Result<Vec<ParseCandidate>> {
        let all = self.parse(text)?;
        Ok(self.prefilter(all))
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = SessionDocument {
            config: self.config.clone(),
            state: self.state.clone(),
            history: self.history.clone(),
            checkpoints: self.checkpoints.clone(),
            version: self.version,
        };
        serde_json::to_string(&doc).map_err(|e| Error::Document { path: String::new(), message: e.to_string() })
    }

    pub fn from_json(text: &str, lexicon: Arc<Lexicon>) -> Result<Self> {
        let doc: SessionDocument = crate::lexicon::from_json_with_path(text)?;
        doc.config.validate()?;
        Ok(Session {
            lexicon,
            config: doc.config,
            state: doc.state,
            history: doc.history,
            checkpoints: doc.checkpoints,
            version: doc.version,
        })
    }

    pub fn interpret(&mut self, text: &str) -> InterpretationOutcome {
        self.interpret_inner(text, false)
    }

    /// Replay the last `window` phrases from the state before them with a
    /// new spare limit. The session changes only if the final replayed
    /// phrase is understood.
    pub fn reinterpret_window(&mut self, spare_limit: usize, window: usize) -> Replay {
        if window == 0 || window > self.history.len() {
            return Replay { applied: false, outcomes: Vec::new() };
        }
        let from = self.history.len() - window;
        let mut scratch = self.clone();
        scratch.config.spare_limit = spare_limit;
        scratch.state = self.checkpoints[from].clone();
        scratch.state.spare.set_limit(spare_limit);
        let phrases: Vec<String> = self.history[from..].iter().map(|h| h.phrase.clone()).collect();
        let outcomes: Vec<InterpretationOutcome> = phrases.iter().map(|p| scratch.interpret_inner(p, true)).collect();
        let applied = outcomes.last().is_some_and(|o| o.action != Action::ClarificationRequested);
        if applied {
            scratch.version = self.version + 1;
            *self = scratch;
        }
        Replay { applied, outcomes }
    }

    fn interpret_inner(&mut self, text: &str, replay: bool) -> InterpretationOutcome {
        let before = self.state.clone();
        let outcome = self.run(text);
        let digest = match &outcome.chosen {
            Some(c) => {
                let flags = c.report.flag_names();
                if flags.is_empty() {
                    c.candidate.structure()
                } else {
                    format!("{} {{{}}}", c.candidate.structure(), flags.join(","))
                }
            }
            None => outcome.clarification.clone().unwrap_or_default(),
        };
        self.checkpoints.push(before);
        self.history.push(HistoryEntry {
            phrase: text.to_string(),
            action: outcome.action,
            digest,
            replay,
            trace: outcome.trace.clone(),
        });
        self.version += 1;
        outcome
    }

    fn prefilter(&self, candidates: Vec<ParseCandidate>) -> Vec<ParseCandidate> {
        let Some(active) = self.state.active.as_ref().and_then(|a| self.state.hierarchy.get(a)) else {
            return candidates;
        };
        let Some(first) = candidates.first() else {
            return candidates;
        };
        let lex = &self.lexicon;
        let all_words = candidates.len() >= self.config.candidate_guard;
        let mut allowed: Vec<Vec<usize>> = Vec::new();
        for w in &first.tokens {
            let senses = lex.lookup(w);
            let filter = senses.len() > 1 && (all_words || pos_of(lex, w) == Some(PartOfSpeech::Noun));
            let overlapping: Vec<usize> =
                (0..senses.len()).filter(|&i| senses[i].internal_axes.iter().any(|a| active.contains(a))).collect();
            allowed.push(if filter && !overlapping.is_empty() {
                overlapping
            } else {
                (0..senses.len().max(1)).collect()
            });
        }
        candidates.into_iter().filter(|c| c.sense_choices.iter().zip(&allowed).all(|(s, ok)| ok.contains(s))).collect()
    }

    fn sense(&self, c: &ParseCandidate, token: usize) -> Result<&Sense> {
        self.lexicon
            .lookup(&c.tokens[token])
            .get(c.sense_choices[token])
            .ok_or_else(|| Error::UnknownWords(vec![c.tokens[token].clone()]))
    }

    fn node_op(&self, c: &ParseCandidate, node: &Node) -> Result<MeaningOperator> {
        match node {
            Node::Word { token } => Ok(self.sense(c, *token)?.operator.clone()),
            Node::Modified { token, operand } => {
                compose_block(&self.sense(c, *token)?.operator, &self.node_op(c, operand)?)
            }
            Node::Junction { junction, left, right, .. } => {
                Ok(MeaningOperator::conjunction(*junction, vec![self.node_op(c, left)?, self.node_op(c, right)?]))
            }
        }
    }

    fn build_clause(&self, c: &ParseCandidate, clause: &ClauseTree) -> Result<BuiltClause> {
        let mut line = Vec::new();
        let mut parameters = Vec::new();
        let target = match clause.head {
            Some(h) => {
                let word = &c.tokens[h];
                let senses = self.lexicon.lookup(word);
                let sense = self.sense(c, h)?;
                let mut op = sense.operator.clone();
                for m in &clause.block {
                    op = compose_block(&self.node_op(c, m)?, &op)?;
                }
                parameters = op.parameter_values();
                let axes = if sense.context_axes.is_empty() {
                    op.external_axes().ok_or_else(|| Error::NoInternalContext(word.clone()))?
                } else {
                    sense.context_axes.clone()
                };
                let shared = senses.iter().all(|s| s.context_axes == sense.context_axes);
                let key = if shared { word.clone() } else { format!("{word}#{}", c.sense_choices[h]) };
                let kind = match self.lexicon.entry(word).map(|e| e.pos) {
                    Some(PartOfSpeech::Verb) => IndexKind::Actions,
                    _ => IndexKind::Objects,
                };
                line.push(op);
                Target::Head { kind, key, axes }
            }
            None => Target::Elliptical { axes: Vec::new() },
        };
        for n in &clause.line {
            line.push(self.node_op(c, n)?);
        }
        let target = match target {
            Target::Elliptical { .. } => {
                let mut axes: Vec<AxisId> = Vec::new();
                for op in &line {
                    for a in op.external_axes().unwrap_or_default() {
                        if !axes.contains(&a) {
                            axes.push(a);
                        }
                    }
                }
                if axes.is_empty() {
                    return Err(Error::Ungrammatical("nothing to apply the modifiers to".into()));
                }
                Target::Elliptical { axes }
            }
            t => t,
        };
        Ok(BuiltClause { target, line, parameters })
    }

    /// Context for an elliptical clause over `axes` with nothing to attach to.
    fn elliptical_base(&self, axes: &[AxisId]) -> String {
        self.lexicon
            .contexts()
            .find(|c| c.axes.len() == axes.len() && axes.iter().all(|a| c.contains(a)))
            .map(|c| c.id.as_str().to_string())
            .unwrap_or_else(|| axes.iter().map(AxisId::as_str).collect::<Vec<_>>().join("+"))
    }

    fn resolve(
        &self,
        h: &mut ContextHierarchy,
        target: &Target,
        mode: SourceMode<'_>,
        first: Option<&Context>,
    ) -> Result<(Context, bool)> {
        let fresh = matches!(mode, SourceMode::Fresh);
        match target {
            Target::Head { kind, key, axes } => {
                if !fresh {
                    if let Some(c) = h.lookup(*kind, key).and_then(|id| h.get(id)) {
                        return Ok((c.clone(), false));
                    }
                }
                let c = Context::new(h.fresh_id(key).0, axes.clone())?;
                h.insert(c.clone())?;
                h.index(*kind, key.clone(), &c.id)?;
                Ok((c, true))
            }
            Target::Elliptical { axes } => {
                let fits = |c: &Context| axes.iter().all(|a| c.contains(a));
                if !fresh {
                    let active = self.state.active.as_ref().and_then(|a| h.get(a));
                    let found =
                        first.filter(|c| fits(c)).or(active.filter(|c| fits(c))).or_else(|| h.most_recent_with(axes));
                    if let Some(c) = found {
                        return Ok((c.clone(), false));
                    }
                }
                let base = self.elliptical_base(axes);
                let c = Context::new(h.fresh_id(&base).0, axes.clone())?;
                h.insert(c.clone())?;
                h.index(IndexKind::NarrativeParts, c.id.as_str().to_string(), &c.id)?;
                Ok((c, true))
            }
        }
    }

    /// Apply a candidate to a copy of the state. Never mutates the session.
    fn evaluate(&self, c: &ParseCandidate, mode: SourceMode<'_>) -> Result<Evaluation> {
        let mut h = self.state.hierarchy.clone();
        let mut clauses: Vec<ClauseResult> = Vec::new();
        let mut reports = Vec::new();
        let effector_axes = self.lexicon.effector_axes();
        let mut first_ctx: Option<Context> = None;
        for (k, tree) in c.clauses.iter().enumerate() {
            let built = self.build_clause(c, tree)?;
            let (ctx, is_new) = self.resolve(&mut h, &built.target, mode, first_ctx.as_ref())?;
            let source = match mode {
                SourceMode::Spare(s) if k == 0 => {
                    if s.context.id != ctx.id {
                        return Err(Error::ContextMismatch { expected: s.context.id.clone(), found: ctx.id.clone() });
                    }
                    s.region.clone()
                }
                SourceMode::Fresh => Region::empty(ctx.clone()),
                _ if is_new => Region::empty(ctx.clone()),
                _ => self.state.region_of(&ctx),
            };
            let phrase = PhraseOperator::new(ctx.id.clone(), built.line);
            let stages = phrase.apply_traced(&source)?;
            reports.push(assess(
                &Assessment { stages: &stages, mood: c.mood, reset_phrase: c.reset, effector_axes: &effector_axes },
                &self.config.comprehension,
            )?);
            let mut region = stages.last().expect("non-empty").clone();
            let mut store_ctx = ctx.clone();
            // The second conjunct of "but" worked from the same source; its
            // result goes to a subspace of the shared context.
            if k > 0 && first_ctx.as_ref().is_some_and(|f| f.id == ctx.id) {
                let child = Context::new(h.fresh_id(&format!("{}/but", ctx.id)).0, ctx.axes.clone())?
                    .with_parent(ctx.id.clone());
                h.insert(child.clone())?;
                h.index(IndexKind::NarrativeParts, child.id.as_str().to_string(), &child.id)?;
                region = region.with_context(child.clone())?;
                store_ctx = child;
            }
            if k == 0 {
                first_ctx = Some(ctx);
            }
            clauses.push(ClauseResult { context: store_ctx, phrase, region, parameters: built.parameters });
        }
        let report =
            if reports.len() == 1 { reports.pop().expect("one") } else { ComprehensionReport::merge(&reports) };
        Ok(Evaluation { hierarchy: h, clauses, report })
    }

    fn commit(&mut self, c: &ParseCandidate, eval: &Evaluation) {
        if c.mood == Mood::Conditional {
            return;
        }
        self.state.hierarchy = eval.hierarchy.clone();
        for cl in &eval.clauses {
            self.state.regions.insert(cl.context.id.clone(), cl.region.clone());
        }
        self.state.active = eval.clauses.first().map(|cl| cl.context.id.clone());
    }

    fn chosen(c: &ParseCandidate, eval: Evaluation) -> ChosenInterpretation {
        let first = eval.clauses.first().expect("at least one clause").clone();
        ChosenInterpretation {
            candidate: c.clone(),
            phrase: first.phrase,
            region: first.region,
            report: eval.report,
            clauses: eval.clauses,
        }
    }

    fn run(&mut self, text: &str) -> InterpretationOutcome {
        let mut trace = vec![format!("phrase: {text}")];
        let mut outcome = InterpretationOutcome {
            phrase: text.to_string(),
            chosen: None,
            candidates: Vec::new(),
            alternatives_kept: 0,
            action: Action::ClarificationRequested,
            trace: Vec::new(),
            clarification: None,
        };
        let tokens = match tokenize(&self.lexicon, text) {
            Ok(t) => t,
            Err(e) => {
                trace.push(format!("tokenize failed: {e}"));
                outcome.clarification = Some(match e {
                    Error::UnknownWords(w) => format!("I do not know the words: {}.", w.join(", ")),
                    Error::EmptyPhrase => "Say something I can interpret.".into(),
                    other => other.to_string(),
                });
                outcome.trace = trace;
                return outcome;
            }
        };
        trace.push(format!("tokens: {}{}", tokens.lemmas.join(" "), if tokens.reset { " (reset)" } else { "" }));
        let all = match parse(&self.lexicon, &tokens) {
            Ok(c) => c,
            Err(e) => {
                trace.push(format!("parse failed: {e}"));
                outcome.clarification = Some(format!("I cannot parse that: {e}."));
                outcome.trace = trace;
                return outcome;
            }
        };
        let total = all.len();
        let unfiltered = all.clone();
        let candidates = self.prefilter(all);
        if candidates.len() < total {
            trace.push(format!("prefilter kept {} of {total} candidates by internal-axis overlap", candidates.len()));
        }
        let threshold = self.config.comprehension.threshold;
        let mut evals: Vec<Option<Evaluation>> = Vec::new();
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in candidates.iter().enumerate() {
            let mut summary = CandidateSummary {
                index: i,
                structure: c.structure(),
                senses: c.senses(&self.lexicon),
                context: None,
                score: None,
                flags: Vec::new(),
                error: None,
            };
            match self.evaluate(c, SourceMode::Current) {
                Ok(e) => {
                    let score = e.report.aggregate;
                    summary.context = e.clauses.first().map(|cl| cl.context.id.clone());
                    summary.score = Some(score);
                    summary.flags = e.report.flag_names().into_iter().map(String::from).collect();
                    trace.push(format!(
                        "candidate {i}: {} in {} score {score:.4} flags [{}]",
                        summary.structure,
                        summary.context.as_ref().map(|c| c.as_str()).unwrap_or("-"),
                        summary.flags.join(", ")
                    ));
                    for cl in &e.clauses {
                        if !cl.parameters.is_empty() {
                            let p: Vec<String> = cl.parameters.iter().map(|(a, v)| format!("{a}={v:.4}")).collect();
                            trace.push(format!("  parameters by centroid rule: {}", p.join(" ")));
                        }
                    }
                    if score >= threshold && best.is_none_or(|(_, s)| score > s) {
                        best = Some((i, score));
                    }
                    evals.push(Some(e));
                }
                Err(e) => {
                    trace.push(format!("candidate {i}: {} rejected: {e}", summary.structure));
                    summary.error = Some(e.to_string());
                    evals.push(None);
                }
            }
            outcome.candidates.push(summary);
        }

        if let Some((i, score)) = best {
            trace.push(format!("selected candidate {i} (score {score:.4} ≥ threshold {threshold})"));
            let c = &candidates[i];
            let mut spares: Vec<(usize, f64)> = outcome
                .candidates
                .iter()
                .filter(|s| s.index != i && s.score.is_some_and(|v| v >= threshold))
                .map(|s| (s.index, s.score.unwrap_or(0.0)))
                .collect();
            // Best runner-up ends up most recent.
            spares.sort_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
            if c.mood != Mood::Conditional {
                for (j, _) in &spares {
                    if let Some(e) = &evals[*j] {
                        let first = &e.clauses[0];
                        let context =
                            self.state.hierarchy.get(&first.context.id).cloned().unwrap_or(first.context.clone());
                        self.state.spare.push(SpareSnapshot {
                            context,
                            region: first.region.clone(),
                            origin: format!("{}: {}", text, outcome.candidates[*j].structure),
                        });
                    }
                }
                outcome.alternatives_kept = spares.len().min(self.state.spare.limit());
                if outcome.alternatives_kept > 0 {
                    trace.push(format!("kept {} runner-up(s) as spare contexts", outcome.alternatives_kept));
                }
            } else {
                trace.push("conditional mood: scored, not committed".into());
            }
            let eval = evals[i].take().expect("scored candidate");
            self.commit(c, &eval);
            outcome.chosen = Some(Self::chosen(c, eval));
            outcome.action = Action::Accepted;
            outcome.trace = trace;
            return outcome;
        }

        trace.push(format!("understanding issue: no candidate reached threshold {threshold}"));
        // Retry against spare contexts, most recent first.
        let spares: Vec<SpareSnapshot> = self.state.spare.iter().cloned().collect();
        for (k, s) in spares.iter().enumerate() {
            let mut found: Option<(usize, f64, Evaluation)> = None;
            for (i, c) in candidates.iter().enumerate() {
                if let Ok(e) = self.evaluate(c, SourceMode::Spare(s)) {
                    let score = e.report.aggregate;
                    trace.push(format!("spare {k} ({}): candidate {i} score {score:.4}", s.origin));
                    if score >= threshold && found.as_ref().is_none_or(|(_, b, _)| score > *b) {
                        found = Some((i, score, e));
                    }
                }
            }
            if let Some((i, score, e)) = found {
                trace.push(format!("selected candidate {i} in spare {k} (score {score:.4})"));
                self.state.spare.remove(k);
                self.commit(&candidates[i], &e);
                outcome.chosen = Some(Self::chosen(&candidates[i], e));
                outcome.action = Action::RetriedSpareContext;
                outcome.trace = trace;
                return outcome;
            }
        }
        // A fresh context owes nothing to the active one, so the senses
        // dropped by the prefilter come back.
        let mut found: Option<(usize, f64, Evaluation)> = None;
        for (i, c) in unfiltered.iter().enumerate() {
            if let Ok(e) = self.evaluate(c, SourceMode::Fresh) {
                let score = e.report.aggregate;
                trace.push(format!("fresh context: {} score {score:.4}", c.structure()));
                if score >= threshold && found.as_ref().is_none_or(|(_, b, _)| score > *b) {
                    found = Some((i, score, e));
                }
            }
        }
        if let Some((i, score, e)) = found {
            trace.push(format!("selected {} in a fresh context (score {score:.4})", unfiltered[i].structure()));
            self.commit(&unfiltered[i], &e);
            outcome.chosen = Some(Self::chosen(&unfiltered[i], e));
            outcome.action = Action::RetriedSpareContext;
            outcome.trace = trace;
            return outcome;
        }

        trace.push("requesting clarification".into());
        outcome.clarification = Some(self.clarification_text(text, &outcome.candidates, &evals));
        outcome.trace = trace;
        outcome
    }

    fn clarification_text(&self, text: &str, summaries: &[CandidateSummary], evals: &[Option<Evaluation>]) -> String {
        let best = evals
            .iter()
            .enumerate()
            .filter_map(|(i, e)| e.as_ref().map(|e| (i, e)))
            .max_by(|a, b| a.1.report.aggregate.total_cmp(&b.1.report.aggregate).then(b.0.cmp(&a.0)));
        let Some((i, e)) = best else {
            let why = summaries.iter().find_map(|s| s.error.clone()).unwrap_or_else(|| "no reading".into());
            return format!("I could not build a reading of \"{text}\": {why}.");
        };
        if let EffectorOutcome::Clarify { axis, runs } = &e.report.effector {
            let opts: Vec<String> = runs.iter().map(|(a, b)| format!("{a:.2}–{b:.2}")).collect();
            return format!("Which {axis} do you mean: {}?", opts.join(" or "));
        }
        format!(
            "I do not understand \"{text}\": the best reading {} is flagged {}.",
            summaries[i].structure,
            e.report.flag_names().join(", ")
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::{fixtures, seed_lexicon};

    fn session() -> Session {
        Session::new(Arc::new(seed_lexicon(64).unwrap()), EngineConfig::default())
    }

    #[test]
    fn tokenizer_applies_morphology() {
        let lex = seed_lexicon(16).unwrap();
        let t = tokenize(&lex, "Forget everything, I was standing still!").unwrap();
        assert!(t.reset);
        assert_eq!(t.lemmas, ["is", "stand-still"]);
        assert_eq!(tokenize(&lex, "please walk quickly").unwrap().lemmas, ["walk", "fast"]);
        assert_eq!(tokenize(&lex, "walk zorply").unwrap_err(), Error::UnknownWords(vec!["zorply".into()]));
        assert_eq!(tokenize(&lex, "the a").unwrap_err(), Error::EmptyPhrase);
    }

    #[test]
    fn grammar_structures() {
        let s = session();
        let c = s.parse("walk very fast").unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].structure(), "walk[very(fast)]");
        assert_eq!(c[0].mood, Mood::Imperative);
        let c = s.parse("drive very fast or very slowly").unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].structure(), "drive[(very(fast) or very(slow))]");
        assert_eq!(s.parse("fast and heavy car").unwrap()[0].structure(), "car[(fast and heavy)]");
        assert_eq!(s.parse("slow and fast and heavy").unwrap().len(), 2);
        assert_eq!(s.parse("if I was driving fast").unwrap()[0].mood, Mood::Conditional);
        assert_eq!(s.parse("car is fast").unwrap()[0].mood, Mood::Realis);
        assert_eq!(s.parse("walk faster").unwrap()[0].structure(), "walk → faster");
        assert!(s.parse("very").is_err());
        assert!(s.parse("fast and").is_err());
        assert!(s.parse("faster fast").is_err());
    }

    #[test]
    fn block_composition_sets_parameters() {
        let mut s = session();
        let o = s.interpret("walk very fast");
        assert_eq!(o.action, Action::Accepted);
        let chosen = o.chosen.unwrap();
        assert_eq!(chosen.phrase.line.len(), 1);
        let very = chosen.clauses[0].parameters[0].1;
        let fast = session().interpret("walk fast").chosen.unwrap().clauses[0].parameters[0].1;
        assert!(very > fast && fast > 0.5);
    }

    #[test]
    fn actualization_is_idempotent() {
        let mut s = session();
        let a = s.interpret("car is fast").chosen.unwrap().clauses[0].context.id.clone();
        let b = s.interpret("car is heavy").chosen.unwrap().clauses[0].context.id.clone();
        assert_eq!(a, b);
        let w = s.interpret("walk").chosen.unwrap().clauses[0].context.id.clone();
        assert_ne!(a, w);
        assert!(s.context(&w).unwrap().contains(&AxisId::new("t")));
    }

    #[test]
    fn rejected_candidates_leave_state_alone() {
        let mut s = session();
        s.interpret("walk");
        let before = s.state().clone();
        let o = s.interpret("stand still faster");
        assert_eq!(o.action, Action::ClarificationRequested);
        assert!(o.chosen.is_none());
        assert_eq!(s.state(), &before);
        assert_eq!(s.history().len(), 2);
    }

    #[test]
    fn unknown_words_ask_for_clarification() {
        let mut s = session();
        let o = s.interpret("walk blorp");
        assert_eq!(o.action, Action::ClarificationRequested);
        assert!(o.clarification.unwrap().contains("blorp"));
    }

    #[test]
    fn spare_limit_is_respected() {
        let lex = Arc::new(fixtures::replay_lexicon(32).unwrap());
        for limit in [0, 1, 2] {
            let cfg = EngineConfig { spare_limit: limit, ..Default::default() };
            let mut s = Session::new(lex.clone(), cfg);
            for p in ["move", "move", "walk", "move"] {
                s.interpret(p);
                assert!(s.spare().len() <= limit);
            }
        }
    }
}
