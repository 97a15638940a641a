//! Describing regions with words: a beam search over compositions of known
//! operators, most abstract first, followed by refinement into concrete
//! operators that the abstract ones stand for.

use serde::{Deserialize, Serialize};

use crate::abstraction::{default_probes, is_abstracting, AbstractionParams, AbstractionVerdict};
use crate::comprehension::Check;
use crate::error::{Error, Result};
use crate::lexicon::{Lexicon, PartOfSpeech};
use crate::operator::{MeaningOperator, OperatorKind};
use crate::region::{AxisId, Region};

/// Number of bins on the goal-satisfaction axis.
pub const GOAL_BINS: usize = 64;

/// Half-width of the triangular goal-axis membership around the mean
/// agreement.
pub const AGREEMENT_SPREAD: f64 = 0.1;

/// The test operator: maps a final region to a one-axis region over goal
/// satisfaction `p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "snake_case")]
pub enum GoalTest {
    /// `G(R)(p) = sup { R(x) : satisfaction(x) ≈ p }` for a satisfaction
    /// region over the final context.
    Image { satisfaction: Region },
    /// Mean agreement `a = 1 - mean |R(x) - T(x)|` with per-source target
    /// regions, spread into a triangle of half-width `AGREEMENT_SPREAD`
    /// around `a`.
    Agreement { targets: Vec<Region> },
}

impl GoalTest {
    /// Goal-axis membership, one value per bin (bin `k` centred at `k/(n-1)`).
    pub fn apply(&self, finals: &[Region]) -> Result<Vec<f64>> {
        let mut g = vec![0.0f64; GOAL_BINS];
        let bin = |p: f64| ((p.clamp(0.0, 1.0) * (GOAL_BINS - 1) as f64).round()) as usize;
        match self {
            GoalTest::Image { satisfaction } => {
                for r in finals {
                    let (_, s) = Region::joint_samples(&[r, satisfaction])?;
                    for (m, p) in s[0].iter().zip(&s[1]) {
                        let k = bin(*p);
                        g[k] = g[k].max(*m);
                    }
                }
            }
            GoalTest::Agreement { targets } => {
                if targets.len() != finals.len() {
                    return Err(Error::Config(format!("{} targets for {} sources", targets.len(), finals.len())));
                }
                let (mut sum, mut n) = (0.0, 0usize);
                for (r, t) in finals.iter().zip(targets) {
                    let (_, s) = Region::joint_samples(&[r, t])?;
                    sum += s[0].iter().zip(&s[1]).map(|(a, b)| (a - b).abs()).sum::<f64>();
                    n += s[0].len();
                }
                let agreement = if n == 0 { 0.0 } else { 1.0 - sum / n as f64 };
                for (k, v) in g.iter_mut().enumerate() {
                    *v = (1.0 - (bin_coord(k) - agreement).abs() / AGREEMENT_SPREAD).max(0.0);
                }
            }
        }
        Ok(g)
    }
}

fn bin_coord(k: usize) -> f64 {
    k as f64 / (GOAL_BINS - 1) as f64
}

/// Membership-weighted mean position on the goal axis.
pub fn goal_score(g: &[f64]) -> f64 {
    let total: f64 = g.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    g.iter().enumerate().map(|(k, m)| bin_coord(k) * m).sum::<f64>() / total
}

/// Largest membership on the near-one part `p ≥ 1 - θ`.
pub fn goal_membership(g: &[f64], theta: f64) -> f64 {
    g.iter().enumerate().filter(|(k, _)| bin_coord(*k) >= 1.0 - theta).map(|(_, m)| *m).fold(0.0, f64::max)
}

/// High membership exactly on the near-one part of the goal axis.
pub fn goal_met(g: &[f64], theta: f64) -> bool {
    let level = 1.0 - theta;
    let below = g.iter().enumerate().filter(|(k, _)| bin_coord(*k) < level).map(|(_, m)| *m).fold(0.0, f64::max);
    goal_membership(g, theta) >= level && below < level
}

/// Mean distance of goal-axis memberships from the nearest of 0 and 1.
pub fn goal_fuzziness(g: &[f64]) -> f64 {
    g.iter().map(|m| m.min(1.0 - m)).sum::<f64>() / g.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolOperator {
    pub operator: MeaningOperator,
    /// 0 is the most concrete.
    pub level: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescribeProblem {
    /// Source regions; all share one context.
    pub sources: Vec<Region>,
    pub pool: Vec<PoolOperator>,
    pub goal: GoalTest,
    /// Proximity to one that counts as reaching the goal.
    pub goal_threshold: f64,
    pub abstraction: AbstractionParams,
    pub beam_width: usize,
    pub max_depth: usize,
    /// Longest concrete sequence tried for one abstract operator.
    pub refine_length: usize,
    /// Probe regions for the abstraction test; the sources are added.
    pub probes: Vec<Region>,
}

impl DescribeProblem {
    pub fn new(sources: Vec<Region>, pool: Vec<PoolOperator>, goal: GoalTest) -> Result<Self> {
        let context = sources.first().ok_or_else(|| Error::NoDescription("no source region".into()))?.context();
        let probes = default_probes(context, sources[0].max_resolution().max(2))?;
        Ok(DescribeProblem {
            sources,
            pool,
            goal,
            goal_threshold: 0.1,
            abstraction: AbstractionParams::new(0.1, 0.2)?,
            beam_width: 4,
            max_depth: 6,
            refine_length: 3,
            probes,
        })
    }

    fn context_axes(&self) -> &[AxisId] {
        &self.sources[0].context().axes
    }

    /// Operators that can act on the source context.
    fn applicable(&self, op: &MeaningOperator) -> bool {
        match op.external_axes() {
            None => true,
            Some(axes) => !axes.is_empty() && axes.iter().all(|a| self.context_axes().contains(a)),
        }
    }

    fn evaluate(&self, composition: &[MeaningOperator]) -> Result<Vec<f64>> {
        let op = MeaningOperator::sequence(composition.to_vec());
        let finals: Vec<Region> = self.sources.iter().map(|s| op.apply(s)).collect::<Result<_>>()?;
        self.goal.apply(&finals)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    /// Composition, outermost operator first.
    pub composition: Vec<String>,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub element: String,
    /// Replacement sequence; empty when the element was kept.
    pub replacement: Vec<String>,
    pub verdict: Option<AbstractionVerdict>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Description {
    /// Outermost operator first: `[not, fast]` is `not ∘ fast`.
    pub composition: Vec<MeaningOperator>,
    pub names: Vec<String>,
    pub goal: Vec<f64>,
    pub score: f64,
    pub goal_membership: f64,
    pub goal_met: bool,
    /// Scores along the chosen extension path, starting from the identity.
    pub trace: Vec<TraceStep>,
    /// Composition before refinement and its goal region.
    pub abstract_names: Vec<String>,
    pub abstract_goal: Vec<f64>,
    pub refinements: Vec<Refinement>,
    /// Compositions evaluated plus abstraction checks made.
    pub visited: usize,
    /// Sequences of pool operators up to the found length.
    pub exhaustive: usize,
}

struct Node {
    composition: Vec<MeaningOperator>,
    goal: Vec<f64>,
    score: f64,
    path: Vec<TraceStep>,
}

fn names(ops: &[MeaningOperator]) -> Vec<String> {
    ops.iter().map(|o| o.name.clone()).collect()
}

/// Beam search from `start` with pool operators at `level` (or any level
/// when `None`). The best node changes only on a strict score increase.
fn beam(problem: &DescribeProblem, start: Node, level: Option<u32>, visited: &mut usize) -> Result<Node> {
    let theta = problem.goal_threshold;
    let ops: Vec<&MeaningOperator> = problem
        .pool
        .iter()
        .filter(|p| level.is_none_or(|l| p.level == l))
        .map(|p| &p.operator)
        .filter(|o| problem.applicable(o))
        .collect();
    let mut best = start;
    if goal_met(&best.goal, theta) {
        return Ok(best);
    }
    let mut frontier = vec![Node {
        composition: best.composition.clone(),
        goal: best.goal.clone(),
        score: best.score,
        path: best.path.clone(),
    }];
    let mut depth = best.composition.len();
    while depth < problem.max_depth && !frontier.is_empty() {
        let mut children: Vec<Node> = Vec::new();
        for parent in &frontier {
            for op in &ops {
                let ends: &[bool] = if parent.composition.is_empty() { &[true] } else { &[true, false] };
                for &front in ends {
                    let mut comp = parent.composition.clone();
                    if front {
                        comp.insert(0, (*op).clone());
                    } else {
                        comp.push((*op).clone());
                    }
                    if children.iter().any(|c| names(&c.composition) == names(&comp)) {
                        continue;
                    }
                    *visited += 1;
                    let Ok(goal) = problem.evaluate(&comp) else {
                        continue;
                    };
                    let score = goal_score(&goal);
                    let mut path = parent.path.clone();
                    path.push(TraceStep { composition: names(&comp), score });
                    children.push(Node { composition: comp, goal, score, path });
                }
            }
        }
        children.sort_by(|a, b| b.score.total_cmp(&a.score));
        children.truncate(problem.beam_width);
        depth += 1;
        if let Some(top) = children.first() {
            if top.score > best.score {
                best = Node {
                    composition: top.composition.clone(),
                    goal: top.goal.clone(),
                    score: top.score,
                    path: top.path.clone(),
                };
            }
        }
        if let Some(done) = children.iter().find(|c| goal_met(&c.goal, theta)) {
            return Ok(Node {
                composition: done.composition.clone(),
                goal: done.goal.clone(),
                score: done.score,
                path: done.path.clone(),
            });
        }
        frontier = children;
    }
    Ok(best)
}

fn sequences(n: usize, len: usize) -> Vec<Vec<usize>> {
    (0..len).fold(vec![Vec::new()], |acc, _| {
        acc.iter()
            .flat_map(|p| {
                (0..n).map(move |i| {
                    let mut v = p.clone();
                    v.push(i);
                    v
                })
            })
            .collect()
    })
}

/// Replace every abstract element by the first (shortest, then in pool
/// order) sequence of less abstract operators it abstracts.
pub fn refine_composition(
    composition: &[MeaningOperator],
    problem: &DescribeProblem,
    visited: &mut usize,
) -> Result<(Vec<MeaningOperator>, Vec<Refinement>)> {
    let level_of =
        |op: &MeaningOperator| problem.pool.iter().find(|p| p.operator.name == op.name).map(|p| p.level).unwrap_or(0);
    let mut probes = problem.probes.clone();
    probes.extend(problem.sources.iter().cloned());
    let mut out = Vec::new();
    let mut log = Vec::new();
    for element in composition {
        let level = level_of(element);
        let y = match element.external_axes() {
            Some(axes) if level > 0 => axes,
            _ => {
                out.push(element.clone());
                continue;
            }
        };
        let lower: Vec<&MeaningOperator> = problem
            .pool
            .iter()
            .filter(|p| p.level < level)
            .map(|p| &p.operator)
            .filter(|o| o.external_axes().is_some_and(|a| a.iter().all(|x| y.contains(x))))
            .collect();
        let mut chosen: Option<(Vec<MeaningOperator>, AbstractionVerdict)> = None;
        'search: for len in 1..=problem.refine_length {
            for seq in sequences(lower.len(), len) {
                let ops: Vec<MeaningOperator> = seq.iter().map(|&i| lower[i].clone()).collect();
                *visited += 1;
                let family = [MeaningOperator::sequence(ops.clone())];
                let Ok(v) = is_abstracting(element, &family, &y, &problem.abstraction, &probes) else {
                    continue;
                };
                if v.holds {
                    chosen = Some((ops, v));
                    break 'search;
                }
            }
        }
        match chosen {
            Some((ops, v)) => {
                log.push(Refinement { element: element.name.clone(), replacement: names(&ops), verdict: Some(v) });
                out.extend(ops);
            }
            None => {
                log.push(Refinement { element: element.name.clone(), replacement: Vec::new(), verdict: None });
                out.push(element.clone());
            }
        }
    }
    Ok((out, log))
}

/// Find a composition of pool operators whose result on the sources
/// reaches the goal.
pub fn describe(problem: &DescribeProblem) -> Result<Description> {
    if problem.sources.is_empty() {
        return Err(Error::NoDescription("no source region".into()));
    }
    let usable: Vec<&PoolOperator> = problem.pool.iter().filter(|p| problem.applicable(&p.operator)).collect();
    if usable.is_empty() || usable.iter().all(|p| p.operator.external_axes().is_none()) {
        return Err(Error::NoDescription("no operator in the pool acts on the context".into()));
    }
    let theta = problem.goal_threshold;
    let mut visited = 0;
    let goal = problem.evaluate(&[])?;
    let score = goal_score(&goal);
    let start = Node { composition: Vec::new(), goal, score, path: vec![TraceStep { composition: Vec::new(), score }] };
    let top = usable.iter().map(|p| p.level).max().unwrap_or(0);
    let mut node = beam(problem, start, Some(top), &mut visited)?;
    if top > 0 && !goal_met(&node.goal, theta) && node.composition.is_empty() {
        // Nothing at the top level helps; search every level at once.
        node = beam(problem, node, None, &mut visited)?;
    }
    if node.composition.is_empty() && !goal_met(&node.goal, theta) {
        return Err(Error::NoDescription("no composition improves on the source".into()));
    }
    let abstract_names = names(&node.composition);
    let abstract_goal = node.goal.clone();
    let (refined, refinements) = refine_composition(&node.composition, problem, &mut visited)?;
    let mut goal = problem.evaluate(&refined)?;
    let mut composition = refined;
    let mut trace = node.path;
    if names(&composition) != abstract_names {
        trace.push(TraceStep { composition: names(&composition), score: goal_score(&goal) });
    }
    if !goal_met(&goal, theta) {
        let start = Node {
            composition: composition.clone(),
            score: goal_score(&goal),
            goal: goal.clone(),
            path: trace.clone(),
        };
        let more = beam(problem, start, None, &mut visited)?;
        composition = more.composition;
        goal = more.goal;
        trace = more.path;
    }
    let pool_size = problem.pool.len();
    let exhaustive = (1..=composition.len().max(1)).map(|d| pool_size.pow(d as u32)).sum();
    Ok(Description {
        names: names(&composition),
        score: goal_score(&goal),
        goal_membership: goal_membership(&goal, theta),
        goal_met: goal_met(&goal, theta),
        composition,
        goal,
        trace,
        abstract_names,
        abstract_goal,
        refinements,
        visited,
        exhaustive,
    })
}

/// Operators of the lexicon usable in descriptions, with their levels.
pub fn lexicon_pool(lex: &Lexicon, exclude: &[&str]) -> Vec<PoolOperator> {
    let mut pool = Vec::new();
    for entry in lex.entries() {
        if exclude.contains(&entry.word.as_str()) || entry.pos == PartOfSpeech::Conjunction {
            continue;
        }
        for s in &entry.senses {
            if matches!(s.operator.kind, OperatorKind::Identity) {
                continue;
            }
            pool.push(PoolOperator { operator: s.operator.clone(), level: s.level });
        }
    }
    pool
}

/// Describe a word by other words: search compositions, without the
/// word's own senses, that agree with the word on a probe set.
pub fn describe_own_concept(word: &str, lex: &Lexicon) -> Result<Description> {
    let senses = lex.lookup(word);
    let sense = senses.first().ok_or_else(|| Error::UnknownWords(vec![word.to_string()]))?;
    let op = &sense.operator;
    let context = match (&op.internal, op.external_axes()) {
        (Some(i), _) if matches!(op.kind, OperatorKind::Projection { .. }) => {
            lex.contexts().find(|c| c.axes == i.context.axes).cloned().unwrap_or_else(|| i.context.clone())
        }
        (_, Some(axes)) => lex
            .contexts()
            .find(|c| axes.iter().all(|a| c.contains(a)))
            .cloned()
            .ok_or_else(|| Error::NoDescription(format!("no context for `{word}`")))?,
        _ => return Err(Error::NoDescription(format!("`{word}` acts on any region"))),
    };
    describe_operator(op, &context, lex, &[word])
}

/// Describe what `op` does on `context` with the lexicon's other words.
pub fn describe_operator(
    op: &MeaningOperator,
    context: &crate::region::Context,
    lex: &Lexicon,
    exclude: &[&str],
) -> Result<Description> {
    let res =
        op.parameters().map(|p| p.max_resolution()).filter(|r| *r > 1).unwrap_or(crate::region::DEFAULT_RESOLUTION);
    let sources = default_probes(context, res)?;
    let targets: Vec<Region> = sources.iter().map(|s| op.apply(s)).collect::<Result<_>>()?;
    let pool = lexicon_pool(lex, exclude);
    let problem = DescribeProblem::new(sources, pool, GoalTest::Agreement { targets })?;
    let d = describe(&problem)?;
    if !d.goal_met {
        return Err(Error::NoDescription(format!(
            "best composition {:?} reaches goal membership {:.3}",
            d.names, d.goal_membership
        )));
    }
    Ok(d)
}

/// Describe a region as the result of a composition applied to nothing.
pub fn describe_region(region: &Region, lex: &Lexicon) -> Result<Description> {
    let source = Region::empty(region.context().clone());
    let problem = DescribeProblem::new(
        vec![source],
        lexicon_pool(lex, &[]),
        GoalTest::Agreement { targets: vec![region.clone()] },
    )?;
    describe(&problem)
}

/// One failing interpretation: the last region that still made sense and
/// the first one that did not.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureCase {
    pub label: String,
    pub passing: Region,
    pub failing: Region,
    pub check: Check,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureEntry {
    pub label: String,
    pub check: Check,
    /// Words for the passing fragment, or why none were found.
    pub passing: std::result::Result<Vec<String>, String>,
    pub failing: std::result::Result<Vec<String>, String>,
}

impl FailureEntry {
    pub fn render(&self) -> String {
        let words = |r: &std::result::Result<Vec<String>, String>| match r {
            Ok(w) if w.is_empty() => "nothing in particular".to_string(),
            Ok(w) => w.join(" "),
            Err(e) => format!("(no description: {e})"),
        };
        format!(
            "{}: understood up to \"{}\", failed at \"{}\" ({})",
            self.label,
            words(&self.passing),
            words(&self.failing),
            self.check
        )
    }
}

/// Report an interpretation crisis: words for the largest fragment that
/// made sense and the smallest that did not, per candidate.
pub fn describe_failure(cases: &[FailureCase], lex: &Lexicon) -> Vec<FailureEntry> {
    let words = |r: &Region| describe_region(r, lex).map(|d| d.names).map_err(|e| e.to_string());
    cases
        .iter()
        .map(|c| FailureEntry {
            label: c.label.clone(),
            check: c.check,
            passing: words(&c.passing),
            failing: words(&c.failing),
        })
        .collect()
}
