//! Comprehensibility heuristics for candidate interpretations.
//!
//! Every check maps to a score in `[0, 1]`; a check is flagged when its
//! score drops below one and the aggregate is the product of all scores.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interpreter::Mood;
use crate::region::{quantize, AxisId, Region};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Contradiction,
    Vacuous,
    NoChange,
    VaguenessIncrease,
    MoodMismatch,
    NeedsClarification,
}

impl Check {
    pub const ALL: [Check; 6] = [
        Check::Contradiction,
        Check::Vacuous,
        Check::NoChange,
        Check::VaguenessIncrease,
        Check::MoodMismatch,
        Check::NeedsClarification,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Contradiction => "contradiction",
            Check::Vacuous => "vacuous",
            Check::NoChange => "no_change",
            Check::VaguenessIncrease => "vagueness_increase",
            Check::MoodMismatch => "mood_mismatch",
            Check::NeedsClarification => "needs_clarification",
        }
    }

    pub fn parse(s: &str) -> Option<Check> {
        Check::ALL.into_iter().find(|c| c.name() == s)
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Thresholds for every check. Only the contradiction level comes from the
/// model itself; the rest are engine choices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComprehensionConfig {
    pub contradiction_level: f64,
    /// Membership level at which coverage is measured.
    pub vacuity_level: f64,
    /// Coverage fraction above which a region says almost nothing.
    pub vacuity_limit: f64,
    pub no_change_distance: f64,
    pub vagueness_ratio: f64,
    /// Below this prior mean the vagueness ratio is not tested.
    pub vagueness_floor: f64,
    pub effector_level: f64,
    pub effector_width: f64,
    pub mood_penalty: f64,
    /// Aggregate score an interpretation must reach.
    pub threshold: f64,
}

impl Default for ComprehensionConfig {
    fn default() -> Self {
        ComprehensionConfig {
            contradiction_level: 0.95,
            vacuity_level: 0.5,
            vacuity_limit: 0.95,
            no_change_distance: 0.01,
            vagueness_ratio: 1.5,
            vagueness_floor: 0.05,
            effector_level: 0.8,
            effector_width: 0.25,
            mood_penalty: 0.5,
            threshold: 0.5,
        }
    }
}

impl ComprehensionConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = [
            ("contradiction_level", self.contradiction_level),
            ("vacuity_level", self.vacuity_level),
            ("vacuity_limit", self.vacuity_limit),
            ("effector_level", self.effector_level),
            ("effector_width", self.effector_width),
            ("mood_penalty", self.mood_penalty),
            ("threshold", self.threshold),
            ("vagueness_floor", self.vagueness_floor),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if !(self.contradiction_level > 0.0 && self.vacuity_limit < 1.0) {
            return Err(Error::Config("contradiction_level must be > 0 and vacuity_limit < 1".into()));
        }
        if !(self.no_change_distance >= 0.0 && self.vagueness_ratio >= 1.0) {
            return Err(Error::Config("no_change_distance >= 0 and vagueness_ratio >= 1 required".into()));
        }
        Ok(())
    }

    /// Set one field by name, as used by `config key value` lines.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        let slot = match key {
            "contradiction_level" => &mut self.contradiction_level,
            "vacuity_level" => &mut self.vacuity_level,
            "vacuity_limit" => &mut self.vacuity_limit,
            "no_change_distance" => &mut self.no_change_distance,
            "vagueness_ratio" => &mut self.vagueness_ratio,
            "vagueness_floor" => &mut self.vagueness_floor,
            "effector_level" => &mut self.effector_level,
            "effector_width" => &mut self.effector_width,
            "mood_penalty" => &mut self.mood_penalty,
            "threshold" => &mut self.threshold,
            other => return Err(Error::Config(format!("unknown comprehension setting `{other}`"))),
        };
        let old = *slot;
        *slot = value;
        if let Err(e) = self.validate() {
            self.set(key, old).ok();
            return Err(e);
        }
        Ok(())
    }
}

pub fn check_contradiction(result: &Region, cfg: &ComprehensionConfig) -> f64 {
    let max = result.stats().max;
    // Samples are stored quantized; compare against the quantized level.
    if max >= quantize(cfg.contradiction_level) {
        1.0
    } else {
        max / cfg.contradiction_level
    }
}

pub fn check_vacuity(result: &Region, cfg: &ComprehensionConfig) -> f64 {
    let v = result.stats().coverage_fraction(cfg.vacuity_level);
    if v <= cfg.vacuity_limit {
        1.0
    } else {
        ((1.0 - v) / (1.0 - cfg.vacuity_limit)).clamp(0.0, 1.0)
    }
}

pub fn check_no_change(before: &Region, after: &Region, cfg: &ComprehensionConfig) -> Result<f64> {
    let d = before.distance(after)?;
    Ok(if d < cfg.no_change_distance { 0.0 } else { 1.0 })
}

pub fn check_vagueness(before: &Region, after: &Region, reset_phrase: bool, cfg: &ComprehensionConfig) -> f64 {
    if reset_phrase {
        return 1.0;
    }
    let b = before.stats().mean;
    if b < cfg.vagueness_floor {
        return 1.0;
    }
    let a = after.stats().mean;
    if a <= cfg.vagueness_ratio * b {
        1.0
    } else {
        b / a
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum EffectorOutcome {
    /// One small connected run: apply its centroid.
    Command {
        axis: AxisId,
        value: f64,
    },
    /// Several disjoint runs: ask which one is meant.
    Clarify {
        axis: AxisId,
        runs: Vec<(f64, f64)>,
    },
    None,
}

impl EffectorOutcome {
    pub fn command(&self) -> Option<(AxisId, f64)> {
        match self {
            EffectorOutcome::Command { axis, value } => Some((axis.clone(), *value)),
            _ => None,
        }
    }
}

/// Runs of consecutive samples at or above `level`, as index ranges.
fn runs(values: &[f64], level: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, v) in values.iter().enumerate() {
        match (start, *v >= level) {
            (None, true) => start = Some(i),
            (Some(s), false) => {
                out.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, values.len() - 1));
    }
    out
}

/// Look for an actionable shape on the first effector axis that carries a
/// factor: the level set `{m ≥ level}` of that factor (sup-marginal for 2D
/// factors) split into runs of consecutive samples.
pub fn extract_effector(result: &Region, effector_axes: &[AxisId], cfg: &ComprehensionConfig) -> EffectorOutcome {
    for axis in effector_axes {
        let Some((_, factor)) = result.factor_for(axis) else {
            continue;
        };
        let Some(values) = factor.grid.marginal_sup(axis) else {
            continue;
        };
        let n = values.len();
        let x = |i: usize| i as f64 / (n - 1) as f64;
        let found = runs(&values, cfg.effector_level);
        match found.as_slice() {
            [] => return EffectorOutcome::None,
            [(a, b)] => {
                let width = (b - a + 1) as f64 / n as f64;
                if width > cfg.effector_width {
                    return EffectorOutcome::None;
                }
                let (num, den) = (*a..=*b).fold((0.0, 0.0), |(s, w), i| (s + x(i) * values[i], w + values[i]));
                return EffectorOutcome::Command { axis: axis.clone(), value: num / den };
            }
            many => {
                return EffectorOutcome::Clarify {
                    axis: axis.clone(),
                    runs: many.iter().map(|(a, b)| (x(*a), x(*b))).collect(),
                }
            }
        }
    }
    EffectorOutcome::None
}

pub fn check_mood(mood: Mood, effector_bound: bool, effector: &EffectorOutcome, cfg: &ComprehensionConfig) -> f64 {
    match (mood, effector_bound, effector) {
        (Mood::Imperative, true, EffectorOutcome::None) => cfg.mood_penalty,
        _ => 1.0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComprehensionReport {
    pub flags: BTreeSet<Check>,
    pub scores: BTreeMap<Check, f64>,
    pub aggregate: f64,
    pub effector: EffectorOutcome,
}

impl ComprehensionReport {
    pub fn from_scores(scores: BTreeMap<Check, f64>, effector: EffectorOutcome) -> Self {
        let flags = scores.iter().filter(|(_, s)| **s < 1.0).map(|(c, _)| *c).collect();
        let aggregate = scores.values().product();
        ComprehensionReport { flags, scores, aggregate, effector }
    }

    pub fn effector_command(&self) -> Option<(AxisId, f64)> {
        self.effector.command()
    }

    pub fn passes(&self, cfg: &ComprehensionConfig) -> bool {
        self.aggregate >= cfg.threshold
    }

    /// Combine reports of several clauses: per-check minimum.
    pub fn merge(reports: &[ComprehensionReport]) -> ComprehensionReport {
        let mut scores: BTreeMap<Check, f64> = BTreeMap::new();
        let mut effector = EffectorOutcome::None;
        for r in reports {
            for (c, s) in &r.scores {
                let e = scores.entry(*c).or_insert(1.0);
                *e = e.min(*s);
            }
            if effector == EffectorOutcome::None {
                effector = r.effector.clone();
            }
        }
        ComprehensionReport::from_scores(scores, effector)
    }

    pub fn flag_names(&self) -> Vec<&'static str> {
        self.flags.iter().map(|c| c.name()).collect()
    }
}

/// Everything the checks look at for one applied clause.
pub struct Assessment<'a> {
    /// Source region followed by the region after each line element.
    pub stages: &'a [Region],
    pub mood: Mood,
    pub reset_phrase: bool,
    pub effector_axes: &'a [AxisId],
}

pub fn assess(input: &Assessment<'_>, cfg: &ComprehensionConfig) -> Result<ComprehensionReport> {
    let source = input.stages.first().ok_or_else(|| Error::InvalidRegion("no stages to assess".into()))?;
    let result = input.stages.last().expect("non-empty");
    let mut scores = BTreeMap::new();
    scores.insert(Check::Contradiction, check_contradiction(result, cfg));
    scores.insert(Check::Vacuous, check_vacuity(result, cfg));
    // Every line element after the first has to change something, and so
    // does the phrase as a whole.
    let mut no_change = check_no_change(source, result, cfg)?;
    for pair in input.stages.windows(2).skip(1) {
        no_change = no_change.min(check_no_change(&pair[0], &pair[1], cfg)?);
    }
    scores.insert(Check::NoChange, no_change);
    scores.insert(Check::VaguenessIncrease, check_vagueness(source, result, input.reset_phrase, cfg));
    let bound: Vec<AxisId> = input.effector_axes.iter().filter(|a| result.context().contains(a)).cloned().collect();
    let effector = match input.mood {
        Mood::Imperative => extract_effector(result, &bound, cfg),
        _ => EffectorOutcome::None,
    };
    scores.insert(Check::MoodMismatch, check_mood(input.mood, !bound.is_empty(), &effector, cfg));
    let clarify = matches!(effector, EffectorOutcome::Clarify { .. });
    scores.insert(Check::NeedsClarification, if clarify { 0.0 } else { 1.0 });
    Ok(ComprehensionReport::from_scores(scores, effector))
}
