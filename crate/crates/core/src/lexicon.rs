//! Word → operator lexicon and its JSON document form.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::MeaningOperator;
use crate::region::{expand_axis, Axis, AxisId, AxisKind, Context, ContextId, MembershipGrid, Region};

/// Environment variable naming a lexicon document when no path is given.
pub const LEXICON_ENV: &str = "MEANING_LEXICON";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartOfSpeech {
    QualAdjective,
    CompAdjective,
    Noun,
    Verb,
    AdverbHedge,
    Conjunction,
    Negation,
    QuantifierStub,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sense {
    pub operator: MeaningOperator,
    /// Axes of the operator's private parameter space.
    #[serde(default)]
    pub internal_axes: Vec<AxisId>,
    /// For nouns and verbs: axes of the object or action context the word
    /// creates in the narrative.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub context_axes: Vec<AxisId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<String>,
    /// Abstraction level; 0 is the most concrete.
    #[serde(default)]
    pub level: u32,
}

impl Sense {
    pub fn new(operator: MeaningOperator) -> Self {
        let internal_axes = operator.internal.as_ref().map(|i| i.context.axes.clone()).unwrap_or_default();
        Sense { operator, internal_axes, context_axes: Vec::new(), tags: Vec::new(), level: 0 }
    }

    pub fn with_context_axes(mut self, axes: &[&str]) -> Self {
        self.context_axes = axes.iter().map(|a| AxisId::new(*a)).collect();
        self
    }

    pub fn with_tag(mut self, tag: &str) -> Self {
        self.tags.push(tag.to_string());
        self
    }

    pub fn with_level(mut self, level: u32) -> Self {
        self.level = level;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub word: String,
    pub pos: PartOfSpeech,
    pub senses: Vec<Sense>,
}

/// Fixed inflection table and phrase-level token rewrites.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Morphology {
    /// Surface form → lemma (also used for "except" → "not").
    pub inflections: BTreeMap<String, String>,
    /// Dropped before parsing.
    pub stopwords: BTreeSet<String>,
    /// Space-separated lemma sequence → single lemma.
    pub multiword: BTreeMap<String, String>,
    /// Leading word sequences that announce a fresh start.
    pub reset_prefixes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct NamedRegion {
    name: String,
    region: Region,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    axes: Vec<Axis>,
    contexts: Vec<Context>,
    regions: Vec<NamedRegion>,
    words: Vec<LexiconEntry>,
    #[serde(default)]
    morphology: Morphology,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Lexicon {
    axes: BTreeMap<AxisId, Axis>,
    contexts: BTreeMap<ContextId, Context>,
    regions: BTreeMap<String, Region>,
    words: BTreeMap<String, LexiconEntry>,
    pub morphology: Morphology,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_axis(&mut self, axis: Axis) -> Result<()> {
        axis.validate()?;
        self.axes.insert(axis.id.clone(), axis);
        Ok(())
    }

    pub fn add_context(&mut self, context: Context) -> Result<()> {
        if let Some(a) = context.axes.iter().find(|a| !self.axes.contains_key(a)) {
            return Err(Error::UnknownAxis(a.clone()));
        }
        context.validate()?;
        self.contexts.insert(context.id.clone(), context);
        Ok(())
    }

    pub fn add_region(&mut self, name: impl Into<String>, region: Region) {
        self.regions.insert(name.into(), region);
    }

    pub fn axis(&self, id: &AxisId) -> Option<&Axis> {
        self.axes.get(id)
    }

    pub fn axes(&self) -> impl Iterator<Item = &Axis> {
        self.axes.values()
    }

    pub fn context(&self, id: &ContextId) -> Option<&Context> {
        self.contexts.get(id)
    }

    pub fn contexts(&self) -> impl Iterator<Item = &Context> {
        self.contexts.values()
    }

    pub fn region(&self, name: &str) -> Option<&Region> {
        self.regions.get(name)
    }

    pub fn effector_axes(&self) -> Vec<AxisId> {
        self.axes.values().filter(|a| a.effector).map(|a| a.id.clone()).collect()
    }

    pub fn entry(&self, word: &str) -> Option<&LexiconEntry> {
        self.words.get(word)
    }

    pub fn entries(&self) -> impl Iterator<Item = &LexiconEntry> {
        self.words.values()
    }

    /// All senses of `word`; empty for unknown words.
    pub fn lookup(&self, word: &str) -> &[Sense] {
        self.words.get(word).map(|e| e.senses.as_slice()).unwrap_or(&[])
    }

    /// Add a sense. A sense of the same operator shape over the same
    /// internal axes as an existing one is merged into it (pointwise max of
    /// the parameter regions) instead of becoming a separate reading.
    pub fn add_sense(&mut self, word: &str, pos: PartOfSpeech, sense: Sense) -> Result<()> {
        sense.operator.validate()?;
        let entry = self.words.entry(word.to_string()).or_insert_with(|| LexiconEntry {
            word: word.to_string(),
            pos,
            senses: Vec::new(),
        });
        if entry.pos != pos {
            return Err(Error::InvalidOperator(format!(
                "`{word}` is already a {:?}, cannot add a {:?} sense",
                entry.pos, pos
            )));
        }
        let same_shape = |s: &Sense| {
            s.operator.kind == sense.operator.kind
                && same_set(&s.internal_axes, &sense.internal_axes)
                && s.operator.internal.is_some()
                && sense.operator.internal.is_some()
        };
        if let Some(existing) = entry.senses.iter_mut().find(|s| same_shape(s)) {
            let a = existing.operator.parameters().expect("checked");
            let b = sense.operator.parameters().expect("checked");
            let merged = merge_max(a, b)?;
            existing.operator.internal.as_mut().expect("checked").parameters = merged;
            for t in sense.tags {
                if !existing.tags.contains(&t) {
                    existing.tags.push(t);
                }
            }
            return Ok(());
        }
        entry.senses.push(sense);
        Ok(())
    }

    /// Rewrite `axis` in `region` through its reference region.
    pub fn expand(&self, region: &Region, axis: &AxisId) -> Result<Region> {
        let a = self.axes.get(axis).ok_or_else(|| Error::UnknownAxis(axis.clone()))?;
        if a.kind != AxisKind::Derived {
            return Err(Error::NotDerived(axis.clone()));
        }
        let name = a.reference.as_deref().ok_or_else(|| Error::MissingReference(axis.clone()))?;
        let reference = self.regions.get(name).ok_or_else(|| Error::MissingReference(axis.clone()))?;
        expand_axis(region, a, reference)
    }

    pub fn validate(&self) -> Result<()> {
        let doc = |path: String, e: Error| Error::Document { path, message: e.to_string() };
        for (id, axis) in &self.axes {
            axis.validate().map_err(|e| doc(format!("axes.{id}"), e))?;
            if let Some(r) = &axis.reference {
                if !self.regions.contains_key(r) {
                    return Err(doc(format!("axes.{id}.reference"), Error::MissingReference(id.clone())));
                }
            }
        }
        for id in self.axes.keys() {
            self.check_cycle(id, &mut Vec::new()).map_err(|e| doc(format!("axes.{id}"), e))?;
        }
        for (id, c) in &self.contexts {
            if let Some(a) = c.axes.iter().find(|a| !self.axes.contains_key(a)) {
                return Err(doc(format!("contexts.{id}"), Error::UnknownAxis(a.clone())));
            }
        }
        for (w, entry) in &self.words {
            if entry.senses.is_empty() {
                return Err(doc(format!("words.{w}.senses"), Error::InvalidOperator("no senses".into())));
            }
            for (i, s) in entry.senses.iter().enumerate() {
                s.operator.validate().map_err(|e| doc(format!("words.{w}.senses[{i}]"), e))?;
            }
        }
        Ok(())
    }

    fn check_cycle(&self, id: &AxisId, path: &mut Vec<AxisId>) -> Result<()> {
        if path.contains(id) {
            return Err(Error::ReferenceCycle(id.clone()));
        }
        let Some(reference) = self.axes.get(id).and_then(|a| a.reference.as_ref()) else {
            return Ok(());
        };
        let Some(region) = self.regions.get(reference) else {
            return Ok(());
        };
        path.push(id.clone());
        for a in &region.context().axes {
            self.check_cycle(a, path)?;
        }
        path.pop();
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = Document {
            axes: self.axes.values().cloned().collect(),
            contexts: self.contexts.values().cloned().collect(),
            regions: self
                .regions
                .iter()
                .map(|(name, region)| NamedRegion { name: name.clone(), region: region.clone() })
                .collect(),
            words: self.words.values().cloned().collect(),
            morphology: self.morphology.clone(),
        };
        serde_json::to_string_pretty(&doc).map_err(|e| Error::Document { path: String::new(), message: e.to_string() })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Document = from_json_with_path(text)?;
        let mut lex = Lexicon { morphology: doc.morphology, ..Default::default() };
        for a in doc.axes {
            lex.axes.insert(a.id.clone(), a);
        }
        for c in doc.contexts {
            lex.contexts.insert(c.id.clone(), c);
        }
        for r in doc.regions {
            lex.regions.insert(r.name, r.region);
        }
        for w in doc.words {
            lex.words.insert(w.word.clone(), w);
        }
        lex.validate()?;
        Ok(lex)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)
            .map_err(|e| Error::Document { path: path.display().to_string(), message: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Document { path: path.display().to_string(), message: e.to_string() })?;
        Lexicon::from_json(&text)
    }
}

/// Deserialize, reporting failures with the JSON path of the offending value.
pub fn from_json_with_path<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de)
        .map_err(|e| Error::Document { path: e.path().to_string(), message: e.inner().to_string() })
}

fn same_set(a: &[AxisId], b: &[AxisId]) -> bool {
    a.len() == b.len() && a.iter().all(|x| b.contains(x))
}

fn merge_max(a: &Region, b: &Region) -> Result<Region> {
    let mut axes = a.covered_axes();
    for x in b.covered_axes() {
        if !axes.contains(&x) {
            axes.push(x);
        }
    }
    if a.is_unspecified() || b.is_unspecified() {
        return Ok(Region::empty(a.context().clone()));
    }
    if axes.len() > 2 {
        return Err(Error::NonSeparable { axes });
    }
    let res = a.max_resolution().max(b.max_resolution());
    let grid = MembershipGrid::from_fn(axes.clone(), res, |c| {
        let at = |x: &AxisId| axes.iter().position(|y| y == x).map(|i| c[i]).unwrap_or(0.0);
        a.eval_with(at).max(b.eval_with(at))
    })?;
    Region::from_grid(a.context().clone(), grid)
}
