//! Meaning-operators over fuzzy regions.
//!
//! Knowledge lives in *contexts*: ordered sets of property axes valued in
//! `[0, 1]`. What the engine knows about a context is a fuzzy [`Region`],
//! stored as a weighted product of one- and two-dimensional membership
//! grids. Words are [`MeaningOperator`]s that transform regions; a phrase is
//! a line of (block-)operators applied in sequence.
//!
//! The [`interpreter`] turns controlled-language phrases into candidate
//! phrase operators, scores every candidate with the [`comprehension`]
//! heuristics and keeps runner-ups as spare contexts. The [`describe`]
//! module goes the other way: it searches compositions of known operators
//! that reproduce a given region.

pub mod abstraction;
pub mod comprehension;
pub mod describe;
pub mod error;
pub mod hierarchy;
pub mod interpreter;
pub mod lexicon;
pub mod operator;
pub mod region;
pub mod render;
pub mod scenario;
pub mod seed;

pub use comprehension::{Check, ComprehensionConfig, ComprehensionReport, EffectorOutcome};
pub use error::{Error, Result};
pub use hierarchy::{ContextHierarchy, IndexKind, SpareBuffer, SpareSnapshot};
pub use interpreter::{Action, EngineConfig, InterpretationOutcome, Mood, ParseCandidate, Session};
pub use lexicon::{Lexicon, LexiconEntry, PartOfSpeech, Sense};
pub use operator::{MeaningOperator, OperatorKind, PhraseOperator, PointwiseFn};
pub use region::{Axis, AxisId, AxisKind, Context, ContextId, Factor, MembershipGrid, Point, Region, RegionStats};
pub use render::Heatmap;
