//! Shared inputs for the engine benchmarks.

use std::sync::Arc;

use meaning_core::seed::seed_lexicon;
use meaning_core::{EngineConfig, Lexicon, Session};

/// Phrases exercising every clause shape of the controlled grammar.
pub const DIALOG: [&str; 8] = [
    "walk very fast",
    "faster",
    "car is fast but heavy",
    "go ne",
    "except sw",
    "slow or fast",
    "drive slowly",
    "if I was driving very slowly",
];

pub fn lexicon(resolution: usize) -> Arc<Lexicon> {
    Arc::new(seed_lexicon(resolution).expect("seed lexicon builds"))
}

pub fn session(lexicon: &Arc<Lexicon>, resolution: usize) -> Session {
    Session::new(lexicon.clone(), EngineConfig { grid_resolution: resolution, ..Default::default() })
}
