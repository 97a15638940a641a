//! Graymap export of named regions and of phrase results.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context as _, Result};
use meaning_core::{Heatmap, Region};

use crate::Engine;

/// Resolve an export target: a named lexicon region, or else a phrase
/// interpreted in a fresh session whose chosen region is taken.
pub fn target_region(engine: &Engine, target: &str) -> Result<Region> {
    if let Some(r) = engine.lexicon.region(target) {
        return Ok(r.clone());
    }
    let outcome = engine.session().interpret(target);
    match outcome.chosen {
        Some(c) => Ok(c.region.with_label(target)),
        None => Err(anyhow!(
            "`{target}` is neither a region nor an interpretable phrase: {}",
            outcome.clarification.unwrap_or_else(|| outcome.action.name().into())
        )),
    }
}

pub fn heatmap(engine: &Engine, target: &str) -> Result<Heatmap> {
    let region = target_region(engine, target)?;
    let mut h = Heatmap::of(&region, engine.config.grid_resolution)?;
    h.label.get_or_insert_with(|| target.to_string());
    Ok(h)
}

/// Write `path` as a plain graymap and a JSON sidecar next to it. Returns
/// the sidecar path.
pub fn export(engine: &Engine, target: &str, path: &Path) -> Result<PathBuf> {
    let h = heatmap(engine, target)?;
    std::fs::write(path, h.to_pgm()).with_context(|| format!("writing {}", path.display()))?;
    let sidecar = path.with_extension("json");
    let doc = serde_json::to_string_pretty(&h.sidecar())?;
    std::fs::write(&sidecar, doc + "\n").with_context(|| format!("writing {}", sidecar.display()))?;
    Ok(sidecar)
}
