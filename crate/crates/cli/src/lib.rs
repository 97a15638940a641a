//! Operator-facing surfaces of the meaning engine: an interactive REPL, a
//! scenario runner, heatmap export and a JSON session API.
//!
//! Every surface goes through [`Engine`], so the same phrases under the same
//! configuration give the same outcomes everywhere.

use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, Context as _, Result};
use meaning_core::lexicon::from_json_with_path;
use meaning_core::scenario::{self, Scenario, ScenarioReport};
use meaning_core::seed::seed_lexicon;
use meaning_core::{ComprehensionConfig, ContextId, EngineConfig, Lexicon, Region, Session};

pub mod api;
pub mod export;
pub mod repl;

/// A loaded lexicon and the configuration new sessions start from.
#[derive(Clone, Debug)]
pub struct Engine {
    pub lexicon: Arc<Lexicon>,
    pub config: EngineConfig,
}

impl Engine {
    pub fn new(lexicon: Lexicon, config: EngineConfig) -> Result<Self> {
        config.validate()?;
        lexicon.validate()?;
        Ok(Engine { lexicon: Arc::new(lexicon), config })
    }

    /// The built-in seed lexicon at the default grid resolution.
    pub fn seed() -> Result<Self> {
        let config = EngineConfig::default();
        Engine::new(seed_lexicon(config.grid_resolution)?, config)
    }

    /// Load from the command-line options. Without a lexicon file the seed
    /// lexicon is built at the requested resolution.
    pub fn load(lexicon: Option<&Path>, comprehension: Option<&Path>, resolution: Option<usize>) -> Result<Self> {
        let mut config = EngineConfig::default();
        if let Some(n) = resolution {
            config.grid_resolution = n;
        }
        if let Some(path) = comprehension {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            config.comprehension = from_json_with_path::<ComprehensionConfig>(&text)
                .with_context(|| format!("comprehension config {}", path.display()))?;
        }
        config.validate()?;
        let lexicon = match lexicon {
            Some(path) => Lexicon::load(path).with_context(|| format!("lexicon {}", path.display()))?,
            None => seed_lexicon(config.grid_resolution)?,
        };
        Engine::new(lexicon, config)
    }

    pub fn session(&self) -> Session {
        Session::new(self.lexicon.clone(), self.config.clone())
    }

    pub fn run_scenario(&self, text: &str) -> Result<ScenarioReport> {
        let scenario = Scenario::parse(text)?;
        Ok(scenario::run(&scenario, self.lexicon.clone(), &self.config)?)
    }
}

/// What a session knows about `name`, and whether it knows anything.
///
/// Names resolve to a session context, then a named lexicon region, then a
/// lexicon context. A lexicon context the session has no region for is
/// read off the active region when that covers its axes.
pub fn view(engine: &Engine, session: &Session, name: &str) -> Result<(Region, bool)> {
    if let Some(c) = session.find_context(name) {
        return Ok((session.state().region_of(c), session.region(&c.id).is_some()));
    }
    if let Some(r) = engine.lexicon.region(name) {
        return Ok((r.clone(), true));
    }
    let context =
        engine.lexicon.context(&ContextId::new(name)).ok_or_else(|| anyhow!("no context or region `{name}`"))?;
    let active = session.active().and_then(|id| session.region(id));
    match active {
        Some(r) if context.axes.iter().all(|a| r.context().contains(a)) => {
            let projected = r.project(&context.axes)?;
            Ok((projected.with_context(context.clone())?, true))
        }
        _ => Ok((Region::empty(context.clone()), false)),
    }
}
