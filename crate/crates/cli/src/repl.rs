//! Line-oriented interactive session. Errors are printed and the loop goes
//! on; only end of input or `:quit` stops it.

use std::io::{BufRead, Write};
use std::path::PathBuf;

use anyhow::{anyhow, Result};
use meaning_core::scenario::summarize;
use meaning_core::{Heatmap, InterpretationOutcome, Session};

use crate::Engine;

const HELP: &str = "\
phrases are interpreted in the current session; meta-commands:
  :show <context>   ASCII heatmap of a context region
  :spare            spare contexts kept for retry
  :replay N [S]     reinterpret the last N phrases with S spares (default 2 more)
  :history          phrases so far
  :save [path]      write the session document (default session.json)
  :help             this text
  :quit             leave";

pub fn run_repl(engine: &Engine, input: impl BufRead, mut out: impl Write) -> Result<()> {
    let mut session = engine.session();
    writeln!(out, "meaning REPL, {} words; :help for commands", engine.lexicon.entries().count())?;
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == ":quit" || line == ":q" {
            break;
        }
        match step(engine, &mut session, line) {
            Ok(text) => writeln!(out, "{text}")?,
            Err(e) => writeln!(out, "error: {e:#}")?,
        }
    }
    Ok(())
}

/// Handle one input line and return what to print.
pub fn step(engine: &Engine, session: &mut Session, line: &str) -> Result<String> {
    let Some(meta) = line.strip_prefix(':') else {
        return Ok(render_outcome(&session.interpret(line)));
    };
    let mut words = meta.split_whitespace();
    match (words.next().unwrap_or(""), words.collect::<Vec<_>>().as_slice()) {
        ("help", _) => Ok(HELP.to_string()),
        ("show", [name]) => {
            let (region, known) = crate::view(engine, session, name)?;
            let h = Heatmap::of(&region, engine.config.grid_resolution)?;
            let s = h.stats();
            Ok(format!(
                "{}{} over [{}]  max {:.3} mean {:.3} min {:.3}\n{}",
                h.context,
                if known { "" } else { " (nothing known yet)" },
                h.axes.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", "),
                s.max,
                s.mean,
                s.min,
                h.to_ascii().trim_end_matches('\n')
            ))
        }
        ("show", _) => Err(anyhow!("usage: :show <context>")),
        ("spare", []) => {
            let spare = session.spare();
            if spare.is_empty() {
                return Ok("no spare contexts".into());
            }
            Ok(spare
                .iter()
                .enumerate()
                .map(|(i, s)| format!("{i}: {} from {} (max {:.3})", s.context.id, s.origin, s.region.stats().max))
                .collect::<Vec<_>>()
                .join("\n"))
        }
        ("replay", args) => {
            let parse = |s: &&str| s.parse::<usize>().map_err(|_| anyhow!("`{s}` is not a count"));
            let window = args.first().map(parse).transpose()?.ok_or_else(|| anyhow!("usage: :replay N [spares]"))?;
            let spares = match args.get(1) {
                Some(s) => parse(s)?,
                None => session.config().spare_limit + 2,
            };
            let r = session.reinterpret_window(spares, window);
            let mut text = format!(
                "replay of {window} with {spares} spares: {}",
                if r.applied { "applied" } else { "not applied" }
            );
            for o in &r.outcomes {
                text.push_str(&format!("\n  > {}: {}", o.phrase, summarize(o)));
            }
            Ok(text)
        }
        ("history", []) => Ok(session
            .history()
            .iter()
            .enumerate()
            .map(|(i, h)| format!("{i}: {}{} -> {}", if h.replay { "(replay) " } else { "" }, h.phrase, h.digest))
            .collect::<Vec<_>>()
            .join("\n")),
        ("save", args) if args.len() <= 1 => {
            let path = PathBuf::from(args.first().copied().unwrap_or("session.json"));
            std::fs::write(&path, session.to_json()?)?;
            Ok(format!("saved {}", path.display()))
        }
        (other, _) => Err(anyhow!("unknown command `:{other}`; :help lists them")),
    }
}

pub fn render_outcome(o: &InterpretationOutcome) -> String {
    let mut lines = vec![summarize(o)];
    if let Some(c) = &o.chosen {
        for clause in &c.clauses {
            for (axis, v) in &clause.parameters {
                lines.push(format!("  {} {axis} = {v:.3}", clause.context.id));
            }
        }
    }
    if o.chosen.is_none() && o.candidates.len() > 1 {
        for c in &o.candidates {
            let score = c.score.map_or_else(|| "-".into(), |s| format!("{s:.3}"));
            lines.push(format!("  {} {} score {score} [{}]", c.index, c.structure, c.flags.join(", ")));
        }
    }
    lines.join("\n")
}
