use std::io::{self, IsTerminal};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context as _, Result};
use clap::{Parser, Subcommand};
use meaning_cli::{api, export, repl, Engine};

#[derive(Parser, Debug)]
#[command(name = "meaning", version, about = "Meaning-operator engine over fuzzy regions")]
struct Cli {
    /// Lexicon document; the built-in seed lexicon when absent.
    #[arg(long, global = true, env = "MEANING_LEXICON")]
    lexicon: Option<PathBuf>,
    /// JSON file with comprehension thresholds.
    #[arg(long, global = true)]
    comprehension_config: Option<PathBuf>,
    /// Samples per axis for seed grids, heatmaps and exports.
    #[arg(long, global = true)]
    grid_resolution: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Interactive session on standard input.
    Repl,
    /// Run a scenario file; exit status 0 iff every expectation is met.
    Run { scenario: PathBuf },
    /// Write a region or phrase result as a graymap plus JSON sidecar.
    Export { target: String, path: PathBuf },
    /// Serve the JSON session API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7878")]
        bind: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    let engine = Engine::load(cli.lexicon.as_deref(), cli.comprehension_config.as_deref(), cli.grid_resolution)?;
    match cli.command {
        Command::Repl => {
            let stdin = io::stdin();
            if stdin.is_terminal() {
                eprintln!("type a phrase, or :help");
            }
            repl::run_repl(&engine, stdin.lock(), io::stdout())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { scenario } => {
            let text = std::fs::read_to_string(&scenario).with_context(|| format!("reading {}", scenario.display()))?;
            let report = engine.run_scenario(&text).with_context(|| scenario.display().to_string())?;
            print!("{}", report.render());
            Ok(if report.success() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Export { target, path } => {
            let sidecar = export::export(&engine, &target, &path)?;
            println!("wrote {} and {}", path.display(), sidecar.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve { bind } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(api::serve(engine, &bind))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
