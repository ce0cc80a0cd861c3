use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use multitime_qsim::corpus;
use multitime_qsim::dsl::{parse_with, render};
use multitime_qsim::report::{run, Engine};
use multitime_qsim::{Error, Tolerance};

#[derive(Parser)]
#[command(name = "multitime-qsim", version, about = "Multiple-time quantum state simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment file and print its outcome table.
    Run {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = EngineArg::Both)]
        engine: EngineArg,
        /// Probability tolerance used for the PASS/FAIL verdict.
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
    /// Random experiment documents.
    Corpus {
        #[command(subcommand)]
        action: CorpusAction,
    },
}

#[derive(Subcommand)]
enum CorpusAction {
    Generate {
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 4)]
        max_dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write one file per document here instead of printing them.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Multitime,
    Oracle,
    Both,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Multitime => Engine::Multitime,
            EngineArg::Oracle => Engine::Oracle,
            EngineArg::Both => Engine::Both,
        }
    }
}

fn run_file(file: &PathBuf, engine: Engine, tolerance: f64) -> ExitCode {
    let tol = match Tolerance::new(Tolerance::default().eq_tol, tolerance) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let text = match std::fs::read_to_string(file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", file.display());
            return ExitCode::from(1);
        }
    };
    let doc = parse_with(&text, tol);
    let script = match doc.script(tol) {
        Ok(s) => s,
        Err(diagnostics) => {
            for d in diagnostics {
                eprintln!("{d}");
            }
            return ExitCode::from(1);
        }
    };
    match run(&script, engine, tol) {
        Ok(report) => {
            print!("{}", report.render());
            if report.passed() == Some(false) {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(Error::ImpossiblePostselection { .. }) => {
            eprintln!("impossible post-selection");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn generate(count: usize, max_dim: usize, seed: u64, out: Option<PathBuf>) -> ExitCode {
    if !(2..=4).contains(&max_dim) {
        eprintln!("error: --max-dim must be between 2 and 4");
        return ExitCode::from(1);
    }
    let docs = corpus::generate(seed, count, max_dim);
    match out {
        Some(dir) => {
            if let Err(e) = std::fs::create_dir_all(&dir) {
                eprintln!("error: cannot create {}: {e}", dir.display());
                return ExitCode::from(1);
            }
            for (i, doc) in docs.iter().enumerate() {
                let path = dir.join(format!("experiment_{i:04}.mtq"));
                if let Err(e) = std::fs::write(&path, render(doc)) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return ExitCode::from(1);
                }
            }
        }
        None => {
            for (i, doc) in docs.iter().enumerate() {
                println!("# document {i}");
                print!("{}", render(doc));
            }
        }
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            file,
            engine,
            tolerance,
        } => run_file(&file, engine.into(), tolerance),
        Command::Corpus {
            action:
                CorpusAction::Generate {
                    count,
                    max_dim,
                    seed,
                    out,
                },
        } => generate(count, max_dim, seed, out),
    }
}
