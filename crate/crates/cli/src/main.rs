use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gsos_cli::{cmd_check, cmd_entail, cmd_junk, cmd_lts, cmd_ruloids, CliMode, Format, Report, RunConfig, EXIT_ERROR};

/// Check open equations between GSOS contexts.
#[derive(Parser)]
#[command(name = "gsos", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the checks declared in one or more .gsos files.
    Check {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<CliMode>,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        budget_pairs: Option<u64>,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        budget_states: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Also report whether proofs survive disjoint extensions.
        #[arg(long)]
        stability: bool,
    },
    /// List the junk-free ruloids of a named context.
    Ruloids { file: PathBuf, context: String },
    /// List rules that can never fire.
    Junk { file: PathBuf },
    /// Print the transition system reachable from a closed term.
    Lts {
        file: PathBuf,
        term: String,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        budget_states: Option<u64>,
    },
    /// Decide whether one transition formula entails another.
    Entail { file: PathBuf, premise: String, conclusion: String },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR as u8 } else { 0 });
        }
    };
    let report: Report = match cli.command {
        Command::Check { files, mode, budget_pairs, budget_states, format, stability } => {
            let cfg = RunConfig {
                mode,
                budget_pairs: budget_pairs.map(|n| n as usize),
                budget_states: budget_states.map(|n| n as usize),
                format,
                stability,
            };
            cmd_check(&files, &cfg)
        }
        Command::Ruloids { file, context } => cmd_ruloids(&file, &context),
        Command::Junk { file } => cmd_junk(&file),
        Command::Lts { file, term, budget_states } => cmd_lts(&file, &term, budget_states.map(|n| n as usize)),
        Command::Entail { file, premise, conclusion } => cmd_entail(&file, &premise, &conclusion),
    };
    let _ = std::io::stdout().write_all(report.stdout.as_bytes());
    let _ = std::io::stderr().write_all(report.stderr.as_bytes());
    ExitCode::from(report.exit as u8)
}
