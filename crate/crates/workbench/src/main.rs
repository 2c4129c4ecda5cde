use std::fs;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use workbench::{
    cmd_check, cmd_compile, cmd_degree, cmd_explore, cmd_restrict, cmd_roundtrip, Mode, Outcome,
    RunConfig,
};

/// Workbench for reactive Turing machines and the π-calculus: exploration,
/// compilation, restriction, and branching-bisimilarity checking.
#[derive(Parser)]
#[command(name = "workbench", version, disable_version_flag = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Maximum number of explored states before truncation
    #[arg(long, default_value_t = 20000)]
    max_states: usize,
    /// Maximum BFS depth before truncation
    #[arg(long, default_value_t = 200)]
    max_depth: usize,
    /// Comma-separated data names a π input may receive as free inputs
    #[arg(long, value_delimiter = ',')]
    free_data: Vec<String>,
    /// Equivalence mode
    #[arg(long, default_value = "dpbb", value_parser = Mode::parse)]
    mode: Mode,
    /// Proceed despite truncated (frontier) states
    #[arg(long)]
    allow_frontier: bool,
    /// Write the primary artifact to this path instead of stdout
    #[arg(long)]
    out: Option<String>,
}

impl CommonOpts {
    fn config(&self) -> RunConfig {
        RunConfig {
            max_states: self.max_states,
            max_depth: self.max_depth,
            free_data: self.free_data.clone(),
            mode: self.mode,
            allow_frontier: self.allow_frontier,
            out: self.out.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Explore an .rtm or .pi file into an .aut transition system
    Explore {
        input: String,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Compile an .rtm file to a π-calculus term
    Compile {
        input: String,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Check two .aut files for (divergence-preserving) branching bisimilarity
    Check {
        left: String,
        right: String,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Restrict an .aut file to a finite set of input data names
    Restrict {
        input: String,
        /// Allowed input data names (comma-separated)
        #[arg(long, value_delimiter = ',')]
        names: Vec<String>,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Branching-degree report for an .aut file
    Degree { input: String },
    /// Explore a machine, compile it, explore the compiled term, and check
    /// the two systems for equivalence
    Roundtrip {
        input: String,
        #[command(flatten)]
        opts: CommonOpts,
    },
}

fn finish(result: Result<Outcome, String>) -> ExitCode {
    match result {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            if let Some((path, contents)) = outcome.file {
                if let Err(e) = fs::write(&path, contents) {
                    eprintln!("error: cannot write {path}: {e}");
                    return ExitCode::from(2);
                }
            }
            ExitCode::from(u8::try_from(outcome.exit_code).unwrap_or(2))
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Explore { input, opts } => finish(cmd_explore(&input, &opts.config())),
        Command::Compile { input, opts } => finish(cmd_compile(&input, &opts.config())),
        Command::Check { left, right, opts } => finish(cmd_check(&left, &right, &opts.config())),
        Command::Restrict { input, names, opts } => {
            finish(cmd_restrict(&input, &names, &opts.config()))
        }
        Command::Degree { input } => finish(cmd_degree(&input)),
        Command::Roundtrip { input, opts } => finish(cmd_roundtrip(&input, &opts.config())),
    }
}
