use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use equiflow::cli::{self, Command, ExperimentSpec};

#[derive(Parser)]
#[command(name = "equiflow", version, about = "Equivariant flow experiments and property checks")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed (and the training seed list).
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Omit the `# generated ...` header line from output files.
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a verification suite.
    Verify(RunArgs),
    /// Train models and record loss histories.
    Train(RunArgs),
    /// Step-refinement study of the integrators.
    Converge(RunArgs),
    /// Check that cross sections partition the space.
    Partition(RunArgs),
    /// Pass/fail matrix over run directories.
    Report {
        #[arg(required = true, value_name = "RUN_DIR")]
        runs: Vec<PathBuf>,
        /// Also write report.toml here.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        #[arg(long)]
        no_timestamp: bool,
    },
}

fn main() -> ExitCode {
    let spec = match Cli::parse().command {
        Cmd::Report { runs, out, no_timestamp } => ExperimentSpec {
            command: Command::Report,
            config: None,
            out: out.unwrap_or_default(),
            seed: None,
            timestamp: !no_timestamp,
            run_dirs: runs,
        },
        Cmd::Verify(a) => spec(Command::Verify, a),
        Cmd::Train(a) => spec(Command::Train, a),
        Cmd::Converge(a) => spec(Command::Converge, a),
        Cmd::Partition(a) => spec(Command::Partition, a),
    };
    ExitCode::from(cli::run(&spec).code())
}

fn spec(command: Command, a: RunArgs) -> ExperimentSpec {
    ExperimentSpec {
        command,
        config: Some(a.config),
        out: a.out,
        seed: a.seed,
        timestamp: !a.no_timestamp,
        run_dirs: Vec::new(),
    }
}
