//! `krnn`: build, query, simulate, validate and benchmark kinetic RkNN
//! structures from dataset files.

mod commands;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::CliError;

#[derive(Parser)]
#[command(name = "krnn", version, about = "Reverse k-nearest-neighbor queries on moving points")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Input {
    /// Dataset file (`d s n k` header, then one trajectory per line).
    #[arg(long)]
    input: PathBuf,
    /// Number of neighbors; defaults to the dataset header.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the k-SYG and kNN table at one instant.
    Build {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 0.0)]
        time: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Answer RkNN queries (`t x1 .. xd k` per line).
    Query {
        #[command(flatten)]
        input: Input,
        /// Start time of the kinetic state.
        #[arg(long, default_value_t = 0.0)]
        time: f64,
        #[arg(long)]
        queries: PathBuf,
        /// Answer from one kinetic state per k, advancing through the queries.
        #[arg(long)]
        kinetic: bool,
        /// Cross-check every answer against brute force.
        #[arg(long)]
        validate: bool,
    },
    /// Run the kinetic structure over a time interval.
    Simulate {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        /// Number of evenly spaced brute-force cross-checks.
        #[arg(long)]
        sample: Option<usize>,
        /// Event report output.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the property checks on a dataset or on generated datasets.
    Validate {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        /// Check this many generated datasets instead of an input file.
        #[arg(long)]
        seeds: Option<u64>,
        /// Graph file (as written by `build`) to check instead of a fresh build.
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        time: f64,
        /// Size of generated datasets.
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 1)]
        s: usize,
    },
    /// Time the build, query and event phases.
    Bench {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 1)]
        repeat: usize,
        #[arg(long, default_value_t = 0.0)]
        time: f64,
        /// Also measure per-event cost on generated data for n = 32 .. 1024.
        #[arg(long)]
        sweep: bool,
    },
    /// Write a random dataset with coefficients uniform in [-1, 1].
    Gen {
        n: usize,
        d: usize,
        s: usize,
        seed: u64,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Build { input, time, out } => commands::build(&input.input, input.k, time, &out),
        Command::Query {
            input,
            time,
            queries,
            kinetic,
            validate,
        } => commands::query(&input.input, input.k, time, &queries, kinetic, validate),
        Command::Simulate {
            input,
            from,
            to,
            sample,
            report,
        } => commands::simulate(&input.input, input.k, from, to, sample, report.as_deref()),
        Command::Validate {
            input,
            k,
            seeds,
            graph,
            time,
            n,
            d,
            s,
        } => {
            let source = match (input, seeds) {
                (Some(path), None) => commands::Source::File(path),
                (None, Some(count)) => commands::Source::Generated { count, n, d, s },
                _ => return Err(CliError::Usage("give exactly one of --input and --seeds".into())),
            };
            commands::validate(source, k, time, graph.as_deref())
        }
        Command::Bench {
            input,
            repeat,
            time,
            sweep,
        } => commands::bench(&input.input, input.k, repeat, time, sweep),
        Command::Gen { n, d, s, seed, k, out } => commands::generate(n, d, s, seed, k, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("krnn: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
