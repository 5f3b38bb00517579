//! `ordinal-embed`: generate data, solve ordinal embedding problems, run
//! identifiability experiments and print the non-uniqueness demos.
//!
//! Exit codes: 0 on success, 2 when a solver reports an infeasible or
//! degenerate result (the result file is still written) or a counterexample
//! fails to hold, 1 on usage, validation or I/O errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ordinal_embed_core::harness::Counterexample;
use ordinal_embed_core::rankings::ComparisonModel;
use ordinal_embed_core::sampling::Design;
use ordinal_embed_core::solvers::Variant;

mod commands;

#[derive(Parser, Debug)]
#[command(
    name = "ordinal-embed",
    version,
    about = "Ordinal embedding solvers and identifiability experiments"
)]
struct Cli {
    /// Root seed for every random stream of the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; standard output when omitted.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Suppress progress and summary messages on standard error.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a configuration from a design, optionally with rank and triple files.
    Generate(GenerateArgs),
    /// Solve one of the embedding problems from rank or triple data.
    Solve(SolveArgs),
    /// Run an identifiability experiment described by a JSON spec.
    Experiment(ExperimentArgs),
    /// Build one of the shipped non-uniqueness constructions.
    Counterexample(CounterexampleArgs),
    /// Fit the gauge-group element that best maps one configuration onto another.
    Align(AlignArgs),
    /// Compute the rank matrix (and optionally triples) of configurations.
    Rank(RankArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// uniform-ball, uniform-cube, uniform-sphere or grid.
    #[arg(long)]
    design: Design,
    /// Ambient dimension.
    #[arg(long)]
    dim: usize,
    /// Number of objects.
    #[arg(long)]
    count: usize,
    /// Number of individuals to sample for point or vector rankings.
    #[arg(long)]
    individuals: Option<usize>,
    /// Model used for `--ranks` and `--triples`.
    #[arg(long)]
    model: Option<ComparisonModel>,
    /// Where to write the sampled individuals.
    #[arg(long)]
    individuals_output: Option<PathBuf>,
    /// Where to write the rank matrix.
    #[arg(long)]
    ranks: Option<PathBuf>,
    /// Where to write the triples.
    #[arg(long)]
    triples: Option<PathBuf>,
    /// Keep a uniform sample of this many triples.
    #[arg(long)]
    sample: Option<usize>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// external-point, external-vector, mds, sphere-mds, internal-point or internal-vector.
    #[arg(long)]
    variant: Variant,
    /// Rank CSV, or triple CSV for `mds` and `sphere-mds`.
    #[arg(long)]
    input: PathBuf,
    /// Embedding dimension.
    #[arg(long)]
    dim: usize,
    /// Known objects (external variants).
    #[arg(long)]
    objects: Option<PathBuf>,
    /// Solver options JSON; missing fields take their defaults.
    #[arg(long)]
    opts: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Experiment spec JSON.
    #[arg(long)]
    spec: PathBuf,
    /// Also write a log-log SVG of recovery error against size.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Derive the root seed from the clock instead of the spec.
    #[arg(long)]
    fresh_seeds: bool,
}

#[derive(Args, Debug)]
struct CounterexampleArgs {
    /// internal-point-ray, internal-vector-coordinatewise or internal-vector-disconnected.
    #[arg(long)]
    which: Counterexample,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
enum Group {
    Similarity,
    Orthogonal,
    VectorGauge,
}

#[derive(Args, Debug)]
struct AlignArgs {
    #[arg(long, value_enum)]
    group: Group,
    /// Configuration to move (objects for `vector-gauge`).
    #[arg(long)]
    source: PathBuf,
    /// Configuration to match (objects for `vector-gauge`).
    #[arg(long)]
    target: PathBuf,
    /// Individuals paired with `--source` (vector-gauge).
    #[arg(long)]
    source_individuals: Option<PathBuf>,
    /// Individuals paired with `--target` (vector-gauge).
    #[arg(long)]
    target_individuals: Option<PathBuf>,
    /// Restrict similarities to rotations.
    #[arg(long)]
    no_reflection: bool,
}

#[derive(Args, Debug)]
struct RankArgs {
    /// point, vector or self.
    #[arg(long)]
    model: ComparisonModel,
    /// Objects, or the items themselves for `self`.
    #[arg(long)]
    objects: PathBuf,
    /// Viewers (point and vector models).
    #[arg(long)]
    viewers: Option<PathBuf>,
    /// Also write triples to this file.
    #[arg(long)]
    triples: Option<PathBuf>,
    /// Keep a uniform sample of this many triples.
    #[arg(long)]
    sample: Option<usize>,
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
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
