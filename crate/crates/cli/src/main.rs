use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "osd", version, about = "Online service with delay on hierarchically separated trees")]
struct Cli {
    /// Number type for all computations.
    #[arg(long, value_enum, global = true, default_value_t = Numbers::Exact)]
    numbers: Numbers,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Numbers {
    /// Arbitrary-precision rationals.
    Exact,
    /// Double-precision floats.
    Float,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a generated instance in the JSON instance format.
    Generate(GenerateArgs),
    /// Run one algorithm on an instance and print its cost report.
    Run(RunArgs),
    /// Run several algorithms on one instance, optionally against the offline optimum.
    Compare(CompareArgs),
    /// Sample tree embeddings of a metric and report their distortion.
    Embed(EmbedArgs),
    /// Check that an instance file is well formed.
    Validate(ValidateArgs),
    /// Play the adaptive adversary against an algorithm that cannot see deadlines.
    Adversary(AdversaryArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Family {
    /// Heavy leaf with urgent requests, light leaves with growing rates.
    StarRates,
    /// Heavy leaf with urgent requests, light leaves with staggered deadlines.
    StarDeadlines,
    /// Two-level tree with a request at every grandchild.
    Spatial,
    /// Random HST with random requests.
    Random,
    /// Random paging-with-delay instance.
    Pages,
    /// Random shortest-path metric without requests.
    Metric,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(value_enum)]
    pub family: Family,
    /// Number of leaves (star families), pages, or metric points.
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    /// Weight of the heavy leaf.
    #[arg(long = "W", default_value_t = 4)]
    pub w: usize,
    /// Branching of the spatial family, a power of two.
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 6)]
    pub leaves: usize,
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
    #[arg(long, default_value_t = 8)]
    pub requests: usize,
    /// Servers (random) or cache slots (pages).
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value_t = 0.25)]
    pub deadline_probability: f64,
    /// Largest edge weight of the random metric graph.
    #[arg(long, default_value_t = 20)]
    pub max_weight: usize,
    /// Output file; standard output when absent.
    #[arg(short = 'o', long)]
    pub output: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    Ps,
    Kosd,
    /// Ball growing with the distance to the nearest server as threshold.
    Ball,
    /// Ball growing with the leaf edge as threshold.
    BallLeaf,
    /// Paging with delay through the classical reduction.
    Paging,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Clairvoyant,
    Nonclairvoyant,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Marking,
    Lru,
    MarkingRand,
    Belady,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_enum)]
    pub algorithm: Algorithm,
    /// Override the number of servers; extra servers start where the first does.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum, default_value_t = Mode::Clairvoyant)]
    pub mode: Mode,
    /// Stop time; by default the run continues until every request is served.
    #[arg(long)]
    pub horizon: Option<String>,
    /// Seed for the tree embedding of metric instances and for randomized marking.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Eviction policy for `--algorithm paging`.
    #[arg(long, value_enum, default_value_t = PolicyArg::Marking)]
    pub policy: PolicyArg,
    /// Also write the event trace as JSON lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Comma-separated algorithms; `opt` adds the offline optimum.
    #[arg(long, value_delimiter = ',', required = true)]
    pub algorithms: Vec<String>,
    #[arg(long, value_enum, default_value_t = Mode::Clairvoyant)]
    pub mode: Mode,
    #[arg(long)]
    pub horizon: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct EmbedArgs {
    /// Instance file with a metric space.
    #[arg(long)]
    pub metric: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[arg(long)]
    pub instance: PathBuf,
}

#[derive(Args, Debug)]
pub struct AdversaryArgs {
    #[arg(long = "W")]
    pub w: usize,
    #[arg(long, default_value_t = 10)]
    pub phases: usize,
    #[arg(long, value_enum, default_value_t = Algorithm::Ps)]
    pub algorithm: Algorithm,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

/// How a command failed.
#[derive(Debug)]
pub enum Failure {
    /// Bad input data or a failed check: exit 1.
    Invalid(String),
    /// Arguments that do not fit the grammar: exit 2.
    Usage(String),
}

impl From<osd::OsdError> for Failure {
    fn from(e: osd::OsdError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

/// Standard output of a command and whether its checks passed.
pub struct Output {
    pub text: String,
    pub ok: bool,
}

fn dispatch(cli: Cli) -> Result<Output, Failure> {
    match cli.numbers {
        Numbers::Exact => commands::execute::<osd::Rational>(cli.command),
        Numbers::Float => commands::execute::<f64>(cli.command),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            eprint!("{e}");
            eprintln!();
            eprint!("{}", Cli::command().render_long_help());
            return ExitCode::from(2);
        }
    };
    match dispatch(cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.text.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::from(if out.ok { 0 } else { 1 })
        }
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n");
            eprint!("{}", Cli::command().render_long_help());
            ExitCode::from(2)
        }
    }
}
