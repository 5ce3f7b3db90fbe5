//! Command-line front end: CSV in, JSON out.
//!
//! Every subcommand is a pure function of its flags, the input file and the
//! seed; the thread count only changes how fast the answer arrives.

pub mod commands;
pub mod error;
pub mod io;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "mislogit", version, about = "Logistic regression with a misclassified binary outcome")]
pub struct Cli {
    /// Worker threads for fitting, search and bootstrap (default: all cores).
    #[arg(long, global = true, env = "MISLOGIT_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Maximum-likelihood fit over an (α₁, α₂) grid.
    Fit(FitArgs),
    /// Test that a set of coefficients is zero.
    Test(TestArgs),
    /// Decide global identifiability of a design.
    Identify(IdentifyArgs),
    /// Draw surrogate outcomes from a given parameter.
    Simulate(SimulateArgs),
    /// Rejection rates over effect sizes and sample sizes.
    Power(PowerArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Write the result here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Name of the 0/1 outcome column.
    #[arg(long, default_value = "S")]
    pub outcome: String,
    /// `lo:hi:step` for both rates, or `lo:hi:step,lo:hi:step` for α₁ then α₂.
    #[arg(long)]
    pub alpha_grid: Option<String>,
    /// Covariate support, `col=v1,v2,...` or `col=continuous`. Repeatable.
    #[arg(long)]
    pub support: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StatisticArg {
    Auto,
    Score,
    Lrt,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    /// Report the grid optimum without continuous refinement.
    #[arg(long)]
    pub no_polish: bool,
    /// Include the profile log-likelihood at every grid point.
    #[arg(long)]
    pub profile: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated columns whose coefficients are tested.
    #[arg(long)]
    pub eta: String,
    /// Multiplier-bootstrap draws.
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    #[arg(long, value_enum, default_value_t = StatisticArg::Auto)]
    pub statistic: StatisticArg,
    /// Columns declared nonzero in the reduced model; estimated when absent.
    #[arg(long)]
    pub nonzero: Option<String>,
    /// Omit the bootstrap draws from the report.
    #[arg(long)]
    pub no_draws: bool,
}

#[derive(Debug, Clone, Args)]
pub struct IdentifyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Parameter whose zero pattern is checked, as JSON.
    #[arg(long)]
    pub theta: Option<String>,
    /// Comma-separated columns with nonzero coefficients (may be empty).
    #[arg(long)]
    pub nonzero: Option<String>,
    /// Back the verdict with a numeric certificate.
    #[arg(long)]
    pub verify: bool,
    /// Starts for the numeric search.
    #[arg(long, default_value_t = 200)]
    pub starts: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// `{"alpha1":..,"alpha2":..,"beta0":..,"beta":[..]}`
    #[arg(long)]
    pub theta: String,
    /// Rows of standard-normal covariates to draw when there is no input.
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct PowerArgs {
    #[command(flatten)]
    pub common: Common,
    /// Base parameter; the tested coefficients are overwritten by each effect.
    #[arg(long)]
    pub theta: String,
    #[arg(long)]
    pub eta: String,
    /// Comma-separated values assigned to every tested coefficient.
    #[arg(long, default_value = "0,0.5,1")]
    pub effects: String,
    /// Comma-separated sample sizes.
    #[arg(long, default_value = "500,1000")]
    pub sizes: String,
    #[arg(long, default_value_t = 100)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0.05)]
    pub level: f64,
    #[arg(long, default_value_t = 200)]
    pub bootstrap: usize,
    #[arg(long, value_enum, default_value_t = StatisticArg::Auto)]
    pub statistic: StatisticArg,
}

/// What a subcommand produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub body: Vec<u8>,
    pub path: Option<PathBuf>,
}

/// Runs a parsed command, inside a dedicated thread pool when `--threads` is set.
pub fn run(cli: &Cli) -> CliResult<Output> {
    match cli.threads {
        Some(0) => Err(CliError::invalid("--threads must be at least 1")),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| CliError::Numerical(format!("cannot start thread pool: {e}")))?;
            pool.install(|| dispatch(&cli.command))
        }
        None => dispatch(&cli.command),
    }
}

fn dispatch(cmd: &Command) -> CliResult<Output> {
    match cmd {
        Command::Fit(a) => commands::fit(a),
        Command::Test(a) => commands::test(a),
        Command::Identify(a) => commands::identify(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Power(a) => commands::power(a),
    }
}

/// Parses `args`, runs, writes the result and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = run(&cli).and_then(|out| {
        match &out.path {
            Some(p) => std::fs::write(p, &out.body).map_err(|e| CliError::invalid(format!("{}: {e}", p.display())))?,
            None => {
                use std::io::Write;
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(&out.body)?;
                stdout.flush()?;
            }
        }
        Ok(())
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
