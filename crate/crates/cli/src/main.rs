mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "neqresponse", version, about = "Response, path weights and occupation fluctuations of Markov jump processes")]
struct Cli {
    /// Worker threads for sampling commands.
    #[arg(long, global = true, env = "NEQRESPONSE_THREADS")]
    threads: Option<usize>,

    /// Write CSV here instead of standard output.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stationary distribution.
    Stationary(ModelArgs),
    /// Detailed-balance diagnostics of the stationary law.
    CheckDb(CheckDbArgs),
    /// Response kernel R(t, s) on a grid of s.
    ResponseExact(ResponseExactArgs),
    /// Integrated response against the finite-difference oracle.
    ResponseFd(ResponseFdArgs),
    /// Monte Carlo response from path weights.
    ResponseMc(ResponseMcArgs),
    /// Stationary susceptibilities, closed form and finite difference.
    Chi(ChiArgs),
    /// Occupation-measure rate function.
    Dv(DvArgs),
    /// Rate function of perturbed stationary laws against the response term.
    Prop3(Prop3Args),
    /// Magnetization response of the Ising model with exchange.
    Redi(RediArgs),
    /// Emit an Ising model in the JSON model format.
    MakeIsing(IsingArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// JSON model file.
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Debug, Args)]
pub struct CheckDbArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Name of the perturbing potential.
    #[arg(long = "V")]
    pub v: String,
    #[arg(long, allow_negative_numbers = true)]
    pub a: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub b: f64,
}

#[derive(Debug, Args)]
pub struct ResponseExactArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Name of the measured observable.
    #[arg(long = "Q")]
    pub q: String,
    #[arg(long)]
    pub t: f64,
    /// Comma-separated s values inside (0, t).
    #[arg(long, value_delimiter = ',')]
    pub s_points: Option<Vec<f64>>,
    /// Number of equally spaced s values when --s-points is absent.
    #[arg(long, default_value_t = 10)]
    pub n_points: usize,
    /// stationary, uniform, state:LABEL or comma-separated probabilities.
    #[arg(long, default_value = "stationary")]
    pub initial: String,
    /// Add the four terms of the kernel.
    #[arg(long)]
    pub terms: bool,
    /// Add a finite-difference kernel column.
    #[arg(long)]
    pub fd: bool,
    #[arg(long, default_value_t = 1e-5)]
    pub h_scale: f64,
}

#[derive(Debug, Args)]
pub struct ResponseFdArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long = "Q")]
    pub q: String,
    #[arg(long)]
    pub t: f64,
    /// Constant amplitude profile (scaled by --h-scale in the oracle).
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub h: f64,
    #[arg(long, default_value = "stationary")]
    pub initial: String,
    #[arg(long, default_value_t = 1e-5)]
    pub h_scale: f64,
}

#[derive(Debug, Args)]
pub struct ResponseMcArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long = "Q")]
    pub q: String,
    #[arg(long)]
    pub t: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub h: f64,
    #[arg(long, default_value = "stationary")]
    pub initial: String,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ChiArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long = "M")]
    pub m: String,
    #[arg(long, default_value_t = 1e-5)]
    pub h_scale: f64,
}

#[derive(Debug, Args)]
pub struct DvArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// stationary, uniform, state:LABEL or comma-separated probabilities.
    #[arg(long)]
    pub mu: String,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct Prop3Args {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.03,0.01,0.003,0.001")]
    pub h_list: Vec<f64>,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct IsingArgs {
    /// cycle:N, path:N, complete:N or file:PATH.
    #[arg(long)]
    pub graph: String,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: f64,
    #[arg(long = "J", default_value_t = 1.0, allow_negative_numbers = true)]
    pub coupling: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub field: f64,
    /// one or heatbath.
    #[arg(long, default_value = "one")]
    pub psi: String,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
}

#[derive(Debug, Args)]
pub struct RediArgs {
    #[command(flatten)]
    pub ising: IsingArgs,
    #[arg(long, allow_negative_numbers = true)]
    pub a: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub b: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub h: f64,
    #[arg(long)]
    pub t: f64,
    /// Perturb only this spin instead of the magnetization.
    #[arg(long)]
    pub site: Option<usize>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::usage(e.to_string()))?;
    }
    let mut sink = output::Sink::open(cli.output.as_deref())?;
    if !matches!(cli.command, Command::MakeIsing(_)) {
        sink.header(&cli.command)?;
    }
    commands::dispatch(&cli.command, &mut sink)?;
    sink.finish()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.reason());
            ExitCode::from(e.code as u8)
        }
    }
}
