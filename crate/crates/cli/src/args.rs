use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use fracsvt::{LambdaMode, Regime, SolverConfig};

#[derive(Parser, Debug)]
#[command(
    name = "fracsvt",
    version,
    about = "Low-rank matrix recovery with fraction-penalty singular value thresholding"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate the scalar prox of the fraction penalty.
    Prox(ProxArgs),
    /// Complete a partially observed matrix.
    Complete(CompleteArgs),
    /// Inpaint a randomly subsampled, noisy grayscale image.
    Inpaint(InpaintArgs),
    /// Run a table of experiments and write a CSV report.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
pub struct ProxArgs {
    #[arg(long)]
    pub a: f64,
    #[arg(long)]
    pub lam: f64,
    /// Input value; omit to print only the threshold.
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, default_value = "general", value_parser = parse_regime)]
    pub regime: Regime,
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    #[arg(long, default_value = "aisvta", value_parser = parse_mode)]
    pub solver: LambdaMode,
    /// Target rank r.
    #[arg(long)]
    pub rank: usize,
    #[arg(long, default_value_t = SolverConfig::default().mu)]
    pub mu: f64,
    #[arg(long, default_value_t = SolverConfig::default().tau)]
    pub tau: f64,
    #[arg(long, default_value_t = SolverConfig::default().a)]
    pub a: f64,
    /// Regularization weight of the fixed solver.
    #[arg(long, default_value_t = SolverConfig::default().lam)]
    pub lam: f64,
    #[arg(long, default_value_t = SolverConfig::default().xi)]
    pub xi: f64,
    #[arg(long, default_value_t = SolverConfig::default().max_iter)]
    pub max_iter: usize,
    #[arg(long, default_value_t = SolverConfig::default().tol)]
    pub tol: f64,
}

impl SolverArgs {
    pub fn config(&self) -> SolverConfig {
        SolverConfig {
            mode: self.solver,
            mu: self.mu,
            tau: self.tau,
            xi: self.xi,
            a: self.a,
            lam: self.lam,
            target_rank: self.rank,
            tol: self.tol,
            max_iter: self.max_iter,
            alpha: 0.0,
        }
    }
}

#[derive(Args, Debug)]
pub struct CompleteArgs {
    /// Mask file: header `m n s`, then one `i j` pair per line.
    #[arg(long)]
    pub mask: PathBuf,
    /// Observed values, one per line in mask order.
    #[arg(long, conflicts_with = "image", required_unless_present = "image")]
    pub obs: Option<PathBuf>,
    /// Take the observations from this PGM at the mask entries.
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Ground truth (matrix text file or PGM); prints the relative error.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Only recorded in the config line; completion draws no random numbers.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Recovered matrix (text, or PGM when the name ends in .pgm).
    #[arg(long, default_value = "recovered.txt")]
    pub out: PathBuf,
    /// Per-iteration trace CSV; defaults to `<out>.trace.csv`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InpaintArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Sampling ratio.
    #[arg(long, default_value_t = 0.5)]
    pub sr: f64,
    /// Noise level xi1 of the observations.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Replace the image by its best rank-r approximation first.
    #[arg(long)]
    pub low_rank: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value = "inpainted.pgm")]
    pub out: PathBuf,
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// TOML file with `[[experiment]]` entries.
    #[arg(long)]
    pub spec: PathBuf,
    /// Override the seed of every experiment.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the repetition count of every experiment.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write `na` for wall times so reports are reproducible byte for byte.
    #[arg(long)]
    pub no_timing: bool,
    /// Run repetitions one after another.
    #[arg(long)]
    pub sequential: bool,
}

fn parse_mode(s: &str) -> Result<LambdaMode, String> {
    s.parse().map_err(|e: fracsvt::Error| e.to_string())
}

fn parse_regime(s: &str) -> Result<Regime, String> {
    s.parse().map_err(|e: fracsvt::Error| e.to_string())
}
