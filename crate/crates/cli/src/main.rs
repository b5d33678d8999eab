use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use meso_spectra::ensembles::EntryLaw;

mod commands;

use commands::Outcome;

/// Outlier predictions and Monte Carlo checks for low-rank perturbations of
/// random matrices.
///
/// Exit status: 0 on success, 1 when a verification fails, 2 on usage or
/// configuration errors. When `MESO_SEED` is set it takes precedence over
/// `--seed`.
#[derive(Parser, Debug)]
#[command(name = "meso-spectra", version, about, long_about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Predicted outlier locations and projection norms, one row per spike.
    Predict(PredictArgs),
    /// Draw one perturbed matrix and compare its extreme eigenvalues with the predictions.
    Sample(SampleArgs),
    /// Locate outliers with the reduced determinant equation and check them against a dense eigensolve.
    Detect(DetectArgs),
    /// Run the experiment described by a JSON config and check its thresholds.
    Verify(RunArgs),
    /// Run an experiment and tabulate its aggregates per dimension.
    Sweep(SweepArgs),
    /// Check the two-sided transform bounds on random PSD spectra.
    #[command(name = "appendix-b")]
    AppendixB(AppendixBArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum KindArg {
    Wigner,
    Wishart,
    /// Orthogonally invariant additive model with a given spectrum.
    Additive,
    /// Orthogonally invariant multiplicative model with a given PSD spectrum.
    Multiplicative,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum LawArg {
    Gaussian,
    Rademacher,
}

impl From<LawArg> for EntryLaw {
    fn from(l: LawArg) -> Self {
        match l {
            LawArg::Gaussian => EntryLaw::Gaussian,
            LawArg::Rademacher => EntryLaw::Rademacher,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// Spike strengths; repeat the flag or separate with commas.
    #[arg(long = "theta", value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub thetas: Vec<f64>,
    /// Aspect ratio N/p (Wishart only).
    #[arg(long)]
    pub phi: Option<f64>,
    /// Spectrum file, one eigenvalue per line (orthogonally invariant kinds).
    #[arg(long, conflicts_with = "spectrum")]
    pub spectrum_file: Option<PathBuf>,
    /// Built-in spectrum: `semicircle`, `mp:<phi>` or `constant:<value>`.
    #[arg(long)]
    pub spectrum: Option<String>,
    /// Dimension; spectra are resampled by quantiles to this size.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub law: LawArg,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    #[arg(long, conflicts_with = "spectrum")]
    pub spectrum_file: Option<PathBuf>,
    /// Built-in spectrum: `semicircle`, `mp:<phi>` or `constant:<value>`.
    #[arg(long)]
    pub spectrum: Option<String>,
    #[arg(long = "theta", value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub thetas: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Use the multiplicative construction `(I+P)^{1/2} H (I+P)^{1/2}`.
    #[arg(long)]
    pub multiplicative: bool,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// Bisection width; defaults to `1e-9 (1 + |λ₁|)`.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report path stem; overrides `outputs` from the config.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Extra band half-widths at which to report coverage.
    #[arg(long, value_delimiter = ',')]
    pub bands: Vec<f64>,
}

#[derive(Args, Debug)]
pub struct AppendixBArgs {
    #[arg(long, default_value_t = 100)]
    pub spectra: usize,
    #[arg(long, default_value_t = 11)]
    pub xi_points: usize,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let result = match cli.command {
        Command::Predict(a) => commands::predict(&a, &mut out),
        Command::Sample(a) => commands::sample(&a, &mut out),
        Command::Detect(a) => commands::detect(&a, &mut out),
        Command::Verify(a) => commands::verify(&a, &mut out),
        Command::Sweep(a) => commands::sweep(&a, &mut out),
        Command::AppendixB(a) => commands::appendix_b(&a, &mut out),
    };
    let _ = out.flush();
    match result {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail(reasons)) => {
            for r in reasons {
                eprintln!("FAIL: {r}");
            }
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
