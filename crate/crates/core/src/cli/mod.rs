//! Command-line front end. Every setting can come from a flag or from a TOML
//! file given with `--config`; flags win.

mod commands;
mod csv;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::error::{Error, Result};

pub use csv::{format_float, CsvTable};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  internal error
  2  invalid flags, configuration file or argument values
  3  file could not be read or written
  4  malformed dataset file (bad IDX header, size or label byte)
  5  dataset too small for the request, or an all-zero image
  6  point outside the kernel domain, or |f*| > 1 in a model
  7  numerical failure (eigensolver, singular system, degenerate fit,
     failed kernel check)
  8  codebook search exhausted";

#[derive(Debug, Parser)]
#[command(
    name = "kernel-classify",
    version,
    about = "Spectral-algorithm kernel classifiers, smoothness estimation and rate experiments",
    after_help = EXIT_CODES
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Truncation estimate of the relative smoothness s over repeated samples.
    EstimateSmoothness(Invocation),
    /// Mean excess risk against sample size with the regularisation rule for nu.
    RateStudy(Invocation),
    /// Fit one spectral classifier and write its predictions.
    FitPredict(Invocation),
    /// Check symmetry, diagonal, PSD and Cauchy-Schwarz on a random Gram matrix.
    KernelCheck(Invocation),
    /// Draw a sample from a bump-function hard instance.
    HardInstance(Invocation),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::EstimateSmoothness(_) => "estimate-smoothness",
            Command::RateStudy(_) => "rate-study",
            Command::FitPredict(_) => "fit-predict",
            Command::KernelCheck(_) => "kernel-check",
            Command::HardInstance(_) => "hard-instance",
        }
    }

    fn invocation(&self) -> &Invocation {
        match self {
            Command::EstimateSmoothness(i)
            | Command::RateStudy(i)
            | Command::FitPredict(i)
            | Command::KernelCheck(i)
            | Command::HardInstance(i) => i,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Invocation {
    /// TOML file with the same keys as the long flags.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelName {
    Min,
    Ntk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    Cos2pix,
    Constant,
    SphereLinear,
    HardInstance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignName {
    Iid,
    Stratified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskName {
    Classification,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetName {
    Mnist,
    FashionMnist,
    Cifar10,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterName {
    GradientFlow,
    Ridge,
    SpectralCutoff,
    IteratedTikhonov,
}

macro_rules! settings {
    ($( $(#[$meta:meta])* $field:ident : $ty:ty ),* $(,)?) => {
        /// Every tunable; each command reads the subset it understands.
        #[derive(Debug, Clone, Default, Args, Deserialize)]
        #[serde(deny_unknown_fields, rename_all = "kebab-case")]
        pub struct Settings {
            $( $(#[$meta])* #[arg(long)] pub $field: Option<$ty>, )*
        }

        impl Settings {
            /// `over` wins wherever it is set.
            pub fn overlay(self, over: Settings) -> Settings {
                Settings { $( $field: over.$field.or(self.$field), )* }
            }

            fn set_keys(&self) -> Vec<&'static str> {
                let mut keys = Vec::new();
                $( if self.$field.is_some() { keys.push(stringify!($field)); } )*
                keys
            }
        }
    };
}

settings! {
    /// Kernel family.
    #[arg(value_enum)]
    kernel: KernelName,
    /// NTK depth L (number of hidden layers).
    depth: usize,
    /// Synthetic conditional model.
    #[arg(value_enum)]
    model: ModelName,
    /// Value of f* for the constant model.
    #[arg(allow_negative_numbers = true)]
    constant: f64,
    /// Ambient dimension of the sphere (sphere-linear model, kernel-check for ntk).
    dim: usize,
    /// Placement of synthetic design points.
    #[arg(value_enum)]
    design: DesignName,
    /// Label type for synthetic smoothness estimation.
    #[arg(value_enum)]
    task: TaskName,
    /// Noise level for regression data.
    sigma: f64,
    /// Image dataset (mutually exclusive with --model).
    #[arg(value_enum, conflicts_with = "model")]
    dataset: DatasetName,
    /// IDX image file (MNIST, Fashion-MNIST).
    images: PathBuf,
    /// IDX label file (MNIST, Fashion-MNIST).
    labels: PathBuf,
    /// CIFAR-10 binary batch files, comma separated.
    #[arg(value_delimiter = ',')]
    cifar: Vec<PathBuf>,
    /// Class mapped to +1.
    label_pos: u8,
    /// Class mapped to -1.
    label_neg: u8,
    /// Sample size.
    n: usize,
    /// Replicates.
    reps: usize,
    /// Base seed; replicate r uses seed + r.
    seed: u64,
    /// Number of leading coefficients in the log-log fit.
    truncation: usize,
    /// Eigenvalue decay rate.
    beta: f64,
    /// Relative smoothness used by the regularisation rule.
    s: f64,
    /// Spectral filter.
    #[arg(value_enum)]
    filter: FilterName,
    /// Iterations of iterated Tikhonov.
    tikhonov_m: u32,
    /// Regularisation parameter; overrides the rule.
    nu: f64,
    /// Constant in nu = constant * n^(beta / (s beta + 1)).
    nu_constant: f64,
    /// Sample sizes, comma separated.
    #[arg(value_delimiter = ',')]
    n_grid: Vec<usize>,
    /// Equispaced prediction points on [0, 1].
    grid_points: usize,
    /// Random test points (when no grid applies).
    n_test: usize,
    /// Quadrature nodes for risk integrals.
    quadrature_points: usize,
    /// Hard-instance grid resolution (default: from n and theta).
    q: usize,
    /// Hard-instance dimension.
    d: usize,
    /// Hard-instance smoothness product s * r.
    sr: f64,
    /// Hard-instance amplitude constant in (0, 1].
    c_psi: f64,
    /// Constant in n q^(-d - 2 sr) = theta.
    theta: f64,
    /// Index of the codeword used as omega.
    codeword: usize,
    /// Cap on worker threads.
    threads: usize,
    /// CSV destination; standard output when absent.
    out: PathBuf,
}

/// Keys each command accepts.
fn allowed_keys(command: &str) -> &'static [&'static str] {
    match command {
        "estimate-smoothness" => &[
            "kernel", "depth", "model", "constant", "dim", "design", "task", "sigma", "dataset", "images",
            "labels", "cifar", "label_pos", "label_neg", "n", "reps", "seed", "truncation", "beta", "q", "d",
            "sr", "c_psi", "codeword", "threads", "out",
        ],
        "rate-study" => &[
            "kernel", "depth", "model", "constant", "dim", "design", "n_grid", "reps", "seed", "s", "beta",
            "filter", "tikhonov_m", "nu_constant", "quadrature_points", "n_test", "q", "d", "sr", "c_psi",
            "codeword", "threads", "out",
        ],
        "fit-predict" => &[
            "kernel", "depth", "model", "constant", "dim", "design", "n", "seed", "s", "beta", "filter",
            "tikhonov_m", "nu", "nu_constant", "grid_points", "n_test", "quadrature_points", "q", "d", "sr",
            "c_psi", "codeword", "threads", "out",
        ],
        "kernel-check" => &["kernel", "depth", "dim", "n", "seed", "threads", "out"],
        "hard-instance" => &["n", "seed", "q", "d", "sr", "c_psi", "theta", "codeword", "threads", "out"],
        _ => &[],
    }
}

fn load_config(path: &Path) -> Result<Settings> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Merges the configuration file (if any) under the flags and checks that
/// every set key applies to the command.
pub fn resolve(command: &Command) -> Result<Settings> {
    let inv = command.invocation();
    let base = match &inv.config {
        Some(p) => load_config(p)?,
        None => Settings::default(),
    };
    let merged = base.overlay(inv.settings.clone());
    let allowed = allowed_keys(command.name());
    if let Some(bad) = merged.set_keys().into_iter().find(|k| !allowed.contains(k)) {
        return Err(Error::Config(format!(
            "--{} does not apply to {}",
            bad.replace('_', "-"),
            command.name()
        )));
    }
    if merged.model.is_some() && merged.dataset.is_some() {
        return Err(Error::Config("--model and --dataset are mutually exclusive".into()));
    }
    Ok(merged)
}

/// What a command produced: the CSV body and human-readable summary lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub csv: CsvTable,
    pub summary: Vec<String>,
    /// Set when the command ran but its checks did not hold; the CSV is
    /// still written.
    pub failure: Option<String>,
}

/// Runs a parsed command without touching the process state beyond the
/// thread pool.
pub fn execute(command: &Command) -> Result<Output> {
    let settings = resolve(command)?;
    if let Some(t) = settings.threads {
        if t == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        // a pool built earlier in the same process keeps its size
        let _ = crate::par::init_threads(t);
    }
    let out = match command {
        Command::EstimateSmoothness(_) => commands::estimate_smoothness(&settings),
        Command::RateStudy(_) => commands::rate_study(&settings),
        Command::FitPredict(_) => commands::fit_predict(&settings),
        Command::KernelCheck(_) => commands::kernel_check(&settings),
        Command::HardInstance(_) => commands::hard_instance(&settings),
    }?;
    match &settings.out {
        Some(path) => std::fs::write(path, out.csv.render()).map_err(|e| Error::io(path, e))?,
        None => print!("{}", out.csv.render()),
    }
    if let Some(msg) = &out.failure {
        return Err(Error::Numerical(msg.clone()));
    }
    Ok(out)
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli.command) {
        Ok(out) => {
            for line in &out.summary {
                eprintln!("{line}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
