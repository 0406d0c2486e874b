use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "ghostlab", version, about = "Ghost-imaging Bell test simulator and analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML configuration; the built-in reference configuration when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides `[run] seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores); results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
}

impl Common {
    pub fn workers(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ArmArg {
    Signal,
    Idler,
    Joint,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SignArg {
    Positive,
    Negative,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the gated sequence and write one frame pair per setting.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Output directory; overrides `[run] out`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, num_args = 2, value_names = ["NX", "NY"])]
        bins: Option<Vec<usize>>,
        /// Replaces the configured settings; repeat for several. THETA_S may be INF.
        #[arg(long, num_args = 2, value_names = ["THETA_S", "THETA_I"], action = ArgAction::Append, allow_negative_numbers = true)]
        setting: Vec<String>,
        /// Overrides `[run] n_trials`.
        #[arg(long)]
        trials: Option<u64>,
        /// Compress frame files and event logs.
        #[arg(long)]
        gzip: bool,
        /// Write event logs even if the config disables them.
        #[arg(long, conflicts_with = "no_events")]
        events: bool,
        /// Skip the event logs.
        #[arg(long)]
        no_events: bool,
    },
    /// Bell parameters from a simulated or measured frame directory.
    Bell {
        /// Source geometry and default phases.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory with frame_NN_plus/minus files.
        #[arg(long)]
        frames: PathBuf,
        /// Report directory; defaults to the frame directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        phase_signal: Option<PathBuf>,
        #[arg(long)]
        phase_idler: Option<PathBuf>,
        /// 1-based position, among the analyzer settings, of the image used for the single-image S.
        #[arg(long, default_value_t = 1)]
        freedman_setting: usize,
        #[arg(long, default_value_t = 36)]
        phase_bins: usize,
    },
    /// Classical fringe stack for phase retrieval.
    Stack {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = ArmArg::Signal)]
        arm: ArmArg,
        /// Number of global-phase steps over 2π.
        #[arg(long, default_value_t = 8)]
        steps: usize,
        #[arg(long, default_value_t = 0.8)]
        visibility: f64,
        /// Mean counts per pixel and frame (both channels).
        #[arg(long, default_value_t = 1000.0)]
        counts: f64,
        #[arg(long, num_args = 2, value_names = ["NX", "NY"])]
        bins: Option<Vec<usize>>,
        /// Write expected counts instead of Poisson draws.
        #[arg(long)]
        no_poisson: bool,
        #[arg(long)]
        gzip: bool,
    },
    /// Fourier-transform phase retrieval from a fringe stack.
    RetrievePhase {
        #[arg(long)]
        stack: PathBuf,
        /// PHASE v1 output file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = SignArg::Positive)]
        sign: SignArg,
        /// Window half-width in frequency bins; half the carrier distance when omitted.
        #[arg(long)]
        window: Option<f64>,
        /// Subtract the carrier ramp.
        #[arg(long)]
        remove_carrier: bool,
    },
    /// Multiplicative visibility budget.
    Budget {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Coincidence-rate report.
    Rates {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Unconditional-readout run and g² estimate (marginal setting unless given).
    G2 {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10_000_000)]
        trials: u64,
        #[arg(long, num_args = 2, value_names = ["THETA_S", "THETA_I"], allow_negative_numbers = true)]
        setting: Option<Vec<String>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Camera-camera κ diagnostic.
    Kappa {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 4_000_000)]
        trials: u64,
        #[arg(long, default_value_t = 61)]
        hist_bins: usize,
        /// Histogram range ±R (mm⁻¹).
        #[arg(long, default_value_t = 30.0)]
        range: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}
