use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "ota-anomaly", version, about = "Over-the-air SVM anomaly detection experiments")]
pub struct Cli {
    /// Worker threads for Monte Carlo runs (default: all cores). Results do
    /// not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, env = "OTA_ANOMALY_OUT_DIR", default_value = "out")]
    pub out_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a training set, train the classifier and write the model.
    Train {
        #[command(flatten)]
        common: Common,
        /// Where to write the model (default: <out-dir>/model.json).
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Reliability versus channel uses and SNR.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunOpts,
        #[arg(long, value_enum, default_value_t = SchemeArg::Ei)]
        scheme: SchemeArg,
        /// Block lengths M for the over-the-air scheme.
        #[arg(long, value_delimiter = ',')]
        m_grid: Option<Vec<usize>>,
        /// Slots per node Q for TDMA (default: the M grid).
        #[arg(long, value_delimiter = ',')]
        q_grid: Option<Vec<usize>>,
        /// SNR values in dB.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        snr_db: Option<Vec<f64>>,
    },
    /// Reliability over a lattice of the two-sensor state space.
    Map {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunOpts,
        #[arg(long, value_enum, default_value_t = SchemeArg::Ei)]
        scheme: SchemeArg,
        /// Channel uses (M, or Q for TDMA; default: the config's block length).
        #[arg(long)]
        uses: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        snr_db: Option<f64>,
        /// Lattice points per axis.
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Energy per classification versus reliability for both schemes.
    Energy {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunOpts,
        #[arg(long, value_delimiter = ',')]
        m_grid: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        q_grid: Option<Vec<usize>>,
        #[arg(long, allow_hyphen_values = true)]
        snr_db: Option<f64>,
    },
    /// Compare the effective-noise moments with their closed form.
    ValidateMoments {
        #[command(flatten)]
        common: Common,
        /// Block length M (default: the config's block length).
        #[arg(long)]
        block_len: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        snr_db: Option<f64>,
        #[arg(long)]
        frames: Option<usize>,
        /// States cycled through by the frames (default: the config's test
        /// sample count).
        #[arg(long)]
        states: Option<usize>,
    },
    /// Write labeled states drawn from the scenario.
    ExportSamples {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1000)]
        count: usize,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// Config file, or the name of a bundled config (`sec5a`, `sec5b`).
    #[arg(long)]
    pub config: String,
    /// Override the config's master seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RunOpts {
    /// Trained model; trained from the config when omitted.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Trials per test state.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Number of test states drawn from the scenario.
    #[arg(long)]
    pub test_samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Ei,
    Tdma,
    Both,
}
