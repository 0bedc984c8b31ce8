use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mbpuf_core::analog::{MirrorConfig, MirrorKind, SwitchingConfig, SwitchingKind, DEFAULT_TEMP_COEFF};
use mbpuf_core::attack::FeatureEncoding;
use mbpuf_core::variation::{ProcessCorner, DEFAULT_SIGMA_VTH};
use mbpuf_core::TransferModel;
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "mbpuf", version, about = "Multi-bit analog PUF simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Synthesize chip instances into a directory.
    Synth(SynthArgs),
    /// Monte Carlo histogram of cell output voltages.
    Mc(McArgs),
    /// Design a quantizer from voltage samples with Lloyd-Max.
    FitQuantizer(FitArgs),
    /// Generate challenge-response pairs.
    Crps(CrpsArgs),
    /// Uniqueness, uniformity, bit aliasing and reliability of a CRP set.
    Metrics(MetricsArgs),
    /// Modeling attack on one chip's CRPs.
    Attack(AttackArgs),
    /// Energy per cycle of the PUF comparison table.
    Energy(EnergyArgs),
    /// Cell transfer curve over a PM1 mismatch sweep.
    Curve(CurveArgs),
    /// Re-run the command recorded in a manifest.
    #[serde(skip)]
    Replay(ReplayArgs),
}

impl Command {
    pub fn out_mut(&mut self) -> Option<&mut PathBuf> {
        match self {
            Command::Synth(a) => Some(&mut a.out),
            Command::Mc(a) => Some(&mut a.out),
            Command::FitQuantizer(a) => Some(&mut a.out),
            Command::Crps(a) => Some(&mut a.out),
            Command::Metrics(a) => Some(&mut a.out),
            Command::Attack(a) => Some(&mut a.out),
            Command::Energy(a) => Some(&mut a.out),
            Command::Curve(a) => Some(&mut a.out),
            Command::Replay(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Corner {
    Tt,
    Ss,
    Ff,
    Sf,
    Fs,
}

impl From<Corner> for ProcessCorner {
    fn from(c: Corner) -> Self {
        match c {
            Corner::Tt => ProcessCorner::TT,
            Corner::Ss => ProcessCorner::SS,
            Corner::Ff => ProcessCorner::FF,
            Corner::Sf => ProcessCorner::SF,
            Corner::Fs => ProcessCorner::FS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mirror {
    WideSwing,
    ReducedHeadroom,
    Simple,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Switching {
    PowerGated,
    Naive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    Raw,
    Rowcol,
    Cell,
}

impl From<Encoding> for FeatureEncoding {
    fn from(e: Encoding) -> Self {
        match e {
            Encoding::Raw => FeatureEncoding::RawBits,
            Encoding::Rowcol => FeatureEncoding::OneHotRowCol,
            Encoding::Cell => FeatureEncoding::OneHotCell,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackModel {
    Lr,
    Es,
}

/// Process variation of synthesized chips.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct VariationArgs {
    /// Base seed; chip i uses seed + i.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub chips: usize,
    #[arg(long, value_enum, default_value_t = Corner::Tt)]
    pub corner: Corner,
    /// Per-transistor threshold mismatch sigma, volts.
    #[arg(long, default_value_t = DEFAULT_SIGMA_VTH)]
    pub sigma_vth: f64,
}

/// Analog transfer model.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value_t = Mirror::WideSwing)]
    pub mirror: Mirror,
    /// Overrides the mirror preset's gain.
    #[arg(long)]
    pub gain: Option<f64>,
    #[arg(long, value_enum, default_value_t = Switching::PowerGated)]
    pub switching: Switching,
    /// Input-referred temperature drift, V/°C.
    #[arg(long, default_value_t = DEFAULT_TEMP_COEFF)]
    pub temp_coeff: f64,
}

impl ModelArgs {
    pub fn build(&self) -> TransferModel {
        let kind = match self.mirror {
            Mirror::WideSwing => MirrorKind::WideSwingCascode,
            Mirror::ReducedHeadroom => MirrorKind::ReducedHeadroomCascode,
            Mirror::Simple => MirrorKind::SimpleCascode,
        };
        let switching = match self.switching {
            Switching::PowerGated => SwitchingKind::PowerGated,
            Switching::Naive => SwitchingKind::Naive,
        };
        let mut model = TransferModel::default()
            .with_mirror(MirrorConfig::preset(kind))
            .with_switching(SwitchingConfig::preset(switching));
        if let Some(g) = self.gain {
            model = model.with_gain(g);
        }
        model.temp_coeff = self.temp_coeff;
        model
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    #[command(flatten)]
    pub variation: VariationArgs,
    /// Output directory for chip-NNN.json files.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct McArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 64)]
    pub bins: usize,
    #[arg(long, value_enum, default_value_t = Corner::Tt)]
    pub corner: Corner,
    #[arg(long, default_value_t = DEFAULT_SIGMA_VTH)]
    pub sigma_vth: f64,
    #[arg(long, default_value_t = 25.0)]
    pub temp: f64,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Also write every sampled voltage (input for fit-quantizer).
    #[arg(long)]
    pub samples_out: Option<PathBuf>,
    /// Histogram CSV (bin_center, count).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct FitArgs {
    /// CSV of voltages; the `voltage` column, or the first one.
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Comma-separated precision per region; defaults to 8,7,6,7,8 for
    /// k = 5 and 8 bits otherwise.
    #[arg(long, value_delimiter = ',')]
    pub bits: Option<Vec<u32>>,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Conditions of one evaluation.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ConditionArgs {
    #[arg(long, default_value_t = 25.0)]
    pub temp: f64,
    /// Output-referred noise sigma, volts.
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub noise_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CrpsArgs {
    #[command(flatten)]
    pub variation: VariationArgs,
    /// Read chips from a synth directory instead of synthesizing them.
    #[arg(long)]
    pub chips_dir: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Quantizer spec JSON; the built-in five-region spec otherwise.
    #[arg(long)]
    pub quantizer: Option<PathBuf>,
    #[command(flatten)]
    pub conditions: ConditionArgs,
    /// Residual offset of the region comparator, volts.
    #[arg(long, default_value_t = 0.0)]
    pub comparator_offset: f64,
    /// `.jsonl` writes JSON lines, anything else CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct MetricsArgs {
    #[arg(long)]
    pub crps: PathBuf,
    /// Chip directory; enables reliability.
    #[arg(long)]
    pub chips_dir: Option<PathBuf>,
    /// Test temperatures for reliability, against 25 °C noiseless.
    #[arg(long, value_delimiter = ',', default_value = "0,30,60")]
    pub temps: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub noise_seed: u64,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub quantizer: Option<PathBuf>,
    /// JSON report.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct AttackArgs {
    #[arg(long)]
    pub crps: PathBuf,
    /// Chip to attack; the first in the file by default.
    #[arg(long)]
    pub chip: Option<String>,
    #[arg(long, default_value_t = 0.8)]
    pub train_frac: f64,
    #[arg(long, value_enum, default_value_t = Encoding::Raw)]
    pub encoding: Encoding,
    #[arg(long, value_enum, default_value_t = AttackModel::Lr)]
    pub model: AttackModel,
    /// Seeds the split and the learner.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,
    #[arg(long, default_value_t = 2000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 20_000)]
    pub generations: usize,
    #[arg(long, default_value_t = 4)]
    pub parents: usize,
    #[arg(long, default_value_t = 16)]
    pub offspring: usize,
    /// Public pipeline assumed by the ES attacker.
    #[command(flatten)]
    pub pipeline: ModelArgs,
    #[arg(long)]
    pub quantizer: Option<PathBuf>,
    /// Per-bit CSV (bit_index, train_acc, test_acc, chance).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EnergyArgs {
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CurveArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = -0.02, allow_hyphen_values = true)]
    pub from: f64,
    #[arg(long, default_value_t = 0.02, allow_hyphen_values = true)]
    pub to: f64,
    #[arg(long, default_value_t = 201)]
    pub points: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Write outputs here instead of the recorded path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
