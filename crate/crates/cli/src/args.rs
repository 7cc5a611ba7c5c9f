use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
#[command(name = "rssi-doa", version, about = "Signal-strength bearing estimation with missed-detection modelling")]
pub struct Cli {
    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads (0 = all cores). Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,

    /// Measurement noise standard deviation (dB).
    #[arg(long, global = true, default_value_t = 2.0)]
    pub sigma: f64,

    /// Detection threshold (dBm).
    #[arg(long, global = true, default_value_t = -95.0, allow_hyphen_values = true)]
    pub gamma: f64,

    /// Detection efficiency applied to every sensor.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub pc: f64,

    /// Repeat the run recorded in a manifest.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub manifest: Option<PathBuf>,

    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    #[serde(skip)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Monte Carlo sweeps over source power, detection efficiency or batch size.
    Simulate(SimulateArgs),
    /// Fit Fourier gain patterns to calibration data.
    FitPattern(FitPatternArgs),
    /// Grid-search estimates for each epoch of an observation file.
    Estimate(EstimateArgs),
    /// Particle-filter tracking of an RSSI log.
    Track(TrackArgs),
    /// Tracked error against ground truth as the threshold is raised.
    SweepThreshold(SweepThresholdArgs),
    /// Write a synthetic walk: RSSI log, ground truth and patterns.
    SynthWalk(SynthWalkArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::FitPattern(_) => "fit-pattern",
            Command::Estimate(_) => "estimate",
            Command::Track(_) => "track",
            Command::SweepThreshold(_) => "sweep-threshold",
            Command::SynthWalk(_) => "synth-walk",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepArg {
    Alpha,
    Pc,
    Batch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Proposed,
    Baseline,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReductionArg {
    Profile,
    Marginal,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GridArgs {
    /// Bearing grid spacing (deg); must divide 360.
    #[arg(long, default_value_t = 1.0)]
    pub psi_step: f64,
    #[arg(long, default_value_t = -100.0, allow_hyphen_values = true)]
    pub alpha_min: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub alpha_max: f64,
    #[arg(long, default_value_t = 0.2)]
    pub alpha_step: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = SweepArg::Alpha)]
    pub sweep: SweepArg,

    /// Source powers (dBm).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-70.0, -75.0, -80.0, -85.0])]
    pub alpha: Vec<f64>,

    /// Monte Carlo runs per (bearing, power).
    #[arg(long, default_value_t = 50)]
    pub runs: usize,

    /// Observations per sensor and run for the alpha and pc sweeps.
    #[arg(long, default_value_t = 1)]
    pub batch: usize,

    /// Efficiencies of the pc sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0])]
    pub pc_values: Vec<f64>,

    /// Batch sizes of the batch sweep (efficiency from --pc).
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 4, 8, 16])]
    pub batch_sizes: Vec<usize>,

    /// Spacing of the true bearings (deg), starting at -180.
    #[arg(long, default_value_t = 1.0)]
    pub psi_true_step: f64,

    /// Pattern file; defaults to a four-element synthetic circular array.
    #[arg(long)]
    pub patterns: Option<PathBuf>,

    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FitPatternArgs {
    #[arg(long)]
    pub calibration: PathBuf,

    /// Number of harmonics.
    #[arg(long, default_value_t = 7)]
    pub order: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EstimateArgs {
    #[arg(long)]
    pub patterns: PathBuf,

    #[arg(long)]
    pub observations: PathBuf,

    #[arg(long, value_enum, default_value_t = MethodArg::Both)]
    pub method: MethodArg,

    /// Also write the full cost surface and bearing profile of every epoch.
    #[arg(long)]
    pub export_grid: bool,

    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FilterArgs {
    #[arg(long, default_value_t = 2000)]
    pub particles: usize,

    /// Bearing acceleration noise density, expressed as deg/s^1.5.
    #[arg(long, default_value_t = 5.0)]
    pub process_noise_deg: f64,

    #[arg(long, value_enum, default_value_t = ReductionArg::Profile)]
    pub reduction: ReductionArg,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct WindowArgs {
    /// Epoch length (s).
    #[arg(long, default_value_t = 1.0)]
    pub window: f64,

    /// Expected packets per second and sensor.
    #[arg(long, default_value_t = 10.0)]
    pub rate: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrackArgs {
    #[arg(long)]
    pub patterns: PathBuf,

    /// RSSI log with a header `timestamp_s,antenna_id,channel,rssi_dbm`.
    #[arg(long)]
    pub log: PathBuf,

    /// Ground truth; adds error columns and detection-probability timelines.
    #[arg(long)]
    pub truth: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = MethodArg::Proposed)]
    pub method: MethodArg,

    #[command(flatten)]
    pub window: WindowArgs,

    #[command(flatten)]
    pub filter: FilterArgs,

    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SweepThresholdArgs {
    #[arg(long)]
    pub patterns: PathBuf,

    #[arg(long)]
    pub log: PathBuf,

    #[arg(long)]
    pub truth: PathBuf,

    /// Thresholds to evaluate (dBm).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-95.0, -90.0, -85.0, -80.0, -75.0, -70.0, -65.0])]
    pub gammas: Vec<f64>,

    /// Filter seeds per threshold and method.
    #[arg(long, default_value_t = 10)]
    pub pf_seeds: usize,

    #[command(flatten)]
    pub window: WindowArgs,

    #[command(flatten)]
    pub filter: FilterArgs,

    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SynthWalkArgs {
    #[arg(long, default_value_t = 300.0)]
    pub duration: f64,

    /// Source power at 10 m (dBm).
    #[arg(long, default_value_t = -70.0, allow_hyphen_values = true)]
    pub alpha_ref: f64,
}

fn absolute(p: &mut PathBuf) {
    if let Ok(a) = std::path::absolute(&*p) {
        *p = a;
    }
}

impl Cli {
    /// Rewrite every path as absolute so a manifest can be replayed from anywhere.
    pub fn absolutize(&mut self) {
        absolute(&mut self.out_dir);
        match &mut self.command {
            Some(Command::Simulate(a)) => {
                if let Some(p) = &mut a.patterns {
                    absolute(p);
                }
            }
            Some(Command::FitPattern(a)) => absolute(&mut a.calibration),
            Some(Command::Estimate(a)) => {
                absolute(&mut a.patterns);
                absolute(&mut a.observations);
            }
            Some(Command::Track(a)) => {
                absolute(&mut a.patterns);
                absolute(&mut a.log);
                if let Some(t) = &mut a.truth {
                    absolute(t);
                }
            }
            Some(Command::SweepThreshold(a)) => {
                absolute(&mut a.patterns);
                absolute(&mut a.log);
                absolute(&mut a.truth);
            }
            Some(Command::SynthWalk(_)) | None => {}
        }
    }
}
