use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "pointstream", version, about = "Simulate, fuse, stream and recolor live point clouds")]
pub struct Cli {
    /// Pipeline configuration file (TOML). Defaults apply when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Overrides the scene seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Drive pacing and recolor timing from frame timestamps instead of the
    /// wall clock.
    #[arg(long, global = true)]
    pub fake_clock: bool,

    #[arg(long, global = true, value_enum, default_value_t = LogLevel::Warn)]
    pub log_level: LogLevel,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LogLevel {
    Off,
    Error,
    Warn,
    Info,
    Debug,
    Trace,
}

impl From<LogLevel> for log::LevelFilter {
    fn from(l: LogLevel) -> Self {
        match l {
            LogLevel::Off => Self::Off,
            LogLevel::Error => Self::Error,
            LogLevel::Warn => Self::Warn,
            LogLevel::Info => Self::Info,
            LogLevel::Debug => Self::Debug,
            LogLevel::Trace => Self::Trace,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write LiDAR scans, camera frames and a manifest for a scene.
    Simulate(SimulateArgs),
    /// Capture, fuse, densify and stream frames, then print latency.
    Pipeline(PipelineArgs),
    /// Decode a frame stream over a static cloud and write snapshots.
    Receive(ReceiveArgs),
    /// Transfer colors from a dynamic cloud onto a static one.
    Recolor(RecolorArgs),
    /// Run the loopback pipeline and emit per-frame metrics.
    Bench(BenchArgs),
    /// Configuration file utilities.
    #[command(subcommand)]
    Config(ConfigCommand),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scene file; overrides the config's scene.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Seconds of capture.
    #[arg(long, default_value_t = 1.0)]
    pub duration: f64,
    /// Output directory; defaults to the config's output_dir.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Scene file; overrides the config's scene.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Number of camera frames; overrides the config.
    #[arg(long)]
    pub frames: Option<usize>,
    /// Stream to a TCP receiver at this address.
    #[arg(long, value_name = "ADDR", conflicts_with = "record")]
    pub connect: Option<String>,
    /// Write the encoded stream to a file.
    #[arg(long, value_name = "FILE")]
    pub record: Option<PathBuf>,
    /// Per-frame metrics as JSON lines.
    #[arg(long, value_name = "FILE")]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["listen", "input"]))]
pub struct ReceiveArgs {
    /// Pre-registered static cloud (colored PLY).
    #[arg(long = "static", value_name = "PLY")]
    pub static_cloud: PathBuf,
    /// Accept one sender on this address.
    #[arg(long, value_name = "ADDR")]
    pub listen: Option<String>,
    /// Read a recorded stream.
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Output directory for snapshots and receive.jsonl.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Frames between PLY snapshots.
    #[arg(long)]
    pub snapshot_interval: Option<usize>,
    /// Seconds between static-cloud recolors.
    #[arg(long)]
    pub recolor_interval_s: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RecolorArgs {
    /// Colored static cloud to adapt.
    #[arg(long = "static", value_name = "PLY")]
    pub static_cloud: PathBuf,
    /// Colored cloud captured under the target lighting.
    #[arg(long, value_name = "PLY")]
    pub dynamic: PathBuf,
    /// Recolored static cloud.
    #[arg(long, value_name = "PLY")]
    pub out: PathBuf,
    /// Overlap distance in meters.
    #[arg(long)]
    pub l: Option<f64>,
    /// Number of spatial clusters.
    #[arg(long)]
    pub k: Option<usize>,
    /// Weight of the per-cluster correction, 0 to 1.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Fewest overlap pairs a transfer accepts.
    #[arg(long)]
    pub min_pairs: Option<usize>,
    /// Write every transferred color before sRGB quantization, one
    /// `L a b` line per static point.
    #[arg(long, value_name = "FILE")]
    pub dump_lab: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Scene file; overrides the config's scene.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long, default_value_t = 300)]
    pub frames: usize,
    /// Camera width in pixels.
    #[arg(long)]
    pub width: Option<usize>,
    /// Camera height in pixels.
    #[arg(long)]
    pub height: Option<usize>,
    /// Payload compression; overrides the config.
    #[arg(long, value_enum)]
    pub codec: Option<CodecArg>,
    /// Metrics destination; standard output when omitted.
    #[arg(long, value_name = "FILE")]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CodecArg {
    Store,
    Deflate,
}

#[derive(Debug, Subcommand)]
pub enum ConfigCommand {
    /// Parse and check a config file (the positional file or --config).
    Validate { file: Option<PathBuf> },
    /// Print the default configuration.
    Default,
}
