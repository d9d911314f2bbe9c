//! `neurotopo` command-line front end.
//!
//! Exit codes: 0 on success, 2 on input errors (unreadable or malformed
//! files, dimension mismatches), 3 on parameter errors (bad flags, values
//! or configuration). Errors go to standard error as `ERROR <code>: <message>`.

mod commands;
mod config;
mod error;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use error::{CliError, EXIT_INPUT, EXIT_PARAMETER};

const PUBLISHED: &str = "[origin: published protocol]";
const CHOSEN: &str = "[origin: implementation default]";

#[derive(Debug, Parser)]
#[command(
    name = "neurotopo",
    version,
    about = "Topological analysis of fluorescence microscopy images"
)]
pub struct Cli {
    /// TOML file with one table per subcommand; keys are long flag names.
    /// Flags given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads for commands that take several input files.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: u16,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Count synapses where red and green bands coincide inside a traced dendrite band.
    Synapses(SynapsesArgs),
    /// Count nuclei and neurons from a nuclei channel and a neuron channel.
    Nuclei(NucleiArgs),
    /// Locate neurons by tile-wise path search from bright seeds.
    Locate(LocateArgs),
    /// Extract the neuron structure from a z-stack through persistent components.
    Structure(StructureArgs),
    /// Betti numbers of binary images.
    Homology(HomologyArgs),
    /// Persistence barcode of a threshold filtration.
    Persistence(PersistenceArgs),
    /// Zigzag H0 intervals across consecutive slices.
    Zigzag(ZigzagArgs),
}

#[derive(Debug, Args)]
pub struct SynapsesArgs {
    /// Red channel (PGM or PAM). [origin: user input]
    #[arg(long, value_name = "FILE")]
    pub red: PathBuf,
    /// Green channel (PGM or PAM). [origin: user input]
    #[arg(long, value_name = "FILE")]
    pub green: PathBuf,
    /// Traced dendrite: JSON with "vertices" and optional "band_width" (default 4 px). [origin: user input]
    #[arg(long, value_name = "FILE")]
    pub roi: PathBuf,
    #[arg(long, default_value = "0:255", value_name = "LO:HI", help = format!("Red intensity band, inclusive. {PUBLISHED}"))]
    pub red_range: String,
    #[arg(long, default_value = "0:255", value_name = "LO:HI", help = format!("Green intensity band, inclusive. {PUBLISHED}"))]
    pub green_range: String,
    #[arg(long, value_name = "UM_PER_PX", help = format!("Microns per pixel; defaults to the calibration stored in the red image header (228/1024 for the published 1024 px fields). {PUBLISHED}"))]
    pub calib: Option<f64>,
    /// Write the report as JSON.
    #[arg(long, value_name = "FILE")]
    pub out_json: Option<PathBuf>,
    /// Write the report as CSV.
    #[arg(long, value_name = "FILE")]
    pub out_csv: Option<PathBuf>,
    /// Write the marked-synapse mask as PGM.
    #[arg(long, value_name = "FILE")]
    pub out_mask: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NucleiArgs {
    /// Nuclei channel (PGM or PAM). [origin: user input]
    #[arg(long, value_name = "FILE")]
    pub nuclei: PathBuf,
    /// Neuron channel (PGM or PAM). [origin: user input]
    #[arg(long, value_name = "FILE")]
    pub neurons: PathBuf,
    #[arg(long, default_value_t = 40, help = format!("Components below this many pixels are noise. {PUBLISHED}"))]
    pub min_area: usize,
    #[arg(long, default_value_t = 200, help = format!("Components above this many pixels are discarded. {PUBLISHED}"))]
    pub max_area: usize,
    #[arg(long, value_enum, default_value_t = AxisMode::Ratio, help = format!("Compare major and minor axis by ratio or by difference. {CHOSEN}"))]
    pub axis: AxisMode,
    #[arg(long, default_value_t = 2.0, help = format!("Oblong limit for the axis comparison. {PUBLISHED}"))]
    pub axis_limit: f64,
    #[arg(long, value_delimiter = ',', default_value = "5,10,15", help = format!("Radii of the density circles, increasing. {CHOSEN}"))]
    pub radii: Vec<usize>,
    #[arg(long, default_value_t = 128, help = format!("Binarization threshold of the nuclei channel. {CHOSEN}"))]
    pub nuclei_threshold: u8,
    #[arg(long, default_value_t = 128, help = format!("Binarization threshold of the neuron channel. {CHOSEN}"))]
    pub neuron_threshold: u8,
    #[arg(long, default_value_t = 1, help = format!("Median prefilter radius; 0 disables it. {CHOSEN}"))]
    pub median_radius: usize,
    /// Write the report as JSON.
    #[arg(long, value_name = "FILE")]
    pub out_json: Option<PathBuf>,
    /// Write one CSV row per component with its verdict.
    #[arg(long, value_name = "FILE")]
    pub out_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisMode {
    Ratio,
    Difference,
}

#[derive(Debug, Args)]
pub struct LocateArgs {
    /// Neuron image (PGM or PAM). [origin: user input]
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 25, help = format!("Side of the search tiles in pixels. {PUBLISHED}"))]
    pub tile: usize,
    #[arg(long, default_value_t = 15.0, help = format!("Minimum path length inside a tile, in pixels. {PUBLISHED}"))]
    pub min_path: f64,
    #[arg(long, default_value_t = 2, help = format!("Background pixels a path may jump (2 or 3). {PUBLISHED}"))]
    pub max_gap: usize,
    #[arg(long, help = format!("Seed intensity; defaults to the 99.5th percentile. {CHOSEN}"))]
    pub seed_threshold: Option<u8>,
    #[arg(long, default_value_t = 128, help = format!("Foreground threshold for path search. {CHOSEN}"))]
    pub foreground_threshold: u8,
    /// Write the report as JSON.
    #[arg(long, value_name = "FILE")]
    pub out_json: Option<PathBuf>,
    /// Write the input with box outlines drawn at 255 as PGM.
    #[arg(long, value_name = "FILE")]
    pub out_boxes: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StructureArgs {
    /// Slices in stack order; a multi-channel PAM counts as one slice per channel. [origin: user input]
    #[arg(long = "in", value_name = "FILE", required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', help = format!("Superlevel thresholds, strictly descending (default 227,199,170,142,113,85,56,28). {CHOSEN}"))]
    pub levels: Vec<u8>,
    #[arg(long, default_value_t = 2, help = format!("Minimum bar length in levels of a kept component. {CHOSEN}"))]
    pub min_persistence: usize,
    #[arg(long, default_value_t = 1, help = format!("Median prefilter radius; 0 disables it. {CHOSEN}"))]
    pub median_radius: usize,
    /// Write the structure mask as PGM.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Write the H0 barcode as CSV.
    #[arg(long, value_name = "FILE")]
    pub out_barcode: Option<PathBuf>,
    /// Write the result as JSON.
    #[arg(long, value_name = "FILE")]
    pub out_json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HomologyArgs {
    /// Binary or gray images; several files are processed in parallel with --jobs. [origin: user input]
    #[arg(long = "in", value_name = "FILE", required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = 1, help = format!("Pixels at or above this value are foreground. {CHOSEN}"))]
    pub threshold: u8,
    #[arg(long, value_enum, default_value_t = Method::Dvf, help = format!("Homology route. {CHOSEN}"))]
    pub method: Method,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Reduction to the critical complex of a discrete vector field.
    Dvf,
    /// Gaussian elimination over Z/2.
    Mod2,
    /// Smith normal form over the integers.
    Integral,
}

#[derive(Debug, Args)]
pub struct PersistenceArgs {
    /// Gray images; several files are processed in parallel with --jobs. [origin: user input]
    #[arg(long = "in", value_name = "FILE", required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', help = format!("Thresholds in filtration order (default 227,199,170,142,113,85,56,28). {CHOSEN}"))]
    pub levels: Vec<u8>,
    #[arg(long, help = format!("Use sublevel sets (ascending thresholds) instead of superlevel sets. {CHOSEN}"))]
    pub sublevel: bool,
    /// Write the barcode CSV here instead of standard output.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ZigzagArgs {
    /// Slices in order. [origin: user input]
    #[arg(long = "in", value_name = "FILE", required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = 128, help = format!("Pixels at or above this value are foreground. {CHOSEN}"))]
    pub threshold: u8,
    /// Write the interval CSV here instead of standard output.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

/// Runs one invocation and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let result = config::expand(args).and_then(|args| {
        let cli = match Cli::try_parse_from(args) {
            Ok(cli) => cli,
            Err(e) if !e.use_stderr() => {
                let _ = write!(stdout, "{}", e.render());
                return Ok(());
            }
            Err(e) => {
                let text = e.render().to_string();
                let first = text.lines().next().unwrap_or_default().trim_start_matches("error: ");
                return Err(CliError::parameter("usage", first));
            }
        };
        commands::execute(&cli, stdout)
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "ERROR {}: {e}", e.code());
            e.exit_code()
        }
    }
}
