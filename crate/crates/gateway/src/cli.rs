use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use geobehave::cohort::SynthSpec;
use geobehave::geocode::CellBounds;
use geobehave::heatmap::ExportOptions;

use crate::config::PipelineConfig;
use crate::pipeline::{self, HeatmapRequest, Noise};
use crate::{server, UsageError};

#[derive(Debug, Parser)]
#[command(name = "geobehave", version, about = "Predict neighbourhood physical-activity levels from POI counts")]
pub struct Cli {
    /// Pipeline config (JSON). Relative paths inside it resolve against its directory.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (for `synth`, the cohort directory).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate the input files.
    Ingest,
    /// Compute per-individual indicators, residences and eligibility.
    Extract,
    /// Aggregate residents per cell and write the labeled dataset.
    Dataset,
    /// Select hyperparameters by cross-validation and fit the final model.
    Train,
    /// Leave-one-out evaluation with the trained model's hyperparameters.
    Evaluate {
        /// Shuffle labels with this seed first (permutation control).
        #[arg(long)]
        permute_labels: Option<u64>,
        /// Report path; defaults to evaluation.json in the output directory.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Render predictions for a bounding box.
    Heatmap(HeatmapArgs),
    /// Generate a synthetic cohort with planted labels.
    Synth(SynthArgs),
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        port: Option<u16>,
    },
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub min_lat: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub min_lon: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub max_lat: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub max_lon: f64,
    /// Geohash length; the config length when absent.
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(long, default_value = "geojson")]
    pub format: String,
    #[arg(long, default_value_t = 800)]
    pub width: u32,
    #[arg(long)]
    pub no_labels: bool,
    /// Output file, `-` for standard output; defaults to heatmap.<ext> in the output directory.
    #[arg(long)]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Generator settings (JSON); defaults otherwise.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Absolute noise standard deviation in counts/min.
    #[arg(long, conflicts_with = "noise_frac")]
    pub noise_sd: Option<f64>,
    /// Noise standard deviation as a fraction of the planted effect range.
    #[arg(long)]
    pub noise_frac: Option<f64>,
}

impl Cli {
    pub fn pipeline_config(&self) -> anyhow::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        Ok(cfg)
    }
}

/// Execute a parsed command line and return its summary line.
pub fn run(cli: &Cli) -> anyhow::Result<String> {
    if let Command::Synth(args) = &cli.command {
        return synth(cli, args);
    }
    let mut cfg = cli.pipeline_config()?;
    match &cli.command {
        Command::Ingest => pipeline::ingest(&cfg),
        Command::Extract => pipeline::extract(&cfg),
        Command::Dataset => pipeline::dataset(&cfg),
        Command::Train => pipeline::train(&cfg),
        Command::Evaluate { permute_labels, report } => pipeline::evaluate(&cfg, *permute_labels, report.as_deref()),
        Command::Heatmap(args) => {
            let bbox = CellBounds::new(args.min_lat, args.min_lon, args.max_lat, args.max_lon)?;
            let ext = geobehave::heatmap::exporter(&args.format)?.extension();
            let file = match &args.file {
                Some(p) if p.as_os_str() == "-" => None,
                Some(p) => Some(p.clone()),
                None => Some(cfg.artifact(&format!("heatmap.{ext}"))),
            };
            let req = HeatmapRequest {
                bbox,
                length: args.length.unwrap_or(cfg.length),
                format: args.format.clone(),
                options: ExportOptions { width_px: args.width, labels: !args.no_labels },
                file,
            };
            pipeline::heatmap(&cfg, &req)
        }
        Command::Serve { port } => {
            if let Some(p) = port {
                cfg.port = *p;
            }
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(server::serve(cfg))?;
            Ok("server stopped".into())
        }
        Command::Synth(_) => unreachable!("handled above"),
    }
}

fn synth(cli: &Cli, args: &SynthArgs) -> anyhow::Result<String> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| UsageError(format!("reading synth spec {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| UsageError(format!("synth spec {}: {e}", path.display())))?
        }
        None => SynthSpec::default(),
    };
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    let noise = match (args.noise_sd, args.noise_frac) {
        (Some(sd), _) => Some(Noise::Absolute(sd)),
        (_, Some(f)) => Some(Noise::RangeFraction(f)),
        _ => None,
    };
    let spec = pipeline::synth_spec(spec, noise)?;
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("synth"));
    pipeline::synth(&spec, &dir)
}
