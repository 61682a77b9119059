use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aisgraph::coordinator::{compute_stats, read_manifest, run_pipeline, DatasetParams, PipelineError, RunConfig};
use aisgraph::exec::Execution;
use aisgraph::ingest::RegionBounds;
use aisgraph::sample::{generate_sample, write_sample_csv, SampleSpec};

/// Turn AIS reports into labeled spatio-temporal anomaly graphs.
#[derive(Debug, Parser)]
#[command(name = "aisgraph", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Recompute label statistics of an emitted dataset and check them
    /// against its manifest.
    Stats { dir: PathBuf },
    /// Write the deterministic synthetic AIS corpus as CSV.
    Sample {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        convoys: usize,
        #[arg(long, default_value_t = 16)]
        loners: usize,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// AIS CSV file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Resampling interval, seconds.
    #[arg(long, default_value_t = aisgraph::ingest::DEFAULT_DT)]
    dt: i64,
    /// Split a track where reports are further apart than this, seconds.
    #[arg(long, default_value_t = aisgraph::ingest::DEFAULT_GAP_THRESHOLD)]
    gap_threshold: i64,
    #[arg(long, default_value_t = aisgraph::coordinator::DEFAULT_WINDOW_HOURS)]
    window_hours: f64,
    /// Window advance in samples (default: window length).
    #[arg(long)]
    stride: Option<usize>,
    /// Keep only the first N windows in canonical order.
    #[arg(long)]
    max_graphs: Option<usize>,
    #[arg(long, default_value_t = aisgraph::coordinator::DEFAULT_K_VESSELS)]
    k_vessels: usize,
    #[arg(long, default_value_t = 0.5)]
    r_node: f64,
    #[arg(long, default_value_t = 0.1)]
    r_traj: f64,
    #[arg(long, default_value_t = aisgraph::injector::DEFAULT_K_SIGMA)]
    k_sigma: f64,
    /// Always push rates above the mean instead of drawing a sign.
    #[arg(long)]
    one_sided: bool,
    /// Perturbed SOG is clamped to [0, sog_max] knots.
    #[arg(long, default_value_t = aisgraph::injector::DEFAULT_SOG_MAX)]
    sog_max: f64,
    /// Scenario file; may be repeated.
    #[arg(long = "scenario")]
    scenarios: Vec<PathBuf>,
    #[arg(long, default_value_t = aisgraph::graph::DEFAULT_PROXIMITY_KM)]
    proximity_km: f64,
    #[arg(long, default_value_t = aisgraph::coordinator::DEFAULT_NEIGHBOR_RADIUS_KM)]
    neighbor_radius_km: f64,
    #[arg(long, default_value_t = aisgraph::neighborhood::DEFAULT_MIN_SAMPLES)]
    optics_min_samples: usize,
    #[arg(long, default_value_t = aisgraph::neighborhood::DEFAULT_MAX_EPS_KM)]
    optics_max_eps_km: f64,
    #[arg(long, default_value_t = aisgraph::neighborhood::DEFAULT_XI)]
    optics_xi: f64,
    #[arg(long, default_value_t = 2.0)]
    sog_jitter: f64,
    #[arg(long, default_value_t = 15.0)]
    cog_jitter: f64,
    #[arg(long, default_value_t = 5.0)]
    pos_jitter_km: f64,
    #[arg(long)]
    exclude_synthetic_from_injection: bool,
    #[arg(long)]
    temporal_edges_only: bool,
    /// Region filter as LON_MIN,LON_MAX,LAT_MIN,LAT_MAX.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    region: Option<Vec<f64>>,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    /// Also write bundles.jsonl.
    #[arg(long)]
    bundles: bool,
    /// Run every stage on the calling thread.
    #[arg(long)]
    sequential: bool,
    /// Write the dataset statistics here as JSON.
    #[arg(long)]
    stats: Option<PathBuf>,
}

impl RunArgs {
    fn into_config(self) -> Result<RunConfig, PipelineError> {
        let missing = |f: &str| PipelineError::Config(format!("--{f} is required"));
        let input = self.input.ok_or_else(|| missing("input"))?;
        let output = self.output.ok_or_else(|| missing("output"))?;
        let mut p = DatasetParams {
            seed: self.seed,
            dt: self.dt,
            gap_threshold: self.gap_threshold,
            window_hours: self.window_hours,
            stride: self.stride,
            max_graphs: self.max_graphs,
            k_vessels: self.k_vessels,
            k_sigma: self.k_sigma,
            proximity_km: self.proximity_km,
            temporal_edges_only: self.temporal_edges_only,
            neighbor_radius_km: self.neighbor_radius_km,
            exclude_synthetic_from_injection: self.exclude_synthetic_from_injection,
            delimiter: self.delimiter,
            emit_bundles: self.bundles,
            ..Default::default()
        };
        p.ratios.r_node = self.r_node;
        p.ratios.r_traj = self.r_traj;
        p.perturb.sog_max = self.sog_max;
        p.perturb.one_sided = self.one_sided;
        p.optics.min_samples = self.optics_min_samples;
        p.optics.max_eps_km = self.optics_max_eps_km;
        p.optics.xi = self.optics_xi;
        p.bounds.sog_jitter = self.sog_jitter;
        p.bounds.cog_jitter = self.cog_jitter;
        p.bounds.pos_jitter_km = self.pos_jitter_km;
        if let Some(r) = self.region {
            if r.len() != 4 {
                return Err(PipelineError::Config(format!("--region takes 4 numbers, got {}", r.len())));
            }
            p.region = RegionBounds::new(r[0], r[1], r[2], r[3]).map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        let mut config = RunConfig::new(input, output, p);
        config.scenarios = self.scenarios;
        config.stats = self.stats;
        config.execution = if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        };
        Ok(config)
    }
}

fn stats(dir: PathBuf) -> Result<(), PipelineError> {
    let computed = compute_stats(&dir).map_err(|e| PipelineError::Input(e.to_string()))?;
    let manifest = read_manifest(&dir)?;
    let text = serde_json::to_string_pretty(&computed).map_err(|e| PipelineError::Internal(e.to_string()))?;
    println!("{text}");
    if manifest.counts != computed {
        return Err(PipelineError::Input(format!(
            "{}: manifest counts disagree with the graph records",
            dir.display()
        )));
    }
    Ok(())
}

fn sample(output: PathBuf, spec: SampleSpec) -> Result<(), PipelineError> {
    let io = |e: io::Error| PipelineError::Io(format!("{}: {e}", output.display()));
    let records = generate_sample(&spec);
    let mut w = BufWriter::new(File::create(&output).map_err(io)?);
    write_sample_csv(&records, &mut w).map_err(io)?;
    w.flush().map_err(io)?;
    eprintln!("wrote {} reports to {}", records.len(), output.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Some(Command::Stats { dir }) => stats(dir),
        Some(Command::Sample {
            output,
            seed,
            convoys,
            loners,
        }) => sample(
            output,
            SampleSpec {
                seed,
                convoys,
                loners,
                ..Default::default()
            },
        ),
        None => cli.run.into_config().and_then(|c| {
            let m = run_pipeline(&c)?;
            println!(
                "{} graphs, {} anomalous, {} synthetic members -> {}",
                m.counts.graphs,
                m.counts.positive_graphs,
                m.counts.synthetic_members,
                c.output.display()
            );
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("aisgraph: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
