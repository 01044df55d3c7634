use std::path::PathBuf;
use std::process::ExitCode;

use asfnet_tools::commands::{self, *};
use asfnet_tools::config::{env_threads, read_config, resolve};
use asfnet_tools::manifest::Manifest;
use asfnet_tools::{ToolError, ToolResult};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

/// Learned acoustic scattering fields and ray-traced impulse responses.
///
/// Options can also come from a TOML or JSON file given with --config; flags
/// on the command line take precedence. Worker threads are read from the
/// ASF_THREADS environment variable.
#[derive(Parser)]
#[command(name = "asfnet", version)]
struct Cli {
    /// Config file with the command's options (TOML, or JSON by extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log level: error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    log_level: log::LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a JSON-lines dataset of point clouds and oracle SH labels.
    GenDataset(GenDatasetArgs),
    /// SH fitting error versus order on oracle fields.
    FitSh(FitShArgs),
    /// Train one regressor per frequency band.
    Train(TrainArgs),
    /// Predict SH coefficients for one scatterer.
    Predict(PredictArgs),
    /// NRE table and histogram of a model on a dataset.
    Evaluate(EvaluateArgs),
    /// Trace a scene and synthesize one impulse response per frame.
    Simulate(SimulateArgs),
    /// Convolve a dry recording with an impulse response.
    Render(RenderArgs),
    /// Write one of the built-in stand-in scenes as a scene file.
    Standin(StandinArgs),
    /// Rerun the command recorded in a manifest.
    Replay {
        manifest: PathBuf,
    },
}

#[derive(Args, Serialize)]
struct GenDatasetArgs {
    #[arg(long)]
    count: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    freqs: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fraction of two-sphere composites.
    #[arg(long)]
    composites: Option<f64>,
    /// Do not add rotated copies.
    #[arg(long)]
    no_augment: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct FitShArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Random spheres to fit when no dataset is given.
    #[arg(long)]
    count: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    freqs: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_order: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    freqs: Option<Vec<f64>>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Halve the step size whenever an epoch raises the train loss.
    #[arg(long)]
    safeguard: bool,
}

#[derive(Args, Serialize)]
struct PredictArgs {
    /// Model directory written by `train`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Scatterer mesh (OBJ).
    #[arg(long)]
    obj: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Record id within --dataset.
    #[arg(long)]
    record: Option<usize>,
    /// Propagation direction of the incoming wave, e.g. -1,0,0.
    #[arg(long, value_delimiter = ',', num_args = 3, allow_hyphen_values = true)]
    incoming: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    freqs: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct EvaluateArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Score all records rather than the held-out split.
    #[arg(long)]
    all: bool,
    #[arg(long)]
    split_seed: Option<u64>,
    /// Use the labels as predictions.
    #[arg(long)]
    replay_labels: bool,
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Built-in scene: floor or box.
    #[arg(long)]
    standin: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scatterer fields: none, oracle or network.
    #[arg(long)]
    asf: Option<String>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    rays: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Frame times in seconds.
    #[arg(long, value_delimiter = ',')]
    frames: Option<Vec<f64>>,
    #[arg(long)]
    no_compensation: bool,
    #[arg(long)]
    sample_rate: Option<f64>,
    #[arg(long)]
    ir_seed: Option<u64>,
    #[arg(long)]
    ir_csv: bool,
}

#[derive(Args, Serialize)]
struct RenderArgs {
    #[arg(long)]
    ir: Option<PathBuf>,
    #[arg(long)]
    dry: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// 16-bit PCM output instead of 32-bit float.
    #[arg(long)]
    pcm16: bool,
}

#[derive(Args, Serialize)]
struct StandinArgs {
    /// floor or box
    name: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn opts<T: Serialize + DeserializeOwned + Default>(flags: &impl Serialize, file: &Option<Map<String, Value>>) -> ToolResult<T> {
    resolve(flags, file.clone())
}

/// Runs `command` with resolved options given as JSON.
fn dispatch(command: &str, options: Value) -> ToolResult<()> {
    fn parse<T: DeserializeOwned>(v: Value) -> ToolResult<T> {
        serde_json::from_value(v).map_err(|e| ToolError::usage(format!("bad options: {e}")))
    }
    match command {
        "gen-dataset" => {
            let r = gen_dataset(&parse(options)?)?;
            println!(
                "wrote {} records ({} composites) to {}",
                r.records,
                r.composites,
                r.out.display()
            );
        }
        "fit-sh" => {
            for r in fit_sh(&parse(options)?)? {
                println!(
                    "{:>6} Hz  order {}  relative error {:.3e} (max {:.3e})",
                    r.frequency, r.order, r.relative_error, r.max_relative_error
                );
            }
        }
        "train" => {
            let r = train_models(&parse(options)?, env_threads()?)?;
            println!("trainable parameters per model: {}", r.param_count);
            for (f, a, b, t) in r.bands {
                println!("{f:>6} Hz  train loss {a:.4e} -> {b:.4e}  best test loss {t:.4e}");
            }
        }
        "predict" => {
            for c in predict(&parse(options)?)? {
                println!("{:>6} Hz  {:?}", c.frequency, c.coeffs);
            }
        }
        "evaluate" => {
            let r = evaluate(&parse(options)?)?;
            println!("frequency  mean NRE  count");
            for (f, m, n) in &r.per_frequency {
                println!("{f:>9}  {m:>8.4}  {n}");
            }
            println!("  overall  {:>8.4}  {}", r.overall, r.samples.len());
            println!("percentiles: 50% {:.4}  75% {:.4}  95% {:.4}", r.p50, r.p75, r.p95);
        }
        "simulate" => {
            for (k, f) in simulate(&parse(options)?, env_threads()?)?.iter().enumerate() {
                println!(
                    "frame {k} t={} s  {:.1} ms  band energy {:?}",
                    f.time,
                    f.trace_ms + f.synth_ms,
                    f.band_totals.map(|e| (e * 1e6).round() / 1e6)
                );
            }
        }
        "render" => {
            let gain = render(&parse(options)?)?;
            println!("normalization gain {gain:.6e} ({:.2} dB)", 20.0 * gain.log10());
        }
        "standin" => commands::write_standin(&parse(options)?)?,
        other => return Err(ToolError::usage(format!("manifest names unknown command {other:?}"))),
    }
    Ok(())
}

fn to_value(v: &impl Serialize) -> ToolResult<Value> {
    serde_json::to_value(v).map_err(|e| ToolError::usage(e.to_string()))
}

fn run(cli: Cli) -> ToolResult<()> {
    let file = cli.config.as_deref().map(read_config).transpose()?;
    let (name, options) = match &cli.command {
        Command::GenDataset(a) => ("gen-dataset", to_value(&opts::<GenDatasetOpts>(a, &file)?)?),
        Command::FitSh(a) => ("fit-sh", to_value(&opts::<FitShOpts>(a, &file)?)?),
        Command::Train(a) => ("train", to_value(&opts::<TrainOpts>(a, &file)?)?),
        Command::Predict(a) => ("predict", to_value(&opts::<PredictOpts>(a, &file)?)?),
        Command::Evaluate(a) => ("evaluate", to_value(&opts::<EvaluateOpts>(a, &file)?)?),
        Command::Simulate(a) => ("simulate", to_value(&opts::<SimulateOpts>(a, &file)?)?),
        Command::Render(a) => ("render", to_value(&opts::<RenderOpts>(a, &file)?)?),
        Command::Standin(a) => ("standin", to_value(&opts::<StandinOpts>(a, &file)?)?),
        Command::Replay { manifest } => {
            let m = Manifest::read(manifest)?;
            return dispatch(&m.command, m.options);
        }
    };
    dispatch(name, options)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(cli.log_level)
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
