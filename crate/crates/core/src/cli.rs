//! Command-line front end. `slatbp <command> --help` lists every flag.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::engine::{BeliefSnapshot, Mode, Models, Pmf, SlatEngine, SlotInput};
use crate::error::{Error, Result};
use crate::geometry::{CellMap, Position3};
use crate::noise::{fit_gm, read_samples, write_samples, GmComponent, ImuModel, RangingNoiseModel};
use crate::sim::{
    corridor_map, default_nlos_gm, rng_stream, synthesize_nlos_db, write_outputs, ScenarioConfig, Simulation,
    Summary,
};

#[derive(Debug, Parser)]
#[command(name = "slatbp", version, about = "Discrete-cell sensor localization and target tracking")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a straight corridor cell map.
    GenMap(GenMapArgs),
    /// Synthesize an NLOS range-error sample database.
    GenNlosDb(GenNlosDbArgs),
    /// Fit a Gaussian-mixture ranging model to a sample database.
    FitNoise(FitNoiseArgs),
    /// Run one engine over a measurement stream.
    Run(RunArgs),
    /// Run a Monte-Carlo batch and write RMSE/CDF outputs.
    Mc(McArgs),
    /// Print the summary table of a Monte-Carlo output directory.
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
pub struct GenMapArgs {
    /// Number of cells.
    #[arg(long)]
    pub cells: usize,
    /// Distance between consecutive cell centers, meters.
    #[arg(long, default_value_t = 5.0)]
    pub pitch: f64,
    /// Maximum lateral displacement of a center, meters.
    #[arg(long, default_value_t = 1.0)]
    pub jitter: f64,
    /// Per-dimension cell extent, meters (defaults to the pitch).
    #[arg(long)]
    pub extent: Option<f64>,
    #[arg(long, env = "SLATBP_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output file (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenNlosDbArgs {
    /// Number of samples.
    #[arg(long, default_value_t = 1164)]
    pub samples: usize,
    /// Ranging model JSON whose mixture is sampled (built-in mixture if omitted).
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, env = "SLATBP_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitNoiseArgs {
    /// Sample database: one range error in meters per line.
    #[arg(long)]
    pub samples: PathBuf,
    /// Number of mixture components.
    #[arg(long, default_value_t = 5)]
    pub components: usize,
    #[arg(long, default_value_t = 0.17)]
    pub p_nlos: f64,
    #[arg(long, default_value_t = 0.03)]
    pub p_obs: f64,
    /// LOS error standard deviation, meters.
    #[arg(long, default_value_t = 1.0)]
    pub sigma_w0: f64,
    /// Maximum obstacle error, meters.
    #[arg(long, default_value_t = 30.0)]
    pub d_max: f64,
    /// Cell size D, meters.
    #[arg(long, default_value_t = 5.0)]
    pub cell_size: f64,
    /// Output model file (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Simulate run `--run-index` of this scenario config instead of reading inputs.
    #[arg(long, conflicts_with_all = ["map", "noise", "input", "priors"])]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub run_index: usize,
    /// Cell map JSON.
    #[arg(long, requires_all = ["noise", "input", "priors"])]
    pub map: Option<PathBuf>,
    /// Ranging model JSON.
    #[arg(long)]
    pub noise: Option<PathBuf>,
    /// Measurement slots, one JSON object per line.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Priors JSON: {"target": [...], "sensors": [[...], ...]}.
    #[arg(long)]
    pub priors: Option<PathBuf>,
    #[arg(long, default_value = "slat")]
    pub mode: Mode,
    #[arg(long, default_value_t = 0.5)]
    pub sigma_u: f64,
    #[arg(long, default_value_t = 1.0)]
    pub ts: f64,
    #[arg(long, default_value_t = 0.05)]
    pub epsilon_m: f64,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, env = "SLATBP_SEED")]
    pub seed: Option<u64>,
    /// Per-slot beliefs and estimates as JSON lines (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct McArgs {
    /// Scenario config JSON (built-in defaults if omitted).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated subset of slat,tracking,localization.
    #[arg(long, value_delimiter = ',')]
    pub modes: Option<Vec<Mode>>,
    /// Overrides the config seed.
    #[arg(long, env = "SLATBP_SEED")]
    pub seed: Option<u64>,
    /// Overrides the number of runs.
    #[arg(long)]
    pub n_mc: Option<usize>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// An `mc` output directory or its summary.json.
    pub path: PathBuf,
}

/// Prior file of the `run` command.
#[derive(Debug, Serialize, Deserialize)]
pub struct PriorFile {
    pub target: Vec<f64>,
    #[serde(default)]
    pub sensors: Vec<Vec<f64>>,
}

/// One line of `run` output.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub t: usize,
    pub work: u64,
    pub target_estimate: Position3,
    pub sensor_estimates: Vec<Position3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_error: Option<f64>,
    pub beliefs: BeliefSnapshot,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn gen_map(a: &GenMapArgs) -> Result<()> {
    let map = corridor_map(a.cells, a.pitch, a.jitter, a.extent.unwrap_or(a.pitch), &mut rng_stream(a.seed, 0))?;
    emit(a.out.as_deref(), &(map.to_json_string() + "\n"))
}

fn gen_nlos_db(a: &GenNlosDbArgs) -> Result<()> {
    let gm: Vec<GmComponent> = match &a.model {
        Some(p) => RangingNoiseModel::load(p)?.gm,
        None => default_nlos_gm(),
    };
    let db = synthesize_nlos_db(&gm, a.samples, &mut rng_stream(a.seed, 0))?;
    write_samples(&a.out, &db)
}

fn fit_noise(a: &FitNoiseArgs) -> Result<()> {
    let samples = read_samples(&a.samples)?;
    let gm = fit_gm(&samples, a.components)?;
    let model = RangingNoiseModel::new(a.p_nlos, a.p_obs, a.sigma_w0, gm, a.d_max, a.cell_size)?;
    emit(a.out.as_deref(), &(model.to_json_string() + "\n"))
}

fn read_slots(path: &Path) -> Result<Vec<SlotInput>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut slots = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        slots.push(SlotInput::from_json_line(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(slots)
}

fn run(a: &RunArgs) -> Result<()> {
    let (mut engine, slots, truth) = if let Some(cfg_path) = &a.config {
        let mut cfg = ScenarioConfig::load(cfg_path)?;
        if let Some(s) = a.seed {
            cfg.seed = s;
        }
        let sim = Simulation::new(cfg)?;
        let sc = sim.scenario(a.run_index)?;
        let engine = SlatEngine::new(
            sim.map.clone(),
            sim.models.clone(),
            sc.target_prior.clone(),
            sc.sensor_priors.clone(),
            a.mode,
            sim.config.epsilon_m,
            sim.config.k,
        )?;
        let truth: Vec<Position3> =
            sc.truth.target_cells.iter().map(|c| sim.map.centers()[c.index()]).collect();
        (engine, sc.slots, Some(truth))
    } else {
        let (Some(map), Some(noise), Some(input), Some(priors)) = (&a.map, &a.noise, &a.input, &a.priors) else {
            return Err(Error::InvalidArgument(
                "run needs either --config or all of --map, --noise, --input, --priors".into(),
            ));
        };
        let map = Arc::new(CellMap::load(map, None)?);
        let ranging = RangingNoiseModel::load(noise)?;
        let imu = ImuModel::new(a.sigma_u, map.quantization(), a.ts)?;
        let priors: PriorFile = read_json(priors)?;
        let sensor_priors = priors.sensors.into_iter().map(Pmf::new).collect::<Result<Vec<_>>>()?;
        let engine = SlatEngine::new(
            map,
            Models { imu, ranging },
            Pmf::new(priors.target)?,
            sensor_priors,
            a.mode,
            a.epsilon_m,
            a.k,
        )?;
        (engine, read_slots(input)?, None)
    };

    let mut sink: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    };
    let out_path = a.out.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
    for (i, slot) in slots.iter().enumerate() {
        let report = engine.step(slot)?;
        let target_estimate = engine.target_estimate();
        let rec = RunRecord {
            t: engine.t(),
            work: report.work,
            target_estimate,
            sensor_estimates: (0..engine.num_sensors())
                .map(|n| engine.sensor_estimate(n))
                .collect::<Result<Vec<_>>>()?,
            target_error: truth.as_ref().map(|tr| target_estimate.distance(&tr[i])),
            beliefs: engine.snapshot(),
        };
        let line = serde_json::to_string(&rec).map_err(|e| Error::json("run record", e))?;
        writeln!(sink, "{line}").map_err(|e| Error::io(&out_path, e))?;
    }
    sink.flush().map_err(|e| Error::io(&out_path, e))
}

fn mc(a: &McArgs) -> Result<bool> {
    let mut cfg = match &a.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(m) = &a.modes {
        cfg.modes = m.clone();
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.n_mc {
        cfg.n_mc = n;
    }
    if a.threads == Some(0) {
        return Err(Error::InvalidArgument("--threads must be at least 1".into()));
    }
    let res = Simulation::new(cfg)?.run(a.threads)?;
    write_outputs(&res, &a.out)?;
    print!("{}", Summary::new(&res).table());
    let collapsed = res.collapsed();
    if collapsed > 0 {
        eprintln!("warning: {collapsed} runs stopped on a belief collapse and were excluded");
    }
    Ok(collapsed == 0)
}

fn metrics(a: &MetricsArgs) -> Result<()> {
    let p = if a.path.is_dir() { a.path.join("summary.json") } else { a.path.clone() };
    print!("{}", Summary::load(p)?.table());
    Ok(())
}

/// Executes a parsed command. `Ok(false)` means it completed but some runs failed.
pub fn execute(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::GenMap(a) => gen_map(a).map(|_| true),
        Command::GenNlosDb(a) => gen_nlos_db(a).map(|_| true),
        Command::FitNoise(a) => fit_noise(a).map(|_| true),
        Command::Run(a) => run(a).map(|_| true),
        Command::Mc(a) => mc(a),
        Command::Metrics(a) => metrics(a).map(|_| true),
    }
}

/// Entry point: exit code 0 on success, 2 on bad usage, 1 on failure.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
