use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    corridor_map, default_nlos_gm, deploy_sensors, generate_track, rng_stream, synthesize_measurements,
    synthesize_nlos_db, ErrorMetric, GroundTruth, MeasurementParams, ScenarioConfig, MAP_STREAM, NLOS_STREAM,
};
use crate::engine::{Mode, Models, Pmf, SlatEngine, SlotInput};
use crate::error::{Error, Result};
use crate::geometry::{CellId, CellMap, Position3};
use crate::noise::{fit_gm, read_samples, ImuModel, RangingNoiseModel};

/// One Monte-Carlo scenario: truth, priors and the measurements of every slot.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub truth: GroundTruth,
    pub target_prior: Pmf,
    pub sensor_priors: Vec<Pmf>,
    pub slots: Vec<SlotInput>,
}

/// Errors of one run in one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub run: usize,
    pub mode: Mode,
    /// Target position error per slot, meters.
    pub target_error: Vec<f64>,
    /// Per slot, the position error of every sensor, meters.
    pub sensor_error: Vec<Vec<f64>>,
    /// Summed (source cell, destination cell) terms over the run.
    pub work: u64,
    /// Set when the run stopped on a belief collapse.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collapse: Option<String>,
}

/// Aggregates of one mode over the runs that completed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeResult {
    pub mode: Mode,
    pub runs: usize,
    pub collapsed: usize,
    /// RMSE of the target position at each slot.
    pub target_rmse: Vec<f64>,
    /// RMSE over runs and sensors of the sensor positions at each slot.
    pub sensor_rmse: Vec<f64>,
    pub mean_target_rmse: f64,
    pub mean_sensor_rmse: f64,
    pub work: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloResult {
    pub config: ScenarioConfig,
    pub modes: Vec<ModeResult>,
    /// Per run and mode, in run order then config mode order.
    pub runs: Vec<RunMetrics>,
}

impl MonteCarloResult {
    pub fn mode(&self, mode: Mode) -> Option<&ModeResult> {
        self.modes.iter().find(|m| m.mode == mode)
    }

    pub fn collapsed(&self) -> usize {
        self.modes.iter().map(|m| m.collapsed).sum()
    }
}

/// Shared artifacts of a batch (map, NLOS database and estimator models) plus
/// the measurement generator settings, which may be edited before running.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub config: ScenarioConfig,
    pub map: Arc<CellMap>,
    pub nlos_db: Vec<f64>,
    pub models: Models,
    pub measurement: MeasurementParams,
}

impl Simulation {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let map = match &config.map_path {
            Some(p) => CellMap::load(p, Some(config.cell_size))?,
            None => corridor_map(
                config.n_c,
                config.pitch,
                config.jitter,
                config.cell_size,
                &mut rng_stream(config.seed, MAP_STREAM),
            )?,
        };
        if map.len() != config.n_c {
            return Err(Error::InvalidConfig(format!(
                "map has {} cells but n_c = {}",
                map.len(),
                config.n_c
            )));
        }
        let nlos_db = match &config.nlos_db_path {
            Some(p) => read_samples(p)?,
            None => synthesize_nlos_db(
                &default_nlos_gm(),
                config.nlos_db_size,
                &mut rng_stream(config.seed, NLOS_STREAM),
            )?,
        };
        let gm = match &config.noise_model_path {
            Some(p) => RangingNoiseModel::load(p)?.gm,
            None if config.p_nlos > 0.0 => fit_gm(&nlos_db, config.n_m)?,
            None => Vec::new(),
        };
        let d = map.quantization();
        let models = Models {
            imu: ImuModel::new(config.sigma_u, d, config.ts)?,
            ranging: RangingNoiseModel::new(config.p_nlos, config.p_obs, config.sigma_w0, gm, config.d_max, d)?,
        };
        let measurement = MeasurementParams::from_config(&config, d);
        Ok(Self { config, map: Arc::new(map), nlos_db, models, measurement })
    }

    /// The scenario of run `run`: track, deployment and measurements, each
    /// from its own child of the run's stream.
    pub fn scenario(&self, run: usize) -> Result<Scenario> {
        let mut run_rng = rng_stream(self.config.seed, run as u64);
        let mut track_rng = ChaCha8Rng::from_rng(&mut run_rng);
        let mut deploy_rng = ChaCha8Rng::from_rng(&mut run_rng);
        let mut measure_rng = ChaCha8Rng::from_rng(&mut run_rng);
        let c = &self.config;
        let target_cells = generate_track(c.n_c, c.n_t, &mut track_rng)?;
        let (sensor_cells, sensor_priors) = deploy_sensors(c.n_s, &self.map, c.sigma_s, &mut deploy_rng)?;
        let truth = GroundTruth { initial_cell: CellId(0), target_cells, sensor_cells };
        let slots = synthesize_measurements(&self.measurement, &truth, &self.map, &self.nlos_db, &mut measure_rng)?;
        Ok(Scenario {
            target_prior: Pmf::delta(self.map.len(), truth.initial_cell)?,
            truth,
            sensor_priors,
            slots,
        })
    }

    fn score(&self, estimate: Position3, truth: CellId) -> f64 {
        let est = match self.config.error_metric {
            ErrorMetric::Position => estimate,
            ErrorMetric::Cell => self.map.centers()[self.map.nearest_cell(&estimate).index()],
        };
        est.distance(&self.map.centers()[truth.index()])
    }

    /// Runs one scenario through the engine in `mode`.
    pub fn run_mode(&self, run: usize, scenario: &Scenario, mode: Mode) -> Result<RunMetrics> {
        let mut engine = SlatEngine::new(
            self.map.clone(),
            self.models.clone(),
            scenario.target_prior.clone(),
            scenario.sensor_priors.clone(),
            mode,
            self.config.epsilon_m,
            self.config.k,
        )?;
        let mut out = RunMetrics {
            run,
            mode,
            target_error: Vec::with_capacity(scenario.slots.len()),
            sensor_error: Vec::with_capacity(scenario.slots.len()),
            work: 0,
            collapse: None,
        };
        for (slot, &cell) in scenario.slots.iter().zip(&scenario.truth.target_cells) {
            match engine.step(slot) {
                Ok(_) => {}
                Err(e @ Error::BeliefCollapse { .. }) => {
                    out.collapse = Some(e.to_string());
                    break;
                }
                Err(e) => return Err(e),
            }
            out.target_error.push(self.score(engine.target_estimate(), cell));
            let sensors = (0..engine.num_sensors())
                .map(|n| Ok(self.score(engine.sensor_estimate(n)?, scenario.truth.sensor_cells[n])))
                .collect::<Result<Vec<_>>>()?;
            out.sensor_error.push(sensors);
        }
        out.work = engine.total_work();
        Ok(out)
    }

    /// All requested modes on the scenario of run `run`.
    pub fn run_one(&self, run: usize) -> Result<Vec<RunMetrics>> {
        let scenario = self.scenario(run)?;
        self.config.modes.iter().map(|&m| self.run_mode(run, &scenario, m)).collect()
    }

    /// All runs, in parallel on `threads` workers (default: all cores).
    /// The result does not depend on the thread count.
    pub fn run(&self, threads: Option<usize>) -> Result<MonteCarloResult> {
        let work = || -> Result<Vec<Vec<RunMetrics>>> {
            (0..self.config.n_mc).into_par_iter().map(|r| self.run_one(r)).collect()
        };
        let per_run = match threads {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
                .install(work)?,
            None => work()?,
        };
        let runs: Vec<RunMetrics> = per_run.into_iter().flatten().collect();
        let modes = self.config.modes.iter().map(|&m| aggregate(m, self.config.n_t, &runs)).collect();
        Ok(MonteCarloResult { config: self.config.clone(), modes, runs })
    }
}

fn aggregate(mode: Mode, n_t: usize, runs: &[RunMetrics]) -> ModeResult {
    let mine: Vec<&RunMetrics> = runs.iter().filter(|r| r.mode == mode).collect();
    let done: Vec<&&RunMetrics> = mine.iter().filter(|r| r.collapse.is_none()).collect();
    let mut target_rmse = Vec::with_capacity(n_t);
    let mut sensor_rmse = Vec::with_capacity(n_t);
    for t in 0..n_t {
        let sq: f64 = done.iter().map(|r| r.target_error[t].powi(2)).sum();
        target_rmse.push((sq / done.len() as f64).sqrt());
        let (sum, count) = done.iter().fold((0.0, 0usize), |(s, c), r| {
            (s + r.sensor_error[t].iter().map(|e| e * e).sum::<f64>(), c + r.sensor_error[t].len())
        });
        sensor_rmse.push((sum / count as f64).sqrt());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    ModeResult {
        mode,
        runs: done.len(),
        collapsed: mine.len() - done.len(),
        mean_target_rmse: mean(&target_rmse),
        mean_sensor_rmse: mean(&sensor_rmse),
        target_rmse,
        sensor_rmse,
        work: done.iter().map(|r| r.work).sum(),
    }
}

/// Builds a [`Simulation`] from `config` and runs every Monte-Carlo run.
pub fn run_monte_carlo(config: &ScenarioConfig, threads: Option<usize>) -> Result<MonteCarloResult> {
    Simulation::new(config.clone())?.run(threads)
}
