//! Scenario simulator: corridor maps, sensor deployment, the forward/backward
//! mobility model, synthetic IMU and range measurements, and a Monte-Carlo
//! harness with RMSE and CDF aggregation.

mod config;
mod measure;
mod monte_carlo;
mod output;
mod scenario;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::CellId;
use crate::noise::GmComponent;

pub use config::{ErrorMetric, ScenarioConfig};
pub use measure::{synthesize_measurements, synthesize_nlos_db, MeasurementParams};
pub use monte_carlo::{run_monte_carlo, ModeResult, MonteCarloResult, RunMetrics, Scenario, Simulation};
pub use output::{cdf_points, write_outputs, ModeSummary, Summary};
pub use scenario::{corridor_map, deploy_sensors, generate_track, mobility_index, track_from_etas};

/// Where the target and the sensors really are.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Cell of the target at slot 0 (the prior is a delta here).
    pub initial_cell: CellId,
    /// Target cell at slots 1..=N_T.
    pub target_cells: Vec<CellId>,
    pub sensor_cells: Vec<CellId>,
}

/// NLOS error mixture used to synthesize a sample database when none is given.
pub fn default_nlos_gm() -> Vec<GmComponent> {
    [(0.3, 1.5, 0.6), (0.25, 4.0, 0.8), (0.2, 7.0, 1.0), (0.15, 11.0, 1.5), (0.1, 16.0, 2.0)]
        .into_iter()
        .map(|(weight, mean, sigma)| GmComponent { weight, mean, sigma })
        .collect()
}

/// Stream ids reserved for the shared artifacts; runs use their index.
const MAP_STREAM: u64 = u64::MAX;
const NLOS_STREAM: u64 = u64::MAX - 1;

/// ChaCha8 keyed by `seed`, on an independent stream per `stream` id.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
