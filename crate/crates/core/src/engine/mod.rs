//! Real-time belief propagation for simultaneous sensor localization and
//! target tracking over a discrete cell map.
//!
//! Each slot the engine
//! 1. turns every range into a sensor-to-target message by summing the
//!    likelihood against the sensor's previous belief,
//! 2. propagates the previous target belief through the IMU transition,
//! 3. multiplies everything into the new target belief,
//! 4. (SLAT mode only) sends each measuring sensor the product of all other
//!    incoming target messages through the same likelihood and updates its belief.
//!
//! Messages are never sent backward in time. All sums skip source cells
//! whose normalized belief is at most `epsilon_m / N_c`.

mod pmf;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use pmf::{active_cells, knn_estimate, Pmf};
use pmf::normalize_in_place;

use crate::error::{Error, Result, Variable};
use crate::geometry::{CellMap, Position3};
use crate::noise::{ImuModel, RangingNoiseModel, Velocity3};

/// Products whose largest entry falls below this are recomputed in log domain.
const UNDERFLOW_GUARD: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Joint target tracking and sensor localization.
    Slat,
    /// Target tracking with fixed sensor priors.
    #[serde(rename = "tracking")]
    TrackingOnly,
    /// Per-slot target localization: no IMU transition, fixed sensor priors.
    #[serde(rename = "localization")]
    LocalizationOnly,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Slat, Mode::TrackingOnly, Mode::LocalizationOnly];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Slat => "slat",
            Mode::TrackingOnly => "tracking",
            Mode::LocalizationOnly => "localization",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "slat" => Ok(Mode::Slat),
            "tracking" | "tracking-only" | "trackingonly" => Ok(Mode::TrackingOnly),
            "localization" | "localization-only" | "localizationonly" => {
                Ok(Mode::LocalizationOnly)
            }
            other => Err(Error::InvalidArgument(format!("unknown mode {other:?}"))),
        }
    }
}

/// The pair of measurement models the engine evaluates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Models {
    pub imu: ImuModel,
    pub ranging: RangingNoiseModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub sensor: usize,
    pub d: f64,
}

/// Everything measured in one slot. A missing velocity means the IMU did not
/// report; an empty range list means no sensor did.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SlotInput {
    #[serde(default)]
    pub t: usize,
    #[serde(default)]
    pub velocity: Option<Velocity3>,
    #[serde(default)]
    pub ranges: Vec<Range>,
}

impl SlotInput {
    pub fn from_json_line(line: &str) -> Result<Self> {
        serde_json::from_str(line).map_err(|e| Error::json("slot input", e))
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("slot input serializes")
    }
}

/// Exported beliefs at one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefSnapshot {
    pub t: usize,
    pub target: Vec<f64>,
    pub sensors: Vec<Vec<f64>>,
}

/// Work done by one [`SlatEngine::step`]: the number of (source cell,
/// destination cell) terms summed over all messages.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepReport {
    pub slot: usize,
    pub measured: usize,
    pub work: u64,
}

#[derive(Debug, Clone)]
pub struct SlatEngine {
    map: Arc<CellMap>,
    models: Models,
    target: Pmf,
    sensors: Vec<Pmf>,
    t: usize,
    mode: Mode,
    epsilon_m: f64,
    k: usize,
    work: u64,
}

/// Likelihood values for one range, filled lazily: `(x, z)` is only computed
/// once a message actually reads it.
struct LikelihoodTable<'a> {
    map: &'a CellMap,
    ranging: &'a RangingNoiseModel,
    d: f64,
    n: usize,
    values: Vec<f64>,
}

impl<'a> LikelihoodTable<'a> {
    fn new(map: &'a CellMap, ranging: &'a RangingNoiseModel, d: f64) -> Self {
        let n = map.len();
        Self {
            map,
            ranging,
            d,
            n,
            values: vec![f64::NAN; n * n],
        }
    }

    #[inline]
    fn get(&mut self, x: usize, z: usize) -> f64 {
        let slot = &mut self.values[x * self.n + z];
        if slot.is_nan() {
            *slot = self.ranging.total_noise_pdf(self.d - self.map.distance_raw(x, z));
        }
        *slot
    }
}

impl SlatEngine {
    pub fn new(
        map: Arc<CellMap>,
        models: Models,
        target_prior: Pmf,
        sensor_priors: Vec<Pmf>,
        mode: Mode,
        epsilon_m: f64,
        k: usize,
    ) -> Result<Self> {
        models.imu.validate()?;
        models.ranging.validate()?;
        let n = map.len();
        if target_prior.len() != n {
            return Err(Error::InvalidArgument(format!(
                "target prior has {} cells, map has {n}",
                target_prior.len()
            )));
        }
        if let Some((i, p)) = sensor_priors.iter().enumerate().find(|(_, p)| p.len() != n) {
            return Err(Error::InvalidArgument(format!(
                "sensor {i} prior has {} cells, map has {n}",
                p.len()
            )));
        }
        if !(0.0..1.0).contains(&epsilon_m) {
            return Err(Error::InvalidArgument(format!(
                "epsilon_m = {epsilon_m} must be in [0, 1)"
            )));
        }
        if k == 0 || k > n {
            return Err(Error::InvalidArgument(format!("k = {k} must be in 1..={n}")));
        }
        Ok(Self {
            map,
            models,
            target: target_prior,
            sensors: sensor_priors,
            t: 0,
            mode,
            epsilon_m,
            k,
            work: 0,
        })
    }

    pub fn map(&self) -> &CellMap {
        &self.map
    }

    pub fn models(&self) -> &Models {
        &self.models
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn epsilon_m(&self) -> f64 {
        self.epsilon_m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of slots processed so far.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn target_belief(&self) -> &Pmf {
        &self.target
    }

    pub fn sensor_beliefs(&self) -> &[Pmf] {
        &self.sensors
    }

    pub fn sensor_belief(&self, n: usize) -> Result<&Pmf> {
        self.sensors.get(n).ok_or_else(|| {
            Error::InvalidArgument(format!("sensor {n} out of range ({} sensors)", self.sensors.len()))
        })
    }

    pub fn num_sensors(&self) -> usize {
        self.sensors.len()
    }

    /// Summation terms accumulated over every step so far.
    pub fn total_work(&self) -> u64 {
        self.work
    }

    pub fn target_estimate(&self) -> Position3 {
        knn_estimate(self.target.weights(), &self.map, self.k).expect("beliefs always carry mass")
    }

    pub fn sensor_estimate(&self, n: usize) -> Result<Position3> {
        knn_estimate(self.sensor_belief(n)?.weights(), &self.map, self.k)
    }

    pub fn snapshot(&self) -> BeliefSnapshot {
        BeliefSnapshot {
            t: self.t,
            target: self.target.weights().to_vec(),
            sensors: self.sensors.iter().map(|p| p.weights().to_vec()).collect(),
        }
    }

    /// Sensor-to-target message for a range `d` from sensor `n`, normalized to
    /// unit sum (all zeros when no target cell is consistent with the range).
    pub fn sensor_to_target_message(&self, n: usize, d: f64) -> Result<Vec<f64>> {
        let prior = self.sensor_belief(n)?;
        if !d.is_finite() {
            return Err(Error::InvalidInput(format!("distance {d} is not finite")));
        }
        let mut table = LikelihoodTable::new(&self.map, &self.models.ranging, d);
        let (mut msg, _) = self.sensor_message(prior, &mut table);
        normalize_in_place(&mut msg);
        Ok(msg)
    }

    /// Target-to-target message for a measured velocity, normalized to unit sum.
    pub fn target_transition_message(&self, v: &Velocity3) -> Vec<f64> {
        let (mut msg, _) = self.transition_message(v);
        normalize_in_place(&mut msg);
        msg
    }

    fn sensor_message(&self, belief: &Pmf, table: &mut LikelihoodTable<'_>) -> (Vec<f64>, u64) {
        let n = self.map.len();
        let active = active_cells(belief.weights(), self.epsilon_m);
        let w = belief.weights();
        let mut msg = vec![0.0; n];
        for (x, m) in msg.iter_mut().enumerate() {
            let mut acc = 0.0;
            for z in &active {
                acc += table.get(x, z.0) * w[z.0];
            }
            *m = acc;
        }
        (msg, (n * active.len()) as u64)
    }

    fn transition_message(&self, v: &Velocity3) -> (Vec<f64>, u64) {
        let n = self.map.len();
        let active = active_cells(self.target.weights(), self.epsilon_m);
        let w = self.target.weights();
        let centers = self.map.centers();
        let imu = &self.models.imu;
        let mut msg = vec![0.0; n];
        for (x, m) in msg.iter_mut().enumerate() {
            let mut acc = 0.0;
            for prev in &active {
                acc += imu.dynamic_weight(v, &centers[x], &centers[prev.0]) * w[prev.0];
            }
            *m = acc;
        }
        (msg, (n * active.len()) as u64)
    }

    fn validate_input(&self, input: &SlotInput) -> Result<()> {
        if let Some(v) = &input.velocity {
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidInput(format!("velocity {v:?} is not finite")));
            }
        }
        let mut seen = vec![false; self.sensors.len()];
        for r in &input.ranges {
            if r.sensor >= self.sensors.len() {
                return Err(Error::InvalidInput(format!(
                    "sensor id {} out of range ({} sensors)",
                    r.sensor,
                    self.sensors.len()
                )));
            }
            if seen[r.sensor] {
                return Err(Error::InvalidInput(format!(
                    "sensor {} reported twice in one slot",
                    r.sensor
                )));
            }
            seen[r.sensor] = true;
            if !(r.d.is_finite() && r.d >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "sensor {} distance {} must be finite and non-negative",
                    r.sensor, r.d
                )));
            }
        }
        Ok(())
    }

    /// Advances all beliefs by one slot. On error the state is unchanged.
    pub fn step(&mut self, input: &SlotInput) -> Result<StepReport> {
        self.validate_input(input)?;
        let slot = self.t + 1;
        let n = self.map.len();
        let mut work = 0u64;

        let mut ranges = input.ranges.clone();
        ranges.sort_by_key(|r| r.sensor);

        let mut tables: Vec<LikelihoodTable<'_>> = ranges
            .iter()
            .map(|r| LikelihoodTable::new(&self.map, &self.models.ranging, r.d))
            .collect();

        let mut messages = Vec::with_capacity(ranges.len());
        for (r, table) in ranges.iter().zip(tables.iter_mut()) {
            let (mut msg, w) = self.sensor_message(&self.sensors[r.sensor], table);
            work += w;
            if !normalize_in_place(&mut msg) {
                return Err(Error::BeliefCollapse {
                    slot,
                    variable: Variable::Target,
                });
            }
            messages.push(msg);
        }

        let transition = match (self.mode, &input.velocity) {
            (Mode::LocalizationOnly, _) | (_, None) => vec![1.0; n],
            (_, Some(v)) => {
                let (mut msg, w) = self.transition_message(v);
                work += w;
                normalize_in_place(&mut msg);
                msg
            }
        };

        let mut factors: Vec<&[f64]> = Vec::with_capacity(messages.len() + 1);
        factors.push(&transition);
        factors.extend(messages.iter().map(Vec::as_slice));
        let target = product_normalized(&factors).ok_or(Error::BeliefCollapse {
            slot,
            variable: Variable::Target,
        })?;

        let mut new_sensors: Vec<(usize, Pmf)> = Vec::new();
        if self.mode == Mode::Slat && !ranges.is_empty() {
            let active = active_cells(&target, self.epsilon_m);
            for (i, (r, table)) in ranges.iter().zip(tables.iter_mut()).enumerate() {
                // Cavity: every factor of the target belief except this sensor's message.
                let others: Vec<&[f64]> = factors
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i + 1)
                    .map(|(_, f)| *f)
                    .collect();
                let cavity = product_normalized(&others).unwrap_or_else(|| vec![0.0; n]);

                let prior = self.sensors[r.sensor].weights();
                let mut belief = vec![0.0; n];
                for (z, b) in belief.iter_mut().enumerate() {
                    if prior[z] == 0.0 {
                        continue;
                    }
                    let mut acc = 0.0;
                    for x in &active {
                        acc += table.get(x.0, z) * cavity[x.0];
                    }
                    *b = prior[z] * acc;
                }
                work += (active.len() * n) as u64;
                let mut belief = rescale_or_log(belief, prior, |z| {
                    active.iter().map(|x| (table.get(x.0, z), cavity[x.0])).collect()
                });
                if !normalize_in_place(&mut belief) {
                    return Err(Error::BeliefCollapse {
                        slot,
                        variable: Variable::Sensor(r.sensor),
                    });
                }
                new_sensors.push((r.sensor, Pmf::from_normalized(belief)));
            }
        }

        self.target = Pmf::from_normalized(target);
        for (s, p) in new_sensors {
            self.sensors[s] = p;
        }
        self.t = slot;
        self.work += work;
        Ok(StepReport {
            slot,
            measured: ranges.len(),
            work,
        })
    }
}

/// Elementwise product of `factors`, normalized to unit sum. Falls back to
/// log-domain accumulation when the linear product underflows. `None` if the
/// product is identically zero.
fn product_normalized(factors: &[&[f64]]) -> Option<Vec<f64>> {
    let n = factors.first().map_or(0, |f| f.len());
    let mut out = vec![1.0; n];
    for f in factors {
        for (o, v) in out.iter_mut().zip(f.iter()) {
            *o *= v;
        }
    }
    let max = out.iter().copied().fold(0.0, f64::max);
    if max < UNDERFLOW_GUARD {
        let logs: Vec<f64> = (0..n)
            .map(|x| factors.iter().map(|f| f[x].ln()).sum::<f64>())
            .collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return None;
        }
        out = logs.iter().map(|l| (l - top).exp()).collect();
    }
    normalize_in_place(&mut out).then_some(out)
}

/// Sensor belief update with an underflow fallback: if every linear entry is
/// below the guard, recompute `log prior + log sum(terms)` per cell.
fn rescale_or_log<F>(linear: Vec<f64>, prior: &[f64], mut terms: F) -> Vec<f64>
where
    F: FnMut(usize) -> Vec<(f64, f64)>,
{
    let max = linear.iter().copied().fold(0.0, f64::max);
    if max >= UNDERFLOW_GUARD {
        return linear;
    }
    let logs: Vec<f64> = (0..linear.len())
        .map(|z| {
            if prior[z] == 0.0 {
                return f64::NEG_INFINITY;
            }
            let pairs = terms(z);
            let lt: Vec<f64> = pairs
                .iter()
                .filter(|(l, c)| *l > 0.0 && *c > 0.0)
                .map(|(l, c)| l.ln() + c.ln())
                .collect();
            let m = lt.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if m == f64::NEG_INFINITY {
                return m;
            }
            prior[z].ln() + m + lt.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
        })
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return vec![0.0; linear.len()];
    }
    logs.iter().map(|l| (l - top).exp()).collect()
}
