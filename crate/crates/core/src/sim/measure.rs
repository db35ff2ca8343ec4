use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{GroundTruth, ScenarioConfig};
use crate::engine::{Range, SlotInput};
use crate::error::{Error, Result};
use crate::geometry::CellMap;
use crate::noise::GmComponent;

/// Parameters of the measurement generator. Unlike the estimator's models
/// these may be zero, which switches the corresponding noise off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementParams {
    pub ts: f64,
    pub sigma_u: f64,
    /// Cell size driving both quantization terms.
    pub cell_size: f64,
    pub sigma_w0: f64,
    pub p_nlos: f64,
    pub p_obs: f64,
    pub d_max: f64,
    pub d_th: f64,
    pub p_o: f64,
    pub d_o: f64,
}

impl MeasurementParams {
    pub fn from_config(c: &ScenarioConfig, cell_size: f64) -> Self {
        Self {
            ts: c.ts,
            sigma_u: c.sigma_u,
            cell_size,
            sigma_w0: c.sigma_w0,
            p_nlos: c.p_nlos,
            p_obs: c.p_obs,
            d_max: c.d_max,
            d_th: c.d_th,
            p_o: c.p_o,
            d_o: c.d_o,
        }
    }

    /// Exact velocities and exact ranges inside the sensing radius.
    pub fn noiseless(ts: f64, d_th: f64) -> Self {
        Self {
            ts,
            sigma_u: 0.0,
            cell_size: 0.0,
            sigma_w0: 0.0,
            p_nlos: 0.0,
            p_obs: 0.0,
            d_max: 0.0,
            d_th,
            p_o: 0.0,
            d_o: 0.0,
        }
    }
}

/// One slot per target cell: the IMU velocity (true displacement over Ts plus
/// uniform quantization and Gaussian noise per axis) and a range from every
/// sensor strictly within `d_th` of the target. A range is the true distance
/// plus Unif(0, D*sqrt(3)) quantization, a LOS / NLOS / obstacle error and,
/// with probability `p_o`, the outlier `d_o`; it is clamped at zero.
///
/// The random draws per slot are the same whatever the probabilities, so
/// configurations differing only in `p_o` see identical noise otherwise.
pub fn synthesize_measurements<R: Rng + ?Sized>(
    params: &MeasurementParams,
    truth: &GroundTruth,
    map: &CellMap,
    nlos_db: &[f64],
    rng: &mut R,
) -> Result<Vec<SlotInput>> {
    if params.p_nlos > 0.0 && nlos_db.is_empty() {
        return Err(Error::InvalidInput("NLOS probability is positive but the sample database is empty".into()));
    }
    map.check(truth.initial_cell)?;
    for &c in truth.target_cells.iter().chain(&truth.sensor_cells) {
        map.check(c)?;
    }
    let centers = map.centers();
    let q = params.cell_size * 3f64.sqrt();
    let p_los = 1.0 - params.p_nlos - params.p_obs;
    let mut prev = centers[truth.initial_cell.index()];
    let mut slots = Vec::with_capacity(truth.target_cells.len());
    for (i, &cell) in truth.target_cells.iter().enumerate() {
        let cur = centers[cell.index()];
        let disp = [cur.x - prev.x, cur.y - prev.y, cur.z - prev.z];
        let mut velocity = [0.0; 3];
        for (v, d) in velocity.iter_mut().zip(disp) {
            let quant = (2.0 * rng.random::<f64>() - 1.0) * params.cell_size / params.ts;
            let noise: f64 = rng.sample(StandardNormal);
            *v = d / params.ts + quant + params.sigma_u * noise;
        }
        let mut ranges = Vec::new();
        for (n, &z) in truth.sensor_cells.iter().enumerate() {
            let dist = cur.distance(&centers[z.index()]);
            if dist >= params.d_th {
                continue;
            }
            let quant = q * rng.random::<f64>();
            let branch: f64 = rng.random();
            let err = if branch < p_los {
                params.sigma_w0 * rng.sample::<f64, _>(StandardNormal)
            } else if branch < p_los + params.p_nlos {
                nlos_db[rng.random_range(0..nlos_db.len())]
            } else {
                params.d_max * rng.random::<f64>()
            };
            let outlier = if rng.random::<f64>() < params.p_o { params.d_o } else { 0.0 };
            ranges.push(Range { sensor: n, d: (dist + quant + err + outlier).max(0.0) });
        }
        slots.push(SlotInput { t: i + 1, velocity: Some(velocity), ranges });
        prev = cur;
    }
    Ok(slots)
}

/// Cap on draws per accepted sample before the mixture is declared unusable.
const MAX_REJECTIONS: usize = 10_000;

/// `n` samples from the mixture, redrawn until nonnegative.
pub fn synthesize_nlos_db<R: Rng + ?Sized>(gm: &[GmComponent], n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("database size must be at least 1".into()));
    }
    if gm.iter().any(|c| !(c.sigma > 0.0 && c.mean.is_finite() && c.weight >= 0.0)) {
        return Err(Error::InvalidModel("mixture components need finite means, positive sigmas, nonnegative weights".into()));
    }
    let pick = WeightedIndex::new(gm.iter().map(|c| c.weight))
        .map_err(|e| Error::InvalidModel(format!("mixture weights: {e}")))?;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut accepted = None;
        for _ in 0..MAX_REJECTIONS {
            let c = &gm[pick.sample(rng)];
            let s = c.mean + c.sigma * rng.sample::<f64, _>(StandardNormal);
            if s >= 0.0 {
                accepted = Some(s);
                break;
            }
        }
        out.push(accepted.ok_or_else(|| {
            Error::InvalidModel("mixture puts almost no mass on nonnegative values".into())
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CellId, Position3};
    use crate::noise::fit_gm;
    use crate::sim::{default_nlos_gm, rng_stream};

    fn line_map() -> CellMap {
        CellMap::with_uniform_extent((0..12).map(|i| Position3::new(5.0 * i as f64, 0.5, 0.0)).collect(), 5.0)
            .unwrap()
    }

    fn truth() -> GroundTruth {
        GroundTruth {
            initial_cell: CellId(0),
            target_cells: [2, 3, 5, 7, 6].map(CellId).to_vec(),
            sensor_cells: [0, 4, 11].map(CellId).to_vec(),
        }
    }

    #[test]
    fn noiseless_measurements_are_exact() {
        let map = line_map();
        let t = truth();
        let slots = synthesize_measurements(&MeasurementParams::noiseless(1.0, 30.0), &t, &map, &[], &mut rng_stream(1, 0))
            .unwrap();
        let mut prev = 0usize;
        for (slot, cell) in slots.iter().zip(&t.target_cells) {
            let v = slot.velocity.unwrap();
            assert_eq!(v[0], 5.0 * (cell.index() as f64 - prev as f64));
            assert_eq!((v[1], v[2]), (0.0, 0.0));
            for r in &slot.ranges {
                let exact = map.cell_distance(*cell, t.sensor_cells[r.sensor]).unwrap();
                assert_eq!(r.d, exact);
            }
            prev = cell.index();
        }
    }

    #[test]
    fn sensing_set_is_strictly_inside_radius() {
        let map = line_map();
        let t = truth();
        let params = MeasurementParams::from_config(&ScenarioConfig::default(), 5.0);
        let db = [1.0, 2.0];
        let slots = synthesize_measurements(&params, &t, &map, &db, &mut rng_stream(2, 0)).unwrap();
        for (slot, cell) in slots.iter().zip(&t.target_cells) {
            let got: Vec<usize> = slot.ranges.iter().map(|r| r.sensor).collect();
            let want: Vec<usize> = (0..3)
                .filter(|&n| map.cell_distance(*cell, t.sensor_cells[n]).unwrap() < 30.0)
                .collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn sure_outlier_shifts_every_range() {
        let map = line_map();
        let t = truth();
        let base = MeasurementParams::noiseless(1.0, 30.0);
        let shifted = MeasurementParams { p_o: 1.0, d_o: 10.0, ..base };
        let a = synthesize_measurements(&base, &t, &map, &[], &mut rng_stream(3, 0)).unwrap();
        let b = synthesize_measurements(&shifted, &t, &map, &[], &mut rng_stream(3, 0)).unwrap();
        for (sa, sb) in a.iter().zip(&b) {
            for (ra, rb) in sa.ranges.iter().zip(&sb.ranges) {
                assert!((rb.d - ra.d - 10.0).abs() < 1e-12);
            }
        }
        let none = MeasurementParams { p_o: 0.0, d_o: 10.0, ..base };
        assert_eq!(synthesize_measurements(&none, &t, &map, &[], &mut rng_stream(3, 0)).unwrap(), a);
    }

    #[test]
    fn empty_database_with_nlos_is_an_error() {
        let params = MeasurementParams::from_config(&ScenarioConfig::default(), 5.0);
        assert!(synthesize_measurements(&params, &truth(), &line_map(), &[], &mut rng_stream(4, 0)).is_err());
    }

    #[test]
    fn database_samples_are_nonnegative() {
        let gm = [GmComponent { weight: 1.0, mean: 5.0, sigma: 0.1 }];
        let db = synthesize_nlos_db(&gm, 5000, &mut rng_stream(5, 0)).unwrap();
        let mean = db.iter().sum::<f64>() / db.len() as f64;
        assert!((mean - 5.0).abs() < 3.0 * 0.1 / (5000f64).sqrt());
        let db = synthesize_nlos_db(&default_nlos_gm(), 1164, &mut rng_stream(6, 0)).unwrap();
        assert_eq!(db.len(), 1164);
        assert!(db.iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn negative_mixture_is_rejected() {
        let gm = [GmComponent { weight: 1.0, mean: -100.0, sigma: 1.0 }];
        assert!(synthesize_nlos_db(&gm, 3, &mut rng_stream(7, 0)).is_err());
        assert!(synthesize_nlos_db(&default_nlos_gm(), 0, &mut rng_stream(7, 0)).is_err());
    }

    #[test]
    fn refit_recovers_separated_means() {
        let gm = [
            GmComponent { weight: 0.5, mean: 2.0, sigma: 0.3 },
            GmComponent { weight: 0.3, mean: 10.0, sigma: 0.5 },
            GmComponent { weight: 0.2, mean: 20.0, sigma: 0.8 },
        ];
        let db = synthesize_nlos_db(&gm, 3000, &mut rng_stream(8, 0)).unwrap();
        let fit = fit_gm(&db, 3).unwrap();
        for (f, g) in fit.iter().zip(&gm) {
            assert!((f.mean - g.mean).abs() < 0.2, "{f:?} vs {g:?}");
            assert!((f.weight - g.weight).abs() < 0.05);
        }
    }
}
