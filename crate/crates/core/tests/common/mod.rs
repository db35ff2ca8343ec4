//! Independent reference computations shared by the integration suites.
//!
//! Nothing here calls into the message-passing code: densities are integrated
//! by Gauss-Legendre quadrature and beliefs are computed by a plain forward
//! filter or full enumeration of the joint distribution.

#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slatbp::engine::{Range, SlotInput};
use slatbp::noise::GmComponent;
use slatbp::{CellMap, ImuModel, Models, Position3, RangingNoiseModel};

/// Gauss-Legendre nodes and weights on [-1, 1] (Newton iteration on P_n).
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Composite Gauss-Legendre over [a, b], with panel edges forced at `breaks`
/// (points where the integrand may be discontinuous).
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, max_panel: f64, breaks: &[f64]) -> f64 {
    let rule = gauss_legendre(8);
    let mut edges = vec![a, b];
    edges.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    edges.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for seg in edges.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        let panels = ((hi - lo) / max_panel).ceil().max(1.0) as usize;
        let h = (hi - lo) / panels as f64;
        for p in 0..panels {
            let mid = lo + (p as f64 + 0.5) * h;
            for &(x, w) in &rule {
                total += 0.5 * h * w * f(mid + 0.5 * h * x);
            }
        }
    }
    total
}

fn gauss(x: f64, mean: f64, sigma: f64) -> f64 {
    let z = (x - mean) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt())
}

/// Measurement-noise mixture written out from its definition.
pub fn mixture_pdf(m: &RangingNoiseModel, w: f64) -> f64 {
    let nlos: f64 = m.gm.iter().map(|c| c.weight * gauss(w, c.mean, c.sigma)).sum();
    let obs = if (0.0..=m.d_max).contains(&w) { 1.0 / m.d_max } else { 0.0 };
    m.p_los * gauss(w, 0.0, m.sigma_w0) + m.p_nlos * nlos + m.p_obs * obs
}

/// `(mixture * Unif(0, D sqrt 3))(w)` by quadrature.
pub fn ranging_convolution(m: &RangingNoiseModel, w: f64) -> f64 {
    let q = m.cell_size * 3f64.sqrt();
    let breaks = [w, w - m.d_max];
    integrate(|s| mixture_pdf(m, w - s), 0.0, q, 0.05, &breaks) / q
}

/// `(N(0, sigma^2) * Unif(-a, a))(u)` by quadrature.
pub fn imu_convolution(sigma: f64, half_width: f64, u: f64) -> f64 {
    integrate(|s| gauss(u - s, 0.0, sigma), -half_width, half_width, 0.05, &[]) / (2.0 * half_width)
}

pub fn table_gm() -> Vec<GmComponent> {
    vec![
        GmComponent { weight: 0.3, mean: 1.5, sigma: 0.6 },
        GmComponent { weight: 0.25, mean: 4.0, sigma: 0.8 },
        GmComponent { weight: 0.2, mean: 7.0, sigma: 1.0 },
        GmComponent { weight: 0.15, mean: 11.0, sigma: 1.5 },
        GmComponent { weight: 0.1, mean: 16.0, sigma: 2.0 },
    ]
}

pub fn table_ranging() -> RangingNoiseModel {
    RangingNoiseModel::new(0.17, 0.03, 1.0, table_gm(), 30.0, 5.0).unwrap()
}

pub fn table_models() -> Models {
    Models {
        imu: ImuModel::new(0.5, 5.0, 1.0).unwrap(),
        ranging: table_ranging(),
    }
}

/// A random small problem: map, true cells, and consistent measurements.
pub struct Instance {
    pub map: Arc<CellMap>,
    pub target_cells: Vec<usize>,
    pub sensor_cells: Vec<usize>,
    pub slots: Vec<SlotInput>,
}

pub fn random_instance(rng: &mut ChaCha8Rng, max_cells: usize, max_sensors: usize, max_slots: usize) -> Instance {
    let n_c = rng.random_range(2..=max_cells);
    let n_s = rng.random_range(1..=max_sensors);
    let n_t = rng.random_range(1..=max_slots);
    let centers: Vec<Position3> = (0..n_c)
        .map(|_| {
            Position3::new(
                rng.random_range(0.0..30.0),
                rng.random_range(0.0..5.0),
                rng.random_range(0.0..5.0),
            )
        })
        .collect();
    let map = Arc::new(CellMap::with_uniform_extent(centers, 5.0).unwrap());
    let sensor_cells: Vec<usize> = (0..n_s).map(|_| rng.random_range(0..n_c)).collect();
    let mut target_cells = vec![0usize];
    let mut slots = Vec::new();
    for t in 1..=n_t {
        let prev = *target_cells.last().unwrap();
        let cur = rng.random_range(0..n_c);
        target_cells.push(cur);
        let (a, b) = (map.centers()[prev], map.centers()[cur]);
        let velocity = [
            b.x - a.x + rng.random_range(-1.0..1.0),
            b.y - a.y + rng.random_range(-1.0..1.0),
            b.z - a.z + rng.random_range(-1.0..1.0),
        ];
        let mut ranges = Vec::new();
        for (s, &z) in sensor_cells.iter().enumerate() {
            if rng.random_bool(0.25) {
                continue;
            }
            let dist = map.centers()[cur].distance(&map.centers()[z]);
            let d = (dist + rng.random_range(0.0..8.0) + rng.random_range(-1.0..1.0)).max(0.0);
            ranges.push(Range { sensor: s, d });
        }
        slots.push(SlotInput { t, velocity: Some(velocity), ranges });
    }
    Instance { map, target_cells, sensor_cells, slots }
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Forward filter of the hidden Markov chain obtained when every sensor
/// position is known exactly. Returns the target filtering distribution per slot.
pub fn hmm_forward(
    map: &CellMap,
    models: &Models,
    prior: &[f64],
    sensor_cells: &[usize],
    slots: &[SlotInput],
) -> Vec<Vec<f64>> {
    let n = map.len();
    let c = map.centers();
    let mut alpha = prior.to_vec();
    let mut out = Vec::new();
    for slot in slots {
        let mut next = vec![0.0; n];
        for x in 0..n {
            let predicted: f64 = match &slot.velocity {
                Some(v) => (0..n)
                    .map(|xp| {
                        let disp = [c[x].x - c[xp].x, c[x].y - c[xp].y, c[x].z - c[xp].z];
                        let w: f64 = (0..3)
                            .map(|k| models.imu.total_noise_pdf(v[k] - disp[k] / models.imu.ts))
                            .product();
                        w * alpha[xp]
                    })
                    .sum(),
                None => 1.0,
            };
            let evidence: f64 = slot
                .ranges
                .iter()
                .map(|r| {
                    let dist = c[x].distance(&c[sensor_cells[r.sensor]]);
                    models.ranging.total_noise_pdf(r.d - dist)
                })
                .product();
            next[x] = predicted * evidence;
        }
        alpha = normalized(next);
        out.push(alpha.clone());
    }
    out
}

/// Exact one-slot marginals by enumerating every joint assignment of
/// (x_0, x_1, z_1..z_Ns). Returns (target marginal, sensor marginals).
pub fn brute_force_one_slot(
    map: &CellMap,
    models: &Models,
    target_prior: &[f64],
    sensor_priors: &[Vec<f64>],
    slot: &SlotInput,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = map.len();
    let ns = sensor_priors.len();
    let c = map.centers();
    let mut target = vec![0.0; n];
    let mut sensors = vec![vec![0.0; n]; ns];
    let total_assignments = n.pow(ns as u32);
    for x0 in 0..n {
        for x1 in 0..n {
            let trans = match &slot.velocity {
                Some(v) => models.imu.dynamic_weight(v, &c[x1], &c[x0]),
                None => 1.0,
            };
            let base = target_prior[x0] * trans;
            if base == 0.0 {
                continue;
            }
            for code in 0..total_assignments {
                let mut zs = Vec::with_capacity(ns);
                let mut rem = code;
                for _ in 0..ns {
                    zs.push(rem % n);
                    rem /= n;
                }
                let mut p = base;
                for (s, &z) in zs.iter().enumerate() {
                    p *= sensor_priors[s][z];
                }
                for r in &slot.ranges {
                    let dist = c[x1].distance(&c[zs[r.sensor]]);
                    p *= models.ranging.total_noise_pdf(r.d - dist);
                }
                target[x1] += p;
                for (s, &z) in zs.iter().enumerate() {
                    sensors[s][z] += p;
                }
            }
        }
    }
    (normalized(target), sensors.into_iter().map(normalized).collect())
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
