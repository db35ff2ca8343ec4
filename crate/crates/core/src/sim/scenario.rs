use rand::seq::index;
use rand::Rng;

use super::GroundTruth;
use crate::engine::Pmf;
use crate::error::{Error, Result};
use crate::geometry::{CellId, CellMap, Position3};

/// A straight chain of `n_c` cells along x with `pitch` spacing. Each center
/// is displaced laterally (y and z) by up to `jitter` meters.
pub fn corridor_map<R: Rng + ?Sized>(
    n_c: usize,
    pitch: f64,
    jitter: f64,
    extent: f64,
    rng: &mut R,
) -> Result<CellMap> {
    if n_c == 0 {
        return Err(Error::InvalidArgument("a corridor needs at least one cell".into()));
    }
    if !(pitch > 0.0 && pitch.is_finite()) || !(jitter >= 0.0 && jitter.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "pitch {pitch} must be positive and jitter {jitter} nonnegative"
        )));
    }
    let centers = (0..n_c)
        .map(|i| {
            let y = jitter * rng.random_range(-1.0..=1.0);
            let z = jitter * rng.random_range(-1.0..=1.0);
            Position3::new(pitch * i as f64, y, z)
        })
        .collect();
    CellMap::with_uniform_extent(centers, extent)
}

fn check_mobility(n_c: usize, n_t: usize) -> Result<()> {
    if n_c == 0 {
        return Err(Error::InvalidConfig("empty map".into()));
    }
    let peak = 2 * (n_t / 2 + 1) - 1;
    let last = 2 * (n_c as i64 - 1 - n_t as i64) + 1;
    if peak > n_c - 1 || last < 0 {
        return Err(Error::InvalidConfig(format!(
            "{n_t} slots do not fit the forward/backward walk on {n_c} cells"
        )));
    }
    Ok(())
}

/// Index of the target cell at slot `t` (1-based) for offset `eta`: `2t + eta`
/// on the way out (t <= N_T/2 + 1), `2(N_c - 1 - t) + eta` on the way back,
/// clamped to the map.
pub fn mobility_index(n_c: usize, n_t: usize, t: usize, eta: i64) -> usize {
    let raw = if t <= n_t / 2 + 1 {
        2 * t as i64 + eta
    } else {
        2 * (n_c as i64 - 1 - t as i64) + eta
    };
    raw.clamp(0, n_c as i64 - 1) as usize
}

/// Track for the given per-slot offsets (`etas[t - 1]` is used at slot t).
pub fn track_from_etas(n_c: usize, n_t: usize, etas: &[i64]) -> Result<Vec<CellId>> {
    check_mobility(n_c, n_t)?;
    if etas.len() != n_t {
        return Err(Error::InvalidArgument(format!("{} offsets for {n_t} slots", etas.len())));
    }
    Ok((1..=n_t).map(|t| CellId(mobility_index(n_c, n_t, t, etas[t - 1]))).collect())
}

/// Target cells at slots 1..=n_t with offsets drawn uniformly from {-1, 0, 1}.
pub fn generate_track<R: Rng + ?Sized>(n_c: usize, n_t: usize, rng: &mut R) -> Result<Vec<CellId>> {
    let etas: Vec<i64> = (0..n_t).map(|_| rng.random_range(-1..=1)).collect();
    track_from_etas(n_c, n_t, &etas)
}

/// Places `n_s` sensors in distinct cells and builds their Gaussian priors
/// around the true centers.
pub fn deploy_sensors<R: Rng + ?Sized>(
    n_s: usize,
    map: &CellMap,
    sigma_s: f64,
    rng: &mut R,
) -> Result<(Vec<CellId>, Vec<Pmf>)> {
    if n_s > map.len() {
        return Err(Error::InvalidConfig(format!(
            "{n_s} sensors do not fit in {} cells",
            map.len()
        )));
    }
    let cells: Vec<CellId> = index::sample(rng, map.len(), n_s).into_iter().map(CellId).collect();
    let priors = cells
        .iter()
        .map(|&c| Pmf::gaussian(map, &map.centers()[c.index()], sigma_s))
        .collect::<Result<Vec<_>>>()?;
    Ok((cells, priors))
}

impl GroundTruth {
    pub fn target_center(&self, map: &CellMap, slot: usize) -> Position3 {
        map.centers()[self.target_cells[slot - 1].index()]
    }
}
