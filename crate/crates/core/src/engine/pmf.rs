use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CellId, CellMap, Position3};

/// A normalized probability mass function over the cells of a map.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Pmf {
    weights: Vec<f64>,
}

impl Pmf {
    /// Normalizes `weights`. Fails on negative or non-finite entries and on zero total mass.
    pub fn new(mut weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument("empty PMF".into()));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(Error::InvalidArgument(format!(
                "PMF weight {w} at cell {i} is negative or not finite"
            )));
        }
        if !normalize_in_place(&mut weights) {
            return Err(Error::InvalidArgument("PMF has zero total mass".into()));
        }
        Ok(Self { weights })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0; n])
    }

    pub fn delta(n: usize, cell: CellId) -> Result<Self> {
        if cell.0 >= n {
            return Err(Error::InvalidCell { id: cell.0, cells: n });
        }
        let mut w = vec![0.0; n];
        w[cell.0] = 1.0;
        Ok(Self { weights: w })
    }

    /// Isotropic Gaussian density evaluated at every cell center, then normalized.
    pub fn gaussian(map: &CellMap, mean: &Position3, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma {sigma} must be positive")));
        }
        // Log weights relative to the closest center so tiny sigmas stay representable.
        let logw: Vec<f64> = map
            .centers()
            .iter()
            .map(|c| {
                let d = c.distance(mean);
                -0.5 * d * d / (sigma * sigma)
            })
            .collect();
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::new(logw.iter().map(|l| (l - max).exp()).collect())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, cell: CellId) -> f64 {
        self.weights[cell.0]
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    /// Most probable cell, lowest id on ties.
    pub fn argmax(&self) -> CellId {
        let mut best = 0;
        for (i, &w) in self.weights.iter().enumerate() {
            if w > self.weights[best] {
                best = i;
            }
        }
        CellId(best)
    }

    pub fn total_variation(&self, other: &Pmf) -> f64 {
        0.5 * self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    pub(crate) fn from_normalized(weights: Vec<f64>) -> Self {
        Self { weights }
    }
}

impl<'de> Deserialize<'de> for Pmf {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = Vec::<f64>::deserialize(d)?;
        Pmf::new(w).map_err(serde::de::Error::custom)
    }
}

/// Scales `w` to unit sum; returns `false` (leaving `w` untouched) if the sum is zero.
pub(crate) fn normalize_in_place(w: &mut [f64]) -> bool {
    let s: f64 = w.iter().sum();
    if !(s > 0.0) || !s.is_finite() {
        return false;
    }
    for v in w.iter_mut() {
        *v /= s;
    }
    true
}

/// Cells whose normalized weight strictly exceeds `epsilon_m / N_c`.
pub fn active_cells(weights: &[f64], epsilon_m: f64) -> Vec<CellId> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Vec::new();
    }
    let threshold = epsilon_m / weights.len() as f64;
    weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w / total > threshold)
        .map(|(i, _)| CellId(i))
        .collect()
}

/// Belief-weighted mean of the `k` highest-belief cell centers.
///
/// `k = 1` gives the MAP cell center and `k = N_c` the MMSE estimate.
/// Ties in the top-k selection go to the lower cell id.
pub fn knn_estimate(weights: &[f64], map: &CellMap, k: usize) -> Result<Position3> {
    if weights.len() != map.len() {
        return Err(Error::InvalidArgument(format!(
            "belief has {} cells, map has {}",
            weights.len(),
            map.len()
        )));
    }
    if k == 0 || k > map.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must be in 1..={}",
            map.len()
        )));
    }
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let top = &order[..k];
    let mass: f64 = top.iter().map(|&i| weights[i]).sum();
    if !(mass > 0.0) {
        return Err(Error::InvalidArgument("belief has no mass".into()));
    }
    let centers = map.centers();
    let mut acc = [0.0; 3];
    for &i in top {
        let c = centers[i];
        let w = weights[i] / mass;
        acc[0] += w * c.x;
        acc[1] += w * c.y;
        acc[2] += w * c.z;
    }
    Ok(Position3::from(acc))
}
