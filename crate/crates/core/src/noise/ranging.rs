use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{normal_interval_prob, normal_pdf};
use crate::error::{Error, Result};
use crate::geometry::{CellId, CellMap};

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// One Gaussian component of the NLOS (wall multipath) error mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmComponent {
    pub weight: f64,
    pub mean: f64,
    pub sigma: f64,
}

/// TOA ranging error model: LOS Gaussian, NLOS Gaussian mixture and a
/// uniform obstacle term, each convolved with `Unif(0, D*sqrt(3))`
/// quantization noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangingNoiseModel {
    pub p_los: f64,
    pub p_nlos: f64,
    pub p_obs: f64,
    pub sigma_w0: f64,
    pub gm: Vec<GmComponent>,
    pub d_max: f64,
    #[serde(rename = "D")]
    pub cell_size: f64,
}

impl RangingNoiseModel {
    /// Builds a model with `p_los = 1 - p_nlos - p_obs`.
    pub fn new(
        p_nlos: f64,
        p_obs: f64,
        sigma_w0: f64,
        gm: Vec<GmComponent>,
        d_max: f64,
        cell_size: f64,
    ) -> Result<Self> {
        let m = Self {
            p_los: 1.0 - p_nlos - p_obs,
            p_nlos,
            p_obs,
            sigma_w0,
            gm,
            d_max,
            cell_size,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [self.p_los, self.p_nlos, self.p_obs];
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidModel(format!(
                "branch probabilities must be non-negative, got {probs:?}"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel(format!(
                "p_los + p_nlos + p_obs = {total}, expected 1"
            )));
        }
        if !(self.sigma_w0 > 0.0 && self.sigma_w0.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "sigma_w0 must be positive, got {}",
                self.sigma_w0
            )));
        }
        if !(self.cell_size >= 0.0 && self.cell_size.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "D must be non-negative, got {}",
                self.cell_size
            )));
        }
        if !(self.d_max > self.cell_size * SQRT_3 && self.d_max.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "d_max = {} must exceed D*sqrt(3) = {}",
                self.d_max,
                self.cell_size * SQRT_3
            )));
        }
        if self.p_nlos > 0.0 && self.gm.is_empty() {
            return Err(Error::InvalidModel(
                "p_nlos > 0 requires at least one GM component".into(),
            ));
        }
        for (i, c) in self.gm.iter().enumerate() {
            if !(c.weight >= 0.0 && c.weight.is_finite()) {
                return Err(Error::InvalidModel(format!("GM component {i} has negative weight")));
            }
            if !(c.sigma > 0.0 && c.sigma.is_finite()) || !c.mean.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "GM component {i} needs finite mean and positive sigma"
                )));
            }
        }
        if !self.gm.is_empty() {
            let w: f64 = self.gm.iter().map(|c| c.weight).sum();
            if (w - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidModel(format!("GM weights sum to {w}, expected 1")));
            }
        }
        Ok(())
    }

    /// Width of the range quantization noise, `D * sqrt(3)`.
    #[inline]
    pub fn quantization_width(&self) -> f64 {
        self.cell_size * SQRT_3
    }

    /// Density of the measurement noise before quantization (LOS + NLOS + OBS mixture).
    pub fn measurement_noise_pdf(&self, w: f64) -> f64 {
        let los = self.p_los * normal_pdf(w, 0.0, self.sigma_w0);
        let nlos: f64 = self
            .gm
            .iter()
            .map(|c| c.weight * normal_pdf(w, c.mean, c.sigma))
            .sum();
        let obs = if (0.0..=self.d_max).contains(&w) {
            1.0 / self.d_max
        } else {
            0.0
        };
        los + self.p_nlos * nlos + self.p_obs * obs
    }

    /// Total ranging noise density: the measurement mixture convolved with
    /// `Unif(0, D*sqrt(3))`, in closed form.
    pub fn total_noise_pdf(&self, w: f64) -> f64 {
        let q = self.quantization_width();
        if q == 0.0 {
            return self.measurement_noise_pdf(w);
        }
        let lo = w - q;
        let los = normal_interval_prob(lo, w, 0.0, self.sigma_w0);
        let nlos: f64 = self
            .gm
            .iter()
            .map(|c| c.weight * normal_interval_prob(lo, w, c.mean, c.sigma))
            .sum();
        (self.p_los * los + self.p_nlos * nlos) / q
            + self.p_obs * trapezoid(q, self.d_max, w)
    }

    /// Likelihood of a bias-corrected distance `d` for a target in `x` and a
    /// sensor in `z`.
    pub fn likelihood(&self, map: &CellMap, d: f64, x: CellId, z: CellId) -> Result<f64> {
        if !d.is_finite() {
            return Err(Error::InvalidArgument(format!("distance {d} is not finite")));
        }
        Ok(self.total_noise_pdf(d - map.cell_distance(x, z)?))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("noise model serializes")
    }

    pub fn from_json_str(json: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(json).map_err(|e| Error::json("noise model", e))?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text)
            .map_err(|e| Error::json(path.display().to_string(), e))?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string() + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Density of `Unif(0, D*sqrt(3)) + Unif(0, d_max)`: a trapezoid rising on
/// `(0, D*sqrt(3))`, flat at `1/d_max`, and falling to zero at `D*sqrt(3) + d_max`.
pub fn obstacle_trapezoid_pdf(cell_size: f64, d_max: f64, w: f64) -> Result<f64> {
    let q = cell_size * SQRT_3;
    if !(q > 0.0 && d_max > q && d_max.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "obstacle density needs d_max > D*sqrt(3) > 0 (D = {cell_size}, d_max = {d_max})"
        )));
    }
    Ok(trapezoid(q, d_max, w))
}

#[inline]
fn trapezoid(q: f64, d_max: f64, w: f64) -> f64 {
    if w <= 0.0 || w >= q + d_max {
        0.0
    } else if w < q {
        w / (d_max * q)
    } else if w <= d_max {
        1.0 / d_max
    } else {
        (q + d_max - w) / (d_max * q)
    }
}
