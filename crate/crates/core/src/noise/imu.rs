use serde::{Deserialize, Serialize};

use super::{normal_interval_prob, normal_pdf};
use crate::error::{Error, Result};
use crate::geometry::Position3;

/// Velocity reported by the IMU, m/s per axis.
pub type Velocity3 = [f64; 3];

/// IMU velocity model: Gaussian measurement noise plus uniform quantization
/// noise of half-width `D / Ts` caused by reporting positions as cell centers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuModel {
    pub sigma_u: f64,
    #[serde(rename = "D")]
    pub cell_size: f64,
    #[serde(rename = "Ts")]
    pub ts: f64,
}

impl ImuModel {
    pub fn new(sigma_u: f64, cell_size: f64, ts: f64) -> Result<Self> {
        let m = Self {
            sigma_u,
            cell_size,
            ts,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_u > 0.0 && self.sigma_u.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "sigma_u must be positive, got {}",
                self.sigma_u
            )));
        }
        if !(self.cell_size >= 0.0 && self.cell_size.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "D must be non-negative, got {}",
                self.cell_size
            )));
        }
        if !(self.ts > 0.0 && self.ts.is_finite()) {
            return Err(Error::InvalidModel(format!("Ts must be positive, got {}", self.ts)));
        }
        Ok(())
    }

    /// Total IMU noise density up to a constant: `Phi(u + D/Ts) - Phi(u - D/Ts)`.
    ///
    /// Integrates to `2 D / Ts`. With `D = 0` the quantization term vanishes
    /// and the Gaussian density itself is returned.
    pub fn total_noise_pdf(&self, u: f64) -> f64 {
        // Evaluated on |u| so that the symmetry is exact in floating point.
        let u = u.abs();
        let half_width = self.cell_size / self.ts;
        if half_width == 0.0 {
            return normal_pdf(u, 0.0, self.sigma_u);
        }
        normal_interval_prob(u - half_width, u + half_width, 0.0, self.sigma_u)
    }

    /// Unnormalized transition weight `p(v_t, x_t | x_{t-1})`, the product of
    /// per-axis noise densities at the velocity residuals.
    pub fn dynamic_weight(&self, v: &Velocity3, x_t: &Position3, x_prev: &Position3) -> f64 {
        let disp = [x_t.x - x_prev.x, x_t.y - x_prev.y, x_t.z - x_prev.z];
        (0..3)
            .map(|k| self.total_noise_pdf(v[k] - disp[k] / self.ts))
            .product()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_model() -> ImuModel {
        ImuModel::new(0.5, 5.0, 1.0).unwrap()
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(ImuModel::new(0.0, 5.0, 1.0).is_err());
        assert!(ImuModel::new(0.5, -1.0, 1.0).is_err());
        assert!(ImuModel::new(0.5, 5.0, 0.0).is_err());
        assert!(ImuModel::new(0.5, 0.0, 1.0).is_ok());
    }

    #[test]
    fn saturates_near_one_at_zero() {
        // Phi(10 sigma) - Phi(-10 sigma).
        let p = paper_model().total_noise_pdf(0.0);
        assert!((p - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exactly_symmetric() {
        let m = paper_model();
        for &u in &[0.1, 1.0, 4.9, 5.0, 5.3, 7.0, 12.0, 40.0] {
            assert_eq!(m.total_noise_pdf(u), m.total_noise_pdf(-u));
        }
    }

    #[test]
    fn zero_residual_maximizes_dynamic_weight() {
        let m = paper_model();
        let prev = Position3::new(0.0, 0.0, 0.0);
        let next = Position3::new(10.0, 1.0, 0.0);
        let v = [10.0, 1.0, 0.0];
        let peak = m.dynamic_weight(&v, &next, &prev);
        assert!((peak - m.total_noise_pdf(0.0).powi(3)).abs() < 1e-15);
        for dx in [-12.0, -6.0, -1.0, 1.0, 6.0, 12.0] {
            let other = Position3::new(10.0 + dx, 1.0, 0.0);
            assert!(m.dynamic_weight(&v, &other, &prev) <= peak);
        }
    }

    #[test]
    fn residual_sign_does_not_matter() {
        let m = paper_model();
        let o = Position3::default();
        let a = m.dynamic_weight(&[6.2, 0.0, 0.0], &o, &o);
        let b = m.dynamic_weight(&[-6.2, 0.0, 0.0], &o, &o);
        assert_eq!(a, b);
    }

    #[test]
    fn large_residual_is_negligible() {
        // At u = 20 the interval (15, 25) lies 30 sigma out; |p| < 1e-12 * peak.
        let m = paper_model();
        let o = Position3::default();
        let w = m.dynamic_weight(&[20.0, 0.0, 0.0], &o, &o);
        let peak = m.dynamic_weight(&[0.0, 0.0, 0.0], &o, &o);
        assert!(w < 1e-12 * peak);
    }
}
