//! Noise densities for the IMU velocity and TOA ranging models, plus the
//! Gaussian-mixture fitting used to calibrate the NLOS component.

mod fit;
mod imu;
mod ranging;

pub use fit::{fit_gm, fit_gm_with, read_samples, write_samples, KMeansOptions};
pub use imu::{ImuModel, Velocity3};
pub use ranging::{obstacle_trapezoid_pdf, GmComponent, RangingNoiseModel};

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Probability that `N(mean, sigma^2)` falls in `(lo, hi)`.
///
/// Evaluated through `erfc` on the tail side so that differences of two CDF
/// values close to 0 or 1 keep their relative precision. Never negative.
pub fn normal_interval_prob(lo: f64, hi: f64, mean: f64, sigma: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let a = (lo - mean) / sigma * FRAC_1_SQRT_2;
    let b = (hi - mean) / sigma * FRAC_1_SQRT_2;
    let p = if a >= 0.0 {
        0.5 * (libm::erfc(a) - libm::erfc(b))
    } else if b <= 0.0 {
        0.5 * (libm::erfc(-b) - libm::erfc(-a))
    } else {
        0.5 * (libm::erf(b) - libm::erf(a))
    };
    p.max(0.0)
}

/// Gaussian CDF `Phi(x; mean, sigma^2)`.
pub fn normal_cdf(x: f64, mean: f64, sigma: f64) -> f64 {
    0.5 * libm::erfc(-(x - mean) / sigma * FRAC_1_SQRT_2)
}

pub fn normal_pdf(x: f64, mean: f64, sigma: f64) -> f64 {
    let z = (x - mean) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt())
}
