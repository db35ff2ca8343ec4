use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::Mode;
use crate::error::{Error, Result};

/// How a position estimate is scored against the true cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorMetric {
    /// Distance from the kNN estimate to the true cell center.
    #[default]
    Position,
    /// Distance from the center of the cell nearest the estimate to the true center.
    Cell,
}

/// Simulation parameters. Every field has a default, so a config file only
/// lists what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_c: usize,
    pub n_s: usize,
    pub n_t: usize,
    /// Sampling interval, seconds.
    pub ts: f64,
    /// Spread of the sensor position priors, meters.
    pub sigma_s: f64,
    pub p_nlos: f64,
    pub p_obs: f64,
    pub sigma_u: f64,
    pub sigma_w0: f64,
    /// Sensing radius, meters.
    pub d_th: f64,
    pub d_max: f64,
    /// Cell extent used for generated maps, and the default for map files without extents.
    #[serde(rename = "D")]
    pub cell_size: f64,
    pub k: usize,
    pub epsilon_m: f64,
    pub n_mc: usize,
    pub seed: u64,
    pub modes: Vec<Mode>,
    /// Outlier probability.
    pub p_o: f64,
    /// Outlier magnitude, meters.
    pub d_o: f64,
    /// Number of mixture components fitted to the NLOS database.
    pub n_m: usize,
    pub pitch: f64,
    pub jitter: f64,
    pub nlos_db_size: usize,
    pub error_metric: ErrorMetric,
    pub map_path: Option<PathBuf>,
    pub nlos_db_path: Option<PathBuf>,
    /// A fitted ranging model whose mixture replaces fitting the database.
    pub noise_model_path: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_c: 44,
            n_s: 25,
            n_t: 40,
            ts: 1.0,
            sigma_s: 6.0,
            p_nlos: 0.17,
            p_obs: 0.03,
            sigma_u: 0.5,
            sigma_w0: 1.0,
            d_th: 30.0,
            d_max: 30.0,
            cell_size: 5.0,
            k: 2,
            epsilon_m: 0.05,
            n_mc: 100,
            seed: 0,
            modes: Mode::ALL.to_vec(),
            p_o: 0.0,
            d_o: 0.0,
            n_m: 5,
            pitch: 5.0,
            jitter: 1.0,
            nlos_db_size: 1164,
            error_metric: ErrorMetric::Position,
            map_path: None,
            nlos_db_path: None,
            noise_model_path: None,
        }
    }
}

impl ScenarioConfig {
    pub fn from_json_str(json: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(json).map_err(|e| Error::json("scenario config", e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file. Relative paths inside it are taken relative to the file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json_str(&text)?;
        if let Some(dir) = path.parent() {
            for p in [&mut cfg.map_path, &mut cfg.nlos_db_path, &mut cfg.noise_model_path]
                .into_iter()
                .flatten()
            {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let prob = |name: &str, p: f64| -> Result<()> {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} = {p} is not a probability")))
            }
        };
        let positive = |name: &str, v: f64| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} = {v} must be positive")))
            }
        };
        if self.n_c == 0 {
            return bad("n_c must be at least 1".into());
        }
        if self.n_t == 0 {
            return bad("n_t must be at least 1".into());
        }
        if self.n_s > self.n_c {
            return bad(format!("n_s = {} exceeds n_c = {}", self.n_s, self.n_c));
        }
        if self.n_mc == 0 {
            return bad("n_mc must be at least 1".into());
        }
        positive("ts", self.ts)?;
        positive("sigma_s", self.sigma_s)?;
        positive("sigma_u", self.sigma_u)?;
        positive("sigma_w0", self.sigma_w0)?;
        positive("d_th", self.d_th)?;
        positive("pitch", self.pitch)?;
        prob("p_nlos", self.p_nlos)?;
        prob("p_obs", self.p_obs)?;
        prob("p_o", self.p_o)?;
        if self.p_nlos + self.p_obs > 1.0 + 1e-12 {
            return bad("p_nlos + p_obs exceeds 1".into());
        }
        if !(self.cell_size >= 0.0 && self.cell_size.is_finite()) {
            return bad(format!("D = {} must be nonnegative", self.cell_size));
        }
        if !(self.d_max > self.cell_size * 3f64.sqrt() && self.d_max.is_finite()) {
            return bad(format!("d_max = {} must exceed D*sqrt(3)", self.d_max));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return bad(format!("jitter = {} must be nonnegative", self.jitter));
        }
        if !self.d_o.is_finite() {
            return bad("d_o must be finite".into());
        }
        if self.k == 0 || self.k > self.n_c {
            return bad(format!("k = {} must be in 1..={}", self.k, self.n_c));
        }
        if !(0.0..1.0).contains(&self.epsilon_m) {
            return bad(format!("epsilon_m = {} must be in [0, 1)", self.epsilon_m));
        }
        if self.n_m == 0 {
            return bad("n_m must be at least 1".into());
        }
        if self.nlos_db_path.is_none() && self.nlos_db_size < self.n_m {
            return bad("nlos_db_size must be at least n_m".into());
        }
        if self.modes.is_empty() {
            return bad("no modes requested".into());
        }
        let unique: HashSet<_> = self.modes.iter().collect();
        if unique.len() != self.modes.len() {
            return bad("modes contain duplicates".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_reference_setup() {
        let c = ScenarioConfig::default();
        assert_eq!((c.n_c, c.n_s, c.n_t, c.n_mc, c.k), (44, 25, 40, 100, 2));
        assert_eq!((c.p_nlos, c.p_obs, c.sigma_u, c.sigma_w0), (0.17, 0.03, 0.5, 1.0));
        assert_eq!((c.d_th, c.d_max, c.cell_size, c.epsilon_m, c.sigma_s), (30.0, 30.0, 5.0, 0.05, 6.0));
        c.validate().unwrap();
    }

    #[test]
    fn partial_json_and_round_trip() {
        let c = ScenarioConfig::from_json_str(r#"{"n_c": 24, "n_s": 14, "D": 4, "modes": ["slat"]}"#).unwrap();
        assert_eq!(c.n_c, 24);
        assert_eq!(c.cell_size, 4.0);
        assert_eq!(c.modes, vec![Mode::Slat]);
        assert_eq!(ScenarioConfig::from_json_str(&c.to_json_string()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_values() {
        for json in [
            r#"{"n_mc": 0}"#,
            r#"{"p_nlos": 1.5}"#,
            r#"{"d_th": 0}"#,
            r#"{"n_s": 50}"#,
            r#"{"epsilon_m": 1.0}"#,
            r#"{"d_max": 5}"#,
            r#"{"modes": ["slat", "slat"]}"#,
            r#"{"unknown_field": 1}"#,
        ] {
            assert!(ScenarioConfig::from_json_str(json).is_err(), "{json}");
        }
    }

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cfg.json");
        std::fs::write(&p, r#"{"map_path": "map.json"}"#).unwrap();
        let c = ScenarioConfig::load(&p).unwrap();
        assert_eq!(c.map_path.unwrap(), dir.path().join("map.json"));
    }
}
