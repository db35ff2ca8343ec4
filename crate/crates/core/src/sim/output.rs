use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MonteCarloResult;
use crate::engine::Mode;
use crate::error::{Error, Result};

/// Machine-readable digest written as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub n_mc: usize,
    pub n_t: usize,
    pub modes: Vec<ModeSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: Mode,
    pub runs: usize,
    pub collapsed: usize,
    pub mean_target_rmse: f64,
    pub mean_sensor_rmse: f64,
    pub first_sensor_rmse: f64,
    pub final_sensor_rmse: f64,
    pub work: u64,
}

impl Summary {
    pub fn new(res: &MonteCarloResult) -> Self {
        Self {
            seed: res.config.seed,
            n_mc: res.config.n_mc,
            n_t: res.config.n_t,
            modes: res
                .modes
                .iter()
                .map(|m| ModeSummary {
                    mode: m.mode,
                    runs: m.runs,
                    collapsed: m.collapsed,
                    mean_target_rmse: m.mean_target_rmse,
                    mean_sensor_rmse: m.mean_sensor_rmse,
                    first_sensor_rmse: m.sensor_rmse.first().copied().unwrap_or(f64::NAN),
                    final_sensor_rmse: m.sensor_rmse.last().copied().unwrap_or(f64::NAN),
                    work: m.work,
                })
                .collect(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    /// Fixed-width table, one row per mode.
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<13} {:>5} {:>9} {:>12} {:>12} {:>12} {:>12} {:>14}\n",
            "mode", "runs", "collapsed", "target_rmse", "sensor_rmse", "sensor_first", "sensor_final", "work"
        );
        for m in &self.modes {
            let _ = writeln!(
                s,
                "{:<13} {:>5} {:>9} {:>12.4} {:>12.4} {:>12.4} {:>12.4} {:>14}",
                m.mode.name(),
                m.runs,
                m.collapsed,
                m.mean_target_rmse,
                m.mean_sensor_rmse,
                m.first_sensor_rmse,
                m.final_sensor_rmse,
                m.work
            );
        }
        s
    }
}

/// Empirical CDF steps of `errors`: each distinct value with the fraction of
/// samples at or below it.
pub fn cdf_points(errors: &[f64]) -> Vec<(f64, f64)> {
    let mut v = errors.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, e) in v.iter().enumerate() {
        let p = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *e => last.1 = p,
            _ => out.push((*e, p)),
        }
    }
    out
}

fn write(dir: &Path, name: &str, body: &str) -> Result<()> {
    let p = dir.join(name);
    std::fs::write(&p, body).map_err(|e| Error::io(p, e))
}

/// Writes `rmse_time.csv`, `cdf.csv`, `runs.jsonl` and `summary.json` into `dir`.
pub fn write_outputs(res: &MonteCarloResult, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut rmse = String::from("slot,mode,target_rmse,sensor_rmse\n");
    for m in &res.modes {
        for (t, (a, b)) in m.target_rmse.iter().zip(&m.sensor_rmse).enumerate() {
            let _ = writeln!(rmse, "{},{},{a},{b}", t + 1, m.mode);
        }
    }
    write(dir, "rmse_time.csv", &rmse)?;

    let mut cdf = String::from("mode,variable,error,cum_prob\n");
    for m in &res.modes {
        let done = res.runs.iter().filter(|r| r.mode == m.mode && r.collapse.is_none());
        let (mut target, mut sensor) = (Vec::new(), Vec::new());
        for r in done {
            target.extend(&r.target_error);
            sensor.extend(r.sensor_error.iter().flatten());
        }
        for (var, errs) in [("target", &target), ("sensor", &sensor)] {
            for (e, p) in cdf_points(errs) {
                let _ = writeln!(cdf, "{},{var},{e},{p}", m.mode);
            }
        }
    }
    write(dir, "cdf.csv", &cdf)?;

    let mut runs = String::new();
    for r in &res.runs {
        runs.push_str(&serde_json::to_string(r).map_err(|e| Error::json("run metrics", e))?);
        runs.push('\n');
    }
    write(dir, "runs.jsonl", &runs)?;

    let summary = serde_json::to_string_pretty(&Summary::new(res)).map_err(|e| Error::json("summary", e))?;
    write(dir, "summary.json", &(summary + "\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_merges_ties_and_ends_at_one() {
        let pts = cdf_points(&[2.0, 0.0, 2.0, 1.0]);
        assert_eq!(pts, vec![(0.0, 0.25), (1.0, 0.5), (2.0, 1.0)]);
        assert!(cdf_points(&[]).is_empty());
    }
}
