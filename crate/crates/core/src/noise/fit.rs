use std::io::Write;
use std::path::Path;

use super::GmComponent;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct KMeansOptions {
    pub max_iterations: usize,
    /// Relative change of the within-cluster sum of squares that counts as converged.
    pub tolerance: f64,
    /// Lower bound on every fitted component sigma, meters.
    pub sigma_floor: f64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-6,
            sigma_floor: 0.05,
        }
    }
}

/// Fits an `n_components` Gaussian mixture to 1-D samples with k-means.
pub fn fit_gm(samples: &[f64], n_components: usize) -> Result<Vec<GmComponent>> {
    fit_gm_with(samples, n_components, KMeansOptions::default())
}

/// k-means with farthest-point seeding. Each cluster becomes one component:
/// its sample fraction, mean and (floored) sample standard deviation.
/// Components are returned sorted by mean.
pub fn fit_gm_with(
    samples: &[f64],
    n_components: usize,
    opts: KMeansOptions,
) -> Result<Vec<GmComponent>> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples to fit".into()));
    }
    if let Some(bad) = samples.iter().find(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument(format!("sample {bad} is not finite")));
    }
    if n_components == 0 || n_components > samples.len() {
        return Err(Error::InvalidArgument(format!(
            "n_components = {n_components} must be in 1..={}",
            samples.len()
        )));
    }
    let mut distinct = samples.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < n_components {
        return Err(Error::InvalidArgument(format!(
            "{n_components} components requested but only {} distinct sample values",
            distinct.len()
        )));
    }

    let mut centers = seed_centers(samples, n_components);
    let mut labels = vec![0usize; samples.len()];
    let mut prev_cost = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        let cost = assign(samples, &centers, &mut labels);
        update_centers(samples, &mut labels, &mut centers);
        if cost == 0.0 || (prev_cost - cost).abs() <= opts.tolerance * prev_cost {
            break;
        }
        prev_cost = cost;
    }
    assign(samples, &centers, &mut labels);

    let n = samples.len() as f64;
    let mut out = Vec::with_capacity(n_components);
    for k in 0..n_components {
        let members: Vec<f64> = samples
            .iter()
            .zip(&labels)
            .filter(|(_, &l)| l == k)
            .map(|(&s, _)| s)
            .collect();
        let count = members.len() as f64;
        let mean = members.iter().sum::<f64>() / count;
        let sd = if members.len() > 1 {
            (members.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (count - 1.0)).sqrt()
        } else {
            0.0
        };
        out.push(GmComponent {
            weight: count / n,
            mean,
            sigma: sd.max(opts.sigma_floor),
        });
    }
    out.sort_by(|a, b| a.mean.total_cmp(&b.mean));
    Ok(out)
}

fn seed_centers(samples: &[f64], k: usize) -> Vec<f64> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut centers = vec![sorted[sorted.len() / 2]];
    let mut nearest: Vec<f64> = samples.iter().map(|s| (s - centers[0]).abs()).collect();
    while centers.len() < k {
        let (idx, _) = nearest
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, &d)| if d > best.1 { (i, d) } else { best });
        let c = samples[idx];
        centers.push(c);
        for (d, s) in nearest.iter_mut().zip(samples) {
            *d = d.min((s - c).abs());
        }
    }
    centers
}

fn assign(samples: &[f64], centers: &[f64], labels: &mut [usize]) -> f64 {
    let mut cost = 0.0;
    for (s, l) in samples.iter().zip(labels.iter_mut()) {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, c) in centers.iter().enumerate() {
            let d = (s - c) * (s - c);
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        *l = best;
        cost += best_d;
    }
    cost
}

fn update_centers(samples: &[f64], labels: &mut [usize], centers: &mut [f64]) {
    let k = centers.len();
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (s, &l) in samples.iter().zip(labels.iter()) {
        sums[l] += s;
        counts[l] += 1;
    }
    for j in 0..k {
        if counts[j] > 0 {
            centers[j] = sums[j] / counts[j] as f64;
            continue;
        }
        // Empty cluster: move it onto the sample worst served by its center.
        let (idx, _) = samples
            .iter()
            .zip(labels.iter())
            .enumerate()
            .filter(|(_, (_, &l))| counts[l] > 1)
            .map(|(i, (s, &l))| (i, (s - centers[l]).abs()))
            .fold((usize::MAX, -1.0), |best, (i, d)| if d > best.1 { (i, d) } else { best });
        if idx != usize::MAX {
            counts[labels[idx]] -= 1;
            labels[idx] = j;
            counts[j] = 1;
            centers[j] = samples[idx];
        }
    }
}

/// Reads an NLOS sample database: one distance error in meters per line.
/// Blank lines and lines starting with `#` are skipped.
pub fn read_samples(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: format!("not a number: {line:?}"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: "sample is not finite".into(),
            });
        }
        out.push(v);
    }
    Ok(out)
}

pub fn write_samples(path: impl AsRef<Path>, samples: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for s in samples {
        writeln!(w, "{s}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_requests() {
        assert!(fit_gm(&[], 1).is_err());
        assert!(fit_gm(&[1.0, 2.0], 0).is_err());
        assert!(fit_gm(&[1.0, 2.0], 3).is_err());
        assert!(fit_gm(&[7.0; 10], 2).is_err());
        assert!(fit_gm(&[1.0, f64::NAN], 1).is_err());
    }

    #[test]
    fn constant_samples_get_floored_sigma() {
        let gm = fit_gm(&[7.0; 25], 1).unwrap();
        assert_eq!(gm.len(), 1);
        assert_eq!(gm[0].weight, 1.0);
        assert_eq!(gm[0].mean, 7.0);
        assert_eq!(gm[0].sigma, 0.05);
    }

    #[test]
    fn single_component_is_sample_statistics() {
        let s = [1.0, 2.0, 3.0, 4.0, 10.0];
        let gm = fit_gm(&s, 1).unwrap();
        let mean = 4.0;
        let var = s.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 4.0;
        assert!((gm[0].mean - mean).abs() < 1e-12);
        assert!((gm[0].sigma - var.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn separates_two_obvious_clusters() {
        let mut s = vec![0.0, 0.1, -0.1, 0.05];
        s.extend([100.0, 100.2, 99.8, 100.1, 99.9, 100.0]);
        let gm = fit_gm(&s, 2).unwrap();
        assert!((gm[0].weight - 0.4).abs() < 1e-12);
        assert!((gm[1].weight - 0.6).abs() < 1e-12);
        assert!(gm[0].mean.abs() < 0.1);
        assert!((gm[1].mean - 100.0).abs() < 0.1);
    }

    #[test]
    fn sample_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("db.txt");
        write_samples(&p, &[1.5, 2.25, 1e-3]).unwrap();
        assert_eq!(read_samples(&p).unwrap(), vec![1.5, 2.25, 1e-3]);
        std::fs::write(&p, "1.0\n\n# note\nabc\n").unwrap();
        assert!(matches!(read_samples(&p), Err(Error::Parse { line: 4, .. })));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn weights_sum_to_one_and_sigmas_floored(
                samples in prop::collection::vec(-50.0..50.0f64, 5..200),
                k in 1usize..5,
            ) {
                let gm = fit_gm(&samples, k).unwrap();
                prop_assert_eq!(gm.len(), k);
                let w: f64 = gm.iter().map(|c| c.weight).sum();
                prop_assert!((w - 1.0).abs() < 1e-12);
                prop_assert!(gm.iter().all(|c| c.sigma >= 0.05 && c.weight > 0.0));
            }
        }
    }
}
