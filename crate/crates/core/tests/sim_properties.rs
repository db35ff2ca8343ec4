use slatbp::sim::{write_outputs, MeasurementParams, ScenarioConfig, Simulation};
use slatbp::{Mode, SlatEngine};

fn desk() -> ScenarioConfig {
    ScenarioConfig { n_c: 24, n_s: 14, n_t: 22, n_mc: 50, seed: 1, ..Default::default() }
}

#[test]
fn same_seed_gives_identical_files() {
    let cfg = ScenarioConfig { n_mc: 8, ..desk() };
    let dir = tempfile::tempdir().unwrap();
    for (sub, threads) in [("a", Some(1)), ("b", None)] {
        let res = Simulation::new(cfg.clone()).unwrap().run(threads).unwrap();
        write_outputs(&res, dir.path().join(sub)).unwrap();
    }
    for f in ["rmse_time.csv", "cdf.csv", "runs.jsonl", "summary.json"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn exact_data_and_tight_models_give_zero_error() {
    let cfg = ScenarioConfig {
        n_mc: 10,
        cell_size: 0.5,
        sigma_w0: 0.1,
        sigma_u: 0.1,
        p_nlos: 0.0,
        p_obs: 0.0,
        sigma_s: 1e-6,
        ..desk()
    };
    let mut sim = Simulation::new(cfg).unwrap();
    sim.measurement = MeasurementParams::noiseless(1.0, 30.0);
    let res = sim.run(None).unwrap();
    for m in &res.modes {
        assert_eq!(m.collapsed, 0);
        assert!(m.target_rmse.iter().all(|&e| e < 1e-6), "{}: {:?}", m.mode, m.target_rmse);
    }
}

#[test]
fn ranges_come_from_exactly_the_sensors_in_reach() {
    let sim = Simulation::new(desk()).unwrap();
    let c = sim.map.centers();
    for run in 0..20 {
        let sc = sim.scenario(run).unwrap();
        for (slot, cell) in sc.slots.iter().zip(&sc.truth.target_cells) {
            let got: Vec<usize> = slot.ranges.iter().map(|r| r.sensor).collect();
            let want: Vec<usize> = (0..sc.truth.sensor_cells.len())
                .filter(|&n| c[cell.index()].distance(&c[sc.truth.sensor_cells[n].index()]) < 30.0)
                .collect();
            assert_eq!(got, want);
        }
    }
}

#[test]
fn larger_sensing_radius_does_not_hurt() {
    let mut prev = f64::INFINITY;
    for d_th in [15.0, 20.0, 25.0, 30.0] {
        let cfg = ScenarioConfig { d_th, modes: vec![Mode::Slat], ..desk() };
        let res = Simulation::new(cfg).unwrap().run(None).unwrap();
        let rmse = res.modes[0].mean_target_rmse;
        assert!(rmse <= prev, "d_th {d_th}: {rmse} after {prev}");
        prev = rmse;
    }
}

#[test]
fn pruned_beliefs_stay_close_and_cost_less() {
    let sim = Simulation::new(ScenarioConfig { n_mc: 20, ..desk() }).unwrap();
    let (mut tv_sum, mut count, mut work_full, mut work_pruned) = (0.0, 0usize, 0u64, 0u64);
    for run in 0..20 {
        let sc = sim.scenario(run).unwrap();
        let make = |eps| {
            SlatEngine::new(
                sim.map.clone(),
                sim.models.clone(),
                sc.target_prior.clone(),
                sc.sensor_priors.clone(),
                Mode::Slat,
                eps,
                2,
            )
            .unwrap()
        };
        let (mut full, mut pruned) = (make(0.0), make(0.05));
        for slot in &sc.slots {
            full.step(slot).unwrap();
            pruned.step(slot).unwrap();
            tv_sum += full.target_belief().total_variation(pruned.target_belief());
            count += 1;
        }
        work_full += full.total_work();
        work_pruned += pruned.total_work();
    }
    let mean_tv = tv_sum / count as f64;
    assert!(mean_tv < 0.02, "mean total variation {mean_tv}");
    assert!(work_pruned < work_full);
}
