//! End-to-end harness tests: determinism of the emitted reports, agreement
//! of the centralized and distributed pipelines on noiseless geometry, and
//! descent at the default operating point on a shortened horizon.

use domds_core::channel::ChannelParams;
use domds_core::harness::{
    run_experiment, AlgorithmKind, ExperimentConfig, ObservationSpec, ScenarioKind,
};
use domds_core::oja::StepSchedule;

fn read(path: &std::path::Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

#[test]
fn reports_are_byte_identical_across_reruns() {
    let mut cfg = ExperimentConfig::default();
    cfg.scenario.kind = ScenarioKind::Uniform { n: 12 };
    cfg.iterations = 500;
    cfg.replicas = 2;
    cfg.seed = 42;

    let tmp = tempfile::tempdir().unwrap();
    let (dir_a, dir_b) = (tmp.path().join("a"), tmp.path().join("b"));
    domds_core::harness::emit_csv(&dir_a, &run_experiment(&cfg).unwrap()).unwrap();
    domds_core::harness::emit_csv(&dir_b, &run_experiment(&cfg).unwrap()).unwrap();

    for name in ["rmse.csv", "rmse_mean.csv", "positions_final.csv"] {
        let a = read(&dir_a.join(name));
        assert_eq!(a, read(&dir_b.join(name)), "{name} differs between reruns");
        assert!(!a.is_empty(), "{name} is empty");
    }

    let rmse = String::from_utf8(read(&dir_a.join("rmse.csv"))).unwrap();
    let mut lines = rmse.lines();
    assert_eq!(lines.next(), Some("replica,tick,broadcasts,rmse_m,wall_ms"));
    let first = lines.next().expect("at least one data row");
    let fields: Vec<&str> = first.split(',').collect();
    assert_eq!(fields[0], "0");
    assert_eq!(fields[1], "0");
    // Nine significant digits in scientific notation, wall_ms reserved as 0.
    assert!(
        fields[3].contains('e') && fields[3].split('e').next().unwrap().len() >= 10,
        "rmse field not in 9-significant-digit scientific form: {}",
        fields[3]
    );
    assert_eq!(fields[4], "0");
}

#[test]
fn centralized_and_distributed_agree_on_noiseless_geometry() {
    // With an exact channel and full observation the only stochasticity left
    // in doMDS is the protocol itself (ATS draws and the δ term), so both
    // the centralized Oja pipeline and the distributed protocol must land
    // near the true geometry. The bound is ~3x the worst final seen at this
    // seed; initial RMSE is ~0.55 m for scale.
    for algo in [AlgorithmKind::Oja, AlgorithmKind::Domds] {
        let cfg = ExperimentConfig {
            channel: ChannelParams::new(-61.71, 2.44, 0.0, 1).unwrap(),
            observation: ObservationSpec::Scalar(1.0),
            schedule: StepSchedule::new(0.05, 0.7).unwrap(),
            algorithm: algo,
            iterations: 20_000,
            replicas: 2,
            seed: 11,
            ..ExperimentConfig::default()
        };
        let out = run_experiment(&cfg).unwrap();
        for rec in &out.records {
            let last = rec.rows.last().unwrap().rmse_m;
            assert!(
                last <= 0.12,
                "{algo:?} replica {} final RMSE {last} m exceeds the noiseless bound",
                rec.replica
            );
        }
    }
}

#[test]
fn default_operating_point_descends_on_short_horizon() {
    // A tenth of the production horizon: the transient is far from finished
    // (the full-budget behavior is covered by the acceptance suite), but the
    // mean RMSE must already have dropped well below the initial state.
    let cfg = ExperimentConfig { iterations: 20_000, replicas: 4, ..ExperimentConfig::default() };
    let out = run_experiment(&cfg).unwrap();
    let first = out.first_mean_rmse().unwrap();
    let last = out.final_mean_rmse().unwrap();
    assert!(
        last <= 0.75 * first,
        "mean RMSE {last} m after 2e4 ticks vs initial {first} m"
    );
}

#[test]
fn flat_config_round_trip_runs_and_reports() {
    let text = "\
        scenario.kind = grid\n\
        scenario.rows = 3\n\
        scenario.cols = 4\n\
        scenario.n = 12\n\
        scenario.width_m = 1.2\n\
        scenario.height_m = 0.9\n\
        algorithm = batch-mds\n\
        run.iterations = 200\n\
        run.replicas = 2\n\
        run.seed = 5\n";
    let cfg = ExperimentConfig::parse(text).unwrap();
    let out = run_experiment(&cfg).unwrap();

    let tmp = tempfile::tempdir().unwrap();
    domds_core::harness::emit_csv(tmp.path(), &out).unwrap();

    let mean = String::from_utf8(read(&tmp.path().join("rmse_mean.csv"))).unwrap();
    let n_rows = mean.lines().count() - 1;
    // The batch baseline has no tick-0 row: it cannot form an estimate
    // before the first measurement, so checkpoints start at tick 10.
    assert_eq!(
        n_rows,
        domds_core::harness::checkpoints(cfg.iterations).len() - 1,
        "one mean row per post-measurement checkpoint"
    );
    assert!(mean.lines().nth(1).unwrap().ends_with(",2"), "replica count column");

    // Batch MDS on a noisy 200-tick average recovers the grid coarsely.
    let first = out.first_mean_rmse().unwrap();
    let last = out.final_mean_rmse().unwrap();
    assert!(last < 0.5 * first, "batch baseline: {last} vs initial {first}");
}
