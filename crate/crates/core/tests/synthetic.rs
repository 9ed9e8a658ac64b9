use idmcal::calibration::{calibrate_batch, calibrate_event, ParameterSpace};
use idmcal::objectives::{error_report, ObjectiveSpec};
use idmcal::optimizer::OptimizerConfig;
use idmcal::sim::simulate_follower;
use idmcal::synth::{benchmark_cases, benchmark_events, BenchmarkSpec};
use idmcal::trajectory::{parse_trajectory_csv, write_trajectory_csv, CfEvent, ColumnSchema, Source, DEFAULT_V_EPS};
use idmcal::ModelKind;

fn spec(count: usize, position_noise_std: f64) -> BenchmarkSpec {
    BenchmarkSpec {
        count,
        position_noise_std,
        ..BenchmarkSpec::default()
    }
}

#[test]
fn true_parameters_reproduce_clean_events() {
    for model in [ModelKind::Idm, ModelKind::IdmPlus] {
        let s = BenchmarkSpec { model, ..spec(12, 0.0) };
        for case in benchmark_cases(&s).unwrap() {
            let ev = case.generate().unwrap();
            let sim = simulate_follower(model, &case.p_true, &ev);
            let r = error_report(&case.p_true, &ev, &sim);
            assert!(!r.collided);
            assert!(r.nrmse_spacing.unwrap() <= 1e-6, "{}: {:?}", ev.id, r);
        }
    }
}

#[test]
fn clean_event_calibrates_to_near_zero() {
    let case = &benchmark_cases(&spec(4, 0.0)).unwrap()[1];
    let ev = case.generate().unwrap();
    let r = calibrate_event(
        &ev,
        ModelKind::Idm,
        &ParameterSpace::simulator6(),
        &ObjectiveSpec::spacing(),
        &OptimizerConfig::default(),
    )
    .unwrap();
    assert!(r.objective_value <= 1e-2, "objective {}", r.objective_value);
}

#[test]
fn calibrated_error_grows_with_noise() {
    let cfg = OptimizerConfig::default();
    let mean_error = |std: f64| {
        let events = benchmark_events(&spec(20, std)).unwrap();
        let out = calibrate_batch(&events, ModelKind::Idm, &ParameterSpace::drone4(), &ObjectiveSpec::spacing(), &cfg, 4)
            .unwrap();
        let errs: Vec<f64> = out.successes().filter_map(|r| r.errors.nrmse_spacing).collect();
        assert_eq!(errs.len(), 20);
        errs.iter().sum::<f64>() / errs.len() as f64
    };
    let (e0, e1, e5) = (mean_error(0.0), mean_error(0.1), mean_error(0.5));
    assert!(e0 <= e1 && e1 <= e5, "{e0} {e1} {e5}");
}

#[test]
fn events_survive_a_csv_file() {
    let dir = tempfile::tempdir().unwrap();
    for ev in benchmark_events(&spec(4, 0.5)).unwrap() {
        let path = dir.path().join(format!("{}.csv", ev.id));
        write_trajectory_csv(std::fs::File::create(&path).unwrap(), &ev.samples).unwrap();
        let traj = parse_trajectory_csv(&path, &ColumnSchema::default()).unwrap();
        let mut back = CfEvent::from_trajectory(&ev.id, Source::Synthetic, &traj, DEFAULT_V_EPS).unwrap();
        back.truth = ev.truth.clone();
        assert_eq!(back, ev);
    }
}
