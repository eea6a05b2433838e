use vdsp::characterization::{
    fit_params, generate_protocol, parse_records, records_to_csv, simulate_protocol, FitOptions,
    ProtocolSpec,
};
use vdsp::data::{load_mnist_idx, save_mnist_idx, Dataset, PIXELS};
use vdsp::device::{Preset, VariabilitySpec, WeightState};
use vdsp::experiments::{run, RunSpec};
use vdsp::snn::{read_snapshot, write_snapshot, SnapshotMeta};
use vdsp::{DeviceParams, Network, NetworkConfig};

/// Ten classes, each a distinct horizontal band of the 28×28 frame with a
/// little per-sample jitter.
fn bands(n: usize, seed: u64) -> Dataset {
    let mut images = vec![0u8; n * PIXELS];
    let mut labels = Vec::with_capacity(n);
    let mut state = seed;
    for i in 0..n {
        state = vdsp::seed::mix64(state);
        let class = (state % 10) as usize;
        let shift = ((state >> 8) % 2) as usize;
        let img = &mut images[i * PIXELS..(i + 1) * PIXELS];
        let top = 1 + class * 2 + shift;
        for r in top..top + 3 {
            for c in 4..24 {
                img[r * 28 + c] = 255;
            }
        }
        labels.push(class as u8);
    }
    Dataset::new(28, 28, images, labels).unwrap()
}

fn small_spec(neurons: usize) -> RunSpec<f64> {
    let mut spec = RunSpec::new(NetworkConfig::mnist(Preset::TiO2, neurons));
    spec.train.n_train_samples = Some(600);
    spec.n_label = 300;
    spec.n_test = Some(200);
    spec
}

#[test]
fn learns_separable_classes() {
    let train = bands(600, 1);
    let test = bands(200, 2);
    let (_, outcome) = run(&small_spec(20), &train, &test).unwrap();
    assert_eq!(outcome.eval.samples, 200);
    assert!(
        outcome.eval.accuracy > 0.3,
        "accuracy {}",
        outcome.eval.accuracy
    );
}

#[test]
fn runs_are_reproducible() {
    let train = bands(300, 3);
    let test = bands(100, 4);
    let mut spec = small_spec(8);
    spec.train.n_train_samples = Some(300);
    spec.n_label = 100;
    spec.n_test = Some(100);
    spec.network.variability = VariabilitySpec {
        rsd_theta: 0.1,
        rsd_hrs: 0.1,
        rsd_lrs: 0.1,
    };
    let (a, ra) = run(&spec, &train, &test).unwrap();
    let (b, rb) = run(&spec, &train, &test).unwrap();
    assert_eq!(a.synapses().weights(), b.synapses().weights());
    assert_eq!(ra.eval, rb.eval);
    assert_eq!(ra.train, rb.train);

    spec.network.seed = 1;
    let (c, _) = run(&spec, &train, &test).unwrap();
    assert_ne!(a.synapses().weights(), c.synapses().weights());
}

#[test]
fn dataset_and_snapshot_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let ds = bands(50, 5);
    let (img, lbl) = (dir.path().join("img"), dir.path().join("lbl"));
    save_mnist_idx(&ds, &img, &lbl).unwrap();
    assert_eq!(load_mnist_idx(&img, &lbl).unwrap(), ds);

    let cfg = NetworkConfig::mnist(Preset::Hzo, 6);
    let net = Network::build(cfg.clone()).unwrap();
    let meta = SnapshotMeta {
        rows: PIXELS,
        cols: 6,
        device: "hzo".into(),
        seed: 0,
        samples: 0,
    };
    let desc = dir.path().join("w.snap");
    write_snapshot(&desc, &meta, net.synapses().weights()).unwrap();
    let (back_meta, back) = read_snapshot(&desc).unwrap();
    assert_eq!(back_meta, meta);
    for (a, b) in net.synapses().weights().iter().zip(&back) {
        assert_eq!(*a as f32, *b);
    }
    let rebuilt: Vec<WeightState<f64>> = back
        .iter()
        .map(|&w| WeightState::new(w as f64).unwrap())
        .collect();
    assert!(Network::with_weights(cfg, rebuilt).is_ok());
}

#[test]
fn characterization_csv_feeds_the_fit() {
    let p: DeviceParams = Preset::Hzo.params();
    let spec = ProtocolSpec::new(-1.5 * p.theta_p, 1.5 * p.theta_d, 3000, 21);
    let volts = generate_protocol(&spec).unwrap();
    let recs =
        simulate_protocol(&p, &volts, WeightState::new(0.5).unwrap(), 0.0, 200e-9, 0).unwrap();
    let bytes = records_to_csv(&recs).unwrap();
    let parsed = parse_records(&bytes, "mem").unwrap();
    assert_eq!(parsed.len(), recs.len());
    let fit = fit_params(&parsed, None, &FitOptions::default()).unwrap();
    assert!(fit.rmse <= 1e-3, "rmse {}", fit.rmse);
    assert!((fit.params.theta_p - p.theta_p).abs() / p.theta_p < 0.05);

    // Read noise sets the floor of the residual.
    let noisy =
        simulate_protocol(&p, &volts, WeightState::new(0.5).unwrap(), 0.01, 200e-9, 4).unwrap();
    let fit = fit_params(&noisy, None, &FitOptions::default()).unwrap();
    assert!(fit.rmse > 0.005 && fit.rmse < 0.03, "rmse {}", fit.rmse);
}
