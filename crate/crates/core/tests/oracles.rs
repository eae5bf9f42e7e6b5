use cloudcast::nowcast::{
    estimate_flow, invert_and_extrapolate, persistence_forecast, to_intensity, tune_tvl1, ParamGrid, TuneConfig,
    TvL1Params, HORIZON,
};
use cloudcast::grids::cadence;
use cloudcast::verify::{accuracy_report, endpoint_error, generate_synthetic, FieldKind, FlowKind, SyntheticSpec};

fn translated(field: FieldKind, vx: f64, vy: f64, size: usize, frames: usize) -> SyntheticSpec {
    SyntheticSpec {
        field,
        flow: FlowKind::Translation { vx, vy },
        height: size,
        width: size,
        frames,
        seed: 11,
        ..SyntheticSpec::default()
    }
}

#[test]
fn blob_translation_flow_error() {
    let (seq, truth) = generate_synthetic(&translated(FieldKind::GaussianBlobs, 2.0, 0.0, 128, 2)).unwrap();
    let f = seq.frames();
    let est = estimate_flow(
        &to_intensity(&f[0], 0.0).unwrap(),
        &to_intensity(&f[1], 0.0).unwrap(),
        &TvL1Params::default(),
    )
    .unwrap();
    let epe = endpoint_error(&est, &truth).unwrap();
    assert!(epe <= 0.5, "endpoint error {epe}");
}

#[test]
fn swapped_pair_negates_flow() {
    let (seq, _) = generate_synthetic(&translated(FieldKind::GaussianBlobs, 2.0, 0.0, 128, 2)).unwrap();
    let a = to_intensity(&seq.frames()[0], 0.0).unwrap();
    let b = to_intensity(&seq.frames()[1], 0.0).unwrap();
    let p = TvL1Params::default();
    let fwd = estimate_flow(&a, &b, &p).unwrap();
    let bwd = estimate_flow(&b, &a, &p).unwrap();
    let n = fwd.u().len() as f64;
    let mean_sum = fwd.u().iter().zip(bwd.u()).map(|(x, y)| (x + y).abs()).sum::<f64>() / n;
    assert!(mean_sum <= 0.5, "mean |u_fwd + u_bwd| = {mean_sum}");
}

#[test]
fn unit_translation_shifts_predictions_one_pixel_per_step() {
    let size = 96;
    let (seq, _) = generate_synthetic(&translated(FieldKind::BandlimitedNoise, 1.0, 0.0, size, 2)).unwrap();
    let (prev, last) = (&seq.frames()[0], &seq.frames()[1]);
    let f = invert_and_extrapolate(last, prev, &TvL1Params::default(), HORIZON).unwrap();
    assert_eq!(f.steps(), HORIZON);
    let margin = 24;
    let mut matched = 0usize;
    let mut total = 0usize;
    for (k, frame) in f.frames().iter().enumerate() {
        let k = k + 1;
        assert_eq!(frame.timestamp(), last.timestamp() + cadence() * k as i32);
        for y in margin..size - margin {
            for x in margin..size - margin {
                total += 1;
                // Some shift within one pixel of k explains the predicted class.
                if (k - 1..=k + 1).any(|d| frame.get(y, x) == last.get(y, x - d)) {
                    matched += 1;
                }
            }
        }
    }
    let share = matched as f64 / total as f64;
    assert!(share > 0.97, "only {share:.3} of interior predictions sit within 1 px of the true shift");
}

#[test]
fn forecasts_are_bit_identical_on_repeat() {
    let (seq, _) = generate_synthetic(&translated(FieldKind::BandlimitedNoise, 1.5, -0.5, 64, 3)).unwrap();
    let f = seq.frames();
    let a = invert_and_extrapolate(&f[2], &f[1], &TvL1Params::default(), HORIZON).unwrap();
    let b = invert_and_extrapolate(&f[2], &f[1], &TvL1Params::default(), HORIZON).unwrap();
    assert_eq!(a, b);
    let flow_a = estimate_flow(&to_intensity(&f[0], 0.0).unwrap(), &to_intensity(&f[1], 0.0).unwrap(), &TvL1Params::default()).unwrap();
    let flow_b = estimate_flow(&to_intensity(&f[0], 0.0).unwrap(), &to_intensity(&f[1], 0.0).unwrap(), &TvL1Params::default()).unwrap();
    assert_eq!(flow_a, flow_b);
}

#[test]
fn static_future_gives_perfect_persistence() {
    let (seq, _) = generate_synthetic(&translated(FieldKind::GaussianBlobs, 0.0, 0.0, 32, 17)).unwrap();
    let f = seq.frames();
    let p = persistence_forecast(&f[0], HORIZON).unwrap();
    assert_eq!(accuracy_report(&p, &f[1..]).unwrap().mean, 1.0);
}

#[test]
fn full_lattice_separates_best_and_worst_lambda() {
    // Every lattice point is scored, so the winner and the weakest lambda can be compared directly.
    let (seq, _) = generate_synthetic(&SyntheticSpec {
        seed: 5,
        ..translated(FieldKind::BandlimitedNoise, 1.5, 0.5, 32, 24)
    })
    .unwrap();
    let grid = ParamGrid::default();
    let combos = grid.combinations();
    let cfg = TuneConfig {
        origins: 3,
        seed: 1,
        steps: 4,
    };
    let (best, report) = tune_tvl1(&seq, &combos, &cfg).unwrap();
    assert_eq!(report.lattice_size, 360);
    assert!(report.warning.is_none());
    let lambda_score = |l: f64| {
        let s: Vec<f64> = report.scores.iter().filter(|s| s.params.lambda == l).map(|s| s.mean_accuracy).collect();
        s.iter().sum::<f64>() / s.len() as f64
    };
    let worst = grid
        .lambda
        .iter()
        .copied()
        .min_by(|a, b| lambda_score(*a).total_cmp(&lambda_score(*b)))
        .unwrap();
    let worst_best = report
        .scores
        .iter()
        .filter(|s| s.params.lambda == worst)
        .map(|s| s.mean_accuracy)
        .fold(f64::NEG_INFINITY, f64::max);
    assert_ne!(best.lambda, worst);
    assert!(report.best_mean_accuracy - worst_best > 0.0);
    assert_eq!(best, combos[report.best_index]);
}
