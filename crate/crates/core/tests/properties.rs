use chrono::{DateTime, Duration, TimeZone, Utc};
use proptest::prelude::*;

use cloudcast::grids::{load_sequence, save_sequence, ChannelStack, Channel, GeoContext, LabelGrid, LabelSequence, Taxonomy};
use cloudcast::nowcast::{persistence_forecast, ForecastSet};
use cloudcast::pipeline::{crop_center, downsample_majority, repair_gaps, split, SplitSpec};
use cloudcast::raster::Plane;
use cloudcast::segmentation::{
    classify_height, reduce_sequence, reduce_to_four, segment_frame, HeightClass, NwpFields, OpacityConfig,
    PixelThresholds,
};
use cloudcast::verify::{
    accuracy_of_frames, brier_score, per_class_frequency_bias, psnr, ssim, ProbForecast, PSNR_CAP_DB,
};

fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2017, 4, 1, 13, 0, 0).unwrap()
}

fn quarter(k: i64) -> DateTime<Utc> {
    t0() + Duration::minutes(15 * k)
}

fn taxonomy() -> impl Strategy<Value = Taxonomy> {
    prop_oneof![Just(Taxonomy::Reduced4), Just(Taxonomy::Full11)]
}

/// Frames of random labels on a regular quarter-hour grid.
fn sequence(max_frames: usize, max_side: usize) -> impl Strategy<Value = LabelSequence> {
    (1..=max_frames, 1..=max_side, 1..=max_side, taxonomy()).prop_flat_map(|(t, h, w, tax)| {
        proptest::collection::vec(0..tax.cardinality() as u8, t * h * w).prop_map(move |labels| {
            let stamps: Vec<_> = (0..t as i64).map(quarter).collect();
            LabelSequence::from_raw(h, w, &labels, tax, &stamps).unwrap()
        })
    })
}

fn reduced_frames(frames: usize, pixels: usize) -> impl Strategy<Value = Vec<u8>> {
    proptest::collection::vec(0u8..4, frames * pixels)
}

fn as_grids(labels: &[u8], h: usize, w: usize, first_step: i64) -> Vec<LabelGrid> {
    labels
        .chunks(h * w)
        .enumerate()
        .map(|(k, c)| LabelGrid::new(h, w, c.to_vec(), Taxonomy::Reduced4, quarter(first_step + k as i64)).unwrap())
        .collect()
}

fn canonical_thresholds() -> impl Strategy<Value = PixelThresholds> {
    proptest::array::uniform4(150.0f64..350.0).prop_map(|mut t| {
        t.sort_by(f64::total_cmp);
        PixelThresholds {
            vh: t[0],
            hi: t[1],
            me: t[2],
            lo: t[3],
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn save_load_round_trip(seq in sequence(5, 6)) {
        let dir = tempfile::tempdir().unwrap();
        let (npy, meta) = (dir.path().join("s.npy"), dir.path().join("s.json"));
        save_sequence(&seq, &npy, &meta).unwrap();
        let back = load_sequence(&npy, &meta, Taxonomy::Reduced4).unwrap();
        prop_assert_eq!(&back, &seq);
        // Saving again reproduces the same bytes.
        let bytes = std::fs::read(&npy).unwrap();
        save_sequence(&back, &npy, &meta).unwrap();
        prop_assert_eq!(std::fs::read(&npy).unwrap(), bytes);
    }

    #[test]
    fn split_partitions_and_is_reproducible(seq in sequence(12, 3), fraction in 0.05f64..0.95) {
        let spec = SplitSpec::with_fraction(fraction);
        match split(&seq, &spec) {
            Ok((train, test, boundary)) => {
                prop_assert_eq!(train.concat(&test).unwrap(), seq.clone());
                prop_assert_eq!(test.frames()[0].timestamp(), boundary);
                prop_assert_eq!(split(&seq, &spec).unwrap().2, boundary);
            }
            // Only degenerate cuts are refused.
            Err(_) => {
                let idx = (seq.len() as f64 * fraction).round() as usize;
                prop_assert!(idx == 0 || idx >= seq.len());
            }
        }
    }

    #[test]
    fn reduction_preserves_frequencies(labels in proptest::collection::vec(0u8..11, 1..200)) {
        let n = labels.len();
        let seq = LabelSequence::from_raw(1, n, &labels, Taxonomy::Full11, &[t0()]).unwrap();
        let reduced = reduce_sequence(&seq).unwrap();
        let full = seq.frames()[0].class_counts();
        let four = reduced.frames()[0].class_counts();
        let groups: [&[usize]; 4] = [&[0], &[1, 2, 6], &[3], &[4, 5, 7, 8, 9, 10]];
        for (k, members) in groups.iter().enumerate() {
            prop_assert_eq!(four[k], members.iter().map(|&c| full[c]).sum::<usize>());
        }
        prop_assert!(reduced.frames()[0].labels().iter().all(|&l| l < 4));
    }

    #[test]
    fn height_classes_partition_temperatures(thr in canonical_thresholds(), t108 in 150.0f64..350.0) {
        let branches = [
            (HeightClass::VeryHigh, t108 < thr.vh),
            (HeightClass::High, thr.vh <= t108 && t108 < thr.hi),
            (HeightClass::Medium, thr.hi <= t108 && t108 < thr.me),
            (HeightClass::Low, thr.me <= t108 && t108 < thr.lo),
            (HeightClass::VeryLow, thr.lo <= t108),
        ];
        let holding: Vec<_> = branches.iter().filter(|b| b.1).map(|b| b.0).collect();
        prop_assert_eq!(holding.len(), 1);
        prop_assert_eq!(classify_height(t108, &thr), holding[0]);
    }

    #[test]
    fn threshold_monotonicity(
        t500 in 200.0f64..270.0, t700 in 230.0f64..290.0, t850 in 240.0f64..300.0,
        tropo in 190.0f64..230.0, delta in 0.1f64..20.0,
    ) {
        let base = PixelThresholds::from_temperatures(t500, t700, t850, tropo);
        let warmer_850 = PixelThresholds::from_temperatures(t500, t700, t850 + delta, tropo);
        prop_assert!(warmer_850.me > base.me && warmer_850.lo > base.lo);
        prop_assert_eq!(warmer_850.vh, base.vh);
        prop_assert_eq!(warmer_850.hi, base.hi);
        let warmer_tropo = PixelThresholds::from_temperatures(t500, t700, t850, tropo + delta);
        prop_assert!(warmer_tropo.vh > base.vh);
        prop_assert_eq!((warmer_tropo.hi, warmer_tropo.me, warmer_tropo.lo), (base.hi, base.me, base.lo));
    }

    #[test]
    fn segmentation_is_pixel_local(
        t108 in proptest::collection::vec(190.0f64..300.0, 6),
        btd in proptest::collection::vec(-1.0f64..8.0, 6),
        cloudy in proptest::collection::vec(any::<bool>(), 6),
        a in 0usize..6, b in 0usize..6,
    ) {
        let build = |perm: &dyn Fn(usize) -> usize| {
            let p = |v: &Vec<f64>| (0..6).map(|i| v[perm(i)]).collect::<Vec<_>>();
            let t = p(&t108);
            let t120: Vec<f64> = (0..6).map(|i| t108[perm(i)] - btd[perm(i)]).collect();
            let t87: Vec<f64> = t.iter().map(|v| v - 0.5).collect();
            let t73: Vec<f64> = t.iter().map(|v| v - 30.0).collect();
            let stack = ChannelStack::new(2, 3, t0()).unwrap()
                .with_channel(Channel::Ir108, t).unwrap()
                .with_channel(Channel::Ir120, t120).unwrap()
                .with_channel(Channel::Ir87, t87).unwrap()
                .with_channel(Channel::Wv73, t73).unwrap();
            let nwp = NwpFields::uniform(2, 3, 290.0, 285.0, 283.0, 273.0, 252.0, 210.0);
            let geo = GeoContext::uniform(2, 3, 120.0, 30.0).unwrap();
            let mask: Vec<bool> = (0..6).map(|i| cloudy[perm(i)]).collect();
            segment_frame(&stack, &nwp, &geo, &OpacityConfig::default(), &mask).unwrap()
        };
        let swap = |i: usize| if i == a { b } else if i == b { a } else { i };
        let plain = build(&|i| i);
        let swapped = build(&swap);
        for i in 0..6 {
            prop_assert_eq!(swapped.labels()[i], plain.labels()[swap(i)]);
        }
        prop_assert!(plain.labels().iter().all(|&l| l < 11));
    }

    #[test]
    fn repair_keeps_present_frames(
        h in 1usize..4, w in 1usize..4,
        steps in proptest::collection::vec(1i64..5, 1..8),
    ) {
        let mut k = 0;
        let mut stamps = vec![quarter(0)];
        for s in &steps {
            k += s;
            stamps.push(quarter(k));
        }
        let labels: Vec<u8> = (0..stamps.len() * h * w).map(|i| (i % 4) as u8).collect();
        let seq = LabelSequence::from_raw(h, w, &labels, Taxonomy::Reduced4, &stamps).unwrap();
        let (repaired, _) = repair_gaps(&seq).unwrap();
        prop_assert!(repaired.is_regular());
        prop_assert_eq!(repaired.len() as i64, k + 1);
        for f in seq.frames() {
            let i = repaired.position(f.timestamp()).unwrap();
            prop_assert_eq!(&repaired.frames()[i], f);
        }
        for f in repaired.frames() {
            prop_assert!(f.labels().iter().all(|&l| l < 4));
        }
    }

    #[test]
    fn downsample_keeps_alphabet(seq in sequence(2, 8), factor in 1usize..4) {
        match downsample_majority(&seq, factor) {
            Ok(out) => {
                for (a, b) in seq.frames().iter().zip(out.frames()) {
                    let present: Vec<bool> = a.class_counts().iter().map(|&c| c > 0).collect();
                    prop_assert!(b.labels().iter().all(|&l| present[l as usize]));
                }
            }
            Err(_) => prop_assert!(seq.height() % factor != 0 || seq.width() % factor != 0),
        }
    }

    #[test]
    fn crop_is_idempotent(seq in sequence(2, 8), oh in 1usize..8, ow in 1usize..8) {
        prop_assume!(oh <= seq.height() && ow <= seq.width());
        let once = crop_center(&seq, oh, ow).unwrap();
        prop_assert_eq!(crop_center(&once, oh, ow).unwrap(), once);
    }

    #[test]
    fn brier_matches_naive_loop(
        pixels in 1usize..=16,
        seed_weights in proptest::collection::vec(0.01f64..1.0, 16 * 4 * 16),
        truth in proptest::collection::vec(0usize..4, 16 * 16),
    ) {
        let (n, m) = (16usize, 4usize);
        let mut f = vec![0.0; n * m * pixels];
        let mut y = vec![0.0; n * m * pixels];
        for t in 0..n {
            for i in 0..pixels {
                let w: Vec<f64> = (0..m).map(|k| seed_weights[(t * m + k) * 16 + i]).collect();
                let s: f64 = w.iter().sum();
                for k in 0..m {
                    f[t * m * pixels + k * pixels + i] = w[k] / s;
                }
                y[t * m * pixels + truth[t * 16 + i] * pixels + i] = 1.0;
            }
        }
        let pf = ProbForecast::new(n, m, pixels, f.clone(), y.clone()).unwrap();
        let mut naive = 0.0;
        for i in 0..pixels {
            let mut per_pixel = 0.0;
            for t in 0..n {
                for k in 0..m {
                    let j = t * m * pixels + k * pixels + i;
                    per_pixel += (f[j] - y[j]).powi(2);
                }
            }
            naive += per_pixel / (m * n) as f64;
        }
        naive /= pixels as f64;
        prop_assert!((brier_score(&pf) - naive).abs() < 1e-12);
    }

    #[test]
    fn one_hot_brier_identity(pred in reduced_frames(16, 6), truth in reduced_frames(16, 6)) {
        let p = as_grids(&pred, 2, 3, 1);
        let o = as_grids(&truth, 2, 3, 1);
        let fs = ForecastSet::new(t0(), p.clone(), None).unwrap();
        let bs = brier_score(&ProbForecast::from_forecast(&fs, &o).unwrap());
        let acc = accuracy_of_frames(&p, &o).unwrap();
        prop_assert!((bs - (1.0 - acc.mean) / 2.0).abs() < 1e-12);
        // Mean accuracy is the count-weighted mean of the per-step values.
        let weighted = acc.per_step.iter().sum::<f64>() / acc.per_step.len() as f64;
        prop_assert!((acc.mean - weighted).abs() < 1e-12);
    }

    #[test]
    fn frequency_bias_reciprocity(pred in reduced_frames(3, 9), truth in reduced_frames(3, 9)) {
        let p = as_grids(&pred, 3, 3, 1);
        let o = as_grids(&truth, 3, 3, 1);
        let forward = per_class_frequency_bias(&p, &o).unwrap();
        let backward = per_class_frequency_bias(&o, &p).unwrap();
        for (a, b) in forward.iter().zip(&backward) {
            if let (Some(a), Some(b)) = (a, b) {
                prop_assert!((a * b - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ssim_symmetric_psnr_capped(
        a in proptest::collection::vec(0.0f64..1.0, 12 * 13),
        b in proptest::collection::vec(0.0f64..1.0, 12 * 13),
    ) {
        let pa = Plane::new(12, 13, a).unwrap();
        let pb = Plane::new(12, 13, b).unwrap();
        let ab = ssim(&pa, &pb).unwrap();
        prop_assert!((ab - ssim(&pb, &pa).unwrap()).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&ab));
        prop_assert!((ssim(&pa, &pa).unwrap() - 1.0).abs() < 1e-12);
        prop_assert_eq!(psnr(&pa, &pa).unwrap(), PSNR_CAP_DB);
    }

    #[test]
    fn forecasters_emit_reduced_one_hot(labels in reduced_frames(1, 20)) {
        let last = LabelGrid::new(4, 5, labels, Taxonomy::Reduced4, t0()).unwrap();
        let f = persistence_forecast(&last, 16).unwrap().with_one_hot_probabilities();
        // The validating constructor accepts the attached tensor.
        let rebuilt = ForecastSet::new(f.origin(), f.frames().to_vec(), f.probabilities().map(<[f64]>::to_vec));
        prop_assert!(rebuilt.is_ok());
        prop_assert!(f.frames().iter().all(|g| g.labels().iter().all(|&l| l < 4)));
    }
}

#[test]
fn reduction_is_surjective() {
    let g = LabelGrid::new(1, 11, (0..11).collect(), Taxonomy::Full11, t0()).unwrap();
    let r = reduce_to_four(&g).unwrap();
    let mut seen = r.class_counts();
    seen.retain(|&c| c > 0);
    assert_eq!(seen.len(), 4);
}

#[test]
fn single_pixel_full_class_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let seq = LabelSequence::from_raw(1, 1, &[10], Taxonomy::Full11, &[t0()]).unwrap();
    let (npy, meta) = (dir.path().join("one.npy"), dir.path().join("one.json"));
    save_sequence(&seq, &npy, &meta).unwrap();
    let back = load_sequence(&npy, &meta, Taxonomy::Reduced4).unwrap();
    assert_eq!(back.len(), 1);
    assert_eq!(back.taxonomy(), Taxonomy::Full11);
    assert_eq!(back.frames()[0].labels(), &[10]);
}

#[test]
fn published_split_sizes() {
    // 70,080 quarter-hour frames (two years) cut at three quarters.
    let frames = 70_080usize;
    let stamps: Vec<_> = (0..frames as i64).map(quarter).collect();
    let seq = LabelSequence::from_raw(1, 1, &vec![0u8; frames], Taxonomy::Reduced4, &stamps).unwrap();
    let (train, test, _) = split(&seq, &SplitSpec::default()).unwrap();
    assert_eq!((train.len(), test.len()), (52_560, 17_520));
}
