use convrelax::mnistreg::{
    self, build_rotation_dataset, lift_from_span, parse_idx, restrict_to_span, ridge_fit, ridge_predict, rmse,
    rotate_image, synthetic_digits, unit_image, write_idx, ExperimentConfig, FilterFeatures, IdxData, IdxTensor,
    PIXELS, SIDE,
};
use convrelax::model::{sample_planted, Dataset};
use convrelax::relax::RelaxConfig;
use convrelax::rng::{rng_from, standard_normal_vec};
use proptest::prelude::*;

fn train_rmse(x: &[f64], width: usize, y: &[f64]) -> f64 {
    let m = ridge_fit(x, width, y, 0.0).unwrap();
    rmse(&ridge_predict(&m, x).unwrap(), y).unwrap()
}

#[test]
fn label_mean_is_centered_for_a_symmetric_range() {
    let imgs = synthetic_digits(10_000, 21);
    let (train, _) = build_rotation_dataset(&imgs, (-45.0, 45.0), 10_000, 0, 4).unwrap();
    // sd of the mean is 90/sqrt(12·10⁴) ≈ 0.26, so ±1.5 is almost 6 sd
    let mean = train.y.iter().sum::<f64>() / train.len() as f64;
    assert!((-1.5..=1.5).contains(&mean), "mean {mean}");
    assert!(train.x.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn rows_are_rotations_of_their_source_images() {
    let imgs = synthetic_digits(40, 3);
    let (train, test) = build_rotation_dataset(&imgs, (-30.0, 60.0), 25, 15, 8).unwrap();
    assert_eq!(train.len(), 25);
    assert_eq!(test.len(), 15);
    for ds in [&train, &test] {
        for i in 0..ds.len() {
            let expect = rotate_image(&unit_image(&imgs, ds.indices[i]).unwrap(), ds.y[i]).unwrap();
            assert_eq!(ds.row(i), expect.as_slice());
            assert!((-30.0..=60.0).contains(&ds.y[i]));
        }
    }
    let mut all: Vec<usize> = train.indices.iter().chain(&test.indices).copied().collect();
    all.sort_unstable();
    all.dedup();
    assert_eq!(all.len(), 40);
}

#[test]
fn augmented_least_squares_never_fits_worse() {
    let imgs = synthetic_digits(900, 5);
    let (train, _) = build_rotation_dataset(&imgs, (-45.0, 45.0), 900, 0, 6).unwrap();
    let mut rng = rng_from(7);
    for k in [4, 16] {
        let f = FilterFeatures {
            k,
            filter: standard_normal_vec(&mut rng, PIXELS / k),
            pixel_mean: vec![0.1; PIXELS],
        };
        let raw = train_rmse(&train.x, PIXELS, &train.y);
        let aug = train_rmse(&f.augment(&train.x).unwrap(), f.width(), &train.y);
        assert!(aug <= raw + 1e-9 * raw.max(1.0), "k={k}: {aug} > {raw}");
    }
}

#[test]
fn span_restriction_drops_blank_coordinates() {
    let (model, small) = sample_planted(40, 5, 1, 9).unwrap();
    // append a coordinate that is zero in every sample
    let x: Vec<f64> = small.x.chunks(5).flat_map(|r| r.iter().copied().chain([0.0])).collect();
    let data = Dataset::new(40, 6, 1, x, small.y.clone()).unwrap();
    let (reduced, basis) = restrict_to_span(&data).unwrap();
    assert_eq!(reduced.d, 5);
    assert_eq!(basis.len(), 30);
    for c in 0..5 {
        assert!(basis[5 * 5 + c].abs() < 1e-12);
    }
    let mut w6 = model.w_star.clone();
    w6.push(0.0);
    let coords: Vec<f64> = (0..5).map(|c| (0..6).map(|p| basis[p * 5 + c] * w6[p]).sum()).collect();
    let back = lift_from_span(&basis, &coords);
    for (a, b) in back.iter().zip(&w6) {
        assert!((a - b).abs() < 1e-10);
    }
    // responses are unchanged by the change of coordinates
    assert_eq!(reduced.y, data.y);
    for i in 0..40 {
        let a: f64 = (0..6).map(|p| data.x[i * 6 + p] * w6[p]).sum();
        let b: f64 = (0..5).map(|c| reduced.x[i * 5 + c] * coords[c]).sum();
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn learned_filter_ignores_blank_pixels() {
    let imgs = synthetic_digits(200, 12);
    let (train, _) = build_rotation_dataset(&imgs, (-45.0, 45.0), 200, 0, 2).unwrap();
    let (f, outcome) = mnistreg::learn_filter_features(&train, 16, 2, 3, &RelaxConfig::default()).unwrap();
    assert_eq!(f.filter.len(), 49);
    assert!(outcome.best.is_optimal());
    assert!(f.filter.iter().all(|v| v.is_finite()));
    let aug = f.augment(&train.x).unwrap();
    assert_eq!(aug.len(), 200 * (PIXELS + 16));
    assert!(aug.iter().all(|v| v.is_finite()));
}

#[test]
fn end_to_end_experiment_is_deterministic() {
    let train = synthetic_digits(500, 31);
    let test = synthetic_digits(200, 32);
    let cfg = ExperimentConfig {
        n_train: 400,
        n_test: 150,
        trials: 2,
        lambdas: vec![0.1, 1.0, 10.0],
        ..ExperimentConfig::default()
    };
    let a = mnistreg::run_experiment(&train, &test, &cfg).unwrap();
    assert!(a.raw_rmse.is_finite() && a.filter_rmse.is_finite());
    assert!(a.raw_rmse > 0.0 && a.raw_rmse < 90.0);
    assert_eq!(a.n_test, 150);
    assert!(cfg.lambdas.contains(&a.raw_lambda) && cfg.lambdas.contains(&a.filter_lambda));
    let b = mnistreg::run_experiment(&train, &test, &cfg).unwrap();
    assert_eq!(a, b);
    let csv = a.to_csv();
    assert!(csv.starts_with("experiment,rmse\nls_raw_pixels,"));
}

#[test]
fn directory_loader_accepts_both_file_name_styles() {
    let imgs = synthetic_digits(6, 1);
    let labels = IdxTensor::new(vec![6], IdxData::U8(vec![0, 1, 2, 3, 4, 5])).unwrap();
    for sep in ["-", "."] {
        let dir = tempfile::tempdir().unwrap();
        for stem in ["train", "t10k"] {
            mnistreg::save_idx(&imgs, &dir.path().join(format!("{stem}-images{sep}idx3-ubyte"))).unwrap();
            mnistreg::save_idx(&labels, &dir.path().join(format!("{stem}-labels{sep}idx1-ubyte"))).unwrap();
        }
        let files = mnistreg::load_dir(dir.path()).unwrap();
        assert_eq!(files.train_images, imgs);
        assert_eq!(files.test_labels, labels);
    }
    let dir = tempfile::tempdir().unwrap();
    assert!(mnistreg::load_dir(dir.path()).is_err());
    let short = IdxTensor::new(vec![5], IdxData::U8(vec![0; 5])).unwrap();
    for stem in ["train", "t10k"] {
        mnistreg::save_idx(&imgs, &dir.path().join(format!("{stem}-images-idx3-ubyte"))).unwrap();
        mnistreg::save_idx(&short, &dir.path().join(format!("{stem}-labels-idx1-ubyte"))).unwrap();
    }
    assert!(matches!(
        mnistreg::load_dir(dir.path()),
        Err(convrelax::Error::DimensionMismatch { .. })
    ));
}

fn idx_tensor() -> impl Strategy<Value = IdxTensor> {
    prop::collection::vec(1usize..4, 0..4).prop_flat_map(|dims| {
        let len: usize = dims.iter().product();
        let data = prop_oneof![
            prop::collection::vec(any::<u8>(), len).prop_map(IdxData::U8),
            prop::collection::vec(any::<i8>(), len).prop_map(IdxData::I8),
            prop::collection::vec(any::<i16>(), len).prop_map(IdxData::I16),
            prop::collection::vec(any::<i32>(), len).prop_map(IdxData::I32),
            prop::collection::vec(any::<u32>().prop_map(f32::from_bits), len).prop_map(IdxData::F32),
            prop::collection::vec(any::<u64>().prop_map(f64::from_bits), len).prop_map(IdxData::F64),
        ];
        (Just(dims), data)
    })
    .prop_map(|(dims, data)| IdxTensor::new(dims, data).unwrap())
}

proptest! {
    #[test]
    fn idx_bytes_round_trip(t in idx_tensor()) {
        let bytes = write_idx(&t).unwrap();
        let back = parse_idx(&bytes).unwrap();
        prop_assert_eq!(write_idx(&back).unwrap(), bytes);
        prop_assert_eq!(back.dims, t.dims);
    }

    #[test]
    fn truncated_idx_is_rejected(t in idx_tensor(), cut in 1usize..8) {
        let bytes = write_idx(&t).unwrap();
        prop_assume!(cut <= bytes.len());
        let res = parse_idx(&bytes[..bytes.len() - cut]);
        prop_assert!(res.is_err());
    }

    #[test]
    fn least_squares_with_extra_columns_fits_no_worse(
        seed in 0u64..1000, n in 5usize..30, p in 1usize..6, extra in 1usize..4,
    ) {
        let mut rng = rng_from(seed);
        let x = standard_normal_vec(&mut rng, n * (p + extra));
        let y = standard_normal_vec(&mut rng, n);
        let sub: Vec<f64> = x.chunks(p + extra).flat_map(|r| r[..p].to_vec()).collect();
        let small = train_rmse(&sub, p, &y);
        let big = train_rmse(&x, p + extra, &y);
        prop_assert!(big <= small + 1e-9);
    }

    #[test]
    fn rotation_keeps_interior_mass(r0 in 9.0f64..19.0, c0 in 9.0f64..19.0, theta in -180.0f64..180.0) {
        // blob of width 1.5 within 4.5 of the center stays inside the frame
        prop_assume!(((r0 - 13.5).powi(2) + (c0 - 13.5).powi(2)).sqrt() <= 4.5);
        let img: Vec<f64> = (0..PIXELS)
            .map(|p| {
                let (r, c) = ((p / SIDE) as f64, (p % SIDE) as f64);
                (-((r - r0).powi(2) + (c - c0).powi(2)) / 4.5).exp()
            })
            .collect();
        let mass: f64 = img.iter().sum();
        let rotated: f64 = rotate_image(&img, theta).unwrap().iter().sum();
        prop_assert!((rotated - mass).abs() <= 0.05 * mass);
    }
}
