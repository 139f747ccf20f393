//! Rotation-angle regression on MNIST-format images, comparing ridge
//! regression on raw pixels with pixels augmented by the responses of a
//! filter learned through the relaxation.

mod idx;
mod ridge;
mod rotate;

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use idx::{parse_idx, read_idx, save_idx, write_idx, ElementKind, IdxData, IdxTensor};
pub use ridge::{ridge_fit, ridge_predict, rmse, RidgeGram, RidgeModel};
pub use rotate::{rotate_image, PIXELS, SIDE};

use crate::error::{Error, Result};
use crate::model::{self, Dataset};
use crate::relax::{self, RecoveryOutcome, RelaxConfig};
use crate::rng::{self, Stream};

/// Environment variable naming the directory with the four IDX files.
pub const DATA_DIR_ENV: &str = "CONVRELAX_MNIST_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationDataset {
    /// `n × 784`, row-major, values in [0, 1].
    pub x: Vec<f64>,
    /// Rotation angles in degrees.
    pub y: Vec<f64>,
    pub split: Split,
    /// Source image index of each row.
    pub indices: Vec<usize>,
    pub angle_range: (f64, f64),
}

impl RotationDataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * PIXELS..(i + 1) * PIXELS]
    }
}

/// Image `i` with pixels scaled to [0, 1].
pub fn unit_image(images: &IdxTensor, i: usize) -> Result<Vec<f64>> {
    if images.item_len() != PIXELS {
        return Err(Error::DimensionMismatch {
            what: "image size",
            expected: PIXELS,
            found: images.item_len(),
        });
    }
    let base = i * PIXELS;
    let scale = match images.kind() {
        ElementKind::U8 => 1.0 / 255.0,
        ElementKind::F32 | ElementKind::F64 => 1.0,
        other => {
            return Err(Error::InvalidArgument(format!("unsupported image element type {other:?}")));
        }
    };
    let px: Vec<f64> = (base..base + PIXELS).map(|p| images.data.get_f64(p) * scale).collect();
    if px.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidArgument(format!("image {i} has pixels outside [0, 1]")));
    }
    Ok(px)
}

/// Picks disjoint random train and test images, rotating each by an
/// independent uniform angle from `angle_range`.
pub fn build_rotation_dataset(
    images: &IdxTensor,
    angle_range: (f64, f64),
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<(RotationDataset, RotationDataset)> {
    let (lo, hi) = angle_range;
    if !(lo <= hi) || lo < -180.0 || hi > 180.0 {
        return Err(Error::InvalidArgument(format!("bad angle range [{lo}, {hi}]")));
    }
    let available = images.items();
    if n_train + n_test > available {
        return Err(Error::InvalidArgument(format!(
            "need {} images, only {available} available",
            n_train + n_test
        )));
    }
    let mut rng = rng::substream(seed, Stream::Split);
    let mut order: Vec<usize> = (0..available).collect();
    order.shuffle(&mut rng);
    let make = |idx: &[usize], split: Split, rng: &mut rand_chacha::ChaCha20Rng| -> Result<RotationDataset> {
        let mut x = Vec::with_capacity(idx.len() * PIXELS);
        let mut y = Vec::with_capacity(idx.len());
        for &i in idx {
            let angle = lo + (hi - lo) * rng.random::<f64>();
            x.extend(rotate_image(&unit_image(images, i)?, angle)?);
            y.push(angle);
        }
        Ok(RotationDataset {
            x,
            y,
            split,
            indices: idx.to_vec(),
            angle_range,
        })
    };
    let train = make(&order[..n_train], Split::Train, &mut rng)?;
    let test = make(&order[n_train..n_train + n_test], Split::Test, &mut rng)?;
    Ok((train, test))
}

/// Maps an image to its pixels followed by the `k` block responses
/// `(X_ij ŵ)_+`, computed on mean-centered pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterFeatures {
    pub k: usize,
    pub filter: Vec<f64>,
    pub pixel_mean: Vec<f64>,
}

impl FilterFeatures {
    pub fn width(&self) -> usize {
        PIXELS + self.k
    }

    pub fn augment(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() % PIXELS != 0 {
            return Err(Error::InvalidArgument("image data is not a whole number of rows".into()));
        }
        let b = PIXELS / self.k;
        let mut out = Vec::with_capacity(x.len() / PIXELS * self.width());
        let mut centered = vec![0.0; PIXELS];
        for row in x.chunks(PIXELS) {
            out.extend_from_slice(row);
            for ((c, v), m) in centered.iter_mut().zip(row).zip(&self.pixel_mean) {
                *c = v - m;
            }
            for j in 0..self.k {
                out.push(model::dot(&centered[j * b..(j + 1) * b], &self.filter).max(0.0));
            }
        }
        Ok(out)
    }
}

/// Fits the `k`-block relaxation to the training angles with `trials`
/// perturbations.
///
/// Pixels are centered by their training mean: with nonnegative features
/// every direction `w ≤ 0` keeps the constraints feasible and the LP is
/// unbounded. Angles are shifted by the lower end of the range so the
/// targets are nonnegative, as the slack sums require.
pub fn learn_filter_features(
    train: &RotationDataset,
    k: usize,
    trials: usize,
    seed: u64,
    cfg: &RelaxConfig,
) -> Result<(FilterFeatures, RecoveryOutcome)> {
    if k == 0 || PIXELS % k != 0 {
        return Err(Error::InvalidArgument(format!("k = {k} does not divide {PIXELS}")));
    }
    let n = train.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let mut mean = vec![0.0; PIXELS];
    for row in train.x.chunks(PIXELS) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let x: Vec<f64> = train
        .x
        .chunks(PIXELS)
        .flat_map(|row| row.iter().zip(&mean).map(|(v, m)| v - m))
        .collect();
    let y: Vec<f64> = train.y.iter().map(|a| a - train.angle_range.0).collect();
    let data = Dataset::new(n, PIXELS, k, x, y)?;
    let (reduced, basis) = restrict_to_span(&data)?;
    let out = relax::fit_amplified(&reduced, trials, seed, cfg, None)?;
    let features = FilterFeatures {
        k,
        filter: lift_from_span(&basis, &out.best.w_hat),
        pixel_mean: mean,
    };
    Ok((features, out))
}

/// Orthonormal basis (columns of a `b × r` row-major matrix) of the span
/// of all blocks, and the data expressed in it.
///
/// Filter directions orthogonal to every block (pixels that are blank in
/// all images, such as the frame border) leave the constraints untouched,
/// so the perturbed LP would be unbounded along them. Fitting inside the
/// span and lifting back sets those components to zero.
pub fn restrict_to_span(data: &Dataset) -> Result<(Dataset, Vec<f64>)> {
    let b = data.filter_len();
    let mut gram = nalgebra::DMatrix::<f64>::zeros(b, b);
    for i in 0..data.n {
        for j in 0..data.k {
            let v = nalgebra::DVector::from_column_slice(data.block(i, j));
            gram.ger(1.0, &v, &v, 1.0);
        }
    }
    let eig = gram.symmetric_eigen();
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..b).filter(|&c| eig.eigenvalues[c] > 1e-10 * top).collect();
    if keep.is_empty() {
        return Err(Error::InvalidArgument("every block is zero".into()));
    }
    let r = keep.len();
    let basis: Vec<f64> = (0..b)
        .flat_map(|p| keep.iter().map(move |&c| (p, c)))
        .map(|(p, c)| eig.eigenvectors[(p, c)])
        .collect();
    let mut x = Vec::with_capacity(data.n * data.k * r);
    for i in 0..data.n {
        for j in 0..data.k {
            let blk = data.block(i, j);
            x.extend((0..r).map(|c| (0..b).map(|p| blk[p] * basis[p * r + c]).sum::<f64>()));
        }
    }
    let reduced = Dataset::new(data.n, data.k * r, data.k, x, data.y.clone())?;
    Ok((reduced, basis))
}

/// Maps a filter in span coordinates back to pixel coordinates.
pub fn lift_from_span(basis: &[f64], w: &[f64]) -> Vec<f64> {
    let r = w.len();
    basis.chunks(r).map(|row| model::dot(row, w)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub angle_range: (f64, f64),
    pub n_train: usize,
    pub n_test: usize,
    pub k: usize,
    pub trials: usize,
    pub lambdas: Vec<f64>,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            angle_range: (-45.0, 45.0),
            n_train: 10_000,
            n_test: 5_000,
            k: 16,
            trials: 6,
            lambdas: (-3..=3).map(|e| 10f64.powi(e)).collect(),
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub raw_rmse: f64,
    pub filter_rmse: f64,
    pub raw_lambda: f64,
    pub filter_lambda: f64,
    pub filter: Vec<f64>,
    pub filter_train_residual: f64,
    pub n_train: usize,
    pub n_test: usize,
}

impl ExperimentResult {
    pub fn to_csv(&self) -> String {
        format!(
            "experiment,rmse\nls_raw_pixels,{:.16e}\nls_learned_filter,{:.16e}\n",
            self.raw_rmse, self.filter_rmse
        )
    }
}

/// Chooses `λ` on a held-out tail of the training rows, refits on all of
/// them and returns `(test rmse, λ)`.
pub fn tuned_ridge(
    x_train: &[f64],
    y_train: &[f64],
    x_test: &[f64],
    y_test: &[f64],
    width: usize,
    lambdas: &[f64],
    validation_fraction: f64,
) -> Result<(f64, f64)> {
    if lambdas.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".into()));
    }
    let n = y_train.len();
    let n_val = ((n as f64 * validation_fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let n_fit = n - n_val;
    if n_fit == 0 {
        return Err(Error::InvalidArgument("not enough rows for a validation split".into()));
    }
    let gram = RidgeGram::new(&x_train[..n_fit * width], width, &y_train[..n_fit])?;
    let mut best = (f64::INFINITY, lambdas[0]);
    for &lam in lambdas {
        let m = gram.solve(lam)?;
        let r = rmse(&ridge_predict(&m, &x_train[n_fit * width..])?, &y_train[n_fit..])?;
        if r < best.0 {
            best = (r, lam);
        }
    }
    let model = RidgeGram::new(x_train, width, y_train)?.solve(best.1)?;
    Ok((rmse(&ridge_predict(&model, x_test)?, y_test)?, best.1))
}

/// Runs the comparison: training rows come from `train_images`, test rows
/// from `test_images`.
pub fn run_experiment(
    train_images: &IdxTensor,
    test_images: &IdxTensor,
    cfg: &ExperimentConfig,
) -> Result<ExperimentResult> {
    let (train, _) = build_rotation_dataset(train_images, cfg.angle_range, cfg.n_train, 0, rng::mix(&[cfg.seed, 1]))?;
    let (_, test) = build_rotation_dataset(test_images, cfg.angle_range, 0, cfg.n_test, rng::mix(&[cfg.seed, 2]))?;
    let (raw_rmse, raw_lambda) = tuned_ridge(
        &train.x,
        &train.y,
        &test.x,
        &test.y,
        PIXELS,
        &cfg.lambdas,
        cfg.validation_fraction,
    )?;
    let relax_cfg = RelaxConfig::default();
    let (features, outcome) = learn_filter_features(&train, cfg.k, cfg.trials, rng::mix(&[cfg.seed, 3]), &relax_cfg)?;
    let (filter_rmse, filter_lambda) = tuned_ridge(
        &features.augment(&train.x)?,
        &train.y,
        &features.augment(&test.x)?,
        &test.y,
        features.width(),
        &cfg.lambdas,
        cfg.validation_fraction,
    )?;
    Ok(ExperimentResult {
        raw_rmse,
        filter_rmse,
        raw_lambda,
        filter_lambda,
        filter: features.filter,
        filter_train_residual: outcome.best.train_residual,
        n_train: train.len(),
        n_test: test.len(),
    })
}

pub struct MnistFiles {
    pub train_images: IdxTensor,
    pub train_labels: IdxTensor,
    pub test_images: IdxTensor,
    pub test_labels: IdxTensor,
}

fn find_file(dir: &Path, stem: &str, kind: &str) -> Option<PathBuf> {
    [format!("{stem}-{kind}-ubyte"), format!("{stem}.{kind}-ubyte")]
        .into_iter()
        .map(|name| dir.join(name))
        .find(|p| p.is_file())
}

/// Paths of the four standard files in `dir`, if all are present.
pub fn locate_files(dir: &Path) -> Option<[PathBuf; 4]> {
    Some([
        find_file(dir, "train-images", "idx3")?,
        find_file(dir, "train-labels", "idx1")?,
        find_file(dir, "t10k-images", "idx3")?,
        find_file(dir, "t10k-labels", "idx1")?,
    ])
}

/// The directory named by [`DATA_DIR_ENV`], when it holds all four files.
pub fn data_dir_from_env() -> Option<PathBuf> {
    let dir = PathBuf::from(std::env::var_os(DATA_DIR_ENV)?);
    locate_files(&dir).map(|_| dir)
}

/// Reads the four files; labels are only checked for a matching count.
pub fn load_dir(dir: &Path) -> Result<MnistFiles> {
    let [a, b, c, d] = locate_files(dir).ok_or_else(|| {
        Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("MNIST IDX files not found in {}", dir.display()),
        ))
    })?;
    let files = MnistFiles {
        train_images: read_idx(&a)?,
        train_labels: read_idx(&b)?,
        test_images: read_idx(&c)?,
        test_labels: read_idx(&d)?,
    };
    for (img, lab) in [
        (&files.train_images, &files.train_labels),
        (&files.test_images, &files.test_labels),
    ] {
        if img.items() != lab.items() {
            return Err(Error::DimensionMismatch {
                what: "label count",
                expected: img.items(),
                found: lab.items(),
            });
        }
    }
    Ok(files)
}

/// Digit-like test images: a few thick strokes near the center, stored as
/// unsigned bytes so they go through the same path as real data.
pub fn synthetic_digits(n: usize, seed: u64) -> IdxTensor {
    let mut rng = rng::substream(seed, Stream::Features);
    let mut data = Vec::with_capacity(n * PIXELS);
    let c = (SIDE as f64 - 1.0) / 2.0;
    for _ in 0..n {
        let mut img = vec![0.0f64; PIXELS];
        let strokes = rng.random_range(2..=3);
        for _ in 0..strokes {
            let pt = |rng: &mut rand_chacha::ChaCha20Rng| {
                let a = rng.random::<f64>() * std::f64::consts::TAU;
                let r = 7.0 * rng.random::<f64>().sqrt();
                (c + r * a.sin(), c + r * a.cos())
            };
            let (p0, p1) = (pt(&mut rng), pt(&mut rng));
            for (p, v) in img.iter_mut().enumerate() {
                let (r, col) = ((p / SIDE) as f64, (p % SIDE) as f64);
                let (dr, dc) = (p1.0 - p0.0, p1.1 - p0.1);
                let len2 = (dr * dr + dc * dc).max(1e-12);
                let t = (((r - p0.0) * dr + (col - p0.1) * dc) / len2).clamp(0.0, 1.0);
                let (qr, qc) = (p0.0 + t * dr - r, p0.1 + t * dc - col);
                let s = (-(qr * qr + qc * qc) / 1.5).exp();
                *v = v.max(s);
            }
        }
        data.extend(img.iter().map(|v| (v * 255.0).round() as u8));
    }
    IdxTensor::new(vec![n, SIDE, SIDE], IdxData::U8(data)).expect("consistent dims")
}
