//! Planted teacher network, Gaussian data and the non-convex forward map.
//!
//! A sample row of length `d` is cut into `k` contiguous blocks of length
//! `d / k`; the same filter is applied to every block and the ReLU outputs
//! are summed.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedModel {
    pub d: usize,
    pub k: usize,
    pub w_star: Vec<f64>,
    pub seed: u64,
}

impl PlantedModel {
    pub fn new(d: usize, k: usize, w_star: Vec<f64>, seed: u64) -> Result<Self> {
        validate_shape(d, k)?;
        check_len("planted filter", d / k, w_star.len())?;
        if w_star.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("planted filter has non-finite entries".into()));
        }
        if w_star.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidArgument("planted filter is identically zero".into()));
        }
        Ok(Self { d, k, w_star, seed })
    }

    pub fn filter_len(&self) -> usize {
        self.d / self.k
    }
}

/// Feature matrix (row-major, `n × d`) with labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Generation seed, recorded in exported files; zero when not generated.
    pub seed: u64,
}

fn validate_shape(d: usize, k: usize) -> Result<()> {
    if d == 0 || k == 0 {
        return Err(Error::InvalidArgument("d and k must be positive".into()));
    }
    if d % k != 0 {
        return Err(Error::InvalidArgument(format!("k = {k} does not divide d = {d}")));
    }
    Ok(())
}

impl Dataset {
    pub fn new(n: usize, d: usize, k: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        validate_shape(d, k)?;
        check_len("feature matrix", n * d, x.len())?;
        check_len("labels", n, y.len())?;
        Ok(Self {
            n,
            d,
            k,
            x,
            y,
            seed: 0,
        })
    }

    pub fn filter_len(&self) -> usize {
        self.d / self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    /// Block `j` of sample `i`, the length-`d/k` slice `X_ij`.
    pub fn block(&self, i: usize, j: usize) -> &[f64] {
        let b = self.filter_len();
        &self.row(i)[j * b..(j + 1) * b]
    }

    pub fn forward(&self, w: &[f64]) -> Result<Vec<f64>> {
        forward(&self.x, self.d, w, self.k)
    }

    /// Keeps only the listed samples.
    pub fn subset(&self, rows: &[usize]) -> Self {
        let mut x = Vec::with_capacity(rows.len() * self.d);
        for &i in rows {
            x.extend_from_slice(self.row(i));
        }
        Self {
            n: rows.len(),
            d: self.d,
            k: self.k,
            x,
            y: rows.iter().map(|&i| self.y[i]).collect(),
            seed: self.seed,
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn relu(u: f64) -> f64 {
    if u > 0.0 {
        u
    } else {
        0.0
    }
}

/// `out_i = Σ_j max(X_ij · w, 0)` for a row-major `x` with `d` columns.
pub fn forward(x: &[f64], d: usize, w: &[f64], k: usize) -> Result<Vec<f64>> {
    validate_shape(d, k)?;
    check_len("filter", d / k, w.len())?;
    if x.len() % d != 0 {
        return Err(Error::InvalidArgument("feature data is not a whole number of rows".into()));
    }
    Ok(x
        .chunks_exact(d)
        .map(|row| row.chunks_exact(d / k).map(|blk| relu(dot(blk, w))).sum())
        .collect())
}

/// Non-convex training loss `Σ_i (forward_i − y_i)²`.
pub fn residual(data: &Dataset, w: &[f64]) -> Result<f64> {
    let out = data.forward(w)?;
    Ok(out.iter().zip(&data.y).map(|(f, y)| (f - y) * (f - y)).sum())
}

/// Draws `w*` and `X` with i.i.d. standard normal entries from separate
/// substreams of `seed` and labels the data with the teacher network.
pub fn sample_planted(n: usize, d: usize, k: usize, seed: u64) -> Result<(PlantedModel, Dataset)> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    validate_shape(d, k)?;
    let mut frng = rng::substream(seed, Stream::Filter);
    let mut w_star = rng::standard_normal_vec(&mut frng, d / k);
    while w_star.iter().all(|&v| v == 0.0) {
        w_star = rng::standard_normal_vec(&mut frng, d / k);
    }
    let model = PlantedModel::new(d, k, w_star, seed)?;
    let data = planted_dataset(&model, n, seed)?;
    Ok((model, data))
}

/// Fresh Gaussian features for an existing model, labelled by it.
pub fn planted_dataset(model: &PlantedModel, n: usize, seed: u64) -> Result<Dataset> {
    let mut xrng = rng::substream(seed, Stream::Features);
    let x = rng::standard_normal_vec(&mut xrng, n * model.d);
    let y = forward(&x, model.d, &model.w_star, model.k)?;
    let mut data = Dataset::new(n, model.d, model.k, x, y)?;
    data.seed = seed;
    Ok(data)
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV text: a `# n=.. d=.. k=.. seed=..` line, the header `y,x_1,...,x_d`,
/// then one sample per line with 17 significant digits.
pub fn dataset_to_csv(data: &Dataset) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# n={} d={} k={} seed={}", data.n, data.d, data.k, data.seed);
    out.push('y');
    for j in 1..=data.d {
        let _ = write!(out, ",x_{j}");
    }
    out.push('\n');
    for i in 0..data.n {
        out.push_str(&fmt17(data.y[i]));
        for v in data.row(i) {
            out.push(',');
            out.push_str(&fmt17(*v));
        }
        out.push('\n');
    }
    out
}

fn schema(line: usize, message: impl Into<String>) -> Error {
    Error::Schema {
        line,
        message: message.into(),
    }
}

pub fn dataset_from_csv(text: &str) -> Result<Dataset> {
    let mut lines = text.lines();
    let meta = lines.next().ok_or_else(|| schema(1, "empty file"))?;
    let meta = meta
        .strip_prefix('#')
        .ok_or_else(|| schema(1, "missing `# n=.. d=.. k=.. seed=..` metadata line"))?;
    let (mut n, mut d, mut k, mut seed) = (None, None, None, None);
    for tok in meta.split_whitespace() {
        let (key, val) = tok
            .split_once('=')
            .ok_or_else(|| schema(1, format!("malformed metadata token `{tok}`")))?;
        let parsed: u64 = val
            .parse()
            .map_err(|_| schema(1, format!("metadata value `{val}` is not an integer")))?;
        match key {
            "n" => n = Some(parsed as usize),
            "d" => d = Some(parsed as usize),
            "k" => k = Some(parsed as usize),
            "seed" => seed = Some(parsed),
            other => return Err(schema(1, format!("unknown metadata key `{other}`"))),
        }
    }
    let (Some(n), Some(d), Some(k), Some(seed)) = (n, d, k, seed) else {
        return Err(schema(1, "metadata must define n, d, k and seed"));
    };
    validate_shape(d, k).map_err(|e| schema(1, e.to_string()))?;

    let header = lines.next().ok_or_else(|| schema(2, "missing column header"))?;
    let expected: Vec<String> = std::iter::once("y".to_string())
        .chain((1..=d).map(|j| format!("x_{j}")))
        .collect();
    if header.split(',').map(str::trim).ne(expected.iter().map(String::as_str)) {
        return Err(schema(2, format!("header must be `y,x_1,...,x_{d}`")));
    }

    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    let mut rows = 0;
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 3;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 1 {
            return Err(schema(
                lineno,
                format!("expected {} columns, found {}", d + 1, fields.len()),
            ));
        }
        for (c, f) in fields.iter().enumerate() {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| schema(lineno, format!("column {} is not a number: `{f}`", c + 1)))?;
            if c == 0 {
                y.push(v);
            } else {
                x.push(v);
            }
        }
        rows += 1;
    }
    if rows != n {
        return Err(schema(1, format!("metadata says n={n} but the file has {rows} samples")));
    }
    let mut data = Dataset::new(n, d, k, x, y)?;
    data.seed = seed;
    Ok(data)
}

pub fn save_dataset(data: &Dataset, path: &Path) -> Result<()> {
    std::fs::write(path, dataset_to_csv(data))?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    dataset_from_csv(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_planted_sample_shapes() {
        let (m, data) = sample_planted(3, 4, 2, 7).unwrap();
        assert_eq!(data.x.len(), 12);
        assert_eq!(data.y.len(), 3);
        assert_eq!(m.w_star.len(), 2);
        assert!(data.y.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn seeded_generation_is_bitwise_reproducible() {
        let a = sample_planted(3, 4, 2, 7).unwrap();
        let b = sample_planted(3, 4, 2, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_planted(3, 4, 2, 8).unwrap();
        assert_ne!(a.1.x, c.1.x);
    }

    #[test]
    fn active_fraction_near_half() {
        // P(x_iᵀw* > 0) = ½; 95% binomial band for n = 1000 is within [0.44, 0.56]
        let (_, data) = sample_planted(1000, 10, 1, 1).unwrap();
        let frac = data.y.iter().filter(|&&v| v > 0.0).count() as f64 / 1000.0;
        assert!((0.44..=0.56).contains(&frac), "{frac}");
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(sample_planted(3, 5, 2, 1).is_err());
        assert!(sample_planted(0, 4, 2, 1).is_err());
        assert!(sample_planted(3, 0, 1, 1).is_err());
        assert!(sample_planted(3, 4, 0, 1).is_err());
    }

    #[test]
    fn forward_examples() {
        assert_eq!(forward(&[1.0, -3.0], 2, &[0.0, 0.0], 1).unwrap(), vec![0.0]);
        assert_eq!(forward(&[1.0, -3.0], 2, &[1.0, 0.0], 1).unwrap(), vec![1.0]);
        assert_eq!(forward(&[2.0, -1.0], 2, &[3.0], 2).unwrap(), vec![6.0]);
        assert!(forward(&[2.0, -1.0], 2, &[3.0, 1.0], 2).is_err());
    }

    #[test]
    fn residual_examples() {
        let (m, data) = sample_planted(50, 6, 3, 3).unwrap();
        assert!(residual(&data, &m.w_star).unwrap() <= 1e-20);
        let zero = Dataset::new(2, 1, 1, vec![1.0, -1.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(residual(&zero, &[0.0]).unwrap(), 0.0);
        let d1 = Dataset::new(2, 1, 1, vec![1.0, -1.0], vec![1.0, 0.0]).unwrap();
        assert!((residual(&d1, &[0.5]).unwrap() - 0.25).abs() < 1e-15);
        assert!(residual(&d1, &[0.5, 1.0]).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let (_, data) = sample_planted(5, 4, 2, 99).unwrap();
        let text = dataset_to_csv(&data);
        assert!(text.starts_with("# n=5 d=4 k=2 seed=99\ny,x_1,x_2,x_3,x_4\n"));
        assert_eq!(dataset_from_csv(&text).unwrap(), data);
    }

    #[test]
    fn csv_schema_errors_name_the_line() {
        let (_, data) = sample_planted(5, 2, 1, 1).unwrap();
        let text = dataset_to_csv(&data);
        let no_meta: String = text.lines().skip(1).map(|l| format!("{l}\n")).collect();
        match dataset_from_csv(&no_meta) {
            Err(Error::Schema { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[4].push_str(",1.0");
        match dataset_from_csv(&lines.join("\n")) {
            Err(Error::Schema { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn forward_nonnegative_and_homogeneous(
            x in prop::collection::vec(-5.0f64..5.0, 12),
            w in prop::collection::vec(-3.0f64..3.0, 2),
            c in 0.0f64..10.0,
        ) {
            let out = forward(&x, 6, &w, 3).unwrap();
            prop_assert!(out.iter().all(|&v| v >= 0.0));
            let cw: Vec<f64> = w.iter().map(|v| c * v).collect();
            let scaled = forward(&x, 6, &cw, 3).unwrap();
            for (a, b) in scaled.iter().zip(&out) {
                prop_assert!((a - c * b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn single_block_is_elementwise_relu(
            x in prop::collection::vec(-5.0f64..5.0, 9),
            w in prop::collection::vec(-3.0f64..3.0, 3),
        ) {
            let out = forward(&x, 3, &w, 1).unwrap();
            for (row, o) in x.chunks(3).zip(&out) {
                prop_assert_eq!(*o, dot(row, &w).max(0.0));
            }
        }
    }
}
