use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::qpsolve::least_squares;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
}

fn shape(x: &[f64], ncols: usize, y: &[f64]) -> Result<usize> {
    if ncols == 0 || x.len() % ncols != 0 {
        return Err(Error::InvalidArgument(format!(
            "feature matrix of length {} is not a multiple of {ncols} columns",
            x.len()
        )));
    }
    let n = x.len() / ncols;
    check_len("targets", n, y.len())?;
    if n == 0 {
        return Err(Error::InvalidArgument("ridge regression needs at least one row".into()));
    }
    Ok(n)
}

fn column_means(x: &[f64], ncols: usize, n: usize) -> Vec<f64> {
    let mut m = vec![0.0; ncols];
    for row in x.chunks(ncols) {
        for (a, v) in m.iter_mut().zip(row) {
            *a += v;
        }
    }
    m.iter_mut().for_each(|v| *v /= n as f64);
    m
}

/// Centered normal equations, built once and solved for many `λ > 0`.
pub struct RidgeGram {
    gram: DMatrix<f64>,
    rhs: DVector<f64>,
    x_mean: Vec<f64>,
    y_mean: f64,
}

impl RidgeGram {
    pub fn new(x: &[f64], ncols: usize, y: &[f64]) -> Result<Self> {
        let n = shape(x, ncols, y)?;
        let x_mean = column_means(x, ncols, n);
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let xc = DMatrix::from_fn(n, ncols, |i, j| x[i * ncols + j] - x_mean[j]);
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
        let gram = xc.tr_mul(&xc);
        let rhs = xc.tr_mul(&yc);
        Ok(Self {
            gram,
            rhs,
            x_mean,
            y_mean,
        })
    }

    pub fn solve(&self, lambda: f64) -> Result<RidgeModel> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "normal-equation solve needs a positive lambda, got {lambda}"
            )));
        }
        let mut a = self.gram.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += lambda;
        }
        let chol = a
            .cholesky()
            .ok_or_else(|| Error::InvalidArgument("ridge system is not positive definite".into()))?;
        let w = chol.solve(&self.rhs);
        let weights: Vec<f64> = w.iter().copied().collect();
        let intercept = self.y_mean - weights.iter().zip(&self.x_mean).map(|(a, b)| a * b).sum::<f64>();
        Ok(RidgeModel {
            weights,
            intercept,
            lambda,
        })
    }
}

/// Minimizes `‖y − Xw − b‖² + λ‖w‖²` with an unpenalized intercept `b`.
/// `λ = 0` gives the minimum-norm least-squares weights.
pub fn ridge_fit(x: &[f64], ncols: usize, y: &[f64], lambda: f64) -> Result<RidgeModel> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be nonnegative, got {lambda}")));
    }
    if lambda > 0.0 {
        return RidgeGram::new(x, ncols, y)?.solve(lambda);
    }
    let n = shape(x, ncols, y)?;
    let x_mean = column_means(x, ncols, n);
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let xc: Vec<f64> = x
        .chunks(ncols)
        .flat_map(|row| row.iter().zip(&x_mean).map(|(v, m)| v - m))
        .collect();
    let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let weights = least_squares(&xc, ncols, &yc)?;
    let intercept = y_mean - weights.iter().zip(&x_mean).map(|(a, b)| a * b).sum::<f64>();
    Ok(RidgeModel {
        weights,
        intercept,
        lambda,
    })
}

pub fn ridge_predict(model: &RidgeModel, x: &[f64]) -> Result<Vec<f64>> {
    let p = model.weights.len();
    if p == 0 || x.len() % p != 0 {
        return Err(Error::InvalidArgument(format!(
            "feature matrix of length {} does not have {p} columns",
            x.len()
        )));
    }
    Ok(x
        .chunks(p)
        .map(|row| model.intercept + row.iter().zip(&model.weights).map(|(a, b)| a * b).sum::<f64>())
        .collect())
}

pub fn rmse(pred: &[f64], y: &[f64]) -> Result<f64> {
    check_len("predictions", y.len(), pred.len())?;
    if y.is_empty() {
        return Err(Error::InvalidArgument("rmse of an empty set".into()));
    }
    Ok((pred.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64).sqrt())
}
