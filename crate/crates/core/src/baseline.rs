//! Gradient descent on the non-convex loss `Σ_i (y_i − Σ_j (X_ij w)_+)²`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::model::{self, Dataset};
use crate::rng::{self, Stream};

pub const DIVERGENCE_LOSS: f64 = 1e12;
const POWER_STEPS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GdConfig {
    /// `None` picks `0.5 / (k·λ_max)` of the stacked block matrix.
    pub step_size: Option<f64>,
    pub max_iters: usize,
    /// `None` picks `1/√(d/k)`.
    pub init_scale: Option<f64>,
    pub stop_tol: f64,
    pub seed: u64,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self {
            step_size: None,
            max_iters: 5000,
            init_scale: None,
            stop_tol: 1e-10,
            seed: 0,
        }
    }
}

impl GdConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.step_size {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidArgument(format!("step size must be positive, got {s}")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if let Some(s) = self.init_scale {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::InvalidArgument(format!("init scale must be nonnegative, got {s}")));
            }
        }
        if !(self.stop_tol >= 0.0) {
            return Err(Error::InvalidArgument("stop_tol must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GdStatus {
    Converged,
    MaxIterations,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdResult {
    pub w_hat: Vec<f64>,
    pub final_loss: f64,
    /// Number of steps taken.
    pub iters_used: usize,
    pub status: GdStatus,
    pub step_size: f64,
    pub seed: u64,
}

/// Loss and (sub)gradient; a block exactly at the kink contributes nothing.
pub fn loss_grad(data: &Dataset, w: &[f64]) -> Result<(f64, Vec<f64>)> {
    let b = data.filter_len();
    check_len("filter", b, w.len())?;
    let mut loss = 0.0;
    let mut grad = vec![0.0; b];
    let mut active = Vec::with_capacity(data.k);
    for i in 0..data.n {
        active.clear();
        let mut out = 0.0;
        for j in 0..data.k {
            let u = model::dot(data.block(i, j), w);
            if u > 0.0 {
                out += u;
                active.push(j);
            }
        }
        let e = out - data.y[i];
        loss += e * e;
        for &j in &active {
            for (g, x) in grad.iter_mut().zip(data.block(i, j)) {
                *g += 2.0 * e * x;
            }
        }
    }
    Ok((loss, grad))
}

/// Largest eigenvalue of `Σ_ij X_ijᵀ X_ij` by power iteration.
pub fn block_gram_lambda_max(data: &Dataset, steps: usize) -> f64 {
    let b = data.filter_len();
    let mut v: Vec<f64> = (0..b).map(|c| 1.0 + c as f64 / b as f64).collect();
    let mut lambda = 0.0;
    for _ in 0..steps.max(1) {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        let mut next = vec![0.0; b];
        for i in 0..data.n {
            for j in 0..data.k {
                let blk = data.block(i, j);
                let u = model::dot(blk, &v);
                for (nv, x) in next.iter_mut().zip(blk) {
                    *nv += u * x;
                }
            }
        }
        lambda = model::dot(&next, &v);
        v = next;
    }
    lambda
}

/// `0.5 / (k·λ_max)`: the loss curvature is at most `2k·λ_max` on any
/// fixed activation pattern, so this is one over that bound.
pub fn default_step(data: &Dataset) -> f64 {
    let lam = block_gram_lambda_max(data, POWER_STEPS);
    if lam > 0.0 {
        0.5 / (data.k as f64 * lam)
    } else {
        1.0
    }
}

pub fn initial_point(data: &Dataset, cfg: &GdConfig) -> Vec<f64> {
    let b = data.filter_len();
    let scale = cfg.init_scale.unwrap_or(1.0 / (b as f64).sqrt());
    let mut rng = rng::substream(cfg.seed, Stream::Init);
    rng::standard_normal_vec(&mut rng, b)
        .into_iter()
        .map(|v| v * scale)
        .collect()
}

pub fn gd_fit(data: &Dataset, cfg: &GdConfig) -> Result<GdResult> {
    let w0 = initial_point(data, cfg);
    gd_from(data, w0, cfg)
}

/// Fixed-step descent from an explicit starting point.
pub fn gd_from(data: &Dataset, mut w: Vec<f64>, cfg: &GdConfig) -> Result<GdResult> {
    cfg.validate()?;
    check_len("initial filter", data.filter_len(), w.len())?;
    let step = match cfg.step_size {
        Some(s) => s,
        None => default_step(data),
    };
    let mut iters = 0;
    let status = loop {
        let (loss, grad) = loss_grad(data, &w)?;
        if !(loss <= DIVERGENCE_LOSS) {
            break GdStatus::Diverged;
        }
        let gmax = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        if gmax <= cfg.stop_tol {
            break GdStatus::Converged;
        }
        if iters == cfg.max_iters {
            break GdStatus::MaxIterations;
        }
        for (wv, g) in w.iter_mut().zip(&grad) {
            *wv -= step * g;
        }
        iters += 1;
    };
    let final_loss = model::residual(data, &w)?;
    Ok(GdResult {
        w_hat: w,
        final_loss,
        iters_used: iters,
        status,
        step_size: step,
        seed: cfg.seed,
    })
}

/// Largest coordinate difference between the analytic gradient and central
/// differences with step `h`, relative to the larger gradient's ∞-norm.
pub fn fd_check(data: &Dataset, w: &[f64], h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    check_len("filter", data.filter_len(), w.len())?;
    for i in 0..data.n {
        for j in 0..data.k {
            let blk = data.block(i, j);
            let norm = blk.iter().map(|x| x * x).sum::<f64>().sqrt();
            if model::dot(blk, w).abs() <= 10.0 * h * norm {
                return Err(Error::InvalidArgument(format!(
                    "block ({i}, {j}) is within 10h of its kink"
                )));
            }
        }
    }
    let (_, grad) = loss_grad(data, w)?;
    let mut fd = vec![0.0; w.len()];
    let mut probe = w.to_vec();
    for c in 0..w.len() {
        probe[c] = w[c] + h;
        let up = model::residual(data, &probe)?;
        probe[c] = w[c] - h;
        let down = model::residual(data, &probe)?;
        probe[c] = w[c];
        fd[c] = (up - down) / (2.0 * h);
    }
    let scale = grad
        .iter()
        .chain(&fd)
        .fold(0.0f64, |a, g| a.max(g.abs()))
        .max(f64::MIN_POSITIVE);
    Ok(grad
        .iter()
        .zip(&fd)
        .fold(0.0f64, |a, (g, f)| a.max((g - f).abs()))
        / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sample_planted;

    fn d1() -> Dataset {
        Dataset::new(2, 1, 1, vec![1.0, -1.0], vec![1.0, 0.0]).unwrap()
    }

    #[test]
    fn hand_computed_gradient() {
        let (loss, grad) = loss_grad(&d1(), &[0.5]).unwrap();
        assert!((loss - 0.25).abs() < 1e-15);
        assert!((grad[0] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn kink_contributes_nothing() {
        let data = Dataset::new(1, 1, 1, vec![1.0], vec![1.0]).unwrap();
        let (loss, grad) = loss_grad(&data, &[0.0]).unwrap();
        assert_eq!(loss, 1.0);
        assert_eq!(grad, vec![0.0]);
    }

    #[test]
    fn zero_gradient_at_the_truth() {
        for k in [1, 2, 4] {
            let (m, data) = sample_planted(50, 8, k, 3).unwrap();
            let (loss, grad) = loss_grad(&data, &m.w_star).unwrap();
            assert!(loss < 1e-24);
            assert!(grad.iter().all(|g| g.abs() <= 1e-12));
            let cfg = GdConfig { seed: 1, ..GdConfig::default() };
            let out = gd_from(&data, m.w_star.clone(), &cfg).unwrap();
            assert_eq!(out.iters_used, 0);
            assert_eq!(out.w_hat, m.w_star);
            assert_eq!(out.status, GdStatus::Converged);
        }
    }

    #[test]
    fn d1_descent_converges() {
        let cfg = GdConfig {
            step_size: Some(0.1),
            max_iters: 200,
            ..GdConfig::default()
        };
        let out = gd_from(&d1(), vec![0.5], &cfg).unwrap();
        assert!((out.w_hat[0] - 1.0).abs() < 1e-5);
        assert!(out.final_loss <= 1e-10);
        assert!(out.iters_used <= 200);
    }

    #[test]
    fn huge_steps_diverge() {
        let (_, data) = sample_planted(30, 4, 1, 2).unwrap();
        let cfg = GdConfig {
            step_size: Some(10.0),
            init_scale: Some(1.0),
            ..GdConfig::default()
        };
        assert_eq!(gd_fit(&data, &cfg).unwrap().status, GdStatus::Diverged);
    }

    #[test]
    fn config_validation() {
        let (_, data) = sample_planted(5, 2, 1, 2).unwrap();
        for bad in [
            GdConfig { step_size: Some(0.0), ..GdConfig::default() },
            GdConfig { max_iters: 0, ..GdConfig::default() },
            GdConfig { init_scale: Some(-1.0), ..GdConfig::default() },
        ] {
            assert!(gd_fit(&data, &bad).is_err());
        }
        assert!(loss_grad(&data, &[1.0]).is_err());
    }

    #[test]
    fn finite_differences_in_the_quadratic_region() {
        // every block active: the loss is an exact quadratic
        let x = vec![1.0, 2.0, 0.5, 1.5, 2.0, 1.0, 3.0, 0.2, 0.7, 1.1, 0.4, 0.9];
        let data = Dataset::new(3, 4, 2, x, vec![1.0, -2.0, 0.5]).unwrap();
        let w = [0.3, 0.8];
        assert!(fd_check(&data, &w, 1e-6).unwrap() <= 1e-7);
        let w10 = [3.0, 8.0];
        assert!(fd_check(&data, &w10, 1e-6).unwrap() <= 1e-7);
    }

    #[test]
    fn kink_adjacent_point_rejected() {
        let data = Dataset::new(1, 2, 1, vec![1.0, 1.0], vec![0.0]).unwrap();
        assert!(fd_check(&data, &[1e-7, -1e-7 + 1e-9], 1e-6).is_err());
        assert!(fd_check(&data, &[1.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn power_iteration_on_a_diagonal_gram() {
        let data = Dataset::new(2, 2, 1, vec![3.0, 0.0, 0.0, 1.0], vec![0.0, 0.0]).unwrap();
        assert!((block_gram_lambda_max(&data, 50) - 9.0).abs() < 1e-9);
        assert!((default_step(&data) - 0.5 / 9.0).abs() < 1e-6);
    }
}
