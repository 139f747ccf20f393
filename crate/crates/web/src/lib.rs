//! WebAssembly bindings for the browser demo. The computations are plain
//! functions so they can be tested natively; the `#[wasm_bindgen]` items
//! only convert arguments.

use convrelax::model::sample_planted;
use convrelax::relax::{self, RelaxConfig};
use convrelax::rng::mix;
use convrelax::sweep::{self, GridSpec, Method};
use wasm_bindgen::prelude::*;

/// Relaxation success rates (k = 1), row-major with one row per `n`.
pub fn phase_rates(n_values: &[usize], d_values: &[usize], trials: usize, seed: u64) -> Result<Vec<f64>, String> {
    let mut spec = GridSpec::default_for(1);
    spec.n_values = n_values.to_vec();
    spec.d_values = d_values.to_vec();
    spec.trials = trials;
    spec.methods = vec![Method::Relaxation];
    spec.master_seed = seed;
    let cells = sweep::run_grid(&spec).map_err(|e| e.to_string())?;
    Ok(cells.iter().map(|c| c.success_rate).collect())
}

/// One planted two-dimensional LP and its solution.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct LpPicture {
    rows: Vec<f64>,
    labels: Vec<f64>,
    w_star: Vec<f64>,
    r: Vec<f64>,
    w_hat: Vec<f64>,
    optimal: bool,
    recovered: bool,
}

#[wasm_bindgen]
impl LpPicture {
    /// Sample features, flattened `(x_i1, x_i2)` pairs.
    #[wasm_bindgen(getter)]
    pub fn rows(&self) -> Vec<f64> {
        self.rows.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn labels(&self) -> Vec<f64> {
        self.labels.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn w_star(&self) -> Vec<f64> {
        self.w_star.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn r(&self) -> Vec<f64> {
        self.r.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn w_hat(&self) -> Vec<f64> {
        self.w_hat.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn optimal(&self) -> bool {
        self.optimal
    }
    #[wasm_bindgen(getter)]
    pub fn recovered(&self) -> bool {
        self.recovered
    }
}

pub fn lp_picture_for(n: usize, seed: u64) -> Result<LpPicture, String> {
    let (model, data) = sample_planted(n, 2, 1, mix(&[seed, 1])).map_err(|e| e.to_string())?;
    let fit = relax::fit(&data, 0.0, mix(&[seed, 2])).map_err(|e| e.to_string())?;
    let optimal = fit.is_optimal();
    let recovered = optimal
        && relax::assess(&fit.w_hat, &model.w_star, relax::DEFAULT_TAU)
            .map_err(|e| e.to_string())?
            .success;
    Ok(LpPicture {
        rows: data.x.clone(),
        labels: data.y.clone(),
        w_star: model.w_star.clone(),
        r: fit.r_used.clone(),
        w_hat: fit.w_hat.clone(),
        optimal,
        recovered,
    })
}

/// Entry `t − 1` is the fraction of `reps` planted instances recovered by
/// at least one of the first `t` perturbations, for `t = 1..=max_trials`.
pub fn amplification_rates(n: usize, d: usize, max_trials: usize, reps: usize, seed: u64) -> Result<Vec<f64>, String> {
    if max_trials == 0 || reps == 0 {
        return Err("max_trials and reps must be positive".into());
    }
    let cfg = RelaxConfig::default();
    let mut hits = vec![0usize; max_trials];
    for rep in 0..reps {
        let (model, data) = sample_planted(n, d, 1, mix(&[seed, 3, rep as u64])).map_err(|e| e.to_string())?;
        let mut first = None;
        for t in 0..max_trials {
            let fit = relax::fit_seeded(&data, mix(&[seed, 4, rep as u64, t as u64]), &cfg).map_err(|e| e.to_string())?;
            let ok = fit.is_optimal()
                && relax::assess(&fit.w_hat, &model.w_star, cfg.tau)
                    .map_err(|e| e.to_string())?
                    .success;
            if ok {
                first = Some(t);
                break;
            }
        }
        if let Some(t) = first {
            hits[t..].iter_mut().for_each(|h| *h += 1);
        }
    }
    Ok(hits.iter().map(|&h| h as f64 / reps as f64).collect())
}

fn to_sizes(v: &[u32]) -> Vec<usize> {
    v.iter().map(|&x| x as usize).collect()
}

#[wasm_bindgen]
pub fn phase_heatmap(n_values: &[u32], d_values: &[u32], trials: u32, seed: u32) -> Result<Vec<f64>, JsError> {
    phase_rates(&to_sizes(n_values), &to_sizes(d_values), trials as usize, seed as u64).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn lp_picture(n: u32, seed: u32) -> Result<LpPicture, JsError> {
    lp_picture_for(n as usize, seed as u64).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn amplification_curve(n: u32, d: u32, max_trials: u32, reps: u32, seed: u32) -> Result<Vec<f64>, JsError> {
    amplification_rates(n as usize, d as usize, max_trials as usize, reps as usize, seed as u64)
        .map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heatmap_has_one_rate_per_cell() {
        let rates = phase_rates(&[2, 40], &[2, 3], 10, 1).unwrap();
        assert_eq!(rates.len(), 4);
        assert!(rates.iter().all(|r| (0.0..=1.0).contains(r)));
        // fewer samples than dimensions: the LP is unbounded
        assert_eq!(rates[1], 0.0);
    }

    #[test]
    fn picture_is_consistent() {
        let p = lp_picture_for(12, 5).unwrap();
        assert_eq!(p.rows.len(), 24);
        assert_eq!(p.labels.len(), 12);
        for (x, y) in p.rows.chunks(2).zip(&p.labels) {
            let u = x[0] * p.w_star[0] + x[1] * p.w_star[1];
            assert!((u.max(0.0) - y).abs() < 1e-12);
        }
        if p.optimal {
            // the solution is feasible
            for (x, y) in p.rows.chunks(2).zip(&p.labels) {
                assert!(x[0] * p.w_hat[0] + x[1] * p.w_hat[1] <= y + 1e-6);
            }
        }
    }

    #[test]
    fn amplification_curve_is_nondecreasing() {
        let c = amplification_rates(30, 3, 5, 20, 2).unwrap();
        assert_eq!(c.len(), 5);
        assert!(c.windows(2).all(|w| w[0] <= w[1]));
        assert!(amplification_rates(30, 3, 0, 20, 2).is_err());
    }
}
