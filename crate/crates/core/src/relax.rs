//! Randomized convex relaxations of the ReLU fitting problem.
//!
//! The slack form replaces each ReLU output by a variable `z_ij` constrained
//! by `z_ij ≥ X_ij w` and `z_ij ≥ 0`. Without a perturbation the resulting
//! program is solved by `w = 0` for any data, so a Gaussian direction `r` is
//! added to the objective as `β rᵀw`. In the limit `β → 0` the quadratic term
//! pins the slack sums to the labels and the program becomes the LP
//!
//! ```text
//! min rᵀw  s.t.  Σ_j z_ij = y_i,  z_ij ≥ X_ij w,  z_ij ≥ 0
//! ```
//!
//! which for a single block reduces to `min rᵀw s.t. Xw ≤ y`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::model::{self, Dataset};
use crate::qpsolve::{self, ConvexProgram, SolveReport, SolveStatus};
use crate::rng::{self, Stream};

pub const DEFAULT_TAU: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    SingleNeuron,
    MultiNeuron,
}

/// Where each block of unknowns lives in the program's variable vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarMap {
    pub w: Range<usize>,
    /// `z_ij` at `z.start + i·k + j`; empty when the slacks were eliminated.
    pub z: Range<usize>,
    /// Residual variables `t_i = Σ_j z_ij − y_i` of the multi-block QP.
    pub t: Range<usize>,
}

#[derive(Debug, Clone)]
pub struct RelaxationInstance {
    pub variant: Variant,
    pub beta: f64,
    pub r: Vec<f64>,
    pub program: ConvexProgram,
    pub var_map: VarMap,
    pub n: usize,
    pub k: usize,
    /// Constant dropped from the objective (`½‖y‖²` in the slack QPs).
    pub objective_offset: f64,
}

impl RelaxationInstance {
    /// The slacks were eliminated (`z = y`), leaving only `w`.
    pub fn slacks_eliminated(&self) -> bool {
        self.var_map.z.is_empty()
    }

    /// Assembles a full variable vector from `w` and block slacks `z`
    /// (`n·k` values, sample-major).
    pub fn point(&self, w: &[f64], z: &[f64], y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.program.num_vars()];
        x[self.var_map.w.clone()].copy_from_slice(w);
        if !self.var_map.z.is_empty() {
            x[self.var_map.z.clone()].copy_from_slice(z);
        }
        for (i, ti) in self.var_map.t.clone().enumerate() {
            let zsum: f64 = z[i * self.k..(i + 1) * self.k].iter().sum();
            x[ti] = zsum - y[i];
        }
        x
    }

    /// Largest constraint violation at `x` (zero when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let p = &self.program;
        let gx = p.a_ineq.mul_vec(x);
        let ineq = gx
            .iter()
            .zip(&p.b_ineq)
            .fold(0.0f64, |acc, (g, b)| acc.max(g - b));
        let ax = p.a_eq.mul_vec(x);
        ax.iter()
            .zip(&p.b_eq)
            .fold(ineq, |acc, (a, b)| acc.max((a - b).abs()))
    }

    /// Objective value including the dropped constant.
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.program.objective(x) + self.objective_offset
    }
}

fn check_inputs(data: &Dataset, beta: f64, r: &[f64]) -> Result<()> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidArgument(format!("beta must be a finite nonnegative number, got {beta}")));
    }
    check_len("perturbation", data.filter_len(), r.len())
}

/// Builds the relaxation of `data` with perturbation weight `beta` and
/// direction `r`.
///
/// * one block, `β > 0`: QP over `(w, z)` with `½‖z − y‖² + β rᵀw`
/// * one block, `β = 0`: LP `min rᵀw s.t. Xw ≤ y`
/// * `k` blocks, `β = 0`: LP over `(w, z)` with `Σ_j z_ij = y_i`
/// * `k` blocks, `β > 0`: QP over `(w, z, t)` with `t_i = Σ_j z_ij − y_i`
///   and objective `½‖t‖² + β rᵀw`
pub fn build(data: &Dataset, beta: f64, r: &[f64]) -> Result<RelaxationInstance> {
    check_inputs(data, beta, r)?;
    if beta == 0.0 {
        if data.k == 1 {
            Ok(single_lp(data, r))
        } else {
            Ok(multi_lp(data, r))
        }
    } else {
        Ok(slack_qp(data, beta, r))
    }
}

/// The unperturbed slack relaxation: minimize the squared slack residual
/// with no linear term.
pub fn build_naive(data: &Dataset) -> RelaxationInstance {
    let r = vec![0.0; data.filter_len()];
    slack_qp(data, 0.0, &r)
}

fn single_lp(data: &Dataset, r: &[f64]) -> RelaxationInstance {
    let b = data.filter_len();
    let mut p = ConvexProgram::new(b);
    p.c.copy_from_slice(r);
    for i in 0..data.n {
        p.add_ineq(data.row(i).iter().copied().enumerate(), data.y[i]);
    }
    RelaxationInstance {
        variant: Variant::SingleNeuron,
        beta: 0.0,
        r: r.to_vec(),
        program: p,
        var_map: VarMap {
            w: 0..b,
            z: b..b,
            t: b..b,
        },
        n: data.n,
        k: 1,
        objective_offset: 0.0,
    }
}

fn push_slack_constraints(p: &mut ConvexProgram, data: &Dataset, z0: usize) {
    let (n, k) = (data.n, data.k);
    for i in 0..n {
        for j in 0..k {
            let blk = data.block(i, j);
            p.add_ineq(
                blk.iter()
                    .copied()
                    .enumerate()
                    .chain(std::iter::once((z0 + i * k + j, -1.0))),
                0.0,
            );
        }
    }
    for i in 0..n {
        for j in 0..k {
            p.add_ineq([(z0 + i * k + j, -1.0)], 0.0);
        }
    }
}

fn multi_lp(data: &Dataset, r: &[f64]) -> RelaxationInstance {
    let (n, k, b) = (data.n, data.k, data.filter_len());
    let z0 = b;
    let mut p = ConvexProgram::new(b + n * k);
    p.c[..b].copy_from_slice(r);
    for i in 0..n {
        p.add_eq((0..k).map(|j| (z0 + i * k + j, 1.0)), data.y[i]);
    }
    push_slack_constraints(&mut p, data, z0);
    RelaxationInstance {
        variant: Variant::MultiNeuron,
        beta: 0.0,
        r: r.to_vec(),
        program: p,
        var_map: VarMap {
            w: 0..b,
            z: z0..z0 + n * k,
            t: z0 + n * k..z0 + n * k,
        },
        n,
        k,
        objective_offset: 0.0,
    }
}

fn slack_qp(data: &Dataset, beta: f64, r: &[f64]) -> RelaxationInstance {
    let (n, k, b) = (data.n, data.k, data.filter_len());
    let z0 = b;
    let half_yy = 0.5 * data.y.iter().map(|v| v * v).sum::<f64>();
    if k == 1 {
        let m = b + n;
        let mut p = ConvexProgram::new(m);
        p.q = crate::qpsolve::RowMatrix::new(m);
        for v in 0..m {
            if v >= z0 {
                p.q.push_row([(v, 1.0)]);
            } else {
                p.q.push_row(std::iter::empty());
            }
        }
        for (cj, rj) in p.c[..b].iter_mut().zip(r) {
            *cj = beta * rj;
        }
        for i in 0..n {
            p.c[z0 + i] = -data.y[i];
        }
        push_slack_constraints(&mut p, data, z0);
        return RelaxationInstance {
            variant: Variant::SingleNeuron,
            beta,
            r: r.to_vec(),
            program: p,
            var_map: VarMap {
                w: 0..b,
                z: z0..z0 + n,
                t: z0 + n..z0 + n,
            },
            n,
            k,
            objective_offset: half_yy,
        };
    }
    let t0 = z0 + n * k;
    let m = t0 + n;
    let mut p = ConvexProgram::new(m);
    p.q = crate::qpsolve::RowMatrix::new(m);
    for v in 0..m {
        if v >= t0 {
            p.q.push_row([(v, 1.0)]);
        } else {
            p.q.push_row(std::iter::empty());
        }
    }
    for (cj, rj) in p.c[..b].iter_mut().zip(r) {
        *cj = beta * rj;
    }
    for i in 0..n {
        p.add_eq(
            std::iter::once((t0 + i, 1.0)).chain((0..k).map(|j| (z0 + i * k + j, -1.0))),
            -data.y[i],
        );
    }
    push_slack_constraints(&mut p, data, z0);
    RelaxationInstance {
        variant: Variant::MultiNeuron,
        beta,
        r: r.to_vec(),
        program: p,
        var_map: VarMap {
            w: 0..b,
            z: z0..t0,
            t: t0..m,
        },
        n,
        k,
        objective_offset: 0.0,
    }
}

/// Solver settings and the success threshold shared by the fitting routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxConfig {
    pub beta: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub tau: f64,
}

impl Default for RelaxConfig {
    fn default() -> Self {
        Self {
            beta: 0.0,
            tol: qpsolve::DEFAULT_TOL,
            max_iter: qpsolve::DEFAULT_MAX_ITER,
            tau: DEFAULT_TAU,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub w_hat: Vec<f64>,
    /// Block slacks `z_ij` (sample-major); equal to `y` when eliminated.
    pub z_hat: Vec<f64>,
    /// Non-convex loss of `w_hat`, recomputed from the data.
    pub train_residual: f64,
    pub report: SolveReport,
    pub r_used: Vec<f64>,
    pub trial_seed: u64,
}

impl FitResult {
    pub fn is_optimal(&self) -> bool {
        self.report.is_optimal()
    }
}

pub fn perturbation(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = rng::substream(seed, Stream::Perturbation);
    rng::standard_normal_vec(&mut rng, len)
}

/// Solves the relaxation for an explicit perturbation direction.
pub fn fit_with_direction(data: &Dataset, r: &[f64], seed: u64, cfg: &RelaxConfig) -> Result<FitResult> {
    let inst = build(data, cfg.beta, r)?;
    let report = solve_instance(&inst, cfg)?;
    let w_hat = report.x[inst.var_map.w.clone()].to_vec();
    let z_hat = if inst.slacks_eliminated() {
        data.y.clone()
    } else {
        report.x[inst.var_map.z.clone()].to_vec()
    };
    let train_residual = if w_hat.iter().all(|v| v.is_finite()) {
        model::residual(data, &w_hat)?
    } else {
        f64::INFINITY
    };
    Ok(FitResult {
        w_hat,
        z_hat,
        train_residual,
        report,
        r_used: r.to_vec(),
        trial_seed: seed,
    })
}

/// Solves the instance. For `0 < β < 1` the objective is divided by `β`
/// first so the multipliers are O(1) and the complementarity tolerance
/// still pins active constraints; duals are scaled back afterwards.
pub fn solve_instance(inst: &RelaxationInstance, cfg: &RelaxConfig) -> Result<SolveReport> {
    let beta = inst.beta;
    if beta == 0.0 || beta >= 1.0 {
        return qpsolve::solve(&inst.program, cfg.tol, cfg.max_iter);
    }
    let mut p = inst.program.clone();
    let inv = 1.0 / beta;
    p.q.scale(inv);
    p.c.iter_mut().for_each(|v| *v *= inv);
    let mut rep = qpsolve::solve(&p, cfg.tol, cfg.max_iter)?;
    rep.lambda.iter_mut().for_each(|v| *v *= beta);
    rep.nu.iter_mut().for_each(|v| *v *= beta);
    rep.objective *= beta;
    rep.dual_residual *= beta;
    rep.complementarity_gap *= beta;
    Ok(rep)
}

/// Draws `r ~ N(0, I)` from the perturbation substream of `seed` and solves.
pub fn fit(data: &Dataset, beta: f64, seed: u64) -> Result<FitResult> {
    let cfg = RelaxConfig {
        beta,
        ..RelaxConfig::default()
    };
    fit_seeded(data, seed, &cfg)
}

pub fn fit_seeded(data: &Dataset, seed: u64, cfg: &RelaxConfig) -> Result<FitResult> {
    let r = perturbation(seed, data.filter_len());
    fit_with_direction(data, &r, seed, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    pub l2_error: f64,
    pub rel_error: f64,
    pub success: bool,
}

/// `success ⇔ ‖ŵ − w*‖₂ ≤ τ (1 + ‖w*‖₂)`
pub fn assess(w_hat: &[f64], w_star: &[f64], tau: f64) -> Result<Assessment> {
    check_len("estimate", w_star.len(), w_hat.len())?;
    let l2_error = w_hat
        .iter()
        .zip(w_star)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let norm = w_star.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(Assessment {
        l2_error,
        rel_error: l2_error / norm,
        success: l2_error <= tau * (1.0 + norm),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub status: SolveStatus,
    pub train_residual: f64,
    pub l2_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryOutcome {
    pub best: FitResult,
    pub best_index: usize,
    /// Present when the planted filter is known.
    pub l2_error: Option<f64>,
    pub rel_error: Option<f64>,
    pub success: Option<bool>,
    pub trials: Vec<TrialRecord>,
}

#[cfg(feature = "parallel")]
fn run_trials(data: &Dataset, seeds: &[u64], cfg: &RelaxConfig) -> Result<Vec<FitResult>> {
    use rayon::prelude::*;
    seeds.par_iter().map(|&s| fit_seeded(data, s, cfg)).collect()
}

#[cfg(not(feature = "parallel"))]
fn run_trials(data: &Dataset, seeds: &[u64], cfg: &RelaxConfig) -> Result<Vec<FitResult>> {
    seeds.iter().map(|&s| fit_seeded(data, s, cfg)).collect()
}

/// Runs `num_trials` independent perturbations and keeps the optimal trial
/// with the smallest training residual (lowest index on ties).
pub fn fit_amplified(
    data: &Dataset,
    num_trials: usize,
    seed: u64,
    cfg: &RelaxConfig,
    w_star: Option<&[f64]>,
) -> Result<RecoveryOutcome> {
    let seeds: Vec<u64> = (0..num_trials).map(|t| rng::trial_seed(seed, t)).collect();
    amplify_seeds(data, &seeds, cfg, w_star)
}

/// [`fit_amplified`] over explicit trial seeds.
pub fn amplify_seeds(
    data: &Dataset,
    seeds: &[u64],
    cfg: &RelaxConfig,
    w_star: Option<&[f64]>,
) -> Result<RecoveryOutcome> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    let fits = run_trials(data, seeds, cfg)?;
    select_best(fits, cfg.tau, w_star)
}

/// Amplification over explicit perturbation directions (one trial each).
pub fn amplify_directions(
    data: &Dataset,
    directions: &[Vec<f64>],
    cfg: &RelaxConfig,
    w_star: Option<&[f64]>,
) -> Result<RecoveryOutcome> {
    if directions.is_empty() {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    let fits = directions
        .iter()
        .enumerate()
        .map(|(t, r)| fit_with_direction(data, r, t as u64, cfg))
        .collect::<Result<Vec<_>>>()?;
    select_best(fits, cfg.tau, w_star)
}

fn select_best(fits: Vec<FitResult>, tau: f64, w_star: Option<&[f64]>) -> Result<RecoveryOutcome> {
    let num = fits.len();
    let mut trials = Vec::with_capacity(num);
    for f in &fits {
        let l2_error = match w_star {
            Some(ws) => Some(assess(&f.w_hat, ws, tau)?.l2_error),
            None => None,
        };
        trials.push(TrialRecord {
            seed: f.trial_seed,
            status: f.report.status,
            train_residual: f.train_residual,
            l2_error,
        });
    }
    let best_index = fits
        .iter()
        .enumerate()
        .filter(|(_, f)| f.is_optimal())
        .fold(None::<(usize, f64)>, |acc, (i, f)| match acc {
            Some((_, r)) if r <= f.train_residual => acc,
            _ => Some((i, f.train_residual)),
        })
        .map(|(i, _)| i)
        .ok_or(Error::AllTrialsFailed(num))?;
    let best = fits.into_iter().nth(best_index).expect("index in range");
    let (l2_error, rel_error, success) = match w_star {
        Some(ws) => {
            let a = assess(&best.w_hat, ws, tau)?;
            (Some(a.l2_error), Some(a.rel_error), Some(a.success))
        }
        None => (None, None, None),
    };
    Ok(RecoveryOutcome {
        best,
        best_index,
        l2_error,
        rel_error,
        success,
        trials,
    })
}

/// Solves `X_S ŵ = y_S` on the strictly positive labels by pseudoinverse.
pub fn pseudoinverse_recovery(data: &Dataset) -> Result<Vec<f64>> {
    if data.k != 1 {
        return Err(Error::InvalidArgument(
            "pseudoinverse recovery needs a single block (k = 1)".into(),
        ));
    }
    let active: Vec<usize> = (0..data.n).filter(|&i| data.y[i] > 0.0).collect();
    if active.is_empty() {
        return Err(Error::InvalidArgument("no strictly positive labels".into()));
    }
    let mut a = Vec::with_capacity(active.len() * data.d);
    for &i in &active {
        a.extend_from_slice(data.row(i));
    }
    let b: Vec<f64> = active.iter().map(|&i| data.y[i]).collect();
    qpsolve::least_squares(&a, data.d, &b)
}
