//! Optimality certificates for the `β → 0` relaxation.
//!
//! The planted filter solves the LP exactly when `−r` lies in the cone
//! spanned by `g_i = Σ_{j∈R_i} X_ijᵀ` over the active samples. The sign comes
//! from writing the LP as a minimization of `rᵀw`; since `r` is symmetric
//! Gaussian this changes no probabilities.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::model::{self, Dataset};
use crate::qpsolve::{self, ConvexProgram, SolveStatus};
use crate::relax;

pub const DEFAULT_CONE_TOL: f64 = 1e-7;
const PHASE1_SOLVER_TOL: f64 = 1e-10;

/// Active blocks of a filter, stored both ways round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveSets {
    /// `s[j]`: samples whose block `j` is active, ascending.
    pub s: Vec<Vec<usize>>,
    /// `r[i]`: active blocks of sample `i`, ascending.
    pub r: Vec<Vec<usize>>,
}

impl ActiveSets {
    pub fn from_blocks(n: usize, s: Vec<Vec<usize>>) -> Self {
        let mut r = vec![Vec::new(); n];
        for (j, sj) in s.iter().enumerate() {
            for &i in sj {
                r[i].push(j);
            }
        }
        Self { s, r }
    }

    pub fn from_samples(k: usize, r: Vec<Vec<usize>>) -> Self {
        let mut s = vec![Vec::new(); k];
        for (i, ri) in r.iter().enumerate() {
            for &j in ri {
                s[j].push(i);
            }
        }
        Self { s, r }
    }

    pub fn n(&self) -> usize {
        self.r.len()
    }

    pub fn k(&self) -> usize {
        self.s.len()
    }

    pub fn is_active(&self, i: usize, j: usize) -> bool {
        self.r[i].binary_search(&j).is_ok()
    }
}

/// Blocks with `X_ij w > 0` (strictly).
pub fn active_sets(x: &[f64], d: usize, k: usize, w: &[f64]) -> Result<ActiveSets> {
    if k == 0 || d % k != 0 || x.len() % d.max(1) != 0 {
        return Err(Error::InvalidArgument(format!(
            "data of length {} is not n×{d} with {k} blocks",
            x.len()
        )));
    }
    let b = d / k;
    check_len("filter", b, w.len())?;
    let n = x.len() / d;
    let r = (0..n)
        .map(|i| {
            (0..k)
                .filter(|&j| model::dot(&x[i * d + j * b..i * d + (j + 1) * b], w) > 0.0)
                .collect()
        })
        .collect();
    Ok(ActiveSets::from_samples(k, r))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeGenerators {
    /// Sample index of each generator.
    pub samples: Vec<usize>,
    pub vectors: Vec<Vec<f64>>,
}

/// One generator `Σ_{j∈R_i} X_ijᵀ` per sample with a nonempty `R_i`.
pub fn cone_generators(data: &Dataset, sets: &ActiveSets) -> ConeGenerators {
    let b = data.filter_len();
    let mut samples = Vec::new();
    let mut vectors = Vec::new();
    for (i, ri) in sets.r.iter().enumerate() {
        if ri.is_empty() {
            continue;
        }
        let mut g = vec![0.0; b];
        for &j in ri {
            for (gv, xv) in g.iter_mut().zip(data.block(i, j)) {
                *gv += xv;
            }
        }
        samples.push(i);
        vectors.push(g);
    }
    ConeGenerators { samples, vectors }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeVerdict {
    Member,
    NotMember,
    /// The phase-1 solve did not finish; nothing is claimed either way.
    Indeterminate(SolveStatus),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub exists: bool,
    pub verdict: ConeVerdict,
    /// Nonnegative weights, one per generator.
    pub coefficients: Vec<f64>,
    /// Sample index of each coefficient (empty for bare generator lists).
    pub samples: Vec<usize>,
    /// `‖Σ coefficients·generators − target‖∞`
    pub equality_residual: f64,
    pub min_coefficient: f64,
    /// Optimal total elastic violation of the phase-1 LP.
    pub elastic: f64,
    /// Elastic value within a factor of ten of the tolerance, where the
    /// verdict is not trustworthy.
    pub boundary_degenerate: bool,
}

impl Certificate {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn combination(generators: &[Vec<f64>], coef: &[f64], len: usize) -> Vec<f64> {
    let mut acc = vec![0.0; len];
    for (g, c) in generators.iter().zip(coef) {
        for (a, v) in acc.iter_mut().zip(g) {
            *a += c * v;
        }
    }
    acc
}

/// Decides whether `target ∈ cone(generators)` through the phase-1 LP
///
/// ```text
/// min Σ(e⁺ + e⁻)  s.t.  Σ v_i g_i + e⁺ − e⁻ = target,  v, e⁺, e⁻ ≥ 0
/// ```
///
/// and accepts when the optimal elastic value is at most `tol`.
pub fn check_cone_condition(generators: &[Vec<f64>], target: &[f64], tol: f64) -> Result<Certificate> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("cone tolerance must be positive, got {tol}")));
    }
    let b = target.len();
    for g in generators {
        check_len("generator", b, g.len())?;
    }
    let m = generators.len();
    let degenerate = |e: f64| e >= tol / 10.0 && e <= 10.0 * tol;
    if m == 0 {
        let elastic: f64 = target.iter().map(|v| v.abs()).sum();
        let exists = elastic <= tol;
        return Ok(Certificate {
            exists,
            verdict: if exists { ConeVerdict::Member } else { ConeVerdict::NotMember },
            coefficients: Vec::new(),
            samples: Vec::new(),
            equality_residual: qpsolve_inf(target),
            min_coefficient: 0.0,
            elastic,
            boundary_degenerate: degenerate(elastic),
        });
    }

    let nv = m + 2 * b;
    let mut p = ConvexProgram::new(nv);
    for c in &mut p.c[m..] {
        *c = 1.0;
    }
    for row in 0..b {
        p.add_eq(
            (0..m)
                .map(|i| (i, generators[i][row]))
                .chain([(m + row, 1.0), (m + b + row, -1.0)]),
            target[row],
        );
    }
    for v in 0..nv {
        p.add_ineq([(v, -1.0)], 0.0);
    }
    let rep = qpsolve::solve(&p, PHASE1_SOLVER_TOL, qpsolve::DEFAULT_MAX_ITER)?;
    if !rep.is_optimal() {
        return Ok(Certificate {
            exists: false,
            verdict: ConeVerdict::Indeterminate(rep.status),
            coefficients: Vec::new(),
            samples: Vec::new(),
            equality_residual: f64::NAN,
            min_coefficient: f64::NAN,
            elastic: f64::NAN,
            boundary_degenerate: false,
        });
    }
    let coefficients = rep.x[..m].to_vec();
    let elastic = rep.x[m..].iter().sum::<f64>().max(0.0);
    let combo = combination(generators, &coefficients, b);
    let equality_residual = combo
        .iter()
        .zip(target)
        .fold(0.0f64, |acc, (a, t)| acc.max((a - t).abs()));
    let min_coefficient = coefficients.iter().copied().fold(f64::INFINITY, f64::min);
    let exists = elastic <= tol;
    Ok(Certificate {
        exists,
        verdict: if exists { ConeVerdict::Member } else { ConeVerdict::NotMember },
        coefficients,
        samples: Vec::new(),
        equality_residual,
        min_coefficient,
        elastic,
        boundary_degenerate: degenerate(elastic),
    })
}

fn qpsolve_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// Checks whether `w` is optimal for the `β → 0` relaxation with
/// perturbation `r`, i.e. whether `−r ∈ cone{Σ_{j∈R_i} X_ijᵀ}`.
pub fn certify_perturbation(data: &Dataset, w: &[f64], r: &[f64], tol: f64) -> Result<Certificate> {
    check_len("perturbation", data.filter_len(), r.len())?;
    let sets = active_sets(&data.x, data.d, data.k, w)?;
    let gens = cone_generators(data, &sets);
    let target: Vec<f64> = r.iter().map(|v| -v).collect();
    let mut cert = check_cone_condition(&gens.vectors, &target, tol)?;
    if !cert.coefficients.is_empty() {
        cert.samples = gens.samples;
    }
    Ok(cert)
}

/// Complementary slackness between the primal LP solution and the dual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlacknessReport {
    /// Largest |multiplier × constraint slack| over all primal rows.
    pub max_violation: f64,
    /// Largest |λ_ij| over blocks inactive at the primal `ŵ`.
    pub inactive_multiplier: f64,
    /// Largest |λ_ij − v_i| over blocks active at `ŵ` (0 when `k = 1`).
    pub active_mismatch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualOutcome {
    /// Status of the dual program. `PrimalInfeasible` here means the dual
    /// has no feasible point: `−r` is outside the cone of all constraint
    /// gradients and the primal LP is unbounded.
    pub status: SolveStatus,
    /// Dual optimum on the primal's scale (`−yᵀu`, resp. `−yᵀv`).
    pub objective: f64,
    pub primal_status: SolveStatus,
    pub primal_objective: f64,
    pub primal_w: Vec<f64>,
    /// `|primal − dual|` when both are optimal.
    pub gap: Option<f64>,
    /// `u` for one block, `λ_ij` (sample-major) otherwise.
    pub lambda: Vec<f64>,
    /// Per-sample `v_i`; empty for one block.
    pub v: Vec<f64>,
    pub slackness: Option<SlacknessReport>,
}

impl DualOutcome {
    pub fn strong_duality_holds(&self, tol: f64) -> bool {
        self.gap.is_some_and(|g| g <= 10.0 * tol)
    }
}

/// Solves the dual of the `β → 0` relaxation alongside the primal.
///
/// * one block: `max −yᵀu  s.t.  Xᵀu = −r, u ≥ 0`
/// * `k` blocks: `max −yᵀv  s.t.  Σ_ij X_ijᵀλ_ij = −r, 0 ≤ λ_ij ≤ v_i`
pub fn dual_solve(data: &Dataset, r: &[f64], tol: f64) -> Result<DualOutcome> {
    check_len("perturbation", data.filter_len(), r.len())?;
    let (n, k, b) = (data.n, data.k, data.filter_len());
    let cfg = relax::RelaxConfig {
        beta: 0.0,
        tol,
        ..relax::RelaxConfig::default()
    };
    let primal = relax::fit_with_direction(data, r, 0, &cfg)?;

    // λ_ij at index i·k + j, then v_i for samples with y_i > 0.
    let v_index: Vec<Option<usize>> = {
        let mut next = n * k;
        (0..n)
            .map(|i| {
                if k > 1 && data.y[i] > 0.0 {
                    next += 1;
                    Some(next - 1)
                } else {
                    None
                }
            })
            .collect()
    };
    let nv = n * k + v_index.iter().flatten().count();
    let mut p = ConvexProgram::new(nv);
    if k == 1 {
        p.c[..n].copy_from_slice(&data.y);
    } else {
        for (i, vi) in v_index.iter().enumerate() {
            if let Some(c) = vi {
                p.c[*c] = data.y[i];
            }
        }
    }
    for col in 0..b {
        p.add_eq(
            (0..n).flat_map(|i| (0..k).map(move |j| (i, j))).map(|(i, j)| (i * k + j, data.block(i, j)[col])),
            -r[col],
        );
    }
    for idx in 0..n * k {
        p.add_ineq([(idx, -1.0)], 0.0);
    }
    for i in 0..n {
        if let Some(vi) = v_index[i] {
            for j in 0..k {
                p.add_ineq([(i * k + j, 1.0), (vi, -1.0)], 0.0);
            }
        }
    }
    let rep = qpsolve::solve(&p, tol, qpsolve::DEFAULT_MAX_ITER)?;
    let lambda = rep.x[..n * k].to_vec();
    let v: Vec<f64> = if k == 1 {
        Vec::new()
    } else {
        (0..n)
            .map(|i| match v_index[i] {
                Some(c) => rep.x[c],
                None => lambda[i * k..(i + 1) * k].iter().copied().fold(0.0, f64::max),
            })
            .collect()
    };
    let objective = -rep.objective;
    let both = rep.is_optimal() && primal.is_optimal();
    let primal_objective = primal.report.objective;
    let gap = both.then(|| (primal_objective - objective).abs());
    let slackness = if both {
        Some(slackness(data, &primal.w_hat, &primal.z_hat, &lambda, &v)?)
    } else {
        None
    };
    Ok(DualOutcome {
        status: rep.status,
        objective,
        primal_status: primal.report.status,
        primal_objective,
        primal_w: primal.w_hat,
        gap,
        lambda,
        v,
        slackness,
    })
}

fn slackness(data: &Dataset, w: &[f64], z: &[f64], lambda: &[f64], v: &[f64]) -> Result<SlacknessReport> {
    let (n, k) = (data.n, data.k);
    let sets = active_sets(&data.x, data.d, k, w)?;
    let mut max_violation = 0.0f64;
    let mut inactive_multiplier = 0.0f64;
    let mut active_mismatch = 0.0f64;
    for i in 0..n {
        for j in 0..k {
            let l = lambda[i * k + j];
            let xw = model::dot(data.block(i, j), w);
            if k == 1 {
                max_violation = max_violation.max((l * (data.y[i] - xw)).abs());
            } else {
                let zij = z[i * k + j];
                max_violation = max_violation
                    .max((l * (zij - xw)).abs())
                    .max(((v[i] - l) * zij).abs());
            }
            if sets.is_active(i, j) {
                if k > 1 {
                    active_mismatch = active_mismatch.max((l - v[i]).abs());
                }
            } else {
                inactive_multiplier = inactive_multiplier.max(l.abs());
            }
        }
    }
    Ok(SlacknessReport {
        max_violation,
        inactive_multiplier,
        active_mismatch,
    })
}

/// Fraction of samples with exactly one active block.
pub fn r1_singleton_fraction(sets: &ActiveSets) -> f64 {
    if sets.n() == 0 {
        return 0.0;
    }
    sets.r.iter().filter(|ri| ri.len() == 1).count() as f64 / sets.n() as f64
}
