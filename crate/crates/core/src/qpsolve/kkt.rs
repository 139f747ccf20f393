use serde::{Deserialize, Serialize};

use super::program::ConvexProgram;
use super::SolveReport;
use crate::error::{check_len, Result};

/// Residual norms of the KKT conditions for a primal-dual pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktSummary {
    /// `‖Qx + c + A_ineqᵀλ + A_eqᵀν‖∞`
    pub stationarity: f64,
    /// Largest equality violation, inequality violation or negative multiplier.
    pub feasibility: f64,
    /// `max_i |λ_i (A_ineq x − b_ineq)_i|`
    pub complementarity: f64,
    pub pass: bool,
}

pub(crate) struct Residuals {
    pub stationarity: f64,
    pub primal: f64,
    pub dual_sign: f64,
    pub complementarity: f64,
    /// `Σ_i |λ_i (A_ineq x − b_ineq)_i|`
    pub total_gap: f64,
}

impl Residuals {
    /// All KKT residuals within `tol`, and the total gap within `tol`
    /// relative to the objective value `f`.
    pub fn converged(&self, f: f64, tol: f64) -> bool {
        self.stationarity.max(self.primal).max(self.complementarity) <= tol
            && self.total_gap <= tol * f.abs().max(1.0)
    }
}

pub(crate) fn residuals(p: &ConvexProgram, x: &[f64], lambda: &[f64], nu: &[f64]) -> Residuals {
    let mut grad = p.q.mul_vec(x);
    for (g, c) in grad.iter_mut().zip(&p.c) {
        *g += c;
    }
    for (g, v) in grad.iter_mut().zip(p.a_ineq.tr_mul_vec(lambda)) {
        *g += v;
    }
    for (g, v) in grad.iter_mut().zip(p.a_eq.tr_mul_vec(nu)) {
        *g += v;
    }
    let stationarity = inf_norm(&grad);

    let gx = p.a_ineq.mul_vec(x);
    let mut primal: f64 = 0.0;
    let mut complementarity: f64 = 0.0;
    let mut total_gap = 0.0;
    for ((gxi, bi), li) in gx.iter().zip(&p.b_ineq).zip(lambda) {
        let slack = gxi - bi;
        primal = primal.max(slack);
        complementarity = complementarity.max((li * slack).abs());
        total_gap += (li * slack).abs();
    }
    let ax = p.a_eq.mul_vec(x);
    for (axi, bi) in ax.iter().zip(&p.b_eq) {
        primal = primal.max((axi - bi).abs());
    }
    let dual_sign = lambda.iter().fold(0.0f64, |acc, &l| acc.max(-l));
    Residuals {
        stationarity,
        primal,
        dual_sign,
        complementarity,
        total_gap,
    }
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// Recomputes the KKT residuals of `report` from scratch against `program`.
pub fn check_kkt(program: &ConvexProgram, report: &SolveReport, tol: f64) -> Result<KktSummary> {
    check_len("primal solution", program.num_vars(), report.x.len())?;
    check_len("inequality multipliers", program.num_ineq(), report.lambda.len())?;
    check_len("equality multipliers", program.num_eq(), report.nu.len())?;
    let r = residuals(program, &report.x, &report.lambda, &report.nu);
    let feasibility = r.primal.max(r.dual_sign);
    let pass = r.stationarity <= tol && feasibility <= tol && r.complementarity <= tol;
    Ok(KktSummary {
        stationarity: r.stationarity,
        feasibility,
        complementarity: r.complementarity,
        pass,
    })
}
