//! Dense-data convex QP/LP solver with certified primal-dual output.
//!
//! Everything numerical in the crate funnels through [`solve`]: the
//! relaxations, their duals, cone-membership phase-1 problems and the
//! brute-force cross-checks in the tests.

mod ipm;
mod kkt;
mod lstsq;
mod matrix;
mod newton;
mod program;

use serde::{Deserialize, Serialize};

pub use kkt::{check_kkt, KktSummary};
pub use lstsq::least_squares;
pub use matrix::RowMatrix;
pub use program::ConvexProgram;

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    /// A Farkas certificate shows the constraints have no common point.
    PrimalInfeasible,
    /// The objective decreases without bound along a feasible ray, so the
    /// dual program is infeasible.
    DualUnbounded,
    MaxIterations,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    /// Inequality multipliers, one per `a_ineq` row.
    pub lambda: Vec<f64>,
    /// Equality multipliers, one per `a_eq` row.
    pub nu: Vec<f64>,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub complementarity_gap: f64,
    pub iterations: usize,
}

impl SolveReport {
    fn failed(p: &ConvexProgram, status: SolveStatus, iterations: usize) -> Self {
        Self {
            status,
            x: vec![0.0; p.num_vars()],
            lambda: vec![0.0; p.num_ineq()],
            nu: vec![0.0; p.num_eq()],
            objective: f64::NAN,
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
            complementarity_gap: f64::INFINITY,
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Value of the Lagrange dual at the returned multipliers:
    /// `-b_ineqᵀλ - b_eqᵀν - ½ xᵀQx`.
    pub fn dual_objective(&self, program: &ConvexProgram) -> f64 {
        let qx = program.q.mul_vec(&self.x);
        -program::dot(&program.b_ineq, &self.lambda)
            - program::dot(&program.b_eq, &self.nu)
            - 0.5 * program::dot(&self.x, &qx)
    }
}

/// Solves `program` to KKT tolerance `tol` (absolute, ∞-norm).
///
/// Solver outcomes such as infeasibility are reported through
/// [`SolveReport::status`]; `Err` is reserved for malformed input.
pub fn solve(program: &ConvexProgram, tol: f64, max_iter: usize) -> Result<SolveReport> {
    program.validate()?;
    if !(1e-12..=1e-2).contains(&tol) {
        return Err(Error::InvalidArgument(format!(
            "tolerance {tol} outside [1e-12, 1e-2]"
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be positive".into()));
    }
    Ok(ipm::solve_impl(program, tol, max_iter))
}

/// [`solve`] with the default tolerance and iteration cap.
pub fn solve_default(program: &ConvexProgram) -> Result<SolveReport> {
    solve(program, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> ConvexProgram {
        ConvexProgram::from_dense(None, c, a, b, &[], &[]).unwrap()
    }

    #[test]
    fn unconstrained_projection() {
        let p = ConvexProgram::from_dense(
            Some(&[vec![1.0, 0.0], vec![0.0, 1.0]]),
            &[-3.0, 1.0],
            &[],
            &[],
            &[],
            &[],
        )
        .unwrap();
        let r = solve_default(&p).unwrap();
        assert!(r.is_optimal());
        assert!((r.x[0] - 3.0).abs() < 1e-9 && (r.x[1] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn nonnegative_orthant_lp() {
        let p = lp(&[1.0, 1.0], &[vec![-1.0, 0.0], vec![0.0, -1.0]], &[0.0, 0.0]);
        let r = solve_default(&p).unwrap();
        assert!(r.is_optimal(), "{:?}", r.status);
        assert!(r.x.iter().all(|v| v.abs() < 1e-8));
        assert!(r.objective.abs() < 1e-7);
    }

    #[test]
    fn one_dimensional_lp_multipliers() {
        // min -x s.t. x <= 1, -x <= 0; vertices {0, 1}: optimum at 1 with λ = (1, 0)
        let p = lp(&[-1.0], &[vec![1.0], vec![-1.0]], &[1.0, 0.0]);
        let r = solve_default(&p).unwrap();
        assert!(r.is_optimal());
        assert!((r.x[0] - 1.0).abs() < 1e-8);
        assert!((r.lambda[0] - 1.0).abs() < 1e-8 && r.lambda[1].abs() < 1e-8);
    }

    #[test]
    fn detects_primal_infeasibility() {
        // x <= -1 and -x <= -1 (x >= 1)
        let p = lp(&[1.0], &[vec![1.0], vec![-1.0]], &[-1.0, -1.0]);
        let r = solve_default(&p).unwrap();
        assert_eq!(r.status, SolveStatus::PrimalInfeasible);
    }

    #[test]
    fn detects_unboundedness() {
        let p = lp(&[-1.0, 0.0], &[vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]], &[0.0, 1.0, 1.0]);
        let r = solve_default(&p).unwrap();
        assert_eq!(r.status, SolveStatus::DualUnbounded);
    }

    #[test]
    fn zero_row_presolve() {
        let p = lp(&[1.0], &[vec![0.0], vec![-1.0]], &[-1.0, 0.0]);
        assert_eq!(solve_default(&p).unwrap().status, SolveStatus::PrimalInfeasible);
        let p = lp(&[1.0], &[vec![0.0], vec![-1.0], vec![-1.0]], &[1.0, 0.0, 0.0]);
        let r = solve_default(&p).unwrap();
        assert!(r.is_optimal());
        assert_eq!(r.lambda[0], 0.0);
        assert_eq!(r.lambda[2], 0.0);
        assert!((r.lambda[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn equality_constrained_qp() {
        // min ½‖x‖² s.t. x1 + x2 = 2 → (1, 1), ν = -1
        let p = ConvexProgram::from_dense(
            Some(&[vec![1.0, 0.0], vec![0.0, 1.0]]),
            &[0.0, 0.0],
            &[],
            &[],
            &[vec![1.0, 1.0]],
            &[2.0],
        )
        .unwrap();
        let r = solve_default(&p).unwrap();
        assert!(r.is_optimal());
        assert!((r.x[0] - 1.0).abs() < 1e-9 && (r.nu[0] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_tolerance() {
        let p = lp(&[1.0], &[vec![-1.0]], &[0.0]);
        assert!(solve(&p, 1.0, 10).is_err());
        assert!(solve(&p, 1e-8, 0).is_err());
    }
}
