use serde::{Deserialize, Serialize};

use super::matrix::RowMatrix;
use crate::error::{Error, Result};

/// `min ½ xᵀQx + cᵀx  s.t.  A_ineq x ≤ b_ineq,  A_eq x = b_eq`
///
/// `q` must be symmetric positive semidefinite. An LP is the case `q = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexProgram {
    pub q: RowMatrix,
    pub c: Vec<f64>,
    pub a_ineq: RowMatrix,
    pub b_ineq: Vec<f64>,
    pub a_eq: RowMatrix,
    pub b_eq: Vec<f64>,
}

/// Dense row-major JSON layout used for debugging and golden files.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct DenseProgram {
    q: Vec<Vec<f64>>,
    c: Vec<f64>,
    a_ineq: Vec<Vec<f64>>,
    b_ineq: Vec<f64>,
    a_eq: Vec<Vec<f64>>,
    b_eq: Vec<f64>,
}

impl ConvexProgram {
    /// Empty program in `m` variables with zero cost.
    pub fn new(m: usize) -> Self {
        Self {
            q: RowMatrix::zeros(m, m),
            c: vec![0.0; m],
            a_ineq: RowMatrix::new(m),
            b_ineq: Vec::new(),
            a_eq: RowMatrix::new(m),
            b_eq: Vec::new(),
        }
    }

    pub fn from_dense(
        q: Option<&[Vec<f64>]>,
        c: &[f64],
        a_ineq: &[Vec<f64>],
        b_ineq: &[f64],
        a_eq: &[Vec<f64>],
        b_eq: &[f64],
    ) -> Result<Self> {
        let m = c.len();
        let q = match q {
            Some(rows) => {
                if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                    return Err(Error::DimensionMismatch {
                        what: "quadratic term",
                        expected: m,
                        found: rows.len(),
                    });
                }
                RowMatrix::from_dense(rows, m)
            }
            None => RowMatrix::zeros(m, m),
        };
        let dense_rows = |rows: &[Vec<f64>], what| -> Result<RowMatrix> {
            if let Some(bad) = rows.iter().find(|r| r.len() != m) {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: m,
                    found: bad.len(),
                });
            }
            Ok(RowMatrix::from_dense(rows, m))
        };
        let p = Self {
            q,
            c: c.to_vec(),
            a_ineq: dense_rows(a_ineq, "inequality matrix")?,
            b_ineq: b_ineq.to_vec(),
            a_eq: dense_rows(a_eq, "equality matrix")?,
            b_eq: b_eq.to_vec(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_ineq(&self) -> usize {
        self.b_ineq.len()
    }

    pub fn num_eq(&self) -> usize {
        self.b_eq.len()
    }

    pub fn add_ineq<I: IntoIterator<Item = (usize, f64)>>(&mut self, row: I, rhs: f64) {
        self.a_ineq.push_row(row);
        self.b_ineq.push(rhs);
    }

    pub fn add_eq<I: IntoIterator<Item = (usize, f64)>>(&mut self, row: I, rhs: f64) {
        self.a_eq.push_row(row);
        self.b_eq.push(rhs);
    }

    pub fn is_lp(&self) -> bool {
        self.q.nnz() == 0
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let qx = self.q.mul_vec(x);
        0.5 * dot(x, &qx) + dot(&self.c, x)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.num_vars();
        crate::error::check_len("quadratic term rows", m, self.q.nrows())?;
        crate::error::check_len("quadratic term columns", m, self.q.ncols())?;
        crate::error::check_len("inequality columns", m, self.a_ineq.ncols())?;
        crate::error::check_len("inequality rows", self.a_ineq.nrows(), self.b_ineq.len())?;
        crate::error::check_len("equality columns", m, self.a_eq.ncols())?;
        crate::error::check_len("equality rows", self.a_eq.nrows(), self.b_eq.len())?;
        if !self.q.is_symmetric(1e-12) {
            return Err(Error::InvalidArgument(
                "quadratic term is not symmetric".into(),
            ));
        }
        let finite = self.q.all_finite()
            && self.a_ineq.all_finite()
            && self.a_eq.all_finite()
            && self
                .c
                .iter()
                .chain(&self.b_ineq)
                .chain(&self.b_eq)
                .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidArgument(
                "program contains non-finite entries".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let dense = DenseProgram {
            q: self.q.to_dense(),
            c: self.c.clone(),
            a_ineq: self.a_ineq.to_dense(),
            b_ineq: self.b_ineq.clone(),
            a_eq: self.a_eq.to_dense(),
            b_eq: self.b_eq.clone(),
        };
        Ok(serde_json::to_string_pretty(&dense)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let d: DenseProgram = serde_json::from_str(text)?;
        Self::from_dense(Some(&d.q), &d.c, &d.a_ineq, &d.b_ineq, &d.a_eq, &d.b_eq)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
