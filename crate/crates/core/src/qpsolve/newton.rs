//! Structured solves of the interior-point Newton system
//!
//! ```text
//! [ Q + Gᵀ W G + εI    Aᵀ  ] [dx]   [rx]
//! [ A                 -δI  ] [dν] = [re]
//! ```
//!
//! Variables are split into *local* ones (no off-diagonal quadratic coupling
//! and at most one local per inequality row, so their block of the matrix is
//! diagonal) and *dense* ones. Locals are eliminated in closed form; when every
//! equality row holds a local and no local sits in two equality rows the
//! equality block is diagonal too and is eliminated as well, leaving an SPD
//! system in the dense variables only. Otherwise the remaining quasi-definite
//! system is factored by LU.

use nalgebra::{DMatrix, DVector};

use super::program::ConvexProgram;

const NONE: usize = usize::MAX;

/// Variable partition, computed once per program.
#[derive(Debug)]
pub(crate) struct Structure {
    /// For each variable, its position among dense variables or `NONE`.
    dense_pos: Vec<usize>,
    locals: Vec<usize>,
    dense: Vec<usize>,
    /// Inequality rows touching each local.
    local_rows: Vec<Vec<usize>>,
    /// Equality rows (and coefficients) touching each local.
    local_eq: Vec<Vec<(usize, f64)>>,
    q_diag: Vec<f64>,
    eliminate_eq: bool,
}

impl Structure {
    pub(crate) fn analyze(p: &ConvexProgram) -> Self {
        let m = p.num_vars();
        let g = &p.a_ineq;

        let mut g_cols: Vec<Vec<usize>> = vec![Vec::new(); m];
        for r in 0..g.nrows() {
            for (c, _) in g.row(r) {
                g_cols[c].push(r);
            }
        }
        let mut q_diag = vec![0.0; m];
        let mut q_coupled = vec![false; m];
        for i in 0..m {
            for (j, v) in p.q.row(i) {
                if i == j {
                    q_diag[i] = v;
                } else {
                    q_coupled[i] = true;
                }
            }
        }

        let mut candidates: Vec<usize> = (0..m)
            .filter(|&j| !q_coupled[j] && (!g_cols[j].is_empty() || q_diag[j] > 0.0))
            .collect();
        candidates.sort_by_key(|&j| (g_cols[j].len(), j));

        let mut row_taken = vec![false; g.nrows()];
        let mut is_local = vec![false; m];
        for j in candidates {
            if g_cols[j].iter().all(|&r| !row_taken[r]) {
                is_local[j] = true;
                for &r in &g_cols[j] {
                    row_taken[r] = true;
                }
            }
        }

        let mut local_pos = vec![NONE; m];
        let mut dense_pos = vec![NONE; m];
        let mut locals = Vec::new();
        let mut dense = Vec::new();
        for j in 0..m {
            if is_local[j] {
                local_pos[j] = locals.len();
                locals.push(j);
            } else {
                dense_pos[j] = dense.len();
                dense.push(j);
            }
        }
        let local_rows: Vec<Vec<usize>> = locals.iter().map(|&j| g_cols[j].clone()).collect();

        let mut local_eq: Vec<Vec<(usize, f64)>> = vec![Vec::new(); locals.len()];
        let mut eq_has_local = vec![false; p.num_eq()];
        for e in 0..p.num_eq() {
            for (c, v) in p.a_eq.row(e) {
                if local_pos[c] != NONE {
                    local_eq[local_pos[c]].push((e, v));
                    eq_has_local[e] = true;
                }
            }
        }
        let eliminate_eq = eq_has_local.iter().all(|&b| b) && local_eq.iter().all(|l| l.len() <= 1);

        Self {
            dense_pos,
            locals,
            dense,
            local_rows,
            local_eq,
            q_diag,
            eliminate_eq,
        }
    }

    #[cfg(test)]
    pub(crate) fn counts(&self) -> (usize, usize, bool) {
        (self.locals.len(), self.dense.len(), self.eliminate_eq)
    }
}

enum Reduced {
    /// SPD system in the dense variables; equality block diagonal.
    Eliminated {
        chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
        b: DMatrix<f64>,
        m_diag: Vec<f64>,
    },
    Full {
        lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
        nd: usize,
    },
}

/// One factorization of the Newton matrix for a fixed scaling `w`.
pub(crate) struct Factor<'a> {
    st: &'a Structure,
    prog: &'a ConvexProgram,
    w: Vec<f64>,
    h_ll: Vec<f64>,
    /// Sparse coupling rows `H_{l,D}` for each local.
    h_ld: Vec<Vec<(usize, f64)>>,
    reduced: Reduced,
}

#[derive(Debug)]
pub(crate) struct Singular;

impl<'a> Factor<'a> {
    pub(crate) fn new(
        st: &'a Structure,
        prog: &'a ConvexProgram,
        w: &[f64],
        eps: f64,
        delta: f64,
    ) -> Result<Self, Singular> {
        let g = &prog.a_ineq;
        let nl = st.locals.len();
        let nd = st.dense.len();
        let q = prog.num_eq();

        // local diagonal and local-dense coupling
        let mut h_ll = vec![0.0; nl];
        let mut h_ld = Vec::with_capacity(nl);
        let mut acc = vec![0.0; nd];
        let mut seen = vec![false; nd];
        let mut touched: Vec<usize> = Vec::new();
        // rows whose dense outer product is folded in exactly via their local
        let mut folded = vec![false; g.nrows()];
        let mut fold_coef: Vec<(usize, f64)> = Vec::new();
        for (l, &j) in st.locals.iter().enumerate() {
            let mut h = st.q_diag[j] + eps;
            let mut dense_rows = 0;
            let mut dense_row = 0;
            let mut dense_row_weight = 0.0;
            for &r in &st.local_rows[l] {
                let (cols, vals) = g.row_parts(r);
                let gl = vals[cols.binary_search(&j).expect("local in row")];
                let contrib = w[r] * gl * gl;
                let mut has_dense = false;
                for (&c, &v) in cols.iter().zip(vals) {
                    let dp = st.dense_pos[c];
                    if dp != NONE {
                        has_dense = true;
                        if !seen[dp] {
                            seen[dp] = true;
                            touched.push(dp);
                        }
                        acc[dp] += w[r] * gl * v;
                    }
                }
                if has_dense {
                    dense_rows += 1;
                    dense_row = r;
                    dense_row_weight = contrib;
                } else {
                    h += contrib;
                }
            }
            // h currently excludes the dense-touching rows
            if dense_rows == 1 {
                // W_a (1 − W_a g_al² / h_ll) without cancellation
                let rest = h;
                let total = rest + dense_row_weight;
                folded[dense_row] = true;
                fold_coef.push((dense_row, w[dense_row] * rest / total));
                h = total;
            } else {
                for &r in &st.local_rows[l] {
                    let (cols, vals) = g.row_parts(r);
                    if cols.iter().any(|&c| st.dense_pos[c] != NONE) {
                        let gl = vals[cols.binary_search(&j).expect("local in row")];
                        h += w[r] * gl * gl;
                    }
                }
            }
            h_ll[l] = h;
            touched.sort_unstable();
            let row: Vec<(usize, f64)> = touched.iter().map(|&dp| (dp, acc[dp])).collect();
            for &dp in &touched {
                acc[dp] = 0.0;
                seen[dp] = false;
            }
            touched.clear();
            h_ld.push(row);
        }

        // dense block: Q_DD + Σ_r W_r g_D g_Dᵀ + εI − H_DL H_LL⁻¹ H_LD
        let mut s = DMatrix::<f64>::zeros(nd, nd);
        for (dp, &j) in st.dense.iter().enumerate() {
            for (c, v) in prog.q.row(j) {
                let cp = st.dense_pos[c];
                if cp != NONE {
                    s[(dp, cp)] += v;
                }
            }
            s[(dp, dp)] += eps;
        }
        let mut row_weight: Vec<f64> = w.to_vec();
        for &(r, coef) in &fold_coef {
            row_weight[r] = coef;
        }
        let mut dense_entries: Vec<(usize, f64)> = Vec::new();
        for r in 0..g.nrows() {
            dense_entries.clear();
            dense_entries.extend(g.row(r).filter_map(|(c, v)| {
                let dp = st.dense_pos[c];
                (dp != NONE).then_some((dp, v))
            }));
            let wr = row_weight[r];
            for &(a, va) in &dense_entries {
                for &(b, vb) in &dense_entries {
                    s[(a, b)] += wr * va * vb;
                }
            }
        }
        for l in 0..nl {
            if st.local_rows[l].iter().any(|&r| folded[r]) {
                continue;
            }
            let inv = 1.0 / h_ll[l];
            for &(a, va) in &h_ld[l] {
                for &(b, vb) in &h_ld[l] {
                    s[(a, b)] -= va * vb * inv;
                }
            }
        }

        // equality coupling B = A_D − A_L H_LL⁻¹ H_LD
        let mut bmat = DMatrix::<f64>::zeros(q, nd);
        for e in 0..q {
            for (c, v) in prog.a_eq.row(e) {
                let dp = st.dense_pos[c];
                if dp != NONE {
                    bmat[(e, dp)] += v;
                }
            }
        }
        for l in 0..nl {
            for &(e, a) in &st.local_eq[l] {
                let f = a / h_ll[l];
                for &(dp, v) in &h_ld[l] {
                    bmat[(e, dp)] -= f * v;
                }
            }
        }

        let reduced = if st.eliminate_eq {
            let mut m_diag = vec![-delta; q];
            for l in 0..nl {
                for &(e, a) in &st.local_eq[l] {
                    m_diag[e] -= a * a / h_ll[l];
                }
            }
            // S − Bᵀ M⁻¹ B, M negative diagonal
            for e in 0..q {
                let inv = -1.0 / m_diag[e];
                let row = bmat.row(e);
                let nz: Vec<(usize, f64)> = row
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(i, v)| (i, *v))
                    .collect();
                for &(a, va) in &nz {
                    for &(b, vb) in &nz {
                        s[(a, b)] += va * vb * inv;
                    }
                }
            }
            let chol = s.cholesky().ok_or(Singular)?;
            Reduced::Eliminated {
                chol,
                b: bmat,
                m_diag,
            }
        } else {
            let mut mm = DMatrix::<f64>::zeros(q, q);
            for e in 0..q {
                mm[(e, e)] = -delta;
            }
            for l in 0..nl {
                let le = &st.local_eq[l];
                for &(e, a) in le {
                    for &(f, b) in le {
                        mm[(e, f)] -= a * b / h_ll[l];
                    }
                }
            }
            let n = nd + q;
            let mut k = DMatrix::<f64>::zeros(n, n);
            k.view_mut((0, 0), (nd, nd)).copy_from(&s);
            k.view_mut((nd, 0), (q, nd)).copy_from(&bmat);
            k.view_mut((0, nd), (nd, q)).copy_from(&bmat.transpose());
            k.view_mut((nd, nd), (q, q)).copy_from(&mm);
            let lu = k.lu();
            if n > 0 {
                let diag_ok = (0..n).all(|i| {
                    let u = lu.u()[(i, i)];
                    u.is_finite() && u.abs() > 1e-300
                });
                if !diag_ok {
                    return Err(Singular);
                }
            }
            Reduced::Full { lu, nd }
        };

        Ok(Self {
            st,
            prog,
            w: w.to_vec(),
            h_ll,
            h_ld,
            reduced,
        })
    }

    fn solve_regularized(&self, rx: &[f64], re: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let st = self.st;
        let nd = st.dense.len();
        let q = re.len();

        let t: Vec<f64> = st
            .locals
            .iter()
            .enumerate()
            .map(|(l, &j)| rx[j] / self.h_ll[l])
            .collect();
        let mut rd = DVector::<f64>::from_iterator(nd, st.dense.iter().map(|&j| rx[j]));
        let mut r_e = DVector::<f64>::from_column_slice(re);
        for l in 0..st.locals.len() {
            for &(dp, v) in &self.h_ld[l] {
                rd[dp] -= v * t[l];
            }
            for &(e, a) in &st.local_eq[l] {
                r_e[e] -= a * t[l];
            }
        }

        let (xd, nu) = match &self.reduced {
            Reduced::Eliminated { chol, b, m_diag } => {
                let minv_re = DVector::from_iterator(q, (0..q).map(|e| r_e[e] / m_diag[e]));
                let rhs = &rd - b.transpose() * &minv_re;
                let xd = chol.solve(&rhs);
                let bx = b * &xd;
                let nu = DVector::from_iterator(q, (0..q).map(|e| (r_e[e] - bx[e]) / m_diag[e]));
                (xd, nu)
            }
            Reduced::Full { lu, nd } => {
                let mut rhs = DVector::<f64>::zeros(nd + q);
                rhs.rows_mut(0, *nd).copy_from(&rd);
                rhs.rows_mut(*nd, q).copy_from(&r_e);
                let sol = lu.solve(&rhs).unwrap_or_else(|| DVector::from_element(nd + q, f64::NAN));
                (sol.rows(0, *nd).into_owned(), sol.rows(*nd, q).into_owned())
            }
        };

        let mut dx = vec![0.0; rx.len()];
        for (dp, &j) in st.dense.iter().enumerate() {
            dx[j] = xd[dp];
        }
        for (l, &j) in st.locals.iter().enumerate() {
            let mut v = rx[j];
            for &(dp, h) in &self.h_ld[l] {
                v -= h * xd[dp];
            }
            for &(e, a) in &st.local_eq[l] {
                v -= a * nu[e];
            }
            dx[j] = v / self.h_ll[l];
        }
        (dx, nu.as_slice().to_vec())
    }

    /// Unregularized Newton matrix applied to `(dx, dν)`.
    fn apply(&self, dx: &[f64], dnu: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = self.prog;
        let mut hx = p.q.mul_vec(dx);
        let gdx = p.a_ineq.mul_vec(dx);
        let wg: Vec<f64> = gdx.iter().zip(&self.w).map(|(a, b)| a * b).collect();
        let gt = p.a_ineq.tr_mul_vec(&wg);
        let at = p.a_eq.tr_mul_vec(dnu);
        for i in 0..hx.len() {
            hx[i] += gt[i] + at[i];
        }
        (hx, p.a_eq.mul_vec(dx))
    }

    /// Solves with two rounds of iterative refinement against the
    /// unregularized matrix.
    pub(crate) fn solve(&self, rx: &[f64], re: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (mut dx, mut dnu) = self.solve_regularized(rx, re);
        for _ in 0..2 {
            let (kx, ke) = self.apply(&dx, &dnu);
            let res_x: Vec<f64> = rx.iter().zip(&kx).map(|(a, b)| a - b).collect();
            let res_e: Vec<f64> = re.iter().zip(&ke).map(|(a, b)| a - b).collect();
            let (cx, ce) = self.solve_regularized(&res_x, &res_e);
            if cx.iter().chain(&ce).any(|v| !v.is_finite()) {
                break;
            }
            for (a, b) in dx.iter_mut().zip(&cx) {
                *a += b;
            }
            for (a, b) in dnu.iter_mut().zip(&ce) {
                *a += b;
            }
        }
        (dx, dnu)
    }
}
