//! Brute-force oracles shared by the integration tests. Nothing here calls
//! into the interior-point solver.
#![allow(dead_code)]

pub const PIVOT_TOL: f64 = 1e-10;

/// Gaussian elimination with partial pivoting on a square system.
/// Returns `None` when the matrix is (numerically) singular.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < PIVOT_TOL {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Optimal value of `min cᵀx s.t. Ax ≤ b` by enumerating vertices.
/// Returns `None` if no vertex exists.
pub fn lp_vertex_min(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<(f64, Vec<f64>)> {
    let m = c.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for subset in combinations(a.len(), m) {
        let sys: Vec<Vec<f64>> = subset.iter().map(|&i| a[i].clone()).collect();
        let rhs: Vec<f64> = subset.iter().map(|&i| b[i]).collect();
        let Some(x) = gauss_solve(sys, rhs) else { continue };
        let feasible = a.iter().zip(b).all(|(row, bi)| dot(row, &x) <= bi + 1e-9);
        if feasible {
            let val = dot(c, &x);
            if best.as_ref().map_or(true, |(v, _)| val < *v) {
                best = Some((val, x));
            }
        }
    }
    best
}

/// Whether `target` is a nonnegative combination of `gens`, decided by
/// Carathéodory enumeration over linearly independent subsets.
pub fn in_cone(gens: &[Vec<f64>], target: &[f64]) -> bool {
    let dim = target.len();
    if target.iter().all(|v| v.abs() < 1e-12) {
        return true;
    }
    for size in 1..=dim.min(gens.len()) {
        for subset in combinations(gens.len(), size) {
            // normal equations of the subset
            let mut gram = vec![vec![0.0; size]; size];
            let mut rhs = vec![0.0; size];
            for (p, &i) in subset.iter().enumerate() {
                for (q, &j) in subset.iter().enumerate() {
                    gram[p][q] = dot(&gens[i], &gens[j]);
                }
                rhs[p] = dot(&gens[i], target);
            }
            let Some(u) = gauss_solve(gram, rhs) else { continue };
            if u.iter().any(|&v| v < -1e-12) {
                continue;
            }
            let resid = (0..dim)
                .map(|t| {
                    let s: f64 = subset.iter().zip(&u).map(|(&i, ui)| gens[i][t] * ui).sum();
                    (s - target[t]).abs()
                })
                .fold(0.0, f64::max);
            if resid < 1e-9 {
                return true;
            }
        }
    }
    false
}

/// Solution of `min ½xᵀQx + cᵀx s.t. Gx ≤ h` with `Q ≻ 0` by trying every
/// active set.
pub fn qp_active_set(q: &[Vec<f64>], c: &[f64], g: &[Vec<f64>], h: &[f64]) -> Option<Vec<f64>> {
    let m = c.len();
    for size in 0..=g.len().min(m) {
        for act in combinations(g.len(), size) {
            let n = m + size;
            let mut k = vec![vec![0.0; n]; n];
            let mut rhs = vec![0.0; n];
            for i in 0..m {
                k[i][..m].copy_from_slice(&q[i]);
                rhs[i] = -c[i];
            }
            for (p, &r) in act.iter().enumerate() {
                for j in 0..m {
                    k[m + p][j] = g[r][j];
                    k[j][m + p] = g[r][j];
                }
                rhs[m + p] = h[r];
            }
            let Some(sol) = gauss_solve(k, rhs) else { continue };
            let x = &sol[..m];
            let lam = &sol[m..];
            let feasible = g.iter().zip(h).all(|(row, hi)| dot(row, x) <= hi + 1e-9);
            if feasible && lam.iter().all(|&l| l >= -1e-9) {
                return Some(x.to_vec());
            }
        }
    }
    None
}
