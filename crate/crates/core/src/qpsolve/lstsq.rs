use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};

/// Minimum-norm least-squares solution of `A x ≈ b`, i.e. `A⁺ b`.
///
/// `a` is given row-major with `ncols` columns. Singular values below
/// `max(rows, cols) · σ_max · ε` are treated as zero.
pub fn least_squares(a: &[f64], ncols: usize, b: &[f64]) -> Result<Vec<f64>> {
    if ncols == 0 || a.is_empty() {
        return Err(Error::InvalidArgument("least squares needs a nonempty matrix".into()));
    }
    if a.len() % ncols != 0 {
        return Err(Error::InvalidArgument("matrix data is not a whole number of rows".into()));
    }
    let nrows = a.len() / ncols;
    check_len("least squares right-hand side", nrows, b.len())?;
    // All-zero columns get weight 0 in the minimum-norm solution; removing
    // them also avoids NaNs that the SVD can produce for such columns.
    let live: Vec<usize> = (0..ncols)
        .filter(|&j| (0..nrows).any(|i| a[i * ncols + j] != 0.0))
        .collect();
    let mut x = vec![0.0; ncols];
    if live.is_empty() {
        return Ok(x);
    }
    let mat = DMatrix::from_fn(nrows, live.len(), |i, j| a[i * ncols + live[j]]);
    let rhs = DVector::from_column_slice(b);
    let sol = pinv_solve(&mat, &rhs).or_else(|| {
        // U Σ Vᵀ of A from the factors of Aᵀ
        let t = mat.transpose().svd(true, true);
        let (v, ut) = (t.u?, t.v_t?);
        apply_pinv(&ut.transpose(), &t.singular_values, &v.transpose(), &rhs, nrows.max(live.len()))
    });
    let sol = sol.ok_or_else(|| Error::InvalidArgument("SVD produced non-finite factors".into()))?;
    for (j, v) in live.iter().zip(sol.iter()) {
        x[*j] = *v;
    }
    Ok(x)
}

fn pinv_solve(mat: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = mat.clone().svd(true, true);
    let (u, vt) = (svd.u?, svd.v_t?);
    apply_pinv(&u, &svd.singular_values, &vt, rhs, mat.nrows().max(mat.ncols()))
}

/// `V Σ⁺ Uᵀ b`, or `None` if any factor is non-finite.
fn apply_pinv(
    u: &DMatrix<f64>,
    sv: &DVector<f64>,
    vt: &DMatrix<f64>,
    rhs: &DVector<f64>,
    dim: usize,
) -> Option<DVector<f64>> {
    if !(u.iter().chain(sv.iter()).chain(vt.iter()).all(|v| v.is_finite())) {
        return None;
    }
    let cutoff = dim as f64 * sv.max() * f64::EPSILON;
    let mut c = u.tr_mul(rhs);
    for (ci, &s) in c.iter_mut().zip(sv.iter()) {
        *ci = if s > cutoff { *ci / s } else { 0.0 };
    }
    Some(vt.tr_mul(&c))
}
