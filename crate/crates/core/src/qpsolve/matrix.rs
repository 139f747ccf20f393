use serde::{Deserialize, Serialize};

/// Compressed sparse row matrix.
///
/// Relaxation programs have constraint rows touching only a handful of
/// variables, so the solver keeps rows sparse and only densifies the small
/// Schur complements it factors.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RowMatrix {
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl RowMatrix {
    pub fn new(ncols: usize) -> Self {
        Self {
            ncols,
            row_ptr: vec![0],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            ncols,
            row_ptr: vec![0; nrows + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    /// Appends a row given as `(column, value)` pairs. Zero values are
    /// dropped and repeated columns are summed.
    pub fn push_row<I>(&mut self, entries: I)
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let start = self.cols.len();
        let mut row: Vec<(usize, f64)> = entries.into_iter().collect();
        row.sort_by_key(|&(c, _)| c);
        for (c, v) in row {
            assert!(c < self.ncols, "column {c} out of range {}", self.ncols);
            if self.cols.len() > start && *self.cols.last().unwrap() == c {
                *self.vals.last_mut().unwrap() += v;
            } else {
                self.cols.push(c);
                self.vals.push(v);
            }
        }
        // drop explicit zeros
        let mut w = start;
        for r in start..self.cols.len() {
            if self.vals[r] != 0.0 {
                self.cols[w] = self.cols[r];
                self.vals[w] = self.vals[r];
                w += 1;
            }
        }
        self.cols.truncate(w);
        self.vals.truncate(w);
        self.row_ptr.push(self.cols.len());
    }

    pub fn from_dense(rows: &[Vec<f64>], ncols: usize) -> Self {
        let mut m = Self::new(ncols);
        for r in rows {
            assert_eq!(r.len(), ncols, "ragged dense matrix");
            m.push_row(r.iter().copied().enumerate());
        }
        m
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.nrows())
            .map(|i| {
                let mut row = vec![0.0; self.ncols];
                for (c, v) in self.row(i) {
                    row[c] = v;
                }
                row
            })
            .collect()
    }

    pub fn nrows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    pub fn row_parts(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[range.clone()], &self.vals[range])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row_parts(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    /// `y = self * x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.ncols);
        (0..self.nrows())
            .map(|i| self.row(i).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// `y = selfᵀ * x`
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.nrows());
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (c, v) in self.row(i) {
                    y[c] += v * xi;
                }
            }
        }
        y
    }

    /// Keeps only the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut m = Self::new(self.ncols);
        for &i in rows {
            m.push_row(self.row(i));
        }
        m
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.nrows() != self.ncols {
            return false;
        }
        (0..self.nrows()).all(|i| self.row(i).all(|(j, v)| (v - self.get(j, i)).abs() <= tol))
    }

    pub fn scale(&mut self, factor: f64) {
        self.vals.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn all_finite(&self) -> bool {
        self.vals.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_row_sorts_merges_and_drops_zeros() {
        let mut m = RowMatrix::new(4);
        m.push_row([(3, 1.0), (0, 2.0), (3, 1.5), (1, 0.0)]);
        assert_eq!(m.row(0).collect::<Vec<_>>(), vec![(0, 2.0), (3, 2.5)]);
        m.push_row([(2, 1.0), (2, -1.0)]);
        assert_eq!(m.row(1).count(), 0);
    }

    #[test]
    fn products_match_dense() {
        let dense = vec![vec![1.0, 0.0, -2.0], vec![0.0, 3.0, 1.0]];
        let m = RowMatrix::from_dense(&dense, 3);
        assert_eq!(m.mul_vec(&[1.0, 2.0, 3.0]), vec![-5.0, 9.0]);
        assert_eq!(m.tr_mul_vec(&[1.0, -1.0]), vec![1.0, -3.0, -3.0]);
        assert_eq!(m.to_dense(), dense);
    }
}
