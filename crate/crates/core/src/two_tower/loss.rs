//! Row-wise softmax cross-entropy and hard-negative selection.

use ndarray::{Array2, ArrayView2};

use super::TwoTowerError;

/// Row-wise softmax with max-subtraction.
pub fn softmax_rows(z: ArrayView2<f64>) -> Array2<f64> {
    let mut out = z.to_owned();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum: f64 = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Mean over rows of `-log softmax(z_i)[positives[i]]`, with its gradient
/// with respect to `z`.
pub fn softmax_loss(
    z: ArrayView2<f64>,
    positives: &[usize],
) -> Result<(f64, Array2<f64>), TwoTowerError> {
    let (m, d) = z.dim();
    if positives.len() != m {
        return Err(TwoTowerError::Shape(format!(
            "{} positives for {m} rows",
            positives.len()
        )));
    }
    if let Some((i, &p)) = positives.iter().enumerate().find(|(_, &p)| p >= d) {
        return Err(TwoTowerError::Shape(format!("row {i}: positive column {p} >= {d}")));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(TwoTowerError::NonFinite);
    }
    if m == 0 {
        return Ok((0.0, Array2::zeros((0, d))));
    }
    let mut grad = softmax_rows(z);
    let mut loss = 0.0;
    for (i, &p) in positives.iter().enumerate() {
        let row = z.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - row[p];
        grad[[i, p]] -= 1.0;
    }
    let n = m as f64;
    grad.mapv_inplace(|g| g / n);
    Ok((loss / n, grad))
}

/// Reduced score matrix: column 0 of every row is the positive, followed by
/// the `K - 1` highest-scoring other columns.
#[derive(Debug, Clone, PartialEq)]
pub struct HardNegatives {
    pub z: Array2<f64>,
    /// `columns[i][r]` is the original column of reduced column `r` in row `i`.
    pub columns: Vec<Vec<usize>>,
}

impl HardNegatives {
    pub fn k(&self) -> usize {
        self.z.ncols()
    }

    /// Positive index per row of the reduced matrix (always column 0).
    pub fn positives(&self) -> Vec<usize> {
        vec![0; self.columns.len()]
    }

    /// Gathers the selected columns from a full `m x d` matrix.
    pub fn gather(&self, z: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.columns.len(), self.k()));
        for (i, cols) in self.columns.iter().enumerate() {
            for (r, &c) in cols.iter().enumerate() {
                out[[i, r]] = z[[i, c]];
            }
        }
        out
    }

    /// Scatters a reduced gradient back to `m x d` (unselected entries zero).
    pub fn scatter(&self, reduced: ArrayView2<f64>, d: usize) -> Array2<f64> {
        let mut out = Array2::zeros((self.columns.len(), d));
        for (i, cols) in self.columns.iter().enumerate() {
            for (r, &c) in cols.iter().enumerate() {
                out[[i, c]] += reduced[[i, r]];
            }
        }
        out
    }
}

/// Keeps each row's positive plus its `k - 1` highest-scoring negatives;
/// ties go to the lower column index.
pub fn hard_negative_filter(
    z: ArrayView2<f64>,
    positives: &[usize],
    k: usize,
) -> Result<HardNegatives, TwoTowerError> {
    let (m, d) = z.dim();
    if k < 1 || k > d {
        return Err(TwoTowerError::Config(format!("K must be in 1..={d}, got {k}")));
    }
    if positives.len() != m {
        return Err(TwoTowerError::Shape(format!(
            "{} positives for {m} rows",
            positives.len()
        )));
    }
    let mut columns = Vec::with_capacity(m);
    let mut order: Vec<usize> = Vec::with_capacity(d);
    for (i, &pos) in positives.iter().enumerate() {
        if pos >= d {
            return Err(TwoTowerError::Shape(format!("row {i}: positive column {pos} >= {d}")));
        }
        let row = z.row(i);
        order.clear();
        order.extend((0..d).filter(|&c| c != pos));
        let take = k - 1;
        if take > 0 && take < order.len() {
            order.select_nth_unstable_by(take - 1, |&a, &b| {
                row[b].total_cmp(&row[a]).then(a.cmp(&b))
            });
        }
        let mut negs: Vec<usize> = order[..take].to_vec();
        negs.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        let mut cols = Vec::with_capacity(k);
        cols.push(pos);
        cols.extend(negs);
        columns.push(cols);
    }
    let mut out = HardNegatives {
        z: Array2::zeros((m, k)),
        columns,
    };
    out.z = out.gather(z);
    Ok(out)
}
