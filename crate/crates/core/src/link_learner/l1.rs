//! L1-regularized logistic regression on binary features.
//!
//! Minimizes `mean_i logloss(y_i, b + w·x_i) + lambda * |w|_1` by cyclic
//! coordinate descent. Each coordinate takes a proximal step against the
//! curvature bound `count_j / (4 N)` (the logistic second derivative never
//! exceeds 1/4), followed by soft-thresholding, so every step decreases the
//! objective. The intercept is not penalized.

use serde::{Deserialize, Serialize};

/// Column-major binary design: `columns[j]` lists the rows where feature `j` is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDesign {
    num_rows: usize,
    columns: Vec<Vec<usize>>,
}

impl SparseDesign {
    pub fn new(num_rows: usize, mut columns: Vec<Vec<usize>>) -> Self {
        for c in &mut columns {
            c.sort_unstable();
            c.dedup();
            assert!(c.last().is_none_or(|&r| r < num_rows), "row out of range");
        }
        Self { num_rows, columns }
    }

    /// Builds from dense 0/1 rows.
    pub fn from_dense(rows: &[Vec<bool>]) -> Self {
        let width = rows.first().map_or(0, Vec::len);
        let mut columns = vec![Vec::new(); width];
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), width, "ragged rows");
            for (j, &x) in r.iter().enumerate() {
                if x {
                    columns[j].push(i);
                }
            }
        }
        Self::new(rows.len(), columns)
    }

    pub fn num_rows(&self) -> usize {
        self.num_rows
    }

    pub fn num_features(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[usize] {
        &self.columns[j]
    }

    fn linear(&self, weights: &[f64], intercept: f64) -> Vec<f64> {
        let mut eta = vec![intercept; self.num_rows];
        for (col, &w) in self.columns.iter().zip(weights) {
            if w != 0.0 {
                for &r in col {
                    eta[r] += w;
                }
            }
        }
        eta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L1Options {
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for L1Options {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_sweeps: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1Fit {
    pub lambda: f64,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub sweeps: usize,
    pub converged: bool,
    pub objective: f64,
}

impl L1Fit {
    pub fn nonzero(&self) -> usize {
        self.weights.iter().filter(|w| **w != 0.0).count()
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[inline]
fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Penalized objective at `(weights, intercept)`.
pub fn l1_objective(
    design: &SparseDesign,
    labels: &[f64],
    weights: &[f64],
    intercept: f64,
    lambda: f64,
) -> f64 {
    let eta = design.linear(weights, intercept);
    let n = design.num_rows.max(1) as f64;
    let loss: f64 = eta
        .iter()
        .zip(labels)
        .map(|(&z, &y)| softplus(z) - y * z)
        .sum::<f64>()
        / n;
    loss + lambda * weights.iter().map(|w| w.abs()).sum::<f64>()
}

/// Fits the model, optionally warm-started from an earlier fit.
pub fn fit_l1_logistic(
    design: &SparseDesign,
    labels: &[f64],
    lambda: f64,
    options: &L1Options,
    warm: Option<&L1Fit>,
) -> L1Fit {
    assert_eq!(labels.len(), design.num_rows, "one label per row");
    let p = design.num_features();
    let (mut w, mut b) = match warm {
        Some(f) if f.weights.len() == p => (f.weights.clone(), f.intercept),
        _ => (vec![0.0; p], 0.0),
    };
    if design.num_rows == 0 {
        return L1Fit {
            lambda,
            weights: w,
            intercept: b,
            sweeps: 0,
            converged: true,
            objective: 0.0,
        };
    }
    let n = design.num_rows as f64;
    let mut eta = design.linear(&w, b);
    let mut sweeps = 0;
    let mut converged = false;

    while sweeps < options.max_sweeps {
        sweeps += 1;
        let mut max_change: f64 = 0.0;

        let g: f64 = eta
            .iter()
            .zip(labels)
            .map(|(&z, &y)| sigmoid(z) - y)
            .sum::<f64>()
            / n;
        let delta = -g / 0.25;
        if delta != 0.0 {
            b += delta;
            eta.iter_mut().for_each(|z| *z += delta);
            max_change = max_change.max(delta.abs());
        }

        for j in 0..p {
            let col = design.column(j);
            if col.is_empty() {
                w[j] = 0.0;
                continue;
            }
            let h = col.len() as f64 / (4.0 * n);
            let g: f64 = col.iter().map(|&r| sigmoid(eta[r]) - labels[r]).sum::<f64>() / n;
            let new = soft_threshold(h * w[j] - g, lambda) / h;
            let delta = new - w[j];
            if delta != 0.0 {
                for &r in col {
                    eta[r] += delta;
                }
                w[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < options.tolerance {
            converged = true;
            break;
        }
    }
    let objective = l1_objective(design, labels, &w, b, lambda);
    L1Fit {
        lambda,
        weights: w,
        intercept: b,
        sweeps,
        converged,
        objective,
    }
}

/// Solves along `lambdas` in the given order, warm-starting each fit.
pub fn l1_path(
    design: &SparseDesign,
    labels: &[f64],
    lambdas: &[f64],
    options: &L1Options,
) -> Vec<L1Fit> {
    let mut out: Vec<L1Fit> = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let fit = fit_l1_logistic(design, labels, lambda, options, out.last());
        out.push(fit);
    }
    out
}
