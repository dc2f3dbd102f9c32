//! Exhaustive best-subset search over supports of size at most `k`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::designs::DesignMatrix;
use crate::error::{invalid, Error, Result};
use crate::penalties::SeparablePenalty;

use super::{objective, EstimatorSolution};

pub const DEFAULT_ENUMERATION_CAP: f64 = 1e7;

/// Relative cutoff on singular values of `X_S` for the pseudoinverse.
const PINV_RTOL: f64 = 1e-10;

/// Precomputed Gram matrix for repeated best-subset solves on one design.
#[derive(Clone, Debug)]
pub struct L0Solver {
    gram: DMatrix<f64>,
    cap: f64,
}

fn count_supports(d: usize, k: usize) -> f64 {
    let mut total = 0.0;
    let mut c = 1.0;
    for s in 0..=k {
        if s > 0 {
            c = c * (d + 1 - s) as f64 / s as f64;
        }
        total += c;
    }
    total
}

/// `b^T G^+ b` and the minimizer `G^+ b` for a small symmetric PSD block.
fn pinv_quadratic(g: &DMatrix<f64>, b: &[f64]) -> (f64, Vec<f64>) {
    let s = b.len();
    match s {
        0 => (0.0, vec![]),
        1 => {
            if g[(0, 0)] > 0.0 {
                (b[0] * b[0] / g[(0, 0)], vec![b[0] / g[(0, 0)]])
            } else {
                (0.0, vec![0.0])
            }
        }
        2 => pinv2(g[(0, 0)], g[(0, 1)], g[(1, 1)], b[0], b[1]),
        _ => {
            let eig = SymmetricEigen::new(g.clone());
            let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
            let cut = PINV_RTOL * PINV_RTOL * top;
            let mut q = 0.0;
            let mut x = vec![0.0; s];
            for (i, &ev) in eig.eigenvalues.iter().enumerate() {
                if ev > cut && ev > 0.0 {
                    let v = eig.eigenvectors.column(i);
                    let p: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
                    q += p * p / ev;
                    for r in 0..s {
                        x[r] += v[r] * p / ev;
                    }
                }
            }
            (q, x)
        }
    }
}

fn pinv2(a: f64, c: f64, e: f64, b0: f64, b1: f64) -> (f64, Vec<f64>) {
    let tr = a + e;
    let det = a * e - c * c;
    let disc = ((a - e) * (a - e) + 4.0 * c * c).sqrt();
    let top = 0.5 * (tr + disc);
    if top <= 0.0 {
        return (0.0, vec![0.0, 0.0]);
    }
    let low = if det > 0.0 { det / top } else { 0.0 };
    let cut = PINV_RTOL * PINV_RTOL * top;
    if low > cut {
        let x0 = (e * b0 - c * b1) / det;
        let x1 = (a * b1 - c * b0) / det;
        (b0 * x0 + b1 * x1, vec![x0, x1])
    } else {
        // Rank one: project onto the top eigenvector.
        let (v0, v1) = if c != 0.0 {
            let (v0, v1) = (top - e, c);
            let nv = (v0 * v0 + v1 * v1).sqrt();
            (v0 / nv, v1 / nv)
        } else if a >= e {
            (1.0, 0.0)
        } else {
            (0.0, 1.0)
        };
        let p = v0 * b0 + v1 * b1;
        (p * p / top, vec![v0 * p / top, v1 * p / top])
    }
}

fn lex_less(a: &[usize], b: &[usize]) -> bool {
    a < b
}

impl L0Solver {
    pub fn new(design: &DesignMatrix) -> Self {
        let cols = design.columns();
        let d = cols.ncols();
        // Gram via row-wise nonzeros; block designs have two per row.
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); cols.nrows()];
        for j in 0..d {
            for &(i, v) in cols.col(j) {
                rows[i].push((j, v));
            }
        }
        let mut gram = DMatrix::zeros(d, d);
        for row in &rows {
            for &(j, vj) in row {
                for &(k, vk) in row {
                    gram[(j, k)] += vj * vk;
                }
            }
        }
        L0Solver { gram, cap: DEFAULT_ENUMERATION_CAP }
    }

    pub fn with_cap(mut self, cap: f64) -> Self {
        self.cap = cap;
        self
    }

    /// Residual sum of squares of the least-squares fit on `support`.
    pub fn support_rss(&self, yy: f64, xty: &[f64], support: &[usize]) -> f64 {
        let g = self.gram.select_rows(support).select_columns(support);
        let b: Vec<f64> = support.iter().map(|&j| xty[j]).collect();
        yy - pinv_quadratic(&g, &b).0
    }

    /// Best support of size at most `k` for `y`.
    pub fn solve(&self, design: &DesignMatrix, y: &[f64], k: usize) -> Result<EstimatorSolution> {
        let d = design.ncols();
        let n = design.nrows();
        if y.len() != n {
            return invalid(format!("y has length {}, design has {n} rows", y.len()));
        }
        if k > n.min(d) {
            return invalid(format!("k={k} exceeds min(n, d)={}", n.min(d)));
        }
        let count = count_supports(d, k);
        if count > self.cap {
            return Err(Error::EnumerationCap { count, cap: self.cap });
        }
        let xty = design.columns().tmul(y);
        let yy: f64 = y.iter().map(|v| v * v).sum();
        let tol = 1e-12 * yy.max(f64::MIN_POSITIVE);

        let mut best_support: Vec<usize> = Vec::new();
        let mut best_rss = yy;
        let mut visited = 1usize;
        let consider = |support: &[usize], rss: f64, best_support: &mut Vec<usize>, best_rss: &mut f64| {
            if rss < *best_rss - tol || (rss <= *best_rss + tol && lex_less(support, best_support)) {
                *best_rss = rss;
                best_support.clear();
                best_support.extend_from_slice(support);
            }
        };
        for s in 1..=k {
            let mut idx: Vec<usize> = (0..s).collect();
            loop {
                visited += 1;
                let rss = match s {
                    1 => {
                        let j = idx[0];
                        let g = self.gram[(j, j)];
                        if g > 0.0 {
                            yy - xty[j] * xty[j] / g
                        } else {
                            yy
                        }
                    }
                    2 => {
                        let (i, j) = (idx[0], idx[1]);
                        yy - pinv2(self.gram[(i, i)], self.gram[(i, j)], self.gram[(j, j)], xty[i], xty[j]).0
                    }
                    _ => self.support_rss(yy, &xty, &idx),
                };
                consider(&idx, rss, &mut best_support, &mut best_rss);
                // Next combination in lexicographic order.
                let mut pos = s;
                while pos > 0 && idx[pos - 1] == d - s + pos - 1 {
                    pos -= 1;
                }
                if pos == 0 {
                    break;
                }
                idx[pos - 1] += 1;
                for q in pos..s {
                    idx[q] = idx[q - 1] + 1;
                }
            }
        }

        let mut theta = vec![0.0; d];
        if !best_support.is_empty() {
            let g = self.gram.select_rows(&best_support).select_columns(&best_support);
            let b: Vec<f64> = best_support.iter().map(|&j| xty[j]).collect();
            let (_, coef) = pinv_quadratic(&g, &b);
            for (&j, c) in best_support.iter().zip(coef) {
                theta[j] = c;
            }
        }
        Ok(EstimatorSolution {
            objective_value: objective(design, y, &SeparablePenalty::l1(), 0.0, &theta),
            theta_hat: theta,
            lambda: 0.0,
            iterations: visited,
            converged: true,
            prediction_error: None,
            sqrt_lasso: None,
        })
    }
}

/// Exact minimizer of `||y - X theta||^2` over vectors with at most `k` nonzeros.
pub fn solve_l0(design: &DesignMatrix, y: &[f64], k: usize) -> Result<EstimatorSolution> {
    L0Solver::new(design).solve(design, y, k)
}
