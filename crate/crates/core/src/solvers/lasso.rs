//! Cyclic coordinate descent for (weighted) Lasso paths.

use crate::designs::DesignMatrix;
use crate::error::{invalid, Result};
use crate::linalg::{norm, SparseColumns};
use crate::penalties::SeparablePenalty;

use super::{objective, EstimatorSolution, LambdaGrid, SqrtLassoLabel};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CdOptions {
    /// Required KKT residual at exit.
    pub kkt_tol: f64,
    pub max_sweeps: usize,
}

impl Default for CdOptions {
    fn default() -> Self {
        CdOptions { kkt_tol: 1e-8, max_sweeps: 100_000 }
    }
}

/// `max_j 2 |X_j^T y| / n`: the smallest weight at which 0 solves the Lasso.
pub fn lambda_max(design: &DesignMatrix, y: &[f64]) -> f64 {
    let n = y.len() as f64;
    design.columns().tmul(y).iter().map(|v| 2.0 * v.abs() / n).fold(0.0, f64::max)
}

fn soft(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Largest KKT violation of `(1/n)||y - X theta||^2 + lambda sum w_j |theta_j|`
/// given the residual `r = y - X theta`.
pub(crate) fn kkt_residual(cols: &SparseColumns, r: &[f64], theta: &[f64], weights: &[f64], lambda: f64) -> f64 {
    let n = r.len() as f64;
    let mut worst: f64 = 0.0;
    for j in 0..cols.ncols() {
        let g = -2.0 * cols.dot_col(j, r) / n;
        let t = lambda * weights[j];
        let v = if theta[j] != 0.0 { (g + t * theta[j].signum()).abs() } else { (g.abs() - t).max(0.0) };
        worst = worst.max(v);
    }
    worst
}

fn residual(cols: &SparseColumns, y: &[f64], theta: &[f64]) -> Vec<f64> {
    let fit = cols.mul(theta);
    y.iter().zip(&fit).map(|(a, b)| a - b).collect()
}

/// Runs coordinate descent in place. Returns (sweeps, converged).
fn cd_solve(
    cols: &SparseColumns,
    y: &[f64],
    weights: &[f64],
    lambda: f64,
    theta: &mut [f64],
    opts: &CdOptions,
) -> (usize, bool) {
    let n = y.len() as f64;
    let d = cols.ncols();
    let c: Vec<f64> = (0..d).map(|j| cols.sq_norm(j) / n).collect();
    let mut r = residual(cols, y, theta);
    let mut last_refit = 0;
    for sweep in 1..=opts.max_sweeps {
        let mut support_changed = false;
        for j in 0..d {
            if c[j] == 0.0 {
                theta[j] = 0.0;
                continue;
            }
            let z = cols.dot_col(j, &r) / n + c[j] * theta[j];
            let new = soft(z, 0.5 * lambda * weights[j]) / c[j];
            let delta = new - theta[j];
            if delta != 0.0 {
                support_changed |= (new == 0.0) != (theta[j] == 0.0) || new.signum() != theta[j].signum();
                cols.axpy_col(j, -delta, &mut r);
                theta[j] = new;
            }
        }
        // Strongly correlated columns make plain sweeps crawl; once the signed
        // support settles, solve the stationarity system on it directly.
        if !support_changed && sweep >= last_refit + 4 {
            last_refit = sweep;
            if support_refit(cols, y, weights, lambda, theta, &mut r, opts.kkt_tol) {
                return (sweep, true);
            }
        }
        if kkt_residual(cols, &r, theta, weights, lambda) <= opts.kkt_tol {
            // Confirm against a freshly computed residual to rule out drift.
            r = residual(cols, y, theta);
            if kkt_residual(cols, &r, theta, weights, lambda) <= opts.kkt_tol {
                return (sweep, true);
            }
        }
        if sweep % 64 == 0 {
            r = residual(cols, y, theta);
        }
    }
    (opts.max_sweeps, false)
}

/// Moves `theta` toward the minimizer over its current signed support, found by
/// conjugate gradients, stopping where the first penalized coordinate would
/// change sign. Returns true if the result passes the full KKT check.
fn support_refit(
    cols: &SparseColumns,
    y: &[f64],
    weights: &[f64],
    lambda: f64,
    theta: &mut [f64],
    r: &mut Vec<f64>,
    kkt_tol: f64,
) -> bool {
    let n = y.len();
    let nf = n as f64;
    let active: Vec<usize> = (0..theta.len()).filter(|&j| theta[j] != 0.0).collect();
    let k = active.len();
    if k == 0 {
        return false;
    }
    let hess = |v: &[f64]| -> Vec<f64> {
        let mut xv = vec![0.0; n];
        for (a, &j) in active.iter().enumerate() {
            cols.axpy_col(j, v[a], &mut xv);
        }
        active.iter().map(|&j| 2.0 * cols.dot_col(j, &xv) / nf).collect()
    };
    let start: Vec<f64> = active.iter().map(|&j| theta[j]).collect();
    // Gradient of the smooth restriction at the start, negated.
    let mut res: Vec<f64> =
        active.iter().map(|&j| 2.0 * cols.dot_col(j, r) / nf - lambda * weights[j] * theta[j].signum()).collect();
    let mut x = start.clone();
    let mut p = res.clone();
    let mut rr: f64 = res.iter().map(|v| v * v).sum();
    let target = (0.1 * kkt_tol).powi(2);
    for _ in 0..4 * k.min(n) + 50 {
        if rr <= target {
            break;
        }
        let hp = hess(&p);
        let php: f64 = p.iter().zip(&hp).map(|(a, b)| a * b).sum();
        if php <= 0.0 {
            break;
        }
        let step = rr / php;
        for a in 0..k {
            x[a] += step * p[a];
            res[a] -= step * hp[a];
        }
        let rr_new: f64 = res.iter().map(|v| v * v).sum();
        for a in 0..k {
            p[a] = res[a] + rr_new / rr * p[a];
        }
        rr = rr_new;
    }
    let mut t: f64 = 1.0;
    let mut blocker = None;
    for (a, &j) in active.iter().enumerate() {
        if weights[j] * lambda > 0.0 && x[a].signum() != start[a].signum() {
            let ta = start[a] / (start[a] - x[a]);
            if ta < t {
                t = ta;
                blocker = Some(a);
            }
        }
    }
    for (a, &j) in active.iter().enumerate() {
        theta[j] = start[a] + t * (x[a] - start[a]);
    }
    if let Some(a) = blocker {
        theta[active[a]] = 0.0;
    }
    *r = residual(cols, y, theta);
    blocker.is_none() && kkt_residual(cols, r, theta, weights, lambda) <= kkt_tol
}

/// Weighted Lasso path on the canonical scale, warm-started down the grid.
pub fn solve_weighted_lasso_path(
    design: &DesignMatrix,
    y: &[f64],
    weights: &[f64],
    grid: &LambdaGrid,
    opts: &CdOptions,
) -> Result<Vec<EstimatorSolution>> {
    if y.len() != design.nrows() {
        return invalid(format!("y has length {}, design has {} rows", y.len(), design.nrows()));
    }
    if weights.len() != design.ncols() {
        return invalid(format!("{} weights for {} columns", weights.len(), design.ncols()));
    }
    let penalty = SeparablePenalty::weighted_l1(weights.to_vec())?;
    let cols = design.columns();
    let mut theta = vec![0.0; design.ncols()];
    let mut out = Vec::with_capacity(grid.len());
    for &lambda in grid.values() {
        let (iterations, converged) = cd_solve(cols, y, weights, lambda, &mut theta, opts);
        out.push(EstimatorSolution {
            objective_value: objective(design, y, &penalty, lambda, &theta),
            theta_hat: theta.clone(),
            lambda,
            iterations,
            converged,
            prediction_error: None,
            sqrt_lasso: None,
        });
    }
    Ok(out)
}

/// Lasso path for `(1/n)||y - X theta||^2 + lambda ||theta||_1`.
pub fn solve_lasso_path(design: &DesignMatrix, y: &[f64], grid: &LambdaGrid) -> Result<Vec<EstimatorSolution>> {
    solve_weighted_lasso_path(design, y, &vec![1.0; design.ncols()], grid, &CdOptions::default())
}

/// Single-weight Lasso solve from zero.
pub fn solve_lasso(design: &DesignMatrix, y: &[f64], lambda: f64) -> Result<EstimatorSolution> {
    let grid = LambdaGrid::new(vec![lambda])?;
    Ok(solve_lasso_path(design, y, &grid)?.remove(0))
}

/// Minimizes `||y - X theta||^2 + lambda sum_j alpha_j |theta_j|` (unnormalized).
///
/// The returned `lambda` is on the canonical scale, i.e. `lambda / n`.
pub fn solve_reweighted_lasso(
    design: &DesignMatrix,
    y: &[f64],
    weights: &[f64],
    lambda: f64,
    opts: &CdOptions,
) -> Result<EstimatorSolution> {
    let grid = LambdaGrid::new(vec![lambda / y.len() as f64])?;
    Ok(solve_weighted_lasso_path(design, y, weights, &grid, opts)?.remove(0))
}

/// Reweighted Lasso along a grid given on the unnormalized scale.
pub fn solve_reweighted_lasso_path(
    design: &DesignMatrix,
    y: &[f64],
    weights: &[f64],
    grid: &LambdaGrid,
    opts: &CdOptions,
) -> Result<Vec<EstimatorSolution>> {
    let n = y.len() as f64;
    let canonical = LambdaGrid::new(grid.values().iter().map(|l| l / n).collect())?;
    solve_weighted_lasso_path(design, y, weights, &canonical, opts)
}

/// Square-root Lasso `(1/sqrt(n)) ||y - X theta|| + lambda ||theta||_1` along a grid.
///
/// Each solution is a Lasso solution at weight `2 lambda ||y - X theta||/sqrt(n)`,
/// found by fixed-point iteration on the noise level. The returned `lambda` is
/// that Lasso weight; the square-root weight and `||theta||_1` are in the label.
pub fn solve_sqrt_lasso(design: &DesignMatrix, y: &[f64], grid: &LambdaGrid) -> Result<Vec<EstimatorSolution>> {
    let n = y.len() as f64;
    let d = design.ncols();
    let weights = vec![1.0; d];
    let opts = CdOptions { kkt_tol: 1e-11, ..CdOptions::default() };
    let penalty = SeparablePenalty::l1();
    let cols = design.columns();
    let mut theta = vec![0.0; d];
    let mut out = Vec::with_capacity(grid.len());
    for &s in grid.values() {
        let mut scale = norm(&residual(cols, y, &theta)) / n.sqrt();
        let mut total = 0;
        let mut converged = false;
        let mut lambda = 2.0 * s * scale;
        for _ in 0..10_000 {
            lambda = 2.0 * s * scale;
            let (sweeps, ok) = cd_solve(cols, y, &weights, lambda, &mut theta, &opts);
            total += sweeps;
            let next = norm(&residual(cols, y, &theta)) / n.sqrt();
            let done = (next - scale).abs() <= 1e-13 * (1.0 + scale);
            scale = next;
            if done {
                converged = ok;
                break;
            }
        }
        out.push(EstimatorSolution {
            objective_value: objective(design, y, &penalty, lambda, &theta),
            theta_hat: theta.clone(),
            lambda,
            iterations: total,
            converged,
            prediction_error: None,
            sqrt_lasso: Some(SqrtLassoLabel { sqrt_lambda: s, l1_radius: theta.iter().map(|t| t.abs()).sum() }),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::{build_simulation_design, make_instance, NoiseKind, OddRows};
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn sim(n: usize, seed: u64) -> (Arc<DesignMatrix>, Vec<f64>, Vec<f64>) {
        let x = Arc::new(build_simulation_design(n, OddRows::Reject).unwrap());
        let t = x.default_theta_star();
        let inst = make_instance(x.clone(), t.clone(), 1.0, NoiseKind::Gaussian, seed).unwrap();
        (x, inst.y, t)
    }

    #[test]
    fn orthogonal_design_soft_thresholds() {
        let n = 9;
        let x = DesignMatrix::custom(DMatrix::identity(n, n) * (n as f64).sqrt());
        let y: Vec<f64> = (0..n).map(|i| i as f64 - 4.0).collect();
        let lam = 0.7;
        let s = solve_lasso(&x, &y, lam).unwrap();
        for j in 0..n {
            let z = y[j] / 3.0;
            let expect = z.signum() * (z.abs() - lam / 2.0).max(0.0);
            assert!((s.theta_hat[j] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_above_lambda_max_and_interpolation_at_zero() {
        let (x, y, _) = sim(16, 3);
        let lmax = lambda_max(&x, &y);
        let s = solve_lasso(&x, &y, lmax * (1.0 + 1e-12)).unwrap();
        assert!(s.is_zero());
        let s = solve_lasso(&x, &y, 0.0).unwrap();
        let fit = x.mul(&s.theta_hat);
        let rss: f64 = y.iter().zip(&fit).map(|(a, b)| (a - b) * (a - b)).sum();
        assert!(rss < 1e-12, "{rss}");
        let inv = x.entries().clone().try_inverse().unwrap() * nalgebra::DVector::from_row_slice(&y);
        for j in 0..16 {
            assert!((s.theta_hat[j] - inv[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn path_satisfies_kkt_and_residual_monotone() {
        let (x, y, _) = sim(64, 5);
        let grid = LambdaGrid::default_for(&x, &y).unwrap();
        let path = solve_lasso_path(&x, &y, &grid).unwrap();
        let w = vec![1.0; 64];
        let mut last_rss = f64::INFINITY;
        for s in &path {
            assert!(s.converged);
            let r = residual(x.columns(), &y, &s.theta_hat);
            assert!(kkt_residual(x.columns(), &r, &s.theta_hat, &w, s.lambda) <= 1e-8);
            let rss: f64 = r.iter().map(|v| v * v).sum();
            assert!(rss <= last_rss + 1e-9);
            last_rss = rss;
        }
    }

    #[test]
    fn unit_weights_match_plain_lasso() {
        let (x, y, _) = sim(16, 8);
        let lam = 0.05;
        let a = solve_lasso(&x, &y, lam).unwrap();
        let b = solve_reweighted_lasso(&x, &y, &[1.0; 16], lam * 16.0, &CdOptions::default()).unwrap();
        for j in 0..16 {
            assert!((a.theta_hat[j] - b.theta_hat[j]).abs() < 1e-9);
        }
        assert!((a.lambda - b.lambda).abs() < 1e-15);
    }

    #[test]
    fn large_weights_force_zeros() {
        let (x, y, _) = sim(16, 2);
        let mut w = vec![1e6; 16];
        w[14] = 1.0;
        w[15] = 1.0;
        let s = solve_reweighted_lasso(&x, &y, &w, 0.5, &CdOptions::default()).unwrap();
        assert!(s.theta_hat[..14].iter().all(|t| *t == 0.0));
    }

    #[test]
    fn sqrt_lasso_limits_and_kkt() {
        let (x, y, _) = sim(16, 4);
        let grid = LambdaGrid::new(vec![1e6, 0.3, 0.25, 0.2, 0.0]).unwrap();
        let path = solve_sqrt_lasso(&x, &y, &grid).unwrap();
        assert!(path[0].is_zero());
        let n = 16.0f64;
        for s in &path[1..4] {
            // Independent optimality check of the square-root objective.
            let r = residual(x.columns(), &y, &s.theta_hat);
            let rn = norm(&r);
            let lam = s.sqrt_lasso.as_ref().unwrap().sqrt_lambda;
            for j in 0..16 {
                let g = -x.columns().dot_col(j, &r) / (n.sqrt() * rn);
                let t = s.theta_hat[j];
                let v = if t != 0.0 { (g + lam * t.signum()).abs() } else { (g.abs() - lam).max(0.0) };
                assert!(v < 1e-8, "{v}");
            }
        }
        let last = path.last().unwrap();
        assert!(norm(&residual(x.columns(), &y, &last.theta_hat)) < 1e-6);
    }

    #[test]
    fn sqrt_lasso_points_lie_on_dense_lasso_path() {
        let (x, y, _) = sim(16, 6);
        let grid = LambdaGrid::new(vec![0.4, 0.3, 0.25, 0.2]).unwrap();
        let sq = solve_sqrt_lasso(&x, &y, &grid).unwrap();
        let lmax = lambda_max(&x, &y);
        let dense = LambdaGrid::log_spaced(lmax, 1e-4, 4000).unwrap();
        let opts = CdOptions { kkt_tol: 1e-12, ..CdOptions::default() };
        let path = solve_weighted_lasso_path(&x, &y, &[1.0; 16], &dense, &opts).unwrap();
        for s in &sq {
            // The Lasso path is piecewise linear in lambda, so interpolate between neighbors.
            let l = s.lambda;
            let i = path.iter().position(|p| p.lambda <= l).unwrap().max(1);
            let (hi, lo) = (&path[i - 1], &path[i]);
            let t = (l - lo.lambda) / (hi.lambda - lo.lambda);
            let dist: f64 = (0..16)
                .map(|j| {
                    let v = lo.theta_hat[j] + t * (hi.theta_hat[j] - lo.theta_hat[j]);
                    (v - s.theta_hat[j]).powi(2)
                })
                .sum::<f64>()
                .sqrt();
            assert!(dist < 1e-5, "{dist}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn kkt_holds_for_random_instances(seed in 0u64..1000, frac in 0.001f64..1.0) {
            let (x, y, _) = sim(32, seed);
            let lam = lambda_max(&x, &y) * frac;
            let s = solve_lasso(&x, &y, lam).unwrap();
            let r = residual(x.columns(), &y, &s.theta_hat);
            prop_assert!(kkt_residual(x.columns(), &r, &s.theta_hat, &vec![1.0; 32], lam) <= 1e-8);
        }
    }
}
