//! Proximal gradient with Barzilai-Borwein steps and a nonmonotone line search.

use rand_distr::{Distribution, StandardNormal};

use crate::designs::DesignMatrix;
use crate::error::{invalid, Error, Result};
use crate::linalg::norm;
use crate::penalties::SeparablePenalty;
use crate::rng;

use super::lasso::{solve_weighted_lasso_path, CdOptions};
use super::{objective, EstimatorSolution, LambdaGrid};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProxGradOptions {
    pub max_iters: usize,
    /// Stop when `||theta+ - theta|| <= tol (1 + ||theta||)`.
    pub tol: f64,
    /// Number of past objective values in the nonmonotone reference.
    pub window: usize,
    /// Sufficient-decrease constant.
    pub sigma: f64,
    /// Abort once the objective exceeds this multiple of its initial value.
    pub divergence_factor: f64,
}

impl Default for ProxGradOptions {
    fn default() -> Self {
        ProxGradOptions { max_iters: 100_000, tol: 1e-9, window: 5, sigma: 1e-5, divergence_factor: 1e12 }
    }
}

const STEP_MIN: f64 = 1e-30;
const STEP_MAX: f64 = 1e30;

/// Stationary point of `(1/n)||y - X theta||^2 + lambda rho_lambda(theta)` from `init`.
pub fn solve_penalized(
    design: &DesignMatrix,
    y: &[f64],
    penalty: &SeparablePenalty,
    lambda: f64,
    init: &[f64],
    opts: &ProxGradOptions,
) -> Result<EstimatorSolution> {
    let d = design.ncols();
    let n = y.len() as f64;
    if init.len() != d || y.len() != design.nrows() {
        return invalid("dimension mismatch between design, y and init");
    }
    if let Some(dim) = penalty.dimension() {
        if dim != d {
            return invalid(format!("penalty has {dim} weights, design has {d} columns"));
        }
    }
    let cols = design.columns();
    let gradient = |theta: &[f64]| -> Vec<f64> {
        let fit = cols.mul(theta);
        let r: Vec<f64> = y.iter().zip(&fit).map(|(a, b)| a - b).collect();
        cols.tmul(&r).iter().map(|v| -2.0 * v / n).collect()
    };
    let f = |theta: &[f64]| objective(design, y, penalty, lambda, theta);

    let mut theta = init.to_vec();
    let mut value = f(&theta);
    let limit = opts.divergence_factor * value.abs().max(f64::MIN_POSITIVE);
    let mut history = vec![value];
    let mut grad = gradient(&theta);
    // Inverse step length; start from the largest column curvature.
    let mut alpha = (0..d).map(|j| 2.0 * cols.sq_norm(j) / n).fold(0.0, f64::max).max(1.0);

    let mut next = vec![0.0; d];
    for iter in 1..=opts.max_iters {
        let reference = history.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut next_value;
        loop {
            for j in 0..d {
                next[j] = penalty.scaled_prox(j, theta[j] - grad[j] / alpha, 1.0 / alpha, lambda);
            }
            next_value = f(&next);
            let step: f64 = next.iter().zip(&theta).map(|(a, b)| (a - b) * (a - b)).sum();
            if next_value <= reference - 0.5 * opts.sigma * alpha * step || alpha >= STEP_MAX {
                break;
            }
            alpha = (alpha * 2.0).min(STEP_MAX);
        }
        if !next_value.is_finite() || next_value > limit {
            return Err(Error::Diverged { objective: next_value, limit });
        }
        let s: Vec<f64> = next.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let moved = norm(&s);
        let done = moved <= opts.tol * (1.0 + norm(&theta));
        theta.copy_from_slice(&next);
        value = next_value;
        if done {
            return Ok(EstimatorSolution {
                theta_hat: theta,
                lambda,
                objective_value: value,
                iterations: iter,
                converged: true,
                prediction_error: None,
                sqrt_lasso: None,
            });
        }
        let new_grad = gradient(&theta);
        let sy: f64 = s.iter().zip(new_grad.iter().zip(&grad)).map(|(a, (g1, g0))| a * (g1 - g0)).sum();
        let ss: f64 = s.iter().map(|v| v * v).sum();
        alpha = if ss > 0.0 { (sy / ss).clamp(STEP_MIN, STEP_MAX) } else { alpha };
        grad = new_grad;
        history.push(value);
        if history.len() > opts.window {
            history.remove(0);
        }
    }
    Ok(EstimatorSolution {
        theta_hat: theta,
        lambda,
        objective_value: value,
        iterations: opts.max_iters,
        converged: false,
        prediction_error: None,
        sqrt_lasso: None,
    })
}

/// Runs `solve_penalized` from 0, the least-squares point and `random_starts`
/// standard-normal draws, keeping the lowest objective.
pub fn solve_penalized_multistart(
    design: &DesignMatrix,
    y: &[f64],
    penalty: &SeparablePenalty,
    lambda: f64,
    random_starts: usize,
    seed: u64,
    opts: &ProxGradOptions,
) -> Result<EstimatorSolution> {
    let d = design.ncols();
    let mut starts = vec![vec![0.0; d]];
    let ls = solve_weighted_lasso_path(design, y, &vec![1.0; d], &LambdaGrid::new(vec![0.0])?, &CdOptions::default())?;
    starts.push(ls[0].theta_hat.clone());
    let mut r = rng::rng(seed);
    for _ in 0..random_starts {
        starts.push((0..d).map(|_| StandardNormal.sample(&mut r)).collect());
    }
    let mut best: Option<EstimatorSolution> = None;
    for s in &starts {
        let sol = solve_penalized(design, y, penalty, lambda, s, opts)?;
        if best.as_ref().is_none_or(|b| sol.objective_value < b.objective_value) {
            best = Some(sol);
        }
    }
    Ok(best.expect("at least one start"))
}
