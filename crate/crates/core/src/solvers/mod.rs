//! Penalized least-squares estimators and regularization-weight selection.
//!
//! The canonical objective is `(1/n) ||y - X theta||^2 + lambda * rho_lambda(theta)`.

mod l0;
mod lasso;
mod proximal;

pub use l0::{solve_l0, L0Solver, DEFAULT_ENUMERATION_CAP};
pub use lasso::{
    lambda_max, solve_lasso, solve_lasso_path, solve_reweighted_lasso, solve_reweighted_lasso_path,
    solve_sqrt_lasso, solve_weighted_lasso_path, CdOptions,
};
pub use proximal::{solve_penalized, solve_penalized_multistart, ProxGradOptions};

use serde::Serialize;

use crate::designs::{format_f64, DesignMatrix};
use crate::error::{invalid, Result};
use crate::penalties::SeparablePenalty;

/// Extra labels attached to square-root Lasso solutions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SqrtLassoLabel {
    /// The square-root Lasso weight this solution answers.
    pub sqrt_lambda: f64,
    /// `||theta_hat||_1`, the radius of the equivalent constrained problem.
    pub l1_radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimatorSolution {
    pub theta_hat: Vec<f64>,
    /// Regularization weight on the canonical `(1/n)` scale.
    pub lambda: f64,
    pub objective_value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub prediction_error: Option<f64>,
    pub sqrt_lasso: Option<SqrtLassoLabel>,
}

impl EstimatorSolution {
    pub fn with_truth(mut self, design: &DesignMatrix, theta_star: &[f64]) -> Self {
        self.prediction_error = Some(design.prediction_error(&self.theta_hat, theta_star));
        self
    }

    pub fn is_zero(&self) -> bool {
        self.theta_hat.iter().all(|t| *t == 0.0)
    }

    /// CSV row `estimator,lambda,prediction_error,objective,iterations,converged`.
    pub fn csv_row(&self, estimator: &str) -> String {
        format!(
            "{},{},{},{},{},{}",
            estimator,
            format_f64(self.lambda),
            self.prediction_error.map(format_f64).unwrap_or_default(),
            format_f64(self.objective_value),
            self.iterations,
            self.converged
        )
    }
}

pub const SOLUTION_CSV_HEADER: &str = "estimator,lambda,prediction_error,objective,iterations,converged";

/// `(1/n) ||y - X theta||^2 + lambda * rho_lambda(theta)`.
pub fn objective(design: &DesignMatrix, y: &[f64], penalty: &SeparablePenalty, lambda: f64, theta: &[f64]) -> f64 {
    let fit = design.mul(theta);
    let rss: f64 = y.iter().zip(&fit).map(|(a, b)| (a - b) * (a - b)).sum();
    rss / y.len() as f64 + penalty.regularizer(theta, lambda)
}

/// Strictly decreasing nonnegative regularization weights.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaGrid {
    values: Vec<f64>,
}

impl LambdaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return invalid("lambda grid must be nonempty");
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return invalid("lambda values must be finite and nonnegative");
        }
        if values.windows(2).any(|w| w[1] >= w[0]) {
            return invalid("lambda grid must be strictly decreasing");
        }
        Ok(LambdaGrid { values })
    }

    /// `count` log-spaced values from `max` down to `max * ratio`.
    pub fn log_spaced(max: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(max > 0.0 && ratio > 0.0 && ratio < 1.0) {
            return invalid(format!("need max > 0 and ratio in (0, 1), got {max}, {ratio}"));
        }
        if count == 1 {
            return Self::new(vec![max]);
        }
        let values = (0..count)
            .map(|i| max * ratio.powf(i as f64 / (count - 1) as f64))
            .collect();
        Self::new(values)
    }

    /// The default path grid: 100 values from `lambda_max` down to `1e-4 * lambda_max`.
    pub fn default_for(design: &DesignMatrix, y: &[f64]) -> Result<Self> {
        let max = lambda_max(design, y);
        if max <= 0.0 {
            return Self::new(vec![0.0]);
        }
        Self::log_spaced(max, 1e-4, 100)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Closed-form regularization weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LambdaPreset {
    /// `4 sigma sqrt(log d / n)`.
    LassoBasic,
    /// `4 sigma sqrt(2 log d / n)`.
    LassoConservative,
    /// `c sqrt(log n / n)`, the default for SCAD and MCP with `c = 0.1`.
    Nonconvex { c: f64 },
}

impl LambdaPreset {
    pub fn value(self, sigma: f64, n: usize, d: usize) -> f64 {
        let (nf, df) = (n as f64, d as f64);
        match self {
            LambdaPreset::LassoBasic => 4.0 * sigma * (df.ln() / nf).sqrt(),
            LambdaPreset::LassoConservative => 4.0 * sigma * (2.0 * df.ln() / nf).sqrt(),
            LambdaPreset::Nonconvex { c } => c * (nf.ln() / nf).sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SelectionCriterion {
    /// Smallest `(1/n) ||X (theta_hat - theta_star)||^2` along the path.
    OraclePredictionError,
    /// The path element whose weight is nearest to the given value.
    Fixed(f64),
}

pub fn select_lambda(path: &[EstimatorSolution], criterion: SelectionCriterion) -> Result<EstimatorSolution> {
    if path.is_empty() {
        return invalid("cannot select from an empty path");
    }
    let idx = match criterion {
        SelectionCriterion::OraclePredictionError => {
            let mut best: Option<(usize, f64)> = None;
            for (i, s) in path.iter().enumerate() {
                let e = match s.prediction_error {
                    Some(e) => e,
                    None => return invalid("oracle selection needs prediction errors on every path point"),
                };
                if best.is_none_or(|(_, b)| e < b) {
                    best = Some((i, e));
                }
            }
            best.map(|(i, _)| i).unwrap_or(0)
        }
        SelectionCriterion::Fixed(target) => {
            let dist = |l: f64| {
                if l > 0.0 && target > 0.0 {
                    (l.ln() - target.ln()).abs()
                } else {
                    (l - target).abs() * 1e300
                }
            };
            (0..path.len())
                .min_by(|&a, &b| dist(path[a].lambda).total_cmp(&dist(path[b].lambda)))
                .unwrap_or(0)
        }
    };
    Ok(path[idx].clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sol(lambda: f64, err: f64) -> EstimatorSolution {
        EstimatorSolution {
            theta_hat: vec![],
            lambda,
            objective_value: 0.0,
            iterations: 0,
            converged: true,
            prediction_error: Some(err),
            sqrt_lasso: None,
        }
    }

    #[test]
    fn grid_validation() {
        assert!(LambdaGrid::new(vec![]).is_err());
        assert!(LambdaGrid::new(vec![1.0, 1.0]).is_err());
        assert!(LambdaGrid::new(vec![1.0, 0.5, 0.0]).is_ok());
        let g = LambdaGrid::log_spaced(2.0, 1e-4, 100).unwrap();
        assert_eq!(g.len(), 100);
        assert!((g.values()[99] - 2e-4).abs() < 1e-16);
    }

    #[test]
    fn presets() {
        let n = 100;
        let d = 100;
        let l1 = LambdaPreset::LassoBasic.value(1.0, n, d);
        let l2 = LambdaPreset::LassoConservative.value(1.0, n, d);
        assert!((l2 / l1 - 2f64.sqrt()).abs() < 1e-14);
        assert!((LambdaPreset::Nonconvex { c: 0.1 }.value(1.0, 16, 16) - 0.1 * (16f64.ln() / 16.0).sqrt()).abs() < 1e-16);
    }

    #[test]
    fn selection() {
        let path = vec![sol(1.0, 0.5), sol(0.1, 0.2), sol(0.01, 0.3)];
        assert_eq!(select_lambda(&path, SelectionCriterion::OraclePredictionError).unwrap().lambda, 0.1);
        assert_eq!(select_lambda(&path, SelectionCriterion::Fixed(0.02)).unwrap().lambda, 0.01);
        assert_eq!(select_lambda(&path[..1], SelectionCriterion::Fixed(5.0)).unwrap().lambda, 1.0);
        assert!(select_lambda(&[], SelectionCriterion::OraclePredictionError).is_err());
    }
}
