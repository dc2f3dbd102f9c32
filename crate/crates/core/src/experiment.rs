//! Seeded Monte-Carlo experiments over a grid of sample sizes.

use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::designs::{
    build_dalalyan_design, build_descent_design, build_local_min_design, build_simulation_design, make_instance,
    DesignMatrix, NoiseKind, OddRows, RegressionInstance,
};
use crate::error::{invalid, Result};
use crate::landscape::{compute_lemma1_bound, worst_local_min_error};
use crate::local_descent::{descend, DescentConfig};
use crate::penalties::SeparablePenalty;
use crate::report::{ExperimentReport, TrialRecord};
use crate::rng::{substream, trial_seed};
use crate::solvers::{
    lambda_max, select_lambda, solve_penalized, solve_weighted_lasso_path, CdOptions, EstimatorSolution, L0Solver,
    LambdaGrid, LambdaPreset, ProxGradOptions, SelectionCriterion,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    ScalingSimulation,
    DalalyanFastRate,
    LandscapeDiagnostic,
    DescentStudy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    L0,
    Lasso,
    Scad,
    Mcp,
    Rwlasso,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::L0 => "l0",
            Estimator::Lasso => "lasso",
            Estimator::Scad => "scad",
            Estimator::Mcp => "mcp",
            Estimator::Rwlasso => "rwlasso",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "l0" => Ok(Estimator::L0),
            "lasso" => Ok(Estimator::Lasso),
            "scad" => Ok(Estimator::Scad),
            "mcp" => Ok(Estimator::Mcp),
            "rwlasso" => Ok(Estimator::Rwlasso),
            other => invalid(format!("unknown estimator {other:?}")),
        }
    }
}

/// How an estimator's regularization weight is picked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    /// Smallest prediction error along a 100-point path.
    Oracle,
    /// Closed-form weight: `c sqrt(log n / n)` for SCAD/MCP, `4 sigma sqrt(log d / n)` for Lasso.
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n_values: Vec<usize>,
    pub trials: usize,
    pub estimators: Vec<Estimator>,
    pub master_seed: u64,
    pub sigma: f64,
    pub lasso_rule: LambdaRule,
    pub nonconvex_rule: LambdaRule,
    /// Pre-factor `C` in `lambda = C sqrt(log n / n)`.
    pub nonconvex_c: f64,
    pub scad_a: f64,
    pub mcp_b: f64,
    /// Dalalyan support override (0-indexed); defaults to `m-2, m-1`.
    pub dalalyan_support: Option<Vec<usize>>,
    /// Dalalyan noise law; Rademacher unless overridden.
    pub dalalyan_noise: NoiseKind,
    /// Penalty for the landscape and descent studies.
    pub penalty: SeparablePenalty,
    /// Lambda grid for the landscape and descent studies.
    pub lambda_grid: Option<Vec<f64>>,
    /// Initialization standard deviation for descent.
    pub init_std: f64,
    pub output_csv: Option<PathBuf>,
    pub output_svg: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: ExperimentKind::ScalingSimulation,
            n_values: vec![16, 32, 64, 128, 256, 512, 1024],
            trials: 100,
            estimators: vec![Estimator::L0, Estimator::Lasso, Estimator::Scad, Estimator::Mcp],
            master_seed: 0,
            sigma: 1.0,
            lasso_rule: LambdaRule::Oracle,
            nonconvex_rule: LambdaRule::Fixed,
            nonconvex_c: 0.1,
            scad_a: 3.7,
            mcp_b: 2.7,
            dalalyan_support: None,
            dalalyan_noise: NoiseKind::Rademacher,
            penalty: SeparablePenalty::scad(3.7).expect("valid SCAD"),
            lambda_grid: None,
            init_std: 1.0,
            output_csv: None,
            output_svg: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: ExperimentConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return invalid("trials must be at least 1");
        }
        if self.n_values.is_empty() {
            return invalid("n_values must be nonempty");
        }
        if self.n_values.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("n_values must be strictly ascending");
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return invalid("sigma must be nonnegative");
        }
        match self.experiment {
            ExperimentKind::DalalyanFastRate => {
                if self.n_values[0] < 4 {
                    return invalid("Dalalyan designs need n >= 4");
                }
            }
            _ => {
                if let Some(n) = self.n_values.iter().find(|n| **n < 4 || **n % 2 == 1) {
                    return invalid(format!("block designs need even n >= 4, got {n}"));
                }
            }
        }
        if self.estimators.is_empty() && matches!(self.experiment, ExperimentKind::ScalingSimulation | ExperimentKind::DalalyanFastRate) {
            return invalid("no estimators selected");
        }
        if self.experiment == ExperimentKind::ScalingSimulation && self.estimators.contains(&Estimator::Rwlasso) {
            return invalid("rwlasso is only defined for the Dalalyan experiment");
        }
        if self.experiment == ExperimentKind::DalalyanFastRate
            && self.estimators.iter().any(|e| !matches!(e, Estimator::Rwlasso | Estimator::Lasso))
        {
            return invalid("the Dalalyan experiment runs rwlasso and lasso only");
        }
        if let Some(g) = &self.lambda_grid {
            if g.is_empty() || g.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
                return invalid("lambda_grid must be nonempty and nonnegative");
            }
        }
        Ok(())
    }
}

/// Runs the experiment named in the config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    match config.experiment {
        ExperimentKind::ScalingSimulation => run_scaling_experiment(config),
        ExperimentKind::DalalyanFastRate => run_dalalyan_experiment(config),
        ExperimentKind::LandscapeDiagnostic => run_landscape_study(config),
        ExperimentKind::DescentStudy => run_descent_study(config),
    }
}

fn record(n: usize, trial: usize, seed: u64, est: &str, sol: Result<(EstimatorSolution, Option<f64>)>) -> TrialRecord {
    match sol {
        Ok((s, fit_residual)) => TrialRecord {
            n,
            trial,
            estimator: est.to_string(),
            seed,
            error: s.prediction_error,
            is_zero: s.is_zero(),
            lambda: s.lambda,
            fit_residual,
        },
        Err(_) => TrialRecord {
            n,
            trial,
            estimator: est.to_string(),
            seed,
            error: None,
            is_zero: false,
            lambda: f64::NAN,
            fit_residual: None,
        },
    }
}

fn path_grid(max: f64) -> Result<LambdaGrid> {
    if max > 0.0 {
        LambdaGrid::log_spaced(max, 1e-4, 100)
    } else {
        LambdaGrid::new(vec![0.0])
    }
}

fn with_truth(path: Vec<EstimatorSolution>, inst: &RegressionInstance) -> Vec<EstimatorSolution> {
    path.into_iter().map(|s| s.with_truth(&inst.design, &inst.theta_star)).collect()
}

fn run_lasso(inst: &RegressionInstance, rule: LambdaRule, opts: &CdOptions) -> Result<EstimatorSolution> {
    let design = &inst.design;
    let ones = vec![1.0; design.ncols()];
    match rule {
        LambdaRule::Oracle => {
            let grid = path_grid(lambda_max(design, &inst.y))?;
            let path = with_truth(solve_weighted_lasso_path(design, &inst.y, &ones, &grid, opts)?, inst);
            select_lambda(&path, SelectionCriterion::OraclePredictionError)
        }
        LambdaRule::Fixed => {
            let lam = LambdaPreset::LassoBasic.value(inst.sigma.max(f64::MIN_POSITIVE), inst.n(), inst.d());
            let grid = LambdaGrid::new(vec![lam])?;
            Ok(solve_weighted_lasso_path(design, &inst.y, &ones, &grid, opts)?.remove(0).with_truth(design, &inst.theta_star))
        }
    }
}

fn run_nonconvex(inst: &RegressionInstance, penalty: &SeparablePenalty, rule: LambdaRule, c: f64) -> Result<EstimatorSolution> {
    let design = &inst.design;
    let opts = ProxGradOptions::default();
    let zero = vec![0.0; design.ncols()];
    match rule {
        LambdaRule::Fixed => {
            let lam = LambdaPreset::Nonconvex { c }.value(inst.sigma, inst.n(), inst.d());
            Ok(solve_penalized(design, &inst.y, penalty, lam, &zero, &opts)?.with_truth(design, &inst.theta_star))
        }
        LambdaRule::Oracle => {
            let grid = path_grid(lambda_max(design, &inst.y))?;
            let mut init = zero;
            let mut path = Vec::with_capacity(grid.len());
            for &lam in grid.values() {
                let s = solve_penalized(design, &inst.y, penalty, lam, &init, &opts)?;
                init = s.theta_hat.clone();
                path.push(s.with_truth(design, &inst.theta_star));
            }
            select_lambda(&path, SelectionCriterion::OraclePredictionError)
        }
    }
}

fn run_trials<F>(config: &ExperimentConfig, n: usize, f: F) -> Vec<TrialRecord>
where
    F: Fn(usize, u64) -> Vec<TrialRecord> + Sync,
{
    let per: Vec<Vec<TrialRecord>> =
        (0..config.trials).into_par_iter().map(|t| f(t, trial_seed(config.master_seed, n, t))).collect();
    per.into_iter().flatten().collect()
}

/// Simulation-design study: l0 (k = 2), Lasso, SCAD and MCP across n.
pub fn run_scaling_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let scad = SeparablePenalty::scad(config.scad_a)?;
    let mcp = SeparablePenalty::mcp(config.mcp_b)?;
    let mut records = Vec::new();
    for &n in &config.n_values {
        let design = Arc::new(build_simulation_design(n, OddRows::Reject)?);
        let theta_star = design.default_theta_star();
        let l0 = config.estimators.contains(&Estimator::L0).then(|| L0Solver::new(&design));
        records.extend(run_trials(config, n, |trial, seed| {
            let inst = match make_instance(design.clone(), theta_star.clone(), config.sigma, NoiseKind::Gaussian, seed) {
                Ok(i) => i,
                Err(_) => return Vec::new(),
            };
            config
                .estimators
                .iter()
                .map(|&e| {
                    let sol = match e {
                        Estimator::L0 => l0
                            .as_ref()
                            .expect("l0 solver built")
                            .solve(&design, &inst.y, 2)
                            .map(|s| s.with_truth(&design, &inst.theta_star)),
                        Estimator::Lasso => run_lasso(&inst, config.lasso_rule, &CdOptions::default()),
                        Estimator::Scad => run_nonconvex(&inst, &scad, config.nonconvex_rule, config.nonconvex_c),
                        Estimator::Mcp => run_nonconvex(&inst, &mcp, config.nonconvex_rule, config.nonconvex_c),
                        Estimator::Rwlasso => invalid("rwlasso needs the Dalalyan design"),
                    };
                    record(n, trial, seed, e.name(), sol.map(|s| (s, None)))
                })
                .collect()
        }));
    }
    Ok(ExperimentReport::from_records(records))
}

/// Weights for the reweighted Lasso on the Dalalyan design: zero on the first
/// coordinate of each half, one elsewhere.
pub fn dalalyan_weights(design: &DesignMatrix) -> Vec<f64> {
    let d = design.ncols();
    let m = d / 2;
    let mut w = vec![1.0; d];
    w[0] = 0.0;
    w[m] = 0.0;
    w
}

/// Smallest weight at which every penalized coordinate is zero, after fitting
/// the unpenalized ones.
fn weighted_lambda_max(design: &DesignMatrix, y: &[f64], weights: &[f64], opts: &CdOptions) -> Result<f64> {
    let huge = LambdaGrid::new(vec![1e12])?;
    let fit = solve_weighted_lasso_path(design, y, weights, &huge, opts)?.remove(0);
    let pred = design.mul(&fit.theta_hat);
    let r: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
    let n = y.len() as f64;
    Ok(design
        .columns()
        .tmul(&r)
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(g, w)| 2.0 * g.abs() / (n * w))
        .fold(0.0, f64::max))
}

/// Reweighted Lasso with oracle weight selection; also reports the largest
/// residual on the first two rows.
pub fn run_reweighted_lasso(inst: &RegressionInstance, opts: &CdOptions) -> Result<(EstimatorSolution, f64)> {
    let design = &inst.design;
    let w = dalalyan_weights(design);
    let grid = path_grid(weighted_lambda_max(design, &inst.y, &w, opts)?)?;
    let path = with_truth(solve_weighted_lasso_path(design, &inst.y, &w, &grid, opts)?, inst);
    let best = select_lambda(&path, SelectionCriterion::OraclePredictionError)?;
    let pred = design.mul(&best.theta_hat);
    let resid = (pred[0] - inst.y[0]).abs().max((pred[1] - inst.y[1]).abs());
    Ok((best, resid))
}

/// Dalalyan design study: reweighted Lasso against ordinary Lasso, Rademacher noise.
pub fn run_dalalyan_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    // The unpenalized columns carry a sqrt(n) factor, so exact fitting needs a tight KKT tolerance.
    let opts = CdOptions { kkt_tol: 1e-12, ..CdOptions::default() };
    let mut records = Vec::new();
    for &n in &config.n_values {
        let design = Arc::new(build_dalalyan_design(n)?);
        let theta_star = match &config.dalalyan_support {
            None => design.default_theta_star(),
            Some(s) => {
                if s.len() != 2 || s.iter().any(|j| *j >= design.ncols()) || s[0] == s[1] {
                    return invalid("dalalyan_support must name two distinct columns");
                }
                let mut t = vec![0.0; design.ncols()];
                t[s[0]] = 0.5;
                t[s[1]] = 0.5;
                t
            }
        };
        records.extend(run_trials(config, n, |trial, seed| {
            let inst = match make_instance(design.clone(), theta_star.clone(), config.sigma, config.dalalyan_noise, seed) {
                Ok(i) => i,
                Err(_) => return Vec::new(),
            };
            config
                .estimators
                .iter()
                .map(|&e| {
                    let sol = match e {
                        Estimator::Rwlasso => run_reweighted_lasso(&inst, &opts).map(|(s, r)| (s, Some(r))),
                        _ => run_lasso(&inst, config.lasso_rule, &opts).map(|s| (s, None)),
                    };
                    record(n, trial, seed, e.name(), sol)
                })
                .collect()
        }));
    }
    Ok(ExperimentReport::from_records(records))
}

fn default_grid(config: &ExperimentConfig, count: usize, lo: f64, hi: f64) -> Vec<f64> {
    config.lambda_grid.clone().unwrap_or_else(|| {
        (0..count).map(|k| lo * (hi / lo).powf(k as f64 / (count - 1).max(1) as f64)).collect()
    })
}

/// Local-min designs with `R = 8 sigma / sqrt(n)`: worst enumerated local
/// minimum (inf over the lambda grid) next to the best witness bound `T1 + T2`.
pub fn run_landscape_study(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    if config.sigma <= 0.0 {
        return invalid("the landscape study needs sigma > 0");
    }
    let grid = default_grid(config, 40, 1e-3, 10.0);
    let mut records = Vec::new();
    for &n in &config.n_values {
        let radius = 8.0 * config.sigma / (n as f64).sqrt();
        let design = Arc::new(build_local_min_design(n, n, config.sigma, radius, OddRows::Reject)?);
        let theta_star = design.default_theta_star();
        records.extend(run_trials(config, n, |trial, seed| {
            let inst = match make_instance(design.clone(), theta_star.clone(), config.sigma, NoiseKind::Gaussian, seed) {
                Ok(i) => i,
                Err(_) => return Vec::new(),
            };
            let worst = worst_local_min_error(&inst, &config.penalty, &grid, None);
            let bound: Result<f64> = grid
                .iter()
                .map(|&l| compute_lemma1_bound(&inst, &config.penalty, l).map(|b| b.total()))
                .try_fold(f64::INFINITY, |acc, v| v.map(|v| acc.min(v)));
            let mk = |est: &str, v: Result<(f64, f64)>| TrialRecord {
                n,
                trial,
                estimator: est.into(),
                seed,
                error: v.as_ref().ok().map(|p| p.0),
                is_zero: false,
                lambda: v.as_ref().map(|p| p.1).unwrap_or(f64::NAN),
                fit_residual: None,
            };
            vec![
                mk("worst_local_min", worst.map(|w| (w.value, w.lambda))),
                mk("witness_bound", bound.map(|b| (b, f64::NAN))),
            ]
        }));
    }
    Ok(ExperimentReport::from_records(records))
}

/// Local descent on descent designs: per run, the smallest final prediction
/// error over the lambda grid, with all lambdas sharing one initialization.
pub fn run_descent_study(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    if config.sigma <= 0.0 {
        return invalid("the descent study needs sigma > 0");
    }
    let grid = default_grid(config, 3, 0.1, 1.0);
    let mut records = Vec::new();
    for &n in &config.n_values {
        let design = Arc::new(build_descent_design(n, n, config.sigma, config.sigma, OddRows::Reject)?);
        let theta_star = design.default_theta_star();
        records.extend(run_trials(config, n, |trial, seed| {
            let run = || -> Result<(f64, f64, bool)> {
                let inst = make_instance(design.clone(), theta_star.clone(), config.sigma, NoiseKind::Gaussian, substream(seed, 0))?;
                let mut best = (f64::INFINITY, f64::NAN, true);
                for &lam in &grid {
                    let cfg = DescentConfig::for_instance(&inst, &config.penalty, lam, config.init_std, substream(seed, 1))?;
                    let t = descend(&inst, &config.penalty, &cfg)?;
                    best.2 &= t.terminated;
                    let e = inst.prediction_error(t.final_point());
                    if e < best.0 {
                        best.0 = e;
                        best.1 = lam;
                    }
                }
                Ok(best)
            };
            let r = run();
            vec![TrialRecord {
                n,
                trial,
                estimator: "local_descent".into(),
                seed,
                error: r.as_ref().ok().map(|b| b.0),
                is_zero: false,
                lambda: r.as_ref().map(|b| b.1).unwrap_or(f64::NAN),
                // 1 when every run at this trial stopped at an interior minimizer.
                fit_residual: r.as_ref().ok().map(|b| if b.2 { 1.0 } else { 0.0 }),
            }]
        }));
    }
    Ok(ExperimentReport::from_records(records))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ExperimentKind) -> ExperimentConfig {
        ExperimentConfig { experiment: kind, n_values: vec![8, 16, 32], trials: 4, master_seed: 7, ..Default::default() }
    }

    #[test]
    fn config_json_round_trip() {
        let c = small(ExperimentKind::ScalingSimulation);
        let back = ExperimentConfig::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
        let partial = ExperimentConfig::from_json(r#"{"n_values":[16,32],"trials":3,"estimators":["l0","lasso"]}"#).unwrap();
        assert_eq!(partial.trials, 3);
        assert_eq!(partial.nonconvex_c, 0.1);
        assert!(ExperimentConfig::from_json(r#"{"trials":0}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"n_values":[32,16]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"bogus":1}"#).is_err());
    }

    #[test]
    fn scaling_is_reproducible() {
        let c = small(ExperimentKind::ScalingSimulation);
        let a = run_scaling_experiment(&c).unwrap();
        let b = run_scaling_experiment(&c).unwrap();
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
        assert_eq!(a.rows.len(), 12);
        assert_eq!(a.slopes.len(), 4);
        assert!(a.rows.iter().all(|r| r.mean_error > 0.0 && r.trials == 4));
    }

    #[test]
    fn lasso_zero_outputs_have_error_inverse_sqrt_n() {
        let c = ExperimentConfig { n_values: vec![64], trials: 10, estimators: vec![Estimator::Lasso], ..small(ExperimentKind::ScalingSimulation) };
        let r = run_scaling_experiment(&c).unwrap();
        for rec in r.records.iter().filter(|r| r.is_zero) {
            assert!((rec.error.unwrap() - 1.0 / 8.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dalalyan_exact_fit() {
        let c = ExperimentConfig {
            n_values: vec![8, 16],
            estimators: vec![Estimator::Rwlasso, Estimator::Lasso],
            ..small(ExperimentKind::DalalyanFastRate)
        };
        let r = run_dalalyan_experiment(&c).unwrap();
        for rec in r.records.iter().filter(|r| r.estimator == "rwlasso") {
            assert!(rec.fit_residual.unwrap() < 1e-8, "{rec:?}");
            // Two unit-noise rows are fitted exactly.
            assert!(rec.error.unwrap() >= 2.0 / rec.n as f64 - 1e-9);
        }
        let gauss = ExperimentConfig { dalalyan_noise: NoiseKind::Gaussian, ..c.clone() };
        let g = run_dalalyan_experiment(&gauss).unwrap();
        assert_ne!(g.to_csv().unwrap(), r.to_csv().unwrap());
        assert!(g.records.iter().filter(|r| r.estimator == "rwlasso").all(|r| r.fit_residual.unwrap() < 1e-8));
        let mut bad = small(ExperimentKind::DalalyanFastRate);
        bad.estimators = vec![Estimator::Scad];
        assert!(run_dalalyan_experiment(&bad).is_err());
    }

    #[test]
    fn rwlasso_rejected_for_scaling() {
        let mut c = small(ExperimentKind::ScalingSimulation);
        c.estimators.push(Estimator::Rwlasso);
        assert!(run_experiment(&c).is_err());
    }

    #[test]
    fn descent_and_landscape_studies_run() {
        let c = ExperimentConfig { n_values: vec![8, 16], trials: 2, ..small(ExperimentKind::DescentStudy) };
        let r = run_experiment(&c).unwrap();
        assert!(r.records.iter().all(|x| x.fit_residual == Some(1.0)));
        let c = ExperimentConfig { n_values: vec![16], trials: 2, lambda_grid: Some(vec![0.01, 0.3, 3.0]), ..small(ExperimentKind::LandscapeDiagnostic) };
        let r = run_experiment(&c).unwrap();
        let w = r.row(16, "worst_local_min").unwrap().mean_error;
        let b = r.row(16, "witness_bound").unwrap().mean_error;
        assert!(w >= b - 1e-6);
    }
}
