//! Command-line front end for the `sparsegap` library.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use sparsegap::designs::{
    build_corollary_design, build_dalalyan_design, build_descent_design, build_local_min_design,
    build_simulation_design, certify, format_f64, make_instance, DesignMatrix, OddRows, Provenance,
};
use sparsegap::experiment::{run_experiment, run_reweighted_lasso, Estimator, ExperimentConfig, ExperimentKind};
use sparsegap::landscape::{catalog_local_minima, compute_lemma1_bound, worst_local_min_error, Bounds};
use sparsegap::local_descent::{descend, DescentConfig};
use sparsegap::penalties::SeparablePenalty;
use sparsegap::solvers::{
    lambda_max, select_lambda, solve_l0, solve_penalized, solve_weighted_lasso_path, CdOptions, EstimatorSolution,
    LambdaGrid, LambdaPreset, ProxGradOptions, SelectionCriterion, SOLUTION_CSV_HEADER,
};
use sparsegap::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "sparsegap", version, about = "Adversarial sparse-regression designs, estimators and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build or certify a design matrix.
    #[command(subcommand)]
    Design(DesignCmd),
    /// Fit one estimator on one seeded instance.
    Solve(SolveArgs),
    /// Enumerate block-wise local minima on a local-min design.
    Landscape(LandscapeArgs),
    /// Run local descent with the ball oracle.
    Descend(DescendArgs),
    /// Run a Monte-Carlo experiment and write its report.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
}

#[derive(Subcommand, Debug)]
enum DesignCmd {
    /// Write a design as CSV plus a JSON header next to it.
    Build {
        #[command(flatten)]
        spec: DesignSpec,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print column-norm ratios and the restricted-eigenvalue lower bound.
    Certify {
        #[command(flatten)]
        spec: DesignSpec,
        /// Certify a saved design instead of building one.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum ExperimentCmd {
    Scaling(ExperimentArgs),
    Dalalyan(ExperimentArgs),
    Landscape(ExperimentArgs),
    Descent(ExperimentArgs),
}

#[derive(Args, Debug, Clone)]
struct DesignSpec {
    #[arg(long, default_value = "simulation", value_parser = parse_provenance)]
    provenance: Provenance,
    #[arg(long, default_value_t = 16)]
    n: usize,
    /// Column count; defaults to n.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// l1 radius; defaults to 8 sigma / sqrt(n) for local-min and sigma otherwise.
    #[arg(long)]
    radius: Option<f64>,
    /// Sparsity level (corollary design; also the l0 support size).
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 0.25)]
    gamma: f64,
    /// Pad odd row counts with a zero row instead of rejecting them.
    #[arg(long)]
    pad_odd: bool,
}

impl DesignSpec {
    fn build(&self) -> Result<DesignMatrix> {
        let n = self.n;
        let d = self.d.unwrap_or(n);
        let odd = if self.pad_odd { OddRows::Pad } else { OddRows::Reject };
        let radius = self.radius.unwrap_or(match self.provenance {
            Provenance::LocalMin => 8.0 * self.sigma / (n as f64).sqrt(),
            _ => self.sigma,
        });
        match self.provenance {
            Provenance::LocalMin => build_local_min_design(n, d, self.sigma, radius, odd),
            Provenance::Descent => build_descent_design(n, d, self.sigma, radius, odd),
            Provenance::Simulation => build_simulation_design(n, odd),
            Provenance::Corollary => build_corollary_design(n, self.k, self.sigma, radius, self.gamma),
            Provenance::Dalalyan => build_dalalyan_design(n),
            Provenance::Custom => Err(Error::InvalidParameter("custom designs are loaded with --design".into())),
        }
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    spec: DesignSpec,
    /// Load the design from a saved CSV instead of building it.
    #[arg(long)]
    design: Option<PathBuf>,
    #[arg(long, default_value = "lasso", value_parser = parse_estimator)]
    estimator: Estimator,
    /// Fixed weight; omitted means oracle selection for Lasso variants and
    /// `0.1 sqrt(log n / n)` for SCAD and MCP.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LandscapeArgs {
    #[arg(long, default_value_t = 16)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long, default_value = "scad:3.7", value_parser = parse_penalty)]
    penalty: SeparablePenalty,
    /// Comma-separated weights; defaults to 40 log-spaced points in [1e-3, 10].
    #[arg(long, value_delimiter = ',')]
    lambda: Vec<f64>,
    #[arg(long)]
    resolution: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Catalog of block minima at the weight attaining the infimum.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DescendArgs {
    #[arg(long, default_value_t = 16)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long, default_value = "scad:3.7", value_parser = parse_penalty)]
    penalty: SeparablePenalty,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Ball radius; defaults to the largest admissible one.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    init_std: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-step trajectory CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// JSON file mirroring the experiment configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_estimator)]
    estimators: Vec<Estimator>,
    /// Report CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Log-log chart path.
    #[arg(long)]
    svg: Option<PathBuf>,
}

fn parse_provenance(s: &str) -> std::result::Result<Provenance, String> {
    Provenance::parse(s).map_err(|e| e.to_string())
}

fn parse_estimator(s: &str) -> std::result::Result<Estimator, String> {
    Estimator::parse(s).map_err(|e| e.to_string())
}

/// `l1`, `ridge`, `scad[:a]`, `mcp[:b]` or `bridge:q`.
fn parse_penalty(s: &str) -> std::result::Result<SeparablePenalty, String> {
    let (name, arg) = match s.split_once(':') {
        Some((n, a)) => (n, Some(a.parse::<f64>().map_err(|e| format!("bad penalty parameter in {s:?}: {e}"))?)),
        None => (s, None),
    };
    let p = match (name, arg) {
        ("l1", None) => Ok(SeparablePenalty::l1()),
        ("ridge", None) => Ok(SeparablePenalty::ridge()),
        ("scad", a) => SeparablePenalty::scad(a.unwrap_or(3.7)),
        ("mcp", b) => SeparablePenalty::mcp(b.unwrap_or(2.7)),
        ("bridge", Some(q)) => SeparablePenalty::bridge(q),
        _ => return Err(format!("unknown penalty {s:?}; expected l1, ridge, scad[:a], mcp[:b] or bridge:q")),
    };
    p.map_err(|e| e.to_string())
}

/// Parses `argv` (including the program name), runs the command and returns the exit code:
/// 0 on success, 1 on usage errors, 2 on runtime failures.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|source| Error::IoAt { path: p.to_path_buf(), source }),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Design(DesignCmd::Build { spec, out }) => {
            let design = spec.build()?;
            design.save(&out)?;
            println!("wrote {} ({} x {}, {})", out.display(), design.nrows(), design.ncols(), design.provenance().as_str());
            Ok(())
        }
        Command::Design(DesignCmd::Certify { spec, input }) => {
            let design = match input {
                Some(p) => DesignMatrix::load(&p)?,
                None => spec.build()?,
            };
            println!("{}", serde_json::to_string_pretty(&certify(&design))?);
            Ok(())
        }
        Command::Solve(args) => solve(args),
        Command::Landscape(args) => landscape(args),
        Command::Descend(args) => run_descend(args),
        Command::Experiment(cmd) => {
            let (kind, args) = match cmd {
                ExperimentCmd::Scaling(a) => (ExperimentKind::ScalingSimulation, a),
                ExperimentCmd::Dalalyan(a) => (ExperimentKind::DalalyanFastRate, a),
                ExperimentCmd::Landscape(a) => (ExperimentKind::LandscapeDiagnostic, a),
                ExperimentCmd::Descent(a) => (ExperimentKind::DescentStudy, a),
            };
            experiment(kind, args)
        }
    }
}

fn solve(args: SolveArgs) -> Result<()> {
    let design = Arc::new(match &args.design {
        Some(p) => DesignMatrix::load(p)?,
        None => args.spec.build()?,
    });
    let theta_star = design.default_theta_star();
    let inst = make_instance(design.clone(), theta_star, args.spec.sigma, design.default_noise(), args.seed)?;
    let (n, d) = (inst.n(), inst.d());
    let opts = CdOptions::default();
    let weighted = |w: &[f64], lam: Option<f64>| -> Result<EstimatorSolution> {
        match lam {
            Some(l) => Ok(solve_weighted_lasso_path(&design, &inst.y, w, &LambdaGrid::new(vec![l])?, &opts)?.remove(0)),
            None => {
                let grid = LambdaGrid::log_spaced(lambda_max(&design, &inst.y).max(f64::MIN_POSITIVE), 1e-4, 100)?;
                let path: Vec<_> = solve_weighted_lasso_path(&design, &inst.y, w, &grid, &opts)?
                    .into_iter()
                    .map(|s| s.with_truth(&design, &inst.theta_star))
                    .collect();
                select_lambda(&path, SelectionCriterion::OraclePredictionError)
            }
        }
    };
    let nonconvex = |p: SeparablePenalty| -> Result<EstimatorSolution> {
        let lam = args.lambda.unwrap_or_else(|| LambdaPreset::Nonconvex { c: 0.1 }.value(inst.sigma, n, d));
        solve_penalized(&design, &inst.y, &p, lam, &vec![0.0; d], &ProxGradOptions::default())
    };
    let sol = match args.estimator {
        Estimator::L0 => solve_l0(&design, &inst.y, args.spec.k)?,
        Estimator::Lasso => weighted(&vec![1.0; d], args.lambda)?,
        Estimator::Scad => nonconvex(SeparablePenalty::scad(3.7)?)?,
        Estimator::Mcp => nonconvex(SeparablePenalty::mcp(2.7)?)?,
        Estimator::Rwlasso => {
            if design.provenance() != Provenance::Dalalyan {
                return Err(Error::InvalidParameter("rwlasso needs the dalalyan design".into()));
            }
            match args.lambda {
                None => run_reweighted_lasso(&inst, &CdOptions { kkt_tol: 1e-12, ..opts })?.0,
                Some(_) => weighted(&sparsegap::experiment::dalalyan_weights(&design), args.lambda)?,
            }
        }
    }
    .with_truth(&design, &inst.theta_star);
    let mut text = format!("{SOLUTION_CSV_HEADER}\n{}\n", sol.csv_row(args.estimator.name()));
    if args.out.is_some() {
        text.push_str("\n# theta_hat\n");
        for t in &sol.theta_hat {
            text.push_str(&format_f64(*t));
            text.push('\n');
        }
    }
    emit(args.out.as_deref(), &text)
}

fn landscape(args: LandscapeArgs) -> Result<()> {
    let radius = args.radius.unwrap_or(8.0 * args.sigma / (args.n as f64).sqrt());
    let design = Arc::new(build_local_min_design(args.n, args.n, args.sigma, radius, OddRows::Reject)?);
    let inst = make_instance(design.clone(), design.default_theta_star(), args.sigma, design.default_noise(), args.seed)?;
    let grid: Vec<f64> = if args.lambda.is_empty() {
        (0..40).map(|k| 1e-3 * 1e4f64.powf(k as f64 / 39.0)).collect()
    } else {
        args.lambda.clone()
    };
    let worst = worst_local_min_error(&inst, &args.penalty, &grid, args.resolution)?;
    println!("lambda,worst_local_min_error,witness_bound");
    for (l, w) in grid.iter().zip(&worst.per_lambda) {
        let b = compute_lemma1_bound(&inst, &args.penalty, *l)?.total();
        println!("{},{},{}", format_f64(*l), format_f64(*w), format_f64(b));
    }
    println!("# inf over lambda: {} at lambda = {}", format_f64(worst.value), format_f64(worst.lambda));
    if let Some(out) = &args.out {
        let cat = catalog_local_minima(&inst, &args.penalty, worst.lambda, Bounds::Ellipse, args.resolution)?;
        emit(Some(out), &cat.to_csv())?;
    }
    Ok(())
}

fn run_descend(args: DescendArgs) -> Result<()> {
    let radius = args.radius.unwrap_or(args.sigma);
    let design = Arc::new(build_descent_design(args.n, args.n, args.sigma, radius, OddRows::Reject)?);
    let inst = make_instance(design.clone(), design.default_theta_star(), args.sigma, design.default_noise(), args.seed)?;
    let mut cfg = DescentConfig::for_instance(&inst, &args.penalty, args.lambda, args.init_std, args.seed)?;
    if let Some(eta) = args.eta {
        cfg = DescentConfig::new(eta, args.lambda, args.init_std, args.seed)?;
        cfg.check(args.sigma, args.n, &args.penalty)?;
    }
    let traj = descend(&inst, &args.penalty, &cfg)?;
    println!("eta = {}", format_f64(cfg.eta));
    println!("steps = {}", traj.steps);
    println!("terminated = {}", traj.terminated);
    println!("final_objective = {}", format_f64(*traj.objectives.last().unwrap_or(&f64::NAN)));
    println!("prediction_error = {}", format_f64(inst.prediction_error(traj.final_point())));
    if let Some(out) = &args.out {
        emit(Some(out), &traj.to_csv())?;
    }
    Ok(())
}

fn experiment(kind: ExperimentKind, args: ExperimentArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|source| Error::IoAt { path: p.clone(), source })?;
            serde_json::from_str::<ExperimentConfig>(&text)?
        }
        None => ExperimentConfig::default(),
    };
    config.experiment = kind;
    if args.config.is_none() || !args.estimators.is_empty() {
        config.estimators = match (kind, args.estimators.is_empty()) {
            (_, false) => args.estimators.clone(),
            (ExperimentKind::DalalyanFastRate, true) => vec![Estimator::Rwlasso, Estimator::Lasso],
            (_, true) => config.estimators,
        };
    }
    if kind == ExperimentKind::DalalyanFastRate && args.config.is_none() && args.n.is_empty() {
        config.n_values = vec![8, 16, 32, 64, 128, 256, 512];
    }
    if !args.n.is_empty() {
        config.n_values = args.n.clone();
    }
    if let Some(t) = args.trials {
        config.trials = t;
    }
    if let Some(s) = args.seed {
        config.master_seed = s;
    }
    if args.out.is_some() {
        config.output_csv = args.out.clone();
    }
    if args.svg.is_some() {
        config.output_svg = args.svg.clone();
    }
    config.validate()?;
    let report = run_experiment(&config)?;
    match &config.output_csv {
        Some(p) => report.write_csv(p)?,
        None => print!("{}", report.to_csv()?),
    }
    if let Some(p) = &config.output_svg {
        report.write_svg(p)?;
    }
    for s in &report.slopes {
        eprintln!("{}: decay exponent {:.4} (se {:.4})", s.estimator, s.slope, s.stderr);
    }
    Ok(())
}
