//! Local descent: repeatedly minimize the objective over a small ball around
//! the current point, stopping once the minimizer lands strictly inside.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::designs::{format_f64, DesignMatrix, Provenance, RegressionInstance};
use crate::error::{invalid, Result};
use crate::linalg::{norm, sq_dist};
use crate::penalties::{PenaltyKind, SeparablePenalty};
use crate::rng::{self, Rng};

/// Objective handle for the ball oracle: a smooth part plus a separable
/// nonsmooth part with a cheap proximal map.
pub trait BallObjective {
    fn dim(&self) -> usize;
    fn value(&self, theta: &[f64]) -> f64;
    fn smooth_gradient(&self, theta: &[f64]) -> Vec<f64>;
    /// Lipschitz constant of `smooth_gradient`.
    fn smooth_lipschitz(&self) -> f64;
    /// `argmin_u 0.5 ||u - v||^2 + step * nonsmooth(u)`.
    fn prox(&self, v: &[f64], step: f64) -> Vec<f64>;
}

/// `(1/scale) ||y - X theta||^2 + lambda rho_lambda(theta)`; `scale` is `n` unless overridden.
#[derive(Clone, Copy)]
pub struct PenalizedLeastSquares<'a> {
    pub design: &'a DesignMatrix,
    pub y: &'a [f64],
    pub penalty: &'a SeparablePenalty,
    pub lambda: f64,
    pub scale: f64,
}

impl<'a> PenalizedLeastSquares<'a> {
    pub fn new(design: &'a DesignMatrix, y: &'a [f64], penalty: &'a SeparablePenalty, lambda: f64) -> Self {
        PenalizedLeastSquares { design, y, penalty, lambda, scale: design.nrows() as f64 }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }
}

impl BallObjective for PenalizedLeastSquares<'_> {
    fn dim(&self) -> usize {
        self.design.ncols()
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let fit = self.design.mul(theta);
        let rss: f64 = self.y.iter().zip(&fit).map(|(a, b)| (a - b) * (a - b)).sum();
        rss / self.scale + self.penalty.regularizer(theta, self.lambda)
    }

    fn smooth_gradient(&self, theta: &[f64]) -> Vec<f64> {
        let fit = self.design.mul(theta);
        let r: Vec<f64> = self.y.iter().zip(&fit).map(|(a, b)| a - b).collect();
        self.design.columns().tmul(&r).iter().map(|v| -2.0 * v / self.scale).collect()
    }

    fn smooth_lipschitz(&self) -> f64 {
        // Gershgorin bound on 2 X^T X / scale.
        let split = SplitObjective::new(*self);
        split
            .groups
            .iter()
            .map(|g| {
                (0..g.cols.len())
                    .map(|k| (0..g.cols.len()).map(|l| g.gram[k * g.cols.len() + l].abs()).sum::<f64>())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
            * 2.0
    }

    fn prox(&self, v: &[f64], step: f64) -> Vec<f64> {
        v.iter().enumerate().map(|(j, &t)| self.penalty.scaled_prox(j, t, step, self.lambda)).collect()
    }
}

struct Group {
    cols: Vec<usize>,
    /// Row-major `X_g^T X_g / scale`.
    gram: Vec<f64>,
    /// `X_g^T y / scale`.
    b: Vec<f64>,
}

/// The least-squares objective split into independent column groups.
struct SplitObjective<'a> {
    obj: PenalizedLeastSquares<'a>,
    groups: Vec<Group>,
}

impl<'a> SplitObjective<'a> {
    fn new(obj: PenalizedLeastSquares<'a>) -> Self {
        let cols = obj.design.columns();
        let xty = cols.tmul(obj.y);
        let groups = cols
            .column_groups()
            .into_iter()
            .map(|g| {
                let k = g.len();
                let mut gram = vec![0.0; k * k];
                for (a, &ja) in g.iter().enumerate() {
                    for (b, &jb) in g.iter().enumerate() {
                        let mut s = 0.0;
                        let (ca, cb) = (cols.col(ja), cols.col(jb));
                        let (mut p, mut q) = (0, 0);
                        while p < ca.len() && q < cb.len() {
                            match ca[p].0.cmp(&cb[q].0) {
                                std::cmp::Ordering::Less => p += 1,
                                std::cmp::Ordering::Greater => q += 1,
                                std::cmp::Ordering::Equal => {
                                    s += ca[p].1 * cb[q].1;
                                    p += 1;
                                    q += 1;
                                }
                            }
                        }
                        gram[a * k + b] = s / obj.scale;
                    }
                }
                let b = g.iter().map(|&j| xty[j] / obj.scale).collect();
                Group { cols: g, gram, b }
            })
            .collect();
        SplitObjective { obj, groups }
    }

    /// Minimizes `F(theta) + mu ||theta - center||^2` group by group with
    /// exact coordinate minimization, starting from `theta`.
    fn solve(&self, center: &[f64], mu: f64, theta: &mut [f64]) {
        let (p, lambda) = (self.obj.penalty, self.obj.lambda);
        for g in &self.groups {
            let k = g.cols.len();
            for _sweep in 0..2000 {
                let mut moved: f64 = 0.0;
                let mut size: f64 = 0.0;
                for a in 0..k {
                    let j = g.cols[a];
                    let diag = g.gram[a * k + a];
                    let mut z = g.b[a];
                    for b in 0..k {
                        if b != a {
                            z -= g.gram[a * k + b] * theta[g.cols[b]];
                        }
                    }
                    let denom = diag + mu;
                    let new = if denom > 0.0 {
                        p.scaled_prox(j, (z + mu * center[j]) / denom, 0.5 / denom, lambda)
                    } else if lambda > 0.0 {
                        0.0
                    } else {
                        theta[j]
                    };
                    moved = moved.max((new - theta[j]).abs());
                    size = size.max(new.abs());
                    theta[j] = new;
                }
                if moved <= 1e-15 * (1.0 + size) {
                    break;
                }
            }
        }
    }

    /// Point on the sphere of radius `eta` around `center` minimizing the
    /// Lagrangian, or `None` when every multiplier keeps the solution inside.
    /// `mu_guess` seeds the multiplier search and receives the final multiplier.
    fn boundary_point(&self, center: &[f64], eta: f64, mu_guess: &mut f64) -> Option<Vec<f64>> {
        // For large mu the distance behaves like c / mu, so the search runs on
        // 1/d - 1/eta, which is close to linear in mu.
        let eval = |mu: f64, warm: &[f64]| {
            let mut t = warm.to_vec();
            self.solve(center, mu, &mut t);
            let d = sq_dist(&t, center).sqrt();
            (t, d)
        };
        let gap = |d: f64| 1.0 / d.max(1e-300) - 1.0 / eta;
        let mut mu = if mu_guess.is_finite() && *mu_guess > 0.0 { *mu_guess } else { 1.0 };
        let (mut t, mut d) = eval(mu, center);
        // lo: distance above eta; hi: distance at most eta.
        let mut lo: Option<(f64, f64, Vec<f64>)> = None;
        let mut hi: Option<(f64, f64, Vec<f64>)> = None;
        let mut prev: Option<(f64, f64)> = None;
        let mut converged = false;
        for _ in 0..200 {
            if d > eta {
                lo = Some((mu, gap(d), t.clone()));
            } else {
                hi = Some((mu, gap(d), t.clone()));
            }
            if (d - eta).abs() <= 1e-11 * eta {
                converged = true;
                break;
            }
            let next = match (&lo, &hi) {
                (Some((ml, gl, _)), Some((mh, gh, _))) => {
                    if (mh - ml).abs() <= 1e-15 * mh.abs().max(ml.abs()) {
                        break;
                    }
                    let x = ml - gl * (mh - ml) / (gh - gl);
                    if x.is_finite() && x > ml.min(*mh) && x < ml.max(*mh) {
                        x
                    } else {
                        (ml * mh).sqrt()
                    }
                }
                _ => {
                    let g = gap(d);
                    let model = if d > 0.0 { mu * (d / eta) } else { mu / 16.0 };
                    let x = match prev {
                        Some((mp, gp)) if gp != g => mu - g * (mu - mp) / (g - gp),
                        _ => model,
                    };
                    let x = if x.is_finite() && x > 0.0 { x } else { model };
                    x.clamp(mu / 16.0, mu * 16.0)
                }
            };
            prev = Some((mu, gap(d)));
            if !(1e-14..=1e300).contains(&next) {
                break;
            }
            // Illinois: halve the stale endpoint's weight when the same side repeats.
            let prev_side = d > eta;
            mu = next;
            let warm = t;
            let r = eval(mu, &warm);
            t = r.0;
            d = r.1;
            if (d > eta) == prev_side {
                if let (Some(l), Some(h)) = (&mut lo, &mut hi) {
                    if d > eta {
                        h.1 *= 0.5;
                    } else {
                        l.1 *= 0.5;
                    }
                }
            }
        }
        let (mu_h, t_hi) = if converged {
            (mu, t)
        } else {
            match hi {
                Some((m, _, t)) if lo.is_some() => (m, t),
                _ => return None,
            }
        };
        *mu_guess = mu_h;
        let dist = sq_dist(&t_hi, center).sqrt();
        if dist == 0.0 {
            return None;
        }
        Some(center.iter().zip(&t_hi).map(|(c, t)| c + eta * (t - c) / dist).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallOptions {
    /// Uniform ball samples refined by projected proximal gradient.
    pub samples: usize,
    /// Objective tolerance for treating candidates as tied.
    pub objective_tol: f64,
}

impl Default for BallOptions {
    fn default() -> Self {
        BallOptions { samples: 256, objective_tol: 1e-10 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BallPoint {
    pub point: Vec<f64>,
    pub value: f64,
    pub distance: f64,
}

fn project(center: &[f64], eta: f64, theta: &mut [f64]) {
    let d = sq_dist(theta, center).sqrt();
    if d > eta {
        for (t, c) in theta.iter_mut().zip(center) {
            *t = c + eta * (*t - c) / d;
        }
    }
}

fn uniform_in_ball(center: &[f64], eta: f64, rng: &mut Rng) -> Vec<f64> {
    let d = center.len();
    let dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let nd = norm(&dir).max(f64::MIN_POSITIVE);
    let radius = eta * rng.random::<f64>().powf(1.0 / d as f64);
    center.iter().zip(&dir).map(|(c, u)| c + radius * u / nd).collect()
}

/// Projected proximal-gradient refinement inside the ball, monotone in the objective.
fn refine(obj: &dyn BallObjective, start: Vec<f64>, center: &[f64], eta: f64, lip: f64) -> (Vec<f64>, f64) {
    let mut theta = start;
    project(center, eta, &mut theta);
    let mut value = obj.value(&theta);
    let mut step = if lip > 0.0 { 1.0 / lip } else { 1.0 };
    for _ in 0..1000 {
        let g = obj.smooth_gradient(&theta);
        let mut accepted = false;
        for _ in 0..40 {
            let v: Vec<f64> = theta.iter().zip(&g).map(|(t, gi)| t - step * gi).collect();
            let mut cand = obj.prox(&v, step);
            project(center, eta, &mut cand);
            let cv = obj.value(&cand);
            if cv <= value {
                let moved = sq_dist(&cand, &theta).sqrt();
                theta = cand;
                let gain = value - cv;
                value = cv;
                accepted = moved > 1e-13 * (1.0 + norm(&theta)) && gain > 0.0;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (theta, value)
}

fn choose(cands: Vec<BallPoint>, tol: f64, rng: &mut Rng) -> BallPoint {
    let best = cands.iter().map(|c| c.value).fold(f64::INFINITY, f64::min);
    let near: Vec<&BallPoint> = cands.iter().filter(|c| c.value <= best + tol).collect();
    let closest = near.iter().map(|c| c.distance).fold(f64::INFINITY, f64::min);
    let tied: Vec<&&BallPoint> = near.iter().filter(|c| c.distance <= closest + 1e-15).collect();
    let pick = if tied.len() > 1 { rng.random_range(0..tied.len()) } else { 0 };
    (*tied[pick]).clone()
}

fn candidate(obj: &dyn BallObjective, center: &[f64], point: Vec<f64>, value: Option<f64>) -> BallPoint {
    let value = value.unwrap_or_else(|| obj.value(&point));
    let distance = sq_dist(&point, center).sqrt();
    BallPoint { point, value, distance }
}

/// Approximate minimizer of `obj` over the closed ball of radius `eta` around
/// `center`, by multi-start projected proximal gradient. Near-ties go to the
/// point closest to `center`, remaining ties to a uniform draw from `rng`.
pub fn ball_argmin(obj: &dyn BallObjective, center: &[f64], eta: f64, opts: &BallOptions, rng: &mut Rng) -> BallPoint {
    assert!(eta > 0.0, "ball radius must be positive");
    let lip = obj.smooth_lipschitz();
    let mut cands = vec![candidate(obj, center, center.to_vec(), None)];
    let (p, v) = refine(obj, center.to_vec(), center, eta, lip);
    cands.push(candidate(obj, center, p, Some(v)));
    for _ in 0..opts.samples {
        let start = uniform_in_ball(center, eta, rng);
        let (p, v) = refine(obj, start, center, eta, lip);
        cands.push(candidate(obj, center, p, Some(v)));
    }
    choose(cands, opts.objective_tol, rng)
}

/// Ball oracle for penalized least squares. Adds to the generic search the
/// unconstrained group-wise local minimum and the Lagrangian boundary point,
/// which is the exact ball minimizer whenever the penalized group problems
/// are convex at the optimal multiplier.
pub fn ball_argmin_least_squares(
    obj: &PenalizedLeastSquares<'_>,
    center: &[f64],
    eta: f64,
    opts: &BallOptions,
    rng: &mut Rng,
) -> BallPoint {
    let split = SplitObjective::new(*obj);
    ball_argmin_split(&split, center, eta, opts, &mut 1.0, rng)
}

fn ball_argmin_split(
    split: &SplitObjective<'_>,
    center: &[f64],
    eta: f64,
    opts: &BallOptions,
    mu_guess: &mut f64,
    rng: &mut Rng,
) -> BallPoint {
    let obj = &split.obj;
    let mut cands = vec![candidate(obj, center, center.to_vec(), None)];
    let boundary = split.boundary_point(center, eta, mu_guess);
    // With the multiplier above half the penalty's concavity every group
    // subproblem is convex, so the boundary point is already the ball minimizer.
    let exact = match (&boundary, concavity(obj.penalty)) {
        (Some(_), Some(h)) => *mu_guess >= 0.5 * h,
        _ => false,
    };
    if !exact {
        let mut free = center.to_vec();
        split.solve(center, 0.0, &mut free);
        if sq_dist(&free, center).sqrt() <= eta {
            cands.push(candidate(obj, center, free, None));
        }
    }
    if let Some(b) = boundary {
        cands.push(candidate(obj, center, b, None));
    }
    if opts.samples > 0 {
        let lip = obj.smooth_lipschitz();
        for _ in 0..opts.samples {
            let start = uniform_in_ball(center, eta, rng);
            let (p, v) = refine(obj, start, center, eta, lip);
            cands.push(candidate(obj, center, p, Some(v)));
        }
    }
    choose(cands, opts.objective_tol, rng)
}

/// Bound on the negative curvature of `lambda rho_lambda`, independent of lambda.
fn concavity(p: &SeparablePenalty) -> Option<f64> {
    match p.kind() {
        PenaltyKind::Scad { a } => Some(1.0 / (a - 1.0)),
        PenaltyKind::Mcp { b } => Some(1.0 / b),
        PenaltyKind::Bridge { .. } => None,
        PenaltyKind::L1 | PenaltyKind::WeightedL1 { .. } | PenaltyKind::Ridge => Some(0.0),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DescentConfig {
    pub eta: f64,
    pub lambda: f64,
    /// Standard deviation of the Gaussian initialization.
    pub init_std: f64,
    pub max_steps: usize,
    pub seed: u64,
    /// Extra uniform samples per ball solve; 0 relies on the Lagrangian oracle.
    pub ball_samples: usize,
}

/// `B = sigma / (4 sqrt(n))`.
pub fn descent_window(sigma: f64, n: usize) -> f64 {
    sigma / (4.0 * (n as f64).sqrt())
}

/// Largest admissible ball radius `min(B, B / (lambda H_lambda))`.
pub fn max_step(sigma: f64, n: usize, penalty: &SeparablePenalty, lambda: f64) -> Result<f64> {
    let b = descent_window(sigma, n);
    if lambda == 0.0 {
        return Ok(b);
    }
    match penalty.scaled_derivative_lipschitz(lambda) {
        Some(h) if lambda * h > 0.0 => Ok(b.min(b / (lambda * h))),
        Some(_) => Ok(b),
        None => invalid(format!("{} has no Lipschitz derivative; the step bound is undefined", penalty.name())),
    }
}

impl DescentConfig {
    pub fn new(eta: f64, lambda: f64, init_std: f64, seed: u64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return invalid(format!("eta must be positive, got {eta}"));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return invalid(format!("lambda must be nonnegative, got {lambda}"));
        }
        if !(init_std >= 0.0 && init_std.is_finite()) {
            return invalid(format!("init_std must be nonnegative, got {init_std}"));
        }
        Ok(DescentConfig { eta, lambda, init_std, max_steps: 100_000, seed, ball_samples: 0 })
    }

    /// Config with the largest admissible radius for this instance.
    pub fn for_instance(
        instance: &RegressionInstance,
        penalty: &SeparablePenalty,
        lambda: f64,
        init_std: f64,
        seed: u64,
    ) -> Result<Self> {
        let eta = max_step(noise_level(instance), instance.n(), penalty, lambda)?;
        Self::new(eta, lambda, init_std, seed)
    }

    /// Rejects radii above `min(B, B / (lambda H_lambda))`.
    pub fn check(&self, sigma: f64, n: usize, penalty: &SeparablePenalty) -> Result<()> {
        let bound = max_step(sigma, n, penalty, self.lambda)?;
        if self.eta > bound * (1.0 + 1e-12) {
            return invalid(format!("eta={} exceeds the admissible bound {bound}", self.eta));
        }
        Ok(())
    }
}

fn noise_level(instance: &RegressionInstance) -> f64 {
    if instance.sigma > 0.0 {
        instance.sigma
    } else {
        instance.design.params().sigma.unwrap_or(1.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DescentTrajectory {
    pub iterates: Vec<Vec<f64>>,
    pub objectives: Vec<f64>,
    /// `||theta^t - theta^{t-1}||`, with 0 for the starting point.
    pub step_lengths: Vec<f64>,
    /// Whether the run stopped with the minimizer strictly inside the ball.
    pub terminated: bool,
    pub steps: usize,
    pub eta: f64,
}

impl DescentTrajectory {
    pub fn final_point(&self) -> &[f64] {
        self.iterates.last().expect("trajectory has a starting point")
    }

    /// CSV with columns `step,objective,step_length,min_distance_to_boundary`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,objective,step_length,min_distance_to_boundary\n");
        for (t, (o, l)) in self.objectives.iter().zip(&self.step_lengths).enumerate() {
            s.push_str(&format!("{t},{},{},{}\n", format_f64(*o), format_f64(*l), format_f64(self.eta - l)));
        }
        s
    }
}

/// Gaussian initialization `N(0, init_std^2 I)`.
pub fn sample_initialization(d: usize, init_std: f64, rng: &mut Rng) -> Vec<f64> {
    (0..d)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            init_std * z
        })
        .collect()
}

/// Runs local descent from a seeded Gaussian start.
pub fn descend(instance: &RegressionInstance, penalty: &SeparablePenalty, config: &DescentConfig) -> Result<DescentTrajectory> {
    let mut init_rng = rng::rng(rng::substream(config.seed, 0));
    let start = sample_initialization(instance.d(), config.init_std, &mut init_rng);
    descend_from(instance, penalty, config, start)
}

/// Runs local descent from a given start.
pub fn descend_from(
    instance: &RegressionInstance,
    penalty: &SeparablePenalty,
    config: &DescentConfig,
    start: Vec<f64>,
) -> Result<DescentTrajectory> {
    if start.len() != instance.d() {
        return invalid("start has the wrong dimension");
    }
    if instance.design.params().sigma.is_some() {
        config.check(noise_level(instance), instance.n(), penalty)?;
    }
    let obj = PenalizedLeastSquares::new(&instance.design, &instance.y, penalty, config.lambda);
    let split = SplitObjective::new(obj);
    let opts = BallOptions { samples: config.ball_samples, ..BallOptions::default() };
    let mut tie_rng = rng::rng(rng::substream(config.seed, 1));

    let mut mu = 1.0;
    let mut theta = start;
    let mut traj = DescentTrajectory {
        objectives: vec![obj.value(&theta)],
        iterates: vec![theta.clone()],
        step_lengths: vec![0.0],
        terminated: false,
        steps: 0,
        eta: config.eta,
    };
    for _ in 0..config.max_steps {
        let next = ball_argmin_split(&split, &theta, config.eta, &opts, &mut mu, &mut tie_rng);
        traj.steps += 1;
        traj.objectives.push(next.value);
        traj.step_lengths.push(next.distance);
        theta = next.point;
        traj.iterates.push(theta.clone());
        if next.distance < config.eta - 1e-12 {
            traj.terminated = true;
            break;
        }
    }
    Ok(traj)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventFrequencies {
    /// Fraction of starts with both first-block coordinates nonpositive.
    pub p_e0: f64,
    /// Per block `i >= 2`: fraction of noise draws with the block in the
    /// favorable set `2 sin^2(a) r + 2||w_{1:2}||/sqrt(n) + 3B <= 2 w'_i - 4B`.
    pub p_s2: Vec<f64>,
    /// Pooled frequency of `2 a_i^T w_i - 2 ||w_{1:2}|| >= 7 sigma / 4`.
    pub p_s2_display: f64,
    /// Pooled frequency of `a_i^T w_i >= sigma` together with `||w_{1:2}||^2 <= sigma^2 / 64`.
    pub p_sufficient: f64,
}

/// Monte-Carlo frequencies of the initialization and noise events on a descent design.
pub fn estimate_event_probabilities(
    design: &DesignMatrix,
    init_std: f64,
    trials: usize,
    seed: u64,
) -> Result<EventFrequencies> {
    if trials == 0 {
        return invalid("trials must be at least 1");
    }
    if design.provenance() != Provenance::Descent {
        return invalid("event probabilities are defined on descent designs");
    }
    let p = design.params();
    let sigma = p.sigma.unwrap_or(1.0);
    let r = p.block_radius.unwrap_or(sigma);
    let n = design.nrows();
    let rn = (n as f64).sqrt();
    let alpha = design.alpha().expect("block design has an angle");
    let (s, c) = alpha.sin_cos();
    let b = descent_window(sigma, n);
    let blocks = design.block_count();

    let mut rng = rng::rng(seed);
    let mut e0 = 0usize;
    for _ in 0..trials {
        let t1: f64 = StandardNormal.sample(&mut rng);
        let t2: f64 = StandardNormal.sample(&mut rng);
        if (init_std * t1).max(init_std * t2) <= 0.0 {
            e0 += 1;
        }
    }
    let mut s2 = vec![0usize; blocks.saturating_sub(1)];
    let (mut display, mut sufficient) = (0usize, 0usize);
    for _ in 0..trials {
        let w: Vec<f64> = (0..2 * blocks)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sigma * z
            })
            .collect();
        let w12 = (w[0] * w[0] + w[1] * w[1]).sqrt();
        for i in 1..blocks {
            let aw = c * w[2 * i] + s * w[2 * i + 1];
            if 2.0 * s * s * r + 2.0 * w12 / rn + 3.0 * b <= 2.0 * aw / rn - 4.0 * b {
                s2[i - 1] += 1;
            }
            if 2.0 * aw - 2.0 * w12 >= 7.0 * sigma / 4.0 {
                display += 1;
            }
            if aw >= sigma && w12 * w12 <= sigma * sigma / 64.0 {
                sufficient += 1;
            }
        }
    }
    let pooled = (trials * blocks.saturating_sub(1)).max(1) as f64;
    Ok(EventFrequencies {
        p_e0: e0 as f64 / trials as f64,
        p_s2: s2.iter().map(|k| *k as f64 / trials as f64).collect(),
        p_s2_display: display as f64 / pooled,
        p_sufficient: sufficient as f64 / pooled,
    })
}
