//! Landscape of the two-dimensional block problems behind the lower-bound
//! designs: error decomposition, the witness bound `T1 + T2`, and a grid
//! enumeration of local minima.

use nalgebra::Matrix2;

use crate::designs::{format_f64, DesignMatrix, Provenance, RegressionInstance};
use crate::error::{invalid, Error, Result};
use crate::penalties::SeparablePenalty;

/// Which window `B` the block quantities use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundMode {
    /// `B = 4 sigma / sqrt(n)`, `gamma_i` from penalty values at `B`.
    LocalMin,
    /// `B = sigma / (4 sqrt(n))`, `gamma_i` from the largest derivative on `(0, B]`.
    Descent,
}

impl BoundMode {
    pub fn for_provenance(p: Provenance) -> Result<Self> {
        match p {
            Provenance::LocalMin => Ok(BoundMode::LocalMin),
            Provenance::Descent => Ok(BoundMode::Descent),
            other => invalid(format!("no bound mode for {} designs", other.as_str())),
        }
    }

    pub fn window(self, sigma: f64, n: usize) -> f64 {
        let rn = (n as f64).sqrt();
        match self {
            BoundMode::LocalMin => 4.0 * sigma / rn,
            BoundMode::Descent => sigma / (4.0 * rn),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockQuantities {
    pub mode: BoundMode,
    pub b: f64,
    pub gamma: Vec<f64>,
    /// Column of `A` attached to the coordinate attaining `gamma_i`.
    pub a: Vec<[f64; 2]>,
    /// `<a_i, w_block> / sqrt(n)`.
    pub w_prime: Vec<f64>,
    /// Largest `gamma_i`.
    pub gamma_1: f64,
}

fn block_angle(design: &DesignMatrix) -> Result<f64> {
    match design.alpha() {
        Some(a) if design.provenance().is_block() => Ok(a),
        _ => invalid(format!("{} designs have no block structure", design.provenance().as_str())),
    }
}

fn max_derivative(p: &SeparablePenalty, j: usize, b: f64, lambda: f64) -> f64 {
    let mut best: f64 = 0.0;
    let mut u = b;
    for _ in 0..60 {
        best = best.max(p.scaled_subdifferential(j, u, lambda).hi);
        u *= 0.5;
    }
    for k in 1..=1000 {
        best = best.max(p.scaled_subdifferential(j, b * k as f64 / 1000.0, lambda).hi);
    }
    best
}

pub fn block_quantities(instance: &RegressionInstance, penalty: &SeparablePenalty, lambda: f64) -> Result<BlockQuantities> {
    let mode = BoundMode::for_provenance(instance.design.provenance())?;
    block_quantities_with_mode(instance, penalty, lambda, mode)
}

pub fn block_quantities_with_mode(
    instance: &RegressionInstance,
    penalty: &SeparablePenalty,
    lambda: f64,
    mode: BoundMode,
) -> Result<BlockQuantities> {
    let design = &instance.design;
    let alpha = block_angle(design)?;
    let (s, c) = alpha.sin_cos();
    let n = design.nrows();
    let rn = (n as f64).sqrt();
    let b = mode.window(instance.sigma, n);
    let blocks = design.block_count();
    let (mut gamma, mut a, mut w_prime) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..blocks {
        let (j1, j2) = (2 * i, 2 * i + 1);
        let (g1, g2) = match mode {
            BoundMode::LocalMin => (penalty.scaled_value(j1, b, lambda), penalty.scaled_value(j2, b, lambda)),
            BoundMode::Descent => (max_derivative(penalty, j1, b, lambda), max_derivative(penalty, j2, b, lambda)),
        };
        let ai = if g1 <= g2 { [c, s] } else { [-c, s] };
        gamma.push(g1.min(g2));
        w_prime.push((ai[0] * instance.w[j1] + ai[1] * instance.w[j2]) / rn);
        a.push(ai);
    }
    let gamma_1 = gamma.iter().cloned().fold(0.0, f64::max);
    Ok(BlockQuantities { mode, b, gamma, a, w_prime, gamma_1 })
}

/// Per-block `||A (theta_b - theta*_b)||^2`; these sum to the prediction error.
pub fn block_decompose_error(design: &DesignMatrix, theta: &[f64], theta_star: &[f64]) -> Result<Vec<f64>> {
    block_angle(design)?;
    let a = design.block().expect("block design");
    if theta.len() != design.ncols() || theta_star.len() != design.ncols() {
        return Err(Error::Dimension("theta and theta_star must have one entry per column".into()));
    }
    Ok((0..design.block_count())
        .map(|i| {
            let d0 = theta[2 * i] - theta_star[2 * i];
            let d1 = theta[2 * i + 1] - theta_star[2 * i + 1];
            let r0 = a[(0, 0)] * d0 + a[(0, 1)] * d1;
            let r1 = a[(1, 0)] * d0 + a[(1, 1)] * d1;
            r0 * r0 + r1 * r1
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WitnessBound {
    pub t1: f64,
    pub t2: f64,
    /// Number of blocks `i >= 2` with `B/2 <= w'_i <= B`.
    pub favorable_blocks: usize,
}

impl WitnessBound {
    pub fn total(&self) -> f64 {
        self.t1 + self.t2
    }
}

/// `T1 = 1[lambda gamma_1 > 4B(sin^2(a) R + ||w_{1:2}|| / sqrt(n))] sin^2(a) (R - 2B)_+^2`,
/// `T2 = sum_{i >= 2} 1[B/2 <= w'_i <= B] (B^2/4 - lambda gamma_1)`.
pub fn compute_lemma1_bound(instance: &RegressionInstance, penalty: &SeparablePenalty, lambda: f64) -> Result<WitnessBound> {
    let design = &instance.design;
    if design.provenance() != Provenance::LocalMin {
        return invalid("the witness bound is defined on local-min designs");
    }
    let radius = design.params().radius.expect("local-min designs carry R");
    let expected = design.default_theta_star();
    if instance.theta_star.iter().zip(&expected).any(|(a, b)| (a - b).abs() > 1e-12) {
        return invalid("the witness bound needs theta* = (R/2, R/2, 0, ...)");
    }
    let q = block_quantities_with_mode(instance, penalty, lambda, BoundMode::LocalMin)?;
    let s2 = design.alpha().unwrap().sin().powi(2);
    let rn = (design.nrows() as f64).sqrt();
    let w12 = (instance.w[0].powi(2) + instance.w[1].powi(2)).sqrt() / rn;
    let b = q.b;
    let t1 = if lambda * q.gamma_1 > 4.0 * b * (s2 * radius + w12) {
        s2 * (radius - 2.0 * b).max(0.0).powi(2)
    } else {
        0.0
    };
    let favorable_blocks = q.w_prime.iter().skip(1).filter(|w| b / 2.0 <= **w && **w <= b).count();
    let t2 = favorable_blocks as f64 * (b * b / 4.0 - lambda * q.gamma_1);
    Ok(WitnessBound { t1, t2, favorable_blocks })
}

/// `l(u) = ||v - A u||^2 + lambda (rho_{j1}(u_1) + rho_{j2}(u_2))` for one block.
#[derive(Clone, Copy)]
pub struct BlockLoss<'a> {
    pub a: Matrix2<f64>,
    pub v: [f64; 2],
    pub cols: [usize; 2],
    pub penalty: &'a SeparablePenalty,
    pub lambda: f64,
    pub u_star: [f64; 2],
    /// Length scale for the resolution guard.
    pub radius: f64,
}

impl<'a> BlockLoss<'a> {
    pub fn from_instance(
        instance: &RegressionInstance,
        penalty: &'a SeparablePenalty,
        lambda: f64,
        block: usize,
    ) -> Result<Self> {
        let design = &instance.design;
        block_angle(design)?;
        if block >= design.block_count() {
            return invalid(format!("block {block} out of range"));
        }
        let rn = (design.nrows() as f64).sqrt();
        let (j1, j2) = (2 * block, 2 * block + 1);
        let radius = design
            .params()
            .radius
            .unwrap_or_else(|| instance.theta_star.iter().map(|t| t.abs()).sum::<f64>().max(1.0));
        Ok(BlockLoss {
            a: design.block().unwrap(),
            v: [instance.y[j1] / rn, instance.y[j2] / rn],
            cols: [j1, j2],
            penalty,
            lambda,
            u_star: [instance.theta_star[j1], instance.theta_star[j2]],
            radius,
        })
    }

    fn quad(&self, u: [f64; 2]) -> f64 {
        let r0 = self.v[0] - self.a[(0, 0)] * u[0] - self.a[(0, 1)] * u[1];
        let r1 = self.v[1] - self.a[(1, 0)] * u[0] - self.a[(1, 1)] * u[1];
        r0 * r0 + r1 * r1
    }

    fn pen(&self, k: usize, x: f64) -> f64 {
        if self.lambda == 0.0 {
            0.0
        } else {
            self.lambda * self.penalty.scaled_value(self.cols[k], x, self.lambda)
        }
    }

    pub fn value(&self, u: [f64; 2]) -> f64 {
        self.quad(u) + self.pen(0, u[0]) + self.pen(1, u[1])
    }

    /// `||A (u - u*)||^2`.
    pub fn contribution(&self, u: [f64; 2]) -> f64 {
        let d = [u[0] - self.u_star[0], u[1] - self.u_star[1]];
        let r0 = self.a[(0, 0)] * d[0] + self.a[(0, 1)] * d[1];
        let r1 = self.a[(1, 0)] * d[0] + self.a[(1, 1)] * d[1];
        r0 * r0 + r1 * r1
    }

    /// Exact coordinate descent from `u` until the iterates stop moving.
    pub fn refine(&self, mut u: [f64; 2]) -> [f64; 2] {
        let g = self.a.transpose() * self.a;
        let b = [
            self.a[(0, 0)] * self.v[0] + self.a[(1, 0)] * self.v[1],
            self.a[(0, 1)] * self.v[0] + self.a[(1, 1)] * self.v[1],
        ];
        for _ in 0..1_000_000 {
            let mut moved: f64 = 0.0;
            for k in 0..2 {
                let l = 1 - k;
                let gkk = g[(k, k)];
                let new = if gkk > 0.0 {
                    let t = (b[k] - g[(k, l)] * u[l]) / gkk;
                    self.penalty.scaled_prox(self.cols[k], t, 0.5 / gkk, self.lambda)
                } else {
                    0.0
                };
                moved = moved.max((new - u[k]).abs());
                u[k] = new;
            }
            if moved <= 1e-15 * (1.0 + u[0].abs().max(u[1].abs())) {
                break;
            }
        }
        u
    }

    /// True when no probe at radius `r` lowers the loss by more than `tol`.
    pub fn passes_probe(&self, u: [f64; 2], r: f64, tol: f64) -> bool {
        let f = self.value(u);
        (0..64).all(|k| {
            let t = std::f64::consts::TAU * k as f64 / 64.0;
            [r, r / 10.0, r / 100.0]
                .iter()
                .all(|&s| self.value([u[0] + s * t.cos(), u[1] + s * t.sin()]) >= f - tol)
        })
    }
}

/// Search region for the grid scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bounds {
    /// The ellipse `{u : ||A u||^2 <= v^T A u}` that contains every local
    /// minimum, dilated by a few grid steps.
    Ellipse,
    /// The square `[-b, b]^2`.
    Square(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockMinimum {
    pub u: [f64; 2],
    pub objective: f64,
    pub contribution: f64,
}

struct Row {
    j0: i64,
    len: usize,
    offset: usize,
}

/// Grid points `(i h, j h)` over the search region with the quadratic part
/// cached, so scans at many `lambda` only add the penalty.
pub struct BlockGrid {
    h: f64,
    i0: i64,
    jmin: i64,
    jmax: i64,
    rows: Vec<Row>,
    quad: Vec<f64>,
}

impl BlockGrid {
    pub fn new(loss: &BlockLoss<'_>, bounds: Bounds, resolution: f64) -> Result<Self> {
        if !(resolution > 0.0 && resolution <= 1e-3 * loss.radius * (1.0 + 1e-12)) {
            return invalid(format!("resolution {resolution} must lie in (0, 1e-3 R] with R = {}", loss.radius));
        }
        let h = resolution;
        let a = loss.a;
        let det = a.determinant();
        if det.abs() < 1e-300 {
            return invalid("block matrix is singular");
        }
        let mut spans: Vec<(i64, i64)> = Vec::new();
        let i0;
        match bounds {
            Bounds::Square(b) => {
                if !(b > 0.0) {
                    return invalid("square bound must be positive");
                }
                let k = (b / h).floor() as i64;
                i0 = -k;
                spans.extend((-k..=k).map(|_| (-k, k)));
            }
            Bounds::Ellipse => {
                let m = [loss.v[0] / 2.0, loss.v[1] / 2.0];
                let norm_a = a.norm();
                let rho = (m[0] * m[0] + m[1] * m[1]).sqrt() + 3.0 * h * norm_a;
                let inv = a.try_inverse().unwrap();
                let centre1 = inv[(0, 0)] * m[0] + inv[(0, 1)] * m[1];
                let half1 = rho * (inv[(0, 0)].powi(2) + inv[(0, 1)].powi(2)).sqrt();
                let lo = ((centre1 - half1) / h).floor() as i64;
                let hi = ((centre1 + half1) / h).ceil() as i64;
                i0 = lo;
                let (a1, a2) = ([a[(0, 0)], a[(1, 0)]], [a[(0, 1)], a[(1, 1)]]);
                let qa = a2[0] * a2[0] + a2[1] * a2[1];
                for i in lo..=hi {
                    let u1 = i as f64 * h;
                    let p = [u1 * a1[0] - m[0], u1 * a1[1] - m[1]];
                    let qb = a2[0] * p[0] + a2[1] * p[1];
                    let qc = p[0] * p[0] + p[1] * p[1] - rho * rho;
                    let disc = qb * qb - qa * qc;
                    if disc < 0.0 {
                        spans.push((1, 0));
                        continue;
                    }
                    let sq = disc.sqrt();
                    let (r0, r1) = ((-qb - sq) / qa, (-qb + sq) / qa);
                    spans.push(((r0 / h).ceil() as i64, (r1 / h).floor() as i64));
                }
            }
        }
        let total: usize = spans.iter().map(|(a, b)| if b >= a { (b - a + 1) as usize } else { 0 }).sum();
        if total > 400_000_000 {
            return invalid(format!("grid of {total} points is too large"));
        }
        let mut rows = Vec::with_capacity(spans.len());
        let mut quad = Vec::with_capacity(total);
        let (mut jmin, mut jmax) = (i64::MAX, i64::MIN);
        for (r, &(j0, j1)) in spans.iter().enumerate() {
            let len = if j1 >= j0 { (j1 - j0 + 1) as usize } else { 0 };
            let u1 = (i0 + r as i64) as f64 * h;
            rows.push(Row { j0, len, offset: quad.len() });
            for j in j0..j0 + len as i64 {
                quad.push(loss.quad([u1, j as f64 * h]));
            }
            if len > 0 {
                jmin = jmin.min(j0);
                jmax = jmax.max(j1);
            }
        }
        Ok(BlockGrid { h, i0, jmin, jmax, rows, quad })
    }

    pub fn points(&self) -> usize {
        self.quad.len()
    }

    pub fn resolution(&self) -> f64 {
        self.h
    }

    /// Grid local minima of `loss` (same block, any `lambda`), refined and
    /// deduplicated within `10 h`.
    pub fn minima(&self, loss: &BlockLoss<'_>) -> Vec<BlockMinimum> {
        let h = self.h;
        if self.jmax < self.jmin {
            return Vec::new();
        }
        let p1: Vec<f64> = (0..self.rows.len()).map(|r| loss.pen(0, (self.i0 + r as i64) as f64 * h)).collect();
        let p2: Vec<f64> = (self.jmin..=self.jmax).map(|j| loss.pen(1, j as f64 * h)).collect();
        let at = |r: usize, j: i64| -> Option<f64> {
            let row = &self.rows[r];
            if j < row.j0 || j >= row.j0 + row.len as i64 {
                return None;
            }
            Some(self.quad[row.offset + (j - row.j0) as usize] + p1[r] + p2[(j - self.jmin) as usize])
        };
        let mut starts = Vec::new();
        for r in 1..self.rows.len().saturating_sub(1) {
            let row = &self.rows[r];
            for j in row.j0 + 1..row.j0 + row.len as i64 - 1 {
                let f = at(r, j).unwrap();
                let mut local = true;
                'nb: for dr in [r - 1, r, r + 1] {
                    for dj in [j - 1, j, j + 1] {
                        if dr == r && dj == j {
                            continue;
                        }
                        match at(dr, dj) {
                            Some(g) if g >= f => {}
                            _ => {
                                local = false;
                                break 'nb;
                            }
                        }
                    }
                }
                if local {
                    starts.push([(self.i0 + r as i64) as f64 * h, j as f64 * h]);
                }
            }
        }
        let mut found: Vec<BlockMinimum> = Vec::new();
        for s in starts {
            let u = loss.refine(s);
            if !loss.passes_probe(u, h / 2.0, 1e-9) {
                continue;
            }
            let objective = loss.value(u);
            let m = BlockMinimum { u, objective, contribution: loss.contribution(u) };
            match found.iter_mut().find(|f| (f.u[0] - u[0]).abs().max((f.u[1] - u[1]).abs()) <= 10.0 * h) {
                Some(f) => {
                    if objective < f.objective {
                        *f = m;
                    }
                }
                None => found.push(m),
            }
        }
        found.sort_by(|a, b| a.u[0].total_cmp(&b.u[0]).then(a.u[1].total_cmp(&b.u[1])));
        found
    }
}

/// Local minima of one block loss by grid scan and refinement.
pub fn enumerate_block_minima(loss: &BlockLoss<'_>, bounds: Bounds, resolution: f64) -> Result<Vec<BlockMinimum>> {
    Ok(BlockGrid::new(loss, bounds, resolution)?.minima(loss))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalMinimaCatalog {
    pub lambda: f64,
    pub resolution: f64,
    pub blocks: Vec<Vec<BlockMinimum>>,
}

impl LocalMinimaCatalog {
    /// Largest prediction error over full local minima assembled blockwise.
    pub fn worst_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.iter().map(|m| m.contribution).fold(0.0, f64::max)).sum()
    }

    /// Smallest prediction error over full local minima assembled blockwise.
    pub fn best_error(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.iter().map(|m| m.contribution).fold(f64::INFINITY, f64::min))
            .filter(|v| v.is_finite())
            .sum()
    }

    /// CSV with columns `block,u1,u2,objective,contribution`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("block,u1,u2,objective,contribution\n");
        for (i, b) in self.blocks.iter().enumerate() {
            for m in b {
                s.push_str(&format!(
                    "{i},{},{},{},{}\n",
                    format_f64(m.u[0]),
                    format_f64(m.u[1]),
                    format_f64(m.objective),
                    format_f64(m.contribution)
                ));
            }
        }
        s
    }
}

fn default_resolution(instance: &RegressionInstance) -> f64 {
    let r = instance.design.params().radius.unwrap_or(1.0);
    1e-3 * r
}

/// Catalog of block minima for every block of a block design.
pub fn catalog_local_minima(
    instance: &RegressionInstance,
    penalty: &SeparablePenalty,
    lambda: f64,
    bounds: Bounds,
    resolution: Option<f64>,
) -> Result<LocalMinimaCatalog> {
    let h = resolution.unwrap_or_else(|| default_resolution(instance));
    let blocks = (0..instance.design.block_count())
        .map(|b| {
            let loss = BlockLoss::from_instance(instance, penalty, lambda, b)?;
            enumerate_block_minima(&loss, bounds, h)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LocalMinimaCatalog { lambda, resolution: h, blocks })
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorstCase {
    /// `inf` over the grid of the worst assembled local-minimum error.
    pub value: f64,
    pub lambda: f64,
    /// Worst error at each grid value.
    pub per_lambda: Vec<f64>,
}

/// `inf_lambda sup_{local minima} (1/n) ||X (theta - theta*)||^2` over a lambda grid.
pub fn worst_local_min_error(
    instance: &RegressionInstance,
    penalty: &SeparablePenalty,
    lambda_grid: &[f64],
    resolution: Option<f64>,
) -> Result<WorstCase> {
    if lambda_grid.is_empty() {
        return invalid("lambda grid is empty");
    }
    let h = resolution.unwrap_or_else(|| default_resolution(instance));
    let mut per_lambda = vec![0.0; lambda_grid.len()];
    for b in 0..instance.design.block_count() {
        let base = BlockLoss::from_instance(instance, penalty, lambda_grid[0], b)?;
        let grid = BlockGrid::new(&base, Bounds::Ellipse, h)?;
        for (k, &lam) in lambda_grid.iter().enumerate() {
            let loss = BlockLoss { lambda: lam, ..base };
            let minima = grid.minima(&loss);
            if minima.is_empty() {
                return Err(Error::Precondition(format!("no local minimum found in block {b} at lambda={lam}")));
            }
            per_lambda[k] += minima.iter().map(|m| m.contribution).fold(0.0, f64::max);
        }
    }
    let (k, value) = per_lambda
        .iter()
        .cloned()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, v)| if v < acc.1 { (k, v) } else { acc });
    Ok(WorstCase { value, lambda: lambda_grid[k], per_lambda })
}
