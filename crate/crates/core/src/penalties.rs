//! Coordinate-separable penalties.
//!
//! Every penalty is stored at unit scale. Kinds with knots (SCAD, MCP) are
//! rescaled by the regularization weight: the objective term is
//! `lambda * rho_lambda(t)` with `rho_lambda(t) = lambda * rho_1(t / lambda)`,
//! which puts the SCAD knots at `lambda` and `a * lambda` and the MCP knot at
//! `b * lambda`. Kinds without knots use `rho_lambda = rho`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Serialized form of a penalty: `{"kind":"scad","a":3.7}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PenaltyKind {
    L1,
    WeightedL1 { weights: Vec<f64> },
    Bridge { exponent: f64 },
    Ridge,
    Scad { a: f64 },
    Mcp { b: f64 },
}

/// A validated separable penalty `rho(theta) = sum_j rho_j(theta_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PenaltyKind", into = "PenaltyKind")]
pub struct SeparablePenalty {
    kind: PenaltyKind,
}

impl TryFrom<PenaltyKind> for SeparablePenalty {
    type Error = Error;
    fn try_from(kind: PenaltyKind) -> Result<Self> {
        SeparablePenalty::new(kind)
    }
}

impl From<SeparablePenalty> for PenaltyKind {
    fn from(p: SeparablePenalty) -> Self {
        p.kind
    }
}

/// Closed interval `[lo, hi]` of subgradients. Infinite endpoints mean the
/// subdifferential is unbounded (bridge penalties with exponent below one at 0).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Subgradient {
    pub lo: f64,
    pub hi: f64,
}

impl Subgradient {
    fn point(g: f64) -> Self {
        Subgradient { lo: g, hi: g }
    }

    fn symmetric(r: f64) -> Self {
        Subgradient { lo: -r, hi: r }
    }

    pub fn contains(&self, g: f64, tol: f64) -> bool {
        g >= self.lo - tol && g <= self.hi + tol
    }

    /// Distance from `g` to the interval.
    pub fn distance(&self, g: f64) -> f64 {
        if g < self.lo {
            self.lo - g
        } else if g > self.hi {
            g - self.hi
        } else {
            0.0
        }
    }
}

/// Analytic smoothness data for the extra family conditions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PenaltySmoothness {
    pub continuous_at_origin: bool,
    /// Lipschitz constant `H` of the derivative on `(0, inf)` at unit scale;
    /// `None` when the derivative is not Lipschitz there.
    pub derivative_lipschitz: Option<f64>,
}

/// Result of the sampled family check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyReport {
    pub decomposable: bool,
    pub zero_and_symmetric: bool,
    pub nondecreasing: bool,
    pub continuous_at_origin: bool,
    pub derivative_lipschitz: bool,
    /// Largest derivative difference quotient observed on the positive grid.
    pub h_empirical: f64,
}

impl FamilyReport {
    pub fn in_base_family(&self) -> bool {
        self.decomposable && self.zero_and_symmetric && self.nondecreasing
    }

    pub fn in_restricted_family(&self) -> bool {
        self.in_base_family() && self.continuous_at_origin && self.derivative_lipschitz
    }
}

impl SeparablePenalty {
    pub fn new(kind: PenaltyKind) -> Result<Self> {
        match &kind {
            PenaltyKind::WeightedL1 { weights } => {
                if weights.is_empty() {
                    return invalid("weighted l1 needs at least one weight");
                }
                if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
                    return invalid("weights must be finite and nonnegative");
                }
            }
            PenaltyKind::Bridge { exponent } => {
                if !exponent.is_finite() || *exponent <= 0.0 {
                    return invalid(format!("bridge exponent must be positive, got {exponent}"));
                }
            }
            PenaltyKind::Scad { a } => {
                if !a.is_finite() || *a <= 2.0 {
                    return invalid(format!("SCAD requires a > 2, got {a}"));
                }
            }
            PenaltyKind::Mcp { b } => {
                if !b.is_finite() || *b <= 0.0 {
                    return invalid(format!("MCP requires b > 0, got {b}"));
                }
            }
            PenaltyKind::L1 | PenaltyKind::Ridge => {}
        }
        Ok(SeparablePenalty { kind })
    }

    pub fn l1() -> Self {
        SeparablePenalty { kind: PenaltyKind::L1 }
    }

    pub fn ridge() -> Self {
        SeparablePenalty { kind: PenaltyKind::Ridge }
    }

    pub fn scad(a: f64) -> Result<Self> {
        Self::new(PenaltyKind::Scad { a })
    }

    pub fn mcp(b: f64) -> Result<Self> {
        Self::new(PenaltyKind::Mcp { b })
    }

    pub fn bridge(exponent: f64) -> Result<Self> {
        Self::new(PenaltyKind::Bridge { exponent })
    }

    pub fn weighted_l1(weights: Vec<f64>) -> Result<Self> {
        Self::new(PenaltyKind::WeightedL1 { weights })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("penalty serializes")
    }

    pub fn kind(&self) -> &PenaltyKind {
        &self.kind
    }

    /// Short lowercase name used in reports.
    pub fn name(&self) -> &'static str {
        match self.kind {
            PenaltyKind::L1 => "l1",
            PenaltyKind::WeightedL1 { .. } => "weighted_l1",
            PenaltyKind::Bridge { .. } => "bridge",
            PenaltyKind::Ridge => "ridge",
            PenaltyKind::Scad { .. } => "scad",
            PenaltyKind::Mcp { .. } => "mcp",
        }
    }

    /// Whether the penalty has knots that scale with lambda.
    pub fn has_knots(&self) -> bool {
        matches!(self.kind, PenaltyKind::Scad { .. } | PenaltyKind::Mcp { .. })
    }

    /// Number of coordinates the penalty is tied to, if any.
    pub fn dimension(&self) -> Option<usize> {
        match &self.kind {
            PenaltyKind::WeightedL1 { weights } => Some(weights.len()),
            _ => None,
        }
    }

    fn weight(&self, j: usize) -> f64 {
        match &self.kind {
            PenaltyKind::WeightedL1 { weights } => weights[j],
            _ => 1.0,
        }
    }

    /// Unit-scale value `rho_j(t)`.
    pub fn value(&self, j: usize, t: f64) -> f64 {
        let x = t.abs();
        match self.kind {
            PenaltyKind::L1 => x,
            PenaltyKind::WeightedL1 { .. } => self.weight(j) * x,
            PenaltyKind::Ridge => x * x,
            PenaltyKind::Bridge { exponent } => {
                if x == 0.0 {
                    0.0
                } else {
                    x.powf(exponent)
                }
            }
            PenaltyKind::Scad { a } => {
                if x <= 1.0 {
                    x
                } else if x <= a {
                    -(x * x - 2.0 * a * x + 1.0) / (2.0 * (a - 1.0))
                } else {
                    (a + 1.0) / 2.0
                }
            }
            PenaltyKind::Mcp { b } => {
                if x <= b {
                    x - x * x / (2.0 * b)
                } else {
                    b / 2.0
                }
            }
        }
    }

    /// `rho_{lambda, j}(t)`, the coordinate penalty at regularization weight `lambda`.
    pub fn scaled_value(&self, j: usize, t: f64, lambda: f64) -> f64 {
        if self.has_knots() {
            if lambda > 0.0 {
                lambda * self.value(j, t / lambda)
            } else {
                0.0
            }
        } else {
            self.value(j, t)
        }
    }

    /// Unit-scale `rho(theta)`.
    pub fn total(&self, theta: &[f64]) -> f64 {
        theta.iter().enumerate().map(|(j, &t)| self.value(j, t)).sum()
    }

    /// The regularizer `lambda * rho_lambda(theta)` as it enters the objective.
    pub fn regularizer(&self, theta: &[f64], lambda: f64) -> f64 {
        if lambda == 0.0 {
            return 0.0;
        }
        lambda
            * theta
                .iter()
                .enumerate()
                .map(|(j, &t)| self.scaled_value(j, t, lambda))
                .sum::<f64>()
    }

    /// Unit-scale subdifferential of `rho_j` at `t`.
    pub fn subdifferential(&self, j: usize, t: f64) -> Subgradient {
        let x = t.abs();
        let s = t.signum();
        match self.kind {
            PenaltyKind::L1 => {
                if t == 0.0 {
                    Subgradient::symmetric(1.0)
                } else {
                    Subgradient::point(s)
                }
            }
            PenaltyKind::WeightedL1 { .. } => {
                let w = self.weight(j);
                if t == 0.0 {
                    Subgradient::symmetric(w)
                } else {
                    Subgradient::point(w * s)
                }
            }
            PenaltyKind::Ridge => Subgradient::point(2.0 * t),
            PenaltyKind::Bridge { exponent } => {
                if t != 0.0 {
                    Subgradient::point(s * exponent * x.powf(exponent - 1.0))
                } else if exponent > 1.0 {
                    Subgradient::point(0.0)
                } else if exponent == 1.0 {
                    Subgradient::symmetric(1.0)
                } else {
                    Subgradient::symmetric(f64::INFINITY)
                }
            }
            PenaltyKind::Scad { a } => {
                if t == 0.0 {
                    Subgradient::symmetric(1.0)
                } else if x <= 1.0 {
                    Subgradient::point(s)
                } else if x <= a {
                    Subgradient::point(s * (a - x) / (a - 1.0))
                } else {
                    Subgradient::point(0.0)
                }
            }
            PenaltyKind::Mcp { b } => {
                if t == 0.0 {
                    Subgradient::symmetric(1.0)
                } else {
                    Subgradient::point(s * (1.0 - x / b).max(0.0))
                }
            }
        }
    }

    /// Subdifferential of `rho_{lambda, j}` at `t`.
    pub fn scaled_subdifferential(&self, j: usize, t: f64, lambda: f64) -> Subgradient {
        if self.has_knots() {
            if lambda > 0.0 {
                self.subdifferential(j, t / lambda)
            } else if t == 0.0 {
                Subgradient::symmetric(1.0)
            } else {
                Subgradient::point(0.0)
            }
        } else {
            self.subdifferential(j, t)
        }
    }

    /// Unit-scale proximal map `argmin_u 0.5 (u - t)^2 + s rho_j(u)`.
    ///
    /// Ties between global minimizers go to the one with smaller `|u|`.
    pub fn prox(&self, j: usize, t: f64, s: f64) -> f64 {
        if s <= 0.0 {
            return t;
        }
        let x = t.abs();
        let u = match self.kind {
            PenaltyKind::L1 => (x - s).max(0.0),
            PenaltyKind::WeightedL1 { .. } => (x - s * self.weight(j)).max(0.0),
            PenaltyKind::Ridge => x / (1.0 + 2.0 * s),
            PenaltyKind::Bridge { exponent } => bridge_prox(x, s, exponent),
            PenaltyKind::Scad { a } => {
                let mut cands = [0.0, (x - s).clamp(0.0, 1.0), 1.0, a, x.max(a), 0.0];
                let len = if a - 1.0 - s > 0.0 {
                    cands[5] = ((x * (a - 1.0) - s * a) / (a - 1.0 - s)).clamp(1.0, a);
                    6
                } else {
                    5
                };
                self.best_candidate(j, x, s, &mut cands[..len])
            }
            PenaltyKind::Mcp { b } => {
                let mut cands = [0.0, b, x.max(b), 0.0];
                let len = if 1.0 - s / b > 0.0 {
                    cands[3] = ((x - s) / (1.0 - s / b)).clamp(0.0, b);
                    4
                } else {
                    3
                };
                self.best_candidate(j, x, s, &mut cands[..len])
            }
        };
        u.copysign(t)
    }

    /// Proximal map of the objective term: `argmin_u 0.5 (u - t)^2 + s lambda rho_{lambda, j}(u)`.
    pub fn scaled_prox(&self, j: usize, t: f64, s: f64, lambda: f64) -> f64 {
        if lambda <= 0.0 || s <= 0.0 {
            return t;
        }
        if self.has_knots() {
            lambda * self.prox(j, t / lambda, s)
        } else {
            self.prox(j, t, s * lambda)
        }
    }

    fn best_candidate(&self, j: usize, x: f64, s: f64, cands: &mut [f64]) -> f64 {
        cands.sort_unstable_by(|a, b| a.abs().total_cmp(&b.abs()));
        let obj = |u: f64| 0.5 * (u - x) * (u - x) + s * self.value(j, u);
        let mut best = cands[0];
        let mut best_val = obj(best);
        for &u in cands.iter().skip(1) {
            let v = obj(u);
            if v < best_val - 1e-15 * (1.0 + best_val.abs()) {
                best = u;
                best_val = v;
            }
        }
        best
    }

    pub fn smoothness(&self) -> PenaltySmoothness {
        let h = match self.kind {
            PenaltyKind::L1 | PenaltyKind::WeightedL1 { .. } => Some(0.0),
            PenaltyKind::Ridge => Some(2.0),
            PenaltyKind::Scad { a } => Some(1.0 / (a - 1.0)),
            PenaltyKind::Mcp { b } => Some(1.0 / b),
            PenaltyKind::Bridge { exponent } => {
                if exponent == 1.0 {
                    Some(0.0)
                } else if exponent == 2.0 {
                    Some(2.0)
                } else {
                    None
                }
            }
        };
        PenaltySmoothness { continuous_at_origin: true, derivative_lipschitz: h }
    }

    /// Lipschitz constant of the derivative of `rho_lambda` on `(0, inf)`.
    pub fn scaled_derivative_lipschitz(&self, lambda: f64) -> Option<f64> {
        let h = self.smoothness().derivative_lipschitz?;
        if self.has_knots() {
            if lambda > 0.0 {
                Some(h / lambda)
            } else {
                None
            }
        } else {
            Some(h)
        }
    }
}

fn bridge_prox(x: f64, s: f64, g: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let dphi = |u: f64| u - x + s * g * u.powf(g - 1.0);
    let phi = |u: f64| 0.5 * (u - x) * (u - x) + s * u.powf(g);
    if g == 1.0 {
        return (x - s).max(0.0);
    }
    if g > 1.0 {
        return bisect(dphi, 0.0, x);
    }
    // Below exponent one the objective is concave up to the inflection point
    // and convex after it, so the only candidate besides 0 is the root of the
    // derivative beyond the inflection.
    let uc = (s * g * (1.0 - g)).powf(1.0 / (2.0 - g));
    if uc >= x || dphi(uc) >= 0.0 {
        return 0.0;
    }
    let r = bisect(dphi, uc, x);
    if phi(r) < 0.5 * x * x - 1e-15 * (1.0 + 0.5 * x * x) {
        r
    } else {
        0.0
    }
}

/// Root of an increasing function on `[lo, hi]` with `f(lo) <= 0 <= f(hi)`.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn family_grid() -> Vec<f64> {
    let count = 5000;
    let (lo, hi) = (-8.0_f64, 3.0_f64);
    (0..count)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (count - 1) as f64))
        .collect()
}

/// Sampled check of the family conditions on a sign-symmetric grid over
/// `[-1e3, 1e3]` (log-spaced magnitudes plus 0).
pub fn check_family(p: &SeparablePenalty) -> FamilyReport {
    let grid = family_grid();
    let coords = p.dimension().unwrap_or(1);
    let mut symmetric = true;
    let mut nondecreasing = true;
    let mut continuous = true;
    let mut h_all: f64 = 0.0;
    let mut lipschitz = true;
    for j in 0..coords {
        symmetric &= p.value(j, 0.0) == 0.0;
        for &t in &grid {
            let (a, b) = (p.value(j, t), p.value(j, -t));
            symmetric &= (a - b).abs() <= 1e-12 * (1.0 + a.abs());
        }
        for w in grid.windows(2) {
            let (a, b) = (p.value(j, w[0]), p.value(j, w[1]));
            nondecreasing &= b >= a - 1e-12 * (1.0 + a.abs());
        }
        let near = p.value(j, 1e-300);
        let reference = p.value(j, 0.1);
        continuous &= if reference > 0.0 { near <= 1e-2 * reference } else { near <= 1e-12 };

        // Difference quotients of the derivative, grouped by decade.
        let mut smallest_decade: f64 = 0.0;
        let mut reference_decades: f64 = 0.0;
        for w in grid.windows(2) {
            let (d0, d1) = (p.subdifferential(j, w[0]).lo, p.subdifferential(j, w[1]).lo);
            let q = (d1 - d0).abs() / (w[1] - w[0]);
            h_all = h_all.max(q);
            if w[1] <= 1e-7 {
                smallest_decade = smallest_decade.max(q);
            }
            if w[0] >= 1e-3 {
                reference_decades = reference_decades.max(q);
            }
        }
        if !h_all.is_finite() || (smallest_decade > 1e-12 && smallest_decade > 1.5 * reference_decades) {
            lipschitz = false;
        }
    }
    FamilyReport {
        decomposable: true,
        zero_and_symmetric: symmetric,
        nondecreasing,
        continuous_at_origin: continuous,
        derivative_lipschitz: lipschitz,
        h_empirical: h_all,
    }
}
