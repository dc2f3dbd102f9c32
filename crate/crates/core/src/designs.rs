//! Design matrices and regression instances.
//!
//! The block designs put `n/2` copies of `sqrt(n) * A` on the diagonal with
//! `A = [[cos a, -cos a], [sin a, sin a]]` and pad with zero columns up to `d`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, io_at, Error, Result};
use crate::linalg::SparseColumns;
use crate::rng;

/// Which construction produced a design.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Block design whose local minima all carry slow-rate prediction error.
    LocalMin,
    /// Block design used for the local-descent lower bound.
    Descent,
    /// Block design of the simulation study, `sin a = n^(-1/4)`.
    Simulation,
    /// Scaled copies of a small block design, satisfying a restricted eigenvalue bound.
    Corollary,
    /// Weighted-Lasso counterexample with a shared first row.
    Dalalyan,
    Custom,
}

impl Provenance {
    pub fn is_block(self) -> bool {
        matches!(self, Provenance::LocalMin | Provenance::Descent | Provenance::Simulation)
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "local-min" => Ok(Provenance::LocalMin),
            "descent" => Ok(Provenance::Descent),
            "simulation" => Ok(Provenance::Simulation),
            "corollary" => Ok(Provenance::Corollary),
            "dalalyan" => Ok(Provenance::Dalalyan),
            "custom" => Ok(Provenance::Custom),
            _ => invalid(format!("unknown provenance '{s}'")),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::LocalMin => "local-min",
            Provenance::Descent => "descent",
            Provenance::Simulation => "simulation",
            Provenance::Corollary => "corollary",
            Provenance::Dalalyan => "dalalyan",
            Provenance::Custom => "custom",
        }
    }
}

/// Handling of an odd number of rows for the block designs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OddRows {
    /// Build the `n - 1` row design and append a zero row.
    #[default]
    Pad,
    Reject,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    Rademacher,
}

/// Construction parameters, present where the construction uses them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DesignParams {
    pub n: usize,
    pub d: usize,
    pub sigma: Option<f64>,
    pub radius: Option<f64>,
    pub gamma: Option<f64>,
    pub k: Option<usize>,
    pub m: Option<usize>,
    /// Radius actually used by the sub-blocks (`R'` for the corollary design,
    /// `min(R, sigma)` for the descent design).
    pub block_radius: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct DesignMatrix {
    entries: DMatrix<f64>,
    columns: SparseColumns,
    provenance: Provenance,
    params: DesignParams,
    alpha: Option<f64>,
    block_count: usize,
    padded_row: bool,
    default_noise: NoiseKind,
}

/// The unscaled 2x2 block `A` for angle `alpha`.
pub fn block_matrix(alpha: f64) -> Matrix2<f64> {
    let (s, c) = alpha.sin_cos();
    Matrix2::new(c, -c, s, s)
}

fn block_design(n: usize, d: usize, alpha: f64, odd: OddRows) -> Result<(DMatrix<f64>, usize, bool)> {
    if n < 4 {
        return invalid(format!("block designs need n >= 4, got {n}"));
    }
    if d < n {
        return invalid(format!("block designs need d >= n, got d={d} < n={n}"));
    }
    let padded = n % 2 == 1;
    if padded && odd == OddRows::Reject {
        return Err(Error::Precondition(format!("n={n} is odd and padding is disabled")));
    }
    let used = n - (n % 2);
    let blocks = used / 2;
    let a = block_matrix(alpha) * (n as f64).sqrt();
    let mut x = DMatrix::zeros(n, d);
    for b in 0..blocks {
        let o = 2 * b;
        for r in 0..2 {
            for c in 0..2 {
                x[(o + r, o + c)] = a[(r, c)];
            }
        }
    }
    Ok((x, blocks, padded))
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return invalid(format!("{name} must be positive and finite, got {v}"));
    }
    Ok(())
}

impl DesignMatrix {
    fn assemble(
        entries: DMatrix<f64>,
        provenance: Provenance,
        params: DesignParams,
        alpha: Option<f64>,
        block_count: usize,
        padded_row: bool,
        default_noise: NoiseKind,
    ) -> Self {
        let columns = SparseColumns::from_dense(&entries);
        DesignMatrix { entries, columns, provenance, params, alpha, block_count, padded_row, default_noise }
    }

    /// Wrap an arbitrary matrix.
    pub fn custom(entries: DMatrix<f64>) -> Self {
        let params = DesignParams { n: entries.nrows(), d: entries.ncols(), ..Default::default() };
        Self::assemble(entries, Provenance::Custom, params, None, 0, false, NoiseKind::Gaussian)
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn columns(&self) -> &SparseColumns {
        &self.columns
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn params(&self) -> &DesignParams {
        &self.params
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn block_count(&self) -> usize {
        self.block_count
    }

    pub fn padded_row(&self) -> bool {
        self.padded_row
    }

    pub fn default_noise(&self) -> NoiseKind {
        self.default_noise
    }

    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    /// The unscaled block `A` of a block design.
    pub fn block(&self) -> Option<Matrix2<f64>> {
        if self.provenance.is_block() {
            self.alpha.map(block_matrix)
        } else {
            None
        }
    }

    /// Half-width `B` of the window used by the lower-bound arguments:
    /// `4 sigma / sqrt(n)` for the local-minimum design and
    /// `sigma / (4 sqrt(n))` for the descent design.
    pub fn window_b(&self) -> Option<f64> {
        let sigma = self.params.sigma?;
        let rn = (self.params.n as f64).sqrt();
        match self.provenance {
            Provenance::LocalMin => Some(4.0 * sigma / rn),
            Provenance::Descent => Some(sigma / (4.0 * rn)),
            _ => None,
        }
    }

    /// `X theta`.
    pub fn mul(&self, theta: &[f64]) -> Vec<f64> {
        self.columns.mul(theta)
    }

    /// `(1/n) ||X (a - b)||^2`.
    pub fn prediction_error(&self, a: &[f64], b: &[f64]) -> f64 {
        let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let v = self.mul(&diff);
        v.iter().map(|x| x * x).sum::<f64>() / self.nrows() as f64
    }

    /// Default true vector of the construction: the signal sits on the first block.
    pub fn default_theta_star(&self) -> Vec<f64> {
        let d = self.ncols();
        let mut t = vec![0.0; d];
        match self.provenance {
            Provenance::LocalMin => {
                let r = self.params.radius.unwrap_or(1.0);
                t[0] = r / 2.0;
                t[1] = r / 2.0;
            }
            Provenance::Descent => {
                let r = self.params.block_radius.unwrap_or(1.0);
                t[0] = r / 2.0;
                t[1] = r / 2.0;
            }
            Provenance::Dalalyan => {
                let m = d / 2;
                t[m - 2] = 0.5;
                t[m - 1] = 0.5;
            }
            _ => {
                t[0] = 0.5;
                if d > 1 {
                    t[1] = 0.5;
                }
            }
        }
        t
    }

    pub fn header(&self) -> DesignHeader {
        DesignHeader {
            provenance: self.provenance,
            params: self.params.clone(),
            alpha: self.alpha,
            block_count: self.block_count,
            padded_row: self.padded_row,
            noise: self.default_noise,
            seed: None,
        }
    }

    /// Writes the matrix to `path` as CSV and the header to `path` with a `.json` extension.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path).map_err(io_at(path))?);
        write_matrix_csv(&self.entries, &mut w)?;
        w.flush()?;
        let header = serde_json::to_string_pretty(&self.header())?;
        let hp = path.with_extension("json");
        std::fs::write(&hp, header).map_err(io_at(&hp))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let entries = read_matrix_csv(BufReader::new(File::open(path).map_err(io_at(path))?))?;
        let hp = path.with_extension("json");
        let header: DesignHeader = serde_json::from_str(&std::fs::read_to_string(&hp).map_err(io_at(&hp))?)?;
        if header.params.n != entries.nrows() || header.params.d != entries.ncols() {
            return Err(Error::Dimension(format!(
                "header says {}x{}, matrix is {}x{}",
                header.params.n,
                header.params.d,
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(Self::assemble(
            entries,
            header.provenance,
            header.params,
            header.alpha,
            header.block_count,
            header.padded_row,
            header.noise,
        ))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignHeader {
    pub provenance: Provenance,
    pub params: DesignParams,
    pub alpha: Option<f64>,
    pub block_count: usize,
    pub padded_row: bool,
    pub noise: NoiseKind,
    pub seed: Option<u64>,
}

/// Local-minimum lower-bound design: `sin a = sqrt(sigma) / (n^(1/4) sqrt(32 R))`.
pub fn build_local_min_design(n: usize, d: usize, sigma: f64, radius: f64, odd: OddRows) -> Result<DesignMatrix> {
    check_positive("sigma", sigma)?;
    check_positive("R", radius)?;
    let rn = (n as f64).sqrt();
    if radius < 8.0 * sigma / rn {
        return Err(Error::Precondition(format!("R={radius} is below 8 sigma / sqrt(n) = {}", 8.0 * sigma / rn)));
    }
    let s = sigma.sqrt() / ((n as f64).powf(0.25) * (32.0 * radius).sqrt());
    let alpha = s.asin();
    let (x, blocks, padded) = block_design(n, d, alpha, odd)?;
    let params = DesignParams { n, d, sigma: Some(sigma), radius: Some(radius), ..Default::default() };
    Ok(DesignMatrix::assemble(x, Provenance::LocalMin, params, Some(alpha), blocks, padded, NoiseKind::Gaussian))
}

/// Local-descent lower-bound design: `sin a = sqrt(sigma) / (n^(1/4) sqrt(r))` with `r = min(R, sigma)`.
pub fn build_descent_design(n: usize, d: usize, sigma: f64, radius: f64, odd: OddRows) -> Result<DesignMatrix> {
    check_positive("sigma", sigma)?;
    check_positive("R", radius)?;
    let rn = (n as f64).sqrt();
    if radius < sigma / rn {
        return Err(Error::Precondition(format!("R={radius} is below sigma / sqrt(n) = {}", sigma / rn)));
    }
    let r = radius.min(sigma);
    let s = sigma.sqrt() / ((n as f64).powf(0.25) * r.sqrt());
    if s > 1.0 {
        return invalid(format!("sin(alpha) = {s} exceeds 1"));
    }
    let alpha = s.asin();
    let (x, blocks, padded) = block_design(n, d, alpha, odd)?;
    let params =
        DesignParams { n, d, sigma: Some(sigma), radius: Some(radius), block_radius: Some(r), ..Default::default() };
    Ok(DesignMatrix::assemble(x, Provenance::Descent, params, Some(alpha), blocks, padded, NoiseKind::Gaussian))
}

/// Simulation design: square, `sin a = n^(-1/4)`.
pub fn build_simulation_design(n: usize, odd: OddRows) -> Result<DesignMatrix> {
    let alpha = (n as f64).powf(-0.25).asin();
    let (x, blocks, padded) = block_design(n, n, alpha, odd)?;
    let params = DesignParams { n, d: n, sigma: Some(1.0), ..Default::default() };
    Ok(DesignMatrix::assemble(x, Provenance::Simulation, params, Some(alpha), blocks, padded, NoiseKind::Gaussian))
}

/// Square design built from `k` scaled copies of an `m x m` local-minimum design
/// plus a scaled identity, with smallest singular value at least `sqrt(n gamma)`.
pub fn build_corollary_design(n: usize, k: usize, sigma: f64, radius: f64, gamma: f64) -> Result<DesignMatrix> {
    check_positive("sigma", sigma)?;
    check_positive("R", radius)?;
    if k == 0 {
        return invalid("k must be at least 1");
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return invalid(format!("gamma must lie in (0, 1], got {gamma}"));
    }
    if n < 4 * k {
        return Err(Error::Precondition(format!("need n >= 4k, got n={n}, k={k}")));
    }
    let mut m = n / k;
    if m % 2 == 1 {
        m -= 1;
    }
    let (nf, mf, kf) = (n as f64, m as f64, k as f64);
    let r_block = (radius * nf.sqrt() / (kf * mf.sqrt())).min(sigma / (16.0 * gamma * mf.sqrt()));
    let s = sigma.sqrt() / (mf.powf(0.25) * (32.0 * r_block).sqrt());
    if s > 1.0 {
        return invalid(format!("sin(alpha) = {s} exceeds 1; increase R"));
    }
    let alpha = s.asin();
    // Sub-blocks are built directly from the angle: the reduced radius can sit
    // below the 8 sigma / sqrt(m) floor of the standalone builder.
    let (xm, blocks_m, _) = block_design(m, m, alpha, OddRows::Reject)?;
    let scale = (nf / mf).sqrt();
    let mut x = DMatrix::zeros(n, n);
    for c in 0..k {
        let o = c * m;
        x.view_mut((o, o), (m, m)).copy_from(&(&xm * scale));
    }
    for i in k * m..n {
        x[(i, i)] = nf.sqrt();
    }
    let params = DesignParams {
        n,
        d: n,
        sigma: Some(sigma),
        radius: Some(radius),
        gamma: Some(gamma),
        k: Some(k),
        m: Some(m),
        block_radius: Some(r_block),
    };
    Ok(DesignMatrix::assemble(x, Provenance::Corollary, params, Some(alpha), k * blocks_m, false, NoiseKind::Gaussian))
}

/// `sqrt(n) [[1^T, 1^T], [I, -I]]` with `m = n - 1`, an `n x 2m` matrix.
pub fn build_dalalyan_design(n: usize) -> Result<DesignMatrix> {
    if n < 4 {
        return invalid(format!("need n >= 4, got {n}"));
    }
    let m = n - 1;
    let rn = (n as f64).sqrt();
    let mut x = DMatrix::zeros(n, 2 * m);
    for j in 0..2 * m {
        x[(0, j)] = rn;
    }
    for i in 0..m {
        x[(i + 1, i)] = rn;
        x[(i + 1, m + i)] = -rn;
    }
    let params = DesignParams { n, d: 2 * m, sigma: Some(1.0), m: Some(m), ..Default::default() };
    Ok(DesignMatrix::assemble(x, Provenance::Dalalyan, params, None, 0, false, NoiseKind::Rademacher))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificationReport {
    pub max_col_norm_ratio: f64,
    pub min_col_norm_ratio: f64,
    /// `sqrt` of the smallest eigenvalue of `X^T X`; 0 whenever `d > n`.
    pub min_singular_value: f64,
    /// `sigma_min^2 / n` for square full-rank designs.
    pub re_lower_bound: Option<f64>,
}

pub fn certify(design: &DesignMatrix) -> CertificationReport {
    let x = design.entries();
    let (n, d) = (x.nrows(), x.ncols());
    let rn = (n as f64).sqrt();
    let ratios: Vec<f64> = (0..d).map(|j| x.column(j).norm() / rn).collect();
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    let min_ratio = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let smin = if d > n || d == 0 {
        0.0
    } else {
        x.clone().singular_values().iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let re = if n == d && smin > 0.0 { Some(smin * smin / n as f64) } else { None };
    CertificationReport { max_col_norm_ratio: max_ratio, min_col_norm_ratio: min_ratio, min_singular_value: smin, re_lower_bound: re }
}

/// A design together with a true vector and one noise draw.
#[derive(Clone, Debug)]
pub struct RegressionInstance {
    pub design: Arc<DesignMatrix>,
    pub theta_star: Vec<f64>,
    pub w: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma: f64,
    /// Number of nonzeros of `theta_star`.
    pub k: usize,
    /// `||theta_star||_1`.
    pub radius: f64,
    pub seed: u64,
    pub noise: NoiseKind,
}

impl RegressionInstance {
    pub fn n(&self) -> usize {
        self.design.nrows()
    }

    pub fn d(&self) -> usize {
        self.design.ncols()
    }

    /// `(1/n) ||X (theta - theta_star)||^2`.
    pub fn prediction_error(&self, theta: &[f64]) -> f64 {
        self.design.prediction_error(theta, &self.theta_star)
    }
}

/// Draws `w` and sets `y = X theta_star + w`.
pub fn make_instance(
    design: Arc<DesignMatrix>,
    theta_star: Vec<f64>,
    sigma: f64,
    noise: NoiseKind,
    seed: u64,
) -> Result<RegressionInstance> {
    if theta_star.len() != design.ncols() {
        return Err(Error::Dimension(format!("theta_star has length {}, design has {} columns", theta_star.len(), design.ncols())));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return invalid(format!("sigma must be nonnegative, got {sigma}"));
    }
    let mut r = rng::rng(seed);
    let n = design.nrows();
    let w: Vec<f64> = match noise {
        NoiseKind::Gaussian => (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut r);
                sigma * z
            })
            .collect(),
        NoiseKind::Rademacher => (0..n).map(|_| if r.random::<bool>() { sigma } else { -sigma }).collect(),
    };
    let mut y = design.mul(&theta_star);
    for (yi, wi) in y.iter_mut().zip(&w) {
        *yi += wi;
    }
    let k = theta_star.iter().filter(|t| **t != 0.0).count();
    let radius = theta_star.iter().map(|t| t.abs()).sum();
    Ok(RegressionInstance { design, theta_star, w, y, sigma, k, radius, seed, noise })
}

/// Writes one matrix row per line with 17 significant digits.
pub fn write_matrix_csv(x: &DMatrix<f64>, w: &mut impl Write) -> Result<()> {
    for i in 0..x.nrows() {
        let row: Vec<String> = (0..x.ncols()).map(|j| format_f64(x[(i, j)])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_matrix_csv(r: impl Read) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in BufReader::new(r).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("'{s}': {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse("ragged matrix rows".into()));
            }
        }
        rows.push(row);
    }
    let n = rows.len();
    let d = rows.first().map_or(0, |r| r.len());
    Ok(DMatrix::from_row_iterator(n, d, rows.into_iter().flatten()))
}

/// Decimal with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_dvector(v: &[f64]) -> DVector<f64> {
    DVector::from_row_slice(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_min_angle_example() {
        let x = build_local_min_design(4, 4, 1.0, 4.0, OddRows::Reject).unwrap();
        let s = x.alpha().unwrap().sin();
        assert!((s - 1.0 / 16.0).abs() < 1e-15);
        let c = certify(&x);
        assert!((c.max_col_norm_ratio - 1.0).abs() < 1e-12);
        assert!((c.min_col_norm_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn local_min_identity_and_zero_columns() {
        for &(n, r) in &[(16usize, 3.0), (64, 3.0), (10, 7.5)] {
            let x = build_local_min_design(n, n + 3, 1.3, r, OddRows::Reject).unwrap();
            let s = x.alpha().unwrap().sin();
            let lhs = s * s * (n as f64).sqrt();
            let rhs = 1.3 / (32.0 * r);
            assert!((lhs - rhs).abs() <= 1e-12 * rhs);
            let c = certify(&x);
            assert_eq!(c.min_col_norm_ratio, 0.0);
            assert_eq!(c.min_singular_value, 0.0);
        }
    }

    #[test]
    fn precondition_and_odd_rows() {
        assert!(matches!(build_local_min_design(16, 16, 1.0, 1.0, OddRows::Pad), Err(Error::Precondition(_))));
        assert!(build_local_min_design(15, 15, 1.0, 4.0, OddRows::Reject).is_err());
        let x = build_local_min_design(15, 15, 1.0, 4.0, OddRows::Pad).unwrap();
        assert!(x.padded_row());
        assert_eq!(x.block_count(), 7);
        assert!(x.entries().row(14).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gram_is_block_diagonal() {
        let x = build_descent_design(12, 14, 1.0, 1.0, OddRows::Reject).unwrap();
        let g = x.entries().transpose() * x.entries();
        let blk = g.view((0, 0), (2, 2)).clone_owned();
        for i in 0..14 {
            for j in 0..14 {
                let same_block = i < 12 && j < 12 && i / 2 == j / 2;
                if same_block {
                    assert!((g[(i, j)] - blk[(i % 2, j % 2)]).abs() < 1e-12);
                } else {
                    assert_eq!(g[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn descent_design_examples() {
        let x = build_descent_design(16, 16, 1.0, 1.0, OddRows::Reject).unwrap();
        assert!((x.alpha().unwrap() - std::f64::consts::FRAC_PI_6).abs() < 1e-15);
        let y = build_descent_design(16, 16, 1.0, 5.0, OddRows::Reject).unwrap();
        assert_eq!(x.alpha(), y.alpha());
        assert!((x.window_b().unwrap() - 1.0 / 16.0).abs() < 1e-15);
        assert!(build_descent_design(16, 16, 1.0, 0.2, OddRows::Reject).is_err());
    }

    #[test]
    fn simulation_design_signal_error() {
        let x = build_simulation_design(16, OddRows::Reject).unwrap();
        let a = x.block().unwrap();
        assert!((a[(0, 0)] - 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((a[(1, 0)] - 0.5).abs() < 1e-15);
        let t = x.default_theta_star();
        let err = x.prediction_error(&t, &[0.0; 16]);
        assert!((err - 0.25).abs() < 1e-14);
        assert_eq!(build_simulation_design(10, OddRows::Reject).unwrap().block_count(), 5);
    }

    #[test]
    fn corollary_singular_values() {
        for &gamma in &[0.1, 0.25, 1.0] {
            let x = build_corollary_design(64, 2, 1.0, 8.0 / 8.0, gamma).unwrap();
            let c = certify(&x);
            assert!(c.min_singular_value >= (64.0 * gamma).sqrt() * (1.0 - 1e-9), "{gamma}: {c:?}");
            assert!(c.max_col_norm_ratio <= 1.0 + 1e-12);
            assert!(c.re_lower_bound.unwrap() >= gamma * (1.0 - 1e-9));
        }
        let x = build_corollary_design(16, 2, 1.0, 2.0, 0.25).unwrap();
        assert_eq!(x.params().m, Some(8));
        assert!(build_corollary_design(7, 2, 1.0, 2.0, 0.25).is_err());
        // km < n leaves an identity tail.
        let x = build_corollary_design(13, 3, 1.0, 4.0, 0.5).unwrap();
        assert_eq!(x.params().m, Some(4));
        assert_eq!(x.entries()[(12, 12)], 13f64.sqrt());
    }

    #[test]
    fn dalalyan_structure() {
        let x = build_dalalyan_design(4).unwrap();
        assert_eq!(x.entries().shape(), (4, 6));
        assert!(x.entries().row(0).iter().all(|v| *v == 2.0));
        let c = certify(&x);
        assert!((c.max_col_norm_ratio - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(x.entries().rank(1e-9), 4);
        assert_eq!(x.default_noise(), NoiseKind::Rademacher);
    }

    #[test]
    fn instances_are_reproducible() {
        let x = Arc::new(build_simulation_design(16, OddRows::Reject).unwrap());
        let t = x.default_theta_star();
        let a = make_instance(x.clone(), t.clone(), 1.0, NoiseKind::Gaussian, 9).unwrap();
        let b = make_instance(x.clone(), t.clone(), 1.0, NoiseKind::Gaussian, 9).unwrap();
        assert_eq!(a.w, b.w);
        let z = make_instance(x.clone(), t.clone(), 0.0, NoiseKind::Gaussian, 9).unwrap();
        assert_eq!(z.y, x.mul(&t));
        assert_eq!(z.k, 2);
        assert_eq!(z.radius, 1.0);
        let r = make_instance(x.clone(), t.clone(), 2.0, NoiseKind::Rademacher, 1).unwrap();
        assert!(r.w.iter().all(|v| v.abs() == 2.0));
        assert!(make_instance(x, vec![0.0; 3], 1.0, NoiseKind::Gaussian, 0).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let x = build_local_min_design(6, 8, 1.0, 9.0, OddRows::Reject).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        x.save(&path).unwrap();
        let y = DesignMatrix::load(&path).unwrap();
        assert_eq!(x.entries(), y.entries());
        assert_eq!(x.header(), y.header());
    }
}
