//! Experiment reports: aggregation, log-log slope fits, CSV and SVG output.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::designs::format_f64;
use crate::error::{invalid, io_at, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub n: usize,
    pub estimator: String,
    pub mean_error: f64,
    /// Standard error of the mean over successful trials.
    pub std_error: f64,
    /// Successful trials.
    pub trials: usize,
    /// Trials where the estimator returned an error; excluded from the mean.
    pub failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub estimator: String,
    /// Decay exponent: error ~ n^(-slope).
    pub slope: f64,
    pub stderr: f64,
}

/// Outcome of one estimator on one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub n: usize,
    pub trial: usize,
    pub estimator: String,
    pub seed: u64,
    /// `None` when the estimator failed.
    pub error: Option<f64>,
    pub is_zero: bool,
    pub lambda: f64,
    /// `max |(X theta_hat - y)_{1:2}|`, recorded for the reweighted Lasso.
    pub fit_residual: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub slopes: Vec<SlopeFit>,
    /// Per-trial outcomes; not part of the CSV.
    #[serde(default)]
    pub records: Vec<TrialRecord>,
}

/// Mean and standard error of the mean (sample standard deviation over `sqrt(k)`).
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let k = values.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    if k == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1) as f64;
    (mean, (var / k as f64).sqrt())
}

/// OLS fit of `log(error)` on `log(n)`; returns the decay exponent and its standard error.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 3 {
        return invalid(format!("need at least 3 points, got {}", points.len()));
    }
    if points.iter().any(|(n, e)| !(*n > 0.0 && *e > 0.0 && n.is_finite() && e.is_finite())) {
        return invalid("slope fit needs positive finite n and errors");
    }
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return invalid("slope fit needs at least two distinct n");
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let beta = sxy / sxx;
    let alpha = my - beta * mx;
    let ssr: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - alpha - beta * x).powi(2)).sum();
    let stderr = (ssr / (m - 2.0) / sxx).sqrt();
    Ok((-beta, stderr))
}

impl ExperimentReport {
    /// Builds rows and slopes from per-trial records, in order of first appearance.
    pub fn from_records(records: Vec<TrialRecord>) -> Self {
        let mut keys: Vec<(usize, String)> = Vec::new();
        for r in &records {
            let key = (r.n, r.estimator.clone());
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        let rows: Vec<ReportRow> = keys
            .into_iter()
            .map(|(n, est)| {
                let mine: Vec<&TrialRecord> = records.iter().filter(|r| r.n == n && r.estimator == est).collect();
                let ok: Vec<f64> = mine.iter().filter_map(|r| r.error).collect();
                let (mean_error, std_error) = mean_and_stderr(&ok);
                ReportRow { n, estimator: est, mean_error, std_error, trials: ok.len(), failed: mine.len() - ok.len() }
            })
            .collect();
        let mut report = ExperimentReport { rows, slopes: Vec::new(), records };
        report.refit_slopes();
        report
    }

    pub fn estimators(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.estimator) {
                out.push(r.estimator.clone());
            }
        }
        out
    }

    /// Recomputes slopes for estimators with at least 3 usable n-values.
    pub fn refit_slopes(&mut self) {
        self.slopes = self
            .estimators()
            .into_iter()
            .filter_map(|est| {
                let pts: Vec<(f64, f64)> = self
                    .rows
                    .iter()
                    .filter(|r| r.estimator == est && r.trials > 0)
                    .map(|r| (r.n as f64, r.mean_error))
                    .collect();
                fit_loglog_slope(&pts).ok().map(|(slope, stderr)| SlopeFit { estimator: est, slope, stderr })
            })
            .collect();
    }

    pub fn row(&self, n: usize, estimator: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.n == n && r.estimator == estimator)
    }

    pub fn slope(&self, estimator: &str) -> Option<&SlopeFit> {
        self.slopes.iter().find(|s| s.estimator == estimator)
    }

    pub fn to_csv(&self) -> Result<String> {
        if self.rows.is_empty() {
            return invalid("report has no rows");
        }
        let mut s = String::from("n,estimator,mean_error,std_error,trials\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{}", r.n, r.estimator, format_f64(r.mean_error), format_f64(r.std_error), r.trials);
        }
        s.push_str("\n# slopes\nestimator,slope,stderr\n");
        for f in &self.slopes {
            let _ = writeln!(s, "{},{},{}", f.estimator, format_f64(f.slope), format_f64(f.stderr));
        }
        s.push_str("\n# failures\nn,estimator,failed\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{}", r.n, r.estimator, r.failed);
        }
        Ok(s)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |line: &str| Error::Parse(format!("malformed report line: {line:?}"));
        let num = |v: &str, line: &str| v.parse::<f64>().map_err(|_| bad(line));
        let int = |v: &str, line: &str| v.parse::<usize>().map_err(|_| bad(line));
        let mut report = ExperimentReport::default();
        let mut section = "rows";
        let mut header_pending = true;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix("# ") {
                section = match name {
                    "slopes" => "slopes",
                    "failures" => "failures",
                    _ => return Err(bad(line)),
                };
                header_pending = true;
                continue;
            }
            if header_pending {
                header_pending = false;
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            match section {
                "rows" if f.len() == 5 => report.rows.push(ReportRow {
                    n: int(f[0], line)?,
                    estimator: f[1].to_string(),
                    mean_error: num(f[2], line)?,
                    std_error: num(f[3], line)?,
                    trials: int(f[4], line)?,
                    failed: 0,
                }),
                "slopes" if f.len() == 3 => report.slopes.push(SlopeFit {
                    estimator: f[0].to_string(),
                    slope: num(f[1], line)?,
                    stderr: num(f[2], line)?,
                }),
                "failures" if f.len() == 3 => {
                    let n = int(f[0], line)?;
                    let failed = int(f[2], line)?;
                    match report.rows.iter_mut().find(|r| r.n == n && r.estimator == f[1]) {
                        Some(r) => r.failed = failed,
                        None => return Err(bad(line)),
                    }
                }
                _ => return Err(bad(line)),
            }
        }
        if report.rows.is_empty() {
            return Err(Error::Parse("report has no rows".into()));
        }
        Ok(report)
    }

    /// Log-log line chart of mean error against n, one polyline per estimator.
    pub fn to_svg(&self) -> Result<String> {
        let pts: Vec<&ReportRow> = self.rows.iter().filter(|r| r.trials > 0 && r.mean_error > 0.0).collect();
        if pts.is_empty() {
            return invalid("report has no plottable rows");
        }
        let (w, h) = (640.0, 440.0);
        let (left, right, top, bottom) = (80.0, 150.0, 30.0, 60.0);
        let lx: Vec<f64> = pts.iter().map(|r| (r.n as f64).log10()).collect();
        let ly: Vec<f64> = pts.iter().map(|r| r.mean_error.log10()).collect();
        let (mut x0, mut x1) = (lx.iter().cloned().fold(f64::INFINITY, f64::min), lx.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        let (mut y0, mut y1) = (ly.iter().cloned().fold(f64::INFINITY, f64::min).floor(), ly.iter().cloned().fold(f64::NEG_INFINITY, f64::max).ceil());
        if x1 - x0 < 1e-9 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if y1 - y0 < 1e-9 {
            y0 -= 1.0;
            y1 += 1.0;
        }
        let px = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
        let py = |y: f64| top + (y1 - y) / (y1 - y0) * (h - top - bottom);
        let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"];

        let mut s = String::new();
        let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
        let _ = writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
        let (ax0, ax1, ay0, ay1) = (px(x0), px(x1), py(y0), py(y1));
        let _ = writeln!(s, r#"<path d="M{ax0:.2} {ay1:.2} L{ax0:.2} {ay0:.2} L{ax1:.2} {ay0:.2}" stroke="black" fill="none"/>"#);
        let mut ns: Vec<usize> = pts.iter().map(|r| r.n).collect();
        ns.sort_unstable();
        ns.dedup();
        for n in &ns {
            let x = px((*n as f64).log10());
            let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{ay0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, ay0 + 5.0);
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">{n}</text>"#, ay0 + 18.0);
        }
        let mut e = y0 as i32;
        while e as f64 <= y1 + 1e-9 {
            let y = py(e as f64);
            let _ = writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{ax0:.2}" y2="{y:.2}" stroke="black"/>"#, ax0 - 5.0);
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">1e{e}</text>"#, ax0 - 8.0, y + 4.0);
            e += 1;
        }
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">sample size n</text>"#, (ax0 + ax1) / 2.0, h - 15.0);
        let _ = writeln!(
            s,
            r#"<text x="20" y="{:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 20 {:.2})">mean prediction error</text>"#,
            (ay0 + ay1) / 2.0,
            (ay0 + ay1) / 2.0
        );
        for (k, est) in self.estimators().iter().enumerate() {
            let color = colors[k % colors.len()];
            let line: Vec<String> = pts
                .iter()
                .filter(|r| &r.estimator == est)
                .map(|r| format!("{:.2},{:.2}", px((r.n as f64).log10()), py(r.mean_error.log10())))
                .collect();
            if line.is_empty() {
                continue;
            }
            let _ = writeln!(s, r#"<polyline points="{}" stroke="{color}" stroke-width="2" fill="none"/>"#, line.join(" "));
            let ly = top + 18.0 * k as f64 + 10.0;
            let lx = w - right + 15.0;
            let _ = writeln!(s, r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
            let label = match self.slope(est) {
                Some(f) => format!("{est} ({:.2})", f.slope),
                None => est.clone(),
            };
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#, lx + 25.0, ly + 4.0, escape(&label));
        }
        s.push_str("</svg>\n");
        Ok(s)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?).map_err(io_at(path))
    }

    pub fn write_svg(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_svg()?).map_err(io_at(path))
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(n: usize, trial: usize, est: &str, error: Option<f64>) -> TrialRecord {
        TrialRecord { n, trial, estimator: est.into(), seed: 0, error, is_zero: false, lambda: 0.0, fit_residual: None }
    }

    #[test]
    fn exact_power_laws() {
        let ns: [f64; 5] = [8.0, 16.0, 32.0, 64.0, 128.0];
        let half: Vec<(f64, f64)> = ns.iter().map(|n| (*n, 1.0 / n.sqrt())).collect();
        let (s, se) = fit_loglog_slope(&half).unwrap();
        assert!((s - 0.5).abs() < 1e-12 && se < 1e-12);
        for c in [0.01, 3.0, 1e4] {
            let one: Vec<(f64, f64)> = ns.iter().map(|n| (*n, c / n)).collect();
            assert!((fit_loglog_slope(&one).unwrap().0 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn log_n_over_n() {
        let pts: Vec<(f64, f64)> = (3..=9).map(|k| 2f64.powi(k)).map(|n| (n, n.ln() / n)).collect();
        let (s, _) = fit_loglog_slope(&pts).unwrap();
        // Local decay rate is 1 - 1/log n, so the fit lies between its endpoint values.
        assert!(s > 1.0 - 1.0 / 8f64.ln() && s < 1.0 - 1.0 / 512f64.ln(), "{s}");
        // Closed-form least squares over x = log n, y = -log(log n / n).
        let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
        let ys: Vec<f64> = pts.iter().map(|p| -p.1.ln()).collect();
        let (mx, my) = (xs.iter().sum::<f64>() / 7.0, ys.iter().sum::<f64>() / 7.0);
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        assert!((s - sxy / sxx).abs() < 1e-12);
        assert!(fit_loglog_slope(&pts[..2]).is_err());
        assert!(fit_loglog_slope(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
    }

    #[test]
    fn aggregation_matches_streaming_oracle() {
        let vals: Vec<f64> = (0..97).map(|i| ((i * 37 % 101) as f64).sqrt() + 0.1).collect();
        let (mean, se) = mean_and_stderr(&vals);
        // Welford recurrence.
        let (mut m, mut m2) = (0.0, 0.0);
        for (k, v) in vals.iter().enumerate() {
            let d = v - m;
            m += d / (k + 1) as f64;
            m2 += d * (v - m);
        }
        let se_w = (m2 / (vals.len() - 1) as f64 / vals.len() as f64).sqrt();
        assert!((mean - m).abs() <= 1e-12 * m.abs());
        assert!((se - se_w).abs() <= 1e-12 * se_w);
    }

    #[test]
    fn failed_trials_are_excluded() {
        let recs = vec![record(4, 0, "a", Some(1.0)), record(4, 1, "a", None), record(4, 2, "a", Some(3.0))];
        let r = ExperimentReport::from_records(recs);
        assert_eq!(r.rows[0].trials, 2);
        assert_eq!(r.rows[0].failed, 1);
        assert_eq!(r.rows[0].mean_error, 2.0);
        assert!(r.slopes.is_empty());
    }

    #[test]
    fn empty_report_is_rejected() {
        assert!(ExperimentReport::default().to_csv().is_err());
        assert!(ExperimentReport::default().to_svg().is_err());
    }

    fn sample_report(errors: &[f64]) -> ExperimentReport {
        let mut recs = Vec::new();
        for (k, n) in [16usize, 32, 64, 128].iter().enumerate() {
            for (t, e) in errors.iter().enumerate() {
                recs.push(record(*n, t, "lasso", Some(e / (*n as f64).sqrt())));
                recs.push(record(*n, t, "l0", Some(e / *n as f64 * (1.0 + k as f64 * 0.1))));
            }
        }
        ExperimentReport::from_records(recs)
    }

    proptest! {
        #[test]
        fn csv_round_trip(errors in proptest::collection::vec(1e-6f64..10.0, 2..6)) {
            let r = sample_report(&errors);
            let back = ExperimentReport::from_csv(&r.to_csv().unwrap()).unwrap();
            prop_assert_eq!(&back.rows, &r.rows);
            prop_assert_eq!(&back.slopes, &r.slopes);
        }
    }

    #[test]
    fn svg_is_deterministic() {
        let r = sample_report(&[1.0, 2.0, 0.5]);
        let a = r.to_svg().unwrap();
        assert_eq!(a, r.to_svg().unwrap());
        assert!(a.contains("<polyline") && a.contains("sample size n"));
        assert_eq!(a.matches("<polyline").count(), 2);
    }

    #[test]
    fn write_errors_carry_path() {
        let r = sample_report(&[1.0, 2.0]);
        let err = r.write_csv(Path::new("/nonexistent-dir/x/r.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x/r.csv"));
    }
}
