//! Count grids and the fit of N(B)/B against a polynomial in log B.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::{count_exhaustive, count_projection, CountRecord, Method, OracleError};
use crate::peyre::PeyreBreakdown;
use crate::surface::{SurfaceId, SurfaceSpec};
use crate::torsor::{torsor_histogram, TorsorError};

/// Condition number above which a fit is flagged.
pub const CONDITION_WARNING: f64 = 1e8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("grid bounds must be strictly increasing")]
    NotIncreasing,
    #[error("need at least {needed} grid points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("grid bounds must be at least 2")]
    BoundTooSmall,
    #[error("points per decade must be positive")]
    ZeroDensity,
    #[error("least-squares solve failed")]
    Singular,
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Torsor(#[from] TorsorError),
}

/// Integer bounds spaced evenly in log B from `bmin` to `bmax` inclusive.
pub fn geometric_grid(bmin: u64, bmax: u64, per_decade: u32) -> Result<Vec<u64>, AnalyticsError> {
    if per_decade == 0 {
        return Err(AnalyticsError::ZeroDensity);
    }
    if bmin == 0 || bmax < bmin {
        return Err(AnalyticsError::NotIncreasing);
    }
    let (lo, hi) = ((bmin as f64).log10(), (bmax as f64).log10());
    let steps = ((hi - lo) * per_decade as f64).round() as u64;
    let mut out: Vec<u64> = (0..=steps)
        .map(|k| if k == steps { bmax } else { 10f64.powf(lo + k as f64 / per_decade as f64).round() as u64 })
        .collect();
    out[0] = bmin;
    out.dedup();
    Ok(out)
}

/// Counts at every bound; the torsor method shares one enumeration up to the largest bound.
pub fn run_grid(id: SurfaceId, bounds: &[u64], method: Method, shards: usize) -> Result<Vec<CountRecord>, AnalyticsError> {
    if bounds.windows(2).any(|w| w[1] <= w[0]) {
        return Err(AnalyticsError::NotIncreasing);
    }
    let surface = SurfaceSpec::new(id);
    let mut out = Vec::with_capacity(bounds.len());
    match method {
        Method::Torsor => {
            if bounds.is_empty() {
                return Ok(out);
            }
            for (&b, n) in bounds.iter().zip(torsor_histogram(id, bounds, shards)?) {
                out.push(CountRecord { elapsed: None, ..CountRecord::new(id, method, b, n, 0.0) });
            }
        }
        Method::Projection | Method::Exhaustive => {
            for &b in bounds {
                let mut r =
                    if method == Method::Projection { count_projection(&surface, b, shards)? } else { count_exhaustive(&surface, b)? };
                r.elapsed = None;
                out.push(r);
            }
        }
    }
    Ok(out)
}

/// Least-squares polynomial in L = log B.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogPolyFit {
    pub degree: usize,
    /// Coefficients of L⁰, L¹, …, L^degree.
    pub coefficients: Vec<f64>,
    pub leading: f64,
    pub leading_stderr: f64,
    pub condition_number: f64,
    pub rms_residual: f64,
    /// Set when the grid spans under two decades or the design is badly conditioned.
    pub warning: Option<String>,
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Monomial coefficients (in L) of T_0(s), …, T_d(s) with s = aL + b.
fn chebyshev_in_l(d: usize, a: f64, b: f64) -> Vec<Vec<f64>> {
    let s = [b, a];
    let mut t: Vec<Vec<f64>> = vec![vec![1.0], s.to_vec()];
    while t.len() <= d {
        let n = t.len();
        let mut next: Vec<f64> = poly_mul(&s, &t[n - 1]).iter().map(|v| 2.0 * v).collect();
        for (i, v) in t[n - 2].iter().enumerate() {
            next[i] -= v;
        }
        t.push(next);
    }
    t.truncate(d + 1);
    t
}

/// Fits y ≈ Σ βₖ (log B)^k over k ≤ degree through a Chebyshev basis on the log B range.
pub fn fit_log_poly(points: &[(f64, f64)], degree: usize) -> Result<LogPolyFit, AnalyticsError> {
    let n = points.len();
    if n < degree + 2 {
        return Err(AnalyticsError::TooFewPoints { needed: degree + 2, got: n });
    }
    if points.iter().any(|(b, _)| *b < 2.0) {
        return Err(AnalyticsError::BoundTooSmall);
    }
    if points.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(AnalyticsError::NotIncreasing);
    }
    let ls: Vec<f64> = points.iter().map(|(b, _)| b.ln()).collect();
    let (lo, hi) = (ls[0], ls[n - 1]);
    let a = 2.0 / (hi - lo);
    let b = -(hi + lo) / (hi - lo);
    let basis = chebyshev_in_l(degree, a, b);
    let eval = |poly: &[f64], l: f64| poly.iter().rev().fold(0.0, |acc, c| acc * l + c);
    let x = DMatrix::from_fn(n, degree + 1, |i, k| eval(&basis[k], ls[i]));
    let y = DVector::from_iterator(n, points.iter().map(|p| p.1));
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let beta = svd.solve(&y, 1e-14 * smax).map_err(|_| AnalyticsError::Singular)?;
    let resid = &y - &x * &beta;
    let rss = resid.norm_squared();
    let dof = n - degree - 1;
    let sigma2 = rss / dof as f64;
    let xtx_inv = (x.transpose() * &x).try_inverse().ok_or(AnalyticsError::Singular)?;
    let mut coefficients = vec![0.0; degree + 1];
    for (k, poly) in basis.iter().enumerate() {
        for (i, c) in poly.iter().enumerate() {
            coefficients[i] += beta[k] * c;
        }
    }
    // only T_degree reaches L^degree, with coefficient 2^{d−1}a^d (1 when d = 0)
    let lead_factor = basis[degree][degree];
    let mut warning = None;
    if points[n - 1].0 / points[0].0 < 100.0 {
        warning = Some("grid spans less than two decades".to_string());
    }
    if cond > CONDITION_WARNING {
        warning = Some(format!("design matrix condition number {cond:.3e}"));
    }
    Ok(LogPolyFit {
        degree,
        leading: coefficients[degree],
        leading_stderr: lead_factor.abs() * (sigma2 * xtx_inv[(degree, degree)]).max(0.0).sqrt(),
        coefficients,
        condition_number: cond,
        rms_residual: (rss / n as f64).sqrt(),
        warning,
    })
}

/// Fit of N(B)/B with the degree ρ − 1 fixed by the surface.
pub fn fit_leading(grid: &[(u64, u64)], rho: u32) -> Result<LogPolyFit, AnalyticsError> {
    let pts: Vec<(f64, f64)> = grid.iter().map(|&(b, n)| (b as f64, n as f64 / b as f64)).collect();
    fit_log_poly(&pts, rho.saturating_sub(1) as usize)
}

/// Where a disagreement between the fitted and predicted constant comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Diagnosis {
    /// Leading coefficient within tolerance of c.
    Agrees,
    /// Three standard errors of c already cover the deviation.
    MonteCarloError,
    /// c is sharp, the ratio moves monotonically and its drift shrinks decade by decade.
    SlowConvergence,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub surface: SurfaceId,
    pub grid: Vec<(u64, u64)>,
    pub predicted_c: f64,
    pub predicted_c_stderr: f64,
    /// N(B) / (c B (log B)^{ρ−1}) at each grid point.
    pub ratios: Vec<f64>,
    pub fit: LogPolyFit,
    pub leading_coeff: f64,
    /// (leading − c) / c
    pub relative_deviation: f64,
    /// |ratio(B) − ratio(B/10)| for consecutive decades ending at the top of the grid, oldest first.
    pub decade_drifts: Vec<f64>,
    pub drift_decreasing: bool,
    /// Whether the ratio is monotone over the top decade.
    pub ratio_monotone_top: bool,
    /// RMS residual of N/B − c(log B)^{ρ−1} fitted by a polynomial of degree ρ − 2.
    pub constrained_rms: f64,
    pub tolerance: f64,
    pub diagnosis: Diagnosis,
}

fn nearest_index(grid: &[(u64, u64)], target: f64) -> usize {
    let lt = target.ln();
    (0..grid.len())
        .min_by(|&i, &j| {
            let di = ((grid[i].0 as f64).ln() - lt).abs();
            let dj = ((grid[j].0 as f64).ln() - lt).abs();
            di.total_cmp(&dj)
        })
        .unwrap_or(0)
}

pub fn asymptotic_report(
    grid: &[(u64, u64)],
    peyre: &PeyreBreakdown,
    tolerance: f64,
) -> Result<AsymptoticReport, AnalyticsError> {
    let fit = fit_leading(grid, peyre.rho)?;
    let c = peyre.c_total;
    let r = peyre.rho as i32 - 1;
    let ratios: Vec<f64> = grid.iter().map(|&(b, n)| n as f64 / (c * b as f64 * (b as f64).ln().powi(r))).collect();
    let top = grid[grid.len() - 1].0 as f64;
    let bottom = grid[0].0 as f64;
    let mut anchors = Vec::new();
    let mut t = top;
    while t >= bottom * 0.999 {
        anchors.push(nearest_index(grid, t));
        t /= 10.0;
    }
    anchors.reverse();
    let decade_drifts: Vec<f64> = anchors.windows(2).map(|w| (ratios[w[1]] - ratios[w[0]]).abs()).collect();
    let drift_decreasing = decade_drifts.len() >= 2 && decade_drifts[decade_drifts.len() - 1] < decade_drifts[decade_drifts.len() - 2];
    let top_start = nearest_index(grid, top / 10.0);
    let tail = &ratios[top_start..];
    let ratio_monotone_top =
        tail.windows(2).all(|w| w[1] <= w[0]) || tail.windows(2).all(|w| w[1] >= w[0]);
    let shifted: Vec<(f64, f64)> = grid
        .iter()
        .map(|&(b, n)| (b as f64, n as f64 / b as f64 - c * (b as f64).ln().powi(r)))
        .collect();
    let constrained_rms = fit_log_poly(&shifted, (r - 1).max(0) as usize)?.rms_residual;
    let relative_deviation = (fit.leading - c) / c;
    let diagnosis = if relative_deviation.abs() <= tolerance {
        Diagnosis::Agrees
    } else if 3.0 * peyre.c_stderr >= relative_deviation.abs() * c {
        Diagnosis::MonteCarloError
    } else if drift_decreasing && ratio_monotone_top {
        Diagnosis::SlowConvergence
    } else {
        Diagnosis::Inconclusive
    };
    Ok(AsymptoticReport {
        surface: peyre.surface,
        grid: grid.to_vec(),
        predicted_c: c,
        predicted_c_stderr: peyre.c_stderr,
        ratios,
        leading_coeff: fit.leading,
        relative_deviation,
        fit,
        decade_drifts,
        drift_decreasing,
        ratio_monotone_top,
        constrained_rms,
        tolerance,
        diagnosis,
    })
}

/// Columns B, count, prediction, ratio.
pub fn report_csv(report: &AsymptoticReport) -> String {
    let r = report.fit.degree as i32;
    let mut out = String::from("B,count,prediction,ratio\n");
    for (&(b, n), ratio) in report.grid.iter().zip(&report.ratios) {
        let pred = report.predicted_c * b as f64 * (b as f64).ln().powi(r);
        out.push_str(&format!("{b},{n},{pred},{ratio}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(f: impl Fn(f64) -> f64, lo: f64, hi: f64, per_decade: u32) -> Vec<(f64, f64)> {
        geometric_grid(lo as u64, hi as u64, per_decade).unwrap().into_iter().map(|b| (b as f64, f(b as f64))).collect()
    }

    #[test]
    fn grid_endpoints_and_density() {
        let g = geometric_grid(1000, 1_000_000, 16).unwrap();
        assert_eq!(g.len(), 49);
        assert_eq!((g[0], g[48]), (1000, 1_000_000));
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn exact_model_recovered() {
        let pts = synthetic(|b| 0.25 * b.ln().powi(4), 1e3, 1e6, 16);
        let f = fit_log_poly(&pts, 4).unwrap();
        assert!((f.leading - 0.25).abs() < 0.25e-6, "{}", f.leading);
    }

    #[test]
    fn lower_order_term_does_not_bias_leading() {
        let pts = synthetic(|b| 0.25 * b.ln().powi(4) - 3.0 * b.ln().powi(3), 1e3, 1e7, 16);
        let f = fit_log_poly(&pts, 4).unwrap();
        assert!((f.leading - 0.25).abs() < 0.25e-3);
        assert!((f.coefficients[3] + 3.0).abs() < 1e-2);
    }

    #[test]
    fn too_few_points_rejected() {
        let pts = synthetic(|b| b.ln(), 1e3, 1e4, 2);
        assert!(matches!(fit_log_poly(&pts, 4), Err(AnalyticsError::TooFewPoints { .. })));
    }

    #[test]
    fn narrow_grid_warns() {
        let pts = synthetic(|b| b.ln().powi(2), 1000.0, 5000.0, 40);
        assert!(fit_log_poly(&pts, 2).unwrap().warning.is_some());
    }

    #[test]
    fn torsor_grid_matches_single_counts() {
        let g = run_grid(SurfaceId::S1, &[10, 100], Method::Torsor, 2).unwrap();
        assert_eq!(g.iter().map(|r| r.count).collect::<Vec<_>>(), vec![92, 2222]);
        assert!(run_grid(SurfaceId::S1, &[], Method::Torsor, 1).unwrap().is_empty());
        assert_eq!(run_grid(SurfaceId::S1, &[10, 10], Method::Torsor, 1), Err(AnalyticsError::NotIncreasing));
    }
}
