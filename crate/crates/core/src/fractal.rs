//! Fractal dimension bounds of series graphs.
//!
//! Ex Post bounds are measured from data (box counting on the planar graph,
//! or rescaled-range Hurst analysis converted by `D = 2 − H`); Ex Ante
//! bounds are the model-implied intervals fixed before seeing data.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::fit_line;
use statrs::function::gamma::ln_gamma;

#[derive(Debug, Error, PartialEq)]
pub enum FractalError {
    #[error("need at least {needed} points, found {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("need at least 4 scales, got {0}")]
    TooFewScales(usize),
    #[error("series is too short for {scales} dyadic scales ({points} points)")]
    ScalesExceedData { scales: usize, points: usize },
    #[error("invalid window range [{min}, {max}] for {len} points")]
    BadWindows { min: usize, max: usize, len: usize },
    #[error("every window has zero variance")]
    AllWindowsDegenerate,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("scale regression failed")]
    Regression,
    #[error("unknown model {0:?}")]
    UnknownModel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    ExAnte,
    ExPost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    BoxCounting,
    RescaledRange,
    /// The interval comes from a model, not an estimator.
    Model,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FractalBound {
    pub lower: f64,
    pub point: f64,
    pub upper: f64,
    pub kind: BoundKind,
    pub method: Method,
    /// Hurst exponent behind a rescaled-range bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hurst: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regression: Option<ScaleRegression>,
}

impl FractalBound {
    fn clamped(point: f64, half: f64, kind: BoundKind, method: Method) -> Self {
        let point = point.clamp(1.0, 2.0);
        Self {
            lower: (point - half).clamp(1.0, point),
            point,
            upper: (point + half).clamp(point, 2.0),
            kind,
            method,
            hurst: None,
            regression: None,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleRegression {
    /// Box sizes (decreasing) or window lengths (increasing).
    pub scales: Vec<f64>,
    /// Box counts or mean R/S statistics.
    pub measures: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub slope_ci_halfwidth: f64,
}

fn check_finite(series: &[f64]) -> Result<(), FractalError> {
    match series.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(FractalError::NonFinite(i)),
        None => Ok(()),
    }
}

/// Number of `eps`-grid boxes the piecewise-linear graph of `v` (already in
/// the unit square, abscissae `k/(n−1)`) meets.
fn count_boxes(v: &[f64], eps: f64, rule: BoxRule) -> f64 {
    let n = v.len();
    let columns = (1.0 / eps).round() as usize;
    let row_of = |y: f64| ((y / eps) as usize).min(columns - 1);
    let mut lo = vec![f64::INFINITY; columns];
    let mut hi = vec![f64::NEG_INFINITY; columns];
    let dx = 1.0 / (n - 1) as f64;
    for k in 0..n - 1 {
        let (x0, x1) = (k as f64 * dx, (k + 1) as f64 * dx);
        let (y0, y1) = (v[k], v[k + 1]);
        let c0 = ((x0 / eps) as usize).min(columns - 1);
        let c1 = (((x1 / eps) as usize).min(columns - 1)).max(c0);
        for c in c0..=c1 {
            // clip the segment to the column
            let xa = (c as f64 * eps).max(x0);
            let xb = ((c + 1) as f64 * eps).min(x1);
            if xb < xa {
                continue;
            }
            let at = |x: f64| y0 + (y1 - y0) * (x - x0) / dx;
            let (ya, yb) = (at(xa), at(xb));
            lo[c] = lo[c].min(ya.min(yb));
            hi[c] = hi[c].max(ya.max(yb));
        }
    }
    lo.iter()
        .zip(&hi)
        .filter(|(l, h)| l.is_finite() && h.is_finite())
        .map(|(&l, &h)| match rule {
            BoxRule::Grid => (row_of(h) - row_of(l) + 1) as f64,
            BoxRule::Extent => (h - l) / eps,
        })
        .sum()
}

/// How boxes are counted within each column of width ε.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxRule {
    /// Fixed-grid boxes meeting the graph.
    Grid,
    /// The column's vertical extent in box heights, i.e. the grid count
    /// without its alignment overhead of up to two boxes per column.
    /// Far less biased at the coarse scales a finite sample allows.
    #[default]
    Extent,
}

pub const MIN_BOX_POINTS: usize = 16;

/// Most dyadic scales [`box_counting_dimension`] can use on `len` points.
pub fn max_box_scales(len: usize) -> usize {
    if len < 2 {
        return 0;
    }
    ((len - 1) as f64 / 8.0).log2().floor().max(0.0) as usize
}

/// Box-counting dimension of the series graph normalized to the unit square.
///
/// Counts occupied boxes at `num_scales` dyadic sizes ending at the finest
/// size that still leaves about eight samples per column, and regresses
/// `ln N(ε)` on `ln(1/ε)`. The bound is the slope ∓ its 95% half-width.
pub fn box_counting_dimension(series: &[f64], num_scales: usize) -> Result<FractalBound, FractalError> {
    box_counting_dimension_with(series, num_scales, BoxRule::default())
}

pub fn box_counting_dimension_with(series: &[f64], num_scales: usize, rule: BoxRule) -> Result<FractalBound, FractalError> {
    if series.len() < MIN_BOX_POINTS {
        return Err(FractalError::TooFewPoints { needed: MIN_BOX_POINTS, found: series.len() });
    }
    if num_scales < 4 {
        return Err(FractalError::TooFewScales(num_scales));
    }
    check_finite(series)?;
    let (min, max) = series.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if max == min {
        return Ok(FractalBound::clamped(1.0, 0.0, BoundKind::ExPost, Method::BoxCounting));
    }
    let finest = max_box_scales(series.len()) as i64;
    let coarsest = finest - num_scales as i64 + 1;
    if coarsest < 1 {
        return Err(FractalError::ScalesExceedData { scales: num_scales, points: series.len() });
    }
    let unit: Vec<f64> = series.iter().map(|v| (v - min) / (max - min)).collect();
    let mut scales = Vec::with_capacity(num_scales);
    let mut counts = Vec::with_capacity(num_scales);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for j in coarsest..=finest {
        let eps = 0.5f64.powi(j as i32);
        let n = count_boxes(&unit, eps, rule);
        scales.push(eps);
        counts.push(n);
        xs.push(-eps.ln());
        ys.push(n.ln());
    }
    let line = fit_line(&xs, &ys).ok_or(FractalError::Regression)?;
    let half = line.slope_ci_halfwidth(xs.len());
    let mut bound = FractalBound::clamped(line.slope, half, BoundKind::ExPost, Method::BoxCounting);
    bound.regression = Some(ScaleRegression {
        scales,
        measures: counts,
        slope: line.slope,
        intercept: line.intercept,
        slope_ci_halfwidth: half,
    });
    Ok(bound)
}

/// Rescaled range of one window, `None` when its variance is zero.
fn rescaled_range(window: &[f64]) -> Option<f64> {
    let n = window.len() as f64;
    let mean = window.iter().sum::<f64>() / n;
    let (mut cum, mut lo, mut hi, mut ss) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for v in window {
        let d = v - mean;
        cum += d;
        lo = lo.min(cum);
        hi = hi.max(cum);
        ss += d * d;
    }
    let sd = (ss / n).sqrt();
    (sd > 1e-12 * (1.0 + mean.abs())).then(|| (hi - lo) / sd)
}

pub const MIN_RS_WINDOW: usize = 8;

/// Hurst exponent by rescaled-range analysis over adjacent windows of
/// geometrically spaced lengths in `[min_window, max_window]`. The series is
/// taken as given: pass increments, not a cumulated path, for a random walk.
pub fn hurst_rescaled_range(series: &[f64], min_window: usize, max_window: usize) -> Result<FractalBound, FractalError> {
    rescaled_range_fit(series, min_window, max_window, false)
}

/// Like [`hurst_rescaled_range`], but each window's mean R/S is divided by
/// its Anis–Lloyd–Peters expectation under independence before the fit, so
/// H = 0.5 + slope. Removes the upward small-window bias of the raw slope.
pub fn hurst_rescaled_range_corrected(series: &[f64], min_window: usize, max_window: usize) -> Result<FractalBound, FractalError> {
    rescaled_range_fit(series, min_window, max_window, true)
}

/// Expected R/S of `n` independent Gaussian draws.
pub fn expected_rescaled_range(n: usize) -> f64 {
    let nf = n as f64;
    let ratio = if n <= 340 {
        (ln_gamma((nf - 1.0) / 2.0) - ln_gamma(nf / 2.0)).exp() / std::f64::consts::PI.sqrt()
    } else {
        1.0 / (nf * std::f64::consts::FRAC_PI_2).sqrt()
    };
    let sum: f64 = (1..n).map(|i| ((nf - i as f64) / i as f64).sqrt()).sum();
    (nf - 0.5) / nf * ratio * sum
}

fn rescaled_range_fit(series: &[f64], min_window: usize, max_window: usize, corrected: bool) -> Result<FractalBound, FractalError> {
    let len = series.len();
    if min_window < MIN_RS_WINDOW || max_window < min_window || len < 2 * max_window {
        return Err(FractalError::BadWindows { min: min_window, max: max_window, len });
    }
    check_finite(series)?;
    let mut windows: Vec<usize> = Vec::new();
    let steps = ((max_window as f64 / min_window as f64).log2() * 2.0).round().max(3.0) as usize;
    for s in 0..=steps {
        let w = (min_window as f64 * (max_window as f64 / min_window as f64).powf(s as f64 / steps as f64)).round() as usize;
        if windows.last() != Some(&w) {
            windows.push(w);
        }
    }
    let (mut xs, mut ys, mut used, mut measures) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for &w in &windows {
        let stats: Vec<f64> = series.chunks_exact(w).filter_map(rescaled_range).collect();
        if stats.is_empty() {
            continue;
        }
        let mut rs = stats.iter().sum::<f64>() / stats.len() as f64;
        if corrected {
            rs *= (w as f64).sqrt() / expected_rescaled_range(w);
        }
        used.push(w as f64);
        measures.push(rs);
        xs.push((w as f64).ln());
        ys.push(rs.ln());
    }
    if xs.len() < 2 {
        return Err(FractalError::AllWindowsDegenerate);
    }
    let line = fit_line(&xs, &ys).ok_or(FractalError::Regression)?;
    let half = line.slope_ci_halfwidth(xs.len());
    let h = line.slope;
    let mut bound = FractalBound::clamped(hurst_to_dimension(h), half, BoundKind::ExPost, Method::RescaledRange);
    bound.hurst = Some(h);
    bound.regression = Some(ScaleRegression { scales: used, measures, slope: h, intercept: line.intercept, slope_ci_halfwidth: half });
    Ok(bound)
}

/// Graph dimension of a series with Hurst exponent `h`.
pub fn hurst_to_dimension(h: f64) -> f64 {
    2.0 - h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExAnteModel {
    Brownian,
    LinearTrend,
}

impl std::str::FromStr for ExAnteModel {
    type Err = FractalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "brownian" => Ok(Self::Brownian),
            "linear_trend" | "linear" => Ok(Self::LinearTrend),
            other => Err(FractalError::UnknownModel(other.to_string())),
        }
    }
}

/// Model-implied dimension interval.
pub fn ex_ante_bound(model: ExAnteModel) -> FractalBound {
    let (lower, point, upper) = match model {
        ExAnteModel::Brownian => (1.45, 1.5, 1.55),
        ExAnteModel::LinearTrend => (1.0, 1.0, 1.05),
    };
    FractalBound { lower, point, upper, kind: BoundKind::ExAnte, method: Method::Model, hurst: None, regression: None }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "verdict", content = "fraction")]
pub enum Indexing {
    /// The Ex Post point lies inside the Ex Ante interval.
    Consistent,
    /// The intervals are disjoint.
    Inconsistent,
    /// The point is outside but the intervals intersect.
    Overlap(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndexingPower {
    pub verdict: Indexing,
    /// Length of the interval intersection over the Ex Post interval length.
    pub overlap: f64,
}

pub fn indexing_power(ex_ante: &FractalBound, ex_post: &FractalBound) -> IndexingPower {
    let lo = ex_ante.lower.max(ex_post.lower);
    let hi = ex_ante.upper.min(ex_post.upper);
    let post_width = ex_post.width();
    let overlap = if post_width > 0.0 {
        ((hi - lo).max(0.0) / post_width).min(1.0)
    } else if ex_ante.contains(ex_post.point) {
        1.0
    } else {
        0.0
    };
    let verdict = if ex_ante.contains(ex_post.point) {
        Indexing::Consistent
    } else if hi >= lo && overlap > 0.0 {
        Indexing::Overlap(overlap)
    } else {
        Indexing::Inconsistent
    };
    IndexingPower { verdict, overlap }
}

/// 0/1 coding of a series against its median (1 strictly above).
pub fn jump_code(series: &[f64]) -> Vec<f64> {
    if series.is_empty() {
        return Vec::new();
    }
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
    series.iter().map(|&v| if v > median { 1.0 } else { 0.0 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_line_has_dimension_one() {
        let line: Vec<f64> = (0..1024).map(|k| k as f64 / 1023.0).collect();
        let b = box_counting_dimension(&line, 6).unwrap();
        assert!((b.point - 1.0).abs() <= 0.05, "{b:?}");
        assert!(b.lower <= b.point && b.point <= b.upper);
    }

    #[test]
    fn constant_series_is_exactly_one() {
        let b = box_counting_dimension(&[3.0; 64], 4).unwrap();
        assert_eq!((b.lower, b.point, b.upper), (1.0, 1.0, 1.0));
    }

    #[test]
    fn box_counting_preconditions() {
        assert_eq!(box_counting_dimension(&[1.0; 8], 4), Err(FractalError::TooFewPoints { needed: 16, found: 8 }));
        let s: Vec<f64> = (0..64).map(|k| (k as f64).sin()).collect();
        assert_eq!(box_counting_dimension(&s, 3), Err(FractalError::TooFewScales(3)));
        assert!(matches!(box_counting_dimension(&s, 8), Err(FractalError::ScalesExceedData { .. })));
    }

    #[test]
    fn box_counts_of_a_diagonal() {
        // the diagonal meets 2 boxes per column except where it passes
        // exactly through a corner
        let diag: Vec<f64> = (0..=64).map(|k| k as f64 / 64.0).collect();
        let n = count_boxes(&diag, 0.25, BoxRule::Grid);
        assert!((4.0..=8.0).contains(&n), "{n}");
        assert!((count_boxes(&diag, 0.25, BoxRule::Extent) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn expected_rs_small_windows() {
        // E[R/S] for n = 2 is (1.5/2)·Γ(1/2)/(√π·Γ(1))·1 = 0.75
        assert!((expected_rescaled_range(2) - 0.75).abs() < 1e-12);
        let big = expected_rescaled_range(4096) / (4096f64 * std::f64::consts::FRAC_PI_2).sqrt();
        assert!((big - 1.0).abs() < 0.02, "{big}");
    }

    #[test]
    fn ramp_is_fully_persistent() {
        let ramp: Vec<f64> = (0..4096).map(|k| k as f64).collect();
        let b = hurst_rescaled_range(&ramp, 8, 512).unwrap();
        assert!(b.hurst.unwrap() >= 0.9, "{b:?}");
    }

    #[test]
    fn rs_preconditions() {
        let s = vec![1.0; 100];
        assert!(matches!(hurst_rescaled_range(&s, 4, 16), Err(FractalError::BadWindows { .. })));
        assert!(matches!(hurst_rescaled_range(&s, 8, 64), Err(FractalError::BadWindows { .. })));
        assert_eq!(hurst_rescaled_range(&s, 8, 32), Err(FractalError::AllWindowsDegenerate));
    }

    #[test]
    fn dimension_from_hurst() {
        assert_eq!(hurst_to_dimension(0.5), 1.5);
    }

    #[test]
    fn ex_ante_points() {
        assert_eq!(ex_ante_bound(ExAnteModel::Brownian).point, 1.5);
        assert_eq!(ex_ante_bound(ExAnteModel::LinearTrend).point, 1.0);
        assert!("fbm".parse::<ExAnteModel>().is_err());
    }

    #[test]
    fn indexing_cases() {
        let a = ex_ante_bound(ExAnteModel::Brownian);
        let same = indexing_power(&a, &a);
        assert_eq!(same.verdict, Indexing::Consistent);
        assert_eq!(same.overlap, 1.0);

        let far = FractalBound { lower: 1.8, point: 1.85, upper: 1.9, ..a.clone() };
        let r = indexing_power(&a, &far);
        assert_eq!(r.verdict, Indexing::Inconsistent);
        assert_eq!(r.overlap, 0.0);

        // intersection [1.45, 1.55] over post width 0.16
        let post = FractalBound { lower: 1.40, point: 1.48, upper: 1.56, kind: BoundKind::ExPost, ..a.clone() };
        let r = indexing_power(&a, &post);
        assert_eq!(r.verdict, Indexing::Consistent);
        assert!((r.overlap - 0.10 / 0.16).abs() < 1e-12);

        let edge = FractalBound { lower: 1.52, point: 1.6, upper: 1.7, ..a.clone() };
        let r = indexing_power(&a, &edge);
        assert!(matches!(r.verdict, Indexing::Overlap(f) if (f - 0.03 / 0.18).abs() < 1e-12));
    }

    #[test]
    fn jump_coding() {
        assert_eq!(jump_code(&[1.0, 5.0, 3.0, 2.0, 4.0]), vec![0.0, 1.0, 0.0, 0.0, 1.0]);
        assert!(jump_code(&[]).is_empty());
    }
}
