//! Stochastic production frontiers.
//!
//! The composed-error model is `y = Xβ + v − u` with `v ~ N(0, σᵥ²)` and a
//! one-sided inefficiency term `u ≥ 0` (half-normal or exponential). The
//! parameters are estimated by maximum likelihood over
//! `(β, ln σᵥ², ln σᵤ²)` with a simplex search started at OLS, and each
//! observation gets a technical-efficiency score `exp(−E[u | ε])`.
//!
//! [`fit_quantile`] provides the probabilistic alternative: a linear
//! surface with a prescribed share of observations on or above it.

mod quantile;

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{central_moments, has_full_column_rank, inverse_mills, least_squares, ln_norm_cdf, ln_norm_pdf};
use crate::optim::{compass_polish, nelder_mead, NelderMeadOptions};
use crate::panel::{Panel, PanelCell, PanelError, PanelSeries};

pub use quantile::{fit_quantile, QuantileFrontier};
pub(crate) use quantile::weighted_lad;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("frontier needs at least one regressor")]
    NoRegressors,
    #[error("design has {found} columns but the spec lists {expected} regressors")]
    ColumnMismatch { expected: usize, found: usize },
    #[error("{rows} observation rows but {outputs} outputs")]
    LengthMismatch { rows: usize, outputs: usize },
    #[error("need at least {needed} observations, found {found}")]
    TooFewObservations { needed: usize, found: usize },
    #[error("non-finite value in observation {0}")]
    NonFinite(usize),
    #[error("log transform requires positive data; observation {0} is not")]
    NonPositive(usize),
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("quantile {0} is outside (0, 1)")]
    InvalidQuantile(f64),
    #[error("optimizer did not converge after {evals} evaluations")]
    NotConverged { evals: usize, best: Box<FrontierFit> },
    #[error("linear program did not terminate")]
    LinearProgram,
    #[error(transparent)]
    Panel(#[from] PanelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EfficiencyDistribution {
    HalfNormal,
    Exponential,
}

impl std::str::FromStr for EfficiencyDistribution {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "half_normal" | "half-normal" => Ok(Self::HalfNormal),
            "exponential" => Ok(Self::Exponential),
            other => Err(format!("unknown efficiency distribution {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierSpec {
    pub inputs: Vec<String>,
    pub log_transform: bool,
    pub efficiency_distribution: EfficiencyDistribution,
}

impl FrontierSpec {
    /// Cobb-Douglas half-normal frontier over the named regressors.
    pub fn new<S: Into<String>>(inputs: impl IntoIterator<Item = S>) -> Self {
        Self {
            inputs: inputs.into_iter().map(Into::into).collect(),
            log_transform: true,
            efficiency_distribution: EfficiencyDistribution::HalfNormal,
        }
    }

    pub fn with_log_transform(mut self, on: bool) -> Self {
        self.log_transform = on;
        self
    }

    pub fn with_distribution(mut self, dist: EfficiencyDistribution) -> Self {
        self.efficiency_distribution = dist;
        self
    }

    pub fn coefficient_count(&self) -> usize {
        self.inputs.len() + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierFit {
    pub distribution: EfficiencyDistribution,
    pub log_transform: bool,
    /// Intercept first, then one coefficient per regressor.
    pub beta: Vec<f64>,
    pub sigma_v: f64,
    pub sigma_u: f64,
    pub loglik: f64,
    /// Log-likelihood at the OLS / method-of-moments starting point.
    pub start_loglik: f64,
    pub efficiency: Vec<f64>,
    /// Composed residuals `y − Xβ` on the model scale.
    pub residuals: Vec<f64>,
    /// Fitted frontier `Xβ` on the model scale.
    pub frontier: Vec<f64>,
    /// The OLS residuals had non-negative skew, so the maximum sits on the
    /// σᵤ = 0 boundary and the fit is plain least squares.
    pub boundary: bool,
    pub evals: usize,
}

impl FrontierFit {
    pub fn len(&self) -> usize {
        self.efficiency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.efficiency.is_empty()
    }

    /// Frontier output for observation `i` in the data's original units.
    pub fn frontier_output(&self, i: usize) -> f64 {
        if self.log_transform {
            self.frontier[i].exp()
        } else {
            self.frontier[i]
        }
    }
}

/// Validated, transformed design: intercept column plus regressors.
struct Design {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

fn prepare(spec: &FrontierSpec, x: &DMatrix<f64>, y: &[f64]) -> Result<Design, FitError> {
    if spec.inputs.is_empty() {
        return Err(FitError::NoRegressors);
    }
    if x.ncols() != spec.inputs.len() {
        return Err(FitError::ColumnMismatch { expected: spec.inputs.len(), found: x.ncols() });
    }
    let n = x.nrows();
    if y.len() != n {
        return Err(FitError::LengthMismatch { rows: n, outputs: y.len() });
    }
    let needed = spec.coefficient_count() + 2;
    if n < needed {
        return Err(FitError::TooFewObservations { needed, found: n });
    }
    let transform = |v: f64, i: usize| -> Result<f64, FitError> {
        if !v.is_finite() {
            return Err(FitError::NonFinite(i));
        }
        if spec.log_transform {
            if v <= 0.0 {
                return Err(FitError::NonPositive(i));
            }
            Ok(v.ln())
        } else {
            Ok(v)
        }
    };
    let mut design = DMatrix::from_element(n, spec.coefficient_count(), 1.0);
    let mut out = DVector::zeros(n);
    for i in 0..n {
        out[i] = transform(y[i], i)?;
        for j in 0..x.ncols() {
            design[(i, j + 1)] = transform(x[(i, j)], i)?;
        }
    }
    if !has_full_column_rank(&design) {
        return Err(FitError::RankDeficient);
    }
    Ok(Design { x: design, y: out })
}

/// Per-observation log-likelihood contributions summed, for residuals `eps`.
fn composed_loglik(dist: EfficiencyDistribution, eps: &[f64], sigma_v: f64, sigma_u: f64) -> f64 {
    match dist {
        EfficiencyDistribution::HalfNormal => {
            let sigma = sigma_v.hypot(sigma_u);
            let lambda = sigma_u / sigma_v;
            let ln_sigma = sigma.ln();
            eps.iter()
                .map(|&e| {
                    std::f64::consts::LN_2 - ln_sigma + ln_norm_pdf(e / sigma) + ln_norm_cdf(-e * lambda / sigma)
                })
                .sum()
        }
        EfficiencyDistribution::Exponential => {
            let ln_su = sigma_u.ln();
            let ratio = sigma_v / sigma_u;
            eps.iter()
                .map(|&e| -ln_su + 0.5 * ratio * ratio + e / sigma_u + ln_norm_cdf(-e / sigma_v - ratio))
                .sum()
        }
    }
}

fn gaussian_loglik(eps: &[f64], sigma_v: f64) -> f64 {
    let ln_s = sigma_v.ln();
    eps.iter().map(|&e| ln_norm_pdf(e / sigma_v) - ln_s).sum()
}

/// Conditional mean of the inefficiency given the composed residual.
pub fn conditional_inefficiency(dist: EfficiencyDistribution, eps: f64, sigma_v: f64, sigma_u: f64) -> f64 {
    if sigma_u == 0.0 {
        return 0.0;
    }
    let cond = match dist {
        EfficiencyDistribution::HalfNormal => {
            let s2 = sigma_v * sigma_v + sigma_u * sigma_u;
            let mu_star = -eps * sigma_u * sigma_u / s2;
            let sigma_star = sigma_u * sigma_v / s2.sqrt();
            mu_star + sigma_star * inverse_mills(mu_star / sigma_star)
        }
        EfficiencyDistribution::Exponential => {
            let mu = -eps - sigma_v * sigma_v / sigma_u;
            mu + sigma_v * inverse_mills(mu / sigma_v)
        }
    };
    cond.max(0.0)
}

fn efficiency_score(dist: EfficiencyDistribution, eps: f64, sigma_v: f64, sigma_u: f64) -> f64 {
    (-conditional_inefficiency(dist, eps, sigma_v, sigma_u)).exp().clamp(f64::MIN_POSITIVE, 1.0)
}

fn residuals(design: &Design, beta: &[f64]) -> Vec<f64> {
    let b = DVector::from_column_slice(beta);
    (&design.y - &design.x * b).iter().copied().collect()
}

/// Composed-error log-likelihood at `beta`, `sigma_v`, `sigma_u` for data
/// already on the model scale (intercept column included in `x`).
pub fn loglik_at(
    dist: EfficiencyDistribution,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    beta: &[f64],
    sigma_v: f64,
    sigma_u: f64,
) -> f64 {
    let eps: Vec<f64> = (y - x * DVector::from_column_slice(beta)).iter().copied().collect();
    if sigma_u == 0.0 {
        gaussian_loglik(&eps, sigma_v)
    } else {
        composed_loglik(dist, &eps, sigma_v, sigma_u)
    }
}

/// Builds the model-scale design (intercept + transformed regressors) the
/// fit works on; useful for evaluating [`loglik_at`] around a fit.
pub fn model_design(spec: &FrontierSpec, x: &DMatrix<f64>, y: &[f64]) -> Result<(DMatrix<f64>, DVector<f64>), FitError> {
    let d = prepare(spec, x, y)?;
    Ok((d.x, d.y))
}

/// Method-of-moments split of the OLS residual variance. Returns the
/// adjusted intercept shift and `(σᵥ, σᵤ)`.
fn moment_start(dist: EfficiencyDistribution, m2: f64, m3: f64) -> (f64, f64, f64) {
    use std::f64::consts::PI;
    let (su, mean_u, var_u) = match dist {
        EfficiencyDistribution::HalfNormal => {
            let k = (2.0 / PI).sqrt() * (4.0 / PI - 1.0);
            let su = (-m3 / k).cbrt();
            (su, su * (2.0 / PI).sqrt(), (1.0 - 2.0 / PI) * su * su)
        }
        EfficiencyDistribution::Exponential => {
            let su = (-m3 / 2.0).cbrt();
            (su, su, su * su)
        }
    };
    let sv2 = if m2 - var_u > 0.05 * m2 { m2 - var_u } else { 0.05 * m2 };
    let su = if var_u < m2 { su } else { su * (0.95 * m2 / var_u).sqrt() };
    (mean_u, sv2.sqrt(), su)
}

/// Maximum-likelihood composed-error frontier.
///
/// `x` holds one column per regressor named in `spec` (no intercept);
/// `y` is the output. Both are log-transformed first when the spec asks.
pub fn fit_mle(spec: &FrontierSpec, x: &DMatrix<f64>, y: &[f64]) -> Result<FrontierFit, FitError> {
    let design = prepare(spec, x, y)?;
    let dist = spec.efficiency_distribution;
    let n = design.y.len();
    let p = design.x.ncols();
    let ols = least_squares(&design.x, &design.y).ok_or(FitError::RankDeficient)?;
    let ols_beta: Vec<f64> = ols.iter().copied().collect();
    let eps = residuals(&design, &ols_beta);
    let (_, m2, m3) = central_moments(&eps);
    let scale = design.y.iter().map(|v| v.abs()).fold(1.0, f64::max);

    let boundary_fit = |beta: Vec<f64>, eps: Vec<f64>| {
        let sigma_v = m2.sqrt().max(f64::EPSILON * scale);
        let loglik = gaussian_loglik(&eps, sigma_v);
        let frontier = (0..n).map(|i| design.y[i] - eps[i]).collect();
        FrontierFit {
            distribution: dist,
            log_transform: spec.log_transform,
            beta,
            sigma_v,
            sigma_u: 0.0,
            loglik,
            start_loglik: loglik,
            efficiency: vec![1.0; n],
            residuals: eps,
            frontier,
            boundary: true,
            evals: 0,
        }
    };

    // Non-negative third moment: the likelihood is maximized at σᵤ = 0.
    if m2 <= (f64::EPSILON * scale).powi(2) || m3 >= -1e-10 * m2.powf(1.5) {
        return Ok(boundary_fit(ols_beta, eps));
    }

    let (shift, sv0, su0) = moment_start(dist, m2, m3);
    let mut start = ols_beta.clone();
    start[0] += shift;
    start.push((sv0 * sv0).ln());
    start.push((su0 * su0).ln());

    let objective = |theta: &[f64]| -> f64 {
        let sigma_v = (0.5 * theta[p]).exp();
        let sigma_u = (0.5 * theta[p + 1]).exp();
        if !(sigma_v > 0.0 && sigma_u > 0.0 && sigma_v.is_finite() && sigma_u.is_finite()) {
            return f64::INFINITY;
        }
        let eps = residuals(&design, &theta[..p]);
        -composed_loglik(dist, &eps, sigma_v, sigma_u)
    };
    let start_loglik = -objective(&start);

    let opts = NelderMeadOptions { initial_step: 0.05, ..Default::default() };
    let found = nelder_mead(objective, &start, &opts);
    let found = compass_polish(objective, found, 1e-3, 1e-8, 20_000);
    let evals = found.evals;
    let theta = found.x;
    let sigma_v = (0.5 * theta[p]).exp();
    let sigma_u = (0.5 * theta[p + 1]).exp();
    let beta = theta[..p].to_vec();
    let eps = residuals(&design, &beta);
    let mut loglik = -found.value;

    let mut fit = FrontierFit {
        distribution: dist,
        log_transform: spec.log_transform,
        efficiency: eps.iter().map(|&e| efficiency_score(dist, e, sigma_v, sigma_u)).collect(),
        frontier: (0..n).map(|i| design.y[i] - eps[i]).collect(),
        beta,
        sigma_v,
        sigma_u,
        loglik,
        start_loglik,
        residuals: eps,
        boundary: false,
        evals,
    };

    // The σᵤ → 0 limit is the OLS fit; keep it if the interior search ended lower.
    let ols_eps = residuals(&design, &ols_beta);
    let ols_ll = gaussian_loglik(&ols_eps, m2.sqrt());
    if ols_ll > loglik {
        let mut b = boundary_fit(ols_beta, ols_eps);
        b.start_loglik = start_loglik.min(b.loglik);
        b.evals = evals;
        fit = b;
        loglik = fit.loglik;
    }
    debug_assert!(loglik.is_finite());

    if !found.converged {
        return Err(FitError::NotConverged { evals, best: Box::new(fit) });
    }
    Ok(fit)
}

/// Identifies one observation of a pooled panel.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ObsKey {
    pub country_name: String,
    pub code: String,
    pub year: i32,
}

/// Pooled observations joined from an output panel and regressor panels.
#[derive(Debug, Clone)]
pub struct PanelDesign {
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    pub keys: Vec<ObsKey>,
    pub inputs: Vec<String>,
}

impl PanelDesign {
    /// Joins on (code, year), keeping cells present in every panel. When
    /// `positive_only` is set, observations with a non-positive value are
    /// dropped as well (needed before a log transform).
    pub fn from_panels(output: &Panel, inputs: &[&Panel], positive_only: bool) -> Self {
        let keep = |v: f64| !positive_only || v > 0.0;
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        let mut keys = Vec::new();
        for s in output.series() {
            for (year, cell) in s.years().iter().zip(s.cells()) {
                let Some(yv) = cell.get().filter(|&v| keep(v)) else { continue };
                let xs: Option<Vec<f64>> = inputs
                    .iter()
                    .map(|p| p.get(s.code()).and_then(|r| r.cell(*year)).and_then(PanelCell::get).filter(|&v| keep(v)))
                    .collect();
                if let Some(xs) = xs {
                    rows.extend(xs);
                    ys.push(yv);
                    keys.push(ObsKey { country_name: s.country_name().to_string(), code: s.code().to_string(), year: *year });
                }
            }
        }
        let x = DMatrix::from_row_slice(ys.len(), inputs.len(), &rows);
        Self { x, y: ys, keys, inputs: inputs.iter().map(|p| p.indicator_name().to_string()).collect() }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Observed efficiency scores followed by scores of composed residuals
/// resampled with replacement, `len` values in total. Stands in for a long
/// efficiency path when the panel itself is too short for scale analysis.
pub fn bootstrap_efficiency_path(fit: &FrontierFit, len: usize, seed: u64) -> Vec<f64> {
    let mut path: Vec<f64> = fit.efficiency.iter().copied().take(len).collect();
    if fit.residuals.is_empty() {
        return path;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while path.len() < len {
        let eps = fit.residuals[rng.random_range(0..fit.residuals.len())];
        path.push(efficiency_score(fit.distribution, eps, fit.sigma_v, fit.sigma_u));
    }
    path
}

/// Reshapes observation-level scores into one series per country, in order
/// of first appearance, each over the years that country was observed.
pub fn efficiency_scores(fit: &FrontierFit, keys: &[ObsKey]) -> Result<Vec<PanelSeries>, FitError> {
    if keys.len() != fit.efficiency.len() {
        return Err(FitError::LengthMismatch { rows: keys.len(), outputs: fit.efficiency.len() });
    }
    let mut order: Vec<&str> = Vec::new();
    let mut grouped: HashMap<&str, (&str, Vec<(i32, f64)>)> = HashMap::new();
    for (k, &e) in keys.iter().zip(&fit.efficiency) {
        let entry = grouped.entry(k.code.as_str()).or_insert_with(|| {
            order.push(k.code.as_str());
            (k.country_name.as_str(), Vec::new())
        });
        entry.1.push((k.year, e));
    }
    order
        .into_iter()
        .map(|code| {
            let (name, mut obs) = grouped.remove(code).expect("grouped above");
            obs.sort_by_key(|(y, _)| *y);
            let years = obs.iter().map(|(y, _)| *y).collect();
            let values: Vec<Option<f64>> = obs.iter().map(|(_, e)| Some(*e)).collect();
            PanelSeries::from_values(name, code, years, &values).map_err(FitError::from)
        })
        .collect()
}
