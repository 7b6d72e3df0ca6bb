//! Picard majorant sequences for the frontier operator and their
//! convergence certificates.
//!
//! Three bound families are computed for m = 0..M, all in log space so that
//! factorials and large powers never overflow:
//!
//! * factorial product: `K·P·(h|t−t₀|)^m/m! · ∏ⱼ₌₁..ₘ(|y|+jλ) · (|y|+mλ) · e^{c(|y|−mλ)}`
//! * exponential form:  `K·P/√(2(i+d)n) · (h|t−t₀|/m) · (|y|+mλ) · e^{c(|y|−mλ)}`
//! * geometric form:    `K·P/√(2(i+d)n) · [2h|t−t₀|·e·λ·e^{2C(λ)}]^m`
//!
//! with `P = PIB_e(α)` the fitted frontier output at the anchor observation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PicardError {
    #[error("invalid bound parameter: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundVariant {
    FactorialProduct,
    ExponentialForm,
    GeometricForm,
}

impl std::str::FromStr for BoundVariant {
    type Err = PicardError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "factorial" | "factorial_product" => Ok(Self::FactorialProduct),
            "exponential" | "exponential_form" => Ok(Self::ExponentialForm),
            "geometric" | "geometric_form" => Ok(Self::GeometricForm),
            other => Err(PicardError::InvalidParams(format!("unknown variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "m")]
pub enum Verdict {
    ConvergedAt(usize),
    Diverged,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundParams {
    #[serde(rename = "K")]
    pub k: f64,
    pub pib_e_alpha: f64,
    pub h: f64,
    pub t: f64,
    pub t0: f64,
    pub y_norm: f64,
    pub lambda: f64,
    pub c: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub rho: f64,
    pub n_agg: u32,
    pub m_agg: u32,
    #[serde(rename = "E")]
    pub e: f64,
    /// i + d taken from an investigation/development state.
    pub id_sum: f64,
    /// Overrides `C(λ)`; `None` means `C(λ) = c·λ`.
    pub c_of_lambda: Option<f64>,
    /// Reads the mid-expression factor of the exponential form as
    /// `e^{(|y|+mλ)^m}` instead of `(|y|+mλ)`.
    pub exponentiated: bool,
}

impl Default for BoundParams {
    fn default() -> Self {
        Self {
            k: 1.0,
            pib_e_alpha: 1.0,
            h: 0.1,
            t: 1.0,
            t0: 0.0,
            y_norm: 0.5,
            lambda: 0.2,
            c: 0.3,
            l: 0.0,
            rho: 1.0,
            n_agg: 1,
            m_agg: 1,
            e: 0.0,
            id_sum: 1.0,
            c_of_lambda: None,
            exponentiated: false,
        }
    }
}

impl BoundParams {
    pub fn validate(&self) -> Result<(), PicardError> {
        let bad = |what: &str| Err(PicardError::InvalidParams(what.to_string()));
        let all_finite = [self.k, self.pib_e_alpha, self.h, self.t, self.t0, self.y_norm, self.lambda, self.c, self.l, self.rho, self.e, self.id_sum]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return bad("parameters must be finite");
        }
        if !(self.k > 0.0) {
            return bad("K must be positive");
        }
        if !(self.pib_e_alpha > 0.0) {
            return bad("PIB_e(alpha) must be positive");
        }
        if !(self.h > 0.0) {
            return bad("h must be positive");
        }
        if !(self.lambda > 0.0) {
            return bad("lambda must be positive");
        }
        if self.y_norm < 0.0 {
            return bad("|y| must be nonnegative");
        }
        if self.l < 0.0 {
            return bad("L must be nonnegative");
        }
        if !(self.rho > 0.0) {
            return bad("rho must be positive");
        }
        if self.rho + self.e == 0.0 {
            return bad("rho + E must be nonzero");
        }
        Ok(())
    }

    pub fn time_gap(&self) -> f64 {
        (self.t - self.t0).abs()
    }

    pub fn big_c(&self) -> f64 {
        self.c_of_lambda.unwrap_or(self.c * self.lambda)
    }

    /// `2h|t−t₀|·e·λ·e^{2C(λ)}`
    pub fn geometric_ratio(&self) -> f64 {
        2.0 * self.h * self.time_gap() * std::f64::consts::E * self.lambda * (2.0 * self.big_c()).exp()
    }

    fn aggregation(&self) -> Result<f64, PicardError> {
        let a = 2.0 * self.id_sum * self.n_agg as f64;
        if a > 0.0 {
            Ok(a)
        } else {
            Err(PicardError::InvalidParams("2(i+d)n must be positive".into()))
        }
    }

    /// `K·PIB_e(α)/√(2(i+d)n)`
    pub fn aggregated_prefactor(&self) -> Result<f64, PicardError> {
        Ok(self.k * self.pib_e_alpha / self.aggregation()?.sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCertificate {
    pub variant: BoundVariant,
    pub bounds: Vec<f64>,
    pub log_bounds: Vec<f64>,
    pub tolerance: f64,
    pub verdict: Verdict,
    /// First index from which the sequence decreases through the end.
    pub decreasing_from: Option<usize>,
}

fn ln_or_neg_inf(v: f64) -> f64 {
    if v == 0.0 { f64::NEG_INFINITY } else { v.ln() }
}

/// `ln B_m` for m = 0..=max_m.
pub fn log_bounds(params: &BoundParams, variant: BoundVariant, max_m: usize) -> Result<Vec<f64>, PicardError> {
    params.validate()?;
    let ln_gap = ln_or_neg_inf(params.h * params.time_gap());
    let y = params.y_norm;
    let lam = params.lambda;
    let mut out = Vec::with_capacity(max_m + 1);
    match variant {
        BoundVariant::FactorialProduct => {
            let ln_base = (params.k * params.pib_e_alpha).ln();
            let mut ln_running = 0.0; // ln ∏ (|y|+jλ)/j
            for m in 0..=max_m {
                if m > 0 {
                    ln_running += (y + m as f64 * lam).ln() - (m as f64).ln();
                }
                let power = if m == 0 { 0.0 } else { m as f64 * ln_gap };
                let last = ln_or_neg_inf(y + m as f64 * lam);
                out.push(ln_base + power + ln_running + last + params.c * (y - m as f64 * lam));
            }
        }
        BoundVariant::ExponentialForm => {
            let ln_pre = params.aggregated_prefactor()?.ln();
            for m in 0..=max_m {
                let step = if m == 0 { 0.0 } else { ln_gap - (m as f64).ln() };
                let base = y + m as f64 * lam;
                let middle = if params.exponentiated { base.powi(m as i32) } else { ln_or_neg_inf(base) };
                out.push(ln_pre + step + middle + params.c * (y - m as f64 * lam));
            }
        }
        BoundVariant::GeometricForm => {
            let ln_pre = params.aggregated_prefactor()?.ln();
            let ln_ratio = ln_or_neg_inf(params.geometric_ratio());
            for m in 0..=max_m {
                out.push(if m == 0 { ln_pre } else { ln_pre + m as f64 * ln_ratio });
            }
        }
    }
    Ok(out)
}

/// The same sequence computed with plain floating-point products. Overflows
/// to infinity where the log-space route does not.
pub fn direct_bounds(params: &BoundParams, variant: BoundVariant, max_m: usize) -> Result<Vec<f64>, PicardError> {
    params.validate()?;
    let gap = params.h * params.time_gap();
    let y = params.y_norm;
    let lam = params.lambda;
    let mut out = Vec::with_capacity(max_m + 1);
    match variant {
        BoundVariant::FactorialProduct => {
            let mut factorial = 1.0;
            let mut product = 1.0;
            for m in 0..=max_m {
                if m > 0 {
                    factorial *= m as f64;
                    product *= y + m as f64 * lam;
                }
                out.push(
                    params.k * params.pib_e_alpha * gap.powi(m as i32) / factorial * product * (y + m as f64 * lam)
                        * (params.c * (y - m as f64 * lam)).exp(),
                );
            }
        }
        BoundVariant::ExponentialForm => {
            let pre = params.aggregated_prefactor()?;
            for m in 0..=max_m {
                let step = if m == 0 { 1.0 } else { gap / m as f64 };
                let base = y + m as f64 * lam;
                let middle = if params.exponentiated { base.powi(m as i32).exp() } else { base };
                out.push(pre * step * middle * (params.c * (y - m as f64 * lam)).exp());
            }
        }
        BoundVariant::GeometricForm => {
            let pre = params.aggregated_prefactor()?;
            let r = params.geometric_ratio();
            for m in 0..=max_m {
                out.push(pre * r.powi(m as i32));
            }
        }
    }
    Ok(out)
}

const RATIO_SLACK: f64 = 1e-12;

fn verdict_for(log_b: &[f64], tolerance: f64) -> Verdict {
    let last = log_b.len() - 1;
    let ln_tol = tolerance.ln();
    let ratio_at_least_one = |m: usize| log_b[m + 1] - log_b[m] >= -RATIO_SLACK;
    let grows = last >= 3 && log_b[last] > log_b[0] + RATIO_SLACK && (last - 3..last).all(ratio_at_least_one);
    if grows {
        return Verdict::Diverged;
    }
    // the m = 0 term is the starting bound, not an iterate
    match (1..=last).find(|&m| log_b[m] < ln_tol) {
        Some(m) => Verdict::ConvergedAt(m),
        None => Verdict::Inconclusive,
    }
}

fn decreasing_from(log_b: &[f64]) -> Option<usize> {
    let last = log_b.len().checked_sub(1)?;
    if last == 0 {
        return None;
    }
    let mut start = last;
    while start > 0 && log_b[start] < log_b[start - 1] {
        start -= 1;
    }
    (start < last).then_some(start)
}

/// Bound sequence B₀..B_M and its convergence verdict at `tolerance`.
///
/// Converged at `m` when `m ≥ 1` is the first index with `B_m < tolerance`;
/// diverged when `B_M > B₀` and the last three ratios are all ≥ 1 (checked
/// first); inconclusive otherwise.
pub fn bound_sequence(params: &BoundParams, variant: BoundVariant, max_m: usize, tolerance: f64) -> Result<BoundCertificate, PicardError> {
    if !(tolerance > 0.0) {
        return Err(PicardError::InvalidParams("tolerance must be positive".into()));
    }
    let log_b = log_bounds(params, variant, max_m)?;
    let bounds = log_b.iter().map(|v| v.exp()).collect();
    Ok(BoundCertificate {
        variant,
        verdict: if max_m == 0 { Verdict::Inconclusive } else { verdict_for(&log_b, tolerance) },
        decreasing_from: decreasing_from(&log_b),
        bounds,
        log_bounds: log_b,
        tolerance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EfficiencyInterval {
    /// `|t−t₀|^m/m! · P · min(|y|+ρ+L, |y|) + ρ`, the I line.
    pub i_line: f64,
    /// `|t−t₀|^m/m! · P · min(|y|+L, |y|+ρ)`, the I+D line.
    pub id_line: f64,
    /// `P · (1/(ρ+E) + 2(i+d)n + 2(i+d)m)`, the D line.
    pub d_line: f64,
}

impl EfficiencyInterval {
    pub fn low(&self) -> f64 {
        self.i_line.min(self.d_line)
    }

    pub fn high(&self) -> f64 {
        self.i_line.max(self.d_line)
    }

    pub fn brackets(&self) -> bool {
        self.low() <= self.id_line && self.id_line <= self.high()
    }
}

/// Evaluates the three efficiency lines with `∧` read as minimum and using
/// `m_agg` for the power of the time gap.
pub fn efficiency_interval(params: &BoundParams) -> Result<EfficiencyInterval, PicardError> {
    params.validate()?;
    let m = params.m_agg as i32;
    let ln_fact: f64 = (1..=params.m_agg).map(|j| (j as f64).ln()).sum();
    let time_factor = params.time_gap().powi(m) / ln_fact.exp();
    let p = params.pib_e_alpha;
    let y = params.y_norm;
    let id_line = time_factor * p * (y + params.l).min(y + params.rho);
    let i_line = time_factor * p * ((y + params.rho + params.l).min(y) + params.rho);
    let agg = 2.0 * params.id_sum;
    let d_line = p * (1.0 / (params.rho + params.e) + agg * params.n_agg as f64 + agg * params.m_agg as f64);
    Ok(EfficiencyInterval { i_line, id_line, d_line })
}
