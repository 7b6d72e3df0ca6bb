//! Weighted Lp distances between sampled curves and Lp polynomial
//! approximation bounds.
//!
//! Curves live on a shared uniform grid with an odd number of nodes and are
//! integrated with composite Simpson. A Möbius change of variable
//! `θ₁ = (aθ + b)/(cθ + d)` enters the integral through `|dθ₁/dθ|`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::frontier::weighted_lad;
use crate::numerics::{least_squares, weighted_least_squares};

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("grid needs an odd number of at least 3 nodes, got {0}")]
    BadGrid(usize),
    #[error("curves have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("integration range [{0}, {1}] is empty")]
    EmptyRange(f64, f64),
    #[error("exponent p = {0} must be a finite value >= 1")]
    BadExponent(f64),
    #[error("non-finite sample at node {0}")]
    NonFinite(usize),
    #[error("Möbius transform is degenerate (ad - bc = 0)")]
    DegenerateMobius,
    #[error("Möbius weight has a pole at θ = {0} inside the integration range")]
    Pole(f64),
    #[error("degree {degree} needs at least {} grid nodes, got {nodes}", degree + 1)]
    DegreeTooHigh { degree: usize, nodes: usize },
    #[error("reweighted least squares did not converge in {iterations} iterations (last error {last_error})")]
    NotConverged { iterations: usize, last_error: f64 },
    #[error("candidate error {lambda} is below the best polynomial error {achieved}; the candidate is not a degree-{degree} polynomial")]
    BoundViolated { degree: usize, lambda: f64, achieved: f64 },
}

/// Default upper integration limit: Euler's number.
pub const DEFAULT_THETA_HI: f64 = std::f64::consts::E;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    pub lo: f64,
    pub hi: f64,
    pub nodes: usize,
}

impl UniformGrid {
    pub fn new(lo: f64, hi: f64, nodes: usize) -> Result<Self, LpError> {
        if nodes < 3 || nodes % 2 == 0 {
            return Err(LpError::BadGrid(nodes));
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(LpError::EmptyRange(lo, hi));
        }
        Ok(Self { lo, hi, nodes })
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.nodes - 1) as f64
    }

    pub fn theta(&self, k: usize) -> f64 {
        if k == self.nodes - 1 {
            self.hi
        } else {
            self.lo + k as f64 * self.step()
        }
    }

    pub fn thetas(&self) -> Vec<f64> {
        (0..self.nodes).map(|k| self.theta(k)).collect()
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.nodes).map(|k| f(self.theta(k))).collect()
    }

    /// Composite Simpson weights.
    pub fn simpson_weights(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.nodes)
            .map(|k| {
                let m = if k == 0 || k == self.nodes - 1 {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                m * h / 3.0
            })
            .collect()
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.simpson_weights().iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePair {
    pub grid: UniformGrid,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub p: f64,
}

fn check_exponent(p: f64) -> Result<(), LpError> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(LpError::BadExponent(p))
    }
}

fn check_samples(grid: &UniformGrid, v: &[f64]) -> Result<(), LpError> {
    if v.len() != grid.nodes {
        return Err(LpError::LengthMismatch(grid.nodes, v.len()));
    }
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(LpError::NonFinite(i)),
        None => Ok(()),
    }
}

impl CurvePair {
    pub fn new(lo: f64, hi: f64, f: Vec<f64>, g: Vec<f64>, p: f64) -> Result<Self, LpError> {
        if f.len() != g.len() {
            return Err(LpError::LengthMismatch(f.len(), g.len()));
        }
        let grid = UniformGrid::new(lo, hi, f.len())?;
        check_exponent(p)?;
        check_samples(&grid, &f)?;
        check_samples(&grid, &g)?;
        Ok(Self { grid, f, g, p })
    }

    pub fn from_fns(grid: UniformGrid, f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64, p: f64) -> Result<Self, LpError> {
        Self::new(grid.lo, grid.hi, grid.sample(f), grid.sample(g), p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianMode {
    /// `|dθ₁/dθ|`
    #[default]
    Forward,
    /// `|dθ/dθ₁|`, the reciprocal reading of the measure.
    Reciprocal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MobiusWeight {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub mode: JacobianMode,
}

impl MobiusWeight {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self, LpError> {
        if a * d - b * c == 0.0 {
            return Err(LpError::DegenerateMobius);
        }
        Ok(Self { a, b, c, d, mode: JacobianMode::Forward })
    }

    pub fn reciprocal(mut self) -> Self {
        self.mode = JacobianMode::Reciprocal;
        self
    }

    pub fn transform(&self, theta: f64) -> f64 {
        (self.a * theta + self.b) / (self.c * theta + self.d)
    }

    /// `(ad − bc)/(cθ + d)²`
    pub fn jacobian(&self, theta: f64) -> f64 {
        let den = self.c * theta + self.d;
        (self.a * self.d - self.b * self.c) / (den * den)
    }

    fn weight(&self, theta: f64) -> f64 {
        let j = self.jacobian(theta).abs();
        match self.mode {
            JacobianMode::Forward => j,
            JacobianMode::Reciprocal => 1.0 / j,
        }
    }

    /// Rejects transforms whose denominator vanishes on `[lo, hi]`.
    pub fn check_range(&self, lo: f64, hi: f64) -> Result<(), LpError> {
        if self.c == 0.0 {
            return if self.d == 0.0 { Err(LpError::DegenerateMobius) } else { Ok(()) };
        }
        let root = -self.d / self.c;
        if (lo..=hi).contains(&root) {
            Err(LpError::Pole(root))
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Weight {
    #[default]
    Identity,
    Mobius(MobiusWeight),
}

/// `(∫ |f − g|^p · |w(θ)| dθ)^(1/p)` by composite Simpson.
pub fn lp_distance(pair: &CurvePair, weight: &Weight) -> Result<f64, LpError> {
    check_exponent(pair.p)?;
    let thetas = pair.grid.thetas();
    let w: Vec<f64> = match weight {
        Weight::Identity => vec![1.0; thetas.len()],
        Weight::Mobius(m) => {
            if m.a * m.d - m.b * m.c == 0.0 {
                return Err(LpError::DegenerateMobius);
            }
            m.check_range(pair.grid.lo, pair.grid.hi)?;
            thetas.iter().map(|&t| m.weight(t)).collect()
        }
    };
    let integrand: Vec<f64> = pair
        .f
        .iter()
        .zip(&pair.g)
        .zip(&w)
        .map(|((f, g), w)| (f - g).abs().powf(pair.p) * w)
        .collect();
    Ok(pair.grid.integrate(&integrand).max(0.0).powf(1.0 / pair.p))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestApproxBound {
    pub degree: usize,
    /// Lp error of the supplied candidate.
    pub lambda: f64,
    /// Lp error of the best degree-`degree` polynomial found.
    pub achieved_error: f64,
    /// Coefficients in the normalized variable `s = 2(θ − lo)/(hi − lo) − 1`,
    /// constant term first.
    pub coefficients: Vec<f64>,
    pub iterations: usize,
}

fn vandermonde(grid: &UniformGrid, degree: usize) -> DMatrix<f64> {
    let span = grid.hi - grid.lo;
    DMatrix::from_fn(grid.nodes, degree + 1, |k, j| {
        let s = 2.0 * (grid.theta(k) - grid.lo) / span - 1.0;
        s.powi(j as i32)
    })
}

/// Lp error `(∫ |f − x|^p dθ)^(1/p)` of two sampled curves.
pub fn lp_error(grid: &UniformGrid, f: &[f64], x: &[f64], p: f64) -> f64 {
    let integrand: Vec<f64> = f.iter().zip(x).map(|(a, b)| (a - b).abs().powf(p)).collect();
    grid.integrate(&integrand).max(0.0).powf(1.0 / p)
}

pub const IRLS_MAX_ITERATIONS: usize = 100;
const IRLS_DAMPING: f64 = 0.5;
const IRLS_REL_TOL: f64 = 1e-9;
const IRLS_EPS_SHRINK: f64 = 0.5;
const IRLS_FLOOR: f64 = 1e-6;

/// Best-approximation bound: `lambda` is the candidate's Lp error and
/// `achieved_error` the error of the least-pth-power polynomial of the given
/// degree. Plain least squares is exact for `p = 2` and a weighted
/// least-absolute-deviations LP is exact for `p = 1`; other exponents use
/// damped iteratively reweighted least squares.
///
/// The inequality `achieved_error ≤ lambda` is a theorem only when the
/// candidate is itself a polynomial of at most that degree; a violation is
/// reported as [`LpError::BoundViolated`].
pub fn best_poly_bound(
    grid: &UniformGrid,
    f: &[f64],
    degree: usize,
    p: f64,
    candidate: &[f64],
) -> Result<BestApproxBound, LpError> {
    check_exponent(p)?;
    check_samples(grid, f)?;
    check_samples(grid, candidate)?;
    if degree + 1 > grid.nodes {
        return Err(LpError::DegreeTooHigh { degree, nodes: grid.nodes });
    }
    let v = vandermonde(grid, degree);
    let weights = grid.simpson_weights();
    let fv = DVector::from_column_slice(f);
    let objective = |c: &DVector<f64>| -> f64 {
        let fitted = &v * c;
        lp_error(grid, f, fitted.as_slice(), p)
    };

    let mut coeffs = weighted_least_squares(&v, &fv, &weights).ok_or(LpError::DegreeTooHigh { degree, nodes: grid.nodes })?;
    let mut best_err = objective(&coeffs);
    let mut best = coeffs.clone();
    let mut iterations = 0;

    let l1 = if p < 2.0 { weighted_lad(&v, f, &weights).ok().map(DVector::from_vec) } else { None };
    if let Some(c) = &l1 {
        let err = objective(c);
        if err < best_err {
            best_err = err;
            best = c.clone();
            coeffs = c.clone();
        }
    }
    let exact = p == 2.0 || (p == 1.0 && l1.is_some());
    if !exact && best_err > 0.0 {
        // Smoothing for small residuals starts at the residual scale and shrinks
        // to a relative floor, so p < 2 weights do not freeze the iterate.
        let scale = (&fv - &v * &coeffs).amax();
        let negligible = 1e-13 * fv.amax();
        let floor = if p < 2.0 { IRLS_FLOOR * scale.max(f64::MIN_POSITIVE) } else { 0.0 };
        let mut eps = if p < 2.0 { scale.max(floor) } else { 0.0 };
        let mut prev = best_err;
        let mut converged = false;
        while iterations < IRLS_MAX_ITERATIONS {
            iterations += 1;
            let resid = &fv - &v * &coeffs;
            let w: Vec<f64> = resid
                .iter()
                .zip(&weights)
                .map(|(r, q)| q * r.abs().max(eps).powf(p - 2.0))
                .collect();
            let Some(target) = weighted_least_squares(&v, &fv, &w) else { break };
            coeffs = &coeffs * (1.0 - IRLS_DAMPING) + target * IRLS_DAMPING;
            eps = (eps * IRLS_EPS_SHRINK).max(floor);
            let err = objective(&coeffs);
            if err < best_err {
                best_err = err;
                best = coeffs.clone();
            }
            if err <= negligible || (eps == floor && (prev - err).abs() <= IRLS_REL_TOL * prev.max(1e-300)) {
                converged = true;
                break;
            }
            prev = err;
        }
        if !converged {
            return Err(LpError::NotConverged { iterations, last_error: best_err });
        }
    }

    // Any polynomial the candidate already is bounds the optimum too.
    if let Some(proj) = least_squares(&v, &DVector::from_column_slice(candidate)) {
        let e = objective(&proj);
        if e < best_err {
            best_err = e;
            best = proj;
        }
    }

    let lambda = lp_error(grid, f, candidate, p);
    // Both errors are quadrature sums of the same kind; allow rounding slack.
    if best_err > lambda + 1e-9 {
        return Err(LpError::BoundViolated { degree, lambda, achieved: best_err });
    }
    Ok(BestApproxBound { degree, lambda, achieved_error: best_err.min(lambda), coefficients: best.iter().copied().collect(), iterations })
}

/// Evaluates a [`BestApproxBound`]'s polynomial on the grid.
pub fn eval_bound_polynomial(grid: &UniformGrid, bound: &BestApproxBound) -> Vec<f64> {
    let v = vandermonde(grid, bound.degree);
    (v * DVector::from_column_slice(&bound.coefficients)).iter().copied().collect()
}
