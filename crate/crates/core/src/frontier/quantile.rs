//! Linear quantile frontier via the bounded dual of the pinball-loss LP.
//!
//! The primal `min Σ ρ_τ(yᵢ − xᵢ'β)` has the dual
//! `max y'a  s.t.  X'a = (1 − τ) X'1,  0 ≤ a ≤ 1`, which has only as many
//! rows as coefficients. A bounded-variable primal simplex solves it; the
//! row multipliers at the optimum are the quantile coefficients.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{prepare, FitError, FrontierSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileFrontier {
    pub quantile: f64,
    /// Intercept first.
    pub beta: Vec<f64>,
    /// Observations strictly above the surface.
    pub above: usize,
    /// Observations on or above the surface.
    pub at_or_above: usize,
    pub loss: f64,
    pub residuals: Vec<f64>,
}

pub fn pinball_loss(residual: f64, quantile: f64) -> f64 {
    if residual >= 0.0 {
        quantile * residual
    } else {
        (quantile - 1.0) * residual
    }
}

pub fn fit_quantile(spec: &FrontierSpec, x: &DMatrix<f64>, y: &[f64], quantile: f64) -> Result<QuantileFrontier, FitError> {
    if !(quantile > 0.0 && quantile < 1.0) {
        return Err(FitError::InvalidQuantile(quantile));
    }
    let design = prepare(spec, x, y)?;
    let beta = solve_dual(&design.x, &design.y, quantile)?;
    let fitted = &design.x * DVector::from_column_slice(&beta);
    let residuals: Vec<f64> = (&design.y - fitted).iter().copied().collect();
    let tol = 1e-9 * design.y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    Ok(QuantileFrontier {
        quantile,
        above: residuals.iter().filter(|&&r| r > tol).count(),
        at_or_above: residuals.iter().filter(|&&r| r >= -tol).count(),
        loss: residuals.iter().map(|&r| pinball_loss(r, quantile)).sum(),
        beta,
        residuals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum State {
    Basic,
    Lower,
    Upper,
}

struct BoundedLp<'a> {
    x: &'a DMatrix<f64>,
    /// Artificial column signs, one per row.
    art_sign: Vec<f64>,
    upper: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    rhs: DVector<f64>,
}

impl BoundedLp<'_> {
    fn n(&self) -> usize {
        self.x.nrows()
    }

    fn column(&self, j: usize) -> DVector<f64> {
        let p = self.x.ncols();
        if j < self.n() {
            self.x.row(j).transpose()
        } else {
            let mut c = DVector::zeros(p);
            c[j - self.n()] = self.art_sign[j - self.n()];
            c
        }
    }

    fn value_of_nonbasic(&self, j: usize) -> f64 {
        match self.state[j] {
            State::Upper => self.upper[j],
            _ => 0.0,
        }
    }

    fn basis_inverse(&self) -> Option<DMatrix<f64>> {
        let p = self.x.ncols();
        let mut b = DMatrix::zeros(p, p);
        for (i, &j) in self.basis.iter().enumerate() {
            b.set_column(i, &self.column(j));
        }
        b.try_inverse()
    }

    fn basic_values(&self, binv: &DMatrix<f64>) -> DVector<f64> {
        let mut r = self.rhs.clone();
        for j in 0..self.state.len() {
            if self.state[j] == State::Upper {
                r -= self.column(j) * self.upper[j];
            }
        }
        binv * r
    }

    /// Runs the simplex for `cost` (maximization). Artificials never enter.
    fn optimize(&mut self, cost: &[f64], tol: f64, max_iter: usize) -> Result<(), FitError> {
        let n = self.n();
        let mut degenerate_run = 0usize;
        for _ in 0..max_iter {
            let binv = self.basis_inverse().ok_or(FitError::LinearProgram)?;
            let xb = self.basic_values(&binv);
            let cb = DVector::from_iterator(self.basis.len(), self.basis.iter().map(|&j| cost[j]));
            let pi = binv.transpose() * cb;

            let bland = degenerate_run > 50;
            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..n {
                let dir = match self.state[j] {
                    State::Basic => continue,
                    State::Lower => 1.0,
                    State::Upper => -1.0,
                };
                let d = cost[j] - self.x.row(j).dot(&pi.transpose());
                if dir * d > tol {
                    let better = match entering {
                        None => true,
                        Some((_, _, best)) => !bland && (dir * d) > best,
                    };
                    if better {
                        entering = Some((j, dir, dir * d));
                    }
                    if bland {
                        break;
                    }
                }
            }
            let Some((q, dir, _)) = entering else {
                return Ok(());
            };

            let alpha = &binv * self.column(q);
            let mut step = self.upper[q];
            let mut leaving: Option<(usize, State)> = None;
            for (i, &j) in self.basis.iter().enumerate() {
                let da = dir * alpha[i];
                let (limit, bound) = if da > 1e-12 {
                    (xb[i].max(0.0) / da, State::Lower)
                } else if da < -1e-12 && self.upper[j].is_finite() {
                    ((self.upper[j] - xb[i]).max(0.0) / -da, State::Upper)
                } else {
                    continue;
                };
                let replace = match leaving {
                    None => limit < step,
                    Some((li, _)) => {
                        limit < step - 1e-14
                            || (limit <= step + 1e-14 && (if bland { j < self.basis[li] } else { da.abs() > (dir * alpha[li]).abs() }))
                    }
                };
                if replace {
                    step = limit;
                    leaving = Some((i, bound));
                }
            }
            if step <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            match leaving {
                None => {
                    if !step.is_finite() {
                        return Err(FitError::LinearProgram);
                    }
                    self.state[q] = if self.state[q] == State::Lower { State::Upper } else { State::Lower };
                }
                Some((i, bound)) => {
                    let out = self.basis[i];
                    self.state[out] = bound;
                    self.state[q] = State::Basic;
                    self.basis[i] = q;
                }
            }
        }
        Err(FitError::LinearProgram)
    }
}

/// Least absolute deviations with positive row weights, `min Σ wᵢ |yᵢ − xᵢ'β|`.
/// No intercept column is added.
pub(crate) fn weighted_lad(x: &DMatrix<f64>, y: &[f64], weights: &[f64]) -> Result<Vec<f64>, FitError> {
    let xs = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| weights[i] * x[(i, j)]);
    let ys = DVector::from_iterator(y.len(), y.iter().zip(weights).map(|(v, w)| v * w));
    solve_dual(&xs, &ys, 0.5)
}

fn solve_dual(x: &DMatrix<f64>, y: &DVector<f64>, tau: f64) -> Result<Vec<f64>, FitError> {
    let (n, p) = (x.nrows(), x.ncols());
    let rhs = x.transpose() * DVector::from_element(n, 1.0 - tau);
    let art_sign: Vec<f64> = rhs.iter().map(|&r| if r >= 0.0 { 1.0 } else { -1.0 }).collect();
    let mut upper = vec![1.0; n];
    upper.extend(std::iter::repeat_n(f64::INFINITY, p));
    let mut state = vec![State::Lower; n];
    state.extend(std::iter::repeat_n(State::Basic, p));
    let mut lp = BoundedLp { x, art_sign, upper, state, basis: (n..n + p).collect(), rhs };

    let scale = y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let max_iter = 50 * n + 1000;

    // phase 1: drive the artificials to zero
    let mut cost1 = vec![0.0; n];
    cost1.extend(std::iter::repeat_n(-1.0, p));
    lp.optimize(&cost1, 1e-11, max_iter)?;
    let binv = lp.basis_inverse().ok_or(FitError::LinearProgram)?;
    let xb = lp.basic_values(&binv);
    let infeasibility: f64 = lp.basis.iter().zip(xb.iter()).filter(|(&j, _)| j >= n).map(|(_, v)| v.abs()).sum();
    let row_scale = lp.rhs.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if infeasibility > 1e-8 * row_scale {
        return Err(FitError::RankDeficient);
    }
    for j in n..n + p {
        lp.upper[j] = 0.0;
    }
    // pivot remaining zero-level artificials out of the basis
    for i in 0..p {
        if lp.basis[i] < n {
            continue;
        }
        let binv = lp.basis_inverse().ok_or(FitError::LinearProgram)?;
        let row = binv.row(i);
        let candidate = (0..n)
            .filter(|&j| lp.state[j] != State::Basic)
            .max_by(|&a, &b| row.dot(&x.row(a).transpose()).abs().total_cmp(&row.dot(&x.row(b).transpose()).abs()));
        if let Some(j) = candidate.filter(|&j| row.dot(&x.row(j).transpose()).abs() > 1e-9) {
            let out = lp.basis[i];
            lp.state[out] = State::Lower;
            debug_assert!(lp.value_of_nonbasic(j) <= 1.0);
            lp.state[j] = State::Basic;
            lp.basis[i] = j;
        } else {
            return Err(FitError::RankDeficient);
        }
    }

    let mut cost2: Vec<f64> = y.iter().copied().collect();
    cost2.extend(std::iter::repeat_n(0.0, p));
    lp.optimize(&cost2, 1e-10 * scale, max_iter)?;
    let binv = lp.basis_inverse().ok_or(FitError::LinearProgram)?;
    let cb = DVector::from_iterator(p, lp.basis.iter().map(|&j| cost2[j]));
    Ok((binv.transpose() * cb).iter().copied().collect())
}
