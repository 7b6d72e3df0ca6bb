//! Brownian drivers on N time partitions, the horizon polynomial bases, the
//! double-bound projection and the coupled investigation/development system.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("need at least one partition")]
    NoPartitions,
    #[error("time interval [{0}, {1}] is empty")]
    EmptyInterval(f64, f64),
    #[error("rho must be positive, got {0}")]
    NonPositiveRho(f64),
    #[error("need at least one integration step")]
    NoSteps,
    #[error("{0}")]
    Coefficients(String),
    #[error("unknown horizon {0:?}")]
    UnknownHorizon(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BrownianPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub seed: u64,
}

impl BrownianPath {
    /// Number of partitions (increments).
    pub fn partitions(&self) -> usize {
        self.times.len() - 1
    }

    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn end(&self) -> f64 {
        *self.values.last().expect("path has at least two points")
    }

    /// Piecewise-linear interpolation, clamped to the path's time range.
    pub fn at(&self, t: f64) -> f64 {
        let (t0, t1) = (self.times[0], *self.times.last().unwrap());
        if t <= t0 {
            return self.values[0];
        }
        if t >= t1 {
            return self.end();
        }
        let h = (t1 - t0) / self.partitions() as f64;
        let k = (((t - t0) / h) as usize).min(self.partitions() - 1);
        let frac = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        self.values[k] + frac * (self.values[k + 1] - self.values[k])
    }
}

/// Seed for replication `index` of a batch started from `seed`.
pub fn replication_seed(seed: u64, index: u64) -> u64 {
    seed.wrapping_add(index)
}

/// Standard Brownian motion on `n_partitions` uniform steps over `[t0, t1]`.
pub fn simulate_brownian(n_partitions: usize, t0: f64, t1: f64, seed: u64) -> Result<BrownianPath, DynamicsError> {
    if n_partitions == 0 {
        return Err(DynamicsError::NoPartitions);
    }
    if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(DynamicsError::EmptyInterval(t0, t1));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = (t1 - t0) / n_partitions as f64;
    let sd = h.sqrt();
    let mut times = Vec::with_capacity(n_partitions + 1);
    let mut values = Vec::with_capacity(n_partitions + 1);
    times.push(t0);
    values.push(0.0);
    let mut w = 0.0;
    for k in 1..=n_partitions {
        let z: f64 = StandardNormal.sample(&mut rng);
        w += sd * z;
        times.push(if k == n_partitions { t1 } else { t0 + k as f64 * h });
        values.push(w);
    }
    Ok(BrownianPath { times, values, seed })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    /// Quadratic form.
    Short,
    /// Degree-2 list.
    Medium,
    /// Degree-3 list.
    Long,
}

impl std::str::FromStr for Horizon {
    type Err = DynamicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "short" => Ok(Self::Short),
            "medium" => Ok(Self::Medium),
            "long" => Ok(Self::Long),
            other => Err(DynamicsError::UnknownHorizon(other.to_string())),
        }
    }
}

/// `coefficient · x^a y^b z^c`
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Monomial {
    pub coefficient: f64,
    pub powers: [u32; 3],
}

impl Monomial {
    const fn new(coefficient: f64, a: u32, b: u32, c: u32) -> Self {
        Self { coefficient, powers: [a, b, c] }
    }

    pub fn degree(&self) -> u32 {
        self.powers.iter().sum()
    }

    pub fn eval(&self, point: [f64; 3]) -> f64 {
        self.coefficient
            * point[0].powi(self.powers[0] as i32)
            * point[1].powi(self.powers[1] as i32)
            * point[2].powi(self.powers[2] as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasisTerm {
    /// The (l, m, n) label the term is printed with.
    pub index: [u8; 3],
    pub monomials: Vec<Monomial>,
}

impl BasisTerm {
    pub fn eval(&self, point: [f64; 3]) -> f64 {
        self.monomials.iter().map(|m| m.eval(point)).sum()
    }

    pub fn label(&self) -> String {
        format!("{}{}{}", self.index[0], self.index[1], self.index[2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HorizonBasis {
    pub horizon: Horizon,
    pub terms: Vec<BasisTerm>,
}

/// Direction coefficients ξ, η, ζ and scale ρ of the double bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleBound {
    pub xi: f64,
    pub eta: f64,
    pub zeta: f64,
    pub rho: f64,
}

impl Default for DoubleBound {
    fn default() -> Self {
        Self { xi: 1.0, eta: 1.0, zeta: 1.0, rho: 1.0 }
    }
}

impl DoubleBound {
    pub fn new(xi: f64, eta: f64, zeta: f64, rho: f64) -> Result<Self, DynamicsError> {
        if !(rho > 0.0) {
            return Err(DynamicsError::NonPositiveRho(rho));
        }
        Ok(Self { xi, eta, zeta, rho })
    }
}

fn term(index: [u8; 3], monomials: Vec<Monomial>) -> BasisTerm {
    BasisTerm { index, monomials }
}

impl HorizonBasis {
    /// The basis for `horizon`. Only the short quadratic form depends on
    /// the double-bound coefficients (ξ, ζ, ρ).
    pub fn new(horizon: Horizon, db: &DoubleBound) -> Self {
        type M = Monomial;
        let terms = match horizon {
            Horizon::Short => {
                let r = 1.0 / db.rho;
                let xz = db.xi * db.zeta * r;
                vec![
                    // (x² − z²) ½ ξ² / ρ
                    term([2, 0, 0], vec![M::new(0.5 * db.xi * db.xi * r, 2, 0, 0), M::new(-0.5 * db.xi * db.xi * r, 0, 0, 2)]),
                    term([1, 1, 0], vec![M::new(xz, 1, 1, 0)]),
                    term([0, 2, 0], vec![M::new(r, 0, 2, 0), M::new(-r, 0, 0, 2)]),
                    term([1, 0, 1], vec![M::new(xz, 1, 0, 1)]),
                    term([0, 1, 1], vec![M::new(xz, 0, 1, 1)]),
                ]
            }
            Horizon::Medium => vec![
                term([2, 0, 0], vec![M::new(1.0, 2, 0, 0), M::new(-1.0, 0, 0, 2)]),
                term([0, 2, 0], vec![M::new(1.0, 0, 2, 0), M::new(-1.0, 0, 0, 2)]),
                // printed with label 001
                term([0, 0, 1], vec![M::new(1.0, 1, 1, 0)]),
                term([1, 0, 1], vec![M::new(1.0, 1, 0, 1)]),
                term([0, 1, 1], vec![M::new(1.0, 0, 1, 1)]),
            ],
            Horizon::Long => vec![
                term([3, 0, 0], vec![M::new(1.0, 2, 0, 0), M::new(-3.0, 1, 0, 2)]),
                term([2, 1, 0], vec![M::new(1.0, 2, 1, 0), M::new(-1.0, 0, 1, 2)]),
                term([1, 2, 0], vec![M::new(1.0, 1, 2, 0), M::new(-1.0, 1, 0, 2)]),
                term([0, 3, 0], vec![M::new(1.0, 0, 3, 0), M::new(-3.0, 0, 1, 3)]),
                // printed 3x²z/3
                term([2, 0, 1], vec![M::new(1.0, 2, 0, 1)]),
            ],
        };
        Self { horizon, terms }
    }

    pub fn eval(&self, point: [f64; 3]) -> Vec<f64> {
        self.terms.iter().map(|t| t.eval(point)).collect()
    }

    /// Sum of all terms; for the short horizon this is the full quadratic form.
    pub fn total(&self, point: [f64; 3]) -> f64 {
        self.eval(point).iter().sum()
    }
}

pub fn eval_basis(horizon: Horizon, point: [f64; 3], db: &DoubleBound) -> Vec<f64> {
    HorizonBasis::new(horizon, db).eval(point)
}

/// `D₂` from `1 + D₂ = (½ − ½ (xξ + yη + zζ)²) / ρ`.
pub fn eval_double_bound(db: &DoubleBound, point: [f64; 3]) -> Result<f64, DynamicsError> {
    if !(db.rho > 0.0) {
        return Err(DynamicsError::NonPositiveRho(db.rho));
    }
    let s = point[0] * db.xi + point[1] * db.eta + point[2] * db.zeta;
    Ok((0.5 - 0.5 * s * s) / db.rho - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdState {
    pub i: f64,
    pub d: f64,
    pub t: f64,
}

type ScalarFn = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Coefficients of the investigation/development system
///
/// ```text
/// di/dt = ∏ₖ Iₖ(x,t)·Sₖ(x,t) + B(x,t)·i
/// dd/dt = (∏ₖ μₖ·2π·yₖ)·i + d·(i + d)
/// ```
///
/// where `x` is the Brownian driver and `Sₖ` the per-component sensitivity
/// (∂I/∂dₖ). An empty product contributes nothing.
pub struct IdCoefficients {
    pub investigation: Vec<ScalarFn>,
    pub sensitivity: Vec<ScalarFn>,
    pub base: ScalarFn,
    pub mu: Vec<f64>,
    pub y: Vec<f64>,
}

impl Default for IdCoefficients {
    fn default() -> Self {
        Self { investigation: Vec::new(), sensitivity: Vec::new(), base: Box::new(|_, _| 0.0), mu: Vec::new(), y: Vec::new() }
    }
}

impl IdCoefficients {
    /// One investigation component per function, sensitivities default to 1.
    pub fn with_investigation(mut self, fs: Vec<ScalarFn>) -> Self {
        self.sensitivity = fs.iter().map(|_| Box::new(|_: f64, _: f64| 1.0) as ScalarFn).collect();
        self.investigation = fs;
        self
    }

    pub fn with_sensitivity(mut self, fs: Vec<ScalarFn>) -> Self {
        self.sensitivity = fs;
        self
    }

    pub fn with_base(mut self, b: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.base = Box::new(b);
        self
    }

    pub fn with_development(mut self, mu: Vec<f64>, y: Vec<f64>) -> Self {
        self.mu = mu;
        self.y = y;
        self
    }

    fn validate(&self) -> Result<(), DynamicsError> {
        if self.investigation.len() != self.sensitivity.len() {
            return Err(DynamicsError::Coefficients(format!(
                "{} investigation components but {} sensitivities",
                self.investigation.len(),
                self.sensitivity.len()
            )));
        }
        if self.mu.len() != self.y.len() {
            return Err(DynamicsError::Coefficients(format!("{} mu values but {} y values", self.mu.len(), self.y.len())));
        }
        Ok(())
    }

    fn rhs(&self, x: f64, t: f64, i: f64, d: f64) -> (f64, f64) {
        let inv = if self.investigation.is_empty() {
            0.0
        } else {
            self.investigation.iter().zip(&self.sensitivity).map(|(f, s)| f(x, t) * s(x, t)).product()
        };
        let dev = if self.mu.is_empty() {
            0.0
        } else {
            self.mu.iter().zip(&self.y).map(|(m, y)| m * 2.0 * std::f64::consts::PI * y).product()
        };
        (inv + (self.base)(x, t) * i, dev * i + d * (i + d))
    }
}

pub const BLOW_UP_GUARD: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdTrajectory {
    pub states: Vec<IdState>,
    /// The trajectory crossed the overflow guard and was cut short.
    pub blew_up: bool,
}

impl IdTrajectory {
    pub fn last(&self) -> &IdState {
        self.states.last().expect("trajectory holds the initial state")
    }
}

/// Classical RK4 over the driver's time span in `steps` uniform steps. The
/// driver enters as the exogenous `x` argument, interpolated linearly
/// between partition points.
pub fn integrate_id(
    initial: IdState,
    coeffs: &IdCoefficients,
    driver: &BrownianPath,
    steps: usize,
) -> Result<IdTrajectory, DynamicsError> {
    if steps == 0 {
        return Err(DynamicsError::NoSteps);
    }
    coeffs.validate()?;
    let t_end = *driver.times.last().expect("non-empty path");
    let h = (t_end - initial.t) / steps as f64;
    let f = |t: f64, i: f64, d: f64| coeffs.rhs(driver.at(t), t, i, d);
    let mut states = Vec::with_capacity(steps + 1);
    states.push(initial);
    let (mut i, mut d) = (initial.i, initial.d);
    for k in 0..steps {
        let t = initial.t + k as f64 * h;
        let k1 = f(t, i, d);
        let k2 = f(t + 0.5 * h, i + 0.5 * h * k1.0, d + 0.5 * h * k1.1);
        let k3 = f(t + 0.5 * h, i + 0.5 * h * k2.0, d + 0.5 * h * k2.1);
        let k4 = f(t + h, i + h * k3.0, d + h * k3.1);
        i += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        d += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        let t_next = if k + 1 == steps { t_end } else { initial.t + (k + 1) as f64 * h };
        if !(i.abs() <= BLOW_UP_GUARD && d.abs() <= BLOW_UP_GUARD) {
            return Ok(IdTrajectory { states, blew_up: true });
        }
        states.push(IdState { i, d, t: t_next });
    }
    Ok(IdTrajectory { states, blew_up: false })
}
