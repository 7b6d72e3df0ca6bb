//! Shared numeric helpers: normal tail functions, least squares and
//! log-log slope regression.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::erfc;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// ln φ(x) for the standard normal density.
pub fn ln_norm_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// ln Φ(x), accurate far into the lower tail.
pub fn ln_norm_cdf(x: f64) -> f64 {
    if x < -37.0 {
        // asymptotic series of the Mills ratio
        let x2 = x * x;
        ln_norm_pdf(x) - (-x).ln() + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    } else {
        (0.5 * erfc(-x / std::f64::consts::SQRT_2)).ln()
    }
}

/// φ(x)/Φ(x).
pub fn inverse_mills(x: f64) -> f64 {
    if x < -37.0 {
        let x2 = x * x;
        -x / (1.0 - 1.0 / x2 + 3.0 / (x2 * x2))
    } else {
        (ln_norm_pdf(x) - ln_norm_cdf(x)).exp()
    }
}

/// Ordinary least squares through a column-pivot-free QR. Returns `None`
/// when the design is numerically rank deficient.
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    if !has_full_column_rank(x) {
        return None;
    }
    let qr = x.clone().qr();
    let qty = qr.q().transpose() * y;
    qr.r().solve_upper_triangular(&qty)
}

/// Weighted least squares with nonnegative row weights.
pub fn weighted_least_squares(x: &DMatrix<f64>, y: &DVector<f64>, w: &[f64]) -> Option<DVector<f64>> {
    let mut xs = x.clone();
    let mut ys = y.clone();
    for (i, &wi) in w.iter().enumerate() {
        let s = wi.sqrt();
        xs.row_mut(i).scale_mut(s);
        ys[i] *= s;
    }
    least_squares(&xs, &ys)
}

pub fn has_full_column_rank(x: &DMatrix<f64>) -> bool {
    if x.nrows() < x.ncols() || x.ncols() == 0 {
        return false;
    }
    let sv = x.clone().singular_values();
    let max = sv.max();
    max > 0.0 && sv.min() > max * 1e-10
}

/// Simple linear regression summary used by the scaling-law estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

impl LineFit {
    /// Half-width of the two-sided 95% confidence interval for the slope.
    pub fn slope_ci_halfwidth(&self, points: usize) -> f64 {
        if points <= 2 || self.slope_se == 0.0 {
            return 0.0;
        }
        let t = StudentsT::new(0.0, 1.0, (points - 2) as f64)
            .map(|d| d.inverse_cdf(0.975))
            .unwrap_or(1.96);
        t * self.slope_se
    }
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = if n > 2 {
        let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        (sse / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some(LineFit { slope, intercept, slope_se })
}

/// Sample moments about the mean: (mean, second, third).
pub fn central_moments(v: &[f64]) -> (f64, f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let (m2, m3) = v.iter().fold((0.0, 0.0), |(a, b), x| {
        let d = x - mean;
        (a + d * d, b + d * d * d)
    });
    (mean, m2 / n, m3 / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn normal_cdf_tails_are_continuous() {
        let below = ln_norm_cdf(-37.0 - 1e-9);
        let above = ln_norm_cdf(-37.0 + 1e-9);
        assert_relative_eq!(below, above, max_relative = 1e-8);
        assert_relative_eq!(ln_norm_cdf(0.0), 0.5f64.ln(), max_relative = 1e-14);
        assert!(ln_norm_cdf(-200.0).is_finite());
        assert_relative_eq!(inverse_mills(-37.0 - 1e-9), inverse_mills(-37.0 + 1e-9), max_relative = 1e-8);
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let f = fit_line(&xs, &ys).unwrap();
        assert_relative_eq!(f.slope, 2.0, epsilon = 1e-12);
        assert_relative_eq!(f.intercept, -1.0, epsilon = 1e-12);
        assert!(f.slope_se < 1e-12);
    }

    #[test]
    fn rank_deficiency_detected() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert!(least_squares(&x, &DVector::from_vec(vec![1.0, 2.0, 3.0])).is_none());
    }
}
