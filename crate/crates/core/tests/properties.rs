//! Property and statistical invariants across the library.

use frontier_lab::dynamics::{self, eval_basis, integrate_id, simulate_brownian, DoubleBound, Horizon, HorizonBasis, IdCoefficients, IdState};
use frontier_lab::fractal::{self, FractalBound};
use frontier_lab::frontier::{self, fit_mle, fit_quantile, loglik_at, model_design, FrontierSpec};
use frontier_lab::lp::{self, CurvePair, MobiusWeight, UniformGrid, Weight};
use frontier_lab::panel::parse_panel;
use frontier_lab::picard::{self, BoundParams, BoundVariant, Verdict};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

// ---------------------------------------------------------------- panels

fn panel_text() -> impl Strategy<Value = String> {
    let years = 1usize..7;
    let rows = 1usize..12;
    (years, rows).prop_flat_map(|(ny, nr)| {
        let cells = prop::collection::vec(prop::collection::vec(prop::option::weighted(0.85, -5000i32..50000), ny), nr);
        let codes = prop::collection::btree_set("[A-Z]{3}", nr);
        let names = prop::collection::vec("[A-Za-z][A-Za-z ]{0,12}[a-z]", nr);
        (Just(ny), cells, codes, names)
    })
    .prop_filter("distinct codes", |(_, cells, codes, _)| codes.len() == cells.len())
    .prop_map(|(ny, cells, codes, names)| {
        let mut out = String::from("Country Name,Code");
        for y in 0..ny {
            out.push_str(&format!(",{}", 2000 + y));
        }
        out.push('\n');
        // shuffle-free but not sorted: reverse the set so file order differs from code order
        for ((row, code), name) in cells.iter().zip(codes.iter().rev()).zip(&names) {
            out.push_str(&format!("{name},{code}"));
            for c in row {
                match c {
                    Some(v) => out.push_str(&format!(",{:.2}", *v as f64 / 100.0)),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    })
}

proptest! {
    #[test]
    fn panel_text_round_trips(text in panel_text()) {
        let panel = parse_panel(&text, "x").unwrap();
        prop_assert_eq!(panel.to_csv(), text);
    }

    #[test]
    fn panel_parse_keeps_file_order(text in panel_text()) {
        let panel = parse_panel(&text, "x").unwrap();
        let in_file: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
        let parsed: Vec<&str> = panel.series().iter().map(|s| s.code()).collect();
        prop_assert_eq!(parsed, in_file);
    }

    #[test]
    fn spread_and_deviations_are_consistent(text in panel_text()) {
        let panel = parse_panel(&text, "x").unwrap();
        for &year in panel.years() {
            if let Ok(ext) = panel.extrema(year) {
                prop_assert_eq!(ext.max.value - ext.min.value, panel.range_spread(year).unwrap());
            }
            if let Ok(dev) = panel.growth_deviation(year) {
                let total: f64 = dev.iter().map(|d| d.value).sum();
                prop_assert!(total.abs() < 1e-9, "deviation sum {}", total);
            }
        }
    }
}

// ---------------------------------------------------------------- frontier

fn production_set(seed: u64, n: usize) -> (DMatrix<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = Normal::new(0.0, 0.1).unwrap();
    let u = Normal::new(0.0, 0.25).unwrap();
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
    let y = x.iter().map(|&xi| 0.5 + 0.8 * xi + v.sample(&mut rng) - f64::abs(u.sample(&mut rng))).collect();
    (DMatrix::from_column_slice(n, 1, &x), y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn mle_is_a_local_maximum(seed in 0u64..1000) {
        let spec = FrontierSpec::new(["x"]).with_log_transform(false);
        let (x, y) = production_set(seed, 300);
        let fit = fit_mle(&spec, &x, &y).unwrap();
        prop_assert!(fit.loglik >= fit.start_loglik - 1e-9);
        prop_assume!(!fit.boundary);
        let (xm, ym) = model_design(&spec, &x, &y).unwrap();
        let at = |b: &[f64], sv: f64, su: f64| loglik_at(fit.distribution, &xm, &ym, b, sv, su);
        let best = at(&fit.beta, fit.sigma_v, fit.sigma_u);
        let mut theta = fit.beta.clone();
        theta.extend([fit.sigma_v.powi(2).ln(), fit.sigma_u.powi(2).ln()]);
        for k in 0..theta.len() {
            for step in [-1e-4, 1e-4] {
                let mut t = theta.clone();
                t[k] += step;
                let b = &t[..fit.beta.len()];
                let ll = at(b, (t[b.len()] / 2.0).exp(), (t[b.len() + 1] / 2.0).exp());
                prop_assert!(ll <= best + 1e-7, "coordinate {} step {}: {} > {}", k, step, ll, best);
            }
        }
    }

    #[test]
    fn efficiency_is_permutation_equivariant(seed in 0u64..1000) {
        let spec = FrontierSpec::new(["x"]).with_log_transform(false);
        let (x, y) = production_set(seed, 200);
        let n = y.len();
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for i in (1..n).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let xp = DMatrix::from_fn(n, 1, |i, j| x[(order[i], j)]);
        let yp: Vec<f64> = order.iter().map(|&i| y[i]).collect();
        let a = fit_mle(&spec, &x, &y).unwrap();
        let b = fit_mle(&spec, &xp, &yp).unwrap();
        for (i, &src) in order.iter().enumerate() {
            prop_assert!((b.efficiency[i] - a.efficiency[src]).abs() < 1e-5, "{} vs {}", b.efficiency[i], a.efficiency[src]);
        }
    }

    #[test]
    fn quantile_share_above_surface(seed in 0u64..1000, tau in 0.05f64..0.95) {
        let spec = FrontierSpec::new(["x"]).with_log_transform(false);
        let (x, y) = production_set(seed, 150);
        let q = fit_quantile(&spec, &x, &y, tau).unwrap();
        let target = (150.0 * (1.0 - tau)).round() as i64;
        // basic observations sit on the surface; the bracket holds the target
        let lo = q.above as i64 - 1;
        let hi = q.at_or_above as i64 + 1;
        prop_assert!(lo <= target && target <= hi, "above {} at_or_above {} target {}", q.above, q.at_or_above, target);
    }
}

#[test]
fn bootstrap_path_starts_with_observed_scores() {
    let spec = FrontierSpec::new(["x"]).with_log_transform(false);
    let (x, y) = production_set(1, 100);
    let fit = fit_mle(&spec, &x, &y).unwrap();
    let path = frontier::bootstrap_efficiency_path(&fit, 1000, 3);
    assert_eq!(path.len(), 1000);
    assert_eq!(&path[..100], &fit.efficiency[..]);
    assert!(path.iter().all(|&e| e > 0.0 && e <= 1.0));
    assert_eq!(path, frontier::bootstrap_efficiency_path(&fit, 1000, 3));
}

// ---------------------------------------------------------------- lp

fn smooth(c: [f64; 4]) -> impl Fn(f64) -> f64 {
    move |t| c[0] * (c[1] * t).sin() + c[2] * (c[3] * t).cos() + t.ln()
}

fn coeffs4() -> impl Strategy<Value = [f64; 4]> {
    [-2.0f64..2.0, 0.2f64..3.0, -2.0f64..2.0, 0.2f64..3.0]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn best_polynomial_never_exceeds_candidate(c in coeffs4(), cand in prop::collection::vec(-3.0f64..3.0, 1..7), p in prop::sample::select(vec![1.0, 1.5, 2.0, 2.5, 3.0, 4.0])) {
        let grid = UniformGrid::new(1.0, std::f64::consts::E, 201).unwrap();
        let f = grid.sample(smooth(c));
        let degree = cand.len() - 1;
        let x = grid.sample(|t| cand.iter().rev().fold(0.0, |acc, k| acc * t + k));
        let b = lp::best_poly_bound(&grid, &f, degree, p, &x).unwrap();
        prop_assert!(b.achieved_error <= b.lambda);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn error_does_not_grow_with_degree(c in coeffs4(), p in prop::sample::select(vec![1.0, 2.0, 3.0])) {
        let grid = UniformGrid::new(1.0, std::f64::consts::E, 201).unwrap();
        let f = grid.sample(smooth(c));
        let zero = vec![0.0; grid.nodes];
        let errs: Vec<f64> = (0..6).map(|n| lp::best_poly_bound(&grid, &f, n, p, &zero).unwrap().achieved_error).collect();
        for w in errs.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9, "{:?}", errs);
        }
    }

    #[test]
    fn affine_mobius_scales_by_root(c in coeffs4(), a in 0.1f64..5.0, b in -0.5f64..0.5, p in 1.0f64..4.0) {
        let grid = UniformGrid::new(1.0, std::f64::consts::E, 301).unwrap();
        let pair = CurvePair::from_fns(grid, smooth(c), |t| t.sqrt(), p).unwrap();
        let plain = lp::lp_distance(&pair, &Weight::Identity).unwrap();
        let w = MobiusWeight::new(a, b, 0.0, 1.0).unwrap();
        let weighted = lp::lp_distance(&pair, &Weight::Mobius(w)).unwrap();
        prop_assert!((weighted - a.powf(1.0 / p) * plain).abs() <= 1e-12 * weighted.abs().max(1e-300));
    }

    #[test]
    fn grid_doubling_is_stable(c in coeffs4(), p in 1.0f64..4.0) {
        let coarse = CurvePair::from_fns(UniformGrid::new(1.0, 2.5, 1001).unwrap(), smooth(c), |t| 0.3 * t, p).unwrap();
        let fine = CurvePair::from_fns(UniformGrid::new(1.0, 2.5, 2001).unwrap(), smooth(c), |t| 0.3 * t, p).unwrap();
        let (a, b) = (lp::lp_distance(&coarse, &Weight::Identity).unwrap(), lp::lp_distance(&fine, &Weight::Identity).unwrap());
        prop_assume!(b > 1e-3);
        prop_assert!((a - b).abs() / b < 1e-6, "{} vs {}", a, b);
    }
}

// ---------------------------------------------------------------- dynamics

#[test]
fn brownian_increments_look_gaussian() {
    let n = 100_000;
    let path = simulate_brownian(n, 0.0, 1.0, 2024).unwrap();
    let inc = path.increments();
    let mean = inc.iter().sum::<f64>() / n as f64;
    let m2 = inc.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64;
    let m3 = inc.iter().map(|d| (d - mean).powi(3)).sum::<f64>() / n as f64;
    let m4 = inc.iter().map(|d| (d - mean).powi(4)).sum::<f64>() / n as f64;
    let skew = m3 / m2.powf(1.5);
    let excess = m4 / (m2 * m2) - 3.0;
    assert!(skew.abs() < 0.1, "skew {skew}");
    assert!(excess.abs() < 0.2, "excess kurtosis {excess}");
    assert!((m2 * n as f64 - 1.0).abs() < 0.02, "increment variance {}", m2 * n as f64);
}

#[test]
fn terminal_variance_matches_horizon() {
    let reps = 10_000;
    let t1 = 2.5;
    let ends: Vec<f64> = (0..reps)
        .map(|r| simulate_brownian(1024, 0.0, t1, dynamics::replication_seed(77, r)).unwrap().end())
        .collect();
    let mean = ends.iter().sum::<f64>() / reps as f64;
    let var = ends.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    assert!((var / t1 - 1.0).abs() < 0.05, "var {var}");
}

#[test]
fn disjoint_increments_are_uncorrelated() {
    let reps = 4000;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for r in 0..reps {
        let p = simulate_brownian(64, 0.0, 1.0, dynamics::replication_seed(5150, r)).unwrap();
        let a = p.values[20] - p.values[0];
        let b = p.values[64] - p.values[40];
        sab += a * b;
        saa += a * a;
        sbb += b * b;
    }
    let corr = sab / (saa * sbb).sqrt();
    assert!(corr.abs() < 0.05, "correlation {corr}");
}

fn stateful() -> IdCoefficients {
    IdCoefficients::default()
        .with_investigation(vec![Box::new(|x, t| 0.3 * x + t)])
        .with_base(|x, _| -0.4 + 0.1 * x)
        .with_development(vec![0.2], vec![0.3])
}

#[test]
fn integration_is_deterministic() {
    let a = integrate_id(IdState { i: 0.05, d: 0.02, t: 0.0 }, &stateful(), &simulate_brownian(512, 0.0, 1.0, 8).unwrap(), 200).unwrap();
    let b = integrate_id(IdState { i: 0.05, d: 0.02, t: 0.0 }, &stateful(), &simulate_brownian(512, 0.0, 1.0, 8).unwrap(), 200).unwrap();
    assert_eq!(a, b);
}

#[test]
fn rk4_global_order() {
    // with i held at 1, d' = d(1 + d) from d(0) = 1 has d(t) = eᵗ / (2 − eᵗ)
    let path = simulate_brownian(16, 0.0, 0.5, 0).unwrap();
    let coeffs = IdCoefficients::default();
    let exact = 0.5f64.exp() / (2.0 - 0.5f64.exp());
    let err = |steps| (integrate_id(IdState { i: 1.0, d: 1.0, t: 0.0 }, &coeffs, &path, steps).unwrap().last().d - exact).abs();
    let errs: Vec<f64> = [10, 20, 40, 80].into_iter().map(err).collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 3.5, "order {order} from {errs:?}");
    }
}

proptest! {
    #[test]
    fn basis_parity(x in -3.0f64..3.0, y in -3.0f64..3.0, z in -3.0f64..3.0, xi in 0.1f64..3.0, eta in 0.1f64..3.0, zeta in 0.1f64..3.0) {
        let db = DoubleBound::new(xi, eta, zeta, 1.0).unwrap();
        for horizon in [Horizon::Short, Horizon::Medium, Horizon::Long] {
            let basis = HorizonBasis::new(horizon, &db);
            let plus = eval_basis(horizon, [x, y, z], &db);
            let minus = eval_basis(horizon, [-x, -y, -z], &db);
            for ((term, a), b) in basis.terms.iter().zip(&plus).zip(&minus) {
                for m in &term.monomials {
                    let sign = if m.degree() % 2 == 0 { 1.0 } else { -1.0 };
                    prop_assert_eq!(m.eval([-x, -y, -z]), sign * m.eval([x, y, z]));
                }
                let degrees: Vec<u32> = term.monomials.iter().map(|m| m.degree() % 2).collect();
                if degrees.windows(2).all(|w| w[0] == w[1]) {
                    let sign = if degrees[0] == 0 { 1.0 } else { -1.0 };
                    prop_assert_eq!(*b, sign * a);
                }
            }
        }
    }
}

// ---------------------------------------------------------------- picard

fn params() -> impl Strategy<Value = BoundParams> {
    (0.1f64..10.0, 0.1f64..5.0, 0.01f64..2.0, 0.0f64..3.0, 0.0f64..2.0, 0.05f64..1.0, 0.0f64..2.0).prop_map(|(k, pib, h, t, y, lambda, c)| BoundParams {
        k,
        pib_e_alpha: pib,
        h,
        t,
        t0: 0.0,
        y_norm: y,
        lambda,
        c,
        ..BoundParams::default()
    })
}

proptest! {
    #[test]
    fn log_and_direct_bounds_agree(p in params(), v in prop::sample::select(vec![BoundVariant::FactorialProduct, BoundVariant::ExponentialForm, BoundVariant::GeometricForm])) {
        let log = picard::log_bounds(&p, v, 40).unwrap();
        let direct = picard::direct_bounds(&p, v, 40).unwrap();
        for (l, d) in log.iter().zip(&direct) {
            if d.is_finite() && *d > 0.0 && *d > f64::MIN_POSITIVE * 1e10 {
                prop_assert!((l.exp() - d).abs() <= 1e-9 * d, "{} vs {}", l.exp(), d);
            }
        }
    }

    #[test]
    fn scaling_k_shifts_every_log_bound(p in params(), scale in 0.1f64..20.0) {
        for v in [BoundVariant::FactorialProduct, BoundVariant::ExponentialForm, BoundVariant::GeometricForm] {
            let a = picard::log_bounds(&p, v, 30).unwrap();
            let b = picard::log_bounds(&BoundParams { k: p.k * scale, ..p }, v, 30).unwrap();
            for (x, y) in a.iter().zip(&b) {
                if x.is_finite() {
                    prop_assert!((y - x - scale.ln()).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn geometric_verdict_follows_ratio(p in params(), target in prop::sample::select(vec![0.3, 0.8, 1.0, 1.2, 3.0])) {
        prop_assume!(p.t > 0.01);
        // solve for the step that puts the ratio at the target
        let unit = BoundParams { h: 1.0, ..p };
        let h = target / unit.geometric_ratio();
        let q = BoundParams { h, ..p };
        let cert = picard::bound_sequence(&q, BoundVariant::GeometricForm, 2000, 1e-6).unwrap();
        let expected_converges = target < 1.0;
        match cert.verdict {
            Verdict::ConvergedAt(_) => prop_assert!(expected_converges),
            Verdict::Diverged => prop_assert!(target > 1.0),
            Verdict::Inconclusive => prop_assert!(target == 1.0 && q.aggregated_prefactor().unwrap() >= 1e-6),
        }
    }

    #[test]
    fn factorial_bounds_eventually_decrease(p in params()) {
        prop_assume!((-p.c * p.lambda).exp() * p.h * p.time_gap() < 0.9);
        let cert = picard::bound_sequence(&p, BoundVariant::FactorialProduct, 1000, 1e-6).unwrap();
        let start = cert.decreasing_from.expect("a decreasing tail");
        for w in cert.log_bounds[start..].windows(2) {
            prop_assert!(w[1] < w[0]);
        }
    }
}

// ---------------------------------------------------------------- fractal

fn ordered(b: &FractalBound) -> bool {
    b.lower <= b.point && b.point <= b.upper
}

#[test]
fn box_dimension_is_affine_invariant() {
    let path = simulate_brownian(1 << 13, 0.0, 1.0, 31).unwrap();
    let base = fractal::box_counting_dimension(&path.values, 8).unwrap();
    for (a, b) in [(3.0, 1.0), (-0.2, 5.0), (1e4, -7.0)] {
        let moved: Vec<f64> = path.values.iter().map(|v| a * v + b).collect();
        let d = fractal::box_counting_dimension(&moved, 8).unwrap();
        assert!((d.point - base.point).abs() <= base.width().max(1e-9), "{} vs {}", d.point, base.point);
        assert!(ordered(&d));
    }
}

#[test]
fn subsampling_moves_estimate_little() {
    for seed in 0..10 {
        let path = simulate_brownian(1 << 14, 0.0, 1.0, dynamics::replication_seed(404, seed)).unwrap();
        let full = fractal::box_counting_dimension(&path.values, 8).unwrap();
        let half: Vec<f64> = path.values.iter().step_by(2).copied().collect();
        let sub = fractal::box_counting_dimension(&half, 7).unwrap();
        assert!((full.point - sub.point).abs() < 0.1, "seed {seed}: {} vs {}", full.point, sub.point);
    }
}

#[test]
fn box_and_rescaled_range_agree_on_brownian_paths() {
    let reps = 40;
    let mut agree = 0;
    for r in 0..reps {
        let path = simulate_brownian(1 << 14, 0.0, 1.0, dynamics::replication_seed(808, r)).unwrap();
        let bx = fractal::box_counting_dimension(&path.values, 8).unwrap();
        let rs = fractal::hurst_rescaled_range(&path.increments(), 16, 4096).unwrap();
        let gap = (bx.point - rs.point).abs();
        if gap <= (bx.point - bx.lower) + (rs.point - rs.lower) {
            agree += 1;
        }
        assert!(ordered(&bx) && ordered(&rs));
    }
    assert!(agree as f64 >= 0.8 * reps as f64, "{agree}/{reps}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bounds_are_ordered(values in prop::collection::vec(-100.0f64..100.0, 64..600)) {
        let scales = fractal::max_box_scales(values.len()).max(4);
        if let Ok(b) = fractal::box_counting_dimension(&values, scales) {
            prop_assert!(ordered(&b));
        }
        for method in [fractal::hurst_rescaled_range, fractal::hurst_rescaled_range_corrected] {
            if let Ok(b) = method(&values, 8, values.len() / 2) {
                prop_assert!(ordered(&b));
            }
        }
    }
}
