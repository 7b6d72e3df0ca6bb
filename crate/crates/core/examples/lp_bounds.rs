//! Lp distances under the identity and Möbius weights, and the
//! best-polynomial bound against a few candidate curves.

use std::error::Error;

use frontier_lab::lp::{best_poly_bound, lp_distance, CurvePair, MobiusWeight, UniformGrid, Weight};

fn main() -> Result<(), Box<dyn Error>> {
    let grid = UniformGrid::new(1.0, std::f64::consts::E, 401)?;
    let pair = CurvePair::from_fns(grid, f64::ln, |t| (t - 1.0) / (std::f64::consts::E - 1.0), 2.0)?;

    let plain = lp_distance(&pair, &Weight::Identity)?;
    let mobius = MobiusWeight::new(2.0, 1.0, 0.0, 1.0)?;
    let weighted = lp_distance(&pair, &Weight::Mobius(mobius))?;
    let reciprocal = lp_distance(&pair, &Weight::Mobius(mobius.reciprocal()))?;
    println!("L2 distance: identity {plain:.6}, mobius {weighted:.6}, reciprocal {reciprocal:.6}");

    let target = grid.sample(|t| t.ln() * t.sqrt());
    let candidate = grid.sample(|t| 0.2 * t * t);
    for p in [1.0, 1.5, 2.0, 3.0] {
        for degree in [1, 3, 5] {
            let b = best_poly_bound(&grid, &target, degree, p, &candidate)?;
            println!("p {p}, degree {degree}: best {:.3e} <= candidate {:.3e} ({} iterations)", b.achieved_error, b.lambda, b.iterations);
        }
    }
    Ok(())
}
