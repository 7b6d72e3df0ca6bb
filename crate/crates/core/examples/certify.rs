//! Picard-style bound sequences for each variant, plus the efficiency
//! interval they imply.

use std::error::Error;

use frontier_lab::picard::{bound_sequence, efficiency_interval, BoundParams, BoundVariant};

fn main() -> Result<(), Box<dyn Error>> {
    let params = BoundParams { k: 2.0, pib_e_alpha: 1.3, h: 0.1, t: 1.0, lambda: 0.2, c: 0.3, ..BoundParams::default() };
    println!("geometric ratio {:.4}, prefactor {:.4}", params.geometric_ratio(), params.aggregated_prefactor()?);

    for variant in [BoundVariant::FactorialProduct, BoundVariant::ExponentialForm, BoundVariant::GeometricForm] {
        let cert = bound_sequence(&params, variant, 60, 1e-6)?;
        let head: Vec<String> = cert.bounds.iter().take(6).map(|b| format!("{b:.3e}")).collect();
        println!("{variant:?}: {:?}, decreasing from {:?}, first terms [{}]", cert.verdict, cert.decreasing_from, head.join(", "));
    }

    // A large step pushes the geometric ratio past one.
    let wide = BoundParams { h: 5.0, ..params };
    println!("h = 5: {:?}", bound_sequence(&wide, BoundVariant::GeometricForm, 60, 1e-6)?.verdict);

    let interval = efficiency_interval(&params)?;
    println!("efficiency interval [{:.4}, {:.4}], brackets: {}", interval.low(), interval.high(), interval.brackets());
    Ok(())
}
