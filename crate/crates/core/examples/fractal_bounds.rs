//! Ex Ante against Ex Post dimension bounds for a Brownian path and for a
//! trending series.

use std::error::Error;

use frontier_lab::dynamics::simulate_brownian;
use frontier_lab::fractal::{
    box_counting_dimension, ex_ante_bound, hurst_rescaled_range, hurst_rescaled_range_corrected, indexing_power, ExAnteModel, FractalBound,
};

fn show(name: &str, b: &FractalBound) {
    println!("{name:>14}: {:.4} [{:.4}, {:.4}]", b.point, b.lower, b.upper);
}

fn main() -> Result<(), Box<dyn Error>> {
    let path = simulate_brownian(1 << 14, 0.0, 1.0, 9)?;
    let ante = ex_ante_bound(ExAnteModel::Brownian);
    let boxes = box_counting_dimension(&path.values, 8)?;
    let raw = hurst_rescaled_range(&path.increments(), 16, 4096)?;
    let corrected = hurst_rescaled_range_corrected(&path.increments(), 16, 4096)?;
    show("ex ante", &ante);
    show("box counting", &boxes);
    show("R/S raw", &raw);
    show("R/S corrected", &corrected);
    println!("indexing: {:?}", indexing_power(&ante, &corrected));

    let trend: Vec<f64> = path.values.iter().enumerate().map(|(k, w)| k as f64 / 100.0 + 0.01 * w).collect();
    let line = box_counting_dimension(&trend, 8)?;
    show("trend boxes", &line);
    println!("trend vs brownian model: {:?}", indexing_power(&ante, &line).verdict);
    println!("trend vs linear model: {:?}", indexing_power(&ex_ante_bound(ExAnteModel::LinearTrend), &line).verdict);
    Ok(())
}
