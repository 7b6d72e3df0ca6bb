//! Quantile frontiers as an envelope: the share of firms above the surface
//! tracks one minus the quantile.

use std::error::Error;

use frontier_lab::frontier::{fit_quantile, FrontierSpec};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 400;
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..10.0)).collect();
    let y: Vec<f64> = x.iter().map(|&xi| 2.0 * xi.powf(0.6) * rng.random_range(0.5..1.0)).collect();
    let xm = DMatrix::from_column_slice(n, 1, &x);
    let spec = FrontierSpec::new(["capital"]);

    for tau in [0.5, 0.9, 0.95, 0.99] {
        let q = fit_quantile(&spec, &xm, &y, tau)?;
        println!(
            "tau {tau:.2}: beta {:.3?}, above {} ({:.1}% of firms), loss {:.3}",
            q.beta,
            q.above,
            100.0 * q.above as f64 / n as f64,
            q.loss
        );
    }
    Ok(())
}
