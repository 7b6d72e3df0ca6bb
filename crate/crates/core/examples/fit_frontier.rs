//! Half-normal and exponential frontiers on a simulated production set,
//! then country efficiency scores on the synthetic panels.

use std::error::Error;
use std::path::Path;

use frontier_lab::frontier::{efficiency_scores, fit_mle, EfficiencyDistribution, FrontierSpec, PanelDesign};
use frontier_lab::panel::parse_panel;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

fn main() -> Result<(), Box<dyn Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 1500;
    let noise = Normal::new(0.0, 0.1)?;
    let shortfall = Exp::new(1.0 / 0.25)?;
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..4.0)).collect();
    let y: Vec<f64> = x.iter().map(|&xi| 1.0 + 0.5 * xi + noise.sample(&mut rng) - shortfall.sample(&mut rng)).collect();
    let xm = DMatrix::from_column_slice(n, 1, &x);

    for dist in [EfficiencyDistribution::HalfNormal, EfficiencyDistribution::Exponential] {
        let spec = FrontierSpec::new(["x"]).with_log_transform(false).with_distribution(dist);
        let fit = fit_mle(&spec, &xm, &y)?;
        let mean_eff = fit.efficiency.iter().sum::<f64>() / n as f64;
        println!(
            "{dist:?}: beta {:.3?}, sigma_v {:.3}, sigma_u {:.3}, loglik {:.1}, mean efficiency {mean_eff:.3}",
            fit.beta, fit.sigma_v, fit.sigma_u, fit.loglik
        );
    }

    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let output = parse_panel(&std::fs::read_to_string(data.join("synthetic_output.csv"))?, "output")?;
    let labour = parse_panel(&std::fs::read_to_string(data.join("synthetic_labour.csv"))?, "labour")?;
    let design = PanelDesign::from_panels(&output, &[&labour], true);
    let fit = fit_mle(&FrontierSpec::new(design.inputs.clone()), &design.x, &design.y)?;
    println!("panel fit on {} observations, boundary: {}", design.len(), fit.boundary);
    for series in efficiency_scores(&fit, &design.keys)?.iter().take(5) {
        println!("  {} {:.3?}", series.code(), series.present_values());
    }
    Ok(())
}
