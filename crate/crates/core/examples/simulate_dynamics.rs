//! A seeded Brownian driver feeding the investigation/development system,
//! with the three horizon bases read off at the end of the path.

use std::error::Error;

use frontier_lab::dynamics::{integrate_id, simulate_brownian, DoubleBound, Horizon, HorizonBasis, IdCoefficients, IdState};

fn main() -> Result<(), Box<dyn Error>> {
    let path = simulate_brownian(2048, 0.0, 1.0, 42)?;
    let again = simulate_brownian(2048, 0.0, 1.0, 42)?;
    assert_eq!(path.values, again.values);
    println!("W(1) = {:.5} over {} partitions", path.end(), path.partitions());

    let coeffs = IdCoefficients::default()
        .with_investigation(vec![Box::new(|x, _| 0.2 * x)])
        .with_base(|_, _| -0.5)
        .with_development(vec![0.1], vec![0.1]);
    let traj = integrate_id(IdState { i: 0.1, d: 0.1, t: 0.0 }, &coeffs, &path, 256)?;
    let end = traj.last();
    println!("i({:.2}) = {:.5}, d = {:.5}, blew up: {}", end.t, end.i, end.d, traj.blew_up);

    let db = DoubleBound::new(1.0, 1.0, 1.0, 1.0)?;
    let point = [path.end(), end.i, end.d];
    for horizon in [Horizon::Short, Horizon::Medium, Horizon::Long] {
        let basis = HorizonBasis::new(horizon, &db);
        let values = basis.eval(point);
        let labels: Vec<String> = basis.terms.iter().map(|t| t.label()).collect();
        println!("{horizon:?}: total {:.5}", basis.total(point));
        for (label, v) in labels.iter().zip(&values) {
            println!("  {label} {v:+.5}");
        }
    }
    Ok(())
}
