//! Density of a non-Gaussian functional at a few points, with 95% intervals.
//!
//! `cargo run --release --example density`

use riesz::estimators::{estimate_density, EstimatorConfig};
use riesz::scenarios::{get_scenario, ScenarioParams};

fn main() -> riesz::Result<()> {
    let cfg = EstimatorConfig::default().with_n(200_000).with_seed(1).with_workers(0);
    for id in ["linear", "tanh-couple"] {
        let sc = get_scenario(id, &ScenarioParams::default())?;
        for x in [[0.0, 0.0], [1.0, 0.5]] {
            let r = estimate_density(&sc.f, &x, &cfg)?;
            let se = r.stderr.unwrap_or(f64::NAN);
            let exact = sc.analytic_density(&x).map_or("n/a".into(), |p| format!("{p:.5}"));
            println!("{id:12} p({x:?}) = {:.5} ± {:.5}  (exact {exact}, r_min {:.3})", r.value, 1.96 * se, r.r_min_used);
        }
    }
    Ok(())
}
