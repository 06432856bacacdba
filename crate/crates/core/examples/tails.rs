//! Tail estimate far from the bulk: the density at `x` against the bound
//! built from the mass of `B₂(x)`.

use riesz::estimators::{tail_bound_check, EstimatorConfig};
use riesz::scenarios::{get_scenario, ScenarioParams};

fn main() -> riesz::Result<()> {
    let sc = get_scenario("gauss-identity-d2", &ScenarioParams::default())?;
    let cfg = EstimatorConfig::default().with_n(200_000).with_seed(5).with_workers(0);
    let probes: Vec<Vec<f64>> = (-3..=3).flat_map(|i| (-3..=3).map(move |j| vec![i as f64, j as f64])).collect();
    for r in [1.0, 2.0, 3.0] {
        let t = tail_bound_check(&sc.f, &[r, 0.0], 0.2, 8.0, &probes, &cfg)?;
        println!(
            "x = ({r}, 0): p = {:.2e}, bound {:.3e}, μ(B₂(x)) = {:.3}  {}",
            t.lhs,
            t.rhs,
            t.ball_mass,
            if t.holds { "ok" } else { "VIOLATED" }
        );
    }
    Ok(())
}
