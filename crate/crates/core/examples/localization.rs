//! Localized density for `F = W²`, whose Malliavin covariance degenerates
//! at 0. The bump Ψ confines the estimate to a box away from the origin.

use riesz::estimators::EstimatorConfig;
use riesz::localize::{bump_domain, localized_density, BumpParams, Domain};
use riesz::scenarios::{get_scenario, ScenarioParams};

fn main() -> riesz::Result<()> {
    let sc = get_scenario("chi-square", &ScenarioParams::default())?;
    let params = BumpParams::new(0.1, Domain::Box { lo: vec![0.5], hi: vec![10.0] })?;
    let cfg = EstimatorConfig::default().with_n(200_000).with_seed(6).with_workers(0);
    for x in [0.55, 0.65, 0.75] {
        println!("Ψ({x}) = {:.4}", bump_domain(&params, &[x])?);
    }
    for x in [1.0, 2.0, 4.0] {
        let r = localized_density(&sc.f, &[x], &params, &cfg)?;
        let exact = (-x / 2.0).exp() / (2.0 * std::f64::consts::PI * x).sqrt();
        println!("p({x}) = {:.5} ± {:.5}   exact {exact:.5}", r.value, r.stderr.unwrap_or(f64::NAN));
    }
    Ok(())
}
