//! Riesz estimator against a Gaussian-kernel KDE on the same law.

use riesz::estimators::{draw_samples, estimate_density, kde_baseline, silverman_bandwidth, EstimatorConfig};
use riesz::scenarios::{get_scenario, ScenarioParams};

fn main() -> riesz::Result<()> {
    let sc = get_scenario("tanh-couple", &ScenarioParams::default())?;
    let cfg = EstimatorConfig::default().with_n(200_000).with_seed(7).with_workers(0);
    let samples = draw_samples(&sc.f, &cfg.clone().with_seed(8))?;
    let h = silverman_bandwidth(&samples)?;
    println!("bandwidth {h:.4}");
    for t in [-1.5, -0.5, 0.0, 0.5, 1.5] {
        let x = [t, 0.3 * t];
        let r = estimate_density(&sc.f, &x, &cfg)?;
        println!("x = {x:?}: riesz {:.5} ± {:.5}, kde {:.5}", r.value, r.stderr.unwrap_or(f64::NAN), kde_baseline(&samples, &x, h)?);
    }
    Ok(())
}
