//! First derivatives of the density. For the standard Gaussian in the
//! plane, `∂₁p(x) = −x₁ p(x)`.

use riesz::estimators::{estimate_density_grad, EstimatorConfig};
use riesz::malliavin::MultiIndex;
use riesz::scenarios::{get_scenario, ScenarioParams};

fn main() -> riesz::Result<()> {
    let sc = get_scenario("gauss-identity-d2", &ScenarioParams::default())?;
    let cfg = EstimatorConfig::default().with_n(300_000).with_seed(2).with_workers(0);
    for x in [[-1.0, 0.0], [0.5, 0.5], [1.5, -0.3]] {
        for axis in 0..2 {
            let r = estimate_density_grad(&sc.f, &x, &MultiIndex::new(&[axis]), &cfg)?;
            let exact = -x[axis] * sc.analytic_density(&x).unwrap();
            println!("∂{}p({x:?}) = {:+.5} ± {:.5}   exact {exact:+.5}", axis + 1, r.value, r.stderr.unwrap_or(f64::NAN));
        }
    }
    Ok(())
}
