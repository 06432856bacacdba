//! `E[G(W) | F(W) = x]` as a ratio of weighted density estimates.

use riesz::estimators::{estimate_conditional, EstimatorConfig};
use riesz::jets::Expr;
use riesz::scenarios::{get_scenario, ScenarioParams};

fn main() -> riesz::Result<()> {
    let sc = get_scenario("linear", &ScenarioParams::default())?;
    let cfg = EstimatorConfig::default().with_n(200_000).with_seed(3).with_workers(0);
    // F = A w with A = [[2, 0], [0.5, 1]], so w₁ = F₁/2 and E[w₁² | F = x] = x₁²/4
    let g = Expr::var(0).powi(2);
    for x in [[0.0, 0.0], [1.0, 0.2], [-1.6, 0.4]] {
        let r = estimate_conditional(&sc.f, &g, &x, &cfg)?;
        println!("E[w₁² | F = {x:?}] = {:.4} ± {:.4}   exact {:.4}", r.value, r.stderr.unwrap_or(f64::NAN), x[0] * x[0] / 4.0);
    }
    Ok(())
}
