//! Connected components of `{p > 0}` for a mixture with a gap, and the
//! density and distance along a probe sequence heading into the gap.

use riesz::geometry::{build_grid_field, positivity_report, riesz_distance, FieldSource, Threshold};
use riesz::scenarios::AnalyticDensity;

fn main() -> riesz::Result<()> {
    let c = vec![vec![0.25, 0.0], vec![0.0, 0.25]];
    let a = AnalyticDensity::Mixture(vec![
        (0.5, AnalyticDensity::gaussian(vec![-3.0, 0.0], c.clone())?),
        (0.5, AnalyticDensity::gaussian(vec![3.0, 0.0], c)?),
    ]);
    let field = build_grid_field(FieldSource::Analytic(&a), &[-5.0, -2.0], &[5.0, 2.0], 101, Threshold::default())?;
    let probes: Vec<Vec<f64>> = (0..6).map(|k| vec![-3.0 + 0.3 * k as f64, 0.0]).collect();
    let rep = positivity_report(&field, &probes)?;
    println!("{} components, sizes {:?}, cutoff {:.2e}", rep.components, rep.sizes, rep.threshold);
    for row in &rep.probes {
        let d = row.distance.map_or("inf".into(), |v| format!("{v:.3}"));
        println!("x = {:?}: p = {:.3e}, d to start = {d}", row.x, row.p_hat);
    }
    println!("across the gap: {:?}", riesz_distance(&field, &[-3.0, 0.0], &[3.0, 0.0])?);
    Ok(())
}
