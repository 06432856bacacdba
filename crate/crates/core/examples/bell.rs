//! The score integrated along a polyline recovers `ln p(end) − ln p(start)`,
//! whatever the route, here with a mixture density.

use riesz::geometry::{bell_path_integral, build_grid_field, FieldSource, Threshold};
use riesz::scenarios::AnalyticDensity;

fn main() -> riesz::Result<()> {
    let cov = vec![vec![1.0, 0.3], vec![0.3, 0.6]];
    let a = AnalyticDensity::Mixture(vec![
        (0.6, AnalyticDensity::gaussian(vec![-0.8, 0.0], cov.clone())?),
        (0.4, AnalyticDensity::gaussian(vec![1.0, 0.5], cov)?),
    ]);
    let field = build_grid_field(FieldSource::Analytic(&a), &[-4.0; 2], &[4.0; 2], 81, Threshold::default())?;
    let routes = [
        vec![vec![-1.0, -1.0], vec![1.5, 1.0]],
        vec![vec![-1.0, -1.0], vec![-1.0, 1.0], vec![1.5, 1.0]],
        vec![vec![-1.0, -1.0], vec![2.0, -1.5], vec![2.0, 2.0], vec![1.5, 1.0]],
    ];
    let exact = a.density(&[1.5, 1.0]).ln() - a.density(&[-1.0, -1.0]).ln();
    for r in &routes {
        println!("{} legs: {:.6}   (ln p ratio {exact:.6})", r.len() - 1, bell_path_integral(&field, r)?);
    }
    Ok(())
}
