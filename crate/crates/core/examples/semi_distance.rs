//! Semi-distance on the positivity set of a planar Gaussian. Along a ray
//! it is `|Δ ln p|`; along a level circle it vanishes.

use riesz::geometry::{build_grid_field, energy_distance, graph_distance, riesz_distance, FieldSource, Threshold};
use riesz::scenarios::AnalyticDensity;

fn main() -> riesz::Result<()> {
    let a = AnalyticDensity::standard(2);
    let field = build_grid_field(FieldSource::Analytic(&a), &[-3.0; 2], &[3.0; 2], 61, Threshold::default())?;
    let pairs = [([0.0, 0.0], [1.0, 0.0]), ([1.0, 0.0], [0.0, 1.0]), ([-1.0, 1.0], [2.0, 0.5])];
    for (x, y) in pairs {
        println!(
            "{x:?} → {y:?}: d = {:.4}, lattice {:.4}, energy {:.4}",
            riesz_distance(&field, &x, &y)?.value(),
            graph_distance(&field, &x, &y)?.value(),
            energy_distance(&field, &x, &y, 32, 500)?.value(),
        );
    }
    Ok(())
}
