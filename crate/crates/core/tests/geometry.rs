use proptest::prelude::*;
use riesz::geometry::{build_grid_field, graph_distance, riesz_distance, FieldSource, GridField, Threshold};
use riesz::scenarios::AnalyticDensity;
use std::sync::OnceLock;

fn field() -> &'static GridField {
    static F: OnceLock<GridField> = OnceLock::new();
    F.get_or_init(|| {
        let a = AnalyticDensity::standard(2);
        build_grid_field(FieldSource::Analytic(&a), &[-3.0; 2], &[3.0; 2], 41, Threshold::default()).unwrap()
    })
}

fn pt() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.5f64..2.5, 2)
}

fn logp(x: &[f64]) -> f64 {
    AnalyticDensity::standard(2).density(x).ln()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn graph_distance_is_a_semi_metric(x in pt(), y in pt(), z in pt()) {
        let f = field();
        let xy = graph_distance(f, &x, &y).unwrap().value();
        let yz = graph_distance(f, &y, &z).unwrap().value();
        let xz = graph_distance(f, &x, &z).unwrap().value();
        prop_assert!(xy >= 0.0);
        prop_assert!(xz <= xy + yz + 1e-9);
        prop_assert!((xy - graph_distance(f, &y, &x).unwrap().value()).abs() <= 1e-9);
    }

    #[test]
    fn riesz_distance_is_symmetric_and_bounded_below(x in pt(), y in pt()) {
        let f = field();
        let d = riesz_distance(f, &x, &y).unwrap().value();
        prop_assert_eq!(d.to_bits(), riesz_distance(f, &y, &x).unwrap().value().to_bits());
        // evaluated at the snapped nodes, the score integral along any path is |Δ ln p|
        let (sx, sy) = (f.node(f.snap(&x).unwrap()), f.node(f.snap(&y).unwrap()));
        prop_assert!(d >= (logp(&sy) - logp(&sx)).abs() - 2e-2, "{d} vs {}", (logp(&sy) - logp(&sx)).abs());
        prop_assert!(d <= graph_distance(f, &x, &y).unwrap().value() + 1e-12);
    }
}
