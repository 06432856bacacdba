use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use riesz::jets::{jet_eval, Expr};
use riesz::verify::{jet_fd_errors, random_dag};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn random_dags_match_finite_differences(seed in any::<u64>(), w in prop::collection::vec(-1.5f64..1.5, 3)) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let e = random_dag(&mut rng, 3, 6);
        if let Some([g, h, t]) = jet_fd_errors(&e, &w, 1e-5) {
            prop_assert!(g <= 1e-6, "gradient {g:e} for {e}");
            prop_assert!(h <= 1e-4, "hessian {h:e} for {e}");
            prop_assert!(t <= 1e-3, "third {t:e} for {e}");
        }
    }

    #[test]
    fn jet_value_is_plain_evaluation(seed in any::<u64>(), w in prop::collection::vec(-2.0f64..2.0, 2)) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let e = random_dag(&mut rng, 2, 5);
        let (Ok(v), Ok(j)) = (e.eval(&w), jet_eval(&e, &w, 3)) else { return Ok(()) };
        prop_assert!((j.value() - v).abs() <= 1e-12 * v.abs().max(1.0));
    }

    #[test]
    fn hessian_and_third_are_symmetric(seed in any::<u64>(), w in prop::collection::vec(-1.0f64..1.0, 3)) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let e = random_dag(&mut rng, 3, 6);
        let Ok(j) = jet_eval(&e, &w, 3) else { return Ok(()) };
        for a in 0..3 {
            for b in 0..3 {
                prop_assert_eq!(j.hess(a, b).to_bits(), j.hess(b, a).to_bits());
                for c in 0..3 {
                    prop_assert_eq!(j.third(a, b, c).to_bits(), j.third(c, a, b).to_bits());
                }
            }
        }
    }
}

#[test]
fn product_of_exponentials() {
    // exp(x)·exp(y) has every derivative equal to the value
    let e = Expr::var(0).exp() * Expr::var(1).exp();
    let j = jet_eval(&e, &[0.3, -0.4], 3).unwrap();
    let v = (-0.1f64).exp();
    assert!((j.grad(1) - v).abs() < 1e-14);
    assert!((j.hess(0, 1) - v).abs() < 1e-14);
    assert!((j.third(0, 1, 1) - v).abs() < 1e-14);
}
