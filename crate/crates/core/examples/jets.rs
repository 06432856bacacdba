//! Third-order Taylor jets of an expression, and the Malliavin weights
//! they feed.

use riesz::jets::{jet_eval, Expr};
use riesz::malliavin::{weight_first, Functional, DEFAULT_DET_THRESHOLD};

fn main() -> riesz::Result<()> {
    let (x, y) = (Expr::var(0), Expr::var(1));
    let e = (&x * &y).tanh() + (1.0 + x.powi(2)).ln();
    let j = jet_eval(&e, &[0.4, -1.2], 3)?;
    println!("value {:.6}", j.value());
    println!("gradient {:?}", j.gradient());
    println!("hessian {:?}", j.hessian());
    println!("∂³/∂x²∂y {:.6}", j.third(0, 0, 1));

    let f = Functional::new(2, vec![x.clone() + 0.3 * y.sin(), y.clone()])?;
    let h = weight_first(&f, &Expr::constant(1.0), &[0.4, -1.2], DEFAULT_DET_THRESHOLD)?;
    println!("H(F; 1) at w = (0.4, -1.2): {h:?}");
    Ok(())
}
