use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use super::Jet;
use crate::error::{Error, Result};

/// One node of an expression DAG over the inputs `w_0, …, w_{n-1}`.
#[derive(Debug)]
pub enum Node {
    Var(usize),
    Const(f64),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Neg(Expr),
    Powi(Expr, i32),
    Powf(Expr, f64),
    Exp(Expr),
    Ln(Expr),
    Tanh(Expr),
    Sin(Expr),
    Cos(Expr),
    /// Σ eᵢ² over the listed sub-expressions.
    SqNorm(Vec<Expr>),
}

/// Shared handle to an expression node. Cloning is cheap, so sub-expressions
/// can be reused freely to build DAGs.
#[derive(Clone, Debug)]
pub struct Expr(Arc<Node>);

impl Expr {
    pub fn new(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub fn var(k: usize) -> Self {
        Self::new(Node::Var(k))
    }

    pub fn constant(c: f64) -> Self {
        Self::new(Node::Const(c))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn powi(&self, k: i32) -> Self {
        Self::new(Node::Powi(self.clone(), k))
    }

    pub fn powf(&self, e: f64) -> Self {
        Self::new(Node::Powf(self.clone(), e))
    }

    pub fn exp(&self) -> Self {
        Self::new(Node::Exp(self.clone()))
    }

    pub fn ln(&self) -> Self {
        Self::new(Node::Ln(self.clone()))
    }

    pub fn tanh(&self) -> Self {
        Self::new(Node::Tanh(self.clone()))
    }

    pub fn sin(&self) -> Self {
        Self::new(Node::Sin(self.clone()))
    }

    pub fn cos(&self) -> Self {
        Self::new(Node::Cos(self.clone()))
    }

    pub fn sq_norm(parts: Vec<Expr>) -> Self {
        Self::new(Node::SqNorm(parts))
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self.node() {
            Node::Var(k) => Some(*k),
            Node::Const(_) => None,
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.max_var().max(b.max_var())
            }
            Node::Neg(a)
            | Node::Powi(a, _)
            | Node::Powf(a, _)
            | Node::Exp(a)
            | Node::Ln(a)
            | Node::Tanh(a)
            | Node::Sin(a)
            | Node::Cos(a) => a.max_var(),
            Node::SqNorm(parts) => parts.iter().filter_map(Expr::max_var).max(),
        }
    }

    /// Plain floating-point evaluation.
    pub fn eval(&self, w: &[f64]) -> Result<f64> {
        let v = match self.node() {
            Node::Var(k) => *w
                .get(*k)
                .ok_or(Error::IndexOutOfRange { index: *k, n: w.len() })?,
            Node::Const(c) => *c,
            Node::Add(a, b) => a.eval(w)? + b.eval(w)?,
            Node::Sub(a, b) => a.eval(w)? - b.eval(w)?,
            Node::Mul(a, b) => a.eval(w)? * b.eval(w)?,
            Node::Div(a, b) => {
                let den = b.eval(w)?;
                if den == 0.0 {
                    return Err(self.domain(den));
                }
                a.eval(w)? / den
            }
            Node::Neg(a) => -a.eval(w)?,
            Node::Powi(a, k) => {
                let x = a.eval(w)?;
                if x == 0.0 && *k < 0 {
                    return Err(self.domain(x));
                }
                x.powi(*k)
            }
            Node::Powf(a, e) => {
                let x = a.eval(w)?;
                check_powf(x, *e).map_err(|_| self.domain(x))?;
                x.powf(*e)
            }
            Node::Exp(a) => a.eval(w)?.exp(),
            Node::Ln(a) => {
                let x = a.eval(w)?;
                if x <= 0.0 {
                    return Err(self.domain(x));
                }
                x.ln()
            }
            Node::Tanh(a) => a.eval(w)?.tanh(),
            Node::Sin(a) => a.eval(w)?.sin(),
            Node::Cos(a) => a.eval(w)?.cos(),
            Node::SqNorm(parts) => {
                let mut s = 0.0;
                for p in parts {
                    let v = p.eval(w)?;
                    s += v * v;
                }
                s
            }
        };
        Ok(v)
    }

    fn domain(&self, value: f64) -> Error {
        Error::Domain { node: self.to_string(), value }
    }

    fn jet(&self, vars: &[Jet]) -> Result<Jet> {
        let n = vars[0].n();
        let order = vars[0].order();
        let out = match self.node() {
            Node::Var(k) => vars
                .get(*k)
                .cloned()
                .ok_or(Error::IndexOutOfRange { index: *k, n })?,
            Node::Const(c) => Jet::constant(n, order, *c),
            Node::Add(a, b) => a.jet(vars)? + b.jet(vars)?,
            Node::Sub(a, b) => a.jet(vars)? - b.jet(vars)?,
            Node::Mul(a, b) => a.jet(vars)? * b.jet(vars)?,
            Node::Div(a, b) => {
                let den = b.jet(vars)?;
                if den.value() == 0.0 {
                    return Err(self.domain(0.0));
                }
                a.jet(vars)? / den
            }
            Node::Neg(a) => -a.jet(vars)?,
            Node::Powi(a, k) => {
                let x = a.jet(vars)?;
                if x.value() == 0.0 && *k < 0 {
                    return Err(self.domain(0.0));
                }
                x.powi(*k)
            }
            Node::Powf(a, e) => {
                let x = a.jet(vars)?;
                let v = x.value();
                if e.fract() == 0.0 && e.abs() <= i32::MAX as f64 {
                    if v == 0.0 && *e < 0.0 {
                        return Err(self.domain(v));
                    }
                    x.powi(*e as i32)
                } else if v <= 0.0 {
                    // non-integer powers have no jet at or below zero
                    return Err(self.domain(v));
                } else {
                    x.powf(*e)
                }
            }
            Node::Exp(a) => a.jet(vars)?.exp(),
            Node::Ln(a) => {
                let x = a.jet(vars)?;
                if x.value() <= 0.0 {
                    return Err(self.domain(x.value()));
                }
                x.ln()
            }
            Node::Tanh(a) => a.jet(vars)?.tanh(),
            Node::Sin(a) => a.jet(vars)?.sin(),
            Node::Cos(a) => a.jet(vars)?.cos(),
            Node::SqNorm(parts) => {
                let mut s = Jet::zero(n, order);
                for p in parts {
                    let v = p.jet(vars)?;
                    s = s + &v * &v;
                }
                s
            }
        };
        Ok(out)
    }

    /// Jet of the expression at `w` using pre-seeded coordinate jets.
    pub fn jet_at(&self, vars: &[Jet]) -> Result<Jet> {
        self.jet(vars)
    }
}

fn check_powf(x: f64, e: f64) -> std::result::Result<(), ()> {
    if x < 0.0 && e.fract() != 0.0 {
        return Err(());
    }
    if x == 0.0 && e < 0.0 {
        return Err(());
    }
    Ok(())
}

/// Evaluates `expr` at `w` to a jet of the requested order.
pub fn jet_eval(expr: &Expr, w: &[f64], order: usize) -> Result<Jet> {
    if w.is_empty() {
        return Err(Error::Dimension { expected: 1, got: 0 });
    }
    let vars = Jet::seed_all(w, order)?;
    expr.jet(&vars)
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Var(k) => write!(f, "w{k}"),
            Node::Const(c) => write!(f, "{c}"),
            Node::Add(a, b) => write!(f, "({a} + {b})"),
            Node::Sub(a, b) => write!(f, "({a} - {b})"),
            Node::Mul(a, b) => write!(f, "{a}*{b}"),
            Node::Div(a, b) => write!(f, "{a}/{b}"),
            Node::Neg(a) => write!(f, "-{a}"),
            Node::Powi(a, k) => write!(f, "{a}^{k}"),
            Node::Powf(a, e) => write!(f, "{a}^{e}"),
            Node::Exp(a) => write!(f, "exp({a})"),
            Node::Ln(a) => write!(f, "ln({a})"),
            Node::Tanh(a) => write!(f, "tanh({a})"),
            Node::Sin(a) => write!(f, "sin({a})"),
            Node::Cos(a) => write!(f, "cos({a})"),
            Node::SqNorm(parts) => {
                write!(f, "|")?;
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{p}")?;
                }
                write!(f, "|^2")
            }
        }
    }
}

macro_rules! expr_binop {
    ($trait:ident, $method:ident, $variant:ident) => {
        impl $trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::new(Node::$variant(self, rhs))
            }
        }
        impl $trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::new(Node::$variant(self.clone(), rhs.clone()))
            }
        }
        impl $trait<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::new(Node::$variant(self, rhs.clone()))
            }
        }
        impl $trait<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::new(Node::$variant(self.clone(), rhs))
            }
        }
        impl $trait<&Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::new(Node::$variant(Expr::constant(self), rhs.clone()))
            }
        }
        impl $trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::new(Node::$variant(self, Expr::constant(rhs)))
            }
        }
        impl $trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::new(Node::$variant(Expr::constant(self), rhs))
            }
        }
    };
}

expr_binop!(Add, add, Add);
expr_binop!(Sub, sub, Sub);
expr_binop!(Mul, mul, Mul);
expr_binop!(Div, div, Div);

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::new(Node::Neg(self))
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::new(Node::Neg(self.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_in_one_variable() {
        let e = Expr::var(0).powi(2);
        let j = jet_eval(&e, &[3.0], 2).unwrap();
        assert_eq!(j.value(), 9.0);
        assert_eq!(j.gradient(), vec![6.0]);
        assert_eq!(j.hessian(), vec![vec![2.0]]);
    }

    #[test]
    fn exp_of_product() {
        let e = (Expr::var(0) * Expr::var(1)).exp();
        let j = jet_eval(&e, &[1.0, 0.0], 2).unwrap();
        assert_eq!(j.value(), 1.0);
        assert_eq!(j.gradient(), vec![0.0, 1.0]);
        // ∂²/∂w₁² e^{w₀w₁} = w₀² e^{w₀w₁} = 1 at (1, 0)
        assert_eq!(j.hessian(), vec![vec![0.0, 1.0], vec![1.0, 1.0]]);
        let fd = |i: usize, j: usize| {
            let h = 1e-4;
            let f = |a: f64, b: f64| (a * b).exp();
            let mut p = [1.0, 0.0];
            let mut eval = |di: f64, dj: f64| {
                p = [1.0, 0.0];
                p[i] += di;
                p[j] += dj;
                f(p[0], p[1])
            };
            (eval(h, h) - eval(h, -h) - eval(-h, h) + eval(-h, -h)) / (4.0 * h * h)
        };
        assert!((fd(1, 1) - 1.0).abs() < 1e-6);
        assert!((fd(0, 1) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ln_of_negative_names_the_node() {
        let e = Expr::var(0).ln();
        match jet_eval(&e, &[-1.0], 1) {
            Err(Error::Domain { node, value }) => {
                assert_eq!(node, "ln(w0)");
                assert_eq!(value, -1.0);
            }
            other => panic!("expected domain error, got {other:?}"),
        }
        assert!(e.eval(&[-1.0]).is_err());
    }

    #[test]
    fn division_by_zero() {
        let e = Expr::constant(1.0) / Expr::var(0);
        assert!(matches!(jet_eval(&e, &[0.0], 1), Err(Error::Domain { .. })));
    }

    #[test]
    fn sq_norm_matches_expanded_sum() {
        let w = [0.3, -0.7, 1.1];
        let parts: Vec<Expr> = (0..3).map(Expr::var).collect();
        let a = jet_eval(&Expr::sq_norm(parts), &w, 3).unwrap();
        let b = jet_eval(
            &(Expr::var(0).powi(2) + Expr::var(1).powi(2) + Expr::var(2).powi(2)),
            &w,
            3,
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn max_var_and_display() {
        let e = Expr::var(0) * Expr::var(4).sin() + 2.0;
        assert_eq!(e.max_var(), Some(4));
        assert_eq!(e.to_string(), "(w0*sin(w4) + 2)");
    }
}
