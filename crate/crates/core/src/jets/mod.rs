//! Dense multivariate Taylor jets up to third order.
//!
//! A [`Jet`] carries the value of a scalar function together with its
//! gradient, Hessian and third-derivative tensor at one point of the input
//! space ℝⁿ. Symmetric tensors are stored packed (upper-triangular index
//! order); accessors accept indices in any order.
//!
//! Arithmetic between jets of different orders truncates to the smaller
//! order, so reducing the order with [`Jet::derivative`] composes naturally
//! with the rest of the algebra.

mod expr;

pub use expr::{jet_eval, Expr, Node};

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 3;
pub const MAX_INPUTS: usize = 32;

#[inline]
fn tri(m: usize) -> usize {
    m * (m + 1) / 2
}

#[inline]
fn tet(m: usize) -> usize {
    m * (m + 1) * (m + 2) / 6
}

#[inline]
fn idx2(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    tri(n) - tri(n - i) + (j - i)
}

#[inline]
fn idx3(n: usize, i: usize, j: usize, k: usize) -> usize {
    let mut s = [i, j, k];
    s.sort_unstable();
    let [i, j, k] = s;
    tet(n) - tet(n - i) + idx2(n - i, j - i, k - i)
}

#[inline]
fn coef_len(n: usize, order: usize) -> usize {
    let mut len = 1;
    if order >= 1 {
        len += n;
    }
    if order >= 2 {
        len += tri(n);
    }
    if order >= 3 {
        len += tet(n);
    }
    len
}

/// Truncated Taylor expansion of a scalar function of `n` inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    order: usize,
    n: usize,
    coef: Vec<f64>,
}

impl Jet {
    pub fn constant(n: usize, order: usize, value: f64) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} > {MAX_ORDER}");
        let mut coef = vec![0.0; coef_len(n, order)];
        coef[0] = value;
        Jet { order, n, coef }
    }

    pub fn zero(n: usize, order: usize) -> Self {
        Self::constant(n, order, 0.0)
    }

    /// The coordinate function `w ↦ w_k` expanded at `w`.
    pub fn seed_variable(k: usize, w: &[f64], order: usize) -> Result<Self> {
        let n = w.len();
        if k >= n {
            return Err(Error::IndexOutOfRange { index: k, n });
        }
        if order > MAX_ORDER {
            return Err(Error::JetOrder { requested: order, max: MAX_ORDER });
        }
        if n > MAX_INPUTS {
            return Err(Error::Range {
                name: "n",
                reason: format!("{n} inputs exceed the dense cap of {MAX_INPUTS}"),
            });
        }
        let mut jet = Self::constant(n, order, w[k]);
        if order >= 1 {
            jet.coef[1 + k] = 1.0;
        }
        Ok(jet)
    }

    /// All `n` coordinate jets at `w`.
    pub fn seed_all(w: &[f64], order: usize) -> Result<Vec<Self>> {
        (0..w.len()).map(|k| Self::seed_variable(k, w, order)).collect()
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.coef[0]
    }

    #[inline]
    pub fn grad(&self, i: usize) -> f64 {
        if self.order >= 1 {
            self.coef[1 + i]
        } else {
            0.0
        }
    }

    #[inline]
    pub fn hess(&self, i: usize, j: usize) -> f64 {
        if self.order >= 2 {
            self.coef[1 + self.n + idx2(self.n, i, j)]
        } else {
            0.0
        }
    }

    #[inline]
    pub fn third(&self, i: usize, j: usize, k: usize) -> f64 {
        if self.order >= 3 {
            self.coef[1 + self.n + tri(self.n) + idx3(self.n, i, j, k)]
        } else {
            0.0
        }
    }

    pub fn gradient(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.grad(i)).collect()
    }

    pub fn hessian(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.hess(i, j)).collect())
            .collect()
    }

    /// True when every stored coefficient is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.coef.iter().all(|&c| c == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.coef.iter().all(|c| c.is_finite())
    }

    /// Drops all coefficients above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order);
        Jet {
            order,
            n: self.n,
            coef: self.coef[..coef_len(self.n, order)].to_vec(),
        }
    }

    /// Partial derivative along input `k`, one order lower.
    pub fn derivative(&self, k: usize) -> Jet {
        assert!(self.order >= 1, "cannot differentiate an order-0 jet");
        assert!(k < self.n);
        let n = self.n;
        let mut out = Jet::zero(n, self.order - 1);
        out.coef[0] = self.grad(k);
        if out.order >= 1 {
            for l in 0..n {
                out.coef[1 + l] = self.hess(k, l);
            }
        }
        if out.order >= 2 {
            let mut pos = 1 + n;
            for l in 0..n {
                for m in l..n {
                    out.coef[pos] = self.third(k, l, m);
                    pos += 1;
                }
            }
        }
        out
    }

    fn check_pair(&self, other: &Jet) -> usize {
        assert_eq!(self.n, other.n, "jets over different input dimensions");
        self.order.min(other.order)
    }

    pub fn scale(&self, c: f64) -> Jet {
        Jet {
            order: self.order,
            n: self.n,
            coef: self.coef.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add_scalar(&self, c: f64) -> Jet {
        let mut out = self.clone();
        out.coef[0] += c;
        out
    }

    fn zip_with(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        let order = self.check_pair(other);
        let len = coef_len(self.n, order);
        Jet {
            order,
            n: self.n,
            coef: self.coef[..len]
                .iter()
                .zip(&other.coef[..len])
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Leibniz product.
    pub fn mul_jet(&self, b: &Jet) -> Jet {
        let order = self.check_pair(b);
        let a = self;
        let n = self.n;
        let mut out = Jet::zero(n, order);
        let (a0, b0) = (a.value(), b.value());
        out.coef[0] = a0 * b0;
        if order >= 1 {
            for i in 0..n {
                out.coef[1 + i] = a.grad(i) * b0 + a0 * b.grad(i);
            }
        }
        if order >= 2 {
            let mut pos = 1 + n;
            for i in 0..n {
                for j in i..n {
                    out.coef[pos] = a.hess(i, j) * b0
                        + a.grad(i) * b.grad(j)
                        + a.grad(j) * b.grad(i)
                        + a0 * b.hess(i, j);
                    pos += 1;
                }
            }
        }
        if order >= 3 {
            let mut pos = 1 + n + tri(n);
            for i in 0..n {
                for j in i..n {
                    for k in j..n {
                        out.coef[pos] = a.third(i, j, k) * b0
                            + a.hess(i, j) * b.grad(k)
                            + a.hess(i, k) * b.grad(j)
                            + a.hess(j, k) * b.grad(i)
                            + a.grad(i) * b.hess(j, k)
                            + a.grad(j) * b.hess(i, k)
                            + a.grad(k) * b.hess(i, j)
                            + a0 * b.third(i, j, k);
                        pos += 1;
                    }
                }
            }
        }
        out
    }

    /// Chain rule with a univariate outer function: `derivs` holds
    /// φ, φ', φ'', φ''' evaluated at `self.value()`.
    pub fn compose(&self, derivs: [f64; 4]) -> Jet {
        let [f0, f1, f2, f3] = derivs;
        let n = self.n;
        let a = self;
        let mut out = Jet::zero(n, self.order);
        out.coef[0] = f0;
        if self.order >= 1 {
            for i in 0..n {
                out.coef[1 + i] = f1 * a.grad(i);
            }
        }
        if self.order >= 2 {
            let mut pos = 1 + n;
            for i in 0..n {
                for j in i..n {
                    out.coef[pos] = f2 * a.grad(i) * a.grad(j) + f1 * a.hess(i, j);
                    pos += 1;
                }
            }
        }
        if self.order >= 3 {
            let mut pos = 1 + n + tri(n);
            for i in 0..n {
                for j in i..n {
                    for k in j..n {
                        out.coef[pos] = f3 * a.grad(i) * a.grad(j) * a.grad(k)
                            + f2 * (a.hess(i, j) * a.grad(k)
                                + a.hess(i, k) * a.grad(j)
                                + a.hess(j, k) * a.grad(i))
                            + f1 * a.third(i, j, k);
                        pos += 1;
                    }
                }
            }
        }
        out
    }

    pub fn recip(&self) -> Jet {
        let x = self.value();
        let r = 1.0 / x;
        self.compose([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r])
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        self.compose([e, e, e, e])
    }

    pub fn ln(&self) -> Jet {
        let x = self.value();
        let r = 1.0 / x;
        self.compose([x.ln(), r, -r * r, 2.0 * r * r * r])
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    pub fn tanh(&self) -> Jet {
        let t = self.value().tanh();
        let s = 1.0 - t * t;
        self.compose([t, s, -2.0 * t * s, s * (6.0 * t * t - 2.0)])
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.compose([s, c, -s, -c])
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.compose([c, -s, -c, s])
    }

    pub fn powi(&self, k: i32) -> Jet {
        let x = self.value();
        let kf = k as f64;
        let p = |e: i32| if e < 0 && x == 0.0 { f64::INFINITY } else { x.powi(e) };
        let d1 = if k == 0 { 0.0 } else { kf * p(k - 1) };
        let d2 = if k == 0 || k == 1 { 0.0 } else { kf * (kf - 1.0) * p(k - 2) };
        let d3 = if (0..=2).contains(&k) {
            0.0
        } else {
            kf * (kf - 1.0) * (kf - 2.0) * p(k - 3)
        };
        self.compose([p(k), d1, d2, d3])
    }

    pub fn powf(&self, e: f64) -> Jet {
        let x = self.value();
        self.compose([
            x.powf(e),
            e * x.powf(e - 1.0),
            e * (e - 1.0) * x.powf(e - 2.0),
            e * (e - 1.0) * (e - 2.0) * x.powf(e - 3.0),
        ])
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $body:expr) => {
        impl $trait<&Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                let f: fn(&Jet, &Jet) -> Jet = $body;
                f(self, rhs)
            }
        }
        impl $trait<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                (&self).$method(rhs)
            }
        }
        impl $trait<Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$method(&rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| a.zip_with(b, |x, y| x + y));
binop!(Sub, sub, |a, b| a.zip_with(b, |x, y| x - y));
binop!(Mul, mul, |a, b| a.mul_jet(b));
binop!(Div, div, |a, b| a.mul_jet(&b.recip()));

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, c: f64) -> Jet {
        self.scale(c)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, c: f64) -> Jet {
        self.scale(c)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, c: f64) -> Jet {
        self.add_scalar(c)
    }
}

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, c: f64) -> Jet {
        self.add_scalar(c)
    }
}

/// Inverse of a square matrix of jets.
///
/// The value part is inverted by Gaussian elimination; the higher-order
/// part follows from the series `(M₀ + E)⁻¹ = Σₖ (−M₀⁻¹E)ᵏ M₀⁻¹`, which
/// terminates because `E` has no constant term. At first order this is the
/// familiar `∂M⁻¹ = −M⁻¹(∂M)M⁻¹`.
pub fn invert_jet_matrix(m: &[Vec<Jet>]) -> Option<Vec<Vec<Jet>>> {
    let d = m.len();
    let n = m[0][0].n();
    let order = m.iter().flatten().map(Jet::order).min().unwrap_or(0);
    let values: Vec<Vec<f64>> = m
        .iter()
        .map(|row| row.iter().map(Jet::value).collect())
        .collect();
    let inv0 = crate::linalg::invert(&values)?;
    let v: Vec<Vec<Jet>> = inv0
        .iter()
        .map(|row| row.iter().map(|&x| Jet::constant(n, order, x)).collect())
        .collect();
    // E = M − M₀ (zero value part)
    let e: Vec<Vec<Jet>> = m
        .iter()
        .map(|row| {
            row.iter()
                .map(|j| {
                    let mut t = j.truncate(order);
                    t.coef[0] = 0.0;
                    t
                })
                .collect()
        })
        .collect();
    let minus_ve = matmul(&v, &e)
        .into_iter()
        .map(|row| row.into_iter().map(|j| -j).collect())
        .collect::<Vec<Vec<Jet>>>();
    let mut term = v.clone();
    let mut acc = v;
    for _ in 0..order {
        term = matmul(&minus_ve, &term);
        for a in 0..d {
            for b in 0..d {
                acc[a][b] = &acc[a][b] + &term[a][b];
            }
        }
    }
    Some(acc)
}

fn matmul(a: &[Vec<Jet>], b: &[Vec<Jet>]) -> Vec<Vec<Jet>> {
    let d = a.len();
    let n = a[0][0].n();
    let order = a[0][0].order().min(b[0][0].order());
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    (0..d).fold(Jet::zero(n, order), |s, k| s + &a[i][k] * &b[k][j])
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn seed_variable_examples() {
        let j = Jet::seed_variable(0, &[2.0, 5.0], 2).unwrap();
        assert_eq!(j.value(), 2.0);
        assert_eq!(j.gradient(), vec![1.0, 0.0]);
        assert_eq!(j.hessian(), vec![vec![0.0; 2]; 2]);

        let j = Jet::seed_variable(1, &[2.0, 5.0], 1).unwrap();
        assert_eq!(j.value(), 5.0);
        assert_eq!(j.gradient(), vec![0.0, 1.0]);

        assert!(matches!(
            Jet::seed_variable(3, &[2.0, 5.0], 1),
            Err(Error::IndexOutOfRange { index: 3, n: 2 })
        ));
    }

    #[test]
    fn packed_indices_are_a_bijection() {
        for n in 1..6 {
            let mut seen = vec![false; tet(n)];
            for i in 0..n {
                for j in i..n {
                    for k in j..n {
                        let id = idx3(n, i, j, k);
                        assert!(!seen[id]);
                        seen[id] = true;
                        assert_eq!(id, idx3(n, k, i, j));
                    }
                }
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn product_of_monomials() {
        // x²y at (3, 2): derivatives by hand
        let w = [3.0, 2.0];
        let x = Jet::seed_variable(0, &w, 3).unwrap();
        let y = Jet::seed_variable(1, &w, 3).unwrap();
        let f = &(&x * &x) * &y;
        assert_eq!(f.value(), 18.0);
        assert_eq!(f.gradient(), vec![12.0, 9.0]);
        assert_eq!(f.hess(0, 0), 4.0);
        assert_eq!(f.hess(0, 1), 6.0);
        assert_eq!(f.hess(1, 1), 0.0);
        assert_eq!(f.third(0, 0, 1), 2.0);
        assert_eq!(f.third(1, 0, 0), 2.0);
        assert_eq!(f.third(0, 0, 0), 0.0);
    }

    #[test]
    fn derivative_lowers_order() {
        let w = [0.3, -1.2];
        let x = Jet::seed_variable(0, &w, 3).unwrap();
        let y = Jet::seed_variable(1, &w, 3).unwrap();
        let f = (&x * &y).exp();
        let fx = f.derivative(0);
        assert_eq!(fx.order(), 2);
        // ∂x e^{xy} = y e^{xy}
        let e = (w[0] * w[1]).exp();
        assert!(close(fx.value(), w[1] * e, 1e-15));
        // ∂y (y e^{xy}) = e^{xy}(1 + xy)
        assert!(close(fx.grad(1), e * (1.0 + w[0] * w[1]), 1e-14));
        assert!(close(fx.hess(1, 1), f.third(0, 1, 1), 0.0));
    }

    #[test]
    fn mixed_orders_truncate() {
        let w = [1.0];
        let a = Jet::seed_variable(0, &w, 3).unwrap();
        let b = Jet::seed_variable(0, &w, 1).unwrap();
        assert_eq!((&a * &b).order(), 1);
        assert_eq!((&a + &b).order(), 1);
    }

    #[test]
    fn jet_matrix_inverse_matches_closed_form() {
        // M(t) = [[1+t², t], [t, 2]] at t = 0.4, order 2
        let t = Jet::seed_variable(0, &[0.4], 2).unwrap();
        let one = Jet::constant(1, 2, 1.0);
        let two = Jet::constant(1, 2, 2.0);
        let m = vec![vec![&one + &(&t * &t), t.clone()], vec![t.clone(), two.clone()]];
        let inv = invert_jet_matrix(&m).unwrap();
        // closed form: inv = adj / det with det = 2 + t²
        let det = (&two * &(&one + &(&t * &t))) - &t * &t;
        let expect00 = &two / &det;
        let expect01 = -(&t / &det);
        for k in 0..=2 {
            let (a, b) = (&inv[0][0], &expect00);
            let (c, e) = (&inv[0][1], &expect01);
            let pick = |j: &Jet| match k {
                0 => j.value(),
                1 => j.grad(0),
                _ => j.hess(0, 0),
            };
            assert!(close(pick(a), pick(b), 1e-14), "k={k}");
            assert!(close(pick(c), pick(e), 1e-14), "k={k}");
        }
    }
}
