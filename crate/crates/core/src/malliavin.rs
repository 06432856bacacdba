//! Finite-dimensional Malliavin calculus over the standard Gaussian on ℝⁿ.
//!
//! For a functional `F = (F¹, …, F^d)` of a standard Gaussian vector `w`:
//!
//! ```text
//! σ_F^{ab} = ⟨∇F^a, ∇F^b⟩
//! δ(u)     = Σ_k u_k w_k − Σ_k ∂_k u_k
//! L f      = δ(∇f) = Σ_k ∂_k f w_k − Σ_k ∂²_kk f
//! H_i(F;G) = −Σ_j δ(G σ̂^{ji} ∇F^j)
//! H_α(F;G) = H_{α_k}(F; H_{(α_1,…,α_{k−1})}(F;G))
//! ```
//!
//! so that `E[∂_α f(F) G] = (−1)^{|α|} E[f(F) H_α(F;G)]`.
//!
//! Weights are computed in jet arithmetic: every step that differentiates
//! lowers the jet order by one, so `H_α` needs jets of `F` to order
//! `|α| + 1` and of `G` to order `|α|`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::jets::{invert_jet_matrix, Expr, Jet, MAX_INPUTS};
use crate::linalg;

pub const DEFAULT_DET_THRESHOLD: f64 = 1e-12;
pub const MAX_WEIGHT_ORDER: usize = 2;

/// A map `ℝⁿ → ℝ^d` built from expressions in the Gaussian inputs.
#[derive(Clone, Debug)]
pub struct Functional {
    n: usize,
    components: Vec<Expr>,
}

impl Functional {
    pub fn new(n: usize, components: Vec<Expr>) -> Result<Self> {
        if n == 0 || n > MAX_INPUTS {
            return Err(Error::Range {
                name: "n",
                reason: format!("input dimension must be in 1..={MAX_INPUTS}, got {n}"),
            });
        }
        if components.is_empty() {
            return Err(Error::Range { name: "d", reason: "no components".into() });
        }
        if let Some(k) = components.iter().filter_map(Expr::max_var).max() {
            if k >= n {
                return Err(Error::IndexOutOfRange { index: k, n });
            }
        }
        Ok(Functional { n, components })
    }

    pub fn scalar(n: usize, expr: Expr) -> Result<Self> {
        Self::new(n, vec![expr])
    }

    /// The identity map on ℝⁿ.
    pub fn identity(n: usize) -> Self {
        Functional { n, components: (0..n).map(Expr::var).collect() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    fn check_input(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.n {
            return Err(Error::Dimension { expected: self.n, got: w.len() });
        }
        Ok(())
    }

    pub fn eval(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.check_input(w)?;
        self.components.iter().map(|c| c.eval(w)).collect()
    }

    pub fn jets(&self, w: &[f64], order: usize) -> Result<Vec<Jet>> {
        self.check_input(w)?;
        let vars = Jet::seed_all(w, order)?;
        self.jets_at(&vars)
    }

    pub fn jets_at(&self, vars: &[Jet]) -> Result<Vec<Jet>> {
        self.components.iter().map(|c| c.jet_at(vars)).collect()
    }
}

/// The Malliavin covariance matrix at one sample point.
#[derive(Clone, Debug)]
pub struct CovMatrix {
    pub sigma: Vec<Vec<f64>>,
    /// Present only when the determinant clears the degeneracy threshold.
    pub inverse: Option<Vec<Vec<f64>>>,
    pub det: f64,
}

impl CovMatrix {
    /// Builds σ from the rows `∇F^a` of the Jacobian.
    pub fn from_jacobian(jac: &[Vec<f64>], det_threshold: f64) -> Self {
        let d = jac.len();
        let sigma: Vec<Vec<f64>> = (0..d)
            .map(|a| {
                (0..d)
                    .map(|b| jac[a].iter().zip(&jac[b]).map(|(x, y)| x * y).sum())
                    .collect()
            })
            .collect();
        let det = linalg::det(&sigma);
        let inverse = if nondegenerate(&sigma, det, det_threshold) {
            linalg::invert(&sigma)
        } else {
            None
        };
        CovMatrix { sigma, inverse, det }
    }

    /// `‖σ‖₁ ‖σ̂‖₁`, infinite when degenerate.
    pub fn condition(&self) -> f64 {
        match &self.inverse {
            Some(inv) => linalg::norm1(&self.sigma) * linalg::norm1(inv),
            None => f64::INFINITY,
        }
    }
}

/// `det σ > threshold · (tr σ / d)^d`, a scale-free degeneracy test.
fn nondegenerate(sigma: &[Vec<f64>], det: f64, threshold: f64) -> bool {
    let d = sigma.len();
    let trace: f64 = (0..d).map(|i| sigma[i][i]).sum();
    let scale = (trace / d as f64).powi(d as i32);
    det.is_finite() && scale > 0.0 && det > threshold * scale
}

pub fn malliavin_cov(f: &Functional, w: &[f64], det_threshold: f64) -> Result<CovMatrix> {
    let jets = f.jets(w, 1)?;
    let jac: Vec<Vec<f64>> = jets.iter().map(Jet::gradient).collect();
    let cov = CovMatrix::from_jacobian(&jac, det_threshold);
    if cov.inverse.is_none() {
        return Err(Error::Degenerate { det: cov.det });
    }
    Ok(cov)
}

/// `δ(u) = Σ_k u_k w_k − Σ_k ∂_k u_k` in jet arithmetic; one order lower
/// than the field.
pub fn skorohod_jet(u: &[Jet], vars: &[Jet]) -> Jet {
    let n = vars.len();
    assert_eq!(u.len(), n, "vector field must have one component per input");
    let order = u.iter().map(Jet::order).min().unwrap();
    assert!(order >= 1, "divergence needs first-order jets");
    let mut acc = Jet::zero(n, order - 1);
    for k in 0..n {
        let uw = &u[k] * &vars[k];
        acc = acc + uw.truncate(order - 1) - u[k].derivative(k);
    }
    acc
}

/// Skorohod integral of the vector field `u : ℝⁿ → ℝⁿ` at `w`.
pub fn skorohod(u: &Functional, w: &[f64]) -> Result<f64> {
    if u.d() != u.n() {
        return Err(Error::Dimension { expected: u.n(), got: u.d() });
    }
    u.check_input(w)?;
    let vars = Jet::seed_all(w, 1)?;
    let jets = u.jets_at(&vars)?;
    Ok(skorohod_jet(&jets, &vars).value())
}

/// `L f = δ(∇f)`; one order lower than `f` minus one.
pub fn ou_jet(f: &Jet, vars: &[Jet]) -> Jet {
    let grad: Vec<Jet> = (0..f.n()).map(|k| f.derivative(k)).collect();
    skorohod_jet(&grad, vars)
}

pub fn ou_operator(f: &Functional, w: &[f64]) -> Result<f64> {
    if f.d() != 1 {
        return Err(Error::Dimension { expected: 1, got: f.d() });
    }
    f.check_input(w)?;
    let vars = Jet::seed_all(w, 2)?;
    let jet = f.components[0].jet_at(&vars)?;
    Ok(ou_jet(&jet, &vars).value())
}

/// A multi-index over the output coordinates of `F` (0-based).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(indices: &[usize]) -> Self {
        MultiIndex(indices.to_vec())
    }

    pub fn empty() -> Self {
        MultiIndex(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    /// `(self, i)`
    pub fn push(&self, i: usize) -> Self {
        let mut v = self.0.clone();
        v.push(i);
        MultiIndex(v)
    }

    pub fn check(&self, d: usize) -> Result<()> {
        if self.len() > MAX_WEIGHT_ORDER {
            return Err(Error::OrderCap { requested: self.len(), max: MAX_WEIGHT_ORDER });
        }
        if let Some(&i) = self.0.iter().find(|&&i| i >= d) {
            return Err(Error::IndexOutOfRange { index: i, n: d });
        }
        Ok(())
    }
}

/// The pieces of `H_i(F; ·)` that do not depend on `G`: for each `i` the
/// field `v_i = Σ_j σ̂^{ji} ∇F^j`, so that `H_i(F;G) = −δ(G v_i)`.
pub struct WeightBasis {
    fields: Vec<Vec<Jet>>,
    vars: Vec<Jet>,
    cov: CovMatrix,
}

impl WeightBasis {
    /// `f` holds the component jets of `F` (order ≥ 2) built on `vars`.
    pub fn new(f: &[Jet], vars: &[Jet], det_threshold: f64) -> Result<Self> {
        let d = f.len();
        let n = vars.len();
        let order_f = f.iter().map(Jet::order).min().unwrap_or(0);
        if order_f < 2 {
            return Err(Error::JetOrder { requested: 2, max: order_f });
        }
        let df: Vec<Vec<Jet>> =
            f.iter().map(|fa| (0..n).map(|k| fa.derivative(k)).collect()).collect();
        let jac: Vec<Vec<f64>> = df.iter().map(|row| row.iter().map(Jet::value).collect()).collect();
        let cov = CovMatrix::from_jacobian(&jac, det_threshold);
        if cov.inverse.is_none() {
            return Err(Error::Degenerate { det: cov.det });
        }
        let sigma: Vec<Vec<Jet>> = (0..d)
            .map(|a| {
                (0..d)
                    .map(|b| {
                        (0..n).fold(Jet::zero(n, order_f - 1), |s, k| s + &df[a][k] * &df[b][k])
                    })
                    .collect()
            })
            .collect();
        let inv = invert_jet_matrix(&sigma).ok_or(Error::Degenerate { det: cov.det })?;
        let fields = (0..d)
            .map(|i| {
                (0..n)
                    .map(|k| {
                        (0..d).fold(Jet::zero(n, order_f - 1), |s, j| s + &inv[j][i] * &df[j][k])
                    })
                    .collect()
            })
            .collect();
        let vars = vars.iter().map(|v| v.truncate(order_f - 1)).collect();
        Ok(WeightBasis { fields, vars, cov })
    }

    pub fn cov(&self) -> &CovMatrix {
        &self.cov
    }

    pub fn d(&self) -> usize {
        self.fields.len()
    }

    /// `H_i(F; G)` for every `i`, as jets one order below `min(ord F − 1, ord G)`.
    pub fn first(&self, g: &Jet) -> Vec<Jet> {
        if g.is_zero() {
            let order = g.order().min(self.vars[0].order()).saturating_sub(1);
            return vec![Jet::zero(g.n(), order); self.d()];
        }
        self.fields
            .iter()
            .map(|v| {
                let u: Vec<Jet> = v.iter().map(|vk| vk * g).collect();
                -skorohod_jet(&u, &self.vars)
            })
            .collect()
    }

    /// `H_α(F; G)` by the recursion over the entries of `α`.
    pub fn multi(&self, g: &Jet, alpha: &MultiIndex) -> Result<Jet> {
        alpha.check(self.d())?;
        let mut cur = g.clone();
        for &a in alpha.indices() {
            if cur.order() == 0 || self.vars[0].order() < 1 {
                return Err(Error::JetOrder { requested: alpha.len() + 1, max: cur.order() });
            }
            cur = self.first(&cur).swap_remove(a);
        }
        Ok(cur)
    }
}

/// `H_i(F; G)(w)` for all `i`.
pub fn weight_first(f: &Functional, g: &Expr, w: &[f64], det_threshold: f64) -> Result<Vec<f64>> {
    f.check_input(w)?;
    let vars = Jet::seed_all(w, 2)?;
    let fj = f.jets_at(&vars)?;
    let gj = g.jet_at(&vars)?.truncate(1);
    let basis = WeightBasis::new(&fj, &vars, det_threshold)?;
    Ok(basis.first(&gj).iter().map(Jet::value).collect())
}

/// `H_α(F; G)(w)` for `|α| ≤ 2`.
pub fn weight_multi(
    f: &Functional,
    g: &Expr,
    w: &[f64],
    alpha: &MultiIndex,
    det_threshold: f64,
) -> Result<f64> {
    alpha.check(f.d())?;
    f.check_input(w)?;
    let m = alpha.len().max(1);
    let vars = Jet::seed_all(w, m + 1)?;
    let fj = f.jets_at(&vars)?;
    let gj = g.jet_at(&vars)?.truncate(m);
    let basis = WeightBasis::new(&fj, &vars, det_threshold)?;
    Ok(basis.multi(&gj, alpha)?.value())
}

/// One Monte Carlo draw with its weights.
#[derive(Clone, Debug)]
pub struct WeightSample {
    pub w: Vec<f64>,
    pub f_val: Vec<f64>,
    pub g_val: f64,
    pub weights: BTreeMap<MultiIndex, f64>,
    pub sigma_cond: f64,
}

/// Evaluates `F`, `G` and every requested `H_α` at `w`.
pub fn weight_sample(
    f: &Functional,
    g: &Expr,
    w: &[f64],
    alphas: &[MultiIndex],
    det_threshold: f64,
) -> Result<WeightSample> {
    f.check_input(w)?;
    for a in alphas {
        a.check(f.d())?;
    }
    let m = alphas.iter().map(MultiIndex::len).max().unwrap_or(1).max(1);
    let vars = Jet::seed_all(w, m + 1)?;
    let fj = f.jets_at(&vars)?;
    let gj = g.jet_at(&vars)?.truncate(m);
    let basis = WeightBasis::new(&fj, &vars, det_threshold)?;
    let mut weights = BTreeMap::new();
    for a in alphas {
        let h = basis.multi(&gj, a)?.value();
        if !h.is_finite() {
            return Err(Error::Degenerate { det: basis.cov().det });
        }
        weights.insert(a.clone(), h);
    }
    Ok(WeightSample {
        w: w.to_vec(),
        f_val: fj.iter().map(Jet::value).collect(),
        g_val: gj.value(),
        weights,
        sigma_cond: basis.cov().condition(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin(a: &[Vec<f64>]) -> Functional {
        let n = a[0].len();
        let comps = a
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold(Expr::constant(0.0), |s, (k, &c)| s + c * Expr::var(k))
            })
            .collect();
        Functional::new(n, comps).unwrap()
    }

    #[test]
    fn cov_identity_and_linear() {
        let w = [0.3, -0.2, 1.5];
        let c = malliavin_cov(&Functional::identity(3), &w, DEFAULT_DET_THRESHOLD).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(c.sigma[i][j], if i == j { 1.0 } else { 0.0 });
            }
        }
        let a = vec![vec![1.0, 2.0, 0.5], vec![0.0, -1.0, 3.0]];
        let c = malliavin_cov(&lin(&a), &w, DEFAULT_DET_THRESHOLD).unwrap();
        let aat = linalg::matmul(&a, &linalg::transpose(&a));
        for i in 0..2 {
            for j in 0..2 {
                assert!((c.sigma[i][j] - aat[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn cov_square_is_degenerate_at_zero() {
        let f = Functional::scalar(1, Expr::var(0).powi(2)).unwrap();
        let c = malliavin_cov(&f, &[0.7], DEFAULT_DET_THRESHOLD).unwrap();
        assert!((c.sigma[0][0] - 4.0 * 0.49).abs() < 1e-15);
        assert!(matches!(
            malliavin_cov(&f, &[0.0], DEFAULT_DET_THRESHOLD),
            Err(Error::Degenerate { .. })
        ));
    }

    #[test]
    fn skorohod_examples() {
        let w = [0.4, -1.1, 2.0];
        let e1 = Functional::new(3, vec![Expr::constant(1.0), Expr::constant(0.0), Expr::constant(0.0)]).unwrap();
        assert_eq!(skorohod(&e1, &w).unwrap(), w[0]);
        let id = Functional::identity(3);
        let sq: f64 = w.iter().map(|x| x * x).sum();
        assert!((skorohod(&id, &w).unwrap() - (sq - 3.0)).abs() < 1e-14);
        let first =
            Functional::new(3, vec![Expr::var(0), Expr::constant(0.0), Expr::constant(0.0)]).unwrap();
        assert!((skorohod(&first, &w).unwrap() - (w[0] * w[0] - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn ou_examples() {
        let w = [1.3, 0.2];
        let f = Functional::scalar(2, Expr::var(0)).unwrap();
        assert!((ou_operator(&f, &w).unwrap() - 1.3).abs() < 1e-15);
        let f = Functional::scalar(2, Expr::var(0).powi(2)).unwrap();
        assert!((ou_operator(&f, &w).unwrap() - (2.0 * 1.69 - 2.0)).abs() < 1e-14);
        let f = Functional::scalar(2, Expr::constant(4.0)).unwrap();
        assert_eq!(ou_operator(&f, &w).unwrap(), 0.0);
    }

    #[test]
    fn first_weight_identity() {
        let w = [0.5, -0.25];
        let h = weight_first(&Functional::identity(2), &Expr::constant(1.0), &w, 1e-12).unwrap();
        assert_eq!(h, vec![-0.5, 0.25]);
    }

    #[test]
    fn first_weight_linear() {
        let a = vec![vec![2.0, 0.5], vec![-0.3, 1.0]];
        let w = [0.7, 1.9];
        let h = weight_first(&lin(&a), &Expr::constant(1.0), &w, 1e-12).unwrap();
        // −(AAᵀ)⁻¹ A w
        let aat = linalg::matmul(&a, &linalg::transpose(&a));
        let expect = linalg::matvec(&linalg::invert(&aat).unwrap(), &linalg::matvec(&a, &w));
        for i in 0..2 {
            assert!((h[i] + expect[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn first_weight_zero_g() {
        let f = Functional::new(
            2,
            vec![Expr::var(0) + 0.5 * Expr::var(1).tanh(), Expr::var(1)],
        )
        .unwrap();
        let h = weight_first(&f, &Expr::constant(0.0), &[0.1, 0.2], 1e-12).unwrap();
        assert_eq!(h, vec![0.0, 0.0]);
    }

    /// The expanded form −Σ_j (G σ̂^{ji} L F^j − ⟨∇F^j, ∇(σ̂^{ji} G)⟩) with
    /// ∇σ̂ = −σ̂ (∇σ) σ̂ written out by hand.
    fn expanded_first_weight(f: &Functional, g: &Expr, w: &[f64]) -> Vec<f64> {
        let n = f.n();
        let d = f.d();
        let vars = Jet::seed_all(w, 2).unwrap();
        let fj = f.jets_at(&vars).unwrap();
        let gj = g.jet_at(&vars).unwrap();
        let jac: Vec<Vec<f64>> = fj.iter().map(Jet::gradient).collect();
        let hess: Vec<Vec<Vec<f64>>> = fj.iter().map(Jet::hessian).collect();
        let sigma = linalg::matmul(&jac, &linalg::transpose(&jac));
        let inv = linalg::invert(&sigma).unwrap();
        let lf: Vec<f64> = (0..d)
            .map(|j| (0..n).map(|k| jac[j][k] * w[k] - hess[j][k][k]).sum())
            .collect();
        // ∂_k σ^{ab} = Σ_l (∂_k∂_l F^a ∂_l F^b + ∂_l F^a ∂_k∂_l F^b)
        let dsigma = |k: usize| -> Vec<Vec<f64>> {
            (0..d)
                .map(|a| {
                    (0..d)
                        .map(|b| {
                            (0..n)
                                .map(|l| hess[a][k][l] * jac[b][l] + jac[a][l] * hess[b][k][l])
                                .sum()
                        })
                        .collect()
                })
                .collect()
        };
        let dinv: Vec<Vec<Vec<f64>>> = (0..n)
            .map(|k| {
                let t = linalg::matmul(&linalg::matmul(&inv, &dsigma(k)), &inv);
                t.iter().map(|r| r.iter().map(|v| -v).collect()).collect()
            })
            .collect();
        (0..d)
            .map(|i| {
                -(0..d)
                    .map(|j| {
                        let mut t = gj.value() * inv[j][i] * lf[j];
                        for k in 0..n {
                            let grad_prod = dinv[k][j][i] * gj.value() + inv[j][i] * gj.grad(k);
                            t -= jac[j][k] * grad_prod;
                        }
                        t
                    })
                    .sum::<f64>()
            })
            .collect()
    }

    #[test]
    fn divergence_form_matches_expanded_form() {
        let f = Functional::new(
            3,
            vec![
                Expr::var(0) + 0.3 * (Expr::var(1) * Expr::var(2)).sin(),
                Expr::var(1) + 0.2 * Expr::var(0).powi(2),
            ],
        )
        .unwrap();
        let g = (0.5 * Expr::var(2)).cos() + Expr::var(0);
        for w in [[0.1, 0.2, 0.3], [-1.2, 0.8, 2.1], [0.9, -0.4, -1.7]] {
            let a = weight_first(&f, &g, &w, 1e-12).unwrap();
            let b = expanded_first_weight(&f, &g, &w);
            for i in 0..2 {
                assert!((a[i] - b[i]).abs() < 1e-12 * (1.0 + b[i].abs()), "{a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn second_order_hermite() {
        let f = Functional::identity(1);
        let one = Expr::constant(1.0);
        for w in [-1.3, 0.0, 0.4, 2.2] {
            let h = weight_multi(&f, &one, &[w], &MultiIndex::new(&[0, 0]), 1e-12).unwrap();
            assert!((h - (w * w - 1.0)).abs() < 1e-14);
        }
        let h1 = weight_multi(&f, &one, &[0.4], &MultiIndex::new(&[0]), 1e-12).unwrap();
        assert_eq!(h1, weight_first(&f, &one, &[0.4], 1e-12).unwrap()[0]);
        assert!(matches!(
            weight_multi(&f, &one, &[0.4], &MultiIndex::new(&[0, 0, 0]), 1e-12),
            Err(Error::OrderCap { requested: 3, max: 2 })
        ));
    }

    #[test]
    fn second_order_identity_d2() {
        // H_{(i,j)}(w; 1) = w_i w_j − δ_ij for the identity map
        let f = Functional::identity(2);
        let w = [0.6, -1.4];
        let s = weight_sample(
            &f,
            &Expr::constant(1.0),
            &w,
            &[MultiIndex::new(&[0, 1]), MultiIndex::new(&[1, 1]), MultiIndex::new(&[0])],
            1e-12,
        )
        .unwrap();
        assert!((s.weights[&MultiIndex::new(&[0, 1])] - w[0] * w[1]).abs() < 1e-14);
        assert!((s.weights[&MultiIndex::new(&[1, 1])] - (w[1] * w[1] - 1.0)).abs() < 1e-14);
        assert_eq!(s.weights[&MultiIndex::new(&[0])], -w[0]);
        assert_eq!(s.sigma_cond, 1.0);
    }
}
