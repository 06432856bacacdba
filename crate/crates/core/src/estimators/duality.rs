//! Monte Carlo residuals of the integration-by-parts identity
//! `E[∂_α φ(F) G] = (−1)^{|α|} E[φ(F) H_α(F; G)]` for compactly supported
//! test functions `φ`.

use crate::error::{Error, Result};
use crate::jets::{Expr, Jet};
use crate::malliavin::{Functional, WeightBasis};
use crate::sampling::Moments;

use super::{accumulate, build_result, g_jet, EstimateResult, EstimatorConfig, Kind};

/// `φ(y) = exp(−1/(1 − |y − c|²/ρ²))` on the ball `|y − c| < ρ`.
#[derive(Clone, Debug, PartialEq)]
pub struct TestBump {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl TestBump {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        assert!(radius > 0.0);
        TestBump { center, radius }
    }

    /// Value, gradient and Hessian at `y`.
    pub fn eval(&self, y: &[f64]) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
        let d = y.len();
        let r2 = self.radius * self.radius;
        let z: Vec<f64> = y.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        let u = 1.0 - z.iter().map(|v| v * v).sum::<f64>() / r2;
        if u <= 0.0 {
            return (0.0, vec![0.0; d], vec![vec![0.0; d]; d]);
        }
        let f = (-1.0 / u).exp();
        let du: Vec<f64> = z.iter().map(|v| -2.0 * v / r2).collect();
        let g1 = f / (u * u);
        let grad = du.iter().map(|v| g1 * v).collect();
        // ∂_ij φ = φ (u⁻⁴ − 2u⁻³) ∂_iu ∂_ju + φ u⁻² ∂_ij u
        let c = f * (1.0 / u.powi(4) - 2.0 / u.powi(3));
        let hess = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| c * du[i] * du[j] + if i == j { g1 * (-2.0 / r2) } else { 0.0 })
                    .collect()
            })
            .collect();
        (f, grad, hess)
    }
}

fn check(f: &Functional, g: &Expr, bump: &TestBump, idx: &[usize]) -> Result<()> {
    if bump.center.len() != f.d() {
        return Err(Error::Dimension { expected: f.d(), got: bump.center.len() });
    }
    if let Some(&i) = idx.iter().find(|&&i| i >= f.d()) {
        return Err(Error::IndexOutOfRange { index: i, n: f.d() });
    }
    if let Some(k) = g.max_var() {
        if k >= f.n() {
            return Err(Error::IndexOutOfRange { index: k, n: f.n() });
        }
    }
    Ok(())
}

/// Mean of `∂_iφ(F) G + φ(F) H_i(F; G)`; zero in expectation.
pub fn duality_residual(
    f: &Functional,
    g: &Expr,
    bump: &TestBump,
    i: usize,
    cfg: &EstimatorConfig,
) -> Result<EstimateResult> {
    check(f, g, bump, &[i])?;
    let m = accumulate(cfg, f.n(), 0, || Moments::full(1), |w, _, out| {
        let vars = Jet::seed_all(w, 2)?;
        let fj = f.jets_at(&vars)?;
        let fv: Vec<f64> = fj.iter().map(Jet::value).collect();
        let (phi, grad, _) = bump.eval(&fv);
        if phi == 0.0 {
            out[0] = 0.0;
            return Ok(true);
        }
        let gj = g_jet(g, &vars, 1)?;
        let basis = WeightBasis::new(&fj, &vars, cfg.det_threshold)?;
        let h = basis.first(&gj)[i].value();
        out[0] = grad[i] * gj.value() + phi * h;
        Ok(true)
    })?;
    Ok(build_result(Kind::Derivative, m.mean(0), Some(m.stderr(0)), &m, 0.0, cfg, None))
}

/// Mean of `∂_i∂_jφ(F) G − φ(F) H_{(i,j)}(F; G)`; zero in expectation.
pub fn duality_residual_second(
    f: &Functional,
    g: &Expr,
    bump: &TestBump,
    i: usize,
    j: usize,
    cfg: &EstimatorConfig,
) -> Result<EstimateResult> {
    check(f, g, bump, &[i, j])?;
    let m = accumulate(cfg, f.n(), 0, || Moments::full(1), |w, _, out| {
        let vars = Jet::seed_all(w, 3)?;
        let fj = f.jets_at(&vars)?;
        let fv: Vec<f64> = fj.iter().map(Jet::value).collect();
        let (phi, _, hess) = bump.eval(&fv);
        if phi == 0.0 {
            out[0] = 0.0;
            return Ok(true);
        }
        let gj = g_jet(g, &vars, 2)?;
        let basis = WeightBasis::new(&fj, &vars, cfg.det_threshold)?;
        let h = basis.multi(&gj, &crate::malliavin::MultiIndex::new(&[i, j]))?.value();
        out[0] = hess[i][j] * gj.value() - phi * h;
        Ok(true)
    })?;
    Ok(build_result(Kind::Derivative, m.mean(0), Some(m.stderr(0)), &m, 0.0, cfg, None))
}
