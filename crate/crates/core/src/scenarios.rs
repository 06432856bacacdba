//! Built-in Gaussian functionals with known structure.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jets::Expr;
use crate::linalg;
use crate::malliavin::Functional;

pub const SCENARIO_IDS: [&str; 7] = [
    "gauss-identity-d1",
    "gauss-identity-d2",
    "gauss-identity-d3",
    "linear",
    "poly-perturb",
    "tanh-couple",
    "chi-square",
];

/// Closed-form laws used as oracles.
#[derive(Clone, Debug)]
pub enum AnalyticDensity {
    Gaussian { mean: Vec<f64>, cov: Vec<Vec<f64>>, inv: Vec<Vec<f64>>, det: f64 },
    /// Law of W² for a standard normal W.
    ChiSquare,
    Mixture(Vec<(f64, AnalyticDensity)>),
}

impl AnalyticDensity {
    pub fn gaussian(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        let d = mean.len();
        if cov.len() != d || cov.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension { expected: d, got: cov.len() });
        }
        let det = linalg::det(&cov);
        let inv = match linalg::invert(&cov) {
            Some(inv) if det > 0.0 => inv,
            _ => return Err(Error::Singular { d }),
        };
        Ok(AnalyticDensity::Gaussian { mean, cov, inv, det })
    }

    pub fn standard(d: usize) -> Self {
        let cov = (0..d).map(|i| (0..d).map(|j| f64::from(u8::from(i == j))).collect()).collect();
        Self::gaussian(vec![0.0; d], cov).expect("identity covariance")
    }

    pub fn dim(&self) -> usize {
        match self {
            AnalyticDensity::Gaussian { mean, .. } => mean.len(),
            AnalyticDensity::ChiSquare => 1,
            AnalyticDensity::Mixture(parts) => parts[0].1.dim(),
        }
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        match self {
            AnalyticDensity::Gaussian { mean, inv, det, .. } => {
                let d = mean.len();
                let y: Vec<f64> = x.iter().zip(mean).map(|(a, m)| a - m).collect();
                let q: f64 = linalg::matvec(inv, &y).iter().zip(&y).map(|(a, b)| a * b).sum();
                (-0.5 * q).exp() / ((2.0 * PI).powi(d as i32) * det).sqrt()
            }
            AnalyticDensity::ChiSquare => {
                let t = x[0];
                if t <= 0.0 {
                    0.0
                } else {
                    (-t / 2.0).exp() / (2.0 * PI * t).sqrt()
                }
            }
            AnalyticDensity::Mixture(parts) => parts.iter().map(|(w, p)| w * p.density(x)).sum(),
        }
    }

    /// ∇ ln p, where the density is positive.
    pub fn score(&self, x: &[f64]) -> Option<Vec<f64>> {
        match self {
            AnalyticDensity::Gaussian { mean, inv, .. } => {
                let y: Vec<f64> = x.iter().zip(mean).map(|(a, m)| a - m).collect();
                Some(linalg::matvec(inv, &y).into_iter().map(|v| -v).collect())
            }
            AnalyticDensity::ChiSquare => {
                let t = x[0];
                (t > 0.0).then(|| vec![-0.5 - 0.5 / t])
            }
            AnalyticDensity::Mixture(parts) => {
                let p = self.density(x);
                if p <= 0.0 {
                    return None;
                }
                let mut s = vec![0.0; x.len()];
                for (w, part) in parts {
                    let pk = w * part.density(x);
                    if pk > 0.0 {
                        for (si, ci) in s.iter_mut().zip(part.score(x)?) {
                            *si += pk * ci / p;
                        }
                    }
                }
                Some(s)
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    /// Matrix of the `linear` scenario, d × n.
    pub linear_a: Vec<Vec<f64>>,
    pub linear_b: Vec<f64>,
    pub gamma: f64,
    /// Dimension of `poly-perturb` and `tanh-couple`.
    pub dim: usize,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            linear_a: vec![vec![2.0, 0.0], vec![0.5, 1.0]],
            linear_b: vec![0.0, 0.0],
            gamma: 0.1,
            dim: 2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub id: String,
    pub f: Functional,
    /// Named choices of `G`, all functions of the Gaussian input.
    pub g_catalog: Vec<(String, Expr)>,
    pub analytic: Option<AnalyticDensity>,
    /// The law lives on a proper subdomain; only localized estimates apply.
    pub local_only: bool,
    pub notes: &'static str,
}

impl Scenario {
    pub fn n(&self) -> usize {
        self.f.n()
    }

    pub fn d(&self) -> usize {
        self.f.d()
    }

    pub fn g(&self, name: &str) -> Result<&Expr> {
        self.g_catalog
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, e)| e)
            .ok_or_else(|| Error::InvalidScenario(format!("unknown G `{name}` for {}", self.id)))
    }

    pub fn analytic_density(&self, x: &[f64]) -> Option<f64> {
        self.analytic.as_ref().map(|a| a.density(x))
    }
}

fn catalog(f: &Functional) -> Vec<(String, Expr)> {
    let f1 = f.components()[0].clone();
    let bump = (-0.5 * Expr::sq_norm(f.components().to_vec())).exp();
    vec![
        ("one".into(), Expr::constant(1.0)),
        ("f1".into(), f1.clone()),
        ("f1sq".into(), f1.powi(2)),
        ("bump".into(), bump),
    ]
}

fn build(
    id: &str,
    f: Functional,
    analytic: Option<AnalyticDensity>,
    local_only: bool,
    notes: &'static str,
) -> Scenario {
    Scenario { id: id.into(), g_catalog: catalog(&f), f, analytic, local_only, notes }
}

fn linear(params: &ScenarioParams) -> Result<Scenario> {
    let a = &params.linear_a;
    let d = a.len();
    let n = a.first().map_or(0, Vec::len);
    if d == 0 || n < d || a.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidScenario(format!(
            "linear_a must be d×n with n ≥ d ≥ 1, got {d} rows of lengths {:?}",
            a.iter().map(Vec::len).collect::<Vec<_>>()
        )));
    }
    let b = if params.linear_b.is_empty() { vec![0.0; d] } else { params.linear_b.clone() };
    if b.len() != d {
        return Err(Error::InvalidScenario(format!("linear_b has {} entries, expected {d}", b.len())));
    }
    let cov = linalg::matmul(a, &linalg::transpose(a));
    let analytic = AnalyticDensity::gaussian(b.clone(), cov)
        .map_err(|_| Error::InvalidScenario("linear_a has rank below d".into()))?;
    let comps = a
        .iter()
        .zip(&b)
        .map(|(row, &bi)| {
            row.iter().enumerate().fold(Expr::constant(bi), |s, (k, &c)| {
                if c == 0.0 {
                    s
                } else {
                    s + c * Expr::var(k)
                }
            })
        })
        .collect();
    Ok(build(
        "linear",
        Functional::new(n, comps)?,
        Some(analytic),
        false,
        "F = A w + b; law N(b, A Aᵀ)",
    ))
}

fn poly_perturb(params: &ScenarioParams) -> Result<Scenario> {
    let n = params.dim;
    if n < 2 {
        return Err(Error::InvalidScenario("poly-perturb needs dim ≥ 2".into()));
    }
    let w: Vec<Expr> = (0..n).map(Expr::var).collect();
    let t = w[0].powi(2) * &w[1] / (1.0 + Expr::sq_norm(w.clone()));
    let comps = w.iter().map(|wi| wi + params.gamma * &t).collect();
    let f = Functional::new(n, comps)?;
    check_jacobian(&f, 6.0, 33)?;
    Ok(build(
        "poly-perturb",
        f,
        None,
        false,
        "F = w + γ T(w)·(1,…,1) with T = w₁²w₂/(1+|w|²); Jacobian positive on [−6,6]ⁿ",
    ))
}

/// Jacobian determinant positive at every node of a `res`ⁿ grid on [−L, L]ⁿ.
fn check_jacobian(f: &Functional, half: f64, res: usize) -> Result<()> {
    let n = f.n();
    let mut idx = vec![0usize; n];
    let step = 2.0 * half / (res - 1) as f64;
    loop {
        let w: Vec<f64> = idx.iter().map(|&i| -half + step * i as f64).collect();
        let jets = f.jets(&w, 1)?;
        let jac: Vec<Vec<f64>> = jets.iter().map(|j| j.gradient()).collect();
        let det = linalg::det(&jac);
        if !(det > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "Jacobian determinant {det} ≤ 0 at {w:?}; reduce gamma"
            )));
        }
        let mut k = 0;
        loop {
            if k == n {
                return Ok(());
            }
            idx[k] += 1;
            if idx[k] < res {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn tanh_couple(params: &ScenarioParams) -> Result<Scenario> {
    let n = params.dim;
    if n < 1 {
        return Err(Error::InvalidScenario("tanh-couple needs dim ≥ 1".into()));
    }
    let comps = (0..n)
        .map(|i| {
            if i + 1 < n {
                Expr::var(i) + 0.5 * Expr::var(i + 1).tanh()
            } else {
                Expr::var(i)
            }
        })
        .collect();
    Ok(build(
        "tanh-couple",
        Functional::new(n, comps)?,
        None,
        false,
        "F_i = w_i + ½ tanh(w_{i+1}), F_d = w_d; no closed form",
    ))
}

pub fn get_scenario(id: &str, params: &ScenarioParams) -> Result<Scenario> {
    match id {
        "gauss-identity-d1" | "gauss-identity-d2" | "gauss-identity-d3" => {
            let d = (id.as_bytes()[id.len() - 1] - b'0') as usize;
            Ok(build(
                id,
                Functional::identity(d),
                Some(AnalyticDensity::standard(d)),
                false,
                "F = w; standard normal law",
            ))
        }
        "linear" => linear(params),
        "poly-perturb" => poly_perturb(params),
        "tanh-couple" => tanh_couple(params),
        "chi-square" => Ok(build(
            id,
            Functional::scalar(1, Expr::var(0).powi(2))?,
            Some(AnalyticDensity::ChiSquare),
            true,
            "F = w₁²; σ_F = 4w₁² degenerates at 0, use localized estimates",
        )),
        other => Err(Error::UnknownScenario(other.into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_id_builds() {
        for id in SCENARIO_IDS {
            let s = get_scenario(id, &ScenarioParams::default()).unwrap();
            assert_eq!(s.id, id);
            assert_eq!(s.g_catalog.len(), 4);
        }
        assert!(matches!(
            get_scenario("nope", &ScenarioParams::default()),
            Err(Error::UnknownScenario(_))
        ));
    }

    #[test]
    fn identity_d2_density() {
        let s = get_scenario("gauss-identity-d2", &ScenarioParams::default()).unwrap();
        assert!((s.analytic_density(&[0.0, 0.0]).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-16);
        let x = [0.3, -1.2];
        let e = (-0.5 * (0.09 + 1.44f64)).exp() / (2.0 * PI);
        assert!((s.analytic_density(&x).unwrap() - e).abs() < 1e-16);
        assert_eq!(s.analytic.unwrap().score(&x).unwrap(), vec![-0.3, 1.2]);
    }

    #[test]
    fn linear_diag() {
        let p = ScenarioParams {
            linear_a: vec![vec![2.0, 0.0], vec![0.0, 1.0]],
            ..Default::default()
        };
        let s = get_scenario("linear", &p).unwrap();
        let x = [1.0, 0.5];
        // N(0, diag(4, 1))
        let e = (-0.5 * (1.0 / 4.0 + 0.25f64)).exp() / (2.0 * PI * 2.0);
        assert!((s.analytic_density(&x).unwrap() - e).abs() < 1e-16);
        assert_eq!(s.f.eval(&[0.5, -1.0]).unwrap(), vec![1.0, -1.0]);
    }

    #[test]
    fn linear_rejects_degenerate_matrix() {
        let p = ScenarioParams {
            linear_a: vec![vec![1.0, 2.0], vec![2.0, 4.0]],
            ..Default::default()
        };
        assert!(matches!(get_scenario("linear", &p), Err(Error::InvalidScenario(_))));
    }

    #[test]
    fn chi_square_density_and_flag() {
        let s = get_scenario("chi-square", &ScenarioParams::default()).unwrap();
        assert!(s.local_only);
        let v = s.analytic_density(&[1.0]).unwrap();
        assert!((v - 0.241_970_724_519_143_37).abs() < 1e-15);
        assert_eq!(s.analytic_density(&[-1.0]).unwrap(), 0.0);
    }

    #[test]
    fn poly_perturb_rejects_large_gamma() {
        let p = ScenarioParams { gamma: 10.0, ..Default::default() };
        assert!(matches!(get_scenario("poly-perturb", &p), Err(Error::InvalidScenario(_))));
    }

    #[test]
    fn tanh_couple_components() {
        let s = get_scenario("tanh-couple", &ScenarioParams::default()).unwrap();
        let v = s.f.eval(&[0.2, 0.7]).unwrap();
        assert_eq!(v, vec![0.2 + 0.5 * 0.7f64.tanh(), 0.7]);
        assert!(s.analytic.is_none());
    }

    #[test]
    fn mixture_score_is_weighted_average() {
        let a = AnalyticDensity::gaussian(vec![-2.0], vec![vec![1.0]]).unwrap();
        let b = AnalyticDensity::gaussian(vec![2.0], vec![vec![1.0]]).unwrap();
        let m = AnalyticDensity::Mixture(vec![(0.5, a), (0.5, b)]);
        let x = [0.7];
        let h = 1e-6;
        let fd = (m.density(&[x[0] + h]).ln() - m.density(&[x[0] - h]).ln()) / (2.0 * h);
        assert!((m.score(&x).unwrap()[0] - fd).abs() < 1e-8);
    }
}
