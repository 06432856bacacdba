//! Localization bumps and density estimation for laws living on a domain.
//!
//! `ψ_{ε,a,b}` is 1 on `[a, b]`, 0 outside `(a − ε, b + ε)`, and on the
//! ramps equals `exp(1 − ε/(x + ε − a))` (left) and its mirror image
//! `exp(1 − ε/(b + ε − x))` (right). `Ψ_{D,ε}(x) = Π_i ψ_{ε,a(x̂_i),b(x̂_i)}(x_i)`
//! where `[a(x̂_i), b(x̂_i)]` is the slice of `D_{2ε}` through `x` along axis `i`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{
    accumulate, density_sample_with_g, kernel_for, EstimateResult, EstimatorConfig, Kind,
};
use crate::jets::Jet;
use crate::malliavin::Functional;
use crate::sampling::Moments;

#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    /// Product of intervals; infinite bounds allowed.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { lo, .. } => lo.len(),
            Domain::Ball { center, .. } => center.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BumpParams {
    pub eps: f64,
    pub domain: Domain,
}

impl BumpParams {
    pub fn new(eps: f64, domain: Domain) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::Range { name: "eps", reason: format!("{eps} is not positive") });
        }
        match &domain {
            Domain::Box { lo, hi } => {
                if lo.len() != hi.len() || lo.is_empty() {
                    return Err(Error::Dimension { expected: lo.len(), got: hi.len() });
                }
                if lo.iter().zip(hi).any(|(l, h)| !(h - l > 4.0 * eps)) {
                    return Err(Error::Range {
                        name: "domain",
                        reason: "box is empty after erosion by 2ε".into(),
                    });
                }
            }
            Domain::Ball { center, radius } => {
                if center.is_empty() || !(*radius > 2.0 * eps) {
                    return Err(Error::Range {
                        name: "domain",
                        reason: "ball is empty after erosion by 2ε".into(),
                    });
                }
            }
        }
        Ok(BumpParams { eps, domain })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// `x ∈ D_{2ε}`, where `Ψ = 1`.
    pub fn in_core(&self, x: &[f64]) -> bool {
        let e2 = 2.0 * self.eps;
        match &self.domain {
            Domain::Box { lo, hi } => {
                x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| *v >= l + e2 && *v <= h - e2)
            }
            Domain::Ball { center, radius } => dist2(x, center).sqrt() <= radius - e2,
        }
    }
}

fn dist2(x: &[f64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `r(u) = exp(1 − ε/(u + ε))` for `u ∈ (−ε, 0]` and its first three
/// derivatives.
fn ramp(eps: f64, u: f64) -> [f64; 4] {
    let v = u + eps;
    if v <= 0.0 {
        return [0.0; 4];
    }
    let r = (1.0 - eps / v).exp();
    let g = eps / (v * v);
    let g1 = -2.0 * eps / (v * v * v);
    let g2 = 6.0 * eps / (v * v * v * v);
    [r, r * g, r * (g * g + g1), r * (g * g * g + 3.0 * g * g1 + g2)]
}

/// Which branch of `ψ` applies at `x`.
enum Piece {
    Zero,
    Left(f64),
    One,
    Right(f64),
}

fn piece(eps: f64, a: f64, b: f64, x: f64) -> Piece {
    if x <= a - eps || x >= b + eps {
        Piece::Zero
    } else if x <= a {
        Piece::Left(x - a)
    } else if x < b {
        Piece::One
    } else {
        Piece::Right(b - x)
    }
}

/// `ψ_{ε,a,b}(x)`; `a = −∞` or `b = +∞` drop the corresponding ramp.
pub fn bump_1d(eps: f64, a: f64, b: f64, x: f64) -> f64 {
    bump_1d_derivs(eps, a, b, x)[0]
}

/// `ψ` and its first three derivatives in `x`.
pub fn bump_1d_derivs(eps: f64, a: f64, b: f64, x: f64) -> [f64; 4] {
    match piece(eps, a, b, x) {
        Piece::Zero => [0.0; 4],
        Piece::One => [1.0, 0.0, 0.0, 0.0],
        Piece::Left(u) => ramp(eps, u),
        Piece::Right(u) => {
            let r = ramp(eps, u);
            [r[0], -r[1], r[2], -r[3]]
        }
    }
}

/// Half-width jet `√((R − 2ε)² − |x̂_i − ĉ_i|²)` of the ball slice along
/// axis `i`; the constant 0 on empty slices, so that the slice collapses to
/// its centre.
fn ball_half_width(xs: &[Jet], center: &[f64], core: f64, i: usize) -> Jet {
    let n = xs[0].n();
    let order = xs[0].order();
    let mut r2 = Jet::constant(n, order, core * core);
    for (j, (x, c)) in xs.iter().zip(center).enumerate() {
        if j != i {
            let y = x.add_scalar(-c);
            r2 = r2 - &y * &y;
        }
    }
    if r2.value() > 0.0 {
        r2.sqrt()
    } else {
        Jet::zero(n, order)
    }
}

/// `Ψ_{D,ε}` composed with jets `xs` (one per coordinate).
pub fn bump_domain_jet(params: &BumpParams, xs: &[Jet]) -> Result<Jet> {
    let d = params.dim();
    if xs.len() != d {
        return Err(Error::Dimension { expected: d, got: xs.len() });
    }
    let eps = params.eps;
    let e2 = 2.0 * eps;
    let n = xs[0].n();
    let order = xs.iter().map(Jet::order).min().unwrap();
    let mut acc = Jet::constant(n, order, 1.0);
    for i in 0..d {
        let factor = match &params.domain {
            Domain::Box { lo, hi } => {
                let derivs = bump_1d_derivs(eps, lo[i] + e2, hi[i] - e2, xs[i].value());
                xs[i].compose(derivs)
            }
            Domain::Ball { center, radius } => {
                let s = ball_half_width(xs, center, radius - e2, i);
                let y = xs[i].add_scalar(-center[i]);
                match piece(eps, -s.value(), s.value(), y.value()) {
                    Piece::Zero => Jet::zero(n, order),
                    Piece::One => Jet::constant(n, order, 1.0),
                    // u = x − a = y + s
                    Piece::Left(_) => {
                        let u = &y + &s;
                        u.compose(ramp(eps, u.value()))
                    }
                    // u = b − x = s − y
                    Piece::Right(_) => {
                        let u = &s - &y;
                        u.compose(ramp(eps, u.value()))
                    }
                }
            }
        };
        if factor.is_zero() {
            return Ok(Jet::zero(n, order));
        }
        acc = acc * factor;
    }
    Ok(acc)
}

pub fn bump_domain(params: &BumpParams, x: &[f64]) -> Result<f64> {
    let xs: Vec<Jet> = x.iter().map(|&v| Jet::constant(x.len(), 0, v)).collect();
    Ok(bump_domain_jet(params, &xs)?.value())
}

#[derive(Clone, Debug, Serialize)]
pub struct LogGradCheck {
    /// Grid sup of `|∇ ln Ψ|^p Ψ`.
    pub sup_found: f64,
    pub argmax: Vec<f64>,
    /// `d ε^{−p} sup_{y>0} y^{2p} e^{−y}`
    pub bound: f64,
    pub holds: bool,
    /// The stated bound times `e`: the ramp `exp(1 − y)` carries a factor
    /// `e` that `e^{−y}` omits.
    pub corrected_bound: f64,
    pub holds_corrected: bool,
}

const ROUNDING: f64 = 1e-12;

/// `sup_y y^{2p} e^{−y} = (2p)^{2p} e^{−2p}`
pub fn log_grad_sup_constant(p: f64) -> f64 {
    (2.0 * p).powf(2.0 * p) * (-2.0 * p).exp()
}

pub fn log_grad_bound_check(params: &BumpParams, p: f64, grid: &[Vec<f64>]) -> Result<LogGradCheck> {
    if !(p >= 1.0) {
        return Err(Error::Range { name: "p", reason: format!("must be ≥ 1, got {p}") });
    }
    let d = params.dim();
    let mut sup_found = 0.0;
    let mut argmax = vec![f64::NAN; d];
    for x in grid {
        let vars = Jet::seed_all(x, 1)?;
        let psi = bump_domain_jet(params, &vars)?;
        let v = psi.value();
        if v <= 0.0 {
            continue;
        }
        let g2: f64 = psi.gradient().iter().map(|g| (g / v).powi(2)).sum();
        let val = g2.powf(p / 2.0) * v;
        if val > sup_found {
            sup_found = val;
            argmax = x.clone();
        }
    }
    let bound = d as f64 * params.eps.powf(-p) * log_grad_sup_constant(p);
    let corrected_bound = std::f64::consts::E * bound;
    Ok(LogGradCheck {
        sup_found,
        argmax,
        bound,
        holds: sup_found <= bound * (1.0 + ROUNDING),
        corrected_bound,
        holds_corrected: sup_found <= corrected_bound * (1.0 + ROUNDING),
    })
}

/// Density of `F` at `x ∈ D_{2ε}` from the localized weight
/// `−E[Σ_i ∂_iQ_d(F − x) H_i(F; Ψ_{D,ε}(F))]`.
///
/// Draws with `Ψ(F) ≡ 0` contribute zero without building weights, so
/// degeneracy of `F` outside `D_ε` is harmless.
pub fn localized_density(
    f: &Functional,
    x: &[f64],
    params: &BumpParams,
    cfg: &EstimatorConfig,
) -> Result<EstimateResult> {
    let d = f.d();
    if x.len() != d || params.dim() != d {
        return Err(Error::Dimension { expected: d, got: x.len().min(params.dim()) });
    }
    if !params.in_core(x) {
        return Err(Error::Locality { x: x.to_vec() });
    }
    let kernel = kernel_for(d, cfg);
    let m = accumulate(cfg, f.n(), 0, || Moments::full(1), |w, _, out| {
        let vars = Jet::seed_all(w, 2)?;
        let fj = f.jets_at(&vars)?;
        let psi = bump_domain_jet(params, &fj)?.truncate(1);
        out[0] = density_sample_with_g(f, &psi, &vars, &fj, &kernel, x, cfg.det_threshold)?;
        Ok(true)
    })?;
    Ok(EstimateResult {
        kind: Kind::Density,
        value: m.mean(0),
        stderr: (d == 1 || kernel.r_min > 0.0).then(|| m.stderr(0)),
        n_used: m.count(),
        n_rejected: m.rejected(),
        r_min_used: kernel.r_min,
        seed: cfg.seed,
        note: Some(format!("localized, ε = {}", params.eps)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const E: f64 = std::f64::consts::E;

    #[test]
    fn bump_1d_values() {
        let (eps, a, b) = (0.2, 0.0, 1.0);
        assert_eq!(bump_1d(eps, a, b, a), 1.0);
        assert!((bump_1d(eps, a, b, a - eps / 2.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(bump_1d(eps, a, b, a - eps), 0.0);
        assert_eq!(bump_1d(eps, a, b, -3.0), 0.0);
        assert_eq!(bump_1d(eps, a, b, 0.5), 1.0);
        assert_eq!(bump_1d(eps, a, b, b), 1.0);
        assert!((bump_1d(eps, a, b, b + eps / 2.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(bump_1d(eps, f64::NEG_INFINITY, b, -1e9), 1.0);
        assert_eq!(bump_1d(eps, a, f64::INFINITY, 1e9), 1.0);
    }

    #[test]
    fn gluing_is_continuous() {
        let (eps, a, b) = (0.1, -1.0, 2.0);
        let t = 1e-13;
        assert!((bump_1d(eps, a, b, a + t) - 1.0).abs() < 1e-12);
        assert!((bump_1d(eps, a, b, a - t) - 1.0).abs() < 1e-11);
        assert!((bump_1d(eps, a, b, b - t) - 1.0).abs() < 1e-12);
        assert!((bump_1d(eps, a, b, b + t) - 1.0).abs() < 1e-11);
        assert!(bump_1d(eps, a, b, a - eps + 1e-3) < 1e-12);
        assert!(bump_1d(eps, a, b, b + eps - 1e-3) < 1e-12);
    }

    #[test]
    fn ramp_derivatives_match_finite_differences() {
        let eps = 0.3;
        for x in [-0.25, -0.1, -0.02, 1.05, 1.2] {
            let d = bump_1d_derivs(eps, 0.0, 1.0, x);
            let h = 1e-6;
            let p = bump_1d_derivs(eps, 0.0, 1.0, x + h);
            let m = bump_1d_derivs(eps, 0.0, 1.0, x - h);
            for k in 0..3 {
                let fd = (p[k] - m[k]) / (2.0 * h);
                assert!((fd - d[k + 1]).abs() < 1e-5 * (1.0 + d[k + 1].abs()), "x={x} k={k}");
            }
        }
    }

    #[test]
    fn half_line_example() {
        let p = BumpParams::new(
            0.1,
            Domain::Box { lo: vec![0.0], hi: vec![f64::INFINITY] },
        )
        .unwrap();
        assert!((bump_domain(&p, &[0.15]).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(bump_domain(&p, &[0.05]).unwrap(), 0.0);
        assert_eq!(bump_domain(&p, &[5.0]).unwrap(), 1.0);
    }

    #[test]
    fn box_center_and_outside() {
        let p = BumpParams::new(
            0.05,
            Domain::Box { lo: vec![0.0; 3], hi: vec![1.0; 3] },
        )
        .unwrap();
        assert_eq!(bump_domain(&p, &[0.5; 3]).unwrap(), 1.0);
        assert_eq!(bump_domain(&p, &[0.5, 0.5, 0.97]).unwrap(), 0.0);
    }

    fn sandwich_holds(p: &BumpParams, grid: &[Vec<f64>], dist_to_complement: impl Fn(&[f64]) -> f64) {
        let e = p.eps;
        for x in grid {
            let v = bump_domain(p, x).unwrap();
            let dc = dist_to_complement(x);
            assert!((0.0..=1.0).contains(&v));
            if dc >= 2.0 * e + 1e-12 {
                assert_eq!(v, 1.0, "{x:?}");
            }
            if dc <= e {
                assert_eq!(v, 0.0, "{x:?}");
            }
        }
    }

    fn grid2(lo: f64, hi: f64, n: usize) -> Vec<Vec<f64>> {
        let s = (hi - lo) / (n - 1) as f64;
        (0..n)
            .flat_map(|i| (0..n).map(move |j| vec![lo + s * i as f64, lo + s * j as f64]))
            .collect()
    }

    #[test]
    fn sandwich_box_and_ball() {
        let b = BumpParams::new(0.1, Domain::Box { lo: vec![0.0, -1.0], hi: vec![2.0, 1.0] }).unwrap();
        sandwich_holds(&b, &grid2(-0.5, 2.5, 121), |x| {
            (x[0] - 0.0).min(2.0 - x[0]).min(x[1] + 1.0).min(1.0 - x[1])
        });
        let c = BumpParams::new(0.15, Domain::Ball { center: vec![0.2, -0.1], radius: 1.0 }).unwrap();
        sandwich_holds(&c, &grid2(-1.2, 1.2, 121), |x| 1.0 - dist2(x, &[0.2, -0.1]).sqrt());
    }

    #[test]
    fn ball_bump_is_continuous_across_empty_slices() {
        let c = BumpParams::new(0.1, Domain::Ball { center: vec![0.0, 0.0], radius: 1.0 }).unwrap();
        // slice along axis 0 empties at |x₂| = 0.8
        let below = bump_domain(&c, &[0.0, 0.8 - 1e-9]).unwrap();
        let above = bump_domain(&c, &[0.0, 0.8 + 1e-9]).unwrap();
        assert!((below - above).abs() < 1e-6, "{below} {above}");
    }

    #[test]
    fn ball_jet_matches_finite_differences() {
        let c = BumpParams::new(0.2, Domain::Ball { center: vec![0.1, 0.0], radius: 1.0 }).unwrap();
        let x = [0.62, 0.35];
        let j = bump_domain_jet(&c, &Jet::seed_all(&x, 2).unwrap()).unwrap();
        assert!(j.value() > 0.0 && j.value() < 1.0);
        let h = 1e-6;
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (bump_domain(&c, &xp).unwrap() - bump_domain(&c, &xm).unwrap()) / (2.0 * h);
            assert!((fd - j.grad(i)).abs() < 1e-6, "{fd} vs {}", j.grad(i));
        }
    }

    #[test]
    fn log_grad_sup_carries_extra_factor_e() {
        let eps = 0.1;
        let p = 2.0;
        let params = BumpParams::new(eps, Domain::Box { lo: vec![0.0], hi: vec![1.0] }).unwrap();
        let grid: Vec<Vec<f64>> = (0..=200_000).map(|k| vec![0.1 + 0.1 * k as f64 / 200_000.0]).collect();
        let c = log_grad_bound_check(&params, p, &grid).unwrap();
        assert!((c.bound - 100.0 * 256.0 * (-4.0f64).exp()).abs() < 1e-9);
        // |∂ ln ψ|^p ψ = ε^{−p} y^{2p} e^{1−y} with y = ε/(x + ε − a), maximal at y = 2p
        let exact = E * c.bound;
        assert!((c.sup_found - exact).abs() < 1e-6 * exact, "{} vs {exact}", c.sup_found);
        assert!(!c.holds);
        assert!(c.holds_corrected);
        let deep = log_grad_bound_check(&params, p, &[vec![0.5]]).unwrap();
        assert_eq!(deep.sup_found, 0.0);
        let half = BumpParams::new(eps / 2.0, Domain::Box { lo: vec![0.0], hi: vec![1.0] }).unwrap();
        let c2 = log_grad_bound_check(&half, p, &[vec![0.5]]).unwrap();
        assert!((c2.bound / c.bound - 4.0).abs() < 1e-12);
    }

    #[test]
    fn locality_error() {
        let f = Functional::scalar(1, crate::jets::Expr::var(0).powi(2)).unwrap();
        let p = BumpParams::new(0.1, Domain::Box { lo: vec![0.5], hi: vec![10.0] }).unwrap();
        let cfg = EstimatorConfig::default().with_n(100);
        assert!(matches!(localized_density(&f, &[0.55], &p, &cfg), Err(Error::Locality { .. })));
    }

    #[test]
    fn chi_square_localized() {
        let f = Functional::scalar(1, crate::jets::Expr::var(0).powi(2)).unwrap();
        let p = BumpParams::new(0.1, Domain::Box { lo: vec![0.5], hi: vec![10.0] }).unwrap();
        let cfg = EstimatorConfig::default().with_n(200_000).with_seed(2);
        let r = localized_density(&f, &[1.0], &p, &cfg).unwrap();
        let exact = (-0.5f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert!(r.within(exact, 4.0), "{r}");
    }
}
