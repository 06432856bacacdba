use crate::error::{Error, Result};
use crate::jets::{Expr, Jet};
use crate::kernel::KernelParams;
use crate::malliavin::{Functional, MultiIndex, WeightBasis};
use crate::sampling::Moments;
use crate::scenarios::{get_scenario, AnalyticDensity, Scenario, ScenarioParams};

use super::{
    accumulate, build_result, first_weights, sobolev_norm_one, EstimateResult,
    EstimatorConfig, Kind, Truncation,
};

fn check_point(f: &Functional, x: &[f64]) -> Result<()> {
    if x.len() != f.d() {
        return Err(Error::Dimension { expected: f.d(), got: x.len() });
    }
    Ok(())
}

pub(crate) fn kernel_for(d: usize, cfg: &EstimatorConfig) -> KernelParams {
    KernelParams::new(d).with_truncation(cfg.truncation.radius(cfg.n, d))
}

/// Standard errors are meaningful only for a bounded kernel.
fn reportable_stderr(d: usize, cfg: &EstimatorConfig, s: f64) -> Option<f64> {
    (d == 1 || cfg.truncation != Truncation::Off).then_some(s)
}

fn exponent_note(d: usize, cfg: &EstimatorConfig) -> Option<String> {
    (cfg.p <= d as f64).then(|| format!("p = {} ≤ d = {d}: integrability bounds do not apply", cfg.p))
}

/// `−Σ_i K_i(F − x) h_i`
#[inline]
fn contract(kernel: &KernelParams, fv: &[f64], x: &[f64], h: &[f64], scratch: &mut [f64]) -> f64 {
    for ((s, a), b) in scratch.iter_mut().zip(fv).zip(x) {
        *s = a - b;
    }
    let mut k = [0.0; 32];
    let k = &mut k[..fv.len()];
    kernel.truncated_grad_into(scratch, k);
    -k.iter().zip(h).map(|(a, b)| a * b).sum::<f64>()
}

/// Density of `F` at `x`.
pub fn estimate_density(f: &Functional, x: &[f64], cfg: &EstimatorConfig) -> Result<EstimateResult> {
    Ok(estimate_density_field(f, &[x.to_vec()], cfg)?.remove(0))
}

/// Density of `F` at several points from one set of draws: the weights of
/// each draw are computed once and contracted against the kernel at every
/// point.
pub fn estimate_density_field(
    f: &Functional,
    points: &[Vec<f64>],
    cfg: &EstimatorConfig,
) -> Result<Vec<EstimateResult>> {
    let d = f.d();
    for x in points {
        check_point(f, x)?;
    }
    let kernel = kernel_for(d, cfg);
    let one = Expr::constant(1.0);
    let m = accumulate(cfg, f.n(), 0, || Moments::diagonal(points.len()), |w, _, out| {
        let mut fv = vec![0.0; d];
        let mut h = vec![vec![0.0; d]];
        first_weights(f, &[&one], w, cfg.det_threshold, &mut fv, &mut h)?;
        let mut scratch = vec![0.0; d];
        for (o, x) in out.iter_mut().zip(points) {
            *o = contract(&kernel, &fv, x, &h[0], &mut scratch);
        }
        Ok(true)
    })?;
    Ok((0..points.len())
        .map(|j| {
            build_result(
                Kind::Density,
                m.mean(j),
                reportable_stderr(d, cfg, m.stderr(j)),
                &m,
                kernel.r_min,
                cfg,
                exponent_note(d, cfg),
            )
        })
        .collect())
}

/// `∂_α p_F(x)` for `|α| ≤ 1`; the empty index gives the density.
pub fn estimate_density_grad(
    f: &Functional,
    x: &[f64],
    alpha: &MultiIndex,
    cfg: &EstimatorConfig,
) -> Result<EstimateResult> {
    if alpha.len() > 1 {
        return Err(Error::OrderCap { requested: alpha.len(), max: 1 });
    }
    alpha.check(f.d())?;
    let Some(&a) = alpha.indices().first() else {
        return estimate_density(f, x, cfg);
    };
    check_point(f, x)?;
    let d = f.d();
    let kernel = kernel_for(d, cfg);
    let m = accumulate(cfg, f.n(), 0, || Moments::full(1), |w, _, out| {
        let vars = Jet::seed_all(w, 3)?;
        let fj = f.jets_at(&vars)?;
        let basis = WeightBasis::new(&fj, &vars, cfg.det_threshold)?;
        let h_a = basis.first(&Jet::constant(f.n(), 2, 1.0)).swap_remove(a);
        let h: Vec<f64> = basis.first(&h_a).iter().map(Jet::value).collect();
        let fv: Vec<f64> = fj.iter().map(Jet::value).collect();
        let mut scratch = vec![0.0; d];
        out[0] = contract(&kernel, &fv, x, &h, &mut scratch);
        Ok(true)
    })?;
    Ok(build_result(
        Kind::Derivative,
        m.mean(0),
        reportable_stderr(d, cfg, m.stderr(0)),
        &m,
        kernel.r_min,
        cfg,
        exponent_note(d, cfg),
    ))
}

/// `E[G | F = x]` as the ratio of the `G`-weighted and plain density
/// estimates from the same draws.
pub fn estimate_conditional(
    f: &Functional,
    g: &Expr,
    x: &[f64],
    cfg: &EstimatorConfig,
) -> Result<EstimateResult> {
    check_point(f, x)?;
    if let Some(k) = g.max_var() {
        if k >= f.n() {
            return Err(Error::IndexOutOfRange { index: k, n: f.n() });
        }
    }
    let d = f.d();
    let kernel = kernel_for(d, cfg);
    let one = Expr::constant(1.0);
    let m = accumulate(cfg, f.n(), 0, || Moments::full(2), |w, _, out| {
        let mut fv = vec![0.0; d];
        let mut h = vec![vec![0.0; d]; 2];
        first_weights(f, &[g, &one], w, cfg.det_threshold, &mut fv, &mut h)?;
        let mut scratch = vec![0.0; d];
        out[0] = contract(&kernel, &fv, x, &h[0], &mut scratch);
        out[1] = contract(&kernel, &fv, x, &h[1], &mut scratch);
        Ok(true)
    })?;
    let (num, den) = (m.mean(0), m.mean(1));
    let den_se = m.stderr(1);
    if !(den > cfg.denom_floor) || den <= 3.0 * den_se {
        return Err(Error::OutsideSupport { estimate: den, floor: cfg.denom_floor.max(3.0 * den_se) });
    }
    let r = num / den;
    let n = m.count() as f64;
    // first-order delta method for a ratio of means
    let var = (m.var(0) - 2.0 * r * m.cov(0, 1) + r * r * m.var(1)) / (den * den * n);
    Ok(build_result(
        Kind::Conditional,
        r,
        reportable_stderr(d, cfg, var.max(0.0).sqrt()),
        &m,
        kernel.r_min,
        cfg,
        exponent_note(d, cfg),
    ))
}

/// Closed-form density of a built-in scenario with default parameters.
pub fn analytic_reference(scenario: &str, x: &[f64]) -> Result<Option<f64>> {
    let s = get_scenario(scenario, &ScenarioParams::default())?;
    if x.len() != s.d() {
        return Err(Error::Dimension { expected: s.d(), got: x.len() });
    }
    Ok(s.analytic_density(x))
}

#[derive(Clone, Debug)]
pub struct SmoothingCheck {
    /// Density of `F + Δ` at `x`.
    pub estimate: EstimateResult,
    /// Exact density of `F + Δ` when `F` is Gaussian.
    pub analytic: Option<f64>,
    /// H-based upper bound of `‖1‖_{W^{1,p}}`, computed from the weights of
    /// `F` alone.
    pub norm: EstimateResult,
}

/// Density of `F + Δ` with `Δ ~ N(0, noise_sd² I)` independent of `F`,
/// reusing the weights `H_i(F; 1)`.
pub fn smoothing_check(
    scenario: &Scenario,
    noise_sd: f64,
    x: &[f64],
    cfg: &EstimatorConfig,
) -> Result<SmoothingCheck> {
    if !(noise_sd >= 0.0) {
        return Err(Error::Range { name: "noise_sd", reason: format!("{noise_sd} < 0") });
    }
    let f = &scenario.f;
    check_point(f, x)?;
    let d = f.d();
    let estimate = if noise_sd == 0.0 {
        estimate_density(f, x, cfg)?
    } else {
        let kernel = kernel_for(d, cfg);
        let one = Expr::constant(1.0);
        let m = accumulate(cfg, f.n(), d, || Moments::full(1), |w, noise, out| {
            let mut fv = vec![0.0; d];
            let mut h = vec![vec![0.0; d]];
            first_weights(f, &[&one], w, cfg.det_threshold, &mut fv, &mut h)?;
            for (v, z) in fv.iter_mut().zip(noise) {
                *v += noise_sd * z;
            }
            let mut scratch = vec![0.0; d];
            out[0] = contract(&kernel, &fv, x, &h[0], &mut scratch);
            Ok(true)
        })?;
        build_result(
            Kind::Density,
            m.mean(0),
            reportable_stderr(d, cfg, m.stderr(0)),
            &m,
            kernel.r_min,
            cfg,
            Some(format!("law of F + N(0, {noise_sd}² I)")),
        )
    };
    let analytic = match &scenario.analytic {
        Some(AnalyticDensity::Gaussian { mean, cov, .. }) => {
            let mut cov = cov.clone();
            for (i, row) in cov.iter_mut().enumerate() {
                row[i] += noise_sd * noise_sd;
            }
            Some(AnalyticDensity::gaussian(mean.clone(), cov)?.density(x))
        }
        _ => None,
    };
    let norm = sobolev_norm_one(f, cfg.p, cfg)?;
    Ok(SmoothingCheck { estimate, analytic, norm })
}

/// One draw of `−Σ_i K_i(F − x) H_i(F; G)` for a `G` jet already built on
/// `vars`; zero without building weights when `G` vanishes identically.
pub(crate) fn density_sample_with_g(
    f: &Functional,
    g: &Jet,
    vars: &[Jet],
    fj: &[Jet],
    kernel: &KernelParams,
    x: &[f64],
    det_threshold: f64,
) -> Result<f64> {
    if g.is_zero() {
        return Ok(0.0);
    }
    let basis = WeightBasis::new(fj, vars, det_threshold)?;
    let h: Vec<f64> = basis.first(g).iter().map(Jet::value).collect();
    let fv: Vec<f64> = fj.iter().map(Jet::value).collect();
    let mut scratch = vec![0.0; f.d()];
    Ok(contract(kernel, &fv, x, &h, &mut scratch))
}
