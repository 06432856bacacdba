use serde::Serialize;

use crate::error::{Error, Result};
use crate::jets::Expr;
use crate::kernel::{riesz_constant, KernelParams};
use crate::malliavin::Functional;
use crate::sampling::Moments;

use super::{
    accumulate, build_result, estimate_density, first_weights, EstimateResult, EstimatorConfig,
    Kind,
};

fn require_exponent(p: f64, d: usize) -> Result<()> {
    if !(p > d as f64) {
        return Err(Error::Exponent { p, d });
    }
    Ok(())
}

/// Constants of the Θ_p and sup-norm bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Constants {
    pub d: usize,
    pub p: f64,
    /// `k_{d,p} = (d−1)p/(p−d)`
    pub k: f64,
    /// `K_{d,p} = 1 + 2A_d^{p/(p−1)}((p−1)/(p−d) · 2d · A_d^{p/(p−1)})^k`
    pub big_k: f64,
}

impl Constants {
    /// `Θ_p(μ) ≤ d K ‖1‖^k`
    pub fn theta_bound(&self, norm: f64) -> f64 {
        self.d as f64 * self.big_k * norm.powf(self.k)
    }

    /// `‖p_μ‖_∞ ≤ 2d K ‖1‖^{k+1}`
    pub fn sup_bound(&self, norm: f64) -> f64 {
        2.0 * self.d as f64 * self.big_k * norm.powf(self.k + 1.0)
    }
}

pub fn theoretical_constants(d: usize, p: f64) -> Result<Constants> {
    if d == 0 {
        return Err(Error::Range { name: "d", reason: "must be at least 1".into() });
    }
    require_exponent(p, d)?;
    let df = d as f64;
    let k = (df - 1.0) * p / (p - df);
    let a = riesz_constant(d).powf(p / (p - 1.0));
    let big_k = 1.0 + 2.0 * a * ((p - 1.0) / (p - df) * 2.0 * df * a).powf(k);
    Ok(Constants { d, p, k, big_k })
}

#[derive(Clone, Debug)]
pub struct ThetaEstimate {
    /// Largest probe value.
    pub result: EstimateResult,
    pub per_probe: Vec<f64>,
    pub per_probe_stderr: Vec<f64>,
    pub argmax: usize,
}

/// `Θ_p(μ) = sup_a Σ_i (E|∂_iQ_d(F − a)|^{p/(p−1)})^{(p−1)/p}` over the
/// probe points, with the exact kernel.
pub fn estimate_theta(
    f: &Functional,
    p: f64,
    probes: &[Vec<f64>],
    cfg: &EstimatorConfig,
) -> Result<ThetaEstimate> {
    let d = f.d();
    require_exponent(p, d)?;
    if probes.is_empty() {
        return Err(Error::Range { name: "probes", reason: "empty probe grid".into() });
    }
    if let Some(bad) = probes.iter().find(|a| a.len() != d) {
        return Err(Error::Dimension { expected: d, got: bad.len() });
    }
    let q = p / (p - 1.0);
    let kernel = KernelParams::new(d);
    let m = accumulate(cfg, f.n(), 0, || Moments::blocks(probes.len(), d), |w, _, out| {
        let fv = f.eval(w)?;
        let mut y = vec![0.0; d];
        for (blk, a) in out.chunks_mut(d).zip(probes) {
            for ((yi, fi), ai) in y.iter_mut().zip(&fv).zip(a) {
                *yi = fi - ai;
            }
            kernel.exact_grad_into(&y, blk);
            for v in blk.iter_mut() {
                *v = v.abs().powf(q);
            }
        }
        Ok(true)
    })?;
    let n = m.count() as f64;
    let mut per_probe = Vec::with_capacity(probes.len());
    let mut per_probe_stderr = Vec::with_capacity(probes.len());
    for j in 0..probes.len() {
        let base = j * d;
        let means: Vec<f64> = (0..d).map(|i| m.mean(base + i)).collect();
        per_probe.push(means.iter().map(|mi| mi.powf(1.0 / q)).sum());
        let grad: Vec<f64> =
            means.iter().map(|&mi| if mi > 0.0 { mi.powf(1.0 / q - 1.0) / q } else { 0.0 }).collect();
        let mut var = 0.0;
        for a in 0..d {
            for b in 0..d {
                var += grad[a] * grad[b] * m.cov(base + a, base + b);
            }
        }
        per_probe_stderr.push((var.max(0.0) / n).sqrt());
    }
    let argmax = (0..probes.len()).fold(0, |best, j| if per_probe[j] > per_probe[best] { j } else { best });
    let result = build_result(
        Kind::Theta,
        per_probe[argmax],
        Some(per_probe_stderr[argmax]),
        &m,
        0.0,
        cfg,
        Some(format!("sup over {} probe points, maximizer {:?}", probes.len(), probes[argmax])),
    );
    Ok(ThetaEstimate { result, per_probe, per_probe_stderr, argmax })
}

/// `1 + Σ_i ‖H_i(F; 1)‖_{L^p}`, an upper bound of `‖1‖_{W^{1,p}_μ}`.
pub fn sobolev_norm_one(f: &Functional, p: f64, cfg: &EstimatorConfig) -> Result<EstimateResult> {
    if !(p >= 1.0) {
        return Err(Error::Range { name: "p", reason: format!("must be ≥ 1, got {p}") });
    }
    let d = f.d();
    let one = Expr::constant(1.0);
    let m = accumulate(cfg, f.n(), 0, || Moments::full(d), |w, _, out| {
        let mut fv = vec![0.0; d];
        let mut h = vec![vec![0.0; d]];
        first_weights(f, &[&one], w, cfg.det_threshold, &mut fv, &mut h)?;
        for (o, hi) in out.iter_mut().zip(&h[0]) {
            *o = hi.abs().powf(p);
        }
        Ok(true)
    })?;
    let means: Vec<f64> = (0..d).map(|i| m.mean(i)).collect();
    let value = 1.0 + means.iter().map(|mi| mi.powf(1.0 / p)).sum::<f64>();
    let grad: Vec<f64> =
        means.iter().map(|&mi| if mi > 0.0 { mi.powf(1.0 / p - 1.0) / p } else { 0.0 }).collect();
    let mut var = 0.0;
    for a in 0..d {
        for b in 0..d {
            var += grad[a] * grad[b] * m.cov(a, b);
        }
    }
    Ok(build_result(
        Kind::Norm,
        value,
        Some((var.max(0.0) / m.count() as f64).sqrt()),
        &m,
        0.0,
        cfg,
        Some("upper bound via H".into()),
    ))
}

#[derive(Clone, Debug, Serialize)]
pub struct TailCheck {
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub rhs: f64,
    pub rhs_stderr: f64,
    pub theta: f64,
    pub norm: f64,
    /// `μ(B₂(x))`
    pub ball_mass: f64,
    pub p_bar: f64,
    pub holds: bool,
}

/// `p(x) ≤ Θ_{p̄}(μ)(d + ‖1‖_{W^{1,p}}) μ(B₂(x))^a` with `p̄ = 1/(a + 1/p)`.
pub fn tail_bound_check(
    f: &Functional,
    x: &[f64],
    a: f64,
    p: f64,
    probes: &[Vec<f64>],
    cfg: &EstimatorConfig,
) -> Result<TailCheck> {
    let d = f.d();
    require_exponent(p, d)?;
    let hi = 1.0 / d as f64 - 1.0 / p;
    if !(a > 0.0 && a < hi) {
        return Err(Error::Range { name: "a", reason: format!("need 0 < a < 1/d − 1/p = {hi}, got {a}") });
    }
    let p_bar = 1.0 / (a + 1.0 / p);
    let lhs = estimate_density(f, x, cfg)?;
    let lhs_stderr = lhs.stderr.unwrap_or(0.0);
    let theta = estimate_theta(f, p_bar, probes, cfg)?;
    let norm = sobolev_norm_one(f, p, cfg)?;
    let ball = accumulate(cfg, f.n(), 0, || Moments::full(1), |w, _, out| {
        let fv = f.eval(w)?;
        let r2: f64 = fv.iter().zip(x).map(|(u, v)| (u - v).powi(2)).sum();
        out[0] = if r2 <= 4.0 { 1.0 } else { 0.0 };
        Ok(true)
    })?;
    let (th, th_se) = (theta.result.value, theta.result.stderr.unwrap_or(0.0));
    let (nv, nv_se) = (norm.value, norm.stderr.unwrap_or(0.0));
    let (mu, mu_se) = (ball.mean(0), ball.stderr(0));
    let rhs = th * (d as f64 + nv) * mu.powf(a);
    let rel = th_se / th + nv_se / (d as f64 + nv) + if mu > 0.0 { a * mu_se / mu } else { 0.0 };
    let rhs_stderr = rhs * rel;
    let holds = lhs.value <= rhs + 3.0 * (lhs_stderr + rhs_stderr);
    Ok(TailCheck {
        lhs: lhs.value,
        lhs_stderr,
        rhs,
        rhs_stderr,
        theta: th,
        norm: nv,
        ball_mass: mu,
        p_bar,
        holds,
    })
}
