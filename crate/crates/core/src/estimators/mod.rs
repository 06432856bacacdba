//! Monte Carlo estimators built on the Riesz representation
//!
//! ```text
//! p_F(x)     = −E[Σ_i ∂_iQ_d(F − x) H_i(F; 1)]
//! ∂_α p_F(x) = −E[Σ_i ∂_iQ_d(F − x) H_{(α,i)}(F; 1)]
//! ```
//!
//! with the kernel clamped at `r_min` to keep the variance finite.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jets::{Expr, Jet, Node};
use crate::malliavin::{Functional, WeightBasis, DEFAULT_DET_THRESHOLD};
use crate::sampling::{Moments, Sampler, DEFAULT_CHUNK};

mod bounds;
mod density;
mod duality;
mod kde;

pub use bounds::{
    estimate_theta, sobolev_norm_one, tail_bound_check, theoretical_constants, Constants,
    TailCheck, ThetaEstimate,
};
pub use density::{
    analytic_reference, estimate_conditional, estimate_density, estimate_density_field,
    estimate_density_grad, smoothing_check, SmoothingCheck,
};
pub(crate) use density::{density_sample_with_g, kernel_for};
pub use duality::{duality_residual, duality_residual_second, TestBump};
pub use kde::{draw_samples, kde_baseline, silverman_bandwidth};

/// Truncation radius selection for the Riesz kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Truncation {
    /// `r_min = N^{−1/(d+2)}`
    Auto,
    Fixed(f64),
    /// Exact kernel; infinite variance for d ≥ 2.
    Off,
}

impl Truncation {
    pub fn radius(self, n: usize, d: usize) -> f64 {
        if d == 1 {
            return 0.0;
        }
        match self {
            Truncation::Auto => (n as f64).powf(-1.0 / (d as f64 + 2.0)),
            Truncation::Fixed(r) => r,
            Truncation::Off => 0.0,
        }
    }
}

impl FromStr for Truncation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(Truncation::Auto),
            "off" | "none" => Ok(Truncation::Off),
            t => match t.parse::<f64>() {
                Ok(r) if r == 0.0 => Ok(Truncation::Off),
                Ok(r) if r > 0.0 && r.is_finite() => Ok(Truncation::Fixed(r)),
                _ => Err(Error::Range {
                    name: "r_min",
                    reason: format!("expected `auto`, `off` or a radius ≥ 0, got `{t}`"),
                }),
            },
        }
    }
}

impl fmt::Display for Truncation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Truncation::Auto => write!(f, "auto"),
            Truncation::Fixed(r) => write!(f, "{r}"),
            Truncation::Off => write!(f, "off"),
        }
    }
}

impl Serialize for Truncation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Truncation::Fixed(r) => s.serialize_f64(*r),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Truncation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let text = match Raw::deserialize(d)? {
            Raw::Num(r) => r.to_string(),
            Raw::Text(t) => t,
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    #[serde(rename = "r_min")]
    pub truncation: Truncation,
    pub chunk: usize,
    pub p: f64,
    pub det_threshold: f64,
    pub denom_floor: f64,
    /// 0 uses every available core.
    pub workers: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            n: 100_000,
            seed: 1,
            truncation: Truncation::Auto,
            chunk: DEFAULT_CHUNK,
            p: 4.0,
            det_threshold: DEFAULT_DET_THRESHOLD,
            denom_floor: 1e-6,
            workers: 1,
        }
    }
}

impl EstimatorConfig {
    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_truncation(mut self, t: Truncation) -> Self {
        self.truncation = t;
        self
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_chunk(mut self, chunk: usize) -> Self {
        self.chunk = chunk;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::NoSamples("N must be at least 1"));
        }
        if self.chunk == 0 {
            return Err(Error::Range { name: "chunk", reason: "must be at least 1".into() });
        }
        if !(self.p >= 1.0) {
            return Err(Error::Range { name: "p", reason: format!("must be ≥ 1, got {}", self.p) });
        }
        if !(self.det_threshold >= 0.0) || !(self.denom_floor >= 0.0) {
            return Err(Error::Range {
                name: "det_threshold, denom_floor",
                reason: "must be non-negative".into(),
            });
        }
        if let Truncation::Fixed(r) = self.truncation {
            if !(r > 0.0) {
                return Err(Error::Range { name: "r_min", reason: format!("{r} is not positive") });
            }
        }
        Ok(())
    }

    pub(crate) fn sampler(&self, dim: usize) -> Sampler {
        Sampler::new(self.n, dim, self.seed).with_chunk(self.chunk).with_workers(self.workers)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Density,
    Derivative,
    Conditional,
    Theta,
    Norm,
    Tail,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Kind::Density => "density",
            Kind::Derivative => "derivative",
            Kind::Conditional => "conditional",
            Kind::Theta => "theta",
            Kind::Norm => "norm",
            Kind::Tail => "tail",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub kind: Kind,
    pub value: f64,
    /// Absent when the estimator has infinite variance (untruncated kernel).
    pub stderr: Option<f64>,
    pub n_used: u64,
    pub n_rejected: u64,
    pub r_min_used: f64,
    pub seed: u64,
    pub note: Option<String>,
}

impl EstimateResult {
    /// `|value − target| ≤ k · stderr`; false without a standard error.
    pub fn within(&self, target: f64, k: f64) -> bool {
        self.stderr.is_some_and(|s| (self.value - target).abs() <= k * s)
    }
}

impl fmt::Display for EstimateResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {:.7}", self.kind, self.value)?;
        match self.stderr {
            Some(s) => write!(f, " ± {s:.2e}")?,
            None => write!(f, " (no confidence interval: untruncated kernel)")?,
        }
        write!(f, "  [N = {}, rejected = {}", self.n_used, self.n_rejected)?;
        if self.r_min_used > 0.0 {
            write!(f, ", r_min = {:.4}", self.r_min_used)?;
        }
        write!(f, ", seed = {}]", self.seed)
    }
}

struct Acc {
    m: Moments,
    buf: Vec<f64>,
    fatal: Option<Error>,
}

/// Runs `body` on every draw. `body` fills the statistic vector and returns
/// `Ok(false)` (or a degeneracy error) to reject the draw; any other error
/// aborts the estimation.
pub(crate) fn accumulate<M, B>(
    cfg: &EstimatorConfig,
    dim: usize,
    aux: usize,
    make: M,
    body: B,
) -> Result<Moments>
where
    M: Fn() -> Moments + Sync,
    B: Fn(&[f64], &[f64], &mut [f64]) -> Result<bool> + Sync,
{
    cfg.validate()?;
    let k = make().len();
    let parts = cfg.sampler(dim).with_aux(aux).map_chunks_aux(
        || Acc { m: make(), buf: vec![0.0; k], fatal: None },
        |w, a, acc| {
            if acc.fatal.is_some() {
                return;
            }
            match body(w, a, &mut acc.buf) {
                Ok(true) if acc.buf.iter().all(|v| v.is_finite()) => acc.m.push(&acc.buf),
                Ok(_) | Err(Error::Degenerate { .. }) => acc.m.reject(),
                Err(e) => acc.fatal = Some(e),
            }
        },
    )?;
    let mut total = make();
    for part in parts {
        if let Some(e) = part.fatal {
            return Err(e);
        }
        total.merge(&part.m);
    }
    if total.count() == 0 {
        return Err(Error::AllRejected { total: total.rejected() as usize });
    }
    Ok(total)
}

/// Jet of `G` built on `vars`, skipping the expression walk for constants.
pub(crate) fn g_jet(g: &Expr, vars: &[Jet], order: usize) -> Result<Jet> {
    match g.node() {
        Node::Const(c) => Ok(Jet::constant(vars.len(), order, *c)),
        _ => Ok(g.jet_at(vars)?.truncate(order)),
    }
}

/// `F(w)` and `H_i(F; G)(w)` for every `G` in `gs`.
pub(crate) fn first_weights(
    f: &Functional,
    gs: &[&Expr],
    w: &[f64],
    det_threshold: f64,
    f_out: &mut [f64],
    h_out: &mut [Vec<f64>],
) -> Result<()> {
    let vars = Jet::seed_all(w, 2)?;
    let fj = f.jets_at(&vars)?;
    for (o, j) in f_out.iter_mut().zip(&fj) {
        *o = j.value();
    }
    let basis = WeightBasis::new(&fj, &vars, det_threshold)?;
    for (g, h) in gs.iter().zip(h_out.iter_mut()) {
        let gj = g_jet(g, &vars, 1)?;
        for (hi, ji) in h.iter_mut().zip(basis.first(&gj)) {
            *hi = ji.value();
        }
    }
    Ok(())
}

pub(crate) fn build_result(
    kind: Kind,
    value: f64,
    stderr: Option<f64>,
    m: &Moments,
    r_min: f64,
    cfg: &EstimatorConfig,
    note: Option<String>,
) -> EstimateResult {
    EstimateResult {
        kind,
        value,
        stderr,
        n_used: m.count(),
        n_rejected: m.rejected(),
        r_min_used: r_min,
        seed: cfg.seed,
        note,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_parsing() {
        assert_eq!("auto".parse::<Truncation>().unwrap(), Truncation::Auto);
        assert_eq!("0".parse::<Truncation>().unwrap(), Truncation::Off);
        assert_eq!("off".parse::<Truncation>().unwrap(), Truncation::Off);
        assert_eq!("0.05".parse::<Truncation>().unwrap(), Truncation::Fixed(0.05));
        assert!("-1".parse::<Truncation>().is_err());
        assert!("abc".parse::<Truncation>().is_err());
    }

    #[test]
    fn auto_schedule() {
        let r = Truncation::Auto.radius(1_000_000, 2);
        assert!((r - 1e6f64.powf(-0.25)).abs() < 1e-15);
        assert_eq!(Truncation::Fixed(0.3).radius(10, 1), 0.0);
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = EstimatorConfig::default().with_truncation(Truncation::Fixed(0.1));
        let text = toml::to_string(&cfg).unwrap();
        let back: EstimatorConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.truncation, Truncation::Fixed(0.1));
        let auto: EstimatorConfig = toml::from_str("r_min = \"auto\"\nN = 10").unwrap();
        assert_eq!(auto.truncation, Truncation::Auto);
        assert_eq!(auto.n, 10);
        let off: EstimatorConfig = toml::from_str("r_min = 0").unwrap();
        assert_eq!(off.truncation, Truncation::Off);
    }
}
