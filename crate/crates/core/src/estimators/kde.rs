use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::malliavin::Functional;

use super::EstimatorConfig;

/// `N` draws of `F` from the same streams the estimators use.
pub fn draw_samples(f: &Functional, cfg: &EstimatorConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let mut fatal = None;
    let parts = cfg.sampler(f.n()).map_chunks(
        || (Vec::new(), None),
        |w, acc: &mut (Vec<Vec<f64>>, Option<Error>)| {
            if acc.1.is_none() {
                match f.eval(w) {
                    Ok(v) => acc.0.push(v),
                    Err(e) => acc.1 = Some(e),
                }
            }
        },
    )?;
    let mut out = Vec::with_capacity(cfg.n);
    for (chunk, err) in parts {
        if fatal.is_none() {
            fatal = err;
        }
        out.extend(chunk);
    }
    match fatal {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Silverman's rule `h = σ̄ (4 / ((d + 2) n))^{1/(d+4)}` with `σ̄` the mean
/// per-coordinate standard deviation.
pub fn silverman_bandwidth(samples: &[Vec<f64>]) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::NoSamples("bandwidth needs at least two samples"));
    }
    let d = samples[0].len();
    let nf = n as f64;
    let mut sd = 0.0;
    for i in 0..d {
        let mean = samples.iter().map(|s| s[i]).sum::<f64>() / nf;
        let var = samples.iter().map(|s| (s[i] - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        sd += var.sqrt();
    }
    sd /= d as f64;
    Ok(sd * (4.0 / ((d as f64 + 2.0) * nf)).powf(1.0 / (d as f64 + 4.0)))
}

/// Isotropic Gaussian-kernel density estimate at `x`.
pub fn kde_baseline(samples: &[Vec<f64>], x: &[f64], bandwidth: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::NoSamples("kernel density estimate of an empty sample"));
    }
    if !(bandwidth > 0.0) {
        return Err(Error::Range { name: "bandwidth", reason: format!("{bandwidth} is not positive") });
    }
    let d = x.len();
    if let Some(s) = samples.iter().find(|s| s.len() != d) {
        return Err(Error::Dimension { expected: d, got: s.len() });
    }
    let inv = 1.0 / (bandwidth * bandwidth);
    let total: f64 = samples
        .iter()
        .map(|s| {
            let r2: f64 = s.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            (-0.5 * r2 * inv).exp()
        })
        .sum();
    let norm = (2.0 * PI * bandwidth * bandwidth).powf(d as f64 / 2.0);
    Ok(total / (samples.len() as f64 * norm))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample_gives_kernel_peak() {
        let h = 0.01;
        let v = kde_baseline(&[vec![0.3, 0.4]], &[0.3, 0.4], h).unwrap();
        assert!((v - 1.0 / (2.0 * PI * h * h)).abs() < 1e-9);
    }

    #[test]
    fn empty_and_bad_bandwidth() {
        assert!(matches!(kde_baseline(&[], &[0.0], 1.0), Err(Error::NoSamples(_))));
        assert!(kde_baseline(&[vec![0.0]], &[0.0], 0.0).is_err());
    }

    #[test]
    fn standard_normal_at_origin() {
        let f = Functional::identity(2);
        let cfg = EstimatorConfig::default().with_n(100_000);
        let s = draw_samples(&f, &cfg).unwrap();
        assert_eq!(s.len(), 100_000);
        let h = silverman_bandwidth(&s).unwrap();
        let v = kde_baseline(&s, &[0.0, 0.0], h).unwrap();
        assert!((v / (1.0 / (2.0 * PI)) - 1.0).abs() < 0.05, "{v}");
    }
}
