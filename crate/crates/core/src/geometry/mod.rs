//! Density geometry on rectangular grids in d ≤ 3: the semi-distance
//! `d_μ(x, y) = inf_φ ∫ |⟨∇ln p(φ_t), φ̇_t⟩| dt` over paths inside
//! `U_μ = {p > δ}`, its energy variant, and Bell's identity
//! `p(y) = p(x) exp(∫⟨∇ln p, dφ⟩)`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::estimators::{estimate_density_field, kde_baseline, silverman_bandwidth, EstimatorConfig};
use crate::malliavin::Functional;
use crate::scenarios::AnalyticDensity;

mod paths;

pub use paths::{
    bell_path_integral, components, energy_distance, graph_distance, positivity_report, riesz_distance,
    shortest_path, Distance, PositivityReport, ProbeRow, RELAX_ITERATIONS, RELAX_SEGMENTS,
};

pub const MIN_RESOLUTION: usize = 8;
pub const DEFAULT_RELATIVE_THRESHOLD: f64 = 1e-4;

pub enum FieldSource<'a> {
    Analytic(&'a AnalyticDensity),
    Estimated { f: &'a Functional, cfg: &'a EstimatorConfig },
    /// Kernel density estimate; Silverman bandwidth when `None`.
    Samples { samples: &'a [Vec<f64>], bandwidth: Option<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Threshold {
    /// Fraction of the grid maximum of `p̂`.
    Relative(f64),
    Absolute(f64),
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold::Relative(DEFAULT_RELATIVE_THRESHOLD)
    }
}

/// `p̂`, `ln p̂` and `∇ln p̂` at the nodes of a box grid with `res` points
/// per axis. Nodes with `p̂ ≤ threshold` are outside `U_μ`; their `logp`
/// and score entries are NaN.
#[derive(Clone, Debug)]
pub struct GridField {
    pub d: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub res: usize,
    pub step: Vec<f64>,
    pub p_hat: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
    pub logp: Vec<f64>,
    /// Node-major, `d` entries per node.
    pub score: Vec<f64>,
    pub inside: Vec<bool>,
    pub threshold: f64,
}

impl GridField {
    pub fn len(&self) -> usize {
        self.p_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_hat.is_empty()
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        (0..self.d)
            .map(|_| {
                let i = idx % self.res;
                idx /= self.res;
                i
            })
            .collect()
    }

    pub fn flat_index(&self, mi: &[usize]) -> usize {
        mi.iter().rev().fold(0, |acc, &i| acc * self.res + i)
    }

    pub fn node(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .iter()
            .zip(self.lo.iter().zip(&self.step))
            .map(|(&i, (l, h))| l + h * i as f64)
            .collect()
    }

    pub fn nodes(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    pub fn score_at_node(&self, idx: usize) -> &[f64] {
        &self.score[idx * self.d..(idx + 1) * self.d]
    }

    /// Nearest node to `x`; `None` outside the box.
    pub fn snap(&self, x: &[f64]) -> Option<usize> {
        if x.len() != self.d {
            return None;
        }
        let mut mi = Vec::with_capacity(self.d);
        for k in 0..self.d {
            let t = ((x[k] - self.lo[k]) / self.step[k]).round();
            if !(t >= 0.0 && t <= (self.res - 1) as f64) {
                return None;
            }
            mi.push(t as usize);
        }
        Some(self.flat_index(&mi))
    }

    /// Snapped inside node, or the locality error.
    pub fn inside_node(&self, x: &[f64]) -> Result<usize> {
        match self.snap(x) {
            Some(i) if self.inside[i] => Ok(i),
            _ => Err(Error::OutsideField { x: x.to_vec() }),
        }
    }

    pub fn mean_step(&self) -> f64 {
        self.step.iter().sum::<f64>() / self.d as f64
    }

    /// Cell corner indices and multilinear weights for `x`; `None` if the
    /// cell leaves the box or touches an outside node.
    fn cell(&self, x: &[f64]) -> Option<Vec<(usize, f64)>> {
        let mut base = Vec::with_capacity(self.d);
        let mut frac = Vec::with_capacity(self.d);
        for k in 0..self.d {
            let t = (x[k] - self.lo[k]) / self.step[k];
            let top = (self.res - 1) as f64;
            if !(t >= -1e-9 && t <= top + 1e-9) {
                return None;
            }
            let t = t.clamp(0.0, top);
            let i = (t.floor() as usize).min(self.res - 2);
            base.push(i);
            frac.push(t - i as f64);
        }
        let mut out = Vec::with_capacity(1 << self.d);
        for corner in 0..(1usize << self.d) {
            let mut w = 1.0;
            let mut mi = base.clone();
            for k in 0..self.d {
                if corner >> k & 1 == 1 {
                    mi[k] += 1;
                    w *= frac[k];
                } else {
                    w *= 1.0 - frac[k];
                }
            }
            let idx = self.flat_index(&mi);
            if w > 0.0 && !self.inside[idx] {
                return None;
            }
            out.push((idx, w));
        }
        Some(out)
    }

    /// Multilinear interpolation of the score.
    pub fn interp_score(&self, x: &[f64]) -> Option<Vec<f64>> {
        let cell = self.cell(x)?;
        let mut s = vec![0.0; self.d];
        for (idx, w) in cell {
            if w > 0.0 {
                for (sk, v) in s.iter_mut().zip(self.score_at_node(idx)) {
                    *sk += w * v;
                }
            }
        }
        Some(s)
    }

    /// Multilinear interpolation of `ln p̂`.
    pub fn interp_logp(&self, x: &[f64]) -> Option<f64> {
        let cell = self.cell(x)?;
        Some(cell.iter().filter(|(_, w)| *w > 0.0).map(|&(i, w)| w * self.logp[i]).sum())
    }

    /// Indices of the 3^d − 1 grid neighbours of `idx`.
    pub fn neighbours(&self, idx: usize) -> Vec<usize> {
        let mi = self.multi_index(idx);
        let mut out = Vec::with_capacity(26);
        let total = 3usize.pow(self.d as u32);
        for code in 0..total {
            let mut c = code;
            let mut nb = mi.clone();
            let mut ok = true;
            let mut centre = true;
            for k in 0..self.d {
                let off = (c % 3) as isize - 1;
                c /= 3;
                if off != 0 {
                    centre = false;
                }
                let v = mi[k] as isize + off;
                if v < 0 || v >= self.res as isize {
                    ok = false;
                    break;
                }
                nb[k] = v as usize;
            }
            if ok && !centre {
                out.push(self.flat_index(&nb));
            }
        }
        out
    }

    /// CSV node dump: coordinates, `p_hat`, `stderr`, `logp`, score
    /// components; `nan` marks outside nodes and missing errors.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header: Vec<String> = (0..self.d).map(|k| format!("x{k}")).collect();
        header.extend(["p_hat".into(), "stderr".into(), "logp".into()]);
        header.extend((0..self.d).map(|k| format!("score{k}")));
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.node(i).iter().map(|v| format!("{v}")).collect();
            row.push(format!("{}", self.p_hat[i]));
            row.push(self.stderr.as_ref().map_or("nan".into(), |s| format!("{}", s[i])));
            row.push(fmt_nan(self.logp[i]));
            row.extend(self.score_at_node(i).iter().map(|&v| fmt_nan(v)));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn fmt_nan(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v}")
    }
}

pub fn build_grid_field(
    source: FieldSource<'_>,
    lo: &[f64],
    hi: &[f64],
    res: usize,
    threshold: Threshold,
) -> Result<GridField> {
    let d = lo.len();
    if d == 0 || d > 3 || hi.len() != d {
        return Err(Error::Range {
            name: "box",
            reason: format!("need matching bounds in 1 to 3 dimensions, got {} and {}", d, hi.len()),
        });
    }
    if res < MIN_RESOLUTION {
        return Err(Error::Range {
            name: "resolution",
            reason: format!("need at least {MIN_RESOLUTION} points per axis, got {res}"),
        });
    }
    if lo.iter().zip(hi).any(|(l, h)| !(h > l)) {
        return Err(Error::Range { name: "box", reason: "upper bound not above lower bound".into() });
    }
    let step: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| (h - l) / (res - 1) as f64).collect();
    let mut field = GridField {
        d,
        lo: lo.to_vec(),
        hi: hi.to_vec(),
        res,
        step,
        p_hat: Vec::new(),
        stderr: None,
        logp: Vec::new(),
        score: Vec::new(),
        inside: Vec::new(),
        threshold: 0.0,
    };
    let count = res.pow(d as u32);
    let nodes: Vec<Vec<f64>> = (0..count).map(|i| field.node(i)).collect();
    let mut analytic = None;
    match source {
        FieldSource::Analytic(a) => {
            if a.dim() != d {
                return Err(Error::Dimension { expected: d, got: a.dim() });
            }
            field.p_hat = nodes.iter().map(|x| a.density(x)).collect();
            analytic = Some(a);
        }
        FieldSource::Estimated { f, cfg } => {
            let est = estimate_density_field(f, &nodes, cfg)?;
            field.p_hat = est.iter().map(|r| r.value).collect();
            field.stderr = est.iter().map(|r| r.stderr).collect();
        }
        FieldSource::Samples { samples, bandwidth } => {
            let h = match bandwidth {
                Some(h) => h,
                None => silverman_bandwidth(samples)?,
            };
            field.p_hat = nodes.iter().map(|x| kde_baseline(samples, x, h)).collect::<Result<_>>()?;
        }
    }
    let max = field.p_hat.iter().cloned().fold(0.0, f64::max);
    field.threshold = match threshold {
        Threshold::Relative(r) => r * max,
        Threshold::Absolute(t) => t,
    };
    field.inside = field.p_hat.iter().map(|&p| p > field.threshold && p > 0.0).collect();
    field.logp =
        field.p_hat.iter().zip(&field.inside).map(|(&p, &i)| if i { p.ln() } else { f64::NAN }).collect();
    field.score = vec![f64::NAN; count * d];
    for idx in 0..count {
        if !field.inside[idx] {
            continue;
        }
        let s = match analytic.and_then(|a| a.score(&nodes[idx])) {
            Some(s) => s,
            None => difference_score(&field, idx),
        };
        field.score[idx * d..(idx + 1) * d].copy_from_slice(&s);
    }
    Ok(field)
}

/// Central differences of `ln p̂`, one-sided next to outside nodes or the
/// box edge, 0 when both axis neighbours are unavailable.
fn difference_score(field: &GridField, idx: usize) -> Vec<f64> {
    let mi = field.multi_index(idx);
    (0..field.d)
        .map(|k| {
            let at = |off: isize| -> Option<f64> {
                let v = mi[k] as isize + off;
                if v < 0 || v >= field.res as isize {
                    return None;
                }
                let mut nb = mi.clone();
                nb[k] = v as usize;
                let j = field.flat_index(&nb);
                field.inside[j].then(|| field.logp[j])
            };
            let h = field.step[k];
            match (at(-1), at(1)) {
                (Some(a), Some(b)) => (b - a) / (2.0 * h),
                (None, Some(b)) => (b - field.logp[idx]) / h,
                (Some(a), None) => (field.logp[idx] - a) / h,
                (None, None) => 0.0,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss_field(res: usize) -> GridField {
        let a = AnalyticDensity::standard(2);
        build_grid_field(FieldSource::Analytic(&a), &[-3.0, -3.0], &[3.0, 3.0], res, Threshold::default())
            .unwrap()
    }

    #[test]
    fn analytic_score_is_minus_x() {
        let f = gauss_field(61);
        for idx in [0, 100, 1860, 3720] {
            let x = f.node(idx);
            assert_eq!(f.score_at_node(idx), &[-x[0], -x[1]][..]);
        }
        assert!(f.inside.iter().all(|&b| b));
    }

    #[test]
    fn low_resolution_is_rejected() {
        let a = AnalyticDensity::standard(2);
        let r = build_grid_field(FieldSource::Analytic(&a), &[-1.0, -1.0], &[1.0, 1.0], 4, Threshold::default());
        assert!(matches!(r, Err(Error::Range { .. })));
    }

    #[test]
    fn index_round_trip_and_neighbours() {
        let a = AnalyticDensity::standard(3);
        let f = build_grid_field(FieldSource::Analytic(&a), &[-1.0; 3], &[1.0; 3], 9, Threshold::default())
            .unwrap();
        for idx in [0, 17, 364, 728] {
            assert_eq!(f.flat_index(&f.multi_index(idx)), idx);
        }
        assert_eq!(f.neighbours(f.flat_index(&[4, 4, 4])).len(), 26);
        assert_eq!(f.neighbours(0).len(), 7);
    }

    #[test]
    fn difference_score_close_to_analytic() {
        let a = AnalyticDensity::standard(2);
        let f = build_grid_field(
            FieldSource::Samples { samples: &[vec![0.0, 0.0]], bandwidth: Some(1.0) },
            &[-3.0, -3.0],
            &[3.0, 3.0],
            61,
            Threshold::default(),
        )
        .unwrap();
        // a single unit-bandwidth kernel at 0 is the standard normal density
        let idx = f.snap(&[1.0, -0.5]).unwrap();
        let s = f.score_at_node(idx);
        let exact = a.score(&f.node(idx)).unwrap();
        assert!((s[0] - exact[0]).abs() < 1e-12 && (s[1] - exact[1]).abs() < 1e-12);
    }

    #[test]
    fn csv_dump_marks_outside_nodes() {
        let a = AnalyticDensity::standard(1);
        let f = build_grid_field(FieldSource::Analytic(&a), &[-10.0], &[10.0], 11, Threshold::default())
            .unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x0,p_hat,stderr,logp,score0");
        assert_eq!(lines.len(), 12);
        assert!(lines[1].ends_with("nan,nan"));
        assert!(lines[6].starts_with("0,"));
    }

    #[test]
    fn interpolation_is_exact_for_linear_score() {
        let f = gauss_field(31);
        let s = f.interp_score(&[0.123, -1.77]).unwrap();
        assert!((s[0] + 0.123).abs() < 1e-12 && (s[1] - 1.77).abs() < 1e-12);
        assert!(f.interp_score(&[3.5, 0.0]).is_none());
    }
}
