use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use serde::Serialize;

use super::GridField;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Distance {
    Finite(f64),
    /// No path inside `U_μ`.
    Infinite,
}

impl Distance {
    pub fn value(self) -> f64 {
        match self {
            Distance::Finite(v) => v,
            Distance::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Distance::Infinite)
    }
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(field: &GridField, from: usize, to: usize) -> (Vec<f64>, Vec<usize>) {
    let n = field.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    dist[from] = 0.0;
    heap.push(Entry(0.0, from));
    while let Some(Entry(du, u)) = heap.pop() {
        if du > dist[u] {
            continue;
        }
        if u == to {
            break;
        }
        for v in field.neighbours(u) {
            if !field.inside[v] {
                continue;
            }
            let alt = du + (field.logp[v] - field.logp[u]).abs();
            if alt < dist[v] {
                dist[v] = alt;
                prev[v] = u;
                heap.push(Entry(alt, v));
            }
        }
    }
    (dist, prev)
}

/// Grid shortest path between the nodes nearest `x` and `y`, with its
/// length; `None` when they lie in different components.
pub fn shortest_path(field: &GridField, x: &[f64], y: &[f64]) -> Result<Option<(f64, Vec<Vec<f64>>)>> {
    let a = field.inside_node(x)?;
    let b = field.inside_node(y)?;
    let (dist, prev) = dijkstra(field, a, b);
    if !dist[b].is_finite() {
        return Ok(None);
    }
    let mut nodes = vec![b];
    while *nodes.last().unwrap() != a {
        nodes.push(prev[*nodes.last().unwrap()]);
    }
    nodes.reverse();
    Ok(Some((dist[b], nodes.into_iter().map(|i| field.node(i)).collect())))
}

/// Dijkstra over the 3^d − 1 neighbourhood graph of inside nodes with
/// edge weight `|Δ ln p̂|`. Symmetric and exactly subadditive, but lattice
/// moves cannot follow a level set, so the value stays above `d_μ` when the
/// cheap route is tangential.
pub fn graph_distance(field: &GridField, x: &[f64], y: &[f64]) -> Result<Distance> {
    Ok(match shortest_path(field, x, y)? {
        Some((v, _)) => Distance::Finite(v),
        None => Distance::Infinite,
    })
}

pub const RELAX_SEGMENTS: usize = 64;
pub const RELAX_ITERATIONS: usize = 2000;

/// `d_μ(x, y)`: the smaller of the graph distance and `Σ_k |⟨s(mid_k), Δ_k⟩|`
/// along the graph path relaxed to `RELAX_SEGMENTS` legs.
pub fn riesz_distance(field: &GridField, x: &[f64], y: &[f64]) -> Result<Distance> {
    let a = field.inside_node(x)?;
    let b = field.inside_node(y)?;
    // fixed orientation keeps the value symmetric
    let (x, y) = if a <= b { (x, y) } else { (y, x) };
    let Some((graph, path)) = shortest_path(field, x, y)? else {
        return Ok(Distance::Infinite);
    };
    if path.len() < 2 {
        return Ok(Distance::Finite(0.0));
    }
    let pts = relax_path(field, &path, RELAX_SEGMENTS, RELAX_ITERATIONS)?.0;
    let line: f64 = pts.windows(2).map(|w| leg_dot(field, &w[0], &w[1]).map_or(f64::INFINITY, f64::abs)).sum();
    Ok(Distance::Finite(graph.min(line)))
}

fn leg_dot(field: &GridField, a: &[f64], b: &[f64]) -> Option<f64> {
    let mid: Vec<f64> = a.iter().zip(b).map(|(u, v)| 0.5 * (u + v)).collect();
    let s = field.interp_score(&mid)?;
    Some(s.iter().zip(a.iter().zip(b)).map(|(si, (u, v))| si * (v - u)).sum())
}

fn leg_energy(field: &GridField, m: f64, a: &[f64], b: &[f64]) -> Option<f64> {
    leg_dot(field, a, b).map(|t| m * t * t)
}

fn resample(path: &[Vec<f64>], legs: usize) -> Vec<Vec<f64>> {
    let seg: Vec<f64> = path
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt())
        .collect();
    let total: f64 = seg.iter().sum();
    let mut out = Vec::with_capacity(legs + 1);
    let mut j = 0;
    let mut acc = 0.0;
    for k in 0..=legs {
        let target = total * k as f64 / legs as f64;
        while j + 1 < seg.len() && acc + seg[j] < target {
            acc += seg[j];
            j += 1;
        }
        let t = if seg[j] > 0.0 { ((target - acc) / seg[j]).clamp(0.0, 1.0) } else { 0.0 };
        out.push(path[j].iter().zip(&path[j + 1]).map(|(a, b)| a + t * (b - a)).collect());
    }
    out
}

/// Resample to `segments` legs, then coordinate descent on the interior
/// vertices of `Σ_k M⟨s(mid_k), Δ_k⟩²`: ± moves along each axis from half a
/// cell, halving the step after a sweep without improvement. Returns the
/// vertices and the energy.
fn relax_path(
    field: &GridField,
    path: &[Vec<f64>],
    segments: usize,
    iterations: usize,
) -> Result<(Vec<Vec<f64>>, f64)> {
    let m = segments as f64;
    let mut pts = resample(path, segments);
    let mut legs: Vec<f64> = pts
        .windows(2)
        .map(|w| leg_energy(field, m, &w[0], &w[1]).ok_or_else(|| Error::OutsideField { x: w[0].clone() }))
        .collect::<Result<_>>()?;
    let h = field.step.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut step = 0.5 * h;
    let floor = 1e-6 * h;
    for _ in 0..iterations {
        if step < floor {
            break;
        }
        let mut moved = false;
        for k in 1..segments {
            for axis in 0..field.d {
                for sign in [1.0, -1.0] {
                    let mut cand = pts[k].clone();
                    cand[axis] += sign * step;
                    let (Some(e0), Some(e1)) =
                        (leg_energy(field, m, &pts[k - 1], &cand), leg_energy(field, m, &cand, &pts[k + 1]))
                    else {
                        continue;
                    };
                    if e0 + e1 < legs[k - 1] + legs[k] {
                        pts[k] = cand;
                        legs[k - 1] = e0;
                        legs[k] = e1;
                        moved = true;
                        break;
                    }
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    let energy = legs.iter().sum();
    Ok((pts, energy))
}

/// `d̄_μ`: square root of the discrete energy `Σ_k M⟨s(mid_k), Δ_k⟩²` over
/// an `M`-leg polyline, started from the grid shortest path. With
/// `iterations = 0` this is the energy of the resampled graph path.
pub fn energy_distance(
    field: &GridField,
    x: &[f64],
    y: &[f64],
    segments: usize,
    iterations: usize,
) -> Result<Distance> {
    if segments < 4 {
        return Err(Error::Range { name: "segments", reason: format!("need at least 4, got {segments}") });
    }
    let path = match shortest_path(field, x, y)? {
        Some((_, p)) => p,
        None => return Ok(Distance::Infinite),
    };
    if path.len() < 2 {
        return Ok(Distance::Finite(0.0));
    }
    Ok(Distance::Finite(relax_path(field, &path, segments, iterations)?.1.sqrt()))
}

/// Midpoint rule for `∫⟨∇ln p̂, dφ⟩` along a polyline, each leg split into
/// pieces no longer than one grid cell.
pub fn bell_path_integral(field: &GridField, path: &[Vec<f64>]) -> Result<f64> {
    if let Some(bad) = path.iter().find(|p| p.len() != field.d) {
        return Err(Error::Dimension { expected: field.d, got: bad.len() });
    }
    let mut total = 0.0;
    for w in path.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let cells = (0..field.d).map(|k| (b[k] - a[k]).abs() / field.step[k]).fold(0.0, f64::max);
        let pieces = (cells.ceil() as usize).max(1);
        for j in 0..pieces {
            let t = (j as f64 + 0.5) / pieces as f64;
            let mid: Vec<f64> = a.iter().zip(b).map(|(u, v)| u + t * (v - u)).collect();
            let s = field.interp_score(&mid).ok_or(Error::OutsideField { x: mid })?;
            total += s.iter().zip(a.iter().zip(b)).map(|(si, (u, v))| si * (v - u)).sum::<f64>()
                / pieces as f64;
        }
    }
    Ok(total)
}

/// Component label per node (`None` outside) and the component count.
pub fn components(field: &GridField) -> (Vec<Option<usize>>, usize) {
    let mut label = vec![None; field.len()];
    let mut count = 0;
    for start in 0..field.len() {
        if !field.inside[start] || label[start].is_some() {
            continue;
        }
        label[start] = Some(count);
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for v in field.neighbours(u) {
                if field.inside[v] && label[v].is_none() {
                    label[v] = Some(count);
                    queue.push_back(v);
                }
            }
        }
        count += 1;
    }
    (label, count)
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeRow {
    pub x: Vec<f64>,
    pub p_hat: f64,
    /// `d̂_μ(x_n, x_1)`; `None` when infinite or outside `U_μ`.
    pub distance: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PositivityReport {
    pub components: usize,
    pub sizes: Vec<usize>,
    pub threshold: f64,
    pub probes: Vec<ProbeRow>,
}

/// Components of `U_μ` and `(p̂(x_n), d̂_μ(x_n, x_1))` along the probes.
pub fn positivity_report(field: &GridField, probes: &[Vec<f64>]) -> Result<PositivityReport> {
    let (label, count) = components(field);
    let mut sizes = vec![0; count];
    for c in label.iter().flatten() {
        sizes[*c] += 1;
    }
    let mut rows = Vec::with_capacity(probes.len());
    for x in probes {
        let idx = field.snap(x).ok_or_else(|| Error::OutsideField { x: x.clone() })?;
        let distance = match (field.inside[idx], field.inside_node(&probes[0])) {
            (true, Ok(_)) => Some(riesz_distance(field, x, &probes[0])?.value()).filter(|v| v.is_finite()),
            _ => None,
        };
        rows.push(ProbeRow { x: x.clone(), p_hat: field.p_hat[idx], distance });
    }
    Ok(PositivityReport { components: count, sizes, threshold: field.threshold, probes: rows })
}

#[cfg(test)]
mod tests {
    use super::super::{build_grid_field, FieldSource, Threshold};
    use super::*;
    use crate::scenarios::AnalyticDensity;

    fn gauss(res: usize, half: f64) -> GridField {
        let a = AnalyticDensity::standard(2);
        build_grid_field(FieldSource::Analytic(&a), &[-half; 2], &[half; 2], res, Threshold::default()).unwrap()
    }

    fn gap_mixture() -> GridField {
        let c = vec![vec![0.25, 0.0], vec![0.0, 0.25]];
        let left = AnalyticDensity::gaussian(vec![-3.0, 0.0], c.clone()).unwrap();
        let right = AnalyticDensity::gaussian(vec![3.0, 0.0], c).unwrap();
        let mix = AnalyticDensity::Mixture(vec![(0.5, left), (0.5, right)]);
        build_grid_field(FieldSource::Analytic(&mix), &[-5.0, -2.0], &[5.0, 2.0], 101, Threshold::default())
            .unwrap()
    }

    #[test]
    fn radial_distance_is_half() {
        let f = gauss(121, 3.0);
        let d = riesz_distance(&f, &[0.0, 0.0], &[1.0, 0.0]).unwrap().value();
        assert!((d - 0.5).abs() < 1e-12, "{d}");
        assert_eq!(riesz_distance(&f, &[0.5, 0.5], &[0.5, 0.5]).unwrap().value(), 0.0);
    }

    #[test]
    fn level_circle_distance_is_small() {
        let f = gauss(121, 3.0);
        let g = graph_distance(&f, &[1.0, 0.0], &[0.0, 1.0]).unwrap().value();
        assert!(g > 0.3, "{g}");
        let d = riesz_distance(&f, &[1.0, 0.0], &[0.0, 1.0]).unwrap().value();
        assert!(d < 0.02, "{d}");
        let back = riesz_distance(&f, &[0.0, 1.0], &[1.0, 0.0]).unwrap().value();
        assert_eq!(d, back);
    }

    #[test]
    fn gap_gives_infinite_distance_and_two_components() {
        let f = gap_mixture();
        assert!(riesz_distance(&f, &[-3.0, 0.0], &[3.0, 0.0]).unwrap().is_infinite());
        assert!(energy_distance(&f, &[-3.0, 0.0], &[3.0, 0.0], 8, 10).unwrap().is_infinite());
        let r = positivity_report(&f, &[vec![-3.0, 0.0], vec![3.0, 0.0]]).unwrap();
        assert_eq!(r.components, 2);
        assert_eq!(r.probes[1].distance, None);
        assert!(matches!(riesz_distance(&f, &[0.0, 0.0], &[3.0, 0.0]), Err(Error::OutsideField { .. })));
    }

    #[test]
    fn energy_distance_radial() {
        let f = gauss(61, 3.0);
        let r = riesz_distance(&f, &[0.0, 0.0], &[1.0, 0.0]).unwrap().value();
        let e0 = energy_distance(&f, &[0.0, 0.0], &[1.0, 0.0], 16, 0).unwrap().value();
        let e = energy_distance(&f, &[0.0, 0.0], &[1.0, 0.0], 16, 200).unwrap().value();
        assert!(e <= e0 + 1e-15);
        assert!(e >= r - 0.01, "{e} {r}");
        assert!((e - 0.5).abs() < 0.05, "{e}");
        assert_eq!(energy_distance(&f, &[1.0, 1.0], &[1.0, 1.0], 8, 5).unwrap().value(), 0.0);
        assert!(energy_distance(&f, &[0.0, 0.0], &[1.0, 0.0], 3, 5).is_err());
    }

    #[test]
    fn bell_straight_loop_and_arc() {
        let f = gauss(61, 3.0);
        let line: Vec<Vec<f64>> = (0..=100).map(|k| vec![k as f64 / 100.0, 0.0]).collect();
        assert!((bell_path_integral(&f, &line).unwrap() + 0.5).abs() < 1e-3);
        let arc: Vec<Vec<f64>> = (0..=100)
            .map(|k| {
                let t = std::f64::consts::FRAC_PI_2 * k as f64 / 100.0;
                vec![1.5 * t.cos(), 1.5 * t.sin()]
            })
            .collect();
        assert!(bell_path_integral(&f, &arc).unwrap().abs() < 1e-3);
        let mut lp = line.clone();
        lp.push(vec![1.0, 1.0]);
        lp.push(vec![0.0, 0.0]);
        assert!(bell_path_integral(&f, &lp).unwrap().abs() < 1e-3);
        assert!(bell_path_integral(&f, &[vec![0.0, 0.0], vec![4.0, 0.0]]).is_err());
    }

    #[test]
    fn probes_to_the_edge_are_monotone() {
        let f = gauss(61, 3.0);
        let probes: Vec<Vec<f64>> = (0..=6).map(|k| vec![0.5 * k as f64, 0.0]).collect();
        let r = positivity_report(&f, &probes).unwrap();
        assert_eq!(r.components, 1);
        for w in r.probes.windows(2) {
            assert!(w[1].p_hat < w[0].p_hat);
            assert!(w[1].distance.unwrap() > w[0].distance.unwrap());
        }
    }
}
