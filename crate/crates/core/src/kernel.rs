//! The Poisson kernel `Q_d`, its gradient (the Riesz kernel) and the
//! radially clamped kernel used by the Monte Carlo estimators.
//!
//! ```text
//! Q_1(x) = max(x, 0)            ∂Q_1 = 1_{(0,∞)}
//! Q_2(x) = ln|x| / a_2
//! Q_d(x) = −|x|^{2−d} / a_d     (d > 2)
//! ∂_i Q_d(x) = A_d x_i / (a_d |x|^d)
//! ```
//!
//! with `a_d` the area of the unit sphere (`a_1 = 1`) and `A_1 = A_2 = 1`,
//! `A_d = d − 2` otherwise.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quad::adaptive_simpson;

/// Γ(m/2) for a positive integer `m`.
pub fn gamma_half(m: usize) -> f64 {
    assert!(m > 0);
    if m % 2 == 0 {
        (1..m / 2).map(|k| k as f64).product()
    } else {
        // Γ(k + 1/2) = (2k)! √π / (4^k k!)
        let k = (m - 1) / 2;
        let mut g = PI.sqrt();
        for j in 0..k {
            g *= j as f64 + 0.5;
        }
        g
    }
}

/// Area of the unit sphere S^{d−1} ⊂ ℝ^d, with the convention `a_1 = 1`.
pub fn sphere_area(d: usize) -> f64 {
    match d {
        0 => panic!("dimension must be positive"),
        1 => 1.0,
        _ => 2.0 * PI.powf(d as f64 / 2.0) / gamma_half(d),
    }
}

/// The constant `A_d`.
pub fn riesz_constant(d: usize) -> f64 {
    match d {
        0 => panic!("dimension must be positive"),
        1 | 2 => 1.0,
        _ => (d - 2) as f64,
    }
}

/// Result of a local integrability computation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LpNorm {
    Finite(f64),
    Infinite,
}

impl LpNorm {
    pub fn value(self) -> Option<f64> {
        match self {
            LpNorm::Finite(v) => Some(v),
            LpNorm::Infinite => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelParams {
    pub d: usize,
    /// `a_d`
    pub area: f64,
    /// `A_d`
    pub a_const: f64,
    /// Truncation radius; 0 means the exact kernel.
    pub r_min: f64,
    coeff: f64,
}

impl KernelParams {
    pub fn new(d: usize) -> Self {
        let area = sphere_area(d);
        let a_const = riesz_constant(d);
        KernelParams { d, area, a_const, r_min: 0.0, coeff: a_const / area }
    }

    pub fn with_truncation(mut self, r_min: f64) -> Self {
        assert!(r_min >= 0.0, "negative truncation radius");
        self.r_min = r_min;
        self
    }

    /// `A_d / a_d`.
    #[inline]
    pub fn coeff(&self) -> f64 {
        self.coeff
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::Dimension { expected: self.d, got: x.len() });
        }
        Ok(())
    }

    pub fn poisson_kernel(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let r2: f64 = x.iter().map(|v| v * v).sum();
        match self.d {
            1 => Ok(x[0].max(0.0)),
            _ if r2 == 0.0 => Err(Error::Singular { d: self.d }),
            2 => Ok(0.5 * r2.ln() / self.area),
            d => Ok(-r2.sqrt().powi(2 - d as i32) / self.area),
        }
    }

    pub fn grad_poisson_kernel(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        if self.d >= 2 && x.iter().all(|&v| v == 0.0) {
            return Err(Error::Singular { d: self.d });
        }
        let mut out = vec![0.0; self.d];
        self.exact_grad_into(x, &mut out);
        Ok(out)
    }

    /// Exact Riesz kernel at `x ≠ 0`; writes zeros at the origin.
    #[inline]
    pub fn exact_grad_into(&self, x: &[f64], out: &mut [f64]) {
        if self.d == 1 {
            out[0] = if x[0] > 0.0 { 1.0 } else { 0.0 };
            return;
        }
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 == 0.0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let s = self.coeff / radial_power(r2, self.d);
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = s * xi;
        }
    }

    /// Kernel clamped radially at `r_min`: the value on the ball
    /// `|x| < r_min` is the exact kernel at the projection of `x` onto the
    /// sphere of radius `r_min`. Zero at the origin. With `r_min = 0` this is
    /// the exact kernel.
    #[inline]
    pub fn truncated_grad_into(&self, x: &[f64], out: &mut [f64]) {
        if self.d == 1 || self.r_min == 0.0 {
            self.exact_grad_into(x, out);
            return;
        }
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 == 0.0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let rm2 = self.r_min * self.r_min;
        let s = if r2 >= rm2 {
            self.coeff / radial_power(r2, self.d)
        } else {
            // c (r_min/|x|) x_i / r_min^d
            self.coeff / (r2.sqrt() * self.r_min.powi(self.d as i32 - 1))
        };
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = s * xi;
        }
    }

    pub fn truncated_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut out = vec![0.0; self.d];
        self.truncated_grad_into(x, &mut out);
        Ok(out)
    }

    /// Sup-norm of the truncated kernel, `A_d / (a_d r_min^{d−1})`.
    pub fn truncated_sup(&self) -> f64 {
        if self.d == 1 {
            1.0
        } else if self.r_min == 0.0 {
            f64::INFINITY
        } else {
            self.coeff / self.r_min.powi(self.d as i32 - 1)
        }
    }

    /// `∫_{|x|≤R} |∂_i Q_d(x)|^q dx`, reduced to polar coordinates.
    pub fn local_lp_norm(&self, q: f64, radius: f64, i: usize) -> Result<LpNorm> {
        let d = self.d;
        if d < 2 {
            return Err(Error::Range { name: "d", reason: "local_lp_norm needs d >= 2".into() });
        }
        if i >= d {
            return Err(Error::IndexOutOfRange { index: i, n: d });
        }
        if !(q > 0.0) || !(radius > 0.0) {
            return Err(Error::Range { name: "q, R", reason: "must be positive".into() });
        }
        let expo = q + d as f64 - d as f64 * q;
        if expo <= 0.0 {
            return Ok(LpNorm::Infinite);
        }
        let s_q = sphere_moment(d, q);
        Ok(LpNorm::Finite(self.coeff.powf(q) * s_q * radius.powf(expo) / expo))
    }
}

#[inline]
fn radial_power(r2: f64, d: usize) -> f64 {
    match d {
        2 => r2,
        3 => r2 * r2.sqrt(),
        _ => r2.sqrt().powi(d as i32),
    }
}

/// `S_q = ∫_{S^{d−1}} |ω_1|^q dω` for d ≥ 2, by quadrature over the polar
/// angle: `|S^{d−2}| · 2∫₀^{π/2} cos^q θ sin^{d−2} θ dθ`.
pub fn sphere_moment(d: usize, q: f64) -> f64 {
    assert!(d >= 2);
    let lower_area = if d == 2 { 2.0 } else { sphere_area(d - 1) };
    let f = |t: f64| t.cos().max(0.0).powf(q) * t.sin().powi(d as i32 - 2);
    2.0 * lower_area * adaptive_simpson(f, 0.0, 0.5 * PI, 1e-13)
}
