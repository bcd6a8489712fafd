//! The rotationally symmetric α-stable heat kernel `p(t, x)`.
//!
//! `p(t, x) = (2π)^{-d} ∫ e^{-i x·ξ} e^{-t|ξ|^α} dξ`. Every evaluation is
//! reduced to the unit-time radial profile through the exact scaling law
//! `p(t, x) = t^{-d/α} p(1, t^{-1/α} x)`; the profile is tabulated once per
//! `(α, d)` and shared between threads.

pub mod closed_form;
pub mod radial;
mod table;
pub mod tail;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use radial::{radial_quadrature, RadialValues};
use table::{shared_table, RadialTable};

/// Values below this are reported as zero.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

/// Stability index `α` and spatial dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityParams {
    pub alpha: f64,
    pub dim: usize,
}

impl StabilityParams {
    pub fn new(alpha: f64, dim: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::Domain(format!("alpha = {alpha} lies outside (0, 2]")));
        }
        if !(1..=2).contains(&dim) {
            return Err(Error::Domain(format!(
                "dimension {dim} is not supported (1 or 2)"
            )));
        }
        Ok(StabilityParams { alpha, dim })
    }

    /// `q₀ = (α - 1)/d`.
    pub fn critical_exponent(&self) -> f64 {
        (self.alpha - 1.0) / self.dim as f64
    }

    fn d(&self) -> f64 {
        self.dim as f64
    }
}

/// Handle on the tabulated kernel for one `(α, d)`.
#[derive(Debug, Clone)]
pub struct StableKernel {
    params: StabilityParams,
    table: Arc<RadialTable>,
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("time must be positive, got {t}")))
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl StableKernel {
    pub fn new(params: StabilityParams) -> Result<Self> {
        StabilityParams::new(params.alpha, params.dim)?;
        if params.alpha < 1.0 {
            return Err(Error::Domain(format!(
                "kernel tabulation needs alpha >= 1, got {}",
                params.alpha
            )));
        }
        Ok(StableKernel {
            params,
            table: shared_table(params.alpha, params.dim),
        })
    }

    pub fn params(&self) -> StabilityParams {
        self.params
    }

    /// Radius beyond which the tail model replaces the table.
    pub fn switch_radius(&self) -> f64 {
        self.table.switch_radius
    }

    /// Leading tail coefficient `c` in `p(1, r) ≈ c r^{-d-α}`, or `None`
    /// for the Gaussian.
    pub fn tail_coefficient(&self) -> Option<f64> {
        match &self.table.tail {
            table::Tail::Series(s) => Some(s.leading()),
            table::Tail::Gaussian => None,
        }
    }

    /// `(p(1, r), ∂_r p(1, r))`.
    pub fn profile(&self, r: f64) -> (f64, f64) {
        self.table.eval(r.abs())
    }

    /// `p(t, ·)` at radius `r`, without argument checks.
    #[inline]
    pub fn density_radial(&self, t: f64, r: f64) -> f64 {
        let alpha = self.params.alpha;
        let scale = t.powf(-1.0 / alpha);
        let v = self.table.eval(r * scale).0 * scale.powi(self.params.dim as i32);
        if v < UNDERFLOW_FLOOR {
            0.0
        } else {
            v
        }
    }

    /// `∂_r p(t, ·)` at radius `r`, without argument checks.
    #[inline]
    pub fn radial_derivative(&self, t: f64, r: f64) -> f64 {
        let alpha = self.params.alpha;
        let scale = t.powf(-1.0 / alpha);
        let v = self.table.eval(r * scale).1 * scale.powi(self.params.dim as i32 + 1);
        if v.abs() < UNDERFLOW_FLOOR {
            0.0
        } else {
            v
        }
    }

    pub fn density(&self, t: f64, x: &[f64]) -> Result<f64> {
        check_time(t)?;
        self.check_point(x)?;
        Ok(self.density_radial(t, norm(x)))
    }

    pub fn gradient(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        check_time(t)?;
        self.check_point(x)?;
        let r = norm(x);
        if r == 0.0 {
            return Ok(vec![0.0; x.len()]);
        }
        let dr = self.radial_derivative(t, r);
        Ok(x.iter().map(|xi| dr * xi / r).collect())
    }

    /// Total mass of `p(1, ·)`: quadrature over the tabulated ball plus the
    /// integrated tail.
    pub fn total_mass(&self) -> f64 {
        self.table.total_mass()
    }

    /// `∫_{|x|>R} p(t, x) dx`, valid once `R t^{-1/α}` reaches the tail.
    pub fn mass_beyond(&self, t: f64, radius: f64) -> f64 {
        let r = radius * t.powf(-1.0 / self.params.alpha);
        self.table.mass_beyond(r.max(self.table.switch_radius))
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.params.dim {
            return Err(Error::SizeMismatch(format!(
                "point has {} coordinates, kernel dimension is {}",
                x.len(),
                self.params.dim
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite point {x:?}")));
        }
        Ok(())
    }
}

/// `p(t, x)`.
pub fn density(params: StabilityParams, t: f64, x: &[f64]) -> Result<f64> {
    check_time(t)?;
    StableKernel::new(params)?.density(t, x)
}

/// `∇_x p(t, x)`.
pub fn gradient(params: StabilityParams, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    check_time(t)?;
    StableKernel::new(params)?.gradient(t, x)
}

/// Uniformly sampled unit-time profile, as dumped by the `kernel` command.
#[derive(Debug, Clone, Serialize)]
pub struct RadialProfile {
    pub params: StabilityParams,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub derivatives: Vec<f64>,
    /// `true` where the tail model, not the table, produced the value.
    pub tail: Vec<bool>,
    pub switch_radius: f64,
}

/// Sample `p(1, r)` at `n_points` equally spaced radii on `[0, r_max]`.
pub fn density_profile(
    params: StabilityParams,
    n_points: usize,
    r_max: f64,
) -> Result<RadialProfile> {
    if n_points < 2 {
        return Err(Error::Domain(format!("need at least 2 points, got {n_points}")));
    }
    if !(r_max > 0.0 && r_max.is_finite()) {
        return Err(Error::Domain(format!("r_max must be positive, got {r_max}")));
    }
    let kernel = StableKernel::new(params)?;
    let radii: Vec<f64> = (0..n_points)
        .map(|i| r_max * i as f64 / (n_points - 1) as f64)
        .collect();
    let (values, derivatives): (Vec<f64>, Vec<f64>) =
        radii.iter().map(|&r| kernel.profile(r)).unzip();
    let tail = radii.iter().map(|&r| kernel.table.is_tail(r)).collect();
    Ok(RadialProfile {
        params,
        radii,
        values,
        derivatives,
        tail,
        switch_radius: kernel.switch_radius(),
    })
}

/// Envelope `t (t^{1/α} + |x|)^{-d-α}` of the density.
pub fn density_envelope(params: StabilityParams, t: f64, r: f64) -> f64 {
    t * (t.powf(1.0 / params.alpha) + r).powf(-params.d() - params.alpha)
}

/// Envelope `t |x| (t^{1/α} + |x|)^{-d-2-α}` of the gradient.
pub fn gradient_envelope(params: StabilityParams, t: f64, r: f64) -> f64 {
    t * r * (t.powf(1.0 / params.alpha) + r).powf(-params.d() - 2.0 - params.alpha)
}
