//! Graded radial table of `p(1, r)` with quintic Hermite interpolation.
//!
//! Nodes carry `p`, `p'` and `p''` from the oscillatory quadrature; between
//! nodes the profile is the quintic Hermite interpolant, and its derivative
//! serves the gradient. Beyond the switch radius the tail model takes over.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use super::radial::{radial_quadrature, RadialValues};
use super::tail::TailSeries;
use crate::quadrature::gauss_legendre;

/// Spacing of the uniform part of the table on `[0, 1]`.
const CORE_STEP: f64 = 0.02;
/// Growth factor of the geometric part beyond `r = 1`.
const GROWTH: f64 = 1.015;
/// Relative accuracy demanded from the truncated series at the switch.
const SERIES_TOL: f64 = 1e-12;
const MAX_SWITCH: f64 = 400.0;
/// Gaussian tail takes over where `p(1, r)/p(1, 0) = e^{-16}`.
const GAUSSIAN_SWITCH: f64 = 8.0;

#[derive(Debug, Clone)]
pub enum Tail {
    Series(TailSeries),
    Gaussian,
}

#[derive(Debug, Clone)]
pub struct RadialTable {
    pub(crate) dim: usize,
    pub(crate) nodes: Vec<f64>,
    pub(crate) values: Vec<RadialValues>,
    pub(crate) switch_radius: f64,
    pub(crate) tail: Tail,
    /// Relative disagreement between quadrature and tail model at the switch.
    pub(crate) switch_mismatch: f64,
}

fn gaussian_values(dim: usize, r: f64) -> RadialValues {
    let p = (4.0 * PI).powf(-(dim as f64) / 2.0) * (-r * r / 4.0).exp();
    RadialValues {
        p,
        dp: -0.5 * r * p,
        d2p: (0.25 * r * r - 0.5) * p,
    }
}

impl RadialTable {
    pub fn build(alpha: f64, dim: usize) -> Self {
        let (tail, switch_radius) = if alpha == 2.0 {
            (Tail::Gaussian, GAUSSIAN_SWITCH)
        } else {
            let series = TailSeries::new(alpha, dim);
            let mut r = 2.0;
            while r < MAX_SWITCH && series.eval(r).rel_error > SERIES_TOL {
                r *= 1.05;
            }
            (Tail::Series(series), r.min(MAX_SWITCH))
        };

        let mut nodes = Vec::new();
        let n_core = (1.0 / CORE_STEP).round() as usize;
        for i in 0..=n_core {
            nodes.push(i as f64 * CORE_STEP);
        }
        let mut r = 1.0;
        while r * GROWTH < switch_radius {
            r *= GROWTH;
            nodes.push(r);
        }
        if switch_radius > 1.0 {
            nodes.push(switch_radius);
        }

        let values: Vec<RadialValues> = nodes
            .par_iter()
            .map(|&r| radial_quadrature(alpha, dim, r))
            .collect();

        let mut table = RadialTable {
            dim,
            nodes,
            values,
            switch_radius,
            tail,
            switch_mismatch: 0.0,
        };
        let last = *table.values.last().expect("table has nodes");
        let model = table.tail_values(switch_radius);
        table.switch_mismatch = ((last.p - model.p) / model.p).abs();
        table
    }

    fn tail_values(&self, r: f64) -> RadialValues {
        match &self.tail {
            Tail::Series(s) => s.eval(r).values,
            Tail::Gaussian => gaussian_values(self.dim, r),
        }
    }

    pub fn is_tail(&self, r: f64) -> bool {
        r >= self.switch_radius
    }

    /// `p(1, r)` and its first two radial derivatives (the second only at
    /// nodes and in the tail; between nodes it is the interpolant's).
    pub fn eval(&self, r: f64) -> (f64, f64) {
        if r >= self.switch_radius {
            let v = self.tail_values(r);
            return (v.p, v.dp);
        }
        let i = self.nodes.partition_point(|&x| x <= r).saturating_sub(1);
        let i = i.min(self.nodes.len() - 2);
        let (a, b) = (self.nodes[i], self.nodes[i + 1]);
        let h = b - a;
        let s = (r - a) / h;
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        quintic_hermite(s, h, v0, v1)
    }

    /// `∫ p(1, x) dx` over the ball of radius `switch_radius` plus the tail.
    pub fn total_mass(&self) -> f64 {
        let rule = gauss_legendre(8);
        let d = self.dim as f64;
        let surface = match self.dim {
            1 => 2.0,
            2 => 2.0 * PI,
            _ => 2.0 * PI.powf(d / 2.0) / statrs::function::gamma::gamma(d / 2.0),
        };
        let mut core = 0.0;
        for w in self.nodes.windows(2) {
            core += rule.integrate(w[0], w[1], |r| self.eval(r).0 * r.powi(self.dim as i32 - 1));
        }
        core * surface + self.mass_beyond(self.switch_radius)
    }

    /// Tail mass `∫_{|x|>R} p(1, x) dx` for `R` at or beyond the switch.
    pub fn mass_beyond(&self, radius: f64) -> f64 {
        match &self.tail {
            Tail::Series(s) => s.mass_beyond(radius),
            Tail::Gaussian => match self.dim {
                1 => libm::erfc(radius / 2.0),
                2 => (-radius * radius / 4.0).exp(),
                _ => f64::NAN,
            },
        }
    }
}

/// Quintic Hermite interpolant on `[0, 1]` (scaled by `h`), returning the
/// value and its derivative with respect to the unscaled variable.
fn quintic_hermite(s: f64, h: f64, v0: RadialValues, v1: RadialValues) -> (f64, f64) {
    let s2 = s * s;
    let s3 = s2 * s;
    let s4 = s3 * s;
    let s5 = s4 * s;
    let h00 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
    let h10 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
    let h20 = 0.5 * (s2 - 3.0 * s3 + 3.0 * s4 - s5);
    let h01 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
    let h11 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
    let h21 = 0.5 * (s3 - 2.0 * s4 + s5);
    let value = h00 * v0.p
        + h10 * h * v0.dp
        + h20 * h * h * v0.d2p
        + h01 * v1.p
        + h11 * h * v1.dp
        + h21 * h * h * v1.d2p;

    let d00 = -30.0 * s2 + 60.0 * s3 - 30.0 * s4;
    let d10 = 1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4;
    let d20 = 0.5 * (2.0 * s - 9.0 * s2 + 12.0 * s3 - 5.0 * s4);
    let d01 = 30.0 * s2 - 60.0 * s3 + 30.0 * s4;
    let d11 = -12.0 * s2 + 28.0 * s3 - 15.0 * s4;
    let d21 = 0.5 * (3.0 * s2 - 8.0 * s3 + 5.0 * s4);
    let deriv = (d00 * v0.p
        + d10 * h * v0.dp
        + d20 * h * h * v0.d2p
        + d01 * v1.p
        + d11 * h * v1.dp
        + d21 * h * h * v1.d2p)
        / h;
    (value, deriv)
}

/// Process-wide cache of tables keyed by `(α, d)`.
///
/// Construction happens outside the lock; a racing builder simply loses and
/// its table is dropped.
pub fn shared_table(alpha: f64, dim: usize) -> Arc<RadialTable> {
    static TABLES: OnceLock<Mutex<HashMap<(u64, usize), Arc<RadialTable>>>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (alpha.to_bits(), dim);
    if let Some(t) = tables.lock().expect("kernel table cache poisoned").get(&key) {
        return t.clone();
    }
    let built = Arc::new(RadialTable::build(alpha, dim));
    tables
        .lock()
        .expect("kernel table cache poisoned")
        .entry(key)
        .or_insert(built)
        .clone()
}
