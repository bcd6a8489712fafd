use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{self, Field};

/// `∫_{-L}^{x_i} u` at every lattice point, exact for the trigonometric
/// interpolant of `u`.
fn antiderivative(u: &Field) -> Vec<f64> {
    let g = u.grid;
    let n = g.n;
    let mut data: Vec<Complex64> = u.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    grid::forward(&g, &mut data);
    let mean = data[0].re / n as f64;
    data[0] = Complex64::new(0.0, 0.0);
    for (k, c) in data.iter_mut().enumerate().skip(1) {
        if g.signed_index(k) == -(n as i64) / 2 {
            *c = Complex64::new(0.0, 0.0);
        } else {
            *c /= Complex64::new(0.0, g.frequency(k));
        }
    }
    grid::inverse(&g, &mut data);
    let base = data[0].re;
    (0..n)
        .map(|i| mean * (g.coord(i) + g.half_width) + data[i].re - base)
        .collect()
}

/// Exact solution of `u_t - u_xx + b (u²)_x = 0` at time `t`.
///
/// `w = 2bu` solves the viscous Burgers equation, so `u = -(1/b) ∂_x ln φ`
/// with `φ` the heat flow of `exp(-b ∫_{-∞}^x u_0)`. The heat convolution is
/// a lattice sum over the window where the heat kernel is not negligible,
/// with `φ_0` continued by its constant values outside the box.
pub fn cole_hopf_reference(u0: &Field, t: f64, b: f64) -> Result<Field> {
    let g = u0.grid;
    if g.dim != 1 {
        return Err(Error::Domain(format!(
            "the Cole-Hopf oracle is one-dimensional, grid has d = {}",
            g.dim
        )));
    }
    if !(b != 0.0 && b.is_finite()) {
        return Err(Error::Domain("the Cole-Hopf oracle needs b != 0".into()));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("time must be >= 0, got {t}")));
    }
    if u0.min() < -1e-12 * u0.max() {
        return Err(Error::Domain("the Cole-Hopf oracle needs u0 >= 0".into()));
    }
    if t == 0.0 {
        return Ok(u0.clone());
    }
    let n = g.n as i64;
    let h = g.spacing();
    let big_u = antiderivative(u0);
    let right = (-b * u0.integral()).exp();
    // φ_0 on the lattice extended past the box, where it is constant
    let phi0 = |j: i64| {
        if j < 0 {
            1.0
        } else if j >= n {
            right
        } else {
            (-b * big_u[j as usize]).exp()
        }
    };

    let four_t = 4.0 * t;
    let norm = 1.0 / (PI * four_t).sqrt();
    let sqrt4t = four_t.sqrt();
    // e^{-z²/4t} < 1e-40 beyond this reach
    let reach = (10.0 * sqrt4t / h).ceil() as i64;
    let values = (0..n)
        .into_par_iter()
        .map(|i| {
            let (mut phi, mut dphi) = (0.0, 0.0);
            for j in i - reach..=i + reach {
                let z = (i - j) as f64 * h;
                let k = norm * (-z * z / four_t).exp() * phi0(j) * h;
                phi += k;
                dphi -= k * z / (2.0 * t);
            }
            -dphi / (b * phi)
        })
        .collect();
    Ok(Field {
        grid: g,
        values,
        time: u0.time + t,
    })
}
