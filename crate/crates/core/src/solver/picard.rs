use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::Serialize;

use super::{real_parts, to_complex, SolverConfig, Stepper};
use crate::error::{Error, Result};
use crate::grid::{self, Field};

/// Consecutive growing distances that count as divergence.
const DIVERGENCE_STREAK: usize = 3;

#[derive(Debug, Clone, Serialize)]
pub struct PicardOutcome {
    /// The fixed point at `t_end`.
    pub field: Field,
    pub iterations: usize,
    /// Sup-norm distance between successive iterates over the whole mesh.
    pub distances: Vec<f64>,
}

/// Solve `u(t) = P_t u0 - ∫₀^t P_{t-s} ∇·(b u(s)^{q+1}) ds` on a uniform
/// mesh of `cfg.picard.steps` intervals by fixed-point iteration, with the
/// trapezoid rule in `s`, starting from `u(t) = P_t u0`.
pub fn picard_iterate(u0: &Field, t_end: f64, cfg: &SolverConfig) -> Result<PicardOutcome> {
    let stepper = Stepper::new(cfg)?;
    if u0.grid != cfg.grid {
        return Err(Error::SizeMismatch("initial field and configuration grids differ".into()));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Domain(format!("t_end must be positive, got {t_end}")));
    }
    let grid = cfg.grid;
    let m = cfg.picard.steps;
    let tau = t_end / m as f64;
    // e_k = e^{-kτ|ξ|^α}
    let powers: Vec<Vec<f64>> = (0..=m)
        .map(|k| stepper.symbol().multiplier(k as f64 * tau))
        .collect();

    let mut u0_hat = to_complex(&u0.values);
    grid::forward(&grid, &mut u0_hat);
    let free: Vec<Vec<Complex64>> = (0..=m)
        .map(|j| {
            u0_hat
                .iter()
                .zip(&powers[j])
                .map(|(c, e)| c * e)
                .collect()
        })
        .collect();
    let to_physical = |mut data: Vec<Complex64>| {
        grid::inverse(&grid, &mut data);
        real_parts(data)
    };
    let mut iterate: Vec<Vec<f64>> = free.iter().cloned().map(to_physical).collect();

    let mut distances = Vec::new();
    let mut streak = 0;
    for iteration in 1..=cfg.picard.max_iter {
        let fluxes: Vec<Vec<Complex64>> = iterate.iter().map(|u| stepper.flux_hat(u)).collect();
        let next: Vec<Vec<f64>> = (0..=m)
            .into_par_iter()
            .map(|j| {
                let mut acc = free[j].clone();
                if j > 0 {
                    for i in 0..=j {
                        let w = if i == 0 || i == j { 0.5 * tau } else { tau };
                        let e = &powers[j - i];
                        for ((a, f), ek) in acc.iter_mut().zip(&fluxes[i]).zip(e) {
                            *a -= f * (w * ek);
                        }
                    }
                }
                to_physical(acc)
            })
            .collect();
        let distance = next
            .iter()
            .zip(&iterate)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        iterate = next;
        if let Some(&prev) = distances.last() {
            if distance > prev {
                streak += 1;
            } else {
                streak = 0;
            }
        }
        distances.push(distance);
        if !distance.is_finite() || streak >= DIVERGENCE_STREAK {
            return Err(Error::HorizonTooLong { t_end, streak });
        }
        if distance < cfg.picard.tol {
            let values = iterate.pop().expect("mesh has points");
            return Ok(PicardOutcome {
                field: Field {
                    grid,
                    values,
                    time: u0.time + t_end,
                },
                iterations: iteration,
                distances,
            });
        }
    }
    Err(Error::Abort {
        time: t_end,
        reason: format!(
            "Picard iteration did not reach tol {} in {} iterations (last distance {:e})",
            cfg.picard.tol,
            cfg.picard.max_iter,
            distances.last().copied().unwrap_or(f64::NAN)
        ),
    })
}
