//! Mild solutions of `u_t - Δ^{α/2} u + b·∇(u^{q+1}) = 0`.
//!
//! [`solve`] marches the Duhamel formula with an exponential
//! predictor–corrector; [`picard_iterate`] solves the same integral
//! equation as a global fixed point on a uniform time mesh;
//! [`cole_hopf_reference`] is the exact solution for `α = 2, d = 1, q = 1`.

mod cole_hopf;
mod config;
mod picard;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{self, make_u0, Field, Grid};
use crate::semigroup::Symbol;

pub use cole_hopf::cole_hopf_reference;
pub use config::{Mode, PicardSettings, SolverConfig};
pub use picard::{picard_iterate, PicardOutcome};

/// Largest mass a single step may remove by clamping, relative to the
/// initial mass.
pub const CLAMP_BUDGET: f64 = 1e-10;
/// Largest per-step change of the discrete mass, relative.
pub const MASS_DRIFT_BUDGET: f64 = 1e-10;
/// Consecutive accepted steps before the step size may grow again.
const CLEAN_STEPS_TO_GROW: usize = 50;
/// Steps below `dt * DT_MIN_FACTOR` abort the run.
const DT_MIN_FACTOR: f64 = 1e-8;

/// `max(u, 0)^{q+1}`.
#[inline]
fn clamped_power(u: f64, exponent: f64) -> f64 {
    let v = u.max(0.0);
    if exponent == 2.0 {
        v * v
    } else if exponent == 1.5 {
        v * v.sqrt()
    } else {
        v.powf(exponent)
    }
}

/// `i (b·ξ)` on every spectral index, with the 2/3 rule applied if
/// `dealias` is set. The Nyquist modes are always dropped.
pub fn derivative_multiplier(grid: &Grid, b: &[f64], dealias: bool) -> Vec<Complex64> {
    let n = grid.n;
    let cutoff = if dealias { (n / 3) as i64 } else { (n / 2 - 1) as i64 };
    let keep = |k: usize| grid.signed_index(k).abs() <= cutoff;
    (0..grid.len())
        .map(|idx| {
            let (i, j) = (idx % n, idx / n);
            let (ok, dot) = match grid.dim {
                1 => (keep(i), b[0] * grid.frequency(i)),
                _ => (
                    keep(i) && keep(j),
                    b[0] * grid.frequency(i) + b[1] * grid.frequency(j),
                ),
            };
            if ok {
                Complex64::new(0.0, dot)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect()
}

fn to_complex(values: &[f64]) -> Vec<Complex64> {
    values.par_iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

fn real_parts(data: Vec<Complex64>) -> Vec<f64> {
    data.into_par_iter().map(|c| c.re).collect()
}

/// Precomputed spectral operators for one configuration.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: Grid,
    exponent: f64,
    has_drift: bool,
    symbol: Symbol,
    derivative: Vec<Complex64>,
    cached: Option<(f64, Vec<f64>)>,
}

impl Stepper {
    pub fn new(cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self::unchecked(cfg.grid, cfg.params.alpha, cfg.q, &cfg.b, cfg.dealias))
    }

    pub(crate) fn unchecked(grid: Grid, alpha: f64, q: f64, b: &[f64], dealias: bool) -> Self {
        Stepper {
            grid,
            exponent: q + 1.0,
            has_drift: b.iter().any(|&v| v != 0.0),
            symbol: Symbol::new(grid, alpha),
            derivative: derivative_multiplier(&grid, b, dealias),
            cached: None,
        }
    }

    pub fn symbol(&self) -> &Symbol {
        &self.symbol
    }

    /// Spectrum of `∇·(b max(u,0)^{q+1})`.
    pub(crate) fn flux_hat(&self, u: &[f64]) -> Vec<Complex64> {
        let mut w: Vec<Complex64> = u
            .par_iter()
            .map(|&v| Complex64::new(clamped_power(v, self.exponent), 0.0))
            .collect();
        grid::forward(&self.grid, &mut w);
        w.par_iter_mut()
            .zip(self.derivative.par_iter())
            .for_each(|(c, d)| *c *= d);
        w
    }

    fn multiplier(&mut self, dt: f64) -> &[f64] {
        let stale = !matches!(&self.cached, Some((c, _)) if *c == dt);
        if stale {
            self.cached = Some((dt, self.symbol.multiplier(dt)));
        }
        &self.cached.as_ref().expect("multiplier cached").1
    }

    /// One predictor–corrector step of size `dt`, without clamping.
    pub fn advance(&mut self, u: &[f64], dt: f64) -> Vec<f64> {
        let grid = self.grid;
        let mut uh = to_complex(u);
        grid::forward(&grid, &mut uh);
        if !self.has_drift {
            let e = self.multiplier(dt);
            uh.par_iter_mut().zip(e.par_iter()).for_each(|(c, m)| *c *= m);
            grid::inverse(&grid, &mut uh);
            return real_parts(uh);
        }
        let nu = self.flux_hat(u);
        let e = self.multiplier(dt).to_vec();
        let mut up: Vec<Complex64> = uh
            .par_iter()
            .zip(nu.par_iter())
            .zip(e.par_iter())
            .map(|((a, n), m)| (a - n * dt) * m)
            .collect();
        grid::inverse(&grid, &mut up);
        let up = real_parts(up);
        let nup = self.flux_hat(&up);
        let half = 0.5 * dt;
        let mut out: Vec<Complex64> = uh
            .par_iter()
            .zip(nu.par_iter())
            .zip(nup.par_iter())
            .zip(e.par_iter())
            .map(|(((a, n), np), m)| a * m - (n * m + np) * half)
            .collect();
        grid::inverse(&grid, &mut out);
        real_parts(out)
    }
}

/// `∇·(b max(u,0)^{q+1})` evaluated spectrally.
pub fn nonlinear_flux(f: &Field, q: f64, b: &[f64], dealias: bool) -> Result<Field> {
    if b.len() != f.grid.dim {
        return Err(Error::SizeMismatch(format!(
            "b has {} components, grid dimension is {}",
            b.len(),
            f.grid.dim
        )));
    }
    let stepper = Stepper::unchecked(f.grid, 2.0, q, b, dealias);
    let mut data = stepper.flux_hat(&f.values);
    grid::inverse(&f.grid, &mut data);
    let values = real_parts(data);
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Abort {
            time: f.time,
            reason: "non-finite nonlinear flux".into(),
        });
    }
    Ok(Field {
        grid: f.grid,
        values,
        time: f.time,
    })
}

/// Negative values set to zero; returns the mass that removed.
fn clamp_negative(values: &mut [f64], cell_volume: f64) -> f64 {
    let mut removed = 0.0;
    for v in values.iter_mut() {
        if *v < 0.0 {
            removed -= *v;
            *v = 0.0;
        }
    }
    removed * cell_volume
}

/// One clamped step of size `dt`.
pub fn step(f: &Field, dt: f64, cfg: &SolverConfig) -> Result<Field> {
    let mut stepper = Stepper::new(cfg)?;
    if f.grid != cfg.grid {
        return Err(Error::SizeMismatch("field and configuration grids differ".into()));
    }
    let mut values = stepper.advance(&f.values, dt);
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Abort {
            time: f.time,
            reason: "non-finite values after step".into(),
        });
    }
    let mass = f.integral().abs();
    let clamped = clamp_negative(&mut values, f.grid.cell_volume());
    if clamped > CLAMP_BUDGET * mass {
        return Err(Error::Abort {
            time: f.time,
            reason: format!("clamped mass {clamped:e} exceeds the per-step budget"),
        });
    }
    Ok(Field {
        grid: f.grid,
        values,
        time: f.time + dt,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LedgerEntry {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub mass: f64,
    /// Minimum before clamping.
    pub min_u: f64,
    pub max_u: f64,
    pub clamped_mass: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub config: SolverConfig,
    pub initial: Field,
    pub snapshots: Vec<Field>,
    pub ledger: Vec<LedgerEntry>,
    pub initial_mass: f64,
    pub rejected_steps: usize,
    /// `‖u_0‖_∞^{q-q₀}`.
    pub datum_sup_power: f64,
    /// `sup_t ‖u(t)‖_∞^{q-q₀}` over accepted steps.
    pub solution_sup_power: f64,
}

impl Trajectory {
    /// Snapshot saved at time `t` (to 1e-12 relative).
    pub fn snapshot_at(&self, t: f64) -> Option<&Field> {
        self.snapshots
            .iter()
            .find(|f| (f.time - t).abs() <= 1e-12 * t.abs().max(1.0))
    }

    /// Largest relative deviation of the ledger mass from the initial mass.
    pub fn max_mass_drift(&self) -> f64 {
        self.ledger
            .iter()
            .map(|e| ((e.mass - self.initial_mass) / self.initial_mass).abs())
            .fold(0.0, f64::max)
    }
}

fn cfl_limit(cfg: &SolverConfig, max_u: f64) -> f64 {
    let drift = cfg.drift_norm();
    if drift == 0.0 || max_u <= 0.0 {
        return f64::INFINITY;
    }
    cfg.grid.spacing() / (4.0 * drift * max_u.powf(cfg.q))
}

/// March from `u0` to every save time and `t_end`.
pub fn solve(cfg: &SolverConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let u0 = make_u0(&cfg.datum, &cfg.grid)?;
    solve_from(cfg, u0)
}

/// [`solve`] with an explicit initial field.
pub fn solve_from(cfg: &SolverConfig, u0: Field) -> Result<Trajectory> {
    cfg.validate()?;
    if u0.grid != cfg.grid {
        return Err(Error::SizeMismatch("initial field and configuration grids differ".into()));
    }
    let mut stepper = Stepper::new(cfg)?;
    let vol = cfg.grid.cell_volume();
    let mass0 = u0.integral();
    let q_excess = cfg.q - cfg.critical_exponent();
    let mut sup_u = u0.max();
    let datum_sup_power = sup_u.powf(q_excess);

    let mut targets: Vec<f64> = cfg.save_times.clone();
    if targets.last().is_none_or(|&t| t < cfg.t_end) {
        targets.push(cfg.t_end);
    }
    let save = |t: f64| cfg.save_times.iter().any(|&s| s == t);

    let mut snapshots = Vec::new();
    let mut ledger = vec![LedgerEntry {
        step: 0,
        t: 0.0,
        dt: 0.0,
        mass: mass0,
        min_u: u0.min(),
        max_u: u0.max(),
        clamped_mass: 0.0,
    }];
    let mut u = u0.values.clone();
    let mut t = 0.0;
    let mut mass = mass0;
    let mut dt_cur = cfg.dt;
    let dt_min = cfg.dt * DT_MIN_FACTOR;
    let mut clean = 0usize;
    let mut rejected = 0usize;
    let mut max_u = sup_u;

    for &target in &targets {
        while t < target {
            let remaining = target - t;
            let mut h = dt_cur.min(cfl_limit(cfg, max_u));
            let lands = h >= remaining * (1.0 - 1e-12);
            if lands {
                h = remaining;
            } else if h > 0.5 * remaining {
                // two even steps instead of one full step and a sliver
                h = 0.5 * remaining;
            }
            loop {
                if h < dt_min {
                    return Err(Error::Abort {
                        time: t,
                        reason: format!("step size {h:e} fell below {dt_min:e}"),
                    });
                }
                let mut next = stepper.advance(&u, h);
                if next.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Abort {
                        time: t,
                        reason: "non-finite values (NaN or overflow) after step".into(),
                    });
                }
                let min_u = next.iter().copied().fold(f64::INFINITY, f64::min);
                let clamped = clamp_negative(&mut next, vol);
                let new_mass = next.iter().sum::<f64>() * vol;
                let drift = ((new_mass - mass) / mass0).abs();
                if clamped > CLAMP_BUDGET * mass0 || drift > MASS_DRIFT_BUDGET {
                    rejected += 1;
                    clean = 0;
                    h *= 0.5;
                    dt_cur = dt_cur.min(h);
                    continue;
                }
                u = next;
                mass = new_mass;
                max_u = u.iter().copied().fold(0.0, f64::max);
                sup_u = sup_u.max(max_u);
                t = if h == remaining { target } else { t + h };
                ledger.push(LedgerEntry {
                    step: ledger.len(),
                    t,
                    dt: h,
                    mass,
                    min_u,
                    max_u,
                    clamped_mass: clamped,
                });
                break;
            }
            clean += 1;
            if clean >= CLEAN_STEPS_TO_GROW {
                dt_cur = (2.0 * dt_cur).min(cfg.dt);
                clean = 0;
            }
        }
        if save(target) {
            snapshots.push(Field {
                grid: cfg.grid,
                values: u.clone(),
                time: target,
            });
        }
    }
    log::debug!(
        "solve: {} steps, {} rejected, final t = {t}",
        ledger.len() - 1,
        rejected
    );
    Ok(Trajectory {
        config: cfg.clone(),
        initial: u0,
        snapshots,
        ledger,
        initial_mass: mass0,
        rejected_steps: rejected,
        datum_sup_power,
        solution_sup_power: sup_u.powf(q_excess),
    })
}
