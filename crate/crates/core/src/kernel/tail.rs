//! Heavy-tail asymptotic expansion of `p(1, r)` for `α < 2`.
//!
//! `p(1, r) ~ Σ_{n≥1} a_n r^{-nα-d}` with
//! `a_n = π^{-d/2-1} (-1)^{n+1}/n! · 2^{nα} Γ(nα/2+1) Γ((nα+d)/2) sin(nπα/2)`.
//! The series converges for `α < 1` and is asymptotic for `1 < α < 2`; it is
//! summed up to its smallest term.

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use super::radial::RadialValues;

const MAX_TERMS: usize = 80;

#[derive(Debug, Clone)]
pub struct TailSeries {
    alpha: f64,
    dim: usize,
    /// `a_n` for `n = 1..=MAX_TERMS`; exact zeros where `sin(nπα/2) = 0`.
    coeffs: Vec<f64>,
}

/// `sin(π x)` with exact zeros at integers.
fn sin_pi(x: f64) -> f64 {
    let reduced = x - 2.0 * (x / 2.0).floor();
    if (reduced - reduced.round()).abs() < 1e-13 {
        return 0.0;
    }
    (PI * reduced).sin()
}

/// Sum of a truncated series together with an error estimate.
#[derive(Debug, Clone, Copy)]
pub struct TailEval {
    pub values: RadialValues,
    /// Magnitude of the first omitted term of the value series, relative to
    /// the sum.
    pub rel_error: f64,
}

impl TailSeries {
    pub fn new(alpha: f64, dim: usize) -> Self {
        let d = dim as f64;
        let log_pref = -(d / 2.0 + 1.0) * PI.ln();
        let coeffs = (1..=MAX_TERMS)
            .map(|n| {
                let nf = n as f64;
                let s = sin_pi(nf * alpha / 2.0);
                if s == 0.0 {
                    return 0.0;
                }
                let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
                let log_mag = log_pref - ln_gamma(nf + 1.0)
                    + nf * alpha * std::f64::consts::LN_2
                    + ln_gamma(nf * alpha / 2.0 + 1.0)
                    + ln_gamma((nf * alpha + d) / 2.0);
                sign * s * log_mag.exp()
            })
            .collect();
        TailSeries { alpha, dim, coeffs }
    }

    /// Leading coefficient `a_1`, i.e. `p(1, r) ≈ a_1 r^{-d-α}`.
    pub fn leading(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Sum the series at radius `r`, stopping at the smallest term.
    pub fn eval(&self, r: f64) -> TailEval {
        let d = self.dim as f64;
        let (mut p, mut dp, mut d2p) = (0.0f64, 0.0f64, 0.0f64);
        let mut prev_mag = f64::INFINITY;
        let mut rel_error = f64::INFINITY;
        let mut truncated = false;
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let e = (i + 1) as f64 * self.alpha + d;
            let term = a * r.powf(-e);
            let mag = term.abs();
            // derivatives grow by an extra factor e/r; keep them in the
            // optimal-truncation test too
            let dmag = mag * (e + 1.0) * (e + 2.0);
            if dmag > prev_mag {
                rel_error = mag / p.abs();
                truncated = true;
                break;
            }
            if p != 0.0 && mag < 1e-18 * p.abs() {
                rel_error = mag / p.abs();
                truncated = true;
                break;
            }
            p += term;
            dp -= e * term / r;
            d2p += e * (e + 1.0) * term / (r * r);
            prev_mag = dmag;
        }
        if !truncated {
            rel_error = prev_mag / p.abs();
        }
        TailEval {
            values: RadialValues { p, dp, d2p },
            rel_error,
        }
    }

    /// `∫_{|x|>R} p(1, x) dx` from the term-wise integrated series.
    pub fn mass_beyond(&self, radius: f64) -> f64 {
        let surface = match self.dim {
            1 => 2.0,
            2 => 2.0 * PI,
            d => {
                let d = d as f64;
                2.0 * PI.powf(d / 2.0) / statrs::function::gamma::gamma(d / 2.0)
            }
        };
        let mut acc = 0.0f64;
        let mut prev = f64::INFINITY;
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let nalpha = (i + 1) as f64 * self.alpha;
            let term = surface * a * radius.powf(-nalpha) / nalpha;
            if term.abs() > prev || term.abs() < 1e-20 * acc.abs() {
                break;
            }
            prev = term.abs();
            acc += term;
        }
        acc
    }
}
