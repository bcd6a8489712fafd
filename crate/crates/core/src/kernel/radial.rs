//! Direct evaluation of the unit-time radial profile by oscillatory quadrature.
//!
//! For `d = 1` the profile is the cosine transform
//! `p(1, r) = (1/π) ∫₀^∞ e^{-k^α} cos(kr) dk`, for `d = 2` the order-zero
//! Hankel transform `p(1, r) = (1/2π) ∫₀^∞ e^{-k^α} J₀(kr) k dk`. The
//! integrand is split into panels no longer than half an oscillation and a
//! geometric cluster of panels at `k = 0`, where `e^{-k^α}` is not smooth.

use std::f64::consts::PI;

use crate::quadrature::gauss_legendre;

/// `p(1, r)` together with its first two radial derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialValues {
    pub p: f64,
    pub dp: f64,
    pub d2p: f64,
}

const PANEL_NODES: usize = 20;
/// `e^{-K^α} = e^{-46} ≈ 1e-20` marks the end of the frequency range.
const LOG_CUTOFF: f64 = 46.0;

/// Frequency cutoff beyond which `e^{-k^α}` is negligible.
fn frequency_cutoff(alpha: f64) -> f64 {
    LOG_CUTOFF.powf(1.0 / alpha)
}

/// Panel breakpoints on `[0, K]`: geometric towards zero, then uniform
/// with width at most half a period of the oscillation.
fn panel_breaks(alpha: f64, r: f64) -> Vec<f64> {
    let kmax = frequency_cutoff(alpha);
    let width = if r > 0.0 { (PI / r).min(0.5) } else { 0.5 };
    let first = width.min(0.5);
    let mut breaks = Vec::new();
    // geometric cluster at zero down to 1e-12
    let mut a = first;
    let mut cluster = Vec::new();
    while a > 1e-12 {
        cluster.push(a);
        a *= 0.2;
    }
    breaks.push(0.0);
    breaks.extend(cluster.iter().rev());
    let mut k = first;
    while k < kmax {
        k = (k + width).min(kmax);
        breaks.push(k);
    }
    breaks
}

/// Evaluate `p(1, r)`, `∂_r p(1, r)` and `∂_r² p(1, r)` by quadrature.
///
/// Only `dim ∈ {1, 2}` is supported.
pub fn radial_quadrature(alpha: f64, dim: usize, r: f64) -> RadialValues {
    let rule = gauss_legendre(PANEL_NODES);
    let breaks = panel_breaks(alpha, r);
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        for (k, w) in rule.mapped(a, b) {
            let decay = (-k.powf(alpha)).exp();
            if decay == 0.0 {
                continue;
            }
            let kr = k * r;
            match dim {
                1 => {
                    let (s, c) = kr.sin_cos();
                    s0 += w * decay * c;
                    s1 -= w * decay * k * s;
                    s2 -= w * decay * k * k * c;
                }
                2 => {
                    let j0 = libm::j0(kr);
                    let j1 = libm::j1(kr);
                    let j1_over = if kr < 1e-8 { 0.5 - kr * kr / 16.0 } else { j1 / kr };
                    s0 += w * decay * k * j0;
                    s1 -= w * decay * k * k * j1;
                    s2 -= w * decay * k * k * k * (j0 - j1_over);
                }
                _ => panic!("radial quadrature supports dim 1 and 2 only"),
            }
        }
    }
    let norm = match dim {
        1 => 1.0 / PI,
        _ => 1.0 / (2.0 * PI),
    };
    RadialValues {
        p: s0 * norm,
        dp: s1 * norm,
        d2p: s2 * norm,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_profile_at_origin() {
        let v = radial_quadrature(2.0, 1, 0.0);
        assert!((v.p - 1.0 / (4.0 * PI).sqrt()).abs() < 1e-14);
        assert_eq!(v.dp, 0.0);
        let v = radial_quadrature(2.0, 2, 0.0);
        assert!((v.p - 1.0 / (4.0 * PI)).abs() < 1e-14);
    }

    #[test]
    fn cauchy_profile_in_one_and_two_dimensions() {
        for &r in &[0.0, 0.3, 1.0, 4.0, 17.0] {
            let v = radial_quadrature(1.0, 1, r);
            let exact = 1.0 / (PI * (1.0 + r * r));
            assert!((v.p - exact).abs() < 1e-12 * exact, "r={r}");
            let dexact = -2.0 * r / (PI * (1.0 + r * r).powi(2));
            assert!((v.dp - dexact).abs() < 1e-11 * exact, "r={r}");
            let v = radial_quadrature(1.0, 2, r);
            let exact = 1.0 / (2.0 * PI * (1.0 + r * r).powf(1.5));
            assert!((v.p - exact).abs() < 1e-11 * exact, "r={r} {} {}", v.p, exact);
        }
    }
}
