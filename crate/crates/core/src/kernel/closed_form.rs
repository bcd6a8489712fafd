//! Closed forms for the two integer stability indices, used as oracles.

use std::f64::consts::PI;

/// Gaussian kernel `(4πt)^{-d/2} e^{-|x|²/4t}` (α = 2).
pub fn gaussian_density(dim: usize, t: f64, r: f64) -> f64 {
    (4.0 * PI * t).powf(-(dim as f64) / 2.0) * (-r * r / (4.0 * t)).exp()
}

/// Radial derivative of [`gaussian_density`].
pub fn gaussian_radial_derivative(dim: usize, t: f64, r: f64) -> f64 {
    -r / (2.0 * t) * gaussian_density(dim, t, r)
}

/// Cauchy kernel `Γ((d+1)/2) π^{-(d+1)/2} t (t² + |x|²)^{-(d+1)/2}` (α = 1).
pub fn cauchy_density(dim: usize, t: f64, r: f64) -> f64 {
    let e = (dim as f64 + 1.0) / 2.0;
    let c = statrs::function::gamma::gamma(e) * PI.powf(-e);
    c * t * (t * t + r * r).powf(-e)
}

/// Radial derivative of [`cauchy_density`].
pub fn cauchy_radial_derivative(dim: usize, t: f64, r: f64) -> f64 {
    let e = (dim as f64 + 1.0) / 2.0;
    -2.0 * e * r / (t * t + r * r) * cauchy_density(dim, t, r)
}
