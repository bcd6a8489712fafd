use rayon::prelude::*;

use crate::error::Result;
use crate::kernel::closed_form::{
    cauchy_density, cauchy_radial_derivative, gaussian_density, gaussian_radial_derivative,
};
use crate::kernel::{density_envelope, gradient_envelope, StabilityParams, StableKernel, UNDERFLOW_FLOOR};
use crate::quadrature::gauss_legendre;

use super::{relative_change, CheckResult, Table};

#[derive(Debug, Clone, PartialEq)]
pub struct KernelCheckOptions {
    /// Log-sweep density for the envelope constants; the refined sweep
    /// doubles it.
    pub points_per_decade: usize,
    pub closed_form_tol: f64,
    pub normalization_tol: f64,
    pub scaling_tol: f64,
    pub envelope_drift_tol: f64,
    pub chapman_kolmogorov_tol: f64,
}

impl Default for KernelCheckOptions {
    fn default() -> Self {
        KernelCheckOptions {
            points_per_decade: 8,
            closed_form_tol: 1e-8,
            normalization_tol: 1e-6,
            scaling_tol: 1e-10,
            envelope_drift_tol: 0.01,
            chapman_kolmogorov_tol: 1e-4,
        }
    }
}

fn log_sweep(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = (decades * per_decade as f64).round() as usize;
    (0..=n)
        .map(|i| lo * 10f64.powf(decades * i as f64 / n as f64))
        .collect()
}

/// Every sub-invariant of the kernel, one child result each.
pub fn check_kernel(params: StabilityParams, opts: &KernelCheckOptions) -> Result<CheckResult> {
    let kernel = StableKernel::new(params)?;
    let mut out = CheckResult::new("kernel")
        .param("alpha", params.alpha)
        .param("d", params.dim);
    if params.alpha == 1.0 || params.alpha == 2.0 {
        out.children.push(closed_forms(&kernel, opts.closed_form_tol));
    }
    out.children.push(normalization(&kernel, opts.normalization_tol));
    out.children.push(scaling(&kernel, opts.scaling_tol));
    if params.alpha < 2.0 {
        out.children.push(envelope(&kernel, opts, false));
        out.children.push(envelope(&kernel, opts, true));
        out.children.push(drift_gradient(&kernel, opts.points_per_decade));
    } else {
        out.note("alpha = 2 has no power-law envelope; envelope sub-checks do not apply");
    }
    out.children.push(chapman_kolmogorov(&kernel, opts.chapman_kolmogorov_tol));
    Ok(out.decide_by_children())
}

/// Density and gradient against the Gaussian or Cauchy closed forms at 100
/// points `(t, x)`.
fn closed_forms(kernel: &StableKernel, tol: f64) -> CheckResult {
    let params = kernel.params();
    let dim = params.dim;
    let (p_exact, dp_exact): (fn(usize, f64, f64) -> f64, fn(usize, f64, f64) -> f64) =
        if params.alpha == 2.0 {
            (gaussian_density, gaussian_radial_derivative)
        } else {
            (cauchy_density, cauchy_radial_derivative)
        };
    let times = log_sweep(0.1, 10.0, 5);
    let mut table = Table::new("closed_form", &["t", "r", "density_error", "gradient_error"]);
    let (mut worst_p, mut worst_g) = (0.0f64, 0.0f64);
    for &t in times.iter().take(10) {
        let scale = t.powf(1.0 / params.alpha);
        for j in 0..10 {
            let r = 0.5 * j as f64 * scale;
            let ep = relative_change(p_exact(dim, t, r), kernel.density_radial(t, r));
            let exact_dp = dp_exact(dim, t, r);
            let eg = if r == 0.0 {
                kernel.radial_derivative(t, r).abs()
            } else {
                relative_change(exact_dp, kernel.radial_derivative(t, r))
            };
            worst_p = worst_p.max(ep);
            worst_g = worst_g.max(eg);
            table.push(vec![t, r, ep, eg]);
        }
    }
    let mut out = CheckResult::new("closed_form").param("points", table.rows.len());
    out.measure("max_density_error", worst_p);
    out.measure("max_gradient_error", worst_g);
    out.tolerate("relative_error", tol);
    out.tables.push(table);
    out.decide(worst_p <= tol && worst_g <= tol)
}

fn normalization(kernel: &StableKernel, tol: f64) -> CheckResult {
    let mass = kernel.total_mass();
    let mut out = CheckResult::new("normalization");
    out.measure("total_mass", mass);
    out.measure("error", (mass - 1.0).abs());
    out.tolerate("error", tol);
    out.decide((mass - 1.0).abs() <= tol)
}

/// `p(t, x) = λ^{d/α} p(λt, λ^{1/α} x)` over a deterministic sweep of
/// `λ ∈ [0.1, 10]`, `t` and `|x|`.
fn scaling(kernel: &StableKernel, tol: f64) -> CheckResult {
    let params = kernel.params();
    let d = params.dim as f64;
    let mut worst = 0.0f64;
    let mut count = 0usize;
    for &lambda in &log_sweep(0.1, 10.0, 3) {
        for &t in &[0.01f64, 0.3, 1.0, 7.0, 100.0] {
            for &rho in &[0.0, 0.2, 1.0, 3.0, 15.0, 60.0] {
                let r = rho * t.powf(1.0 / params.alpha);
                let p = kernel.density_radial(t, r);
                if p < UNDERFLOW_FLOOR {
                    continue;
                }
                let scaled = lambda.powf(d / params.alpha)
                    * kernel.density_radial(lambda * t, lambda.powf(1.0 / params.alpha) * r);
                worst = worst.max(relative_change(p, scaled));
                count += 1;
            }
        }
    }
    let mut out = CheckResult::new("scaling").param("points", count);
    out.measure("max_relative_error", worst);
    out.tolerate("relative_error", tol);
    out.decide(worst <= tol)
}

/// `(min, max)` of `value/envelope` over the `(t, |x|)` sweep.
fn envelope_constants(kernel: &StableKernel, per_decade: usize, gradient: bool) -> (f64, f64) {
    let params = kernel.params();
    let sweep = log_sweep(1e-3, 1e3, per_decade);
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for &t in &sweep {
        for &r in &sweep {
            let (value, env) = if gradient {
                (kernel.radial_derivative(t, r).abs(), gradient_envelope(params, t, r))
            } else {
                (kernel.density_radial(t, r), density_envelope(params, t, r))
            };
            if value < UNDERFLOW_FLOOR || env < UNDERFLOW_FLOOR {
                continue;
            }
            let q = value / env;
            lo = lo.min(q);
            hi = hi.max(q);
        }
    }
    (lo, hi)
}

fn envelope(kernel: &StableKernel, opts: &KernelCheckOptions, gradient: bool) -> CheckResult {
    let name = if gradient { "gradient_envelope" } else { "envelope" };
    let (c1, c2) = envelope_constants(kernel, opts.points_per_decade, gradient);
    let (f1, f2) = envelope_constants(kernel, 2 * opts.points_per_decade, gradient);
    let drift = relative_change(c1, f1).max(relative_change(c2, f2));
    let mut out = CheckResult::new(name).param("points_per_decade", opts.points_per_decade);
    out.measure("c1", c1);
    out.measure("c2", c2);
    out.measure("c1_refined", f1);
    out.measure("c2_refined", f2);
    out.measure("refinement_drift", drift);
    out.tolerate("refinement_drift", opts.envelope_drift_tol);
    let ok = c1 > 0.0 && c2.is_finite() && c1 < c2 && drift < opts.envelope_drift_tol;
    out.decide(ok)
}

/// `|b·∇p(t, x)| ≤ c t^{-1/α} p(t, x)` for `|b| = 1`; the worst direction is
/// `b ∥ x`, so `c = sup t^{1/α} |∂_r p| / p`.
fn drift_gradient(kernel: &StableKernel, per_decade: usize) -> CheckResult {
    let params = kernel.params();
    let sweep = log_sweep(1e-3, 1e3, per_decade);
    let mut c = 0.0f64;
    for &t in &sweep {
        for &r in &sweep {
            let p = kernel.density_radial(t, r);
            if p < UNDERFLOW_FLOOR {
                continue;
            }
            c = c.max(t.powf(1.0 / params.alpha) * kernel.radial_derivative(t, r).abs() / p);
        }
    }
    let mut out = CheckResult::new("drift_gradient").param("points_per_decade", per_decade);
    out.measure("c", c);
    out.decide(c.is_finite() && c > 0.0)
}

/// Breakpoints resolving two kernel peaks of the given centres and widths,
/// geometrically graded out to `reach`.
fn peak_breakpoints(peaks: &[(f64, f64)], reach: f64) -> Vec<f64> {
    let mut cuts = vec![-reach, reach];
    for &(c, w) in peaks {
        cuts.push(c);
        let mut d = w / 16.0;
        while d < 2.0 * reach {
            cuts.push(c - d);
            cuts.push(c + d);
            d *= 1.5;
        }
    }
    cuts.retain(|x| x.abs() <= reach);
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14 * reach);
    cuts
}

fn nodes_from_cuts(cuts: &[f64], order: usize) -> Vec<(f64, f64)> {
    let rule = gauss_legendre(order);
    cuts.windows(2)
        .flat_map(|w| rule.mapped(w[0], w[1]).collect::<Vec<_>>())
        .collect()
}

/// `∫ p(s, x - βw) p(t, γw - z) dw` by graded tensor Gauss quadrature.
fn convolution(
    kernel: &StableKernel,
    (s, t, beta, gamma): (f64, f64, f64, f64),
    x: &[f64],
    z: &[f64],
) -> f64 {
    let alpha = kernel.params().alpha;
    let dim = kernel.params().dim;
    let ws = s.powf(1.0 / alpha) / beta;
    let wt = t.powf(1.0 / alpha) / gamma;
    let axes: Vec<Vec<(f64, f64)>> = (0..dim)
        .map(|k| {
            let c1 = x[k] / beta;
            let c2 = z[k] / gamma;
            let reach = 1e4 * (c1.abs() + c2.abs() + ws + wt);
            nodes_from_cuts(&peak_breakpoints(&[(c1, ws), (c2, wt)], reach), 12)
        })
        .collect();
    let integrand = |w: &[f64]| {
        let mut a2 = 0.0;
        let mut b2 = 0.0;
        for k in 0..dim {
            let a = x[k] - beta * w[k];
            let b = gamma * w[k] - z[k];
            a2 += a * a;
            b2 += b * b;
        }
        kernel.density_radial(s, a2.sqrt()) * kernel.density_radial(t, b2.sqrt())
    };
    match dim {
        1 => axes[0].iter().map(|&(w, c)| c * integrand(&[w])).sum(),
        _ => axes[1]
            .par_iter()
            .map(|&(w2, c2)| {
                axes[0]
                    .iter()
                    .map(|&(w1, c1)| c1 * c2 * integrand(&[w1, w2]))
                    .sum::<f64>()
            })
            .collect::<Vec<f64>>()
            .into_iter()
            .sum(),
    }
}

/// `∫ p(s, x - βw) p(t, γw - z) dw = p(γ^α s + β^α t, γx - βz)`.
fn chapman_kolmogorov(kernel: &StableKernel, tol: f64) -> CheckResult {
    let params = kernel.params();
    let alpha = params.alpha;
    let cases: [((f64, f64, f64, f64), [f64; 2], [f64; 2]); 3] = [
        ((0.5, 1.0, 1.0, 1.0), [0.3, 0.1], [-0.4, 0.2]),
        ((0.7, 0.2, 0.8, 1.3), [1.0, -0.5], [0.5, 0.7]),
        ((2.0, 0.5, 1.5, 0.6), [-2.0, 1.0], [1.0, 0.0]),
    ];
    let mut table = Table::new("chapman_kolmogorov", &["s", "t", "beta", "gamma", "numeric", "exact", "relative_error"]);
    let mut worst = 0.0f64;
    for (scales, x, z) in cases {
        let (s, t, beta, gamma) = scales;
        let x = &x[..params.dim];
        let z = &z[..params.dim];
        let numeric = convolution(kernel, scales, x, z);
        let r2: f64 = x.iter().zip(z).map(|(a, b)| (gamma * a - beta * b).powi(2)).sum();
        let exact = kernel.density_radial(gamma.powf(alpha) * s + beta.powf(alpha) * t, r2.sqrt());
        let rel = relative_change(exact, numeric);
        worst = worst.max(rel);
        table.push(vec![s, t, beta, gamma, numeric, exact, rel]);
    }
    let mut out = CheckResult::new("chapman_kolmogorov");
    out.measure("max_relative_error", worst);
    out.tolerate("relative_error", tol);
    out.tables.push(table);
    out.decide(worst <= tol)
}
