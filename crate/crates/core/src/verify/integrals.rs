use rayon::prelude::*;
use statrs::function::beta::beta;

use crate::error::{Error, Result};
use crate::grid::{interpolate, Field};
use crate::kernel::{StabilityParams, StableKernel};
use crate::quadrature::{
    gauss_legendre, graded_left, graded_left_nodes, graded_right, graded_right_nodes, GaussRule,
};
use crate::semigroup::{apply_with, Symbol};

use super::{relative_change, CheckResult, Table};

/// `1 - r^α` from the offset `y = 1 - r`, without cancellation.
fn one_minus_pow(y: f64, alpha: f64) -> f64 {
    -(alpha * (-y).ln_1p()).exp_m1()
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("beta must lie in (0, 1), got {beta}")))
    }
}

/// `C₂ = ∫₀¹ r^{-β}(1-r^α)^{-1/α} dr = (1/α) B((1-β)/α, 1-1/α)`.
pub fn beta_constant(alpha: f64, beta_exp: f64) -> f64 {
    beta((1.0 - beta_exp) / alpha, 1.0 - 1.0 / alpha) / alpha
}

/// Nodes `(r, w)` for `∫₀¹ r^{-β}(1-r^α)^{-1/α} g(r) dr ≈ Σ w g(r)`, the
/// weights including the singular factor, graded at both endpoints so that
/// the substitution absorbs each singularity.
fn weighted_r_nodes(alpha: f64, beta_exp: f64, panels: usize, rule: &GaussRule) -> Vec<(f64, f64)> {
    let singular = |r: f64, y: f64| r.powf(-beta_exp) * one_minus_pow(y, alpha).powf(-1.0 / alpha);
    let left = graded_left_nodes(0.0, 0.5, 1.0 / (1.0 - beta_exp), panels, rule)
        .into_iter()
        .map(|(r, _, w)| (r, w * singular(r, 1.0 - r)));
    let right = graded_right_nodes(0.5, 1.0, alpha / (alpha - 1.0), panels, rule)
        .into_iter()
        .map(|(r, y, w)| (r, w * singular(r, y)));
    left.chain(right).collect()
}

fn weighted_r_integral<F: FnMut(f64) -> f64>(
    alpha: f64,
    beta_exp: f64,
    panels: usize,
    rule: &GaussRule,
    mut g: F,
) -> f64 {
    weighted_r_nodes(alpha, beta_exp, panels, rule)
        .into_iter()
        .map(|(r, w)| w * g(r))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaOptions {
    /// Points `x` at which both sides are compared.
    pub samples: Vec<f64>,
    /// Panels per half of `[0, 1]` in the graded `r` rule.
    pub r_panels: usize,
    pub r_order: usize,
    /// Samples where `P*_t f` is below `floor·max` are masked.
    pub floor: f64,
}

impl Default for LemmaOptions {
    fn default() -> Self {
        LemmaOptions {
            samples: (0..10).map(|i| -4.5 + i as f64).collect(),
            r_panels: 3,
            r_order: 12,
            floor: 1e-8,
        }
    }
}

/// `∫ p(σ^α, x - y) G(y) dy` over the interpolation box, where `G` is the
/// monotone cubic interpolant of `field` at `scale·y` times `amp`. Cells of
/// the lattice are integrated by Gauss rules, subdivided geometrically
/// around `x` when the kernel is narrower than the spacing.
fn smoothed_at(
    kernel: &StableKernel,
    field: &Field,
    s: f64,
    x: f64,
    scale: f64,
    amp: f64,
    rule: &GaussRule,
) -> f64 {
    let g = field.grid;
    let h = g.spacing() / scale;
    let lo = -g.half_width / scale;
    let hi = (g.half_width - g.spacing()) / scale;
    let sigma = s.powf(1.0 / kernel.params().alpha);
    let value = |y: f64| {
        let z = (x - y).abs();
        let u = interpolate(field, &[(scale * y).clamp(-g.half_width, g.half_width - g.spacing())])
            .unwrap_or(0.0);
        kernel.density_radial(s, z) * u * amp
    };
    let cells = ((hi - lo) / h).round() as usize;
    let mut acc = 0.0;
    for c in 0..cells {
        let a = lo + c as f64 * h;
        let b = if c + 1 == cells { hi } else { a + h };
        // distance from the kernel centre to the cell
        let gap = if x < a {
            a - x
        } else if x > b {
            x - b
        } else {
            0.0
        };
        if gap > 2.0 * h || sigma >= 2.0 * h {
            acc += rule.integrate(a, b, value);
            continue;
        }
        // geometric breakpoints around x clipped to the cell
        let mut cuts = vec![a, b];
        let mut d = sigma / 4.0;
        while d < 4.0 * h {
            for p in [x - d, x + d] {
                if p > a && p < b {
                    cuts.push(p);
                }
            }
            d *= 2.0;
        }
        if x > a && x < b {
            cuts.push(x);
        }
        cuts.sort_by(|p, q| p.total_cmp(q));
        for w in cuts.windows(2) {
            acc += rule.integrate(w[0], w[1], value);
        }
    }
    acc
}

/// Nested quadrature of `∫₀¹∫ h_β(r, x, w)(P*_{r^α t} f)(w) dw dr` at each
/// sample `x`, with `h_β(r,x,w) = r^{-β}(1-r^α)^{-1/α} p(1-r^α, x - r w)`.
///
/// In the variable `y = r w` the inner integrand is `p(1-r^α, x - y)` times
/// `r^{-d}(P*_{r^α t} f)(y/r) = t^{d/α}(P_{r^α t} f)(t^{1/α} y)`, evaluated
/// from the lattice field `P_{r^α t} f`.
pub fn lemma_lhs(
    kernel: &StableKernel,
    f: &Field,
    t: f64,
    beta_exp: f64,
    opts: &LemmaOptions,
) -> Result<Vec<f64>> {
    check_beta(beta_exp)?;
    let params = kernel.params();
    if params.dim != 1 || f.grid.dim != 1 {
        return Err(Error::Domain("the nested quadrature is one-dimensional".into()));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    let alpha = params.alpha;
    let rule = gauss_legendre(opts.r_order);
    let cell_rule = gauss_legendre(4);
    let symbol = Symbol::new(f.grid, alpha);
    let scale = t.powf(1.0 / alpha);
    let amp = t.powf(1.0 / alpha);
    let nodes = weighted_r_nodes(alpha, beta_exp, opts.r_panels, &rule);
    let per_node: Vec<Vec<f64>> = nodes
        .par_iter()
        .map(|&(r, _)| {
            let evolved = apply_with(&symbol, f, r.powf(alpha) * t)?;
            let s = one_minus_pow(1.0 - r, alpha);
            Ok(opts
                .samples
                .iter()
                .map(|&x| smoothed_at(kernel, &evolved, s, x, scale, amp, &cell_rule))
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..opts.samples.len())
        .map(|i| {
            nodes
                .iter()
                .zip(&per_node)
                .map(|((_, w), vals)| w * vals[i])
                .sum()
        })
        .collect())
}

/// Lemma identity (i): the nested integral equals `C₂ (P*_t f)(x)`.
pub fn check_lemma_identity(
    params: StabilityParams,
    f: &Field,
    t: f64,
    beta_exp: f64,
    opts: &LemmaOptions,
) -> Result<CheckResult> {
    const C2_TOL: f64 = 1e-10;
    const REL_TOL: f64 = 1e-3;
    check_beta(beta_exp)?;
    let alpha = params.alpha;
    if !(alpha > 1.0) {
        return Err(Error::Domain(format!("the identity needs alpha > 1, got {alpha}")));
    }
    let kernel = StableKernel::new(params)?;
    let c2 = beta_constant(alpha, beta_exp);
    let c2_direct = weighted_r_integral(alpha, beta_exp, 8, &gauss_legendre(24), |_| 1.0);
    let mut out = CheckResult::new("lemma_identity")
        .param("alpha", alpha)
        .param("beta", beta_exp)
        .param("t", t)
        .param("samples", &opts.samples)
        .param("r_panels", opts.r_panels)
        .param("r_order", opts.r_order);
    out.measure("c2_closed_form", c2);
    out.measure("c2_quadrature", c2_direct);
    out.measure("c2_difference", (c2 - c2_direct).abs());
    out.tolerate("c2_difference", C2_TOL);
    out.tolerate("relative_error", REL_TOL);

    let evolved = apply_with(&Symbol::new(f.grid, alpha), f, t)?;
    let scale = t.powf(1.0 / alpha);
    let rhs: Vec<f64> = opts
        .samples
        .iter()
        .map(|&x| interpolate(&evolved, &[scale * x]).map(|v| scale * v))
        .collect::<Result<_>>()?;
    let lhs = lemma_lhs(&kernel, f, t, beta_exp, opts)?;
    let peak = rhs.iter().copied().fold(0.0, f64::max);
    let mut table = Table::new("lemma_identity", &["x", "lhs", "c2_rhs", "relative_error"]);
    let mut worst = 0.0f64;
    let mut unmasked = 0usize;
    for ((&x, &l), &r) in opts.samples.iter().zip(&lhs).zip(&rhs) {
        let target = c2 * r;
        let rel = if r > opts.floor * peak {
            unmasked += 1;
            (l - target).abs() / target
        } else {
            f64::NAN
        };
        if rel.is_finite() {
            worst = worst.max(rel);
        }
        table.push(vec![x, l, target, rel]);
    }
    out.tables.push(table);
    out.measure("max_relative_error", worst);
    out.measure("unmasked_samples", unmasked);
    let c2_ok = (c2 - c2_direct).abs() <= C2_TOL;
    if peak == 0.0 {
        let exact = lhs.iter().all(|v| *v == 0.0);
        return Ok(out.decide_trivial(exact && c2_ok));
    }
    Ok(out.decide(c2_ok && unmasked > 0 && worst < REL_TOL))
}

/// `c(v) = ∫_v¹ r^{-β}(1-r^α)^{-1/α}(r^α-v^α)^{-1/α} dr / [v^{-β}(1-v)^{-1/α}]`
/// with `panels` graded panels at each endpoint.
pub fn convolution_ratio(alpha: f64, beta_exp: f64, v: f64, panels: usize) -> Result<f64> {
    check_beta(beta_exp)?;
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::Domain(format!("v must lie in (0, 1), got {v}")));
    }
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(Error::Domain(format!("alpha must lie in (1, 2], got {alpha}")));
    }
    let rule = gauss_legendre(20);
    let k = alpha / (alpha - 1.0);
    let m = 0.5 * (v + 1.0);
    let va = v.powf(alpha);
    let left = graded_left(v, m, k, panels, &rule, |r, y| {
        // r^α - v^α from the offset y = r - v
        let gap = va * (alpha * (y / v).ln_1p()).exp_m1();
        r.powf(-beta_exp) * one_minus_pow(1.0 - r, alpha).powf(-1.0 / alpha) * gap.powf(-1.0 / alpha)
    });
    let right = graded_right(m, 1.0, k, panels, &rule, |r, y| {
        let gap = r.powf(alpha) - va;
        r.powf(-beta_exp) * one_minus_pow(y, alpha).powf(-1.0 / alpha) * gap.powf(-1.0 / alpha)
    });
    let value = (left + right) / (v.powf(-beta_exp) * (1.0 - v).powf(-1.0 / alpha));
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Quadrature(format!("non-finite integral at v = {v}")))
    }
}

/// Empirical constant of `∫_v¹ r^{-β}(1-r^α)^{-1/α}(r^α-v^α)^{-1/α} dr ≲
/// v^{-β}(1-v)^{-1/α}`, with a quadrature-refinement stability test.
pub fn check_convolution_inequality(alpha: f64, beta_exp: f64, v_list: &[f64]) -> Result<CheckResult> {
    const MAX_DRIFT: f64 = 0.05;
    const PANELS: usize = 4;
    let mut out = CheckResult::new("convolution_inequality")
        .param("alpha", alpha)
        .param("beta", beta_exp)
        .param("v", v_list)
        .param("panels", PANELS);
    out.tolerate("refinement_drift", MAX_DRIFT);
    let mut table = Table::new("convolution_inequality", &["v", "c", "c_refined", "drift"]);
    let (mut worst_drift, mut c_max) = (0.0f64, 0.0f64);
    for &v in v_list {
        let c = convolution_ratio(alpha, beta_exp, v, PANELS)?;
        let fine = convolution_ratio(alpha, beta_exp, v, 2 * PANELS)?;
        let drift = relative_change(c, fine);
        worst_drift = worst_drift.max(drift);
        c_max = c_max.max(fine);
        table.push(vec![v, c, fine, drift]);
    }
    out.measure("c", table.column("c_refined"));
    out.measure("c_max", c_max);
    out.measure("max_refinement_drift", worst_drift);
    out.tables.push(table);
    Ok(out.decide(c_max.is_finite() && worst_drift < MAX_DRIFT))
}
