//! The free evolution `P_t f = p(t, ·) * f` and its rescaled companion
//! `P*_t f(x) = t^{d/α} (P_t f)(t^{1/α} x)`.
//!
//! `P_t` acts on the periodic box as the Fourier multiplier `e^{-t|ξ|^α}`;
//! [`apply_direct`] evaluates the free-space convolution by quadrature and
//! exists to measure what periodization costs.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{self, rescale_star, Field, Grid, MaskedField};
use crate::kernel::StableKernel;

/// `|ξ|^α` on every spectral index of a grid.
#[derive(Debug, Clone)]
pub struct Symbol {
    pub grid: Grid,
    pub alpha: f64,
    values: Vec<f64>,
}

impl Symbol {
    pub fn new(grid: Grid, alpha: f64) -> Self {
        let values = grid
            .frequency_norms()
            .into_iter()
            .map(|k| k.powf(alpha))
            .collect();
        Symbol {
            grid,
            alpha,
            values,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `e^{-t|ξ|^α}` in storage order.
    pub fn multiplier(&self, t: f64) -> Vec<f64> {
        self.values.iter().map(|s| (-t * s).exp()).collect()
    }

    /// Multiply spectral data in place by `e^{-t|ξ|^α}`.
    pub fn evolve(&self, data: &mut [Complex64], t: f64) {
        data.par_iter_mut()
            .zip(self.values.par_iter())
            .for_each(|(c, s)| *c *= (-t * s).exp());
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("evolution time must be >= 0, got {t}")))
    }
}

/// `P_t f` on the periodic grid; the result is stamped `f.time + t`.
pub fn apply(f: &Field, t: f64, alpha: f64) -> Result<Field> {
    check_time(t)?;
    apply_with(&Symbol::new(f.grid, alpha), f, t)
}

/// [`apply`] with a precomputed symbol.
pub fn apply_with(symbol: &Symbol, f: &Field, t: f64) -> Result<Field> {
    check_time(t)?;
    if symbol.grid != f.grid {
        return Err(Error::SizeMismatch("symbol and field grids differ".into()));
    }
    if t == 0.0 {
        return Ok(f.clone());
    }
    let mut data: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    grid::forward(&f.grid, &mut data);
    symbol.evolve(&mut data, t);
    grid::inverse(&f.grid, &mut data);
    Ok(Field {
        grid: f.grid,
        values: data.into_iter().map(|c| c.re).collect(),
        time: f.time + t,
    })
}

/// `P*_t u0`: evolve for `t`, then rescale by `t`.
pub fn apply_star(u0: &Field, t: f64, alpha: f64) -> Result<MaskedField> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("P*_t needs t > 0, got {t}")));
    }
    let mut evolved = apply(u0, t, alpha)?;
    evolved.time = t;
    let mut out = rescale_star(&evolved, alpha)?;
    out.field.time = u0.time + t;
    Ok(out)
}

/// Free-space `∫ p(t, x - y) f(y) dy` at one point, by the rectangle rule
/// over the lattice with no periodic images.
pub fn convolve_at(kernel: &StableKernel, f: &Field, t: f64, x: [f64; 2]) -> f64 {
    let g = f.grid;
    let mut acc = 0.0;
    for (idx, &v) in f.values.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let y = g.point(idx);
        let (dx, dy) = (x[0] - y[0], x[1] - y[1]);
        acc += v * kernel.density_radial(t, (dx * dx + dy * dy).sqrt());
    }
    acc * g.cell_volume()
}

/// Free-space `P_t f` at every lattice point, `O(n^{2d})`.
pub fn apply_direct(f: &Field, t: f64, kernel: &StableKernel) -> Result<Field> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("direct evolution needs t > 0, got {t}")));
    }
    if kernel.params().dim != f.grid.dim {
        return Err(Error::SizeMismatch("kernel and grid dimensions differ".into()));
    }
    let g = f.grid;
    let values = (0..g.len())
        .into_par_iter()
        .map(|idx| convolve_at(kernel, f, t, g.point(idx)))
        .collect();
    Ok(Field {
        grid: g,
        values,
        time: f.time + t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{lp_norm, make_u0, InitialDatumSpec};
    use crate::kernel::StabilityParams;
    use proptest::prelude::*;

    fn kernel(alpha: f64, dim: usize) -> StableKernel {
        StableKernel::new(StabilityParams::new(alpha, dim).unwrap()).unwrap()
    }

    #[test]
    fn zero_time_and_constants_are_fixed() {
        let g = Grid::new(1, 5.0, 64).unwrap();
        let f = make_u0(&InitialDatumSpec::gaussian(1.0, 1.0), &g).unwrap();
        assert_eq!(apply(&f, 0.0, 1.5).unwrap(), f);
        let c = Field::from_fn(g, 0.0, |_| 0.7);
        let e = apply(&c, 3.0, 1.5).unwrap();
        assert!(e.values.iter().all(|v| (v - 0.7).abs() < 1e-14));
        assert_eq!(e.time, 3.0);
        assert!(apply(&f, -1.0, 1.5).is_err());
    }

    #[test]
    fn kernel_snapshot_evolves_by_semigroup_law() {
        let k = kernel(1.5, 1);
        let g = Grid::new(1, 400.0, 16384).unwrap();
        let (s, t) = (0.5, 1.0);
        let ps = Field::from_fn(g, s, |p| k.density_radial(s, p[0].abs()));
        let evolved = apply(&ps, t, 1.5).unwrap();
        let peak = k.density_radial(s + t, 0.0);
        let (mut worst, mut worst_core): (f64, f64) = (0.0, 0.0);
        for (idx, v) in evolved.values.iter().enumerate() {
            let r = g.radius(idx);
            let exact = k.density_radial(s + t, r);
            worst = worst.max((v - exact).abs() / peak);
            if r <= 2.0 * (s + t).powf(1.0 / 1.5) {
                worst_core = worst_core.max(((v - exact) / exact).abs());
            }
        }
        assert!(worst_core < 1e-6, "worst relative error {worst_core:e}");
        assert!(worst < 1e-6, "worst error relative to peak {worst:e}");
    }

    #[test]
    fn gaussian_heat_flow_matches_closed_form_directly() {
        let k = kernel(2.0, 1);
        let g = Grid::new(1, 12.0, 256).unwrap();
        let f = make_u0(&InitialDatumSpec::gaussian(1.0, 1.0), &g).unwrap();
        let t = 0.5;
        let direct = apply_direct(&f, t, &k).unwrap();
        // N(0, 1) convolved with N(0, 2t)
        let var = 1.0 + 2.0 * t;
        for (idx, v) in direct.values.iter().enumerate() {
            let x = g.coord(idx);
            let exact = (-x * x / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
            assert!((v - exact).abs() < 1e-6, "x={x} {v} {exact}");
        }
        let spectral = apply(&f, t, 2.0).unwrap();
        assert!(spectral.sup_distance(&direct).unwrap() < 1e-6);
    }

    #[test]
    fn direct_and_spectral_agree_on_adequate_box() {
        let k = kernel(1.5, 1);
        let g = Grid::new(1, 400.0, 4096).unwrap();
        let f = make_u0(&InitialDatumSpec::gaussian(1.0, 1.0), &g).unwrap();
        let t = 1.0;
        let spectral = apply(&f, t, 1.5).unwrap();
        let direct = apply_direct(&f, t, &k).unwrap();
        let gap = spectral.sup_distance(&direct).unwrap();
        assert!(gap < 1e-4 * spectral.max(), "gap {gap:e}");
    }

    #[test]
    fn direct_evolution_tends_to_identity() {
        let k = kernel(1.5, 1);
        let g = Grid::new(1, 10.0, 1024).unwrap();
        let f = make_u0(&InitialDatumSpec::gaussian(1.0, 1.0), &g).unwrap();
        let h = g.spacing();
        // the gap is t |Δ^{α/2} f| to first order
        let symbol = Symbol::new(g, 1.5);
        let mut data: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        grid::forward(&g, &mut data);
        data.iter_mut().zip(symbol.values()).for_each(|(c, s)| *c *= s);
        grid::inverse(&g, &mut data);
        let generator = data.iter().fold(0.0f64, |m, c| m.max(c.re.abs()));
        let mut prev = f64::INFINITY;
        for m in [40.0, 20.0, 10.0, 5.0] {
            let t = (m * h).powf(1.5);
            let gap = apply_direct(&f, t, &k).unwrap().sup_distance(&f).unwrap();
            assert!(gap < prev / 2.0, "{gap} {prev}");
            prev = gap;
            if m == 5.0 {
                assert!((gap / t - generator).abs() < 0.1 * generator, "{} {generator}", gap / t);
            }
        }
    }

    #[test]
    fn apply_star_of_near_delta_is_unit_profile() {
        let k = kernel(1.5, 1);
        let g = Grid::new(1, 200.0, 16384).unwrap();
        let eps = 1e-3;
        let u0 = Field::from_fn(g, 0.0, |p| k.density_radial(eps, p[0].abs()));
        let m0 = u0.integral();
        let t = 1.0;
        let star = apply_star(&u0, t, 1.5).unwrap();
        for idx in (0..g.len()).step_by(97) {
            let r = g.radius(idx);
            if r < 20.0 {
                let exact = k.density_radial(t + eps, r) * m0;
                assert!((star.field.values[idx] - exact).abs() < 2e-3 * exact);
                let coarse = k.density_radial(1.0, r) * m0;
                assert!((star.field.values[idx] - coarse).abs() < 5e-3 * coarse);
            }
        }
        let m = lp_norm(&star.field, 1.0).unwrap();
        assert!((m - m0).abs() < 1e-6 * m0);
    }

    #[test]
    fn apply_star_at_unit_scale_is_apply() {
        let g = Grid::new(2, 8.0, 64).unwrap();
        let f = make_u0(&InitialDatumSpec::gaussian(1.0, 1.0), &g).unwrap();
        let star = apply_star(&f, 1.0, 1.5).unwrap();
        let plain = apply(&f, 1.0, 1.5).unwrap();
        assert_eq!(star.field.values, plain.values);
    }

    #[test]
    fn sup_norm_decays_like_kernel_peak() {
        let g = Grid::new(1, 400.0, 8192).unwrap();
        let f = make_u0(&InitialDatumSpec::gaussian(1.0, 0.5), &g).unwrap();
        let mut cs = Vec::new();
        for t in [1.0, 4.0, 16.0, 64.0] {
            let e = apply(&f, t, 1.5).unwrap();
            cs.push(lp_norm(&e, f64::INFINITY).unwrap() * t.powf(1.0 / 1.5));
        }
        let peak = k_peak();
        for c in &cs {
            assert!(c.is_finite() && *c <= 1.01 * peak, "{cs:?}");
        }
        assert!((cs[3] - peak).abs() < 0.01 * peak, "{cs:?}");
    }

    fn k_peak() -> f64 {
        kernel(1.5, 1).density_radial(1.0, 0.0)
    }

    fn smooth_datum() -> impl Strategy<Value = (Field, f64, f64)> {
        (0.5f64..2.0, 0.2f64..3.0, 0.01f64..2.0, 1.1f64..2.0).prop_map(|(w, c, t, alpha)| {
            let g = Grid::new(1, 30.0, 1024).unwrap();
            let spec = InitialDatumSpec {
                center: vec![c],
                ..InitialDatumSpec::gaussian(1.0, w)
            };
            (make_u0(&spec, &g).unwrap(), t, alpha)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn semigroup_law((f, t, alpha) in smooth_datum(), s in 0.01f64..2.0) {
            let two = apply(&apply(&f, s, alpha).unwrap(), t, alpha).unwrap();
            let one = apply(&f, s + t, alpha).unwrap();
            let err = lp_norm(&two.difference(&one).unwrap(), 2.0).unwrap();
            prop_assert!(err <= 1e-12 * lp_norm(&one, 2.0).unwrap());
        }

        #[test]
        fn positivity_and_mass((f, t, alpha) in smooth_datum()) {
            let e = apply(&f, t, alpha).unwrap();
            prop_assert!(e.min() >= -1e-12 * f.max());
            let m0 = lp_norm(&f, 1.0).unwrap();
            prop_assert!((e.integral() - m0).abs() <= 1e-12 * m0);
        }
    }
}
