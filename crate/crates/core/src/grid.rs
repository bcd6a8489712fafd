//! Periodic lattice on `[-L, L)^d`, fields sampled on it, the FFT pair,
//! discrete norms, shape-preserving interpolation and initial data.
//!
//! Storage is row-major: in two dimensions the value at `(x_i, y_j)` sits at
//! index `j * n + i`. The forward transform is unnormalized, the inverse
//! carries `1/n^d`, and index `k` corresponds to `ξ = π k / L` with `k`
//! taken in `[-n/2, n/2)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::StableKernel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub half_width: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(dim: usize, half_width: f64, n: usize) -> Result<Self> {
        let mut problems = Vec::new();
        if !(1..=2).contains(&dim) {
            problems.push(format!("grid dimension {dim} is not supported (1 or 2)"));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            problems.push(format!("grid.L must be positive, got {half_width}"));
        }
        if n < 8 || !n.is_power_of_two() {
            problems.push(format!("grid.n must be a power of two >= 8, got {n}"));
        }
        if problems.is_empty() {
            Ok(Grid { dim, half_width, n })
        } else {
            Err(Error::Validation(problems))
        }
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Number of lattice points, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of lattice index `i` along one axis.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    /// Coordinates of the lattice point with flat index `idx`.
    #[inline]
    pub fn point(&self, idx: usize) -> [f64; 2] {
        match self.dim {
            1 => [self.coord(idx), 0.0],
            _ => [self.coord(idx % self.n), self.coord(idx / self.n)],
        }
    }

    /// Euclidean norm of the lattice point with flat index `idx`.
    #[inline]
    pub fn radius(&self, idx: usize) -> f64 {
        let p = self.point(idx);
        (p[0] * p[0] + p[1] * p[1]).sqrt()
    }

    /// Signed frequency index in `[-n/2, n/2)`.
    #[inline]
    pub fn signed_index(&self, k: usize) -> i64 {
        let n = self.n as i64;
        let k = k as i64;
        if k < n / 2 {
            k
        } else {
            k - n
        }
    }

    /// `ξ = π k / L` for storage index `k` along one axis.
    #[inline]
    pub fn frequency(&self, k: usize) -> f64 {
        PI * self.signed_index(k) as f64 / self.half_width
    }

    /// `|ξ|` for every spectral index, in storage order.
    pub fn frequency_norms(&self) -> Vec<f64> {
        let n = self.n;
        match self.dim {
            1 => (0..n).map(|k| self.frequency(k).abs()).collect(),
            _ => (0..n * n)
                .map(|idx| {
                    let (kx, ky) = (self.frequency(idx % n), self.frequency(idx / n));
                    (kx * kx + ky * ky).sqrt()
                })
                .collect(),
        }
    }

    fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::SizeMismatch(format!(
                "grids differ: {self:?} vs {other:?}"
            )))
        }
    }
}

/// A real function sampled on a grid at time `time`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Field {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub time: f64,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::SizeMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at index {i}")));
        }
        Ok(Field { grid, values, time })
    }

    pub fn zeros(grid: Grid, time: f64) -> Self {
        Field {
            grid,
            values: vec![0.0; grid.len()],
            time,
        }
    }

    /// Sample `f(x)` at every lattice point.
    pub fn from_fn<F: Fn([f64; 2]) -> f64 + Sync>(grid: Grid, time: f64, f: F) -> Self {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|idx| f(grid.point(idx)))
            .collect();
        Field { grid, values, time }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Signed discrete integral `h^d Σ u`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn scaled(&self, c: f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|v| c * v).collect(),
            time: self.time,
        }
    }

    /// `self - other`, keeping the time stamp of `self`.
    pub fn difference(&self, other: &Field) -> Result<Field> {
        self.grid.check_same(&other.grid)?;
        Ok(Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
            time: self.time,
        })
    }

    pub fn sup_distance(&self, other: &Field) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

/// Discrete Fourier coefficients of a real field.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub grid: Grid,
    pub coeffs: Vec<Complex64>,
}

type PlanCache = Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>;

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<PlanCache> = OnceLock::new();
    let plans = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = plans.lock().expect("fft plan cache poisoned");
    guard
        .entry((n, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            }
        })
        .clone()
}

fn transform_rows(data: &mut [Complex64], n: usize, fft: &Arc<dyn Fft<f64>>) {
    if data.len() == n {
        fft.process(data);
    } else {
        data.par_chunks_mut(n).for_each(|row| fft.process(row));
    }
}

fn transpose(data: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = data[j * n + i];
        }
    });
    out
}

fn transform_in_place(grid: &Grid, data: &mut Vec<Complex64>, inverse: bool) {
    let n = grid.n;
    let fft = plan(n, inverse);
    transform_rows(data, n, &fft);
    if grid.dim == 2 {
        let mut t = transpose(data, n);
        transform_rows(&mut t, n, &fft);
        *data = transpose(&t, n);
    }
    if inverse {
        let scale = 1.0 / grid.len() as f64;
        data.par_iter_mut().for_each(|c| *c *= scale);
    }
}

/// Forward transform of raw complex data laid out on `grid`.
pub fn forward(grid: &Grid, data: &mut Vec<Complex64>) {
    transform_in_place(grid, data, false);
}

/// Inverse transform (including the `1/n^d` factor).
pub fn inverse(grid: &Grid, data: &mut Vec<Complex64>) {
    transform_in_place(grid, data, true);
}

pub fn to_spectral(f: &Field) -> Spectrum {
    let mut coeffs: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    forward(&f.grid, &mut coeffs);
    Spectrum {
        grid: f.grid,
        coeffs,
    }
}

pub fn from_spectral(s: &Spectrum, time: f64) -> Result<Field> {
    if s.coeffs.len() != s.grid.len() {
        return Err(Error::SizeMismatch(format!(
            "{} coefficients for a grid of {} points",
            s.coeffs.len(),
            s.grid.len()
        )));
    }
    let mut data = s.coeffs.clone();
    inverse(&s.grid, &mut data);
    Ok(Field {
        grid: s.grid,
        values: data.into_iter().map(|c| c.re).collect(),
        time,
    })
}

/// Discrete `L^p` norm `(h^d Σ |u|^p)^{1/p}`; `p = ∞` gives the max.
pub fn lp_norm(f: &Field, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("L^p norm needs p >= 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(f.values.iter().fold(0.0, |m: f64, v| m.max(v.abs())));
    }
    let vol = f.grid.cell_volume();
    let sum: f64 = if p == 1.0 {
        f.values.iter().map(|v| v.abs()).sum()
    } else if p == 2.0 {
        f.values.iter().map(|v| v * v).sum()
    } else {
        f.values.iter().map(|v| v.abs().powf(p)).sum()
    };
    Ok((sum * vol).powf(1.0 / p))
}

/// Shape-preserving slope at the middle of three equally spaced samples.
#[inline]
fn pchip_slope(left: f64, right: f64) -> f64 {
    if left * right <= 0.0 {
        0.0
    } else {
        2.0 * left * right / (left + right)
    }
}

/// End slope from the two adjacent secants, limited to keep monotonicity.
#[inline]
fn pchip_end_slope(near: f64, far: f64) -> f64 {
    let d = 0.5 * (3.0 * near - far);
    if d * near <= 0.0 {
        0.0
    } else if near * far < 0.0 && d.abs() > 3.0 * near.abs() {
        3.0 * near
    } else {
        d
    }
}

/// Monotone cubic on the cell between `y[1]` and `y[2]` of the stencil
/// `y[0..4]` at fractional position `s`; `None` marks a missing neighbour.
fn pchip_cell(y: [Option<f64>; 4], s: f64) -> f64 {
    let y1 = y[1].expect("cell start");
    let y2 = y[2].expect("cell end");
    let mid = y2 - y1;
    let m1 = match y[0] {
        Some(y0) => pchip_slope(y1 - y0, mid),
        None => match y[3] {
            Some(y3) => pchip_end_slope(mid, y3 - y2),
            None => mid,
        },
    };
    let m2 = match y[3] {
        Some(y3) => pchip_slope(mid, y3 - y2),
        None => match y[0] {
            Some(y0) => pchip_end_slope(mid, y1 - y0),
            None => mid,
        },
    };
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y1
        + (s3 - 2.0 * s2 + s) * m1
        + (-2.0 * s3 + 3.0 * s2) * y2
        + (s3 - s2) * m2
}

/// Locate `x` along one axis: cell index in `[0, n-2]` and offset in `[0, 1]`.
#[inline]
fn locate(grid: &Grid, x: f64) -> Option<(usize, f64)> {
    let h = grid.spacing();
    let u = (x + grid.half_width) / h;
    if !(u >= 0.0 && u <= (grid.n - 1) as f64) {
        return None;
    }
    let i = (u.floor() as usize).min(grid.n - 2);
    Some((i, u - i as f64))
}

fn stencil<F: Fn(usize) -> f64>(n: usize, i: usize, s: f64, at: F) -> f64 {
    if s == 0.0 {
        return at(i);
    }
    let y = [
        if i > 0 { Some(at(i - 1)) } else { None },
        Some(at(i)),
        Some(at(i + 1)),
        if i + 2 < n { Some(at(i + 2)) } else { None },
    ];
    pchip_cell(y, s)
}

fn interpolate_unchecked(f: &Field, x: &[f64]) -> Option<f64> {
    let n = f.grid.n;
    match f.grid.dim {
        1 => {
            let (i, s) = locate(&f.grid, x[0])?;
            Some(stencil(n, i, s, |k| f.values[k]))
        }
        _ => {
            let (i, s) = locate(&f.grid, x[0])?;
            let (j, t) = locate(&f.grid, x[1])?;
            let row = |jj: usize| stencil(n, i, s, |k| f.values[jj * n + k]);
            Some(stencil(n, j, t, row))
        }
    }
}

/// Monotone piecewise-cubic interpolation (tensor product in two
/// dimensions) inside `[-L, L-h]^d`.
pub fn interpolate(f: &Field, x: &[f64]) -> Result<f64> {
    if x.len() != f.grid.dim {
        return Err(Error::SizeMismatch(format!(
            "point has {} coordinates, grid dimension is {}",
            x.len(),
            f.grid.dim
        )));
    }
    interpolate_unchecked(f, x).ok_or_else(|| Error::OutOfDomain {
        point: x.to_vec(),
        half_width: f.grid.half_width,
        upper: f.grid.half_width - f.grid.spacing(),
    })
}

/// A field with a validity mask; masked entries hold zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaskedField {
    pub field: Field,
    pub valid: Vec<bool>,
    /// Half-width of the largest centred cube whose points are all valid.
    pub valid_half_width: f64,
}

impl MaskedField {
    pub fn masked_fraction(&self) -> f64 {
        self.valid.iter().filter(|v| !**v).count() as f64 / self.valid.len() as f64
    }
}

/// `u*(t, x) = t^{d/α} u(t, t^{1/α} x)` with `t = f.time`.
///
/// Points whose preimage leaves the box are masked.
pub fn rescale_star(f: &Field, alpha: f64) -> Result<MaskedField> {
    rescale_star_at(f, f.time, alpha)
}

/// As [`rescale_star`] with an explicit scaling time.
pub fn rescale_star_at(f: &Field, t: f64, alpha: f64) -> Result<MaskedField> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("rescaling needs t > 0, got {t}")));
    }
    let grid = f.grid;
    let stretch = t.powf(1.0 / alpha);
    let amp = t.powf(grid.dim as f64 / alpha);
    let out: Vec<Option<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let p = grid.point(idx);
            let y = [stretch * p[0], stretch * p[1]];
            interpolate_unchecked(f, &y[..grid.dim]).map(|v| amp * v)
        })
        .collect();
    let valid: Vec<bool> = out.iter().map(|v| v.is_some()).collect();
    let values = out.into_iter().map(|v| v.unwrap_or(0.0)).collect();
    let upper = grid.half_width - grid.spacing();
    Ok(MaskedField {
        field: Field {
            grid,
            values,
            time: f.time,
        },
        valid,
        valid_half_width: upper / stretch,
    })
}

/// `u*(t, ·)` sampled on its natural lattice: the box `[-L, L)^d` scaled
/// by `t^{-1/α}`, where every value is `t^{d/α}` times the stored one.
/// Unlike [`rescale_star`] nothing is interpolated or masked.
pub fn rescale_lattice(f: &Field, alpha: f64) -> Result<Field> {
    let t = f.time;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("rescaling needs t > 0, got {t}")));
    }
    let grid = Grid {
        half_width: f.grid.half_width * t.powf(-1.0 / alpha),
        ..f.grid
    };
    let mut out = f.scaled(t.powf(f.grid.dim as f64 / alpha));
    out.grid = grid;
    Ok(out)
}

/// Shape of an initial datum; every shape is centred at the datum centre
/// and rescaled to the requested mass after sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatumShape {
    /// `exp(-|x|²/(2w²))`.
    GaussianBump { width: f64 },
    /// Indicator of the half-open cube `[-w, w)^d`.
    BoxIndicator { width: f64 },
    /// `1/(1 + |x/w|^{d+γ})`.
    HeavyTail { width: f64, gamma: f64 },
    /// `exp(-1/(1-|x/w|²))` inside the ball of radius `w`.
    CompactBump { width: f64 },
    /// Explicit nonnegative lattice values.
    Samples { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDatumSpec {
    #[serde(flatten)]
    pub shape: DatumShape,
    pub mass: f64,
    #[serde(default)]
    pub center: Vec<f64>,
}

impl InitialDatumSpec {
    pub fn gaussian(mass: f64, width: f64) -> Self {
        InitialDatumSpec {
            shape: DatumShape::GaussianBump { width },
            mass,
            center: Vec::new(),
        }
    }

    pub fn width(&self) -> Option<f64> {
        match self.shape {
            DatumShape::GaussianBump { width }
            | DatumShape::BoxIndicator { width }
            | DatumShape::HeavyTail { width, .. }
            | DatumShape::CompactBump { width } => Some(width),
            DatumShape::Samples { .. } => None,
        }
    }

    /// Every violated constraint that can be checked without a grid.
    pub fn problems(&self, dim: usize) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            out.push(format!("datum.mass must be positive, got {}", self.mass));
        }
        if !self.center.is_empty() && self.center.len() != dim {
            out.push(format!(
                "datum.center has {} coordinates, dimension is {dim}",
                self.center.len()
            ));
        }
        if let Some(w) = self.width() {
            if !(w > 0.0 && w.is_finite()) {
                out.push(format!("datum.width must be positive, got {w}"));
            }
        }
        if let DatumShape::HeavyTail { gamma, .. } = self.shape {
            if !(gamma > 0.0) {
                out.push(format!("datum.gamma must be positive, got {gamma}"));
            }
        }
        if let DatumShape::Samples { values } = &self.shape {
            if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                out.push("datum samples must be finite and nonnegative".into());
            }
        }
        out
    }
}

/// Sample and mass-normalize an initial datum.
pub fn make_u0(spec: &InitialDatumSpec, grid: &Grid) -> Result<Field> {
    let problems = spec.problems(grid.dim);
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    let h = grid.spacing();
    if let Some(w) = spec.width() {
        if w < 4.0 * h {
            return Err(Error::Resolution(format!(
                "datum width {w} is below 4 grid spacings ({})",
                4.0 * h
            )));
        }
    }
    let c = [
        spec.center.first().copied().unwrap_or(0.0),
        spec.center.get(1).copied().unwrap_or(0.0),
    ];
    let d = grid.dim as f64;
    let raw = match &spec.shape {
        DatumShape::Samples { values } => Field::new(*grid, values.clone(), 0.0)?,
        shape => {
            let shape = shape.clone();
            Field::from_fn(*grid, 0.0, move |p| {
                let dx = [p[0] - c[0], p[1] - c[1]];
                let r2 = dx[0] * dx[0] + dx[1] * dx[1];
                match shape {
                    DatumShape::GaussianBump { width } => (-r2 / (2.0 * width * width)).exp(),
                    DatumShape::BoxIndicator { width } => {
                        let inside = dx.iter().all(|&v| v >= -width && v < width);
                        if inside {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    DatumShape::HeavyTail { width, gamma } => {
                        1.0 / (1.0 + (r2.sqrt() / width).powf(d + gamma))
                    }
                    DatumShape::CompactBump { width } => {
                        let rho2 = r2 / (width * width);
                        if rho2 < 1.0 {
                            (-1.0 / (1.0 - rho2)).exp()
                        } else {
                            0.0
                        }
                    }
                    DatumShape::Samples { .. } => unreachable!(),
                }
            })
        }
    };
    let mass = raw.integral();
    if !(mass > 0.0) {
        return Err(Error::Resolution(
            "datum has no mass on this grid".to_string(),
        ));
    }
    Ok(raw.scaled(spec.mass / mass))
}

/// Smallest half-width for which the free evolution of a datum of radius
/// `extent` keeps all but `budget` of its mass inside `[-L/2, L/2]^d` up to
/// `t_end`.
pub fn suggested_half_width(kernel: &StableKernel, t_end: f64, extent: f64, budget: f64) -> f64 {
    let mut r = kernel.switch_radius().max(1.0);
    while kernel.mass_beyond(1.0, r) > budget {
        r *= 1.1;
    }
    2.0 * (extent + r * t_end.powf(1.0 / kernel.params().alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid1(l: f64, n: usize) -> Grid {
        Grid::new(1, l, n).unwrap()
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(Grid::new(1, 1.0, 12).is_err());
        assert!(Grid::new(1, 1.0, 4).is_err());
        assert!(Grid::new(3, 1.0, 16).is_err());
        assert!(Grid::new(1, -1.0, 16).is_err());
    }

    #[test]
    fn constant_field_has_only_mean_mode() {
        for g in [grid1(3.0, 16), Grid::new(2, 3.0, 8).unwrap()] {
            let f = Field::from_fn(g, 0.0, |_| 2.5);
            let s = to_spectral(&f);
            assert!((s.coeffs[0].re - 2.5 * g.len() as f64).abs() < 1e-12);
            assert!(s.coeffs[1..].iter().all(|c| c.norm() < 1e-12));
        }
    }

    #[test]
    fn cosine_mode_is_one_symmetric_pair() {
        let g = grid1(PI, 32);
        let f = Field::from_fn(g, 0.0, |p| (3.0 * p[0]).cos());
        let s = to_spectral(&f);
        for (k, c) in s.coeffs.iter().enumerate() {
            // the lattice starts at -π, which flips the sign of odd modes
            let expect = if k == 3 || k == 29 { -16.0 } else { 0.0 };
            assert!((c.re - expect).abs() < 1e-12 && c.im.abs() < 1e-12, "k={k} {c}");
        }
        assert!((g.frequency(3) - 3.0).abs() < 1e-15);
        assert_eq!(g.signed_index(16), -16);
    }

    #[test]
    fn lp_norm_examples() {
        let g = grid1(4.0, 64);
        let zero = Field::zeros(g, 0.0);
        for p in [1.0, 2.0, 3.5, f64::INFINITY] {
            assert_eq!(lp_norm(&zero, p).unwrap(), 0.0);
        }
        let mut one = Field::zeros(g, 0.0);
        one.values[10] = 3.0;
        let h = g.spacing();
        assert!((lp_norm(&one, 2.0).unwrap() - h.sqrt() * 3.0).abs() < 1e-14);
        assert_eq!(lp_norm(&one, f64::INFINITY).unwrap(), 3.0);
        assert!(lp_norm(&one, 0.5).is_err());

        let gauss = Field::from_fn(grid1(40.0, 2048), 0.0, |p| {
            (-p[0] * p[0] / 2.0).exp() / (2.0 * PI).sqrt()
        });
        assert!((lp_norm(&gauss, 1.0).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn interpolation_is_exact_on_lattice_and_ramps() {
        let g = grid1(2.0, 32);
        let f = Field::from_fn(g, 0.0, |p| 3.0 * p[0] - 1.0);
        for i in 0..31 {
            let x = g.coord(i);
            assert_eq!(interpolate(&f, &[x]).unwrap(), f.values[i]);
            let xm = x + 0.37 * g.spacing();
            assert!((interpolate(&f, &[xm]).unwrap() - (3.0 * xm - 1.0)).abs() < 1e-12);
        }
        assert!(interpolate(&f, &[2.0 - 0.5 * g.spacing()]).is_err());
        assert!(interpolate(&f, &[-2.1]).is_err());

        let g2 = Grid::new(2, 2.0, 16).unwrap();
        let f2 = Field::from_fn(g2, 0.0, |p| p[0] - 2.0 * p[1]);
        let v = interpolate(&f2, &[0.31, -0.77]).unwrap();
        assert!((v - (0.31 + 1.54)).abs() < 1e-12);
    }

    #[test]
    fn interpolated_kernel_matches_density() {
        let kernel = StableKernel::new(crate::kernel::StabilityParams::new(1.5, 1).unwrap()).unwrap();
        let g = grid1(20.0, 4096);
        let f = Field::from_fn(g, 1.0, |p| kernel.density_radial(1.0, p[0].abs()));
        for &x in &[0.013, 0.5001, 1.2345, 3.3333, -7.77] {
            let v = interpolate(&f, &[x]).unwrap();
            let exact = kernel.density_radial(1.0, f64::abs(x));
            assert!((v - exact).abs() < 1e-5, "x={x} {v} {exact}");
        }
    }

    #[test]
    fn rescale_star_identity_and_kernel_snapshots() {
        let params = crate::kernel::StabilityParams::new(1.5, 1).unwrap();
        let kernel = StableKernel::new(params).unwrap();
        let g = grid1(60.0, 16384);
        let f1 = Field::from_fn(g, 1.0, |p| kernel.density_radial(1.0, p[0].abs()));
        let star = rescale_star(&f1, 1.5).unwrap();
        assert!(star.valid.iter().all(|&v| v));
        assert_eq!(star.field.values, f1.values);
        for t in [0.1, 0.5, 2.0, 8.0] {
            let ft = Field::from_fn(g, t, |p| kernel.density_radial(t, p[0].abs()));
            let star = rescale_star(&ft, 1.5).unwrap();
            let mut worst: f64 = 0.0;
            for idx in 0..g.len() {
                if star.valid[idx] {
                    let exact = kernel.density_radial(1.0, g.radius(idx));
                    worst = worst.max((star.field.values[idx] - exact).abs());
                }
            }
            assert!(worst < 1e-5, "t={t} worst={worst:e}");
        }
    }

    #[test]
    fn rescale_star_preserves_mass() {
        let g = grid1(40.0, 4096);
        let spec = InitialDatumSpec::gaussian(1.0, 1.0);
        let mut f = make_u0(&spec, &g).unwrap();
        f.time = 2.0;
        let star = rescale_star(&f, 1.5).unwrap();
        let m = lp_norm(&star.field, 1.0).unwrap();
        assert!((m - 1.0).abs() < 1e-6, "{m}");
    }

    #[test]
    fn rescale_star_masks_points_leaving_the_box() {
        let g = grid1(10.0, 64);
        let f = Field::from_fn(g, 4.0, |_| 1.0);
        let star = rescale_star(&f, 2.0).unwrap();
        assert!(star.masked_fraction() > 0.4 && star.masked_fraction() < 0.6);
        assert!(rescale_star_at(&f, 0.0, 2.0).is_err());
    }

    #[test]
    fn datum_examples() {
        let g = grid1(40.0, 2048);
        let u = make_u0(&InitialDatumSpec::gaussian(1.0, 1.0), &g).unwrap();
        assert!((lp_norm(&u, 1.0).unwrap() - 1.0).abs() < 1e-10);

        let g = grid1(8.0, 256);
        let spec = InitialDatumSpec {
            shape: DatumShape::BoxIndicator { width: 1.0 },
            mass: 2.0,
            center: vec![],
        };
        let u = make_u0(&spec, &g).unwrap();
        assert!((u.integral() - 2.0).abs() < 1e-12);
        for (i, v) in u.values.iter().enumerate() {
            let x = g.coord(i);
            let expect = if (-1.0..1.0).contains(&x) { 1.0 } else { 0.0 };
            assert!((v - expect).abs() < 1e-12);
        }

        let spec = InitialDatumSpec {
            shape: DatumShape::HeavyTail { width: 1.0, gamma: 0.75 },
            mass: 1.0,
            center: vec![],
        };
        let u = make_u0(&spec, &g).unwrap();
        let c = u.values[128];
        for (i, v) in u.values.iter().enumerate() {
            let x = g.coord(i);
            assert!((v - c / (1.0 + x.abs().powf(1.75))).abs() < 1e-14);
        }

        let narrow = InitialDatumSpec::gaussian(1.0, 0.1);
        assert!(matches!(make_u0(&narrow, &g), Err(Error::Resolution(_))));
        let bad = InitialDatumSpec::gaussian(-1.0, 1.0);
        assert!(matches!(make_u0(&bad, &g), Err(Error::Validation(_))));
    }

    #[test]
    fn suggested_width_meets_budget() {
        let kernel = StableKernel::new(crate::kernel::StabilityParams::new(1.5, 1).unwrap()).unwrap();
        let l = suggested_half_width(&kernel, 1.0, 0.0, 1e-4);
        assert!(kernel.mass_beyond(1.0, l / 2.0) <= 1e-4);
        assert!(kernel.mass_beyond(1.0, l / 2.0 / 1.2) > 1e-4);
    }

    fn field_strategy() -> impl Strategy<Value = Field> {
        (prop::sample::select(vec![1usize, 2]), prop::sample::select(vec![8usize, 16, 32]))
            .prop_flat_map(|(dim, n)| {
                let g = Grid::new(dim, 3.0, n).unwrap();
                prop::collection::vec(-5.0f64..5.0, g.len())
                    .prop_map(move |v| Field::new(g, v, 0.0).unwrap())
            })
    }

    proptest! {
        #[test]
        fn transform_round_trip(f in field_strategy()) {
            let back = from_spectral(&to_spectral(&f), f.time).unwrap();
            let err = lp_norm(&back.difference(&f).unwrap(), 2.0).unwrap();
            let size = lp_norm(&f, 2.0).unwrap();
            prop_assert!(err <= 1e-12 * size.max(1e-300));
        }

        #[test]
        fn spectrum_is_conjugate_symmetric(f in field_strategy()) {
            let s = to_spectral(&f);
            let g = f.grid;
            let n = g.n;
            for idx in 0..g.len() {
                let (i, j) = (idx % n, idx / n);
                let mirror = if g.dim == 1 { (n - i) % n } else { ((n - j) % n) * n + (n - i) % n };
                prop_assert!((s.coeffs[idx] - s.coeffs[mirror].conj()).norm() < 1e-10);
            }
        }

        #[test]
        fn lp_interpolation_inequality(f in field_strategy(), p in 1.0f64..8.0) {
            let lp = lp_norm(&f, p).unwrap();
            let l1 = lp_norm(&f, 1.0).unwrap();
            let linf = lp_norm(&f, f64::INFINITY).unwrap();
            prop_assert!(lp <= linf.powf(1.0 - 1.0 / p) * l1.powf(1.0 / p) + 1e-12);
        }

        #[test]
        fn lp_norm_is_monotone_under_domination(f in field_strategy(), p in 1.0f64..6.0) {
            let bigger = Field::new(f.grid, f.values.iter().map(|v| v.abs() + 0.1).collect(), 0.0).unwrap();
            prop_assert!(lp_norm(&f, p).unwrap() <= lp_norm(&bigger, p).unwrap());
        }

        #[test]
        fn interpolation_does_not_overshoot(f in field_strategy(), s in 0.0f64..1.0, t in 0.0f64..1.0, cell in 0usize..7) {
            let g = f.grid;
            let h = g.spacing();
            let (x, y) = (g.coord(cell) + s * h, g.coord(cell) + t * h);
            let pt: Vec<f64> = if g.dim == 1 { vec![x] } else { vec![x, y] };
            let v = interpolate(&f, &pt).unwrap();
            let n = g.n;
            let corners: Vec<f64> = if g.dim == 1 {
                vec![f.values[cell], f.values[cell + 1]]
            } else {
                let mut c = Vec::new();
                for jj in cell.saturating_sub(1)..(cell + 3).min(n) {
                    for ii in cell.saturating_sub(1)..(cell + 3).min(n) {
                        c.push(f.values[jj * n + ii]);
                    }
                }
                c
            };
            let lo = corners.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = corners.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let slack = 1e-12 * (hi - lo).max(1.0);
            prop_assert!(v >= lo - slack && v <= hi + slack, "{v} not in [{lo}, {hi}]");
        }
    }
}
