use crate::error::{Error, Result};
use crate::grid::{lp_norm, rescale_lattice, DatumShape, Field};
use crate::semigroup::{apply_with, Symbol};
use crate::solver::{solve, SolverConfig, Trajectory};

use super::{
    ratio_field, relative_change, relative_spread, CheckResult, RateFit, RatioReport, Table,
    DEFAULT_FLOOR,
};

/// The small-time sweep.
pub const SMALL_TIMES: [f64; 5] = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1];

/// Exact-value tolerance for configurations where a check is trivial.
const TRIVIAL_TOL: f64 = 1e-8;

/// Snapshots with `t > 0` paired with `P_t u_0` on the same grid.
fn with_references(traj: &Trajectory) -> Result<Vec<(&Field, Field)>> {
    let symbol = Symbol::new(traj.initial.grid, traj.config.params.alpha);
    traj.snapshots
        .iter()
        .filter(|u| u.time > 0.0)
        .map(|u| {
            let reference = apply_with(&symbol, &traj.initial, u.time - traj.initial.time)?;
            Ok((u, reference))
        })
        .collect()
}

fn snapshot_pairs<'a>(
    pairs: &'a [(&'a Field, Field)],
    times: &[f64],
) -> Result<Vec<&'a (&'a Field, Field)>> {
    times
        .iter()
        .map(|&t| {
            pairs
                .iter()
                .find(|(u, _)| (u.time - t).abs() <= 1e-12 * t.max(1.0))
                .ok_or_else(|| Error::Precondition(format!("no snapshot saved at t = {t}")))
        })
        .collect()
}

fn is_linear(cfg: &SolverConfig) -> bool {
    cfg.drift_norm() == 0.0
}

fn rerun(cfg: &SolverConfig, change: impl FnOnce(&mut SolverConfig)) -> Result<Trajectory> {
    let mut c = cfg.clone();
    change(&mut c);
    solve(&c)
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// One row per saved time `t > 0`, comparing `u(t)` with `P_t u_0`.
pub fn ratio_report(traj: &Trajectory, floor: f64) -> Result<RatioReport> {
    let rows = with_references(traj)?
        .iter()
        .map(|(u, r)| ratio_field(u, r, floor).map(|(_, row)| row))
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Err(Error::Precondition("trajectory has no snapshot with t > 0".into()));
    }
    Ok(RatioReport::from_rows(rows))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoSidedOptions {
    pub floor: f64,
    /// Repeat the run with `2n` points per axis.
    pub refine: bool,
    /// Multiples of the datum mass for the lower-bound sweep, largest first.
    pub epsilons: Vec<f64>,
}

impl Default for TwoSidedOptions {
    fn default() -> Self {
        TwoSidedOptions {
            floor: DEFAULT_FLOOR,
            refine: true,
            epsilons: vec![1.0, 0.3, 0.1, 0.03],
        }
    }
}

/// `C⁻¹ P_t u_0 ≤ u(t) ≤ C P_t u_0` over the saved times.
pub fn check_two_sided(traj: &Trajectory, opts: &TwoSidedOptions) -> Result<CheckResult> {
    const MAX_MASKED: f64 = 0.05;
    const MAX_DRIFT: f64 = 0.10;
    let cfg = &traj.config;
    let report = ratio_report(traj, opts.floor)?;
    let mut out = CheckResult::new("two_sided")
        .param("floor", opts.floor)
        .param("refine", opts.refine)
        .param("epsilons", &opts.epsilons);
    out.measure("c_emp", report.c_emp);
    out.measure("max_masked_fraction", report.max_masked_fraction());
    out.tolerate("max_masked_fraction", MAX_MASKED);
    out.tables.push(report.table("ratio_report"));

    if is_linear(cfg) {
        out.tolerate("c_emp_minus_one", TRIVIAL_TOL);
        return Ok(out.decide_trivial((report.c_emp - 1.0).abs() <= TRIVIAL_TOL));
    }

    let mut pass = report.c_emp.is_finite() && report.max_masked_fraction() < MAX_MASKED;
    if opts.refine {
        if matches!(cfg.datum.shape, DatumShape::Samples { .. }) {
            return Err(Error::Precondition(
                "grid refinement needs an analytic datum, not lattice samples".into(),
            ));
        }
        let fine = rerun(cfg, |c| c.grid.n *= 2)?;
        let fine_report = ratio_report(&fine, opts.floor)?;
        let drift = relative_change(report.c_emp, fine_report.c_emp);
        out.measure("c_emp_refined", fine_report.c_emp);
        out.measure("refinement_drift", drift);
        out.tolerate("refinement_drift", MAX_DRIFT);
        pass &= drift < MAX_DRIFT && fine_report.max_masked_fraction() < MAX_MASKED;
    }
    if !opts.epsilons.is_empty() {
        let mut table = Table::new("epsilon_sweep", &["epsilon", "c_emp"]);
        let mut excess = Vec::new();
        for &eps in &opts.epsilons {
            let c = if eps == 1.0 {
                report.c_emp
            } else {
                let run = rerun(cfg, |c| c.datum.mass *= eps)?;
                ratio_report(&run, opts.floor)?.c_emp
            };
            table.push(vec![eps, c]);
            excess.push(c - 1.0);
        }
        let monotone = strictly_decreasing(&excess) && excess.iter().all(|e| *e >= 0.0);
        out.measure("c_emp_by_epsilon", table.column("c_emp"));
        out.measure("epsilon_monotone", monotone);
        out.tables.push(table);
        pass &= monotone;
    }
    Ok(out.decide(pass))
}

/// `e(t) = sup |u/P_t u_0 - 1|` must shrink as `t → 0`.
pub fn check_small_time(traj: &Trajectory, times: &[f64], floor: f64) -> Result<CheckResult> {
    const SHRINK: f64 = 3.0;
    if times.len() < 4 {
        return Err(Error::Precondition(format!(
            "small-time sweep needs at least 4 times, got {}",
            times.len()
        )));
    }
    let pairs = with_references(traj)?;
    let chosen = snapshot_pairs(&pairs, times)?;
    let mut table = Table::new("small_time", &["t", "e", "masked_fraction"]);
    let mut e = Vec::new();
    for (u, r) in chosen {
        let (_, row) = ratio_field(u, r, floor)?;
        table.push(vec![row.t, row.max_deviation, row.masked_fraction]);
        e.push(row.max_deviation);
    }
    let mut out = CheckResult::new("small_time")
        .param("times", times)
        .param("floor", floor);
    out.measure("e", &e);
    out.tables.push(table);
    if is_linear(&traj.config) {
        out.tolerate("e", TRIVIAL_TOL);
        let exact = e.iter().all(|v| *v <= TRIVIAL_TOL);
        return Ok(out.decide_trivial(exact));
    }
    let monotone = strictly_increasing(&e);
    let shrink = e[e.len() - 1] / e[0];
    out.measure("monotone", monotone);
    out.measure("shrink_factor", shrink);
    out.tolerate("shrink_factor_min", SHRINK);
    Ok(out.decide(monotone && shrink > SHRINK))
}

/// `E(R) = sup_t sup_{|x|>R} |u/P_t u_0 - 1|` must shrink as `R` grows.
pub fn check_large_x(traj: &Trajectory, radii: &[f64], floor: f64) -> Result<CheckResult> {
    const SHRINK: f64 = 3.0;
    let pairs = with_references(traj)?;
    let grid = traj.initial.grid;
    let mut sup_by_radius = vec![f64::NEG_INFINITY; radii.len()];
    for (u, r) in &pairs {
        let (ratio, _) = ratio_field(u, r, floor)?;
        for idx in 0..grid.len() {
            if !ratio.valid[idx] {
                continue;
            }
            let dev = (ratio.field.values[idx] - 1.0).abs();
            let rad = grid.radius(idx);
            for (k, &big_r) in radii.iter().enumerate() {
                if rad > big_r {
                    sup_by_radius[k] = sup_by_radius[k].max(dev);
                }
            }
        }
    }
    let mut out = CheckResult::new("large_x")
        .param("radii", radii)
        .param("floor", floor)
        .param("times", pairs.iter().map(|(u, _)| u.time).collect::<Vec<_>>());
    let mut table = Table::new("large_x", &["R", "E"]);
    let mut kept = Vec::new();
    for (&big_r, &e) in radii.iter().zip(&sup_by_radius) {
        if e.is_finite() {
            table.push(vec![big_r, e]);
            kept.push((big_r, e));
        } else {
            out.note(format!("no unmasked point beyond R = {big_r}; radius dropped"));
        }
    }
    if kept.len() < 2 {
        return Err(Error::Precondition(
            "fewer than two radii have unmasked points beyond them".into(),
        ));
    }
    let e: Vec<f64> = kept.iter().map(|k| k.1).collect();
    out.measure("radii_used", kept.iter().map(|k| k.0).collect::<Vec<_>>());
    out.measure("E", &e);
    out.tables.push(table);
    if is_linear(&traj.config) {
        out.tolerate("E", TRIVIAL_TOL);
        let exact = e.iter().all(|v| *v <= TRIVIAL_TOL);
        return Ok(out.decide_trivial(exact));
    }
    let monotone = strictly_decreasing(&e);
    let shrink = e[0] / e[e.len() - 1];
    out.measure("monotone", monotone);
    out.measure("shrink_factor", shrink);
    out.tolerate("shrink_factor_min", SHRINK);
    Ok(out.decide(monotone && shrink >= SHRINK))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LargeTimeOptions {
    pub floor: f64,
    /// Saved times inside `[t_min, t_max]` enter the fit.
    pub window: (f64, f64),
    /// Rate to test; defaults to `0.8·min(d(q-q₀), 1)/α`.
    pub gamma: Option<f64>,
}

impl Default for LargeTimeOptions {
    fn default() -> Self {
        LargeTimeOptions {
            floor: DEFAULT_FLOOR,
            window: (1.0, 100.0),
            gamma: None,
        }
    }
}

/// Slack allowed on fitted slopes.
const SLOPE_SLACK: f64 = 0.05;

/// `0.8·min(d(q-q₀), 1)/α`.
pub(crate) fn default_gamma(cfg: &SolverConfig) -> f64 {
    let d = cfg.params.dim as f64;
    0.8 * (d * (cfg.q - cfg.critical_exponent())).min(1.0) / cfg.params.alpha
}

fn is_critical(cfg: &SolverConfig) -> bool {
    (cfg.q - cfg.critical_exponent()).abs() <= 1e-12
}

/// Fit of `ln e(t)` against `ln t` over the large-time window. Above the
/// critical exponent the slope must reach `-γ`; at the critical exponent
/// `e(t)` must not decay.
pub fn check_large_time_rate(traj: &Trajectory, opts: &LargeTimeOptions) -> Result<CheckResult> {
    const MIN_R2: f64 = 0.95;
    let cfg = &traj.config;
    let (lo, hi) = opts.window;
    let pairs = with_references(traj)?;
    let mut table = Table::new("large_time", &["t", "e", "masked_fraction"]);
    let (mut ts, mut es) = (Vec::new(), Vec::new());
    for (u, r) in &pairs {
        if u.time < lo * (1.0 - 1e-12) || u.time > hi * (1.0 + 1e-12) {
            continue;
        }
        let (_, row) = ratio_field(u, r, opts.floor)?;
        table.push(vec![row.t, row.max_deviation, row.masked_fraction]);
        ts.push(row.t);
        es.push(row.max_deviation);
    }
    let critical = is_critical(cfg);
    let gamma = opts.gamma.unwrap_or_else(|| default_gamma(cfg));
    let mut out = CheckResult::new("large_time_rate")
        .param("window", [lo, hi])
        .param("floor", opts.floor)
        .param("negative_control", critical);
    out.measure("e", &es);
    out.tables.push(table);
    if is_linear(cfg) {
        out.note("b = 0: u = P_t u_0 and the rate check is skipped");
        out.tolerate("e", TRIVIAL_TOL);
        let exact = es.iter().all(|v| *v <= TRIVIAL_TOL);
        return Ok(out.decide_trivial(exact));
    }
    let fit = RateFit::log_log(&ts, &es)?;
    out.measure("slope", fit.slope);
    out.measure("r_squared", fit.r_squared);
    out.measure("fit", &fit);
    if critical {
        out.tolerate("slope_min", -SLOPE_SLACK);
        Ok(out.decide(fit.slope > -SLOPE_SLACK))
    } else {
        out = out.param("gamma", gamma);
        out.tolerate("slope_max", -gamma + SLOPE_SLACK);
        out.tolerate("r_squared_min", MIN_R2);
        Ok(out.decide(fit.slope <= -gamma + SLOPE_SLACK && fit.r_squared > MIN_R2))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpDecayOptions {
    pub p_list: Vec<f64>,
    /// Repeat the run with `2n` points per axis.
    pub refine: bool,
    /// Rate for the difference-norm trend; defaults as in the rate check.
    pub gamma: Option<f64>,
}

impl Default for LpDecayOptions {
    fn default() -> Self {
        LpDecayOptions {
            p_list: vec![1.0, 2.0, f64::INFINITY],
            refine: false,
            gamma: None,
        }
    }
}

fn decay_exponent(cfg: &SolverConfig, p: f64) -> f64 {
    let inv = if p.is_infinite() { 0.0 } else { 1.0 / p };
    cfg.params.dim as f64 * (1.0 - inv) / cfg.params.alpha
}

fn p_label(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{p}")
    }
}

/// `t^{d(1-1/p)/α} ‖u(t)‖_p` at every saved time.
fn scaled_norms(traj: &Trajectory, p: f64) -> Result<Vec<(f64, f64)>> {
    let k = decay_exponent(&traj.config, p);
    traj.snapshots
        .iter()
        .filter(|u| u.time > 0.0)
        .map(|u| Ok((u.time, u.time.powf(k) * lp_norm(u, p)?)))
        .collect()
}

/// Uniform `L^p` decay of `u`, `t`-uniform norms of `u*`, and the
/// difference-norm trend above the critical exponent.
pub fn check_lp_decay(traj: &Trajectory, opts: &LpDecayOptions) -> Result<CheckResult> {
    const MAX_SPREAD: f64 = 0.10;
    const MASS_TOL: f64 = 1e-6;
    let cfg = &traj.config;
    let alpha = cfg.params.alpha;
    let times: Vec<f64> = traj.snapshots.iter().map(|u| u.time).filter(|t| *t > 0.0).collect();
    let (t_min, t_max) = match (times.first(), times.last()) {
        (Some(&a), Some(&b)) if b / a >= 1e3 * (1.0 - 1e-12) => (a, b),
        _ => {
            return Err(Error::Precondition(
                "L^p decay needs saved times spanning at least 3 decades".into(),
            ))
        }
    };
    let top = |t: f64| t >= t_max / 10.0 * (1.0 - 1e-12);
    let mut out = CheckResult::new("lp_decay")
        .param("p_list", opts.p_list.iter().map(|&p| p_label(p)).collect::<Vec<_>>())
        .param("time_span", [t_min, t_max])
        .param("refine", opts.refine);
    out.tolerate("top_decade_spread", MAX_SPREAD);
    out.tolerate("ustar_mass", MASS_TOL);
    let mut pass = true;

    let fine = if opts.refine {
        if matches!(cfg.datum.shape, DatumShape::Samples { .. }) {
            return Err(Error::Precondition(
                "grid refinement needs an analytic datum, not lattice samples".into(),
            ));
        }
        out.tolerate("refinement_drift", MAX_SPREAD);
        Some(rerun(cfg, |c| c.grid.n *= 2)?)
    } else {
        None
    };

    let stars: Vec<Field> = traj
        .snapshots
        .iter()
        .filter(|u| u.time > 0.0)
        .map(|u| rescale_lattice(u, alpha))
        .collect::<Result<_>>()?;
    let mass_error = stars
        .iter()
        .map(|s| Ok(((lp_norm(s, 1.0)? - traj.initial_mass) / traj.initial_mass).abs()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    out.measure("ustar_mass_error", mass_error);
    pass &= mass_error <= MASS_TOL;

    let mut table = Table::new("lp_decay", &["t", "p", "scaled_norm", "ustar_norm"]);
    for &p in &opts.p_list {
        let label = p_label(p);
        let norms = scaled_norms(traj, p)?;
        let star_norms: Vec<f64> = stars.iter().map(|s| lp_norm(s, p)).collect::<Result<_>>()?;
        for ((t, m), s) in norms.iter().zip(&star_norms) {
            table.push(vec![*t, p, *m, *s]);
        }
        let m_p = norms.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
        let top_values: Vec<f64> = norms.iter().filter(|x| top(x.0)).map(|x| x.1).collect();
        let top_star: Vec<f64> = norms
            .iter()
            .zip(&star_norms)
            .filter(|(x, _)| top(x.0))
            .map(|(_, s)| *s)
            .collect();
        let spread = relative_spread(&top_values);
        let star_spread = relative_spread(&top_star);
        out.measure(&format!("m_{label}"), m_p);
        out.measure(&format!("top_decade_spread_{label}"), spread);
        out.measure(&format!("ustar_top_decade_spread_{label}"), star_spread);
        pass &= m_p.is_finite() && spread < MAX_SPREAD && star_spread < MAX_SPREAD;
        if let Some(fine) = &fine {
            let fine_m = scaled_norms(fine, p)?
                .iter()
                .map(|x| x.1)
                .fold(f64::NEG_INFINITY, f64::max);
            let drift = relative_change(m_p, fine_m);
            out.measure(&format!("refinement_drift_{label}"), drift);
            pass &= drift < MAX_SPREAD;
        }
    }
    out.tables.push(table);

    if !is_critical(cfg) && !is_linear(cfg) {
        let gamma = opts.gamma.unwrap_or_else(|| default_gamma(cfg));
        out = out.param("gamma", gamma);
        let pairs = with_references(traj)?;
        let late: Vec<_> = pairs.iter().filter(|(u, _)| top(u.time)).collect();
        let use_pairs: Vec<_> = if late.len() >= RateFit::MIN_POINTS {
            late
        } else {
            pairs.iter().collect()
        };
        let mut diff_table = Table::new("difference_norms", &["t", "p", "weighted_difference"]);
        for &p in &opts.p_list {
            let k = gamma + decay_exponent(cfg, p);
            let (mut ts, mut ds) = (Vec::new(), Vec::new());
            for (u, r) in &use_pairs {
                let d = u.time.powf(k) * lp_norm(&u.difference(r)?, p)?;
                diff_table.push(vec![u.time, p, d]);
                ts.push(u.time);
                ds.push(d);
            }
            let fit = RateFit::log_log(&ts, &ds)?;
            out.measure(&format!("difference_slope_{}", p_label(p)), fit.slope);
            pass &= fit.slope < 0.0;
        }
        out.tolerate("difference_slope_max", 0.0);
        out.tables.push(diff_table);
    }
    Ok(out.decide(pass))
}

#[derive(Debug, Clone, PartialEq)]
pub struct UstarOptions {
    pub small_times: Vec<f64>,
    /// Radii in the rescaled variable.
    pub radii: Vec<f64>,
}

impl Default for UstarOptions {
    fn default() -> Self {
        UstarOptions {
            small_times: vec![1e-4, 1e-3, 1e-2, 1e-1],
            radii: vec![1.0, 2.0, 4.0, 8.0],
        }
    }
}

/// `‖u*(t)‖_∞ → 0` as `t → 0` and `sup_t u*(t, x) → 0` as `|x| → ∞`.
pub fn check_ustar_vanishing(traj: &Trajectory, opts: &UstarOptions) -> Result<CheckResult> {
    const SHRINK: f64 = 5.0;
    let cfg = &traj.config;
    let alpha = cfg.params.alpha;
    let d = cfg.params.dim as f64;
    let grid = traj.initial.grid;
    let mut out = CheckResult::new("ustar_vanishing")
        .param("small_times", &opts.small_times)
        .param("radii", &opts.radii);

    let mut s_table = Table::new("ustar_sup", &["t", "s"]);
    let mut s = Vec::new();
    for &t in &opts.small_times {
        let u = traj
            .snapshot_at(t)
            .ok_or_else(|| Error::Precondition(format!("no snapshot saved at t = {t}")))?;
        let v = t.powf(d / alpha) * u.max();
        s_table.push(vec![t, v]);
        s.push(v);
    }
    if s.len() < 2 {
        return Err(Error::Precondition("need at least two small times".into()));
    }
    let s_shrink = s[s.len() - 1] / s[0];
    out.measure("s", &s);
    out.measure("s_shrink_factor", s_shrink);
    out.tables.push(s_table);

    let r_max = opts.radii.iter().copied().fold(0.0, f64::max);
    let mut sup = vec![0.0f64; opts.radii.len()];
    let mut used = Vec::new();
    for u in traj.snapshots.iter().filter(|u| u.time > 0.0) {
        let stretch = u.time.powf(1.0 / alpha);
        if r_max * stretch > 0.5 * grid.half_width {
            continue;
        }
        used.push(u.time);
        let amp = u.time.powf(d / alpha);
        for (idx, &v) in u.values.iter().enumerate() {
            let x = grid.radius(idx) / stretch;
            for (k, &big_r) in opts.radii.iter().enumerate() {
                if x > big_r {
                    sup[k] = sup[k].max(amp * v);
                }
            }
        }
    }
    if used.is_empty() {
        return Err(Error::Precondition(
            "no saved time keeps the largest radius inside half the box".into(),
        ));
    }
    let mut r_table = Table::new("ustar_far", &["R", "S"]);
    for (&r, &v) in opts.radii.iter().zip(&sup) {
        r_table.push(vec![r, v]);
    }
    out.measure("S", &sup);
    out.measure("times_used", &used);
    let s_far_shrink = sup[0] / sup[sup.len() - 1];
    out.measure("S_shrink_factor", s_far_shrink);
    if let Ok(fit) = RateFit::log_log(&opts.radii, &sup) {
        out.measure("S_slope", fit.slope);
    }
    out.tables.push(r_table);
    out.tolerate("shrink_factor_min", SHRINK);
    let pass = s_shrink > SHRINK && strictly_decreasing(&sup) && s_far_shrink >= SHRINK;
    Ok(out.decide(pass))
}
