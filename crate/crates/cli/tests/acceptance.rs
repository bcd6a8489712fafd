//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::error::Error;
use std::f64::consts::PI;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use fracburgers::checks::{run_plan, CheckKind};
use fracburgers::output::read_trajectory;
use fracburgers::{preset, run_verify, RunOptions, Scenario};
use fracburgers_core::grid::{Field, Grid, InitialDatumSpec};
use fracburgers_core::kernel::{StabilityParams, StableKernel};
use fracburgers_core::semigroup::apply;
use fracburgers_core::solver::{
    cole_hopf_reference, picard_iterate, solve, solve_from, Mode, PicardSettings, SolverConfig,
    Trajectory,
};
use fracburgers_core::verify::{
    check_convolution_inequality, check_kernel, check_small_time, check_two_sided, CheckResult,
    KernelCheckOptions, TwoSidedOptions, DEFAULT_FLOOR, SMALL_TIMES,
};
use serde_json::Value;

const KERNEL_REL: f64 = 1e-8;
const NORMALIZATION: f64 = 1e-6;
const SCALING: f64 = 1e-10;
const ENVELOPE_DRIFT: f64 = 0.01;
const LINEAR_SUP: f64 = 1e-8;
const COLE_HOPF_SUP: f64 = 1e-4;
const COLE_HOPF_REDUCTION: f64 = 4.0;
const COLE_HOPF_ORDER: f64 = 1.9;
const PICARD_SUP: f64 = 1e-5;
const MASS_DRIFT: f64 = 1e-8;
const NEGATIVITY: f64 = 1e-12;
const ORDER_SLACK: f64 = 1e-8;
const MASKED_FRACTION: f64 = 0.05;
const C_EMP_DRIFT: f64 = 0.10;
const SMALL_TIME_SHRINK: f64 = 3.0;
const LARGE_X_SHRINK: f64 = 3.0;
const RATE_SLACK: f64 = 0.05;
const RATE_R2: f64 = 0.95;
const CONTROL_SLOPE: f64 = -0.05;
const LP_SPREAD: f64 = 0.10;
const USTAR_MASS: f64 = 1e-6;
const LEMMA_REL: f64 = 1e-3;
const BETA_CONSTANT: f64 = 1e-10;
const CONVOLUTION_DRIFT: f64 = 0.05;

struct Verdict {
    pass: bool,
    detail: String,
}

type Outcome = Result<Verdict, Box<dyn Error>>;

fn verdict(pass: bool, detail: String) -> Outcome {
    Ok(Verdict { pass, detail })
}

#[derive(Default)]
struct Lab {
    critical: OnceLock<(Scenario, Trajectory)>,
    large_q1: OnceLock<(Scenario, Trajectory)>,
    large_critical: OnceLock<(Scenario, Trajectory)>,
    kernels: OnceLock<Vec<(f64, usize, CheckResult)>>,
}

fn solved<'a>(cell: &'a OnceLock<(Scenario, Trajectory)>, name: &str) -> &'a (Scenario, Trajectory) {
    cell.get_or_init(|| {
        let sc = preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
        let traj = solve(&sc.solver).unwrap_or_else(|e| panic!("{name}: {e}"));
        (sc, traj)
    })
}

impl Lab {
    fn critical(&self) -> &(Scenario, Trajectory) {
        solved(&self.critical, "critical-1d")
    }

    fn large_q1(&self) -> &(Scenario, Trajectory) {
        solved(&self.large_q1, "large-time-q1")
    }

    fn large_critical(&self) -> &(Scenario, Trajectory) {
        solved(&self.large_critical, "large-time-critical")
    }

    fn kernels(&self) -> &[(f64, usize, CheckResult)] {
        self.kernels.get_or_init(|| {
            let mut out = Vec::new();
            for d in [1, 2] {
                for alpha in [1.2, 1.5, 1.8] {
                    let params = StabilityParams::new(alpha, d).unwrap();
                    out.push((alpha, d, check_kernel(params, &KernelCheckOptions::default()).unwrap()));
                }
            }
            out
        })
    }
}

fn num(r: &CheckResult, key: &str) -> f64 {
    r.number(key).unwrap_or(f64::NAN)
}

fn nums(r: &CheckResult, key: &str) -> Vec<f64> {
    r.measured
        .get(key)
        .and_then(Value::as_array)
        .map(|a| a.iter().map(|v| v.as_f64().unwrap_or(f64::NAN)).collect())
        .unwrap_or_default()
}

fn sci(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", items.join(", "))
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] > w[1])
}

fn plan_result(sc: &Scenario, kind: CheckKind, traj: Option<&Trajectory>) -> Result<CheckResult, Box<dyn Error>> {
    let plan = sc
        .check(kind)
        .ok_or_else(|| format!("{} lists no {} check", sc.name, kind.name()))?
        .plan()?;
    Ok(run_plan(&plan, &sc.solver, traj)?)
}

// Closed-form kernels for the symbol -|ξ|^α at α = 2 and α = 1.
fn gaussian_oracle(d: usize, t: f64, x: &[f64]) -> (f64, Vec<f64>) {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let p = (4.0 * PI * t).powf(-(d as f64) / 2.0) * (-r2 / (4.0 * t)).exp();
    (p, x.iter().map(|v| -v / (2.0 * t) * p).collect())
}

fn cauchy_oracle(d: usize, t: f64, x: &[f64]) -> (f64, Vec<f64>) {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let e = (d as f64 + 1.0) / 2.0;
    let s = t * t + r2;
    let p = libm::tgamma(e) / PI.powf(e) * t / s.powf(e);
    (p, x.iter().map(|v| -(d as f64 + 1.0) * v / s * p).collect())
}

fn kernel_closed_forms(_: &Lab) -> Outcome {
    let mut worst_p: f64 = 0.0;
    let mut worst_g: f64 = 0.0;
    let mut samples = 0;
    for (alpha, rho_max) in [(2.0, 8.0), (1.0, 100.0)] {
        for d in [1, 2] {
            let kernel = StableKernel::new(StabilityParams::new(alpha, d)?)?;
            for i in 0..10 {
                let t = 10f64.powf(-2.0 + 4.0 * i as f64 / 9.0);
                for j in 0..10 {
                    let rho = 1e-2 * (rho_max / 1e-2f64).powf(j as f64 / 9.0);
                    let r = rho * t.powf(1.0 / alpha);
                    let theta = 0.7 + 0.61 * (10 * i + j) as f64;
                    let x = if d == 1 {
                        vec![if j % 2 == 0 { r } else { -r }]
                    } else {
                        vec![r * theta.cos(), r * theta.sin()]
                    };
                    let (p, g) = if alpha == 2.0 { gaussian_oracle(d, t, &x) } else { cauchy_oracle(d, t, &x) };
                    let p_num = kernel.density(t, &x)?;
                    let g_num = kernel.gradient(t, &x)?;
                    let g_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let g_err = g.iter().zip(&g_num).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                    worst_p = worst_p.max((p_num - p).abs() / p);
                    worst_g = worst_g.max(g_err / g_norm);
                    samples += 1;
                }
            }
        }
    }
    verdict(
        worst_p < KERNEL_REL && worst_g < KERNEL_REL,
        format!("{samples} samples, density rel err {worst_p:.2e}, gradient rel err {worst_g:.2e} (tol {KERNEL_REL:e})"),
    )
}

fn kernel_normalization(lab: &Lab) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (alpha, d, r) in lab.kernels() {
        let norm = r.child("normalization").map(|c| num(c, "error")).unwrap_or(f64::NAN);
        let scale = r.child("scaling").map(|c| num(c, "max_relative_error")).unwrap_or(f64::NAN);
        pass &= norm < NORMALIZATION && scale < SCALING;
        parts.push(format!("a={alpha} d={d}: {norm:.1e}/{scale:.1e}"));
    }
    verdict(
        pass,
        format!("mass/scaling errors {} (tol {NORMALIZATION:e}/{SCALING:e})", parts.join(", ")),
    )
}

fn envelope_constants(lab: &Lab) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (alpha, d, r) in lab.kernels().iter().filter(|k| k.0 == 1.5) {
        for name in ["envelope", "gradient_envelope"] {
            let c = r.child(name).ok_or_else(|| format!("kernel check has no {name}"))?;
            let (c1, c2, drift) = (num(c, "c1"), num(c, "c2"), num(c, "refinement_drift"));
            pass &= c1.is_finite() && c2.is_finite() && c1 > 0.0 && c2 > 0.0 && drift < ENVELOPE_DRIFT;
            parts.push(format!("a={alpha} d={d} {name}: c1={c1:.4} c2={c2:.4} drift={drift:.1e}"));
        }
    }
    verdict(pass, format!("{} (tol {ENVELOPE_DRIFT})", parts.join("; ")))
}

fn linear_limit(_: &Lab) -> Outcome {
    let sc = preset("linear-1d")?;
    let dir = tempfile::tempdir()?;
    let opts = RunOptions {
        out_dir: Some(dir.path().to_path_buf()),
        ..RunOptions::default()
    };
    let report = run_verify(&sc, &opts)?;
    let traj = read_trajectory(dir.path(), &sc.solver, &sc.content_hash())?;
    let mut worst: f64 = 0.0;
    for snap in &traj.snapshots {
        let free = apply(&traj.initial, snap.time, sc.solver.params.alpha)?;
        worst = worst.max(snap.sup_distance(&free)?);
    }
    let complete = traj.snapshots.len() == sc.solver.save_times.len();
    verdict(
        report.pass && complete && worst < LINEAR_SUP,
        format!(
            "{} save times read back from disk, sup error {worst:.2e} (tol {LINEAR_SUP:e}), checks {}",
            traj.snapshots.len(),
            if report.pass { "pass" } else { "fail" }
        ),
    )
}

fn burgers(n: usize) -> Result<SolverConfig, Box<dyn Error>> {
    Ok(SolverConfig {
        params: StabilityParams::new(2.0, 1)?,
        q: 1.0,
        b: vec![1.0],
        datum: InitialDatumSpec::gaussian(1.0, 1.0),
        grid: Grid::new(1, 40.0, n)?,
        dt: 1.0,
        t_end: 1.0,
        save_times: vec![1.0],
        dealias: true,
        picard: PicardSettings::default(),
        mode: Mode::Validation,
    })
}

fn cole_hopf(_: &Lab) -> Outcome {
    let ns = [1024, 2048, 4096];
    let mut errs = Vec::new();
    for n in ns {
        let traj = solve(&burgers(n)?)?;
        let oracle = cole_hopf_reference(&traj.initial, 1.0, 1.0)?;
        let snap = traj.snapshot_at(1.0).ok_or("no snapshot at t = 1")?;
        errs.push(snap.sup_distance(&oracle)?);
    }
    let x: Vec<f64> = ns.iter().map(|&n| (80.0 / n as f64).ln()).collect();
    let y: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let (mx, my) = (x.iter().sum::<f64>() / 3.0, y.iter().sum::<f64>() / 3.0);
    let order = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>()
        / x.iter().map(|a| (a - mx).powi(2)).sum::<f64>();
    let reduction = errs[1] / errs[2];
    verdict(
        errs[1] < COLE_HOPF_SUP && reduction >= COLE_HOPF_REDUCTION && order >= COLE_HOPF_ORDER,
        format!(
            "sup error n=1024/2048/4096: {:.3e}/{:.3e}/{:.3e} (tol {COLE_HOPF_SUP:e} at 2048), reduction {reduction:.3} (min {COLE_HOPF_REDUCTION}), fitted order {order:.3} (min {COLE_HOPF_ORDER})",
            errs[0], errs[1], errs[2]
        ),
    )
}

fn picard_cross_check(_: &Lab) -> Outcome {
    let sc = preset("critical-1d")?;
    let mut cfg = sc.solver.clone();
    cfg.t_end = 0.1;
    cfg.save_times = vec![0.1];
    let traj = solve(&cfg)?;
    let p = picard_iterate(&traj.initial, 0.1, &cfg)?;
    let err = traj.snapshot_at(0.1).ok_or("no snapshot at t = 0.1")?.sup_distance(&p.field)?;
    verdict(
        err < PICARD_SUP,
        format!("sup distance {err:.2e} after {} Picard iterations (tol {PICARD_SUP:e})", p.iterations),
    )
}

fn bump(x: f64, c: f64, w: f64) -> f64 {
    let s = (x - c) / w;
    if s.abs() < 1.0 {
        (-1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

fn gauss(x: f64, c: f64, w: f64) -> f64 {
    (-(x - c).powi(2) / (2.0 * w * w)).exp()
}

fn l1(a: &Field, b: &Field) -> f64 {
    a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).sum::<f64>() * a.grid.cell_volume()
}

fn structure(traj: &Trajectory) -> (f64, f64) {
    let neg = traj
        .snapshots
        .iter()
        .map(|s| -s.min() / s.max())
        .chain(traj.ledger.iter().map(|e| -e.min_u / e.max_u))
        .fold(f64::NEG_INFINITY, f64::max);
    (traj.max_mass_drift(), neg)
}

type Shape = fn(f64) -> f64;

fn conservation(lab: &Lab) -> Outcome {
    let mut cfg = preset("critical-1d")?.solver;
    cfg.grid = Grid::new(1, 40.0, 1024)?;
    cfg.t_end = 1.0;
    cfg.save_times = vec![0.1, 0.3, 1.0];
    let corpus: [(Shape, Shape); 5] = [
        (|x| 0.5 * gauss(x, 0.0, 1.0), |x| gauss(x, 0.0, 1.0)),
        (|x| gauss(x, 0.0, 1.0), |x| gauss(x, 0.0, 1.0) + 0.5 * gauss(x, 3.0, 0.5)),
        (|x| bump(x, 0.0, 2.0), |x| bump(x, 0.0, 2.0) + 0.3 * gauss(x, -2.0, 1.0)),
        (|x| gauss(x, 0.0, 1.0), |x| gauss(x, 0.0, 1.0).max(gauss(x, 1.0, 1.0))),
        (|x| 0.1 * gauss(x, 0.0, 2.0), |x| 2.0 * gauss(x, 0.0, 2.0)),
    ];
    let mut drift: f64 = 0.0;
    let mut neg: f64 = f64::NEG_INFINITY;
    let mut order_gap: f64 = f64::NEG_INFINITY;
    let mut contraction_gap: f64 = f64::NEG_INFINITY;
    for (lo, hi) in corpus {
        let u0 = Field::from_fn(cfg.grid, 0.0, |p| lo(p[0]));
        let v0 = Field::from_fn(cfg.grid, 0.0, |p| hi(p[0]));
        let u = solve_from(&cfg, u0.clone())?;
        let v = solve_from(&cfg, v0.clone())?;
        let start = l1(&u0, &v0);
        for (a, b) in u.snapshots.iter().zip(&v.snapshots) {
            let gap = a.values.iter().zip(&b.values).map(|(x, y)| x - y).fold(f64::NEG_INFINITY, f64::max);
            order_gap = order_gap.max(gap);
            contraction_gap = contraction_gap.max(l1(a, b) - start);
        }
        for t in [&u, &v] {
            let (m, n) = structure(t);
            drift = drift.max(m);
            neg = neg.max(n);
        }
    }
    for (_, t) in [lab.critical(), lab.large_q1()] {
        let (m, n) = structure(t);
        drift = drift.max(m);
        neg = neg.max(n);
    }
    verdict(
        drift < MASS_DRIFT && neg <= NEGATIVITY && order_gap <= ORDER_SLACK && contraction_gap <= ORDER_SLACK,
        format!(
            "mass drift {drift:.1e} (tol {MASS_DRIFT:e}), min/max {:.1e} (tol -{NEGATIVITY:e}), comparison gap {order_gap:.1e}, L1 growth {contraction_gap:.1e} (slack {ORDER_SLACK:e}) over 5 pairs and 2 presets",
            -neg
        ),
    )
}

fn two_sided(lab: &Lab) -> Outcome {
    let (_, traj) = lab.critical();
    let opts = TwoSidedOptions {
        floor: DEFAULT_FLOOR,
        refine: true,
        epsilons: vec![1.0, 0.3, 0.1, 0.03],
    };
    let r = check_two_sided(traj, &opts)?;
    let c = num(&r, "c_emp");
    let masked = num(&r, "max_masked_fraction");
    let drift = num(&r, "refinement_drift");
    let by_eps = nums(&r, "c_emp_by_epsilon");
    let toward_one = by_eps.len() == 4
        && strictly_decreasing(&by_eps)
        && by_eps.iter().all(|&v| v >= 1.0)
        && by_eps[3] - 1.0 < (by_eps[0] - 1.0) / 2.0;
    verdict(
        c.is_finite() && masked < MASKED_FRACTION && drift < C_EMP_DRIFT && toward_one,
        format!(
            "C_emp {c:.4}, masked {masked:.1e} (tol {MASKED_FRACTION}), n->2n drift {drift:.1e} (tol {C_EMP_DRIFT}), C_emp(eps) {by_eps:.4?}"
        ),
    )
}

fn small_time(lab: &Lab) -> Outcome {
    let (_, traj) = lab.critical();
    let r = check_small_time(traj, &SMALL_TIMES, DEFAULT_FLOOR)?;
    let e = nums(&r, "e");
    let pass = e.len() == SMALL_TIMES.len() && strictly_increasing(&e) && e[0] * SMALL_TIME_SHRINK < e[e.len() - 1];
    verdict(pass, format!("e(t) over {SMALL_TIMES:?}: {} (shrink min {SMALL_TIME_SHRINK})", sci(&e)))
}

fn large_x(_: &Lab) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["large-x-compact", "large-x-heavy"] {
        let sc = preset(name)?;
        let traj = solve(&sc.solver)?;
        let r = plan_result(&sc, CheckKind::LargeX, Some(&traj))?;
        let e = nums(&r, "E");
        let shrink = e.first().copied().unwrap_or(f64::NAN) / e.last().copied().unwrap_or(f64::NAN);
        pass &= e.len() == 4 && strictly_decreasing(&e) && shrink >= LARGE_X_SHRINK;
        parts.push(format!("{name}: E(R) {} shrink {shrink:.1}", sci(&e)));
    }
    verdict(pass, format!("{} (min {LARGE_X_SHRINK})", parts.join("; ")))
}

fn large_time_rate(lab: &Lab) -> Outcome {
    let (sc, traj) = lab.large_q1();
    let cfg = &sc.solver;
    let d = cfg.params.dim as f64;
    let q0 = (cfg.params.alpha - 1.0) / d;
    let gamma = 0.8 * (d * (cfg.q - q0)).min(1.0) / cfg.params.alpha;
    let r = plan_result(sc, CheckKind::LargeTimeRate, Some(traj))?;
    let (slope, r2) = (num(&r, "slope"), num(&r, "r_squared"));
    let (csc, ctraj) = lab.large_critical();
    let control = plan_result(csc, CheckKind::LargeTimeRate, Some(ctraj))?;
    let cslope = num(&control, "slope");
    verdict(
        slope <= -gamma + RATE_SLACK && r2 > RATE_R2 && cslope > CONTROL_SLOPE && (csc.solver.q - q0).abs() < 1e-12,
        format!(
            "q=1 slope {slope:.4} (max {:.4}), R^2 {r2:.4} (min {RATE_R2}); q=q0 control slope {cslope:.4} (min {CONTROL_SLOPE})",
            -gamma + RATE_SLACK
        ),
    )
}

fn lp_decay(lab: &Lab) -> Outcome {
    let (sc, traj) = lab.large_q1();
    let cfg = &sc.solver;
    let (alpha, d) = (cfg.params.alpha, cfg.params.dim as f64);
    let h = cfg.grid.cell_volume();
    let t_max = traj.snapshots.iter().map(|s| s.time).fold(0.0, f64::max);
    let top: Vec<&Field> = traj.snapshots.iter().filter(|s| s.time >= t_max / 10.0 * (1.0 - 1e-12)).collect();
    let mut pass = top.len() >= 2;
    let mut parts = Vec::new();
    for p in [1.0, 2.0, f64::INFINITY] {
        let scaled: Vec<f64> = top
            .iter()
            .map(|s| {
                let norm = if p.is_infinite() {
                    s.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
                } else {
                    (s.values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * h).powf(1.0 / p)
                };
                let expo = if p.is_infinite() { d / alpha } else { d * (1.0 - 1.0 / p) / alpha };
                s.time.powf(expo) * norm
            })
            .collect();
        let hi = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
        let spread = (hi - lo) / lo;
        pass &= hi.is_finite() && spread < LP_SPREAD;
        parts.push(format!("p={p}: sup {hi:.4} spread {spread:.1e}"));
    }
    let mass_err = traj
        .snapshots
        .iter()
        .map(|s| (s.integral() - traj.initial_mass).abs() / traj.initial_mass)
        .fold(0.0, f64::max);
    let r = plan_result(sc, CheckKind::LpDecay, Some(traj))?;
    let slopes: Vec<f64> = ["1", "2", "inf"].iter().map(|p| num(&r, &format!("difference_slope_{p}"))).collect();
    let check_mass = num(&r, "ustar_mass_error");
    pass &= mass_err < USTAR_MASS && check_mass < USTAR_MASS && slopes.iter().all(|s| *s < 0.0);
    verdict(
        pass,
        format!(
            "top decade {} (tol {LP_SPREAD}); |u*|_1 - M {mass_err:.1e} / {check_mass:.1e} (tol {USTAR_MASS:e}); difference slopes {slopes:.4?}",
            parts.join(", ")
        ),
    )
}

fn beta_closed_form(alpha: f64, beta: f64) -> f64 {
    let (a, b) = ((1.0 - beta) / alpha, 1.0 - 1.0 / alpha);
    (libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b)).exp() / alpha
}

fn lemma_identity(_: &Lab) -> Outcome {
    let sc = preset("lemma-1d")?;
    let r = plan_result(&sc, CheckKind::LemmaIdentity, None)?;
    let alpha = sc.solver.params.alpha;
    let mut pass = r.children.len() == 3;
    let mut parts = Vec::new();
    for c in &r.children {
        let beta = c.params.get("beta").and_then(Value::as_f64).unwrap_or(f64::NAN);
        let rel = num(c, "max_relative_error");
        let used = num(c, "unmasked_samples");
        let oracle = beta_closed_form(alpha, beta);
        let c2 = (num(c, "c2_quadrature") - oracle).abs() / oracle;
        pass &= rel < LEMMA_REL && used == 10.0 && c2 < BETA_CONSTANT;
        parts.push(format!("beta={beta}: rel {rel:.1e}, C2 {oracle:.10} off {c2:.1e}"));
    }
    verdict(pass, format!("{} (tol {LEMMA_REL:e}, {BETA_CONSTANT:e})", parts.join("; ")))
}

fn convolution_inequality(_: &Lab) -> Outcome {
    let v = [0.1, 0.5, 0.9, 0.99];
    let mut pass = true;
    let mut parts = Vec::new();
    for beta in [0.25, 0.5, 0.75] {
        let r = check_convolution_inequality(1.5, beta, &v)?;
        let c = nums(&r, "c");
        let drift = num(&r, "max_refinement_drift");
        pass &= c.len() == v.len() && c.iter().all(|x| x.is_finite() && *x > 0.0) && drift < CONVOLUTION_DRIFT;
        parts.push(format!("beta={beta}: c {c:.4?} drift {drift:.1e}"));
    }
    verdict(pass, format!("{} (tol {CONVOLUTION_DRIFT})", parts.join("; ")))
}

fn tree(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, Box<dyn Error>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        let mut bytes = fs::read(&path)?;
        if name == "report.json" {
            let mut v: Value = serde_json::from_slice(&bytes)?;
            v.as_object_mut().ok_or("report is not an object")?.remove("timings");
            bytes = serde_json::to_vec(&v)?;
        }
        out.push((name, bytes));
    }
    out.sort();
    Ok(out)
}

fn determinism(_: &Lab) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build()?;
    for name in ["critical-1d", "large-x-heavy", "kernel-2d"] {
        let sc = preset(name)?;
        let (a, b) = (tempfile::tempdir()?, tempfile::tempdir()?);
        let run = |dir: &Path| {
            let opts = RunOptions {
                out_dir: Some(dir.to_path_buf()),
                ..RunOptions::default()
            };
            run_verify(&sc, &opts)
        };
        run(a.path())?;
        single.install(|| run(b.path()))?;
        let (ta, tb) = (tree(a.path())?, tree(b.path())?);
        let differing: Vec<&str> = ta
            .iter()
            .zip(&tb)
            .filter(|(x, y)| x != y)
            .map(|(x, _)| x.0.as_str())
            .collect();
        let same = ta.len() == tb.len() && differing.is_empty();
        pass &= same;
        parts.push(if same {
            format!("{name}: {} files identical", ta.len())
        } else {
            format!("{name}: differs in {differing:?}")
        });
    }
    verdict(pass, format!("{} (second run on one thread)", parts.join("; ")))
}

type Criterion = fn(&Lab) -> Outcome;

const CRITERIA: [(&str, Criterion); 15] = [
    ("kernel closed forms", kernel_closed_forms),
    ("kernel normalization and scaling", kernel_normalization),
    ("envelope constants", envelope_constants),
    ("linear limit", linear_limit),
    ("Cole-Hopf oracle", cole_hopf),
    ("Picard vs stepping", picard_cross_check),
    ("conservation and structure", conservation),
    ("two-sided bound", two_sided),
    ("small-time limit", small_time),
    ("large-|x| limit", large_x),
    ("large-time rate", large_time_rate),
    ("L^p decay", lp_decay),
    ("nested integral identity", lemma_identity),
    ("convolution inequality", convolution_inequality),
    ("determinism", determinism),
];

fn main() -> ExitCode {
    let lab = Lab::default();
    let mut failed = 0;
    for (i, (name, run)) in CRITERIA.iter().enumerate() {
        let start = Instant::now();
        let v = match panic::catch_unwind(AssertUnwindSafe(|| run(&lab))) {
            Ok(Ok(v)) => v,
            Ok(Err(e)) => Verdict { pass: false, detail: format!("error: {e}") },
            Err(p) => Verdict {
                pass: false,
                detail: format!(
                    "panic: {}",
                    p.downcast_ref::<String>().map(String::as_str).or(p.downcast_ref::<&str>().copied()).unwrap_or("?")
                ),
            },
        };
        failed += usize::from(!v.pass);
        println!(
            "criterion {:>2} {} {name}: {} [{:.1}s]",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", CRITERIA.len() - failed, CRITERIA.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
