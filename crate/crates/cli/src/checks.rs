//! Check names, their per-check parameters and dispatch to the verifier.

use std::collections::BTreeMap;

use fracburgers_core::grid::make_u0;
use fracburgers_core::solver::{SolverConfig, Trajectory};
use fracburgers_core::verify::{
    check_convolution_inequality, check_kernel, check_large_time_rate, check_large_x,
    check_lemma_identity, check_lp_decay, check_small_time, check_two_sided,
    check_ustar_vanishing, CheckResult, KernelCheckOptions, LargeTimeOptions, LemmaOptions,
    LpDecayOptions, TwoSidedOptions, UstarOptions, DEFAULT_FLOOR, SMALL_TIMES,
};
use fracburgers_core::Result as CoreResult;
use toml::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CheckKind {
    Kernel,
    TwoSided,
    SmallTime,
    LargeX,
    LargeTimeRate,
    LpDecay,
    UstarVanishing,
    LemmaIdentity,
    ConvolutionInequality,
}

impl CheckKind {
    pub const ALL: [CheckKind; 9] = [
        CheckKind::Kernel,
        CheckKind::TwoSided,
        CheckKind::SmallTime,
        CheckKind::LargeX,
        CheckKind::LargeTimeRate,
        CheckKind::LpDecay,
        CheckKind::UstarVanishing,
        CheckKind::LemmaIdentity,
        CheckKind::ConvolutionInequality,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Kernel => "kernel",
            CheckKind::TwoSided => "two_sided",
            CheckKind::SmallTime => "small_time",
            CheckKind::LargeX => "large_x",
            CheckKind::LargeTimeRate => "large_time_rate",
            CheckKind::LpDecay => "lp_decay",
            CheckKind::UstarVanishing => "ustar_vanishing",
            CheckKind::LemmaIdentity => "lemma_identity",
            CheckKind::ConvolutionInequality => "convolution_inequality",
        }
    }

    /// Accepts `two_sided` and `two-sided`.
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.replace('-', "_");
        CheckKind::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn keys(self) -> &'static [&'static str] {
        match self {
            CheckKind::Kernel => &["points_per_decade"],
            CheckKind::TwoSided => &["floor", "refine", "epsilons"],
            CheckKind::SmallTime => &["floor", "times"],
            CheckKind::LargeX => &["floor", "radii"],
            CheckKind::LargeTimeRate => &["floor", "window", "gamma"],
            CheckKind::LpDecay => &["p", "refine", "gamma"],
            CheckKind::UstarVanishing => &["small_times", "radii"],
            CheckKind::LemmaIdentity => &["beta", "t", "samples", "r_panels", "r_order", "floor"],
            CheckKind::ConvolutionInequality => &["beta", "v"],
        }
    }

    pub fn needs_trajectory(self) -> bool {
        !matches!(
            self,
            CheckKind::Kernel | CheckKind::LemmaIdentity | CheckKind::ConvolutionInequality
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckSpec {
    pub kind: CheckKind,
    pub params: BTreeMap<String, Value>,
}

/// Fully resolved options of one check.
#[derive(Debug, Clone, PartialEq)]
pub enum Plan {
    Kernel(KernelCheckOptions),
    TwoSided(TwoSidedOptions),
    SmallTime { times: Vec<f64>, floor: f64 },
    LargeX { radii: Vec<f64>, floor: f64 },
    LargeTimeRate(LargeTimeOptions),
    LpDecay(LpDecayOptions),
    UstarVanishing(UstarOptions),
    LemmaIdentity { betas: Vec<f64>, t: f64, opts: LemmaOptions },
    ConvolutionInequality { betas: Vec<f64>, v: Vec<f64> },
}

struct Params<'a> {
    kind: CheckKind,
    map: &'a BTreeMap<String, Value>,
}

impl Params<'_> {
    fn err(&self, key: &str, what: &str) -> String {
        format!("check.{}.{key} must be {what}", self.kind.name())
    }

    fn number(&self, key: &str) -> Result<Option<f64>, String> {
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => as_f64(v).map(Some).ok_or_else(|| self.err(key, "a number")),
        }
    }

    fn numbers(&self, key: &str) -> Result<Option<Vec<f64>>, String> {
        match self.map.get(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(as_f64)
                .collect::<Option<Vec<_>>>()
                .map(Some)
                .ok_or_else(|| self.err(key, "an array of numbers")),
            Some(v) => as_f64(v).map(|x| Some(vec![x])).ok_or_else(|| self.err(key, "a number or an array of numbers")),
        }
    }

    fn boolean(&self, key: &str) -> Result<Option<bool>, String> {
        match self.map.get(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(*b)),
            Some(_) => Err(self.err(key, "true or false")),
        }
    }

    fn count(&self, key: &str) -> Result<Option<usize>, String> {
        match self.map.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i > 0 => Ok(Some(*i as usize)),
            Some(_) => Err(self.err(key, "a positive integer")),
        }
    }
}

pub(crate) fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

impl CheckSpec {
    pub fn new(kind: CheckKind) -> Self {
        CheckSpec {
            kind,
            params: BTreeMap::new(),
        }
    }

    pub fn plan(&self) -> Result<Plan, String> {
        if let Some(k) = self.params.keys().find(|k| !self.kind.keys().contains(&k.as_str())) {
            return Err(format!(
                "unknown key check.{}.{k} (allowed: {})",
                self.kind.name(),
                self.kind.keys().join(", ")
            ));
        }
        let p = Params {
            kind: self.kind,
            map: &self.params,
        };
        let floor = p.number("floor")?.unwrap_or(DEFAULT_FLOOR);
        Ok(match self.kind {
            CheckKind::Kernel => {
                let mut o = KernelCheckOptions::default();
                if let Some(n) = p.count("points_per_decade")? {
                    o.points_per_decade = n;
                }
                Plan::Kernel(o)
            }
            CheckKind::TwoSided => {
                let d = TwoSidedOptions::default();
                Plan::TwoSided(TwoSidedOptions {
                    floor,
                    refine: p.boolean("refine")?.unwrap_or(d.refine),
                    epsilons: p.numbers("epsilons")?.unwrap_or(d.epsilons),
                })
            }
            CheckKind::SmallTime => Plan::SmallTime {
                times: p.numbers("times")?.unwrap_or(SMALL_TIMES.to_vec()),
                floor,
            },
            CheckKind::LargeX => Plan::LargeX {
                radii: p.numbers("radii")?.unwrap_or(vec![2.0, 4.0, 8.0, 16.0]),
                floor,
            },
            CheckKind::LargeTimeRate => {
                let d = LargeTimeOptions::default();
                let window = match p.numbers("window")? {
                    None => d.window,
                    Some(w) if w.len() == 2 => (w[0], w[1]),
                    Some(_) => return Err(p.err("window", "a pair [t_min, t_max]")),
                };
                Plan::LargeTimeRate(LargeTimeOptions {
                    floor,
                    window,
                    gamma: p.number("gamma")?,
                })
            }
            CheckKind::LpDecay => {
                let d = LpDecayOptions::default();
                Plan::LpDecay(LpDecayOptions {
                    p_list: p.numbers("p")?.unwrap_or(d.p_list),
                    refine: p.boolean("refine")?.unwrap_or(d.refine),
                    gamma: p.number("gamma")?,
                })
            }
            CheckKind::UstarVanishing => {
                let d = UstarOptions::default();
                Plan::UstarVanishing(UstarOptions {
                    small_times: p.numbers("small_times")?.unwrap_or(d.small_times),
                    radii: p.numbers("radii")?.unwrap_or(d.radii),
                })
            }
            CheckKind::LemmaIdentity => {
                let d = LemmaOptions::default();
                Plan::LemmaIdentity {
                    betas: p.numbers("beta")?.unwrap_or(vec![0.25, 0.5, 0.75]),
                    t: p.number("t")?.unwrap_or(1.0),
                    opts: LemmaOptions {
                        samples: p.numbers("samples")?.unwrap_or(d.samples),
                        r_panels: p.count("r_panels")?.unwrap_or(d.r_panels),
                        r_order: p.count("r_order")?.unwrap_or(d.r_order),
                        floor,
                    },
                }
            }
            CheckKind::ConvolutionInequality => Plan::ConvolutionInequality {
                betas: p.numbers("beta")?.unwrap_or(vec![0.5]),
                v: p.numbers("v")?.unwrap_or(vec![0.1, 0.5, 0.9, 0.99]),
            },
        })
    }
}

/// One result per `beta`, gathered under a parent named after the check.
fn per_beta<F>(name: &str, betas: &[f64], mut one: F) -> CoreResult<CheckResult>
where
    F: FnMut(f64) -> CoreResult<CheckResult>,
{
    let mut children = Vec::with_capacity(betas.len());
    for &b in betas {
        let mut c = one(b)?;
        c.check = format!("{name}[beta={b}]");
        children.push(c);
    }
    if children.len() == 1 {
        let mut only = children.pop().unwrap();
        only.check = name.to_string();
        return Ok(only);
    }
    let mut parent = CheckResult::new(name).param("beta", betas);
    parent.children = children;
    Ok(parent.decide_by_children())
}

/// Evaluate one planned check. `traj` must be present for checks that
/// need a trajectory.
pub fn run_plan(plan: &Plan, cfg: &SolverConfig, traj: Option<&Trajectory>) -> CoreResult<CheckResult> {
    let need = || {
        traj.ok_or_else(|| {
            fracburgers_core::Error::Precondition("this check needs a solved trajectory".into())
        })
    };
    match plan {
        Plan::Kernel(o) => check_kernel(cfg.params, o),
        Plan::TwoSided(o) => check_two_sided(need()?, o),
        Plan::SmallTime { times, floor } => check_small_time(need()?, times, *floor),
        Plan::LargeX { radii, floor } => check_large_x(need()?, radii, *floor),
        Plan::LargeTimeRate(o) => check_large_time_rate(need()?, o),
        Plan::LpDecay(o) => check_lp_decay(need()?, o),
        Plan::UstarVanishing(o) => check_ustar_vanishing(need()?, o),
        Plan::LemmaIdentity { betas, t, opts } => {
            let f = make_u0(&cfg.datum, &cfg.grid)?;
            per_beta("lemma_identity", betas, |b| check_lemma_identity(cfg.params, &f, *t, b, opts))
        }
        Plan::ConvolutionInequality { betas, v } => per_beta("convolution_inequality", betas, |b| {
            check_convolution_inequality(cfg.params.alpha, b, v)
        }),
    }
}
