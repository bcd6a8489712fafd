//! Quantitative experiments for the comparability, decay and asymptotic
//! statements about solutions, and for the kernel identities behind them.
//!
//! Every check returns a [`CheckResult`] whose pass flag is computed from
//! the recorded measurements and tolerances only.

mod integrals;
mod kernel_checks;
mod ratio;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::grid::{Field, MaskedField};

pub use integrals::{
    beta_constant, check_convolution_inequality, check_lemma_identity, convolution_ratio,
    lemma_lhs, LemmaOptions,
};
pub use kernel_checks::{check_kernel, KernelCheckOptions};
pub use ratio::{
    check_large_time_rate, check_large_x, check_lp_decay, check_small_time, check_two_sided,
    check_ustar_vanishing, ratio_report, LargeTimeOptions, LpDecayOptions, TwoSidedOptions,
    UstarOptions, SMALL_TIMES,
};

/// Default mask floor, relative to the maximum of the reference field.
pub const DEFAULT_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// The configuration makes the statement hold exactly (for instance
    /// `b = 0`) and the measured value matched the exact one.
    Trivial,
}

/// A sweep recorded as numeric columns, emitted as CSV by the runner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: String,
    pub params: BTreeMap<String, Value>,
    pub measured: BTreeMap<String, Value>,
    pub tolerance: BTreeMap<String, Value>,
    pub pass: bool,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tables: Vec<Table>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<CheckResult>,
    #[serde(default)]
    pub artifact_paths: Vec<String>,
}

fn to_value<T: Serialize>(v: T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

impl CheckResult {
    pub fn new(check: &str) -> Self {
        CheckResult {
            check: check.to_string(),
            params: BTreeMap::new(),
            measured: BTreeMap::new(),
            tolerance: BTreeMap::new(),
            pass: false,
            status: Status::Fail,
            notes: Vec::new(),
            tables: Vec::new(),
            children: Vec::new(),
            artifact_paths: Vec::new(),
        }
    }

    pub fn param<T: Serialize>(mut self, key: &str, v: T) -> Self {
        self.params.insert(key.to_string(), to_value(v));
        self
    }

    pub fn measure<T: Serialize>(&mut self, key: &str, v: T) {
        self.measured.insert(key.to_string(), to_value(v));
    }

    pub fn tolerate<T: Serialize>(&mut self, key: &str, v: T) {
        self.tolerance.insert(key.to_string(), to_value(v));
    }

    pub fn note(&mut self, msg: impl Into<String>) {
        self.notes.push(msg.into());
    }

    pub fn decide(mut self, pass: bool) -> Self {
        self.pass = pass;
        self.status = if pass { Status::Pass } else { Status::Fail };
        self
    }

    /// Pass with trivial status when `exact` holds, fail otherwise.
    pub fn decide_trivial(mut self, exact: bool) -> Self {
        self.pass = exact;
        self.status = if exact { Status::Trivial } else { Status::Fail };
        self
    }

    /// Pass iff every child passes.
    pub fn decide_by_children(self) -> Self {
        let pass = self.children.iter().all(|c| c.pass);
        self.decide(pass)
    }

    /// Measured value as a number, if it is one.
    pub fn number(&self, key: &str) -> Option<f64> {
        self.measured.get(key).and_then(|v| v.as_f64())
    }

    pub fn child(&self, check: &str) -> Option<&CheckResult> {
        self.children.iter().find(|c| c.check == check)
    }
}

/// One row of a [`RatioReport`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub t: f64,
    pub sup_ratio: f64,
    pub inf_ratio: f64,
    pub masked_fraction: f64,
    /// `sup |u/ref - 1|` over unmasked points.
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub rows: Vec<RatioRow>,
    /// `max(sup_ratio, 1/inf_ratio)` over all rows.
    pub c_emp: f64,
}

impl RatioReport {
    pub fn from_rows(rows: Vec<RatioRow>) -> Self {
        let c_emp = rows
            .iter()
            .map(|r| r.sup_ratio.max(1.0 / r.inf_ratio))
            .fold(f64::NEG_INFINITY, f64::max);
        RatioReport { rows, c_emp }
    }

    pub fn max_masked_fraction(&self) -> f64 {
        self.rows.iter().map(|r| r.masked_fraction).fold(0.0, f64::max)
    }

    pub fn table(&self, name: &str) -> Table {
        let mut t = Table::new(name, &["t", "sup_ratio", "inf_ratio", "masked_fraction", "max_deviation"]);
        for r in &self.rows {
            t.push(vec![r.t, r.sup_ratio, r.inf_ratio, r.masked_fraction, r.max_deviation]);
        }
        t
    }
}

/// `u / ref` where `ref > floor·max(ref)`, masked elsewhere.
pub fn ratio_field(u: &Field, reference: &Field, floor: f64) -> Result<(MaskedField, RatioRow)> {
    if u.grid != reference.grid {
        return Err(Error::SizeMismatch("ratio of fields on different grids".into()));
    }
    if !(floor > 0.0) {
        return Err(Error::Domain(format!("mask floor must be positive, got {floor}")));
    }
    let cut = floor * reference.max();
    if !(cut > 0.0) {
        return Err(Error::Precondition("reference field is not positive anywhere".into()));
    }
    let mut valid = Vec::with_capacity(u.values.len());
    let mut values = Vec::with_capacity(u.values.len());
    let (mut sup, mut inf, mut dev) = (f64::NEG_INFINITY, f64::INFINITY, 0.0f64);
    for (&a, &r) in u.values.iter().zip(&reference.values) {
        if r > cut {
            let q = a / r;
            sup = sup.max(q);
            inf = inf.min(q);
            dev = dev.max((q - 1.0).abs());
            valid.push(true);
            values.push(q);
        } else {
            valid.push(false);
            values.push(0.0);
        }
    }
    let masked = valid.iter().filter(|v| !**v).count() as f64 / valid.len() as f64;
    let field = MaskedField {
        field: Field {
            grid: u.grid,
            values,
            time: u.time,
        },
        valid,
        valid_half_width: u.grid.half_width,
    };
    Ok((
        field,
        RatioRow {
            t: u.time,
            sup_ratio: sup,
            inf_ratio: inf,
            masked_fraction: masked,
            max_deviation: dev,
        },
    ))
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub abscissae: Vec<f64>,
    pub ordinates: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl RateFit {
    pub const MIN_POINTS: usize = 4;

    pub fn log_log(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::SizeMismatch("fit abscissae and ordinates differ in length".into()));
        }
        if x.len() < Self::MIN_POINTS {
            return Err(Error::Precondition(format!(
                "rate fit needs at least {} points, got {}",
                Self::MIN_POINTS,
                x.len()
            )));
        }
        if x.iter().chain(y).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Precondition("rate fit needs positive finite data".into()));
        }
        let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
        let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
        let n = lx.len() as f64;
        let mx = lx.iter().sum::<f64>() / n;
        let my = ly.iter().sum::<f64>() / n;
        let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
        let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
        let syy: f64 = ly.iter().map(|b| (b - my) * (b - my)).sum();
        if sxx == 0.0 {
            return Err(Error::Precondition("rate fit abscissae are all equal".into()));
        }
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
        Ok(RateFit {
            abscissae: lx,
            ordinates: ly,
            slope,
            intercept,
            r_squared,
        })
    }
}

/// Relative spread `(max - min)/max` of positive values.
pub(crate) fn relative_spread(values: &[f64]) -> f64 {
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    (hi - lo) / hi.abs()
}

pub(crate) fn relative_change(a: f64, b: f64) -> f64 {
    (b - a).abs() / a.abs()
}
