//! Scenario files: flat dotted keys in TOML syntax, one scenario per file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use fracburgers_core::grid::{DatumShape, Grid, InitialDatumSpec};
use fracburgers_core::kernel::StabilityParams;
use fracburgers_core::solver::{Mode, PicardSettings, SolverConfig};
use fracburgers_core::Error as CoreError;
use sha2::{Digest, Sha256};
use toml::Value;

use crate::checks::{as_f64, CheckKind, CheckSpec};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub solver: SolverConfig,
    pub checks: Vec<CheckSpec>,
    /// Output directory; `out/<name>` when absent.
    pub out: Option<String>,
}

/// Bundled scenarios, by name.
pub const PRESETS: &[(&str, &str)] = &[
    ("critical-1d", include_str!("../scenarios/critical-1d.toml")),
    ("linear-1d", include_str!("../scenarios/linear-1d.toml")),
    ("kernel-2d", include_str!("../scenarios/kernel-2d.toml")),
    ("lemma-1d", include_str!("../scenarios/lemma-1d.toml")),
    ("large-x-compact", include_str!("../scenarios/large-x-compact.toml")),
    ("large-x-heavy", include_str!("../scenarios/large-x-heavy.toml")),
    ("large-time-q1", include_str!("../scenarios/large-time-q1.toml")),
    ("large-time-critical", include_str!("../scenarios/large-time-critical.toml")),
];

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn preset(name: &str) -> CliResult<Scenario> {
    let text = preset_text(name).ok_or_else(|| CliError::Parse {
        source_name: name.to_string(),
        message: format!(
            "no bundled scenario of that name (available: {})",
            PRESETS.iter().map(|p| p.0).collect::<Vec<_>>().join(", ")
        ),
    })?;
    parse_scenario(text, name)
}

pub fn load_scenario(path: &Path) -> CliResult<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
    let mut sc = parse_scenario(&text, &path.display().to_string())?;
    if sc.name.is_empty() {
        sc.name = stem.to_string();
    }
    Ok(sc)
}

/// Nested tables flattened to dotted keys; arrays stay values.
pub fn flatten(table: &toml::Table) -> BTreeMap<String, Value> {
    fn walk(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
        for (k, v) in table {
            let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            match v {
                Value::Table(t) => walk(&key, t, out),
                other => {
                    out.insert(key, other.clone());
                }
            }
        }
    }
    let mut out = BTreeMap::new();
    walk("", table, &mut out);
    out
}

/// 1-based line on which `key` is assigned, if it is written flat.
fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        l.trim_start()
            .strip_prefix(key)
            .is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

struct Reader<'a> {
    text: &'a str,
    keys: BTreeMap<String, Value>,
    errors: Vec<String>,
}

impl Reader<'_> {
    fn fail(&mut self, key: &str, what: &str) {
        let at = line_of(self.text, key).map(|l| format!("line {l}: ")).unwrap_or_default();
        self.errors.push(format!("{at}key `{key}` {what}"));
    }

    fn take(&mut self, key: &str, required: bool) -> Option<Value> {
        let v = self.keys.remove(key);
        if v.is_none() && required {
            self.errors.push(format!("missing key `{key}`"));
        }
        v
    }

    fn number(&mut self, key: &str, required: bool) -> Option<f64> {
        let v = self.take(key, required)?;
        let x = as_f64(&v);
        if x.is_none() {
            self.fail(key, "must be a number");
        }
        x
    }

    fn count(&mut self, key: &str, required: bool) -> Option<usize> {
        match self.take(key, required)? {
            Value::Integer(i) if i >= 0 => Some(i as usize),
            _ => {
                self.fail(key, "must be a non-negative integer");
                None
            }
        }
    }

    fn numbers(&mut self, key: &str, required: bool) -> Option<Vec<f64>> {
        match self.take(key, required)? {
            Value::Array(items) => {
                let v: Option<Vec<f64>> = items.iter().map(as_f64).collect();
                if v.is_none() {
                    self.fail(key, "must be an array of numbers");
                }
                v
            }
            v => match as_f64(&v) {
                Some(x) => Some(vec![x]),
                None => {
                    self.fail(key, "must be a number or an array of numbers");
                    None
                }
            },
        }
    }

    fn string(&mut self, key: &str, required: bool) -> Option<String> {
        match self.take(key, required)? {
            Value::String(s) => Some(s),
            _ => {
                self.fail(key, "must be a string");
                None
            }
        }
    }

    fn boolean(&mut self, key: &str) -> Option<bool> {
        match self.take(key, false)? {
            Value::Boolean(b) => Some(b),
            _ => {
                self.fail(key, "must be true or false");
                None
            }
        }
    }
}

fn datum_shape(r: &mut Reader) -> Option<DatumShape> {
    let kind = r.string("datum.kind", true)?;
    let needs_width = kind != "samples";
    let width = if needs_width { r.number("datum.width", true) } else { None };
    Some(match kind.as_str() {
        "gaussian_bump" => DatumShape::GaussianBump { width: width? },
        "box_indicator" => DatumShape::BoxIndicator { width: width? },
        "compact_bump" => DatumShape::CompactBump { width: width? },
        "heavy_tail" => {
            let gamma = r.number("datum.gamma", true);
            DatumShape::HeavyTail { width: width?, gamma: gamma? }
        }
        "samples" => DatumShape::Samples {
            values: r.numbers("datum.values", true)?,
        },
        other => {
            r.fail(
                "datum.kind",
                &format!(
                    "has unknown value \"{other}\" (expected gaussian_bump, box_indicator, heavy_tail, compact_bump or samples)"
                ),
            );
            return None;
        }
    })
}

/// Parse and validate a scenario. Syntax, type and unknown-key problems
/// are parse errors with line numbers; violated solver invariants are
/// validation errors listing every problem.
pub fn parse_scenario(text: &str, source_name: &str) -> CliResult<Scenario> {
    let table: toml::Table = toml::from_str(text).map_err(|e| CliError::Parse {
        source_name: source_name.to_string(),
        message: e.to_string(),
    })?;
    let mut r = Reader {
        text,
        keys: flatten(&table),
        errors: Vec::new(),
    };
    let name = r.string("name", false).unwrap_or_default();
    let alpha = r.number("alpha", true);
    let dim = r.count("d", true);
    let q = r.number("q", true);
    let b = r.numbers("b", true);
    let shape = datum_shape(&mut r);
    let mass = r.number("datum.mass", true);
    let center = r.numbers("datum.center", false).unwrap_or_default();
    let half_width = r.number("grid.L", true);
    let n = r.count("grid.n", true);
    let dt = r.number("dt", true);
    let t_end = r.number("t_end", true);
    let save_times = r.numbers("save_times", false).unwrap_or_default();
    let dealias = r.boolean("dealias").unwrap_or(true);
    let mode = match r.string("mode", false).as_deref() {
        None | Some("production") => Some(Mode::Production),
        Some("validation") => Some(Mode::Validation),
        Some(other) => {
            r.fail("mode", &format!("has unknown value \"{other}\" (expected production or validation)"));
            None
        }
    };
    let defaults = PicardSettings::default();
    let picard = PicardSettings {
        tol: r.number("picard.tol", false).unwrap_or(defaults.tol),
        max_iter: r.count("picard.max_iter", false).unwrap_or(defaults.max_iter),
        steps: r.count("picard.steps", false).unwrap_or(defaults.steps),
    };
    let out = r.string("out", false);

    let mut checks = Vec::new();
    if let Some(v) = r.take("checks", false) {
        match v {
            Value::Array(items) => {
                for item in items {
                    match item.as_str().and_then(CheckKind::parse) {
                        Some(kind) if checks.iter().any(|c: &CheckSpec| c.kind == kind) => {
                            r.fail("checks", &format!("lists {} twice", kind.name()))
                        }
                        Some(kind) => checks.push(CheckSpec::new(kind)),
                        None => r.fail(
                            "checks",
                            &format!(
                                "names unknown check {item} (known: {})",
                                CheckKind::ALL.map(|k| k.name()).join(", ")
                            ),
                        ),
                    }
                }
            }
            _ => r.fail("checks", "must be an array of check names"),
        }
    }
    let check_keys: Vec<String> = r.keys.keys().filter(|k| k.starts_with("check.")).cloned().collect();
    for key in check_keys {
        let value = r.keys.remove(&key).unwrap();
        let mut parts = key.splitn(3, '.');
        let (_, check, param) = (parts.next(), parts.next(), parts.next());
        let spec = match (check.and_then(CheckKind::parse), param) {
            (Some(kind), Some(param)) => checks.iter_mut().find(|c| c.kind == kind).map(|c| (c, param)),
            _ => None,
        };
        match spec {
            Some((c, param)) => {
                c.params.insert(param.to_string(), value);
            }
            None => r.fail(&key, "configures a check that is not listed in `checks`"),
        }
    }
    let unknown: Vec<String> = r.keys.keys().cloned().collect();
    for key in unknown {
        r.fail(&key, "is not a scenario key");
    }
    if !r.errors.is_empty() {
        return Err(CliError::Parse {
            source_name: source_name.to_string(),
            message: r.errors.join("; "),
        });
    }
    // every required value is present once no error was recorded
    let (alpha, dim, q, b, shape, mass, half_width, n, dt, t_end, mode) = (
        alpha.unwrap(),
        dim.unwrap(),
        q.unwrap(),
        b.unwrap(),
        shape.unwrap(),
        mass.unwrap(),
        half_width.unwrap(),
        n.unwrap(),
        dt.unwrap(),
        t_end.unwrap(),
        mode.unwrap(),
    );
    let solver = SolverConfig {
        params: StabilityParams { alpha, dim },
        q,
        b,
        datum: InitialDatumSpec { shape, mass, center },
        grid: Grid { dim, half_width, n },
        dt,
        t_end,
        save_times,
        dealias,
        picard,
        mode,
    };
    let mut problems = match solver.validate() {
        Ok(()) => Vec::new(),
        Err(CoreError::Validation(p)) => p,
        Err(e) => vec![e.to_string()],
    };
    for c in &checks {
        if let Err(e) = c.plan() {
            problems.push(e);
        }
    }
    if !problems.is_empty() {
        return Err(CliError::Validation(problems));
    }
    Ok(Scenario {
        name,
        solver,
        checks,
        out,
    })
}

fn floats(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|x| Value::Float(*x)).collect())
}

impl Scenario {
    /// Canonical flat-key text; parsing it gives back an equal scenario.
    pub fn to_text(&self) -> String {
        let s = &self.solver;
        let mut lines: Vec<(String, Value)> = vec![
            ("name".into(), Value::String(self.name.clone())),
            ("alpha".into(), Value::Float(s.params.alpha)),
            ("d".into(), Value::Integer(s.params.dim as i64)),
            ("q".into(), Value::Float(s.q)),
            ("b".into(), floats(&s.b)),
        ];
        let (kind, width, gamma, values) = match &s.datum.shape {
            DatumShape::GaussianBump { width } => ("gaussian_bump", Some(*width), None, None),
            DatumShape::BoxIndicator { width } => ("box_indicator", Some(*width), None, None),
            DatumShape::CompactBump { width } => ("compact_bump", Some(*width), None, None),
            DatumShape::HeavyTail { width, gamma } => ("heavy_tail", Some(*width), Some(*gamma), None),
            DatumShape::Samples { values } => ("samples", None, None, Some(values)),
        };
        lines.push(("datum.kind".into(), Value::String(kind.into())));
        lines.push(("datum.mass".into(), Value::Float(s.datum.mass)));
        if let Some(w) = width {
            lines.push(("datum.width".into(), Value::Float(w)));
        }
        if let Some(g) = gamma {
            lines.push(("datum.gamma".into(), Value::Float(g)));
        }
        if let Some(v) = values {
            lines.push(("datum.values".into(), floats(v)));
        }
        if !s.datum.center.is_empty() {
            lines.push(("datum.center".into(), floats(&s.datum.center)));
        }
        lines.extend([
            ("grid.L".into(), Value::Float(s.grid.half_width)),
            ("grid.n".into(), Value::Integer(s.grid.n as i64)),
            ("dt".into(), Value::Float(s.dt)),
            ("t_end".into(), Value::Float(s.t_end)),
            ("save_times".into(), floats(&s.save_times)),
            ("dealias".into(), Value::Boolean(s.dealias)),
            (
                "mode".into(),
                Value::String(match s.mode {
                    Mode::Production => "production".into(),
                    Mode::Validation => "validation".into(),
                }),
            ),
            ("picard.tol".into(), Value::Float(s.picard.tol)),
            ("picard.max_iter".into(), Value::Integer(s.picard.max_iter as i64)),
            ("picard.steps".into(), Value::Integer(s.picard.steps as i64)),
            (
                "checks".into(),
                Value::Array(self.checks.iter().map(|c| Value::String(c.kind.name().into())).collect()),
            ),
        ]);
        for c in &self.checks {
            for (k, v) in &c.params {
                lines.push((format!("check.{}.{k}", c.kind.name()), v.clone()));
            }
        }
        if let Some(out) = &self.out {
            lines.push(("out".into(), Value::String(out.clone())));
        }
        let mut text = String::new();
        for (k, v) in lines {
            let _ = writeln!(text, "{k} = {v}");
        }
        text
    }

    /// Git-style content hash: SHA-256 of `blob <len>\0<canonical text>`.
    pub fn content_hash(&self) -> String {
        let text = self.to_text();
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", text.len()).as_bytes());
        h.update(text.as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn output_dir(&self) -> String {
        self.out.clone().unwrap_or_else(|| format!("out/{}", self.name))
    }

    pub fn check(&self, kind: CheckKind) -> Option<&CheckSpec> {
        self.checks.iter().find(|c| c.kind == kind)
    }
}
