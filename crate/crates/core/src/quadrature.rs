//! Gauss–Legendre rules and small composite-quadrature helpers.
//!
//! Everything oscillatory or singular in the crate is reduced to sums of
//! Gauss–Legendre panels on a mesh chosen by the caller.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Nodes and weights of an `n`-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    fn compute(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussRule { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrate `f` over `[a, b]` with this rule.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, w * half))
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Shared, lazily built rule with `n` nodes.
pub fn gauss_legendre(n: usize) -> Arc<GaussRule> {
    static RULES: OnceLock<Mutex<HashMap<usize, Arc<GaussRule>>>> = OnceLock::new();
    let rules = RULES.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = rules.lock().expect("rule cache poisoned").get(&n) {
        return rule.clone();
    }
    let rule = Arc::new(GaussRule::compute(n));
    rules
        .lock()
        .expect("rule cache poisoned")
        .entry(n)
        .or_insert(rule)
        .clone()
}

/// Nodes `(x, x - a, weight)` of the graded rule of [`graded_left`].
pub fn graded_left_nodes(a: f64, b: f64, k: f64, panels: usize, rule: &GaussRule) -> Vec<(f64, f64, f64)> {
    let len = b - a;
    let mut out = Vec::with_capacity(panels * rule.len());
    for p in 0..panels {
        let s0 = p as f64 / panels as f64;
        let s1 = (p + 1) as f64 / panels as f64;
        for (s, w) in rule.mapped(s0, s1) {
            let offset = len * s.powf(k);
            let jac = len * k * s.powf(k - 1.0);
            out.push((a + offset, offset, w * jac));
        }
    }
    out
}

/// Nodes `(x, b - x, weight)` of the graded rule of [`graded_right`].
pub fn graded_right_nodes(a: f64, b: f64, k: f64, panels: usize, rule: &GaussRule) -> Vec<(f64, f64, f64)> {
    graded_left_nodes(0.0, b - a, k, panels, rule)
        .into_iter()
        .map(|(y, _, w)| (b - y, y, w))
        .collect()
}

/// Integrate `f` over `[a, b]` after the substitution `x = a + (b-a) s^k`,
/// which absorbs an integrable singularity `(x-a)^{-θ}` when `k(1-θ) = 1`.
/// The interval in `s` is split into `panels` equal pieces.
///
/// `f` receives the node `x` and its exact offset `x - a`, so that
/// singular factors can be evaluated without cancellation.
pub fn graded_left<F: FnMut(f64, f64) -> f64>(
    a: f64,
    b: f64,
    k: f64,
    panels: usize,
    rule: &GaussRule,
    mut f: F,
) -> f64 {
    graded_left_nodes(a, b, k, panels, rule)
        .into_iter()
        .map(|(x, off, w)| w * f(x, off))
        .sum()
}

/// Mirror image of [`graded_left`]: clusters nodes at the right endpoint;
/// `f` receives `x` and the offset `b - x`.
pub fn graded_right<F: FnMut(f64, f64) -> f64>(
    a: f64,
    b: f64,
    k: f64,
    panels: usize,
    rule: &GaussRule,
    mut f: F,
) -> f64 {
    graded_right_nodes(a, b, k, panels, rule)
        .into_iter()
        .map(|(x, off, w)| w * f(x, off))
        .sum()
}
