use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DatumShape, Grid, InitialDatumSpec};
use crate::kernel::StabilityParams;

/// Which stability indices the solver accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// `α ∈ (1, 2)`.
    #[default]
    Production,
    /// `α ∈ (1, 2]`, admitting the Gaussian case for closed-form oracles.
    Validation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardSettings {
    pub tol: f64,
    pub max_iter: usize,
    /// Uniform time mesh used by the fixed-point iteration.
    pub steps: usize,
}

impl Default for PicardSettings {
    fn default() -> Self {
        PicardSettings {
            tol: 1e-10,
            max_iter: 50,
            steps: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub params: StabilityParams,
    pub q: f64,
    pub b: Vec<f64>,
    pub datum: InitialDatumSpec,
    pub grid: Grid,
    /// Largest step the integrator may take.
    pub dt: f64,
    pub t_end: f64,
    pub save_times: Vec<f64>,
    pub dealias: bool,
    pub picard: PicardSettings,
    pub mode: Mode,
}

/// Slack when comparing `q` with the critical exponent.
const CRITICAL_SLACK: f64 = 1e-12;

impl SolverConfig {
    pub fn critical_exponent(&self) -> f64 {
        self.params.critical_exponent()
    }

    /// `|b|`.
    pub fn drift_norm(&self) -> f64 {
        self.b.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Every violated invariant, or `Ok(())`.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let alpha = self.params.alpha;
        let dim = self.params.dim;
        if let Err(e) = StabilityParams::new(alpha, dim) {
            problems.push(e.to_string());
        }
        match self.mode {
            Mode::Production if !(alpha > 1.0 && alpha < 2.0) => problems.push(format!(
                "alpha = {alpha} must lie in (1, 2) in production mode (alpha = 2 needs mode = validation)"
            )),
            Mode::Validation if !(alpha > 1.0 && alpha <= 2.0) => {
                problems.push(format!("alpha = {alpha} must lie in (1, 2] in validation mode"))
            }
            _ => {}
        }
        let q0 = self.critical_exponent();
        if !(self.q.is_finite() && self.q >= q0 - CRITICAL_SLACK) {
            problems.push(format!(
                "q = {} is below the critical exponent q0 = (alpha - 1)/d = {q0}",
                self.q
            ));
        }
        if self.grid.dim != dim {
            problems.push(format!(
                "grid dimension {} differs from d = {dim}",
                self.grid.dim
            ));
        }
        if let Err(Error::Validation(p)) = Grid::new(self.grid.dim, self.grid.half_width, self.grid.n) {
            problems.extend(p);
        }
        if self.b.len() != dim {
            problems.push(format!("b has {} components, d = {dim}", self.b.len()));
        }
        if self.b.iter().any(|v| !v.is_finite()) {
            problems.push("b must be finite".into());
        }
        problems.extend(self.datum.problems(dim));
        if let DatumShape::HeavyTail { gamma, .. } = self.datum.shape {
            if gamma > alpha {
                problems.push(format!("datum.gamma = {gamma} must not exceed alpha = {alpha}"));
            }
        }
        if let DatumShape::Samples { values } = &self.datum.shape {
            if values.len() != self.grid.len() {
                problems.push(format!(
                    "datum has {} samples, grid has {} points",
                    values.len(),
                    self.grid.len()
                ));
            }
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            problems.push(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            problems.push(format!("t_end must be positive, got {}", self.t_end));
        }
        if self.save_times.windows(2).any(|w| w[1] <= w[0]) {
            problems.push("save_times must be strictly increasing".into());
        }
        if self
            .save_times
            .iter()
            .any(|&t| !(t >= 0.0 && t <= self.t_end * (1.0 + 1e-12)))
        {
            problems.push(format!("save_times must lie in [0, t_end = {}]", self.t_end));
        }
        if !(self.picard.tol > 0.0) || self.picard.max_iter == 0 || self.picard.steps == 0 {
            problems.push("picard settings need tol > 0, max_iter >= 1, steps >= 1".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}
