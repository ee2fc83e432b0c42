//! Box-constrained first-order solvers: scaled gradient projection (SGP), its
//! unscaled variant (GP), and the affine-scaling cyclic BB baseline (AS-CBB).

mod ascbb;
mod bounds;
mod scaling;
mod steplength;

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ascbb::ascbb_solve;
pub use bounds::{project_box, Bounds, IndexClass};
pub use scaling::{lower_bound_scaling, raw_scaling, scaling_matrix, split_gradient};
pub use steplength::{bb_quotients, bb_steplength, BbState, BbStep, TAU_RANGE};

/// Objective value with the gradient split into its two parts.
#[derive(Debug, Clone)]
pub struct SplitEval {
    pub f: f64,
    pub grad_f0: DVector<f64>,
    pub grad_f1: DVector<f64>,
}

impl SplitEval {
    pub fn grad(&self) -> DVector<f64> {
        &self.grad_f0 + &self.grad_f1
    }
}

/// A smooth objective `f = f0 + f1` on a box.
pub trait Objective {
    /// `f(x)` only; used inside the line search.
    fn value(&mut self, x: &DVector<f64>) -> Result<f64>;

    /// `f(x)` with both gradient parts.
    fn split_eval(&mut self, x: &DVector<f64>) -> Result<SplitEval>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Armijo sufficient-decrease parameter.
    pub beta: f64,
    /// Backtracking reduction factor.
    pub gamma: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// First steplength.
    pub alpha0: f64,
    /// Lower clip of the scaling diagonal.
    pub l_min: f64,
    /// Upper clip of the scaling diagonal.
    pub l_max: f64,
    /// Offset used by the gradient split when neither part has a usable sign.
    pub zeta: f64,
    /// BB2 memory length.
    pub m_alpha: usize,
    /// Initial BB alternation threshold.
    pub tau1: f64,
    /// Relative-decrease stopping tolerance.
    pub stop_tol: f64,
    pub max_iter: usize,
    pub max_backtracks: usize,
    /// AS-CBB: iterations that reuse one BB value.
    pub cycle_length: usize,
    /// AS-CBB: number of past values in the nonmonotone reference.
    pub nonmonotone_memory: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            beta: 1e-4,
            gamma: 0.4,
            alpha_min: 1e-7,
            alpha_max: 1e2,
            alpha0: 1.0,
            l_min: 1e-5,
            l_max: 1e10,
            zeta: 1e-5,
            m_alpha: 3,
            tau1: 0.5,
            stop_tol: 1e-9,
            max_iter: 5000,
            max_backtracks: 40,
            cycle_length: 4,
            nonmonotone_memory: 8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad("beta must lie in (0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if !(self.alpha_min > 0.0 && self.alpha_min < self.alpha_max) {
            return bad("need 0 < alpha_min < alpha_max");
        }
        if !(self.l_min > 0.0 && self.l_min < self.l_max) {
            return bad("need 0 < l_min < l_max");
        }
        if self.zeta.is_nan() || self.zeta <= 0.0 {
            return bad("zeta must be positive");
        }
        if !(self.tau1 > 0.0 && self.tau1 < 1.0) {
            return bad("tau1 must lie in (0, 1)");
        }
        if !(self.stop_tol >= 0.0 && self.alpha0 > 0.0) {
            return bad("stop_tol must be nonnegative and alpha0 positive");
        }
        if self.cycle_length == 0 || self.nonmonotone_memory == 0 {
            return bad("cycle_length and nonmonotone_memory must be at least 1");
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: SolverConfig = toml::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("solver config is plain data")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    RelativeDecrease,
    MaxIterations,
    LineSearchFailure,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::RelativeDecrease => "relative_decrease",
            Termination::MaxIterations => "max_iterations",
            Termination::LineSearchFailure => "line_search_failure",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One row of the iteration trace. Row `k = 0` describes the starting point;
/// row `k` describes `x_k` together with the `alpha` and `lambda` of the step
/// that produced it.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub k: usize,
    pub f: f64,
    /// `|x - P(x - grad f)|_inf`
    pub pg_residual: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub time_s: f64,
    /// Function evaluations so far.
    pub function_evals: usize,
    /// `grad f(x_{k-1})' dx` of the step into this iterate.
    pub slope: f64,
    /// Range of the scaling diagonal used for that step.
    pub scaling_min: f64,
    pub scaling_max: f64,
    pub x: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    pub x_final: DVector<f64>,
    pub f_final: f64,
    pub grad_final: DVector<f64>,
    pub iterations: usize,
    pub function_evals: usize,
    pub gradient_evals: usize,
    pub termination: Termination,
    /// Set when the run stopped because the projected step vanished.
    pub stationary: bool,
    pub trace: Vec<TraceRecord>,
}

impl SolverResult {
    /// Writes `k,f,pg_residual,alpha,lambda,time_s`.
    pub fn write_trace_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["k", "f", "pg_residual", "alpha", "lambda", "time_s"])?;
        for r in &self.trace {
            out.write_record([
                r.k.to_string(),
                format!("{:.17e}", r.f),
                format!("{:.17e}", r.pg_residual),
                format!("{:.17e}", r.alpha),
                format!("{:.17e}", r.lambda),
                format!("{:.6}", r.time_s),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `|x - P(x - g)|_inf`
pub fn projected_gradient_residual(x: &DVector<f64>, g: &DVector<f64>, bounds: &Bounds) -> f64 {
    (x - bounds.project(&(x - g))).amax()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scaling {
    /// Split-gradient diagonal scaling (SGP).
    SplitGradient,
    /// `D = I` (GP).
    Identity,
}

/// Which solver to run on an identification problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolverKind {
    Sgp,
    Gp,
    Ascbb,
}

impl SolverKind {
    pub const ALL: [SolverKind; 3] = [SolverKind::Sgp, SolverKind::Gp, SolverKind::Ascbb];

    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Sgp => "sgp",
            SolverKind::Gp => "gp",
            SolverKind::Ascbb => "ascbb",
        }
    }

    pub fn solve<O: Objective>(
        self,
        objective: &mut O,
        bounds: &Bounds,
        x0: &DVector<f64>,
        config: &SolverConfig,
    ) -> Result<SolverResult> {
        match self {
            SolverKind::Sgp => sgp_solve(objective, bounds, x0, config, Scaling::SplitGradient),
            SolverKind::Gp => sgp_solve(objective, bounds, x0, config, Scaling::Identity),
            SolverKind::Ascbb => ascbb_solve(objective, bounds, x0, config),
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "sgp" => Ok(SolverKind::Sgp),
            "gp" => Ok(SolverKind::Gp),
            "ascbb" => Ok(SolverKind::Ascbb),
            _ => Err(Error::InvalidConfig(format!("unknown solver `{s}`"))),
        }
    }
}

/// Running counters shared by the solvers.
pub(crate) struct Progress {
    pub start: Instant,
    pub function_evals: usize,
    pub gradient_evals: usize,
    pub trace: Vec<TraceRecord>,
}

impl Progress {
    pub fn new() -> Self {
        Self {
            start: Instant::now(),
            function_evals: 0,
            gradient_evals: 0,
            trace: Vec::new(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn record(
        &mut self,
        k: usize,
        x: &DVector<f64>,
        f: f64,
        g: &DVector<f64>,
        bounds: &Bounds,
        alpha: f64,
        lambda: f64,
        slope: f64,
        scaling: (f64, f64),
    ) {
        self.trace.push(TraceRecord {
            k,
            f,
            pg_residual: projected_gradient_residual(x, g, bounds),
            alpha,
            lambda,
            time_s: self.start.elapsed().as_secs_f64(),
            function_evals: self.function_evals,
            slope,
            scaling_min: scaling.0,
            scaling_max: scaling.1,
            x: x.clone(),
        });
    }
}

fn check_start(bounds: &Bounds, x0: &DVector<f64>) -> Result<DVector<f64>> {
    if x0.len() != bounds.dim() {
        return Err(Error::DimensionMismatch {
            what: "starting point",
            expected: bounds.dim(),
            got: x0.len(),
        });
    }
    Ok(bounds.project(x0))
}

/// Scaled gradient projection with monotone Armijo backtracking.
///
/// Each iteration takes `z = P(x - alpha D grad f)`, searches along
/// `dx = z - x` from `lambda = 1` by factors of `gamma`, and stops when
/// `f_k - f_{k+1} < stop_tol |f_{k+1}|`. The line search evaluates `f` only;
/// the gradient is evaluated once per accepted iterate.
pub fn sgp_solve<O: Objective>(
    objective: &mut O,
    bounds: &Bounds,
    x0: &DVector<f64>,
    config: &SolverConfig,
    scaling: Scaling,
) -> Result<SolverResult> {
    config.validate()?;
    let mut progress = Progress::new();
    let mut x = check_start(bounds, x0)?;
    let mut eval = objective.split_eval(&x)?;
    progress.function_evals += 1;
    progress.gradient_evals += 1;
    let mut g = eval.grad();
    let mut f = eval.f;
    progress.record(0, &x, f, &g, bounds, f64::NAN, f64::NAN, f64::NAN, (f64::NAN, f64::NAN));

    let mut bb = BbState::new(config);
    let mut alpha = config.alpha0.max(config.alpha_min).min(config.alpha_max);
    let mut previous: Option<(DVector<f64>, DVector<f64>)> = None;
    let mut termination = Termination::MaxIterations;
    let mut stationary = false;
    let mut iterations = 0;

    while iterations < config.max_iter {
        let d = match scaling {
            Scaling::SplitGradient => {
                let (v, u) = split_gradient(&eval.grad_f0, &eval.grad_f1, config.zeta);
                scaling_matrix(&x, bounds, &v, &u, &g, config.l_min, config.l_max)
            }
            Scaling::Identity => DVector::from_element(x.len(), 1.0),
        };
        if let Some((px, pg)) = &previous {
            alpha = bb_steplength(&(&x - px), &(&g - pg), &d, &mut bb, config).alpha;
        }
        let z = bounds.project(&(&x - d.component_mul(&g) * alpha));
        let dx = &z - &x;
        let slope = g.dot(&dx);
        if dx.iter().all(|&v| v == 0.0) || slope >= 0.0 {
            // No feasible descent left at working precision.
            termination = Termination::RelativeDecrease;
            stationary = true;
            break;
        }

        let mut lambda = 1.0;
        let mut backtracks = 0;
        let (x_new, f_new) = loop {
            let trial = bounds.project(&(&x + &dx * lambda));
            let f_trial = objective.value(&trial)?;
            progress.function_evals += 1;
            if f_trial <= f + config.beta * lambda * slope {
                break (Some(trial), f_trial);
            }
            backtracks += 1;
            if backtracks > config.max_backtracks {
                break (None, f_trial);
            }
            lambda *= config.gamma;
        };
        let Some(x_new) = x_new else {
            termination = Termination::LineSearchFailure;
            break;
        };

        eval = objective.split_eval(&x_new)?;
        progress.gradient_evals += 1;
        let g_new = eval.grad();
        iterations += 1;
        let scaling_range = (d.min(), d.max());
        progress.record(iterations, &x_new, f_new, &g_new, bounds, alpha, lambda, slope, scaling_range);

        let decrease = f - f_new;
        previous = Some((std::mem::replace(&mut x, x_new), std::mem::replace(&mut g, g_new)));
        f = f_new;
        if decrease < config.stop_tol * f.abs() {
            termination = Termination::RelativeDecrease;
            break;
        }
    }

    Ok(SolverResult {
        x_final: x,
        f_final: f,
        grad_final: g,
        iterations,
        function_evals: progress.function_evals,
        gradient_evals: progress.gradient_evals,
        termination,
        stationary,
        trace: progress.trace,
    })
}


#[cfg(test)]
mod tests {
    use super::test_objectives::Quadratic;
    use super::*;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn interior_minimizer_is_found() {
        let mut q = Quadratic::new(&[0.3, -1.2, 2.5], &[1.0, 1.0, 1.0]);
        let b = Bounds::new(vec![-5.0; 3], vec![5.0; 3]).unwrap();
        let res = sgp_solve(&mut q, &b, &dv(&[1.0, 1.0, 1.0]), &SolverConfig::default(), Scaling::Identity).unwrap();
        assert!(res.iterations < 50, "{} iterations", res.iterations);
        assert!((res.x_final - dv(&[0.3, -1.2, 2.5])).amax() < 1e-8);
        assert_eq!(res.termination, Termination::RelativeDecrease);
    }

    #[test]
    fn exterior_minimizer_is_clamped() {
        let mut q = Quadratic::new(&[-3.0, 0.5, 9.0], &[1.0, 4.0, 0.5]);
        let b = Bounds::new(vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 2.0]).unwrap();
        for scaling in [Scaling::Identity, Scaling::SplitGradient] {
            let res = sgp_solve(&mut q, &b, &dv(&[0.5, 0.5, 0.5]), &SolverConfig::default(), scaling).unwrap();
            assert!((res.x_final.clone() - dv(&[0.0, 0.5, 2.0])).amax() < 1e-6, "{scaling:?}: {}", res.x_final);
        }
    }

    #[test]
    fn trace_is_monotone_and_feasible() {
        let mut q = Quadratic::new(&[-1.0, 3.0, 0.25, 7.0], &[1.0, 10.0, 100.0, 0.1]);
        let b = Bounds::new(vec![0.0; 4], vec![f64::INFINITY, 2.0, 1.0, f64::INFINITY]).unwrap();
        let cfg = SolverConfig::default();
        let res = sgp_solve(&mut q, &b, &dv(&[1.0; 4]), &cfg, Scaling::SplitGradient).unwrap();
        for pair in res.trace.windows(2) {
            assert!(pair[1].f <= pair[0].f);
            assert!(pair[1].slope < 0.0);
            assert!(pair[1].scaling_min >= cfg.l_min && pair[1].scaling_max <= cfg.l_max);
            assert!(pair[1].alpha >= cfg.alpha_min && pair[1].alpha <= cfg.alpha_max);
        }
        assert!(res.trace.iter().all(|r| b.contains(&r.x)));
    }

    #[test]
    fn infeasible_start_is_projected() {
        let mut q = Quadratic::new(&[0.5], &[1.0]);
        let b = Bounds::new(vec![0.0], vec![1.0]).unwrap();
        let res = sgp_solve(&mut q, &b, &dv(&[40.0]), &SolverConfig::default(), Scaling::SplitGradient).unwrap();
        assert_eq!(res.trace[0].x[0], 1.0);
    }

    #[test]
    fn stationary_start_stops_immediately() {
        let mut q = Quadratic::new(&[-1.0], &[1.0]);
        let b = Bounds::new(vec![0.0], vec![1.0]).unwrap();
        let res = sgp_solve(&mut q, &b, &dv(&[0.0]), &SolverConfig::default(), Scaling::Identity).unwrap();
        assert!(res.stationary);
        assert_eq!(res.iterations, 0);
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = SolverConfig {
            max_iter: 77,
            gamma: 0.5,
            ..SolverConfig::default()
        };
        let text = cfg.to_toml_string();
        assert!(text.contains("max_iter = 77"));
        assert_eq!(SolverConfig::from_toml_str(&text).unwrap(), cfg);
        let partial = SolverConfig::from_toml_str("beta = 0.001\n").unwrap();
        assert_eq!(partial.beta, 1e-3);
        assert_eq!(partial.max_iter, 5000);
        assert!(SolverConfig::from_toml_str("alpha_min = 1000.0\n").is_err());
        assert!(SolverConfig::from_toml_str("unknown = 1\n").is_err());
    }

    #[test]
    fn trace_csv_header() {
        let mut q = Quadratic::new(&[0.5], &[1.0]);
        let b = Bounds::new(vec![0.0], vec![1.0]).unwrap();
        let res = sgp_solve(&mut q, &b, &dv(&[0.9]), &SolverConfig::default(), Scaling::Identity).unwrap();
        let mut buf = Vec::new();
        res.write_trace_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,f,pg_residual,alpha,lambda,time_s\n"));
        assert_eq!(text.lines().count(), res.trace.len() + 1);
    }
}
