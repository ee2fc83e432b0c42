//! Affine-scaling cyclic Barzilai-Borwein method (AS-CBB).
//!
//! Search direction `d_i = -g_i / (abar + |g_i| / X_i)` where `X_i` is the
//! distance to the bound that `-g_i` points at (`u_i - x_i` for `g_i <= 0`,
//! `x_i - l_i` otherwise), with `|g_i| / inf = 0`. Since `|d_i| < X_i`, the
//! full step `lambda = 1` already stays in the box. `abar` is an inverse BB1
//! steplength reused for `cycle_length` iterations, and the line search is the
//! nonmonotone Armijo rule against the largest of the last
//! `nonmonotone_memory` objective values.

use std::collections::VecDeque;

use nalgebra::DVector;

use super::{check_start, Bounds, Objective, Progress, SolverConfig, SolverResult, Termination};
use crate::error::Result;

/// Distance to the bound in the descent direction of coordinate `i`.
fn bound_distance(x: &DVector<f64>, bounds: &Bounds, g: f64, i: usize) -> f64 {
    if g <= 0.0 {
        bounds.upper()[i] - x[i]
    } else {
        x[i] - bounds.lower()[i]
    }
}

pub(crate) fn direction(x: &DVector<f64>, g: &DVector<f64>, bounds: &Bounds, abar: f64) -> DVector<f64> {
    DVector::from_iterator(
        x.len(),
        (0..x.len()).map(|i| {
            let gi = g[i];
            let dist = bound_distance(x, bounds, gi, i);
            if dist <= 0.0 {
                return 0.0;
            }
            let barrier = if dist.is_infinite() { 0.0 } else { gi.abs() / dist };
            -gi / (abar + barrier)
        }),
    )
}

fn inverse_bb1(r: &DVector<f64>, w: &DVector<f64>, config: &SolverConfig) -> f64 {
    let rw = r.dot(w);
    let bb1 = if rw > 0.0 {
        (r.norm_squared() / rw).clamp(config.alpha_min, config.alpha_max)
    } else {
        config.alpha_max
    };
    (1.0 / bb1).max(config.alpha_min)
}

/// Runs AS-CBB from `x0` (projected onto the box first).
pub fn ascbb_solve<O: Objective>(
    objective: &mut O,
    bounds: &Bounds,
    x0: &DVector<f64>,
    config: &SolverConfig,
) -> Result<SolverResult> {
    config.validate()?;
    let mut progress = Progress::new();
    let mut x = check_start(bounds, x0)?;
    let eval = objective.split_eval(&x)?;
    progress.function_evals += 1;
    progress.gradient_evals += 1;
    let mut g = eval.grad();
    let mut f = eval.f;
    progress.record(0, &x, f, &g, bounds, f64::NAN, f64::NAN, f64::NAN, (f64::NAN, f64::NAN));

    let mut abar = (1.0 / config.alpha0).max(config.alpha_min);
    let mut recent: VecDeque<f64> = VecDeque::with_capacity(config.nonmonotone_memory);
    recent.push_back(f);
    let mut termination = Termination::MaxIterations;
    let mut stationary = false;
    let mut iterations = 0;

    while iterations < config.max_iter {
        let d = direction(&x, &g, bounds, abar);
        let slope = g.dot(&d);
        if d.iter().all(|&v| v == 0.0) || slope >= 0.0 {
            termination = Termination::RelativeDecrease;
            stationary = true;
            break;
        }
        let f_ref = recent.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let mut lambda = 1.0;
        let mut backtracks = 0;
        let accepted = loop {
            let trial = bounds.project(&(&x + &d * lambda));
            let f_trial = objective.value(&trial)?;
            progress.function_evals += 1;
            if f_trial <= f_ref + config.beta * lambda * slope {
                break Some((trial, f_trial));
            }
            backtracks += 1;
            if backtracks > config.max_backtracks {
                break None;
            }
            lambda *= config.gamma;
        };
        let Some((x_new, f_new)) = accepted else {
            termination = Termination::LineSearchFailure;
            break;
        };

        let g_new = objective.split_eval(&x_new)?.grad();
        progress.gradient_evals += 1;
        iterations += 1;
        let inv = 1.0 / abar;
        progress.record(iterations, &x_new, f_new, &g_new, bounds, inv, lambda, slope, (inv, inv));

        if iterations % config.cycle_length == 0 {
            abar = inverse_bb1(&(&x_new - &x), &(&g_new - &g), config);
        }
        let change = (f - f_new).abs();
        x = x_new;
        g = g_new;
        f = f_new;
        if recent.len() == config.nonmonotone_memory {
            recent.pop_front();
        }
        recent.push_back(f);
        if change < config.stop_tol * f.abs() {
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
