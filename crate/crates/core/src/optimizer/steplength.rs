//! Barzilai-Borwein steplengths for a diagonally scaled gradient step, with
//! adaptive alternation between the two rules.

use std::collections::VecDeque;

use nalgebra::DVector;

use super::SolverConfig;

/// Bounds applied to the alternation threshold after every update.
pub const TAU_RANGE: (f64, f64) = (1e-4, 1.0 - 1e-4);

/// Alternation state carried across iterations.
#[derive(Debug, Clone)]
pub struct BbState {
    /// Most recent `alpha2` values, at most `m_alpha + 1` of them.
    alpha_history: VecDeque<f64>,
    tau: f64,
    m_alpha: usize,
}

impl BbState {
    pub fn new(config: &SolverConfig) -> Self {
        Self {
            alpha_history: VecDeque::with_capacity(config.m_alpha + 1),
            tau: config.tau1,
            m_alpha: config.m_alpha,
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn alpha_history(&self) -> impl Iterator<Item = f64> + '_ {
        self.alpha_history.iter().copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BbStep {
    pub alpha: f64,
    /// Safeguarded BB1 value.
    pub alpha1: f64,
    /// Safeguarded BB2 value.
    pub alpha2: f64,
    /// True when the BB2 memory minimum was selected.
    pub used_bb2: bool,
}

/// Raw `(BB1, BB2)` quotients with their denominators' sign tests:
/// `BB1 = r'D^-2 r / r'D^-1 w`, `BB2 = r'D w / w'D^2 w`.
/// A `None` entry means the curvature product was not positive.
pub fn bb_quotients(r: &DVector<f64>, w: &DVector<f64>, d: &DVector<f64>) -> (Option<f64>, Option<f64>) {
    let mut num1 = 0.0;
    let mut den1 = 0.0;
    let mut num2 = 0.0;
    let mut den2 = 0.0;
    for i in 0..r.len() {
        let (ri, wi, di) = (r[i], w[i], d[i]);
        num1 += ri * ri / (di * di);
        den1 += ri * wi / di;
        num2 += ri * di * wi;
        den2 += wi * di * di * wi;
    }
    let bb1 = (den1 > 0.0).then(|| num1 / den1);
    let bb2 = (num2 > 0.0).then(|| num2 / den2);
    (bb1, bb2)
}

fn safeguard(raw: Option<f64>, config: &SolverConfig) -> f64 {
    match raw {
        Some(a) if a.is_finite() => a.max(config.alpha_min).min(config.alpha_max),
        // nonpositive curvature: take a long step
        _ => config.alpha_max,
    }
}

/// Next steplength from `r = x_k - x_{k-1}`, `w = g_k - g_{k-1}` and the
/// current scaling diagonal `d`, updating the alternation state.
pub fn bb_steplength(
    r: &DVector<f64>,
    w: &DVector<f64>,
    d: &DVector<f64>,
    state: &mut BbState,
    config: &SolverConfig,
) -> BbStep {
    let (raw1, raw2) = bb_quotients(r, w, d);
    let alpha1 = safeguard(raw1, config);
    let alpha2 = safeguard(raw2, config);

    state.alpha_history.push_back(alpha2);
    while state.alpha_history.len() > state.m_alpha + 1 {
        state.alpha_history.pop_front();
    }

    let (alpha, used_bb2) = if alpha2 / alpha1 <= state.tau {
        state.tau *= 0.9;
        let min = state.alpha_history.iter().copied().fold(f64::INFINITY, f64::min);
        (min, true)
    } else {
        state.tau *= 1.1;
        (alpha1, false)
    };
    state.tau = state.tau.clamp(TAU_RANGE.0, TAU_RANGE.1);
    BbStep {
        alpha,
        alpha1,
        alpha2,
        used_bb2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn identity_scaling_quotients() {
        let (bb1, bb2) = bb_quotients(&dv(&[1.0, 1.0]), &dv(&[2.0, 1.0]), &dv(&[1.0, 1.0]));
        assert_relative_eq!(bb1.unwrap(), 2.0 / 3.0);
        assert_relative_eq!(bb2.unwrap(), 3.0 / 5.0);
    }

    #[test]
    fn negative_curvature_gives_alpha_max() {
        let cfg = SolverConfig::default();
        let mut st = BbState::new(&cfg);
        // r'w = -1
        let step = bb_steplength(&dv(&[1.0]), &dv(&[-1.0]), &dv(&[1.0]), &mut st, &cfg);
        assert_eq!(step.alpha1, 100.0);
        assert_eq!(step.alpha2, 100.0);
    }

    #[test]
    fn tiny_bb1_is_clipped() {
        let cfg = SolverConfig::default();
        let mut st = BbState::new(&cfg);
        // BB1 = 1e-9 with D = I
        let step = bb_steplength(&dv(&[1e-9]), &dv(&[1.0]), &dv(&[1.0]), &mut st, &cfg);
        assert_eq!(step.alpha1, 1e-7);
    }

    #[test]
    fn alternation_updates_tau_and_uses_memory() {
        let cfg = SolverConfig::default();
        let mut st = BbState::new(&cfg);
        // BB1 = 2/3, BB2 = 3/5; ratio 0.9 > 0.5 -> BB1, tau grows
        let s = bb_steplength(&dv(&[1.0, 1.0]), &dv(&[2.0, 1.0]), &dv(&[1.0, 1.0]), &mut st, &cfg);
        assert!(!s.used_bb2);
        assert_relative_eq!(s.alpha, 2.0 / 3.0);
        assert_relative_eq!(st.tau(), 0.55);
        // strongly anisotropic pair: BB2 / BB1 small -> min over BB2 memory
        let s = bb_steplength(&dv(&[1.0, 1.0]), &dv(&[100.0, 0.01]), &dv(&[1.0, 1.0]), &mut st, &cfg);
        assert!(s.used_bb2);
        assert_eq!(s.alpha, s.alpha2.min(3.0 / 5.0));
        assert_relative_eq!(st.tau(), 0.55 * 0.9);
    }

    #[test]
    fn history_is_bounded() {
        let cfg = SolverConfig::default();
        let mut st = BbState::new(&cfg);
        for i in 1..20 {
            bb_steplength(&dv(&[1.0]), &dv(&[i as f64]), &dv(&[1.0]), &mut st, &cfg);
        }
        assert_eq!(st.alpha_history().count(), cfg.m_alpha + 1);
    }
}
