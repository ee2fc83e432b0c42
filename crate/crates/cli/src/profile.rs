//! Performance profiles: for each solver, the fraction of problems it solves
//! within a factor `xi` of the best solver on that problem.

use std::io::Write;

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceProfile {
    /// `ratios[p][s] = t[p][s] / min_s t[p][s]`, or `rho_max` on failure.
    pub ratios: Vec<Vec<f64>>,
    /// Largest successful ratio plus one.
    pub rho_max: f64,
    /// Distinct ratio values and `rho_max`, ascending; the curves are
    /// sampled here.
    pub breakpoints: Vec<f64>,
    /// `curves[s][i]` is the profile of solver `s` at `breakpoints[i]`.
    pub curves: Vec<Vec<f64>>,
}

impl PerformanceProfile {
    pub fn num_solvers(&self) -> usize {
        self.curves.len()
    }

    /// `p_s(xi) = |{p : ratio[p][s] <= xi}| / |P|`
    pub fn value(&self, solver: usize, xi: f64) -> f64 {
        let hits = self.ratios.iter().filter(|row| row[solver] <= xi).count();
        hits as f64 / self.ratios.len() as f64
    }

    /// Writes `xi,<name_0>,<name_1>,...`, one row per breakpoint.
    pub fn write_csv<W: Write>(&self, names: &[String], w: W) -> Result<()> {
        if names.len() != self.num_solvers() {
            return Err(BenchError::Input(format!(
                "{} solver names for {} profile curves",
                names.len(),
                self.num_solvers()
            )));
        }
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["xi".to_string()];
        header.extend(names.iter().cloned());
        out.write_record(&header)?;
        for (i, xi) in self.breakpoints.iter().enumerate() {
            let mut row = vec![xi.to_string()];
            row.extend(self.curves.iter().map(|c| c[i].to_string()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Builds the profile from a problems x solvers cost matrix. Ties for the
/// best cost all get ratio 1.
pub fn performance_profile(times: &[Vec<f64>], failures: &[Vec<bool>]) -> Result<PerformanceProfile> {
    let n_solvers = times.first().map_or(0, Vec::len);
    if times.is_empty() || n_solvers == 0 {
        return Err(BenchError::Input("empty cost matrix".into()));
    }
    if failures.len() != times.len() {
        return Err(BenchError::Input("failure mask and cost matrix differ in size".into()));
    }
    let mut ratios = Vec::with_capacity(times.len());
    for (p, (row, fail)) in times.iter().zip(failures).enumerate() {
        if row.len() != n_solvers || fail.len() != n_solvers {
            return Err(BenchError::Input(format!("row {p} has the wrong number of solvers")));
        }
        let mut best = f64::INFINITY;
        for (&t, &failed) in row.iter().zip(fail) {
            if failed {
                continue;
            }
            if !(t > 0.0 && t.is_finite()) {
                return Err(BenchError::Input(format!("cost {t} in row {p} is not positive")));
            }
            best = best.min(t);
        }
        if best.is_infinite() {
            return Err(BenchError::AllFailedRow(p));
        }
        ratios.push(
            row.iter()
                .zip(fail)
                .map(|(&t, &failed)| if failed { f64::NAN } else { t / best })
                .collect::<Vec<f64>>(),
        );
    }

    let max_ratio = ratios
        .iter()
        .flatten()
        .filter(|r| !r.is_nan())
        .fold(1.0f64, |m, &r| m.max(r));
    let rho_max = max_ratio + 1.0;
    for row in &mut ratios {
        for r in row.iter_mut() {
            if r.is_nan() {
                *r = rho_max;
            }
        }
    }

    // rho_max closes every curve at the right edge of the plot
    let mut breakpoints: Vec<f64> = ratios.iter().flatten().copied().chain([rho_max]).collect();
    breakpoints.sort_by(f64::total_cmp);
    breakpoints.dedup();
    let mut profile = PerformanceProfile {
        ratios,
        rho_max,
        breakpoints,
        curves: Vec::new(),
    };
    profile.curves = (0..n_solvers)
        .map(|s| profile.breakpoints.iter().map(|&xi| profile.value(s, xi)).collect())
        .collect();
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_pair() {
        let p = performance_profile(&[vec![1.0, 2.0], vec![2.0, 1.0]], &[vec![false; 2], vec![false; 2]]).unwrap();
        assert_eq!(p.ratios, vec![vec![1.0, 2.0], vec![2.0, 1.0]]);
        for s in 0..2 {
            assert_eq!(p.value(s, 1.0), 0.5);
            assert_eq!(p.value(s, 2.0), 1.0);
        }
        assert_eq!(p.breakpoints, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn single_solver_is_always_best() {
        let p = performance_profile(&[vec![3.0], vec![0.2]], &[vec![false], vec![false]]).unwrap();
        assert!(p.ratios.iter().all(|r| r[0] == 1.0));
        assert_eq!(p.value(0, 1.0), 1.0);
    }

    #[test]
    fn failure_gets_sentinel() {
        let p = performance_profile(&[vec![1.0, 2.0], vec![1.0, 5.0]], &[vec![false, false], vec![false, true]]).unwrap();
        assert_eq!(p.rho_max, 3.0);
        assert_eq!(p.ratios[1][1], 3.0);
        assert_eq!(p.value(1, 2.0), 0.5);
        assert_eq!(p.value(1, 2.999), 0.5);
        assert_eq!(p.value(1, 3.0), 1.0);
    }

    #[test]
    fn all_failed_row_is_an_error() {
        let r = performance_profile(&[vec![1.0, 2.0], vec![1.0, 1.0]], &[vec![false, false], vec![true, true]]);
        assert!(matches!(r, Err(BenchError::AllFailedRow(1))));
    }

    #[test]
    fn ties_share_ratio_one_and_curves_are_monotone() {
        let p = performance_profile(
            &[vec![2.0, 2.0, 3.0], vec![1.0, 4.0, 1.5], vec![5.0, 1.0, 1.0]],
            &[vec![false; 3], vec![false, false, true], vec![false; 3]],
        )
        .unwrap();
        assert_eq!(p.ratios[0][0], 1.0);
        assert_eq!(p.ratios[0][1], 1.0);
        let at_one: f64 = (0..3).map(|s| p.value(s, 1.0)).sum();
        assert!(at_one >= 1.0);
        for c in &p.curves {
            assert!(c.windows(2).all(|w| w[0] <= w[1]));
            assert!(c.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
