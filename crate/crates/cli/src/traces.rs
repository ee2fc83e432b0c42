//! Plot-ready series of the objective gap and fit against function
//! evaluations, one pair of files per solver and instance.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{BenchError, Result};

/// Per-iterate history of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSeries {
    pub solver: String,
    /// Cumulative function evaluations at each iterate.
    pub function_evals: Vec<usize>,
    pub f: Vec<f64>,
    /// Fit of the MAP impulse response at each iterate.
    pub fit: Vec<f64>,
}

/// Best final objective over the series.
pub fn reference_minimum(series: &[TraceSeries]) -> Option<f64> {
    series.iter().filter_map(|s| s.f.last().copied()).reduce(f64::min)
}

/// `max(0, (f - f*) / |f*|)`
pub fn relative_gap(f: f64, f_star: f64) -> f64 {
    ((f - f_star) / f_star.abs()).max(0.0)
}

/// Writes `<instance>_<solver>_gap.csv` (`nf,rel_diff`) and
/// `<instance>_<solver>_fit.csv` (`nf,fit`) into `dir`. The reference `f*`
/// is the best final value among the given solvers, so all files of one
/// instance share it.
pub fn emit_trace_plots(instance: &str, series: &[TraceSeries], dir: &Path) -> Result<Vec<PathBuf>> {
    let f_star = reference_minimum(series).ok_or_else(|| BenchError::Input("no trace to emit".into()))?;
    fs::create_dir_all(dir)?;
    let mut files = Vec::with_capacity(2 * series.len());
    for s in series {
        if s.f.len() != s.function_evals.len() || s.fit.len() != s.f.len() {
            return Err(BenchError::Input(format!("ragged trace for solver {}", s.solver)));
        }
        let gap_path = dir.join(format!("{instance}_{}_gap.csv", s.solver));
        let mut w = csv::Writer::from_path(&gap_path)?;
        w.write_record(["nf", "rel_diff"])?;
        for (nf, f) in s.function_evals.iter().zip(&s.f) {
            w.write_record([nf.to_string(), relative_gap(*f, f_star).to_string()])?;
        }
        w.flush()?;
        files.push(gap_path);

        let fit_path = dir.join(format!("{instance}_{}_fit.csv", s.solver));
        let mut w = csv::Writer::from_path(&fit_path)?;
        w.write_record(["nf", "fit"])?;
        for (nf, fit) in s.function_evals.iter().zip(&s.fit) {
            w.write_record([nf.to_string(), fit.to_string()])?;
        }
        w.flush()?;
        files.push(fit_path);
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(name: &str, f: Vec<f64>) -> TraceSeries {
        TraceSeries {
            solver: name.into(),
            function_evals: (1..=f.len()).collect(),
            fit: vec![50.0; f.len()],
            f,
        }
    }

    #[test]
    fn gap_is_clipped_and_shared() {
        let s = [series("sgp", vec![10.0, 4.0, 2.0]), series("gp", vec![10.0, 6.0, 3.0])];
        assert_eq!(reference_minimum(&s), Some(2.0));
        assert_eq!(relative_gap(2.0, 2.0), 0.0);
        assert_eq!(relative_gap(1.9, 2.0), 0.0);
        assert_eq!(relative_gap(3.0, 2.0), 0.5);
        assert_eq!(relative_gap(-1.0, -2.0), 0.5);
        let dir = tempfile::tempdir().unwrap();
        let files = emit_trace_plots("x", &s, dir.path()).unwrap();
        assert_eq!(files.len(), 4);
        let text = fs::read_to_string(&files[0]).unwrap();
        assert_eq!(text, "nf,rel_diff\n1,4\n2,1\n3,0\n");
    }
}
