//! Empirical-Bayes estimation of FIR impulse responses.
//!
//! The kernel hyperparameters and the noise variance are found by minimizing
//! the negative log marginal likelihood over a box with a scaled gradient
//! projection method; the impulse response is then the posterior mean at the
//! solution.
//!
//! ```no_run
//! use sgp_sysid::{identify, preset_dataset, Preset, SolverConfig, SolverKind};
//!
//! let data = preset_dataset("D1", 42)?;
//! let out = identify(&data, Preset::DcM, SolverKind::Sgp, &SolverConfig::default())?;
//! println!("fit {:.2} after {} iterations", out.fit, out.estimate.result.iterations);
//! # Ok::<(), sgp_sysid::Error>(())
//! ```

pub mod error;
pub mod kernels;
pub mod likelihood;
pub mod optimizer;
pub mod sysid;

pub use error::{Error, Result};
pub use kernels::presets::{make_preset, Preset, PresetProblem};
pub use kernels::{KernelFamily, KernelSpec};
pub use likelihood::{evaluate, hessian, map_estimate, Evaluation, HyperPoint, LikelihoodObjective, ProblemData};
pub use optimizer::{
    ascbb_solve, sgp_solve, Bounds, Objective, Scaling, SolverConfig, SolverKind, SolverResult, SplitEval, Termination,
    TraceRecord,
};
pub use sysid::{fit_score, identify, preset_dataset, simulate_dataset, Dataset, DatasetPreset, SystemSpec};
