//! Synthetic identification records, the two-step estimator and the fit score.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::presets::{make_preset, Preset};
use crate::likelihood::{map_estimate, HyperPoint, LikelihoodObjective, ProblemData};
use crate::optimizer::{SolverConfig, SolverKind, SolverResult};

/// Model order used by the standard records.
pub const DEFAULT_ORDER: usize = 100;

const MAX_DRAWS: usize = 100;

/// Recipe for a random stable system and a record generated from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    /// Number of poles (and zeros) of the true system.
    pub true_order: usize,
    /// All poles and zeros are drawn inside this radius.
    pub pole_radius_max: f64,
    /// Length of the true impulse response kept, and the estimated order.
    pub n_est: usize,
    /// Record length `N`.
    pub n_data: usize,
    pub snr: f64,
}

impl SystemSpec {
    pub fn new(n_data: usize, snr: f64, n_est: usize) -> Self {
        Self {
            true_order: 30,
            pole_radius_max: 0.95,
            n_est,
            n_data,
            snr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pole_radius_max > 0.0 && self.pole_radius_max < 1.0) {
            return Err(Error::ParamOutOfDomain {
                name: "pole_radius_max",
                value: self.pole_radius_max,
                domain: "0 < r < 1",
            });
        }
        if !(self.snr > 0.0 && self.snr.is_finite()) {
            return Err(Error::ParamOutOfDomain {
                name: "snr",
                value: self.snr,
                domain: "snr > 0",
            });
        }
        if self.true_order == 0 {
            return Err(Error::InvalidConfig("true_order must be at least 1".into()));
        }
        if self.n_est == 0 || self.n_data <= self.n_est {
            return Err(Error::InsufficientData {
                len: self.n_data,
                order: self.n_est,
            });
        }
        Ok(())
    }
}

/// One input/output record with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub theta_true: Vec<f64>,
    pub sigma2_true: f64,
    pub snr: f64,
    pub seed: u64,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        if self.u.len() != self.y.len() {
            return Err(Error::DimensionMismatch {
                what: "output length",
                expected: self.u.len(),
                got: self.y.len(),
            });
        }
        if self.u.len() <= self.theta_true.len() || self.theta_true.is_empty() {
            return Err(Error::InsufficientData {
                len: self.u.len(),
                order: self.theta_true.len(),
            });
        }
        if self.snr.is_nan() || self.snr <= 0.0 {
            return Err(Error::ParamOutOfDomain {
                name: "snr",
                value: self.snr,
                domain: "snr > 0",
            });
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.theta_true.len()
    }

    /// 64-bit FNV-1a hash of the bit patterns of `u` and `y`.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in self.u.iter().chain(&self.y) {
            for b in v.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }

    /// Writes `t,u,y` to `path` and the ground truth to [`sidecar_path`].
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        write_record(path, &self.u, &self.y)?;
        let meta = Sidecar {
            seed: self.seed,
            snr: self.snr,
            sigma2_true: self.sigma2_true,
            theta_true: self.theta_true.clone(),
        };
        serde_json::to_writer_pretty(BufWriter::new(File::create(sidecar_path(path))?), &meta)?;
        Ok(())
    }

    /// Reads a record saved by [`Dataset::save`]; the sidecar must exist.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (u, y) = read_record(path)?;
        let meta: Sidecar = serde_json::from_reader(BufReader::new(File::open(sidecar_path(path))?))?;
        let ds = Dataset {
            u,
            y,
            theta_true: meta.theta_true,
            sigma2_true: meta.sigma2_true,
            snr: meta.snr,
            seed: meta.seed,
        };
        ds.validate()?;
        Ok(ds)
    }
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    seed: u64,
    snr: f64,
    sigma2_true: f64,
    theta_true: Vec<f64>,
}

/// `data.csv` -> `data.json`
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes `t,u,y` with 17 significant digits, `t` counted from 1.
pub fn write_record(path: &Path, u: &[f64], y: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "u", "y"])?;
    for (t, (a, b)) in u.iter().zip(y).enumerate() {
        w.write_record([(t + 1).to_string(), format!("{a:.16e}"), format!("{b:.16e}")])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct Row {
    #[allow(dead_code)]
    t: u64,
    u: f64,
    y: f64,
}

/// Reads a `t,u,y` file.
pub fn read_record(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut r = csv::Reader::from_path(path)?;
    let mut u = Vec::new();
    let mut y = Vec::new();
    for row in r.deserialize() {
        let row: Row = row?;
        u.push(row.u);
        y.push(row.y);
    }
    Ok((u, y))
}

/// The four standard record types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DatasetPreset {
    D1,
    D2,
    D3,
    D4,
}

impl DatasetPreset {
    pub const ALL: [DatasetPreset; 4] = [DatasetPreset::D1, DatasetPreset::D2, DatasetPreset::D3, DatasetPreset::D4];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetPreset::D1 => "D1",
            DatasetPreset::D2 => "D2",
            DatasetPreset::D3 => "D3",
            DatasetPreset::D4 => "D4",
        }
    }

    /// `(N, snr)`
    pub fn size_and_snr(self) -> (usize, f64) {
        match self {
            DatasetPreset::D1 => (210, 10.0),
            DatasetPreset::D2 => (210, 1.0),
            DatasetPreset::D3 => (500, 10.0),
            DatasetPreset::D4 => (500, 1.0),
        }
    }

    pub fn system(self, n_est: usize) -> SystemSpec {
        let (n, snr) = self.size_and_snr();
        SystemSpec::new(n, snr, n_est)
    }
}

impl fmt::Display for DatasetPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DatasetPreset::ALL
            .into_iter()
            .find(|d| d.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

/// A generated record together with its noise-free output.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub dataset: Dataset,
    pub noise_free: Vec<f64>,
}

/// `y(t) = sum_{k=1..n} theta_k u(t-k)` with zero initial conditions
/// (`t` 0-based, `theta_1` stored at index 0).
pub fn convolve(theta: &[f64], u: &[f64]) -> Vec<f64> {
    (0..u.len())
        .map(|t| {
            theta
                .iter()
                .take(t)
                .enumerate()
                .map(|(k, th)| th * u[t - 1 - k])
                .sum()
        })
        .collect()
}

/// Multiplies `poly` (coefficients of `q^-0, q^-1, ...`) by
/// `1 - 2 r cos(phi) q^-1 + r^2 q^-2`.
fn mul_conjugate_pair(poly: &[f64], r: f64, phi: f64) -> Vec<f64> {
    let c = [1.0, -2.0 * r * phi.cos(), r * r];
    let mut out = vec![0.0; poly.len() + 2];
    for (i, p) in poly.iter().enumerate() {
        for (j, cj) in c.iter().enumerate() {
            out[i + j] += p * cj;
        }
    }
    out
}

fn random_polynomial(rng: &mut ChaCha8Rng, order: usize, radius: f64) -> Vec<f64> {
    let mut poly = vec![1.0];
    for _ in 0..order / 2 {
        let r = radius * rng.random::<f64>().sqrt();
        let phi = std::f64::consts::PI * rng.random::<f64>();
        poly = mul_conjugate_pair(&poly, r, phi);
    }
    if order % 2 == 1 {
        let r = radius * (2.0 * rng.random::<f64>() - 1.0);
        poly.push(0.0);
        for i in (1..poly.len()).rev() {
            poly[i] -= r * poly[i - 1];
        }
    }
    poly
}

/// First `len` impulse-response coefficients of `q^-1 B(q) / A(q)`
/// (the response at lag 0 is zero and is not stored).
fn impulse_response(b: &[f64], a: &[f64], len: usize) -> Vec<f64> {
    let mut g = vec![0.0; len];
    for t in 0..len {
        let mut v = b.get(t).copied().unwrap_or(0.0);
        for i in 1..a.len().min(t + 1) {
            v -= a[i] * g[t - i];
        }
        g[t] = v;
    }
    g
}

fn draw_theta(rng: &mut ChaCha8Rng, spec: &SystemSpec) -> Result<Vec<f64>> {
    for _ in 0..MAX_DRAWS {
        let a = random_polynomial(rng, spec.true_order, spec.pole_radius_max);
        let b = random_polynomial(rng, spec.true_order, spec.pole_radius_max);
        let theta = impulse_response(&b, &a, spec.n_est);
        let peak = theta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak.is_finite() && peak > 0.0 {
            let theta: Vec<f64> = theta.iter().map(|v| v / peak).collect();
            // a constant response would make the fit undefined
            if theta.iter().any(|v| *v != theta[0]) {
                return Ok(theta);
            }
        }
    }
    Err(Error::UnstableSystem(MAX_DRAWS))
}

fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Generates a record and keeps the noise-free output alongside.
pub fn simulate(spec: &SystemSpec, seed: u64) -> Result<Simulation> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = draw_theta(&mut rng, spec)?;
    let burn = spec.n_est;
    let u_full: Vec<f64> = (0..spec.n_data + burn).map(|_| rng.sample(StandardNormal)).collect();
    let clean_full = convolve(&theta, &u_full);
    let noise_free = clean_full[burn..].to_vec();
    let sigma2 = sample_variance(&noise_free) / spec.snr;
    let sd = sigma2.sqrt();
    let y = noise_free
        .iter()
        .map(|c| c + sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(Simulation {
        dataset: Dataset {
            u: u_full[burn..].to_vec(),
            y,
            theta_true: theta,
            sigma2_true: sigma2,
            snr: spec.snr,
            seed,
        },
        noise_free,
    })
}

/// Random stable system, white Gaussian input, noise at the requested SNR.
/// Deterministic in `seed`.
pub fn simulate_dataset(spec: &SystemSpec, seed: u64) -> Result<Dataset> {
    simulate(spec, seed).map(|s| s.dataset)
}

/// One of `D1..D4` with model order 100.
pub fn preset_dataset(name: &str, seed: u64) -> Result<Dataset> {
    preset_dataset_with_order(name.parse()?, DEFAULT_ORDER, seed)
}

pub fn preset_dataset_with_order(name: DatasetPreset, n_est: usize, seed: u64) -> Result<Dataset> {
    simulate_dataset(&name.system(n_est), seed)
}

/// `W = 100 (1 - |theta* - theta^| / |theta* - mean(theta*)|)`.
pub fn fit_score(theta_hat: &[f64], theta_true: &[f64]) -> Result<f64> {
    if theta_hat.len() != theta_true.len() {
        return Err(Error::DimensionMismatch {
            what: "estimated impulse response",
            expected: theta_true.len(),
            got: theta_hat.len(),
        });
    }
    let mean = theta_true.iter().sum::<f64>() / theta_true.len() as f64;
    let den: f64 = theta_true.iter().map(|t| (t - mean).powi(2)).sum();
    if den == 0.0 {
        return Err(Error::DegenerateTruth);
    }
    let num: f64 = theta_true.iter().zip(theta_hat).map(|(t, h)| (t - h).powi(2)).sum();
    Ok(100.0 * (1.0 - (num / den).sqrt()))
}

/// Result of hyperparameter estimation followed by the MAP impulse response.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub x_hat: HyperPoint,
    pub theta_hat: DVector<f64>,
    pub result: SolverResult,
}

/// Fits the kernel hyperparameters of `preset` to `(u, y)` and returns the
/// MAP impulse response of length `order` at the solution.
pub fn estimate(
    u: &[f64],
    y: &[f64],
    order: usize,
    preset: Preset,
    solver: SolverKind,
    config: &SolverConfig,
) -> Result<Estimate> {
    let setup = make_preset(preset, order)?;
    let problem = ProblemData::new(u, y, setup.spec)?;
    let mut objective = LikelihoodObjective::new(&problem);
    let result = solver.solve(&mut objective, &setup.bounds, &setup.x0.to_vector(), config)?;
    let x_hat = HyperPoint::from_slice(result.x_final.as_slice());
    let theta_hat = map_estimate(&problem, &x_hat)?;
    Ok(Estimate {
        x_hat,
        theta_hat,
        result,
    })
}

#[derive(Debug, Clone)]
pub struct Identification {
    pub estimate: Estimate,
    pub fit: f64,
}

/// [`estimate`] at the dataset's own order, scored against its truth.
pub fn identify(dataset: &Dataset, preset: Preset, solver: SolverKind, config: &SolverConfig) -> Result<Identification> {
    dataset.validate()?;
    let est = estimate(&dataset.u, &dataset.y, dataset.order(), preset, solver, config)?;
    let fit = fit_score(est.theta_hat.as_slice(), &dataset.theta_true)?;
    Ok(Identification { estimate: est, fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fit_examples() {
        let t = [1.0, 3.0];
        assert_eq!(fit_score(&t, &t).unwrap(), 100.0);
        assert_eq!(fit_score(&[2.0, 2.0], &t).unwrap(), 0.0);
        assert_relative_eq!(fit_score(&[1.0, 1.0], &t).unwrap(), 100.0 * (1.0 - 2f64.sqrt()), max_relative = 1e-14);
        assert!(matches!(fit_score(&[1.0, 1.0], &[2.0, 2.0]), Err(Error::DegenerateTruth)));
        assert!(fit_score(&[1.0], &t).is_err());
    }

    #[test]
    fn impulse_input_reproduces_theta() {
        let theta = [0.5, -0.25, 0.125];
        let mut u = vec![0.0; 6];
        u[0] = 1.0;
        assert_eq!(convolve(&theta, &u), vec![0.0, 0.5, -0.25, 0.125, 0.0, 0.0]);
    }

    #[test]
    fn recursion_matches_geometric_response() {
        // q^-1 / (1 - 0.5 q^-1) -> 1, 0.5, 0.25, ...
        let g = impulse_response(&[1.0], &[1.0, -0.5], 4);
        assert_eq!(g, vec![1.0, 0.5, 0.25, 0.125]);
        let p = mul_conjugate_pair(&[1.0], 0.5, std::f64::consts::FRAC_PI_2);
        assert_relative_eq!(p[1], 0.0, epsilon = 1e-16);
        assert_eq!(p[2], 0.25);
    }

    #[test]
    fn presets_and_determinism() {
        assert_eq!(DatasetPreset::D1.size_and_snr(), (210, 10.0));
        assert_eq!(DatasetPreset::D4.size_and_snr(), (500, 1.0));
        assert!(matches!(preset_dataset("D9", 1), Err(Error::UnknownPreset(_))));
        let a = preset_dataset("d1", 7).unwrap();
        let b = preset_dataset("D1", 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.u.len(), 210);
        assert_eq!(a.theta_true.len(), 100);
        assert_relative_eq!(a.theta_true.iter().fold(0.0f64, |m, v| m.max(v.abs())), 1.0);
        assert_ne!(a.checksum(), preset_dataset("D1", 8).unwrap().checksum());
    }

    #[test]
    fn record_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rec.csv");
        let ds = simulate_dataset(&SystemSpec::new(60, 3.0, 20), 11).unwrap();
        ds.save(&path).unwrap();
        assert_eq!(Dataset::load(&path).unwrap(), ds);
    }
}
