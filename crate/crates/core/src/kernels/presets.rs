use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use super::KernelSpec;
use crate::error::{Error, Result};
use crate::likelihood::HyperPoint;
use crate::optimizer::Bounds;

/// Lower bound on the noise variance shared by every preset.
pub const SIGMA2_LOWER: f64 = 1e-2;

/// The five kernel configurations used for benchmarking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Preset {
    /// Multiple kernel over a 9 x 6 grid of DC kernels (m = 54).
    DcM,
    /// Multiple kernel over 21 TC and 8 SS kernels (m = 29).
    TcssM,
    Dc,
    Tc,
    Ss,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::DcM, Preset::TcssM, Preset::Dc, Preset::Tc, Preset::Ss];

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::DcM => "dc-m",
            Preset::TcssM => "tcss-m",
            Preset::Dc => "dc",
            Preset::Tc => "tc",
            Preset::Ss => "ss",
        }
    }

    pub fn is_multiple(self) -> bool {
        matches!(self, Preset::DcM | Preset::TcssM)
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dc-m" => Ok(Preset::DcM),
            "tcss-m" => Ok(Preset::TcssM),
            "dc" => Ok(Preset::Dc),
            "tc" => Ok(Preset::Tc),
            "ss" => Ok(Preset::Ss),
            _ => Err(Error::UnknownPreset(s.to_string())),
        }
    }
}

/// Kernel, feasible box and starting point for one preset.
#[derive(Debug, Clone)]
pub struct PresetProblem {
    pub preset: Preset,
    pub spec: KernelSpec,
    pub bounds: Bounds,
    /// Default starting point for the preset. For DC its `mu` entry lies
    /// below the box; the solvers project it.
    pub x0: HyperPoint,
}

/// Grid values of `mu` for the DC-M basis.
pub fn dcm_mu_grid() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

pub const DCM_RHO_GRID: [f64; 6] = [-0.95, -0.65, -0.35, 0.35, 0.65, 0.95];

/// Decay rates of the TC (21 values) and SS (8 values) members of TCSS-M.
pub fn tcssm_mu_grids() -> (Vec<f64>, Vec<f64>) {
    let tc = (2..=15)
        .map(|i| i as f64 * 0.05)
        .chain((0..=6).map(|i| 0.81 + 0.02 * i as f64))
        .collect();
    let ss = (0..=7).map(|i| 0.8 + 0.02 * i as f64).collect();
    (tc, ss)
}

pub fn make_preset(preset: Preset, order: usize) -> Result<PresetProblem> {
    let inf = f64::INFINITY;
    let (spec, lower, upper, x0) = match preset {
        Preset::DcM | Preset::TcssM => {
            let spec = KernelSpec::multiple(multiple_basis(preset, order)?)?;
            let m = spec.num_params();
            let mut lower = vec![0.0; m];
            lower.push(SIGMA2_LOWER);
            let upper = vec![inf; m + 1];
            let x0 = HyperPoint::new(vec![1.0; m], 1.0);
            (spec, lower, upper, x0)
        }
        Preset::Dc => (
            KernelSpec::dc(order)?,
            vec![0.0, 0.72, -0.99, SIGMA2_LOWER],
            vec![inf, 0.99, 0.99, inf],
            HyperPoint::new(vec![0.5, 0.5, 0.8], 0.5),
        ),
        Preset::Tc | Preset::Ss => (
            if preset == Preset::Tc {
                KernelSpec::tc(order)?
            } else {
                KernelSpec::ss(order)?
            },
            vec![0.0, 0.7, SIGMA2_LOWER],
            vec![inf, 0.99, inf],
            HyperPoint::new(vec![0.5, 0.8], 0.5),
        ),
    };
    Ok(PresetProblem {
        preset,
        spec,
        bounds: Bounds::new(lower, upper)?,
        x0,
    })
}

fn multiple_basis(preset: Preset, order: usize) -> Result<Vec<DMatrix<f64>>> {
    let mut basis = Vec::new();
    match preset {
        Preset::DcM => {
            let dc = KernelSpec::dc(order)?;
            for mu in dcm_mu_grid() {
                for rho in DCM_RHO_GRID {
                    basis.push(dc.eval(&[1.0, mu, rho])?);
                }
            }
        }
        Preset::TcssM => {
            let (tc_grid, ss_grid) = tcssm_mu_grids();
            let tc = KernelSpec::tc(order)?;
            let ss = KernelSpec::ss(order)?;
            for mu in tc_grid {
                basis.push(tc.eval(&[1.0, mu])?);
            }
            for mu in ss_grid {
                basis.push(ss.eval(&[1.0, mu])?);
            }
        }
        _ => unreachable!("parametric presets have no basis"),
    }
    Ok(basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelFamily;

    #[test]
    fn preset_names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(p.as_str().parse::<Preset>().unwrap(), p);
        }
        assert!(matches!("dcm".parse::<Preset>(), Err(Error::UnknownPreset(_))));
        assert_eq!("DC-M".parse::<Preset>().unwrap(), Preset::DcM);
    }

    #[test]
    fn dcm_has_54_basis_matrices() {
        let p = make_preset(Preset::DcM, 100).unwrap();
        assert_eq!(p.spec.num_params(), 54);
        assert!(matches!(p.spec.family(), KernelFamily::Multiple(b) if b.iter().all(|m| m.nrows() == 100)));
        let b = &p.bounds;
        assert!(b.lower().as_slice()[..54].iter().all(|&l| l == 0.0));
        assert!(b.upper().iter().all(|u| u.is_infinite()));
        assert_eq!(b.lower()[54], 1e-2);
        assert_eq!(p.x0.to_vector().as_slice(), &[1.0; 55][..]);
    }

    #[test]
    fn tcssm_has_29_basis_matrices() {
        let (tc, ss) = tcssm_mu_grids();
        assert_eq!(tc.len(), 21);
        assert_eq!(ss.len(), 8);
        assert!((tc[13] - 0.75).abs() < 1e-15 && (tc[20] - 0.93).abs() < 1e-15);
        assert!((ss[7] - 0.94).abs() < 1e-15);
        let p = make_preset(Preset::TcssM, 100).unwrap();
        assert_eq!(p.spec.num_params(), 29);
    }

    #[test]
    fn tc_preset_box_and_start() {
        let p = make_preset(Preset::Tc, 10).unwrap();
        assert!(matches!(p.spec.family(), KernelFamily::Tc));
        assert_eq!(p.bounds.lower().as_slice(), &[0.0, 0.7, 1e-2]);
        assert_eq!(p.bounds.upper()[0], f64::INFINITY);
        assert_eq!(p.bounds.upper()[1], 0.99);
        assert_eq!(p.bounds.upper()[2], f64::INFINITY);
        assert_eq!(p.x0.to_vector().as_slice(), &[0.5, 0.8, 0.5]);
    }

    #[test]
    fn dc_preset_box() {
        let p = make_preset(Preset::Dc, 10).unwrap();
        assert_eq!(p.bounds.lower().as_slice(), &[0.0, 0.72, -0.99, 1e-2]);
        assert_eq!(&p.bounds.upper().as_slice()[1..3], &[0.99, 0.99]);
        assert_eq!(p.x0.to_vector().as_slice(), &[0.5, 0.5, 0.8, 0.5]);
    }
}
