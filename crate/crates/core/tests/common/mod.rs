#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sgp_sysid::likelihood::HyperPoint;
use sgp_sysid::KernelSpec;

/// White input and a noisy decaying response, deterministic in `seed`.
pub fn random_record(len: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y = (0..len)
        .map(|t| {
            let mut s = 0.0;
            for k in 1..=t.min(12) {
                s += 0.8f64.powi(k as i32) * u[t - k];
            }
            s + 0.2 * rng.random_range(-1.0..1.0)
        })
        .collect();
    (u, y)
}

/// One kernel of each family with an interior evaluation point.
pub fn small_specs(order: usize) -> Vec<(KernelSpec, HyperPoint)> {
    let tc = KernelSpec::tc(order).unwrap();
    let basis = vec![
        tc.eval(&[1.0, 0.5]).unwrap(),
        tc.eval(&[1.0, 0.8]).unwrap(),
        KernelSpec::ss(order).unwrap().eval(&[1.0, 0.9]).unwrap(),
        DMatrix::identity(order, order),
    ];
    vec![
        (tc, HyperPoint::new(vec![1.3, 0.75], 0.4)),
        (KernelSpec::ss(order).unwrap(), HyperPoint::new(vec![2.0, 0.85], 0.3)),
        (KernelSpec::dc(order).unwrap(), HyperPoint::new(vec![0.9, 0.8, 0.4], 0.35)),
        (KernelSpec::dc(order).unwrap(), HyperPoint::new(vec![1.1, 0.7, -0.6], 0.5)),
        (
            KernelSpec::multiple(basis).unwrap(),
            HyperPoint::new(vec![0.4, 1.2, 0.05, 0.3], 0.25),
        ),
    ]
}
