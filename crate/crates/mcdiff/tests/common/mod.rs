//! Shared generators for the integration suites. Everything is seeded
//! explicitly so failures reproduce.

#![allow(dead_code)]

use mcdiff::closures::MaxwellStefanClosure;
use mcdiff::groupinv::RankDeficientMatrix;
use mcdiff::MixtureState;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Strict random state: fractions bounded away from zero, moderate molar
/// mass contrast.
pub fn random_state(rng: &mut ChaCha8Rng, n: usize) -> MixtureState {
    let y_raw = DVector::from_fn(n, |_, _| rng.gen_range(0.05..1.0));
    let total: f64 = y_raw.sum();
    let y = y_raw / total;
    let molar_mass = DVector::from_fn(n, |_, _| rng.gen_range(0.01..0.1));
    let temperature = rng.gen_range(250.0..360.0);
    let density = rng.gen_range(0.5..2.0);
    MixtureState::new(temperature, density, molar_mass, y).unwrap()
}

/// Symmetric positive friction table with entries in `[lo, hi]`.
pub fn random_friction(
    rng: &mut ChaCha8Rng,
    n: usize,
    lo: f64,
    hi: f64,
) -> MaxwellStefanClosure {
    let mut f = DMatrix::zeros(n, n);
    for i in 0..n {
        for k in i + 1..n {
            let v = rng.gen_range(lo..hi);
            f[(i, k)] = v;
            f[(k, i)] = v;
        }
    }
    MaxwellStefanClosure::validated(f).unwrap()
}

/// Random index-1 instance of rank n-1: kernel vector `b`, cokernel `c`,
/// both with positive entries, and `A = (I - b c^T/<c,b>) G (I - b c^T/<c,b>)`
/// for a random dense `G`. Resamples until the group inverse is comfortably
/// defined (trace of the adjugate bounded away from zero).
pub fn random_index1(rng: &mut ChaCha8Rng, n: usize) -> RankDeficientMatrix {
    loop {
        let b = DVector::from_fn(n, |_, _| rng.gen_range(0.2..1.0));
        let c = DVector::from_fn(n, |_, _| rng.gen_range(0.2..1.0));
        let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let proj = DMatrix::identity(n, n) - &b * c.transpose() / c.dot(&b);
        let a = &proj * g * &proj;
        let adj = mcdiff::groupinv::adjugate(&a).unwrap();
        let d0 = adj.trace();
        let scale: f64 = a.amax().powi((n - 1) as i32).max(f64::MIN_POSITIVE);
        if d0.abs() > 1e-3 * scale {
            return RankDeficientMatrix::new(a, b, c).unwrap();
        }
    }
}

/// Max-norm deviation of `a` from `b` relative to the larger magnitude.
pub fn rel_dev(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = a.amax().max(b.amax()).max(f64::MIN_POSITIVE);
    (a - b).amax() / scale
}
