//! Systems shared by the benchmarks.

use std::sync::Arc;

use impdde::{DeclaredConstants, Partition, SystemSpec};
use nalgebra::{dmatrix, dvector, DMatrix, DVector};

/// Rotation with delayed quadratic drift, one impulse and two non-local
/// points, scaled by `big_r`.
pub fn impulsive_spec(big_r: f64) -> SystemSpec {
    let r = 0.5;
    SystemSpec::new(2, Partition::new(r, 2.0, vec![(0.8, 1.0)], vec![0.3, 1.5]))
        .with_constant_matrix(dmatrix![0.0, 1.0; -1.0, 0.0])
        .with_drift(move |_, h| dvector![h.component(0, -r).powi(2) / big_r, h.component(1, -r).powi(2) / big_r])
        .with_impulse_maps(vec![move |_: f64, x: &DVector<f64>| x.map(f64::sin) * (1f64.cos() / big_r)])
        .with_nonlocal(move |t, ys| (ys[0].eval(t) + ys[1].eval(t)) / big_r)
        .with_history(|_| dvector![0.5, 0.5])
        .with_lags(vec![r])
        .with_declared(DeclaredConstants {
            m: None,
            lipschitz_impulse: Some(1f64.cos() / big_r),
            lipschitz_nonlocal: Some(1.0 / big_r),
            psi: Some(Arc::new(move |x| Ok(x * x / big_r))),
            k: Some(Arc::new(move |u, v| Ok((u + v) / big_r))),
            growth: None,
        })
}

/// `z' = (A0 + t A1) z` in dimension `n` with fixed pseudo-random entries.
pub fn affine_generator(n: usize) -> SystemSpec {
    let entry = |i: usize, j: usize, k: usize| ((i * 7 + j * 13 + k * 29) as f64 * 0.37).sin() / (n as f64).sqrt();
    let a0 = DMatrix::from_fn(n, n, |i, j| entry(i, j, 0));
    let a1 = DMatrix::from_fn(n, n, |i, j| entry(i, j, 1));
    SystemSpec::new(n, Partition::new(0.5, 2.0, vec![], vec![])).with_matrix(move |t| &a0 + &a1 * t)
}
