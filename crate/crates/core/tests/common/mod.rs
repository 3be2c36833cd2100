#![allow(dead_code)]

use std::sync::Arc;

use impdde::{DeclaredConstants, Partition, Problem, SystemSpec};
use nalgebra::{dmatrix, dvector, DVector};

/// Two-dimensional rotation system with one impulse on `(0.8, 1]`, two
/// non-local points and scale `big_r`:
/// `f = (z1(t-r)^2, z2(t-r)^2)/R`, `G = cos(s_1)/R sin(z)`, `g = (y1 + y2)/R`.
pub fn impulsive_spec(big_r: f64) -> SystemSpec {
    let s1: f64 = 1.0;
    let r = 0.5;
    SystemSpec::new(2, Partition::new(r, 2.0, vec![(0.8, s1)], vec![0.3, 1.5]))
        .with_constant_matrix(dmatrix![0.0, 1.0; -1.0, 0.0])
        .with_drift(move |_, h| dvector![h.component(0, -r).powi(2) / big_r, h.component(1, -r).powi(2) / big_r])
        .with_impulse_maps(vec![move |_: f64, x: &DVector<f64>| x.map(f64::sin) * (s1.cos() / big_r)])
        .with_nonlocal(move |t, ys| (ys[0].eval(t) + ys[1].eval(t)) / big_r)
        .with_history(|_| dvector![0.5, 0.5])
        .with_lags(vec![r])
        .with_declared(DeclaredConstants {
            m: None,
            lipschitz_impulse: Some(s1.cos().abs() / big_r),
            lipschitz_nonlocal: Some(1.0 / big_r),
            psi: Some(Arc::new(move |x| Ok(x * x / big_r))),
            k: Some(Arc::new(move |u, v| Ok((u + v) / big_r))),
            growth: None,
        })
}

pub fn impulsive(big_r: f64, step: Option<f64>) -> Problem {
    Problem::new(impulsive_spec(big_r), step).unwrap()
}

/// `z' = z(t - 1)`, `φ ≡ 1`, on `[-1, tau]`.
pub fn pure_delay_spec(tau: f64) -> SystemSpec {
    SystemSpec::new(1, Partition::new(1.0, tau, vec![], vec![]))
        .with_drift(|_, h| dvector![h.component(0, -1.0)])
        .with_history(|_| dvector![1.0])
        .with_lags(vec![1.0])
}

/// Method-of-steps solution of [`pure_delay_spec`] on `[0, 3]`.
pub fn pure_delay_exact(t: f64) -> f64 {
    if t <= 0.0 {
        1.0
    } else if t <= 1.0 {
        1.0 + t
    } else if t <= 2.0 {
        1.0 + t + (t - 1.0).powi(2) / 2.0
    } else {
        3.5 + (t * t - 4.0) / 2.0 + (t - 2.0).powi(3) / 6.0
    }
}

/// `z' = z(t)^2`, `φ ≡ 2`: escapes at `t = 0.5`.
pub fn riccati_spec() -> SystemSpec {
    SystemSpec::new(1, Partition::new(0.1, 0.2, vec![], vec![]))
        .with_drift(|_, h| dvector![h.component(0, 0.0).powi(2)])
        .with_history(|_| dvector![2.0])
        .with_lags(vec![0.0])
}

pub fn rotation() -> nalgebra::DMatrix<f64> {
    dmatrix![0.0, 1.0; -1.0, 0.0]
}
