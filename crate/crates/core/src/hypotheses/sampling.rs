//! Monte-Carlo lower bounds for the Lipschitz and growth constants.
//!
//! Sample `k` draws from its own ChaCha stream `(seed, k)`, so the result for
//! `m` samples is the maximum over a prefix of the result for `2m` samples.
//! Samples cycle through three kinds: independent points, points on the
//! sphere of the given radius, and a base point with a small perturbation.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::envelope::{Table1, Table2};
use crate::error::{Error, Result};
use crate::model::{History, SampledHistory, SystemSpec};

/// Knots of every random history on `[-r, 0]`.
pub const KNOTS: usize = 8;
const PERTURBATION: f64 = 1e-3;

pub(crate) fn rng_for(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Uniform in the closed ball (or on its sphere).
pub(crate) fn ball_point(rng: &mut ChaCha8Rng, n: usize, radius: f64, on_sphere: bool) -> Vec<f64> {
    let scale = if on_sphere { radius } else { radius * rng.random::<f64>().powf(1.0 / n as f64) };
    direction(rng, n).into_iter().map(|x| x * scale).collect()
}

fn knot_times(r: f64) -> Vec<f64> {
    (0..KNOTS).map(|k| -r + r * k as f64 / (KNOTS - 1) as f64).collect()
}

/// Piecewise-linear history with [`KNOTS`] knots, each uniform in the ball.
pub fn random_history(rng: &mut ChaCha8Rng, r: f64, n: usize, radius: f64, on_sphere: bool) -> SampledHistory {
    let values = (0..KNOTS).flat_map(|_| ball_point(rng, n, radius, on_sphere)).collect();
    SampledHistory { r, n, knots: knot_times(r), values }
}

fn perturbed(rng: &mut ChaCha8Rng, base: &SampledHistory, size: f64) -> SampledHistory {
    let w = random_history(rng, base.r, base.n, size, false);
    let values = base.values.iter().zip(&w.values).map(|(a, b)| a + b).collect();
    SampledHistory { values, ..base.clone() }
}

fn scaled(h: &SampledHistory, factor: f64) -> SampledHistory {
    SampledHistory { values: h.values.iter().map(|x| x * factor).collect(), ..h.clone() }
}

fn sup_diff(a: &SampledHistory, b: &SampledHistory) -> f64 {
    a.values
        .chunks_exact(a.n)
        .zip(b.values.chunks_exact(b.n))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 1e-300 { num / den } else { 0.0 }
}

fn par_max<F>(samples: usize, f: F) -> Result<f64>
where
    F: Fn(u64) -> Result<f64> + Sync + Send,
{
    (0..samples as u64).into_par_iter().map(f).try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// A sampled constant together with the residual of the zero condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzEstimate {
    pub value: f64,
    /// `max ‖map(0)‖` over the sampled times.
    pub zero_residual: f64,
}

/// Residual of `g(0, …, 0) = 0` over `[-r, 0]`.
pub fn nonlocal_zero_residual(spec: &SystemSpec) -> Result<f64> {
    let q = spec.partition.q();
    if q == 0 {
        return Ok(0.0);
    }
    let r = spec.partition.r;
    let zero = SampledHistory { r, n: spec.n, knots: knot_times(r), values: vec![0.0; KNOTS * spec.n] };
    let views: Vec<History<'_>> = (0..q).map(|_| zero.view()).collect();
    let mut worst: f64 = 0.0;
    for k in 0..=32 {
        let t = -r + r * k as f64 / 32.0;
        worst = worst.max(spec.eval_nonlocal(t, &views)?.norm());
    }
    Ok(worst)
}

/// Residual of `G_i(t, 0) = 0` over each impulse interval.
pub fn impulse_zero_residual(spec: &SystemSpec) -> Result<f64> {
    let zero = DVector::zeros(spec.n);
    let mut worst: f64 = 0.0;
    for (i, imp) in spec.partition.impulses.iter().enumerate() {
        for k in 0..=16 {
            let t = if imp.s > imp.t { imp.t + (imp.s - imp.t) * k as f64 / 16.0 } else { imp.s };
            worst = worst.max(spec.eval_impulse(i, t, &zero)?.norm());
        }
    }
    Ok(worst)
}

/// Sampled `N_q`: the largest `‖g(y)(t) - g(z)(t)‖ / Σ_j ‖y_j(t) - z_j(t)‖`.
pub fn estimate_lipschitz_g(spec: &SystemSpec, samples: usize, radius: f64, seed: u64) -> Result<LipschitzEstimate> {
    let q = spec.partition.q();
    if q == 0 {
        return Err(Error::Domain("no non-local term to estimate (q = 0)".into()));
    }
    let (r, n) = (spec.partition.r, spec.n);
    let value = par_max(samples, |k| {
        let mut rng = rng_for(seed, k);
        let (ys, zs): (Vec<SampledHistory>, Vec<SampledHistory>) = match k % 3 {
            2 => {
                // common perturbation direction in every input
                let ys: Vec<_> = (0..q).map(|_| random_history(&mut rng, r, n, radius, false)).collect();
                let w = random_history(&mut rng, r, n, radius * PERTURBATION, false);
                let zs = ys
                    .iter()
                    .map(|y| SampledHistory {
                        values: y.values.iter().zip(&w.values).map(|(a, b)| a + b).collect(),
                        ..y.clone()
                    })
                    .collect();
                (ys, zs)
            }
            kind => {
                let on = kind == 1;
                let ys = (0..q).map(|_| random_history(&mut rng, r, n, radius, on)).collect();
                let zs = (0..q).map(|_| random_history(&mut rng, r, n, radius, on)).collect();
                (ys, zs)
            }
        };
        let yv: Vec<History<'_>> = ys.iter().map(SampledHistory::view).collect();
        let zv: Vec<History<'_>> = zs.iter().map(SampledHistory::view).collect();
        let mut times = knot_times(r);
        times.extend((0..2).map(|_| -r * rng.random::<f64>()));
        let mut best: f64 = 0.0;
        for t in times {
            let num = (spec.eval_nonlocal(t, &yv)? - spec.eval_nonlocal(t, &zv)?).norm();
            let den: f64 = yv.iter().zip(&zv).map(|(a, b)| (a.eval(t) - b.eval(t)).norm()).sum();
            best = best.max(ratio(num, den));
        }
        Ok(best)
    })?;
    Ok(LipschitzEstimate { value, zero_residual: nonlocal_zero_residual(spec)? })
}

/// Sampled `L`: the largest `‖G_i(t, x) - G_i(t, y)‖ / ‖x - y‖`.
pub fn estimate_lipschitz_impulses(
    spec: &SystemSpec,
    samples: usize,
    radius: f64,
    seed: u64,
) -> Result<LipschitzEstimate> {
    let big_n = spec.partition.n_impulses();
    if big_n == 0 {
        return Err(Error::Domain("no impulses to estimate (N = 0)".into()));
    }
    let n = spec.n;
    let value = par_max(samples, |k| {
        let mut rng = rng_for(seed, k);
        let i = rng.random_range(0..big_n);
        let imp = spec.partition.impulses[i];
        let t = if imp.s > imp.t { imp.s - (imp.s - imp.t) * rng.random::<f64>() } else { imp.s };
        let (x, y) = match k % 3 {
            2 => {
                let x = ball_point(&mut rng, n, radius, false);
                let w = ball_point(&mut rng, n, radius * PERTURBATION, true);
                let y: Vec<f64> = x.iter().zip(&w).map(|(a, b)| a + b).collect();
                (x, y)
            }
            kind => (ball_point(&mut rng, n, radius, kind == 1), ball_point(&mut rng, n, radius, kind == 1)),
        };
        let (x, y) = (DVector::from_vec(x), DVector::from_vec(y));
        let num = (spec.eval_impulse(i, t, &x)? - spec.eval_impulse(i, t, &y)?).norm();
        Ok(ratio(num, (x - y).norm()))
    })?;
    Ok(LipschitzEstimate { value, zero_residual: impulse_zero_residual(spec)? })
}

/// Sampled `K` and `Ψ` tables on `radii` (positive, increasing), made
/// monotone by running maxima.
pub fn estimate_k_psi(spec: &SystemSpec, samples: usize, radii: &[f64], seed: u64) -> Result<(Table2, Table1)> {
    if radii.is_empty() || radii[0] <= 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("radius grid must be positive and strictly increasing".into()));
    }
    let (r, n, tau) = (spec.partition.r, spec.n, spec.partition.tau);
    let m = radii.len();
    let width = m * m + m;
    let zero = vec![0.0; width];
    let table = (0..samples as u64)
        .into_par_iter()
        .map(|k| -> Result<Vec<f64>> {
            let mut rng = rng_for(seed, k);
            let t = tau * rng.random::<f64>();
            let kind = k % 3;
            let mut out = vec![0.0; width];
            let norm_f = |h: &SampledHistory| spec.eval_drift(t, &h.view());
            for (a, &ua) in radii.iter().enumerate() {
                let phi = random_history(&mut rng, r, n, ua, kind == 1);
                out[m * m + a] = norm_f(&phi)?.norm();
                for (b, &ub) in radii.iter().enumerate().skip(a) {
                    let (p1, p2) = if kind == 2 {
                        let base = scaled(&phi, 1.0 - PERTURBATION);
                        let other = perturbed(&mut rng, &base, ua * PERTURBATION);
                        (base, other)
                    } else {
                        (phi.clone(), random_history(&mut rng, r, n, ub, kind == 1))
                    };
                    let num = (norm_f(&p1)? - norm_f(&p2)?).norm();
                    let v = ratio(num, sup_diff(&p1, &p2));
                    out[a * m + b] = v;
                    out[b * m + a] = v;
                }
            }
            Ok(out)
        })
        .try_reduce(|| zero.clone(), |x, y| Ok(x.iter().zip(&y).map(|(p, q)| p.max(*q)).collect()))?;
    let k_values = (0..m).map(|a| table[a * m..(a + 1) * m].to_vec()).collect();
    let psi_values = table[m * m..].to_vec();
    Ok((Table2::monotone(radii.to_vec(), k_values), Table1::monotone(radii.to_vec(), psi_values)))
}
