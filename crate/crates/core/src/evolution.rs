//! Fundamental matrix of `z' = A(t) z` and the evolution operator
//! `U(t, s) = Φ(t) Φ(s)⁻¹`.
//!
//! Both `Φ` (from `Φ' = AΦ`) and its inverse path `Ψ` (from `Ψ' = -ΨA`)
//! are integrated with the classical RK4 scheme on the grid nodes, so no
//! matrix is ever inverted. Between nodes both are interpolated linearly.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{frobenius, from_flat, gram, identity, matmul, spectral_norm, to_flat};
use crate::model::{Grid, SystemSpec};

/// Multiplier applied to the sampled maximum of `‖U(t, s)‖₂`.
pub const M_SAFETY: f64 = 1.05;

/// Sampled `Φ`, `Φ⁻¹` and the uniform bound `M`.
#[derive(Debug, Clone)]
pub struct EvolutionCache {
    n: usize,
    times: Vec<f64>,
    phi: Vec<f64>,
    phi_inv: Vec<f64>,
    m: f64,
}

/// Builds the cache on the forward nodes `[0, τ]` of `grid`.
pub fn build_fundamental(spec: &SystemSpec, grid: &Grid) -> Result<EvolutionCache> {
    EvolutionCache::from_times(spec.n, grid.forward_times(), |t| spec.eval_matrix(t))
}

impl EvolutionCache {
    /// Integrates on the increasing node list `times`, with `Φ(times[0]) = I`.
    pub fn from_times<A>(n: usize, times: Vec<f64>, a: A) -> Result<Self>
    where
        A: Fn(f64) -> Result<DMatrix<f64>>,
    {
        if times.is_empty() || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("evolution grid must be non-empty and strictly increasing".into()));
        }
        let nn = n * n;
        let mut phi = Vec::with_capacity(times.len() * nn);
        let mut inv = Vec::with_capacity(times.len() * nn);
        phi.extend(identity(n));
        inv.extend(identity(n));

        let mut a_lo = to_flat(&a(times[0])?);
        let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; nn], vec![0.0; nn], vec![0.0; nn], vec![0.0; nn]);
        let mut stage = vec![0.0; nn];
        for w in 0..times.len() - 1 {
            let (t0, t1) = (times[w], times[w + 1]);
            let h = t1 - t0;
            let a_mid = to_flat(&a(t0 + 0.5 * h)?);
            let a_hi = to_flat(&a(t1)?);

            // Φ' = A Φ
            let cur = phi[w * nn..(w + 1) * nn].to_vec();
            matmul(&a_lo, &cur, n, &mut k1);
            axpy(&cur, 0.5 * h, &k1, &mut stage);
            matmul(&a_mid, &stage, n, &mut k2);
            axpy(&cur, 0.5 * h, &k2, &mut stage);
            matmul(&a_mid, &stage, n, &mut k3);
            axpy(&cur, h, &k3, &mut stage);
            matmul(&a_hi, &stage, n, &mut k4);
            phi.extend((0..nn).map(|i| cur[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])));

            // Ψ' = -Ψ A
            let cur = inv[w * nn..(w + 1) * nn].to_vec();
            matmul(&cur, &a_lo, n, &mut k1);
            axpy(&cur, -0.5 * h, &k1, &mut stage);
            matmul(&stage, &a_mid, n, &mut k2);
            axpy(&cur, -0.5 * h, &k2, &mut stage);
            matmul(&stage, &a_mid, n, &mut k3);
            axpy(&cur, -h, &k3, &mut stage);
            matmul(&stage, &a_hi, n, &mut k4);
            inv.extend((0..nn).map(|i| cur[i] - h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])));

            a_lo = a_hi;
        }
        if phi.iter().chain(&inv).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { what: "fundamental matrix", time: *times.last().unwrap() });
        }
        let mut cache = EvolutionCache { n, times, phi, phi_inv: inv, m: 0.0 };
        cache.m = M_SAFETY * cache.max_pair_norm();
        Ok(cache)
    }

    fn pair_norm(&self, i: usize, j: usize, buf: &mut [f64]) -> f64 {
        let nn = self.n * self.n;
        matmul(&self.phi[j * nn..(j + 1) * nn], &self.phi_inv[i * nn..(i + 1) * nn], self.n, buf);
        spectral_norm(buf, self.n)
    }

    /// `max ‖Φ(t_j) Φ(t_i)⁻¹‖₂` over `i ≤ j`. A coarse sweep gives a starting
    /// maximum; after that a pair is only decomposed when the chain
    /// `‖B‖_F ≥ ‖BᵀB‖_F^½ ≥ ‖(BᵀB)²‖_F^¼ ≥ ‖B‖₂` fails to rule it out.
    fn max_pair_norm(&self) -> f64 {
        let n = self.n;
        let nn = n * n;
        let k = self.times.len();
        let stride = (k / 48).max(1);
        let mut buf = vec![0.0; nn];
        let mut seed: f64 = 1.0;
        for i in (0..k).step_by(stride) {
            for j in (i..k).step_by(stride) {
                seed = seed.max(self.pair_norm(i, j, &mut buf));
            }
        }
        (0..k)
            .into_par_iter()
            .map(|i| {
                let (mut b, mut c, mut c2) = (vec![0.0; nn], vec![0.0; nn], vec![0.0; nn]);
                let inv = &self.phi_inv[i * nn..(i + 1) * nn];
                let mut best = seed;
                for j in i..k {
                    matmul(&self.phi[j * nn..(j + 1) * nn], inv, n, &mut b);
                    if frobenius(&b) <= best {
                        continue;
                    }
                    if n > 2 {
                        gram(&b, n, &mut c);
                        if frobenius(&c).sqrt() <= best {
                            continue;
                        }
                        matmul(&c, &c, n, &mut c2);
                        if frobenius(&c2).sqrt().sqrt() <= best {
                            continue;
                        }
                    }
                    best = best.max(spectral_norm(&b, n));
                }
                best
            })
            .reduce(|| seed, f64::max)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Bound `M ≥ sup ‖U(t, s)‖₂` over node pairs `s ≤ t`, with the safety factor.
    pub fn norm_bound(&self) -> f64 {
        self.m
    }

    /// Overrides `M` (e.g. with a declared analytic value).
    pub fn set_norm_bound(&mut self, m: f64) {
        self.m = m;
    }

    /// Node index of time `t` if it is exactly a node.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times.binary_search_by(|x| x.total_cmp(&t)).ok()
    }

    pub(crate) fn phi_node(&self, k: usize) -> &[f64] {
        let nn = self.n * self.n;
        &self.phi[k * nn..(k + 1) * nn]
    }

    pub(crate) fn phi_inv_node(&self, k: usize) -> &[f64] {
        let nn = self.n * self.n;
        &self.phi_inv[k * nn..(k + 1) * nn]
    }

    pub fn phi(&self, t: f64) -> Result<DMatrix<f64>> {
        Ok(from_flat(&self.interp(&self.phi, t)?, self.n))
    }

    pub fn phi_inv(&self, t: f64) -> Result<DMatrix<f64>> {
        Ok(from_flat(&self.interp(&self.phi_inv, t)?, self.n))
    }

    /// `U(t, s) = Φ(t) Φ(s)⁻¹`.
    pub fn evolution_op(&self, t: f64, s: f64) -> Result<DMatrix<f64>> {
        let a = self.interp(&self.phi, t)?;
        let b = self.interp(&self.phi_inv, s)?;
        let mut out = vec![0.0; self.n * self.n];
        matmul(&a, &b, self.n, &mut out);
        Ok(from_flat(&out, self.n))
    }

    fn interp(&self, data: &[f64], t: f64) -> Result<Vec<f64>> {
        let (lo, hi) = (self.times[0], *self.times.last().unwrap());
        if !(t >= lo && t <= hi) {
            return Err(Error::OutOfDomain { t, lo, hi });
        }
        let nn = self.n * self.n;
        let k = self.times.partition_point(|&x| x < t);
        if self.times[k] == t {
            return Ok(data[k * nn..(k + 1) * nn].to_vec());
        }
        let (a, b) = (self.times[k - 1], self.times[k]);
        let w = (t - a) / (b - a);
        Ok((0..nn).map(|i| (1.0 - w) * data[(k - 1) * nn + i] + w * data[k * nn + i]).collect())
    }
}

fn axpy(x: &[f64], a: f64, y: &[f64], out: &mut [f64]) {
    for i in 0..x.len() {
        out[i] = x[i] + a * y[i];
    }
}
