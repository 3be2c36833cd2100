//! The operators `J` and `F` whose fixed point `z = F(z, J(z))` is the
//! solution, plus the reference trajectory `φ̃` that centres the ball `D_ρ`.
//!
//! On a differential piece `(a, b]` (`a = 0` or `a = s_i`)
//!
//! ```text
//! J(y)(t) = Φ(t) [ Ψ(a) v + ∫_a^t Ψ(s) f(s, y_s) ds ]
//! ```
//!
//! with `v = φ(0) - g(y_θ…)(0)` on the first piece and `v = G_i(s_i, y(s_i))`
//! afterwards. The integral is a cumulative trapezoid on the segment nodes.
//! At the left edge of every sub-interval the integrand reads the history
//! from the right, so jumps of `y` that propagate through the delay are
//! integrated exactly rather than smeared across a cell.

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{build_fundamental, EvolutionCache};
use crate::linalg::matvec;
use crate::model::{sup_distance, Grid, History, PieceKind, Side, SystemSpec, Trajectory};

/// The free vectors `η`, `α`, `β` and the ball radius `ρ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorParams {
    /// Value of `J` on the impulse intervals.
    pub eta: Vec<f64>,
    /// Plateau of `φ̃` on `(s_i, t_{i+1}]`, `i ≥ 1`.
    pub alpha: Vec<f64>,
    /// Plateau of `φ̃` on `(t_i, s_i]`.
    pub beta: Vec<f64>,
    pub rho: f64,
}

impl OperatorParams {
    /// `η = α = β = 0`.
    pub fn zeros(n: usize, rho: f64) -> Self {
        OperatorParams { eta: vec![0.0; n], alpha: vec![0.0; n], beta: vec![0.0; n], rho }
    }

    pub fn check(&self, n: usize) -> Result<()> {
        for (name, v) in [("eta", &self.eta), ("alpha", &self.alpha), ("beta", &self.beta)] {
            if v.len() != n {
                return Err(Error::Domain(format!("{name} has length {}, expected {n}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Domain(format!("{name} must be finite")));
            }
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::Domain(format!("rho must be positive, got {}", self.rho)));
        }
        Ok(())
    }
}

/// A validated system bundled with its grid and evolution cache.
#[derive(Debug, Clone)]
pub struct Problem {
    spec: SystemSpec,
    grid: Arc<Grid>,
    cache: EvolutionCache,
    /// For each segment, the cache index of every node (empty for `[-r, 0]`).
    cache_index: Vec<Vec<usize>>,
}

impl Problem {
    /// Validates `spec`, builds the grid with `step` (default `(τ+r)/2000`)
    /// and integrates the fundamental matrix.
    pub fn new(spec: SystemSpec, step: Option<f64>) -> Result<Self> {
        let violations = spec.validate();
        if !violations.is_empty() {
            return Err(Error::InvalidSpec(violations));
        }
        let step = step.unwrap_or_else(|| Grid::default_step(&spec.partition));
        let grid = Arc::new(Grid::new(&spec.partition, step, &spec.lags)?);
        let cache = build_fundamental(&spec, &grid)?;
        let cache_index = grid
            .segments()
            .iter()
            .map(|seg| match seg.kind {
                PieceKind::History => Vec::new(),
                _ => seg.times.iter().map(|&t| cache.index_of(t).expect("forward node in cache")).collect(),
            })
            .collect();
        Ok(Problem { spec, grid, cache, cache_index })
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn cache(&self) -> &EvolutionCache {
        &self.cache
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    fn check_input(&self, y: &Trajectory) -> Result<()> {
        if y.n() != self.spec.n {
            return Err(Error::GridMismatch(format!("dimension {} vs {}", y.n(), self.spec.n)));
        }
        if !Arc::ptr_eq(y.grid(), &self.grid) && **y.grid() != *self.grid {
            return Err(Error::GridMismatch("trajectory is not on the problem grid".into()));
        }
        Ok(())
    }

    fn theta_views<'a>(&self, z: &'a Trajectory) -> Vec<History<'a>> {
        self.spec.partition.theta.iter().map(|&th| History::anchored(z, th, Side::Left)).collect()
    }

    /// The reference trajectory `φ̃`.
    pub fn phi_tilde(&self, params: &OperatorParams) -> Result<Trajectory> {
        params.check(self.spec.n)?;
        let phi0 = self.spec.eval_history(0.0)?;
        Trajectory::from_nodes(self.grid.clone(), self.spec.n, |si, k, out| {
            let seg = &self.grid.segments()[si];
            let t = seg.times[k];
            match seg.kind {
                PieceKind::History => out.copy_from_slice(self.spec.eval_history(t)?.as_slice()),
                PieceKind::Ode(0) => {
                    let c = self.cache_index[si][k];
                    matvec(self.cache.phi_node(c), phi0.as_slice(), self.spec.n, out);
                }
                PieceKind::Ode(_) => out.copy_from_slice(&params.alpha),
                PieceKind::Impulse(_) => out.copy_from_slice(&params.beta),
                PieceKind::Continuation => unreachable!("problem grids have no continuation"),
            }
            Ok(())
        })
    }

    /// The operator `J(y)`.
    pub fn apply_j(&self, params: &OperatorParams, y: &Trajectory) -> Result<Trajectory> {
        self.check_input(y)?;
        params.check(self.spec.n)?;
        let n = self.spec.n;
        let mut out = Trajectory::zeros(self.grid.clone(), n);
        for (si, seg) in self.grid.segments().iter().enumerate() {
            match seg.kind {
                PieceKind::History => {
                    for (k, &t) in seg.times.iter().enumerate() {
                        out.node_mut(si, k).copy_from_slice(self.spec.eval_history(t)?.as_slice());
                    }
                }
                PieceKind::Impulse(_) => {
                    for k in 0..seg.len() {
                        out.node_mut(si, k).copy_from_slice(&params.eta);
                    }
                }
                PieceKind::Ode(i) => {
                    let start = if i == 0 {
                        let phi0 = self.spec.eval_history(0.0)?;
                        let views = self.theta_views(y);
                        phi0 - self.spec.eval_nonlocal(0.0, &views)?
                    } else {
                        let s_i = seg.start;
                        let y_si = y.eval(s_i, Side::Left)?;
                        self.spec.eval_impulse(i - 1, s_i, &y_si)?
                    };
                    self.integrate_piece(si, &start, y, out.segment_values_mut(si))?;
                }
                PieceKind::Continuation => {
                    return Err(Error::Domain("J is defined on [-r, tau] only".into()));
                }
            }
        }
        Ok(out)
    }

    fn integrate_piece(&self, si: usize, start: &DVector<f64>, y: &Trajectory, out: &mut [f64]) -> Result<()> {
        let n = self.spec.n;
        let seg = &self.grid.segments()[si];
        let idx = &self.cache_index[si];
        let mut base = vec![0.0; n];
        matvec(self.cache.phi_inv_node(idx[0]), start.as_slice(), n, &mut base);

        let weighted = |k: usize, side: Side| -> Result<Vec<f64>> {
            let t = seg.times[k];
            let f = self.spec.eval_drift(t, &History::anchored(y, t, side))?;
            let mut w = vec![0.0; n];
            matvec(self.cache.phi_inv_node(idx[k]), f.as_slice(), n, &mut w);
            Ok(w)
        };

        let mut acc = base;
        let mut right = weighted(0, Side::Right)?;
        matvec(self.cache.phi_node(idx[0]), &acc, n, &mut out[..n]);
        for k in 1..seg.len() {
            let left = weighted(k, Side::Left)?;
            let half = 0.5 * (seg.times[k] - seg.times[k - 1]);
            for i in 0..n {
                acc[i] += half * (right[i] + left[i]);
            }
            matvec(self.cache.phi_node(idx[k]), &acc, n, &mut out[k * n..(k + 1) * n]);
            right = if seg.is_left_edge(k) { weighted(k, Side::Right)? } else { left };
        }
        if out.iter().any(|x| !x.is_finite()) {
            let t = seg.times[out.chunks_exact(n).position(|c| c.iter().any(|x| !x.is_finite())).unwrap()];
            return Err(Error::NonFinite { what: "J", time: t });
        }
        Ok(())
    }

    /// The operator `F(z, y)`.
    pub fn apply_f(&self, z: &Trajectory, y: &Trajectory) -> Result<Trajectory> {
        self.check_input(z)?;
        self.check_input(y)?;
        let n = self.spec.n;
        let views = self.theta_views(z);
        let mut out = Trajectory::zeros(self.grid.clone(), n);
        for (si, seg) in self.grid.segments().iter().enumerate() {
            match seg.kind {
                PieceKind::History => {
                    for (k, &t) in seg.times.iter().enumerate() {
                        let v = self.spec.eval_history(t)? - self.spec.eval_nonlocal(t, &views)?;
                        out.node_mut(si, k).copy_from_slice(v.as_slice());
                    }
                }
                PieceKind::Impulse(i) => {
                    for (k, &t) in seg.times.iter().enumerate() {
                        let x = DVector::from_column_slice(z.node(si, k));
                        let v = self.spec.eval_impulse(i - 1, t, &x)?;
                        out.node_mut(si, k).copy_from_slice(v.as_slice());
                    }
                }
                PieceKind::Ode(_) => out.segment_values_mut(si).copy_from_slice(y.segment_values(si)),
                PieceKind::Continuation => {
                    return Err(Error::Domain("F is defined on [-r, tau] only".into()));
                }
            }
        }
        Ok(out)
    }

    /// One Picard step `F(z, J(z))`.
    pub fn picard_step(&self, params: &OperatorParams, z: &Trajectory) -> Result<Trajectory> {
        let j = self.apply_j(params, z)?;
        self.apply_f(z, &j)
    }

    /// `‖z - F(z, J(z))‖`: both the fixed-point residual and the defect in the
    /// integral characterization of a solution.
    pub fn characterization_residual(&self, params: &OperatorParams, z: &Trajectory) -> Result<f64> {
        let next = self.picard_step(params, z)?;
        sup_distance(z, &next)
    }
}
