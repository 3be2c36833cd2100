//! Problem data, the breakpoint-aligned time grid and the piecewise-linear
//! trajectory representation.

mod grid;
mod history;
mod trajectory;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use grid::{Grid, PieceKind, Segment};
pub use history::{History, SampledHistory};
pub use trajectory::{sup_distance, Trajectory};
pub(crate) use trajectory::norm as trajectory_norm;

use crate::error::{CallbackError, Error, Result};

/// Which one-sided value to read at a jump point.
///
/// Trajectories are left-continuous, so `Left` is the value a point
/// evaluation returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Side {
    #[default]
    Left,
    Right,
}

/// One non-instantaneous impulse interval `(t, s]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Impulse {
    pub t: f64,
    pub s: f64,
}

/// Time structure of the problem: delay `r`, horizon `tau`, impulse
/// intervals and the non-local evaluation points `theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub r: f64,
    pub tau: f64,
    pub impulses: Vec<Impulse>,
    pub theta: Vec<f64>,
}

impl Partition {
    pub fn new(r: f64, tau: f64, impulses: Vec<(f64, f64)>, theta: Vec<f64>) -> Self {
        Partition {
            r,
            tau,
            impulses: impulses.into_iter().map(|(t, s)| Impulse { t, s }).collect(),
            theta,
        }
    }

    /// Number of impulses `N`.
    pub fn n_impulses(&self) -> usize {
        self.impulses.len()
    }

    /// Number of non-local points `q`.
    pub fn q(&self) -> usize {
        self.theta.len()
    }

    /// `s_N`, the start of the last differential piece (0 without impulses).
    pub fn last_release(&self) -> f64 {
        self.impulses.last().map_or(0.0, |imp| imp.s)
    }

    /// First time in `(0, tau]` at which the differential law stops (t_1, or tau).
    pub fn first_impulse(&self) -> f64 {
        self.impulses.first().map_or(self.tau, |imp| imp.t)
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.r > 0.0 && self.r.is_finite()) {
            out.push(Violation::new("r", format!("delay must be positive, got {}", self.r)));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            out.push(Violation::new("tau", format!("horizon must be positive, got {}", self.tau)));
        }
        let mut prev_s = 0.0;
        for (i, imp) in self.impulses.iter().enumerate() {
            let loc = format!("impulses[{i}]");
            let k = i + 1;
            if !(imp.t.is_finite() && imp.s.is_finite()) {
                out.push(Violation::new(loc, "impulse times must be finite"));
                continue;
            }
            if imp.t <= prev_s {
                out.push(Violation::new(
                    loc.clone(),
                    format!("ordering violation at i={k}: t_{k} = {} must exceed s_{} = {prev_s}", imp.t, k - 1),
                ));
            }
            if imp.t > imp.s {
                out.push(Violation::new(
                    loc.clone(),
                    format!("ordering violation at i={k}: t_{k} = {} > s_{k} = {}", imp.t, imp.s),
                ));
            }
            if imp.s >= self.tau {
                out.push(Violation::new(
                    loc,
                    format!("s_{k} = {} must be below the horizon tau = {}", imp.s, self.tau),
                ));
            }
            prev_s = imp.s;
        }
        let mut prev = 0.0;
        for (j, &th) in self.theta.iter().enumerate() {
            let loc = format!("theta[{j}]");
            if !(th > 0.0 && th < self.tau) {
                out.push(Violation::new(
                    loc,
                    format!("θ_{} = {th} out of (0, tau) with tau = {}", j + 1, self.tau),
                ));
            } else if th <= prev {
                out.push(Violation::new(loc, format!("θ values must be strictly increasing ({th} after {prev})")));
            }
            prev = prev.max(th);
        }
        out
    }
}

/// One violated invariant of a [`Partition`] or [`SystemSpec`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

impl Violation {
    pub fn new(location: impl Into<String>, message: impl Into<String>) -> Self {
        Violation { location: location.into(), message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

pub type MatrixFn = Arc<dyn Fn(f64) -> Result<DMatrix<f64>, CallbackError> + Send + Sync>;
pub type DriftFn =
    Arc<dyn Fn(f64, &History<'_>) -> Result<DVector<f64>, CallbackError> + Send + Sync>;
pub type ImpulseFn =
    Arc<dyn Fn(f64, &DVector<f64>) -> Result<DVector<f64>, CallbackError> + Send + Sync>;
/// `g(y_1, …, y_q)(t)` for `t ∈ [-r, 0]`.
pub type NonLocalFn =
    Arc<dyn Fn(f64, &[History<'_>]) -> Result<DVector<f64>, CallbackError> + Send + Sync>;
pub type HistoryFn = Arc<dyn Fn(f64) -> Result<DVector<f64>, CallbackError> + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(f64) -> Result<f64, CallbackError> + Send + Sync>;
pub type PairFn = Arc<dyn Fn(f64, f64) -> Result<f64, CallbackError> + Send + Sync>;

/// Analytic constants supplied by the user instead of being estimated.
#[derive(Clone, Default)]
pub struct DeclaredConstants {
    pub m: Option<f64>,
    pub lipschitz_impulse: Option<f64>,
    pub lipschitz_nonlocal: Option<f64>,
    /// Growth envelope Ψ(x).
    pub psi: Option<ScalarFn>,
    /// Lipschitz envelope K(u, v).
    pub k: Option<PairFn>,
    /// Linear-growth majorant h(t) with ‖f(t, φ)‖ ≤ h(t)(1 + ‖φ(0)‖).
    pub growth: Option<ScalarFn>,
}

impl fmt::Debug for DeclaredConstants {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DeclaredConstants")
            .field("m", &self.m)
            .field("lipschitz_impulse", &self.lipschitz_impulse)
            .field("lipschitz_nonlocal", &self.lipschitz_nonlocal)
            .field("psi", &self.psi.is_some())
            .field("k", &self.k.is_some())
            .field("growth", &self.growth.is_some())
            .finish()
    }
}

/// A complete problem instance.
#[derive(Clone)]
pub struct SystemSpec {
    pub n: usize,
    pub partition: Partition,
    pub matrix: MatrixFn,
    pub drift: DriftFn,
    pub impulses: Vec<ImpulseFn>,
    pub nonlocal: Option<NonLocalFn>,
    pub history: HistoryFn,
    /// Discrete lags read by the drift; used to place derivative kinks on the grid.
    pub lags: Vec<f64>,
    pub declared: DeclaredConstants,
}

impl fmt::Debug for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemSpec")
            .field("n", &self.n)
            .field("partition", &self.partition)
            .field("impulses", &self.impulses.len())
            .field("nonlocal", &self.nonlocal.is_some())
            .field("lags", &self.lags)
            .field("declared", &self.declared)
            .finish()
    }
}

impl SystemSpec {
    /// A system with `A ≡ 0`, `f ≡ 0`, `phi ≡ 0`, zero impulse maps and,
    /// when `q ≥ 1`, a zero non-local map.
    pub fn new(n: usize, partition: Partition) -> Self {
        let impulses = (0..partition.n_impulses())
            .map(|_| -> ImpulseFn { Arc::new(move |_, _| Ok(DVector::zeros(n))) })
            .collect();
        let nonlocal: Option<NonLocalFn> = if partition.q() > 0 {
            Some(Arc::new(move |_, _| Ok(DVector::zeros(n))))
        } else {
            None
        };
        let lags = vec![partition.r];
        SystemSpec {
            n,
            partition,
            matrix: Arc::new(move |_| Ok(DMatrix::zeros(n, n))),
            drift: Arc::new(move |_, _| Ok(DVector::zeros(n))),
            impulses,
            nonlocal,
            history: Arc::new(move |_| Ok(DVector::zeros(n))),
            lags,
            declared: DeclaredConstants::default(),
        }
    }

    pub fn with_matrix<F>(mut self, a: F) -> Self
    where
        F: Fn(f64) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.matrix = Arc::new(move |t| Ok(a(t)));
        self
    }

    /// Constant generator `A(t) ≡ a`.
    pub fn with_constant_matrix(self, a: DMatrix<f64>) -> Self {
        self.with_matrix(move |_| a.clone())
    }

    pub fn with_drift<F>(mut self, f: F) -> Self
    where
        F: Fn(f64, &History<'_>) -> DVector<f64> + Send + Sync + 'static,
    {
        self.drift = Arc::new(move |t, h| Ok(f(t, h)));
        self
    }

    pub fn with_impulse_maps<F>(mut self, maps: Vec<F>) -> Self
    where
        F: Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        self.impulses = maps
            .into_iter()
            .map(|g| -> ImpulseFn { Arc::new(move |t, x| Ok(g(t, x))) })
            .collect();
        self
    }

    pub fn with_nonlocal<F>(mut self, g: F) -> Self
    where
        F: Fn(f64, &[History<'_>]) -> DVector<f64> + Send + Sync + 'static,
    {
        self.nonlocal = Some(Arc::new(move |t, ys| Ok(g(t, ys))));
        self
    }

    pub fn with_history<F>(mut self, phi: F) -> Self
    where
        F: Fn(f64) -> DVector<f64> + Send + Sync + 'static,
    {
        self.history = Arc::new(move |t| Ok(phi(t)));
        self
    }

    pub fn with_lags(mut self, lags: Vec<f64>) -> Self {
        self.lags = lags;
        self
    }

    pub fn with_declared(mut self, declared: DeclaredConstants) -> Self {
        self.declared = declared;
        self
    }

    /// Every violated invariant; an empty list means the spec is usable.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = self.partition.violations();
        if self.n == 0 {
            out.push(Violation::new("n", "state dimension must be at least 1"));
        }
        let big_n = self.partition.n_impulses();
        if self.impulses.len() != big_n {
            out.push(Violation::new(
                "impulses",
                format!("{} impulse maps for {big_n} impulse intervals", self.impulses.len()),
            ));
        }
        match (self.partition.q(), self.nonlocal.is_some()) {
            (0, true) => out.push(Violation::new("g", "non-local map given but theta is empty")),
            (q, false) if q > 0 => {
                out.push(Violation::new("g", format!("theta has {q} points but no non-local map is given")))
            }
            _ => {}
        }
        for (k, &d) in self.lags.iter().enumerate() {
            if !(d >= 0.0 && d <= self.partition.r) {
                out.push(Violation::new(
                    format!("lags[{k}]"),
                    format!("lag {d} outside [0, r] with r = {}", self.partition.r),
                ));
            }
        }
        out
    }

    pub(crate) fn eval_matrix(&self, t: f64) -> Result<DMatrix<f64>> {
        let a = (self.matrix)(t).map_err(|e| Error::callback("A(t)", t, e))?;
        if a.nrows() != self.n || a.ncols() != self.n {
            return Err(Error::Domain(format!(
                "A({t}) is {}x{}, expected {n}x{n}",
                a.nrows(),
                a.ncols(),
                n = self.n
            )));
        }
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { what: "A(t)", time: t });
        }
        Ok(a)
    }

    pub(crate) fn eval_drift(&self, t: f64, h: &History<'_>) -> Result<DVector<f64>> {
        let v = (self.drift)(t, h).map_err(|e| Error::callback("f", t, e))?;
        self.checked(v, "f", t)
    }

    pub(crate) fn eval_impulse(&self, i: usize, t: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
        let v = (self.impulses[i])(t, x).map_err(|e| Error::callback("G_i", t, e))?;
        self.checked(v, "G_i", t)
    }

    pub(crate) fn eval_history(&self, t: f64) -> Result<DVector<f64>> {
        let v = (self.history)(t).map_err(|e| Error::callback("phi", t, e))?;
        self.checked(v, "phi", t)
    }

    /// `g(y_1, …, y_q)(t)`; zero when there is no non-local term.
    pub(crate) fn eval_nonlocal(&self, t: f64, ys: &[History<'_>]) -> Result<DVector<f64>> {
        match &self.nonlocal {
            None => Ok(DVector::zeros(self.n)),
            Some(g) => {
                let v = g(t, ys).map_err(|e| Error::callback("g", t, e))?;
                self.checked(v, "g", t)
            }
        }
    }

    fn checked(&self, v: DVector<f64>, what: &'static str, t: f64) -> Result<DVector<f64>> {
        if v.len() != self.n {
            return Err(Error::Domain(format!(
                "{what} returned a vector of length {} at t = {t}, expected {}",
                v.len(),
                self.n
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { what, time: t });
        }
        Ok(v)
    }
}

/// Every violated invariant of `spec`; empty when valid.
pub fn validate_spec(spec: &SystemSpec) -> Vec<Violation> {
    spec.validate()
}
