//! Global Picard iteration `z ← F(z, J(z))` and a posteriori checks of the
//! computed trajectory against the original system.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{sup_distance, History, PieceKind, Side, Trajectory};
use crate::operators::{OperatorParams, Problem};

/// Starting iterate.
#[derive(Debug, Clone, Default)]
pub enum InitialGuess {
    #[default]
    PhiTilde,
    Zero,
    Custom(Trajectory),
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Stop once `‖z_{k+1} - z_k‖ < tol`.
    pub tol: f64,
    pub max_iters: usize,
    pub initial: InitialGuess,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-8, max_iters: 200, initial: InitialGuess::PhiTilde }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveDiagnostics {
    /// Operator evaluations, including the confirming residual evaluation.
    pub iterations: usize,
    /// `‖z_{k+1} - z_k‖` for every step taken.
    pub residual_history: Vec<f64>,
    /// `‖z - F(z, J(z))‖` of the returned iterate.
    pub final_residual: f64,
    /// Geometric mean of consecutive ratios of `residual_history`.
    pub empirical_contraction: f64,
    pub converged: bool,
}

/// Runs the iteration. Failing to meet the tolerance is reported through
/// [`SolveDiagnostics::converged`]; only numerical failures are errors.
pub fn solve(problem: &Problem, params: &OperatorParams, opts: &SolveOptions) -> Result<(Trajectory, SolveDiagnostics)> {
    if !(opts.tol > 0.0) || opts.max_iters == 0 {
        return Err(Error::Domain(format!("need tol > 0 and max_iters >= 1, got {} and {}", opts.tol, opts.max_iters)));
    }
    let mut z = match &opts.initial {
        InitialGuess::PhiTilde => problem.phi_tilde(params)?,
        InitialGuess::Zero => Trajectory::zeros(problem.grid().clone(), problem.n()),
        InitialGuess::Custom(z0) => {
            if **z0.grid() != **problem.grid() || z0.n() != problem.n() {
                return Err(Error::GridMismatch("initial iterate is not on the problem grid".into()));
            }
            z0.clone()
        }
    };

    let mut history = Vec::new();
    let mut iterations = 0;
    while iterations < opts.max_iters {
        let next = problem.picard_step(params, &z)?;
        iterations += 1;
        if let Some(t) = next.first_non_finite() {
            return Err(Error::NonFinite { what: "iterate", time: t });
        }
        let d = sup_distance(&next, &z)?;
        history.push(d);
        z = next;
        log::debug!("picard step {iterations}: {d:.3e}");
        if d < opts.tol {
            break;
        }
    }
    let final_residual = problem.characterization_residual(params, &z)?;
    iterations += 1;
    let met = history.last().is_some_and(|&d| d < opts.tol);
    let diag = SolveDiagnostics {
        iterations,
        empirical_contraction: contraction_estimate(&history),
        residual_history: history,
        final_residual,
        converged: met && final_residual < 10.0 * opts.tol,
    };
    log::info!(
        "solve: {} iterations, residual {:.3e}, converged = {}",
        diag.iterations,
        diag.final_residual,
        diag.converged
    );
    Ok((z, diag))
}

/// `(d_last / d_first)^(1/(k-1))` over the positive entries; 0 with fewer than two.
pub fn contraction_estimate(history: &[f64]) -> f64 {
    let pos: Vec<f64> = history.iter().copied().filter(|&d| d > 0.0).collect();
    if pos.len() < 2 {
        return 0.0;
    }
    (pos[pos.len() - 1] / pos[0]).powf(1.0 / (pos.len() - 1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessReport {
    /// Largest pairwise distance among converged runs.
    pub max_distance: f64,
    /// Indices of starts that did not converge.
    pub non_converged: Vec<usize>,
}

/// Solves from every start and measures how far apart the limits are.
pub fn uniqueness_probe(
    problem: &Problem,
    params: &OperatorParams,
    opts: &SolveOptions,
    starts: Vec<Trajectory>,
) -> Result<UniquenessReport> {
    let runs: Vec<Result<(Trajectory, SolveDiagnostics)>> = starts
        .into_par_iter()
        .map(|z0| {
            let o = SolveOptions { initial: InitialGuess::Custom(z0), ..opts.clone() };
            solve(problem, params, &o)
        })
        .collect();
    let mut solutions = Vec::new();
    let mut non_converged = Vec::new();
    for (k, run) in runs.into_iter().enumerate() {
        match run {
            Ok((z, d)) if d.converged => solutions.push(z),
            Ok(_) => non_converged.push(k),
            Err(e) => {
                log::warn!("start {k} failed: {e}");
                non_converged.push(k);
            }
        }
    }
    let mut max_distance: f64 = 0.0;
    for i in 0..solutions.len() {
        for j in i + 1..solutions.len() {
            max_distance = max_distance.max(sup_distance(&solutions[i], &solutions[j])?);
        }
    }
    Ok(UniquenessReport { max_distance, non_converged })
}

/// Residuals of the three defining relations on the grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerificationReport {
    pub ode_residual: f64,
    pub impulse_residual: f64,
    pub nonlocal_residual: f64,
}

/// Checks `z` node by node. Derivatives use three-point differences: centred
/// at ordinary nodes, one-sided from the left at interior joints where the
/// derivative may jump.
pub fn verify_solution(problem: &Problem, z: &Trajectory) -> Result<VerificationReport> {
    let spec = problem.spec();
    let n = problem.n();
    if **z.grid() != **problem.grid() {
        return Err(Error::GridMismatch("trajectory is not on the problem grid".into()));
    }
    let views: Vec<History<'_>> =
        spec.partition.theta.iter().map(|&th| History::anchored(z, th, Side::Left)).collect();
    let mut rep = VerificationReport { ode_residual: 0.0, impulse_residual: 0.0, nonlocal_residual: 0.0 };
    for (si, seg) in problem.grid().segments().iter().enumerate() {
        let x = |k: usize| DVector::from_column_slice(z.node(si, k));
        match seg.kind {
            PieceKind::History => {
                for (k, &t) in seg.times.iter().enumerate() {
                    let d = x(k) - spec.eval_history(t)? + spec.eval_nonlocal(t, &views)?;
                    rep.nonlocal_residual = rep.nonlocal_residual.max(d.norm());
                }
            }
            PieceKind::Impulse(i) => {
                for (k, &t) in seg.times.iter().enumerate() {
                    let d = x(k) - spec.eval_impulse(i - 1, t, &x(k))?;
                    rep.impulse_residual = rep.impulse_residual.max(d.norm());
                }
            }
            PieceKind::Ode(_) | PieceKind::Continuation => {
                let ts = &seg.times;
                for k in 1..seg.len().saturating_sub(1) {
                    let deriv = if seg.joints.binary_search(&k).is_ok() {
                        if k >= 2 {
                            let (h1, h2) = (ts[k - 1] - ts[k - 2], ts[k] - ts[k - 1]);
                            x(k - 2) * (h2 / (h1 * (h1 + h2))) - x(k - 1) * ((h1 + h2) / (h1 * h2))
                                + x(k) * ((h1 + 2.0 * h2) / (h2 * (h1 + h2)))
                        } else {
                            (x(k) - x(k - 1)) / (ts[k] - ts[k - 1])
                        }
                    } else {
                        let (h1, h2) = (ts[k] - ts[k - 1], ts[k + 1] - ts[k]);
                        x(k - 1) * (-h2 / (h1 * (h1 + h2)))
                            + x(k) * ((h2 - h1) / (h1 * h2))
                            + x(k + 1) * (h1 / (h2 * (h1 + h2)))
                    };
                    let t = ts[k];
                    let rhs = spec.eval_matrix(t)? * x(k) + spec.eval_drift(t, &History::anchored(z, t, Side::Left))?;
                    debug_assert_eq!(rhs.len(), n);
                    rep.ode_residual = rep.ode_residual.max((deriv - rhs).norm());
                }
            }
        }
    }
    Ok(rep)
}
