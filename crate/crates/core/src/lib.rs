//! Numerical toolkit for non-autonomous semi-linear systems
//!
//! ```text
//! z'(t) = A(t) z(t) + f(t, z_t)            on (s_i, t_{i+1}],  i = 0..N
//! z(t)  = G_i(t, z(t))                      on (t_i, s_i],      i = 1..N
//! z(t)  = phi(t) - g(z_{θ1}, …, z_{θq})(t)  on [-r, 0]
//! ```
//!
//! The solution is computed as the fixed point of `z = F(z, J(z))` by a
//! global Picard iteration over a breakpoint-aligned, piecewise-linear
//! representation of the trajectory. Around that sit the evolution
//! operator `U(t, s) = Φ(t)Φ(s)⁻¹`, sampled estimates of the Lipschitz and
//! growth constants, the H1–H4 inequality checks, continuation past the
//! horizon and a small expression language used to describe systems as text.

pub mod error;
pub mod evolution;
pub mod expr;
pub mod hypotheses;
mod linalg;
pub mod model;
pub mod operators;
pub mod prolongation;
pub mod solver;

pub use error::{CallbackError, Error, Result};
pub use evolution::EvolutionCache;
pub use hypotheses::{ConstantSet, HypothesisReport};
pub use model::{
    DeclaredConstants, Grid, History, Impulse, Partition, PieceKind, Side, SystemSpec,
    Trajectory, Violation,
};
pub use operators::{OperatorParams, Problem};
pub use solver::{InitialGuess, SolveDiagnostics, SolveOptions};
