//! The constants `M, L, N_q, K, Ψ`, the H1–H4 inequalities built from them,
//! and the search for a feasible ball radius `ρ`.

mod envelope;
mod sampling;

use std::sync::Arc;

use serde::Serialize;

pub use envelope::{PairEnvelope, ScalarEnvelope, Table1, Table2};
pub use sampling::{
    estimate_k_psi, estimate_lipschitz_g, estimate_lipschitz_impulses, impulse_zero_residual,
    nonlocal_zero_residual, random_history, LipschitzEstimate, KNOTS,
};

use crate::error::{Error, Result};
use crate::model::Partition;
use crate::operators::Problem;

/// Tolerance for the structural conditions `g(0) = 0` and `G_i(·, 0) = 0`.
pub const ZERO_TOL: f64 = 1e-12;

pub const LOWER_BOUND_WARNING: &str =
    "estimated constants are lower bounds; declare analytic constants to obtain a certificate";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Declared,
    /// Sampled maximum, a lower bound of the true constant.
    Estimated,
    /// Derived from the sampled evolution operator with a safety margin.
    Computed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constant {
    pub value: f64,
    pub source: Source,
}

impl Constant {
    pub fn declared(value: f64) -> Self {
        Constant { value, source: Source::Declared }
    }

    pub fn estimated(value: f64) -> Self {
        Constant { value, source: Source::Estimated }
    }
}

/// Everything the inequalities need.
#[derive(Debug, Clone)]
pub struct ConstantSet {
    pub m: Constant,
    pub l: Constant,
    pub n_q: Constant,
    pub q: usize,
    pub k: PairEnvelope,
    pub psi: ScalarEnvelope,
    /// `max ‖g(0)(t)‖`, when checked.
    pub nonlocal_zero_residual: Option<f64>,
    /// `max ‖G_i(t, 0)‖`, when checked.
    pub impulse_zero_residual: Option<f64>,
}

impl ConstantSet {
    /// All constants zero, `M = m`.
    pub fn zero(m: f64, q: usize) -> Self {
        ConstantSet {
            m: Constant::declared(m),
            l: Constant::declared(0.0),
            n_q: Constant::declared(0.0),
            q,
            k: PairEnvelope::Declared(Arc::new(|_, _| Ok(0.0))),
            psi: ScalarEnvelope::Declared(Arc::new(|_| Ok(0.0))),
            nonlocal_zero_residual: None,
            impulse_zero_residual: None,
        }
    }

    pub fn any_estimated(&self) -> bool {
        [self.m, self.l, self.n_q].iter().any(|c| c.source == Source::Estimated)
            || !self.k.is_declared()
            || !self.psi.is_declared()
    }
}

/// Sampling controls for [`assemble_constants`].
#[derive(Debug, Clone)]
pub struct EstimateOptions {
    pub samples: usize,
    pub seed: u64,
    /// Ball radius for the `L` and `N_q` samples.
    pub radius: f64,
    /// Radius grid of the `K` and `Ψ` tables.
    pub radii: Vec<f64>,
}

/// Declared constants where given, sampled ones otherwise. `M` comes from the
/// evolution cache unless declared. Without `estimate`, a missing `K` or `Ψ`
/// is an error.
pub fn assemble_constants(problem: &Problem, estimate: Option<&EstimateOptions>) -> Result<ConstantSet> {
    let spec = problem.spec();
    let d = &spec.declared;
    let q = spec.partition.q();
    let big_n = spec.partition.n_impulses();
    let missing = |what: &str| Error::Domain(format!("constant {what} is not declared and estimation is off"));

    let m = match d.m {
        Some(m) => Constant::declared(m),
        None => Constant { value: problem.cache().norm_bound(), source: Source::Computed },
    };
    let l = match (d.lipschitz_impulse, big_n, estimate) {
        (Some(v), _, _) => Constant::declared(v),
        (None, 0, _) => Constant::declared(0.0),
        (None, _, Some(o)) => Constant::estimated(estimate_lipschitz_impulses(spec, o.samples, o.radius, o.seed)?.value),
        (None, _, None) => return Err(missing("L")),
    };
    let n_q = match (d.lipschitz_nonlocal, q, estimate) {
        (Some(v), _, _) => Constant::declared(v),
        (None, 0, _) => Constant::declared(0.0),
        (None, _, Some(o)) => Constant::estimated(estimate_lipschitz_g(spec, o.samples, o.radius, o.seed)?.value),
        (None, _, None) => return Err(missing("N_q")),
    };
    let tables = match (&d.k, &d.psi, estimate) {
        (Some(_), Some(_), _) => None,
        (_, _, Some(o)) => Some(estimate_k_psi(spec, o.samples, &o.radii, o.seed)?),
        (None, _, None) => return Err(missing("K")),
        (_, None, None) => return Err(missing("Psi")),
    };
    let k = match (&d.k, &tables) {
        (Some(f), _) => PairEnvelope::Declared(f.clone()),
        (None, Some((t, _))) => PairEnvelope::Table(t.clone()),
        (None, None) => unreachable!(),
    };
    let psi = match (&d.psi, &tables) {
        (Some(f), _) => ScalarEnvelope::Declared(f.clone()),
        (None, Some((_, t))) => ScalarEnvelope::Table(t.clone()),
        (None, None) => unreachable!(),
    };
    Ok(ConstantSet {
        m,
        l,
        n_q,
        q,
        k,
        psi,
        nonlocal_zero_residual: Some(nonlocal_zero_residual(spec)?),
        impulse_zero_residual: Some(impulse_zero_residual(spec)?),
    })
}

/// One inequality `lhs < rhs` or `lhs ≤ rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Check {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl Check {
    fn le(lhs: f64, rhs: f64) -> Self {
        Check { lhs, rhs, pass: lhs <= rhs }
    }

    fn lt(lhs: f64, rhs: f64) -> Self {
        Check { lhs, rhs, pass: lhs < rhs }
    }
}

/// Serializable view of a [`ConstantSet`] at the working radius.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantSummary {
    #[serde(rename = "M")]
    pub m: Constant,
    #[serde(rename = "L")]
    pub l: Constant,
    #[serde(rename = "N_q")]
    pub n_q: Constant,
    pub q: usize,
    /// `Ψ(‖φ̃‖ + ρ)`.
    #[serde(rename = "Psi")]
    pub psi: Constant,
    /// `K(‖φ̃‖ + ρ, ‖φ̃‖ + ρ)`.
    #[serde(rename = "K")]
    pub k: Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub constants: ConstantSummary,
    pub rho: f64,
    pub phi_tilde_norm: f64,
    /// `g(0) = 0` up to [`ZERO_TOL`].
    pub h1_i: Check,
    pub h1_ii: Check,
    pub h3_i: Check,
    pub h3_ii: Check,
    pub h3_iii: Check,
    pub h4_i: Check,
    pub h4_ii: Check,
    /// `G_i(·, 0) = 0` up to [`ZERO_TOL`], when checked.
    pub impulse_zero: Option<bool>,
    pub overall: bool,
    pub warning: Option<String>,
}

impl HypothesisReport {
    /// `(name, check)` in report order.
    pub fn checks(&self) -> [(&'static str, Check); 7] {
        [
            ("H1(i)", self.h1_i),
            ("H1(ii)", self.h1_ii),
            ("H3(i)", self.h3_i),
            ("H3(ii)", self.h3_ii),
            ("H3(iii)", self.h3_iii),
            ("H4(i)", self.h4_i),
            ("H4(ii)", self.h4_ii),
        ]
    }

    /// Short human-readable verdict table.
    pub fn summary(&self) -> String {
        let mut s = format!("rho = {}, |phi~| = {}\n", self.rho, self.phi_tilde_norm);
        for (name, c) in self.checks() {
            s.push_str(&format!(
                "{name:8} lhs = {:<12.6e} rhs = {:<12.6e} {}\n",
                c.lhs,
                c.rhs,
                if c.pass { "pass" } else { "FAIL" }
            ));
        }
        s.push_str(&format!("overall: {}\n", if self.overall { "pass" } else { "FAIL" }));
        if let Some(w) = &self.warning {
            s.push_str(&format!("warning: {w}\n"));
        }
        s
    }
}

/// Evaluates every inequality at `rho`.
pub fn check_hypotheses(
    constants: &ConstantSet,
    partition: &Partition,
    phi_tilde_norm: f64,
    rho: f64,
    alpha: &[f64],
    beta: &[f64],
) -> HypothesisReport {
    let c = constants;
    let (m, l, nq, q) = (c.m.value, c.l.value, c.n_q.value, c.q as f64);
    let radius = phi_tilde_norm + rho;
    let m_tau = m * partition.tau;
    let psi = c.psi.eval(radius);
    let k = c.k.eval(radius, radius);
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();

    let h1_i = Check::le(c.nonlocal_zero_residual.unwrap_or(0.0), ZERO_TOL);
    let impulse_zero = c.impulse_zero_residual.map(|r| r <= ZERO_TOL);
    let mut h1_ii = Check::lt(l + nq * q, 0.5);
    h1_ii.pass &= impulse_zero != Some(false);
    let h3_i = Check::le(m * nq * q * radius + m_tau * psi, rho);
    let h3_ii = Check::le(m * l * radius + norm(alpha) + m_tau * psi, rho);
    let h3_iii = Check::le(l * radius + norm(beta), rho);
    let h4_i = Check::lt(m * nq * q + m_tau * k, 1.0);
    let h4_ii = Check::lt(m * l + m_tau * k, 1.0);
    let overall = [h1_i, h1_ii, h3_i, h3_ii, h3_iii, h4_i, h4_ii].iter().all(|c| c.pass);
    let source = |declared: bool| if declared { Source::Declared } else { Source::Estimated };
    HypothesisReport {
        constants: ConstantSummary {
            m: c.m,
            l: c.l,
            n_q: c.n_q,
            q: c.q,
            psi: Constant { value: psi, source: source(c.psi.is_declared()) },
            k: Constant { value: k, source: source(c.k.is_declared()) },
        },
        rho,
        phi_tilde_norm,
        h1_i,
        h1_ii,
        h3_i,
        h3_ii,
        h3_iii,
        h4_i,
        h4_ii,
        impulse_zero,
        overall,
        warning: c.any_estimated().then(|| LOWER_BOUND_WARNING.to_string()),
    }
}

/// Outcome of [`find_rho`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum RhoSearch {
    Feasible { rho: f64 },
    /// `binding` names the inequality that failed at the most scan points.
    Infeasible { binding: String },
}

/// Number of uniform scan points in `(0, rho_max]`.
pub const RHO_SCAN: usize = 1000;

/// Smallest `ρ ∈ (0, rho_max]` at which the H3 inequalities (and H4 when
/// `with_h4`) hold: a uniform scan followed by bisection between the last
/// failing and the first passing scan point.
pub fn find_rho(
    constants: &ConstantSet,
    partition: &Partition,
    phi_tilde_norm: f64,
    alpha: &[f64],
    beta: &[f64],
    rho_max: f64,
    with_h4: bool,
) -> RhoSearch {
    const NAMES: [&str; 5] = ["H3(i)", "H3(ii)", "H3(iii)", "H4(i)", "H4(ii)"];
    let used = if with_h4 { 5 } else { 3 };
    let verdicts = |rho: f64| {
        let r = check_hypotheses(constants, partition, phi_tilde_norm, rho, alpha, beta);
        [r.h3_i.pass, r.h3_ii.pass, r.h3_iii.pass, r.h4_i.pass, r.h4_ii.pass]
    };
    let ok = |rho: f64| verdicts(rho)[..used].iter().all(|&p| p);

    let mut fails = [0usize; 5];
    let mut prev = 0.0;
    for k in 1..=RHO_SCAN {
        let rho = rho_max * k as f64 / RHO_SCAN as f64;
        let v = verdicts(rho);
        if v[..used].iter().all(|&p| p) {
            if k == 1 {
                return RhoSearch::Feasible { rho };
            }
            let (mut lo, mut hi) = (prev, rho);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if ok(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return RhoSearch::Feasible { rho: hi };
        }
        for (j, &p) in v[..used].iter().enumerate() {
            fails[j] += usize::from(!p);
        }
        prev = rho;
    }
    let worst = (0..used).max_by(|&a, &b| fails[a].cmp(&fails[b]).then(b.cmp(&a))).unwrap();
    RhoSearch::Infeasible { binding: NAMES[worst].to_string() }
}
