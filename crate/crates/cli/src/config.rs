//! JSON problem description and its binding to a [`SystemSpec`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use impdde::expr::{parse_str, Env, Expr, Slot, VarRef};
use impdde::model::{DeclaredConstants, ScalarFn};
use impdde::{CallbackError, InitialGuess, OperatorParams, Partition, SolveOptions, SystemSpec};
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

/// A load failure, located by the JSON path of the offending field.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.field, self.message)
        }
    }
}

fn err(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError { field: field.into(), message: message.into() }
}

/// A number, or an expression string in the constant slot.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Expr(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpulseConfig {
    pub t: f64,
    pub s: f64,
    #[serde(rename = "G")]
    pub g: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    #[serde(rename = "M")]
    pub m: Option<Scalar>,
    #[serde(rename = "L")]
    pub l: Option<Scalar>,
    #[serde(rename = "N_q")]
    pub n_q: Option<Scalar>,
    #[serde(rename = "Psi")]
    pub psi: Option<String>,
    #[serde(rename = "K")]
    pub k: Option<String>,
    pub h: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialConfig {
    #[default]
    PhiTilde,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub initial: InitialConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolveOptions::default();
        SolverConfig { tol: d.tol, max_iters: d.max_iters, initial: InitialConfig::PhiTilde }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub eta: Option<Vec<f64>>,
    pub alpha: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
    pub rho: Option<f64>,
}

/// The document as written.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub description: Option<String>,
    pub n: usize,
    pub r: f64,
    pub tau: f64,
    #[serde(default)]
    pub grid_step: Option<f64>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(rename = "A", default)]
    pub a: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub f: Option<Vec<String>>,
    #[serde(default)]
    pub impulses: Vec<ImpulseConfig>,
    #[serde(default)]
    pub theta: Vec<f64>,
    #[serde(default)]
    pub g: Option<Vec<String>>,
    pub phi: Vec<String>,
    #[serde(default)]
    pub constants: ConstantsConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub operator: OperatorConfig,
}

/// A bound, validated problem with its run options.
#[derive(Clone)]
pub struct Loaded {
    pub spec: SystemSpec,
    pub grid_step: Option<f64>,
    pub solve: SolveOptions,
    pub params: OperatorParams,
    /// Growth majorant `h(t)` for the a-priori bound, if declared.
    pub growth: Option<ScalarFn>,
    pub config: Config,
}

impl fmt::Debug for Loaded {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Loaded").field("spec", &self.spec).field("grid_step", &self.grid_step).finish()
    }
}

pub fn load_path(path: &Path) -> Result<Loaded, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| err("", format!("cannot read {}: {e}", path.display())))?;
    load_str(&text)
}

pub fn load_str(text: &str) -> Result<Loaded, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: Config = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { String::new() } else { path };
        err(field, e.into_inner().to_string())
    })?;
    bind(config)
}

const RESERVED: [&str; 13] = ["t", "x", "u", "v", "z", "zd", "yq", "sin", "cos", "exp", "log", "abs", "sqrt"];

/// Parses `text` for `slot`, substitutes parameters and rejects anything
/// left unbound.
fn compile(text: &str, slot: Slot, params: &BTreeMap<String, f64>, field: &str) -> Result<Expr, ConfigError> {
    let e = parse_str(text, slot).map_err(|e| err(field, e.to_string()))?.bind_params(params);
    if let Some(VarRef::Param(p)) = e.free_vars().into_iter().find(|v| matches!(v, VarRef::Param(_))) {
        return Err(err(field, format!("unknown parameter '{p}'")));
    }
    Ok(e)
}

fn compile_all(
    texts: &[String],
    n: usize,
    slot: Slot,
    params: &BTreeMap<String, f64>,
    field: &str,
) -> Result<Vec<Expr>, ConfigError> {
    if texts.len() != n {
        return Err(err(field, format!("expected {n} expressions, got {}", texts.len())));
    }
    texts.iter().enumerate().map(|(i, s)| compile(s, slot, params, &format!("{field}[{i}]"))).collect()
}

fn check_indices(e: &Expr, n: usize, q: usize, field: &str) -> Result<(), ConfigError> {
    for v in e.free_vars() {
        let bad = match v {
            VarRef::State(i) | VarRef::Delayed(i) => i > n,
            VarRef::NonLocal(j, i) => j > q || i > n,
            _ => false,
        };
        if bad {
            return Err(err(field, format!("{v} is out of range for n = {n}, q = {q}")));
        }
    }
    Ok(())
}

fn constant(s: &Scalar, params: &BTreeMap<String, f64>, field: &str) -> Result<f64, ConfigError> {
    let v = match s {
        Scalar::Number(x) => *x,
        Scalar::Expr(text) => compile(text, Slot::Constant, params, field)?
            .eval(&Env::new())
            .map_err(|e| err(field, e.to_string()))?,
    };
    if !(v.is_finite() && v >= 0.0) {
        return Err(err(field, format!("must be a finite non-negative number, got {v}")));
    }
    Ok(v)
}

fn vector(v: &Option<Vec<f64>>, n: usize, field: &str) -> Result<Vec<f64>, ConfigError> {
    match v {
        None => Ok(vec![0.0; n]),
        Some(v) if v.len() == n && v.iter().all(|x| x.is_finite()) => Ok(v.clone()),
        Some(v) => Err(err(field, format!("expected {n} finite numbers, got {}", v.len()))),
    }
}

fn eval_vec(exprs: &[Expr], env: &Env<'_, '_>) -> Result<DVector<f64>, CallbackError> {
    let mut out = DVector::zeros(exprs.len());
    for (i, e) in exprs.iter().enumerate() {
        out[i] = e.eval(env)?;
    }
    Ok(out)
}

fn bind(config: Config) -> Result<Loaded, ConfigError> {
    let c = &config;
    let n = c.n;
    if n == 0 {
        return Err(err("n", "state dimension must be at least 1"));
    }
    for (name, v) in &c.params {
        if RESERVED.contains(&name.as_str()) || name == "r" || name == "tau" {
            return Err(err(format!("params.{name}"), "reserved name"));
        }
        if !v.is_finite() {
            return Err(err(format!("params.{name}"), "must be finite"));
        }
    }
    let mut params = c.params.clone();
    params.insert("r".into(), c.r);
    params.insert("tau".into(), c.tau);

    let partition = Partition::new(c.r, c.tau, c.impulses.iter().map(|i| (i.t, i.s)).collect(), c.theta.clone());
    if let Some(v) = partition.violations().into_iter().next() {
        return Err(err(v.location, v.message));
    }
    let q = partition.q();
    if let Some(h) = c.grid_step {
        if !(h > 0.0 && h.is_finite()) {
            return Err(err("grid_step", format!("must be positive, got {h}")));
        }
    }

    let mut spec = SystemSpec::new(n, partition);

    if let Some(rows) = &c.a {
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(err("A", format!("expected an {n}x{n} matrix of expressions")));
        }
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            for (j, s) in row.iter().enumerate() {
                entries.push(compile(s, Slot::Matrix, &params, &format!("A[{i}][{j}]"))?);
            }
        }
        let entries = Arc::new(entries);
        spec.matrix = Arc::new(move |t| {
            let env = Env::new().time(t);
            let mut a = DMatrix::zeros(n, n);
            for (k, e) in entries.iter().enumerate() {
                a[(k / n, k % n)] = e.eval(&env)?;
            }
            Ok(a)
        });
    }

    let mut lags = Vec::new();
    if let Some(texts) = &c.f {
        let exprs = compile_all(texts, n, Slot::Drift, &params, "f")?;
        for (i, e) in exprs.iter().enumerate() {
            let field = format!("f[{i}]");
            check_indices(e, n, q, &field)?;
            let found = e.lags().ok_or_else(|| err(&field, "delay lags must be constant expressions"))?;
            for d in found {
                if !(0.0..=c.r).contains(&d) {
                    return Err(err(&field, format!("lag {d} outside [0, r] with r = {}", c.r)));
                }
                if !lags.contains(&d) {
                    lags.push(d);
                }
            }
        }
        let exprs = Arc::new(exprs);
        spec.drift = Arc::new(move |t, h| eval_vec(&exprs, &Env::new().time(t).with_history(h)));
    }
    lags.sort_by(f64::total_cmp);
    spec.lags = lags;

    spec.impulses = Vec::with_capacity(c.impulses.len());
    for (k, imp) in c.impulses.iter().enumerate() {
        let field = format!("impulses[{k}].G");
        let exprs = compile_all(&imp.g, n, Slot::Impulse, &params, &field)?;
        for (i, e) in exprs.iter().enumerate() {
            check_indices(e, n, q, &format!("{field}[{i}]"))?;
        }
        let exprs = Arc::new(exprs);
        spec.impulses.push(Arc::new(move |t, x: &DVector<f64>| {
            eval_vec(&exprs, &Env::new().time(t).with_state(x.as_slice()))
        }));
    }

    spec.nonlocal = match (&c.g, q) {
        (None, 0) => None,
        (None, _) => return Err(err("g", format!("required because theta has {q} point(s)"))),
        (Some(_), 0) => return Err(err("g", "given but theta is empty")),
        (Some(texts), _) => {
            let exprs = compile_all(texts, n, Slot::NonLocal, &params, "g")?;
            for (i, e) in exprs.iter().enumerate() {
                check_indices(e, n, q, &format!("g[{i}]"))?;
            }
            let exprs = Arc::new(exprs);
            Some(Arc::new(move |t, ys: &[impdde::History<'_>]| {
                eval_vec(&exprs, &Env::new().time(t).with_nonlocal(ys))
            }))
        }
    };

    let phi = Arc::new(compile_all(&c.phi, n, Slot::History, &params, "phi")?);
    spec.history = Arc::new(move |t| eval_vec(&phi, &Env::new().time(t)));

    let k = &c.constants;
    let envelope = |text: &Option<String>, slot: Slot, field: &str| -> Result<Option<Arc<Expr>>, ConfigError> {
        text.as_ref().map(|s| compile(s, slot, &params, field).map(Arc::new)).transpose()
    };
    let psi = envelope(&k.psi, Slot::Envelope1, "constants.Psi")?;
    let kk = envelope(&k.k, Slot::Envelope2, "constants.K")?;
    let h = envelope(&k.h, Slot::Growth, "constants.h")?;
    let growth: Option<ScalarFn> = h.map(|e| -> ScalarFn { Arc::new(move |t| Ok(e.eval(&Env::new().time(t))?)) });
    spec.declared = DeclaredConstants {
        m: k.m.as_ref().map(|s| constant(s, &params, "constants.M")).transpose()?,
        lipschitz_impulse: k.l.as_ref().map(|s| constant(s, &params, "constants.L")).transpose()?,
        lipschitz_nonlocal: k.n_q.as_ref().map(|s| constant(s, &params, "constants.N_q")).transpose()?,
        psi: psi.map(|e| -> ScalarFn {
            Arc::new(move |x| Ok(e.eval(&Env { x: Some(x), ..Env::new() })?))
        }),
        k: kk.map(|e| -> impdde::model::PairFn {
            Arc::new(move |u, v| Ok(e.eval(&Env { u: Some(u), v: Some(v), ..Env::new() })?))
        }),
        growth: growth.clone(),
    };

    if let Some(v) = spec.validate().into_iter().next() {
        return Err(err(v.location, v.message));
    }

    let s = &c.solver;
    if !(s.tol > 0.0) {
        return Err(err("solver.tol", format!("must be positive, got {}", s.tol)));
    }
    if s.max_iters == 0 {
        return Err(err("solver.max_iters", "must be at least 1"));
    }
    let solve = SolveOptions {
        tol: s.tol,
        max_iters: s.max_iters,
        initial: match s.initial {
            InitialConfig::PhiTilde => InitialGuess::PhiTilde,
            InitialConfig::Zero => InitialGuess::Zero,
        },
    };
    let o = &c.operator;
    let rho = o.rho.unwrap_or(1.0);
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(err("operator.rho", format!("must be positive, got {rho}")));
    }
    let op = OperatorParams {
        eta: vector(&o.eta, n, "operator.eta")?,
        alpha: vector(&o.alpha, n, "operator.alpha")?,
        beta: vector(&o.beta, n, "operator.beta")?,
        rho,
    };

    Ok(Loaded { spec, grid_step: c.grid_step, solve, params: op, growth, config })
}
