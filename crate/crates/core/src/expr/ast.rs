use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::ExprError;
use crate::model::History;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Abs,
    Sqrt,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
        }
    }

    fn apply(self, x: f64) -> Result<f64, ExprError> {
        match self {
            Func::Sin => Ok(x.sin()),
            Func::Cos => Ok(x.cos()),
            Func::Exp => Ok(x.exp()),
            Func::Abs => Ok(x.abs()),
            Func::Log if x > 0.0 => Ok(x.ln()),
            Func::Sqrt if x >= 0.0 => Ok(x.sqrt()),
            _ => Err(ExprError::Domain { func: self.name(), arg: x }),
        }
    }
}

/// The reserved scalar variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Var {
    T,
    X,
    U,
    V,
}

impl Var {
    pub fn from_name(name: &str) -> Option<Var> {
        Some(match name {
            "t" => Var::T,
            "x" => Var::X,
            "u" => Var::U,
            "v" => Var::V,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::X => "x",
            Var::U => "u",
            Var::V => "v",
        }
    }
}

/// Parsed expression. Component indices are 1-based as written.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Param(String),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
    /// `z(i)`: current state component.
    State(usize),
    /// `zd(i, lag)`: component `i` at `t - lag`.
    Delayed(usize, Box<Expr>),
    /// `yq(j, i)`: component `i` of the `j`-th non-local input.
    NonLocal(usize, usize),
}

/// A free variable of an expression.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum VarRef {
    Var(Var),
    Param(String),
    State(usize),
    Delayed(usize),
    NonLocal(usize, usize),
}

impl fmt::Display for VarRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarRef::Var(v) => f.write_str(v.name()),
            VarRef::Param(p) => write!(f, "param {p}"),
            VarRef::State(i) => write!(f, "z({i})"),
            VarRef::Delayed(i) => write!(f, "zd({i},·)"),
            VarRef::NonLocal(j, i) => write!(f, "yq({j},{i})"),
        }
    }
}

/// Values available to [`Expr::eval`].
#[derive(Clone, Copy, Default)]
pub struct Env<'e, 'h> {
    pub t: Option<f64>,
    pub x: Option<f64>,
    pub u: Option<f64>,
    pub v: Option<f64>,
    pub params: Option<&'e BTreeMap<String, f64>>,
    /// Current state, read by `z(i)`.
    pub state: Option<&'e [f64]>,
    /// History read by `zd(i, d)` (and by `z(i)` when no state is bound).
    pub history: Option<&'e History<'h>>,
    /// Non-local inputs read by `yq(j, i)` at lag position `t`.
    pub nonlocal: Option<&'e [History<'h>]>,
}

impl<'e, 'h> Env<'e, 'h> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn time(mut self, t: f64) -> Self {
        self.t = Some(t);
        self
    }

    pub fn with_params(mut self, p: &'e BTreeMap<String, f64>) -> Self {
        self.params = Some(p);
        self
    }

    pub fn with_state(mut self, z: &'e [f64]) -> Self {
        self.state = Some(z);
        self
    }

    pub fn with_history(mut self, h: &'e History<'h>) -> Self {
        self.history = Some(h);
        self
    }

    pub fn with_nonlocal(mut self, ys: &'e [History<'h>]) -> Self {
        self.nonlocal = Some(ys);
        self
    }

    fn var(&self, v: Var) -> Option<f64> {
        match v {
            Var::T => self.t,
            Var::X => self.x,
            Var::U => self.u,
            Var::V => self.v,
        }
    }
}

impl Expr {
    pub fn eval(&self, env: &Env<'_, '_>) -> Result<f64, ExprError> {
        match self {
            Expr::Num(x) => Ok(*x),
            Expr::Var(v) => env.var(*v).ok_or_else(|| ExprError::Unbound(v.name().into())),
            Expr::Param(p) => env
                .params
                .and_then(|m| m.get(p).copied())
                .ok_or_else(|| ExprError::Unbound(p.clone())),
            Expr::Neg(a) => Ok(-a.eval(env)?),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(env)?, b.eval(env)?);
                match op {
                    BinOp::Add => Ok(a + b),
                    BinOp::Sub => Ok(a - b),
                    BinOp::Mul => Ok(a * b),
                    BinOp::Div if b == 0.0 => Err(ExprError::DivisionByZero),
                    BinOp::Div => Ok(a / b),
                    BinOp::Pow => {
                        let p = a.powf(b);
                        if p.is_nan() {
                            Err(ExprError::Domain { func: "^", arg: a })
                        } else if a == 0.0 && b < 0.0 {
                            Err(ExprError::DivisionByZero)
                        } else {
                            Ok(p)
                        }
                    }
                }
            }
            Expr::Call(f, a) => f.apply(a.eval(env)?),
            Expr::State(i) => {
                if let Some(z) = env.state {
                    z.get(i - 1).copied().ok_or_else(|| ExprError::Unbound(format!("z({i})")))
                } else if let Some(h) = env.history.filter(|h| *i <= h.n()) {
                    Ok(h.component(i - 1, 0.0))
                } else {
                    Err(ExprError::Unbound(format!("z({i})")))
                }
            }
            Expr::Delayed(i, lag) => {
                let d = lag.eval(env)?;
                match env.history.filter(|h| *i <= h.n()) {
                    Some(h) => Ok(h.component(i - 1, -d)),
                    None => Err(ExprError::Unbound(format!("zd({i}, {d})"))),
                }
            }
            Expr::NonLocal(j, i) => {
                let s = env.t.ok_or_else(|| ExprError::Unbound("t".into()))?;
                match env.nonlocal.and_then(|ys| ys.get(j - 1)).filter(|h| *i <= h.n()) {
                    Some(h) => Ok(h.component(i - 1, s)),
                    None => Err(ExprError::Unbound(format!("yq({j}, {i})"))),
                }
            }
        }
    }

    /// Every variable, parameter and state access in the expression.
    pub fn free_vars(&self) -> BTreeSet<VarRef> {
        let mut out = BTreeSet::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut BTreeSet<VarRef>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => {
                out.insert(VarRef::Var(*v));
            }
            Expr::Param(p) => {
                out.insert(VarRef::Param(p.clone()));
            }
            Expr::Neg(a) | Expr::Call(_, a) => a.collect(out),
            Expr::Bin(_, a, b) => {
                a.collect(out);
                b.collect(out);
            }
            Expr::State(i) => {
                out.insert(VarRef::State(*i));
            }
            Expr::Delayed(i, lag) => {
                out.insert(VarRef::Delayed(*i));
                lag.collect(out);
            }
            Expr::NonLocal(j, i) => {
                out.insert(VarRef::NonLocal(*j, *i));
            }
        }
    }

    /// Replaces bound parameters by their values and folds every
    /// `zd` lag to a number where possible.
    pub fn bind_params(&self, params: &BTreeMap<String, f64>) -> Expr {
        match self {
            Expr::Param(p) => params.get(p).map_or_else(|| self.clone(), |&x| Expr::Num(x)),
            Expr::Num(_) | Expr::Var(_) | Expr::State(_) | Expr::NonLocal(..) => self.clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.bind_params(params))),
            Expr::Call(f, a) => Expr::Call(*f, Box::new(a.bind_params(params))),
            Expr::Bin(op, a, b) => Expr::Bin(*op, Box::new(a.bind_params(params)), Box::new(b.bind_params(params))),
            Expr::Delayed(i, lag) => {
                let lag = lag.bind_params(params);
                let lag = match lag.constant_value() {
                    Some(Ok(x)) => Expr::Num(x),
                    _ => lag,
                };
                Expr::Delayed(*i, Box::new(lag))
            }
        }
    }

    /// The value of an expression without free variables.
    pub fn constant_value(&self) -> Option<Result<f64, ExprError>> {
        self.free_vars().is_empty().then(|| self.eval(&Env::new()))
    }

    /// Constant lags of all `zd` accesses; `None` if any lag is not yet a number.
    pub fn lags(&self) -> Option<Vec<f64>> {
        let mut out = Vec::new();
        self.collect_lags(&mut out).then_some(out)
    }

    fn collect_lags(&self, out: &mut Vec<f64>) -> bool {
        match self {
            Expr::Delayed(_, lag) => match **lag {
                Expr::Num(x) => {
                    out.push(x);
                    true
                }
                _ => false,
            },
            Expr::Neg(a) | Expr::Call(_, a) => a.collect_lags(out),
            Expr::Bin(_, a, b) => a.collect_lags(out) && b.collect_lags(out),
            _ => true,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => write!(f, "{x}"),
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Param(p) => f.write_str(p),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::State(i) => write!(f, "z({i})"),
            Expr::Delayed(i, lag) => write!(f, "zd({i}, {lag})"),
            Expr::NonLocal(j, i) => write!(f, "yq({j}, {i})"),
        }
    }
}
