//! The `solve`, `check`, `extend` and `scenarios` commands.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use impdde::expr::{parse_str, Env, Slot};
use impdde::hypotheses::{assemble_constants, check_hypotheses, find_rho, EstimateOptions, RhoSearch};
use impdde::prolongation::{extend_solution, gronwall_bound, GronwallBound};
use impdde::solver::{solve, verify_solution, VerificationReport};
use impdde::{Error, HypothesisReport, Problem, SolveDiagnostics, Trajectory};
use serde::Serialize;

use crate::config::{self, ConfigError, Loaded};
use crate::output::{self, OutputError};
use crate::scenarios::{self, SCENARIOS};

/// Process exit status by outcome class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    Other = 1,
    Config = 2,
    NotConverged = 3,
    BlowUp = 4,
    HypothesisFailed = 5,
}

impl Status {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Numeric(#[from] Error),
    #[error("{0}")]
    Output(#[from] OutputError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn status(&self) -> Status {
        match self {
            CliError::Config(_) | CliError::Usage(_) => Status::Config,
            CliError::Numeric(Error::NonFinite { .. }) => Status::BlowUp,
            CliError::Numeric(Error::InvalidSpec(_)) => Status::Config,
            _ => Status::Other,
        }
    }
}

/// Options shared by every command.
#[derive(Debug, Clone, Default)]
pub struct Common {
    pub config: Option<PathBuf>,
    pub scenario: Option<String>,
    pub out: Option<PathBuf>,
    pub grid_step: Option<f64>,
    pub seed: u64,
    pub samples: usize,
    pub json: bool,
}

impl Common {
    fn load(&self) -> Result<(String, Loaded), CliError> {
        match (&self.config, &self.scenario) {
            (Some(p), None) => {
                let stem = p.file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
                Ok((stem, config::load_path(p)?))
            }
            (None, Some(name)) => {
                let s = scenarios::find(name)
                    .ok_or_else(|| CliError::Usage(format!("unknown scenario '{name}'; see `impdde scenarios`")))?;
                Ok((s.name.to_string(), config::load_str(s.source)?))
            }
            (None, None) => Err(CliError::Usage("one of --config or --scenario is required".into())),
            (Some(_), Some(_)) => Err(CliError::Usage("--config and --scenario are mutually exclusive".into())),
        }
    }

    fn problem(&self, loaded: &Loaded) -> Result<Problem, CliError> {
        if let Some(h) = self.grid_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(CliError::Usage(format!("--grid-step must be positive, got {h}")));
            }
        }
        Ok(Problem::new(loaded.spec.clone(), self.grid_step.or(loaded.grid_step))?)
    }

    fn out_path(&self, stem: &str, ext: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(format!("{stem}.{ext}")))
    }
}

#[derive(Debug, Serialize)]
pub struct SolveDocument {
    pub source: String,
    pub grid_step: f64,
    pub nodes: usize,
    pub elapsed_ms: f64,
    pub diagnostics: SolveDiagnostics,
    pub verification: VerificationReport,
    pub summary: String,
}

fn run_solve(common: &Common) -> Result<(String, Loaded, Problem, Trajectory, SolveDocument), CliError> {
    let (stem, loaded) = common.load()?;
    let problem = common.problem(&loaded)?;
    let start = Instant::now();
    let (z, diag) = solve(&problem, &loaded.params, &loaded.solve)?;
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    let verification = verify_solution(&problem, &z)?;
    let summary = format!(
        "{}: {} after {} iterations, fixed-point residual {:.3e}, contraction {:.4}, \
         residuals ode {:.3e} impulse {:.3e} non-local {:.3e}",
        stem,
        if diag.converged { "converged" } else { "NOT converged" },
        diag.iterations,
        diag.final_residual,
        diag.empirical_contraction,
        verification.ode_residual,
        verification.impulse_residual,
        verification.nonlocal_residual,
    );
    let doc = SolveDocument {
        source: stem.clone(),
        grid_step: problem.grid().step(),
        nodes: problem.grid().node_count(),
        elapsed_ms,
        diagnostics: diag,
        verification,
        summary,
    };
    Ok((stem, loaded, problem, z, doc))
}

fn emit<T: Serialize>(out: &mut dyn Write, json: bool, doc: &T, summary: &str) -> Result<(), CliError> {
    let res = if json {
        serde_json::to_writer_pretty(&mut *out, doc).map_err(OutputError::from)?;
        writeln!(out)
    } else {
        writeln!(out, "{}", summary.trim_end())
    };
    res.map_err(|e| CliError::Usage(format!("cannot write to stdout: {e}")))
}

pub fn solve_cmd(common: &Common, out: &mut dyn Write) -> Result<Status, CliError> {
    let (stem, _, _, z, doc) = run_solve(common)?;
    let csv = common.out_path(&stem, "csv");
    output::write_trajectory(&csv, &z)?;
    output::write_json(&output::sibling(&csv, "diagnostics.json"), &doc)?;
    emit(out, common.json, &doc, &doc.summary)?;
    Ok(if doc.diagnostics.converged { Status::Ok } else { Status::NotConverged })
}

#[derive(Debug, Clone)]
pub struct CheckArgs {
    pub rho: Option<f64>,
    pub find_rho: bool,
    pub rho_max: f64,
    pub estimate: bool,
}

#[derive(Debug, Serialize)]
pub struct CheckDocument {
    pub source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_search: Option<RhoSearch>,
    pub report: HypothesisReport,
    pub summary: String,
}

pub fn check_cmd(common: &Common, args: &CheckArgs, out: &mut dyn Write) -> Result<Status, CliError> {
    let (stem, loaded) = common.load()?;
    let problem = common.problem(&loaded)?;
    let mut params = loaded.params.clone();
    if let Some(rho) = args.rho {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(CliError::Usage(format!("--rho must be positive, got {rho}")));
        }
        params.rho = rho;
    }
    let phi_norm = problem.phi_tilde(&params)?.sup_norm();
    let estimate = args.estimate.then(|| {
        let radius = phi_norm + params.rho.max(args.rho_max.min(10.0));
        EstimateOptions {
            samples: common.samples,
            seed: common.seed,
            radius,
            radii: (1..=8).map(|k| radius * k as f64 / 4.0).collect(),
        }
    });
    let constants = assemble_constants(&problem, estimate.as_ref()).map_err(|e| match e {
        Error::Domain(m) => CliError::Usage(format!("{m}; declare it under \"constants\" or pass --estimate")),
        e => e.into(),
    })?;
    let partition = &loaded.spec.partition;
    let rho_search = args.find_rho.then(|| {
        find_rho(&constants, partition, phi_norm, &params.alpha, &params.beta, args.rho_max, true)
    });
    if let Some(RhoSearch::Feasible { rho }) = rho_search {
        params.rho = rho;
    }
    let report = check_hypotheses(&constants, partition, phi_norm, params.rho, &params.alpha, &params.beta);
    let mut summary = format!("{stem}\n");
    match &rho_search {
        Some(RhoSearch::Feasible { rho }) => summary.push_str(&format!("smallest feasible rho = {rho:.6e}\n")),
        Some(RhoSearch::Infeasible { binding }) => {
            summary.push_str(&format!("no feasible rho up to {}; binding: {binding}\n", args.rho_max))
        }
        None => {}
    }
    summary.push_str(&report.summary());
    let feasible = !matches!(rho_search, Some(RhoSearch::Infeasible { .. }));
    let status = if report.overall && feasible { Status::Ok } else { Status::HypothesisFailed };
    let doc = CheckDocument { source: stem.clone(), rho_search, report, summary };
    output::write_json(&common.out_path(&stem, "check.json"), &doc)?;
    emit(out, common.json, &doc, &doc.summary)?;
    Ok(status)
}

#[derive(Debug, Clone)]
pub struct ExtendArgs {
    pub to: f64,
    pub growth: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct ExtendDocument {
    pub source: String,
    pub tau: f64,
    pub to: f64,
    pub reached: f64,
    pub escape: Option<f64>,
    pub solve: SolveDocument,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<GronwallBound>,
    /// Largest state norm on `(start, end]` of the bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observed_peak: Option<f64>,
    pub summary: String,
}

pub fn extend_cmd(common: &Common, args: &ExtendArgs, out: &mut dyn Write) -> Result<Status, CliError> {
    let (stem, loaded, problem, z, solve_doc) = run_solve(common)?;
    let tau = loaded.spec.partition.tau;
    if !(args.to > tau) {
        return Err(CliError::Usage(format!("--to must exceed tau = {tau}, got {}", args.to)));
    }
    let growth = match &args.growth {
        Some(text) => {
            let e = parse_str(text, Slot::Growth)
                .map_err(|e| CliError::Usage(format!("--growth: {e}")))?
                .bind_params(&loaded.config.params);
            Some(std::sync::Arc::new(move |t: f64| Ok(e.eval(&Env::new().time(t))?)) as impdde::model::ScalarFn)
        }
        None => loaded.growth.clone(),
    };

    let ext = extend_solution(problem.spec(), &z, args.to)?;
    let reached = ext.trajectory.grid().end();
    let mut bound = None;
    let mut observed_peak = None;
    if let (Some(h), None) = (&growth, ext.escape) {
        // jump gain at s_N: the declared impulse constant, or 1 when none applies
        let l = match loaded.spec.declared.lipschitz_impulse {
            Some(l) if l > 0.0 && loaded.spec.partition.n_impulses() > 0 => l,
            _ => 1.0,
        };
        let b = gronwall_bound(problem.spec(), &ext.trajectory, args.to, l, |t| {
            h(t).map_err(|e| Error::Callback { what: "growth majorant", time: t, source: e })
        })?;
        observed_peak = Some(
            ext.trajectory
                .nodes()
                .filter(|n| n.2 > b.start)
                .map(|n| n.3.iter().map(|x| x * x).sum::<f64>().sqrt())
                .fold(0.0, f64::max),
        );
        bound = Some(b);
    }

    let mut summary = format!("{}\nextended from {tau} to {reached}", solve_doc.summary);
    if let Some(t) = ext.escape {
        summary.push_str(&format!("\nblow-up: state escaped at t = {t:.6}"));
    }
    if let (Some(b), Some(p)) = (&bound, observed_peak) {
        summary.push_str(&format!("\na-priori bound on ({}, {}]: {:.6e}, observed peak {:.6e}", b.start, b.end, b.bound, p));
    }
    let csv = common.out_path(&stem, "csv");
    output::write_trajectory(&csv, &ext.trajectory)?;
    let status = if ext.escape.is_some() {
        Status::BlowUp
    } else if !solve_doc.diagnostics.converged {
        Status::NotConverged
    } else {
        Status::Ok
    };
    let doc = ExtendDocument {
        source: stem,
        tau,
        to: args.to,
        reached,
        escape: ext.escape,
        solve: solve_doc,
        bound,
        observed_peak,
        summary,
    };
    output::write_json(&output::sibling(&csv, "extend.json"), &doc)?;
    emit(out, common.json, &doc, &doc.summary)?;
    Ok(status)
}

pub fn scenarios_cmd(json: bool, show: Option<&str>, out: &mut dyn Write) -> Result<Status, CliError> {
    let w = |r: std::io::Result<()>| r.map_err(|e| CliError::Usage(format!("cannot write to stdout: {e}")));
    if let Some(name) = show {
        let s = scenarios::find(name).ok_or_else(|| CliError::Usage(format!("unknown scenario '{name}'")))?;
        w(out.write_all(s.source.as_bytes()))?;
        return Ok(Status::Ok);
    }
    if json {
        serde_json::to_writer_pretty(&mut *out, &SCENARIOS).map_err(OutputError::from)?;
        w(writeln!(out))?;
    } else {
        for s in &SCENARIOS {
            w(writeln!(out, "{:20} {}", s.name, s.description))?;
        }
    }
    Ok(Status::Ok)
}

/// Re-reads a trajectory written by `solve` and verifies it against the
/// problem it came from.
pub fn reverify(common: &Common, csv: &Path) -> Result<VerificationReport, CliError> {
    let (_, loaded) = common.load()?;
    let problem = common.problem(&loaded)?;
    let z = output::read_trajectory(csv, problem.grid().clone())?;
    Ok(verify_solution(&problem, &z)?)
}
