use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use impdde_cli::commands::{self, CheckArgs, Common, ExtendArgs};

#[derive(Parser, Debug)]
#[command(name = "impdde", version, about = "Solve, check and extend impulsive delay systems with non-local history")]
struct Cli {
    #[command(flatten)]
    global: Global,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// System description (JSON)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Built-in scenario instead of --config
    #[arg(long, global = true, value_name = "NAME")]
    scenario: Option<String>,

    /// Output file (CSV for solve/extend, JSON for check)
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Nominal grid step, overriding the config
    #[arg(long, global = true, value_name = "H")]
    grid_step: Option<f64>,

    /// Seed for sampled constants
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Samples per sampled constant
    #[arg(long, global = true, default_value_t = 2000)]
    samples: usize,

    /// Print the report as JSON
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve on [-r, tau]; writes the trajectory and <stem>.diagnostics.json
    Solve,
    /// Evaluate the H1-H4 inequalities
    Check {
        /// Ball radius (default: operator.rho from the config)
        #[arg(long, conflicts_with = "find_rho")]
        rho: Option<f64>,
        /// Search for the smallest radius satisfying H3 and H4
        #[arg(long)]
        find_rho: bool,
        /// Upper end of the radius search
        #[arg(long, default_value_t = 10.0)]
        rho_max: f64,
        /// Sample constants that are not declared
        #[arg(long)]
        estimate: bool,
    },
    /// Solve, then continue past tau; writes the trajectory and <stem>.extend.json
    Extend {
        /// End time
        #[arg(long)]
        to: f64,
        /// Growth majorant h(t) for the a-priori bound
        #[arg(long, value_name = "EXPR")]
        growth: Option<String>,
    },
    /// List the built-in scenarios
    Scenarios {
        /// Print one scenario's JSON
        #[arg(long, value_name = "NAME")]
        show: Option<String>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("IMPDDE_LOG", "error")).init();
    let cli = Cli::parse();
    let g = cli.global;
    let common = Common {
        config: g.config,
        scenario: g.scenario,
        out: g.out,
        grid_step: g.grid_step,
        seed: g.seed,
        samples: g.samples,
        json: g.json,
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let result = match cli.command {
        Command::Solve => commands::solve_cmd(&common, &mut out),
        Command::Check { rho, find_rho, rho_max, estimate } => {
            commands::check_cmd(&common, &CheckArgs { rho, find_rho, rho_max, estimate }, &mut out)
        }
        Command::Extend { to, growth } => commands::extend_cmd(&common, &ExtendArgs { to, growth }, &mut out),
        Command::Scenarios { show } => commands::scenarios_cmd(common.json, show.as_deref(), &mut out),
    };
    let _ = out.flush();
    match result {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.status().code() as u8)
        }
    }
}
