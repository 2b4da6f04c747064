//! Batch front-end: reads a JSON run config, dispatches one command and
//! writes a reproducible JSON or CSV report.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical failure or a
//! failed check, 3 I/O.

pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use modsg_core::bootstrap::toy;
use modsg_core::format::{ser_complex, ser_real, ser_real_vec};
use modsg_core::modular::ModularParams;
use modsg_core::selftest::{default_points, identity_suite, IdentityCheck};
use modsg_core::spectral::{quantile_seed, solve_bae, BetheState, SolverOptions};
use modsg_core::thermo::{Grid, Profile, ThermoContext};
use modsg_core::{Complex, Real};
use serde::Serialize;

pub use config::{Format, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<modsg_core::Error> for CliError {
    fn from(e: modsg_core::Error) -> Self {
        use modsg_core::Error as E;
        match e {
            E::Validation(_) | E::Domain(_) | E::Precision(_) => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "modsg",
    version,
    about = "Modular sinh-Gordon spectral and thermodynamic tools"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derived modular parameters and model checks.
    Params(CommonArgs),
    /// Special-function identity suite.
    Selftest(CommonArgs),
    /// Single-site bootstrap against the closed forms.
    Toy(CommonArgs),
    /// Newton solve of the quantisation conditions.
    Solve(CommonArgs),
    /// Thermodynamic profiles on a grid.
    Thermo(CommonArgs),
}

impl Command {
    fn args(&self) -> &CommonArgs {
        match self {
            Command::Params(a)
            | Command::Selftest(a)
            | Command::Toy(a)
            | Command::Solve(a)
            | Command::Thermo(a) => a,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Params(_) => "params",
            Command::Selftest(_) => "selftest",
            Command::Toy(_) => "toy",
            Command::Solve(_) => "solve",
            Command::Thermo(_) => "thermo",
        }
    }
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub tol: Option<Real>,
    #[arg(long)]
    pub order: Option<usize>,
    /// min:max:step
    #[arg(long, value_parser = config::parse_grid, allow_hyphen_values = true)]
    pub grid: Option<Grid>,
}

/// A rendered report and whether its checks passed.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub text: String,
    pub passed: bool,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    config_sha256: String,
    truncation_order: Option<usize>,
    config: &'a RunConfig,
    result: T,
}

/// Applies command-line overrides; `--out` and `--format` stay outside
/// the config so they do not change its hash.
pub fn resolve(cmd: &Command, mut cfg: RunConfig) -> RunConfig {
    let a = cmd.args();
    if let Some(m) = a.order {
        cfg.bootstrap.order = m;
    }
    if let Some(t) = a.tol {
        match cmd {
            Command::Solve(_) => cfg.solver.tol = t,
            _ => cfg.bootstrap.tol = Some(t),
        }
    }
    if let Some(g) = a.grid {
        cfg.thermo.grid = g;
    }
    cfg.output = Default::default();
    cfg
}

fn render<T: Serialize>(
    cmd: &str,
    cfg: &RunConfig,
    order: Option<usize>,
    format: Format,
    result: T,
) -> String {
    let hash = cfg.hash();
    match format {
        Format::Json => {
            let env = Envelope {
                command: cmd,
                config_sha256: hash,
                truncation_order: order,
                config: cfg,
                result,
            };
            let mut s = serde_json::to_string_pretty(&env).expect("report serializes");
            s.push('\n');
            s
        }
        Format::Csv => {
            let value = serde_json::to_value(&result).expect("report serializes");
            let mut rows = Vec::new();
            flatten("", &value, &mut rows);
            let mut out = csv_preamble(cmd, &hash, order);
            out.push_str("key,value\n");
            for (k, v) in rows {
                out.push_str(&format!("{k},{v}\n"));
            }
            out
        }
    }
}

fn csv_preamble(cmd: &str, hash: &str, order: Option<usize>) -> String {
    let order = order.map_or_else(|| "none".to_string(), |m| m.to_string());
    format!("# modsg {cmd} config_sha256={hash} truncation_order={order}\n")
}

fn flatten(prefix: &str, v: &serde_json::Value, out: &mut Vec<(String, String)>) {
    use serde_json::Value;
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                flatten(&key(k), x, out);
            }
        }
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                flatten(&key(&i.to_string()), x, out);
            }
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

#[derive(Serialize)]
struct ParamsReport {
    #[serde(serialize_with = "ser_real")]
    theta: Real,
    #[serde(serialize_with = "ser_complex")]
    b: Complex,
    #[serde(serialize_with = "ser_complex")]
    q: Complex,
    #[serde(serialize_with = "ser_complex")]
    qstar: Complex,
    #[serde(serialize_with = "ser_real")]
    q_modulus: Real,
    #[serde(serialize_with = "ser_real")]
    eta: Real,
    #[serde(serialize_with = "ser_real")]
    sigma: Real,
    #[serde(serialize_with = "ser_real")]
    c_b: Real,
    checks: ParamChecks,
    model: Option<ModelReport>,
}

#[derive(Serialize)]
struct ParamChecks {
    #[serde(serialize_with = "ser_real")]
    q_minus_qstar: Real,
    #[serde(serialize_with = "ser_real")]
    eta2_plus_sigma2_minus_1: Real,
    #[serde(serialize_with = "ser_real")]
    b_modulus_minus_1: Real,
    star_involution: bool,
}

#[derive(Serialize)]
struct ModelReport {
    n: usize,
    #[serde(serialize_with = "ser_real_vec")]
    alpha: Vec<Real>,
    #[serde(serialize_with = "ser_real_vec")]
    beta: Vec<Real>,
    #[serde(serialize_with = "ser_real")]
    tau: Real,
    #[serde(serialize_with = "ser_real")]
    mu: Real,
    #[serde(serialize_with = "ser_real")]
    t2_modulus: Real,
    #[serde(serialize_with = "ser_complex")]
    t: Complex,
    #[serde(serialize_with = "ser_complex")]
    tstar: Complex,
    #[serde(serialize_with = "ser_complex")]
    tau_prime: Complex,
    symmetric: bool,
}

fn cmd_params(cfg: &RunConfig, format: Format) -> Result<Outcome, CliError> {
    let p = cfg.params()?;
    let model = match &cfg.model {
        Some(_) => {
            let s = cfg.spec()?;
            Some(ModelReport {
                n: s.n(),
                alpha: s.alpha.clone(),
                beta: s.beta.clone(),
                tau: s.tau,
                mu: s.mu,
                t2_modulus: s.t2_modulus(&p),
                t: s.t(&p),
                tstar: s.t(&p.star()),
                tau_prime: s.tau_prime(&p),
                symmetric: s.is_symmetric(),
            })
        }
        None => None,
    };
    let report = ParamsReport {
        theta: p.theta,
        b: p.b,
        q: p.q,
        qstar: p.qstar,
        q_modulus: p.q.norm(),
        eta: p.eta,
        sigma: p.sigma,
        c_b: p.c_b,
        checks: ParamChecks {
            q_minus_qstar: (p.q - p.qstar).norm(),
            eta2_plus_sigma2_minus_1: p.eta * p.eta + p.sigma * p.sigma - 1.0,
            b_modulus_minus_1: p.b.norm() - 1.0,
            star_involution: p.star().star() == p,
        },
        model,
    };
    Ok(Outcome {
        text: render("params", cfg, None, format, report),
        passed: true,
    })
}

#[derive(Serialize)]
struct SelftestReport {
    passed: bool,
    #[serde(serialize_with = "ser_real_vec")]
    points: Vec<Real>,
    checks: Vec<IdentityCheck>,
}

fn cmd_selftest(cfg: &RunConfig, format: Format) -> Result<Outcome, CliError> {
    let p = cfg.params()?;
    let points = default_points();
    let checks = identity_suite(&p, &points, cfg.bootstrap.tol)?;
    let passed = checks.iter().all(|c| c.passed);
    let report = SelftestReport {
        passed,
        points,
        checks,
    };
    Ok(Outcome {
        text: render("selftest", cfg, None, format, report),
        passed,
    })
}

fn cmd_toy(cfg: &RunConfig, format: Format) -> Result<Outcome, CliError> {
    let p = cfg.params()?;
    let spec = cfg.spec()?;
    let order = cfg.bootstrap.order;
    let report = toy::oracle_report(&spec, order, &p, cfg.bootstrap.tol)?;
    let passed = report.passed;
    Ok(Outcome {
        text: render("toy", cfg, Some(order), format, report),
        passed,
    })
}

#[derive(Serialize)]
struct SolveReport {
    #[serde(serialize_with = "ser_real_vec")]
    seed: Vec<Real>,
    state: BetheState,
}

fn cmd_solve(cfg: &RunConfig, format: Format) -> Result<Outcome, CliError> {
    let p = cfg.params()?;
    let spec = cfg.spec()?;
    let seed = match cfg.solver.seed {
        config::SeedKind::Quantile => quantile_seed(&spec, &p)?,
        config::SeedKind::Explicit => cfg.solver.roots.clone(),
    };
    let opts = SolverOptions {
        max_iter: cfg.solver.max_iter,
        tol: cfg.solver.tol,
        ..SolverOptions::default()
    };
    let order = cfg.bootstrap.order;
    let state = solve_bae(&spec, &seed, order, &p, &opts)?;
    Ok(Outcome {
        text: render(
            "solve",
            cfg,
            Some(order),
            format,
            SolveReport { seed, state },
        ),
        passed: true,
    })
}

#[derive(Serialize)]
struct ProfileRow {
    #[serde(serialize_with = "ser_real")]
    x: Real,
    values: Vec<[Real; 2]>,
}

#[derive(Serialize)]
struct ProfileReport {
    functions: Vec<&'static str>,
    rows: Vec<ProfileRow>,
}

fn profile_json(p: &Profile) -> ProfileReport {
    use modsg_core::format::round12;
    ProfileReport {
        functions: p.functions.iter().map(|f| f.name()).collect(),
        rows: p
            .x
            .iter()
            .zip(&p.values)
            .map(|(x, row)| ProfileRow {
                x: *x,
                values: row.iter().map(|z| [round12(z.re), round12(z.im)]).collect(),
            })
            .collect(),
    }
}

fn cmd_thermo(cfg: &RunConfig, format: Format) -> Result<Outcome, CliError> {
    let p: ModularParams = cfg.params()?;
    let model = cfg.density_model()?;
    let ctx = ThermoContext::new(p, model, cfg.thermo.grid);
    let profile = ctx.profile(&cfg.thermo.functions)?;
    let text = match format {
        Format::Csv => {
            let mut s = csv_preamble("thermo", &cfg.hash(), None);
            s.push_str(&profile.to_csv());
            s
        }
        Format::Json => render("thermo", cfg, None, format, profile_json(&profile)),
    };
    Ok(Outcome { text, passed: true })
}

/// Runs a command against an already parsed config.
pub fn execute(cmd: &Command, cfg: RunConfig) -> Result<Outcome, CliError> {
    let requested = cmd.args().format.or(cfg.output.format);
    let cfg = resolve(cmd, cfg);
    let default = match cmd {
        Command::Thermo(_) => Format::Csv,
        _ => Format::Json,
    };
    let format = requested.unwrap_or(default);
    match cmd {
        Command::Params(_) => cmd_params(&cfg, format),
        Command::Selftest(_) => cmd_selftest(&cfg, format),
        Command::Toy(_) => cmd_toy(&cfg, format),
        Command::Solve(_) => cmd_solve(&cfg, format),
        Command::Thermo(_) => cmd_thermo(&cfg, format),
    }
}

/// Full invocation: read the config, execute, write the report. Returns
/// the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match run_inner(cli) {
        Ok(true) => 0,
        Ok(false) => {
            eprintln!("modsg {}: one or more checks failed", cli.command.name());
            2
        }
        Err(e) => {
            eprintln!("modsg {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}

fn run_inner(cli: &Cli) -> Result<bool, CliError> {
    let args = cli.command.args();
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.config.display())))?;
    let cfg = RunConfig::from_json(&text)?;
    let out_path = args.out.clone().or_else(|| cfg.output.path.clone());
    let outcome = execute(&cli.command, cfg)?;
    match out_path {
        Some(path) => std::fs::write(&path, &outcome.text)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        None => print!("{}", outcome.text),
    }
    Ok(outcome.passed)
}
