//! Command-line front end: `solve`, `validate`, `bench` and `profile-gen`.
//!
//! Exit codes: 0 solved and valid, 1 solved with violations or not
//! converged, 2 usage or input error. Errors are also written as JSON to
//! stdout.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::ipm::{solve, KktError, LinearSolverKind, SolveOutcome, SolverConfig};
use crate::power::{
    build_multiperiod_opf, bundled_case, extract_dispatch, generate_load_profile, parse_matpower, validate_solution, DispatchSolution,
    LoadProfile, MultiPeriodCase, NetworkData, OpfModel, ViolationReport,
};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "mpopf", version, about = "Multi-period AC optimal power flow")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build, solve and validate one instance.
    Solve(SolveArgs),
    /// Check a dispatch JSON against a case.
    Validate(ValidateArgs),
    /// Solve a roster of instances and print a CSV table.
    Bench(BenchArgs),
    /// Write a load profile CSV.
    ProfileGen(ProfileArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SolverChoice {
    Sparse,
    Dense,
}

impl From<SolverChoice> for LinearSolverKind {
    fn from(c: SolverChoice) -> Self {
        match c {
            SolverChoice::Sparse => LinearSolverKind::Sparse,
            SolverChoice::Dense => LinearSolverKind::Dense,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct CaseArgs {
    /// MATPOWER file, or the name of a bundled case (case9, case30, case118).
    #[arg(long)]
    pub case: String,
    #[arg(long, default_value_t = 1)]
    pub periods: usize,
    /// Minutes per period.
    #[arg(long, default_value_t = 30.0)]
    pub resolution: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.2)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 0.02)]
    pub noise: f64,
    /// Multiplier applied to the base loads before the profile [default: 1].
    #[arg(long)]
    pub load_scale: Option<f64>,
    /// Read the load profile from CSV instead of generating it.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    /// Override every generator's ramp limit (per unit per hour; `inf` disables ramp rows).
    #[arg(long)]
    pub ramp: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct SolveArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 3000)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = SolverChoice::Sparse)]
    pub linear_solver: SolverChoice,
    /// Report JSON path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Iteration log CSV path.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Dispatch JSON path.
    #[arg(long)]
    pub solution: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    #[arg(long)]
    pub solution: PathBuf,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct BenchArgs {
    /// Roster entry `CASE:PERIODS:RESOLUTION[:LOAD_SCALE]`; repeatable.
    #[arg(long = "row")]
    pub rows: Vec<String>,
    /// File with one roster entry per line.
    #[arg(long)]
    pub roster: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.2)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 0.02)]
    pub noise: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 3000)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = SolverChoice::Sparse)]
    pub linear_solver: SolverChoice,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ProfileArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Roster used by `bench` when no rows are given.
pub const DEFAULT_ROSTER: [&str; 2] = ["case30:30:30:0.8", "case118:168:60"];

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Io(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Input(_) => "input",
            CliError::Io(_) => "io",
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    schema_version: u32,
    error: ErrorBody<'a>,
}

pub fn error_json(e: &CliError) -> String {
    serde_json::to_string_pretty(&ErrorReport { schema_version: REPORT_SCHEMA_VERSION, error: ErrorBody { kind: e.kind(), message: e.to_string() } })
        .expect("error report serializes")
}

fn input<E: fmt::Display>(what: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Input(format!("{what}: {e}"))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write_file(p, text.as_bytes()),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

/// Load a network from a path or a bundled case name.
pub fn load_network(case: &str) -> Result<NetworkData, CliError> {
    let text = match fs::read_to_string(case) {
        Ok(t) => t,
        Err(e) => match bundled_case(case) {
            Some(t) => t.to_string(),
            None => return Err(CliError::Input(format!("{case}: {e}"))),
        },
    };
    parse_matpower(&text).map_err(input(case))
}

fn check_profile_args(a: &CaseArgs) -> Result<(), CliError> {
    if a.periods == 0 {
        return Err(CliError::Input("--periods must be at least 1".into()));
    }
    if !(a.resolution > 0.0) {
        return Err(CliError::Input("--resolution must be positive".into()));
    }
    if !(0.0..1.0).contains(&a.amplitude) || !(a.noise >= 0.0) {
        return Err(CliError::Input("--amplitude must lie in [0, 1) and --noise must be non-negative".into()));
    }
    Ok(())
}

/// Network plus generated or loaded profile.
pub fn load_case(a: &CaseArgs) -> Result<MultiPeriodCase, CliError> {
    check_profile_args(a)?;
    let load_scale = a.load_scale.unwrap_or(1.0);
    if !(load_scale > 0.0) {
        return Err(CliError::Input("--load-scale must be positive".into()));
    }
    let mut net = load_network(&a.case)?.with_load_scale(load_scale);
    if let Some(r) = a.ramp {
        if !(r >= 0.0) {
            return Err(CliError::Input("--ramp must be non-negative".into()));
        }
        net = net.with_ramp(r);
    }
    let profile = match &a.profile {
        Some(p) => {
            let f = fs::File::open(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
            LoadProfile::read_csv(f).map_err(input(&p.display().to_string()))?
        }
        None => generate_load_profile(&net, a.periods, a.resolution, a.seed, a.amplitude, a.noise),
    };
    MultiPeriodCase::new(net, profile).map_err(input(&a.case))
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveCommandReport {
    pub schema_version: u32,
    pub case: String,
    pub periods: usize,
    pub tol: f64,
    pub linear_solver: LinearSolverKind,
    pub status: String,
    pub solved: bool,
    pub valid: bool,
    pub objective: f64,
    pub iterations: usize,
    pub kkt: KktError,
    pub nvars: usize,
    pub ncons: usize,
    pub build_time_s: f64,
    pub wall_time_s: f64,
    pub all_steps_positive_definite: bool,
    pub message: Option<String>,
    pub violations: ViolationReport,
}

/// Everything a solve run produces.
pub struct SolveRun {
    pub case: MultiPeriodCase,
    pub opf: OpfModel,
    pub outcome: SolveOutcome,
    pub dispatch: DispatchSolution,
    pub report: SolveCommandReport,
}

impl SolveRun {
    pub fn exit_code(&self) -> i32 {
        if self.report.solved && self.report.valid {
            0
        } else {
            1
        }
    }
}

pub fn solver_config(tol: f64, max_iter: usize, linear_solver: SolverChoice) -> Result<SolverConfig, CliError> {
    if !(tol > 0.0) {
        return Err(CliError::Input("--tol must be positive".into()));
    }
    Ok(SolverConfig { max_iter, linear_solver: linear_solver.into(), ..SolverConfig::default().with_tol(tol) })
}

/// Build, solve and validate. Wall time covers the solve call only.
pub fn cmd_solve(args: &SolveArgs) -> Result<SolveRun, CliError> {
    let config = solver_config(args.tol, args.max_iter, args.linear_solver)?;
    let case = load_case(&args.case)?;
    let t0 = Instant::now();
    let opf = build_multiperiod_opf(&case).map_err(input("model build"))?;
    let build_time_s = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let outcome = solve(&opf.model, &config).map_err(input("solver setup"))?;
    let wall_time_s = t1.elapsed().as_secs_f64();
    let mut dispatch = extract_dispatch(&opf, &outcome.x, &case).map_err(input("dispatch"))?;
    let r = &outcome.report;
    dispatch.status = Some(r.status.as_str().to_string());
    dispatch.iterations = Some(r.iterations);
    dispatch.load_scale = Some(args.case.load_scale.unwrap_or(1.0));
    let violations = validate_solution(&case, &dispatch, args.tol).map_err(input("validation"))?;
    let report = SolveCommandReport {
        schema_version: REPORT_SCHEMA_VERSION,
        case: case.network.name.clone(),
        periods: case.periods(),
        tol: args.tol,
        linear_solver: config.linear_solver,
        status: r.status.as_str().to_string(),
        solved: r.status == crate::ipm::SolveStatus::Solved,
        valid: violations.pass,
        objective: r.objective,
        iterations: r.iterations,
        kkt: r.kkt,
        nvars: opf.model.num_variables(),
        ncons: opf.model.num_constraints(),
        build_time_s,
        wall_time_s,
        all_steps_positive_definite: r.all_steps_positive_definite(),
        message: r.message.clone(),
        violations,
    };
    Ok(SolveRun { case, opf, outcome, dispatch, report })
}

fn run_solve(args: &SolveArgs) -> Result<i32, CliError> {
    let run = cmd_solve(args)?;
    if let Some(p) = &args.log {
        write_file(p, run.outcome.report.log_csv().as_bytes())?;
    }
    if let Some(p) = &args.solution {
        write_file(p, serde_json::to_string_pretty(&run.dispatch).expect("dispatch serializes").as_bytes())?;
    }
    emit(args.out.as_deref(), &serde_json::to_string_pretty(&run.report).expect("report serializes"))?;
    Ok(run.exit_code())
}

/// Validate a stored dispatch. The period count, load profile and load scale
/// recorded in the file are used unless overridden by flags.
pub fn cmd_validate(args: &ValidateArgs) -> Result<ViolationReport, CliError> {
    let text = fs::read_to_string(&args.solution).map_err(|e| CliError::Input(format!("{}: {e}", args.solution.display())))?;
    let dispatch: DispatchSolution = serde_json::from_str(&text).map_err(input(&args.solution.display().to_string()))?;
    let mut case_args = args.case.clone();
    case_args.periods = dispatch.periods.len().max(1);
    case_args.load_scale = case_args.load_scale.or(dispatch.load_scale);
    let mut case = load_case(&case_args)?;
    if let (None, Some(p)) = (&args.case.profile, &dispatch.profile) {
        case = MultiPeriodCase::new(case.network, p.clone()).map_err(input("embedded profile"))?;
    }
    if !(args.tol >= 0.0) {
        return Err(CliError::Input("--tol must be non-negative".into()));
    }
    validate_solution(&case, &dispatch, args.tol).map_err(input("solution"))
}

fn run_validate(args: &ValidateArgs) -> Result<i32, CliError> {
    let report = cmd_validate(args)?;
    emit(args.out.as_deref(), &serde_json::to_string_pretty(&report).expect("report serializes"))?;
    Ok(if report.pass { 0 } else { 1 })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub case: String,
    pub periods: usize,
    pub resolution: f64,
    pub load_scale: f64,
    pub nvars: usize,
    pub ncons: usize,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub status: String,
}

fn parse_row(entry: &str) -> Result<(String, usize, f64, f64), String> {
    let parts: Vec<&str> = entry.trim().split(':').collect();
    let (case, t, res, scale) = match parts.as_slice() {
        [case, t, res] => (case, t, res, "1"),
        [case, t, res, scale] => (case, t, res, *scale),
        _ => return Err(format!("roster entry `{entry}` is not CASE:PERIODS:RESOLUTION[:LOAD_SCALE]")),
    };
    let t = t.parse().map_err(|_| format!("bad period count in `{entry}`"))?;
    let res = res.parse().map_err(|_| format!("bad resolution in `{entry}`"))?;
    let scale = scale.parse().map_err(|_| format!("bad load scale in `{entry}`"))?;
    Ok((case.to_string(), t, res, scale))
}

/// Roster entries from flags, file, or the default.
pub fn bench_roster(args: &BenchArgs) -> Result<Vec<String>, CliError> {
    let mut rows = args.rows.clone();
    if let Some(p) = &args.roster {
        let text = fs::read_to_string(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
        rows.extend(text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(str::to_string));
    } else if rows.is_empty() {
        rows = DEFAULT_ROSTER.iter().map(|s| s.to_string()).collect();
    }
    Ok(rows)
}

/// Solve each roster entry in order. A failing entry is recorded in its row.
pub fn cmd_bench(args: &BenchArgs) -> Result<Vec<BenchRow>, CliError> {
    let config = solver_config(args.tol, args.max_iter, args.linear_solver)?;
    let roster = bench_roster(args)?;
    let mut out = Vec::with_capacity(roster.len());
    for entry in roster {
        let mut row = BenchRow { case: entry.clone(), periods: 0, resolution: 0.0, load_scale: 1.0, nvars: 0, ncons: 0, iterations: 0, wall_time_s: 0.0, status: String::new() };
        let result = (|| -> Result<(), CliError> {
            let (case, periods, resolution, load_scale) = parse_row(&entry).map_err(CliError::Input)?;
            row.case = case.clone();
            row.periods = periods;
            row.resolution = resolution;
            row.load_scale = load_scale;
            let case_args = CaseArgs {
                case,
                periods,
                resolution,
                seed: args.seed,
                amplitude: args.amplitude,
                noise: args.noise,
                load_scale: Some(load_scale),
                profile: None,
                ramp: None,
            };
            let mpc = load_case(&case_args)?;
            let opf = build_multiperiod_opf(&mpc).map_err(input("model build"))?;
            row.nvars = opf.model.num_variables();
            row.ncons = opf.model.num_constraints();
            let t = Instant::now();
            let outcome = solve(&opf.model, &config).map_err(input("solver setup"))?;
            row.wall_time_s = t.elapsed().as_secs_f64();
            row.iterations = outcome.report.iterations;
            row.status = outcome.report.status.as_str().to_string();
            Ok(())
        })();
        if let Err(e) = result {
            row.status = format!("error: {e}");
        }
        out.push(row);
    }
    Ok(out)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(["case", "periods", "resolution", "load_scale", "nvars", "ncons", "iterations", "wall_time_s", "status"]).expect("in-memory write");
    for r in rows {
        w.serialize(r).expect("row serializes");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
}

fn run_bench(args: &BenchArgs) -> Result<i32, CliError> {
    let rows = cmd_bench(args)?;
    let csv = bench_csv(&rows);
    match &args.out {
        Some(p) => write_file(p, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    Ok(if rows.iter().all(|r| r.status == "solved") { 0 } else { 1 })
}

pub fn cmd_profile_gen(args: &ProfileArgs) -> Result<LoadProfile, CliError> {
    check_profile_args(&args.case)?;
    let net = load_network(&args.case.case)?;
    let a = &args.case;
    Ok(generate_load_profile(&net, a.periods, a.resolution, a.seed, a.amplitude, a.noise))
}

fn run_profile_gen(args: &ProfileArgs) -> Result<i32, CliError> {
    let profile = cmd_profile_gen(args)?;
    let mut buf = Vec::new();
    profile.write_csv(&mut buf).map_err(|e| CliError::Io(e.to_string()))?;
    match &args.out {
        Some(p) => write_file(p, &buf)?,
        None => print!("{}", String::from_utf8_lossy(&buf)),
    }
    Ok(0)
}

/// Parse arguments, run the command and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => run_solve(a),
        Command::Validate(a) => run_validate(a),
        Command::Bench(a) => run_bench(a),
        Command::ProfileGen(a) => run_profile_gen(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            println!("{}", error_json(&e));
            2
        }
    }
}
