//! Command-line surface for the tornado retrofit planner.
//!
//! Exit codes: 0 success, 2 configuration error, 3 infeasible input,
//! 4 external-solver bridge failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tornado_plan::bench::{self, LengthSampling};
use tornado_plan::ccg::{self, CcgOptions};
use tornado_plan::dbc::{self, Mode, PhiOptions};
use tornado_plan::geojson;
use tornado_plan::geometry::{
    segment_cover_feasible, CoverOutcome, PathLength, Point2D, Rect,
};
use tornado_plan::milp::MilpError;
use tornado_plan::model::{
    latlon_to_miles, locations_from_csv, Instance, ModelError, Money, RetrofitPlan,
};
use tornado_plan::params::{self, FragilityConfig, RawBlock};

#[derive(Parser)]
#[command(name = "tornado-plan", version, about = "Worst-case tornado retrofit planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the full two-stage problem for an instance.
    Solve(SolveArgs),
    /// Evaluate the worst-case subproblem for a fixed retrofit plan.
    Subproblem(SubproblemArgs),
    /// Simulate random tornadoes against a fixed plan.
    Simulate(SimulateArgs),
    /// Solve across a list of budgets and report the value curve.
    Sweep(SweepArgs),
    /// Generate an instance from building blocks and a fragility config.
    Gen(GenArgs),
    /// Check whether a point set is coverable by one admissible segment.
    Geomcheck(GeomcheckArgs),
}

#[derive(Args)]
struct CommonSolver {
    /// Subproblem strategy: ORG, AVC, or DEC.
    #[arg(long, default_value = "DEC")]
    mode: String,
    /// External MILP solver command template with {in} and {out}
    /// placeholders; falls back to the SOLVER_CMD environment variable.
    #[arg(long)]
    solver_cmd: Option<String>,
}

impl CommonSolver {
    fn mode(&self) -> Result<Mode, CliError> {
        self.mode.parse().map_err(CliError::Config)
    }

    fn solver_cmd(&self) -> Option<String> {
        self.solver_cmd.clone().or_else(|| std::env::var("SOLVER_CMD").ok())
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Budget override in dollars.
    #[arg(long)]
    budget: Option<f64>,
    #[command(flatten)]
    solver: CommonSolver,
    /// Output directory for report.json, bounds.csv, and plan.geojson.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SubproblemArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Comma-separated strategy index per location (default: all zeros).
    #[arg(long)]
    strategies: Option<String>,
    #[command(flatten)]
    solver: CommonSolver,
    /// Output file for the subproblem result JSON (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional JSONL trace of branch-and-cut activity.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    strategies: Option<String>,
    /// Number of simulated tornadoes.
    #[arg(short = 'n', long, default_value_t = 100)]
    replications: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Path length sampling: fixed (always max) or uniform.
    #[arg(long, default_value = "fixed")]
    length_sampling: String,
    /// Output CSV file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Budget in dollars; repeat the flag for each point, ascending.
    #[arg(long, required = true)]
    budget: Vec<f64>,
    #[command(flatten)]
    solver: CommonSolver,
    /// Output CSV file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Building blocks CSV: id,x,y,population,area.
    #[arg(long)]
    blocks: PathBuf,
    /// Fragility configuration JSON.
    #[arg(long)]
    fragility: PathBuf,
    /// Number of clustered locations.
    #[arg(short, long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Budget in dollars.
    #[arg(long)]
    budget: f64,
    /// Tornado half-width in miles.
    #[arg(long)]
    delta: f64,
    /// Maximum path length in miles, or "inf".
    #[arg(long)]
    length: String,
    /// Treat block coordinates as latitude/longitude degrees.
    #[arg(long)]
    latlon: bool,
    /// Output instance JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GeomcheckArgs {
    /// Point as "x,y"; repeat the flag for each point.
    #[arg(long = "point", required = true)]
    points: Vec<String>,
    #[arg(long)]
    delta: f64,
    /// Maximum path length in miles, or "inf".
    #[arg(long)]
    length: String,
    /// Optional GeoJSON debug output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Infeasible(String),
    Bridge(String),
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            CliError::Infeasible(_) => ExitCode::from(3),
            CliError::Bridge(_) => ExitCode::from(4),
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Infeasible(m) | CliError::Bridge(m) => m,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> CliError {
        match e {
            ModelError::Invalid(_)
            | ModelError::OverBudget { .. }
            | ModelError::UnrealizableCoverage => CliError::Infeasible(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<ccg::CcgError> for CliError {
    fn from(e: ccg::CcgError) -> CliError {
        match e {
            ccg::CcgError::Model(m) => m.into(),
            ccg::CcgError::Milp(MilpError::Bridge(m)) => CliError::Bridge(m),
            ccg::CcgError::Milp(MilpError::Infeasible) => {
                CliError::Infeasible("master problem infeasible".into())
            }
            other => CliError::Config(other.to_string()),
        }
    }
}

fn parse_length(s: &str) -> Result<PathLength, CliError> {
    if s == "inf" {
        return Ok(PathLength::Infinite);
    }
    s.parse::<f64>()
        .ok()
        .filter(|e| e.is_finite() && *e >= 0.0)
        .map(PathLength::Finite)
        .ok_or_else(|| CliError::Config(format!("invalid length {s:?} (number or \"inf\")")))
}

fn load_instance(path: &Path) -> Result<Instance, CliError> {
    Instance::load(path).map_err(CliError::from)
}

fn parse_plan(instance: &Instance, spec: &Option<String>) -> Result<RetrofitPlan, CliError> {
    match spec {
        None => Ok(RetrofitPlan::do_nothing(instance)),
        Some(text) => {
            let s_of: Vec<usize> = text
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse()
                        .map_err(|_| CliError::Config(format!("invalid strategy index {t:?}")))
                })
                .collect::<Result<_, _>>()?;
            RetrofitPlan::new(s_of, instance).map_err(CliError::from)
        }
    }
}

fn write_or_print(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn cmd_solve(args: &SolveArgs) -> Result<(), CliError> {
    let mut instance = load_instance(&args.instance)?;
    if let Some(budget) = args.budget {
        instance.budget_cents = Money::from_dollars(budget);
    }
    let options = CcgOptions {
        phi: PhiOptions { mode: args.solver.mode()?, ..Default::default() },
        solver_cmd: args.solver.solver_cmd(),
        ..Default::default()
    };
    let report = ccg::solve(&instance, &options)?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", args.out.display())))?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(args.out.join("report.json"), json)
        .map_err(|e| CliError::Config(e.to_string()))?;
    std::fs::write(args.out.join("bounds.csv"), report.bound_trace_csv())
        .map_err(|e| CliError::Config(e.to_string()))?;
    let plan = RetrofitPlan::new(report.plan.clone(), &instance)?;
    let gj = geojson::plan_geojson(&instance, &plan, Some(&report.worst_scenario));
    std::fs::write(
        args.out.join("plan.geojson"),
        serde_json::to_string_pretty(&gj).expect("geojson serializes"),
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    println!(
        "v = {:.6} persons, plan = {:?}, {} iterations ({:.2}s)",
        report.v, report.plan, report.iterations, report.total_time_s
    );
    Ok(())
}

fn cmd_subproblem(args: &SubproblemArgs) -> Result<(), CliError> {
    let instance = load_instance(&args.instance)?;
    let plan = parse_plan(&instance, &args.strategies)?;
    let options = PhiOptions {
        mode: args.solver.mode()?,
        trace_path: args.trace.clone(),
        ..Default::default()
    };
    let result = dbc::solve_phi(&plan, &instance, &options).map_err(CliError::from)?;
    let json = serde_json::to_string_pretty(&result).expect("result serializes");
    write_or_print(&args.out, &format!("{json}\n"))?;
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let instance = load_instance(&args.instance)?;
    let plan = parse_plan(&instance, &args.strategies)?;
    let sampling = match args.length_sampling.as_str() {
        "fixed" => LengthSampling::Fixed,
        "uniform" => LengthSampling::Uniform,
        other => {
            return Err(CliError::Config(format!(
                "invalid length sampling {other:?} (fixed or uniform)"
            )))
        }
    };
    let summary = bench::simulate_random_tornadoes(
        &plan,
        &instance,
        args.replications,
        args.seed,
        sampling,
    )
    .map_err(CliError::from)?;
    let csv = format!(
        "{}\n{}\n",
        tornado_plan::bench::SimulationSummary::csv_header(),
        summary.csv_row()
    );
    write_or_print(&args.out, &csv)
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let instance = load_instance(&args.instance)?;
    let mut budgets: Vec<Money> = args.budget.iter().map(|&b| Money::from_dollars(b)).collect();
    if budgets.windows(2).any(|w| w[1] < w[0]) {
        return Err(CliError::Config("budgets must be ascending".into()));
    }
    budgets.sort();
    let options = CcgOptions {
        phi: PhiOptions { mode: args.solver.mode()?, ..Default::default() },
        solver_cmd: args.solver.solver_cmd(),
        ..Default::default()
    };
    let sweep = bench::budget_sweep(&instance, &budgets, &options)?;
    write_or_print(&args.out, &bench::sweep_csv(&sweep))
}

fn cmd_gen(args: &GenArgs) -> Result<(), CliError> {
    let blocks_text = std::fs::read_to_string(&args.blocks)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.blocks.display())))?;
    let mut raw = locations_from_csv(&blocks_text).map_err(CliError::from)?;
    if args.latlon {
        let planar = latlon_to_miles(
            &raw.iter().map(|l| (l.y, l.x)).collect::<Vec<_>>(), // (lat, lon)
        );
        for (loc, p) in raw.iter_mut().zip(planar) {
            loc.x = p.x;
            loc.y = p.y;
        }
    }
    let blocks: Vec<RawBlock> = raw
        .into_iter()
        .map(|l| RawBlock {
            id: l.id,
            x: l.x,
            y: l.y,
            population: l.population,
            area_m2: l.area_m2,
        })
        .collect();
    let cfg_text = std::fs::read_to_string(&args.fragility)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.fragility.display())))?;
    let cfg = FragilityConfig::from_json(&cfg_text)
        .map_err(|e| CliError::Config(format!("fragility config: {e}")))?;
    let length = parse_length(&args.length)?;
    let locations = params::cluster_blocks(&blocks, args.k, args.seed)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let instance = params::assemble_instance(
        locations,
        &cfg,
        Money::from_dollars(args.budget),
        args.delta,
        length,
        None,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    let findings = instance.validate();
    if !findings.is_empty() {
        return Err(CliError::Infeasible(format!("generated instance invalid: {findings:?}")));
    }
    std::fs::write(&args.out, instance.to_json())
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", args.out.display())))?;
    println!("wrote {} with {} locations", args.out.display(), instance.n_locations());
    Ok(())
}

fn cmd_geomcheck(args: &GeomcheckArgs) -> Result<(), CliError> {
    let mut centers = Vec::new();
    for spec in &args.points {
        let parts: Vec<&str> = spec.split(',').collect();
        let parsed = (parts.len() == 2)
            .then(|| Some((parts[0].trim().parse::<f64>().ok()?, parts[1].trim().parse::<f64>().ok()?)))
            .flatten();
        match parsed {
            Some((x, y)) => centers.push(Point2D::new(x, y)),
            None => return Err(CliError::Config(format!("invalid point {spec:?} (want x,y)"))),
        }
    }
    if !(args.delta > 0.0) {
        return Err(CliError::Config("delta must be positive".into()));
    }
    let length = parse_length(&args.length)?;
    // Rectangle: bounding box padded generously so endpoints are unrestricted.
    let pad = args.delta + 10.0;
    let rect = Rect::new(
        centers.iter().map(|p| p.x).fold(f64::INFINITY, f64::min) - pad,
        centers.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max) + pad,
        centers.iter().map(|p| p.y).fold(f64::INFINITY, f64::min) - pad,
        centers.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max) + pad,
    );
    let outcome = segment_cover_feasible(&centers, args.delta, length, &rect);
    let witness = match &outcome {
        CoverOutcome::Feasible(seg) => {
            println!(
                "feasible: segment ({:.6}, {:.6}) -> ({:.6}, {:.6}), length {:.6}",
                seg.e0.x, seg.e0.y, seg.e1.x, seg.e1.y, seg.length()
            );
            Some(*seg)
        }
        CoverOutcome::Infeasible => {
            println!("infeasible");
            None
        }
        CoverOutcome::Inconclusive => {
            println!("inconclusive (treated as infeasible)");
            None
        }
    };
    if let Some(out) = &args.out {
        let raw: Vec<(f64, f64)> = centers.iter().map(|p| (p.x, p.y)).collect();
        let gj = geojson::cover_query_geojson(&raw, args.delta, witness.as_ref());
        std::fs::write(out, serde_json::to_string_pretty(&gj).expect("geojson serializes"))
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", out.display())))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Subproblem(a) => cmd_subproblem(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Geomcheck(a) => cmd_geomcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
