//! `sebp`, the command-line front end for stochastic extensible bin packing:
//! instance generation, policy evaluation, bound reports, the guarantee
//! table, and the convergence experiments, with CSV/JSON output.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use sebp_core::bounds;
use sebp_core::distributions::{Family, FamilySpec};
use sebp_core::error::Error as CoreError;
use sebp_core::evaluation::{self, CostEstimate, EvalConfig, McPolicy};
use sebp_core::instances::{self, Instance, JobRecipe, RandomSpec};
use sebp_core::policies;

#[derive(Parser)]
#[command(
    name = "sebp",
    version,
    about = "Stochastic extensible bin packing: instances, policies, costs, bounds",
    after_help = "Environment: SEBP_THREADS caps the worker count (outputs are unaffected).\n\
                  Exit codes: 0 success, 2 invalid arguments, 3 computational cap exceeded, 4 numerical failure."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create and write instance files
    Instance {
        #[command(subcommand)]
        action: InstanceAction,
    },
    /// Evaluate a policy's expected cost on an instance
    Eval(EvalArgs),
    /// Lower/upper bound report for an instance
    Bounds(BoundsArgs),
    /// Per-family approximation-guarantee table (CSV)
    Table(TableArgs),
    /// Convergence experiments for the policy-class ratios
    Experiment(ExperimentArgs),
}

#[derive(Subcommand)]
enum InstanceAction {
    /// Generate a named instance family or a random instance
    Gen(GenArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Instance kind
    #[arg(long, value_enum)]
    kind: InstanceKind,
    /// Machine count (pons, pofa, random)
    #[arg(long)]
    m: Option<usize>,
    /// Rate parameter for pons (requires m >= lambda)
    #[arg(long)]
    lambda: Option<usize>,
    /// Jobs-per-machine parameter for pofa
    #[arg(long)]
    k: Option<usize>,
    /// Tail probability for ratio-f, in (0, 1]
    #[arg(long)]
    epsilon: Option<f64>,
    /// Nudge the ratio-f stochastic job so the greedy rule produces the
    /// worst-case assignment
    #[arg(long, default_value_t = false)]
    perturbed: bool,
    /// Job count (random)
    #[arg(long)]
    n: Option<usize>,
    /// Family for random jobs: lognormal, gamma, weibull, uniform,
    /// scaled-bernoulli, triangular
    #[arg(long)]
    family: Option<String>,
    /// Squared-cv bound for random family jobs
    #[arg(long)]
    delta: Option<f64>,
    /// Mode fraction for triangular family jobs
    #[arg(long)]
    alpha: Option<f64>,
    /// Finite-support recipe for random jobs: finite-short, finite-mixed
    #[arg(long)]
    recipe: Option<String>,
    /// Max support points per random finite job
    #[arg(long, default_value_t = 4)]
    points: usize,
    /// Log-uniform mean range for random family jobs
    #[arg(long, default_value_t = 0.2)]
    mean_min: f64,
    #[arg(long, default_value_t = 2.0)]
    mean_max: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output path (stdout when omitted)
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum InstanceKind {
    Pons,
    Pofa,
    RatioF,
    Random,
}

#[derive(Args)]
struct EvalArgs {
    /// Instance JSON path
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum)]
    policy: PolicyArg,
    #[arg(long, value_enum, default_value = "exact")]
    method: MethodArg,
    /// Monte Carlo sample count
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    /// Base seed; rerunning with the same seed reproduces the estimate
    /// bit-for-bit, and two policies share realizations under the same seed
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    caps: CapArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    LeptF,
    LeptP,
    Naive,
    OptF,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum MethodArg {
    Exact,
    Mc,
}

#[derive(Args)]
struct CapArgs {
    /// Largest materialized workload support in the exact engine
    #[arg(long, default_value_t = 10_000_000)]
    max_support: usize,
    /// Largest joint-support enumeration (lept-p exact, anticipative optimum)
    #[arg(long, default_value_t = 1_000_000)]
    max_scenarios: usize,
    /// Job cap for the exact optimal fixed assignment search
    #[arg(long, default_value_t = 12)]
    max_jobs_opt_f: usize,
    /// Job cap for the exact deterministic optimum
    #[arg(long, default_value_t = 20)]
    max_jobs_opt_det: usize,
}

impl CapArgs {
    fn config(&self) -> EvalConfig {
        EvalConfig {
            max_support: self.max_support,
            max_scenarios: self.max_scenarios,
            max_jobs_fixed_opt: self.max_jobs_opt_f,
            max_jobs_det_opt: self.max_jobs_opt_det,
        }
    }
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Monte Carlo samples for the fallback when exact evaluation is
    /// impossible (continuous jobs) or capped
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    caps: CapArgs,
}

#[derive(Args)]
struct TableArgs {
    /// Comma-separated squared-cv bounds; fractions like 1/8 are accepted
    #[arg(long, default_value = "0,1/8,1/6,1/4,1/3,1/2,1")]
    deltas: String,
    /// Comma-separated family rows (lognormal, gamma, weibull, uniform,
    /// scaled-bernoulli, triangular-0, triangular-1/4, ..., triangular-1)
    #[arg(long)]
    families: Option<String>,
    /// Output path (stdout when omitted)
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, value_enum)]
    name: ExperimentName,
    /// pons: fixed lambda
    #[arg(long, default_value_t = 4)]
    lambda: usize,
    /// pons/pofa: machine-count grid
    #[arg(long, default_value = "8,32,128,512,2048")]
    m_grid: String,
    /// pofa: jobs-per-machine grid
    #[arg(long, default_value = "2,10,50,200")]
    k_grid: String,
    /// ratio-f: epsilon grid
    #[arg(long, default_value = "0.5,0.1,0.01")]
    epsilon_grid: String,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    #[command(flatten)]
    caps: CapArgs,
    /// Output path (stdout when omitted)
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentName {
    Pons,
    Pofa,
    RatioF,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

enum CliError {
    Core(CoreError),
    Usage(String),
    Io(String),
    /// Cap or discreteness failure with a remediation hint; exits 3.
    CapHint(String),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => e.exit_code(),
            CliError::Usage(_) => 2,
            CliError::Io(_) => 2,
            CliError::CapHint(_) => 3,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            CliError::Usage(m) | CliError::Io(m) | CliError::CapHint(m) => m.clone(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("SEBP_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Instance { action: InstanceAction::Gen(args) } => cmd_instance_gen(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Bounds(args) => cmd_bounds(args),
        Command::Table(args) => cmd_table(args),
        Command::Experiment(args) => cmd_experiment(args),
    }
}

fn emit(out: &Option<PathBuf>, payload: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, payload)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{payload}");
            Ok(())
        }
    }
}

fn require_flag<T>(value: Option<T>, flag: &str, kind: &str) -> CliResult<T> {
    value.ok_or_else(|| CliError::Usage(format!("--{flag} is required for --kind {kind}")))
}

fn cmd_instance_gen(args: GenArgs) -> CliResult<()> {
    let instance = match args.kind {
        InstanceKind::Pons => {
            let lambda = require_flag(args.lambda, "lambda", "pons")?;
            let m = require_flag(args.m, "m", "pons")?;
            instances::gen_pons(lambda, m)?
        }
        InstanceKind::Pofa => {
            let k = require_flag(args.k, "k", "pofa")?;
            let m = require_flag(args.m, "m", "pofa")?;
            instances::gen_pofa(k, m)?
        }
        InstanceKind::RatioF => {
            let epsilon = require_flag(args.epsilon, "epsilon", "ratio-f")?;
            if args.perturbed {
                instances::gen_ratio_f_perturbed(epsilon)?
            } else {
                instances::gen_ratio_f(epsilon)?
            }
        }
        InstanceKind::Random => {
            let n = require_flag(args.n, "n", "random")?;
            let m = require_flag(args.m, "m", "random")?;
            let recipe = parse_recipe(&args)?;
            let mut spec = RandomSpec::new(n, m, recipe, args.seed);
            spec.mean_range = (args.mean_min, args.mean_max);
            instances::gen_random(&spec)?
        }
    };
    let json = serde_json::to_string(&instance)
        .map_err(|e| CliError::Io(format!("serialization failed: {e}")))?;
    emit(&args.out, &format!("{json}\n"))
}

fn parse_recipe(args: &GenArgs) -> CliResult<JobRecipe> {
    match (&args.family, &args.recipe) {
        (Some(family), None) => {
            let delta = require_flag(args.delta, "delta", "random --family")?;
            Ok(JobRecipe::Family(parse_family_spec(family, delta, args.alpha)?))
        }
        (None, Some(recipe)) => match recipe.as_str() {
            "finite-short" => Ok(JobRecipe::FiniteShort { max_points: args.points }),
            "finite-mixed" => Ok(JobRecipe::FiniteMixed { max_points: args.points }),
            other => Err(CliError::Usage(format!(
                "unknown recipe '{other}' (expected finite-short or finite-mixed)"
            ))),
        },
        _ => Err(CliError::Usage(
            "random instances need exactly one of --family or --recipe".into(),
        )),
    }
}

fn parse_family_spec(name: &str, delta: f64, alpha: Option<f64>) -> CliResult<FamilySpec> {
    let family = match name {
        "lognormal" => Family::Lognormal,
        "gamma" => Family::Gamma,
        "weibull" => Family::Weibull,
        "uniform" => Family::Uniform,
        "scaled-bernoulli" => Family::ScaledBernoulli,
        "triangular" => Family::Triangular { alpha: alpha.unwrap_or(0.5) },
        other => {
            return Err(CliError::Usage(format!(
                "unknown family '{other}' (expected lognormal, gamma, weibull, uniform, scaled-bernoulli, or triangular)"
            )))
        }
    };
    Ok(FamilySpec::new(family, delta)?)
}

fn load_instance(path: &PathBuf) -> CliResult<Instance> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid instance {}: {e}", path.display())))
}

fn cmd_eval(args: EvalArgs) -> CliResult<()> {
    let inst = load_instance(&args.instance)?;
    let cfg = args.caps.config();
    let estimate: CostEstimate = match (args.policy, args.method) {
        (PolicyArg::OptF, MethodArg::Exact) => {
            let (_, value) = policies::opt_fixed_exact(&inst, &cfg)?;
            CostEstimate::exact(value)
        }
        (PolicyArg::OptF, MethodArg::Mc) => {
            return Err(CliError::Usage(
                "opt-f is exact-only (the search certifies optimality); drop --method mc".into(),
            ))
        }
        (PolicyArg::LeptF, MethodArg::Exact) => {
            let asg = policies::lept_f(&inst);
            suggest_mc(evaluation::expected_cost_fixed(&inst, &asg, &cfg))?
        }
        (PolicyArg::Naive, MethodArg::Exact) => {
            let asg = policies::naive_assignment(&inst);
            suggest_mc(evaluation::expected_cost_fixed(&inst, &asg, &cfg))?
        }
        (PolicyArg::LeptP, MethodArg::Exact) => {
            suggest_mc(evaluation::expected_cost_lept_p_exact(&inst, &cfg))?
        }
        (PolicyArg::LeptF, MethodArg::Mc) => {
            let asg = policies::lept_f(&inst);
            evaluation::expected_cost_mc(&inst, McPolicy::Fixed(&asg), args.samples, args.seed)
        }
        (PolicyArg::Naive, MethodArg::Mc) => {
            evaluation::expected_cost_mc(&inst, McPolicy::Naive, args.samples, args.seed)
        }
        (PolicyArg::LeptP, MethodArg::Mc) => {
            evaluation::expected_cost_mc(&inst, McPolicy::LeptP, args.samples, args.seed)
        }
    };
    let json = serde_json::to_string(&estimate)
        .map_err(|e| CliError::Io(format!("serialization failed: {e}")))?;
    println!("{json}");
    Ok(())
}

fn suggest_mc(result: sebp_core::Result<CostEstimate>) -> CliResult<CostEstimate> {
    result.map_err(|e| match e {
        CoreError::NotDiscrete(_) => CliError::CapHint(format!("{e}; use --method mc")),
        CoreError::SupportCapExceeded { .. } => {
            CliError::CapHint(format!("{e}; use --method mc or raise --max-support"))
        }
        CoreError::ScenarioCapExceeded { .. } => {
            CliError::CapHint(format!("{e}; use --method mc or raise --max-scenarios"))
        }
        other => CliError::Core(other),
    })
}

fn cmd_bounds(args: BoundsArgs) -> CliResult<()> {
    let inst = load_instance(&args.instance)?;
    let report = bounds::bound_report_with_mc(&inst, &args.caps.config(), args.samples, args.seed)?;
    let json = serde_json::to_string(&report)
        .map_err(|e| CliError::Io(format!("serialization failed: {e}")))?;
    println!("{json}");
    Ok(())
}

fn parse_fraction(token: &str) -> CliResult<f64> {
    let token = token.trim();
    if let Some((num, den)) = token.split_once('/') {
        let n: f64 = num.trim().parse().map_err(|_| bad_number(token))?;
        let d: f64 = den.trim().parse().map_err(|_| bad_number(token))?;
        if d == 0.0 {
            return Err(bad_number(token));
        }
        Ok(n / d)
    } else {
        token.parse().map_err(|_| bad_number(token))
    }
}

fn bad_number(token: &str) -> CliError {
    CliError::Usage(format!("cannot parse number '{token}'"))
}

fn parse_grid<T: std::str::FromStr>(text: &str, what: &str) -> CliResult<Vec<T>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<T>()
                .map_err(|_| CliError::Usage(format!("cannot parse {what} entry '{t}'")))
        })
        .collect()
}

fn parse_family_label(label: &str) -> CliResult<Family> {
    match label {
        "lognormal" => Ok(Family::Lognormal),
        "gamma" => Ok(Family::Gamma),
        "weibull" => Ok(Family::Weibull),
        "uniform" => Ok(Family::Uniform),
        "scaled-bernoulli" => Ok(Family::ScaledBernoulli),
        other => {
            if let Some(alpha) = other.strip_prefix("triangular-") {
                Ok(Family::Triangular { alpha: parse_fraction(alpha)? })
            } else {
                Err(CliError::Usage(format!("unknown family row '{other}'")))
            }
        }
    }
}

fn cmd_table(args: TableArgs) -> CliResult<()> {
    let deltas: Vec<f64> = args
        .deltas
        .split(',')
        .map(parse_fraction)
        .collect::<CliResult<Vec<f64>>>()?;
    let families = match &args.families {
        Some(list) => list
            .split(',')
            .map(|s| parse_family_label(s.trim()))
            .collect::<CliResult<Vec<Family>>>()?,
        None => bounds::default_table_families(),
    };
    let table = bounds::guarantee_table(&families, &deltas)?;
    for warning in &table.warnings {
        eprintln!("warning: {warning}");
    }
    emit(&args.out, &table.to_csv())
}

fn cmd_experiment(args: ExperimentArgs) -> CliResult<()> {
    let started = Instant::now();
    let cfg = args.caps.config();
    let (id, header, grid_meta, points) = match args.name {
        ExperimentName::Pons => {
            let ms: Vec<u64> = parse_grid(&args.m_grid, "m-grid")?;
            let lambda = args.lambda as u64;
            let mut rows = Vec::new();
            for &m in &ms {
                let f = bounds::pons_closed_forms(lambda, m)?;
                rows.push(vec![lambda as f64, m as f64, f.opt_p, f.opt_r, f.ratio, f.limit_ratio]);
            }
            ("pons", "lambda,m,opt_p,opt_r,ratio,limit_ratio", json!({ "lambda": lambda, "m_grid": ms }), rows)
        }
        ExperimentName::Pofa => {
            let ks: Vec<u64> = parse_grid(&args.k_grid, "k-grid")?;
            let ms: Vec<u64> = parse_grid(&args.m_grid, "m-grid")?;
            let mut rows = Vec::new();
            for &m in &ms {
                for &k in &ks {
                    let f = bounds::pofa_closed_forms(k, m)?;
                    rows.push(vec![k as f64, m as f64, f.opt_f, f.opt_p, f.ratio, f.limit_ratio]);
                }
            }
            ("pofa", "k,m,opt_f,opt_p,ratio,limit_ratio", json!({ "k_grid": ks, "m_grid": ms }), rows)
        }
        ExperimentName::RatioF => {
            let eps: Vec<f64> = args
                .epsilon_grid
                .split(',')
                .map(parse_fraction)
                .collect::<CliResult<Vec<f64>>>()?;
            let mut rows = Vec::new();
            for &e in &eps {
                let perturbed = instances::gen_ratio_f_perturbed(e)?;
                let asg = policies::lept_f(&perturbed);
                let lept = evaluation::expected_cost_fixed(&perturbed, &asg, &cfg)?.value;
                let exact = instances::gen_ratio_f(e)?;
                let (_, opt_f) = policies::opt_fixed_exact(&exact, &cfg)?;
                rows.push(vec![e, lept, opt_f, lept / opt_f, (4.0 - e) / 3.0]);
            }
            ("ratio-f", "epsilon,lept_f,opt_f,ratio,theory", json!({ "epsilon_grid": eps }), rows)
        }
    };

    match args.format {
        FormatArg::Csv => {
            let mut out = String::new();
            writeln!(out, "{header}").unwrap();
            for row in &points {
                let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
                writeln!(out, "{}", line.join(",")).unwrap();
            }
            emit(&args.out, &out)
        }
        FormatArg::Json => {
            let columns: Vec<&str> = header.split(',').collect();
            let payload = json!({
                "experiment": id,
                "grid": grid_meta,
                "columns": columns,
                "points": points,
                "metadata": {
                    "caps": {
                        "max_support": cfg.max_support,
                        "max_scenarios": cfg.max_scenarios,
                        "max_jobs_opt_f": cfg.max_jobs_fixed_opt,
                        "max_jobs_opt_det": cfg.max_jobs_det_opt,
                    },
                    "seed": serde_json::Value::Null,
                    "samples": serde_json::Value::Null,
                    "wall_ms": started.elapsed().as_millis() as u64,
                },
            });
            emit(&args.out, &format!("{payload}\n"))
        }
    }
}
