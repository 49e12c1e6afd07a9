mod report;

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use rankplan::apps::{
    AppParams, CaopExponomialParams, CaopKappaParams, CaopMmnlParams, CaopProbitParams, FlopParams, MsmflpParams,
};
use rankplan::benders::{Stage1Config, StabilizerConfig};
use rankplan::io::{load_instance, save_instance, RunManifest};
use rankplan::{cooperative_fraction, estimate_gap, replicate_solve, solve, Error, Method, Scheme, Solution, SolveConfig, SolveRecord};

const EXIT_USAGE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_CAPACITY: u8 = 4;

/// Sample-average planning under rank-list choice.
#[derive(Parser, Debug)]
#[command(name = "rankplan", version)]
struct Cli {
    /// Base seed for anything not seeded explicitly.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for parallel replications and separation.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Primary output file.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    /// Also write a run manifest here.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate an instance file.
    Generate(GenerateArgs),
    /// Solve an instance file and write one results row.
    Solve(SolveArgs),
    /// Estimate the optimality gap of sample-average solutions.
    Validate(ValidateArgs),
    /// Summarize result CSVs by group.
    Report(report::ReportArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Application parameters as JSON (or a run manifest holding them).
    #[arg(long)]
    params: Option<PathBuf>,
    /// Store scenario matrices as packed base64 blocks.
    #[arg(long, global = true)]
    packed: bool,
    #[command(subcommand)]
    app: Option<App>,
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    /// Number of scenarios N.
    #[arg(long = "n-scen")]
    n_scen: usize,
    /// Instance seed.
    #[arg(long)]
    s1: Option<u64>,
    /// Scenario seed.
    #[arg(long)]
    s2: Option<u64>,
    /// Sampling scheme: lhs or mcs.
    #[arg(long, default_value = "lhs")]
    sampling: Scheme,
}

#[derive(Subcommand, Debug)]
enum App {
    /// Assortment under exponomial choice.
    CaopExponomial {
        /// Number of products.
        #[arg(long = "n")]
        n: usize,
        #[arg(long, default_value_t = 0.3)]
        gamma: f64,
        #[arg(long = "sigma-r", default_value_t = 0.2)]
        sigma_r: f64,
        #[arg(long = "sigma-u", default_value_t = 1.0)]
        sigma_u: f64,
        #[arg(long, default_value_t = 1.0)]
        zeta: f64,
        #[command(flatten)]
        scen: ScenarioArgs,
    },
    /// Assortment under mixed logit.
    CaopMmnl {
        #[arg(long = "n")]
        n: usize,
        #[arg(long)]
        tau: usize,
        #[arg(long = "r-bar", default_value_t = 10.0)]
        r_bar: f64,
        #[arg(long, default_value_t = 2.0)]
        d: f64,
        #[command(flatten)]
        scen: ScenarioArgs,
    },
    /// Assortment under probit choice.
    CaopProbit {
        #[arg(long = "n-prod", alias = "n")]
        n_prod: usize,
        #[arg(long)]
        tau: usize,
        #[arg(long = "var", alias = "variance", default_value_t = 100.0)]
        var: f64,
        #[command(flatten)]
        scen: ScenarioArgs,
    },
    /// Assortment with reward-utility correlation κ.
    CaopKappa {
        /// Products plus the outside option.
        #[arg(long = "n")]
        n: usize,
        #[arg(long)]
        tau: usize,
        #[arg(long, allow_hyphen_values = true)]
        kappa: f64,
        #[command(flatten)]
        scen: ScenarioArgs,
    },
    /// Facility location with discrete prices.
    Flop {
        /// Number of facilities.
        #[arg(long = "n")]
        n: usize,
        #[arg(long, default_value_t = 10)]
        levels: usize,
        #[arg(long)]
        tau: usize,
        #[arg(long, default_value_t = 10.0)]
        budget: f64,
        #[command(flatten)]
        scen: ScenarioArgs,
    },
    /// Market-share facility location.
    Msmflp {
        #[arg(long = "n")]
        n: usize,
        #[arg(long)]
        tau: usize,
        #[arg(long, default_value_t = 10.0)]
        outside: f64,
        #[command(flatten)]
        scen: ScenarioArgs,
    },
}

impl App {
    fn params(&self, seed: u64) -> AppParams {
        let seeds = |s: &ScenarioArgs| (s.s1.unwrap_or(seed), s.s2.unwrap_or(seed), s.n_scen, s.sampling);
        match self {
            App::CaopExponomial { n, gamma, sigma_r, sigma_u, zeta, scen } => {
                let (instance_seed, scenario_seed, n_scenarios, scheme) = seeds(scen);
                AppParams::CaopExponomial(CaopExponomialParams {
                    n_products: *n,
                    gamma: *gamma,
                    sigma_r: *sigma_r,
                    sigma_u: *sigma_u,
                    zeta: *zeta,
                    instance_seed,
                    scenario_seed,
                    n_scenarios,
                    scheme,
                })
            }
            App::CaopMmnl { n, tau, r_bar, d, scen } => {
                let (instance_seed, scenario_seed, n_scenarios, scheme) = seeds(scen);
                AppParams::CaopMmnl(CaopMmnlParams {
                    n_products: *n,
                    tau: *tau,
                    r_bar: *r_bar,
                    d: *d,
                    instance_seed,
                    scenario_seed,
                    n_scenarios,
                    scheme,
                })
            }
            App::CaopProbit { n_prod, tau, var, scen } => {
                let (instance_seed, scenario_seed, n_scenarios, scheme) = seeds(scen);
                AppParams::CaopProbit(CaopProbitParams {
                    n_products: *n_prod,
                    tau: *tau,
                    variance: *var,
                    instance_seed,
                    scenario_seed,
                    n_scenarios,
                    scheme,
                })
            }
            App::CaopKappa { n, tau, kappa, scen } => {
                let (instance_seed, scenario_seed, n_scenarios, scheme) = seeds(scen);
                AppParams::CaopKappa(CaopKappaParams {
                    n_options: *n,
                    tau: *tau,
                    kappa: *kappa,
                    instance_seed,
                    scenario_seed,
                    n_scenarios,
                    scheme,
                })
            }
            App::Flop { n, levels, tau, budget, scen } => {
                let (instance_seed, scenario_seed, n_scenarios, scheme) = seeds(scen);
                AppParams::Flop(FlopParams {
                    n_facilities: *n,
                    n_levels: *levels,
                    tau: *tau,
                    budget: *budget,
                    instance_seed,
                    scenario_seed,
                    n_scenarios,
                    scheme,
                })
            }
            App::Msmflp { n, tau, outside, scen } => {
                let (instance_seed, scenario_seed, n_scenarios, scheme) = seeds(scen);
                AppParams::Msmflp(MsmflpParams {
                    n_facilities: *n,
                    tau: *tau,
                    outside: *outside,
                    instance_seed,
                    scenario_seed,
                    n_scenarios,
                    scheme,
                })
            }
        }
    }
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// sbbd, extensive or enum.
    #[arg(long, default_value = "sbbd")]
    method: Method,
    /// Wall-clock limit in seconds.
    #[arg(long = "time-limit")]
    time_limit: Option<f64>,
    /// Minimum relative violation for adding a cut.
    #[arg(long)]
    mrv: Option<f64>,
    /// Heuristic separation period in nodes.
    #[arg(long = "heuristic-period")]
    heuristic_period: Option<usize>,
    /// Force stage-one stabilization on or off.
    #[arg(long)]
    stabilize: Option<bool>,
    /// Solver configuration as JSON (or a run manifest holding one).
    #[arg(long)]
    config: Option<PathBuf>,
}

impl SolverArgs {
    fn config(&self, params: Option<&AppParams>, seed: u64) -> anyhow::Result<SolveConfig> {
        let mut cfg = match &self.config {
            Some(path) => read_config(path)?,
            None => params.map(SolveConfig::for_params).unwrap_or_default(),
        };
        cfg.method = self.method;
        cfg.seed = seed;
        if let Some(t) = self.time_limit {
            cfg.time_limit_s = t;
        }
        if let Some(m) = self.mrv {
            cfg.mrv = m;
        }
        if let Some(p) = self.heuristic_period {
            cfg.heuristic_period = p;
        }
        if let Some(on) = self.stabilize {
            let mut s1 = cfg.stage1.take().unwrap_or(Stage1Config { rho: 1e-2, ..Stage1Config::default() });
            s1.stabilizer = if on { StabilizerConfig::on() } else { StabilizerConfig::default() };
            cfg.stage1 = Some(s1);
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Instance file.
    instance: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    /// Append the row to an existing CSV instead of rewriting it.
    #[arg(long)]
    append: bool,
    /// Where to write the solution vector and statistics as JSON.
    #[arg(long)]
    solution: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Number of replications M.
    #[arg(long = "m", global = true)]
    m: Option<usize>,
    /// Confidence level of the one-sided gap bound.
    #[arg(long, global = true, default_value_t = 0.95)]
    alpha: f64,
    /// Evaluation sample size N′.
    #[arg(long = "n-prime", global = true, default_value_t = 1_000_000)]
    n_prime: usize,
    #[arg(long, global = true, default_value = "sbbd")]
    method: Method,
    #[arg(long = "time-limit", global = true)]
    time_limit: Option<f64>,
    /// Also write the one-row CSV here.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Application parameters as JSON (or a run manifest holding them).
    #[arg(long)]
    params: Option<PathBuf>,
    #[command(subcommand)]
    app: Option<App>,
}

#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let result = match &cli.command {
        Command::Generate(args) => cmd_generate(&cli, args),
        Command::Solve(args) => cmd_solve(&cli, args),
        Command::Validate(args) => cmd_validate(&cli, args),
        Command::Report(args) => report::run(args, cli.output.as_deref()).map_err(|e| usage(e.to_string())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<Usage>().is_some() {
        return EXIT_USAGE;
    }
    match e.downcast_ref::<Error>() {
        Some(Error::InfeasibleSpace | Error::InfeasibleDecision(_) | Error::EmptyOfferSet { .. }) => EXIT_INFEASIBLE,
        Some(Error::SizeCap { .. } | Error::EnumerationCap { .. }) => EXIT_CAPACITY,
        Some(
            Error::InvalidParams(_)
            | Error::InvalidDistribution(_)
            | Error::InvalidInstance(_)
            | Error::ProbabilityOutOfRange(_)
            | Error::UnknownApp(_)
            | Error::Json(_),
        ) => EXIT_USAGE,
        _ => 1,
    }
}

/// Reads either the bare value or the matching field of a run manifest.
fn read_json_or_manifest<T: serde::de::DeserializeOwned>(path: &Path, pick: impl FnOnce(RunManifest) -> Option<T>) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(v) = serde_json::from_str::<T>(&text) {
        return Ok(v);
    }
    let manifest: RunManifest = serde_json::from_str(&text)
        .map_err(|e| usage(format!("{}: neither the expected JSON nor a run manifest ({e})", path.display())))?;
    pick(manifest).ok_or_else(|| usage(format!("{}: manifest lacks the needed section", path.display())))
}

fn read_params(path: &Path) -> anyhow::Result<AppParams> {
    read_json_or_manifest(path, |m| m.params)
}

fn read_config(path: &Path) -> anyhow::Result<SolveConfig> {
    read_json_or_manifest(path, |m| Some(m.solver))
}

fn pick_params(params: &Option<PathBuf>, app: &Option<App>, seed: u64) -> anyhow::Result<AppParams> {
    match (params, app) {
        (Some(path), _) => read_params(path),
        (None, Some(app)) => Ok(app.params(seed)),
        (None, None) => Err(usage("name an application or pass --params")),
    }
}

fn write_manifest(cli: &Cli, manifest: RunManifest) -> anyhow::Result<()> {
    if let Some(path) = &cli.manifest {
        manifest.save(path).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn argv() -> serde_json::Value {
    serde_json::json!({ "argv": std::env::args().collect::<Vec<_>>() })
}

fn cmd_generate(cli: &Cli, args: &GenerateArgs) -> anyhow::Result<()> {
    let params = pick_params(&args.params, &args.app, cli.seed)?;
    let out = cli.output.as_ref().ok_or_else(|| usage("generate needs --output"))?;
    let inst = params.generate()?;
    save_instance(out, &inst, args.packed).with_context(|| format!("writing {}", out.display()))?;
    write_manifest(
        cli,
        RunManifest {
            experiment: format!("generate-{}", params.name()),
            params: Some(params.clone()),
            instance: Some(out.display().to_string()),
            solver: SolveConfig::for_params(&params),
            outputs: vec![out.display().to_string()],
            seeds: vec![params.instance_seed(), params.scenario_seed()],
            extra: argv(),
        },
    )?;
    println!("{}", out.display());
    Ok(())
}

#[derive(Serialize)]
struct SolutionFile<'a> {
    instance: &'a str,
    method: Method,
    x: String,
    offered: Vec<usize>,
    objective: f64,
    bound: f64,
    status: rankplan::SolveStatus,
    cooperative_fraction: f64,
    stats: &'a rankplan::SolveStats,
}

fn instance_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

fn cmd_solve(cli: &Cli, args: &SolveArgs) -> anyhow::Result<()> {
    let inst = load_instance(&args.instance).map_err(|e| match e {
        Error::Io(io) => anyhow::Error::new(io).context(format!("reading {}", args.instance.display())),
        other => other.into(),
    })?;
    let params: Option<AppParams> = serde_json::from_value(inst.provenance().params.clone()).ok();
    let cfg = args.solver.config(params.as_ref(), cli.seed)?;
    let sol = solve(&inst, &cfg)?;
    let id = instance_id(&args.instance);
    let record = SolveRecord::new(&id, cfg.method, &sol);
    write_record(cli.output.as_deref(), args.append, &record)?;
    if let Some(path) = &args.solution {
        write_solution(path, &id, cfg.method, &sol, cooperative_fraction(&sol.x, &inst)?)?;
    }
    let mut outputs: Vec<String> = cli.output.iter().chain(&args.solution).map(|p| p.display().to_string()).collect();
    outputs.dedup();
    write_manifest(
        cli,
        RunManifest {
            experiment: format!("solve-{id}"),
            params,
            instance: Some(args.instance.display().to_string()),
            solver: cfg,
            outputs,
            seeds: vec![cli.seed],
            extra: argv(),
        },
    )
}

fn write_record(out: Option<&Path>, append: bool, record: &SolveRecord) -> anyhow::Result<()> {
    match out {
        None => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            w.serialize(record)?;
            w.flush()?;
        }
        Some(path) => {
            let has_rows = append && path.metadata().map(|m| m.len() > 0).unwrap_or(false);
            let file = OpenOptions::new()
                .create(true)
                .write(true)
                .append(append)
                .truncate(!append)
                .open(path)
                .with_context(|| format!("opening {}", path.display()))?;
            let mut w = csv::WriterBuilder::new().has_headers(!has_rows).from_writer(file);
            w.serialize(record)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn write_solution(path: &Path, id: &str, method: Method, sol: &Solution, gamma: f64) -> anyhow::Result<()> {
    let file = SolutionFile {
        instance: id,
        method,
        x: sol.x.to_string(),
        offered: sol.x.offered().collect(),
        objective: sol.objective,
        bound: sol.bound,
        status: sol.status,
        cooperative_fraction: gamma,
        stats: &sol.stats,
    };
    let mut f = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
    writeln!(f, "{}", serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

fn cmd_validate(cli: &Cli, args: &ValidateArgs) -> anyhow::Result<()> {
    let params = pick_params(&args.params, &args.app, cli.seed)?;
    let m = args.m.ok_or_else(|| usage("validate needs --m"))?;
    if m < 2 {
        bail!(usage("variance estimation needs --m of at least 2"));
    }
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        bail!(usage(format!("--alpha must lie in (0, 1), got {}", args.alpha)));
    }
    let mut cfg = SolveConfig { method: args.method, seed: cli.seed, ..SolveConfig::for_params(&params) };
    if let Some(t) = args.time_limit {
        cfg.time_limit_s = t;
    }
    let n = params.n_scenarios();
    let base = params.scenario_seed();
    let eval_seed = base ^ 0x9e37_79b9_7f4a_7c15;
    let reps = replicate_solve(&params, n, m, base, &cfg)?;
    let report = estimate_gap(&reps, &params, args.n_prime, args.alpha, eval_seed)?;
    let json = serde_json::to_string_pretty(&serde_json::json!({ "report": report, "replications": reps }))?;
    match &cli.output {
        Some(path) => fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?,
        None => println!("{json}"),
    }
    if let Some(path) = &args.csv {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        w.serialize(report.row())?;
        w.flush()?;
    }
    write_manifest(
        cli,
        RunManifest {
            experiment: format!("validate-{}", params.name()),
            params: Some(params.clone()),
            instance: None,
            solver: cfg,
            outputs: cli.output.iter().chain(&args.csv).map(|p| p.display().to_string()).collect(),
            seeds: (1..=m as u64).map(|k| base.wrapping_add(k)).collect(),
            extra: serde_json::json!({ "argv": std::env::args().collect::<Vec<_>>(), "n_prime": args.n_prime, "alpha": args.alpha, "eval_seed": eval_seed }),
        },
    )
}
