use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use condwalk::asymptotics::{predict, Ingredients, TheoremId};
use condwalk::harmonic::{self, build_harmonic_table, default_grid, EstimationMethod, HarmonicTable, TableParams};
use condwalk::harness::{self, Cache, ExperimentConfig, HarnessError, ReportFormat};
use condwalk::increments::{cramer_tilt, IncrementLaw, StepLaw};
use condwalk::oracle;
use condwalk::special_fns::{self as sf, KernelSpec};
use condwalk::target_fns::TargetFunction;
use condwalk::walk_sim::{mc_estimate, mc_tilted_survival, Statistic};

#[derive(Parser)]
#[command(name = "condwalk", version, about = "Random walks conditioned to stay non-negative")]
struct Cli {
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true, env = "CONDWALK_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo estimate of a path statistic.
    Simulate(SimulateArgs),
    /// Evaluate an asymptotic predictor from ingredients.
    Predict {
        #[arg(long)]
        theorem: String,
        /// JSON object, or `@path` to read it from a file.
        #[arg(long)]
        ingredients: String,
    },
    /// Harmonic functions and the exit-time constant.
    #[command(subcommand)]
    Harmonic(HarmonicCmd),
    /// Exact computations.
    #[command(subcommand)]
    Oracle(OracleCmd),
    /// Special functions.
    #[command(subcommand)]
    Special(SpecialCmd),
    /// Run an experiment config.
    Run(RunArgs),
    /// Run an experiment over several n and report the trend.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated values of n overriding the config.
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<u64>>,
    },
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    law: String,
    #[arg(long, default_value_t = 0.0)]
    x: f64,
    #[arg(long)]
    n: u64,
    /// Statistic, e.g. `survival`, `exit_at_n`, `interval:20,1`, `dual:survival`.
    #[arg(long, default_value = "survival")]
    stat: String,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Sample under the Cramer tilt and reweight.
    #[arg(long)]
    tilted: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Ladder,
    Killed,
}

#[derive(Args, Clone)]
struct TableArgs {
    #[arg(long)]
    law: String,
    /// Comma-separated grid; the default grid when omitted.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "ladder")]
    method: Method,
    #[arg(long, default_value_t = 1_000_000)]
    cap: u64,
    /// Horizon of the killed estimator.
    #[arg(long, default_value_t = 10_000)]
    n: u64,
    #[arg(long, default_value_t = 20_000)]
    samples: u64,
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
    /// Estimate under the Cramer tilt of `law`.
    #[arg(long)]
    tilted: bool,
}

#[derive(Subcommand)]
enum HarmonicCmd {
    /// Table of V (or V* with --dual) as CSV: x,v_mean,v_stderr,count.
    Build {
        #[command(flatten)]
        table: TableArgs,
        #[arg(long)]
        dual: bool,
    },
    /// kappa (kappa_lambda with --tilted) from both integral forms, as JSON.
    Kappa {
        #[command(flatten)]
        table: TableArgs,
        #[arg(long, default_value_t = 1e-9)]
        quad_tol: f64,
    },
}

#[derive(Subcommand)]
enum OracleCmd {
    /// Law of x+S_n on survival, by dynamic programming.
    Joint {
        #[arg(long)]
        law: String,
        #[arg(long, default_value_t = 0.0)]
        x: f64,
        #[arg(long)]
        n: u32,
    },
    /// P(tau_0 > n) and P(tau_0 = n) for symmetric continuous laws.
    Sparre {
        #[arg(long)]
        n: u64,
    },
    /// Both sides of the duality identity.
    Duality {
        #[arg(long)]
        law: String,
        #[arg(long)]
        h: String,
        #[arg(long)]
        g: String,
        #[arg(long)]
        n: u32,
    },
    /// E(x+S_n; tau_x > n).
    Moment {
        #[arg(long)]
        law: String,
        #[arg(long, default_value_t = 0.0)]
        x: f64,
        #[arg(long)]
        n: u32,
    },
}

#[derive(Subcommand)]
enum SpecialCmd {
    /// Evaluate a special function: normal_cdf x | normal_pdf x | rayleigh s |
    /// rayleigh_cdf t | levy_psi s x [v] | psi_normalizer x | normalized_psi s x |
    /// brownian_exit x sigma n a b | kernel eps u | kernel_fourier eps t |
    /// fuk_nagaev u v n (with --law).
    Eval {
        name: String,
        #[arg(allow_negative_numbers = true)]
        args: Vec<f64>,
        #[arg(long)]
        law: Option<String>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "csv")]
    format: String,
    /// Report file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Runtime(String),
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        if e.is_config_error() {
            CliError::Config(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

fn config<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Config(e.to_string())
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Write to stdout; a closed pipe ends the process quietly.
fn write_stdout(args: std::fmt::Arguments, newline: bool) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let res = out.write_fmt(args).and_then(|_| if newline { out.write_all(b"\n") } else { Ok(()) });
    if let Err(e) = res {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: {e}");
        std::process::exit(3);
    }
}

macro_rules! out {
    ($($t:tt)*) => { write_stdout(format_args!($($t)*), false) };
}

macro_rules! outln {
    ($($t:tt)*) => { write_stdout(format_args!($($t)*), true) };
}

fn print_json<T: Serialize>(v: &T) -> Result<(), CliError> {
    outln!("{}", serde_json::to_string_pretty(v).map_err(runtime)?);
    Ok(())
}

fn parse_law(s: &str) -> Result<IncrementLaw, CliError> {
    s.parse().map_err(config)
}

fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let law = parse_law(&a.law)?;
    let stat: Statistic = a.stat.parse().map_err(config)?;
    let est = if a.tilted {
        let tilt = cramer_tilt(&law).map_err(config)?;
        mc_tilted_survival(&law, &tilt, a.x, a.n, &stat, a.samples, a.seed)
    } else {
        mc_estimate(&law, a.x, a.n, &stat, a.samples, a.seed)
    }
    .map_err(config)?;
    print_json(&est)
}

fn table(a: &TableArgs, dual: bool) -> Result<(IncrementLaw, Option<condwalk::TiltedLaw>, HarmonicTable), CliError> {
    let law = parse_law(&a.law)?;
    let tilt = if a.tilted { Some(cramer_tilt(&law).map_err(config)?) } else { None };
    let sigma = tilt.as_ref().map_or_else(|| law.sigma(), |t| t.tilted_variance.sqrt());
    let grid = a.grid.clone().unwrap_or_else(|| default_grid(sigma));
    let params = TableParams {
        method: match a.method {
            Method::Ladder => EstimationMethod::Ladder { cap: a.cap },
            Method::Killed => EstimationMethod::Killed { n: a.n },
        },
        samples: a.samples,
        seed: a.seed,
    };
    let t = build_harmonic_table(&law, &grid, &params, dual, tilt.as_ref()).map_err(runtime)?;
    Ok((law, tilt, t))
}

fn harmonic_cmd(c: &HarmonicCmd) -> Result<(), CliError> {
    match c {
        HarmonicCmd::Build { table: a, dual } => {
            let (_, _, t) = table(a, *dual)?;
            outln!("x,v_mean,v_stderr,count");
            for (x, v) in t.grid.iter().zip(&t.values) {
                outln!("{x},{},{},{}", v.mean, v.stderr, v.count);
            }
            for issue in t.invariant_violations() {
                eprintln!("warning: {issue}");
            }
            for (x, r) in t.grid.iter().zip(&t.censoring) {
                if *r > harmonic::CENSORING_LIMIT {
                    eprintln!("warning: censoring rate {r:.2e} at x = {x}");
                }
            }
            Ok(())
        }
        HarmonicCmd::Kappa { table: a, quad_tol } => {
            let mut a2 = a.clone();
            if a2.grid.is_none() {
                let law = parse_law(&a.law)?;
                let sigma = if a.tilted {
                    cramer_tilt(&law).map_err(config)?.tilted_variance.sqrt()
                } else {
                    law.sigma()
                };
                a2.grid = Some(harness::kappa_grid(sigma));
            }
            let (law, tilt, t) = table(&a2, true)?;
            let k = harmonic::kappa_constant(&law, &t, tilt.as_ref(), *quad_tol).map_err(runtime)?;
            print_json(&k)
        }
    }
}

fn oracle_cmd(c: &OracleCmd) -> Result<(), CliError> {
    match c {
        OracleCmd::Joint { law, x, n } => print_json(&oracle::exact_joint_law(&parse_law(law)?, *x, *n).map_err(runtime)?),
        OracleCmd::Sparre { n } => print_json(&serde_json::json!({
            "n": n,
            "survival": oracle::sparre_andersen_survival(*n),
            "exit_at": oracle::sparre_andersen_exit_at(*n),
        })),
        OracleCmd::Duality { law, h, g, n } => {
            let h: TargetFunction = h.parse().map_err(config)?;
            let g: TargetFunction = g.parse().map_err(config)?;
            let (lhs, rhs) = oracle::verify_duality(&parse_law(law)?, &h, &g, *n).map_err(runtime)?;
            print_json(&serde_json::json!({ "lhs": lhs, "rhs": rhs, "gap": (lhs - rhs).abs() }))
        }
        OracleCmd::Moment { law, x, n } => {
            let m = oracle::exact_killed_moment(&parse_law(law)?, *x, *n).map_err(runtime)?;
            print_json(&serde_json::json!({ "moment": m }))
        }
    }
}

fn special_cmd(c: &SpecialCmd) -> Result<(), CliError> {
    let SpecialCmd::Eval { name, args, law } = c;
    let arity = |k: usize| -> Result<(), CliError> {
        if args.len() == k {
            Ok(())
        } else {
            Err(CliError::Config(format!("{name} takes {k} arguments, got {}", args.len())))
        }
    };
    let value = match name.as_str() {
        "normal_cdf" => {
            arity(1)?;
            sf::normal_cdf(args[0])
        }
        "normal_pdf" => {
            arity(1)?;
            sf::normal_pdf(args[0])
        }
        "rayleigh" => {
            arity(1)?;
            sf::rayleigh(args[0]).0
        }
        "rayleigh_cdf" => {
            arity(1)?;
            sf::rayleigh_cdf(args[0])
        }
        "levy_psi" => {
            if args.len() == 2 {
                sf::levy_psi(args[0], args[1], 1.0)
            } else {
                arity(3)?;
                sf::levy_psi(args[0], args[1], args[2])
            }
        }
        "psi_normalizer" => {
            arity(1)?;
            sf::psi_normalizer(args[0]).map_err(config)?
        }
        "normalized_psi" => {
            arity(2)?;
            sf::normalized_psi(args[0], args[1]).map_err(config)?
        }
        "brownian_exit" => {
            arity(5)?;
            sf::brownian_exit(args[0], args[1], args[2], args[3], args[4]).map_err(config)?
        }
        "kernel" => {
            arity(2)?;
            sf::smoothing_kernel(KernelSpec::new(args[0]).map_err(config)?, args[1])
        }
        "kernel_fourier" => {
            arity(2)?;
            sf::kernel_fourier(KernelSpec::new(args[0]).map_err(config)?, args[1]).map_err(runtime)?
        }
        "fuk_nagaev" => {
            arity(3)?;
            let law = parse_law(law.as_deref().ok_or_else(|| CliError::Config("fuk_nagaev needs --law".into()))?)?;
            if !(args[2] >= 1.0 && args[2].fract() == 0.0) {
                return Err(CliError::Config("n must be a positive integer".into()));
            }
            sf::fuk_nagaev_bound(args[0], args[1], args[2] as u64, &law).map_err(config)?
        }
        other => return Err(CliError::Config(format!("unknown special function `{other}`"))),
    };
    outln!("{value:.17e}");
    Ok(())
}

fn write_report(rows: &[harness::ReportRow], a: &RunArgs) -> Result<(), CliError> {
    let format: ReportFormat = a.format.parse()?;
    match &a.out {
        Some(p) => harness::emit_report(rows, format, p)?,
        None => out!("{}", harness::render_report(rows, format)?),
    }
    Ok(())
}

fn band_summary(cfg: &ExperimentConfig, rows: &[harness::ReportRow]) -> bool {
    let ok = harness::passes_band(cfg, rows);
    if let Some([lo, hi]) = cfg.band {
        for r in rows {
            let verdict = if r.in_band([lo, hi]) { "pass" } else { "FAIL" };
            eprintln!("{} n={} ratio={:.5} band=[{lo}, {hi}] {verdict}", cfg.name, r.n, r.ratio);
        }
    }
    ok
}

fn run(c: &Command) -> Result<bool, CliError> {
    match c {
        Command::Simulate(a) => simulate(a).map(|_| true),
        Command::Predict { theorem, ingredients } => {
            let id: TheoremId = theorem.parse().map_err(config)?;
            let text = match ingredients.strip_prefix('@') {
                Some(path) => std::fs::read_to_string(path).map_err(config)?,
                None => ingredients.clone(),
            };
            let ing: Ingredients = serde_json::from_str(&text).map_err(config)?;
            print_json(&predict(id, &ing).map_err(config)?).map(|_| true)
        }
        Command::Harmonic(h) => harmonic_cmd(h).map(|_| true),
        Command::Oracle(o) => oracle_cmd(o).map(|_| true),
        Command::Special(s) => special_cmd(s).map(|_| true),
        Command::Run(a) => {
            let cfg = ExperimentConfig::load(&a.config)?;
            let rows = harness::run_experiment_with(&cfg, &Cache::from_env())?;
            write_report(&rows, a)?;
            Ok(band_summary(&cfg, &rows))
        }
        Command::Sweep { run: a, n_list } => {
            let cfg = ExperimentConfig::load(&a.config)?;
            let rep = harness::convergence_sweep_with(&cfg, n_list.as_deref(), &Cache::from_env())?;
            write_report(&rep.rows, a)?;
            eprintln!("{}: |ratio - 1| non-increasing in n: {}", cfg.name, rep.error_non_increasing);
            Ok(band_summary(&cfg, &rep.rows))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: thread count must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    match run(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Config(m)) => {
            eprintln!("configuration error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
