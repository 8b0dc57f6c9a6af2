use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use proxsplit::aps::sufficient_decrease_constant;
use proxsplit::diagnostics::{diagnose, estimate_linear_rate, reference_solution, Trajectory};
use proxsplit::experiment::solve;
use proxsplit::generate::{
    generate_group_lasso, generate_lasso, generate_logistic_group_lasso, GroupLassoParams, LassoParams, LogisticParams,
};
use proxsplit::trace::{read_iterates_csv, read_trace_csv};
use proxsplit::{
    run_experiment, ErrorPolicy, ExperimentMode, ExperimentSpec, InstanceSource, ProblemInstance, UpdateOrder,
};

/// Proximal splitting solvers with convergence diagnostics.
#[derive(Parser)]
#[command(name = "proxsplit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance as JSON.
    Gen(GenArgs),
    /// Solve an instance and write trace.csv and iterates.csv.
    Solve(SolveArgs),
    /// Check a trace against a high-accuracy reference solution.
    Diagnose(DiagnoseArgs),
    /// Fit a linear rate to the objective gaps of a trace.
    Rate(RateArgs),
    /// Run a JSON experiment spec end to end.
    Run(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Lasso,
    GroupLasso,
    Logistic,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of variables (LASSO).
    #[arg(long, default_value_t = 50)]
    n: usize,
    /// Number of samples.
    #[arg(long, default_value_t = 30)]
    m: usize,
    /// Planted nonzeros (LASSO).
    #[arg(long, default_value_t = 5)]
    k_true: usize,
    /// Comma-separated block sizes (group models).
    #[arg(long, value_delimiter = ',', default_value = "5,5,5,5")]
    block_sizes: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    active_blocks: usize,
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    /// Pairwise correlation of design columns.
    #[arg(long, default_value_t = 0.0)]
    correlation: f64,
    /// l1 penalty; defaults to 0.1·‖Aᵀb‖∞.
    #[arg(long)]
    lambda: Option<f64>,
    /// Comma-separated group weights.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, value_enum, default_value = "psm")]
    mode: ModeArg,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Iteration cap (cycles for bcd).
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    /// Error-bound constant κ as a multiple of L.
    #[arg(long, default_value_t = 0.0)]
    kappa: f64,
    /// none, random[:FRACTION] or adversarial[:FRACTION].
    #[arg(long, default_value = "none", value_parser = parse_policy)]
    error_policy: ErrorPolicy,
    /// Fixed step, overriding 0.9·2/(L + 2κ).
    #[arg(long)]
    alpha: Option<f64>,
    /// `cyclic` or a comma-separated block schedule.
    #[arg(long, default_value = "cyclic")]
    order: String,
    /// Window in which an essentially cyclic schedule must touch every block.
    #[arg(long)]
    period: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ModeArg {
    Psm,
    Aps,
    Bcd,
}

impl From<ModeArg> for ExperimentMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Psm => Self::Psm,
            ModeArg::Aps => Self::Aps,
            ModeArg::Bcd => Self::Bcd,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    trace: PathBuf,
    /// Defaults to iterates.csv next to the trace.
    #[arg(long)]
    iterates: Option<PathBuf>,
    /// κ/L used by the run (ignored for BCD traces).
    #[arg(long, default_value_t = 0.0)]
    kappa: f64,
    #[arg(long, default_value_t = 1e-13)]
    reference_tol: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RateArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Optimal value; computed from --instance when omitted.
    #[arg(long)]
    f_star: Option<f64>,
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    tail_fraction: f64,
}

#[derive(Args)]
struct RunArgs {
    /// ExperimentSpec JSON file.
    spec: PathBuf,
    /// Overrides the spec's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the spec's output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn parse_policy(s: &str) -> Result<ErrorPolicy, String> {
    let (name, frac) = match s.split_once(':') {
        Some((n, f)) => (n, f.parse::<f64>().map_err(|e| format!("bad fraction {f:?}: {e}"))?),
        None => (s, 0.9),
    };
    match name {
        "none" => Ok(ErrorPolicy::None),
        "random" | "random_bounded" => Ok(ErrorPolicy::RandomBounded { fraction: frac }),
        "adversarial" => Ok(ErrorPolicy::Adversarial { fraction: frac }),
        other => Err(format!("unknown error policy {other:?}")),
    }
}

fn parse_order(order: &str, period: Option<usize>) -> Result<UpdateOrder> {
    if order == "cyclic" {
        return Ok(UpdateOrder::Cyclic);
    }
    let schedule = order
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .with_context(|| format!("bad block schedule {order:?}"))?;
    let period = period.unwrap_or(schedule.len());
    Ok(UpdateOrder::EssentiallyCyclic { schedule, period })
}

fn gen(args: GenArgs) -> Result<()> {
    let inst = match args.kind {
        Kind::Lasso => generate_lasso(
            &LassoParams {
                n: args.n,
                m: args.m,
                k_true: args.k_true,
                noise_sigma: args.noise,
                lambda: args.lambda,
                identity_design: false,
                correlation: args.correlation,
            },
            args.seed,
        )?,
        Kind::GroupLasso => generate_group_lasso(
            &GroupLassoParams {
                block_sizes: args.block_sizes,
                m: args.m,
                active_blocks: args.active_blocks,
                noise_sigma: args.noise,
                weights: args.weights,
                correlation: args.correlation,
            },
            args.seed,
        )?,
        Kind::Logistic => generate_logistic_group_lasso(
            &LogisticParams {
                block_sizes: args.block_sizes,
                m: args.m,
                active_blocks: args.active_blocks,
                signal_scale: 1.0,
                weights: args.weights,
            },
            args.seed,
        )?,
    };
    match args.out {
        Some(path) => inst
            .save(&path)
            .with_context(|| format!("writing {}", path.display()))?,
        None => {
            let mut out = io::stdout().lock();
            out.write_all(inst.to_json()?.as_bytes())?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

fn load_instance(path: &Path) -> Result<ProblemInstance> {
    ProblemInstance::load(path).with_context(|| format!("reading instance {}", path.display()))
}

fn solve_cmd(args: SolveArgs) -> Result<()> {
    let inst = load_instance(&args.instance)?;
    let s = &args.solver;
    let mut spec = ExperimentSpec::new(
        InstanceSource::File {
            path: args.instance.clone(),
        },
        s.mode.into(),
        s.seed,
        &args.out_dir,
    );
    spec.tol = s.tol;
    spec.max_iter = s.max_iter;
    spec.kappa_over_l = s.kappa;
    spec.alpha = s.alpha;
    spec.error_policy = s.error_policy;
    spec.order = parse_order(&s.order, s.period)?;
    let out = solve(&inst, &spec)?;
    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    fs::write(args.out_dir.join("trace.csv"), &out.trace_csv)?;
    out.trace
        .write_iterates_csv(BufWriter::new(File::create(args.out_dir.join("iterates.csv"))?))?;
    println!(
        "{:?} after {} iterations: F = {:.16e}, psi = {:.3e}",
        out.trace.termination,
        out.trace.iterations(),
        out.trace.final_objective(),
        out.trace.final_residual()
    );
    Ok(())
}

fn diagnose_cmd(args: DiagnoseArgs) -> Result<bool> {
    let inst = load_instance(&args.instance)?;
    let table = read_trace_csv(BufReader::new(
        File::open(&args.trace).with_context(|| format!("reading {}", args.trace.display()))?,
    ))?;
    let it_path = args
        .iterates
        .unwrap_or_else(|| args.trace.with_file_name("iterates.csv"));
    let iterates = read_iterates_csv(BufReader::new(
        File::open(&it_path).with_context(|| format!("reading {}", it_path.display()))?,
    ))?;
    let lip = inst.lipschitz();
    let c1 = if table.cycle_layout {
        inst.block_moduli().min() / 2.0
    } else {
        let alpha_hi = table.records.iter().filter_map(|r| r.alpha).fold(0.0, f64::max);
        if alpha_hi == 0.0 {
            bail!("trace records no step sizes");
        }
        sufficient_decrease_constant(alpha_hi, args.kappa * lip, lip)
    };
    let reference = reference_solution(&inst, args.reference_tol, 10_000_000)?;
    let report = diagnose(&Trajectory::new(&table.records, iterates.iter()), &reference, c1);
    fs::create_dir_all(&args.out_dir)?;
    fs::write(args.out_dir.join("diagnostics.json"), report.to_json()?)?;
    report.write_plot_csv(BufWriter::new(File::create(args.out_dir.join("plot.csv"))?))?;
    report.write_series_csv(BufWriter::new(File::create(args.out_dir.join("series.csv"))?))?;
    println!(
        "sufficient decrease {}, cost-to-go {}, error bound {}, linear rate {}",
        verdict(report.sufficient_decrease_pass),
        verdict(report.cost_to_go_pass),
        verdict(report.error_bound_pass),
        verdict(report.linear_rate_pass)
    );
    Ok(report.all_pass)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAILED"
    }
}

fn rate_cmd(args: RateArgs) -> Result<()> {
    let table = read_trace_csv(BufReader::new(File::open(&args.trace)?))?;
    let f_star = match (args.f_star, &args.instance) {
        (Some(f), _) => f,
        (None, Some(path)) => reference_solution(&load_instance(path)?, 1e-13, 10_000_000)?.f_star,
        (None, None) => bail!("either --f-star or --instance is required"),
    };
    let fit = estimate_linear_rate(&table.records, f_star, args.tail_fraction)?;
    println!("{}", serde_json::to_string_pretty(&fit)?);
    Ok(())
}

fn run_cmd(args: RunArgs) -> Result<bool> {
    let text = fs::read_to_string(&args.spec).with_context(|| format!("reading {}", args.spec.display()))?;
    let mut spec: ExperimentSpec = serde_json::from_str(&text).context("parsing experiment spec")?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(dir) = args.out_dir {
        spec.out_dir = dir;
    }
    let outcome = run_experiment(&spec)?;
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    Ok(outcome.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => gen(a).map(|_| true),
        Command::Solve(a) => solve_cmd(a).map(|_| true),
        Command::Diagnose(a) => diagnose_cmd(a),
        Command::Rate(a) => rate_cmd(a).map(|_| true),
        Command::Run(a) => run_cmd(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("diagnostic checks failed");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
