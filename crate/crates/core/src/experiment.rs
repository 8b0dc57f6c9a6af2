//! One experiment end to end: build an instance, run a solver, measure, and write
//! `instance.json`, `trace.csv`, `iterates.csv`, `diagnostics.json` and `plot.csv`.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aps::{max_step, run_solver, ErrorPolicy, Mode, SolverConfig, DEFAULT_STEP_FRACTION};
use crate::bcd::{run_bcd, BcdConfig, UpdateOrder};
use crate::diagnostics::{diagnose, reference_solution, DiagnosticsReport, Trajectory};
use crate::error::Result;
use crate::generate::{
    generate_group_lasso, generate_lasso, generate_logistic_group_lasso, GroupLassoParams, LassoParams, LogisticParams,
};
use crate::problem::ProblemInstance;
use crate::trace::IterationTrace;
use crate::Vector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceSource {
    Lasso(LassoParams),
    GroupLasso(GroupLassoParams),
    LogisticGroupLasso(LogisticParams),
    File { path: PathBuf },
}

impl InstanceSource {
    pub fn build(&self, seed: u64) -> Result<ProblemInstance> {
        match self {
            Self::Lasso(p) => generate_lasso(p, seed),
            Self::GroupLasso(p) => generate_group_lasso(p, seed),
            Self::LogisticGroupLasso(p) => generate_logistic_group_lasso(p, seed),
            Self::File { path } => ProblemInstance::load(path),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentMode {
    Psm,
    Aps,
    Bcd,
}

fn default_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    10_000
}
fn default_reference_tol() -> f64 {
    1e-13
}
fn default_reference_max_iter() -> usize {
    1_000_000
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub instance: InstanceSource,
    pub mode: ExperimentMode,
    /// Drives instance generation and error injection.
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Iterations, or cycles for BCD.
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Error-bound constant κ as a multiple of `L` (APS only).
    #[serde(default)]
    pub kappa_over_l: f64,
    /// Fixed step override; defaults to `0.9·2/(L + 2κ)`.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default = "no_errors")]
    pub error_policy: ErrorPolicy,
    #[serde(default = "cyclic")]
    pub order: UpdateOrder,
    #[serde(default = "yes")]
    pub diagnostics: bool,
    #[serde(default = "default_reference_tol")]
    pub reference_tol: f64,
    #[serde(default = "default_reference_max_iter")]
    pub reference_max_iter: usize,
    pub out_dir: PathBuf,
}

fn no_errors() -> ErrorPolicy {
    ErrorPolicy::None
}
fn cyclic() -> UpdateOrder {
    UpdateOrder::Cyclic
}

impl ExperimentSpec {
    pub fn new(instance: InstanceSource, mode: ExperimentMode, seed: u64, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            instance,
            mode,
            seed,
            tol: default_tol(),
            max_iter: default_max_iter(),
            kappa_over_l: 0.0,
            alpha: None,
            error_policy: ErrorPolicy::None,
            order: UpdateOrder::Cyclic,
            diagnostics: true,
            reference_tol: default_reference_tol(),
            reference_max_iter: default_reference_max_iter(),
            out_dir: out_dir.into(),
        }
    }
}

/// A finished solve before any diagnostics.
#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub trace: IterationTrace,
    /// Cycle-level CSV for BCD, iteration CSV otherwise.
    pub trace_csv: String,
    /// Decrease constant the method guarantees.
    pub c1_required: f64,
}

/// Runs the configured solver from the origin.
pub fn solve(inst: &ProblemInstance, spec: &ExperimentSpec) -> Result<SolveOutput> {
    let x0 = Vector::zeros(inst.dim());
    let lip = inst.lipschitz();
    match spec.mode {
        ExperimentMode::Psm | ExperimentMode::Aps => {
            let (mode, kappa) = match spec.mode {
                ExperimentMode::Psm => (Mode::Psm, 0.0),
                _ => (Mode::Aps, spec.kappa_over_l * lip),
            };
            let alpha = match spec.alpha {
                Some(a) => a,
                None => DEFAULT_STEP_FRACTION * max_step(lip, kappa)?,
            };
            let cfg = SolverConfig::for_instance(inst, kappa)?
                .with_fixed_step(alpha)
                .with_policy(if mode == Mode::Psm {
                    ErrorPolicy::None
                } else {
                    spec.error_policy
                })
                .with_tol(spec.tol)
                .with_max_iter(spec.max_iter)
                .with_seed(spec.seed)
                .with_iterates(usize::MAX);
            let trace = run_solver(inst, &cfg, &x0, mode)?;
            Ok(SolveOutput {
                trace_csv: trace.to_csv_string()?,
                c1_required: cfg.sufficient_decrease_constant(lip),
                trace,
            })
        }
        ExperimentMode::Bcd => {
            let cfg = BcdConfig {
                order: spec.order.clone(),
                tol: spec.tol,
                max_cycles: spec.max_iter,
                allow_weak_blocks: !inst.smooth().is_least_squares(),
                iterate_capacity: usize::MAX,
                ..BcdConfig::default()
            };
            let run = run_bcd(inst, &cfg, &x0)?;
            Ok(SolveOutput {
                trace_csv: run.to_cycle_csv_string()?,
                c1_required: inst.block_moduli().min() / 2.0,
                trace: run.trace,
            })
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: Option<DiagnosticsReport>,
    pub files: Vec<PathBuf>,
}

impl ExperimentOutcome {
    /// True when diagnostics were skipped or every check passed.
    pub fn passed(&self) -> bool {
        self.report.as_ref().is_none_or(|r| r.all_pass)
    }
}

fn write_file(dir: &Path, name: &str, contents: &[u8], files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents)?;
    files.push(path);
    Ok(())
}

/// Runs `spec` and writes its outputs. Failing checks still produce every file; callers
/// inspect [`ExperimentOutcome::passed`].
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    let inst = spec.instance.build(spec.seed)?;
    fs::create_dir_all(&spec.out_dir)?;
    let dir = spec.out_dir.as_path();
    let mut files = Vec::new();
    write_file(dir, "instance.json", inst.to_json()?.as_bytes(), &mut files)?;

    let out = solve(&inst, spec)?;
    write_file(dir, "trace.csv", out.trace_csv.as_bytes(), &mut files)?;
    let it_path = dir.join("iterates.csv");
    out.trace.write_iterates_csv(BufWriter::new(File::create(&it_path)?))?;
    files.push(it_path);

    let report = if spec.diagnostics {
        let reference = reference_solution(&inst, spec.reference_tol, spec.reference_max_iter)?;
        let report = diagnose(&Trajectory::from(&out.trace), &reference, out.c1_required);
        write_file(dir, "diagnostics.json", report.to_json()?.as_bytes(), &mut files)?;
        let plot = dir.join("plot.csv");
        report.write_plot_csv(BufWriter::new(File::create(&plot)?))?;
        files.push(plot);
        Some(report)
    } else {
        None
    };
    Ok(ExperimentOutcome { report, files })
}
