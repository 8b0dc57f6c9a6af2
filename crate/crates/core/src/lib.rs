//! Proximal splitting solvers for composite convex problems `F = f1 + f2`.
//!
//! `f2` is smooth with a Lipschitz gradient (least squares or logistic loss), `f1` is a
//! block-separable regularizer (ℓ1, group, sparse group, or an ℓ1 term restricted to a box).
//! The crate provides:
//!
//! * proximity operators, the proximal gradient vector and the optimality residual ψ ([`prox`]);
//! * the proximal splitting method (PSM) and its approximate variant with a controlled
//!   gradient error `‖e‖ ≤ κ‖x⁺ − x‖` ([`aps`]);
//! * exact cyclic / essentially cyclic block coordinate descent, including the
//!   reconstruction that writes a BCD cycle as one approximate prox step ([`bcd`]);
//! * empirical checks for sufficient decrease, cost-to-go, the local error bound and
//!   the linear rate ([`diagnostics`]);
//! * seeded instance generators and an experiment driver ([`generate`], [`experiment`]).
//!
//! ```
//! use proxsplit::aps::run_solver;
//! use proxsplit::diagnostics::{diagnose, reference_solution, Trajectory};
//! use proxsplit::generate::{generate_lasso, LassoParams};
//! use proxsplit::{Mode, SolverConfig, Vector};
//!
//! let params = LassoParams { n: 40, m: 25, k_true: 4, noise_sigma: 0.01, lambda: None,
//!                            identity_design: false, correlation: 0.0 };
//! let inst = generate_lasso(&params, 7)?;
//! let cfg = SolverConfig::for_instance(&inst, 0.0)?.with_tol(1e-10).with_iterates(usize::MAX);
//! let trace = run_solver(&inst, &cfg, &Vector::zeros(inst.dim()), Mode::Psm)?;
//!
//! let reference = reference_solution(&inst, 1e-13, 1_000_000)?;
//! let c1 = cfg.sufficient_decrease_constant(inst.lipschitz());
//! let report = diagnose(&Trajectory::from(&trace), &reference, c1);
//! assert!(report.all_pass);
//! # Ok::<(), proxsplit::Error>(())
//! ```

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aps;
pub mod bcd;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod generate;
pub mod linalg;
pub mod partition;
pub mod problem;
pub mod prox;
pub mod regularizer;
pub mod smooth;
pub mod trace;

pub use aps::{ErrorPolicy, Mode, SolverConfig};
pub use bcd::{BcdConfig, BcdRun, CycleErrorRecord, UpdateOrder};
pub use diagnostics::{DiagnosticsReport, ErrorBoundEstimate, Reference};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentMode, ExperimentSpec, InstanceSource};
pub use partition::BlockPartition;
pub use problem::ProblemInstance;
pub use regularizer::Regularizer;
pub use smooth::SmoothObjective;
pub use trace::{IterationRecord, IterationTrace, Termination};

/// Dense column vector used for iterates, gradients and data.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix used for design matrices.
pub type Matrix = nalgebra::DMatrix<f64>;
