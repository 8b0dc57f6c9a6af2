//! Proximal splitting (PSM) and approximate proximal splitting (APS) iterations.
//!
//! An APS step is `x⁺ = prox_{αf1}(x − α(∇f2(x) + e))` with an error satisfying
//! `‖e‖ ≤ κ‖x⁺ − x‖`. PSM is the special case `e = 0`. Errors are synthesised by an
//! [`ErrorPolicy`] so the tolerance of the iteration to bounded gradient errors can be
//! exercised directly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::problem::ProblemInstance;
use crate::prox::{forward_backward, residual_psi_with};
use crate::trace::{IterationRecord, IterationTrace, Termination};
use crate::Vector;

/// Maximum number of times a proposed error is halved before falling back to `e = 0`.
pub const MAX_HALVINGS: usize = 60;

/// Default step as a fraction of [`max_step`].
pub const DEFAULT_STEP_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorPolicy {
    None,
    /// Uniformly random direction, magnitude `fraction·κ·‖psm_step − x‖`.
    RandomBounded {
        fraction: f64,
    },
    /// Opposes the PSM displacement, magnitude `fraction·κ·‖psm_step − x‖`.
    Adversarial {
        fraction: f64,
    },
}

impl ErrorPolicy {
    pub fn fraction(&self) -> f64 {
        match *self {
            Self::None => 0.0,
            Self::RandomBounded { fraction } | Self::Adversarial { fraction } => fraction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Psm,
    Aps,
}

/// Upper end of the admissible step interval, `2/(L + 2κ)`.
pub fn max_step(lipschitz: f64, kappa: f64) -> Result<f64> {
    if !(lipschitz > 0.0) || !lipschitz.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "Lipschitz constant {lipschitz} must be positive"
        )));
    }
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(Error::InvalidConfig(format!("kappa {kappa} must be non-negative")));
    }
    Ok(2.0 / (lipschitz + 2.0 * kappa))
}

/// The classical exact-PSM bound `1/L`, stricter than [`max_step`] at `κ = 0`.
pub fn classical_psm_step(lipschitz: f64) -> Result<f64> {
    Ok(max_step(lipschitz, 0.0)? / 2.0)
}

/// Sufficient decrease constant `(2 − 2ᾱκ − ᾱL)/(2ᾱ)` for steps bounded by `ᾱ`.
pub fn sufficient_decrease_constant(alpha_hi: f64, kappa: f64, lipschitz: f64) -> f64 {
    (2.0 - 2.0 * alpha_hi * kappa - alpha_hi * lipschitz) / (2.0 * alpha_hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    /// Draw `α^r` uniformly from `[alpha_lo, alpha_hi]` instead of using `alpha_hi`.
    pub random_steps: bool,
    pub kappa: f64,
    pub error_policy: ErrorPolicy,
    /// Stop once `ψ(x^r) ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// How many iterates the trace retains (0 keeps none).
    pub iterate_capacity: usize,
    /// Skip the `ᾱ < 2/(L + 2κ)` check.
    pub unchecked_steps: bool,
}

impl SolverConfig {
    /// Fixed step `0.9·2/(L + 2κ)`, no error injection.
    pub fn for_instance(inst: &ProblemInstance, kappa: f64) -> Result<Self> {
        let alpha = DEFAULT_STEP_FRACTION * max_step(inst.lipschitz(), kappa)?;
        Ok(Self {
            alpha_lo: alpha,
            alpha_hi: alpha,
            random_steps: false,
            kappa,
            error_policy: ErrorPolicy::None,
            tol: 1e-8,
            max_iter: 10_000,
            seed: 0,
            iterate_capacity: 0,
            unchecked_steps: false,
        })
    }

    pub fn with_fixed_step(mut self, alpha: f64) -> Self {
        self.alpha_lo = alpha;
        self.alpha_hi = alpha;
        self.random_steps = false;
        self
    }

    pub fn with_random_steps(mut self, lo: f64, hi: f64) -> Self {
        self.alpha_lo = lo;
        self.alpha_hi = hi;
        self.random_steps = true;
        self
    }

    pub fn with_policy(mut self, policy: ErrorPolicy) -> Self {
        self.error_policy = policy;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_iterates(mut self, capacity: usize) -> Self {
        self.iterate_capacity = capacity;
        self
    }

    pub fn unchecked(mut self) -> Self {
        self.unchecked_steps = true;
        self
    }

    pub fn validate(&self, lipschitz: f64) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.alpha_lo > 0.0) || !(self.alpha_lo <= self.alpha_hi) || !self.alpha_hi.is_finite() {
            return bad(format!(
                "need 0 < alpha_lo <= alpha_hi, got [{}, {}]",
                self.alpha_lo, self.alpha_hi
            ));
        }
        let limit = max_step(lipschitz, self.kappa)?;
        if !self.unchecked_steps && self.alpha_hi >= limit {
            return bad(format!(
                "alpha_hi {} must be below 2/(L + 2 kappa) = {limit}",
                self.alpha_hi
            ));
        }
        let rho = self.error_policy.fraction();
        if !(0.0..1.0).contains(&rho) {
            return bad(format!("error fraction {rho} must lie in [0, 1)"));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return bad(format!("tol {} must be non-negative", self.tol));
        }
        Ok(())
    }

    /// `c1` for this configuration's largest step.
    pub fn sufficient_decrease_constant(&self, lipschitz: f64) -> f64 {
        sufficient_decrease_constant(self.alpha_hi, self.kappa, lipschitz)
    }

    fn draw_step(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.random_steps && self.alpha_lo < self.alpha_hi {
            rng.random_range(self.alpha_lo..=self.alpha_hi)
        } else {
            self.alpha_hi
        }
    }
}

/// Exact prox-gradient step `prox_{αf1}(x − α∇f2(x))`.
pub fn psm_step(x: &Vector, alpha: f64, inst: &ProblemInstance) -> Result<Vector> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidStep(alpha));
    }
    let g = inst.smooth().gradient(x)?;
    forward_backward(x, &g, alpha, inst)
}

/// APS step from `x` with a synthesised error; returns `(x⁺, e)` with `‖e‖ ≤ κ‖x⁺ − x‖`.
pub fn aps_step<R: Rng>(
    x: &Vector,
    alpha: f64,
    policy: ErrorPolicy,
    kappa: f64,
    inst: &ProblemInstance,
    rng: &mut R,
) -> Result<(Vector, Vector)> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidStep(alpha));
    }
    let g = inst.smooth().gradient(x)?;
    aps_step_with_gradient(x, &g, alpha, policy, kappa, inst, rng)
}

/// [`aps_step`] with `∇f2(x)` already evaluated.
pub fn aps_step_with_gradient<R: Rng>(
    x: &Vector,
    grad: &Vector,
    alpha: f64,
    policy: ErrorPolicy,
    kappa: f64,
    inst: &ProblemInstance,
    rng: &mut R,
) -> Result<(Vector, Vector)> {
    let exact = forward_backward(x, grad, alpha, inst)?;
    let zero = || Vector::zeros(x.len());
    let displacement = &exact - x;
    let dn = displacement.norm();
    let direction = match policy {
        ErrorPolicy::None => return Ok((exact, zero())),
        _ if kappa == 0.0 || dn == 0.0 => return Ok((exact, zero())),
        ErrorPolicy::RandomBounded { .. } => random_unit(x.len(), rng),
        ErrorPolicy::Adversarial { .. } => -displacement / dn,
    };
    let mut magnitude = policy.fraction() * kappa * dn;
    for _ in 0..=MAX_HALVINGS {
        let e = &direction * magnitude;
        let next = forward_backward(x, &(grad + &e), alpha, inst)?;
        if e.norm() <= kappa * (&next - x).norm() {
            return Ok((next, e));
        }
        magnitude *= 0.5;
    }
    Ok((exact, zero()))
}

fn random_unit<R: Rng>(n: usize, rng: &mut R) -> Vector {
    loop {
        let v = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 0.0 {
            return v / norm;
        }
    }
}

/// Runs PSM or APS from `x0` until `ψ ≤ tol` or `max_iter` steps.
pub fn run_solver(inst: &ProblemInstance, config: &SolverConfig, x0: &Vector, mode: Mode) -> Result<IterationTrace> {
    check_len(inst.dim(), x0.len())?;
    config.validate(inst.lipschitz())?;
    if !inst.is_feasible(x0) {
        return Err(Error::Infeasible);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut trace = IterationTrace::new(config.iterate_capacity, x0);
    let mut x = x0.clone();
    let mut r = 0;
    loop {
        let f = inst.objective_value(&x)?;
        if !f.is_finite() {
            trace.final_point = x;
            return Err(Error::Diverged {
                iteration: r,
                trace: Box::new(trace),
            });
        }
        let g = inst.smooth().gradient(&x)?;
        let psi = residual_psi_with(&x, &g, inst)?;
        trace.store_iterate(r, &x);
        if psi <= config.tol || r == config.max_iter {
            trace.termination = if psi <= config.tol {
                Termination::Converged
            } else {
                Termination::MaxIterations
            };
            trace.push(IterationRecord {
                index: r,
                objective: f,
                residual: psi,
                step_norm: None,
                err_norm: None,
                alpha: None,
            });
            break;
        }
        let alpha = config.draw_step(&mut rng);
        let (next, err_norm) = match mode {
            Mode::Psm => (forward_backward(&x, &g, alpha, inst)?, 0.0),
            Mode::Aps => {
                let (next, e) =
                    aps_step_with_gradient(&x, &g, alpha, config.error_policy, config.kappa, inst, &mut rng)?;
                (next, e.norm())
            }
        };
        trace.push(IterationRecord {
            index: r,
            objective: f,
            residual: psi,
            step_norm: Some((&next - &x).norm()),
            err_norm: Some(err_norm),
            alpha: Some(alpha),
        });
        x = next;
        r += 1;
    }
    trace.final_point = x;
    Ok(trace)
}
