//! Empirical checks of the inequalities behind linear convergence: sufficient decrease,
//! cost-to-go, the local error bound `φ(x) ≤ τψ(x)`, R-linear rates, and the
//! monotonicity of the proximal gradient norm in the step size.
//!
//! Distances to the solution set are measured against a high-accuracy reference
//! solution, `φ̂(x) = ‖x − x_ref‖`. This is exact for a unique minimizer and an upper
//! bound otherwise; reports carry `surrogate_caveat` to say so.

use std::collections::HashMap;
use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::aps::{classical_psm_step, run_solver, Mode, SolverConfig};
use crate::error::{Error, Result};
use crate::partition::BlockPartition;
use crate::problem::ProblemInstance;
use crate::prox::{prox_regularizer, proximal_gradient_with};
use crate::regularizer::Regularizer;
use crate::trace::{fmt17, IterationRecord, IterationTrace};
use crate::Vector;

/// Objective gaps at or below this are rounding noise and excluded from fits.
pub const GAP_FLOOR: f64 = 1e-14;
/// Additive slack on the per-iteration sufficient decrease inequality.
pub const DECREASE_SLACK: f64 = 1e-8;
/// Steps shorter than this do not contribute to `c1_observed`.
pub const STEP_FLOOR: f64 = 1e-14;
/// Slack on the step-size monotonicity checks.
pub const MONOTONE_SLACK: f64 = 1e-10;
/// Minimum number of tail points for a rate fit.
pub const MIN_TAIL_POINTS: usize = 10;
/// `φ̂` is only resolved for iterates whose residual exceeds the reference's by this factor.
pub const REFERENCE_RESOLUTION: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub x_star: Vector,
    pub f_star: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// High-accuracy solution by PSM with the classical step `1/L`, started at `x0` or at the
/// feasible point nearest the origin.
pub fn reference_solution(inst: &ProblemInstance, hi_tol: f64, hi_max_iter: usize) -> Result<Reference> {
    let start = match inst.regularizer() {
        Regularizer::Box { lower, upper, .. } => Vector::from_fn(inst.dim(), |i, _| 0f64.clamp(lower[i], upper[i])),
        _ => Vector::zeros(inst.dim()),
    };
    reference_solution_from(inst, &start, hi_tol, hi_max_iter)
}

pub fn reference_solution_from(
    inst: &ProblemInstance,
    x0: &Vector,
    hi_tol: f64,
    hi_max_iter: usize,
) -> Result<Reference> {
    let alpha = classical_psm_step(inst.lipschitz())?;
    let cfg = SolverConfig::for_instance(inst, 0.0)?
        .with_fixed_step(alpha)
        .with_tol(hi_tol)
        .with_max_iter(hi_max_iter);
    let trace = run_solver(inst, &cfg, x0, Mode::Psm)?;
    let residual = trace.final_residual();
    if !(residual <= hi_tol) {
        return Err(Error::OracleUnavailable {
            residual,
            iterations: trace.iterations(),
        });
    }
    Ok(Reference {
        f_star: trace.final_objective(),
        iterations: trace.iterations(),
        x_star: trace.final_point,
        residual,
    })
}

/// Records of a run plus whatever iterates were retained.
#[derive(Debug, Clone)]
pub struct Trajectory<'a> {
    pub records: &'a [IterationRecord],
    iterates: HashMap<usize, &'a Vector>,
}

impl<'a> Trajectory<'a> {
    pub fn new(records: &'a [IterationRecord], iterates: impl IntoIterator<Item = &'a (usize, Vector)>) -> Self {
        Self {
            records,
            iterates: iterates.into_iter().map(|(r, x)| (*r, x)).collect(),
        }
    }

    pub fn iterate(&self, r: usize) -> Option<&'a Vector> {
        self.iterates.get(&r).copied()
    }
}

impl<'a> From<&'a IterationTrace> for Trajectory<'a> {
    fn from(t: &'a IterationTrace) -> Self {
        Self::new(&t.records, t.iterates.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficientDecrease {
    pub pass: bool,
    pub c1_required: f64,
    /// Smallest `(F(x^r) − F(x^{r+1}))/‖Δx‖²` over steps longer than [`STEP_FLOOR`];
    /// `None` when no step qualifies.
    pub c1_observed: Option<f64>,
    /// Iterations with `F(x^r) − F(x^{r+1}) < c1‖Δx‖² − slack`.
    pub violations: Vec<usize>,
}

/// Checks `F(x^r) − F(x^{r+1}) ≥ c1‖x^{r+1} − x^r‖² − slack` at every step.
pub fn sufficient_decrease_check(records: &[IterationRecord], c1_required: f64, slack: f64) -> SufficientDecrease {
    let mut c1_observed: Option<f64> = None;
    let mut violations = Vec::new();
    for pair in records.windows(2) {
        let (cur, next) = (&pair[0], &pair[1]);
        let Some(d) = cur.step_norm else { continue };
        let drop = cur.objective - next.objective;
        if drop < c1_required * d * d - slack {
            violations.push(cur.index);
        }
        if d > STEP_FLOOR {
            let ratio = drop / (d * d);
            c1_observed = Some(c1_observed.map_or(ratio, |c| c.min(ratio)));
        }
    }
    SufficientDecrease {
        pass: violations.is_empty(),
        c1_required,
        c1_observed,
        violations,
    }
}

/// True when the largest value in the last `fraction` of `series` is at most
/// `factor` times the median of the whole series. Empty series pass.
pub fn no_growth_trend(series: &[f64], fraction: f64, factor: f64) -> bool {
    if series.is_empty() {
        return true;
    }
    let med = median(series);
    let tail = ((series.len() as f64 * fraction).ceil() as usize).clamp(1, series.len());
    let tail_max = series[series.len() - tail..]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    tail_max.is_finite() && tail_max <= factor * med
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostToGo {
    pub pass: bool,
    pub c2_observed: Option<f64>,
    /// `(r, (F(x^r) − F*)/(φ̂(x^r)² + ‖Δx‖²))`.
    pub series: Vec<(usize, f64)>,
}

/// Measures `c2` in `F(x^r) − F* ≤ c2(φ̂(x^r)² + ‖x^{r+1} − x^r‖²)`.
///
/// Iterations whose gap is within [`GAP_FLOOR`] are skipped. The check passes when the
/// ratio is finite everywhere and its last quartile stays within 20× the median.
pub fn cost_to_go_check(traj: &Trajectory<'_>, x_star: &Vector, f_star: f64) -> CostToGo {
    let mut series = Vec::new();
    let mut degenerate = false;
    for rec in traj.records {
        let (Some(d), Some(x)) = (rec.step_norm, traj.iterate(rec.index)) else {
            continue;
        };
        let gap = rec.objective - f_star;
        if gap <= GAP_FLOOR {
            continue;
        }
        let phi = (x - x_star).norm();
        let denom = phi * phi + d * d;
        if denom == 0.0 {
            degenerate = true;
            continue;
        }
        series.push((rec.index, gap / denom));
    }
    let values: Vec<f64> = series.iter().map(|s| s.1).collect();
    let c2_observed = values.iter().copied().reduce(f64::max);
    let pass = !degenerate && values.iter().all(|v| v.is_finite()) && no_growth_trend(&values, 0.25, 20.0);
    CostToGo {
        pass,
        c2_observed,
        series,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBoundEstimate {
    /// Largest collected `φ̂/ψ`; `None` when no iterate fell in the region.
    pub tau_hat: Option<f64>,
    pub delta_used: f64,
    pub nu_used: f64,
    /// `(r, φ̂(x^r)/ψ(x^r))` for iterates with `0 < ψ ≤ δ` and `F ≤ ν`.
    pub ratios: Vec<(usize, f64)>,
    pub empty_region: bool,
    /// `φ̂` over-estimates the distance to the solution set when it is not a singleton.
    pub surrogate_caveat: bool,
}

impl ErrorBoundEstimate {
    pub fn ratio_values(&self) -> Vec<f64> {
        self.ratios.iter().map(|r| r.1).collect()
    }
}

/// Collects `φ̂(x)/ψ(x)` over the region `{psi_floor < ψ ≤ δ, F ≤ ν}`. `None` defaults to
/// the first record's `ψ` and `F`, so the whole trajectory qualifies.
///
/// `‖x_ref − X*‖ ≤ τψ(x_ref)`, so iterates more accurate than the reference say nothing
/// about `τ`; pass `REFERENCE_RESOLUTION·ψ(x_ref)` as `psi_floor` to drop them.
pub fn error_bound_ratio(
    traj: &Trajectory<'_>,
    x_star: &Vector,
    delta: Option<f64>,
    nu: Option<f64>,
    psi_floor: f64,
) -> ErrorBoundEstimate {
    let first = traj.records.first();
    let delta = delta.unwrap_or_else(|| first.map_or(0.0, |r| r.residual));
    let nu = nu.unwrap_or_else(|| first.map_or(0.0, |r| r.objective));
    let ratios: Vec<(usize, f64)> = traj
        .records
        .iter()
        .filter(|r| r.residual > psi_floor.max(0.0) && r.residual <= delta && r.objective <= nu)
        .filter_map(|r| {
            traj.iterate(r.index)
                .map(|x| (r.index, (x - x_star).norm() / r.residual))
        })
        .collect();
    let tau_hat = ratios.iter().map(|r| r.1).reduce(f64::max);
    ErrorBoundEstimate {
        tau_hat,
        delta_used: delta,
        nu_used: nu,
        empty_region: ratios.is_empty(),
        ratios,
        surrogate_caveat: true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// `exp(slope)`: per-iteration contraction factor.
    pub rho: f64,
    pub r2: f64,
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Least-squares line through `(t, log v)` for the last `tail_fraction` of the points
/// whose value exceeds `floor`.
pub fn fit_log_linear(series: &[(f64, f64)], floor: f64, tail_fraction: f64) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(_, v)| *v > floor && v.is_finite())
        .map(|&(t, v)| (t, v.ln()))
        .collect();
    let tail = ((pts.len() as f64 * tail_fraction).ceil() as usize).min(pts.len());
    if tail < MIN_TAIL_POINTS {
        return Err(Error::InsufficientData(format!(
            "{tail} tail points above {floor:e}, need {MIN_TAIL_POINTS}"
        )));
    }
    let pts = &pts[pts.len() - tail..];
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sty / stt;
    let intercept = my - slope * mt;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if syy > 0.0 {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(RateFit {
        rho: slope.exp(),
        r2,
        slope,
        intercept,
        points: pts.len(),
    })
}

/// Fits `log(F(x^r) − F*)` against `r` over the tail of the trajectory.
pub fn estimate_linear_rate(records: &[IterationRecord], f_star: f64, tail_fraction: f64) -> Result<RateFit> {
    let series: Vec<(f64, f64)> = records.iter().map(|r| (r.index as f64, r.objective - f_star)).collect();
    fit_log_linear(&series, GAP_FLOOR, tail_fraction)
}

/// Fits `log‖x^r − x*‖` over the tail; distances below `floor` are excluded.
pub fn estimate_iterate_rate(
    traj: &Trajectory<'_>,
    x_star: &Vector,
    floor: f64,
    tail_fraction: f64,
) -> Result<RateFit> {
    let series: Vec<(f64, f64)> = traj
        .records
        .iter()
        .filter_map(|r| traj.iterate(r.index).map(|x| (r.index as f64, (x - x_star).norm())))
        .collect();
    fit_log_linear(&series, floor, tail_fraction)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monotonicity {
    pub pass_increasing: bool,
    pub pass_decreasing: bool,
    /// `(α, α‖∇̃F(x,α)‖, ‖∇̃F(x,α)‖)`.
    pub series: Vec<(f64, f64, f64)>,
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Evaluates `α‖∇̃F(x,α)‖` (should not decrease) and `‖∇̃F(x,α)‖` (should not
/// increase) along an ascending step grid.
pub fn monotonicity_check(x: &Vector, inst: &ProblemInstance, alpha_grid: &[f64]) -> Result<Monotonicity> {
    if alpha_grid.iter().any(|a| !(*a > 0.0)) || alpha_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidConfig("alpha grid must be positive and ascending".into()));
    }
    let g = inst.smooth().gradient(x)?;
    let series = alpha_grid
        .iter()
        .map(|&a| {
            let pg = proximal_gradient_with(x, &g, a, inst)?.norm();
            Ok((a, a * pg, pg))
        })
        .collect::<Result<Vec<_>>>()?;
    let pass_increasing = series.windows(2).all(|w| w[1].1 >= w[0].1 - MONOTONE_SLACK);
    let pass_decreasing = series.windows(2).all(|w| w[1].2 <= w[0].2 + MONOTONE_SLACK);
    Ok(Monotonicity {
        pass_increasing,
        pass_decreasing,
        series,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nonexpansiveness {
    pub pass: bool,
    /// Largest `‖prox(x) − prox(y)‖ − ‖x − y‖` seen.
    pub worst_excess: f64,
    pub samples: usize,
}

/// Samples Gaussian pairs (scale drawn per pair) and checks `‖prox(x) − prox(y)‖ ≤ ‖x − y‖ + 1e-12`.
pub fn nonexpansiveness_check<R: Rng>(
    reg: &Regularizer,
    partition: &BlockPartition,
    alpha: f64,
    num_samples: usize,
    rng: &mut R,
) -> Result<Nonexpansiveness> {
    if num_samples == 0 {
        return Err(Error::InvalidConfig("need at least one sample".into()));
    }
    let n = partition.dim();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..num_samples {
        let scale = 3.0 * rng.random::<f64>() + 1e-3;
        let x = Vector::from_fn(n, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
        let y = if rng.random_bool(0.1) {
            x.clone()
        } else {
            Vector::from_fn(n, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
        };
        let px = prox_regularizer(&x, reg, alpha, partition)?.point;
        let py = prox_regularizer(&y, reg, alpha, partition)?.point;
        worst = worst.max((px - py).norm() - (x - y).norm());
    }
    Ok(Nonexpansiveness {
        pass: worst <= 1e-12,
        worst_excess: worst,
        samples: num_samples,
    })
}

/// Everything measured on one trajectory against a reference solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub f_star: f64,
    pub c1_required: f64,
    pub c1_observed: Option<f64>,
    pub sufficient_decrease_pass: bool,
    pub decrease_violations: Vec<usize>,
    pub c2_observed: Option<f64>,
    pub cost_to_go_pass: bool,
    /// `None` when the trajectory converged too fast for a fit.
    pub rate_rho: Option<f64>,
    pub fit_r2: Option<f64>,
    pub rate_note: Option<String>,
    pub tau_hat: Option<f64>,
    pub error_bound_pass: bool,
    pub iterate_slope: Option<f64>,
    /// Finite τ̂ and sufficient decrease imply `ρ < 1` with `r² ≥ 0.95`.
    pub linear_rate_pass: bool,
    pub surrogate_caveat: bool,
    pub all_pass: bool,
    pub error_bound: ErrorBoundEstimate,
    pub cost_to_go_series: Vec<(usize, f64)>,
    /// `(r, F(x^r) − F*)`.
    pub gap_series: Vec<(usize, f64)>,
}

/// `r²` a rate fit needs before linear convergence is declared.
pub const RATE_R2_MIN: f64 = 0.95;

impl DiagnosticsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Per-iteration series: `r,gap,eb_ratio,c2_ratio` (blank where undefined).
    pub fn write_series_csv<W: Write>(&self, w: W) -> Result<()> {
        let eb: HashMap<usize, f64> = self.error_bound.ratios.iter().copied().collect();
        let c2: HashMap<usize, f64> = self.cost_to_go_series.iter().copied().collect();
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["r", "gap", "eb_ratio", "c2_ratio"])?;
        let opt = |v: Option<&f64>| v.map_or_else(String::new, |v| fmt17(*v));
        for &(r, gap) in &self.gap_series {
            out.write_record([r.to_string(), fmt17(gap), opt(eb.get(&r)), opt(c2.get(&r))])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Plot data `r,log_gap` for iterations with a gap above [`GAP_FLOOR`].
    pub fn write_plot_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["r", "log_gap"])?;
        for &(r, gap) in self.gap_series.iter().filter(|g| g.1 > GAP_FLOOR) {
            out.write_record([r.to_string(), fmt17(gap.ln())])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Runs every trajectory check. `c1_required` is the theoretical decrease constant for
/// the method that produced the trajectory.
pub fn diagnose(traj: &Trajectory<'_>, reference: &Reference, c1_required: f64) -> DiagnosticsReport {
    let sd = sufficient_decrease_check(traj.records, c1_required, DECREASE_SLACK);
    let c2 = cost_to_go_check(traj, &reference.x_star, reference.f_star);
    let eb = error_bound_ratio(
        traj,
        &reference.x_star,
        None,
        None,
        REFERENCE_RESOLUTION * reference.residual,
    );
    let eb_values = eb.ratio_values();
    let error_bound_pass = eb.tau_hat.is_none_or(f64::is_finite) && no_growth_trend(&eb_values, 0.1, 10.0);
    let (rate_rho, fit_r2, rate_note, rate_ok) = match estimate_linear_rate(traj.records, reference.f_star, 0.5) {
        Ok(fit) => (
            Some(fit.rho),
            Some(fit.r2),
            None,
            fit.rho < 1.0 && fit.r2 >= RATE_R2_MIN,
        ),
        Err(e) => (None, None, Some(e.to_string()), true),
    };
    let theorem_applies = eb.tau_hat.is_some_and(f64::is_finite) && sd.pass;
    let linear_rate_pass = !theorem_applies || rate_ok;
    let dist_floor = 1e-10 * (1.0 + reference.x_star.norm());
    let iterate_slope = estimate_iterate_rate(traj, &reference.x_star, dist_floor, 0.5)
        .ok()
        .map(|f| f.slope);
    let iterate_ok = rate_rho.is_none() || iterate_slope.is_none_or(|s| s < 0.0);
    let gap_series = traj
        .records
        .iter()
        .map(|r| (r.index, r.objective - reference.f_star))
        .collect();
    DiagnosticsReport {
        f_star: reference.f_star,
        c1_required,
        c1_observed: sd.c1_observed,
        sufficient_decrease_pass: sd.pass,
        decrease_violations: sd.violations,
        c2_observed: c2.c2_observed,
        cost_to_go_pass: c2.pass,
        rate_rho,
        fit_r2,
        rate_note,
        tau_hat: eb.tau_hat,
        error_bound_pass,
        iterate_slope,
        linear_rate_pass,
        surrogate_caveat: true,
        all_pass: sd.pass && c2.pass && error_bound_pass && linear_rate_pass && iterate_ok,
        error_bound: eb,
        cost_to_go_series: c2.series,
        gap_series,
    }
}
