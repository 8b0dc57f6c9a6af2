//! Block coordinate descent with exact block minimization.
//!
//! A cyclic BCD pass over all `K` blocks can be rewritten as a single unit-step
//! approximate prox step `x^{(s+1)K} = prox_{f1}(x^{sK} − ∇f2(x^{sK}) + e^s)` where
//! `e^s_k = x^{sK+k}_k − x^{sK}_k + ∇_k f2(x^{sK}) − ∇_k f2(x^{sK+k})` and
//! `‖e^s‖ ≤ K(L+1)‖x^{(s+1)K} − x^{sK}‖`. [`reconstruct_aps_error`] builds `e^s`
//! and checks both facts for every cycle.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{column_gram, SpectralGram};
use crate::problem::ProblemInstance;
use crate::prox::{prox_block_in_place, prox_regularizer, residual_psi_with, soft_threshold};
use crate::regularizer::Regularizer;
use crate::smooth::{sigmoid, SmoothModel, LIPSCHITZ_INFLATION};
use crate::trace::{fmt17, IterationRecord, IterationTrace, Termination};
use crate::Vector;

/// Prox-form defect beyond which a reconstruction is treated as an inner-solver failure.
pub const RECONSTRUCTION_DEFECT_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UpdateOrder {
    Cyclic,
    /// Repeats `schedule`; every window of `period` consecutive updates must touch every block.
    EssentiallyCyclic {
        schedule: Vec<usize>,
        period: usize,
    },
}

impl UpdateOrder {
    /// Block indices visited in one pass.
    pub fn pass(&self, num_blocks: usize) -> Vec<usize> {
        match self {
            Self::Cyclic => (0..num_blocks).collect(),
            Self::EssentiallyCyclic { schedule, .. } => schedule.clone(),
        }
    }

    pub fn validate(&self, num_blocks: usize) -> Result<()> {
        let Self::EssentiallyCyclic { schedule, period } = self else {
            return Ok(());
        };
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if schedule.is_empty() {
            return bad("empty update schedule".into());
        }
        if let Some(&k) = schedule.iter().find(|&&k| k >= num_blocks) {
            return bad(format!("schedule entry {k} out of range for {num_blocks} blocks"));
        }
        if *period < num_blocks {
            return bad(format!(
                "period {period} is smaller than the number of blocks {num_blocks}"
            ));
        }
        let reps = period / schedule.len() + 2;
        let unrolled: Vec<usize> = schedule.iter().copied().cycle().take(reps * schedule.len()).collect();
        for start in 0..schedule.len() {
            let mut seen = vec![false; num_blocks];
            unrolled[start..start + period].iter().for_each(|&k| seen[k] = true);
            if let Some(missing) = seen.iter().position(|s| !s) {
                return bad(format!(
                    "block {missing} is not updated within {period} steps of position {start}"
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcdConfig {
    pub order: UpdateOrder,
    /// Stop once `ψ(x^{sK}) ≤ tol`.
    pub tol: f64,
    pub max_cycles: usize,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    /// Run even when some block has modulus zero (required for the logistic model).
    pub allow_weak_blocks: bool,
    pub iterate_capacity: usize,
}

impl Default for BcdConfig {
    fn default() -> Self {
        Self {
            order: UpdateOrder::Cyclic,
            tol: 1e-8,
            max_cycles: 10_000,
            inner_tol: 1e-12,
            inner_max_iter: 100_000,
            allow_weak_blocks: false,
            iterate_capacity: 0,
        }
    }
}

/// Result of rewriting one cyclic pass as an approximate prox step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleErrorRecord {
    pub cycle: usize,
    /// `e^s` in the `x − ∇f2(x) + e` convention.
    pub error: Vec<f64>,
    pub err_norm: f64,
    pub cycle_step_norm: f64,
    /// `‖x^{(s+1)K} − prox_{f1}(x^{sK} − ∇f2(x^{sK}) + e^s)‖`.
    pub prox_defect: f64,
    /// `K(L+1)`.
    pub kappa: f64,
}

impl CycleErrorRecord {
    pub fn bound_rhs(&self) -> f64 {
        self.kappa * self.cycle_step_norm
    }

    pub fn bound_holds(&self) -> bool {
        self.err_norm <= self.bound_rhs()
    }

    /// `‖e^s‖ / ‖Δcycle‖`, the smallest κ this cycle needs.
    pub fn observed_ratio(&self) -> f64 {
        if self.cycle_step_norm > 0.0 {
            self.err_norm / self.cycle_step_norm
        } else if self.err_norm == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    /// The same error in the `x − α(∇f2(x) + e)` convention with `α = 1`.
    pub fn aps_error(&self) -> Vector {
        -Vector::from_column_slice(&self.error)
    }
}

#[derive(Debug, Clone)]
pub struct BcdRun {
    /// One record per cycle.
    pub trace: IterationTrace,
    /// One record per completed cycle (cyclic order only).
    pub cycles: Vec<CycleErrorRecord>,
    /// `(cycle, position in pass)` of any single block update that increased `F`.
    pub block_increase_events: Vec<(usize, usize)>,
}

impl BcdRun {
    pub fn write_cycle_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["s", "F", "psi", "cycle_step_norm", "err_norm", "err_bound_rhs"])?;
        let nan = || "NaN".to_string();
        for rec in &self.trace.records {
            let cyc = self.cycles.get(rec.index).filter(|c| c.cycle == rec.index);
            out.write_record([
                rec.index.to_string(),
                fmt17(rec.objective),
                fmt17(rec.residual),
                rec.step_norm.map_or_else(nan, fmt17),
                cyc.map_or_else(nan, |c| fmt17(c.err_norm)),
                cyc.map_or_else(nan, |c| fmt17(c.bound_rhs())),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_cycle_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_cycle_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
    }
}

enum BlockKind {
    /// Least squares with a precomputed Gram spectrum.
    Quadratic(SpectralGram),
    /// Logistic loss; `f64` is the block Lipschitz constant.
    Logistic(f64),
}

/// Per-block data reused across every update of a run.
pub struct BlockUpdater<'a> {
    inst: &'a ProblemInstance,
    blocks: Vec<BlockKind>,
    inner_tol: f64,
    inner_max_iter: usize,
}

impl<'a> BlockUpdater<'a> {
    pub fn new(
        inst: &'a ProblemInstance,
        inner_tol: f64,
        inner_max_iter: usize,
        allow_weak_blocks: bool,
    ) -> Result<Self> {
        let moduli = inst.block_moduli();
        if !allow_weak_blocks {
            if let Some((k, &g)) = moduli.values.iter().enumerate().find(|(_, g)| !(**g > 0.0)) {
                return Err(Error::NotStronglyConvex { block: k, modulus: g });
            }
        }
        let a = inst.smooth().design();
        let blocks = inst
            .partition()
            .ranges()
            .map(|r| {
                let gram = SpectralGram::new(&column_gram(a, r));
                match inst.smooth().model() {
                    SmoothModel::LeastSquares { .. } => BlockKind::Quadratic(gram),
                    SmoothModel::Logistic { .. } => {
                        BlockKind::Logistic(LIPSCHITZ_INFLATION * 0.25 * gram.max_eigenvalue())
                    }
                }
            })
            .collect();
        Ok(Self {
            inst,
            blocks,
            inner_tol,
            inner_max_iter,
        })
    }

    /// Replaces block `k` of `x` with the minimizer of `F` over that block.
    pub fn update(&self, x: &mut Vector, k: usize) -> Result<()> {
        let part = self.inst.partition();
        part.check_block(k)?;
        check_len(self.inst.dim(), x.len())?;
        let r = part.range(k);
        let a = self.inst.smooth().design();
        let ak = a.columns(r.start, r.len());
        match &self.blocks[k] {
            BlockKind::Quadratic(gram) => {
                // c = A_kᵀ(b − A x + A_k x_k)
                let b = self.inst.smooth().targets();
                let xk = x.rows(r.start, r.len()).into_owned();
                let partial = b - a * &*x + ak * &xk;
                let c = ak.tr_mul(&partial);
                let u = self.solve_quadratic(k, gram, &c, &xk);
                x.rows_mut(r.start, r.len()).copy_from(&u);
            }
            BlockKind::Logistic(lk) => {
                let SmoothModel::Logistic { labels, .. } = self.inst.smooth().model() else {
                    unreachable!("logistic block on a non-logistic model");
                };
                let xk = x.rows(r.start, r.len()).into_owned();
                let mut z = a * &*x;
                let step = 1.0 / lk;
                let mut u = xk.clone();
                for _ in 0..self.inner_max_iter {
                    let resid = Vector::from_fn(z.len(), |i, _| sigmoid(z[i]) - labels[i]);
                    let g = ak.tr_mul(&resid);
                    let mut next = &u - g * step;
                    prox_block_in_place(self.inst.regularizer(), k, next.as_mut_slice(), step, part);
                    let delta = &next - &u;
                    z += ak * &delta;
                    u = next;
                    if delta.norm() <= self.inner_tol * u.norm().max(1.0) {
                        break;
                    }
                }
                x.rows_mut(r.start, r.len()).copy_from(&u);
            }
        }
        Ok(())
    }

    /// Minimizes `½uᵀGu − cᵀu + d_k(u)`.
    fn solve_quadratic(&self, k: usize, gram: &SpectralGram, c: &Vector, warm: &Vector) -> Vector {
        let reg = self.inst.regularizer();
        if c.len() == 1 {
            let g = gram.eigenvalues[0];
            let u = match reg {
                Regularizer::Zero => c[0] / g,
                Regularizer::L1 { lambda } => soft_threshold(c[0], *lambda) / g,
                Regularizer::Group { weights } => soft_threshold(c[0], weights[k]) / g,
                Regularizer::SparseGroup { weights, lambda } => soft_threshold(c[0], lambda + weights[k]) / g,
                Regularizer::Box { lower, upper, lambda } => {
                    let i = self.inst.partition().offsets()[k];
                    (soft_threshold(c[0], *lambda) / g).clamp(lower[i], upper[i])
                }
            };
            return Vector::from_element(1, u);
        }
        let rotated = || gram.eigenvectors.tr_mul(c);
        match reg {
            Regularizer::Zero => gram.shifted_solve_rotated(&rotated(), 0.0),
            Regularizer::Group { weights } if weights[k] == 0.0 => gram.shifted_solve_rotated(&rotated(), 0.0),
            Regularizer::Group { weights } => {
                let w = weights[k];
                if c.norm() <= w {
                    Vector::zeros(c.len())
                } else {
                    let rc = rotated();
                    let mu = secular_shift(&gram.eigenvalues, &rc, w);
                    gram.shifted_solve_rotated(&rc, mu)
                }
            }
            _ => self.inner_prox_gradient(k, gram, c, warm),
        }
    }

    fn inner_prox_gradient(&self, k: usize, gram: &SpectralGram, c: &Vector, warm: &Vector) -> Vector {
        let q =
            &gram.eigenvectors * nalgebra::DMatrix::from_diagonal(&gram.eigenvalues) * gram.eigenvectors.transpose();
        let step = 1.0 / gram.max_eigenvalue();
        let part = self.inst.partition();
        let mut u = warm.clone();
        for _ in 0..self.inner_max_iter {
            let g = &q * &u - c;
            let mut next = &u - g * step;
            prox_block_in_place(self.inst.regularizer(), k, next.as_mut_slice(), step, part);
            let moved = (&next - &u).norm();
            u = next;
            if moved <= self.inner_tol * u.norm().max(1.0) {
                break;
            }
        }
        u
    }
}

/// Solves `‖μ (Λ + μI)⁻¹ c̃‖ = w` for `μ > 0`, given `‖c̃‖ > w > 0`.
///
/// This is the optimality condition `(G + (w/‖u‖)I)u = c` of the group block
/// subproblem, written in `μ = w/‖u‖`. The left side increases monotonically from 0 to
/// `‖c̃‖`, so the root is bracketed and found by Illinois-style regula falsi.
fn secular_shift(eigenvalues: &Vector, rc: &Vector, w: f64) -> f64 {
    let f = |mu: f64| -> f64 {
        let s: f64 = eigenvalues
            .iter()
            .zip(rc.iter())
            .map(|(&l, &c)| {
                let t = c * mu / (l + mu);
                t * t
            })
            .sum();
        s.sqrt() - w
    };
    let cn = rc.norm();
    let lmax = eigenvalues.iter().copied().fold(0.0, f64::max);
    let mut lo = 0.0;
    let mut flo = -w;
    let mut hi = (w * lmax / (cn - w)).max(f64::MIN_POSITIVE) * 1.5;
    let mut fhi = f(hi);
    while fhi < 0.0 {
        lo = hi;
        flo = fhi;
        hi *= 2.0;
        fhi = f(hi);
    }
    let mut side = 0i8;
    for _ in 0..300 {
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        let mut mid = (lo * fhi - hi * flo) / (fhi - flo);
        if !(mid > lo && mid < hi) {
            mid = 0.5 * (lo + hi);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm < 0.0 {
            lo = mid;
            flo = fm;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = mid;
            fhi = fm;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    if flo.abs() < fhi.abs() {
        lo
    } else {
        hi
    }
}

/// Exact minimization of `F` over block `k` with every other block fixed.
pub fn bcd_block_update(x: &Vector, k: usize, inst: &ProblemInstance, inner_tol: f64) -> Result<Vector> {
    inst.partition().check_block(k)?;
    let g = inst.block_moduli().values[k];
    if !(g > 0.0) {
        return Err(Error::NotStronglyConvex { block: k, modulus: g });
    }
    let updater = BlockUpdater::new(inst, inner_tol, BcdConfig::default().inner_max_iter, true)?;
    let mut out = x.clone();
    updater.update(&mut out, k)?;
    Ok(out)
}

/// Applies block updates in `schedule` order; returns the final point and every intermediate.
pub fn bcd_cycle(
    x: &Vector,
    schedule: &[usize],
    inst: &ProblemInstance,
    inner_tol: f64,
) -> Result<(Vector, Vec<Vector>)> {
    let updater = BlockUpdater::new(inst, inner_tol, BcdConfig::default().inner_max_iter, false)?;
    cycle_with(&updater, x, schedule)
}

fn cycle_with(updater: &BlockUpdater<'_>, x: &Vector, schedule: &[usize]) -> Result<(Vector, Vec<Vector>)> {
    let mut cur = x.clone();
    let mut inter = Vec::with_capacity(schedule.len());
    for &k in schedule {
        updater.update(&mut cur, k)?;
        inter.push(cur.clone());
    }
    Ok((cur, inter))
}

/// Builds `e^s` from a cyclic pass starting at `start` and checks the prox identity and the
/// `K(L+1)` bound.
pub fn reconstruct_aps_error(
    cycle: usize,
    start: &Vector,
    intermediates: &[Vector],
    inst: &ProblemInstance,
) -> Result<CycleErrorRecord> {
    let part = inst.partition();
    let nblocks = part.num_blocks();
    check_len(nblocks, intermediates.len())?;
    let smooth = inst.smooth();
    let g0 = smooth.gradient(start)?;
    let mut e = Vector::zeros(inst.dim());
    for (k, xk) in intermediates.iter().enumerate() {
        let r = part.range(k);
        let gk = smooth.block_gradient(xk, k, part)?;
        for (j, i) in r.enumerate() {
            e[i] = xk[i] - start[i] + g0[i] - gk[j];
        }
    }
    let end = &intermediates[nblocks - 1];
    let arg = start - &g0 + &e;
    let p = prox_regularizer(&arg, inst.regularizer(), 1.0, part)?.point;
    let defect = (&p - end).norm();
    if !(defect <= RECONSTRUCTION_DEFECT_LIMIT) {
        return Err(Error::Reconstruction {
            cycle,
            defect,
            limit: RECONSTRUCTION_DEFECT_LIMIT,
        });
    }
    Ok(CycleErrorRecord {
        cycle,
        err_norm: e.norm(),
        error: e.iter().copied().collect(),
        cycle_step_norm: (end - start).norm(),
        prox_defect: defect,
        kappa: nblocks as f64 * (inst.lipschitz() + 1.0),
    })
}

/// Runs BCD from `x0` until `ψ(x^{sK}) ≤ tol` or `max_cycles` passes.
pub fn run_bcd(inst: &ProblemInstance, config: &BcdConfig, x0: &Vector) -> Result<BcdRun> {
    check_len(inst.dim(), x0.len())?;
    let nblocks = inst.partition().num_blocks();
    config.order.validate(nblocks)?;
    if !inst.is_feasible(x0) {
        return Err(Error::Infeasible);
    }
    let updater = BlockUpdater::new(inst, config.inner_tol, config.inner_max_iter, config.allow_weak_blocks)?;
    let pass = config.order.pass(nblocks);
    let cyclic = matches!(config.order, UpdateOrder::Cyclic);

    let mut trace = IterationTrace::new(config.iterate_capacity, x0);
    let mut cycles = Vec::new();
    let mut block_increase_events = Vec::new();
    let mut x = x0.clone();
    let mut s = 0;
    loop {
        let f = inst.objective_value(&x)?;
        if !f.is_finite() {
            trace.final_point = x;
            return Err(Error::Diverged {
                iteration: s,
                trace: Box::new(trace),
            });
        }
        let g = inst.smooth().gradient(&x)?;
        let psi = residual_psi_with(&x, &g, inst)?;
        trace.store_iterate(s, &x);
        if psi <= config.tol || s == config.max_cycles {
            trace.termination = if psi <= config.tol {
                Termination::Converged
            } else {
                Termination::MaxIterations
            };
            trace.push(IterationRecord {
                index: s,
                objective: f,
                residual: psi,
                step_norm: None,
                err_norm: None,
                alpha: None,
            });
            break;
        }
        let (next, inter) = cycle_with(&updater, &x, &pass)?;
        let mut prev_f = f;
        for (pos, xi) in inter.iter().enumerate() {
            let fi = inst.objective_value(xi)?;
            if fi > prev_f + 1e-12 * (1.0 + prev_f.abs()) {
                block_increase_events.push((s, pos));
            }
            prev_f = fi;
        }
        let err_norm = if cyclic {
            let rec = reconstruct_aps_error(s, &x, &inter, inst)?;
            let n = rec.err_norm;
            cycles.push(rec);
            Some(n)
        } else {
            None
        };
        trace.push(IterationRecord {
            index: s,
            objective: f,
            residual: psi,
            step_norm: Some((&next - &x).norm()),
            err_norm,
            alpha: None,
        });
        x = next;
        s += 1;
    }
    trace.final_point = x;
    Ok(BcdRun {
        trace,
        cycles,
        block_increase_events,
    })
}
