//! Proximity operators `prox_{αf1}(v) = argmin_y α f1(y) + ½‖y − v‖²`, the proximal
//! gradient vector and the residual ψ.

use crate::error::{check_len, Error, Result};
use crate::partition::BlockPartition;
use crate::problem::ProblemInstance;
use crate::regularizer::Regularizer;
use crate::Vector;

/// Output of [`prox_regularizer`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProxResult {
    pub point: Vector,
    pub step: f64,
}

fn check_step(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidStep(alpha))
    }
}

/// Scalar soft threshold `sign(v)·max(|v| − t, 0)`.
#[inline]
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Shrinkage operator: prox of `t‖·‖₁`.
pub fn prox_l1(v: &Vector, t: f64) -> Result<Vector> {
    if !(t >= 0.0) {
        return Err(Error::InvalidThreshold(t));
    }
    Ok(v.map(|x| soft_threshold(x, t)))
}

/// Block shrinkage in place: scales `v` by `1 − t/‖v‖`, or zeroes it when `‖v‖ ≤ t`.
fn shrink_block(v: &mut [f64], t: f64) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= t {
        v.iter_mut().for_each(|x| *x = 0.0);
    } else if t > 0.0 {
        let scale = 1.0 - t / norm;
        v.iter_mut().for_each(|x| *x *= scale);
    }
}

/// Prox of `α Σ_J w_J ‖y_J‖`.
pub fn prox_group(v: &Vector, weights: &[f64], alpha: f64, partition: &BlockPartition) -> Result<Vector> {
    check_step(alpha)?;
    check_len(partition.dim(), v.len())?;
    check_len(partition.num_blocks(), weights.len())?;
    if let Some(&w) = weights.iter().find(|w| !(**w >= 0.0)) {
        return Err(Error::InvalidThreshold(w));
    }
    let mut out = v.clone();
    for (k, r) in partition.ranges().enumerate() {
        shrink_block(&mut out.as_mut_slice()[r], alpha * weights[k]);
    }
    Ok(out)
}

/// Prox of `α(Σ_J w_J ‖y_J‖ + λ‖y‖₁)`, computed as group shrinkage of the ℓ1 shrinkage.
pub fn prox_sparse_group(
    v: &Vector,
    weights: &[f64],
    lambda: f64,
    alpha: f64,
    partition: &BlockPartition,
) -> Result<Vector> {
    check_step(alpha)?;
    let shrunk = prox_l1(v, alpha * lambda)?;
    prox_group(&shrunk, weights, alpha, partition)
}

/// Prox of `α d_k` applied to one block, in place.
pub fn prox_block_in_place(reg: &Regularizer, k: usize, vk: &mut [f64], alpha: f64, partition: &BlockPartition) {
    match reg {
        Regularizer::Zero => {}
        Regularizer::L1 { lambda } => vk.iter_mut().for_each(|x| *x = soft_threshold(*x, alpha * lambda)),
        Regularizer::Group { weights } => shrink_block(vk, alpha * weights[k]),
        Regularizer::SparseGroup { weights, lambda } => {
            vk.iter_mut().for_each(|x| *x = soft_threshold(*x, alpha * lambda));
            shrink_block(vk, alpha * weights[k]);
        }
        Regularizer::Box { lower, upper, lambda } => {
            let off = partition.offsets()[k];
            for (i, x) in vk.iter_mut().enumerate() {
                *x = soft_threshold(*x, alpha * lambda).clamp(lower[off + i], upper[off + i]);
            }
        }
    }
}

/// Prox of `α f1` for any regularizer variant (box: shrink then clamp).
pub fn prox_regularizer(v: &Vector, reg: &Regularizer, alpha: f64, partition: &BlockPartition) -> Result<ProxResult> {
    check_step(alpha)?;
    check_len(partition.dim(), v.len())?;
    let point = match reg {
        Regularizer::Zero => v.clone(),
        Regularizer::L1 { lambda } => prox_l1(v, alpha * lambda)?,
        Regularizer::Group { weights } => prox_group(v, weights, alpha, partition)?,
        Regularizer::SparseGroup { weights, lambda } => prox_sparse_group(v, weights, *lambda, alpha, partition)?,
        Regularizer::Box { .. } => {
            let mut out = v.clone();
            for (k, r) in partition.ranges().enumerate() {
                prox_block_in_place(reg, k, &mut out.as_mut_slice()[r], alpha, partition);
            }
            out
        }
    };
    Ok(ProxResult { point, step: alpha })
}

/// One forward-backward step `prox_{αf1}(x − α·g)` for a given gradient `g`.
pub fn forward_backward(x: &Vector, grad: &Vector, alpha: f64, inst: &ProblemInstance) -> Result<Vector> {
    let arg = x - grad * alpha;
    Ok(prox_regularizer(&arg, inst.regularizer(), alpha, inst.partition())?.point)
}

/// Proximal gradient `(x − prox_{αf1}(x − α∇f2(x)))/α` from a precomputed gradient.
pub fn proximal_gradient_with(x: &Vector, grad: &Vector, alpha: f64, inst: &ProblemInstance) -> Result<Vector> {
    // prox of the zero function is the identity, so the difference quotient is the gradient itself.
    if inst.regularizer().is_zero() {
        check_step(alpha)?;
        return Ok(grad.clone());
    }
    let p = forward_backward(x, grad, alpha, inst)?;
    Ok((x - p) / alpha)
}

/// Proximal gradient vector `∇̃F(x, α)`.
pub fn proximal_gradient(x: &Vector, alpha: f64, inst: &ProblemInstance) -> Result<Vector> {
    check_step(alpha)?;
    let g = inst.smooth().gradient(x)?;
    proximal_gradient_with(x, &g, alpha, inst)
}

/// `ψ(x) = ‖x − prox_{f1}(x − ∇f2(x))‖` from a precomputed gradient.
pub fn residual_psi_with(x: &Vector, grad: &Vector, inst: &ProblemInstance) -> Result<f64> {
    Ok(proximal_gradient_with(x, grad, 1.0, inst)?.norm())
}

/// Optimality residual `ψ(x) = ‖∇̃F(x, 1)‖`; zero exactly at minimizers.
pub fn residual_psi(x: &Vector, inst: &ProblemInstance) -> Result<f64> {
    Ok(proximal_gradient(x, 1.0, inst)?.norm())
}
