use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::partition::BlockPartition;
use crate::Vector;

/// Block-separable non-smooth part `f1(x) = Σ_k d_k(x_k)`.
///
/// The group weights are indexed by block. `Box` adds the indicator of
/// `[lower, upper]` to an ℓ1 term (weight `lambda`, possibly zero); it is the only
/// way a constraint set enters a problem, and it never combines with group terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regularizer {
    Zero,
    L1 {
        lambda: f64,
    },
    Group {
        #[serde(rename = "group_weights")]
        weights: Vec<f64>,
    },
    SparseGroup {
        #[serde(rename = "group_weights")]
        weights: Vec<f64>,
        lambda: f64,
    },
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
        #[serde(default)]
        lambda: f64,
    },
}

fn check_weight(name: &str, w: f64) -> Result<()> {
    if w.is_finite() && w >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidRegularizer(format!(
            "{name} = {w} must be finite and >= 0"
        )))
    }
}

impl Regularizer {
    pub fn validate(&self, partition: &BlockPartition) -> Result<()> {
        match self {
            Self::Zero => Ok(()),
            Self::L1 { lambda } => check_weight("lambda", *lambda),
            Self::Group { weights } => {
                check_len(partition.num_blocks(), weights.len())?;
                weights.iter().try_for_each(|&w| check_weight("group weight", w))
            }
            Self::SparseGroup { weights, lambda } => {
                check_weight("lambda", *lambda)?;
                check_len(partition.num_blocks(), weights.len())?;
                weights.iter().try_for_each(|&w| check_weight("group weight", w))
            }
            Self::Box { lower, upper, lambda } => {
                check_weight("lambda", *lambda)?;
                check_len(partition.dim(), lower.len())?;
                check_len(partition.dim(), upper.len())?;
                for (i, (l, u)) in lower.iter().zip(upper).enumerate() {
                    if l.is_nan() || u.is_nan() || l > u {
                        return Err(Error::InvalidRegularizer(format!(
                            "box bounds at {i}: lower {l} > upper {u}"
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// `d_k(x_k)`; `+∞` when a box bound is violated.
    pub fn block_value(&self, k: usize, xk: &[f64], partition: &BlockPartition) -> f64 {
        let l1 = || xk.iter().map(|v| v.abs()).sum::<f64>();
        let l2 = || xk.iter().map(|v| v * v).sum::<f64>().sqrt();
        match self {
            Self::Zero => 0.0,
            Self::L1 { lambda } => lambda * l1(),
            Self::Group { weights } => weights[k] * l2(),
            Self::SparseGroup { weights, lambda } => weights[k] * l2() + lambda * l1(),
            Self::Box { lower, upper, lambda } => {
                let r = partition.range(k);
                let feasible = xk
                    .iter()
                    .zip(&lower[r.clone()])
                    .zip(&upper[r])
                    .all(|((x, l), u)| l <= x && x <= u);
                if feasible {
                    lambda * l1()
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `f1(x) = Σ_k d_k(x_k)`, summed block by block in order.
    pub fn value(&self, x: &Vector, partition: &BlockPartition) -> f64 {
        let xs = x.as_slice();
        partition
            .ranges()
            .enumerate()
            .map(|(k, r)| self.block_value(k, &xs[r], partition))
            .sum()
    }

    pub fn is_feasible(&self, x: &Vector) -> bool {
        match self {
            Self::Box { lower, upper, .. } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| l <= v && v <= u),
            _ => true,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero)
    }
}
