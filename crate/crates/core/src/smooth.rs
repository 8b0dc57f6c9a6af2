//! Smooth parts `f2`: least squares `½‖Ax − b‖²` and the logistic log-loss
//! `Σᵢ log(1 + exp(aᵢᵀx)) − bᵢ aᵢᵀx`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{self, column_gram};
use crate::partition::BlockPartition;
use crate::{Matrix, Vector};

/// Multiplier applied to the power-iteration estimate so `L` is a true upper bound.
pub const LIPSCHITZ_INFLATION: f64 = 1.01;

/// Relative eigenvalue threshold below which a block Gram matrix is treated as singular.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum SmoothModel {
    LeastSquares {
        a: Matrix,
        b: Vector,
    },
    /// Rows of `a` are the feature vectors `aᵢᵀ`; labels are 0 or 1.
    Logistic {
        a: Matrix,
        labels: Vector,
    },
}

/// A smooth loss together with its cached gradient Lipschitz constant.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothObjective {
    model: SmoothModel,
    lipschitz: f64,
}

/// Per-block strong convexity moduli of `f2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockModuli {
    /// `γ_k` such that `f2(x + E_kΔ) − f2(x) − ⟨∇_k f2(x), Δ⟩ ≥ (γ_k/2)‖Δ‖²`.
    pub values: Vec<f64>,
    /// Set for the logistic model: no global block modulus exists and any BCD
    /// rate statement only holds on bounded level sets.
    pub level_set_conditional: bool,
}

impl BlockModuli {
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl SmoothObjective {
    pub fn least_squares(a: Matrix, b: Vector) -> Result<Self> {
        check_len(a.nrows(), b.len())?;
        let lipschitz = lipschitz_of(&a, 1.0)?;
        Ok(Self {
            model: SmoothModel::LeastSquares { a, b },
            lipschitz,
        })
    }

    pub fn logistic(a: Matrix, labels: Vector) -> Result<Self> {
        check_len(a.nrows(), labels.len())?;
        if let Some(bad) = labels.iter().find(|&&l| l != 0.0 && l != 1.0) {
            return Err(Error::DegenerateObjective(format!("label {bad} is not 0 or 1")));
        }
        let lipschitz = lipschitz_of(&a, 0.25)?;
        Ok(Self {
            model: SmoothModel::Logistic { a, labels },
            lipschitz,
        })
    }

    pub fn model(&self) -> &SmoothModel {
        &self.model
    }

    pub fn design(&self) -> &Matrix {
        match &self.model {
            SmoothModel::LeastSquares { a, .. } | SmoothModel::Logistic { a, .. } => a,
        }
    }

    /// Right-hand side `b` or the label vector.
    pub fn targets(&self) -> &Vector {
        match &self.model {
            SmoothModel::LeastSquares { b, .. } => b,
            SmoothModel::Logistic { labels, .. } => labels,
        }
    }

    pub fn is_least_squares(&self) -> bool {
        matches!(self.model, SmoothModel::LeastSquares { .. })
    }

    pub fn dim(&self) -> usize {
        self.design().ncols()
    }

    pub fn num_samples(&self) -> usize {
        self.design().nrows()
    }

    /// Cached Lipschitz constant of `∇f2`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn value(&self, x: &Vector) -> Result<f64> {
        check_len(self.dim(), x.len())?;
        Ok(match &self.model {
            SmoothModel::LeastSquares { a, b } => 0.5 * (a * x - b).norm_squared(),
            SmoothModel::Logistic { a, labels } => (a * x)
                .iter()
                .zip(labels.iter())
                .map(|(&z, &l)| softplus(z) - l * z)
                .sum(),
        })
    }

    pub fn gradient(&self, x: &Vector) -> Result<Vector> {
        check_len(self.dim(), x.len())?;
        Ok(match &self.model {
            SmoothModel::LeastSquares { a, b } => a.tr_mul(&(a * x - b)),
            SmoothModel::Logistic { a, labels } => {
                let mut r = a * x;
                r.iter_mut().zip(labels.iter()).for_each(|(z, &l)| *z = sigmoid(*z) - l);
                a.tr_mul(&r)
            }
        })
    }

    /// Slice of the gradient on block `k`, from `A_kᵀ` times the full-sample residual.
    pub fn block_gradient(&self, x: &Vector, k: usize, partition: &BlockPartition) -> Result<Vector> {
        check_len(self.dim(), x.len())?;
        partition.check_block(k)?;
        let r = partition.range(k);
        let a = self.design();
        let mut resid = a * x;
        match &self.model {
            SmoothModel::LeastSquares { b, .. } => resid -= b,
            SmoothModel::Logistic { labels, .. } => resid
                .iter_mut()
                .zip(labels.iter())
                .for_each(|(z, &l)| *z = sigmoid(*z) - l),
        }
        Ok(a.columns(r.start, r.len()).tr_mul(&resid))
    }

    /// `γ_k = λ_min(A_kᵀA_k)` for least squares; zeros with the level-set flag for logistic.
    pub fn block_strong_convexity(&self, partition: &BlockPartition) -> Result<BlockModuli> {
        check_len(self.dim(), partition.dim())?;
        match &self.model {
            SmoothModel::LeastSquares { a, .. } => {
                let values = partition
                    .ranges()
                    .map(|r| {
                        let (lo, hi) = linalg::sym_extreme_eigenvalues(&column_gram(a, r));
                        if lo <= RANK_TOL * hi.max(f64::MIN_POSITIVE) {
                            0.0
                        } else {
                            lo
                        }
                    })
                    .collect();
                Ok(BlockModuli {
                    values,
                    level_set_conditional: false,
                })
            }
            SmoothModel::Logistic { .. } => Ok(BlockModuli {
                values: vec![0.0; partition.num_blocks()],
                level_set_conditional: true,
            }),
        }
    }
}

fn lipschitz_of(a: &Matrix, curvature_bound: f64) -> Result<f64> {
    let top = linalg::gram_spectral_radius(a);
    if !(top > 0.0) || !top.is_finite() {
        return Err(Error::DegenerateObjective("design matrix is zero".into()));
    }
    Ok(LIPSCHITZ_INFLATION * curvature_bound * top)
}

/// Lipschitz constant of `∇f2`: `1.01·λ_max(AᵀA)`, with the extra `¼` for logistic loss.
pub fn lipschitz_constant(obj: &SmoothObjective) -> f64 {
    obj.lipschitz()
}
