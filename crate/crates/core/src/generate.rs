//! Seeded random instances: LASSO, group LASSO and logistic group LASSO.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::linalg::{column_gram, sym_extreme_eigenvalues};
use crate::partition::BlockPartition;
use crate::problem::ProblemInstance;
use crate::regularizer::Regularizer;
use crate::smooth::{sigmoid, SmoothObjective};
use crate::{Matrix, Vector};

/// Fraction of the smallest penalty that zeroes the solution, used when none is given.
pub const DEFAULT_PENALTY_FRACTION: f64 = 0.1;
/// Block Gram matrices with `λ_min/λ_max` below this are redrawn.
const BLOCK_CONDITION_FLOOR: f64 = 1e-8;
const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoParams {
    pub n: usize,
    pub m: usize,
    pub k_true: usize,
    #[serde(default)]
    pub noise_sigma: f64,
    /// Defaults to `0.1·‖Aᵀb‖∞`.
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Use `A = I` (requires `n = m`).
    #[serde(default)]
    pub identity_design: bool,
    /// Pairwise correlation `c ∈ [0, 1)` between design columns before normalization.
    #[serde(default)]
    pub correlation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupLassoParams {
    pub block_sizes: Vec<usize>,
    pub m: usize,
    pub active_blocks: usize,
    #[serde(default)]
    pub noise_sigma: f64,
    /// Defaults to `0.1·max_J(‖A_Jᵀb‖/√n_J)·√n_J`.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    /// Pairwise correlation `c ∈ [0, 1)` between design columns.
    #[serde(default)]
    pub correlation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub block_sizes: Vec<usize>,
    pub m: usize,
    pub active_blocks: usize,
    /// Multiplies the planted coefficients; 0 makes every label a fair coin.
    #[serde(default = "one")]
    pub signal_scale: f64,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

fn one() -> f64 {
    1.0
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn gaussian_matrix(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Matrix {
    let data: Vec<f64> = (0..rows * cols).map(|_| scale * gaussian(rng)).collect();
    Matrix::from_vec(rows, cols, data)
}

/// `√(1−c)·Z + √c·z1ᵀ`: Gaussian columns with pairwise correlation `c`.
fn correlated_matrix(rows: usize, cols: usize, scale: f64, c: f64, rng: &mut ChaCha8Rng) -> Matrix {
    let mut a = gaussian_matrix(rows, cols, scale * (1.0 - c).sqrt(), rng);
    if c > 0.0 {
        let shared = Vector::from_fn(rows, |_, _| scale * c.sqrt() * gaussian(rng));
        for mut col in a.column_iter_mut() {
            col += &shared;
        }
    }
    a
}

fn check_correlation(c: f64) -> Result<()> {
    if !(0.0..1.0).contains(&c) {
        return Err(Error::InvalidConfig(format!("correlation must lie in [0, 1), got {c}")));
    }
    Ok(())
}

/// Nonzero planted coefficient with magnitude at least one.
fn planted_value(rng: &mut ChaCha8Rng) -> f64 {
    let g = gaussian(rng);
    g.signum() * (1.0 + g.abs())
}

fn vec_json(v: &Vector) -> serde_json::Value {
    json!(v.iter().copied().collect::<Vec<f64>>())
}

pub fn generate_lasso(p: &LassoParams, seed: u64) -> Result<ProblemInstance> {
    if p.n == 0 || p.m == 0 {
        return Err(Error::InvalidConfig("n and m must be positive".into()));
    }
    if p.k_true == 0 || p.k_true > p.n {
        return Err(Error::InvalidConfig(format!(
            "k_true must lie in 1..={}, got {}",
            p.n, p.k_true
        )));
    }
    if p.lambda.is_some_and(|l| !(l >= 0.0 && l.is_finite())) || !(p.noise_sigma >= 0.0) {
        return Err(Error::InvalidConfig(
            "lambda and noise_sigma must be nonnegative".into(),
        ));
    }
    if p.identity_design && p.n != p.m {
        return Err(Error::InvalidConfig("identity design requires n = m".into()));
    }
    check_correlation(p.correlation)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = if p.identity_design {
        Matrix::identity(p.m, p.n)
    } else {
        let mut a = correlated_matrix(p.m, p.n, 1.0, p.correlation, &mut rng);
        for mut col in a.column_iter_mut() {
            while col.norm() == 0.0 {
                col.iter_mut().for_each(|v| *v = gaussian(&mut rng));
            }
            let norm = col.norm();
            col /= norm;
        }
        a
    };
    let mut x_true = Vector::zeros(p.n);
    let mut support = sample(&mut rng, p.n, p.k_true).into_vec();
    support.sort_unstable();
    for &i in &support {
        x_true[i] = planted_value(&mut rng);
    }
    let noise = Vector::from_fn(p.m, |_, _| p.noise_sigma * gaussian(&mut rng));
    let b = &a * &x_true + noise;
    let lambda_max = (a.transpose() * &b).amax();
    let lambda = p.lambda.unwrap_or(DEFAULT_PENALTY_FRACTION * lambda_max);
    let smooth = SmoothObjective::least_squares(a, b)?;
    Ok(
        ProblemInstance::new(smooth, Regularizer::L1 { lambda }, BlockPartition::unit(p.n)?)?
            .with_meta("generator", json!("lasso"))
            .with_meta("seed", json!(seed))
            .with_meta("lambda", json!(lambda))
            .with_meta("lambda_default", json!(p.lambda.is_none()))
            .with_meta("x_true", vec_json(&x_true)),
    )
}

fn block_partition(sizes: &[usize], m: usize) -> Result<BlockPartition> {
    let partition = BlockPartition::new(sizes.to_vec())?;
    if m < partition.max_block_size() {
        return Err(Error::InvalidConfig(format!(
            "m = {m} is below the largest block size {}, blocks cannot have full column rank",
            partition.max_block_size()
        )));
    }
    Ok(partition)
}

fn check_weights(weights: &Option<Vec<f64>>, k: usize) -> Result<()> {
    if let Some(w) = weights {
        if w.len() != k || w.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig(format!("need {k} finite nonnegative weights")));
        }
    }
    Ok(())
}

/// Gaussian design with entries of variance `1/m`; blocks whose columns are nearly
/// dependent are redrawn.
fn block_design(partition: &BlockPartition, m: usize, correlation: f64, rng: &mut ChaCha8Rng) -> Result<Matrix> {
    let scale = 1.0 / (m as f64).sqrt();
    let mut a = correlated_matrix(m, partition.dim(), scale, correlation, rng);
    for (k, range) in partition.ranges().enumerate() {
        let mut tries = 0;
        loop {
            let (lo, hi) = sym_extreme_eigenvalues(&column_gram(&a, range.clone()));
            if hi > 0.0 && lo > BLOCK_CONDITION_FLOOR * hi {
                break;
            }
            tries += 1;
            if tries > MAX_REDRAWS {
                return Err(Error::InvalidConfig(format!(
                    "could not draw full-rank columns for block {k}"
                )));
            }
            let fresh = gaussian_matrix(m, range.len(), scale, rng);
            a.columns_mut(range.start, range.len()).copy_from(&fresh);
        }
    }
    Ok(a)
}

fn planted_blocks(
    partition: &BlockPartition,
    active: usize,
    scale: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Vector, Vec<usize>)> {
    let k = partition.num_blocks();
    if active > k {
        return Err(Error::InvalidConfig(format!(
            "{active} active blocks requested, only {k} exist"
        )));
    }
    let mut chosen = sample(rng, k, active).into_vec();
    chosen.sort_unstable();
    let mut x = Vector::zeros(partition.dim());
    for &j in &chosen {
        for i in partition.range(j) {
            x[i] = scale * planted_value(rng);
        }
    }
    Ok((x, chosen))
}

/// `c·max_J(‖g_J‖/√n_J)·√n_J`: the same fraction of the zeroing threshold in every block.
fn default_group_weights(g: &Vector, partition: &BlockPartition) -> Vec<f64> {
    let top = partition
        .ranges()
        .map(|r| g.rows(r.start, r.len()).norm() / (r.len() as f64).sqrt())
        .fold(0.0, f64::max);
    partition
        .sizes()
        .iter()
        .map(|&s| DEFAULT_PENALTY_FRACTION * top * (s as f64).sqrt())
        .collect()
}

pub fn generate_group_lasso(p: &GroupLassoParams, seed: u64) -> Result<ProblemInstance> {
    let partition = block_partition(&p.block_sizes, p.m)?;
    check_weights(&p.weights, partition.num_blocks())?;
    if !(p.noise_sigma >= 0.0) {
        return Err(Error::InvalidConfig("noise_sigma must be nonnegative".into()));
    }
    check_correlation(p.correlation)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = block_design(&partition, p.m, p.correlation, &mut rng)?;
    let (x_true, active) = planted_blocks(&partition, p.active_blocks, 1.0, &mut rng)?;
    let noise = Vector::from_fn(p.m, |_, _| p.noise_sigma * gaussian(&mut rng));
    let b = &a * &x_true + noise;
    let weights = match &p.weights {
        Some(w) => w.clone(),
        None => default_group_weights(&(a.transpose() * &b), &partition),
    };
    let smooth = SmoothObjective::least_squares(a, b)?;
    Ok(ProblemInstance::new(
        smooth,
        Regularizer::Group {
            weights: weights.clone(),
        },
        partition,
    )?
    .with_meta("generator", json!("group_lasso"))
    .with_meta("seed", json!(seed))
    .with_meta("weights_default", json!(p.weights.is_none()))
    .with_meta("active_blocks", json!(active))
    .with_meta("x_true", vec_json(&x_true)))
}

pub fn generate_logistic_group_lasso(p: &LogisticParams, seed: u64) -> Result<ProblemInstance> {
    let partition = block_partition(&p.block_sizes, p.m)?;
    check_weights(&p.weights, partition.num_blocks())?;
    if !(p.signal_scale >= 0.0 && p.signal_scale.is_finite()) {
        return Err(Error::InvalidConfig(
            "signal_scale must be finite and nonnegative".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = gaussian_matrix(p.m, partition.dim(), 1.0, &mut rng);
    let (x_true, active) = planted_blocks(&partition, p.active_blocks, p.signal_scale, &mut rng)?;
    let margins = &a * &x_true;
    let labels = Vector::from_fn(p.m, |i, _| if rng.random_bool(sigmoid(margins[i])) { 1.0 } else { 0.0 });
    let weights = match &p.weights {
        Some(w) => w.clone(),
        None => default_group_weights(&(a.transpose() * labels.add_scalar(-0.5)), &partition),
    };
    let smooth = SmoothObjective::logistic(a, labels)?;
    Ok(ProblemInstance::new(smooth, Regularizer::Group { weights }, partition)?
        .with_meta("generator", json!("logistic_group_lasso"))
        .with_meta("seed", json!(seed))
        .with_meta("weights_default", json!(p.weights.is_none()))
        .with_meta("active_blocks", json!(active))
        .with_meta("x_true", vec_json(&x_true)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::reference_solution;
    use crate::prox::{residual_psi, soft_threshold};

    fn lasso(n: usize, m: usize) -> LassoParams {
        LassoParams {
            n,
            m,
            k_true: 3.min(n),
            noise_sigma: 0.01,
            lambda: None,
            identity_design: false,
            correlation: 0.0,
        }
    }

    #[test]
    fn lasso_columns_unit_norm() {
        let inst = generate_lasso(&lasso(20, 12), 1).unwrap();
        for c in inst.smooth().design().column_iter() {
            assert!((c.norm() - 1.0).abs() < 1e-12);
        }
        let Regularizer::L1 { lambda } = inst.regularizer() else {
            panic!()
        };
        let atb = (inst.smooth().design().transpose() * inst.smooth().targets()).amax();
        assert!((lambda - 0.1 * atb).abs() <= 1e-15 * atb);
        assert_eq!(inst.meta()["lambda_default"], json!(true));
    }

    #[test]
    fn lasso_identity_solution_is_shrinkage() {
        let p = LassoParams {
            noise_sigma: 0.0,
            lambda: Some(0.4),
            identity_design: true,
            ..lasso(6, 6)
        };
        let inst = generate_lasso(&p, 9).unwrap();
        let b = inst.smooth().targets().clone();
        let x = b.map(|v| soft_threshold(v, 0.4));
        assert!(residual_psi(&x, &inst).unwrap() < 1e-14);
    }

    #[test]
    fn lasso_zero_penalty_is_least_squares() {
        let p = LassoParams {
            lambda: Some(0.0),
            ..lasso(5, 12)
        };
        let inst = generate_lasso(&p, 4).unwrap();
        let a = inst.smooth().design();
        let x = (a.transpose() * a)
            .cholesky()
            .unwrap()
            .solve(&(a.transpose() * inst.smooth().targets()));
        assert!(residual_psi(&x, &inst).unwrap() <= 1e-8);
    }

    #[test]
    fn lasso_invalid() {
        assert!(generate_lasso(
            &LassoParams {
                k_true: 0,
                ..lasso(5, 5)
            },
            0
        )
        .is_err());
        assert!(generate_lasso(
            &LassoParams {
                k_true: 6,
                ..lasso(5, 5)
            },
            0
        )
        .is_err());
        assert!(generate_lasso(
            &LassoParams {
                lambda: Some(-1.0),
                ..lasso(5, 5)
            },
            0
        )
        .is_err());
        assert!(generate_lasso(
            &LassoParams {
                identity_design: true,
                ..lasso(5, 4)
            },
            0
        )
        .is_err());
        assert!(generate_lasso(
            &LassoParams {
                correlation: 1.0,
                ..lasso(5, 4)
            },
            0
        )
        .is_err());
    }

    #[test]
    fn seeds_are_deterministic() {
        let a = generate_lasso(&lasso(15, 10), 77).unwrap().to_json().unwrap();
        let b = generate_lasso(&lasso(15, 10), 77).unwrap().to_json().unwrap();
        let c = generate_lasso(&lasso(15, 10), 78).unwrap().to_json().unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let g = GroupLassoParams {
            block_sizes: vec![2, 3, 2],
            m: 8,
            active_blocks: 1,
            noise_sigma: 0.0,
            weights: None,
            correlation: 0.0,
        };
        assert_eq!(
            generate_group_lasso(&g, 5).unwrap().to_json().unwrap(),
            generate_group_lasso(&g, 5).unwrap().to_json().unwrap()
        );
        let l = LogisticParams {
            block_sizes: vec![2, 2],
            m: 30,
            active_blocks: 1,
            signal_scale: 1.0,
            weights: None,
        };
        assert_eq!(
            generate_logistic_group_lasso(&l, 5).unwrap().to_json().unwrap(),
            generate_logistic_group_lasso(&l, 5).unwrap().to_json().unwrap()
        );
    }

    #[test]
    fn group_blocks_full_rank() {
        let g = GroupLassoParams {
            block_sizes: vec![5; 4],
            m: 5,
            active_blocks: 2,
            noise_sigma: 0.0,
            weights: None,
            correlation: 0.0,
        };
        let inst = generate_group_lasso(&g, 3).unwrap();
        assert!(inst.block_moduli().min() > 0.0);
        assert!(generate_group_lasso(&GroupLassoParams { m: 4, ..g.clone() }, 3).is_err());
        assert!(generate_group_lasso(
            &GroupLassoParams {
                active_blocks: 5,
                ..g.clone()
            },
            3
        )
        .is_err());
        assert!(generate_group_lasso(
            &GroupLassoParams {
                weights: Some(vec![1.0]),
                ..g
            },
            3
        )
        .is_err());
    }

    #[test]
    fn group_support_recovered() {
        let g = GroupLassoParams {
            block_sizes: vec![3; 5],
            m: 40,
            active_blocks: 1,
            noise_sigma: 0.0,
            weights: None,
            correlation: 0.0,
        };
        let inst = generate_group_lasso(&g, 11).unwrap();
        let active: Vec<usize> = serde_json::from_value(inst.meta()["active_blocks"].clone()).unwrap();
        let r = reference_solution(&inst, 1e-12, 200_000).unwrap();
        for (k, range) in inst.partition().ranges().enumerate() {
            let nz = r.x_star.rows(range.start, range.len()).norm() > 1e-8;
            assert_eq!(nz, active.contains(&k), "block {k}");
        }
    }

    #[test]
    fn logistic_fair_coin_at_zero() {
        let l = LogisticParams {
            block_sizes: vec![2, 3],
            m: 25,
            active_blocks: 2,
            signal_scale: 0.0,
            weights: None,
        };
        let inst = generate_logistic_group_lasso(&l, 2).unwrap();
        let f = inst.smooth().value(&Vector::zeros(5)).unwrap();
        assert!((f - 25.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!(inst.smooth().targets().iter().all(|&y| y == 0.0 || y == 1.0));
    }

    #[test]
    fn logistic_heavy_weights_zero_solution() {
        let l = LogisticParams {
            block_sizes: vec![2, 2],
            m: 30,
            active_blocks: 1,
            signal_scale: 1.0,
            weights: Some(vec![1e6, 1e6]),
        };
        let inst = generate_logistic_group_lasso(&l, 8).unwrap();
        let r = reference_solution(&inst, 1e-12, 1000).unwrap();
        assert_eq!(r.x_star.norm(), 0.0);
    }
}
