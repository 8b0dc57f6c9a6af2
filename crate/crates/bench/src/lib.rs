//! Fixed instances shared by the solver benchmarks.

use proxsplit::generate::{generate_group_lasso, generate_lasso, GroupLassoParams, LassoParams};
use proxsplit::ProblemInstance;

pub fn lasso_fixture(n: usize, m: usize, seed: u64) -> ProblemInstance {
    generate_lasso(
        &LassoParams {
            n,
            m,
            k_true: (n / 10).max(1),
            noise_sigma: 0.01,
            lambda: None,
            identity_design: false,
            correlation: 0.5,
        },
        seed,
    )
    .expect("valid lasso parameters")
}

pub fn group_fixture(blocks: usize, block_size: usize, m: usize, seed: u64) -> ProblemInstance {
    generate_group_lasso(
        &GroupLassoParams {
            block_sizes: vec![block_size; blocks],
            m,
            active_blocks: (blocks / 3).max(1),
            noise_sigma: 0.01,
            weights: None,
            correlation: 0.5,
        },
        seed,
    )
    .expect("valid group lasso parameters")
}
