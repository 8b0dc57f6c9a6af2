use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Contiguous decomposition of `0..n` into `K` blocks of sizes `i_1, ..., i_K`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct BlockPartition {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    dim: usize,
}

impl BlockPartition {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidPartition("no blocks".into()));
        }
        if let Some(k) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidPartition(format!("block {k} has size 0")));
        }
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut dim = 0;
        for &s in &sizes {
            offsets.push(dim);
            dim += s;
        }
        Ok(Self { sizes, offsets, dim })
    }

    /// `n` scalar blocks, the LASSO layout.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(vec![1; n])
    }

    /// A single block spanning all `n` coordinates.
    pub fn single(n: usize) -> Result<Self> {
        Self::new(vec![n])
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn block_size(&self, k: usize) -> usize {
        self.sizes[k]
    }

    pub fn max_block_size(&self) -> usize {
        self.sizes.iter().copied().max().unwrap_or(0)
    }

    pub fn range(&self, k: usize) -> Range<usize> {
        self.offsets[k]..self.offsets[k] + self.sizes[k]
    }

    pub fn ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        (0..self.num_blocks()).map(|k| self.range(k))
    }

    pub fn check_block(&self, k: usize) -> Result<()> {
        if k < self.num_blocks() {
            Ok(())
        } else {
            Err(Error::BlockIndex {
                index: k,
                blocks: self.num_blocks(),
            })
        }
    }
}

impl TryFrom<Vec<usize>> for BlockPartition {
    type Error = Error;

    fn try_from(sizes: Vec<usize>) -> Result<Self> {
        Self::new(sizes)
    }
}

impl From<BlockPartition> for Vec<usize> {
    fn from(p: BlockPartition) -> Self {
        p.sizes
    }
}
