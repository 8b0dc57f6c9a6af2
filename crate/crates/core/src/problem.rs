//! The composite problem `min F(x) = f1(x) + f2(x)` and its JSON file format.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::partition::BlockPartition;
use crate::regularizer::Regularizer;
use crate::smooth::{BlockModuli, SmoothModel, SmoothObjective};
use crate::{Matrix, Vector};

/// Immutable problem instance: smooth loss, separable regularizer, block partition.
///
/// Block strong convexity moduli are computed once at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    smooth: SmoothObjective,
    reg: Regularizer,
    partition: BlockPartition,
    moduli: BlockModuli,
    meta: BTreeMap<String, serde_json::Value>,
}

impl ProblemInstance {
    pub fn new(smooth: SmoothObjective, reg: Regularizer, partition: BlockPartition) -> Result<Self> {
        check_len(smooth.dim(), partition.dim())?;
        reg.validate(&partition)?;
        let moduli = smooth.block_strong_convexity(&partition)?;
        Ok(Self {
            smooth,
            reg,
            partition,
            moduli,
            meta: BTreeMap::new(),
        })
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: serde_json::Value) -> Self {
        self.meta.insert(key.into(), value);
        self
    }

    pub fn dim(&self) -> usize {
        self.partition.dim()
    }

    pub fn smooth(&self) -> &SmoothObjective {
        &self.smooth
    }

    pub fn regularizer(&self) -> &Regularizer {
        &self.reg
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn lipschitz(&self) -> f64 {
        self.smooth.lipschitz()
    }

    pub fn block_moduli(&self) -> &BlockModuli {
        &self.moduli
    }

    pub fn meta(&self) -> &BTreeMap<String, serde_json::Value> {
        &self.meta
    }

    /// `F(x)`; `+∞` outside the box for the box variant.
    pub fn objective_value(&self, x: &Vector) -> Result<f64> {
        let f2 = self.smooth.value(x)?;
        Ok(f2 + self.reg.value(x, &self.partition))
    }

    pub fn is_feasible(&self, x: &Vector) -> bool {
        x.len() == self.dim() && self.reg.is_feasible(x)
    }

    pub fn to_file(&self) -> InstanceFile {
        let a = self.smooth.design();
        let rows = (0..a.nrows()).map(|i| a.row(i).iter().copied().collect()).collect();
        let smooth = match self.smooth.model() {
            SmoothModel::LeastSquares { b, .. } => SmoothSpec::LeastSquares {
                a: rows,
                b: b.iter().copied().collect(),
            },
            SmoothModel::Logistic { labels, .. } => SmoothSpec::Logistic {
                a: rows,
                labels: labels.iter().copied().collect(),
            },
        };
        InstanceFile {
            n: self.dim(),
            partition: self.partition.clone(),
            smooth,
            reg: self.reg.clone(),
            meta: self.meta.clone(),
        }
    }

    pub fn from_file(file: InstanceFile) -> Result<Self> {
        let (rows, targets, logistic) = match file.smooth {
            SmoothSpec::LeastSquares { a, b } => (a, b, false),
            SmoothSpec::Logistic { a, labels } => (a, labels, true),
        };
        let m = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
            return Err(Error::Shape {
                expected: ncols,
                got: bad.len(),
            });
        }
        check_len(file.n, ncols)?;
        let a = Matrix::from_row_iterator(m, ncols, rows.into_iter().flatten());
        let t = Vector::from_vec(targets);
        let smooth = if logistic {
            SmoothObjective::logistic(a, t)?
        } else {
            SmoothObjective::least_squares(a, t)?
        };
        let mut inst = Self::new(smooth, file.reg, file.partition)?;
        inst.meta = file.meta;
        Ok(inst)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// On-disk layout of an instance. `A` is stored row-major as a list of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub n: usize,
    pub partition: BlockPartition,
    pub smooth: SmoothSpec,
    pub reg: Regularizer,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SmoothSpec {
    LeastSquares {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
    Logistic {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        labels: Vec<f64>,
    },
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_lasso(lambda: f64) -> ProblemInstance {
        let smooth = SmoothObjective::least_squares(Matrix::identity(2, 2), Vector::zeros(2)).unwrap();
        ProblemInstance::new(smooth, Regularizer::L1 { lambda }, BlockPartition::unit(2).unwrap()).unwrap()
    }

    #[test]
    fn objective_at_origin() {
        let smooth = SmoothObjective::least_squares(Matrix::identity(2, 2), Vector::zeros(2)).unwrap();
        let inst = ProblemInstance::new(smooth, Regularizer::Zero, BlockPartition::unit(2).unwrap()).unwrap();
        assert_eq!(inst.objective_value(&Vector::zeros(2)).unwrap(), 0.0);
    }

    #[test]
    fn objective_hand_arithmetic() {
        let inst = identity_lasso(1.0);
        let v = inst.objective_value(&Vector::from_vec(vec![1.0, -1.0])).unwrap();
        assert_eq!(v, 3.0);
    }

    #[test]
    fn shape_errors() {
        let inst = identity_lasso(1.0);
        assert!(matches!(
            inst.objective_value(&Vector::zeros(3)),
            Err(Error::Shape { expected: 2, got: 3 })
        ));
        let smooth = SmoothObjective::least_squares(Matrix::identity(2, 2), Vector::zeros(2)).unwrap();
        assert!(ProblemInstance::new(smooth, Regularizer::Zero, BlockPartition::unit(3).unwrap()).is_err());
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let a = Matrix::from_row_slice(2, 3, &[0.1, 1.0 / 3.0, -2.5e-17, 7.0, 1e30, -0.0]);
        let smooth = SmoothObjective::least_squares(a, Vector::from_vec(vec![0.2, std::f64::consts::PI])).unwrap();
        let inst = ProblemInstance::new(
            smooth,
            Regularizer::SparseGroup {
                weights: vec![0.3, 0.7],
                lambda: 0.1,
            },
            BlockPartition::new(vec![1, 2]).unwrap(),
        )
        .unwrap()
        .with_meta("seed", serde_json::json!(42));
        let s1 = inst.to_json().unwrap();
        let back = ProblemInstance::from_json(&s1).unwrap();
        assert_eq!(back, inst);
        assert_eq!(back.to_json().unwrap(), s1);
        assert!(s1.contains("\"kind\": \"least_squares\""));
        assert!(s1.contains("\"A\""));
    }

    #[test]
    fn rejects_ragged_matrix() {
        let s = r#"{"n":2,"partition":[2],"smooth":{"kind":"least_squares","A":[[1,0],[1]],"b":[0,0]},"reg":{"kind":"zero"}}"#;
        assert!(ProblemInstance::from_json(s).is_err());
    }
}
