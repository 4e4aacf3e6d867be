//! Fitness: chromosome to (test error, estimated area).

use std::collections::HashMap;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::area::AreaModel;
use crate::dataset::Dataset;
use crate::dtree::DecisionTree;
use crate::error::{Error, Result};
use crate::quantizer::{apply_chromosome, Chromosome, GeneBounds};

/// Both objectives are minimized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objectives {
    /// `1 - test accuracy`.
    pub error: f64,
    pub area: f64,
}

impl Objectives {
    pub fn accuracy(&self) -> f64 {
        1.0 - self.error
    }
}

/// Everything a fitness evaluation reads. Immutable apart from the
/// optional memo table.
#[derive(Debug)]
pub struct EvalContext {
    tree: DecisionTree,
    test: Dataset,
    model: AreaModel,
    bounds: GeneBounds,
    cache: Option<RwLock<HashMap<Chromosome, Objectives>>>,
}

impl EvalContext {
    pub fn new(tree: DecisionTree, test: Dataset, model: AreaModel, bounds: GeneBounds) -> Result<Self> {
        bounds.validate()?;
        if test.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let need = tree.min_sample_len();
        if test.feature_count() < need || tree.feature_count().is_some_and(|f| f != test.feature_count()) {
            return Err(Error::DimensionMismatch {
                expected: need,
                got: test.feature_count(),
            });
        }
        Ok(EvalContext {
            tree,
            test,
            model,
            bounds,
            cache: None,
        })
    }

    /// Enables memoization by chromosome content.
    pub fn with_cache(mut self) -> Self {
        self.cache = Some(RwLock::new(HashMap::new()));
        self
    }

    pub fn tree(&self) -> &DecisionTree {
        &self.tree
    }

    pub fn test(&self) -> &Dataset {
        &self.test
    }

    pub fn model(&self) -> &AreaModel {
        &self.model
    }

    pub fn bounds(&self) -> &GeneBounds {
        &self.bounds
    }

    pub fn comparator_count(&self) -> usize {
        self.tree.comparator_count()
    }

    pub fn baseline(&self) -> Chromosome {
        Chromosome::baseline(self.comparator_count(), &self.bounds)
    }

    pub fn cached_entries(&self) -> usize {
        self.cache.as_ref().map_or(0, |c| c.read().expect("cache lock").len())
    }

    pub fn evaluate(&self, chrom: &Chromosome) -> Result<Objectives> {
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.read().expect("cache lock").get(chrom) {
                return Ok(*hit);
            }
        }
        let qtree = apply_chromosome(&self.tree, chrom, &self.bounds)?;
        let accuracy = qtree.accuracy(&self.test)?;
        let obj = Objectives {
            error: 1.0 - accuracy,
            area: self.model.tree_area(&qtree)?,
        };
        if let Some(cache) = &self.cache {
            // identical values race benignly; the first insert wins
            cache.write().expect("cache lock").entry(chrom.clone()).or_insert(obj);
        }
        Ok(obj)
    }
}

pub fn evaluate(chrom: &Chromosome, ctx: &EvalContext) -> Result<Objectives> {
    ctx.evaluate(chrom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::area::{analytical_area, GateWeights};
    use crate::dtree::{train_cart, CartConfig};
    use crate::quantizer::{quantize_threshold, Gene};
    use proptest::prelude::*;

    fn ctx() -> EvalContext {
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| vec![(i % 10) as f64 / 9.0, (i / 10) as f64 / 5.0])
            .collect();
        let labels = rows
            .iter()
            .map(|r| usize::from(r[0] > 0.45) + usize::from(r[1] > 0.5))
            .collect();
        let d = Dataset::from_rows(rows, labels).unwrap();
        let tree = train_cart(&d, &CartConfig::default()).unwrap();
        EvalContext::new(tree, d, AreaModel::default(), GeneBounds::default()).unwrap()
    }

    #[test]
    fn baseline_area_is_sum_of_eight_bit_comparators() {
        let c = ctx();
        let obj = c.evaluate(&c.baseline()).unwrap();
        let expect: f64 = c
            .tree()
            .nodes()
            .iter()
            .filter_map(|n| match n {
                crate::dtree::Node::Split { threshold, .. } => {
                    Some(analytical_area(8, quantize_threshold(*threshold, 8), &GateWeights::default()).unwrap())
                }
                _ => None,
            })
            .sum();
        assert_eq!(obj.area, expect);
        let float_acc = c.tree().accuracy(c.test()).unwrap();
        assert!((obj.accuracy() - float_acc).abs() < 1e-12);
    }

    #[test]
    fn saturated_chromosome_is_cheaper() {
        let c = ctx();
        let base = c.evaluate(&c.baseline()).unwrap();
        // at 2 bits a +5 offset always reaches the max code
        let sat = Chromosome::new(vec![Gene { precision: 2, delta: 5 }; c.comparator_count()]);
        let obj = c.evaluate(&sat).unwrap();
        assert_eq!(obj.area, 0.0);
        assert!(obj.area < base.area);
    }

    #[test]
    fn cache_returns_identical_values() {
        let c = ctx().with_cache();
        let chrom = c.baseline();
        let a = c.evaluate(&chrom).unwrap();
        assert_eq!(c.cached_entries(), 1);
        let b = c.evaluate(&chrom.clone()).unwrap();
        assert_eq!(a, b);
        assert_eq!(c.cached_entries(), 1);
    }

    #[test]
    fn length_mismatch_propagates() {
        let c = ctx();
        assert!(matches!(
            c.evaluate(&Chromosome::new(vec![])),
            Err(Error::ChromosomeLength { .. })
        ));
    }

    proptest! {
        #[test]
        fn error_and_accuracy_sum_to_one(genes in proptest::collection::vec((2u32..=8, -5i32..=5), 8)) {
            let c = ctx();
            let n = c.comparator_count();
            let chrom = Chromosome::new(genes.into_iter().cycle().take(n).map(|(precision, delta)| Gene { precision, delta }).collect());
            let obj = c.evaluate(&chrom).unwrap();
            let q = apply_chromosome(c.tree(), &chrom, c.bounds()).unwrap();
            prop_assert_eq!(obj.error + q.accuracy(c.test()).unwrap(), 1.0);
            prop_assert!(obj.area >= 0.0);
            prop_assert_eq!(obj, c.evaluate(&chrom).unwrap());
        }
    }
}
