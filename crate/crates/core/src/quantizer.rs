//! Per-comparator precision scaling and integer threshold substitution.
//!
//! A threshold `t` becomes the integer code `T = round(t * 2^p)` (clamped to
//! `2^p - 1`), is shifted by the gene's offset, and is read back as the
//! fixed-point value `T / 2^p`. Features are truncated to `floor(v * 2^p)`.
//! Quantized inference only compares integers, matching the generated
//! hardware bit for bit.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::dtree::{DecisionTree, Node, NodeDoc, NodeId, TreeDoc};
use crate::error::{Error, Result};

/// Widest supported comparator.
pub const MAX_PRECISION: u32 = 24;

/// One comparator's gene pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Gene {
    pub precision: u32,
    pub delta: i32,
}

/// Inclusive bounds for precision and offset genes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneBounds {
    pub p_min: u32,
    pub p_max: u32,
    pub margin: i32,
}

impl Default for GeneBounds {
    fn default() -> Self {
        GeneBounds {
            p_min: 2,
            p_max: 8,
            margin: 5,
        }
    }
}

impl GeneBounds {
    pub fn validate(&self) -> Result<()> {
        if self.p_min < 1 || self.p_min > self.p_max || self.p_max > MAX_PRECISION {
            return Err(Error::InvalidArgument(format!(
                "precision bounds {}..{} must satisfy 1 <= pmin <= pmax <= {MAX_PRECISION}",
                self.p_min, self.p_max
            )));
        }
        if self.margin < 0 {
            return Err(Error::InvalidArgument("margin must be non-negative".into()));
        }
        Ok(())
    }

    pub fn contains(&self, g: &Gene) -> bool {
        (self.p_min..=self.p_max).contains(&g.precision) && (-self.margin..=self.margin).contains(&g.delta)
    }
}

/// Genotype of one approximate tree: a (precision, offset) pair per
/// comparator, ordered by internal-node id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Chromosome {
    pub genes: Vec<Gene>,
}

impl Chromosome {
    pub fn new(genes: Vec<Gene>) -> Self {
        Chromosome { genes }
    }

    /// Full precision, no substitution: the exact bespoke design.
    pub fn baseline(comparators: usize, bounds: &GeneBounds) -> Self {
        Chromosome {
            genes: vec![
                Gene {
                    precision: bounds.p_max,
                    delta: 0,
                };
                comparators
            ],
        }
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn check(&self, comparators: usize, bounds: &GeneBounds) -> Result<()> {
        if self.genes.len() != comparators {
            return Err(Error::ChromosomeLength {
                expected: comparators,
                got: self.genes.len(),
            });
        }
        if let Some((index, g)) = self.genes.iter().enumerate().find(|(_, g)| !bounds.contains(g)) {
            return Err(Error::GeneOutOfBounds {
                index,
                message: format!(
                    "(p={}, d={}) outside p in [{}, {}], d in [-{m}, {m}]",
                    g.precision,
                    g.delta,
                    bounds.p_min,
                    bounds.p_max,
                    m = bounds.margin
                ),
            });
        }
        Ok(())
    }
}

/// Compact text form: `p:d` pairs separated by spaces, e.g. `8:+0 3:-2`.
impl fmt::Display for Chromosome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, g) in self.genes.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{}:{:+}", g.precision, g.delta)?;
        }
        Ok(())
    }
}

impl FromStr for Chromosome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let genes = s
            .split_whitespace()
            .map(|tok| {
                let (p, d) = tok
                    .split_once(':')
                    .ok_or_else(|| Error::InvalidArgument(format!("bad gene {tok:?}")))?;
                let bad = |_| Error::InvalidArgument(format!("bad gene {tok:?}"));
                Ok(Gene {
                    precision: p.parse().map_err(bad)?,
                    delta: d.trim_start_matches('+').parse().map_err(bad)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Chromosome { genes })
    }
}

fn max_code(p: u32) -> u64 {
    (1u64 << p) - 1
}

fn check_precision(p: u32) -> Result<()> {
    if p == 0 || p > MAX_PRECISION {
        return Err(Error::InvalidArgument(format!(
            "precision {p} not in 1..={MAX_PRECISION}"
        )));
    }
    Ok(())
}

/// `clamp(round_half_up(t * 2^p), 0, 2^p - 1)`.
pub fn quantize_threshold(t: f64, p: u32) -> u64 {
    let scaled = (t.clamp(0.0, 1.0) * (1u64 << p) as f64 + 0.5).floor();
    (scaled as u64).min(max_code(p))
}

/// `min(floor(v * 2^p), 2^p - 1)`.
pub fn quantize_feature(v: f64, p: u32) -> u64 {
    let scaled = (v.clamp(0.0, 1.0) * (1u64 << p) as f64).floor();
    (scaled as u64).min(max_code(p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QNode {
    /// Routes LEFT iff `quantize_feature(sample[feature], precision) <= code`.
    Split {
        feature: usize,
        precision: u32,
        code: u64,
        left: NodeId,
        right: NodeId,
    },
    Leaf {
        class: usize,
    },
}

impl QNode {
    /// Fixed-point threshold `code / 2^precision`.
    pub fn fixed_threshold(&self) -> Option<f64> {
        match *self {
            QNode::Split { precision, code, .. } => Some(code as f64 / (1u64 << precision) as f64),
            QNode::Leaf { .. } => None,
        }
    }
}

/// A decision tree with every comparator materialized at its own precision
/// and integer threshold. Topology and node ids match the source tree.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTree {
    nodes: Vec<QNode>,
    root: NodeId,
    class_count: usize,
    min_sample_len: usize,
    feature_count: Option<usize>,
}

impl QuantizedTree {
    /// Builds and validates a quantized tree directly; codes must fit their
    /// precision.
    pub fn new(nodes: Vec<QNode>, root: NodeId, class_count: usize, feature_count: Option<usize>) -> Result<Self> {
        for n in &nodes {
            if let QNode::Split { precision, code, .. } = *n {
                check_precision(precision)?;
                if code > max_code(precision) {
                    return Err(Error::ThresholdOutOfRange {
                        precision,
                        threshold: code,
                    });
                }
            }
        }
        let skeleton: Vec<Node> = nodes
            .iter()
            .map(|n| match *n {
                QNode::Split {
                    feature, left, right, ..
                } => Node::Split {
                    feature,
                    threshold: 0.0,
                    left,
                    right,
                },
                QNode::Leaf { class } => Node::Leaf { class },
            })
            .collect();
        let shape = DecisionTree::new(skeleton, root, class_count, feature_count)?;
        Ok(QuantizedTree {
            min_sample_len: shape.min_sample_len(),
            nodes,
            root,
            class_count,
            feature_count,
        })
    }

    pub fn nodes(&self) -> &[QNode] {
        &self.nodes
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn feature_count(&self) -> Option<usize> {
        self.feature_count
    }

    pub fn min_sample_len(&self) -> usize {
        self.min_sample_len
    }

    /// `(precision, code)` of every comparator, in node-id order.
    pub fn comparators(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.nodes.iter().filter_map(|n| match *n {
            QNode::Split { precision, code, .. } => Some((precision, code)),
            QNode::Leaf { .. } => None,
        })
    }

    pub fn check_sample(&self, sample: &[f64]) -> Result<()> {
        if sample.len() < self.min_sample_len || self.feature_count.is_some_and(|f| f != sample.len()) {
            return Err(Error::DimensionMismatch {
                expected: self.min_sample_len,
                got: sample.len(),
            });
        }
        Ok(())
    }

    /// Integer-only inference.
    pub fn predict(&self, sample: &[f64]) -> Result<usize> {
        self.check_sample(sample)?;
        Ok(self.route(sample))
    }

    fn route(&self, sample: &[f64]) -> usize {
        let mut id = self.root;
        loop {
            match self.nodes[id] {
                QNode::Split {
                    feature,
                    precision,
                    code,
                    left,
                    right,
                } => {
                    id = if quantize_feature(sample[feature], precision) <= code {
                        left
                    } else {
                        right
                    }
                }
                QNode::Leaf { class } => return class,
            }
        }
    }

    /// Fraction of rows classified correctly by [`QuantizedTree::predict`].
    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let Some((row, _)) = data.rows().next() {
            self.check_sample(row)?;
        }
        let correct = data.rows().filter(|(row, label)| self.route(row) == *label).count();
        Ok(correct as f64 / data.len() as f64)
    }

    /// Tree JSON with `precision` and `int_threshold` on every split node;
    /// `threshold` holds the fixed-point value.
    pub fn to_doc(&self) -> TreeDoc {
        let nodes = self
            .nodes
            .iter()
            .enumerate()
            .map(|(id, n)| match *n {
                QNode::Split {
                    feature,
                    precision,
                    code,
                    left,
                    right,
                } => NodeDoc::Split {
                    id: id as i64,
                    feature,
                    threshold: n.fixed_threshold().expect("split"),
                    left: left as i64,
                    right: right as i64,
                    precision: Some(precision),
                    int_threshold: Some(code),
                },
                QNode::Leaf { class } => NodeDoc::Leaf { id: id as i64, class },
            })
            .collect();
        TreeDoc {
            class_count: self.class_count,
            feature_count: self.feature_count,
            root: self.root as i64,
            nodes,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_doc())?)
    }

    /// Reads the extended JSON back; every split needs `precision` and
    /// `int_threshold`.
    pub fn from_doc(doc: &TreeDoc) -> Result<Self> {
        let shape = DecisionTree::try_from(doc)?;
        let nodes = shape
            .nodes()
            .iter()
            .zip(&doc.nodes)
            .map(|(n, d)| match (*n, d) {
                (
                    Node::Split {
                        feature, left, right, ..
                    },
                    NodeDoc::Split {
                        precision: Some(precision),
                        int_threshold: Some(code),
                        ..
                    },
                ) => Ok(QNode::Split {
                    feature,
                    precision: *precision,
                    code: *code,
                    left,
                    right,
                }),
                (Node::Leaf { class }, _) => Ok(QNode::Leaf { class }),
                _ => Err(Error::InvalidTree("split node lacks precision/int_threshold".into())),
            })
            .collect::<Result<Vec<_>>>()?;
        QuantizedTree::new(nodes, shape.root(), shape.class_count(), shape.feature_count())
    }
}

/// Materializes `chrom` on `tree`: per comparator,
/// `T = clamp(quantize_threshold(t, p) + d, 0, 2^p - 1)`.
pub fn apply_chromosome(tree: &DecisionTree, chrom: &Chromosome, bounds: &GeneBounds) -> Result<QuantizedTree> {
    bounds.validate()?;
    chrom.check(tree.comparator_count(), bounds)?;
    let mut genes = chrom.genes.iter();
    let nodes = tree
        .nodes()
        .iter()
        .map(|n| match *n {
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let g = genes.next().expect("length checked");
                let code = (quantize_threshold(threshold, g.precision) as i64 + i64::from(g.delta))
                    .clamp(0, max_code(g.precision) as i64) as u64;
                QNode::Split {
                    feature,
                    precision: g.precision,
                    code,
                    left,
                    right,
                }
            }
            Node::Leaf { class } => QNode::Leaf { class },
        })
        .collect();
    Ok(QuantizedTree {
        nodes,
        root: tree.root(),
        class_count: tree.class_count(),
        min_sample_len: tree.min_sample_len(),
        feature_count: tree.feature_count(),
    })
}

pub fn predict_quantized(qtree: &QuantizedTree, sample: &[f64]) -> Result<usize> {
    qtree.predict(sample)
}

pub fn quantized_accuracy(qtree: &QuantizedTree, data: &Dataset) -> Result<f64> {
    qtree.accuracy(data)
}
