//! CART decision trees over normalized features: training to pure leaves,
//! exact float inference, and the JSON tree format.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    /// Routes LEFT iff `sample[feature] <= threshold`.
    Split {
        feature: usize,
        threshold: f64,
        left: NodeId,
        right: NodeId,
    },
    Leaf {
        class: usize,
    },
}

/// A binary tree of comparator nodes and class leaves.
///
/// Node ids are indices into `nodes`. Internal nodes, in ascending id order,
/// define the comparator order used by chromosomes.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    root: NodeId,
    class_count: usize,
    feature_count: Option<usize>,
}

impl DecisionTree {
    /// Validates structure and thresholds.
    pub fn new(nodes: Vec<Node>, root: NodeId, class_count: usize, feature_count: Option<usize>) -> Result<Self> {
        let tree = DecisionTree {
            nodes,
            root,
            class_count,
            feature_count,
        };
        tree.validate()?;
        Ok(tree)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
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

    /// Ids of internal nodes, ascending.
    pub fn comparator_ids(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n, Node::Split { .. }))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn comparator_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Split { .. })).count()
    }

    /// Smallest sample length this tree can be evaluated on.
    pub fn min_sample_len(&self) -> usize {
        self.feature_count.unwrap_or_else(|| {
            self.nodes
                .iter()
                .filter_map(|n| match n {
                    Node::Split { feature, .. } => Some(feature + 1),
                    Node::Leaf { .. } => None,
                })
                .max()
                .unwrap_or(0)
        })
    }

    /// Longest root-to-leaf path, counted in comparators.
    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(self.root, 0usize)];
        while let Some((id, d)) = stack.pop() {
            match self.nodes[id] {
                Node::Split { left, right, .. } => {
                    stack.push((left, d + 1));
                    stack.push((right, d + 1));
                }
                Node::Leaf { .. } => best = best.max(d),
            }
        }
        best
    }

    fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(Error::InvalidTree("no nodes".into()));
        }
        if self.root >= n {
            return Err(Error::InvalidTree(format!("root {} does not exist", self.root)));
        }
        if self.class_count == 0 {
            return Err(Error::InvalidTree("class_count must be positive".into()));
        }
        let mut seen = vec![false; n];
        let mut stack = vec![self.root];
        seen[self.root] = true;
        while let Some(id) = stack.pop() {
            match self.nodes[id] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if !(0.0..=1.0).contains(&threshold) {
                        return Err(Error::InvalidTree(format!(
                            "node {id}: threshold {threshold} outside [0, 1]"
                        )));
                    }
                    if let Some(fc) = self.feature_count {
                        if feature >= fc {
                            return Err(Error::InvalidTree(format!(
                                "node {id}: feature {feature} >= feature_count {fc}"
                            )));
                        }
                    }
                    if left == right {
                        return Err(Error::InvalidTree(format!("node {id}: both children are {left}")));
                    }
                    for child in [left, right] {
                        if child >= n {
                            return Err(Error::InvalidTree(format!("node {id}: dangling child {child}")));
                        }
                        if seen[child] {
                            return Err(Error::InvalidTree(format!(
                                "node {id}: child {child} reached twice (cycle or shared node)"
                            )));
                        }
                        seen[child] = true;
                        stack.push(child);
                    }
                }
                Node::Leaf { class } => {
                    if class >= self.class_count {
                        return Err(Error::InvalidTree(format!(
                            "node {id}: class {class} >= class_count {}",
                            self.class_count
                        )));
                    }
                }
            }
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidTree(format!("node {orphan} unreachable from root")));
        }
        Ok(())
    }

    fn check_sample(&self, sample: &[f64]) -> Result<()> {
        let need = self.min_sample_len();
        if sample.len() < need || self.feature_count.is_some_and(|f| f != sample.len()) {
            return Err(Error::DimensionMismatch {
                expected: need,
                got: sample.len(),
            });
        }
        Ok(())
    }

    /// Class of `sample`; LEFT iff `sample[feature] <= threshold`.
    pub fn predict(&self, sample: &[f64]) -> Result<usize> {
        self.check_sample(sample)?;
        let mut id = self.root;
        loop {
            match self.nodes[id] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if sample[feature] <= threshold { left } else { right },
                Node::Leaf { class } => return Ok(class),
            }
        }
    }

    /// Fraction of rows predicted correctly.
    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut correct = 0usize;
        for (row, label) in data.rows() {
            if self.predict(row)? == label {
                correct += 1;
            }
        }
        Ok(correct as f64 / data.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CartConfig {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Recorded for provenance; split search itself is deterministic.
    pub seed: u64,
}

impl Default for CartConfig {
    fn default() -> Self {
        CartConfig {
            max_depth: None,
            min_samples_split: 2,
            seed: 0,
        }
    }
}

/// Best split of one node, compared exactly.
///
/// Minimizing weighted Gini impurity is equivalent to maximizing
/// `sum_c kL_c^2 / nL + sum_c kR_c^2 / nR`, kept here as the exact fraction
/// `num / den`.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    num: u128,
    den: u128,
}

impl Candidate {
    fn beats(&self, other: &Candidate) -> bool {
        self.num * other.den > other.num * self.den
    }
}

/// Greedy CART with Gini impurity.
///
/// Impure nodes keep splitting as long as some feature separates their
/// samples (zero-gain splits included), so default settings grow every
/// leaf pure unless identical feature rows disagree on the label.
pub fn train_cart(train: &Dataset, config: &CartConfig) -> Result<DecisionTree> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if config.min_samples_split < 2 {
        return Err(Error::InvalidArgument("min_samples_split must be >= 2".into()));
    }
    let mut builder = Builder {
        data: train,
        config,
        nodes: Vec::new(),
    };
    let all: Vec<usize> = (0..train.len()).collect();
    let root = builder.grow(all, 0);
    DecisionTree::new(builder.nodes, root, train.class_count(), Some(train.feature_count()))
}

struct Builder<'a> {
    data: &'a Dataset,
    config: &'a CartConfig,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn counts(&self, rows: &[usize]) -> Vec<u64> {
        let mut counts = vec![0u64; self.data.class_count()];
        for &r in rows {
            counts[self.data.label(r)] += 1;
        }
        counts
    }

    /// Pre-order construction; returns the id of the subtree root.
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> NodeId {
        let counts = self.counts(&rows);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let stop =
            pure || rows.len() < self.config.min_samples_split || self.config.max_depth.is_some_and(|d| depth >= d);
        let split = if stop { None } else { self.best_split(&rows) };
        let Some(best) = split else {
            let id = self.nodes.len();
            self.nodes.push(Node::Leaf {
                class: majority(&counts),
            });
            return id;
        };

        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { class: 0 });
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&r| self.data.row(r)[best.feature] <= best.threshold);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    fn best_split(&self, rows: &[usize]) -> Option<Candidate> {
        let classes = self.data.class_count();
        let total = self.counts(rows);
        let mut best: Option<Candidate> = None;
        let mut order = rows.to_vec();
        for feature in 0..self.data.feature_count() {
            let value = |r: usize| self.data.row(r)[feature];
            order.sort_by(|&a, &b| value(a).total_cmp(&value(b)));
            let mut left = vec![0u64; classes];
            for k in 0..order.len() - 1 {
                left[self.data.label(order[k])] += 1;
                let (lo, hi) = (value(order[k]), value(order[k + 1]));
                if lo == hi {
                    continue;
                }
                let n_left = (k + 1) as u128;
                let n_right = (order.len() - k - 1) as u128;
                let (mut sq_left, mut sq_right) = (0u128, 0u128);
                for c in 0..classes {
                    let l = left[c] as u128;
                    let r = (total[c] - left[c]) as u128;
                    sq_left += l * l;
                    sq_right += r * r;
                }
                let cand = Candidate {
                    feature,
                    threshold: lo + (hi - lo) / 2.0,
                    num: sq_left * n_right + sq_right * n_left,
                    den: n_left * n_right,
                };
                if best.as_ref().is_none_or(|b| cand.beats(b)) {
                    best = Some(cand);
                }
            }
        }
        best
    }
}

/// Most frequent class; ties go to the lowest id.
fn majority(counts: &[u64]) -> usize {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// JSON format

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NodeDoc {
    Split {
        id: i64,
        feature: usize,
        threshold: f64,
        left: i64,
        right: i64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        precision: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        int_threshold: Option<u64>,
    },
    Leaf {
        id: i64,
        class: usize,
    },
}

impl NodeDoc {
    fn id(&self) -> i64 {
        match self {
            NodeDoc::Split { id, .. } | NodeDoc::Leaf { id, .. } => *id,
        }
    }
}

/// Serialized tree: `{"class_count", "root", "nodes": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDoc {
    pub class_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_count: Option<usize>,
    pub root: i64,
    pub nodes: Vec<NodeDoc>,
}

impl From<&DecisionTree> for TreeDoc {
    fn from(tree: &DecisionTree) -> Self {
        let nodes = tree
            .nodes
            .iter()
            .enumerate()
            .map(|(id, n)| match *n {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => NodeDoc::Split {
                    id: id as i64,
                    feature,
                    threshold,
                    left: left as i64,
                    right: right as i64,
                    precision: None,
                    int_threshold: None,
                },
                Node::Leaf { class } => NodeDoc::Leaf { id: id as i64, class },
            })
            .collect();
        TreeDoc {
            class_count: tree.class_count,
            feature_count: tree.feature_count,
            root: tree.root as i64,
            nodes,
        }
    }
}

impl TryFrom<&TreeDoc> for DecisionTree {
    type Error = Error;

    /// Node ids may be arbitrary integers; they are remapped to positions in
    /// document order.
    fn try_from(doc: &TreeDoc) -> Result<Self> {
        let mut index = HashMap::with_capacity(doc.nodes.len());
        for (pos, n) in doc.nodes.iter().enumerate() {
            if index.insert(n.id(), pos).is_some() {
                return Err(Error::InvalidTree(format!("duplicate node id {}", n.id())));
            }
        }
        let resolve = |id: i64, from: i64| {
            index
                .get(&id)
                .copied()
                .ok_or_else(|| Error::InvalidTree(format!("node {from}: dangling child {id}")))
        };
        let mut nodes = Vec::with_capacity(doc.nodes.len());
        for n in &doc.nodes {
            nodes.push(match *n {
                NodeDoc::Split {
                    id,
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    if left == id || right == id {
                        return Err(Error::InvalidTree(format!("node {id} references itself (cycle)")));
                    }
                    Node::Split {
                        feature,
                        threshold,
                        left: resolve(left, id)?,
                        right: resolve(right, id)?,
                    }
                }
                NodeDoc::Leaf { class, .. } => Node::Leaf { class },
            });
        }
        let root = index
            .get(&doc.root)
            .copied()
            .ok_or_else(|| Error::InvalidTree(format!("root {} does not exist", doc.root)))?;
        DecisionTree::new(nodes, root, doc.class_count, doc.feature_count)
    }
}

impl DecisionTree {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&TreeDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TreeDoc = serde_json::from_str(text)?;
        DecisionTree::try_from(&doc)
    }
}

pub fn export_json(tree: &DecisionTree, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = tree.to_json()?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn import_json(path: impl AsRef<Path>) -> Result<DecisionTree> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    DecisionTree::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn data(rows: Vec<Vec<f64>>, labels: Vec<usize>) -> Dataset {
        Dataset::from_rows(rows, labels).unwrap()
    }

    fn xor() -> Dataset {
        data(
            vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]],
            vec![0, 1, 1, 0],
        )
    }

    /// Exhaustive Gini oracle: enumerates every (feature, midpoint) split and
    /// scores it with plain float impurity.
    fn oracle_best_split(rows: &[(Vec<f64>, usize)], classes: usize) -> Option<(usize, f64, f64)> {
        let gini = |part: &[&(Vec<f64>, usize)]| {
            if part.is_empty() {
                return 0.0;
            }
            let n = part.len() as f64;
            1.0 - (0..classes)
                .map(|c| {
                    let p = part.iter().filter(|r| r.1 == c).count() as f64 / n;
                    p * p
                })
                .sum::<f64>()
        };
        let mut best: Option<(usize, f64, f64)> = None;
        for f in 0..rows[0].0.len() {
            let mut vals: Vec<f64> = rows.iter().map(|r| r.0[f]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let t = w[0] + (w[1] - w[0]) / 2.0;
                let (l, r): (Vec<_>, Vec<_>) = rows.iter().partition(|x| x.0[f] <= t);
                let n = rows.len() as f64;
                let score = l.len() as f64 / n * gini(&l) + r.len() as f64 / n * gini(&r);
                if best.is_none_or(|b| score < b.2 - 1e-12) {
                    best = Some((f, t, score));
                }
            }
        }
        best
    }

    #[test]
    fn one_dimensional_midpoint() {
        let d = data(vec![vec![0.1], vec![0.2], vec![0.8], vec![0.9]], vec![0, 0, 1, 1]);
        let t = train_cart(&d, &CartConfig::default()).unwrap();
        assert_eq!(t.comparator_count(), 1);
        match *t.node(t.root()) {
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                assert_eq!(feature, 0);
                assert!((threshold - 0.5).abs() < 1e-15);
                assert_eq!(*t.node(left), Node::Leaf { class: 0 });
                assert_eq!(*t.node(right), Node::Leaf { class: 1 });
            }
            _ => panic!("root is a leaf"),
        }
        let oracle = oracle_best_split(&d.rows().map(|(r, l)| (r.to_vec(), l)).collect::<Vec<_>>(), 2).unwrap();
        assert_eq!(oracle.0, 0);
        assert!((oracle.1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pure_dataset_gives_single_leaf() {
        let d = Dataset::new(
            vec![vec![0.1], vec![0.7]],
            vec![0, 0],
            vec!["a".into(), "b".into()],
            None,
        )
        .unwrap();
        let t = train_cart(&d, &CartConfig::default()).unwrap();
        assert_eq!(t.comparator_count(), 0);
        assert_eq!(t.predict(&[0.3]).unwrap(), 0);
    }

    #[test]
    fn xor_needs_three_comparators() {
        let d = xor();
        let t = train_cart(&d, &CartConfig::default()).unwrap();
        assert_eq!(t.comparator_count(), 3);
        assert_eq!(t.accuracy(&d).unwrap(), 1.0);
        // the oracle agrees that no root split improves impurity
        let rows: Vec<_> = d.rows().map(|(r, l)| (r.to_vec(), l)).collect();
        assert!((oracle_best_split(&rows, 2).unwrap().2 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn boundary_goes_left() {
        let t = DecisionTree::new(
            vec![
                Node::Split {
                    feature: 0,
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                },
                Node::Leaf { class: 0 },
                Node::Leaf { class: 1 },
            ],
            0,
            2,
            None,
        )
        .unwrap();
        assert_eq!(t.predict(&[0.5]).unwrap(), 0);
        assert_eq!(t.predict(&[0.500001]).unwrap(), 1);
        assert!(matches!(t.predict(&[]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn conflicting_duplicates_take_majority() {
        let d = data(vec![vec![0.2], vec![0.2], vec![0.2], vec![0.9]], vec![1, 0, 1, 0]);
        let t = train_cart(&d, &CartConfig::default()).unwrap();
        assert_eq!(t.predict(&[0.2]).unwrap(), 1);
        let tie = data(vec![vec![0.2], vec![0.2]], vec![1, 0]);
        let t = train_cart(&tie, &CartConfig::default()).unwrap();
        assert_eq!(t.predict(&[0.2]).unwrap(), 0);
    }

    #[test]
    fn max_depth_limits_growth() {
        let cfg = CartConfig {
            max_depth: Some(1),
            ..CartConfig::default()
        };
        let t = train_cart(&xor(), &cfg).unwrap();
        assert_eq!(t.comparator_count(), 1);
        assert_eq!(t.depth(), 1);
    }

    #[test]
    fn accuracy_complement_on_binary_task() {
        let d = data(
            vec![vec![0.1], vec![0.3], vec![0.6], vec![0.9], vec![0.35]],
            vec![0, 0, 1, 1, 1],
        );
        let cfg = CartConfig {
            max_depth: Some(1),
            ..CartConfig::default()
        };
        let t = train_cart(&d, &cfg).unwrap();
        let flipped = data(
            d.rows().map(|(r, _)| r.to_vec()).collect(),
            d.labels().iter().map(|l| 1 - l).collect(),
        );
        let a = t.accuracy(&d).unwrap();
        assert!((t.accuracy(&flipped).unwrap() - (1.0 - a)).abs() < 1e-15);
        assert!(t.accuracy(&d.subset(&[])).is_err());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let t = train_cart(&xor(), &CartConfig::default()).unwrap();
        let back = DecisionTree::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(t, back);

        let bad = r#"{"class_count":2,"root":0,"nodes":[
            {"id":0,"kind":"split","feature":0,"threshold":1.5,"left":1,"right":2},
            {"id":1,"kind":"leaf","class":0},{"id":2,"kind":"leaf","class":1}]}"#;
        assert!(DecisionTree::from_json(bad)
            .unwrap_err()
            .to_string()
            .contains("threshold"));

        let cyc = r#"{"class_count":2,"root":0,"nodes":[
            {"id":0,"kind":"split","feature":0,"threshold":0.5,"left":0,"right":1},
            {"id":1,"kind":"leaf","class":0}]}"#;
        assert!(DecisionTree::from_json(cyc).unwrap_err().to_string().contains("cycle"));

        let longer = r#"{"class_count":2,"root":10,"nodes":[
            {"id":10,"kind":"split","feature":0,"threshold":0.5,"left":11,"right":12},
            {"id":11,"kind":"split","feature":0,"threshold":0.2,"left":12,"right":10},
            {"id":12,"kind":"leaf","class":0}]}"#;
        assert!(DecisionTree::from_json(longer).is_err());

        let dangling = r#"{"class_count":2,"root":0,"nodes":[
            {"id":0,"kind":"split","feature":0,"threshold":0.5,"left":1,"right":7},
            {"id":1,"kind":"leaf","class":0}]}"#;
        assert!(DecisionTree::from_json(dangling)
            .unwrap_err()
            .to_string()
            .contains("dangling"));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tree.json");
        let t = train_cart(&xor(), &CartConfig::default()).unwrap();
        export_json(&t, &path).unwrap();
        assert_eq!(import_json(&path).unwrap(), t);
    }

    proptest! {
        #[test]
        fn default_tree_fits_consistent_data(
            rows in proptest::collection::vec((0u8..6, 0u8..6, 0usize..3), 2..60)
        ) {
            // make labels a function of the feature row so duplicates agree
            let mut label_of = HashMap::new();
            let mut feats = Vec::new();
            let mut labels = Vec::new();
            for (a, b, l) in rows {
                let l = *label_of.entry((a, b)).or_insert(l);
                feats.push(vec![f64::from(a) / 5.0, f64::from(b) / 5.0]);
                labels.push(l);
            }
            let distinct: std::collections::BTreeSet<_> = labels.iter().copied().collect();
            prop_assume!(distinct.len() >= 2);
            let names = (0..3).map(|c| c.to_string()).collect();
            let d = Dataset::new(feats, labels, names, None).unwrap();
            let t = train_cart(&d, &CartConfig::default()).unwrap();
            prop_assert_eq!(t.accuracy(&d).unwrap(), 1.0);
            // structure revalidates and predict never exceeds depth steps
            let re = DecisionTree::new(t.nodes().to_vec(), t.root(), t.class_count(), t.feature_count());
            prop_assert!(re.is_ok());
            prop_assert!(t.depth() <= t.comparator_count());
        }
    }
}
