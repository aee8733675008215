use ndarray::{Array2, ArrayView1, ArrayView2};

use super::{CsrMatrix, Graph};
use crate::error::{Error, Result};

/// Dense node feature matrix with one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Array2<f64>,
}

impl FeatureMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let cols = values.ncols().max(1);
            return Err(Error::NonFinite(format!(
                "feature ({}, {})",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { values })
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn num_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    /// Fraction of entries that are nonzero.
    pub fn density(&self) -> f64 {
        let total = self.values.len();
        if total == 0 {
            return 0.0;
        }
        self.values.iter().filter(|&&v| v != 0.0).count() as f64 / total as f64
    }

    pub fn to_csr(&self) -> CsrMatrix {
        CsrMatrix::from_dense(self.values.view())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelKind {
    /// Exactly one class per node.
    Single,
    /// Each of the `c` classes is an independent binary task.
    Multi,
}

impl LabelKind {
    pub fn code(self) -> &'static str {
        match self {
            LabelKind::Single => "s",
            LabelKind::Multi => "m",
        }
    }
}

/// Node labels as a one-hot (single-label) or multi-hot (multi-label) matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSet {
    kind: LabelKind,
    matrix: Array2<f64>,
    classes: Vec<usize>,
}

impl LabelSet {
    /// Single-label set from class indices.
    pub fn single(num_classes: usize, classes: Vec<usize>) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::invalid("at least one class is required"));
        }
        let mut matrix = Array2::zeros((classes.len(), num_classes));
        for (i, &c) in classes.iter().enumerate() {
            if c >= num_classes {
                return Err(Error::invalid(format!(
                    "node {i} has class {c} but only {num_classes} classes exist"
                )));
            }
            matrix[[i, c]] = 1.0;
        }
        Ok(Self {
            kind: LabelKind::Single,
            matrix,
            classes,
        })
    }

    /// Multi-label set from a binary matrix.
    pub fn multi(matrix: Array2<f64>) -> Result<Self> {
        if matrix.ncols() == 0 {
            return Err(Error::invalid("at least one class is required"));
        }
        if matrix.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::invalid("multi-label entries must be 0 or 1"));
        }
        Ok(Self {
            kind: LabelKind::Multi,
            matrix,
            classes: Vec::new(),
        })
    }

    pub fn kind(&self) -> LabelKind {
        self.kind
    }

    pub fn num_classes(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn num_nodes(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.matrix.row(i)
    }

    /// Class indices (single-label only; empty for multi-label).
    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn class_of(&self, i: usize) -> usize {
        self.classes[i]
    }
}

/// Disjoint train/validation/test node sets, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMasks {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitMasks {
    pub fn new(num_nodes: usize, train: Vec<usize>, val: Vec<usize>, test: Vec<usize>) -> Result<Self> {
        let mut owner = vec![None; num_nodes];
        let mut sets = [train, val, test];
        for (k, (set, name)) in sets.iter_mut().zip(["train", "val", "test"]).enumerate() {
            set.sort_unstable();
            for &i in set.iter() {
                if i >= num_nodes {
                    return Err(Error::invalid(format!(
                        "{name} index {i} out of range for {num_nodes} nodes"
                    )));
                }
                if let Some(prev) = owner[i] {
                    let prev_name = ["train", "val", "test"][prev];
                    return Err(Error::invalid(format!(
                        "node {i} appears in both {prev_name} and {name}"
                    )));
                }
                owner[i] = Some(k);
            }
        }
        let [train, val, test] = sets;
        if train.is_empty() {
            return Err(Error::invalid("train split is empty"));
        }
        Ok(Self { train, val, test })
    }
}

/// A graph with features, labels and a train/val/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub labels: LabelSet,
    pub masks: SplitMasks,
}

impl Dataset {
    pub fn new(graph: Graph, features: FeatureMatrix, labels: LabelSet, masks: SplitMasks) -> Result<Self> {
        let n = graph.num_nodes();
        if features.num_rows() != n {
            return Err(Error::dims("dataset features", n, features.num_rows()));
        }
        if labels.num_nodes() != n {
            return Err(Error::dims("dataset labels", n, labels.num_nodes()));
        }
        let max = masks
            .train
            .iter()
            .chain(&masks.val)
            .chain(&masks.test)
            .copied()
            .max()
            .unwrap_or(0);
        if max >= n {
            return Err(Error::invalid(format!("mask index {max} out of range")));
        }
        Ok(Self {
            graph,
            features,
            labels,
            masks,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.num_classes()
    }

    /// Same dataset on a different graph over the same nodes.
    pub fn with_graph(&self, graph: Graph) -> Result<Self> {
        Self::new(graph, self.features.clone(), self.labels.clone(), self.masks.clone())
    }
}

/// Smallest over largest class count among the nodes of `mask`. Classes
/// absent from the mask are ignored.
pub fn imbalance_ratio(labels: &LabelSet, mask: &[usize]) -> Result<f64> {
    if labels.kind() != LabelKind::Single {
        return Err(Error::Incompatible("imbalance ratio needs single-label data".into()));
    }
    if mask.is_empty() {
        return Err(Error::invalid("imbalance ratio of an empty node set"));
    }
    let mut counts = vec![0usize; labels.num_classes()];
    for &i in mask {
        counts[labels.class_of(i)] += 1;
    }
    let present = counts.iter().copied().filter(|&c| c > 0);
    let min = present.clone().min().unwrap();
    let max = present.max().unwrap();
    Ok(min as f64 / max as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels_from_counts(counts: &[usize]) -> (LabelSet, Vec<usize>) {
        let classes: Vec<usize> = counts
            .iter()
            .enumerate()
            .flat_map(|(c, &k)| std::iter::repeat_n(c, k))
            .collect();
        let mask = (0..classes.len()).collect();
        (LabelSet::single(counts.len(), classes).unwrap(), mask)
    }

    #[test]
    fn imbalance_ratio_examples() {
        let (l, m) = labels_from_counts(&[10, 10]);
        assert_eq!(imbalance_ratio(&l, &m).unwrap(), 1.0);
        let (l, m) = labels_from_counts(&[5, 50]);
        assert_eq!(imbalance_ratio(&l, &m).unwrap(), 0.1);
        let (l, m) = labels_from_counts(&[1, 3, 4]);
        assert_eq!(imbalance_ratio(&l, &m).unwrap(), 0.25);
    }

    #[test]
    fn imbalance_ratio_skips_absent_classes() {
        let l = LabelSet::single(3, vec![0, 0, 2, 2]).unwrap();
        assert_eq!(imbalance_ratio(&l, &[0, 1, 2, 3]).unwrap(), 1.0);
        assert!(imbalance_ratio(&l, &[]).is_err());
    }

    #[test]
    fn masks_must_be_disjoint_and_in_range() {
        assert!(SplitMasks::new(4, vec![0, 1], vec![1], vec![2]).is_err());
        assert!(SplitMasks::new(4, vec![0], vec![], vec![4]).is_err());
        assert!(SplitMasks::new(4, vec![], vec![1], vec![2]).is_err());
        let m = SplitMasks::new(4, vec![3, 0], vec![1], vec![2]).unwrap();
        assert_eq!(m.train, vec![0, 3]);
    }

    #[test]
    fn multi_labels_must_be_binary() {
        assert!(LabelSet::multi(ndarray::array![[0.0, 0.5]]).is_err());
        let l = LabelSet::multi(ndarray::array![[0.0, 1.0], [1.0, 1.0]]).unwrap();
        assert_eq!(l.kind(), LabelKind::Multi);
    }

    #[test]
    fn single_labels_are_one_hot() {
        let l = LabelSet::single(3, vec![2, 0]).unwrap();
        for i in 0..2 {
            assert_eq!(l.row(i).sum(), 1.0);
        }
        assert!(LabelSet::single(2, vec![2]).is_err());
    }

    #[test]
    fn non_finite_features_rejected() {
        assert!(FeatureMatrix::new(ndarray::array![[1.0, f64::NAN]]).is_err());
    }
}
