//! Joint node–cluster supervision.
//!
//! Every labeled node `i` in cluster `m` is paired with the cluster's mean
//! labeled embedding `z̄_m` and mean label `ȳ_m`. The classifier reads the
//! concatenation `[z_i, z̄_m]` and predicts a `c x c` table whose entry
//! `(j, k)` is the probability that the node has label `j` while the
//! cluster has label `k`; the target is the outer product `y_i ȳ_mᵀ`. A
//! second, symmetric term reads `[z̄_m, z_i]` against `ȳ_m y_iᵀ`. At
//! inference the table is summed over its cluster dimension.
//!
//! This module also provides the independent cross-entropy baseline and the
//! in-context and mixup variants, plus the per-task 2x2 extension for
//! multi-label data.

mod losses;
mod predict;

pub use losses::{ce_loss, ic_loss, jc_loss, jc_multilabel_loss, mixup_loss, LossOutput};
pub use predict::{predict_in_context, predict_independent, predict_joint, predict_joint_multilabel};

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::graph::LabelSet;
use crate::nn::Model;
use crate::partition::ClusterAssignment;

/// Probabilities below this value are clamped inside logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// Tolerance for "sums to one" checks on tables and distributions.
const SUM_TOL: f64 = 1e-9;

/// Borrowed classifier weights `W` (`in x out`) and bias `b` (`1 x out`).
#[derive(Debug, Clone, Copy)]
pub struct Classifier<'a> {
    pub weight: &'a Array2<f64>,
    pub bias: &'a Array2<f64>,
}

impl<'a> Classifier<'a> {
    pub fn of(model: &'a Model) -> Self {
        Self {
            weight: model.classifier_weight(),
            bias: model.classifier_bias(),
        }
    }

    fn logits(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        crate::nn::linear_forward(x, self.weight, self.bias)
    }
}

/// Per-cluster means of the embeddings and labels of training nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterStats {
    /// `M x e` mean embedding per cluster.
    pub zbar: Array2<f64>,
    /// `M x c` mean label per cluster.
    pub ybar: Array2<f64>,
    /// Number of training nodes `L_m` in each cluster.
    pub counts: Vec<usize>,
    /// Training nodes of each cluster.
    members: Vec<Vec<usize>>,
    /// All training nodes, used for clusters without any.
    train: Vec<usize>,
}

/// Averages embeddings and labels over the training nodes of each cluster.
/// A cluster without training nodes receives the global training means.
pub fn cluster_stats(
    embeddings: ArrayView2<'_, f64>,
    labels: &LabelSet,
    train: &[usize],
    assign: &ClusterAssignment,
) -> Result<ClusterStats> {
    if train.is_empty() {
        return Err(Error::invalid("cluster statistics need at least one training node"));
    }
    let n = embeddings.nrows();
    if assign.num_nodes() != n || labels.num_nodes() != n {
        return Err(Error::dims("cluster statistics", n, assign.num_nodes().max(labels.num_nodes())));
    }
    let m = assign.num_clusters();
    let (e, c) = (embeddings.ncols(), labels.num_classes());
    let mut members = vec![Vec::new(); m];
    for &i in train {
        members[assign.cluster_of(i)].push(i);
    }
    let mean_of = |nodes: &[usize]| {
        let inv = 1.0 / nodes.len() as f64;
        let mut z = Array1::zeros(e);
        let mut y = Array1::zeros(c);
        for &i in nodes {
            z += &embeddings.row(i);
            y += &labels.row(i);
        }
        (z * inv, y * inv)
    };
    let global = mean_of(train);
    let mut zbar = Array2::zeros((m, e));
    let mut ybar = Array2::zeros((m, c));
    for (k, nodes) in members.iter().enumerate() {
        let (z, y) = if nodes.is_empty() { global.clone() } else { mean_of(nodes) };
        zbar.row_mut(k).assign(&z);
        ybar.row_mut(k).assign(&y);
    }
    Ok(ClusterStats {
        zbar,
        ybar,
        counts: members.iter().map(Vec::len).collect(),
        members,
        train: train.to_vec(),
    })
}

impl ClusterStats {
    pub fn num_clusters(&self) -> usize {
        self.counts.len()
    }

    /// Training nodes whose embeddings were averaged into cluster `m`.
    pub fn contributors(&self, m: usize) -> &[usize] {
        if self.members[m].is_empty() {
            &self.train
        } else {
            &self.members[m]
        }
    }

    /// Adds the gradient reaching each contributing embedding through the
    /// means: `dzbar[m] / L_m` to every training node of cluster `m`.
    pub fn backprop(&self, dzbar: ArrayView2<'_, f64>, d_embed: &mut Array2<f64>) {
        for m in 0..self.num_clusters() {
            let row = dzbar.row(m);
            if row.iter().all(|&v| v == 0.0) {
                continue;
            }
            let nodes = self.contributors(m);
            let share = &row / nodes.len() as f64;
            for &i in nodes {
                let mut target = d_embed.row_mut(i);
                target += &share;
            }
        }
    }
}

/// Probability table over (node label, cluster label) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    values: Array2<f64>,
}

impl JointTable {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.nrows() != values.ncols() || values.is_empty() {
            return Err(Error::invalid("joint table must be square and non-empty"));
        }
        if values.iter().any(|&v| v.is_nan() || v < 0.0) {
            return Err(Error::invalid("joint table entries must be non-negative"));
        }
        let total = values.sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::invalid(format!("joint table sums to {total}, expected 1")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn num_classes(&self) -> usize {
        self.values.nrows()
    }
}

fn check_distribution(v: ArrayView1<'_, f64>, what: &str) -> Result<()> {
    if v.iter().any(|&p| p.is_nan() || p < 0.0) || (v.sum() - 1.0).abs() > SUM_TOL {
        return Err(Error::invalid(format!("{what} is not a probability distribution")));
    }
    Ok(())
}

/// Target table `y ȳᵀ`: rows follow the node label, columns the cluster
/// label.
pub fn joint_label(y: ArrayView1<'_, f64>, ybar: ArrayView1<'_, f64>) -> Result<JointTable> {
    if y.len() != ybar.len() {
        return Err(Error::dims("joint label", y.len(), ybar.len()));
    }
    check_distribution(y, "node label")?;
    check_distribution(ybar, "cluster label")?;
    let outer = y.insert_axis(Axis(1)).dot(&ybar.insert_axis(Axis(0)));
    JointTable::new(outer)
}

/// Sums a joint table over its cluster dimension.
pub fn marginalize(t: &JointTable) -> Vec<f64> {
    t.values.sum_axis(Axis(1)).to_vec()
}

/// Softmax over all `c²` logits of `[z, zbar]`, reshaped to `c x c`.
pub fn joint_forward(
    classifier: Classifier<'_>,
    z: ArrayView1<'_, f64>,
    zbar: ArrayView1<'_, f64>,
) -> Result<JointTable> {
    if z.len() != zbar.len() {
        return Err(Error::dims("joint classifier input", z.len(), zbar.len()));
    }
    let out = classifier.weight.ncols();
    let c = (out as f64).sqrt().round() as usize;
    if c * c != out {
        return Err(Error::Incompatible(format!("classifier with {out} outputs is not a joint classifier")));
    }
    let mut x = Array2::zeros((1, 2 * z.len()));
    x.slice_mut(s![0, ..z.len()]).assign(&z);
    x.slice_mut(s![0, z.len()..]).assign(&zbar);
    let logits = classifier.logits(x.view())?;
    let p = softmax_groups(logits.view(), out).remove_axis(Axis(0));
    JointTable::new(p.into_shape_with_order((c, c)).expect("c * c entries"))
}

/// Row-wise softmax applied independently to consecutive blocks of
/// `group` columns.
pub(crate) fn softmax_groups(logits: ArrayView2<'_, f64>, group: usize) -> Array2<f64> {
    let mut p = logits.to_owned();
    for mut row in p.rows_mut() {
        for mut block in row.exact_chunks_mut(group) {
            let max = block.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            block.mapv_inplace(|v| (v - max).exp());
            let sum = block.sum();
            block.mapv_inplace(|v| v / sum);
        }
    }
    p
}
