//! Class probabilities for a set of nodes under each classifier family.
//!
//! Every function returns one row per requested node, in request order.
//! Single-label rows sum to one; multi-label rows hold independent
//! per-class probabilities of the label being present.

use ndarray::{s, Array2, ArrayView2, Axis};

use super::{softmax_groups, Classifier, ClusterStats};
use crate::error::{Error, Result};
use crate::graph::LabelKind;
use crate::partition::ClusterAssignment;

fn check_nodes(nodes: &[usize], n: usize) -> Result<()> {
    match nodes.iter().find(|&&i| i >= n) {
        Some(i) => Err(Error::invalid(format!("node {i} out of range"))),
        None => Ok(()),
    }
}

/// `[z_i, z̄_m]` for every requested node.
fn with_cluster(
    embeddings: ArrayView2<'_, f64>,
    nodes: &[usize],
    assign: &ClusterAssignment,
    stats: &ClusterStats,
) -> Result<Array2<f64>> {
    let (n, e) = embeddings.dim();
    check_nodes(nodes, n)?;
    if assign.num_nodes() != n {
        return Err(Error::dims("cluster assignment", n, assign.num_nodes()));
    }
    if stats.zbar.ncols() != e || stats.num_clusters() != assign.num_clusters() {
        return Err(Error::dims("cluster statistics", e, stats.zbar.ncols()));
    }
    let mut x = Array2::zeros((nodes.len(), 2 * e));
    for (r, &i) in nodes.iter().enumerate() {
        x.slice_mut(s![r, ..e]).assign(&embeddings.row(i));
        x.slice_mut(s![r, e..]).assign(&stats.zbar.row(assign.cluster_of(i)));
    }
    Ok(x)
}

/// Softmax (single-label) or per-class sigmoid (multi-label) of `z_i W + b`.
pub fn predict_independent(
    cls: Classifier<'_>,
    embeddings: ArrayView2<'_, f64>,
    kind: LabelKind,
    nodes: &[usize],
) -> Result<Array2<f64>> {
    check_nodes(nodes, embeddings.nrows())?;
    let logits = cls.logits(embeddings.select(Axis(0), nodes).view())?;
    Ok(match kind {
        LabelKind::Single => softmax_groups(logits.view(), logits.ncols().max(1)),
        LabelKind::Multi => logits.mapv(|x| 1.0 / (1.0 + (-x).exp())),
    })
}

/// Joint table for `[z_i, z̄_m]`, summed over the cluster label.
pub fn predict_joint(
    cls: Classifier<'_>,
    embeddings: ArrayView2<'_, f64>,
    nodes: &[usize],
    assign: &ClusterAssignment,
    stats: &ClusterStats,
) -> Result<Array2<f64>> {
    let out = cls.weight.ncols();
    let c = (out as f64).sqrt().round() as usize;
    if c * c != out {
        return Err(Error::Incompatible(format!("classifier with {out} outputs is not a joint classifier")));
    }
    let x = with_cluster(embeddings, nodes, assign, stats)?;
    let p = softmax_groups(cls.logits(x.view())?.view(), out);
    let mut marginal = Array2::zeros((nodes.len(), c));
    for j in 0..c {
        marginal.column_mut(j).assign(&p.slice(s![.., j * c..(j + 1) * c]).sum_axis(Axis(1)));
    }
    Ok(marginal)
}

/// Softmax over `c` classes of `[z_i, z̄_m]`.
pub fn predict_in_context(
    cls: Classifier<'_>,
    embeddings: ArrayView2<'_, f64>,
    nodes: &[usize],
    assign: &ClusterAssignment,
    stats: &ClusterStats,
) -> Result<Array2<f64>> {
    let x = with_cluster(embeddings, nodes, assign, stats)?;
    let logits = cls.logits(x.view())?;
    Ok(softmax_groups(logits.view(), logits.ncols().max(1)))
}

/// Per-task 2x2 joint tables; the probability that label `t` is present is
/// the sum of the table's "node has the label" row.
pub fn predict_joint_multilabel(
    cls: Classifier<'_>,
    embeddings: ArrayView2<'_, f64>,
    nodes: &[usize],
    assign: &ClusterAssignment,
    stats: &ClusterStats,
) -> Result<Array2<f64>> {
    let out = cls.weight.ncols();
    if !out.is_multiple_of(4) || out == 0 {
        return Err(Error::Incompatible(format!(
            "classifier with {out} outputs is not a multi-label joint classifier"
        )));
    }
    let x = with_cluster(embeddings, nodes, assign, stats)?;
    let p = softmax_groups(cls.logits(x.view())?.view(), 4);
    let tasks = out / 4;
    Ok(Array2::from_shape_fn((nodes.len(), tasks), |(r, t)| p[[r, 4 * t + 2]] + p[[r, 4 * t + 3]]))
}
