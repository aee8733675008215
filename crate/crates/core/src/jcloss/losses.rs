//! Loss values and their gradients with respect to the classifier and the
//! node embeddings.
//!
//! All losses are means over the supplied nodes. Cross-entropies clamp
//! probabilities at [`PROB_FLOOR`]; a clamped term is constant and
//! contributes no gradient.

use ndarray::{s, Array2, ArrayView1, ArrayView2, Axis};

use super::{softmax_groups, Classifier, ClusterStats, PROB_FLOOR};
use crate::error::{Error, Result};
use crate::graph::{LabelKind, LabelSet};
use crate::partition::ClusterAssignment;

/// A loss value with gradients for the classifier and the embeddings.
#[derive(Debug, Clone)]
pub struct LossOutput {
    pub loss: f64,
    pub d_weight: Array2<f64>,
    pub d_bias: Array2<f64>,
    /// Gradient with respect to every node embedding (`n x e`), including
    /// the share that reaches training nodes through cluster means.
    pub d_embed: Array2<f64>,
}

/// Floored cross-entropy of one softmax block against target `t`, and its
/// gradient with respect to the block's logits (accumulated into `d`).
fn block_ce(p: ArrayView1<'_, f64>, t: ArrayView1<'_, f64>, mut d: ndarray::ArrayViewMut1<'_, f64>) -> f64 {
    let mut loss = 0.0;
    let mut active = 0.0;
    for (&pj, &tj) in p.iter().zip(t) {
        if tj != 0.0 {
            loss -= tj * pj.max(PROB_FLOOR).ln();
            if pj > PROB_FLOOR {
                active += tj;
            }
        }
    }
    for ((dk, &pk), &tk) in d.iter_mut().zip(p).zip(t) {
        let own = if pk > PROB_FLOOR { tk } else { 0.0 };
        *dk += pk * active - own;
    }
    loss
}

/// Sum over rows and blocks of floored softmax cross-entropy, with the
/// gradient with respect to the logits.
fn grouped_ce(logits: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>, group: usize) -> (f64, Array2<f64>) {
    let p = softmax_groups(logits, group);
    let mut d = Array2::zeros(p.raw_dim());
    let mut loss = 0.0;
    for r in 0..p.nrows() {
        for b in 0..p.ncols() / group {
            let span = s![r, b * group..(b + 1) * group];
            loss += block_ce(p.slice(span), targets.slice(span), d.slice_mut(span));
        }
    }
    (loss, d)
}

/// Sum of floored per-class sigmoid cross-entropies, with logit gradients.
fn sigmoid_ce(logits: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>) -> (f64, Array2<f64>) {
    let sigmoid = |x: f64| 1.0 / (1.0 + (-x).exp());
    let mut d = Array2::zeros(logits.raw_dim());
    let mut loss = 0.0;
    ndarray::Zip::from(&mut d).and(logits).and(targets).for_each(|d, &x, &y| {
        let (p1, p0) = (sigmoid(x), sigmoid(-x));
        loss -= y * p1.max(PROB_FLOOR).ln() + (1.0 - y) * p0.max(PROB_FLOOR).ln();
        let a = if p1 > PROB_FLOOR { y } else { 0.0 };
        let b = if p0 > PROB_FLOOR { 1.0 - y } else { 0.0 };
        *d = -a * p0 + b * p1;
    });
    (loss, d)
}

fn check_nodes(nodes: &[usize], n: usize) -> Result<()> {
    if nodes.is_empty() {
        return Err(Error::invalid("loss over an empty node set"));
    }
    if let Some(&i) = nodes.iter().find(|&&i| i >= n) {
        return Err(Error::invalid(format!("node {i} out of range")));
    }
    Ok(())
}

fn check_classifier(cls: Classifier<'_>, inputs: usize, outputs: usize, what: &str) -> Result<()> {
    if cls.weight.dim() != (inputs, outputs) || cls.bias.dim() != (1, outputs) {
        return Err(Error::Incompatible(format!(
            "{what} needs a {inputs} x {outputs} classifier, got {:?}",
            cls.weight.dim()
        )));
    }
    Ok(())
}

fn check_labels(labels: &LabelSet, kind: LabelKind, n: usize, what: &str) -> Result<()> {
    if labels.kind() != kind {
        let k = if kind == LabelKind::Single { "single" } else { "multi" };
        return Err(Error::Incompatible(format!("{what} requires {k}-label data")));
    }
    if labels.num_nodes() != n {
        return Err(Error::dims("labels", n, labels.num_nodes()));
    }
    Ok(())
}

/// One cross-entropy term on concatenated inputs: `[z_i, z̄_m]`, or
/// `[z̄_m, z_i]` when `swap` is set, against one target row per node.
struct Term {
    swap: bool,
    targets: Array2<f64>,
}

/// Shared core of the cluster-conditioned losses: builds the concatenated
/// inputs, evaluates every term, and routes input gradients to the node
/// embeddings directly and, unless `detach`, through the cluster means.
#[allow(clippy::too_many_arguments)]
fn concat_loss(
    cls: Classifier<'_>,
    embeddings: ArrayView2<'_, f64>,
    nodes: &[usize],
    assign: &ClusterAssignment,
    stats: &ClusterStats,
    detach: bool,
    terms: &[Term],
    group: usize,
) -> Result<LossOutput> {
    let (n, e) = embeddings.dim();
    if stats.zbar.ncols() != e || stats.num_clusters() != assign.num_clusters() {
        return Err(Error::dims("cluster statistics", e, stats.zbar.ncols()));
    }
    let rows = nodes.len();
    let zi = embeddings.select(Axis(0), nodes);
    let zb = stats.zbar.select(Axis(0), &nodes.iter().map(|&i| assign.cluster_of(i)).collect::<Vec<_>>());
    let scale = 1.0 / rows as f64;
    let mut loss = 0.0;
    let mut d_weight = Array2::zeros(cls.weight.raw_dim());
    let mut d_bias = Array2::zeros(cls.bias.raw_dim());
    let mut d_embed = Array2::zeros((n, e));
    let mut dzbar = Array2::zeros(stats.zbar.raw_dim());
    for term in terms {
        let (first, second) = if term.swap { (&zb, &zi) } else { (&zi, &zb) };
        let mut x = Array2::zeros((rows, 2 * e));
        x.slice_mut(s![.., ..e]).assign(first);
        x.slice_mut(s![.., e..]).assign(second);
        let logits = cls.logits(x.view())?;
        let (l, mut g) = grouped_ce(logits.view(), term.targets.view(), group);
        loss += l * scale;
        g *= scale;
        d_weight += &x.t().dot(&g);
        d_bias += &g.sum_axis(Axis(0)).insert_axis(Axis(0));
        let dx = g.dot(&cls.weight.t());
        let (node_part, cluster_part) = if term.swap { (s![.., e..], s![.., ..e]) } else { (s![.., ..e], s![.., e..]) };
        for (r, &i) in nodes.iter().enumerate() {
            let mut di = d_embed.row_mut(i);
            di += &dx.slice(node_part).row(r);
            let mut dm = dzbar.row_mut(assign.cluster_of(i));
            dm += &dx.slice(cluster_part).row(r);
        }
    }
    if !detach {
        stats.backprop(dzbar.view(), &mut d_embed);
    }
    Ok(LossOutput {
        loss,
        d_weight,
        d_bias,
        d_embed,
    })
}

/// Mean over `nodes` of the symmetric joint-cluster cross-entropy
/// `-[(y_i ȳ_mᵀ) · log P([z_i, z̄_m]) + (ȳ_m y_iᵀ) · log P([z̄_m, z_i])]`,
/// where `P` is a softmax over all `c²` logits read row-major as
/// (node label, cluster label).
#[allow(clippy::too_many_arguments)]
pub fn jc_loss(
    cls: Classifier<'_>,
    embeddings: ArrayView2<'_, f64>,
    labels: &LabelSet,
    nodes: &[usize],
    assign: &ClusterAssignment,
    stats: &ClusterStats,
    detach: bool,
) -> Result<LossOutput> {
    let (n, e) = embeddings.dim();
    check_labels(labels, LabelKind::Single, n, "joint-cluster loss")?;
    check_nodes(nodes, n)?;
    let c = labels.num_classes();
    check_classifier(cls, 2 * e, c * c, "joint-cluster loss")?;
    let mut forward = Array2::zeros((nodes.len(), c * c));
    let mut backward = Array2::zeros((nodes.len(), c * c));
    for (r, &i) in nodes.iter().enumerate() {
        let y = labels.row(i);
        let yb = stats.ybar.row(assign.cluster_of(i));
        for j in 0..c {
            for k in 0..c {
                forward[[r, j * c + k]] = y[j] * yb[k];
                backward[[r, j * c + k]] = yb[j] * y[k];
            }
        }
    }
    let terms = [
        Term {
            swap: false,
            targets: forward,
        },
        Term {
            swap: true,
            targets: backward,
        },
    ];
    concat_loss(cls, embeddings, nodes, assign, stats, detach, &terms, c * c)
}

/// Multi-label joint-cluster loss: each binary task `t` gets a 2x2 joint
/// table over (node has label t, cluster label share) from its own block of
/// four logits; cross-entropies are summed over tasks and both orderings,
/// then averaged over nodes.
#[allow(clippy::too_many_arguments)]
pub fn jc_multilabel_loss(
    cls: Classifier<'_>,
    embeddings: ArrayView2<'_, f64>,
    labels: &LabelSet,
    nodes: &[usize],
    assign: &ClusterAssignment,
    stats: &ClusterStats,
    detach: bool,
) -> Result<LossOutput> {
    let (n, e) = embeddings.dim();
    check_labels(labels, LabelKind::Multi, n, "multi-label joint-cluster loss")?;
    check_nodes(nodes, n)?;
    let c = labels.num_classes();
    check_classifier(cls, 2 * e, 4 * c, "multi-label joint-cluster loss")?;
    let mut forward = Array2::zeros((nodes.len(), 4 * c));
    let mut backward = Array2::zeros((nodes.len(), 4 * c));
    for (r, &i) in nodes.iter().enumerate() {
        let m = assign.cluster_of(i);
        for t in 0..c {
            let y = labels.row(i)[t];
            let yb = stats.ybar[[m, t]];
            let yv = [1.0 - y, y];
            let bv = [1.0 - yb, yb];
            for j in 0..2 {
                for k in 0..2 {
                    forward[[r, 4 * t + 2 * j + k]] = yv[j] * bv[k];
                    backward[[r, 4 * t + 2 * j + k]] = bv[j] * yv[k];
                }
            }
        }
    }
    let terms = [
        Term {
            swap: false,
            targets: forward,
        },
        Term {
            swap: true,
            targets: backward,
        },
    ];
    concat_loss(cls, embeddings, nodes, assign, stats, detach, &terms, 4)
}

/// In-context baseline: `c`-way cross-entropy of `[z_i, z̄_m]` against the
/// node label alone.
#[allow(clippy::too_many_arguments)]
pub fn ic_loss(
    cls: Classifier<'_>,
    embeddings: ArrayView2<'_, f64>,
    labels: &LabelSet,
    nodes: &[usize],
    assign: &ClusterAssignment,
    stats: &ClusterStats,
    detach: bool,
) -> Result<LossOutput> {
    let (n, e) = embeddings.dim();
    check_labels(labels, LabelKind::Single, n, "in-context loss")?;
    check_nodes(nodes, n)?;
    let c = labels.num_classes();
    check_classifier(cls, 2 * e, c, "in-context loss")?;
    let targets = labels.matrix().select(Axis(0), nodes);
    let terms = [Term { swap: false, targets }];
    concat_loss(cls, embeddings, nodes, assign, stats, detach, &terms, c)
}

/// Independent cross-entropy: softmax over `c` classes for single-label
/// data, per-class sigmoid for multi-label data.
pub fn ce_loss(cls: Classifier<'_>, embeddings: ArrayView2<'_, f64>, labels: &LabelSet, nodes: &[usize]) -> Result<LossOutput> {
    let (n, e) = embeddings.dim();
    if labels.num_nodes() != n {
        return Err(Error::dims("labels", n, labels.num_nodes()));
    }
    check_nodes(nodes, n)?;
    let c = labels.num_classes();
    check_classifier(cls, e, c, "cross-entropy loss")?;
    let x = embeddings.select(Axis(0), nodes);
    let targets = labels.matrix().select(Axis(0), nodes);
    let logits = cls.logits(x.view())?;
    let (l, mut g) = match labels.kind() {
        LabelKind::Single => grouped_ce(logits.view(), targets.view(), c),
        LabelKind::Multi => sigmoid_ce(logits.view(), targets.view()),
    };
    let scale = 1.0 / nodes.len() as f64;
    g *= scale;
    let mut d_embed = Array2::zeros((n, e));
    let dx = g.dot(&cls.weight.t());
    for (r, &i) in nodes.iter().enumerate() {
        d_embed.row_mut(i).assign(&dx.row(r));
    }
    Ok(LossOutput {
        loss: l * scale,
        d_weight: x.t().dot(&g),
        d_bias: g.sum_axis(Axis(0)).insert_axis(Axis(0)),
        d_embed,
    })
}

/// Cross-entropy plus `beta` times the mean, over clusters with training
/// nodes, of the cross-entropy of the cluster embedding against the soft
/// cluster label.
#[allow(clippy::too_many_arguments)]
pub fn mixup_loss(
    cls: Classifier<'_>,
    embeddings: ArrayView2<'_, f64>,
    labels: &LabelSet,
    nodes: &[usize],
    stats: &ClusterStats,
    beta: f64,
    detach: bool,
) -> Result<LossOutput> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::invalid(format!("mixup weight {beta} must be finite and non-negative")));
    }
    let (_, e) = embeddings.dim();
    check_labels(labels, LabelKind::Single, embeddings.nrows(), "mixup loss")?;
    let mut out = ce_loss(cls, embeddings, labels, nodes)?;
    if beta == 0.0 {
        return Ok(out);
    }
    if stats.zbar.ncols() != e {
        return Err(Error::dims("cluster statistics", e, stats.zbar.ncols()));
    }
    let clusters: Vec<usize> = (0..stats.num_clusters()).filter(|&m| stats.counts[m] > 0).collect();
    let x = stats.zbar.select(Axis(0), &clusters);
    let targets = stats.ybar.select(Axis(0), &clusters);
    let logits = cls.logits(x.view())?;
    let c = labels.num_classes();
    let (l, mut g) = grouped_ce(logits.view(), targets.view(), c);
    g *= beta / clusters.len() as f64;
    out.loss += beta * l / clusters.len() as f64;
    out.d_weight += &x.t().dot(&g);
    out.d_bias += &g.sum_axis(Axis(0)).insert_axis(Axis(0));
    if !detach {
        let dx = g.dot(&cls.weight.t());
        let mut dzbar = Array2::zeros(stats.zbar.raw_dim());
        for (r, &m) in clusters.iter().enumerate() {
            dzbar.row_mut(m).assign(&dx.row(r));
        }
        stats.backprop(dzbar.view(), &mut out.d_embed);
    }
    Ok(out)
}
