//! Full-batch training: partition once, then per epoch run the encoder,
//! refresh cluster statistics, take one Adam step on the configured loss,
//! and keep the parameters with the best validation score.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Dataset, LabelKind};
use crate::jcloss::{
    ce_loss, cluster_stats, ic_loss, jc_loss, jc_multilabel_loss, mixup_loss, predict_in_context, predict_independent,
    predict_joint, predict_joint_multilabel, Classifier, ClusterStats, LossOutput,
};
use crate::metrics::{loss_gap, Metrics, PredictionBatch};
use crate::nn::{encoder_backward, encoder_forward, Adam, AdamConfig, ClassifierKind, EncoderKind, Model, ModelInput, ModelSpec, Params};
use crate::partition::{partition_kmeans, partition_metis_like, partition_random, ClusterAssignment};

/// Lloyd iterations allowed when partitioning by k-means.
const KMEANS_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Independent per-node cross-entropy.
    Ce,
    /// Joint node–cluster cross-entropy with marginalized inference.
    Jc,
    /// Node label predicted from the node and cluster embeddings.
    Ic,
    /// Cross-entropy plus a weighted cross-entropy on cluster means.
    Mixup,
    /// Per-task joint node–cluster loss for multi-label data.
    JcMultilabel,
}

impl LossKind {
    pub const ALL: [LossKind; 5] = [LossKind::Ce, LossKind::Jc, LossKind::Ic, LossKind::Mixup, LossKind::JcMultilabel];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Ce => "ce",
            LossKind::Jc => "jc",
            LossKind::Ic => "ic",
            LossKind::Mixup => "mixup",
            LossKind::JcMultilabel => "jc-multilabel",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown loss {s:?} (expected ce, jc, ic, mixup or jc-multilabel)")))
    }

    pub fn classifier(self) -> ClassifierKind {
        match self {
            LossKind::Ce | LossKind::Mixup => ClassifierKind::Independent,
            LossKind::Jc => ClassifierKind::Joint,
            LossKind::Ic => ClassifierKind::InContext,
            LossKind::JcMultilabel => ClassifierKind::JointMultilabel,
        }
    }

    /// Whether the loss needs a node partition.
    pub fn uses_clusters(self) -> bool {
        self != LossKind::Ce
    }

    /// Label kind the loss is defined for; `None` when it accepts both.
    pub fn label_kind(self) -> Option<LabelKind> {
        match self {
            LossKind::Ce => None,
            LossKind::JcMultilabel => Some(LabelKind::Multi),
            _ => Some(LabelKind::Single),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionMethod {
    MetisLike,
    KMeans,
    Random,
    /// Read from [`TrainConfig::partition_file`].
    File,
}

impl PartitionMethod {
    pub fn name(self) -> &'static str {
        match self {
            PartitionMethod::MetisLike => "metis-like",
            PartitionMethod::KMeans => "kmeans",
            PartitionMethod::Random => "random",
            PartitionMethod::File => "file",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "metis-like" => Ok(PartitionMethod::MetisLike),
            "kmeans" => Ok(PartitionMethod::KMeans),
            "random" => Ok(PartitionMethod::Random),
            "file" => Ok(PartitionMethod::File),
            _ => Err(Error::invalid(format!(
                "unknown partition method {s:?} (expected metis-like, kmeans, random or file)"
            ))),
        }
    }
}

/// Everything that determines a training run besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub encoder: EncoderKind,
    pub layers: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub loss: LossKind,
    pub partition: PartitionMethod,
    pub partition_file: Option<PathBuf>,
    pub num_clusters: usize,
    pub adam: AdamConfig,
    pub epochs: usize,
    /// Validation is run every this many epochs (and after the last one).
    pub eval_every: usize,
    pub seed: u64,
    /// Stop gradients at the cluster means.
    pub detach_clusters: bool,
    /// Weight of the cluster term of the mixup loss.
    pub beta: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderKind::Gcn,
            layers: 2,
            hidden: 64,
            dropout: 0.5,
            loss: LossKind::Ce,
            partition: PartitionMethod::MetisLike,
            partition_file: None,
            num_clusters: 5,
            adam: AdamConfig::default(),
            epochs: 300,
            eval_every: 1,
            seed: 0,
            detach_clusters: false,
            beta: 1.0,
        }
    }
}

/// Keys accepted by [`TrainConfig::set`], in the order they are echoed.
pub const CONFIG_KEYS: [&str; 16] = [
    "encoder",
    "layers",
    "hidden",
    "dropout",
    "loss",
    "partition",
    "partition_file",
    "num_clusters",
    "lr",
    "weight_decay",
    "epochs",
    "eval_every",
    "seed",
    "detach_clusters",
    "beta",
    "adam_eps",
];

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("bad value {value:?} for {key}")))
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eval_every == 0 {
            return Err(Error::invalid("eval_every must be at least 1"));
        }
        if self.loss.uses_clusters() && self.num_clusters == 0 {
            return Err(Error::invalid("cluster-based losses need num_clusters >= 1"));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid(format!("beta {} must be finite and non-negative", self.beta)));
        }
        let a = &self.adam;
        let positive = |v: f64| v > 0.0 && v.is_finite();
        let non_negative = |v: f64| v >= 0.0 && v.is_finite();
        if !positive(a.lr) || !positive(a.eps) || !non_negative(a.weight_decay) {
            return Err(Error::invalid("learning rate and eps must be positive, weight decay non-negative"));
        }
        if !((0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2)) {
            return Err(Error::invalid("Adam moment decay rates must lie in [0, 1)"));
        }
        if self.loss.uses_clusters() && self.partition == PartitionMethod::File && self.partition_file.is_none() {
            return Err(Error::invalid("partition = file requires partition_file"));
        }
        Ok(())
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "encoder" => self.encoder = EncoderKind::parse(value)?,
            "layers" => self.layers = parse_value(key, value)?,
            "hidden" => self.hidden = parse_value(key, value)?,
            "dropout" => self.dropout = parse_value(key, value)?,
            "loss" => self.loss = LossKind::parse(value)?,
            "partition" => self.partition = PartitionMethod::parse(value)?,
            "partition_file" => self.partition_file = Some(PathBuf::from(value)),
            "num_clusters" => self.num_clusters = parse_value(key, value)?,
            "lr" => self.adam.lr = parse_value(key, value)?,
            "weight_decay" => self.adam.weight_decay = parse_value(key, value)?,
            "adam_eps" => self.adam.eps = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "eval_every" => self.eval_every = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "detach_clusters" => self.detach_clusters = parse_value(key, value)?,
            "beta" => self.beta = parse_value(key, value)?,
            _ => return Err(Error::invalid(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    /// Every field as `(key, value)` text, in [`CONFIG_KEYS`] order;
    /// `partition_file` is omitted when unset.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::with_capacity(CONFIG_KEYS.len());
        for key in CONFIG_KEYS {
            let value = match key {
                "encoder" => self.encoder.name().to_string(),
                "layers" => self.layers.to_string(),
                "hidden" => self.hidden.to_string(),
                "dropout" => self.dropout.to_string(),
                "loss" => self.loss.name().to_string(),
                "partition" => self.partition.name().to_string(),
                "partition_file" => match &self.partition_file {
                    Some(p) => p.display().to_string(),
                    None => continue,
                },
                "num_clusters" => self.num_clusters.to_string(),
                "lr" => self.adam.lr.to_string(),
                "weight_decay" => self.adam.weight_decay.to_string(),
                "adam_eps" => self.adam.eps.to_string(),
                "epochs" => self.epochs.to_string(),
                "eval_every" => self.eval_every.to_string(),
                "seed" => self.seed.to_string(),
                "detach_clusters" => self.detach_clusters.to_string(),
                "beta" => self.beta.to_string(),
                _ => unreachable!("every configuration key is echoed"),
            };
            out.push((key, value));
        }
        out
    }

    /// Model architecture for `data` under this configuration.
    pub fn model_spec(&self, data: &Dataset) -> ModelSpec {
        ModelSpec {
            encoder: self.encoder,
            layers: self.layers,
            hidden: self.hidden,
            input_dim: data.features.dim(),
            num_classes: data.num_classes(),
            dropout: self.dropout,
            classifier: self.loss.classifier(),
        }
    }

    fn check_data(&self, data: &Dataset) -> Result<()> {
        if let Some(kind) = self.loss.label_kind() {
            if kind != data.labels.kind() {
                return Err(Error::Incompatible(format!(
                    "loss {} does not apply to {}-label data",
                    self.loss.name(),
                    if data.labels.kind() == LabelKind::Single { "single" } else { "multi" }
                )));
            }
        }
        Ok(())
    }
}

/// Builds the node partition required by `cfg`, seeded by `cfg.seed`.
pub fn partition_for(cfg: &TrainConfig, data: &Dataset) -> Result<ClusterAssignment> {
    let (n, m) = (data.num_nodes(), cfg.num_clusters);
    let assign = match cfg.partition {
        PartitionMethod::MetisLike => partition_metis_like(&data.graph, m, cfg.seed)?,
        PartitionMethod::KMeans => partition_kmeans(&data.features, m, cfg.seed, KMEANS_MAX_ITER)?,
        PartitionMethod::Random => partition_random(n, m, cfg.seed)?,
        PartitionMethod::File => {
            let path = cfg
                .partition_file
                .as_ref()
                .ok_or_else(|| Error::invalid("partition = file requires partition_file"))?;
            ClusterAssignment::read(path)?
        }
    };
    if assign.num_nodes() != n {
        return Err(Error::dims("cluster assignment", n, assign.num_nodes()));
    }
    Ok(assign)
}

/// Loss of the configured kind over `nodes`, given embeddings and, for
/// cluster losses, the partition and statistics over training nodes.
#[allow(clippy::too_many_arguments)]
fn dispatch_loss(
    cfg: &TrainConfig,
    cls: Classifier<'_>,
    emb: ArrayView2<'_, f64>,
    data: &Dataset,
    nodes: &[usize],
    clusters: Option<(&ClusterAssignment, &ClusterStats)>,
) -> Result<LossOutput> {
    let labels = &data.labels;
    let detach = cfg.detach_clusters;
    let need = || clusters.ok_or_else(|| Error::Incompatible(format!("loss {} needs a partition", cfg.loss.name())));
    match cfg.loss {
        LossKind::Ce => ce_loss(cls, emb, labels, nodes),
        LossKind::Jc => {
            let (a, s) = need()?;
            jc_loss(cls, emb, labels, nodes, a, s, detach)
        }
        LossKind::Ic => {
            let (a, s) = need()?;
            ic_loss(cls, emb, labels, nodes, a, s, detach)
        }
        LossKind::Mixup => {
            let (_, s) = need()?;
            mixup_loss(cls, emb, labels, nodes, s, cfg.beta, detach)
        }
        LossKind::JcMultilabel => {
            let (a, s) = need()?;
            jc_multilabel_loss(cls, emb, labels, nodes, a, s, detach)
        }
    }
}

fn dispatch_predict(
    cfg: &TrainConfig,
    cls: Classifier<'_>,
    emb: ArrayView2<'_, f64>,
    data: &Dataset,
    nodes: &[usize],
    clusters: Option<(&ClusterAssignment, &ClusterStats)>,
) -> Result<Array2<f64>> {
    let need = || clusters.ok_or_else(|| Error::Incompatible(format!("loss {} needs a partition", cfg.loss.name())));
    match cfg.loss {
        LossKind::Ce | LossKind::Mixup => predict_independent(cls, emb, data.labels.kind(), nodes),
        LossKind::Jc => {
            let (a, s) = need()?;
            predict_joint(cls, emb, nodes, a, s)
        }
        LossKind::Ic => {
            let (a, s) = need()?;
            predict_in_context(cls, emb, nodes, a, s)
        }
        LossKind::JcMultilabel => {
            let (a, s) = need()?;
            predict_joint_multilabel(cls, emb, nodes, a, s)
        }
    }
}

/// Loss on the training nodes and its gradient with respect to every
/// parameter, with cluster statistics recomputed from the same forward
/// pass. `train` enables dropout with masks drawn from `seed`.
///
/// With `detach_clusters` unset this is the exact derivative of the
/// returned loss, so it can be passed to [`crate::nn::grad_check`].
pub fn loss_and_grad(
    model: &Model,
    input: &ModelInput,
    cfg: &TrainConfig,
    data: &Dataset,
    assign: Option<&ClusterAssignment>,
    train: bool,
    seed: u64,
) -> Result<(f64, Params)> {
    let (emb, tape) = encoder_forward(model, input, train, seed)?;
    let train_nodes = &data.masks.train;
    let stats = match assign {
        Some(a) if cfg.loss.uses_clusters() => Some(cluster_stats(emb.view(), &data.labels, train_nodes, a)?),
        _ => None,
    };
    let clusters = assign.zip(stats.as_ref());
    let out = dispatch_loss(cfg, Classifier::of(model), emb.view(), data, train_nodes, clusters)?;
    let mut grads = encoder_backward(model, input, tape, out.d_embed.view())?;
    let ci = model.classifier_index();
    *grads.tensor_mut(ci) = out.d_weight;
    *grads.tensor_mut(ci + 1) = out.d_bias;
    Ok((out.loss, grads))
}

/// Losses and metrics of one model on every split.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub train_loss: f64,
    pub val_loss: f64,
    pub test_loss: f64,
    pub val: Metrics,
    pub test: Metrics,
}

impl Evaluation {
    /// Model-selection score: accuracy for single-label data, micro-F1 for
    /// multi-label data.
    pub fn val_score(&self, kind: LabelKind) -> f64 {
        selection_score(&self.val, kind)
    }
}

fn selection_score(m: &Metrics, kind: LabelKind) -> f64 {
    match kind {
        LabelKind::Single => m.accuracy,
        LabelKind::Multi => m.f1.micro,
    }
}

/// Metrics over `nodes`; an empty node set yields `None`.
fn split_metrics(
    cfg: &TrainConfig,
    model: &Model,
    emb: ArrayView2<'_, f64>,
    data: &Dataset,
    nodes: &[usize],
    clusters: Option<(&ClusterAssignment, &ClusterStats)>,
) -> Result<(f64, Metrics)> {
    if nodes.is_empty() {
        return Err(Error::invalid("evaluation split is empty"));
    }
    let cls = Classifier::of(model);
    let loss = dispatch_loss(cfg, cls, emb, data, nodes, clusters)?.loss;
    let probs = dispatch_predict(cfg, cls, emb, data, nodes, clusters)?;
    let metrics = Metrics::of(&PredictionBatch::for_nodes(probs, &data.labels, nodes)?)?;
    Ok((loss, metrics))
}

/// Evaluation-mode losses and metrics on all splits (no dropout). Cluster
/// statistics come from the training nodes of the same forward pass.
fn evaluate_all(
    model: &Model,
    input: &ModelInput,
    cfg: &TrainConfig,
    data: &Dataset,
    assign: Option<&ClusterAssignment>,
) -> Result<Evaluation> {
    let (emb, _) = encoder_forward(model, input, false, 0)?;
    let stats = match assign {
        Some(a) => Some(cluster_stats(emb.view(), &data.labels, &data.masks.train, a)?),
        None => None,
    };
    let clusters = assign.zip(stats.as_ref());
    let masks = &data.masks;
    let cls = Classifier::of(model);
    let train_loss = dispatch_loss(cfg, cls, emb.view(), data, &masks.train, clusters)?.loss;
    let (val_loss, val) = split_metrics(cfg, model, emb.view(), data, &masks.val, clusters)?;
    let (test_loss, test) = split_metrics(cfg, model, emb.view(), data, &masks.test, clusters)?;
    Ok(Evaluation {
        train_loss,
        val_loss,
        test_loss,
        val,
        test,
    })
}

/// Metrics of `model` on the node set `split`, in evaluation mode.
///
/// Predictions follow the loss: marginalized joint tables for the joint
/// losses, `[z, z̄]` softmax for the in-context loss, plain softmax (or
/// sigmoid) otherwise.
pub fn evaluate(
    model: &Model,
    cfg: &TrainConfig,
    data: &Dataset,
    assign: Option<&ClusterAssignment>,
    split: &[usize],
) -> Result<Metrics> {
    let input = ModelInput::new(&model.spec, &data.graph, &data.features)?;
    let (emb, _) = encoder_forward(model, &input, false, 0)?;
    let stats = match assign {
        Some(a) if cfg.loss.uses_clusters() => Some(cluster_stats(emb.view(), &data.labels, &data.masks.train, a)?),
        _ => None,
    };
    split_metrics(cfg, model, emb.view(), data, split, assign.zip(stats.as_ref())).map(|(_, m)| m)
}

/// Evaluation-mode quantities recorded at one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub test_loss: f64,
    /// Validation accuracy (micro-F1 for multi-label data).
    pub val_score: f64,
}

/// Outcome of one training run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: TrainConfig,
    /// Epoch whose parameters scored best on validation (0 = initial).
    pub best_epoch: usize,
    pub best_val_score: f64,
    pub val: Metrics,
    pub test: Metrics,
    /// One record per evaluated epoch, starting with the initial model.
    pub curves: Vec<EpochRecord>,
    /// Wall-clock seconds of each training epoch.
    pub epoch_seconds: Vec<f64>,
    pub model: Model,
    pub assignment: Option<ClusterAssignment>,
}

impl RunResult {
    /// Normalized test-minus-train loss gap over the recorded epochs.
    pub fn loss_gap(&self) -> Result<Vec<f64>> {
        let train: Vec<f64> = self.curves.iter().map(|r| r.train_loss).collect();
        let test: Vec<f64> = self.curves.iter().map(|r| r.test_loss).collect();
        loss_gap(&train, &test)
    }

    /// `key = value` summary: the configuration followed by the results.
    /// Timing is left out so repeated runs produce identical files.
    pub fn to_result_string(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.config.pairs() {
            writeln!(out, "{k} = {v}").unwrap();
        }
        let mut put = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
        put("best_epoch", self.best_epoch.to_string());
        put("best_val_score", self.best_val_score.to_string());
        for (prefix, m) in [("val", &self.val), ("test", &self.test)] {
            put(&format!("{prefix}_acc"), m.accuracy.to_string());
            put(&format!("{prefix}_f1_micro"), m.f1.micro.to_string());
            put(&format!("{prefix}_f1_macro"), m.f1.macro_.to_string());
            put(&format!("{prefix}_f1_weighted"), m.f1.weighted.to_string());
            put(&format!("{prefix}_ece"), m.ece.to_string());
        }
        if let Some(last) = self.loss_gap().ok().and_then(|g| g.last().copied()) {
            put("final_loss_gap", last.to_string());
        }
        out
    }

    /// Per-epoch curves as CSV.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,test_loss,val_acc\n");
        for r in &self.curves {
            writeln!(out, "{},{},{},{},{}", r.epoch, r.train_loss, r.val_loss, r.test_loss, r.val_score).unwrap();
        }
        out
    }
}

/// Dropout seed of one epoch, derived from the run seed.
fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed ^ (epoch as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Trains a model from scratch on `data`.
pub fn train(cfg: &TrainConfig, data: &Dataset) -> Result<RunResult> {
    cfg.validate()?;
    cfg.check_data(data)?;
    let spec = cfg.model_spec(data);
    let mut model = Model::init(spec, cfg.seed)?;
    let input = ModelInput::new(&model.spec, &data.graph, &data.features)?;
    let assignment = if cfg.loss.uses_clusters() {
        Some(partition_for(cfg, data)?)
    } else {
        None
    };
    let assign = assignment.as_ref();
    let kind = data.labels.kind();
    let mut adam = Adam::new(cfg.adam, &model.params);

    let first = evaluate_all(&model, &input, cfg, data, assign)?;
    let mut curves = vec![record(0, &first, kind)];
    let mut best = (0, first.val_score(kind), model.params.clone(), first);
    let mut epoch_seconds = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        let (loss, grads) = loss_and_grad(&model, &input, cfg, data, assign, true, epoch_seed(cfg.seed, epoch))
            .map_err(|e| diverged(e, epoch))?;
        if !loss.is_finite() || !grads.all_finite() {
            return Err(Error::Diverged {
                epoch,
                reason: format!("non-finite training loss {loss} or gradient"),
            });
        }
        adam.step(&mut model.params, &grads).map_err(|e| diverged(e, epoch))?;
        epoch_seconds.push(start.elapsed().as_secs_f64());
        if epoch % cfg.eval_every == 0 || epoch == cfg.epochs {
            let eval = evaluate_all(&model, &input, cfg, data, assign).map_err(|e| diverged(e, epoch))?;
            let rec = record(epoch, &eval, kind);
            log::debug!(
                "epoch {epoch}: train {:.4} val {:.4} test {:.4} val_score {:.4}",
                rec.train_loss,
                rec.val_loss,
                rec.test_loss,
                rec.val_score
            );
            if rec.val_score > best.1 {
                best = (epoch, rec.val_score, model.params.clone(), eval);
            }
            curves.push(rec);
        }
    }

    let (best_epoch, best_val_score, params, eval) = best;
    model.params = params;
    log::info!(
        "{} {} seed {}: best epoch {best_epoch}, val {best_val_score:.4}, test acc {:.4}",
        cfg.encoder.name(),
        cfg.loss.name(),
        cfg.seed,
        eval.test.accuracy
    );
    Ok(RunResult {
        config: cfg.clone(),
        best_epoch,
        best_val_score,
        val: eval.val,
        test: eval.test,
        curves,
        epoch_seconds,
        model,
        assignment,
    })
}

fn record(epoch: usize, e: &Evaluation, kind: LabelKind) -> EpochRecord {
    EpochRecord {
        epoch,
        train_loss: e.train_loss,
        val_loss: e.val_loss,
        test_loss: e.test_loss,
        val_score: e.val_score(kind),
    }
}

/// Numerical failures during an epoch become [`Error::Diverged`].
fn diverged(e: Error, epoch: usize) -> Error {
    match e {
        Error::NonFinite(what) => Error::Diverged { epoch, reason: what },
        other => other,
    }
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

/// Test metrics aggregated over several seeds.
#[derive(Debug, Clone)]
pub struct MultiSeedSummary {
    pub runs: Vec<RunResult>,
    pub accuracy: MeanStd,
    pub f1_micro: MeanStd,
    pub f1_macro: MeanStd,
    pub f1_weighted: MeanStd,
    pub ece: MeanStd,
}

impl MultiSeedSummary {
    fn of(runs: Vec<RunResult>) -> Self {
        let stat = |f: fn(&Metrics) -> f64| MeanStd::of(&runs.iter().map(|r| f(&r.test)).collect::<Vec<_>>());
        Self {
            accuracy: stat(|m| m.accuracy),
            f1_micro: stat(|m| m.f1.micro),
            f1_macro: stat(|m| m.f1.macro_),
            f1_weighted: stat(|m| m.f1.weighted),
            ece: stat(|m| m.ece),
            runs,
        }
    }
}

/// Trains with seeds `cfg.seed .. cfg.seed + k` in parallel; results are in
/// seed order.
pub fn multi_seed(cfg: &TrainConfig, data: &Dataset, k: usize) -> Result<MultiSeedSummary> {
    if k == 0 {
        return Err(Error::invalid("multi-seed run needs at least one seed"));
    }
    let runs = (0..k as u64)
        .into_par_iter()
        .map(|offset| {
            let seed = cfg.seed.wrapping_add(offset);
            let cfg = TrainConfig { seed, ..cfg.clone() };
            train(&cfg, data).map_err(|e| Error::Seeded {
                seed,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MultiSeedSummary::of(runs))
}
