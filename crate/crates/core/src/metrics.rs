//! Classification metrics: accuracy, F1 (micro, macro, weighted), expected
//! calibration error, and the normalized train/test loss gap.
//!
//! Multi-label predictions are binarized per class at probability 0.5
//! (`p >= 0.5` means "present"); counts then run over (node, class) pairs.

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::graph::{LabelKind, LabelSet};

/// Number of confidence bins used for reported calibration error.
pub const ECE_BINS: usize = 10;

const ROW_SUM_TOL: f64 = 1e-6;

/// Predicted class probabilities together with the true labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionBatch {
    probs: Array2<f64>,
    kind: LabelKind,
    /// True class per row (single-label).
    classes: Vec<usize>,
    /// Binary targets (multi-label); empty for single-label batches.
    targets: Array2<f64>,
}

impl PredictionBatch {
    /// Single-label batch; every row must be a probability distribution.
    pub fn single(probs: Array2<f64>, classes: Vec<usize>) -> Result<Self> {
        if probs.nrows() != classes.len() {
            return Err(Error::dims("prediction batch", probs.nrows(), classes.len()));
        }
        let c = probs.ncols();
        if let Some(&k) = classes.iter().find(|&&k| k >= c) {
            return Err(Error::invalid(format!("class {k} out of range for {c} classes")));
        }
        for (r, row) in probs.rows().into_iter().enumerate() {
            if row.iter().any(|&p| !(0.0..=1.0 + ROW_SUM_TOL).contains(&p)) || (row.sum() - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::invalid(format!("prediction row {r} is not a distribution")));
            }
        }
        Ok(Self {
            probs,
            kind: LabelKind::Single,
            classes,
            targets: Array2::zeros((0, 0)),
        })
    }

    /// Multi-label batch of per-class probabilities and 0/1 targets.
    pub fn multi(probs: Array2<f64>, targets: Array2<f64>) -> Result<Self> {
        if probs.dim() != targets.dim() {
            return Err(Error::dims("prediction batch", probs.nrows(), targets.nrows()));
        }
        if probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::invalid("multi-label probabilities must lie in [0, 1]"));
        }
        if targets.iter().any(|&t| t != 0.0 && t != 1.0) {
            return Err(Error::invalid("multi-label targets must be 0 or 1"));
        }
        Ok(Self {
            probs,
            kind: LabelKind::Multi,
            classes: Vec::new(),
            targets,
        })
    }

    /// Batch for the listed nodes; `probs` has one row per node, in order.
    pub fn for_nodes(probs: Array2<f64>, labels: &LabelSet, nodes: &[usize]) -> Result<Self> {
        if let Some(&i) = nodes.iter().find(|&&i| i >= labels.num_nodes()) {
            return Err(Error::invalid(format!("node {i} out of range")));
        }
        match labels.kind() {
            LabelKind::Single => Self::single(probs, nodes.iter().map(|&i| labels.class_of(i)).collect()),
            LabelKind::Multi => Self::multi(probs, labels.matrix().select(ndarray::Axis(0), nodes)),
        }
    }

    pub fn len(&self) -> usize {
        self.probs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> LabelKind {
        self.kind
    }

    pub fn num_classes(&self) -> usize {
        self.probs.ncols()
    }

    pub fn probs(&self) -> &Array2<f64> {
        &self.probs
    }

    fn non_empty(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::invalid("metrics of an empty prediction batch"))
        } else {
            Ok(())
        }
    }

    /// Predicted label of each row (single-label); ties go to the lowest
    /// class index.
    fn predicted(&self) -> Vec<usize> {
        self.probs.rows().into_iter().map(argmax).collect()
    }
}

fn argmax(row: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = k;
        }
    }
    best
}

fn present(p: f64) -> bool {
    p >= 0.5
}

/// Fraction of correct predictions: argmax matches for single-label data,
/// correctly binarized (node, class) entries for multi-label data.
pub fn accuracy(batch: &PredictionBatch) -> Result<f64> {
    batch.non_empty()?;
    let (correct, total) = match batch.kind {
        LabelKind::Single => {
            let hits = batch.predicted().iter().zip(&batch.classes).filter(|(p, y)| p == y).count();
            (hits, batch.len())
        }
        LabelKind::Multi => {
            let hits = batch
                .probs
                .iter()
                .zip(&batch.targets)
                .filter(|(&p, &y)| present(p) == (y == 1.0))
                .count();
            (hits, batch.probs.len())
        }
    };
    Ok(correct as f64 / total as f64)
}

/// Micro, macro and support-weighted F1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Scores {
    pub micro: f64,
    pub macro_: f64,
    pub weighted: f64,
}

/// F1 scores from per-class true-positive, false-positive and
/// false-negative counts. A class without support and without predictions
/// scores 0 and still counts towards the macro average.
pub fn f1_scores(batch: &PredictionBatch) -> Result<F1Scores> {
    batch.non_empty()?;
    let c = batch.num_classes();
    let (mut tp, mut fp, mut fn_) = (vec![0usize; c], vec![0usize; c], vec![0usize; c]);
    match batch.kind {
        LabelKind::Single => {
            for (p, &y) in batch.predicted().into_iter().zip(&batch.classes) {
                if p == y {
                    tp[y] += 1;
                } else {
                    fp[p] += 1;
                    fn_[y] += 1;
                }
            }
        }
        LabelKind::Multi => {
            for (row_p, row_y) in batch.probs.rows().into_iter().zip(batch.targets.rows()) {
                for k in 0..c {
                    match (present(row_p[k]), row_y[k] == 1.0) {
                        (true, true) => tp[k] += 1,
                        (true, false) => fp[k] += 1,
                        (false, true) => fn_[k] += 1,
                        (false, false) => {}
                    }
                }
            }
        }
    }
    let f1 = |tp: usize, fp: usize, fn_: usize| {
        let denom = 2 * tp + fp + fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    };
    let per_class: Vec<f64> = (0..c).map(|k| f1(tp[k], fp[k], fn_[k])).collect();
    let support: Vec<usize> = (0..c).map(|k| tp[k] + fn_[k]).collect();
    let total_support: usize = support.iter().sum();
    let weighted = if total_support == 0 {
        0.0
    } else {
        per_class.iter().zip(&support).map(|(f, &s)| f * s as f64).sum::<f64>() / total_support as f64
    };
    Ok(F1Scores {
        micro: f1(tp.iter().sum(), fp.iter().sum(), fn_.iter().sum()),
        macro_: per_class.iter().sum::<f64>() / c as f64,
        weighted,
    })
}

/// Index of the equal-width bin on `(0, 1]` holding `conf`; bins are
/// right-inclusive, so `conf = 1` lands in the last bin and a bin edge
/// belongs to the bin below it.
fn bin_of(conf: f64, bins: usize) -> usize {
    let mut b = ((conf * bins as f64).ceil() as usize).clamp(1, bins) - 1;
    // Correct for rounding in the product: conf must lie in (b/B, (b+1)/B].
    while b > 0 && conf <= b as f64 / bins as f64 {
        b -= 1;
    }
    while b + 1 < bins && conf > (b + 1) as f64 / bins as f64 {
        b += 1;
    }
    b
}

/// Expected calibration error: `Σ_b (|B_b| / n) |acc(B_b) − conf(B_b)|` over
/// equal-width confidence bins. Single-label confidence is the largest class
/// probability; multi-label batches score every (node, class) pair as a
/// binary prediction with confidence `max(p, 1 − p)`.
pub fn ece(batch: &PredictionBatch, bins: usize) -> Result<f64> {
    batch.non_empty()?;
    if bins == 0 {
        return Err(Error::invalid("calibration error needs at least one bin"));
    }
    let mut samples: Vec<(f64, bool)> = Vec::new();
    match batch.kind {
        LabelKind::Single => {
            for (row, &y) in batch.probs.rows().into_iter().zip(&batch.classes) {
                let k = argmax(row);
                samples.push((row[k], k == y));
            }
        }
        LabelKind::Multi => {
            for (&p, &y) in batch.probs.iter().zip(&batch.targets) {
                samples.push((p.max(1.0 - p), present(p) == (y == 1.0)));
            }
        }
    }
    let mut count = vec![0usize; bins];
    let mut conf_sum = vec![0.0; bins];
    let mut hits = vec![0usize; bins];
    for &(conf, ok) in &samples {
        let b = bin_of(conf, bins);
        count[b] += 1;
        conf_sum[b] += conf;
        hits[b] += usize::from(ok);
    }
    let n = samples.len() as f64;
    let total = (0..bins)
        .filter(|&b| count[b] > 0)
        .map(|b| {
            let size = count[b] as f64;
            (size / n) * (hits[b] as f64 / size - conf_sum[b] / size).abs()
        })
        .sum();
    Ok(total)
}

/// Accuracy, F1 scores and calibration error of one prediction batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub f1: F1Scores,
    pub ece: f64,
}

impl Metrics {
    pub fn of(batch: &PredictionBatch) -> Result<Self> {
        Ok(Self {
            accuracy: accuracy(batch)?,
            f1: f1_scores(batch)?,
            ece: ece(batch, ECE_BINS)?,
        })
    }
}

/// `test_t − train_t`, divided by the largest absolute gap so the curve
/// peaks at magnitude one. An all-zero gap stays zero.
pub fn loss_gap(train: &[f64], test: &[f64]) -> Result<Vec<f64>> {
    if train.len() != test.len() {
        return Err(Error::dims("loss curves", train.len(), test.len()));
    }
    let gap: Vec<f64> = train.iter().zip(test).map(|(a, b)| b - a).collect();
    if gap.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("loss curve".into()));
    }
    let scale = gap.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    Ok(if scale == 0.0 { gap } else { gap.iter().map(|g| g / scale).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn one_hot(preds: &[usize], c: usize) -> Array2<f64> {
        Array2::from_shape_fn((preds.len(), c), |(r, k)| f64::from(u8::from(preds[r] == k)))
    }

    #[test]
    fn accuracy_examples() {
        let b = PredictionBatch::single(one_hot(&[0, 1, 2], 3), vec![0, 1, 2]).unwrap();
        assert_eq!(accuracy(&b).unwrap(), 1.0);
        let b = PredictionBatch::single(one_hot(&[1, 2, 0], 3), vec![0, 1, 2]).unwrap();
        assert_eq!(accuracy(&b).unwrap(), 0.0);
        let b = PredictionBatch::single(one_hot(&[0, 1, 1, 1], 2), vec![0, 1, 1, 0]).unwrap();
        assert_eq!(accuracy(&b).unwrap(), 0.75);
        let empty = PredictionBatch::single(Array2::zeros((0, 2)), vec![]).unwrap();
        assert!(accuracy(&empty).is_err());
    }

    #[test]
    fn ties_go_to_the_lowest_class() {
        let b = PredictionBatch::single(array![[0.5, 0.5], [0.25, 0.25 + 0.5]], vec![0, 1]).unwrap();
        assert_eq!(accuracy(&b).unwrap(), 1.0);
        let b = PredictionBatch::single(array![[0.5, 0.5]], vec![1]).unwrap();
        assert_eq!(accuracy(&b).unwrap(), 0.0);
    }

    #[test]
    fn invalid_batches_are_rejected() {
        assert!(PredictionBatch::single(array![[0.5, 0.6]], vec![0]).is_err());
        assert!(PredictionBatch::single(array![[0.5, 0.5]], vec![2]).is_err());
        assert!(PredictionBatch::multi(array![[0.5]], array![[0.5]]).is_err());
    }

    #[test]
    fn f1_examples() {
        let b = PredictionBatch::single(one_hot(&[0, 1, 2, 1], 3), vec![0, 1, 2, 1]).unwrap();
        let f = f1_scores(&b).unwrap();
        assert_eq!((f.micro, f.macro_, f.weighted), (1.0, 1.0, 1.0));

        // Confusion matrix [[1, 1], [1, 1]].
        let b = PredictionBatch::single(one_hot(&[0, 1, 0, 1], 2), vec![0, 0, 1, 1]).unwrap();
        let f = f1_scores(&b).unwrap();
        assert_eq!((f.micro, f.macro_, f.weighted), (0.5, 0.5, 0.5));

        // Only class 0 present and always predicted: class 1 scores zero.
        let b = PredictionBatch::single(one_hot(&[0, 0, 0], 2), vec![0, 0, 0]).unwrap();
        let f = f1_scores(&b).unwrap();
        assert_eq!((f.micro, f.macro_, f.weighted), (1.0, 0.5, 1.0));
    }

    #[test]
    fn f1_against_hand_counts() {
        // Truth 0,0,0,1,1,2; predictions 0,0,1,1,2,2.
        let b = PredictionBatch::single(one_hot(&[0, 0, 1, 1, 2, 2], 3), vec![0, 0, 0, 1, 1, 2]).unwrap();
        let f = f1_scores(&b).unwrap();
        // Class 0: tp 2, fn 1 -> 0.8; class 1: tp 1 fp 1 fn 1 -> 0.5; class 2: tp 1 fp 1 -> 2/3.
        let per = [0.8, 0.5, 2.0 / 3.0];
        assert!((f.macro_ - per.iter().sum::<f64>() / 3.0).abs() < 1e-15);
        assert!((f.weighted - (3.0 * 0.8 + 2.0 * 0.5 + 2.0 / 3.0) / 6.0).abs() < 1e-15);
        assert!((f.micro - 4.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn multilabel_binarizes_at_one_half() {
        let probs = array![[0.9, 0.2, 0.5], [0.1, 0.7, 0.3]];
        let targets = array![[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        let b = PredictionBatch::multi(probs, targets).unwrap();
        // Entries: tp (0,0); tn (0,1); fp (0,2); tn (1,0); fp (1,1); fn (1,2).
        assert!((accuracy(&b).unwrap() - 3.0 / 6.0).abs() < 1e-15);
        let f = f1_scores(&b).unwrap();
        assert!((f.micro - 2.0 / (2.0 + 3.0)).abs() < 1e-15);
        assert!((f.macro_ - (1.0 + 0.0 + 0.0) / 3.0).abs() < 1e-15);
        assert!((f.weighted - 0.5).abs() < 1e-15);
        let e = ece(&b, 10).unwrap();
        assert!((0.0..=1.0).contains(&e));
    }

    #[test]
    fn ece_examples() {
        let b = PredictionBatch::single(one_hot(&[0, 1], 2), vec![0, 1]).unwrap();
        assert_eq!(ece(&b, 10).unwrap(), 0.0);
        let b = PredictionBatch::single(one_hot(&[0, 1], 2), vec![0, 0]).unwrap();
        assert_eq!(ece(&b, 10).unwrap(), 0.5);
        let probs = Array2::from_shape_fn((10, 2), |(_, k)| if k == 0 { 0.75 } else { 0.25 });
        let truth = vec![0, 0, 0, 0, 0, 0, 1, 1, 1, 1];
        let b = PredictionBatch::single(probs, truth).unwrap();
        assert!((ece(&b, 10).unwrap() - 0.15).abs() < 1e-12);
        assert!(ece(&b, 0).is_err());
    }

    #[test]
    fn ece_bin_edges_are_right_inclusive() {
        assert_eq!(bin_of(1.0, 10), 9);
        assert_eq!(bin_of(0.1, 10), 0);
        assert_eq!(bin_of(0.3, 10), 2);
        assert_eq!(bin_of(0.30000000000000004, 10), 3);
        assert_eq!(bin_of(0.7, 10), 6);
        assert_eq!(bin_of(0.75, 10), 7);
        assert_eq!(bin_of(0.5, 1), 0);
        for k in 1..=20 {
            let edge = k as f64 / 20.0;
            assert_eq!(bin_of(edge, 20), k - 1);
        }
    }

    #[test]
    fn loss_gap_examples() {
        assert_eq!(loss_gap(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(loss_gap(&[0.0, 0.0, 0.0], &[1.0, 2.0, 4.0]).unwrap(), vec![0.25, 0.5, 1.0]);
        assert_eq!(loss_gap(&[0.75, 0.5, 0.25], &[1.25, 1.0, 0.75]).unwrap(), vec![1.0, 1.0, 1.0]);
        assert!(loss_gap(&[1.0], &[1.0, 2.0]).is_err());
    }

    fn random_batch() -> impl Strategy<Value = PredictionBatch> {
        (1usize..6, 1usize..40).prop_flat_map(|(c, n)| {
            (
                proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, c), n),
                proptest::collection::vec(0..c, n),
            )
                .prop_map(move |(rows, truth)| {
                    let probs = Array2::from_shape_fn((n, c), |(r, k)| {
                        let s: f64 = rows[r].iter().sum::<f64>() + 1e-9 * c as f64;
                        (rows[r][k] + 1e-9) / s
                    });
                    PredictionBatch::single(probs, truth).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn micro_f1_equals_accuracy(b in random_batch()) {
            let f = f1_scores(&b).unwrap();
            prop_assert!((f.micro - accuracy(&b).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn ece_is_bounded_and_order_free(b in random_batch(), rot in 0usize..40) {
            let e = ece(&b, ECE_BINS).unwrap();
            prop_assert!((0.0..=1.0).contains(&e));
            let n = b.len();
            let order: Vec<usize> = (0..n).map(|i| (i + rot) % n).rev().collect();
            let probs = b.probs().select(ndarray::Axis(0), &order);
            let truth = order.iter().map(|&i| b.classes[i]).collect();
            let permuted = PredictionBatch::single(probs, truth).unwrap();
            prop_assert!((ece(&permuted, ECE_BINS).unwrap() - e).abs() < 1e-12);
        }

        #[test]
        fn weighted_equals_macro_for_balanced_support(
            c in 1usize..5,
            per in 1usize..6,
            preds in proptest::collection::vec(0usize..5, 25),
        ) {
            let n = c * per;
            let truth: Vec<usize> = (0..n).map(|i| i % c).collect();
            let p: Vec<usize> = (0..n).map(|i| preds[i % preds.len()] % c).collect();
            let b = PredictionBatch::single(one_hot(&p, c), truth).unwrap();
            let f = f1_scores(&b).unwrap();
            prop_assert!((f.weighted - f.macro_).abs() < 1e-12);
        }
    }
}
