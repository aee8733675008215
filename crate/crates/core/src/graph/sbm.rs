//! Stochastic block model generator for hermetic experiments.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Dataset, FeatureMatrix, Graph, LabelSet, SplitMasks};
use crate::error::{Error, Result};

/// Parameters of a planted-partition graph with Gaussian block features.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmParams {
    pub blocks: usize,
    pub nodes_per_block: usize,
    /// Edge probability between two nodes of the same block.
    pub p_in: f64,
    /// Edge probability between nodes of different blocks.
    pub p_out: f64,
    pub feat_dim: usize,
    /// Standard deviation of the per-node noise added to the block centroid.
    pub feat_noise: f64,
    pub seed: u64,
}

/// Generates a labeled graph whose label is the block of each node.
///
/// Block `b` owns nodes `b * nodes_per_block .. (b + 1) * nodes_per_block`.
/// Each block draws a standard-normal centroid; node features add
/// `feat_noise`-scaled standard-normal noise. Within every block a quarter
/// of the nodes (at least one) go to train, a quarter to validation and the
/// rest to test.
pub fn gen_sbm(p: &SbmParams) -> Result<Dataset> {
    if p.blocks < 2 || p.nodes_per_block < 2 {
        return Err(Error::invalid("sbm needs at least 2 blocks of at least 2 nodes"));
    }
    if !(0.0 <= p.p_out && p.p_out < p.p_in && p.p_in <= 1.0) {
        return Err(Error::invalid(format!(
            "sbm probabilities must satisfy 0 <= p_out < p_in <= 1, got p_out={} p_in={}",
            p.p_out, p.p_in
        )));
    }
    if p.feat_dim == 0 {
        return Err(Error::invalid("sbm feature dimension must be positive"));
    }
    if !(p.feat_noise >= 0.0 && p.feat_noise.is_finite()) {
        return Err(Error::invalid("sbm feature noise must be finite and non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let k = p.nodes_per_block;
    let n = p.blocks * k;
    let block = |u: usize| u / k;

    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let prob = if block(u) == block(v) { p.p_in } else { p.p_out };
            if rng.random::<f64>() < prob {
                edges.push((u, v));
            }
        }
    }
    let graph = Graph::from_edges(n, edges)?;

    let centroids: Vec<Vec<f64>> = (0..p.blocks)
        .map(|_| (0..p.feat_dim).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let mut x = Array2::zeros((n, p.feat_dim));
    for u in 0..n {
        for j in 0..p.feat_dim {
            let noise: f64 = rng.sample(StandardNormal);
            x[[u, j]] = centroids[block(u)][j] + p.feat_noise * noise;
        }
    }
    let features = FeatureMatrix::new(x)?;
    let labels = LabelSet::single(p.blocks, (0..n).map(block).collect())?;

    let n_train = ((k as f64 * 0.25).round() as usize).max(1);
    let n_val = ((k as f64 * 0.25).round() as usize).min(k - n_train);
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for b in 0..p.blocks {
        let mut members: Vec<usize> = (b * k..(b + 1) * k).collect();
        members.shuffle(&mut rng);
        train.extend_from_slice(&members[..n_train]);
        val.extend_from_slice(&members[n_train..n_train + n_val]);
        test.extend_from_slice(&members[n_train + n_val..]);
    }
    let masks = SplitMasks::new(n, train, val, test)?;
    Dataset::new(graph, features, labels, masks)
}
