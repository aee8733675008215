//! Random structural attack: inject fake edges between non-adjacent node
//! pairs and measure how accuracy degrades for different losses.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Dataset, Graph};
use crate::trainer::{train, LossKind, MeanStd, TrainConfig};

/// Rejection-sampling draws allowed per requested edge before switching to
/// sampling from the explicit list of free pairs.
const DRAWS_PER_EDGE: usize = 32;

/// How many fake edges to add, relative to the real edge count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackSpec {
    /// Fake edges per real edge.
    pub ratio: f64,
    pub seed: u64,
}

fn ordered(u: usize, v: usize) -> (usize, usize) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Adds `floor(ratio * m)` new undirected edges between distinct,
/// previously non-adjacent node pairs drawn uniformly at random. Existing
/// edges are kept and the node count is unchanged.
pub fn random_attack(g: &Graph, spec: &AttackSpec) -> Result<Graph> {
    if !(spec.ratio >= 0.0 && spec.ratio.is_finite()) {
        return Err(Error::invalid(format!("attack ratio {} must be finite and non-negative", spec.ratio)));
    }
    let n = g.num_nodes();
    let m = g.num_edges();
    let wanted = (spec.ratio * m as f64).floor() as usize;
    if wanted == 0 {
        return Ok(g.clone());
    }
    let free = (n * n.saturating_sub(1) / 2).saturating_sub(m);
    if wanted > free {
        return Err(Error::invalid(format!(
            "cannot add {wanted} edges: only {free} non-adjacent pairs exist"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut added: HashSet<(usize, usize)> = HashSet::with_capacity(wanted);
    let mut order: Vec<(usize, usize)> = Vec::with_capacity(wanted);
    let mut draws = 0;
    while order.len() < wanted && draws < DRAWS_PER_EDGE * wanted {
        draws += 1;
        let (u, v) = (rng.random_range(0..n), rng.random_range(0..n));
        if u == v || g.has_edge(u, v) {
            continue;
        }
        let e = ordered(u, v);
        if added.insert(e) {
            order.push(e);
        }
    }
    if order.len() < wanted {
        // Dense graph: draw the remainder from the explicit free-pair list.
        let mut remaining: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|&(u, v)| !g.has_edge(u, v) && !added.contains(&(u, v)))
            .collect();
        while order.len() < wanted {
            let k = rng.random_range(0..remaining.len());
            order.push(remaining.swap_remove(k));
        }
    }
    log::debug!("random attack added {} edges to {m}", order.len());
    Graph::from_edges(n, g.edges().chain(order))
}

/// Mean test accuracy of one loss at one attack ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub ratio: f64,
    pub loss: LossKind,
    pub accuracy: MeanStd,
    pub seeds: usize,
}

/// For every ratio and seed, perturbs the graph once and retrains both
/// configurations from scratch on it. Seed `s` (counting from 0) uses
/// attack seed `cfg_ce.seed + s` and training seeds `cfg.seed + s`.
pub fn robustness_sweep(
    data: &Dataset,
    ratios: &[f64],
    cfg_ce: &TrainConfig,
    cfg_jc: &TrainConfig,
    seeds: usize,
) -> Result<Vec<SweepRow>> {
    if seeds == 0 {
        return Err(Error::invalid("robustness sweep needs at least one seed"));
    }
    if ratios.is_empty() || ratios.windows(2).any(|w| w[0].is_nan() || w[0] > w[1]) {
        return Err(Error::invalid("attack ratios must be non-empty and sorted ascending"));
    }
    let cells: Vec<(f64, u64)> = ratios
        .iter()
        .flat_map(|&r| (0..seeds as u64).map(move |s| (r, s)))
        .collect();
    let accs = cells
        .par_iter()
        .map(|&(ratio, offset)| {
            let tag = |seed: u64| move |e: Error| Error::Sweep { ratio, seed, source: Box::new(e) };
            let attack_seed = cfg_ce.seed.wrapping_add(offset);
            let graph = random_attack(&data.graph, &AttackSpec { ratio, seed: attack_seed }).map_err(tag(attack_seed))?;
            let poisoned = data.with_graph(graph).map_err(tag(attack_seed))?;
            let mut out = [0.0; 2];
            for (slot, cfg) in out.iter_mut().zip([cfg_ce, cfg_jc]) {
                let seed = cfg.seed.wrapping_add(offset);
                let cfg = TrainConfig { seed, ..cfg.clone() };
                *slot = train(&cfg, &poisoned).map_err(tag(seed))?.test.accuracy;
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(2 * ratios.len());
    for (r, &ratio) in ratios.iter().enumerate() {
        let block = &accs[r * seeds..(r + 1) * seeds];
        for (j, cfg) in [cfg_ce, cfg_jc].into_iter().enumerate() {
            let values: Vec<f64> = block.iter().map(|a| a[j]).collect();
            rows.push(SweepRow {
                ratio,
                loss: cfg.loss,
                accuracy: MeanStd::of(&values),
                seeds,
            });
        }
    }
    Ok(rows)
}

/// Sweep rows as CSV: `ratio,loss,mean_acc,std_acc,seeds`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("ratio,loss,mean_acc,std_acc,seeds\n");
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.ratio, r.loss.name(), r.accuracy.mean, r.accuracy.std, r.seeds).unwrap();
    }
    out
}
