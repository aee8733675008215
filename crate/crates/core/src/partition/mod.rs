//! Node clusterings: multilevel edge-cut minimization, feature k-means and
//! uniform random assignment, plus within/between-cluster link counts.

mod kmeans;
mod metis;

pub use kmeans::{kmeans, partition_kmeans, KMeansOutcome};
pub use metis::{partition_metis_like, partition_metis_with, LevelTrace, MetisOptions, MetisOutcome};

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Cluster id of every node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    num_clusters: usize,
    assign: Vec<usize>,
}

impl ClusterAssignment {
    pub fn new(num_clusters: usize, assign: Vec<usize>) -> Result<Self> {
        if num_clusters == 0 {
            return Err(Error::invalid("number of clusters must be at least 1"));
        }
        if let Some((i, &c)) = assign.iter().enumerate().find(|(_, &c)| c >= num_clusters) {
            return Err(Error::invalid(format!(
                "node {i} assigned to cluster {c} but only {num_clusters} clusters exist"
            )));
        }
        Ok(Self { num_clusters, assign })
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    pub fn num_nodes(&self) -> usize {
        self.assign.len()
    }

    pub fn assign(&self) -> &[usize] {
        &self.assign
    }

    pub fn cluster_of(&self, node: usize) -> usize {
        self.assign[node]
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_clusters];
        for &c in &self.assign {
            sizes[c] += 1;
        }
        sizes
    }

    /// Number of cluster ids with no members.
    pub fn empty_clusters(&self) -> usize {
        self.sizes().iter().filter(|&&s| s == 0).count()
    }

    /// Writes header `n m` followed by one cluster id per line.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut s = format!("{} {}\n", self.num_nodes(), self.num_clusters);
        for &c in &self.assign {
            writeln!(s, "{c}").unwrap();
        }
        fs::write(path, s).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Reads the format produced by [`ClusterAssignment::write`].
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let parse_err = |line: usize, msg: String| Error::Parse {
            file: path.to_path_buf(),
            line,
            msg,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing header \"n m\"".into()))?;
        let hv: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(hline, format!("bad header {header:?}")))?;
        if hv.len() != 2 {
            return Err(parse_err(hline, "header must be \"n m\"".into()));
        }
        let (n, m) = (hv[0], hv[1]);
        if m == 0 {
            return Err(parse_err(hline, "cluster count must be positive".into()));
        }
        let mut assign = Vec::with_capacity(n);
        let mut last = hline;
        for (line, text) in lines {
            last = line;
            let c: usize = text
                .parse()
                .map_err(|_| parse_err(line, format!("bad cluster id {text:?}")))?;
            if c >= m {
                return Err(parse_err(line, format!("cluster id {c} out of range for {m} clusters")));
            }
            assign.push(c);
        }
        if assign.len() != n {
            return Err(parse_err(
                last,
                format!("expected {n} cluster ids, found {}", assign.len()),
            ));
        }
        Self::new(m, assign)
    }
}

/// Link counts split by whether the endpoints share a cluster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutStats {
    pub within: usize,
    pub between: usize,
    /// `within / between`, infinite when no link crosses clusters.
    pub rate: f64,
}

/// Counts every undirected edge of `g` as within- or between-cluster.
pub fn edge_cut_stats(g: &Graph, a: &ClusterAssignment) -> Result<CutStats> {
    if a.num_nodes() != g.num_nodes() {
        return Err(Error::dims("cut statistics", g.num_nodes(), a.num_nodes()));
    }
    let (mut within, mut between) = (0, 0);
    for (u, v) in g.edges() {
        if a.cluster_of(u) == a.cluster_of(v) {
            within += 1;
        } else {
            between += 1;
        }
    }
    let rate = if between == 0 {
        f64::INFINITY
    } else {
        within as f64 / between as f64
    };
    Ok(CutStats { within, between, rate })
}

/// Assigns each of `n` nodes to a uniformly random cluster.
pub fn partition_random(n: usize, m: usize, seed: u64) -> Result<ClusterAssignment> {
    if m == 0 {
        return Err(Error::invalid("number of clusters must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let assign = (0..n).map(|_| rng.random_range(0..m)).collect();
    ClusterAssignment::new(m, assign)
}

#[cfg(test)]
pub(crate) mod test_graphs {
    use crate::graph::Graph;

    /// Triangles {0,1,2} and {3,4,5} joined by the edge (2, 3).
    pub fn bridged_triangles() -> Graph {
        Graph::from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)]).unwrap()
    }

    /// Two disjoint 4-cliques on {0..4} and {4..8}.
    pub fn two_cliques() -> Graph {
        let mut edges = Vec::new();
        for base in [0, 4] {
            for u in base..base + 4 {
                for v in u + 1..base + 4 {
                    edges.push((u, v));
                }
            }
        }
        Graph::from_edges(8, edges).unwrap()
    }
}
