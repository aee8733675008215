//! Graph, dataset and adjacency primitives.

mod dataset;
mod io;
mod sbm;
mod sparse;

pub use dataset::{imbalance_ratio, Dataset, FeatureMatrix, LabelKind, LabelSet, SplitMasks};
pub use io::{load_dataset, write_dataset};
pub use sbm::{gen_sbm, SbmParams};
pub use sparse::CsrMatrix;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Undirected simple graph in compressed adjacency form.
///
/// Every edge is stored in both endpoint lists, neighbor lists are sorted
/// and duplicate-free, and self-loops are never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    num_nodes: usize,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl Graph {
    /// Graph with `num_nodes` isolated nodes.
    pub fn empty(num_nodes: usize) -> Self {
        Self {
            num_nodes,
            offsets: vec![0; num_nodes + 1],
            neighbors: Vec::new(),
        }
    }

    /// Builds a graph from an undirected edge list. Both orientations of an
    /// edge may appear; repeated edges are merged. Self-loops and
    /// out-of-range endpoints are rejected.
    pub fn from_edges<I>(num_nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let (g, duplicates) = Self::from_edges_counted(num_nodes, edges)?;
        if duplicates > 0 {
            log::warn!("merged {duplicates} duplicate edge entries");
        }
        Ok(g)
    }

    /// Like [`Graph::from_edges`] but also reports how many input entries
    /// were duplicates of an edge already seen.
    pub fn from_edges_counted<I>(num_nodes: usize, edges: I) -> Result<(Self, usize)>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); num_nodes];
        let mut entries = 0usize;
        for (u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::invalid(format!(
                    "edge ({u}, {v}) out of range for {num_nodes} nodes"
                )));
            }
            if u == v {
                return Err(Error::invalid(format!("self-loop on node {u}")));
            }
            adj[u].push(v);
            adj[v].push(u);
            entries += 1;
        }
        let mut offsets = Vec::with_capacity(num_nodes + 1);
        let mut neighbors = Vec::new();
        offsets.push(0);
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
            neighbors.extend_from_slice(list);
            offsets.push(neighbors.len());
        }
        let unique = neighbors.len() / 2;
        Ok((
            Self {
                num_nodes,
                offsets,
                neighbors,
            },
            entries - unique,
        ))
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.neighbors[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.num_nodes && self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    /// Dense 0/1 adjacency matrix, for tests and small graphs.
    pub fn to_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.num_nodes, self.num_nodes));
        for (u, v) in self.edges() {
            a[[u, v]] = 1.0;
            a[[v, u]] = 1.0;
        }
        a
    }
}

/// Symmetrically normalized adjacency with self-loops,
/// `D^-1/2 (A + I) D^-1/2` where `D` counts the self-loop.
#[derive(Debug, Clone, PartialEq)]
pub struct NormAdj {
    matrix: CsrMatrix,
}

impl NormAdj {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn num_nodes(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.matrix.get(u, v)
    }

    pub fn to_dense(&self) -> Array2<f64> {
        self.matrix.to_dense()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.num_nodes())
            .map(|r| self.matrix.row(r).1.iter().sum())
            .collect()
    }
}

/// Builds the normalized propagation matrix of `g`.
pub fn normalize_adjacency(g: &Graph) -> NormAdj {
    let n = g.num_nodes();
    let deg: Vec<f64> = (0..n).map(|u| (g.degree(u) + 1) as f64).collect();
    // Each entry is 1 / sqrt(d_u * d_v): one rounding of a commutative
    // product, so (u, v) and (v, u) hold the identical value.
    let weight = |u: usize, v: usize| 1.0 / (deg[u] * deg[v]).sqrt();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut indices = Vec::with_capacity(g.neighbors.len() + n);
    let mut values = Vec::with_capacity(g.neighbors.len() + n);
    offsets.push(0);
    for u in 0..n {
        let mut diag_done = false;
        for &v in g.neighbors(u) {
            if !diag_done && v > u {
                indices.push(u);
                values.push(weight(u, u));
                diag_done = true;
            }
            indices.push(v);
            values.push(weight(u, v));
        }
        if !diag_done {
            indices.push(u);
            values.push(weight(u, u));
        }
        offsets.push(indices.len());
    }
    let matrix = CsrMatrix::from_parts(n, n, offsets, indices, values)
        .expect("normalized adjacency is structurally valid");
    NormAdj { matrix }
}

/// Sparse-dense product `a * x`.
pub fn spmm(a: &NormAdj, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let out = a.matrix.matmul(x)?;
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spmm output".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_graph(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Graph {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random::<f64>() < p {
                    edges.push((u, v));
                }
            }
        }
        Graph::from_edges(n, edges).unwrap()
    }

    #[test]
    fn smallest_undirected_edge() {
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0]);
        assert_eq!(g.num_edges(), 1);
    }

    #[test]
    fn both_orientations_collapse_to_one_edge() {
        let (g, dups) = Graph::from_edges_counted(2, [(0, 1), (1, 0)]).unwrap();
        assert_eq!(g.num_edges(), 1);
        assert_eq!(dups, 1);
        assert_eq!(g.offsets(), &[0, 1, 2]);
    }

    #[test]
    fn self_loops_and_out_of_range_rejected() {
        assert!(Graph::from_edges(3, [(1, 1)]).is_err());
        assert!(Graph::from_edges(3, [(0, 3)]).is_err());
    }

    #[test]
    fn isolated_node_normalizes_to_one() {
        let a = normalize_adjacency(&Graph::empty(1));
        assert_eq!(a.to_dense(), array![[1.0]]);
    }

    #[test]
    fn single_edge_normalizes_to_halves() {
        let a = normalize_adjacency(&Graph::from_edges(2, [(0, 1)]).unwrap());
        assert_eq!(a.to_dense(), array![[0.5, 0.5], [0.5, 0.5]]);
    }

    #[test]
    fn triangle_normalizes_to_thirds() {
        let a = normalize_adjacency(&Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap());
        // every degree is 3 after the self-loop: 1/sqrt(3) * 1/sqrt(3)
        for v in a.to_dense().iter() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn regular_graph_rows_sum_to_one() {
        // 4-cycle: every node has degree 2
        let g = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        for s in normalize_adjacency(&g).row_sums() {
            assert!((s - 1.0).abs() < 1e-15);
        }
        // path: endpoints see a higher-degree neighbor, so their rows fall short of 1
        let p = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let sums = normalize_adjacency(&p).row_sums();
        assert!(sums[0] < 1.0 && sums[2] < 1.0);
    }

    #[test]
    fn spmm_identity_and_averaging() {
        let one = normalize_adjacency(&Graph::empty(1));
        assert_eq!(spmm(&one, array![[3.5, -2.0]].view()).unwrap(), array![[3.5, -2.0]]);
        let two = normalize_adjacency(&Graph::from_edges(2, [(0, 1)]).unwrap());
        assert_eq!(spmm(&two, array![[2.0], [4.0]].view()).unwrap(), array![[3.0], [3.0]]);
    }

    #[test]
    fn spmm_dimension_mismatch() {
        let two = normalize_adjacency(&Graph::from_edges(2, [(0, 1)]).unwrap());
        assert!(spmm(&two, array![[1.0]].view()).is_err());
    }

    #[test]
    fn spmm_matches_dense_oracle_on_random_graph() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random_graph(5, 0.5, &mut rng);
        let a = normalize_adjacency(&g);
        let x = Array2::from_shape_fn((5, 3), |_| rng.random::<f64>() * 2.0 - 1.0);
        let dense = a.to_dense().dot(&x);
        let sparse = spmm(&a, x.view()).unwrap();
        for (s, d) in sparse.iter().zip(dense.iter()) {
            assert!((s - d).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn normalized_adjacency_is_exactly_symmetric(n in 1usize..25, p in 0.0f64..1.0, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_graph(n, p, &mut rng);
            let a = normalize_adjacency(&g);
            let d = a.to_dense();
            for u in 0..n {
                for v in 0..n {
                    prop_assert_eq!(d[[u, v]].to_bits(), d[[v, u]].to_bits());
                }
                let expect = 1.0 / ((g.degree(u) + 1) as f64);
                prop_assert!((d[[u, u]] - expect).abs() < 1e-15);
            }
        }

        #[test]
        fn graph_invariants_hold(n in 1usize..30, raw in proptest::collection::vec((0usize..30, 0usize..30), 0..80)) {
            let edges: Vec<_> = raw.into_iter().filter(|&(u, v)| u < n && v < n && u != v).collect();
            let g = Graph::from_edges(n, edges).unwrap();
            prop_assert_eq!(*g.offsets().last().unwrap(), 2 * g.num_edges());
            for u in 0..n {
                let nb = g.neighbors(u);
                prop_assert!(nb.windows(2).all(|w| w[0] < w[1]));
                prop_assert!(!nb.contains(&u));
                for &v in nb {
                    prop_assert!(g.has_edge(v, u));
                }
            }
        }
    }
}
