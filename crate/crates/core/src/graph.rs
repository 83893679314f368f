//! Undirected CSR graphs and the symmetric-normalized propagation matrix
//! `D̃^{-1/2} (A + I) D̃^{-1/2}`.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::nn::DenseMatrix;
use crate::sparse::CsrMatrix;

/// Symmetric, self-loop free CSR adjacency with nonnegative edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGraph {
    num_nodes: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    edge_weights: Vec<f64>,
}

impl SparseGraph {
    /// Symmetrizes, deduplicates and sorts an edge list. Self-loops are
    /// dropped; all edges get weight 1.
    pub fn build_csr(edges: &[(usize, usize)], num_nodes: usize) -> Result<Self> {
        let weighted: Vec<_> = edges.iter().map(|&(i, j)| (i, j, 1.0)).collect();
        Self::build(&weighted, num_nodes, Merge::Keep)
    }

    /// Like [`build_csr`](Self::build_csr) but with weights; duplicate
    /// pairs (in either orientation) have their weights summed.
    pub fn from_weighted_edges(edges: &[(usize, usize, f64)], num_nodes: usize) -> Result<Self> {
        Self::build(edges, num_nodes, Merge::Sum)
    }

    fn build(edges: &[(usize, usize, f64)], num_nodes: usize, merge: Merge) -> Result<Self> {
        let mut pairs: Vec<(usize, usize, f64)> = Vec::with_capacity(edges.len());
        for &(i, j, w) in edges {
            for idx in [i, j] {
                if idx >= num_nodes {
                    return Err(Error::IndexOutOfRange {
                        index: idx,
                        len: num_nodes,
                    });
                }
            }
            if i != j {
                pairs.push((i.min(j), i.max(j), w));
            }
        }
        pairs.sort_by_key(|p| (p.0, p.1));
        let mut unique: Vec<(usize, usize, f64)> = Vec::with_capacity(pairs.len());
        for p in pairs {
            match unique.last_mut() {
                Some(last) if last.0 == p.0 && last.1 == p.1 => {
                    if merge == Merge::Sum {
                        last.2 += p.2;
                    }
                }
                _ => unique.push(p),
            }
        }

        let mut degree = vec![0usize; num_nodes];
        for &(i, j, _) in &unique {
            degree[i] += 1;
            degree[j] += 1;
        }
        let mut row_offsets = Vec::with_capacity(num_nodes + 1);
        row_offsets.push(0);
        for d in &degree {
            row_offsets.push(row_offsets.last().unwrap() + d);
        }
        let mut fill = row_offsets[..num_nodes].to_vec();
        let mut col_indices = vec![0; row_offsets[num_nodes]];
        let mut edge_weights = vec![0.0; row_offsets[num_nodes]];
        // Pairs are sorted by (min, max): appending i's partners and j's
        // partners in this order keeps every row sorted.
        for &(i, j, w) in &unique {
            col_indices[fill[j]] = i;
            edge_weights[fill[j]] = w;
            fill[j] += 1;
        }
        for &(i, j, w) in &unique {
            col_indices[fill[i]] = j;
            edge_weights[fill[i]] = w;
            fill[i] += 1;
        }
        Ok(Self {
            num_nodes,
            row_offsets,
            col_indices,
            edge_weights,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.col_indices.len() / 2
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn edge_weights(&self) -> &[f64] {
        &self.edge_weights
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[i]..self.row_offsets[i + 1]]
    }

    pub fn neighbor_weights(&self, i: usize) -> &[f64] {
        &self.edge_weights[self.row_offsets[i]..self.row_offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row_offsets[i + 1] - self.row_offsets[i]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.num_nodes).map(|i| self.degree(i)).collect()
    }

    /// Sum of incident edge weights.
    pub fn weighted_degree(&self, i: usize) -> f64 {
        self.neighbor_weights(i).iter().sum()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&j).is_ok()
    }

    pub fn total_edge_weight(&self) -> f64 {
        self.edge_weights.iter().sum::<f64>() / 2.0
    }

    /// Undirected edges as `(i, j, w)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.num_nodes).flat_map(move |i| {
            self.neighbors(i)
                .iter()
                .zip(self.neighbor_weights(i))
                .filter(move |(&j, _)| j > i)
                .map(move |(&j, &w)| (i, j, w))
        })
    }

    /// Copy with each listed pair toggled (present → removed, absent →
    /// added with weight 1).
    pub fn with_edge_flips(&self, flips: &[(usize, usize)]) -> Result<SparseGraph> {
        let mut toggled: BTreeSet<(usize, usize)> = BTreeSet::new();
        for &(i, j) in flips {
            if i >= self.num_nodes || j >= self.num_nodes {
                return Err(Error::IndexOutOfRange {
                    index: i.max(j),
                    len: self.num_nodes,
                });
            }
            if i == j || !toggled.insert((i.min(j), i.max(j))) {
                return Err(Error::ConflictingFlip(i, j));
            }
        }
        let mut edges: Vec<(usize, usize, f64)> = self
            .edges()
            .filter(|&(i, j, _)| !toggled.contains(&(i, j)))
            .collect();
        for &(i, j) in &toggled {
            if !self.has_edge(i, j) {
                edges.push((i, j, 1.0));
            }
        }
        Self::build(&edges, self.num_nodes, Merge::Keep)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.num_nodes, self.num_nodes);
        for (i, j, w) in self.edges() {
            out[(i, j)] = w;
            out[(j, i)] = w;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Merge {
    Keep,
    Sum,
}

/// `Â = D̃^{-1/2} (A + I) D̃^{-1/2}` stored in CSR with diagonal entries.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    matrix: CsrMatrix,
    /// Degrees of `A + I`.
    degrees: Vec<f64>,
}

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn num_nodes(&self) -> usize {
        self.matrix.rows()
    }

    /// Degree of node `i` in `A + I`.
    pub fn degree(&self, i: usize) -> f64 {
        self.degrees[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    /// `Â · m`
    pub fn spmm(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        self.matrix.mul_dense(m)
    }

    /// Recomputes only the rows touched by a change from `old` to `new`
    /// graph structure. `changed` must list every node whose neighbor set
    /// differs between the two graphs.
    pub fn renormalize_incremental(
        &self,
        new_graph: &SparseGraph,
        changed: &[usize],
    ) -> Result<NormalizedAdjacency> {
        let n = self.num_nodes();
        if new_graph.num_nodes() != n {
            return Err(Error::ShapeMismatch {
                op: "renormalize_incremental",
                left: (n, n),
                right: (new_graph.num_nodes(), new_graph.num_nodes()),
            });
        }
        let mut degrees = self.degrees.clone();
        let mut dirty = vec![false; n];
        for &c in changed {
            degrees[c] = 1.0 + new_graph.weighted_degree(c);
            dirty[c] = true;
            for &k in new_graph.neighbors(c) {
                dirty[k] = true;
            }
        }
        // Old neighbors of changed nodes lose entries too.
        for &c in changed {
            let (cols, _) = self.matrix.row(c);
            for &k in cols {
                dirty[k] = true;
            }
        }

        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::with_capacity(self.matrix.nnz() + 2 * changed.len());
        let mut values = Vec::with_capacity(col_indices.capacity());
        row_offsets.push(0);
        for i in 0..n {
            if dirty[i] {
                push_normalized_row(new_graph, &degrees, i, &mut col_indices, &mut values);
            } else {
                let (cols, vals) = self.matrix.row(i);
                col_indices.extend_from_slice(cols);
                values.extend_from_slice(vals);
            }
            row_offsets.push(col_indices.len());
        }
        Ok(NormalizedAdjacency {
            matrix: CsrMatrix::from_parts(n, n, row_offsets, col_indices, values)?,
            degrees,
        })
    }
}

fn push_normalized_row(
    g: &SparseGraph,
    degrees: &[f64],
    i: usize,
    col_indices: &mut Vec<usize>,
    values: &mut Vec<f64>,
) {
    let inv_i = 1.0 / degrees[i].sqrt();
    let mut self_done = false;
    for (&j, &w) in g.neighbors(i).iter().zip(g.neighbor_weights(i)) {
        if !self_done && j > i {
            col_indices.push(i);
            values.push(inv_i * inv_i);
            self_done = true;
        }
        col_indices.push(j);
        values.push(w * inv_i / degrees[j].sqrt());
    }
    if !self_done {
        col_indices.push(i);
        values.push(inv_i * inv_i);
    }
}

/// Builds `Â` from `g`. Every node gets a self-loop so `d̃ ≥ 1`.
pub fn normalize_adjacency(g: &SparseGraph) -> NormalizedAdjacency {
    let n = g.num_nodes();
    let degrees: Vec<f64> = (0..n).map(|i| 1.0 + g.weighted_degree(i)).collect();
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::with_capacity(g.col_indices().len() + n);
    let mut values = Vec::with_capacity(g.col_indices().len() + n);
    row_offsets.push(0);
    for i in 0..n {
        push_normalized_row(g, &degrees, i, &mut col_indices, &mut values);
        row_offsets.push(col_indices.len());
    }
    let matrix = CsrMatrix::from_parts(n, n, row_offsets, col_indices, values)
        .expect("normalized rows are sorted by construction");
    NormalizedAdjacency { matrix, degrees }
}

/// Sparse-dense product `S · M`.
pub fn spmm(s: &NormalizedAdjacency, m: &DenseMatrix) -> Result<DenseMatrix> {
    s.spmm(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_edge_set() {
        let g = SparseGraph::build_csr(&[], 3).unwrap();
        assert_eq!(g.num_edges(), 0);
        assert_eq!(g.degrees(), vec![0, 0, 0]);
    }

    #[test]
    fn dedup_and_symmetry() {
        let g = SparseGraph::build_csr(&[(0, 1), (1, 0), (0, 1)], 2).unwrap();
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0]);
    }

    #[test]
    fn path_degrees() {
        let g = SparseGraph::build_csr(&[(0, 1), (1, 2)], 3).unwrap();
        assert_eq!(g.degrees(), vec![1, 2, 1]);
    }

    #[test]
    fn self_loops_dropped_and_range_checked() {
        let g = SparseGraph::build_csr(&[(0, 0), (0, 1)], 2).unwrap();
        assert_eq!(g.num_edges(), 1);
        assert!(matches!(
            SparseGraph::build_csr(&[(0, 3)], 3),
            Err(Error::IndexOutOfRange { index: 3, len: 3 })
        ));
    }

    #[test]
    fn rows_sorted() {
        let g = SparseGraph::build_csr(&[(3, 1), (0, 3), (2, 3), (1, 2)], 4).unwrap();
        for i in 0..4 {
            assert!(g.neighbors(i).windows(2).all(|w| w[0] < w[1]));
        }
        assert_eq!(g.neighbors(3), &[0, 1, 2]);
    }

    #[test]
    fn weighted_duplicates_sum() {
        let g = SparseGraph::from_weighted_edges(&[(0, 1, 2.0), (1, 0, 3.0)], 2).unwrap();
        assert_eq!(g.neighbor_weights(0), &[5.0]);
        assert_eq!(g.total_edge_weight(), 5.0);
    }

    #[test]
    fn isolated_node_normalizes_to_one() {
        let g = SparseGraph::build_csr(&[], 1).unwrap();
        let a = normalize_adjacency(&g);
        assert_eq!(a.matrix().to_dense(), DenseMatrix::from_rows(&[vec![1.0]]));
    }

    #[test]
    fn single_edge_normalization() {
        let g = SparseGraph::build_csr(&[(0, 1)], 2).unwrap();
        let a = normalize_adjacency(&g).matrix().to_dense();
        let expected = DenseMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]);
        assert!(a.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn path_normalization() {
        let g = SparseGraph::build_csr(&[(0, 1), (1, 2)], 3).unwrap();
        let a = normalize_adjacency(&g);
        assert!((a.get(0, 1) - 1.0 / 6f64.sqrt()).abs() < 1e-12);
        assert!((a.get(0, 1) - 0.40825).abs() < 1e-5);
        assert!((a.get(1, 1) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(a.get(0, 2), 0.0);
    }

    #[test]
    fn edge_flips_toggle() {
        let g = SparseGraph::build_csr(&[(0, 1), (1, 2)], 3).unwrap();
        let h = g.with_edge_flips(&[(1, 0), (0, 2)]).unwrap();
        assert!(!h.has_edge(0, 1));
        assert!(h.has_edge(2, 0));
        assert!(h.has_edge(1, 2));
        assert!(matches!(
            g.with_edge_flips(&[(0, 1), (1, 0)]),
            Err(Error::ConflictingFlip(1, 0))
        ));
    }

    #[test]
    fn spmm_identity_and_zero() {
        let g = SparseGraph::build_csr(&[], 3).unwrap();
        let a = normalize_adjacency(&g);
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        assert_eq!(spmm(&a, &m).unwrap(), m);
        let g = SparseGraph::build_csr(&[(0, 1), (1, 2)], 3).unwrap();
        let a = normalize_adjacency(&g);
        assert_eq!(spmm(&a, &DenseMatrix::zeros(3, 2)).unwrap(), DenseMatrix::zeros(3, 2));
        assert!(spmm(&a, &DenseMatrix::zeros(2, 2)).is_err());
    }
}
