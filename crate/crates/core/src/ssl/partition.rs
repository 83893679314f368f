//! Multilevel balanced k-way partitioning: heavy-edge-matching coarsening,
//! greedy region growing on the coarsest graph, and boundary
//! Fiduccia–Mattheyses refinement while projecting back.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::rng::{self, Rng};
use crate::ssl::{SslTargets, SslTask, TaskKind};

const NONE: usize = usize::MAX;
const INITIAL_TRIALS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub k: usize,
    pub epsilon: f64,
    pub refinement_passes: usize,
    pub seed: u64,
}

impl PartitionConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            epsilon: 0.05,
            refinement_passes: 10,
            seed,
        }
    }

    /// Largest part size allowed for `n` nodes.
    pub fn max_part_weight(&self, n: usize) -> usize {
        ((1.0 + self.epsilon) * n as f64 / self.k as f64 + 1e-9).floor() as usize
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 || self.k > n {
            return Err(Error::InfeasiblePartition(format!(
                "k = {} must be in 1..={n}",
                self.k
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be in (0, 1), got {}",
                self.epsilon
            )));
        }
        if n.div_ceil(self.k) > self.max_part_weight(n) {
            return Err(Error::InfeasiblePartition(format!(
                "{n} nodes cannot be split into {} parts within balance 1 + {}",
                self.k, self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub labels: Vec<usize>,
    pub edgecut: f64,
    /// Number of graphs in the hierarchy, the input included.
    pub levels: usize,
}

/// One accepted refinement move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FmMove {
    pub node: usize,
    pub from: usize,
    pub to: usize,
    /// Edgecut reduction caused by the move.
    pub gain: f64,
}

/// Graph partitioning task: part indices as pseudo-labels.
pub fn graph_partition(g: &SparseGraph, cfg: &PartitionConfig) -> Result<SslTask> {
    let part = partition_graph(g, cfg)?;
    Ok(SslTask {
        kind: TaskKind::Partitioning,
        masked_features: None,
        targets: SslTargets::Classes(part.labels),
        nodes: (0..g.num_nodes()).collect(),
        output_dim: cfg.k,
    })
}

/// Total weight of edges whose endpoints carry different labels.
pub fn edgecut(g: &SparseGraph, labels: &[usize]) -> f64 {
    g.edges()
        .filter(|&(i, j, _)| labels[i] != labels[j])
        .map(|(_, _, w)| w)
        .sum()
}

/// `k · max_k |part_k| / n`.
pub fn balance_factor(labels: &[usize], k: usize) -> f64 {
    if labels.is_empty() {
        return 1.0;
    }
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l] += 1;
    }
    k as f64 * *counts.iter().max().unwrap() as f64 / labels.len() as f64
}

pub fn partition_graph(g: &SparseGraph, cfg: &PartitionConfig) -> Result<Partition> {
    let n = g.num_nodes();
    cfg.validate(n)?;
    let k = cfg.k;
    if k == 1 || k == n {
        let labels: Vec<usize> = if k == 1 { vec![0; n] } else { (0..n).collect() };
        return Ok(Partition {
            edgecut: edgecut(g, &labels),
            labels,
            levels: 1,
        });
    }
    let max_w = cfg.max_part_weight(n);
    let mut rng = rng::stream(cfg.seed, rng::streams::PARTITION);

    // Coarsening.
    let limit = (30 * k).max(200);
    let max_vw = ((1.5 * n as f64 / limit as f64).ceil() as usize).max(1);
    let mut graphs = vec![g.clone()];
    let mut weights = vec![vec![1usize; n]];
    let mut maps: Vec<Vec<usize>> = Vec::new();
    while graphs.last().unwrap().num_nodes() > limit {
        let (fine, fine_w) = (graphs.last().unwrap(), weights.last().unwrap());
        let (coarse, coarse_w, map) = coarsen(fine, fine_w, max_vw, &mut rng)?;
        if coarse.num_nodes() as f64 > 0.95 * fine.num_nodes() as f64 {
            break;
        }
        graphs.push(coarse);
        weights.push(coarse_w);
        maps.push(map);
    }

    // Initial partition on the coarsest graph, best of several trials.
    let (cg, cw) = (graphs.last().unwrap(), weights.last().unwrap());
    let mut best: Option<(bool, f64, Vec<usize>)> = None;
    for _ in 0..INITIAL_TRIALS {
        let mut labels = grow_regions(cg, cw, k, max_w, &mut rng);
        rebalance(cg, cw, &mut labels, k, max_w);
        fm_refine(cg, cw, &mut labels, k, max_w, cfg.refinement_passes);
        let balanced = part_weights(cw, &labels, k).iter().all(|&w| w <= max_w);
        let cut = edgecut(cg, &labels);
        let better = match &best {
            None => true,
            Some((b, c, _)) => (balanced, -cut) > (*b, -*c),
        };
        if better {
            best = Some((balanced, cut, labels));
        }
    }
    let mut labels = best.unwrap().2;

    // Uncoarsening with refinement at every level.
    for level in (0..maps.len()).rev() {
        let map = &maps[level];
        labels = map.iter().map(|&c| labels[c]).collect();
        let (fg, fw) = (&graphs[level], &weights[level]);
        rebalance(fg, fw, &mut labels, k, max_w);
        fm_refine(fg, fw, &mut labels, k, max_w, cfg.refinement_passes);
    }

    let weights = part_weights(&weights[0], &labels, k);
    if weights.iter().any(|&w| w == 0 || w > max_w) {
        return Err(Error::InfeasiblePartition(format!(
            "refinement ended with part sizes {weights:?} (limit {max_w})"
        )));
    }
    Ok(Partition {
        edgecut: edgecut(g, &labels),
        labels,
        levels: graphs.len(),
    })
}

fn part_weights(vw: &[usize], labels: &[usize], k: usize) -> Vec<usize> {
    let mut w = vec![0; k];
    for (v, &l) in labels.iter().enumerate() {
        w[l] += vw[v];
    }
    w
}

/// Heavy-edge matching contraction. Returns the coarse graph, its vertex
/// weights, and the fine-to-coarse vertex map.
fn coarsen(
    g: &SparseGraph,
    vw: &[usize],
    max_vw: usize,
    rng: &mut Rng,
) -> Result<(SparseGraph, Vec<usize>, Vec<usize>)> {
    let n = g.num_nodes();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut map = vec![NONE; n];
    let mut next = 0;
    for &u in &order {
        if map[u] != NONE {
            continue;
        }
        let mut mate = NONE;
        let mut best_w = f64::NEG_INFINITY;
        for (&v, &w) in g.neighbors(u).iter().zip(g.neighbor_weights(u)) {
            if map[v] != NONE || vw[u] + vw[v] > max_vw {
                continue;
            }
            let better = w > best_w || (w == best_w && (vw[v], v) < (vw[mate], mate));
            if better {
                mate = v;
                best_w = w;
            }
        }
        map[u] = next;
        if mate != NONE {
            map[mate] = next;
        }
        next += 1;
    }
    let mut coarse_w = vec![0; next];
    for v in 0..n {
        coarse_w[map[v]] += vw[v];
    }
    let edges: Vec<(usize, usize, f64)> = g
        .edges()
        .filter(|&(i, j, _)| map[i] != map[j])
        .map(|(i, j, w)| (map[i], map[j], w))
        .collect();
    let coarse = SparseGraph::from_weighted_edges(&edges, next)?;
    Ok((coarse, coarse_w, map))
}

/// Grows `k - 1` regions one after another from random seeds, each time
/// absorbing the unassigned vertex most strongly connected to the region
/// until it reaches `total / k`; the last part takes the remainder.
fn grow_regions(g: &SparseGraph, vw: &[usize], k: usize, max_w: usize, rng: &mut Rng) -> Vec<usize> {
    let n = g.num_nodes();
    let total: usize = vw.iter().sum();
    let target = total as f64 / k as f64;
    let mut labels = vec![NONE; n];
    let mut unassigned = n;
    for p in 0..k - 1 {
        let mut weight = 0usize;
        let mut conn = vec![0.0f64; n];
        while (weight as f64) < target && unassigned > 0 {
            let mut pick = NONE;
            for v in 0..n {
                if labels[v] == NONE && conn[v] > 0.0 && weight + vw[v] <= max_w
                    && (pick == NONE || conn[v] > conn[pick])
                {
                    pick = v;
                }
            }
            if pick == NONE {
                let free: Vec<usize> = (0..n)
                    .filter(|&v| labels[v] == NONE && weight + vw[v] <= max_w)
                    .collect();
                if free.is_empty() {
                    break;
                }
                pick = free[rng.gen_range(0..free.len())];
            }
            labels[pick] = p;
            weight += vw[pick];
            unassigned -= 1;
            for (&v, &w) in g.neighbors(pick).iter().zip(g.neighbor_weights(pick)) {
                conn[v] += w;
            }
        }
    }
    for l in labels.iter_mut() {
        if *l == NONE {
            *l = k - 1;
        }
    }
    labels
}

/// Connection weight from `u` to every part adjacent to it.
fn connections(g: &SparseGraph, labels: &[usize], u: usize, out: &mut Vec<(usize, f64)>) {
    out.clear();
    for (&v, &w) in g.neighbors(u).iter().zip(g.neighbor_weights(u)) {
        let p = labels[v];
        match out.iter_mut().find(|(q, _)| *q == p) {
            Some(e) => e.1 += w,
            None => out.push((p, w)),
        }
    }
}

fn conn_to(conns: &[(usize, f64)], p: usize) -> f64 {
    conns.iter().find(|(q, _)| *q == p).map_or(0.0, |e| e.1)
}

/// Restores nonempty parts and the weight limit by moving the vertices
/// whose departure costs the least edgecut.
pub(crate) fn rebalance(g: &SparseGraph, vw: &[usize], labels: &mut [usize], k: usize, max_w: usize) {
    let n = g.num_nodes();
    let mut pw = part_weights(vw, labels, k);
    let mut counts = vec![0usize; k];
    for &l in labels.iter() {
        counts[l] += 1;
    }
    let mut conns = Vec::new();

    // Empty parts first: each takes the cheapest vertex from the most
    // populous part.
    for p in 0..k {
        if counts[p] > 0 {
            continue;
        }
        let donor = (0..k).max_by_key(|&q| (counts[q], pw[q])).unwrap();
        let mut best: Option<(f64, usize)> = None;
        for u in (0..n).filter(|&u| labels[u] == donor) {
            connections(g, labels, u, &mut conns);
            let gain = conn_to(&conns, p) - conn_to(&conns, donor);
            if best.is_none_or(|(bg, bu)| gain > bg || (gain == bg && vw[u] < vw[bu])) {
                best = Some((gain, u));
            }
        }
        let u = best.unwrap().1;
        labels[u] = p;
        counts[donor] -= 1;
        counts[p] += 1;
        pw[donor] -= vw[u];
        pw[p] += vw[u];
    }

    let mut guard = 0;
    while guard < 4 * n {
        guard += 1;
        let Some(heavy) = (0..k).filter(|&p| pw[p] > max_w).max_by_key(|&p| pw[p]) else {
            break;
        };
        if counts[heavy] <= 1 {
            break;
        }
        let lightest = (0..k).min_by_key(|&p| pw[p]).unwrap();
        let mut best: Option<(f64, usize, usize)> = None;
        for u in (0..n).filter(|&u| labels[u] == heavy) {
            connections(g, labels, u, &mut conns);
            let internal = conn_to(&conns, heavy);
            let mut consider = |p: usize, c: f64| {
                if p == heavy || pw[p] + vw[u] > max_w {
                    return;
                }
                let gain = c - internal;
                let replace = match best {
                    None => true,
                    Some((bg, bu, bp)) => {
                        gain > bg || (gain == bg && (vw[u], pw[p], u) < (vw[bu], pw[bp], bu))
                    }
                };
                if replace {
                    best = Some((gain, u, p));
                }
            };
            for &(p, c) in &conns {
                consider(p, c);
            }
            consider(lightest, conn_to(&conns, lightest));
        }
        let Some((_, u, p)) = best else { break };
        labels[u] = p;
        counts[heavy] -= 1;
        counts[p] += 1;
        pw[heavy] -= vw[u];
        pw[p] += vw[u];
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    gain: f64,
    node: usize,
    to: usize,
    version: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.node.cmp(&self.node))
            .then_with(|| other.to.cmp(&self.to))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct FmState<'a> {
    g: &'a SparseGraph,
    vw: &'a [usize],
    max_w: usize,
    pw: Vec<usize>,
    counts: Vec<usize>,
    conns: Vec<(usize, f64)>,
}

impl FmState<'_> {
    /// Best admissible move for `u`: positive gain, or zero gain that
    /// evens out the two parts involved.
    fn best_move(&mut self, labels: &[usize], u: usize) -> Option<(f64, usize)> {
        let from = labels[u];
        if self.counts[from] <= 1 {
            return None;
        }
        connections(self.g, labels, u, &mut self.conns);
        let internal = conn_to(&self.conns, from);
        let mut best: Option<(f64, usize)> = None;
        for &(p, c) in &self.conns {
            if p == from || self.pw[p] + self.vw[u] > self.max_w {
                continue;
            }
            let gain = c - internal;
            let admissible = gain > 0.0 || (gain == 0.0 && self.pw[p] + self.vw[u] < self.pw[from]);
            if !admissible {
                continue;
            }
            let replace = match best {
                None => true,
                Some((bg, bp)) => gain > bg || (gain == bg && (self.pw[p], p) < (self.pw[bp], bp)),
            };
            if replace {
                best = Some((gain, p));
            }
        }
        best
    }
}

/// Boundary FM refinement. Each pass moves every vertex at most once,
/// always taking the best admissible move available. A move is admissible
/// when it keeps every part within `max_w`, leaves its source part
/// nonempty, and either lowers the edgecut or keeps it while evening out
/// the two parts involved. Returns the accepted moves in order.
pub fn fm_refine(
    g: &SparseGraph,
    vw: &[usize],
    labels: &mut [usize],
    k: usize,
    max_w: usize,
    passes: usize,
) -> Vec<FmMove> {
    let n = g.num_nodes();
    let mut state = FmState {
        g,
        vw,
        max_w,
        pw: part_weights(vw, labels, k),
        counts: vec![0; k],
        conns: Vec::new(),
    };
    for &l in labels.iter() {
        state.counts[l] += 1;
    }
    let mut log = Vec::new();
    let mut version = vec![0u32; n];
    for _ in 0..passes {
        let mut locked = vec![false; n];
        let mut heap = BinaryHeap::new();
        for u in 0..n {
            if g.neighbors(u).iter().any(|&v| labels[v] != labels[u]) {
                if let Some((gain, to)) = state.best_move(labels, u) {
                    heap.push(Candidate { gain, node: u, to, version: version[u] });
                }
            }
        }
        let before = log.len();
        while let Some(c) = heap.pop() {
            let u = c.node;
            if locked[u] || c.version != version[u] {
                continue;
            }
            let Some((gain, to)) = state.best_move(labels, u) else {
                continue;
            };
            if (gain, to) != (c.gain, c.to) {
                version[u] += 1;
                heap.push(Candidate { gain, node: u, to, version: version[u] });
                continue;
            }
            let from = labels[u];
            labels[u] = to;
            state.pw[from] -= vw[u];
            state.pw[to] += vw[u];
            state.counts[from] -= 1;
            state.counts[to] += 1;
            locked[u] = true;
            log.push(FmMove { node: u, from, to, gain });
            for &v in g.neighbors(u) {
                if locked[v] {
                    continue;
                }
                version[v] += 1;
                if let Some((gain, to)) = state.best_move(labels, v) {
                    heap.push(Candidate { gain, node: v, to, version: version[v] });
                }
            }
        }
        if log.len() == before {
            break;
        }
    }
    log
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ssl::is_valid_cover;
    use proptest::prelude::*;

    fn two_triangles() -> SparseGraph {
        SparseGraph::build_csr(&[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)], 6).unwrap()
    }

    fn random_graph(n: usize, m: usize, seed: u64) -> SparseGraph {
        let mut r = rng::stream(seed, 0);
        let edges: Vec<(usize, usize)> = (0..m).map(|_| (r.gen_range(0..n), r.gen_range(0..n))).collect();
        SparseGraph::build_csr(&edges, n).unwrap()
    }

    fn random_balanced(n: usize, k: usize, r: &mut crate::rng::Rng) -> Vec<usize> {
        let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
        labels.shuffle(r);
        labels
    }

    #[test]
    fn edgecut_examples() {
        let cycle = SparseGraph::build_csr(&[(0, 1), (1, 2), (2, 3), (3, 0)], 4).unwrap();
        assert_eq!(edgecut(&cycle, &[0, 0, 1, 1]), 2.0);
        assert_eq!(edgecut(&cycle, &[0, 0, 0, 0]), 0.0);
        let empty = SparseGraph::build_csr(&[], 4).unwrap();
        assert_eq!(edgecut(&empty, &[0, 1, 2, 3]), 0.0);
    }

    #[test]
    fn single_part() {
        let p = partition_graph(&two_triangles(), &PartitionConfig::new(1, 0)).unwrap();
        assert_eq!(p.labels, vec![0; 6]);
        assert_eq!(p.edgecut, 0.0);
        assert_eq!(balance_factor(&p.labels, 1), 1.0);
    }

    #[test]
    fn singleton_parts_cut_everything() {
        let g = random_graph(12, 30, 3);
        let p = partition_graph(&g, &PartitionConfig::new(12, 0)).unwrap();
        assert!(is_valid_cover(&p.labels, 12));
        assert_eq!(p.edgecut, g.total_edge_weight());
    }

    /// Minimum edgecut over every balanced two-way split, by enumeration.
    fn exhaustive_min_cut(g: &SparseGraph, max_w: usize) -> (f64, Vec<Vec<usize>>) {
        let n = g.num_nodes();
        let mut best = f64::INFINITY;
        let mut argmins = Vec::new();
        for mask in 1u32..(1 << n) - 1 {
            let labels: Vec<usize> = (0..n).map(|i| ((mask >> i) & 1) as usize).collect();
            let ones = mask.count_ones() as usize;
            if ones > max_w || n - ones > max_w {
                continue;
            }
            let cut = edgecut(g, &labels);
            if cut < best {
                best = cut;
                argmins.clear();
            }
            if cut == best {
                argmins.push(labels);
            }
        }
        (best, argmins)
    }

    #[test]
    fn two_cliques_split_at_bridge() {
        let g = two_triangles();
        let cfg = PartitionConfig { epsilon: 0.2, ..PartitionConfig::new(2, 0) };
        let (oracle_cut, argmins) = exhaustive_min_cut(&g, cfg.max_part_weight(6));
        assert_eq!(oracle_cut, 1.0);
        for seed in 0..10 {
            let p = partition_graph(&g, &PartitionConfig { seed, ..cfg }).unwrap();
            assert_eq!(p.edgecut, oracle_cut);
            assert!(argmins.contains(&p.labels));
            assert_eq!(p.labels[0], p.labels[1]);
            assert_eq!(p.labels[1], p.labels[2]);
            assert_ne!(p.labels[2], p.labels[3]);
        }
    }

    #[test]
    fn infeasible_balance_rejected() {
        let g = random_graph(6, 8, 1);
        assert!(matches!(
            partition_graph(&g, &PartitionConfig::new(4, 0)),
            Err(Error::InfeasiblePartition(_))
        ));
        assert!(partition_graph(&g, &PartitionConfig::new(7, 0)).is_err());
        let bad_eps = PartitionConfig { epsilon: 1.5, ..PartitionConfig::new(2, 0) };
        assert!(partition_graph(&g, &bad_eps).is_err());
    }

    #[test]
    fn disconnected_graph_accepted() {
        let g = SparseGraph::build_csr(&[(0, 1), (2, 3)], 9).unwrap();
        let p = partition_graph(&g, &PartitionConfig::new(3, 5)).unwrap();
        assert!(is_valid_cover(&p.labels, 3));
        assert!(balance_factor(&p.labels, 3) <= 1.05);
    }

    #[test]
    fn multilevel_beats_random_partitions() {
        // Planted communities large enough to trigger coarsening.
        let mut r = rng::stream(11, 0);
        let (n, blocks) = (1200, 6);
        let mut edges = Vec::new();
        for _ in 0..6000 {
            let u = r.gen_range(0..n);
            let same = r.gen::<f64>() < 0.9;
            let v = if same {
                (u / (n / blocks)) * (n / blocks) + r.gen_range(0..n / blocks)
            } else {
                r.gen_range(0..n)
            };
            edges.push((u, v));
        }
        let g = SparseGraph::build_csr(&edges, n).unwrap();
        let cfg = PartitionConfig::new(blocks, 2);
        let p = partition_graph(&g, &cfg).unwrap();
        assert!(p.levels > 1);
        assert!(is_valid_cover(&p.labels, blocks));
        assert!(balance_factor(&p.labels, blocks) <= 1.0 + cfg.epsilon);
        for _ in 0..20 {
            let random = random_balanced(n, blocks, &mut r);
            assert!(p.edgecut <= edgecut(&g, &random));
        }
    }

    #[test]
    fn task_wraps_labels() {
        let task = graph_partition(&two_triangles(), &PartitionConfig { epsilon: 0.2, ..PartitionConfig::new(2, 0) })
            .unwrap();
        assert_eq!(task.kind, TaskKind::Partitioning);
        assert_eq!(task.nodes, (0..6).collect::<Vec<_>>());
        assert_eq!(task.output_dim, 2);
    }

    proptest! {
        #[test]
        fn partition_is_balanced_cover(n in 4usize..80, m in 0usize..200, k in 1usize..5, seed in 0u64..100) {
            let g = random_graph(n, m, seed);
            let cfg = PartitionConfig { epsilon: 0.3, ..PartitionConfig::new(k, seed) };
            match partition_graph(&g, &cfg) {
                Ok(p) => {
                    prop_assert!(is_valid_cover(&p.labels, k));
                    prop_assert!(balance_factor(&p.labels, k) <= 1.0 + cfg.epsilon + 1e-12);
                    prop_assert_eq!(p.edgecut, edgecut(&g, &p.labels));
                }
                Err(_) => prop_assert!(n.div_ceil(k) > cfg.max_part_weight(n)),
            }
        }

        #[test]
        fn fm_moves_never_worsen(n in 6usize..60, m in 5usize..150, k in 2usize..5, seed in 0u64..100) {
            let g = random_graph(n, m, seed);
            let max_w = ((1.1 * n as f64) / k as f64).floor() as usize;
            prop_assume!(n.div_ceil(k) <= max_w);
            let mut r = rng::stream(seed, 1);
            let mut labels = random_balanced(n, k, &mut r);
            let start = labels.clone();
            let vw = vec![1; n];
            let log = fm_refine(&g, &vw, &mut labels, k, max_w, 5);
            let mut replay = start;
            let mut cut = edgecut(&g, &replay);
            for mv in &log {
                prop_assert_eq!(replay[mv.node], mv.from);
                replay[mv.node] = mv.to;
                let next = edgecut(&g, &replay);
                prop_assert!(next <= cut);
                prop_assert!((cut - next - mv.gain).abs() < 1e-9);
                prop_assert!(part_weights(&vw, &replay, k).iter().all(|&w| w <= max_w && w > 0));
                cut = next;
            }
            prop_assert_eq!(replay, labels);
        }
    }
}
