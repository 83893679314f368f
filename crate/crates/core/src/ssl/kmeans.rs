use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::sparse::CsrMatrix;
use crate::ssl::{SslTargets, SslTask, TaskKind};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    /// Row-major `k × dim` centroids after the last update.
    pub centroids: Vec<f64>,
    /// Sum of squared distances after each assignment step.
    pub objective_history: Vec<f64>,
    /// Whether an empty cluster was re-seeded after the matching assignment step.
    pub reseeded: Vec<bool>,
    pub iterations: usize,
}

impl KMeansResult {
    pub fn final_objective(&self) -> f64 {
        self.objective_history.last().copied().unwrap_or(0.0)
    }
}

/// Node clustering task: k-means on feature rows, cluster indices as labels.
pub fn node_clustering(x: &CsrMatrix, k: usize, seed: u64, max_iters: usize) -> Result<SslTask> {
    let result = kmeans(x, k, seed, max_iters)?;
    Ok(SslTask {
        kind: TaskKind::Clustering,
        masked_features: None,
        targets: SslTargets::Classes(result.labels),
        nodes: (0..x.rows()).collect(),
        output_dim: k,
    })
}

/// k-means++ seeding followed by Lloyd iterations.
pub fn kmeans(x: &CsrMatrix, k: usize, seed: u64, max_iters: usize) -> Result<KMeansResult> {
    check_k(x.rows(), k)?;
    let mut rng = rng::stream(seed, rng::streams::TASK);
    let init = plus_plus_init(x, k, &mut rng);
    lloyd_from(x, init, k, max_iters)
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidConfig(format!(
            "cluster count {k} must be in 1..={n}"
        )));
    }
    Ok(())
}

fn row_norms(x: &CsrMatrix) -> Vec<f64> {
    (0..x.rows())
        .map(|i| x.row(i).1.iter().map(|v| v * v).sum())
        .collect()
}

fn sq_dist(x: &CsrMatrix, i: usize, x_norm: f64, c: &[f64], c_norm: f64) -> f64 {
    let (cols, vals) = x.row(i);
    let dot: f64 = cols.iter().zip(vals).map(|(&j, &v)| v * c[j]).sum();
    (x_norm - 2.0 * dot + c_norm).max(0.0)
}

fn dense_row(x: &CsrMatrix, i: usize, out: &mut [f64]) {
    out.fill(0.0);
    let (cols, vals) = x.row(i);
    for (&j, &v) in cols.iter().zip(vals) {
        out[j] = v;
    }
}

fn plus_plus_init(x: &CsrMatrix, k: usize, rng: &mut Rng) -> Vec<f64> {
    let (n, d) = x.shape();
    let norms = row_norms(x);
    let mut centers = vec![0.0; k * d];
    let mut chosen = vec![false; n];
    let first = rng.gen_range(0..n);
    chosen[first] = true;
    dense_row(x, first, &mut centers[..d]);
    let mut best: Vec<f64> = (0..n)
        .map(|i| sq_dist(x, i, norms[i], &centers[..d], norms[first]))
        .collect();
    for c in 1..k {
        let total: f64 = best.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in best.iter().enumerate() {
                if w > 0.0 && r < w {
                    pick = i;
                    break;
                }
                r -= w;
            }
            while best[pick] == 0.0 {
                pick -= 1;
            }
            pick
        } else {
            // Fewer distinct points than clusters: pick an unused row.
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.gen_range(0..free.len())]
        };
        chosen[pick] = true;
        let center = &mut centers[c * d..(c + 1) * d];
        dense_row(x, pick, center);
        let c_norm = norms[pick];
        for i in 0..n {
            let dist = sq_dist(x, i, norms[i], center, c_norm);
            if dist < best[i] {
                best[i] = dist;
            }
        }
    }
    centers
}

/// Plain Lloyd iterations from the given row-major `k × dim` centroids.
///
/// Each iteration assigns every row to its nearest centroid (lowest index
/// on ties), records the objective, and recomputes centroids as means.
/// Iteration stops when assignments no longer change or after `max_iters`
/// assignment steps. Empty clusters are re-seeded with the row farthest
/// from its centroid among clusters holding at least two rows.
pub fn lloyd_from(x: &CsrMatrix, init: Vec<f64>, k: usize, max_iters: usize) -> Result<KMeansResult> {
    let (n, d) = x.shape();
    check_k(n, k)?;
    if init.len() != k * d {
        return Err(Error::ShapeMismatch {
            op: "lloyd_from",
            left: (k, d),
            right: (init.len() / d.max(1), d),
        });
    }
    let norms = row_norms(x);
    let mut centers = init;
    let mut labels = vec![usize::MAX; n];
    let mut dists = vec![0.0; n];
    let mut history = Vec::new();
    let mut reseeded = Vec::new();
    let mut iterations = 0;

    for _ in 0..max_iters.max(1) {
        iterations += 1;
        let c_norms: Vec<f64> = centers.chunks(d.max(1)).map(|c| c.iter().map(|v| v * v).sum()).collect();
        let mut changed = false;
        for i in 0..n {
            let mut best = (0, f64::INFINITY);
            for c in 0..k {
                let dist = sq_dist(x, i, norms[i], &centers[c * d..(c + 1) * d], c_norms[c]);
                if dist < best.1 {
                    best = (c, dist);
                }
            }
            if labels[i] != best.0 {
                labels[i] = best.0;
                changed = true;
            }
            dists[i] = best.1;
        }
        history.push(dists.iter().sum());
        let did_reseed = fill_empty(&mut labels, &dists, k);
        reseeded.push(did_reseed);
        update_centers(x, &labels, k, &mut centers);
        if !changed && !did_reseed {
            break;
        }
    }
    Ok(KMeansResult {
        labels,
        centroids: centers,
        objective_history: history,
        reseeded,
        iterations,
    })
}

fn fill_empty(labels: &mut [usize], dists: &[f64], k: usize) -> bool {
    let mut counts = vec![0usize; k];
    for &l in labels.iter() {
        counts[l] += 1;
    }
    let mut moved = vec![false; labels.len()];
    let mut any = false;
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        let far = (0..labels.len())
            .filter(|&i| !moved[i] && counts[labels[i]] > 1)
            .fold(None, |acc: Option<usize>, i| match acc {
                Some(j) if dists[j] >= dists[i] => Some(j),
                _ => Some(i),
            })
            .expect("k <= n leaves a cluster with two rows");
        counts[labels[far]] -= 1;
        labels[far] = c;
        counts[c] = 1;
        moved[far] = true;
        any = true;
    }
    any
}

fn update_centers(x: &CsrMatrix, labels: &[usize], k: usize, centers: &mut [f64]) {
    let d = x.cols();
    centers.fill(0.0);
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        let (cols, vals) = x.row(i);
        let c = &mut centers[l * d..(l + 1) * d];
        for (&j, &v) in cols.iter().zip(vals) {
            c[j] += v;
        }
    }
    for (c, &cnt) in counts.iter().enumerate() {
        if cnt > 0 {
            let inv = 1.0 / cnt as f64;
            centers[c * d..(c + 1) * d].iter_mut().for_each(|v| *v *= inv);
        }
    }
}
