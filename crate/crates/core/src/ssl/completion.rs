use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::nn::DenseMatrix;
use crate::rng;
use crate::sparse::CsrMatrix;
use crate::ssl::{SslTargets, SslTask, TaskKind};

/// Graph completion: zero the feature rows of `⌈mask_fraction · n⌉`
/// pseudo-randomly chosen nodes and regress their original rows from the
/// neighbourhood.
pub fn graph_completion(x: &CsrMatrix, mask_fraction: f64, seed: u64) -> Result<SslTask> {
    if !(mask_fraction > 0.0 && mask_fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "mask_fraction must be in (0, 1], got {mask_fraction}"
        )));
    }
    let n = x.rows();
    let count = ((mask_fraction * n as f64).ceil() as usize).min(n);
    if count == 0 {
        return Err(Error::EmptyNodeSet("graph_completion"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, rng::streams::TASK));
    let mut nodes = order[..count].to_vec();
    nodes.sort_unstable();

    let mut targets = DenseMatrix::zeros(count, x.cols());
    for (k, &v) in nodes.iter().enumerate() {
        let (cols, vals) = x.row(v);
        let out = targets.row_mut(k);
        for (&c, &a) in cols.iter().zip(vals) {
            out[c] = a;
        }
    }
    Ok(SslTask {
        kind: TaskKind::Completion,
        masked_features: Some(x.with_rows_zeroed(&nodes)),
        targets: SslTargets::Features(targets),
        nodes,
        output_dim: x.cols(),
    })
}
