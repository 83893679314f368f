use crate::error::{Error, Result};
use crate::nn::DenseMatrix;

/// Mean cross-entropy of `softmax(z_n)` against `labels[n]` over `nodes`.
///
/// `labels` is indexed by row of `z`. The returned gradient is zero outside
/// `nodes` and `(softmax − onehot) / |nodes|` inside.
pub fn softmax_cross_entropy(
    z: &DenseMatrix,
    labels: &[usize],
    nodes: &[usize],
) -> Result<(f64, DenseMatrix)> {
    if nodes.is_empty() {
        return Err(Error::EmptyNodeSet("softmax_cross_entropy"));
    }
    if labels.len() != z.rows() {
        return Err(Error::ShapeMismatch {
            op: "softmax_cross_entropy",
            left: z.shape(),
            right: (labels.len(), 1),
        });
    }
    let scale = 1.0 / nodes.len() as f64;
    let mut loss = 0.0;
    let mut dz = DenseMatrix::zeros(z.rows(), z.cols());
    let mut probs = vec![0.0; z.cols()];
    for &n in nodes {
        let row = z.row(n);
        let y = labels[n];
        if y >= z.cols() {
            return Err(Error::IndexOutOfRange {
                index: y,
                len: z.cols(),
            });
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (p, &v) in probs.iter_mut().zip(row) {
            *p = (v - max).exp();
            sum += *p;
        }
        loss += max + sum.ln() - row[y];
        let d = dz.row_mut(n);
        for (k, (o, p)) in d.iter_mut().zip(&probs).enumerate() {
            let onehot = if k == y { 1.0 } else { 0.0 };
            *o += (p / sum - onehot) * scale;
        }
    }
    Ok((loss * scale, dz))
}

/// Mean squared error over the given rows and every column.
pub fn mse_loss(
    z: &DenseMatrix,
    target: &DenseMatrix,
    rows: &[usize],
) -> Result<(f64, DenseMatrix)> {
    if rows.is_empty() {
        return Err(Error::EmptyNodeSet("mse_loss"));
    }
    if z.shape() != target.shape() {
        return Err(Error::ShapeMismatch {
            op: "mse_loss",
            left: z.shape(),
            right: target.shape(),
        });
    }
    let scale = 1.0 / (rows.len() * z.cols().max(1)) as f64;
    let mut loss = 0.0;
    let mut dz = DenseMatrix::zeros(z.rows(), z.cols());
    for &r in rows {
        let t = target.row(r);
        let zr = z.row(r);
        let d = dz.row_mut(r);
        for ((o, &a), &b) in d.iter_mut().zip(zr).zip(t) {
            let diff = a - b;
            loss += diff * diff;
            *o += 2.0 * diff * scale;
        }
    }
    Ok((loss * scale, dz))
}
