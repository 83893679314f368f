//! Dense linear algebra and the two-layer GCN.

mod adam;
pub mod checkpoint;
mod config;
mod dense;
mod gcn;
mod gradcheck;
mod loss;

pub(crate) use adam::TensorAdam;
pub(crate) use gcn::glorot_with;
pub use adam::{adam_step, AdamState};
pub use config::TrainConfig;
pub use dense::{argmax, DenseMatrix};
pub use gcn::{
    apply_head, extract, extractor_backward, gcn_backward, gcn_forward, glorot_init,
    head_backward, Dropout, ExtractorCache, ForwardCache, GcnGrads, GcnParams, Head,
};
pub use gradcheck::{grad_check, GradCheckReport};
pub use loss::{mse_loss, softmax_cross_entropy};
