//! Training schemes: plain supervised training, pretraining & finetuning,
//! self-training and multi-task learning, plus evaluation.

mod fit;
mod schemes;

pub use fit::{accuracy, evaluate, predict, ModelInputs, RunResult};
pub use schemes::{
    pretrain_finetune, pretrain_finetune_with, self_train, train_multitask, train_supervised,
    PRETRAIN_EPOCHS,
};

pub(crate) use fit::{fit, ss_terms, HeadTerm, Pass};
