//! Two-layer graph convolutional networks trained with self-supervised
//! auxiliary tasks (node clustering, graph partitioning, graph completion),
//! plus single-node evasion attacks and adversarial training.
//!
//! The crate is organised bottom-up:
//!
//! - [`graph`], [`sparse`], [`dataset`]: CSR graphs, the normalized
//!   propagation matrix and the on-disk dataset format.
//! - [`nn`]: dense matrices, the GCN forward/backward pass, losses, Adam
//!   and a finite-difference gradient checker.
//! - [`ssl`]: the pseudo-labelled self-supervised tasks.
//! - [`train`]: supervised training, pretraining & finetuning,
//!   self-training and multi-task training.
//! - [`adversarial`]: attacks, perturbation application and adversarial
//!   training with or without self-supervision.
//! - [`runner`]: experiment configs, seed sweeps, aggregation and reports.
//! - [`synthetic`]: planted-partition graphs for tests and smoke runs.

pub mod adversarial;
pub mod dataset;
pub mod error;
pub mod graph;
pub mod nn;
pub mod rng;
pub mod runner;
pub mod sparse;
pub mod ssl;
pub mod synthetic;
pub mod train;

pub use dataset::{Dataset, Split, SplitSpec};
pub use error::{Error, Result};
pub use graph::{normalize_adjacency, NormalizedAdjacency, SparseGraph};
pub use nn::{DenseMatrix, GcnParams, TrainConfig};
pub use sparse::CsrMatrix;
