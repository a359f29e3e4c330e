//! Recursive graph autoencoder.
//!
//! Undirected graphs of any size are encoded into fixed-dimension embeddings
//! by a recursive cell walking the lower triangle of the adjacency matrix in
//! `l x l` patches, and decoded back — including the graph size — by the
//! mirror recursion. The crate also carries the full training pipeline:
//! canonical vertex ordering, dataset generation/ingestion, splitting with
//! permutation augmentation, a curriculum over growing subgraph windows,
//! class-weighted reconstruction loss on a from-scratch reverse-mode tensor
//! core, and the evaluation metrics.

pub mod cells;
pub mod checkpoint;
pub mod codec;
pub mod config;
pub mod curriculum;
pub mod dataset;
pub mod graph;
pub mod loss;
pub mod metrics;
pub mod optim;
pub mod patch;
pub mod tensor;
pub mod train;

pub use cells::{CellConfig, ModelParams};
pub use codec::{decode, embed, AdjMatrix, DecodeResult, StopRule};
pub use config::{preset, RunConfig};
pub use dataset::{generate_grid_dataset, load_tu_dataset, split_dataset, DatasetSplit};
pub use graph::{canonical_order, extract_window_subgraph, permute_graph, CanonicalGraph, Graph};
pub use loss::{batch_loss, reconstruction_loss, LossWeights};
pub use metrics::{evaluate, MetricsReport};
pub use patch::{to_patch_grid, PatchGrid};
pub use train::{train, TrainResult};
