//! Trust prediction on social networks with adaptive hypergraph networks.
//!
//! This crate holds the whole numerical pipeline and is `no_std` (it needs
//! `alloc` only):
//!
//! - [`sparse`]: CSR matrices and dense vectors.
//! - [`motif`]: triangle-motif adjacency matrices and motif-based PageRank.
//! - [`hypergraph`]: the four hypergroup families, degrees and the
//!   normalized hypergraph Laplacian.
//! - [`autodiff`]: a small tape-based reverse-mode engine over dense
//!   matrices, plus Adam.
//! - [`model`]: adaptive hypergraph convolution with hyperedge attention,
//!   pairwise trustor/trustee projections and cosine scoring.
//! - [`objective`]: supervised contrastive, cross-entropy and Laplacian
//!   regularization terms.
//! - [`data`]: trust datasets, seeded splits, negative sampling and batching.
//! - [`train`]: the training loop, ablations and metrics.
//!
//! File IO, checkpoints and the command-line driver live in the `ahntp`
//! companion crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod autodiff;
pub mod data;
pub mod hypergraph;
pub mod model;
pub mod motif;
pub mod objective;
pub mod rng;
pub mod sparse;
pub mod synthetic;
pub mod train;

pub use sparse::{DenseVector, SparseMatrix};
