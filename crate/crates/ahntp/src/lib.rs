//! File formats, checkpoints, metrics reports and the `ahntp` command-line
//! driver around [`ahntp_core`].
//!
//! | file | module |
//! |------|--------|
//! | trust / ratings TSV | [`dataset`] |
//! | `scores.tsv`, `hypergraph.tsv` | [`formats`] |
//! | `checkpoint.bin` | [`checkpoint`] |
//! | `metrics.json` | [`metrics`] |
//! | run configuration JSON | [`config`] |

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod formats;
pub mod metrics;

pub use ahntp_core as core;
