//! Trust datasets, seeded train/test splits, negative sampling and batching.
//!
//! Text formats (tab separated, `#` starts a comment line, blank lines are
//! ignored):
//!
//! - trust: `trustor_id  trustee_id`
//! - ratings: `user_id  item_id  rating  [helpfulness]`
//!
//! IDs are arbitrary non-negative integers. Dense user indices follow the
//! ascending order of external IDs, so loading is independent of line order.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::objective::PairBatch;
use crate::rng::SplitMix64;
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("{file} line {line}: {message}")]
    Parse { file: &'static str, line: usize, message: String },
    #[error("trust file contains no edges")]
    EmptyTrust,
    #[error("train_fraction must lie in (0, 1), got {0}")]
    TrainFraction(f64),
    #[error("split leaves the {0} set without positives")]
    EmptySplit(&'static str),
    #[error("could not sample {needed} negatives in {attempts} attempts; graph too dense")]
    TooDense { needed: usize, attempts: usize },
    #[error("batch_size must be at least 1")]
    BatchSize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatingRecord {
    pub user: u64,
    pub item: u64,
    pub rating: f64,
    pub helpfulness: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    pub user: usize,
    pub item: usize,
    pub rating: f64,
    pub helpfulness: Option<f64>,
}

/// Counts of records dropped while loading.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub self_edges_skipped: usize,
    pub duplicate_edges: usize,
}

impl LoadReport {
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.self_edges_skipped > 0 {
            w.push(alloc::format!("skipped {} self-trust edges", self.self_edges_skipped));
        }
        if self.duplicate_edges > 0 {
            w.push(alloc::format!("collapsed {} duplicate trust edges", self.duplicate_edges));
        }
        w
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            None
        } else {
            Some((i + 1, line.split('\t').map(str::trim).collect()))
        }
    })
}

fn field<T: core::str::FromStr>(file: &'static str, line: usize, what: &str, s: &str) -> Result<T, DataError> {
    s.parse().map_err(|_| DataError::Parse { file, line, message: alloc::format!("invalid {what} {s:?}") })
}

/// Parses a trust file into `(trustor, trustee)` external-ID pairs.
pub fn parse_trust(text: &str) -> Result<Vec<(u64, u64)>, DataError> {
    data_lines(text)
        .map(|(line, cols)| {
            if cols.len() != 2 {
                return Err(DataError::Parse {
                    file: "trust",
                    line,
                    message: alloc::format!("expected 2 columns, found {}", cols.len()),
                });
            }
            Ok((field("trust", line, "trustor id", cols[0])?, field("trust", line, "trustee id", cols[1])?))
        })
        .collect()
}

/// Parses a ratings file.
pub fn parse_ratings(text: &str) -> Result<Vec<RatingRecord>, DataError> {
    data_lines(text)
        .map(|(line, cols)| {
            if !(3..=4).contains(&cols.len()) {
                return Err(DataError::Parse {
                    file: "ratings",
                    line,
                    message: alloc::format!("expected 3 or 4 columns, found {}", cols.len()),
                });
            }
            let rating: f64 = field("ratings", line, "rating", cols[2])?;
            let helpfulness = match cols.get(3) {
                Some(s) => Some(field::<f64>("ratings", line, "helpfulness", s)?),
                None => None,
            };
            if !rating.is_finite() || helpfulness.is_some_and(|h| !h.is_finite()) {
                return Err(DataError::Parse { file: "ratings", line, message: "non-finite value".to_string() });
            }
            Ok(RatingRecord {
                user: field("ratings", line, "user id", cols[0])?,
                item: field("ratings", line, "item id", cols[1])?,
                rating,
                helpfulness,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrustDataset {
    user_ids: Vec<u64>,
    user_index: BTreeMap<u64, usize>,
    item_ids: Vec<u64>,
    trust_edges: Vec<(usize, usize)>,
    ratings: Vec<Rating>,
}

impl TrustDataset {
    /// Builds a dataset from parsed records, dropping self-edges and
    /// duplicate edges. Trust edges are stored sorted.
    pub fn from_records(trust: &[(u64, u64)], ratings: &[RatingRecord]) -> Result<(Self, LoadReport), DataError> {
        if trust.is_empty() {
            return Err(DataError::EmptyTrust);
        }
        let users: BTreeSet<u64> =
            trust.iter().flat_map(|&(a, b)| [a, b]).chain(ratings.iter().map(|r| r.user)).collect();
        let user_ids: Vec<u64> = users.into_iter().collect();
        let user_index: BTreeMap<u64, usize> = user_ids.iter().enumerate().map(|(i, &u)| (u, i)).collect();
        let items: BTreeSet<u64> = ratings.iter().map(|r| r.item).collect();
        let item_ids: Vec<u64> = items.into_iter().collect();
        let item_index: BTreeMap<u64, usize> = item_ids.iter().enumerate().map(|(i, &u)| (u, i)).collect();

        let mut report = LoadReport::default();
        let mut edges = BTreeSet::new();
        for &(a, b) in trust {
            if a == b {
                report.self_edges_skipped += 1;
            } else if !edges.insert((user_index[&a], user_index[&b])) {
                report.duplicate_edges += 1;
            }
        }
        let ratings = ratings
            .iter()
            .map(|r| Rating {
                user: user_index[&r.user],
                item: item_index[&r.item],
                rating: r.rating,
                helpfulness: r.helpfulness,
            })
            .collect();
        let trust_edges = edges.into_iter().collect::<Vec<_>>();
        if trust_edges.is_empty() {
            return Err(DataError::EmptyTrust);
        }
        Ok((Self { user_ids, user_index, item_ids, trust_edges, ratings }, report))
    }

    /// Parses both files and builds the dataset.
    pub fn parse(trust: &str, ratings: &str) -> Result<(Self, LoadReport), DataError> {
        Self::from_records(&parse_trust(trust)?, &parse_ratings(ratings)?)
    }

    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn trust_edges(&self) -> &[(usize, usize)] {
        &self.trust_edges
    }

    pub fn ratings(&self) -> &[Rating] {
        &self.ratings
    }

    /// `(user, item)` pairs of every rating.
    pub fn user_items(&self) -> Vec<(usize, usize)> {
        self.ratings.iter().map(|r| (r.user, r.item)).collect()
    }

    pub fn user_index(&self, external: u64) -> Option<usize> {
        self.user_index.get(&external).copied()
    }

    pub fn user_id(&self, index: usize) -> u64 {
        self.user_ids[index]
    }

    pub fn user_ids(&self) -> &[u64] {
        &self.user_ids
    }

    pub fn item_id(&self, index: usize) -> u64 {
        self.item_ids[index]
    }
}

/// Binary adjacency matrix of `edges` on `n` vertices.
pub fn adjacency(n: usize, edges: &[(usize, usize)]) -> SparseMatrix {
    let triplets: Vec<_> = edges.iter().map(|&(i, j)| (i, j, 1.0)).collect();
    let m = SparseMatrix::from_triplets(n, n, &triplets).expect("edge indices within range");
    // duplicates would have summed; clamp back to binary
    let t: Vec<_> = m.iter().map(|(i, j, _)| (i, j, 1.0)).collect();
    SparseMatrix::from_triplets(n, n, &t).expect("edge indices within range")
}

/// How negative pairs are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeSampling {
    /// `(i, k)` for positive `(i, j)`, with `k` uniform over the users that
    /// share no edge with `i` in either direction.
    #[default]
    Anchored,
    /// Uniform over ordered, unconnected, non-self pairs.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub seed: u64,
    pub train_fraction: f64,
    pub negatives_per_positive: usize,
    pub negative_sampling: NegativeSampling,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { seed: 0, train_fraction: 0.8, negatives_per_positive: 2, negative_sampling: NegativeSampling::Anchored }
    }
}

/// A fixed train/test partition of the trust edges with their negatives.
/// `train_neg[q·k .. (q+1)·k]` are the negatives drawn for `train_pos[q]`
/// (`k = negatives_per_positive`), likewise for the test set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub seed: u64,
    pub negatives_per_positive: usize,
    pub train_pos: Vec<(usize, usize)>,
    pub test_pos: Vec<(usize, usize)>,
    pub train_neg: Vec<(usize, usize)>,
    pub test_neg: Vec<(usize, usize)>,
}

impl SplitPlan {
    pub fn test_batch(&self) -> PairBatch {
        PairBatch { positives: self.test_pos.clone(), negatives: self.test_neg.clone() }
    }

    pub fn train_batch(&self) -> PairBatch {
        PairBatch { positives: self.train_pos.clone(), negatives: self.train_neg.clone() }
    }
}

/// Shuffles the edges with the seeded generator, keeps the first
/// `⌊f·m⌋` for training and draws `negatives_per_positive` negatives per
/// positive. Negatives never touch an edge in either direction and are
/// distinct across the whole plan.
pub fn make_split(ds: &TrustDataset, cfg: &SplitConfig) -> Result<SplitPlan, DataError> {
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) {
        return Err(DataError::TrainFraction(cfg.train_fraction));
    }
    let mut edges = ds.trust_edges().to_vec();
    SplitMix64::derive(cfg.seed, 1).shuffle(&mut edges);
    let n_train = libm::floor(cfg.train_fraction * edges.len() as f64) as usize;
    let test_pos = edges.split_off(n_train);
    let train_pos = edges;
    if train_pos.is_empty() {
        return Err(DataError::EmptySplit("train"));
    }
    if test_pos.is_empty() {
        return Err(DataError::EmptySplit("test"));
    }

    let n = ds.n_users();
    let connected: BTreeSet<(usize, usize)> =
        ds.trust_edges().iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect();
    let k = cfg.negatives_per_positive;
    let needed = (train_pos.len() + test_pos.len()) * k;
    let max_attempts = 100 * needed;
    let mut attempts = 0;
    let mut used = BTreeSet::new();
    let mut rng = SplitMix64::derive(cfg.seed, 2);
    let mut sample = |positives: &[(usize, usize)]| -> Result<Vec<(usize, usize)>, DataError> {
        let mut out = Vec::with_capacity(positives.len() * k);
        for &(i, _) in positives {
            for _ in 0..k {
                loop {
                    if attempts >= max_attempts {
                        return Err(DataError::TooDense { needed, attempts });
                    }
                    attempts += 1;
                    let a = match cfg.negative_sampling {
                        NegativeSampling::Anchored => i,
                        NegativeSampling::Uniform => rng.below(n),
                    };
                    let b = rng.below(n);
                    if a != b && !connected.contains(&(a, b)) && used.insert((a, b)) {
                        out.push((a, b));
                        break;
                    }
                }
            }
        }
        Ok(out)
    };
    let train_neg = sample(&train_pos)?;
    let test_neg = sample(&test_pos)?;
    Ok(SplitPlan { seed: cfg.seed, negatives_per_positive: k, train_pos, test_pos, train_neg, test_neg })
}

/// Mini-batches for one epoch: train positives shuffled with `epoch_seed`,
/// `batch_size` positives per batch, each followed by its own negatives.
pub fn batches(split: &SplitPlan, batch_size: usize, epoch_seed: u64) -> Result<Vec<PairBatch>, DataError> {
    if batch_size == 0 {
        return Err(DataError::BatchSize);
    }
    let k = split.negatives_per_positive;
    let mut order: Vec<usize> = (0..split.train_pos.len()).collect();
    SplitMix64::derive(epoch_seed, 3).shuffle(&mut order);
    Ok(order
        .chunks(batch_size)
        .map(|chunk| PairBatch {
            positives: chunk.iter().map(|&q| split.train_pos[q]).collect(),
            negatives: chunk.iter().flat_map(|&q| split.train_neg[q * k..(q + 1) * k].iter().copied()).collect(),
        })
        .collect())
}
