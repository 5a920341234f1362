//! Seeded synthetic datasets for smoke tests and end-to-end checks.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{DataError, RatingRecord, TrustDataset};
use crate::rng::SplitMix64;

/// Planted-community trust graph: users split into equal contiguous blocks,
/// each ordered pair trusts with `p_intra` inside a block and `p_inter`
/// across blocks. Items are split into the same number of blocks; a user
/// rates each item of its own block with `p_rate_own` and any other item
/// with `p_rate_other`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantedConfig {
    pub n_users: usize,
    pub n_communities: usize,
    pub p_intra: f64,
    pub p_inter: f64,
    pub n_items: usize,
    pub p_rate_own: f64,
    pub p_rate_other: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            n_users: 200,
            n_communities: 4,
            p_intra: 0.15,
            p_inter: 0.005,
            n_items: 40,
            p_rate_own: 0.3,
            p_rate_other: 0.02,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Planted {
    pub trust: Vec<(u64, u64)>,
    pub ratings: Vec<RatingRecord>,
    /// Block of every user (external ID = index).
    pub communities: Vec<usize>,
}

impl Planted {
    pub fn dataset(&self) -> Result<TrustDataset, DataError> {
        TrustDataset::from_records(&self.trust, &self.ratings).map(|(ds, _)| ds)
    }
}

fn block(index: usize, n: usize, blocks: usize) -> usize {
    index * blocks / n
}

pub fn planted_community(cfg: &PlantedConfig) -> Planted {
    let n = cfg.n_users;
    let c = cfg.n_communities.max(1);
    let communities: Vec<usize> = (0..n).map(|u| block(u, n, c)).collect();
    let mut rng = SplitMix64::derive(cfg.seed, 0x5e7);
    let mut trust = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let p = if communities[i] == communities[j] { cfg.p_intra } else { cfg.p_inter };
            if rng.next_f64() < p {
                trust.push((i as u64, j as u64));
            }
        }
    }
    let mut ratings = Vec::new();
    for u in 0..n {
        for item in 0..cfg.n_items {
            let own = block(item, cfg.n_items, c) == communities[u];
            let p = if own { cfg.p_rate_own } else { cfg.p_rate_other };
            if rng.next_f64() < p {
                let rating = (1 + rng.below(5)) as f64;
                ratings.push(RatingRecord { user: u as u64, item: item as u64, rating, helpfulness: None });
            }
        }
    }
    Planted { trust, ratings, communities }
}

/// Six users in two reciprocal-heavy triangles joined by one edge, each
/// triangle sharing a rated item.
pub fn toy() -> Planted {
    let trust = [(0, 1), (1, 0), (1, 2), (2, 0), (3, 4), (4, 3), (4, 5), (5, 3), (2, 3), (0, 2), (3, 5)]
        .into_iter()
        .collect();
    let ratings = [(0, 100), (1, 100), (2, 100), (3, 200), (4, 200), (5, 200), (2, 200)]
        .into_iter()
        .map(|(user, item)| RatingRecord { user, item, rating: 4.0, helpfulness: None })
        .collect();
    Planted { trust, ratings, communities: alloc::vec![0, 0, 0, 1, 1, 1] }
}
