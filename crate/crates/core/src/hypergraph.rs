//! Hypergroup construction and hypergraph Laplacians.
//!
//! A trust hypergraph is assembled from four families of hyperedges:
//! social influence (each user with their top-K influencers), attribute
//! (users who rated the same item), pairwise (one hyperedge per trust pair)
//! and multi-hop (each user with everyone reachable in at most `h` hops).

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparse::{SparseError, SparseMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HypergraphError {
    #[error("hyperedge {0} has no members")]
    EmptyHyperedge(usize),
    #[error("hyperedge {edge} references vertex {vertex} but there are {n_vertices} vertices")]
    VertexOutOfRange { edge: usize, vertex: usize, n_vertices: usize },
    #[error("hyperedge {0} has non-positive weight {1}")]
    BadWeight(usize, f64),
    #[error("self-loop trust edge on user {0}")]
    SelfLoop(usize),
    #[error("n_hops must be at least 1")]
    ZeroHops,
    #[error(transparent)]
    Sparse(#[from] SparseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    SocialInfluence,
    Attribute,
    Pairwise,
    MultiHop,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::SocialInfluence, Family::Attribute, Family::Pairwise, Family::MultiHop];

    pub fn name(self) -> &'static str {
        match self {
            Family::SocialInfluence => "social_influence",
            Family::Attribute => "attribute",
            Family::Pairwise => "pairwise",
            Family::MultiHop => "multi_hop",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperedgeRecord {
    pub members: Vec<usize>,
    pub weight: f64,
    pub tag: String,
}

impl HyperedgeRecord {
    pub fn new(mut members: Vec<usize>, weight: f64, tag: String) -> Self {
        members.sort_unstable();
        members.dedup();
        Self { members, weight, tag }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypergraph {
    n_vertices: usize,
    family: Family,
    hyperedges: Vec<HyperedgeRecord>,
    incidence: SparseMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreePair {
    pub vertex_degrees: Vec<f64>,
    pub edge_degrees: Vec<f64>,
}

impl Hypergraph {
    pub fn new(n_vertices: usize, family: Family, hyperedges: Vec<HyperedgeRecord>) -> Result<Self, HypergraphError> {
        let mut triplets = Vec::new();
        let mut normalized = Vec::with_capacity(hyperedges.len());
        for (e, rec) in hyperedges.into_iter().enumerate() {
            let rec = HyperedgeRecord::new(rec.members, rec.weight, rec.tag);
            if rec.members.is_empty() {
                return Err(HypergraphError::EmptyHyperedge(e));
            }
            if !(rec.weight > 0.0 && rec.weight.is_finite()) {
                return Err(HypergraphError::BadWeight(e, rec.weight));
            }
            for &v in &rec.members {
                if v >= n_vertices {
                    return Err(HypergraphError::VertexOutOfRange { edge: e, vertex: v, n_vertices });
                }
                triplets.push((v, e, 1.0));
            }
            normalized.push(rec);
        }
        let incidence = SparseMatrix::from_triplets(n_vertices, normalized.len(), &triplets)?;
        Ok(Self { n_vertices, family, hyperedges: normalized, incidence })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_hyperedges(&self) -> usize {
        self.hyperedges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hyperedges.is_empty()
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn hyperedges(&self) -> &[HyperedgeRecord] {
        &self.hyperedges
    }

    /// Vertex × hyperedge 0/1 incidence matrix.
    pub fn incidence(&self) -> &SparseMatrix {
        &self.incidence
    }

    pub fn edge_weights(&self) -> Vec<f64> {
        self.hyperedges.iter().map(|e| e.weight).collect()
    }

    /// Hyperedges incident to each vertex, in ascending hyperedge order.
    pub fn incident_edges(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_vertices];
        for (e, rec) in self.hyperedges.iter().enumerate() {
            for &v in &rec.members {
                out[v].push(e);
            }
        }
        out
    }

    /// Same hyperedges with every vertex id replaced by `perm[id]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self, HypergraphError> {
        let edges = self
            .hyperedges
            .iter()
            .map(|r| HyperedgeRecord::new(r.members.iter().map(|&v| perm[v]).collect(), r.weight, r.tag.clone()))
            .collect();
        Self::new(self.n_vertices, self.family, edges)
    }
}

/// One hyperedge per user: the user together with their top influencers.
pub fn build_social_influence(topk: &[Vec<usize>], weight: f64) -> Result<Hypergraph, HypergraphError> {
    let edges = topk
        .iter()
        .enumerate()
        .map(|(u, infl)| {
            let mut members = Vec::with_capacity(infl.len() + 1);
            members.push(u);
            members.extend_from_slice(infl);
            HyperedgeRecord::new(members, weight, format!("influence:u={u}"))
        })
        .collect();
    Hypergraph::new(topk.len(), Family::SocialInfluence, edges)
}

/// One hyperedge per item linking the users who rated it.
///
/// Items with fewer than `min_size` raters are dropped; items with more than
/// `max_size` raters keep the most active raters (ties by ascending id).
pub fn build_attribute(
    n_users: usize,
    ratings: &[(usize, usize)],
    min_size: usize,
    max_size: usize,
    weight: f64,
) -> Result<Hypergraph, HypergraphError> {
    let mut by_item: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut activity = vec![0usize; n_users];
    for &(user, item) in ratings {
        if user < n_users {
            activity[user] += 1;
        }
        by_item.entry(item).or_default().push(user);
    }
    let mut edges = Vec::new();
    for (item, mut users) in by_item {
        users.sort_unstable();
        users.dedup();
        if users.len() < min_size.max(1) {
            continue;
        }
        if users.len() > max_size {
            users.sort_by(|&a, &b| {
                let (ra, rb) = (activity.get(a).copied().unwrap_or(0), activity.get(b).copied().unwrap_or(0));
                rb.cmp(&ra).then(a.cmp(&b))
            });
            users.truncate(max_size);
        }
        edges.push(HyperedgeRecord::new(users, weight, format!("item:{item}")));
    }
    Hypergraph::new(n_users, Family::Attribute, edges)
}

/// One two-member hyperedge per undirected trust pair.
pub fn build_pairwise(n_users: usize, trust_edges: &[(usize, usize)], weight: f64) -> Result<Hypergraph, HypergraphError> {
    let mut pairs = Vec::with_capacity(trust_edges.len());
    for &(a, b) in trust_edges {
        if a == b {
            return Err(HypergraphError::SelfLoop(a));
        }
        pairs.push((a.min(b), a.max(b)));
    }
    pairs.sort_unstable();
    pairs.dedup();
    let edges = pairs
        .into_iter()
        .map(|(a, b)| HyperedgeRecord::new(vec![a, b], weight, format!("pair:{a}-{b}")))
        .collect();
    Hypergraph::new(n_users, Family::Pairwise, edges)
}

/// For every hop count `h ≤ n_hops` and user `u`, the hyperedge of `u`
/// together with everything reachable from `u` in at most `h` directed hops.
/// A user that reaches nobody contributes its singleton only at `h = 1`.
pub fn build_multi_hop(
    n_users: usize,
    trust_edges: &[(usize, usize)],
    n_hops: usize,
    weight: f64,
) -> Result<Hypergraph, HypergraphError> {
    if n_hops == 0 {
        return Err(HypergraphError::ZeroHops);
    }
    let mut out_adj = vec![Vec::new(); n_users];
    for &(a, b) in trust_edges {
        if a == b {
            return Err(HypergraphError::SelfLoop(a));
        }
        out_adj[a].push(b);
    }
    for adj in &mut out_adj {
        adj.sort_unstable();
        adj.dedup();
    }
    // depth of every reachable vertex, per source
    let depths: Vec<Vec<(usize, usize)>> = (0..n_users).map(|u| bfs_depths(&out_adj, u, n_hops)).collect();
    let mut edges = Vec::new();
    for h in 1..=n_hops {
        for (u, reach) in depths.iter().enumerate() {
            let members: Vec<usize> = reach.iter().filter(|&&(_, d)| d <= h).map(|&(v, _)| v).collect();
            if members.len() == 1 && h > 1 {
                continue;
            }
            edges.push(HyperedgeRecord::new(members, weight, format!("hop{h}:u={u}")));
        }
    }
    Hypergraph::new(n_users, Family::MultiHop, edges)
}

fn bfs_depths(out_adj: &[Vec<usize>], source: usize, max_depth: usize) -> Vec<(usize, usize)> {
    let mut depth = BTreeMap::new();
    depth.insert(source, 0usize);
    let mut queue = VecDeque::from([source]);
    while let Some(v) = queue.pop_front() {
        let d = depth[&v];
        if d == max_depth {
            continue;
        }
        for &w in &out_adj[v] {
            if let alloc::collections::btree_map::Entry::Vacant(slot) = depth.entry(w) {
                slot.insert(d + 1);
                queue.push_back(w);
            }
        }
    }
    depth.into_iter().collect()
}

/// Weighted vertex degrees and (unweighted) hyperedge sizes.
pub fn degrees(h: &Hypergraph) -> DegreePair {
    let mut vertex_degrees = vec![0.0; h.n_vertices];
    let mut edge_degrees = vec![0.0; h.n_hyperedges()];
    for (v, e, _) in h.incidence.iter() {
        vertex_degrees[v] += h.hyperedges[e].weight;
        edge_degrees[e] += 1.0;
    }
    DegreePair { vertex_degrees, edge_degrees }
}

/// `I − Dv^{-1/2} H W De^{-1} Hᵀ Dv^{-1/2}`; isolated vertices keep a unit
/// diagonal and no off-diagonal entries.
pub fn normalized_laplacian(h: &Hypergraph) -> Result<SparseMatrix, HypergraphError> {
    let deg = degrees(h);
    let edge_scale: Vec<f64> = h
        .hyperedges
        .iter()
        .zip(&deg.edge_degrees)
        .map(|(rec, &de)| rec.weight / de)
        .collect();
    let vertex_scale: Vec<f64> = deg
        .vertex_degrees
        .iter()
        .map(|&dv| if dv > 0.0 { 1.0 / libm::sqrt(dv) } else { 0.0 })
        .collect();
    let propagation = h
        .incidence
        .scale_cols(&edge_scale)?
        .spmm(&h.incidence.transpose())?
        .scale_rows(&vertex_scale)?
        .scale_cols(&vertex_scale)?;
    Ok(SparseMatrix::identity(h.n_vertices).sub(&propagation)?)
}
