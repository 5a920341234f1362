//! Adaptive hypergraph network for trust prediction.
//!
//! Each hypergroup family runs its own branch: a one-layer feature MLP
//! followed by a stack of hypergraph convolutions. A convolution first
//! averages member features into every hyperedge and scales them by the
//! family's trainable hyperedge weight, then sends hyperedge features back to
//! their vertices, either as a plain mean projected by `θ` or reweighted by
//! hyperedge attention. Branches are averaged within the node level (social
//! influence, attribute) and the structure level (pairwise, multi-hop), the
//! two levels are concatenated, and separate trustor/trustee MLPs feed a
//! cosine score.

use alloc::format;
use alloc::rc::Rc;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, Segments, Tape, Tensor, Var, LEAKY_SLOPE};
use crate::hypergraph::{Family, Hypergraph};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("no non-empty hypergroup family in the {0} level")]
    EmptyLevel(&'static str),
    #[error("missing parameter {0}")]
    MissingParam(String),
    #[error("parameter {name} has shape {found:?}, expected {expected:?}")]
    ParamShape {
        name: String,
        found: (usize, usize),
        expected: (usize, usize),
    },
    #[error("hypergraph for {family:?} has {found} vertices, model has {expected} users")]
    VertexCount { family: Family, found: usize, expected: usize },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub layer_dims: Vec<usize>,
    pub attention: bool,
    pub leaky_slope: f64,
    pub mlp_dims: Vec<usize>,
    pub families_node_level: Vec<Family>,
    pub families_structure_level: Vec<Family>,
    pub use_mpr_scaling: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embed_dim: 64,
            layer_dims: vec![256, 128, 64],
            attention: true,
            leaky_slope: LEAKY_SLOPE,
            mlp_dims: vec![64, 32],
            families_node_level: vec![Family::SocialInfluence, Family::Attribute],
            families_structure_level: vec![Family::Pairwise, Family::MultiHop],
            use_mpr_scaling: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.layer_dims.is_empty() {
            return Err(ModelError::Config("layer_dims must not be empty".into()));
        }
        if self.mlp_dims.is_empty() {
            return Err(ModelError::Config("mlp_dims must not be empty".into()));
        }
        if self.embed_dim == 0 || self.layer_dims.iter().chain(&self.mlp_dims).any(|&d| d == 0) {
            return Err(ModelError::Config("all dimensions must be at least 1".into()));
        }
        if self.families_node_level.is_empty() || self.families_structure_level.is_empty() {
            return Err(ModelError::Config("each level needs at least one family".into()));
        }
        Ok(())
    }

    pub fn families(&self) -> impl Iterator<Item = Family> + '_ {
        self.families_node_level.iter().chain(&self.families_structure_level).copied()
    }

    /// Width of the concatenated node embedding.
    pub fn embedding_dim(&self) -> usize {
        2 * self.layer_dims.last().copied().unwrap_or(0)
    }

    /// Input/output widths of each convolution layer.
    fn conv_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.layer_dims.len());
        let mut d_in = self.layer_dims[0];
        for &d_out in &self.layer_dims {
            shapes.push((d_in, d_out));
            d_in = d_out;
        }
        shapes
    }
}

/// Trainable tensors in a fixed, named order.
///
/// Layout per family `f` (its snake-case name) and layer `t`:
/// `f.pre.weight`, `f.pre.bias`, `f.edge_weight`, `f.conv{t}.theta`,
/// `f.conv{t}.attn_w`, `f.conv{t}.attn_beta_vertex`,
/// `f.conv{t}.attn_beta_edge`; then `trustor.l{k}.{weight,bias}` and
/// `trustee.l{k}.{weight,bias}`. `user_embeddings` comes first.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ModelState {
    /// Fan-based uniform weights, zero biases, `N(0, 0.1²)` embeddings and
    /// attention vectors, hyperedge weights 1.
    pub fn init(cfg: &ModelConfig, n_users: usize, seed: u64) -> Result<Self, ModelError> {
        cfg.validate()?;
        let mut rng = SplitMix64::derive(seed, 0x1417);
        let mut state = Self { names: Vec::new(), tensors: Vec::new() };
        let normal = |rng: &mut SplitMix64, r: usize, c: usize| {
            Tensor::new(r, c, (0..r * c).map(|_| 0.1 * rng.normal()).collect()).expect("shape")
        };
        let glorot = |rng: &mut SplitMix64, r: usize, c: usize| {
            let a = libm::sqrt(6.0 / (r + c) as f64);
            Tensor::new(r, c, (0..r * c).map(|_| rng.uniform(-a, a)).collect()).expect("shape")
        };
        state.push("user_embeddings", normal(&mut rng, n_users, cfg.embed_dim));
        let l0 = cfg.layer_dims[0];
        for fam in cfg.families() {
            let f = fam.name();
            state.push(&format!("{f}.pre.weight"), glorot(&mut rng, cfg.embed_dim, l0));
            state.push(&format!("{f}.pre.bias"), Tensor::zeros(1, l0));
            state.push(&format!("{f}.edge_weight"), Tensor::scalar(1.0));
            for (t, (d_in, d_out)) in cfg.conv_shapes().into_iter().enumerate() {
                state.push(&format!("{f}.conv{t}.theta"), glorot(&mut rng, d_in, d_out));
                state.push(&format!("{f}.conv{t}.attn_w"), glorot(&mut rng, d_in, d_out));
                state.push(&format!("{f}.conv{t}.attn_beta_vertex"), normal(&mut rng, d_out, 1));
                state.push(&format!("{f}.conv{t}.attn_beta_edge"), normal(&mut rng, d_out, 1));
            }
        }
        for side in ["trustor", "trustee"] {
            let mut d_in = cfg.embedding_dim();
            for (k, &d_out) in cfg.mlp_dims.iter().enumerate() {
                state.push(&format!("{side}.l{k}.weight"), glorot(&mut rng, d_in, d_out));
                state.push(&format!("{side}.l{k}.bias"), Tensor::zeros(1, d_out));
                d_in = d_out;
            }
        }
        Ok(state)
    }

    /// Rebuilds a state from named tensors and checks it against `cfg`.
    pub fn from_named(cfg: &ModelConfig, n_users: usize, named: Vec<(String, Tensor)>) -> Result<Self, ModelError> {
        let reference = Self::init(cfg, n_users, 0)?;
        let mut state = Self { names: Vec::new(), tensors: Vec::new() };
        for (name, t) in named {
            state.names.push(name);
            state.tensors.push(t);
        }
        if state.names.len() != reference.names.len() {
            return Err(ModelError::Config(format!(
                "expected {} parameters, found {}",
                reference.names.len(),
                state.names.len()
            )));
        }
        for (name, expected) in reference.names.iter().zip(&reference.tensors) {
            let found = state.get(name).ok_or_else(|| ModelError::MissingParam(name.clone()))?;
            if found.shape() != expected.shape() {
                return Err(ModelError::ParamShape { name: name.clone(), found: found.shape(), expected: expected.shape() });
            }
        }
        Ok(state)
    }

    fn push(&mut self, name: &str, t: Tensor) {
        self.names.push(name.into());
        self.tensors.push(t);
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.names.iter().position(|n| n == name).map(move |i| &mut self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn n_params(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Records every tensor on `tape`, as trainable leaves when `trainable`.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> BoundParams {
        let vars = self
            .tensors
            .iter()
            .map(|t| if trainable { tape.param(t.clone()) } else { tape.constant(t.clone()) })
            .collect();
        BoundParams { names: self.names.clone(), vars }
    }
}

/// Tape handles for a [`ModelState`], in the same order.
#[derive(Debug, Clone)]
pub struct BoundParams {
    names: Vec<String>,
    vars: Vec<Var>,
}

impl BoundParams {
    /// Pairs tape handles with the parameter names of `state`.
    pub fn from_vars(state: &ModelState, vars: Vec<Var>) -> Self {
        assert_eq!(state.names.len(), vars.len(), "one handle per parameter");
        Self { names: state.names.clone(), vars }
    }

    pub fn get(&self, name: &str) -> Result<Var, ModelError> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.vars[i])
            .ok_or_else(|| ModelError::MissingParam(name.into()))
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

/// Index structures derived once from a hypergraph and reused every step.
#[derive(Debug, Clone)]
pub struct PreparedHypergraph {
    pub family: Family,
    pub n_vertices: usize,
    pub n_hyperedges: usize,
    /// hyperedge → members, weighted `1/|e|`
    edge_members: Rc<Segments>,
    /// vertex → incident hyperedges, weighted `1/deg(v)`
    vertex_edges_mean: Rc<Segments>,
    /// vertex → incident hyperedges, unit weights; entries are the
    /// (vertex, hyperedge) incidences in vertex-major order
    vertex_edges: Rc<Segments>,
    entry_vertex: Vec<usize>,
}

impl PreparedHypergraph {
    pub fn new(h: &Hypergraph) -> Self {
        let members: Vec<Vec<usize>> = h.hyperedges().iter().map(|e| e.members.clone()).collect();
        let incident = h.incident_edges();
        let entry_vertex = incident.iter().enumerate().flat_map(|(v, es)| core::iter::repeat(v).take(es.len())).collect();
        Self {
            family: h.family(),
            n_vertices: h.n_vertices(),
            n_hyperedges: h.n_hyperedges(),
            edge_members: Rc::new(Segments::means(&members)),
            vertex_edges_mean: Rc::new(Segments::means(&incident)),
            vertex_edges: Rc::new(Segments::from_groups(&incident)),
            entry_vertex,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.n_hyperedges == 0
    }

    /// Incident hyperedges grouped per vertex.
    pub fn vertex_groups(&self) -> &Segments {
        &self.vertex_edges
    }
}

/// Hyperedge features: member mean scaled by the family's hyperedge weight.
pub fn hyperedge_message(
    tape: &mut Tape,
    x: Var,
    h: &PreparedHypergraph,
    edge_weight: Var,
) -> Result<Var, AutodiffError> {
    let mess = tape.segment_sum(x, &h.edge_members)?;
    tape.scale_by(mess, edge_weight)
}

/// `ReLU(mean_{e ∋ v} h_e · θ)`; vertices without hyperedges get zeros.
pub fn vertex_update_plain(
    tape: &mut Tape,
    h_e: Var,
    h: &PreparedHypergraph,
    theta: Var,
) -> Result<Var, AutodiffError> {
    let mess = tape.segment_sum(h_e, &h.vertex_edges_mean)?;
    let proj = tape.matmul(mess, theta)?;
    tape.relu(proj)
}

/// Output of an attentive update, with the attention weights of every
/// (vertex, hyperedge) incidence in vertex-major order.
#[derive(Debug, Clone, Copy)]
pub struct AttentiveUpdate {
    pub output: Var,
    pub attention: Var,
}

/// Attention-weighted update on projected features `xw = x W` and
/// `hw = h_e W`: `a = LeakyReLU(β_vᵀ xw_v + β_eᵀ hw_e)`, softmax over the
/// hyperedges of each vertex, then `ReLU(Σ_e a_ve · hw_e)`. Scores use the
/// incoming vertex features.
///
/// Hyperedge messages are linear in the vertex features, so `hw` is the
/// message of `xw`; the forward pass uses that to avoid projecting every
/// hyperedge separately.
pub fn vertex_update_attentive(
    tape: &mut Tape,
    xw: Var,
    hw: Var,
    h: &PreparedHypergraph,
    beta_vertex: Var,
    beta_edge: Var,
    slope: f64,
) -> Result<AttentiveUpdate, AutodiffError> {
    let sv = tape.matmul(xw, beta_vertex)?;
    let se = tape.matmul(hw, beta_edge)?;
    let sv_entries = tape.gather_rows(sv, &h.entry_vertex)?;
    let se_entries = tape.gather_rows(se, h.vertex_edges.indices())?;
    let raw = tape.add(sv_entries, se_entries)?;
    let scores = tape.leaky_relu(raw, slope)?;
    let attention = tape.segment_softmax(scores, &h.vertex_edges)?;
    let mixed = tape.weighted_segment_sum(hw, attention, &h.vertex_edges)?;
    let output = tape.relu(mixed)?;
    Ok(AttentiveUpdate { output, attention })
}

/// Per-user feature scaling from influence scores: `n · s_u` (mean 1), or
/// all ones when disabled.
pub fn influence_scaling(scores: &[f64], use_mpr_scaling: bool) -> Vec<f64> {
    let n = scores.len() as f64;
    if use_mpr_scaling {
        scores.iter().map(|s| n * s).collect()
    } else {
        vec![1.0; scores.len()]
    }
}

/// Initial vertex features `x⁰_u = embedding_u · scaling_u`.
pub fn initial_features(tape: &mut Tape, embeddings: Var, scaling: &[f64]) -> Result<Var, AutodiffError> {
    tape.scale_rows(embeddings, scaling)
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub node_embeddings: Var,
    pub pair_scores: Var,
    pub trustor_vectors: Var,
    pub trustee_vectors: Var,
    /// Attention weights per (family, layer) when attention is on.
    pub attention: Vec<(Family, usize, Var)>,
}

/// Everything the forward pass needs besides parameters.
#[derive(Debug, Clone)]
pub struct ModelInputs {
    pub n_users: usize,
    pub hypergraphs: Vec<PreparedHypergraph>,
    pub scaling: Vec<f64>,
}

impl ModelInputs {
    pub fn new(n_users: usize, hypergraphs: &[Hypergraph], scaling: Vec<f64>) -> Result<Self, ModelError> {
        for h in hypergraphs {
            if h.n_vertices() != n_users {
                return Err(ModelError::VertexCount { family: h.family(), found: h.n_vertices(), expected: n_users });
            }
        }
        if scaling.len() != n_users {
            return Err(ModelError::Config(format!("scaling has {} entries for {n_users} users", scaling.len())));
        }
        Ok(Self { n_users, hypergraphs: hypergraphs.iter().map(PreparedHypergraph::new).collect(), scaling })
    }

    fn family(&self, f: Family) -> Option<&PreparedHypergraph> {
        self.hypergraphs.iter().find(|h| h.family == f && !h.is_empty())
    }
}

fn mlp(tape: &mut Tape, params: &BoundParams, side: &str, depth: usize, mut x: Var) -> Result<Var, ModelError> {
    for k in 0..depth {
        let w = params.get(&format!("{side}.l{k}.weight"))?;
        let b = params.get(&format!("{side}.l{k}.bias"))?;
        let z = tape.matmul(x, w)?;
        let z = tape.add_row(z, b)?;
        x = tape.relu(z)?;
    }
    Ok(x)
}

fn family_branch(
    tape: &mut Tape,
    cfg: &ModelConfig,
    params: &BoundParams,
    h: &PreparedHypergraph,
    x0: Var,
    attention: &mut Vec<(Family, usize, Var)>,
) -> Result<Var, ModelError> {
    let f = h.family.name();
    let w = params.get(&format!("{f}.pre.weight"))?;
    let b = params.get(&format!("{f}.pre.bias"))?;
    let z = tape.matmul(x0, w)?;
    let z = tape.add_row(z, b)?;
    let mut x = tape.relu(z)?;
    let edge_weight = params.get(&format!("{f}.edge_weight"))?;
    for t in 0..cfg.layer_dims.len() {
        x = if cfg.attention {
            let xw = tape.matmul(x, params.get(&format!("{f}.conv{t}.attn_w"))?)?;
            let hw = hyperedge_message(tape, xw, h, edge_weight)?;
            let upd = vertex_update_attentive(
                tape,
                xw,
                hw,
                h,
                params.get(&format!("{f}.conv{t}.attn_beta_vertex"))?,
                params.get(&format!("{f}.conv{t}.attn_beta_edge"))?,
                cfg.leaky_slope,
            )?;
            attention.push((h.family, t, upd.attention));
            upd.output
        } else {
            let h_e = hyperedge_message(tape, x, h, edge_weight)?;
            vertex_update_plain(tape, h_e, h, params.get(&format!("{f}.conv{t}.theta"))?)?
        };
    }
    Ok(x)
}

fn level_output(
    tape: &mut Tape,
    cfg: &ModelConfig,
    params: &BoundParams,
    inputs: &ModelInputs,
    families: &[Family],
    level: &'static str,
    x0: Var,
    attention: &mut Vec<(Family, usize, Var)>,
) -> Result<Var, ModelError> {
    let mut outputs = Vec::new();
    for &f in families {
        if let Some(h) = inputs.family(f) {
            outputs.push(family_branch(tape, cfg, params, h, x0, attention)?);
        }
    }
    let Some((&first, rest)) = outputs.split_first() else {
        return Err(ModelError::EmptyLevel(level));
    };
    let mut acc = first;
    for &o in rest {
        acc = tape.add(acc, o)?;
    }
    Ok(tape.scale(acc, 1.0 / outputs.len() as f64)?)
}

/// Full forward pass for the requested `(trustor, trustee)` pairs.
pub fn forward(
    tape: &mut Tape,
    cfg: &ModelConfig,
    params: &BoundParams,
    inputs: &ModelInputs,
    pairs: &[(usize, usize)],
) -> Result<ForwardOutput, ModelError> {
    let emb = params.get("user_embeddings")?;
    let x0 = initial_features(tape, emb, &inputs.scaling)?;
    let mut attention = Vec::new();
    let node = level_output(tape, cfg, params, inputs, &cfg.families_node_level, "node", x0, &mut attention)?;
    let structure =
        level_output(tape, cfg, params, inputs, &cfg.families_structure_level, "structure", x0, &mut attention)?;
    let node_embeddings = tape.concat_cols(&[node, structure])?;

    let trustor_all = mlp(tape, params, "trustor", cfg.mlp_dims.len(), node_embeddings)?;
    let trustee_all = mlp(tape, params, "trustee", cfg.mlp_dims.len(), node_embeddings)?;
    let (is, js): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
    let trustor_vectors = tape.gather_rows(trustor_all, &is)?;
    let trustee_vectors = tape.gather_rows(trustee_all, &js)?;
    let pair_scores = tape.cosine_rows(trustor_vectors, trustee_vectors)?;
    Ok(ForwardOutput { node_embeddings, pair_scores, trustor_vectors, trustee_vectors, attention })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::{build_multi_hop, build_pairwise, build_social_influence, HyperedgeRecord};

    fn t(rows: usize, cols: usize, data: &[f64]) -> Tensor {
        Tensor::new(rows, cols, data.to_vec()).unwrap()
    }

    fn small_cfg() -> ModelConfig {
        ModelConfig { embed_dim: 4, layer_dims: vec![6, 5], mlp_dims: vec![4, 3], ..ModelConfig::default() }
    }

    fn toy_graphs() -> Vec<Hypergraph> {
        let edges = [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3), (2, 3)];
        vec![
            build_social_influence(&[vec![1, 2], vec![0], vec![3], vec![4], vec![5], vec![3]], 1.0).unwrap(),
            build_pairwise(6, &edges, 1.0).unwrap(),
            build_multi_hop(6, &edges, 1, 1.0).unwrap(),
        ]
    }

    #[test]
    fn hyperedge_mean() {
        let h = Hypergraph::new(3, Family::Pairwise, vec![HyperedgeRecord::new(vec![1, 2], 1.0, String::new())]).unwrap();
        let p = PreparedHypergraph::new(&h);
        let mut tape = Tape::new();
        let x = tape.constant(t(3, 2, &[9.0, 9.0, 2.0, 0.0, 0.0, 2.0]));
        let w = tape.constant(Tensor::scalar(1.0));
        let he = hyperedge_message(&mut tape, x, &p, w).unwrap();
        assert_eq!(tape.value(he).data(), &[1.0, 1.0]);
        let w0 = tape.constant(Tensor::scalar(0.0));
        let he0 = hyperedge_message(&mut tape, x, &p, w0).unwrap();
        assert_eq!(tape.value(he0).data(), &[0.0, 0.0]);
    }

    #[test]
    fn message_commutes_with_projection() {
        let h = Hypergraph::new(4, Family::Attribute, vec![
            HyperedgeRecord::new(vec![0, 1, 3], 1.0, String::new()),
            HyperedgeRecord::new(vec![2], 1.0, String::new()),
        ])
        .unwrap();
        let p = PreparedHypergraph::new(&h);
        let mut rng = SplitMix64::new(4);
        let mut rand = |r: usize, c: usize| Tensor::new(r, c, (0..r * c).map(|_| rng.normal()).collect()).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(rand(4, 3));
        let w = tape.constant(rand(3, 2));
        let s = tape.constant(Tensor::scalar(0.7));
        let he = hyperedge_message(&mut tape, x, &p, s).unwrap();
        let a = tape.matmul(he, w).unwrap();
        let xw = tape.matmul(x, w).unwrap();
        let b = hyperedge_message(&mut tape, xw, &p, s).unwrap();
        for (u, v) in tape.value(a).data().iter().zip(tape.value(b).data()) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn singleton_hyperedge_message() {
        let h = build_social_influence(&[vec![]], 1.0).unwrap();
        let p = PreparedHypergraph::new(&h);
        let mut tape = Tape::new();
        let x = tape.constant(t(1, 2, &[3.0, -1.0]));
        let w = tape.constant(Tensor::scalar(2.0));
        let he = hyperedge_message(&mut tape, x, &p, w).unwrap();
        assert_eq!(tape.value(he).data(), &[6.0, -2.0]);
    }

    #[test]
    fn plain_update_cases() {
        // vertex 0 in one hyperedge, vertex 1 in two, vertex 2 isolated
        let h = Hypergraph::new(3, Family::Attribute, vec![
            HyperedgeRecord::new(vec![0, 1], 1.0, String::new()),
            HyperedgeRecord::new(vec![1], 1.0, String::new()),
        ])
        .unwrap();
        let p = PreparedHypergraph::new(&h);
        let mut tape = Tape::new();
        let he = tape.constant(t(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let theta = tape.constant(Tensor::identity(2));
        let out = vertex_update_plain(&mut tape, he, &p, theta).unwrap();
        assert_eq!(tape.value(out).data(), &[1.0, 2.0, 2.0, 3.0, 0.0, 0.0]);
    }

    #[test]
    fn attention_single_and_symmetric() {
        let h = Hypergraph::new(3, Family::Attribute, vec![
            HyperedgeRecord::new(vec![0, 1], 1.0, String::new()),
            HyperedgeRecord::new(vec![1, 2], 1.0, String::new()),
        ])
        .unwrap();
        let p = PreparedHypergraph::new(&h);
        let mut tape = Tape::new();
        let x = tape.constant(t(3, 2, &[0.3, -0.2, 0.5, 0.1, -0.4, 0.9]));
        let he = tape.constant(t(2, 2, &[1.0, 1.0, 1.0, 1.0]));
        let w = tape.constant(t(2, 2, &[0.5, -0.3, 0.2, 0.8]));
        let bv = tape.constant(t(2, 1, &[0.7, -1.1]));
        let be = tape.constant(t(2, 1, &[0.4, 0.9]));
        let xw = tape.matmul(x, w).unwrap();
        let hw = tape.matmul(he, w).unwrap();
        let upd = vertex_update_attentive(&mut tape, xw, hw, &p, bv, be, LEAKY_SLOPE).unwrap();
        // entries: v0:[e0], v1:[e0,e1], v2:[e1]
        assert_eq!(tape.value(upd.attention).data(), &[1.0, 0.5, 0.5, 1.0]);
    }

    #[test]
    fn uniform_scores_scale_by_one() {
        let s = vec![0.25; 4];
        assert_eq!(influence_scaling(&s, true), vec![1.0; 4]);
        assert_eq!(influence_scaling(&[0.1, 0.9], false), vec![1.0, 1.0]);
        let doubled = influence_scaling(&[0.5, 0.25, 0.25], true);
        assert!((doubled[0] - 1.5).abs() < 1e-15);
        let mut tape = Tape::new();
        let e = tape.constant(t(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        // s' = 2/n for user 0
        let x = initial_features(&mut tape, e, &influence_scaling(&[1.0, 0.0], true)).unwrap();
        assert_eq!(tape.value(x).data(), &[2.0, 4.0, 0.0, 0.0]);
    }

    #[test]
    fn forward_shapes_and_empty_pairs() {
        let cfg = small_cfg();
        let state = ModelState::init(&cfg, 6, 3).unwrap();
        let inputs = ModelInputs::new(6, &toy_graphs(), vec![1.0; 6]).unwrap();
        let mut tape = Tape::new();
        let params = state.bind(&mut tape, false);
        let out = forward(&mut tape, &cfg, &params, &inputs, &[]).unwrap();
        assert_eq!(tape.value(out.node_embeddings).shape(), (6, 10));
        assert_eq!(tape.value(out.pair_scores).shape(), (0, 1));
        let out = forward(&mut tape, &cfg, &params, &inputs, &[(0, 1), (2, 5)]).unwrap();
        for &s in tape.value(out.pair_scores).data() {
            assert!((0.0..=1.0 + 1e-12).contains(&s));
        }
        assert_eq!(out.attention.len(), 3 * 2);
    }

    #[test]
    fn empty_level_is_a_configuration_error() {
        let cfg = small_cfg();
        let state = ModelState::init(&cfg, 6, 3).unwrap();
        let graphs = toy_graphs();
        let inputs = ModelInputs::new(6, &graphs[1..], vec![1.0; 6]).unwrap();
        let mut tape = Tape::new();
        let params = state.bind(&mut tape, false);
        // social influence missing and attribute absent: node level is empty
        let err = forward(&mut tape, &cfg, &params, &inputs, &[]).unwrap_err();
        assert_eq!(err, ModelError::EmptyLevel("node"));
    }

    #[test]
    fn named_round_trip_and_shape_checks() {
        let cfg = small_cfg();
        let state = ModelState::init(&cfg, 6, 9).unwrap();
        let named: Vec<_> = state.iter().map(|(n, t)| (String::from(n), t.clone())).collect();
        assert_eq!(ModelState::from_named(&cfg, 6, named.clone()).unwrap(), state);
        let mut bad = named;
        bad[0].1 = Tensor::zeros(5, 4);
        assert!(matches!(ModelState::from_named(&cfg, 6, bad), Err(ModelError::ParamShape { .. })));
    }

    #[test]
    fn init_is_seeded() {
        let cfg = small_cfg();
        assert_eq!(ModelState::init(&cfg, 6, 1).unwrap(), ModelState::init(&cfg, 6, 1).unwrap());
        assert_ne!(ModelState::init(&cfg, 6, 1).unwrap(), ModelState::init(&cfg, 6, 2).unwrap());
    }
}
