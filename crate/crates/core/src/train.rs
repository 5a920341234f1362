//! Training loop, ablation switches and evaluation metrics.
//!
//! The whole graph is propagated on every step; mini-batches only select
//! which labelled pairs enter the loss. All structure (influence scores,
//! hypergroups, Laplacians) is derived from the training positives alone so
//! held-out edges never leak into the model input.

use alloc::rc::Rc;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::gradcheck::{check_gradients, GradCheckReport};
use crate::autodiff::{Adam, AdamConfig, AutodiffError, Tape, Tensor, Var};
use crate::data::{adjacency, batches, make_split, DataError, NegativeSampling, SplitConfig, SplitPlan, TrustDataset};
use crate::hypergraph::{
    build_attribute, build_multi_hop, build_pairwise, build_social_influence, normalized_laplacian, Family,
    Hypergraph, HypergraphError,
};
use crate::model::{forward, influence_scaling, BoundParams, ModelConfig, ModelError, ModelInputs, ModelState};
use crate::motif::{basic_pagerank, motif_pagerank, top_k_influencers, MotifError, MprConfig};
use crate::objective::{
    contrastive_loss, cross_entropy_loss, regularizer, total_loss, LossConfig, ObjectiveError, PairBatch,
};
use crate::sparse::{DenseVector, SparseMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("data: {0}")]
    Data(#[from] DataError),
    #[error("influence ranking: {0}")]
    Motif(#[from] MotifError),
    #[error("hypergraph construction: {0}")]
    Hypergraph(#[from] HypergraphError),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("objective: {0}")]
    Objective(#[from] ObjectiveError),
    #[error("backward pass: {0}")]
    Autodiff(#[from] AutodiffError),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("cannot evaluate an empty pair set")]
    EmptyEvaluation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ablation {
    #[default]
    Full,
    /// Raw PageRank picks the influencers and features are not rescaled.
    Nompr,
    /// Plain mean aggregation instead of hyperedge attention.
    Noatt,
    /// Contrastive term switched off.
    Nocon,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [Ablation::Full, Ablation::Nompr, Ablation::Noatt, Ablation::Nocon];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::Nompr => "nompr",
            Ablation::Noatt => "noatt",
            Ablation::Nocon => "nocon",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HypergraphConfig {
    pub n_hops: usize,
    pub attribute_min_size: usize,
    pub attribute_max_size: usize,
    pub social_influence_weight: f64,
    pub attribute_weight: f64,
    pub pairwise_weight: f64,
    pub multi_hop_weight: f64,
}

impl Default for HypergraphConfig {
    fn default() -> Self {
        Self {
            n_hops: 1,
            attribute_min_size: 2,
            attribute_max_size: 50,
            social_influence_weight: 1.0,
            attribute_weight: 1.0,
            pairwise_weight: 1.0,
            multi_hop_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub mpr: MprConfig,
    pub model: ModelConfig,
    pub loss: LossConfig,
    pub hypergraph: HypergraphConfig,
    pub train_fraction: f64,
    pub negatives_per_positive: usize,
    pub negative_sampling: NegativeSampling,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub ablation: Ablation,
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            mpr: MprConfig::default(),
            model: ModelConfig::default(),
            loss: LossConfig::default(),
            hypergraph: HypergraphConfig::default(),
            train_fraction: 0.8,
            negatives_per_positive: 2,
            negative_sampling: NegativeSampling::default(),
            epochs: 200,
            batch_size: 1024,
            lr: adam.lr,
            weight_decay: adam.weight_decay,
            seed: 0,
            ablation: Ablation::Full,
            threshold: 0.5,
        }
    }
}

impl TrainConfig {
    /// The configuration actually used once the ablation switch is applied.
    pub fn effective(&self) -> Self {
        let mut cfg = self.clone();
        match self.ablation {
            Ablation::Full => {}
            Ablation::Nompr => cfg.model.use_mpr_scaling = false,
            Ablation::Noatt => cfg.model.attention = false,
            Ablation::Nocon => cfg.loss.lambda1 = 0.0,
        }
        cfg
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        self.mpr.validate()?;
        self.model.validate()?;
        self.loss.validate()?;
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.weight_decay >= 0.0) {
            return Err(TrainError::Config("lr must be positive and weight_decay non-negative".into()));
        }
        if !(self.threshold.is_finite()) {
            return Err(TrainError::Config("threshold must be finite".into()));
        }
        Ok(())
    }

    pub fn split_config(&self) -> SplitConfig {
        SplitConfig {
            seed: self.seed,
            train_fraction: self.train_fraction,
            negatives_per_positive: self.negatives_per_positive,
            negative_sampling: self.negative_sampling,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, weight_decay: self.weight_decay, ..AdamConfig::default() }
    }
}

/// Graph-derived model input built from the training positives.
#[derive(Debug, Clone)]
pub struct Structures {
    /// Motif-based influence scores, or raw PageRank under `nompr`.
    pub influence: DenseVector,
    pub hypergraphs: Vec<Hypergraph>,
    pub inputs: ModelInputs,
    pub laplacians: Vec<Rc<SparseMatrix>>,
}

/// Ranks users, builds the hypergroup families and their Laplacians.
/// `cfg` should already be [`TrainConfig::effective`].
pub fn build_structures(ds: &TrustDataset, split: &SplitPlan, cfg: &TrainConfig) -> Result<Structures, TrainError> {
    let n = ds.n_users();
    let r = adjacency(n, &split.train_pos);
    let influence = if cfg.ablation == Ablation::Nompr {
        basic_pagerank(&r, &cfg.mpr)?
    } else {
        motif_pagerank(&r, &cfg.mpr)?.motif_score
    };
    let hc = &cfg.hypergraph;
    let mut hypergraphs = Vec::new();
    let families: Vec<Family> = cfg.model.families().collect();
    for family in Family::ALL {
        if !families.contains(&family) {
            continue;
        }
        hypergraphs.push(match family {
            Family::SocialInfluence => {
                build_social_influence(&top_k_influencers(&influence, &r, cfg.mpr.top_k), hc.social_influence_weight)?
            }
            Family::Attribute => build_attribute(
                n,
                &ds.user_items(),
                hc.attribute_min_size,
                hc.attribute_max_size,
                hc.attribute_weight,
            )?,
            Family::Pairwise => build_pairwise(n, &split.train_pos, hc.pairwise_weight)?,
            Family::MultiHop => build_multi_hop(n, &split.train_pos, hc.n_hops, hc.multi_hop_weight)?,
        });
    }
    let laplacians = hypergraphs
        .iter()
        .filter(|h| !h.is_empty())
        .map(|h| normalized_laplacian(h).map(Rc::new))
        .collect::<Result<Vec<_>, _>>()?;
    let scaling = influence_scaling(influence.as_slice(), cfg.model.use_mpr_scaling);
    let inputs = ModelInputs::new(n, &hypergraphs, scaling)?;
    Ok(Structures { influence, hypergraphs, inputs, laplacians })
}

/// Confusion counts and derived scores at a fixed threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
}

/// Predicts trust when `score ≥ threshold`.
pub fn classification_metrics(scores: &[f64], labels: &[bool], threshold: f64) -> Result<Metrics, TrainError> {
    if scores.is_empty() {
        return Err(TrainError::EmptyEvaluation);
    }
    assert_eq!(scores.len(), labels.len(), "one label per score");
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Ok(Metrics {
        accuracy: ratio(tp + tn, scores.len()),
        precision,
        recall,
        f1,
        true_positives: tp,
        false_positives: fp,
        true_negatives: tn,
        false_negatives: fn_,
    })
}

/// Per-epoch record of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub test: Metrics,
}

pub struct Trainer {
    cfg: TrainConfig,
    split: SplitPlan,
    structures: Structures,
    state: ModelState,
    adam: Adam,
}

impl Trainer {
    /// Splits the dataset, builds all structures and initializes the model.
    pub fn new(ds: &TrustDataset, cfg: &TrainConfig) -> Result<Self, TrainError> {
        let cfg = cfg.effective();
        cfg.validate()?;
        let split = make_split(ds, &cfg.split_config())?;
        let state = ModelState::init(&cfg.model, ds.n_users(), cfg.seed)?;
        Self::with_state(ds, &cfg, split, state, None)
    }

    /// Resumes from saved parameters (and optionally optimizer state).
    pub fn with_state(
        ds: &TrustDataset,
        cfg: &TrainConfig,
        split: SplitPlan,
        state: ModelState,
        adam: Option<Adam>,
    ) -> Result<Self, TrainError> {
        let cfg = cfg.effective();
        cfg.validate()?;
        let structures = build_structures(ds, &split, &cfg)?;
        let adam = adam.unwrap_or_else(|| Adam::new(cfg.adam(), state.tensors()));
        Ok(Self { cfg, split, structures, state, adam })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn split(&self) -> &SplitPlan {
        &self.split
    }

    pub fn structures(&self) -> &Structures {
        &self.structures
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }

    pub fn optimizer(&self) -> &Adam {
        &self.adam
    }

    /// Records the total loss of `batch` on `tape` for the given parameter
    /// handles (laid out as in [`ModelState`]).
    pub fn loss_on_tape(&self, tape: &mut Tape, params: &BoundParams, batch: &PairBatch) -> Result<Var, TrainError> {
        let out = forward(tape, &self.cfg.model, params, &self.structures.inputs, &batch.pairs())?;
        let loss = &self.cfg.loss;
        let l1 = if loss.lambda1 > 0.0 {
            contrastive_loss(tape, out.pair_scores, batch, loss.temperature)?
        } else {
            tape.constant(Tensor::scalar(0.0))
        };
        let l2 = cross_entropy_loss(tape, out.pair_scores, batch, loss.ce_epsilon)?;
        let r = regularizer(tape, out.node_embeddings, &self.structures.laplacians)?;
        Ok(total_loss(tape, l1, l2, r, loss)?)
    }

    /// One Adam step on `batch`; returns the loss before the update.
    pub fn step(&mut self, batch: &PairBatch) -> Result<f64, TrainError> {
        let mut tape = Tape::new();
        let params = self.state.bind(&mut tape, true);
        let loss = self.loss_on_tape(&mut tape, &params, batch)?;
        tape.backward(loss)?;
        let grads: Vec<Tensor> = params.vars().iter().map(|&v| tape.grad_or_zero(v)).collect();
        let value = tape.value(loss).item();
        self.adam.step(self.state.tensors_mut(), &grads);
        if let Some(name) = self.state.iter().find(|(_, t)| !t.is_finite()).map(|(n, _)| String::from(n)) {
            return Err(TrainError::Config(alloc::format!("parameter {name} diverged")));
        }
        Ok(value)
    }

    /// Runs one epoch; returns the mean batch loss.
    pub fn run_epoch(&mut self, epoch: usize) -> Result<f64, TrainError> {
        let epoch_seed = crate::rng::SplitMix64::derive(self.cfg.seed, 0xe90c ^ epoch as u64).next_u64();
        let bs = batches(&self.split, self.cfg.batch_size, epoch_seed)?;
        let mut total = 0.0;
        for b in &bs {
            total += self.step(b)?;
        }
        Ok(total / bs.len() as f64)
    }

    /// Cosine scores of `pairs` under the current parameters.
    pub fn scores(&self, pairs: &[(usize, usize)]) -> Result<Vec<f64>, TrainError> {
        let mut tape = Tape::new();
        let params = self.state.bind(&mut tape, false);
        let out = forward(&mut tape, &self.cfg.model, &params, &self.structures.inputs, pairs)?;
        Ok(tape.value(out.pair_scores).data().to_vec())
    }

    pub fn evaluate(&self, batch: &PairBatch) -> Result<Metrics, TrainError> {
        let scores = self.scores(&batch.pairs())?;
        let labels: Vec<bool> = batch.labels().iter().map(|&y| y == 1.0).collect();
        classification_metrics(&scores, &labels, self.cfg.threshold)
    }

    pub fn evaluate_test(&self) -> Result<Metrics, TrainError> {
        self.evaluate(&self.split.test_batch())
    }

    /// Trains for the configured number of epochs, evaluating the held-out
    /// split after each one. `on_epoch` sees every record as it is produced.
    pub fn fit(&mut self, mut on_epoch: impl FnMut(&EpochRecord)) -> Result<Vec<EpochRecord>, TrainError> {
        let mut records = Vec::with_capacity(self.cfg.epochs);
        for epoch in 1..=self.cfg.epochs {
            let loss = self.run_epoch(epoch)?;
            let record = EpochRecord { epoch, loss, test: self.evaluate_test()? };
            on_epoch(&record);
            records.push(record);
        }
        Ok(records)
    }
}

/// Central-difference check of the full training loss of `batch` with
/// respect to every parameter of `trainer`.
pub fn loss_gradient_check(trainer: &Trainer, batch: &PairBatch, step: f64) -> Result<GradCheckReport, TrainError> {
    // surfaces configuration errors before the perturbation loop
    let mut probe = Tape::new();
    let params = trainer.state().bind(&mut probe, true);
    trainer.loss_on_tape(&mut probe, &params, batch)?;
    Ok(check_gradients(trainer.state().tensors(), step, |tape, vars| {
        let params = BoundParams::from_vars(trainer.state(), vars.to_vec());
        trainer.loss_on_tape(tape, &params, batch).map_err(|e| match e {
            TrainError::Autodiff(a)
            | TrainError::Model(ModelError::Autodiff(a))
            | TrainError::Objective(ObjectiveError::Autodiff(a)) => a,
            other => unreachable!("shapes were validated by the probe pass: {other}"),
        })
    })?)
}

/// Small model settings for the six-user toy dataset.
pub fn toy_config(ablation: Ablation) -> TrainConfig {
    TrainConfig {
        model: ModelConfig { embed_dim: 8, layer_dims: alloc::vec![16, 8], mlp_dims: alloc::vec![8, 4], ..ModelConfig::default() },
        train_fraction: 0.7,
        negatives_per_positive: 1,
        epochs: 10,
        seed: 1,
        ablation,
        ..TrainConfig::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use crate::synthetic::toy;

    fn small() -> TrainConfig {
        toy_config(Ablation::Full)
    }

    #[test]
    fn metrics_match_confusion_oracle() {
        let mut rng = SplitMix64::new(11);
        let scores: Vec<f64> = (0..100).map(|_| rng.next_f64()).collect();
        let labels: Vec<bool> = (0..100).map(|_| rng.next_f64() < 0.4).collect();
        let m = classification_metrics(&scores, &labels, 0.5).unwrap();
        let pred: Vec<bool> = scores.iter().map(|&s| s >= 0.5).collect();
        let count = |p: bool, y: bool| pred.iter().zip(&labels).filter(|&(&a, &b)| a == p && b == y).count();
        let (tp, fp, tn, fn_) = (count(true, true), count(true, false), count(false, false), count(false, true));
        assert_eq!((m.true_positives, m.false_positives, m.true_negatives, m.false_negatives), (tp, fp, tn, fn_));
        let p = tp as f64 / (tp + fp) as f64;
        let r = tp as f64 / (tp + fn_) as f64;
        assert_eq!(m.accuracy, (tp + tn) as f64 / 100.0);
        assert!((m.f1 - 2.0 * p * r / (p + r)).abs() < 1e-15);
    }

    #[test]
    fn degenerate_and_perfect_predictors() {
        let labels = [true, true, false, false];
        let m = classification_metrics(&[1.0; 4], &labels, 0.5).unwrap();
        assert_eq!(m.accuracy, 0.5);
        assert!((m.f1 - 2.0 * 0.5 / 1.5).abs() < 1e-15);
        let m = classification_metrics(&[0.9, 0.7, 0.1, 0.0], &labels, 0.5).unwrap();
        assert_eq!((m.accuracy, m.f1), (1.0, 1.0));
        assert_eq!(classification_metrics(&[], &[], 0.5).unwrap_err(), TrainError::EmptyEvaluation);
    }

    #[test]
    fn ablation_switches() {
        let base = TrainConfig::default();
        let c = TrainConfig { ablation: Ablation::Nocon, ..base.clone() }.effective();
        assert_eq!(c.loss.lambda1, 0.0);
        let c = TrainConfig { ablation: Ablation::Noatt, ..base.clone() }.effective();
        assert!(!c.model.attention);
        let c = TrainConfig { ablation: Ablation::Nompr, ..base.clone() }.effective();
        assert!(!c.model.use_mpr_scaling);
        assert_eq!(base.effective(), base);
        for a in Ablation::ALL {
            assert_eq!(Ablation::from_name(a.name()), Some(a));
        }
    }

    #[test]
    fn toy_loss_decreases_and_is_deterministic() {
        let ds = toy().dataset().unwrap();
        let run = || {
            let mut t = Trainer::new(&ds, &small()).unwrap();
            t.fit(|_| {}).unwrap()
        };
        let a = run();
        assert!(a[1].loss < a[0].loss, "{} !< {}", a[1].loss, a[0].loss);
        assert!(a[9].loss < a[0].loss);
        assert_eq!(a, run());
    }

    #[test]
    fn end_to_end_gradient_on_toy() {
        let ds = toy().dataset().unwrap();
        for ablation in Ablation::ALL {
            let trainer = Trainer::new(&ds, &toy_config(ablation)).unwrap();
            let report = loss_gradient_check(&trainer, &trainer.split().train_batch(), 1e-5).unwrap();
            assert!(report.max_rel_error < 1e-3, "{ablation:?}: {report:?}");
        }
    }
}
