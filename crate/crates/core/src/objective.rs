//! Training objective: supervised contrastive term, cross-entropy term and
//! the hypergraph Laplacian smoothness regularizer.

use alloc::collections::BTreeMap;
use alloc::rc::Rc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, Segments, Tape, Tensor, Var};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObjectiveError {
    #[error("temperature must be positive, got {0}")]
    Temperature(f64),
    #[error("invalid loss configuration: {0}")]
    Config(&'static str),
    #[error("batch has {pairs} pairs but {scores} scores")]
    ScoreCount { pairs: usize, scores: usize },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub temperature: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda_reg: f64,
    pub ce_epsilon: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { temperature: 0.3, lambda1: 1.0, lambda2: 1.0, lambda_reg: 1e-3, ce_epsilon: 1e-7 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<(), ObjectiveError> {
        if !(self.temperature > 0.0) {
            return Err(ObjectiveError::Temperature(self.temperature));
        }
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0 && self.lambda_reg >= 0.0) {
            return Err(ObjectiveError::Config("loss weights must be non-negative"));
        }
        if !(self.lambda1 + self.lambda2 > 0.0) {
            return Err(ObjectiveError::Config("lambda1 + lambda2 must be positive"));
        }
        if !(self.ce_epsilon > 0.0) {
            return Err(ObjectiveError::Config("ce_epsilon must be positive"));
        }
        Ok(())
    }
}

/// Labelled `(trustor, trustee)` pairs. Scores are laid out positives
/// first, then negatives.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairBatch {
    pub positives: Vec<(usize, usize)>,
    pub negatives: Vec<(usize, usize)>,
}

impl PairBatch {
    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.positives.iter().chain(&self.negatives).copied().collect()
    }

    pub fn labels(&self) -> Vec<f64> {
        let mut y = alloc::vec![1.0; self.positives.len()];
        y.resize(self.len(), 0.0);
        y
    }
}

fn check_scores(tape: &Tape, scores: Var, batch: &PairBatch) -> Result<(), ObjectiveError> {
    let s = tape.value(scores);
    if s.rows() != batch.len() || s.cols() != 1 {
        return Err(ObjectiveError::ScoreCount { pairs: batch.len(), scores: s.len() });
    }
    Ok(())
}

/// `−(1/|anchors|) Σ_i log(Σ_pos exp(s/t) / Σ_all exp(s/t))`, where the
/// anchors are the distinct trustors of the batch's positives and each
/// anchor's denominator runs over every batch pair it heads.
pub fn contrastive_loss(tape: &mut Tape, scores: Var, batch: &PairBatch, t: f64) -> Result<Var, ObjectiveError> {
    if !(t > 0.0) {
        return Err(ObjectiveError::Temperature(t));
    }
    check_scores(tape, scores, batch)?;
    let mut anchors: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (p, &(i, _)) in batch.positives.iter().enumerate() {
        let (pos, all) = anchors.entry(i).or_default();
        pos.push(p);
        all.push(p);
    }
    if anchors.is_empty() {
        return Ok(tape.constant(Tensor::scalar(0.0)));
    }
    let offset = batch.positives.len();
    for (q, &(i, _)) in batch.negatives.iter().enumerate() {
        if let Some((_, all)) = anchors.get_mut(&i) {
            all.push(offset + q);
        }
    }
    let (pos, all): (Vec<_>, Vec<_>) = anchors.into_values().unzip();
    let pos = Rc::new(Segments::from_groups(&pos));
    let all = Rc::new(Segments::from_groups(&all));
    let z = tape.scale(scores, 1.0 / t)?;
    let e = tape.exp(z)?;
    let num = tape.segment_sum(e, &pos)?;
    let den = tape.segment_sum(e, &all)?;
    let log_num = tape.log(num)?;
    let log_den = tape.log(den)?;
    let diff = tape.sub(log_den, log_num)?;
    Ok(tape.mean(diff)?)
}

/// `−mean(y·log(s + ε) + (1 − y)·log(1 − s + ε))`.
pub fn cross_entropy_loss(tape: &mut Tape, scores: Var, batch: &PairBatch, eps: f64) -> Result<Var, ObjectiveError> {
    check_scores(tape, scores, batch)?;
    if batch.is_empty() {
        return Ok(tape.constant(Tensor::scalar(0.0)));
    }
    let n = batch.len();
    let y = batch.labels();
    let not_y: Vec<f64> = y.iter().map(|v| 1.0 - v).collect();
    let eps_col = tape.constant(Tensor::filled(n, 1, eps));
    let one_eps = tape.constant(Tensor::filled(n, 1, 1.0 + eps));
    let y = tape.constant(Tensor::column(y));
    let not_y = tape.constant(Tensor::column(not_y));
    let shifted = tape.add(scores, eps_col)?;
    let log_p = tape.log(shifted)?;
    let complement = tape.sub(one_eps, scores)?;
    let log_q = tape.log(complement)?;
    let a = tape.mul(y, log_p)?;
    let b = tape.mul(not_y, log_q)?;
    let ll = tape.add(a, b)?;
    let m = tape.mean(ll)?;
    Ok(tape.scale(m, -1.0)?)
}

/// `Σ_Δ trace(Fᵀ Δ F)` over the given Laplacians.
pub fn regularizer(tape: &mut Tape, embeddings: Var, laplacians: &[Rc<SparseMatrix>]) -> Result<Var, ObjectiveError> {
    let mut total = tape.constant(Tensor::scalar(0.0));
    for lap in laplacians {
        let smoothed = tape.sparse_left(lap, embeddings)?;
        let prod = tape.mul(embeddings, smoothed)?;
        let s = tape.sum(prod)?;
        total = tape.add(total, s)?;
    }
    Ok(total)
}

/// `λ1·L1 + λ2·L2 + λ_reg·R`.
pub fn total_loss(tape: &mut Tape, l1: Var, l2: Var, r: Var, cfg: &LossConfig) -> Result<Var, ObjectiveError> {
    let a = tape.scale(l1, cfg.lambda1)?;
    let b = tape.scale(l2, cfg.lambda2)?;
    let c = tape.scale(r, cfg.lambda_reg)?;
    let ab = tape.add(a, b)?;
    Ok(tape.add(ab, c)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::{normalized_laplacian, HyperedgeRecord, Hypergraph, Family};
    use crate::rng::SplitMix64;
    use alloc::string::String;
    use alloc::vec;

    fn batch(pos: &[(usize, usize)], neg: &[(usize, usize)]) -> PairBatch {
        PairBatch { positives: pos.to_vec(), negatives: neg.to_vec() }
    }

    fn eval(f: impl FnOnce(&mut Tape) -> Var) -> f64 {
        let mut tape = Tape::new();
        let v = f(&mut tape);
        tape.value(v).item()
    }

    #[test]
    fn contrastive_closed_forms() {
        let b = batch(&[(0, 1)], &[(0, 2)]);
        let l = eval(|t| {
            let s = t.constant(Tensor::column(vec![0.4, 0.4]));
            contrastive_loss(t, s, &b, 0.3).unwrap()
        });
        assert!((l - core::f64::consts::LN_2).abs() < 1e-12);

        let only = batch(&[(0, 1), (0, 2)], &[]);
        let l = eval(|t| {
            let s = t.constant(Tensor::column(vec![0.1, 0.9]));
            contrastive_loss(t, s, &only, 0.3).unwrap()
        });
        assert!(l.abs() < 1e-15);

        let l = eval(|t| {
            let s = t.constant(Tensor::column(vec![1.0, 0.0]));
            contrastive_loss(t, s, &b, 0.3).unwrap()
        });
        let direct = -libm::log(libm::exp(1.0 / 0.3) / (libm::exp(1.0 / 0.3) + libm::exp(0.0)));
        assert!((l - direct).abs() < 1e-12);
        assert!((l - 0.0351).abs() < 5e-5);
    }

    #[test]
    fn contrastive_ignores_anchorless_negatives_and_rejects_bad_temperature() {
        let b = batch(&[(0, 1)], &[(0, 2), (3, 4)]);
        let l = eval(|t| {
            let s = t.constant(Tensor::column(vec![0.2, 0.2, 0.9]));
            contrastive_loss(t, s, &b, 0.5).unwrap()
        });
        assert!((l - core::f64::consts::LN_2).abs() < 1e-12);
        let mut tape = Tape::new();
        let s = tape.constant(Tensor::column(vec![0.2, 0.2, 0.9]));
        assert_eq!(contrastive_loss(&mut tape, s, &b, 0.0).unwrap_err(), ObjectiveError::Temperature(0.0));
    }

    #[test]
    fn cross_entropy_closed_forms() {
        let b = batch(&[(0, 1)], &[(0, 2), (1, 2)]);
        let l = eval(|t| {
            let s = t.constant(Tensor::column(vec![0.5; 3]));
            cross_entropy_loss(t, s, &b, 1e-7).unwrap()
        });
        assert!((l - core::f64::consts::LN_2).abs() < 1e-6);
        let single = batch(&[(0, 1)], &[]);
        let l = eval(|t| {
            let s = t.constant(Tensor::column(vec![0.9]));
            cross_entropy_loss(t, s, &single, 1e-7).unwrap()
        });
        assert!((l - 0.1054).abs() < 1e-4);
        let l = eval(|t| {
            let s = t.constant(Tensor::column(vec![1.0, 0.0, 0.0]));
            cross_entropy_loss(t, s, &b, 1e-12).unwrap()
        });
        assert!(l.abs() < 1e-11);
    }

    #[test]
    fn total_loss_arithmetic() {
        let cfg = LossConfig { lambda_reg: 0.0, ..LossConfig::default() };
        let l = eval(|t| {
            let a = t.constant(Tensor::scalar(0.5));
            let b = t.constant(Tensor::scalar(0.25));
            let r = t.constant(Tensor::scalar(7.0));
            total_loss(t, a, b, r, &cfg).unwrap()
        });
        assert_eq!(l, 0.75);
    }

    #[test]
    fn config_validation() {
        assert!(LossConfig::default().validate().is_ok());
        let bad = LossConfig { lambda1: 0.0, lambda2: 0.0, ..LossConfig::default() };
        assert!(bad.validate().is_err());
        let bad = LossConfig { temperature: -1.0, ..LossConfig::default() };
        assert_eq!(bad.validate(), Err(ObjectiveError::Temperature(-1.0)));
    }

    fn triangle_laplacian() -> Rc<SparseMatrix> {
        let h = Hypergraph::new(4, Family::Pairwise, vec![
            HyperedgeRecord::new(vec![0, 1, 2], 1.0, String::new()),
            HyperedgeRecord::new(vec![2, 3], 1.0, String::new()),
        ])
        .unwrap();
        Rc::new(normalized_laplacian(&h).unwrap())
    }

    #[test]
    fn regularizer_zero_on_null_space_and_zero_input() {
        let lap = triangle_laplacian();
        // vertex degrees 1,1,2,1 → null vector D^{1/2}·1
        let d = [1.0, 1.0, libm::sqrt(2.0), 1.0];
        let f: Vec<f64> = d.iter().flat_map(|&x| [x, -3.0 * x]).collect();
        let r = eval(|t| {
            let e = t.constant(Tensor::new(4, 2, f).unwrap());
            regularizer(t, e, &[lap.clone()]).unwrap()
        });
        assert!(r.abs() < 1e-12, "{r}");
        let r = eval(|t| {
            let e = t.constant(Tensor::zeros(4, 3));
            regularizer(t, e, &[lap.clone(), lap.clone()]).unwrap()
        });
        assert_eq!(r, 0.0);
    }

    #[test]
    fn regularizer_rotation_invariant_and_nonnegative() {
        let lap = triangle_laplacian();
        let mut rng = SplitMix64::new(5);
        for _ in 0..20 {
            let f: Vec<f64> = (0..8).map(|_| rng.normal()).collect();
            let theta = rng.uniform(0.0, 6.283);
            let (s, c) = (libm::sin(theta), libm::cos(theta));
            let rotated: Vec<f64> = f.chunks(2).flat_map(|r| [c * r[0] - s * r[1], s * r[0] + c * r[1]]).collect();
            let a = eval(|t| {
                let e = t.constant(Tensor::new(4, 2, f.clone()).unwrap());
                regularizer(t, e, &[lap.clone()]).unwrap()
            });
            let b = eval(|t| {
                let e = t.constant(Tensor::new(4, 2, rotated).unwrap());
                regularizer(t, e, &[lap.clone()]).unwrap()
            });
            assert!(a >= -1e-9);
            assert!((a - b).abs() < 1e-8);
        }
    }
}
