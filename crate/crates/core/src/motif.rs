//! Triangle motifs and motif-based PageRank.
//!
//! The seven directed triangle motifs are counted through sparse products of
//! the unidirectional (`UC`) and bidirectional (`BC`) parts of the trust
//! adjacency matrix. Entry `(i, j)` of a motif adjacency matrix is the number
//! of motif instances that contain both `i` and `j`. Combining that matrix
//! with the raw adjacency and running PageRank over the result gives the
//! social influence score used to pick each user's most influential
//! neighbours.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparse::{DenseVector, SparseError, SparseMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MotifError {
    #[error("adjacency matrix must be square, got {0}x{1}")]
    NotSquare(usize, usize),
    #[error("adjacency entry ({0}, {1}) = {2} is not 0/1")]
    NotBinary(usize, usize, f64),
    #[error("adjacency has a self-loop at {0}")]
    SelfLoop(usize),
    #[error("adjacency entry ({0}, {1}) = {2} is negative")]
    Negative(usize, usize, f64),
    #[error("power iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("invalid PageRank configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Sparse(#[from] SparseError),
}

/// The seven connected directed triangle motifs.
///
/// With `u ↔ v` a reciprocated edge and `u → v` a one-way edge:
///
/// | motif | pattern |
/// |-------|---------|
/// | M1 | `a → b → c → a` |
/// | M2 | `a ↔ b`, `a → c → b` |
/// | M3 | `a ↔ b`, `b ↔ c`, `a → c` |
/// | M4 | all three pairs reciprocated |
/// | M5 | `a → b → c`, `a → c` |
/// | M6 | `c → a`, `c → b`, `a ↔ b` |
/// | M7 | `a → c`, `b → c`, `a ↔ b` |
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Motif {
    M1,
    M2,
    M3,
    M4,
    M5,
    M6,
    M7,
}

impl Motif {
    pub const ALL: [Motif; 7] = [
        Motif::M1,
        Motif::M2,
        Motif::M3,
        Motif::M4,
        Motif::M5,
        Motif::M6,
        Motif::M7,
    ];

    /// Motif from its 1-based number.
    pub fn from_index(k: usize) -> Option<Self> {
        Self::ALL.get(k.checked_sub(1)?).copied()
    }

    pub fn index(self) -> usize {
        self as usize + 1
    }

    /// Whether the counting matrix `C` must be symmetrized as `C + Cᵀ`.
    fn symmetrize(self) -> bool {
        matches!(self, Motif::M1 | Motif::M2 | Motif::M3 | Motif::M5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MprConfig {
    pub damping: f64,
    pub alpha: f64,
    pub motif_set: Vec<Motif>,
    pub top_k: usize,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for MprConfig {
    fn default() -> Self {
        Self {
            damping: 0.85,
            alpha: 0.8,
            motif_set: Motif::ALL.to_vec(),
            top_k: 5,
            tol: 1e-8,
            max_iters: 200,
        }
    }
}

impl MprConfig {
    pub fn validate(&self) -> Result<(), MotifError> {
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(MotifError::InvalidConfig("damping must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(MotifError::InvalidConfig("alpha must lie in [0, 1]"));
        }
        if self.top_k == 0 {
            return Err(MotifError::InvalidConfig("top_k must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(MotifError::InvalidConfig("tol must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotifResult {
    pub per_motif: BTreeMap<Motif, SparseMatrix>,
    /// `α·R + (1 − α)·A` with `A` the sum of the selected motif matrices.
    pub combined: SparseMatrix,
    pub basic_score: DenseVector,
    pub motif_score: DenseVector,
}

fn check_square(m: &SparseMatrix) -> Result<usize, MotifError> {
    if m.n_rows() != m.n_cols() {
        return Err(MotifError::NotSquare(m.n_rows(), m.n_cols()));
    }
    Ok(m.n_rows())
}

fn check_binary_adjacency(r_u: &SparseMatrix) -> Result<(), MotifError> {
    check_square(r_u)?;
    for (i, j, v) in r_u.iter() {
        if v != 1.0 {
            return Err(MotifError::NotBinary(i, j, v));
        }
        if i == j {
            return Err(MotifError::SelfLoop(i));
        }
    }
    Ok(())
}

/// Splits a binary adjacency matrix into its one-way part `UC` and its
/// reciprocated part `BC = R ⊙ Rᵀ`.
pub fn split_directions(r_u: &SparseMatrix) -> Result<(SparseMatrix, SparseMatrix), MotifError> {
    check_binary_adjacency(r_u)?;
    let bc = r_u.hadamard(&r_u.transpose())?;
    let uc = r_u.sub(&bc)?;
    Ok((uc, bc))
}

/// Motif adjacency matrix for one motif, with zero diagonal.
pub fn motif_adjacency(uc: &SparseMatrix, bc: &SparseMatrix, motif: Motif) -> Result<SparseMatrix, MotifError> {
    check_square(uc)?;
    let uct = uc.transpose();
    // (X·Y) ⊙ Z
    let term = |x: &SparseMatrix, y: &SparseMatrix, z: &SparseMatrix| -> Result<SparseMatrix, SparseError> {
        x.spmm(y)?.hadamard(z)
    };
    let sum3 = |a: SparseMatrix, b: SparseMatrix, c: SparseMatrix| -> Result<SparseMatrix, SparseError> {
        a.add(&b)?.add(&c)
    };
    let c = match motif {
        Motif::M1 => term(uc, uc, &uct)?,
        Motif::M2 => sum3(term(bc, uc, &uct)?, term(uc, bc, &uct)?, term(uc, uc, bc)?)?,
        Motif::M3 => sum3(term(bc, bc, uc)?, term(bc, uc, bc)?, term(uc, bc, bc)?)?,
        Motif::M4 => term(bc, bc, bc)?,
        Motif::M5 => sum3(term(uc, uc, uc)?, term(uc, &uct, uc)?, term(&uct, uc, uc)?)?,
        Motif::M6 => sum3(term(uc, bc, uc)?, term(bc, &uct, &uct)?, term(&uct, uc, bc)?)?,
        Motif::M7 => sum3(term(&uct, bc, &uct)?, term(bc, uc, uc)?, term(uc, &uct, bc)?)?,
    };
    let c = if motif.symmetrize() { c.add(&c.transpose())? } else { c };
    Ok(c.without_diagonal())
}

/// Row-normalized transition matrix and the list of dangling rows.
fn transition(weights: &SparseMatrix) -> Result<(SparseMatrix, Vec<bool>), MotifError> {
    let sums = weights.row_sums();
    let inv: Vec<f64> = sums.iter().map(|&s| if s > 0.0 { 1.0 / s } else { 0.0 }).collect();
    let dangling = sums.iter().map(|&s| s <= 0.0).collect();
    Ok((weights.scale_rows(&inv)?, dangling))
}

/// Fixed point of `s ← d·Pᵀs + (1 − d)/n·e` with `P` the row-normalized
/// `weights`; dangling rows jump uniformly.
///
/// The map contracts by `d` in L1, so the distance to the fixed point is at
/// most `d/(1 − d)` times the last step. Iteration stops once that bound is
/// below `tol`, which also puts the step residual below `tol`.
fn stationary(weights: &SparseMatrix, cfg: &MprConfig) -> Result<DenseVector, MotifError> {
    cfg.validate()?;
    let n = check_square(weights)?;
    if let Some((i, j, v)) = weights.iter().find(|&(_, _, v)| v < 0.0) {
        return Err(MotifError::Negative(i, j, v));
    }
    if n == 0 {
        return Ok(DenseVector::zeros(0));
    }
    let (p, dangling) = transition(weights)?;
    let pt = p.transpose();
    let d = cfg.damping;
    let nf = n as f64;
    let mut s = vec![1.0 / nf; n];
    let mut residual = f64::INFINITY;
    for _ in 0..cfg.max_iters {
        let dangling_mass: f64 = s.iter().zip(&dangling).filter(|(_, &dg)| dg).map(|(v, _)| v).sum();
        let base = d * dangling_mass / nf + (1.0 - d) / nf;
        let mut next = vec![0.0; n];
        for (j, out) in next.iter_mut().enumerate() {
            let (cols, vals) = pt.row(j);
            let flow: f64 = cols.iter().zip(vals).map(|(&i, &w)| w * s[i]).sum();
            *out = d * flow + base;
        }
        residual = next.iter().zip(&s).map(|(a, b)| libm::fabs(a - b)).sum();
        s = next;
        if residual * d / (1.0 - d) < cfg.tol {
            let total: f64 = s.iter().sum();
            return Ok(DenseVector::new(s.into_iter().map(|v| v / total).collect())?);
        }
    }
    Err(MotifError::NoConvergence { iterations: cfg.max_iters, residual })
}

/// PageRank on an arbitrary non-negative weight matrix.
pub fn weighted_pagerank(weights: &SparseMatrix, cfg: &MprConfig) -> Result<DenseVector, MotifError> {
    stationary(weights, cfg)
}

/// PageRank on the raw trust adjacency.
pub fn basic_pagerank(r_u: &SparseMatrix, cfg: &MprConfig) -> Result<DenseVector, MotifError> {
    stationary(r_u, cfg)
}

/// `α·R + (1 − α)·A`.
pub fn combine_weights(r_u: &SparseMatrix, motif_adj: &SparseMatrix, alpha: f64) -> Result<SparseMatrix, MotifError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(MotifError::InvalidConfig("alpha must lie in [0, 1]"));
    }
    Ok(r_u.linear_combination(alpha, motif_adj, 1.0 - alpha)?)
}

/// Motif-based PageRank over the configured motif set.
pub fn motif_pagerank(r_u: &SparseMatrix, cfg: &MprConfig) -> Result<MotifResult, MotifError> {
    cfg.validate()?;
    let (uc, bc) = split_directions(r_u)?;
    let n = r_u.n_rows();
    let mut per_motif = BTreeMap::new();
    let mut total = SparseMatrix::zeros(n, n);
    for &m in &cfg.motif_set {
        if per_motif.contains_key(&m) {
            continue;
        }
        let adj = motif_adjacency(&uc, &bc, m)?;
        total = total.add(&adj)?;
        per_motif.insert(m, adj);
    }
    let combined = combine_weights(r_u, &total, cfg.alpha)?;
    let basic_score = basic_pagerank(r_u, cfg)?;
    let motif_score = stationary(&combined, cfg)?;
    Ok(MotifResult { per_motif, combined, basic_score, motif_score })
}

/// For every user, up to `k` distinct neighbours (in- or out-) ordered by
/// descending score, ties broken by ascending id.
pub fn top_k_influencers(scores: &DenseVector, r_u: &SparseMatrix, k: usize) -> Vec<Vec<usize>> {
    let n = r_u.n_rows();
    let mut neighbours: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j, _) in r_u.iter() {
        if i != j {
            neighbours[i].push(j);
            neighbours[j].push(i);
        }
    }
    neighbours
        .into_iter()
        .map(|mut nb| {
            nb.sort_unstable();
            nb.dedup();
            nb.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
            nb.truncate(k);
            nb
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn adjacency(n: usize, edges: &[(usize, usize)]) -> SparseMatrix {
        let t: Vec<_> = edges.iter().map(|&(i, j)| (i, j, 1.0)).collect();
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn pure_bidirectional_pair() {
        let (uc, bc) = split_directions(&adjacency(3, &[(1, 2), (2, 1)])).unwrap();
        assert_eq!(uc.nnz(), 0);
        assert_eq!(bc.get(1, 2), 1.0);
        assert_eq!(bc.get(2, 1), 1.0);
    }

    #[test]
    fn pure_unidirectional_edge() {
        let (uc, bc) = split_directions(&adjacency(3, &[(1, 2)])).unwrap();
        assert_eq!(bc.nnz(), 0);
        assert_eq!(uc.get(1, 2), 1.0);
        assert_eq!(uc.nnz(), 1);
    }

    #[test]
    fn mixed_split() {
        let (uc, bc) = split_directions(&adjacency(4, &[(1, 2), (2, 1), (1, 3)])).unwrap();
        assert_eq!(bc, adjacency(4, &[(1, 2), (2, 1)]));
        assert_eq!(uc, adjacency(4, &[(1, 3)]));
        assert_eq!(uc.hadamard(&uc.transpose()).unwrap().nnz(), 0);
    }

    #[test]
    fn split_rejects_bad_input() {
        let weighted = SparseMatrix::from_triplets(2, 2, &[(0, 1, 2.0)]).unwrap();
        assert!(matches!(split_directions(&weighted), Err(MotifError::NotBinary(..))));
        assert!(matches!(split_directions(&adjacency(2, &[(1, 1)])), Err(MotifError::SelfLoop(1))));
        assert!(matches!(split_directions(&SparseMatrix::zeros(2, 3)), Err(MotifError::NotSquare(2, 3))));
    }

    #[test]
    fn reciprocated_triangle_is_only_m4() {
        let r = adjacency(3, &[(0, 1), (1, 0), (1, 2), (2, 1), (0, 2), (2, 0)]);
        let (uc, bc) = split_directions(&r).unwrap();
        for m in Motif::ALL {
            let a = motif_adjacency(&uc, &bc, m).unwrap();
            if m == Motif::M4 {
                let ones = SparseMatrix::from_dense(3, 3, &[0., 1., 1., 1., 0., 1., 1., 1., 0.]).unwrap();
                assert_eq!(a, ones);
            } else {
                assert_eq!(a.nnz(), 0, "{m:?}");
            }
        }
    }

    #[test]
    fn empty_graph_has_no_motifs() {
        let r = SparseMatrix::zeros(5, 5);
        let (uc, bc) = split_directions(&r).unwrap();
        for m in Motif::ALL {
            assert_eq!(motif_adjacency(&uc, &bc, m).unwrap().nnz(), 0);
        }
    }

    #[test]
    fn two_node_cycle_is_uniform() {
        let s = basic_pagerank(&adjacency(2, &[(0, 1), (1, 0)]), &MprConfig::default()).unwrap();
        assert!((s[0] - 0.5).abs() < 1e-12 && (s[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn directed_cycle_is_uniform() {
        let s = basic_pagerank(&adjacency(3, &[(0, 1), (1, 2), (2, 0)]), &MprConfig::default()).unwrap();
        for i in 0..3 {
            assert!((s[i] - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn non_convergence_reports_residual() {
        let cfg = MprConfig { max_iters: 1, tol: 1e-15, ..MprConfig::default() };
        let err = basic_pagerank(&adjacency(3, &[(1, 0), (2, 0)]), &cfg).unwrap_err();
        assert!(matches!(err, MotifError::NoConvergence { iterations: 1, residual } if residual > 0.0));
    }

    #[test]
    fn combine_weights_endpoints_and_arithmetic() {
        let r = adjacency(2, &[(0, 1)]);
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 1, 2.0), (1, 0, 4.0)]).unwrap();
        assert_eq!(combine_weights(&r, &a, 1.0).unwrap(), r);
        assert_eq!(combine_weights(&r, &a, 0.0).unwrap(), a);
        let w = combine_weights(&r, &a, 0.8).unwrap();
        assert!((w.get(0, 1) - 1.2).abs() < 1e-15);
    }

    #[test]
    fn alpha_one_reproduces_basic_pagerank() {
        let r = adjacency(5, &[(0, 1), (1, 2), (2, 0), (3, 0), (0, 3), (4, 2), (1, 4)]);
        let cfg = MprConfig { alpha: 1.0, ..MprConfig::default() };
        let res = motif_pagerank(&r, &cfg).unwrap();
        assert!(res.basic_score.l1_distance(&res.motif_score).unwrap() < 1e-9);
    }

    #[test]
    fn triangle_free_graph_ignores_alpha() {
        // a 4-cycle with a chord-free tail has no triangles
        let r = adjacency(5, &[(0, 1), (1, 2), (2, 3), (3, 0), (3, 4)]);
        let cfg = MprConfig { alpha: 0.5, ..MprConfig::default() };
        let res = motif_pagerank(&r, &cfg).unwrap();
        assert_eq!(res.combined, r.scale(0.5));
        assert!(res.basic_score.l1_distance(&res.motif_score).unwrap() < 1e-9);
    }

    #[test]
    fn top_k_rules() {
        let r = adjacency(5, &[(0, 1), (2, 0), (3, 0)]);
        let s = DenseVector::new(vec![0.1, 0.3, 0.3, 0.2, 0.1]).unwrap();
        let top = top_k_influencers(&s, &r, 2);
        assert!(top[4].is_empty());
        // equal scores 1 and 2: lower id first; 3 truncated
        assert_eq!(top[0], vec![1, 2]);
        assert_eq!(top[1], vec![0]);
        let all = top_k_influencers(&s, &r, 5);
        assert_eq!(all[0], vec![1, 2, 3]);
    }

    #[test]
    fn config_validation() {
        assert!(MprConfig { damping: 1.0, ..MprConfig::default() }.validate().is_err());
        assert!(MprConfig { alpha: -0.1, ..MprConfig::default() }.validate().is_err());
        assert!(MprConfig { top_k: 0, ..MprConfig::default() }.validate().is_err());
        assert!(MprConfig { tol: 0.0, ..MprConfig::default() }.validate().is_err());
        assert_eq!(Motif::from_index(6), Some(Motif::M6));
        assert_eq!(Motif::from_index(0), None);
        assert_eq!(Motif::M7.index(), 7);
    }
}
