//! Brute-force reference implementations shared by the integration and
//! acceptance tests. Everything here is dense and written directly from the
//! definitions, with no code shared with the library.
#![allow(dead_code)]

use ahntp_core::rng::SplitMix64;

/// Directed edges of each triangle motif on local vertices {0, 1, 2}.
pub const MOTIF_TEMPLATES: [&[(usize, usize)]; 7] = [
    // M1: directed cycle
    &[(0, 1), (1, 2), (2, 0)],
    // M2: 0↔1, 0→2, 2→1
    &[(0, 1), (1, 0), (0, 2), (2, 1)],
    // M3: 0↔1, 1↔2, 0→2
    &[(0, 1), (1, 0), (1, 2), (2, 1), (0, 2)],
    // M4: fully reciprocated
    &[(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)],
    // M5: feed-forward
    &[(0, 1), (1, 2), (0, 2)],
    // M6: 2 points into the reciprocated pair 0↔1
    &[(2, 0), (2, 1), (0, 1), (1, 0)],
    // M7: the reciprocated pair 0↔1 points into 2
    &[(0, 2), (1, 2), (0, 1), (1, 0)],
];

const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

pub fn random_digraph(rng: &mut SplitMix64, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.next_f64() < p {
                edges.push((i, j));
            }
        }
    }
    edges
}

pub fn dense_adjacency(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut a = vec![vec![false; n]; n];
    for &(i, j) in edges {
        a[i][j] = true;
    }
    a
}

/// Number of instances of motif `k` (1-based) containing both `i` and `j`,
/// found by testing every vertex triple under all orderings.
pub fn brute_motif_counts(adj: &[Vec<bool>], k: usize) -> Vec<Vec<f64>> {
    let n = adj.len();
    let template = MOTIF_TEMPLATES[k - 1];
    let mut w = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                let triple = [a, b, c];
                let matches = PERMUTATIONS.iter().any(|perm| {
                    let v = [triple[perm[0]], triple[perm[1]], triple[perm[2]]];
                    (0..3).all(|x| {
                        (0..3).filter(|&y| y != x).all(|y| adj[v[x]][v[y]] == template.contains(&(x, y)))
                    })
                });
                if matches {
                    for &x in &triple {
                        for &y in &triple {
                            if x != y {
                                w[x][y] += 1.0;
                            }
                        }
                    }
                }
            }
        }
    }
    w
}

/// Textbook PageRank: Google matrix with uniform rows for dangling nodes,
/// iterated until the step is below 1e-15.
pub fn dense_pagerank(w: &[Vec<f64>], d: f64) -> Vec<f64> {
    let n = w.len();
    let nf = n as f64;
    let g: Vec<Vec<f64>> = w
        .iter()
        .map(|row| {
            let total: f64 = row.iter().sum();
            row.iter()
                .map(|&x| {
                    let p = if total > 0.0 { x / total } else { 1.0 / nf };
                    d * p + (1.0 - d) / nf
                })
                .collect()
        })
        .collect();
    let mut s = vec![1.0 / nf; n];
    for _ in 0..100_000 {
        let next: Vec<f64> = (0..n).map(|j| (0..n).map(|i| g[i][j] * s[i]).sum()).collect();
        let step: f64 = next.iter().zip(&s).map(|(a, b)| (a - b).abs()).sum();
        s = next;
        if step < 1e-15 {
            break;
        }
    }
    let total: f64 = s.iter().sum();
    s.iter().map(|v| v / total).collect()
}

/// `I − Dv^{-1/2} H W De^{-1} Hᵀ Dv^{-1/2}` with zero scaling on isolated
/// vertices.
pub fn dense_laplacian(n: usize, hyperedges: &[(Vec<usize>, f64)]) -> Vec<Vec<f64>> {
    let mut dv = vec![0.0; n];
    for (members, weight) in hyperedges {
        for &v in members {
            dv[v] += weight;
        }
    }
    let inv_sqrt: Vec<f64> = dv.iter().map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 }).collect();
    let mut lap = vec![vec![0.0; n]; n];
    for (i, row) in lap.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for (members, weight) in hyperedges {
        let de = members.len() as f64;
        for &u in members {
            for &v in members {
                lap[u][v] -= inv_sqrt[u] * weight / de * inv_sqrt[v];
            }
        }
    }
    lap
}

/// The six-user example graph used to illustrate motif M6 (1-based labels
/// mapped to 0-based indices). Users 1 and 5 co-occur in exactly two M6
/// instances: {1, 5, 6} and {1, 4, 5}.
pub fn m6_example() -> (usize, Vec<(usize, usize)>) {
    let one_based = [(1, 6), (1, 5), (6, 5), (5, 6), (1, 4), (5, 4), (4, 5), (2, 1), (2, 3), (3, 2), (3, 5)];
    (6, one_based.iter().map(|&(a, b)| (a - 1, b - 1)).collect())
}

pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}
