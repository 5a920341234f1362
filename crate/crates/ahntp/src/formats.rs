//! Tab-separated text outputs.
//!
//! * scores: `user_id<TAB>score`, highest score first, ties by ascending id
//! * hypergraph dump: `family<TAB>tag<TAB>weight<TAB>m1,m2,...`
//! * trust: `trustor_id<TAB>trustee_id`
//! * ratings: `user_id<TAB>item_id<TAB>rating[<TAB>helpfulness]`
//!
//! User ids in every file are the external ids of the input data. Hyperedge
//! tags are the builder's labels and refer to dense (0-based, ascending id)
//! user and item indices. Floats are written in Rust's shortest round-trip
//! form so that parsing a file back yields the same values.

use std::fmt::Write as _;

use ahntp_core::data::{RatingRecord, TrustDataset};
use ahntp_core::hypergraph::Hypergraph;

/// Score table sorted by descending score; equal scores keep id order.
pub fn scores_tsv(ids: &[u64], scores: &[f64]) -> String {
    assert_eq!(ids.len(), scores.len(), "one score per user");
    let mut rows: Vec<(u64, f64)> = ids.iter().copied().zip(scores.iter().copied()).collect();
    rows.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut out = String::from("# user_id\tscore\n");
    for (id, s) in rows {
        writeln!(out, "{id}\t{s}").unwrap();
    }
    out
}

pub fn parse_scores_tsv(text: &str) -> Result<Vec<(u64, f64)>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            let (id, s) = l.split_once('\t').ok_or_else(|| format!("line {}: expected 2 columns", i + 1))?;
            let id = id.parse().map_err(|_| format!("line {}: invalid user id {id:?}", i + 1))?;
            let s = s.parse().map_err(|_| format!("line {}: invalid score {s:?}", i + 1))?;
            Ok((id, s))
        })
        .collect()
}

/// One line per hyperedge of every family, in construction order.
pub fn hypergraph_tsv(ds: &TrustDataset, hypergraphs: &[Hypergraph]) -> String {
    let mut out = String::from("# family\ttag\tweight\tmembers\n");
    for h in hypergraphs {
        for e in h.hyperedges() {
            let members: Vec<String> = e.members.iter().map(|&v| ds.user_id(v).to_string()).collect();
            writeln!(out, "{}\t{}\t{}\t{}", h.family().name(), e.tag, e.weight, members.join(",")).unwrap();
        }
    }
    out
}

pub fn trust_tsv(edges: &[(u64, u64)]) -> String {
    let mut out = String::new();
    for (a, b) in edges {
        writeln!(out, "{a}\t{b}").unwrap();
    }
    out
}

pub fn ratings_tsv(ratings: &[RatingRecord]) -> String {
    let mut out = String::new();
    for r in ratings {
        write!(out, "{}\t{}\t{}", r.user, r.item, r.rating).unwrap();
        if let Some(h) = r.helpfulness {
            write!(out, "\t{h}").unwrap();
        }
        out.push('\n');
    }
    out
}
