#![allow(dead_code)]

use std::collections::BTreeSet;

use graphrec::enrich::EdgeWeights;
use graphrec::graph::RecGraph;
use graphrec::stream::{ContentCatalog, ExplicitTrustNetwork, LinkStream};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

pub struct Small {
    pub stream: LinkStream,
    pub catalog: ContentCatalog,
    pub trust: ExplicitTrustNetwork,
}

impl std::fmt::Debug for Small {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.stream.links()).finish()
    }
}

/// Random streams with up to `users` users, 6 items, 3 features and a
/// random explicit trust network.
pub fn small_dataset(users: u8, max_links: usize) -> impl Strategy<Value = Small> {
    (
        prop::collection::vec((0i64..25, 0..users, 0u8..6), 1..max_links),
        prop::collection::vec(prop::collection::btree_set(0u8..3, 1..3), 6),
        prop::collection::vec((0..users, 0..users), 0..12),
    )
        .prop_map(|(links, feats, edges)| {
            let triples: Vec<(i64, String, String)> = links
                .iter()
                .map(|&(t, u, i)| (t, format!("u{u}"), format!("i{i}")))
                .collect();
            let stream = LinkStream::from_triples(&triples);
            let mut pairs = Vec::new();
            for (i, fs) in feats.iter().enumerate() {
                let name = format!("i{i}");
                if stream.item_id(&name).is_some() {
                    pairs.extend(fs.iter().map(|f| (name.clone(), format!("c{f}"))));
                }
            }
            let catalog = ContentCatalog::from_pairs(stream.items(), &pairs).unwrap();
            let mut trust = ExplicitTrustNetwork::default();
            for (a, b) in edges {
                trust.insert(&format!("u{a}"), &format!("u{b}"));
            }
            Small {
                stream,
                catalog,
                trust,
            }
        })
}

/// Column-stochastic transition matrix built straight from the edge list,
/// with dangling columns left at zero.
pub fn dense_transition(graph: &RecGraph, weights: &EdgeWeights) -> DMatrix<f64> {
    let n = graph.node_count();
    let logs = weights.log_weights();
    let mut m = DMatrix::zeros(n, n);
    for src in 0..n {
        let incident: Vec<(usize, f64)> = graph
            .edges()
            .iter()
            .zip(logs)
            .filter_map(|(e, &lw)| {
                if e.a == src {
                    Some((e.b, lw))
                } else if e.b == src {
                    Some((e.a, lw))
                } else {
                    None
                }
            })
            .collect();
        let Some(max) = incident.iter().map(|&(_, lw)| lw).reduce(f64::max) else {
            continue;
        };
        let total: f64 = incident.iter().map(|&(_, lw)| (lw - max).exp()).sum();
        for (dst, lw) in incident {
            m[(dst, src)] += (lw - max).exp() / total;
        }
    }
    m
}

/// Solves `(I - alpha (M + d 1_D^T)) x = (1 - alpha) d` by LU, where `D` is
/// the set of dangling columns.
pub fn dense_pagerank(m: &DMatrix<f64>, d: &[f64], alpha: f64) -> Vec<f64> {
    let n = d.len();
    let dv = DVector::from_column_slice(d);
    let mut completed = m.clone();
    for col in 0..n {
        if m.column(col).iter().all(|&v| v == 0.0) {
            completed.set_column(col, &dv);
        }
    }
    let a = DMatrix::identity(n, n) - completed * alpha;
    let x = a.lu().solve(&(dv * (1.0 - alpha))).expect("nonsingular");
    x.iter().copied().collect()
}

pub fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Jaccard over every ordered pair of distinct users.
pub fn naive_jaccard(stream: &LinkStream) -> Vec<(u32, u32, f64)> {
    let hist = stream.user_items();
    let mut out = Vec::new();
    for (u, a) in &hist {
        for (v, b) in &hist {
            if u == v {
                continue;
            }
            let inter = a.intersection(b).count();
            let union: BTreeSet<_> = a.union(b).collect();
            out.push((u.0, v.0, inter as f64 / union.len() as f64));
        }
    }
    out
}
