//! Content-feature nodes and time-decayed edge weights.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeClass, GraphKind, NodeRef, RecGraph};
use crate::stream::{ContentCatalog, Timestamp};

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub enum ContentMode {
    #[default]
    None,
    /// Content nodes linked to items.
    #[serde(rename = "CI")]
    Ci,
    /// Content nodes linked to items and to users (BIP), sessions (STG) or
    /// temporal users (LSG).
    #[serde(rename = "CIU")]
    Ciu,
}

impl ContentMode {
    pub const ALL: [ContentMode; 3] = [ContentMode::None, ContentMode::Ci, ContentMode::Ciu];
}

impl fmt::Display for ContentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContentMode::None => "None",
            ContentMode::Ci => "CI",
            ContentMode::Ciu => "CIU",
        })
    }
}

impl FromStr for ContentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "NONE" | "-" => Ok(ContentMode::None),
            "CI" => Ok(ContentMode::Ci),
            "CIU" => Ok(ContentMode::Ciu),
            _ => Err(Error::validation(
                "content",
                format!("unknown content mode {s:?}"),
            )),
        }
    }
}

/// Exponential decay: `exp(-x ln2 / tau0)`, halving every `tau0`.
pub fn edf(x: f64, tau0: f64) -> f64 {
    (-x * std::f64::consts::LN_2 / tau0).exp()
}

/// Logistic decay: `1 - 1 / (exp(-k (x - tau0)) + 1)`, equal to 0.5 at
/// `x = tau0`. Evaluated as `1 / (1 + exp(k (x - tau0)))`, which is the same
/// function without the cancellation for large `x`.
pub fn ldf(x: f64, k: f64, tau0: f64) -> f64 {
    1.0 / (1.0 + (k * (x - tau0)).exp())
}

/// `ln(1 + e^y)` without overflow.
fn softplus(y: f64) -> f64 {
    if y > 0.0 {
        y + (-y).exp().ln_1p()
    } else {
        y.exp().ln_1p()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "UPPERCASE")]
pub enum DecaySpec {
    #[default]
    None,
    Edf {
        tau0: f64,
    },
    Ldf {
        k: f64,
        tau0: f64,
    },
}

impl DecaySpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::validation(
                    name,
                    format!("must be positive, got {v}"),
                ))
            }
        };
        match *self {
            DecaySpec::None => Ok(()),
            DecaySpec::Edf { tau0 } => positive("tau0", tau0),
            DecaySpec::Ldf { k, tau0 } => {
                positive("k", k)?;
                positive("tau0", tau0)
            }
        }
    }

    /// Decay factor for an edge of age `x`.
    pub fn factor(&self, x: f64) -> f64 {
        match *self {
            DecaySpec::None => 1.0,
            DecaySpec::Edf { tau0 } => edf(x, tau0),
            DecaySpec::Ldf { k, tau0 } => ldf(x, k, tau0),
        }
    }

    /// Natural log of [`factor`](Self::factor); finite for every finite age.
    pub fn log_factor(&self, x: f64) -> f64 {
        match *self {
            DecaySpec::None => 0.0,
            DecaySpec::Edf { tau0 } => -x * std::f64::consts::LN_2 / tau0,
            DecaySpec::Ldf { k, tau0 } => -softplus(k * (x - tau0)),
        }
    }
}

/// Per-edge weights, held as logarithms so that very old edges under a
/// steep decay keep a nonzero share after normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeWeights {
    log: Vec<f64>,
}

impl EdgeWeights {
    /// Base weights of `graph`, undecayed.
    pub fn base(graph: &RecGraph) -> Self {
        EdgeWeights {
            log: graph.edges().iter().map(|e| e.base_weight.ln()).collect(),
        }
    }

    pub fn from_log(log: Vec<f64>) -> Self {
        EdgeWeights { log }
    }

    pub fn len(&self) -> usize {
        self.log.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log.is_empty()
    }

    pub fn log_weight(&self, edge: usize) -> f64 {
        self.log[edge]
    }

    /// May underflow to 0 for extreme ages; use `log_weight` for ratios.
    pub fn weight(&self, edge: usize) -> f64 {
        self.log[edge].exp()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.log.iter().map(|l| l.exp()).collect()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log
    }
}

/// `w_now(a,b) = f(now - t_e) * w(a,b)` for every edge of `graph`.
pub fn effective_weights(
    graph: &RecGraph,
    now: Timestamp,
    decay: &DecaySpec,
) -> Result<EdgeWeights> {
    decay.validate()?;
    let mut log = Vec::with_capacity(graph.edge_count());
    for e in graph.edges() {
        if e.event_time > now {
            return Err(Error::TemporalCausality {
                event_time: e.event_time,
                now,
            });
        }
        let age = (now - e.event_time) as f64;
        log.push(e.base_weight.ln() + decay.log_factor(age));
    }
    Ok(EdgeWeights { log })
}

/// Adds content nodes to a basic graph according to `mode`.
///
/// Each content edge takes the latest event time among the interaction
/// edges that induce it: an item-content edge the item's latest
/// interaction, a user-content edge the user's latest interaction with an
/// item carrying that feature.
pub fn attach_content(
    graph: RecGraph,
    catalog: &ContentCatalog,
    mode: ContentMode,
) -> Result<RecGraph> {
    if graph.has_content() {
        return Err(Error::validation("graph", "content nodes already attached"));
    }
    if mode == ContentMode::None {
        return Ok(graph);
    }
    let mut graph = graph;
    let kind = graph.kind();
    let content_node = |item_node: &NodeRef, feature| match (kind, *item_node) {
        (GraphKind::Lsg, NodeRef::TemporalItem { t, .. }) => {
            NodeRef::TemporalContent { t, feature }
        }
        _ => NodeRef::Content(feature),
    };
    let user_side = |n: &NodeRef| match kind {
        GraphKind::Bip => matches!(n, NodeRef::User(_)),
        GraphKind::Stg => matches!(n, NodeRef::Session { .. }),
        GraphKind::Lsg => matches!(n, NodeRef::TemporalUser { .. }),
    };

    // (item node, features, latest interaction time)
    let mut item_links = Vec::new();
    // (user-side node, item node, interaction time)
    let mut user_item = Vec::new();
    let mut latest: BTreeMap<usize, Timestamp> = BTreeMap::new();
    for e in graph
        .edges()
        .iter()
        .filter(|e| e.class == EdgeClass::Interaction)
    {
        for (x, y) in [(e.a, e.b), (e.b, e.a)] {
            if graph.node(y).item().is_some() {
                let t = latest.entry(y).or_insert(e.event_time);
                *t = (*t).max(e.event_time);
                if mode == ContentMode::Ciu && user_side(&graph.node(x)) {
                    user_item.push((x, y, e.event_time));
                }
            }
        }
    }
    for (&node, &t) in &latest {
        let item = graph.node(node).item().unwrap();
        let feats = match catalog.features_of(item) {
            Some(f) if !f.is_empty() => f.to_vec(),
            _ => {
                return Err(Error::Consistency(format!(
                    "item #{} has no content features in the catalog",
                    item.0
                )))
            }
        };
        item_links.push((node, feats, t));
    }

    let mut features_of_node = BTreeMap::new();
    for (node, feats, t) in item_links {
        let item_ref = graph.node(node);
        for &f in &feats {
            let c = graph.add_node(content_node(&item_ref, f));
            graph.add_edge(node, c, t, EdgeClass::Content);
        }
        features_of_node.insert(node, feats);
    }
    for (x, item_node, t) in user_item {
        let item_ref = graph.node(item_node);
        for &f in &features_of_node[&item_node] {
            let c = graph.add_node(content_node(&item_ref, f));
            graph.add_edge(x, c, t, EdgeClass::Content);
        }
    }
    graph.mark_content();
    Ok(graph)
}
