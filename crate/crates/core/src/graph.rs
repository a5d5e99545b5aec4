//! Basic recommender graphs built from a link stream.
//!
//! Three constructions are supported: the user-item bipartite graph (BIP),
//! the session-based temporal graph (STG) which adds one node per user and
//! time slice, and the link stream graph (LSG) whose nodes are `(t, user)`
//! and `(t, item)` pairs chained through time.
//!
//! Edges are stored once and walked in both directions with the same weight.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::{ContentCatalog, FeatureId, ItemId, LinkStream, Timestamp, UserId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GraphKind {
    #[serde(rename = "BIP")]
    Bip,
    #[serde(rename = "STG")]
    Stg,
    #[serde(rename = "LSG")]
    Lsg,
}

impl GraphKind {
    pub const ALL: [GraphKind; 3] = [GraphKind::Bip, GraphKind::Stg, GraphKind::Lsg];
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GraphKind::Bip => "BIP",
            GraphKind::Stg => "STG",
            GraphKind::Lsg => "LSG",
        })
    }
}

impl FromStr for GraphKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "BIP" => Ok(GraphKind::Bip),
            "STG" => Ok(GraphKind::Stg),
            "LSG" => Ok(GraphKind::Lsg),
            _ => Err(Error::validation(
                "graph",
                format!("unknown graph kind {s:?}"),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeRef {
    User(UserId),
    Item(ItemId),
    /// Slice indices start at 1.
    Session {
        user: UserId,
        slice: u32,
    },
    TemporalUser {
        t: Timestamp,
        user: UserId,
    },
    TemporalItem {
        t: Timestamp,
        item: ItemId,
    },
    Content(FeatureId),
    TemporalContent {
        t: Timestamp,
        feature: FeatureId,
    },
}

impl NodeRef {
    pub fn item(&self) -> Option<ItemId> {
        match *self {
            NodeRef::Item(i) | NodeRef::TemporalItem { item: i, .. } => Some(i),
            _ => None,
        }
    }

    pub fn is_content(&self) -> bool {
        matches!(self, NodeRef::Content(_) | NodeRef::TemporalContent { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeClass {
    /// User-item, session-item, or `(t,u)-(t,i)`.
    Interaction,
    /// Consecutive temporal nodes of one user or item.
    Chain,
    Content,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub base_weight: f64,
    /// Most recent link occurrence justifying the edge.
    pub event_time: Timestamp,
    pub class: EdgeClass,
}

#[derive(Clone, Debug)]
pub struct RecGraph {
    kind: GraphKind,
    nodes: Vec<NodeRef>,
    index: HashMap<NodeRef, usize>,
    edges: Vec<Edge>,
    edge_index: HashMap<(usize, usize), usize>,
    /// Most recent session (STG) or temporal (LSG) node per user.
    latest: HashMap<UserId, usize>,
    has_content: bool,
}

impl RecGraph {
    fn empty(kind: GraphKind) -> Self {
        RecGraph {
            kind,
            nodes: Vec::new(),
            index: HashMap::new(),
            edges: Vec::new(),
            edge_index: HashMap::new(),
            latest: HashMap::new(),
            has_content: false,
        }
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn nodes(&self) -> &[NodeRef] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> NodeRef {
        self.nodes[idx]
    }

    pub fn node_id(&self, node: &NodeRef) -> Option<usize> {
        self.index.get(node).copied()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Undirected edge count; each edge is a pair of arcs.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_content(&self) -> bool {
        self.has_content
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<&Edge> {
        self.edge_index
            .get(&(a.min(b), a.max(b)))
            .map(|&e| &self.edges[e])
    }

    /// Most recent session node (STG) or temporal user node (LSG).
    pub fn latest_node(&self, user: UserId) -> Option<usize> {
        self.latest.get(&user).copied()
    }

    /// Node index of `user`'s static node, when the graph has one.
    pub fn user_node(&self, user: UserId) -> Option<usize> {
        self.node_id(&NodeRef::User(user))
    }

    pub fn count_nodes(&self, pred: impl Fn(&NodeRef) -> bool) -> usize {
        self.nodes.iter().filter(|n| pred(n)).count()
    }

    pub fn count_edges(&self, pred: impl Fn(&NodeRef, &NodeRef) -> bool) -> usize {
        self.edges
            .iter()
            .filter(|e| {
                pred(&self.nodes[e.a], &self.nodes[e.b]) || pred(&self.nodes[e.b], &self.nodes[e.a])
            })
            .count()
    }

    /// Per-node incident edge indices.
    pub fn incidence(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.nodes.len()];
        for (e, edge) in self.edges.iter().enumerate() {
            inc[edge.a].push(e);
            inc[edge.b].push(e);
        }
        inc
    }

    pub(crate) fn add_node(&mut self, node: NodeRef) -> usize {
        if let Some(&idx) = self.index.get(&node) {
            return idx;
        }
        let idx = self.nodes.len();
        self.nodes.push(node);
        self.index.insert(node, idx);
        idx
    }

    /// Inserts an edge or refreshes its event time to the max seen.
    pub(crate) fn add_edge(&mut self, a: usize, b: usize, event_time: Timestamp, class: EdgeClass) {
        debug_assert_ne!(a, b);
        let key = (a.min(b), a.max(b));
        if let Some(&e) = self.edge_index.get(&key) {
            let edge = &mut self.edges[e];
            edge.event_time = edge.event_time.max(event_time);
            return;
        }
        self.edge_index.insert(key, self.edges.len());
        self.edges.push(Edge {
            a: key.0,
            b: key.1,
            base_weight: 1.0,
            event_time,
            class,
        });
    }

    pub(crate) fn mark_content(&mut self) {
        self.has_content = true;
    }

    /// Multiplies every base weight by `factor`.
    pub fn scale_base_weights(&mut self, factor: f64) {
        for e in &mut self.edges {
            e.base_weight *= factor;
        }
    }

    /// Writes one line per arc (both directions of every edge):
    /// `src_kind:src_payload dst_kind:dst_payload weight event_time`.
    /// `weights` defaults to base weights.
    pub fn write_edge_list<W: Write>(
        &self,
        out: &mut W,
        stream: &LinkStream,
        catalog: Option<&ContentCatalog>,
        weights: Option<&[f64]>,
    ) -> io::Result<()> {
        let label = |n: &NodeRef| node_label(n, stream, catalog);
        for (e, edge) in self.edges.iter().enumerate() {
            let w = weights.map_or(edge.base_weight, |w| w[e]);
            let (la, lb) = (label(&self.nodes[edge.a]), label(&self.nodes[edge.b]));
            writeln!(out, "{la} {lb} {w} {}", edge.event_time)?;
            writeln!(out, "{lb} {la} {w} {}", edge.event_time)?;
        }
        Ok(())
    }
}

fn node_label(node: &NodeRef, stream: &LinkStream, catalog: Option<&ContentCatalog>) -> String {
    let feature = |f: FeatureId| {
        catalog.map_or_else(|| format!("#{}", f.0), |c| c.feature_name(f).to_string())
    };
    match *node {
        NodeRef::User(u) => format!("user:{}", stream.user_name(u)),
        NodeRef::Item(i) => format!("item:{}", stream.item_name(i)),
        NodeRef::Session { user, slice } => format!("session:{}@{slice}", stream.user_name(user)),
        NodeRef::TemporalUser { t, user } => format!("tuser:{}@{t}", stream.user_name(user)),
        NodeRef::TemporalItem { t, item } => format!("titem:{}@{t}", stream.item_name(item)),
        NodeRef::Content(f) => format!("content:{}", feature(f)),
        NodeRef::TemporalContent { t, feature: f } => format!("tcontent:{}@{t}", feature(f)),
    }
}

fn require_nonempty(stream: &LinkStream) -> Result<()> {
    if stream.is_empty() {
        return Err(Error::EmptyStream);
    }
    Ok(())
}

fn add_bipartite(graph: &mut RecGraph, stream: &LinkStream) {
    for l in stream.links() {
        let u = graph.add_node(NodeRef::User(l.user));
        let i = graph.add_node(NodeRef::Item(l.item));
        graph.add_edge(u, i, l.t, EdgeClass::Interaction);
    }
}

pub fn build_bip(stream: &LinkStream) -> Result<RecGraph> {
    require_nonempty(stream)?;
    let mut graph = RecGraph::empty(GraphKind::Bip);
    add_bipartite(&mut graph, stream);
    Ok(graph)
}

/// Slice index (from 1) of `t` for sessions of length `delta` starting at
/// `origin`.
pub fn session_slice(t: Timestamp, origin: Timestamp, delta: f64) -> u32 {
    (((t - origin) as f64 / delta).floor() as u32) + 1
}

/// BIP plus one session node per active `(user, slice)`, slices of length
/// `delta` anchored at the stream's `t_min`.
pub fn build_stg(stream: &LinkStream, delta: f64) -> Result<RecGraph> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::validation(
            "delta",
            format!("must be positive, got {delta}"),
        ));
    }
    require_nonempty(stream)?;
    let mut graph = RecGraph::empty(GraphKind::Stg);
    add_bipartite(&mut graph, stream);
    let origin = stream.t_min();
    for l in stream.links() {
        let slice = session_slice(l.t, origin, delta);
        let s = graph.add_node(NodeRef::Session {
            user: l.user,
            slice,
        });
        let i = graph.add_node(NodeRef::Item(l.item));
        graph.add_edge(s, i, l.t, EdgeClass::Interaction);
        // time-sorted links: the last session seen is the most recent
        graph.latest.insert(l.user, s);
    }
    Ok(graph)
}

pub fn build_lsg(stream: &LinkStream) -> Result<RecGraph> {
    require_nonempty(stream)?;
    let mut graph = RecGraph::empty(GraphKind::Lsg);
    let mut user_times: BTreeMap<UserId, Vec<(Timestamp, usize)>> = BTreeMap::new();
    let mut item_times: BTreeMap<ItemId, Vec<(Timestamp, usize)>> = BTreeMap::new();

    for l in stream.links() {
        let tu = graph.add_node(NodeRef::TemporalUser {
            t: l.t,
            user: l.user,
        });
        let ti = graph.add_node(NodeRef::TemporalItem {
            t: l.t,
            item: l.item,
        });
        graph.add_edge(tu, ti, l.t, EdgeClass::Interaction);
        // links are time-sorted, so each list stays sorted
        let ut = user_times.entry(l.user).or_default();
        if ut.last().map(|&(t, _)| t) != Some(l.t) {
            ut.push((l.t, tu));
        }
        let it = item_times.entry(l.item).or_default();
        if it.last().map(|&(t, _)| t) != Some(l.t) {
            it.push((l.t, ti));
        }
    }

    for chain in user_times.values().chain(item_times.values()) {
        for pair in chain.windows(2) {
            graph.add_edge(pair[0].1, pair[1].1, pair[1].0, EdgeClass::Chain);
        }
    }
    for (user, chain) in &user_times {
        if let Some(&(_, node)) = chain.last() {
            graph.latest.insert(*user, node);
        }
    }
    Ok(graph)
}

/// Dispatches on `kind`; `delta` is only used for STG.
pub fn build(kind: GraphKind, stream: &LinkStream, delta: f64) -> Result<RecGraph> {
    match kind {
        GraphKind::Bip => build_bip(stream),
        GraphKind::Stg => build_stg(stream, delta),
        GraphKind::Lsg => build_lsg(stream),
    }
}
