//! Personalized PageRank over recommender graphs.
//!
//! The walk follows `PR = alpha * M * PR + (1 - alpha) * d`, where `M` is the
//! column-stochastic transition matrix of the weighted graph and `d` the
//! restart (personalization) distribution. Rank held by nodes without
//! outgoing arcs is sent back to `d`, so `PR` stays a distribution.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::enrich::{ContentMode, DecaySpec, EdgeWeights};
use crate::error::{Error, Result};
use crate::graph::{GraphKind, RecGraph};
use crate::stream::{ItemId, LinkStream, UserId};
use crate::trust::{TrustKind, TrustModel};

pub const DAY: f64 = 86_400.0;

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub enum DecayKind {
    #[default]
    None,
    #[serde(rename = "EDF")]
    Edf,
    #[serde(rename = "LDF")]
    Ldf,
}

impl DecayKind {
    pub const ALL: [DecayKind; 3] = [DecayKind::None, DecayKind::Edf, DecayKind::Ldf];
}

impl std::fmt::Display for DecayKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DecayKind::None => "None",
            DecayKind::Edf => "EDF",
            DecayKind::Ldf => "LDF",
        })
    }
}

impl std::str::FromStr for DecayKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "NONE" | "-" => Ok(DecayKind::None),
            "EDF" => Ok(DecayKind::Edf),
            "LDF" => Ok(DecayKind::Ldf),
            _ => Err(Error::validation(
                "decay",
                format!("unknown decay kind {s:?}"),
            )),
        }
    }
}

/// Every tunable of one recommender configuration.
///
/// Durations (`delta`, `tau0`) and the logistic slope `ldf_k` are expressed
/// in timestamp units: with second timestamps, `tau0 = 90 * DAY` and
/// `ldf_k = 0.5 / DAY` describe a 90-day midpoint with slope 0.5 per day.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PprSettings {
    pub graph: GraphKind,
    pub content: ContentMode,
    pub decay: DecayKind,
    pub trust: TrustKind,
    /// STG session length.
    pub delta: f64,
    /// STG restart share of the static user node.
    pub beta: f64,
    /// Restart share of trusted users.
    pub gamma: f64,
    /// Damping factor.
    pub alpha: f64,
    pub tau0: f64,
    pub ldf_k: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Recommendation list length.
    pub n: usize,
    /// Minimum shared items for an implicit trust pair.
    pub min_overlap: usize,
}

impl Default for PprSettings {
    fn default() -> Self {
        PprSettings {
            graph: GraphKind::Bip,
            content: ContentMode::None,
            decay: DecayKind::None,
            trust: TrustKind::None,
            delta: 30.0 * DAY,
            beta: 0.5,
            gamma: 0.3,
            alpha: 0.9,
            tau0: 90.0 * DAY,
            ldf_k: 0.5 / DAY,
            tol: 1e-10,
            max_iter: 300,
            n: 10,
            min_overlap: 1,
        }
    }
}

impl PprSettings {
    pub fn decay_spec(&self) -> DecaySpec {
        match self.decay {
            DecayKind::None => DecaySpec::None,
            DecayKind::Edf => DecaySpec::Edf { tau0: self.tau0 },
            DecayKind::Ldf => DecaySpec::Ldf {
                k: self.ldf_k,
                tau0: self.tau0,
            },
        }
    }

    /// Short label such as `BIP/CIU-EDF-IT`.
    pub fn label(&self) -> String {
        format!(
            "{}/{}",
            self.graph,
            combo_label(self.content, self.decay, self.trust)
        )
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, field: &str, msg: String| {
            if ok {
                Ok(())
            } else {
                Err(Error::validation(field, msg))
            }
        };
        check(
            self.alpha > 0.0 && self.alpha < 1.0,
            "alpha",
            format!("must lie in (0, 1), got {}", self.alpha),
        )?;
        check(
            (0.0..=1.0).contains(&self.beta),
            "beta",
            format!("must lie in [0, 1], got {}", self.beta),
        )?;
        check(
            (0.0..=1.0).contains(&self.gamma),
            "gamma",
            format!("must lie in [0, 1], got {}", self.gamma),
        )?;
        check(
            self.tol > 0.0,
            "tol",
            format!("must be positive, got {}", self.tol),
        )?;
        check(self.max_iter >= 1, "max_iter", "must be at least 1".into())?;
        check(self.n >= 1, "n", "must be at least 1".into())?;
        if self.graph == GraphKind::Stg {
            check(
                self.delta > 0.0 && self.delta.is_finite(),
                "delta",
                format!("must be positive, got {}", self.delta),
            )?;
        }
        self.decay_spec().validate()
    }
}

/// `None` when no side information, else e.g. `CI-LDF-ET` or `EDF`.
pub fn combo_label(content: ContentMode, decay: DecayKind, trust: TrustKind) -> String {
    let mut parts = Vec::new();
    if content != ContentMode::None {
        parts.push(content.to_string());
    }
    if decay != DecayKind::None {
        parts.push(decay.to_string());
    }
    if trust != TrustKind::None {
        parts.push(trust.to_string());
    }
    if parts.is_empty() {
        "None".into()
    } else {
        parts.join("-")
    }
}

/// Column-stochastic transition matrix in compressed-column form:
/// column `src` lists `(dst, M[dst, src])`.
#[derive(Clone, Debug)]
pub struct TransitionMatrix {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    probs: Vec<f64>,
    dangling: Vec<usize>,
}

impl TransitionMatrix {
    pub fn dim(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn column(&self, src: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[src]..self.offsets[src + 1];
        self.targets[range.clone()]
            .iter()
            .copied()
            .zip(self.probs[range].iter().copied())
    }

    pub fn get(&self, dst: usize, src: usize) -> f64 {
        self.column(src)
            .filter(|&(d, _)| d == dst)
            .map(|(_, p)| p)
            .sum()
    }

    /// Nodes without outgoing arcs.
    pub fn dangling(&self) -> &[usize] {
        &self.dangling
    }

    pub fn nnz(&self) -> usize {
        self.targets.len()
    }
}

/// `M[dst, src] = w(src, dst) / sum over dst' of w(src, dst')`.
pub fn transition_matrix(graph: &RecGraph, weights: &EdgeWeights) -> TransitionMatrix {
    assert_eq!(weights.len(), graph.edge_count(), "one weight per edge");
    let incidence = graph.incidence();
    let n = graph.node_count();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut targets = Vec::with_capacity(2 * graph.edge_count());
    let mut probs = Vec::with_capacity(2 * graph.edge_count());
    let mut dangling = Vec::new();
    offsets.push(0);
    for (src, incident) in incidence.iter().enumerate() {
        if incident.is_empty() {
            dangling.push(src);
        } else {
            // normalize in log space: shift by the column max before exp
            let max = incident
                .iter()
                .map(|&e| weights.log_weight(e))
                .fold(f64::NEG_INFINITY, f64::max);
            let start = probs.len();
            for &e in incident {
                let edge = &graph.edges()[e];
                targets.push(if edge.a == src { edge.b } else { edge.a });
                probs.push((weights.log_weight(e) - max).exp());
            }
            let total: f64 = probs[start..].iter().sum();
            for p in &mut probs[start..] {
                *p /= total;
            }
        }
        offsets.push(targets.len());
    }
    TransitionMatrix {
        offsets,
        targets,
        probs,
        dangling,
    }
}

/// Result of a power iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct RankVector {
    pub scores: Vec<f64>,
    pub iterations: usize,
    /// L1 distance between the last two iterates.
    pub residual: f64,
    pub converged: bool,
}

/// Iterates `x <- alpha (M x + dangling(x) d) + (1 - alpha) d` from `x = d`
/// until successive iterates differ by at most `tol` in L1 norm. Returns
/// the last iterate with `converged = false` when `max_iter` is exhausted.
pub fn power_iteration(
    matrix: &TransitionMatrix,
    d: &[f64],
    alpha: f64,
    tol: f64,
    max_iter: usize,
) -> RankVector {
    let n = matrix.dim();
    assert_eq!(d.len(), n, "personalization length must match the matrix");
    let mut x = d.to_vec();
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let lost: f64 = matrix.dangling().iter().map(|&i| x[i]).sum();
        let restart = (1.0 - alpha) + alpha * lost;
        for (slot, &di) in next.iter_mut().zip(d) {
            *slot = restart * di;
        }
        for (src, &mass) in x.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let share = alpha * mass;
            for (dst, p) in matrix.column(src) {
                next[dst] += share * p;
            }
        }
        residual = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if residual <= tol {
            return RankVector {
                scores: x,
                iterations,
                residual,
                converged: true,
            };
        }
    }
    log::debug!("power iteration stopped after {iterations} steps, residual {residual:e}");
    RankVector {
        scores: x,
        iterations,
        residual,
        converged: false,
    }
}

/// Restart nodes of `user` on its own, before any trust mixing.
fn own_restart(graph: &RecGraph, settings: &PprSettings, user: UserId) -> Vec<(usize, f64)> {
    match graph.kind() {
        GraphKind::Bip => graph
            .user_node(user)
            .map(|n| vec![(n, 1.0)])
            .unwrap_or_default(),
        GraphKind::Stg => match (graph.user_node(user), graph.latest_node(user)) {
            (Some(u), Some(s)) => vec![(u, settings.beta), (s, 1.0 - settings.beta)],
            _ => Vec::new(),
        },
        GraphKind::Lsg => graph
            .latest_node(user)
            .map(|n| vec![(n, 1.0)])
            .unwrap_or_default(),
    }
}

/// Sparse restart distribution for `user`, sorted by node, summing to 1.
///
/// Without trust: BIP restarts at the user node; STG splits `beta` /
/// `1 - beta` between the user node and its latest session; LSG restarts at
/// the user's latest temporal node. With trust, the user keeps `1 - gamma`
/// of each share and every trusted `v` with nodes in the graph receives
/// `gamma * trust(u, v) / |TR_u|` of it at its own restart nodes; the result
/// is rescaled to sum to one.
pub fn personalization_vector(
    graph: &RecGraph,
    settings: &PprSettings,
    user: UserId,
    trust: &TrustModel,
) -> Result<Vec<(usize, f64)>> {
    let own = own_restart(graph, settings, user);
    let trusted = trust.trusted(user);
    let mixing = settings.trust != TrustKind::None
        && trust.kind() != TrustKind::None
        && settings.gamma > 0.0
        && !trusted.is_empty();

    let mut entries: BTreeMap<usize, f64> = BTreeMap::new();
    if mixing {
        let share = settings.gamma / trusted.len() as f64;
        for &(v, t) in trusted {
            for (node, w) in own_restart(graph, settings, v) {
                *entries.entry(node).or_default() += share * t * w;
            }
        }
        let trusted_mass: f64 = entries.values().sum();
        if trusted_mass > 0.0 {
            for &(node, w) in &own {
                *entries.entry(node).or_default() += (1.0 - settings.gamma) * w;
            }
        } else {
            entries.clear();
        }
    }
    if entries.is_empty() {
        entries.extend(own.iter().copied());
    }
    entries.retain(|_, w| *w > 0.0);
    let total: f64 = entries.values().sum();
    if entries.is_empty() || total <= 0.0 {
        return Err(Error::ColdUser(format!("#{}", user.0)));
    }
    Ok(entries.into_iter().map(|(n, w)| (n, w / total)).collect())
}

pub fn densify(sparse: &[(usize, f64)], n: usize) -> Vec<f64> {
    let mut d = vec![0.0; n];
    for &(i, w) in sparse {
        d[i] += w;
    }
    d
}

/// Orders `(item, score)` by descending score, ascending item id on ties.
pub fn rank_items(mut scored: Vec<(ItemId, f64)>, n: usize) -> Vec<(ItemId, f64)> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(n);
    scored
}

/// Top `n` unseen items by rank. LSG items sum the rank of all their
/// temporal nodes.
pub fn top_n(
    pr: &[f64],
    graph: &RecGraph,
    seen: &BTreeSet<ItemId>,
    n: usize,
) -> Vec<(ItemId, f64)> {
    let mut scores: BTreeMap<ItemId, f64> = BTreeMap::new();
    for (idx, node) in graph.nodes().iter().enumerate() {
        if let Some(item) = node.item() {
            if !seen.contains(&item) {
                *scores.entry(item).or_default() += pr[idx];
            }
        }
    }
    rank_items(scores.into_iter().collect(), n)
}

/// Most-popular-item baseline: items ranked by number of distinct users.
pub fn mpi_rank(train: &LinkStream, seen: &BTreeSet<ItemId>, n: usize) -> Vec<(ItemId, f64)> {
    let pairs: BTreeSet<(ItemId, UserId)> =
        train.links().iter().map(|l| (l.item, l.user)).collect();
    let mut popularity: BTreeMap<ItemId, f64> = BTreeMap::new();
    for (item, _) in pairs {
        if !seen.contains(&item) {
            *popularity.entry(item).or_default() += 1.0;
        }
    }
    rank_items(popularity.into_iter().collect(), n)
}
