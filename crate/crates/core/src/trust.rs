//! Per-user trust distributions.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::{ExplicitTrustNetwork, ItemId, LinkStream, UserId, Vocab};

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub enum TrustKind {
    #[default]
    None,
    /// Explicit, from a given network.
    #[serde(rename = "ET")]
    Et,
    /// Implicit, from Jaccard similarity of item histories.
    #[serde(rename = "IT")]
    It,
}

impl TrustKind {
    pub const ALL: [TrustKind; 3] = [TrustKind::None, TrustKind::Et, TrustKind::It];
}

impl fmt::Display for TrustKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrustKind::None => "None",
            TrustKind::Et => "ET",
            TrustKind::It => "IT",
        })
    }
}

impl FromStr for TrustKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "NONE" | "-" => Ok(TrustKind::None),
            "ET" => Ok(TrustKind::Et),
            "IT" => Ok(TrustKind::It),
            _ => Err(Error::validation(
                "trust",
                format!("unknown trust kind {s:?}"),
            )),
        }
    }
}

/// `TR_u` with weights summing to one for every user that has any.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrustModel {
    kind: TrustKind,
    dist: BTreeMap<UserId, Vec<(UserId, f64)>>,
}

impl TrustModel {
    pub fn none() -> Self {
        TrustModel::default()
    }

    /// Normalizes raw positive scores per user. Users whose scores are all
    /// non-positive are dropped.
    pub fn from_scores(kind: TrustKind, scores: BTreeMap<UserId, Vec<(UserId, f64)>>) -> Self {
        let mut dist = BTreeMap::new();
        for (u, mut list) in scores {
            list.retain(|&(v, w)| v != u && w > 0.0);
            if list.is_empty() {
                continue;
            }
            list.sort_unstable_by_key(|&(v, _)| v);
            let total: f64 = list.iter().map(|&(_, w)| w).sum();
            for (_, w) in &mut list {
                *w /= total;
            }
            dist.insert(u, list);
        }
        TrustModel { kind, dist }
    }

    pub fn kind(&self) -> TrustKind {
        self.kind
    }

    /// `(v, trust(u, v))` sorted by `v`; empty when `u` trusts nobody.
    pub fn trusted(&self, user: UserId) -> &[(UserId, f64)] {
        self.dist.get(&user).map_or(&[], Vec::as_slice)
    }

    pub fn trust(&self, user: UserId, other: UserId) -> f64 {
        self.trusted(user)
            .binary_search_by_key(&other, |&(v, _)| v)
            .map_or(0.0, |i| self.trusted(user)[i].1)
    }

    pub fn users(&self) -> impl Iterator<Item = UserId> + '_ {
        self.dist.keys().copied()
    }
}

/// Uniform weights over each user's trusted set. Users unknown to `users`
/// (they never produced a positive link) are left out.
pub fn explicit_trust(network: &ExplicitTrustNetwork, users: &Vocab) -> TrustModel {
    let mut scores = BTreeMap::new();
    for (truster, trustees) in network.iter() {
        let Some(u) = users.get(truster) else {
            continue;
        };
        let list: Vec<(UserId, f64)> = trustees
            .iter()
            .filter_map(|v| users.get(v))
            .map(|v| (UserId(v), 1.0))
            .collect();
        scores.insert(UserId(u), list);
    }
    TrustModel::from_scores(TrustKind::Et, scores)
}

/// Jaccard similarity of item sets, restricted to pairs sharing at least
/// `max(min_overlap, 1)` items, then normalized per user.
pub fn implicit_trust(stream: &LinkStream, min_overlap: usize) -> TrustModel {
    let user_items = stream.user_items();
    let mut by_item: HashMap<ItemId, Vec<UserId>> = HashMap::new();
    for (&u, items) in &user_items {
        for &i in items {
            by_item.entry(i).or_default().push(u);
        }
    }
    let min_overlap = min_overlap.max(1);

    let users: Vec<UserId> = user_items.keys().copied().collect();
    let scores: BTreeMap<UserId, Vec<(UserId, f64)>> = users
        .par_iter()
        .map(|&u| {
            let mine = &user_items[&u];
            let mut overlap: HashMap<UserId, usize> = HashMap::new();
            for i in mine {
                for &v in &by_item[i] {
                    if v != u {
                        *overlap.entry(v).or_default() += 1;
                    }
                }
            }
            let list = overlap
                .into_iter()
                .filter(|&(_, n)| n >= min_overlap)
                .map(|(v, n)| {
                    let union = mine.len() + user_items[&v].len() - n;
                    (v, n as f64 / union as f64)
                })
                .collect();
            (u, list)
        })
        .collect();
    TrustModel::from_scores(TrustKind::It, scores)
}
