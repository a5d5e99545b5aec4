//! Ingestion of review and trust files into a bipartite link stream.
//!
//! Raw review tuples `(user, item, feature, rating, timestamp)` are reduced to
//! positive feedback, then interned: user, item and feature identifiers are
//! opaque strings mapped to dense indices in lexicographic order, so integer
//! order and string order agree everywhere downstream.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::Arc;

use flate2::read::MultiGzDecoder;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Timestamp = i64;

/// Ratings strictly below this are never positive feedback.
pub const POSITIVE_RATING_FLOOR: f64 = 2.5;

const RATING_MAX: f64 = 5.0;

macro_rules! dense_id {
    ($name:ident) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }
    };
}

dense_id!(UserId);
dense_id!(ItemId);
dense_id!(FeatureId);

/// Bidirectional string <-> dense index table, sorted lexicographically.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocab {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let sorted: BTreeSet<String> = names.into_iter().map(Into::into).collect();
        let names: Vec<String> = sorted.into_iter().collect();
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as u32))
            .collect();
        Vocab { names, index }
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReviewTuple {
    pub user: String,
    pub item: String,
    pub feature: String,
    pub rating: f64,
    pub timestamp: Timestamp,
}

/// One interaction. Field order gives the canonical sort: time, then user,
/// then item.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Link {
    pub t: Timestamp,
    pub user: UserId,
    pub item: ItemId,
}

/// A bipartite link stream over the interval `[t_min, t_max]`.
#[derive(Clone, Debug)]
pub struct LinkStream {
    t_min: Timestamp,
    t_max: Timestamp,
    users: Arc<Vocab>,
    items: Arc<Vocab>,
    links: Vec<Link>,
}

impl LinkStream {
    /// Builds a stream; links are sorted and exact duplicates removed. The
    /// interval is the span of the links (`0..=0` for an empty stream).
    pub fn new(users: Arc<Vocab>, items: Arc<Vocab>, mut links: Vec<Link>) -> Self {
        links.sort_unstable();
        links.dedup();
        let t_min = links.first().map_or(0, |l| l.t);
        let t_max = links.last().map_or(0, |l| l.t);
        LinkStream {
            t_min,
            t_max,
            users,
            items,
            links,
        }
    }

    /// Convenience constructor from `(t, user, item)` string triples.
    pub fn from_triples<U: AsRef<str>, I: AsRef<str>>(triples: &[(Timestamp, U, I)]) -> Self {
        let users = Arc::new(Vocab::from_names(
            triples.iter().map(|(_, u, _)| u.as_ref().to_string()),
        ));
        let items = Arc::new(Vocab::from_names(
            triples.iter().map(|(_, _, i)| i.as_ref().to_string()),
        ));
        let links = triples
            .iter()
            .map(|(t, u, i)| Link {
                t: *t,
                user: UserId(users.get(u.as_ref()).unwrap()),
                item: ItemId(items.get(i.as_ref()).unwrap()),
            })
            .collect();
        LinkStream::new(users, items, links)
    }

    /// Sub-stream of links with `lo <= t <= hi`, over the interval `[lo, hi]`.
    /// Vocabularies are shared with `self`.
    pub fn window(&self, lo: Timestamp, hi: Timestamp) -> LinkStream {
        let start = self.links.partition_point(|l| l.t < lo);
        let end = self.links.partition_point(|l| l.t <= hi);
        LinkStream {
            t_min: lo,
            t_max: hi,
            users: Arc::clone(&self.users),
            items: Arc::clone(&self.items),
            links: self.links[start..end.max(start)].to_vec(),
        }
    }

    pub fn t_min(&self) -> Timestamp {
        self.t_min
    }

    pub fn t_max(&self) -> Timestamp {
        self.t_max
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn users(&self) -> &Arc<Vocab> {
        &self.users
    }

    pub fn items(&self) -> &Arc<Vocab> {
        &self.items
    }

    pub fn user_id(&self, name: &str) -> Option<UserId> {
        self.users.get(name).map(UserId)
    }

    pub fn item_id(&self, name: &str) -> Option<ItemId> {
        self.items.get(name).map(ItemId)
    }

    pub fn user_name(&self, user: UserId) -> &str {
        self.users.name(user.0)
    }

    pub fn item_name(&self, item: ItemId) -> &str {
        self.items.name(item.0)
    }

    pub fn active_users(&self) -> BTreeSet<UserId> {
        self.links.iter().map(|l| l.user).collect()
    }

    pub fn active_items(&self) -> BTreeSet<ItemId> {
        self.links.iter().map(|l| l.item).collect()
    }

    /// Distinct items selected by each active user.
    pub fn user_items(&self) -> BTreeMap<UserId, BTreeSet<ItemId>> {
        let mut out: BTreeMap<UserId, BTreeSet<ItemId>> = BTreeMap::new();
        for l in &self.links {
            out.entry(l.user).or_default().insert(l.item);
        }
        out
    }

    pub fn distinct_timestamps(&self) -> usize {
        let mut n = 0;
        let mut last = None;
        for l in &self.links {
            if last != Some(l.t) {
                n += 1;
                last = Some(l.t);
            }
        }
        n
    }
}

/// Item -> content features (`g(i)`).
#[derive(Clone, Debug)]
pub struct ContentCatalog {
    features: Arc<Vocab>,
    item_features: Vec<Vec<FeatureId>>,
}

impl ContentCatalog {
    /// `item_features` is indexed by `ItemId`; every referenced feature must
    /// exist in `features`.
    pub fn new(features: Arc<Vocab>, mut item_features: Vec<Vec<FeatureId>>) -> Result<Self> {
        for (item, feats) in item_features.iter_mut().enumerate() {
            if let Some(bad) = feats.iter().find(|f| f.index() >= features.len()) {
                return Err(Error::Consistency(format!(
                    "item #{item} references unknown feature #{}",
                    bad.0
                )));
            }
            feats.sort_unstable();
            feats.dedup();
        }
        Ok(ContentCatalog {
            features,
            item_features,
        })
    }

    /// Builds a catalog for `items` from `(item, feature)` name pairs.
    pub fn from_pairs<I: AsRef<str>, F: AsRef<str>>(
        items: &Vocab,
        pairs: &[(I, F)],
    ) -> Result<Self> {
        let features = Arc::new(Vocab::from_names(
            pairs.iter().map(|(_, f)| f.as_ref().to_string()),
        ));
        let mut item_features = vec![Vec::new(); items.len()];
        for (i, f) in pairs {
            let item = items.get(i.as_ref()).ok_or_else(|| {
                Error::Consistency(format!("unknown item {:?} in catalog", i.as_ref()))
            })?;
            item_features[item as usize].push(FeatureId(features.get(f.as_ref()).unwrap()));
        }
        ContentCatalog::new(features, item_features)
    }

    pub fn features(&self) -> &Arc<Vocab> {
        &self.features
    }

    /// `None` when the item is outside the catalog.
    pub fn features_of(&self, item: ItemId) -> Option<&[FeatureId]> {
        self.item_features.get(item.index()).map(Vec::as_slice)
    }

    pub fn feature_name(&self, feature: FeatureId) -> &str {
        self.features.name(feature.0)
    }
}

/// Raw explicit trust edges keyed by user name. Self-loops are never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExplicitTrustNetwork {
    edges: BTreeMap<String, BTreeSet<String>>,
}

impl ExplicitTrustNetwork {
    /// Returns false for self-loops and duplicates.
    pub fn insert(&mut self, truster: &str, trustee: &str) -> bool {
        if truster == trustee {
            return false;
        }
        self.edges
            .entry(truster.to_string())
            .or_default()
            .insert(trustee.to_string())
    }

    pub fn trusted_by(&self, truster: &str) -> Option<&BTreeSet<String>> {
        self.edges.get(truster)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &BTreeSet<String>)> {
        self.edges.iter()
    }

    pub fn relationship_count(&self) -> usize {
        self.edges.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Field separator for the text formats.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Delimiter {
    /// Any run of ASCII whitespace.
    #[default]
    Whitespace,
    Char(char),
}

impl Delimiter {
    fn split<'a>(&self, line: &'a str) -> Vec<&'a str> {
        match *self {
            Delimiter::Whitespace => line.split_ascii_whitespace().collect(),
            Delimiter::Char(c) => line.split(c).map(str::trim).collect(),
        }
    }
}

impl std::str::FromStr for Delimiter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "" | "whitespace" | "ws" => Ok(Delimiter::Whitespace),
            "tab" | "\\t" => Ok(Delimiter::Char('\t')),
            "comma" => Ok(Delimiter::Char(',')),
            _ => {
                let mut chars = s.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) => Ok(Delimiter::Char(c)),
                    _ => Err(Error::validation(
                        "delimiter",
                        format!("expected a single character, got {s:?}"),
                    )),
                }
            }
        }
    }
}

/// Layout of a review file. Field order is fixed:
/// `user item feature rating timestamp`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ReviewFormat {
    pub delimiter: Delimiter,
}

/// Opens `path`, transparently decompressing when it ends in `.gz`.
pub fn open_text(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let gz = path
        .extension()
        .is_some_and(|ext| ext.eq_ignore_ascii_case("gz"));
    Ok(if gz {
        Box::new(BufReader::new(MultiGzDecoder::new(file)))
    } else {
        Box::new(BufReader::new(file))
    })
}

/// Parses review tuples in file order. Blank lines are skipped.
pub fn parse_reviews<R: BufRead>(source: R, format: &ReviewFormat) -> Result<Vec<ReviewTuple>> {
    let mut out = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let fields = format.delimiter.split(&line);
        let [user, item, feature, rating, timestamp] = fields[..] else {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 5 fields, found {}", fields.len()),
            });
        };
        if [user, item, feature].iter().any(|f| f.is_empty()) {
            return Err(Error::Parse {
                line: lineno,
                message: "empty identifier".into(),
            });
        }
        let rating: f64 = rating.parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("bad rating {rating:?}"),
        })?;
        if !(0.0..=RATING_MAX).contains(&rating) {
            return Err(Error::validation(
                "rating",
                format!("line {lineno}: {rating} outside [0, 5]"),
            ));
        }
        let timestamp: Timestamp = timestamp.parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("bad timestamp {timestamp:?}"),
        })?;
        if timestamp < 0 {
            return Err(Error::validation(
                "timestamp",
                format!("line {lineno}: negative timestamp {timestamp}"),
            ));
        }
        out.push(ReviewTuple {
            user: user.to_string(),
            item: item.to_string(),
            feature: feature.to_string(),
            rating,
            timestamp,
        });
    }
    Ok(out)
}

pub fn load_reviews(path: &Path, format: &ReviewFormat) -> Result<Vec<ReviewTuple>> {
    parse_reviews(open_text(path)?, format)
}

/// Per-user mean rating over all of the user's tuples.
pub fn user_mean_ratings(tuples: &[ReviewTuple]) -> HashMap<&str, f64> {
    let mut acc: HashMap<&str, (f64, usize)> = HashMap::new();
    for t in tuples {
        let e = acc.entry(t.user.as_str()).or_default();
        e.0 += t.rating;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(u, (sum, n))| (u, sum / n as f64))
        .collect()
}

/// The positive-feedback predicate against a precomputed user mean.
pub fn is_positive(rating: f64, user_mean: f64) -> bool {
    rating >= POSITIVE_RATING_FLOOR && rating >= user_mean
}

/// Keeps tuples with `r >= 2.5` and `r >= mean(user)`, the mean taken over
/// every tuple of the user, and interns the survivors.
pub fn filter_positive(tuples: &[ReviewTuple]) -> Result<(LinkStream, ContentCatalog)> {
    let means = user_mean_ratings(tuples);
    let kept: Vec<&ReviewTuple> = tuples
        .iter()
        .filter(|t| is_positive(t.rating, means[t.user.as_str()]))
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyStream);
    }

    let users = Arc::new(Vocab::from_names(kept.iter().map(|t| t.user.as_str())));
    let items = Arc::new(Vocab::from_names(kept.iter().map(|t| t.item.as_str())));
    let features = Arc::new(Vocab::from_names(kept.iter().map(|t| t.feature.as_str())));

    let mut item_features = vec![Vec::new(); items.len()];
    let links = kept
        .iter()
        .map(|t| {
            let item = items.get(&t.item).unwrap();
            item_features[item as usize].push(FeatureId(features.get(&t.feature).unwrap()));
            Link {
                t: t.timestamp,
                user: UserId(users.get(&t.user).unwrap()),
                item: ItemId(item),
            }
        })
        .collect();

    let stream = LinkStream::new(users, items, links);
    let catalog = ContentCatalog::new(features, item_features)?;
    Ok((stream, catalog))
}

/// Parses `truster trustee` pairs. Self-loops and duplicates are dropped.
pub fn parse_trust<R: BufRead>(source: R, delimiter: Delimiter) -> Result<ExplicitTrustNetwork> {
    let mut net = ExplicitTrustNetwork::default();
    for (idx, line) in source.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let fields = delimiter.split(&line);
        match fields[..] {
            [a, b] if !a.is_empty() && !b.is_empty() => {
                net.insert(a, b);
            }
            _ => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected 2 fields, found {}", fields.len()),
                })
            }
        }
    }
    Ok(net)
}

pub fn load_trust(path: &Path, delimiter: Delimiter) -> Result<ExplicitTrustNetwork> {
    parse_trust(open_text(path)?, delimiter)
}

/// One of the `k + 1` equal-duration evaluation windows. Boundaries are real
/// valued; `end` is exclusive except for the last window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TimeWindow {
    pub index: usize,
    pub start: f64,
    pub end: f64,
    pub closed_right: bool,
}

/// Partition of `[t_min, t_max]` into `k + 1` windows of width
/// `(t_max - t_min + 1) / (k + 1)`. Membership is computed in exact integer
/// arithmetic.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TimeSlicing {
    t_min: Timestamp,
    t_max: Timestamp,
    k: usize,
    degenerate: bool,
}

impl TimeSlicing {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn window_count(&self) -> usize {
        self.k + 1
    }

    /// True when there are fewer distinct timestamps than windows.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    fn span(&self) -> i128 {
        (self.t_max - self.t_min) as i128 + 1
    }

    pub fn windows(&self) -> Vec<TimeWindow> {
        let width = self.span() as f64 / self.window_count() as f64;
        (0..self.window_count())
            .map(|j| TimeWindow {
                index: j,
                start: self.t_min as f64 + j as f64 * width,
                end: if j == self.k {
                    self.t_max as f64
                } else {
                    self.t_min as f64 + (j + 1) as f64 * width
                },
                closed_right: j == self.k,
            })
            .collect()
    }

    /// Window index of `t`, clamped into `0..=k`.
    pub fn window_of(&self, t: Timestamp) -> usize {
        if t <= self.t_min {
            return 0;
        }
        let offset = (t - self.t_min) as i128;
        let j = offset * self.window_count() as i128 / self.span();
        (j as usize).min(self.k)
    }

    /// First integer timestamp of window `j`.
    pub fn first_timestamp(&self, j: usize) -> Timestamp {
        let num = j as i128 * self.span();
        let den = self.window_count() as i128;
        self.t_min + ((num + den - 1) / den) as Timestamp
    }

    /// Last integer timestamp of window `j`.
    pub fn last_timestamp(&self, j: usize) -> Timestamp {
        if j >= self.k {
            self.t_max
        } else {
            self.first_timestamp(j + 1) - 1
        }
    }
}

/// Splits the stream interval into `k + 1` windows of equal duration.
pub fn slice_time(stream: &LinkStream, k: usize) -> Result<TimeSlicing> {
    if k == 0 {
        return Err(Error::validation("k", "must be at least 1"));
    }
    if stream.t_max() <= stream.t_min() {
        return Err(Error::validation(
            "stream",
            format!(
                "time slicing needs t_max > t_min (got [{}, {}])",
                stream.t_min(),
                stream.t_max()
            ),
        ));
    }
    let degenerate = stream.distinct_timestamps() < k + 1;
    if degenerate {
        log::warn!(
            "only {} distinct timestamps for {} windows",
            stream.distinct_timestamps(),
            k + 1
        );
    }
    Ok(TimeSlicing {
        t_min: stream.t_min(),
        t_max: stream.t_max(),
        k,
        degenerate,
    })
}
