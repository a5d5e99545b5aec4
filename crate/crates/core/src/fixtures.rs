//! Small datasets for tests, examples and smoke runs.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::stream::{
    filter_positive, is_positive, user_mean_ratings, ContentCatalog, ExplicitTrustNetwork,
    LinkStream, ReviewTuple,
};

/// Two users and four items observed over `t = 1..=6`.
pub const GUIDING_LINKS: [(i64, &str, &str); 8] = [
    (1, "u1", "i1"),
    (1, "u2", "i3"),
    (2, "u1", "i2"),
    (2, "u2", "i3"),
    (3, "u2", "i4"),
    (4, "u1", "i3"),
    (5, "u2", "i4"),
    (6, "u1", "i2"),
];

pub fn guiding_stream() -> LinkStream {
    LinkStream::from_triples(&GUIDING_LINKS)
}

/// `g(i1) = g(i2) = {c1}`, `g(i3) = g(i4) = {c2}`.
pub fn guiding_catalog(stream: &LinkStream) -> ContentCatalog {
    ContentCatalog::from_pairs(
        stream.items(),
        &[("i1", "c1"), ("i2", "c1"), ("i3", "c2"), ("i4", "c2")],
    )
    .expect("guiding catalog is consistent")
}

/// The guiding example as review tuples, every rating 5, feature per the
/// guiding catalog.
pub fn guiding_reviews() -> Vec<ReviewTuple> {
    GUIDING_LINKS
        .iter()
        .map(|&(t, u, i)| ReviewTuple {
            user: u.into(),
            item: i.into(),
            feature: if matches!(i, "i1" | "i2") { "c1" } else { "c2" }.into(),
            rating: 5.0,
            timestamp: t,
        })
        .collect()
}

/// Shape of a generated dataset.
#[derive(Clone, Copy, Debug)]
pub struct SyntheticSpec {
    pub links: usize,
    pub users: usize,
    pub items: usize,
    pub features: usize,
    /// Timestamps are drawn from `0..span`.
    pub span: i64,
    pub trust_per_user: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            links: 500,
            users: 40,
            items: 120,
            features: 6,
            span: 400 * 86_400,
            trust_per_user: 3,
            seed: 7,
        }
    }
}

/// Review tuples where each user favours one feature and item popularity
/// is skewed. Off-taste items get lower ratings, so most of them fall to
/// the positive-feedback filter.
pub fn synthetic_reviews(spec: &SyntheticSpec) -> Vec<ReviewTuple> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let item_feature: Vec<usize> = (0..spec.items).map(|i| i % spec.features).collect();
    let user_taste: Vec<usize> = (0..spec.users)
        .map(|_| rng.gen_range(0..spec.features))
        .collect();

    let mut tuples = Vec::with_capacity(spec.links);
    for _ in 0..spec.links {
        let u = rng.gen_range(0..spec.users);
        // skewed popularity: square of a uniform draw favours low item ids
        let item = loop {
            let x: f64 = rng.gen();
            let cand = ((x * x) * spec.items as f64) as usize;
            if item_feature[cand] == user_taste[u] || rng.gen_bool(0.3) {
                break cand;
            }
        };
        let rating = if item_feature[item] == user_taste[u] {
            rng.gen_range(4..=5) as f64
        } else {
            rng.gen_range(2..=4) as f64
        };
        tuples.push(ReviewTuple {
            user: format!("u{u:03}"),
            item: format!("i{item:04}"),
            feature: format!("c{}", item_feature[item]),
            rating,
            timestamp: rng.gen_range(0..spec.span),
        });
    }
    tuples
}

/// Each user trusts a few random others, biased toward shared taste.
pub fn synthetic_trust(spec: &SyntheticSpec) -> ExplicitTrustNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x7275_7374);
    let mut net = ExplicitTrustNetwork::default();
    let mut others: Vec<usize> = (0..spec.users).collect();
    for u in 0..spec.users {
        others.shuffle(&mut rng);
        for &v in others.iter().filter(|&&v| v != u).take(spec.trust_per_user) {
            net.insert(&format!("u{u:03}"), &format!("u{v:03}"));
        }
    }
    net
}

/// Review tuples whose positive-feedback filter leaves exactly
/// `spec.links` links. Extra tuples are drawn until enough survive; the
/// earliest `spec.links` survivors are rated 5 and every other tuple 1.
pub fn synthetic_stream_reviews(spec: &SyntheticSpec) -> Vec<ReviewTuple> {
    let mut draw = *spec;
    draw.links = spec.links * 2;
    loop {
        let reviews = synthetic_reviews(&draw);
        let means = user_mean_ratings(&reviews);
        let (mut positive, negative): (Vec<ReviewTuple>, Vec<ReviewTuple>) = reviews
            .iter()
            .cloned()
            .partition(|t| is_positive(t.rating, means[t.user.as_str()]));
        positive
            .sort_by(|a, b| (a.timestamp, &a.user, &a.item).cmp(&(b.timestamp, &b.user, &b.item)));
        positive
            .dedup_by(|a, b| (a.timestamp, &a.user, &a.item) == (b.timestamp, &b.user, &b.item));
        if positive.len() >= spec.links {
            let rest = positive.split_off(spec.links);
            let mut out: Vec<ReviewTuple> = positive
                .into_iter()
                .map(|t| ReviewTuple { rating: 5.0, ..t })
                .collect();
            out.extend(
                negative
                    .into_iter()
                    .chain(rest)
                    .map(|t| ReviewTuple { rating: 1.0, ..t }),
            );
            return out;
        }
        draw.links *= 2;
    }
}

/// The filtered form of [`synthetic_stream_reviews`] plus a trust network.
pub fn synthetic_dataset(
    spec: &SyntheticSpec,
) -> (LinkStream, ContentCatalog, ExplicitTrustNetwork) {
    let (stream, catalog) = filter_positive(&synthetic_stream_reviews(spec))
        .expect("synthetic data has positive links");
    (stream, catalog, synthetic_trust(spec))
}

/// Writes tuples in the whitespace-separated review format.
pub fn write_reviews(path: &Path, tuples: &[ReviewTuple]) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for t in tuples {
        writeln!(
            out,
            "{} {} {} {} {}",
            t.user, t.item, t.feature, t.rating, t.timestamp
        )?;
    }
    out.flush()
}

/// Writes `truster trustee` lines.
pub fn write_trust(path: &Path, network: &ExplicitTrustNetwork) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for (u, trusted) in network.iter() {
        for v in trusted {
            writeln!(out, "{u} {v}")?;
        }
    }
    out.flush()
}
