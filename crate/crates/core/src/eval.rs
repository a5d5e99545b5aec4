//! Top-N metrics, the time-sliced evaluation protocol and random search.
//!
//! The stream interval is cut into `k + 1` equal windows. Round `j` trains
//! on windows `0..=j` and tests on window `j + 1`, over the users who pick
//! at least one item there that they never picked during training. Each
//! metric keeps a numerator and a denominator per round; the time-averaged
//! value is the ratio of their sums.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ppr::{mpi_rank, top_n, PprSettings, DAY};
use crate::recommender::Recommender;
use crate::stream::{
    slice_time, ContentCatalog, ExplicitTrustNetwork, ItemId, LinkStream, Timestamp, UserId,
};

/// A numerator / denominator pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: f64,
    pub deno: f64,
}

impl Ratio {
    pub fn new(num: f64, deno: f64) -> Self {
        Ratio { num, deno }
    }

    /// `num / deno`, 0 for an empty denominator.
    pub fn value(&self) -> f64 {
        if self.deno > 0.0 {
            self.num / self.deno
        } else {
            0.0
        }
    }
}

impl std::ops::AddAssign for Ratio {
    fn add_assign(&mut self, rhs: Ratio) {
        self.num += rhs.num;
        self.deno += rhs.deno;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "F")]
    F1,
    #[serde(rename = "H")]
    Hit,
    #[serde(rename = "M")]
    Map,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::F1, Metric::Hit, Metric::Map];
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::F1 => "F",
            Metric::Hit => "H",
            Metric::Map => "M",
        })
    }
}

/// Metric at a list length, written `F@10`, `H@20`, `M@5`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Objective {
    pub metric: Metric,
    pub n: usize,
}

impl Default for Objective {
    fn default() -> Self {
        Objective {
            metric: Metric::F1,
            n: 10,
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.metric, self.n)
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::validation("objective", format!("expected e.g. F@10, got {s:?}"));
        let (m, n) = s.split_once('@').ok_or_else(bad)?;
        let metric = match m.to_ascii_uppercase().as_str() {
            "F" | "F1" => Metric::F1,
            "H" | "HR" => Metric::Hit,
            "M" | "MAP" => Metric::Map,
            _ => return Err(bad()),
        };
        let n = n.parse().map_err(|_| bad())?;
        if n == 0 {
            return Err(bad());
        }
        Ok(Objective { metric, n })
    }
}

/// `(2 hit, I_new + N)`.
pub fn f1_contrib(hit: usize, i_new: usize, n: usize) -> Result<Ratio> {
    if i_new == 0 {
        return Err(Error::validation(
            "i_new",
            "users without new items are not evaluated",
        ));
    }
    if hit > n.min(i_new) {
        return Err(Error::validation(
            "hit",
            format!("{hit} hits exceed min(N = {n}, I_new = {i_new})"),
        ));
    }
    Ok(Ratio::new(2.0 * hit as f64, (i_new + n) as f64))
}

pub fn hit_contrib(hit: usize) -> Ratio {
    Ratio::new(if hit > 0 { 1.0 } else { 0.0 }, 1.0)
}

/// Average precision over a hit/miss list; 0 when there is no hit. The sum
/// is kept as an integer fraction while it fits in 53 bits, so the result
/// is the correctly rounded rational.
pub fn ap_contrib(hits: &[bool]) -> Ratio {
    const EXACT: u64 = 1 << 53;
    let mut found = 0u64;
    let mut sum = 0.0;
    let mut exact = Some((0u64, 1u64));
    for (k, &h) in hits.iter().enumerate() {
        if !h {
            continue;
        }
        found += 1;
        let rank = k as u64 + 1;
        sum += found as f64 / rank as f64;
        exact = exact.and_then(|(num, den)| {
            let l = den.checked_mul(rank / gcd(den, rank))?;
            let num = num
                .checked_mul(l / den)?
                .checked_add(found.checked_mul(l / rank)?)?;
            let g = gcd(num, l);
            Some((num / g, l / g))
        });
    }
    if found == 0 {
        return Ratio::new(0.0, 1.0);
    }
    let ap = match exact.and_then(|(num, den)| Some((num, den.checked_mul(found)?))) {
        Some((num, den)) if num < EXACT && den < EXACT => num as f64 / den as f64,
        _ => sum / found as f64,
    };
    Ratio::new(ap, 1.0)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Per-round pairs for the three metrics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SliceMetrics {
    pub f1: Ratio,
    pub hit: Ratio,
    pub map: Ratio,
}

impl SliceMetrics {
    pub fn get(&self, metric: Metric) -> Ratio {
        match metric {
            Metric::F1 => self.f1,
            Metric::Hit => self.hit,
            Metric::Map => self.map,
        }
    }

    fn add_user(&mut self, hits: &[bool], i_new: usize, n: usize) -> Result<()> {
        let hit = hits.iter().filter(|&&h| h).count();
        self.f1 += f1_contrib(hit, i_new, n)?;
        self.hit += hit_contrib(hit);
        self.map += ap_contrib(hits);
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub f1: f64,
    pub hit: f64,
    pub map: f64,
}

impl Scores {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::F1 => self.f1,
            Metric::Hit => self.hit,
            Metric::Map => self.map,
        }
    }
}

/// Accumulates rounds and yields time-averaged values.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricAccumulator {
    pub slices: Vec<SliceMetrics>,
}

impl MetricAccumulator {
    pub fn push(&mut self, slice: SliceMetrics) {
        self.slices.push(slice);
    }

    pub fn total(&self, metric: Metric) -> Ratio {
        let mut acc = Ratio::default();
        for s in &self.slices {
            acc += s.get(metric);
        }
        acc
    }

    /// Sum of numerators over sum of denominators.
    pub fn ta(&self, metric: Metric) -> f64 {
        self.total(metric).value()
    }

    pub fn scores(&self) -> Scores {
        Scores {
            f1: self.ta(Metric::F1),
            hit: self.ta(Metric::Hit),
            map: self.ta(Metric::Map),
        }
    }
}

/// What produces the ranked lists.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "ranker")]
pub enum Ranker {
    #[serde(rename = "ppr")]
    Ppr(PprSettings),
    /// Most popular items in the training window.
    #[serde(rename = "mpi")]
    Mpi,
}

/// Bookkeeping for one evaluation round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundInfo {
    pub round: usize,
    /// Last training timestamp; edge ages are measured from here.
    pub train_end: Timestamp,
    pub test_start: Timestamp,
    pub test_end: Timestamp,
    pub train_links: usize,
    pub evaluated_users: usize,
    /// Users ranked by popularity because they had no restart node.
    pub cold_users: usize,
    pub nonconverged: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ranker: Ranker,
    pub k: usize,
    pub rounds: Vec<RoundInfo>,
    /// Accumulator per list length.
    pub by_cutoff: BTreeMap<usize, MetricAccumulator>,
}

impl EvalReport {
    pub fn scores(&self, n: usize) -> Option<Scores> {
        self.by_cutoff.get(&n).map(MetricAccumulator::scores)
    }

    pub fn objective(&self, objective: &Objective) -> f64 {
        self.by_cutoff
            .get(&objective.n)
            .map_or(0.0, |acc| acc.ta(objective.metric))
    }

    pub fn evaluated_users(&self) -> usize {
        self.rounds.iter().map(|r| r.evaluated_users).sum()
    }

    pub fn cold_users(&self) -> usize {
        self.rounds.iter().map(|r| r.cold_users).sum()
    }
}

/// Evaluates one PageRank configuration at its own list length.
pub fn evaluate(
    stream: &LinkStream,
    catalog: &ContentCatalog,
    explicit: Option<&ExplicitTrustNetwork>,
    settings: &PprSettings,
    k: usize,
) -> Result<EvalReport> {
    evaluate_ranker(
        stream,
        catalog,
        explicit,
        &Ranker::Ppr(*settings),
        k,
        &[settings.n],
    )
}

struct UserOutcome {
    hits: Vec<bool>,
    i_new: usize,
    cold: bool,
    converged: bool,
}

/// Runs the `k`-round protocol, scoring every list length in `cutoffs` from
/// one ranking per user.
pub fn evaluate_ranker(
    stream: &LinkStream,
    catalog: &ContentCatalog,
    explicit: Option<&ExplicitTrustNetwork>,
    ranker: &Ranker,
    k: usize,
    cutoffs: &[usize],
) -> Result<EvalReport> {
    if let Ranker::Ppr(s) = ranker {
        s.validate()?;
    }
    let cutoffs: BTreeSet<usize> = cutoffs.iter().copied().collect();
    let Some(&max_n) = cutoffs.iter().next_back() else {
        return Err(Error::validation(
            "n",
            "at least one list length is required",
        ));
    };
    if cutoffs.contains(&0) {
        return Err(Error::validation("n", "list lengths must be positive"));
    }
    let slicing = slice_time(stream, k)?;

    let mut rounds = Vec::with_capacity(k);
    let mut by_cutoff: BTreeMap<usize, MetricAccumulator> = cutoffs
        .iter()
        .map(|&n| (n, MetricAccumulator::default()))
        .collect();

    for j in 0..k {
        let now = slicing.last_timestamp(j);
        let train = stream.window(stream.t_min(), now);
        let test = stream.window(
            slicing.first_timestamp(j + 1),
            slicing.last_timestamp(j + 1),
        );
        let history = train.user_items();
        let empty = BTreeSet::new();

        // users with at least one item never selected during training
        let targets: Vec<(UserId, BTreeSet<ItemId>)> = test
            .user_items()
            .into_iter()
            .filter_map(|(u, items)| {
                let seen = history.get(&u).unwrap_or(&empty);
                let fresh: BTreeSet<ItemId> = items.difference(seen).copied().collect();
                (!fresh.is_empty()).then_some((u, fresh))
            })
            .collect();

        let mut info = RoundInfo {
            round: j + 1,
            train_end: now,
            test_start: slicing.first_timestamp(j + 1),
            test_end: slicing.last_timestamp(j + 1),
            train_links: train.len(),
            evaluated_users: targets.len(),
            cold_users: 0,
            nonconverged: 0,
        };

        let mut slice: BTreeMap<usize, SliceMetrics> = cutoffs
            .iter()
            .map(|&n| (n, SliceMetrics::default()))
            .collect();
        if !targets.is_empty() {
            let recommender = match ranker {
                Ranker::Ppr(settings) => Some(Recommender::build(
                    &train, catalog, explicit, settings, now,
                )?),
                Ranker::Mpi => None,
            };
            let outcomes: Vec<UserOutcome> = targets
                .par_iter()
                .map(|(u, fresh)| {
                    let seen = history.get(u).unwrap_or(&empty);
                    let (list, cold, converged) = match &recommender {
                        Some(rec) => match rec.rank(*u) {
                            Ok(pr) => (
                                top_n(&pr.scores, rec.graph(), seen, max_n),
                                false,
                                pr.converged,
                            ),
                            Err(Error::ColdUser(_)) => (mpi_rank(&train, seen, max_n), true, true),
                            Err(e) => return Err(e),
                        },
                        None => (mpi_rank(&train, seen, max_n), false, true),
                    };
                    Ok(UserOutcome {
                        hits: list.iter().map(|(i, _)| fresh.contains(i)).collect(),
                        i_new: fresh.len(),
                        cold,
                        converged,
                    })
                })
                .collect::<Result<_>>()?;

            for o in &outcomes {
                info.cold_users += o.cold as usize;
                info.nonconverged += (!o.converged) as usize;
                for (&n, metrics) in slice.iter_mut() {
                    let mut hits = o.hits.clone();
                    hits.resize(n, false);
                    metrics.add_user(&hits[..n], o.i_new, n)?;
                }
            }
        }
        for (n, metrics) in slice {
            by_cutoff.get_mut(&n).unwrap().push(metrics);
        }
        if info.nonconverged > 0 {
            log::warn!(
                "round {}: {} users did not converge within the iteration budget",
                info.round,
                info.nonconverged
            );
        }
        rounds.push(info);
    }

    if rounds.iter().all(|r| r.evaluated_users == 0) {
        return Err(Error::EmptyEvaluation);
    }
    Ok(EvalReport {
        ranker: *ranker,
        k,
        rounds,
        by_cutoff,
    })
}

/// Candidate values per tunable. Durations are in days and `ldf_k` is per
/// day; [`SearchSpace::apply`] converts them to timestamp units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub delta: Vec<f64>,
    pub beta: Vec<f64>,
    pub tau0: Vec<f64>,
    pub ldf_k: Vec<f64>,
    pub gamma: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        let days = vec![7.0, 30.0, 90.0, 180.0, 365.0, 540.0, 730.0];
        let weights = vec![0.05, 0.1, 0.15, 0.3, 0.5, 0.7, 0.9];
        SearchSpace {
            delta: days.clone(),
            beta: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            tau0: days,
            ldf_k: vec![0.1, 0.5, 1.0, 5.0, 10.0, 50.0, 100.0],
            gamma: weights.clone(),
            alpha: weights,
        }
    }
}

/// One point of a [`SearchSpace`], in the space's units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchPoint {
    pub delta: f64,
    pub beta: f64,
    pub tau0: f64,
    pub ldf_k: f64,
    pub gamma: f64,
    pub alpha: f64,
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        for (name, values) in [
            ("delta", &self.delta),
            ("beta", &self.beta),
            ("tau0", &self.tau0),
            ("ldf_k", &self.ldf_k),
            ("gamma", &self.gamma),
            ("alpha", &self.alpha),
        ] {
            if values.is_empty() {
                return Err(Error::validation(name, "search space list is empty"));
            }
        }
        Ok(())
    }

    /// Draws each parameter independently and uniformly.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> SearchPoint {
        let mut pick = |v: &[f64]| v[rng.gen_range(0..v.len())];
        SearchPoint {
            delta: pick(&self.delta),
            beta: pick(&self.beta),
            tau0: pick(&self.tau0),
            ldf_k: pick(&self.ldf_k),
            gamma: pick(&self.gamma),
            alpha: pick(&self.alpha),
        }
    }
}

impl SearchPoint {
    /// Writes the point into `base`; `day` is the length of a day in
    /// timestamp units.
    pub fn apply(&self, base: &PprSettings, day: f64) -> PprSettings {
        PprSettings {
            delta: self.delta * day,
            beta: self.beta,
            tau0: self.tau0 * day,
            ldf_k: self.ldf_k / day,
            gamma: self.gamma,
            alpha: self.alpha,
            ..*base
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOptions {
    pub n_samples: usize,
    pub seed: u64,
    pub objective: Objective,
    /// Day length in timestamp units.
    pub day: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            n_samples: 50,
            seed: 42,
            objective: Objective::default(),
            day: DAY,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub trial: usize,
    pub point: SearchPoint,
    pub settings: PprSettings,
    pub objective: f64,
    pub report: EvalReport,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub best: usize,
    pub trials: Vec<Trial>,
    /// Wall-clock milliseconds per trial (0 for repeats served from cache).
    pub wall_ms: Vec<u128>,
}

impl SearchOutcome {
    pub fn best_trial(&self) -> &Trial {
        &self.trials[self.best]
    }
}

/// Bit pattern of the parameters `settings` actually reads, so that draws
/// differing only in unused parameters share one evaluation.
fn effective_key(s: &PprSettings) -> Vec<u64> {
    use crate::graph::GraphKind;
    use crate::ppr::DecayKind;
    use crate::trust::TrustKind;
    let mut key = vec![s.alpha.to_bits()];
    if s.graph == GraphKind::Stg {
        key.extend([s.delta.to_bits(), s.beta.to_bits()]);
    }
    match s.decay {
        DecayKind::None => {}
        DecayKind::Edf => key.push(s.tau0.to_bits()),
        DecayKind::Ldf => key.extend([s.tau0.to_bits(), s.ldf_k.to_bits()]),
    }
    if s.trust != TrustKind::None {
        key.push(s.gamma.to_bits());
    }
    key
}

/// Randomized search: `n_samples` draws from `space` applied to `base`,
/// deterministic under `options.seed`. The best trial maximizes the
/// objective; ties keep the earliest.
#[allow(clippy::too_many_arguments)]
pub fn random_search(
    stream: &LinkStream,
    catalog: &ContentCatalog,
    explicit: Option<&ExplicitTrustNetwork>,
    base: &PprSettings,
    space: &SearchSpace,
    options: &SearchOptions,
    k: usize,
    cutoffs: &[usize],
) -> Result<SearchOutcome> {
    if options.n_samples == 0 {
        return Err(Error::validation("n_samples", "must be at least 1"));
    }
    space.validate()?;
    let mut cutoffs = cutoffs.to_vec();
    if !cutoffs.contains(&options.objective.n) {
        cutoffs.push(options.objective.n);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut cache: HashMap<Vec<u64>, EvalReport> = HashMap::new();
    let mut trials = Vec::with_capacity(options.n_samples);
    let mut wall_ms = Vec::with_capacity(options.n_samples);
    for trial in 0..options.n_samples {
        let point = space.sample(&mut rng);
        let settings = point.apply(base, options.day);
        let key = effective_key(&settings);
        let started = Instant::now();
        let report = match cache.get(&key) {
            Some(r) => r.clone(),
            None => {
                let r = evaluate_ranker(
                    stream,
                    catalog,
                    explicit,
                    &Ranker::Ppr(settings),
                    k,
                    &cutoffs,
                )?;
                cache.insert(key, r.clone());
                r
            }
        };
        wall_ms.push(started.elapsed().as_millis());
        let objective = report.objective(&options.objective);
        log::info!("trial {trial}: {} = {objective:.5}", options.objective);
        trials.push(Trial {
            trial,
            point,
            settings,
            objective,
            report,
        });
    }
    let best = trials.iter().enumerate().fold(0, |best, (i, t)| {
        if t.objective > trials[best].objective {
            i
        } else {
            best
        }
    });
    Ok(SearchOutcome {
        best,
        trials,
        wall_ms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_examples() {
        let r = f1_contrib(1, 3, 10).unwrap();
        assert_eq!((r.num, r.deno), (2.0, 13.0));
        assert_eq!(r.value(), 2.0 / 13.0);
        assert_eq!(f1_contrib(0, 4, 10).unwrap(), Ratio::new(0.0, 14.0));
        assert_eq!(f1_contrib(5, 5, 5).unwrap().value(), 1.0);
        assert!(f1_contrib(0, 0, 10).is_err());
        assert!(f1_contrib(4, 3, 10).is_err());
    }

    #[test]
    fn hit_ratio_examples() {
        let mut acc = Ratio::default();
        for hits in [1, 0, 2, 0] {
            acc += hit_contrib(hits);
        }
        assert_eq!(acc.value(), 0.5);
    }

    #[test]
    fn average_precision_examples() {
        assert_eq!(
            ap_contrib(&[true, false, true, false, false]).num,
            5.0 / 6.0
        );
        assert_eq!(ap_contrib(&[false; 5]).num, 0.0);
        let mut last = [false; 8];
        last[7] = true;
        assert_eq!(ap_contrib(&last).num, 1.0 / 8.0);
    }

    #[test]
    fn long_lists_fall_back_to_float_sum() {
        assert_eq!(ap_contrib(&[true; 100]).num, 1.0);
        let mut hits = [false; 97];
        for i in (0..97).step_by(3) {
            hits[i] = true;
        }
        let mut found = 0.0;
        let mut sum = 0.0;
        for (k, &h) in hits.iter().enumerate() {
            if h {
                found += 1.0;
                sum += found / (k + 1) as f64;
            }
        }
        assert!((ap_contrib(&hits).num - sum / found).abs() < 1e-15);
    }

    #[test]
    fn ta_is_ratio_of_sums() {
        let mut acc = MetricAccumulator::default();
        acc.push(SliceMetrics {
            f1: Ratio::new(2.0, 13.0),
            ..Default::default()
        });
        acc.push(SliceMetrics {
            f1: Ratio::new(4.0, 13.0),
            ..Default::default()
        });
        assert_eq!(acc.ta(Metric::F1), 6.0 / 26.0);
    }

    #[test]
    fn objective_parsing() {
        let o: Objective = "M@20".parse().unwrap();
        assert_eq!(
            o,
            Objective {
                metric: Metric::Map,
                n: 20
            }
        );
        assert_eq!(o.to_string(), "M@20");
        assert!("X@3".parse::<Objective>().is_err());
        assert!("F@0".parse::<Objective>().is_err());
    }

    #[test]
    fn degenerate_space_yields_one_setting() {
        let space = SearchSpace {
            delta: vec![7.0],
            beta: vec![0.5],
            tau0: vec![30.0],
            ldf_k: vec![1.0],
            gamma: vec![0.3],
            alpha: vec![0.7],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let first = space.sample(&mut rng);
        for _ in 0..20 {
            assert_eq!(space.sample(&mut rng), first);
        }
    }
}
