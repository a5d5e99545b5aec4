//! Command-line front end: configuration, dataset loading, the `run`,
//! `tune`, `matrix` and `inspect-graph` commands and their report files.
//!
//! Configuration is layered: built-in defaults, then an optional TOML file
//! (`--config`), then command-line flags.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::enrich::{attach_content, effective_weights, ContentMode};
use crate::error::{Error, Result};
use crate::eval::{
    evaluate_ranker, random_search, EvalReport, Metric, Objective, Ranker, SearchOptions,
    SearchOutcome, SearchSpace,
};
use crate::graph::{self, GraphKind};
use crate::ppr::{combo_label, DecayKind, PprSettings};
use crate::recommender::Recommender;
use crate::stream::{
    filter_positive, load_reviews, load_trust, ContentCatalog, Delimiter, ExplicitTrustNetwork,
    LinkStream, ReviewFormat, ReviewTuple,
};
use crate::trust::TrustKind;

/// Environment variable holding the worker thread count.
pub const WORKERS_ENV: &str = "GRAPHREC_WORKERS";

/// Column order of `summary.csv` and `matrix.csv`.
pub const SUMMARY_COLUMNS: &str = "graph,content,decay,trust,n,F,H,M,F_num,F_deno,H_num,H_deno,M_num,M_deno,evaluated_users,cold_users";

const REPORT_HELP: &str = "\
Reports (written to --output):
  summary.csv    graph,content,decay,trust,n,F,H,M,F_num,F_deno,H_num,H_deno,M_num,M_deno,evaluated_users,cold_users
  detail.jsonl   header record, then one record per evaluation round
  trials.jsonl   header record, then one record per search trial (tune)
  timings.jsonl  wall time per trial (tune)
  best.json      best trial settings and scores (tune)
  matrix.csv     summary.csv columns, one row per graph x combination x N, MPI rows last
  matrix_top<N>.csv  combination,F:BIP,F:STG,F:LSG,H:BIP,H:STG,H:LSG,M:BIP,M:STG,M:LSG
Set GRAPHREC_WORKERS to bound the worker threads.";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub n_samples: usize,
    pub seed: u64,
    pub objective: String,
    pub space: SearchSpace,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            n_samples: 50,
            seed: 42,
            objective: "F@10".into(),
            space: SearchSpace::default(),
        }
    }
}

/// Everything one invocation needs. Durations are in days; `day_seconds`
/// converts them to timestamp units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub reviews: Option<PathBuf>,
    pub trust_file: Option<PathBuf>,
    pub delimiter: String,
    /// Not part of the recorded provenance.
    #[serde(skip_serializing)]
    pub output: PathBuf,
    pub graph: GraphKind,
    pub content: ContentMode,
    pub decay: DecayKind,
    pub trust: TrustKind,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta_days: f64,
    pub tau0_days: f64,
    /// Logistic slope per day.
    pub ldf_k: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub min_overlap: usize,
    pub n: Vec<usize>,
    pub k: usize,
    pub day_seconds: f64,
    pub search: SearchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = PprSettings::default();
        RunConfig {
            reviews: None,
            trust_file: None,
            delimiter: "whitespace".into(),
            output: PathBuf::from("out"),
            graph: s.graph,
            content: s.content,
            decay: s.decay,
            trust: s.trust,
            alpha: s.alpha,
            beta: s.beta,
            gamma: s.gamma,
            delta_days: 30.0,
            tau0_days: 90.0,
            ldf_k: 0.5,
            tol: s.tol,
            max_iter: s.max_iter,
            min_overlap: s.min_overlap,
            n: vec![10],
            k: 7,
            day_seconds: crate::ppr::DAY,
            search: SearchConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn delimiter(&self) -> Result<Delimiter> {
        self.delimiter.parse()
    }

    pub fn objective(&self) -> Result<Objective> {
        self.search.objective.parse()
    }

    /// Settings in timestamp units; `n` is the largest requested length.
    pub fn settings(&self) -> PprSettings {
        PprSettings {
            graph: self.graph,
            content: self.content,
            decay: self.decay,
            trust: self.trust,
            delta: self.delta_days * self.day_seconds,
            beta: self.beta,
            gamma: self.gamma,
            alpha: self.alpha,
            tau0: self.tau0_days * self.day_seconds,
            ldf_k: self.ldf_k / self.day_seconds,
            tol: self.tol,
            max_iter: self.max_iter,
            n: self.n.iter().copied().max().unwrap_or(10),
            min_overlap: self.min_overlap,
        }
    }

    pub fn search_options(&self) -> Result<SearchOptions> {
        Ok(SearchOptions {
            n_samples: self.search.n_samples,
            seed: self.search.seed,
            objective: self.objective()?,
            day: self.day_seconds,
        })
    }

    /// Range and presence checks; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        let reviews = self
            .reviews
            .as_ref()
            .ok_or_else(|| Error::validation("reviews", "a review file is required"))?;
        for path in std::iter::once(reviews).chain(self.trust_file.as_ref()) {
            if !path.exists() {
                return Err(Error::io(
                    path,
                    io::Error::new(io::ErrorKind::NotFound, "file not found"),
                ));
            }
        }
        if self.trust == TrustKind::Et && self.trust_file.is_none() {
            return Err(Error::validation(
                "trust_file",
                "explicit trust needs a trust file",
            ));
        }
        if self.n.is_empty() || self.n.contains(&0) {
            return Err(Error::validation("n", "list lengths must be positive"));
        }
        if self.k == 0 {
            return Err(Error::validation("k", "must be at least 1"));
        }
        if self.day_seconds.is_nan() || self.day_seconds <= 0.0 {
            return Err(Error::validation("day_seconds", "must be positive"));
        }
        self.delimiter()?;
        self.objective()?;
        self.search.space.validate()?;
        self.settings().validate()
    }
}

/// Command-line overrides, one per [`RunConfig`] field.
#[derive(Args, Clone, Debug, Default)]
pub struct ConfigArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Review file: user item feature rating timestamp (optionally .gz).
    #[arg(long)]
    pub reviews: Option<PathBuf>,
    /// Trust file: truster trustee (optionally .gz).
    #[arg(long)]
    pub trust_file: Option<PathBuf>,
    /// Field separator: whitespace, tab, comma or a single character.
    #[arg(long)]
    pub delimiter: Option<String>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// BIP, STG or LSG.
    #[arg(long)]
    pub graph: Option<GraphKind>,
    /// None, CI or CIU.
    #[arg(long)]
    pub content: Option<ContentMode>,
    /// None, EDF or LDF.
    #[arg(long)]
    pub decay: Option<DecayKind>,
    /// None, ET or IT.
    #[arg(long)]
    pub trust: Option<TrustKind>,
    /// Damping factor in (0, 1).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// STG long-term preference in [0, 1].
    #[arg(long)]
    pub beta: Option<f64>,
    /// Trusted-user influence in [0, 1].
    #[arg(long)]
    pub gamma: Option<f64>,
    /// STG session length in days.
    #[arg(long)]
    pub delta_days: Option<f64>,
    /// Decay half-life (EDF) or midpoint (LDF) in days.
    #[arg(long)]
    pub tau0_days: Option<f64>,
    /// LDF slope per day.
    #[arg(long)]
    pub ldf_k: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Minimum shared items for implicit trust.
    #[arg(long)]
    pub min_overlap: Option<usize>,
    /// Recommendation list lengths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Evaluation rounds (the interval is cut into k + 1 windows).
    #[arg(long)]
    pub k: Option<usize>,
    /// Timestamp units per day (86400 for Unix seconds).
    #[arg(long)]
    pub day_seconds: Option<f64>,
    /// Random search: number of draws.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Model-selection objective, e.g. F@10, H@20, M@10.
    #[arg(long)]
    pub objective: Option<String>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_toml_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = &self.$field { $target = v.clone(); })*
            };
        }
        if let Some(p) = &self.reviews {
            cfg.reviews = Some(p.clone());
        }
        if let Some(p) = &self.trust_file {
            cfg.trust_file = Some(p.clone());
        }
        set!(
            delimiter => cfg.delimiter,
            output => cfg.output,
            graph => cfg.graph,
            content => cfg.content,
            decay => cfg.decay,
            trust => cfg.trust,
            alpha => cfg.alpha,
            beta => cfg.beta,
            gamma => cfg.gamma,
            delta_days => cfg.delta_days,
            tau0_days => cfg.tau0_days,
            ldf_k => cfg.ldf_k,
            tol => cfg.tol,
            max_iter => cfg.max_iter,
            min_overlap => cfg.min_overlap,
            n => cfg.n,
            k => cfg.k,
            day_seconds => cfg.day_seconds,
            samples => cfg.search.n_samples,
            seed => cfg.search.seed,
            objective => cfg.search.objective,
        );
        Ok(cfg)
    }
}

#[derive(Parser, Debug)]
#[command(name = "graphrec", version, about = "Graph-based top-N recommendation experiments", after_help = REPORT_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate one configuration.
    Run(ConfigArgs),
    /// Randomized parameter search for one configuration.
    Tune(ConfigArgs),
    /// Evaluate all 27 side-information combinations per graph kind.
    Matrix(MatrixArgs),
    /// Dump a graph as an edge list, optionally with per-user rankings.
    InspectGraph(InspectArgs),
}

#[derive(Args, Debug)]
pub struct MatrixArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Graph kinds to include, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = GraphKind::ALL.to_vec())]
    pub graphs: Vec<GraphKind>,
    /// Tune every cell by random search instead of using fixed parameters.
    #[arg(long)]
    pub tune: bool,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Keep links up to this timestamp (default: all).
    #[arg(long)]
    pub until: Option<i64>,
    /// Edge-list destination (default: stdout).
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// Also write `user rank item score` lines for every active user.
    #[arg(long)]
    pub rankings: Option<PathBuf>,
}

/// Counts over the raw review tuples, before filtering.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RawStats {
    pub tuples: usize,
    pub users: usize,
    pub items: usize,
    pub features: usize,
}

impl RawStats {
    pub fn of(tuples: &[ReviewTuple]) -> Self {
        use std::collections::HashSet;
        let distinct =
            |f: fn(&ReviewTuple) -> &str| tuples.iter().map(f).collect::<HashSet<_>>().len();
        RawStats {
            tuples: tuples.len(),
            users: distinct(|t| &t.user),
            items: distinct(|t| &t.item),
            features: distinct(|t| &t.feature),
        }
    }
}

pub struct Dataset {
    pub raw: RawStats,
    pub stream: LinkStream,
    pub catalog: ContentCatalog,
    pub trust: Option<ExplicitTrustNetwork>,
}

pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let reviews_path = cfg
        .reviews
        .as_ref()
        .ok_or_else(|| Error::validation("reviews", "a review file is required"))?;
    let delimiter = cfg.delimiter()?;
    let tuples = load_reviews(reviews_path, &ReviewFormat { delimiter })?;
    let raw = RawStats::of(&tuples);
    let (stream, catalog) = filter_positive(&tuples)?;
    let trust = cfg
        .trust_file
        .as_ref()
        .map(|p| load_trust(p, delimiter))
        .transpose()?;
    log::info!(
        "{} raw tuples ({} users, {} items, {} features), {} positive links",
        raw.tuples,
        raw.users,
        raw.items,
        raw.features,
        stream.len()
    );
    Ok(Dataset {
        raw,
        stream,
        catalog,
        trust,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_all(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<()> {
    let mut out = create(path)?;
    f(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct Header<'a> {
    kind: &'static str,
    command: &'a str,
    version: &'static str,
    config: &'a RunConfig,
}

fn header_line(command: &str, cfg: &RunConfig) -> String {
    serde_json::to_string(&Header {
        kind: "header",
        command,
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
    })
    .expect("config serializes")
}

/// One `summary.csv` row.
pub fn summary_row(
    graph: &str,
    content: &str,
    decay: &str,
    trust: &str,
    n: usize,
    report: &EvalReport,
) -> String {
    let acc = &report.by_cutoff[&n];
    let (f, h, m) = (
        acc.total(Metric::F1),
        acc.total(Metric::Hit),
        acc.total(Metric::Map),
    );
    format!(
        "{graph},{content},{decay},{trust},{n},{},{},{},{},{},{},{},{},{},{},{}",
        f.value(),
        h.value(),
        m.value(),
        f.num,
        f.deno,
        h.num,
        h.deno,
        m.num,
        m.deno,
        report.evaluated_users(),
        report.cold_users()
    )
}

fn settings_row(s: &PprSettings, n: usize, report: &EvalReport) -> String {
    summary_row(
        &s.graph.to_string(),
        &s.content.to_string(),
        &s.decay.to_string(),
        &s.trust.to_string(),
        n,
        report,
    )
}

#[derive(Serialize)]
struct RoundRecord<'a> {
    kind: &'static str,
    #[serde(flatten)]
    info: &'a crate::eval::RoundInfo,
    metrics: BTreeMap<usize, crate::eval::SliceMetrics>,
}

fn round_records(report: &EvalReport) -> Vec<String> {
    report
        .rounds
        .iter()
        .enumerate()
        .map(|(j, info)| {
            let metrics = report
                .by_cutoff
                .iter()
                .map(|(&n, acc)| (n, acc.slices[j]))
                .collect();
            serde_json::to_string(&RoundRecord {
                kind: "round",
                info,
                metrics,
            })
            .expect("round serializes")
        })
        .collect()
}

/// Evaluates the configured combination on an already loaded dataset.
pub fn run_on(dataset: &Dataset, cfg: &RunConfig) -> Result<EvalReport> {
    evaluate_ranker(
        &dataset.stream,
        &dataset.catalog,
        dataset.trust.as_ref(),
        &Ranker::Ppr(cfg.settings()),
        cfg.k,
        &cfg.n,
    )
}

pub fn cmd_run(cfg: &RunConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let dataset = load_dataset(cfg)?;
    let report = run_on(&dataset, cfg)?;
    let settings = cfg.settings();
    write_all(&cfg.output.join("summary.csv"), |out| {
        writeln!(out, "{SUMMARY_COLUMNS}")?;
        for &n in report.by_cutoff.keys() {
            writeln!(out, "{}", settings_row(&settings, n, &report))?;
        }
        Ok(())
    })?;
    write_all(&cfg.output.join("detail.jsonl"), |out| {
        writeln!(out, "{}", header_line("run", cfg))?;
        for line in round_records(&report) {
            writeln!(out, "{line}")?;
        }
        Ok(())
    })?;
    Ok(report)
}

#[derive(Serialize)]
struct TrialRecord<'a> {
    kind: &'static str,
    trial: usize,
    point: &'a crate::eval::SearchPoint,
    settings: &'a PprSettings,
    objective: f64,
    ta: BTreeMap<usize, crate::eval::Scores>,
    rounds: Vec<serde_json::Value>,
}

fn trial_line(t: &crate::eval::Trial) -> String {
    let rounds = round_records(&t.report)
        .into_iter()
        .map(|l| serde_json::from_str(&l).unwrap())
        .collect();
    serde_json::to_string(&TrialRecord {
        kind: "trial",
        trial: t.trial,
        point: &t.point,
        settings: &t.settings,
        objective: t.objective,
        ta: t
            .report
            .by_cutoff
            .iter()
            .map(|(&n, a)| (n, a.scores()))
            .collect(),
        rounds,
    })
    .expect("trial serializes")
}

pub fn tune_on(dataset: &Dataset, cfg: &RunConfig, base: &PprSettings) -> Result<SearchOutcome> {
    random_search(
        &dataset.stream,
        &dataset.catalog,
        dataset.trust.as_ref(),
        base,
        &cfg.search.space,
        &cfg.search_options()?,
        cfg.k,
        &cfg.n,
    )
}

pub fn cmd_tune(cfg: &RunConfig) -> Result<SearchOutcome> {
    cfg.validate()?;
    let dataset = load_dataset(cfg)?;
    let outcome = tune_on(&dataset, cfg, &cfg.settings())?;
    write_all(&cfg.output.join("trials.jsonl"), |out| {
        writeln!(out, "{}", header_line("tune", cfg))?;
        for t in &outcome.trials {
            writeln!(out, "{}", trial_line(t))?;
        }
        Ok(())
    })?;
    write_all(&cfg.output.join("timings.jsonl"), |out| {
        for (t, ms) in outcome.wall_ms.iter().enumerate() {
            writeln!(out, "{{\"trial\":{t},\"wall_ms\":{ms}}}")?;
        }
        Ok(())
    })?;
    let best = outcome.best_trial();
    write_all(&cfg.output.join("best.json"), |out| {
        let value = serde_json::json!({
            "trial": best.trial,
            "objective": cfg.search.objective,
            "value": best.objective,
            "point": best.point,
            "settings": best.settings,
            "ta": best.report.by_cutoff.iter().map(|(n, a)| (n.to_string(), a.scores())).collect::<BTreeMap<_, _>>(),
            "seed": cfg.search.seed,
        });
        writeln!(out, "{}", serde_json::to_string_pretty(&value).unwrap())
    })?;
    write_all(&cfg.output.join("summary.csv"), |out| {
        writeln!(out, "{SUMMARY_COLUMNS}")?;
        for &n in best.report.by_cutoff.keys() {
            writeln!(out, "{}", settings_row(&best.settings, n, &best.report))?;
        }
        Ok(())
    })?;
    Ok(outcome)
}

/// One evaluated cell; `settings` is `None` for the popularity baseline.
#[derive(Clone, Debug)]
pub struct MatrixCell {
    pub settings: Option<PprSettings>,
    pub report: EvalReport,
}

impl MatrixCell {
    pub fn combination(&self) -> String {
        self.settings.map_or_else(
            || "MPI".into(),
            |s| combo_label(s.content, s.decay, s.trust),
        )
    }

    pub fn row(&self, n: usize) -> String {
        match &self.settings {
            Some(s) => settings_row(s, n, &self.report),
            None => summary_row("MPI", "-", "-", "-", n, &self.report),
        }
    }
}

/// All 27 side-information combinations in row order.
pub fn combinations() -> Vec<(ContentMode, DecayKind, TrustKind)> {
    let mut out = Vec::with_capacity(27);
    for content in ContentMode::ALL {
        for decay in DecayKind::ALL {
            for trust in TrustKind::ALL {
                out.push((content, decay, trust));
            }
        }
    }
    out
}

/// Evaluates every combination for each graph kind, then the MPI baseline.
/// With `tune`, each cell reports its best random-search trial.
pub fn matrix_on(
    dataset: &Dataset,
    cfg: &RunConfig,
    graphs: &[GraphKind],
    tune: bool,
) -> Result<Vec<MatrixCell>> {
    let base = cfg.settings();
    let mut cells = Vec::new();
    for &graph in graphs {
        for (content, decay, trust) in combinations() {
            let settings = PprSettings {
                graph,
                content,
                decay,
                trust,
                ..base
            };
            let started = Instant::now();
            let (settings, report) = if tune {
                let outcome = tune_on(dataset, cfg, &settings)?;
                let best = outcome.best_trial();
                (best.settings, best.report.clone())
            } else {
                let report = evaluate_ranker(
                    &dataset.stream,
                    &dataset.catalog,
                    dataset.trust.as_ref(),
                    &Ranker::Ppr(settings),
                    cfg.k,
                    &cfg.n,
                )?;
                (settings, report)
            };
            log::info!("{} done in {:?}", settings.label(), started.elapsed());
            cells.push(MatrixCell {
                settings: Some(settings),
                report,
            });
        }
    }
    let report = evaluate_ranker(
        &dataset.stream,
        &dataset.catalog,
        dataset.trust.as_ref(),
        &Ranker::Mpi,
        cfg.k,
        &cfg.n,
    )?;
    cells.push(MatrixCell {
        settings: None,
        report,
    });
    Ok(cells)
}

/// Cross-tabulated table for one list length: one row per combination,
/// one column per metric and graph kind.
pub fn crosstab(cells: &[MatrixCell], n: usize) -> String {
    let mut out = String::from("combination");
    for metric in Metric::ALL {
        for graph in GraphKind::ALL {
            out.push_str(&format!(",{metric}:{graph}"));
        }
    }
    out.push('\n');
    let mut rows: Vec<String> = combinations()
        .into_iter()
        .map(|(c, d, t)| combo_label(c, d, t))
        .collect();
    rows.push("MPI".into());
    for label in rows {
        out.push_str(&label);
        for metric in Metric::ALL {
            for graph in GraphKind::ALL {
                let cell = cells.iter().find(|cell| {
                    cell.combination() == label && cell.settings.is_none_or(|s| s.graph == graph)
                });
                out.push(',');
                if let Some(scores) = cell.and_then(|c| c.report.scores(n)) {
                    out.push_str(&scores.get(metric).to_string());
                }
            }
        }
        out.push('\n');
    }
    out
}

pub fn cmd_matrix(cfg: &RunConfig, graphs: &[GraphKind], tune: bool) -> Result<Vec<MatrixCell>> {
    cfg.validate()?;
    if graphs.is_empty() {
        return Err(Error::validation("graphs", "at least one graph kind"));
    }
    let dataset = load_dataset(cfg)?;
    let cells = matrix_on(&dataset, cfg, graphs, tune)?;
    write_all(&cfg.output.join("matrix.csv"), |out| {
        writeln!(out, "{SUMMARY_COLUMNS}")?;
        for &n in &cfg.n {
            for cell in &cells {
                writeln!(out, "{}", cell.row(n))?;
            }
        }
        Ok(())
    })?;
    for &n in &cfg.n {
        write_all(&cfg.output.join(format!("matrix_top{n}.csv")), |out| {
            out.write_all(crosstab(&cells, n).as_bytes())
        })?;
    }
    write_all(&cfg.output.join("detail.jsonl"), |out| {
        writeln!(out, "{}", header_line("matrix", cfg))?;
        for cell in &cells {
            let value = serde_json::json!({
                "kind": "cell",
                "ranker": cell.report.ranker,
                "ta": cell.report.by_cutoff.iter().map(|(n, a)| (n.to_string(), a.scores())).collect::<BTreeMap<_, _>>(),
            });
            writeln!(out, "{value}")?;
        }
        Ok(())
    })?;
    Ok(cells)
}

pub fn cmd_inspect(
    cfg: &RunConfig,
    until: Option<i64>,
    edges: Option<&Path>,
    rankings: Option<&Path>,
) -> Result<()> {
    cfg.settings().validate()?;
    let dataset = load_dataset(cfg)?;
    let now = until.unwrap_or(dataset.stream.t_max());
    let stream = dataset.stream.window(dataset.stream.t_min(), now);
    let settings = cfg.settings();
    let basic = graph::build(settings.graph, &stream, settings.delta)?;
    let g = attach_content(basic, &dataset.catalog, settings.content)?;
    let weights = effective_weights(&g, now, &settings.decay_spec())?.to_vec();
    eprintln!(
        "raw: {} tuples, {} users, {} items, {} features; graph {}: {} nodes, {} edges",
        dataset.raw.tuples,
        dataset.raw.users,
        dataset.raw.items,
        dataset.raw.features,
        settings.label(),
        g.node_count(),
        g.edge_count()
    );
    match edges {
        Some(path) => write_all(path, |out| {
            g.write_edge_list(out, &stream, Some(&dataset.catalog), Some(&weights))
        })?,
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            g.write_edge_list(&mut lock, &stream, Some(&dataset.catalog), Some(&weights))
                .map_err(|e| Error::io("<stdout>", e))?;
        }
    }
    if let Some(path) = rankings {
        let rec = Recommender::build(
            &stream,
            &dataset.catalog,
            dataset.trust.as_ref(),
            &settings,
            now,
        )?;
        let history = stream.user_items();
        write_all(path, |out| {
            for (user, seen) in &history {
                let Ok(list) = rec.recommend(*user, seen, settings.n) else {
                    continue;
                };
                for (rank, (item, score)) in list.iter().enumerate() {
                    writeln!(
                        out,
                        "{} {} {} {}",
                        stream.user_name(*user),
                        rank + 1,
                        stream.item_name(*item),
                        score
                    )?;
                }
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn configure_workers() {
    if let Some(n) = std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::warn!("could not size worker pool: {e}");
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let report = cmd_run(&cfg)?;
            for (n, acc) in &report.by_cutoff {
                let s = acc.scores();
                println!(
                    "{} N={n}: F={:.5} H={:.5} M={:.5}",
                    cfg.settings().label(),
                    s.f1,
                    s.hit,
                    s.map
                );
            }
        }
        Command::Tune(args) => {
            let cfg = args.resolve()?;
            let outcome = cmd_tune(&cfg)?;
            let best = outcome.best_trial();
            println!(
                "best trial {} of {}: {} = {:.5}",
                best.trial,
                outcome.trials.len(),
                cfg.search.objective,
                best.objective
            );
        }
        Command::Matrix(args) => {
            let cfg = args.config.resolve()?;
            let cells = cmd_matrix(&cfg, &args.graphs, args.tune)?;
            println!("{} cells written to {}", cells.len(), cfg.output.display());
        }
        Command::InspectGraph(args) => {
            let cfg = args.config.resolve()?;
            cmd_inspect(
                &cfg,
                args.until,
                args.edges.as_deref(),
                args.rankings.as_deref(),
            )?;
        }
    }
    Ok(())
}

/// Entry point of the `graphrec` binary. Exit code 2 marks invalid
/// configuration, 1 any other failure.
pub fn main_from_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    configure_workers();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Validation { .. } | Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        fs::write(
            &path,
            "alpha = 0.3\nk = 5\nn = [10, 20]\n[search]\nseed = 9\n",
        )
        .unwrap();
        let args = ConfigArgs {
            config: Some(path),
            alpha: Some(0.7),
            ..Default::default()
        };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.alpha, 0.7);
        assert_eq!(cfg.k, 5);
        assert_eq!(cfg.n, vec![10, 20]);
        assert_eq!(cfg.search.seed, 9);
        assert_eq!(cfg.search.n_samples, 50);
    }

    #[test]
    fn unknown_config_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        fs::write(&path, "alpah = 0.3\n").unwrap();
        assert!(matches!(
            RunConfig::from_toml_file(&path),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn day_units_convert() {
        let cfg = RunConfig {
            tau0_days: 2.0,
            ldf_k: 0.5,
            day_seconds: 10.0,
            ..Default::default()
        };
        let s = cfg.settings();
        assert_eq!(s.tau0, 20.0);
        assert_eq!(s.ldf_k, 0.05);
    }

    #[test]
    fn twenty_seven_combinations() {
        let combos = combinations();
        assert_eq!(combos.len(), 27);
        assert_eq!(combo_label(combos[0].0, combos[0].1, combos[0].2), "None");
        assert_eq!(
            combo_label(combos[26].0, combos[26].1, combos[26].2),
            "CIU-LDF-IT"
        );
    }
}
