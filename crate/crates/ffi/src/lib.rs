//! C ABI for the graphrec recommender.
//!
//! Every function returns a [`GrStatus`]; on failure the message is available
//! from [`gr_last_error_message`] on the same thread. Handles are opaque and
//! must be released with the matching `*_free` function.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use graphrec::cli::{load_dataset, Dataset, RunConfig};
use graphrec::eval::{evaluate_ranker, Metric, Ranker};
use graphrec::ppr::DAY;
use graphrec::{
    ContentMode, DecayKind, Error, GraphKind, LinkStream, PprSettings, Recommender, TrustKind,
};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Validation = 5,
    EmptyData = 6,
    ColdUser = 7,
    NotFound = 8,
    Internal = 99,
}

pub const GR_GRAPH_BIP: u32 = 0;
pub const GR_GRAPH_STG: u32 = 1;
pub const GR_GRAPH_LSG: u32 = 2;
pub const GR_CONTENT_NONE: u32 = 0;
pub const GR_CONTENT_CI: u32 = 1;
pub const GR_CONTENT_CIU: u32 = 2;
pub const GR_DECAY_NONE: u32 = 0;
pub const GR_DECAY_EDF: u32 = 1;
pub const GR_DECAY_LDF: u32 = 2;
pub const GR_TRUST_NONE: u32 = 0;
pub const GR_TRUST_ET: u32 = 1;
pub const GR_TRUST_IT: u32 = 2;

/// Recommender settings. Durations (`delta`, `tau0`) are in timestamp
/// units, `ldf_k` per timestamp unit.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct GrSettings {
    pub graph: u32,
    pub content: u32,
    pub decay: u32,
    pub trust: u32,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub tau0: f64,
    pub ldf_k: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub n: usize,
    pub min_overlap: usize,
}

/// Time-averaged scores at one list length.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct GrMetrics {
    pub f1: f64,
    pub hit: f64,
    pub map: f64,
    pub evaluated_users: usize,
    pub cold_users: usize,
}

pub struct GrDataset {
    inner: Dataset,
}

pub struct GrRecommender {
    train: LinkStream,
    rec: Recommender,
}

pub struct GrRanking {
    items: Vec<(CString, f64)>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Failure(GrStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => GrStatus::Io,
            Error::Parse { .. } => GrStatus::Parse,
            Error::Validation { .. } | Error::Config(_) => GrStatus::Validation,
            Error::EmptyStream | Error::EmptyEvaluation => GrStatus::EmptyData,
            Error::ColdUser(_) => GrStatus::ColdUser,
            _ => GrStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: GrStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            GrStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GrStatus::Internal
        }
    }
}

unsafe fn opt_str<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p).to_str().map(Some).map_err(|_| {
        fail(
            GrStatus::InvalidArgument,
            format!("{what} is not valid UTF-8"),
        )
    })
}

unsafe fn req_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    opt_str(p, what)?.ok_or_else(|| fail(GrStatus::NullPointer, format!("{what} is null")))
}

unsafe fn req_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(GrStatus::NullPointer, format!("{what} is null")))
}

fn pick<T: Copy>(value: u32, table: &[T], field: &str) -> Result<T, Failure> {
    table.get(value as usize).copied().ok_or_else(|| {
        fail(
            GrStatus::InvalidArgument,
            format!("invalid {field}: {value}"),
        )
    })
}

impl GrSettings {
    fn to_settings(self) -> Result<PprSettings, Failure> {
        Ok(PprSettings {
            graph: pick(self.graph, &GraphKind::ALL, "graph")?,
            content: pick(self.content, &ContentMode::ALL, "content")?,
            decay: pick(self.decay, &DecayKind::ALL, "decay")?,
            trust: pick(self.trust, &TrustKind::ALL, "trust")?,
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            delta: self.delta,
            tau0: self.tau0,
            ldf_k: self.ldf_k,
            tol: self.tol,
            max_iter: self.max_iter,
            n: self.n,
            min_overlap: self.min_overlap,
        })
    }
}

fn index_of<T: PartialEq>(value: T, table: &[T]) -> u32 {
    table.iter().position(|v| *v == value).unwrap_or(0) as u32
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn gr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Default settings with Unix-second timestamps.
#[no_mangle]
pub extern "C" fn gr_settings_default() -> GrSettings {
    let s = PprSettings::default();
    GrSettings {
        graph: index_of(s.graph, &GraphKind::ALL),
        content: index_of(s.content, &ContentMode::ALL),
        decay: index_of(s.decay, &DecayKind::ALL),
        trust: index_of(s.trust, &TrustKind::ALL),
        alpha: s.alpha,
        beta: s.beta,
        gamma: s.gamma,
        delta: s.delta,
        tau0: s.tau0,
        ldf_k: s.ldf_k,
        tol: s.tol,
        max_iter: s.max_iter,
        n: s.n,
        min_overlap: s.min_overlap,
    }
}

/// Seconds per day, for converting day-based parameters.
#[no_mangle]
pub extern "C" fn gr_seconds_per_day() -> f64 {
    DAY
}

/// Loads and filters a review file. `trust_path` and `delimiter` may be
/// NULL; `delimiter` accepts "whitespace", "tab", "comma" or one character.
///
/// # Safety
/// String arguments must be NUL-terminated or NULL; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gr_dataset_load(
    reviews_path: *const c_char,
    trust_path: *const c_char,
    delimiter: *const c_char,
    out: *mut *mut GrDataset,
) -> GrStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(GrStatus::NullPointer, "out is null"));
        }
        *out = ptr::null_mut();
        let cfg = RunConfig {
            reviews: Some(PathBuf::from(req_str(reviews_path, "reviews_path")?)),
            trust_file: opt_str(trust_path, "trust_path")?.map(PathBuf::from),
            delimiter: opt_str(delimiter, "delimiter")?
                .unwrap_or("whitespace")
                .to_string(),
            ..RunConfig::default()
        };
        let inner = load_dataset(&cfg)?;
        *out = Box::into_raw(Box::new(GrDataset { inner }));
        Ok(())
    })
}

/// # Safety
/// `dataset` must come from [`gr_dataset_load`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn gr_dataset_free(dataset: *mut GrDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Positive links after filtering; 0 for NULL.
///
/// # Safety
/// `dataset` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn gr_dataset_link_count(dataset: *const GrDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.stream.len())
}

/// # Safety
/// `dataset` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn gr_dataset_user_count(dataset: *const GrDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.stream.users().len())
}

/// # Safety
/// `dataset` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn gr_dataset_item_count(dataset: *const GrDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.stream.items().len())
}

/// First and last timestamp of the filtered stream.
///
/// # Safety
/// `dataset` must be a live handle; `t_min` and `t_max` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gr_dataset_time_range(
    dataset: *const GrDataset,
    t_min: *mut i64,
    t_max: *mut i64,
) -> GrStatus {
    guard(|| {
        let d = req_ref(dataset, "dataset")?;
        if t_min.is_null() || t_max.is_null() {
            return Err(fail(GrStatus::NullPointer, "output pointer is null"));
        }
        *t_min = d.inner.stream.t_min();
        *t_max = d.inner.stream.t_max();
        Ok(())
    })
}

/// Trains on all links with timestamp at most `now`.
///
/// # Safety
/// `dataset` and `settings` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gr_recommender_new(
    dataset: *const GrDataset,
    settings: *const GrSettings,
    now: i64,
    out: *mut *mut GrRecommender,
) -> GrStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(GrStatus::NullPointer, "out is null"));
        }
        *out = ptr::null_mut();
        let d = &req_ref(dataset, "dataset")?.inner;
        let settings = req_ref(settings, "settings")?.to_settings()?;
        let train = d.stream.window(d.stream.t_min(), now);
        if train.is_empty() {
            return Err(fail(
                GrStatus::EmptyData,
                format!("no links at or before {now}"),
            ));
        }
        let rec = Recommender::build(&train, &d.catalog, d.trust.as_ref(), &settings, now)?;
        *out = Box::into_raw(Box::new(GrRecommender { train, rec }));
        Ok(())
    })
}

/// # Safety
/// `rec` must come from [`gr_recommender_new`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn gr_recommender_free(rec: *mut GrRecommender) {
    if !rec.is_null() {
        drop(Box::from_raw(rec));
    }
}

/// Top-`n` unseen items for `user`. Unknown or cold users give
/// `GR_STATUS_NOT_FOUND` / `GR_STATUS_COLD_USER`.
///
/// # Safety
/// `rec` must be live, `user` NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gr_recommend(
    rec: *const GrRecommender,
    user: *const c_char,
    n: usize,
    out: *mut *mut GrRanking,
) -> GrStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(GrStatus::NullPointer, "out is null"));
        }
        *out = ptr::null_mut();
        let r = req_ref(rec, "recommender")?;
        let name = req_str(user, "user")?;
        let uid = r
            .train
            .user_id(name)
            .ok_or_else(|| fail(GrStatus::NotFound, format!("unknown user {name:?}")))?;
        let seen: BTreeSet<_> = r
            .train
            .links()
            .iter()
            .filter(|l| l.user == uid)
            .map(|l| l.item)
            .collect();
        let list = r.rec.recommend(uid, &seen, n)?;
        let items = list
            .into_iter()
            .map(|(i, s)| (CString::new(r.train.item_name(i)).unwrap_or_default(), s))
            .collect();
        *out = Box::into_raw(Box::new(GrRanking { items }));
        Ok(())
    })
}

/// # Safety
/// `ranking` must be live or NULL.
#[no_mangle]
pub unsafe extern "C" fn gr_ranking_len(ranking: *const GrRanking) -> usize {
    ranking.as_ref().map_or(0, |r| r.items.len())
}

/// Item name at `index`, or NULL when out of range. Owned by the ranking.
///
/// # Safety
/// `ranking` must be live or NULL.
#[no_mangle]
pub unsafe extern "C" fn gr_ranking_item(ranking: *const GrRanking, index: usize) -> *const c_char {
    ranking
        .as_ref()
        .and_then(|r| r.items.get(index))
        .map_or(ptr::null(), |(name, _)| name.as_ptr())
}

/// Score at `index`, or NaN when out of range.
///
/// # Safety
/// `ranking` must be live or NULL.
#[no_mangle]
pub unsafe extern "C" fn gr_ranking_score(ranking: *const GrRanking, index: usize) -> f64 {
    ranking
        .as_ref()
        .and_then(|r| r.items.get(index))
        .map_or(f64::NAN, |&(_, s)| s)
}

/// # Safety
/// `ranking` must come from [`gr_recommend`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn gr_ranking_free(ranking: *mut GrRanking) {
    if !ranking.is_null() {
        drop(Box::from_raw(ranking));
    }
}

unsafe fn run_eval(
    dataset: *const GrDataset,
    ranker: Ranker,
    k: usize,
    n: usize,
    out: *mut GrMetrics,
) -> GrStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(GrStatus::NullPointer, "out is null"));
        }
        let d = &req_ref(dataset, "dataset")?.inner;
        let report = evaluate_ranker(&d.stream, &d.catalog, d.trust.as_ref(), &ranker, k, &[n])?;
        let acc = &report.by_cutoff[&n];
        *out = GrMetrics {
            f1: acc.ta(Metric::F1),
            hit: acc.ta(Metric::Hit),
            map: acc.ta(Metric::Map),
            evaluated_users: report.evaluated_users(),
            cold_users: report.cold_users(),
        };
        Ok(())
    })
}

/// Runs the `k`-round evaluation at list length `settings->n`.
///
/// # Safety
/// `dataset` and `settings` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gr_evaluate(
    dataset: *const GrDataset,
    settings: *const GrSettings,
    k: usize,
    out: *mut GrMetrics,
) -> GrStatus {
    let settings = match settings.as_ref().map(|s| s.to_settings()) {
        Some(Ok(s)) => s,
        Some(Err(Failure(status, msg))) => {
            set_error(msg);
            return status;
        }
        None => {
            set_error("settings is null");
            return GrStatus::NullPointer;
        }
    };
    run_eval(dataset, Ranker::Ppr(settings), k, settings.n, out)
}

/// Same protocol with the most-popular-item baseline.
///
/// # Safety
/// `dataset` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gr_evaluate_mpi(
    dataset: *const GrDataset,
    k: usize,
    n: usize,
    out: *mut GrMetrics,
) -> GrStatus {
    run_eval(dataset, Ranker::Mpi, k, n, out)
}
