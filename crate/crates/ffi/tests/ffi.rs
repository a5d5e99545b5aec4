use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use graphrec::fixtures::{self, SyntheticSpec};
use graphrec_ffi::*;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = gr_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn load(path: &Path) -> *mut GrDataset {
    let mut ds = ptr::null_mut();
    let p = cstr(path.to_str().unwrap());
    let st = unsafe { gr_dataset_load(p.as_ptr(), ptr::null(), ptr::null(), &mut ds) };
    assert_eq!(st, GrStatus::Ok);
    ds
}

#[test]
fn guiding_dataset_recommend_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("reviews.txt");
    fixtures::write_reviews(&path, &fixtures::guiding_reviews()).unwrap();
    let ds = load(&path);
    unsafe {
        assert_eq!(gr_dataset_link_count(ds), 8);
        assert_eq!(gr_dataset_user_count(ds), 2);
        assert_eq!(gr_dataset_item_count(ds), 4);
        let (mut lo, mut hi) = (0, 0);
        assert_eq!(gr_dataset_time_range(ds, &mut lo, &mut hi), GrStatus::Ok);
        assert_eq!((lo, hi), (1, 6));

        let settings = gr_settings_default();
        let mut rec = ptr::null_mut();
        assert_eq!(gr_recommender_new(ds, &settings, 6, &mut rec), GrStatus::Ok);

        let mut ranking = ptr::null_mut();
        let u1 = cstr("u1");
        assert_eq!(
            gr_recommend(rec, u1.as_ptr(), 5, &mut ranking),
            GrStatus::Ok
        );
        // u1 has seen i1, i2 and i3
        assert_eq!(gr_ranking_len(ranking), 1);
        assert_eq!(
            CStr::from_ptr(gr_ranking_item(ranking, 0))
                .to_str()
                .unwrap(),
            "i4"
        );
        assert!(gr_ranking_score(ranking, 0) > 0.0);
        assert!(gr_ranking_item(ranking, 1).is_null());
        assert!(gr_ranking_score(ranking, 1).is_nan());
        gr_ranking_free(ranking);

        let ghost = cstr("nobody");
        let mut none = ptr::null_mut();
        assert_eq!(
            gr_recommend(rec, ghost.as_ptr(), 5, &mut none),
            GrStatus::NotFound
        );
        assert!(none.is_null());
        assert!(last_error().contains("nobody"));

        gr_recommender_free(rec);
        gr_dataset_free(ds);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut ds = ptr::null_mut();
        let missing = cstr("/nonexistent/reviews.txt");
        let st = gr_dataset_load(missing.as_ptr(), ptr::null(), ptr::null(), &mut ds);
        assert_eq!(st, GrStatus::Io);
        assert!(ds.is_null());
        assert!(last_error().contains("/nonexistent/reviews.txt"));

        assert_eq!(
            gr_dataset_load(ptr::null(), ptr::null(), ptr::null(), &mut ds),
            GrStatus::NullPointer
        );
        assert_eq!(
            gr_dataset_load(missing.as_ptr(), ptr::null(), ptr::null(), ptr::null_mut()),
            GrStatus::NullPointer
        );

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("reviews.txt");
        fixtures::write_reviews(&path, &fixtures::guiding_reviews()).unwrap();
        let ds = load(&path);

        let mut bad = gr_settings_default();
        bad.alpha = 1.5;
        let mut rec = ptr::null_mut();
        assert_eq!(
            gr_recommender_new(ds, &bad, 6, &mut rec),
            GrStatus::Validation
        );
        assert!(last_error().contains("alpha"));

        let mut bad = gr_settings_default();
        bad.graph = 7;
        assert_eq!(
            gr_recommender_new(ds, &bad, 6, &mut rec),
            GrStatus::InvalidArgument
        );

        let ok = gr_settings_default();
        assert_eq!(
            gr_recommender_new(ds, &ok, 0, &mut rec),
            GrStatus::EmptyData
        );

        // a successful call clears the message
        assert_eq!(gr_recommender_new(ds, &ok, 6, &mut rec), GrStatus::Ok);
        assert!(gr_last_error_message().is_null());
        gr_recommender_free(rec);
        gr_dataset_free(ds);

        gr_dataset_free(ptr::null_mut());
        gr_recommender_free(ptr::null_mut());
        gr_ranking_free(ptr::null_mut());
        assert_eq!(gr_dataset_link_count(ptr::null()), 0);
    }
}

#[test]
fn evaluation_matches_library() {
    let spec = SyntheticSpec {
        links: 300,
        ..Default::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("reviews.txt");
    fixtures::write_reviews(&path, &fixtures::synthetic_reviews(&spec)).unwrap();
    let ds = load(&path);

    let mut settings = gr_settings_default();
    settings.decay = GR_DECAY_EDF;
    settings.content = GR_CONTENT_CI;
    let mut m = GrMetrics::default();
    assert_eq!(
        unsafe { gr_evaluate(ds, &settings, 3, &mut m) },
        GrStatus::Ok
    );

    let cfg = graphrec::cli::RunConfig {
        reviews: Some(path.clone()),
        ..Default::default()
    };
    let data = graphrec::cli::load_dataset(&cfg).unwrap();
    let lib = graphrec::PprSettings {
        decay: graphrec::DecayKind::Edf,
        content: graphrec::ContentMode::Ci,
        ..Default::default()
    };
    let report = graphrec::evaluate(&data.stream, &data.catalog, None, &lib, 3).unwrap();
    let s = report.scores(lib.n).unwrap();
    assert_eq!((m.f1, m.hit, m.map), (s.f1, s.hit, s.map));
    assert_eq!(m.evaluated_users, report.evaluated_users());

    let mut mpi = GrMetrics::default();
    assert_eq!(
        unsafe { gr_evaluate_mpi(ds, 3, 10, &mut mpi) },
        GrStatus::Ok
    );
    assert!(mpi.evaluated_users > 0);
    unsafe { gr_dataset_free(ds) };
}

#[test]
fn header_compiles_as_c() {
    let header_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(header_dir.join("graphrec.h").exists());
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping header check");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        r#"#include "graphrec.h"
int demo(const char *path) {
    GrDataset *ds = 0;
    if (gr_dataset_load(path, 0, "whitespace", &ds) != GR_STATUS_OK) return 1;
    GrSettings s = gr_settings_default();
    s.graph = GR_GRAPH_STG;
    GrMetrics m;
    GrStatus st = gr_evaluate(ds, &s, 7, &m);
    gr_dataset_free(ds);
    return st == GR_STATUS_OK ? 0 : 2;
}
"#,
    )
    .unwrap();
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&header_dir)
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| {
            Command::new(c)
                .arg("--version")
                .output()
                .is_ok_and(|o| o.status.success())
        })
        .ok_or(())
}
