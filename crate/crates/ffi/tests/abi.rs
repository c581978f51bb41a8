use std::ffi::{CStr, CString};
use std::ptr;

use objsearch::bench::{optimal_tour_length, osr, DEFAULT_WEIGHTS};
use objsearch_ffi::*;

fn last_error() -> String {
    let p = objs_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn take_string(p: *mut std::ffi::c_char) -> String {
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { objs_string_free(p) };
    s
}

fn flat() -> *mut ObjsScene {
    let mut scene = ptr::null_mut();
    assert_eq!(unsafe { objs_scene_flat(&mut scene) }, ObjsStatus::Ok);
    assert!(!scene.is_null());
    scene
}

#[test]
fn osr_matches_core_and_rejects_bad_weights() {
    let mut out = 0.0;
    assert_eq!(unsafe { objs_osr(10.0, 20.0, 30.0, ptr::null(), &mut out) }, ObjsStatus::Ok);
    assert_eq!(out, osr(10.0, 20.0, 30.0, DEFAULT_WEIGHTS).unwrap());
    assert!(objs_last_error().is_null());
    let bad = [0.5, 0.5, 0.5];
    assert_eq!(unsafe { objs_osr(1.0, 1.0, 1.0, bad.as_ptr(), &mut out) }, ObjsStatus::Metrics);
    assert!(last_error().contains("sum to 1"));
}

#[test]
fn tour_length_matches_core_and_caps_waypoints() {
    let pts = [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [3.0, 3.0, 1.0]];
    let flat: Vec<f64> = pts.iter().flatten().copied().collect();
    let start = [0.0; 3];
    let mut out = -1.0;
    assert_eq!(unsafe { objs_optimal_tour_length(start.as_ptr(), flat.as_ptr(), 3, &mut out) }, ObjsStatus::Ok);
    assert_eq!(out, optimal_tour_length(&pts, start).unwrap());
    assert_eq!(unsafe { objs_optimal_tour_length(start.as_ptr(), ptr::null(), 0, &mut out) }, ObjsStatus::Ok);
    assert_eq!(out, 0.0);
    let many = vec![0.5; 3 * 11];
    assert_eq!(unsafe { objs_optimal_tour_length(start.as_ptr(), many.as_ptr(), 11, &mut out) }, ObjsStatus::Metrics);
    let nan = [f64::NAN, 0.0, 0.0];
    assert_eq!(
        unsafe { objs_optimal_tour_length(start.as_ptr(), nan.as_ptr(), 1, &mut out) },
        ObjsStatus::InvalidArgument
    );
}

#[test]
fn null_and_bad_inputs_report_codes() {
    assert_eq!(unsafe { objs_scene_flat(ptr::null_mut()) }, ObjsStatus::NullPointer);
    assert!(last_error().contains("out"));
    let mut scene = ptr::null_mut();
    assert_eq!(unsafe { objs_scene_load(ptr::null(), &mut scene) }, ObjsStatus::NullPointer);
    let missing = CString::new("/nonexistent/scene.json").unwrap();
    assert_eq!(unsafe { objs_scene_load(missing.as_ptr(), &mut scene) }, ObjsStatus::Io);
    let junk = CString::new("{not json").unwrap();
    assert_eq!(unsafe { objs_scene_parse(junk.as_ptr(), &mut scene) }, ObjsStatus::Scene);
    assert!(last_error().contains("parse"));
    assert!(scene.is_null());
    let bad_utf8 = [0xffu8, 0xfe, 0];
    assert_eq!(unsafe { objs_scene_parse(bad_utf8.as_ptr().cast(), &mut scene) }, ObjsStatus::InvalidUtf8);
    unsafe {
        objs_scene_free(ptr::null_mut());
        objs_trace_free(ptr::null_mut());
        objs_string_free(ptr::null_mut());
    }
}

#[test]
fn scene_handles_expose_counts_and_names() {
    let scene = flat();
    let (mut rooms, mut carriers, mut items) = (0, 0, 0);
    assert_eq!(unsafe { objs_scene_counts(scene, &mut rooms, &mut carriers, &mut items) }, ObjsStatus::Ok);
    assert_eq!((rooms, carriers), (7, 22));
    assert!(items > 0);
    assert_eq!(unsafe { objs_scene_counts(scene, ptr::null_mut(), ptr::null_mut(), ptr::null_mut()) }, ObjsStatus::Ok);
    let mut name = ptr::null_mut();
    assert_eq!(unsafe { objs_scene_name(scene, &mut name) }, ObjsStatus::Ok);
    assert_eq!(take_string(name), "flat");
    let mut target = ptr::null_mut();
    assert_eq!(unsafe { objs_scene_target(scene, &mut target) }, ObjsStatus::Ok);
    assert_eq!(take_string(target), "");
    unsafe { objs_scene_free(scene) };

    let mut gen = ptr::null_mut();
    assert_eq!(unsafe { objs_scene_generate(4, &mut gen) }, ObjsStatus::Ok);
    let mut target = ptr::null_mut();
    assert_eq!(unsafe { objs_scene_target(gen, &mut target) }, ObjsStatus::Ok);
    assert!(!take_string(target).is_empty());
    unsafe { objs_scene_free(gen) };
}

fn run(scene: *const ObjsScene, target: &str, opts: &ObjsSearchOptions) -> *mut ObjsTrace {
    let target = CString::new(target).unwrap();
    let mut trace = ptr::null_mut();
    assert_eq!(unsafe { objs_search_run(scene, target.as_ptr(), opts, &mut trace) }, ObjsStatus::Ok, "{}", last_error());
    trace
}

#[test]
fn search_through_handles_is_deterministic() {
    let scene = flat();
    let mut opts = objs_search_options_default();
    opts.seed = 7;
    let a = run(scene, "orange", &opts);
    let b = run(scene, "orange", &opts);
    // The trace keeps its world alive after the scene handle is gone.
    unsafe { objs_scene_free(scene) };

    let mut found = false;
    assert_eq!(unsafe { objs_trace_found(a, &mut found) }, ObjsStatus::Ok);
    assert!(found);
    let mut rates = ObjsRates::default();
    assert_eq!(unsafe { objs_trace_rates(a, &mut rates) }, ObjsStatus::Ok);
    assert!(rates.found);
    assert_eq!(rates.rooms_den, 7);
    assert!(rates.r_r > 0.0 && rates.r_r <= 100.0);
    let mut o = 0.0;
    assert_eq!(unsafe { objs_trace_osr(a, ptr::null(), &mut o) }, ObjsStatus::Ok);
    assert_eq!(o, osr(rates.r_r, rates.r_c, rates.r_i, DEFAULT_WEIGHTS).unwrap());
    let mut stats = ObjsTraceStats::default();
    assert_eq!(unsafe { objs_trace_stats(a, &mut stats) }, ObjsStatus::Ok);
    assert!(stats.time > 0.0 && stats.events > 0);
    assert!(stats.ch_ratio >= 1.0 - 1e-9);

    let (mut ja, mut jb) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(objs_trace_to_jsonl(a, &mut ja), ObjsStatus::Ok);
        assert_eq!(objs_trace_to_jsonl(b, &mut jb), ObjsStatus::Ok);
    }
    let (ja, jb) = (take_string(ja), take_string(jb));
    assert_eq!(ja, jb);
    assert_eq!(ja.lines().count(), stats.events + 1);
    unsafe {
        objs_trace_free(a);
        objs_trace_free(b);
    }
}

#[test]
fn invalid_search_options_are_config_errors() {
    let scene = flat();
    let mut opts = objs_search_options_default();
    opts.noise = 1.5;
    let target = CString::new("orange").unwrap();
    let mut trace = ptr::null_mut();
    assert_eq!(unsafe { objs_search_run(scene, target.as_ptr(), &opts, &mut trace) }, ObjsStatus::Config);
    assert!(trace.is_null());
    assert!(last_error().contains("noise"), "{}", last_error());
    unsafe { objs_scene_free(scene) };
}
