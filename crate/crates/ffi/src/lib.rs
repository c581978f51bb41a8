//! C ABI over the simulator: scenes and traces behind opaque handles, status codes for
//! every call and a per-thread message for the last failure.
//!
//! Strings passed in are NUL-terminated UTF-8. Strings returned are owned by the caller
//! and released with [`objs_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use objsearch::bench::{compute_osr, compute_rates, optimal_tour_length, osr, path_stats, DEFAULT_WEIGHTS};
use objsearch::error::{ConfigError, MetricsError, SceneError};
use objsearch::planner::SortingMode;
use objsearch::scene::{build_flat, generate_scene, load_scene, parse_scene, GenerationConfig, PlanCache, SimSetup, World};
use objsearch::search::{run_trial, Event, SearchContext, Strategy, StrategyConfig, Trace};
use objsearch::semantics::{KnowledgeBase, MockRanker};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Scene = 4,
    Config = 5,
    Metrics = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjsStrategy {
    Godhs = 0,
    Coverage = 1,
    Random = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjsSorting {
    None = 0,
    Ee = 1,
    Ch = 2,
    Both = 3,
}

/// Search options; start from [`objs_search_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ObjsSearchOptions {
    pub strategy: ObjsStrategy,
    pub sorting: ObjsSorting,
    pub seed: u64,
    /// Probability that a visible target is missed, in [0, 1).
    pub noise: f64,
}

/// Search rates in percent with their counts.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ObjsRates {
    pub r_r: f64,
    pub r_c: f64,
    pub r_i: f64,
    pub rooms_num: usize,
    pub rooms_den: usize,
    pub carriers_num: usize,
    pub carriers_den: usize,
    pub placements_num: usize,
    pub placements_den: usize,
    pub found: bool,
}

/// Totals and path-optimality ratios of one trace; a ratio is NaN when there is no tour.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ObjsTraceStats {
    pub events: usize,
    pub time: f64,
    pub chassis_length: f64,
    pub ee_length: f64,
    pub ee_poses: usize,
    pub ee_ratio: f64,
    pub ch_ratio: f64,
}

/// A validated scene with its derived geometry.
pub struct ObjsScene {
    world: Arc<World>,
    setup: SimSetup,
    /// Target drawn by the generator; empty for loaded scenes.
    target: String,
}

/// The event trace of one search, bound to the scene it ran in.
pub struct ObjsTrace {
    trace: Trace,
    world: Arc<World>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(ObjsStatus, String);

impl Failure {
    fn new(status: ObjsStatus, msg: impl Into<String>) -> Self {
        Self(status, msg.into())
    }
}

impl From<SceneError> for Failure {
    fn from(e: SceneError) -> Self {
        let status = if matches!(e, SceneError::Io { .. }) { ObjsStatus::Io } else { ObjsStatus::Scene };
        Failure(status, e.to_string())
    }
}

impl From<MetricsError> for Failure {
    fn from(e: MetricsError) -> Self {
        Failure(ObjsStatus::Metrics, e.to_string())
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure(ObjsStatus::Config, e.to_string())
    }
}

/// Runs `f`, mapping errors and panics to a status and recording the message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ObjsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            ObjsStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            ObjsStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(ObjsStatus::NullPointer, format!("`{name}` is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::new(ObjsStatus::InvalidUtf8, format!("`{name}` is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::new(ObjsStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::new(ObjsStatus::NullPointer, format!("`{name}` is null")))
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("NUL bytes replaced").into_raw()
}

fn put_scene(out: &mut *mut ObjsScene, world: World, setup: SimSetup, target: String) {
    *out = Box::into_raw(Box::new(ObjsScene { world: Arc::new(world), setup, target }));
}

/// Message of the last failed call on this thread, or null. Valid until the next call.
#[no_mangle]
pub extern "C" fn objs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn objs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// The bundled seven-room flat.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn objs_scene_flat(out: *mut *mut ObjsScene) -> ObjsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let setup = SimSetup::default();
        let world = World::new(build_flat(&setup))?;
        put_scene(out, world, setup, String::new());
        Ok(())
    })
}

/// Loads and validates a scene file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn objs_scene_load(path: *const c_char, out: *mut *mut ObjsScene) -> ObjsStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let world = World::new(load_scene(path)?)?;
        put_scene(out, world, SimSetup::default(), String::new());
        Ok(())
    })
}

/// Parses and validates scene JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn objs_scene_parse(json: *const c_char, out: *mut *mut ObjsScene) -> ObjsStatus {
    guard(|| {
        let json = str_arg(json, "json")?;
        let out = out_arg(out, "out")?;
        let world = World::new(parse_scene(json)?)?;
        put_scene(out, world, SimSetup::default(), String::new());
        Ok(())
    })
}

/// Generates a scene with default parameters; its target is read with [`objs_scene_target`].
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn objs_scene_generate(seed: u64, out: *mut *mut ObjsScene) -> ObjsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let config = GenerationConfig::default();
        let g = generate_scene(&config, seed)?;
        let world = World::new(g.scene)?;
        put_scene(out, world, config.setup, g.target);
        Ok(())
    })
}

/// Releases a scene. Null is ignored.
///
/// # Safety
/// `scene` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn objs_scene_free(scene: *mut ObjsScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// Scene name as an owned string.
///
/// # Safety
/// `scene` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn objs_scene_name(scene: *const ObjsScene, out: *mut *mut c_char) -> ObjsStatus {
    guard(|| {
        let scene = ref_arg(scene, "scene")?;
        *out_arg(out, "out")? = owned_string(scene.world.scene.name.clone());
        Ok(())
    })
}

/// Generator target as an owned string; empty for loaded scenes.
///
/// # Safety
/// `scene` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn objs_scene_target(scene: *const ObjsScene, out: *mut *mut c_char) -> ObjsStatus {
    guard(|| {
        let scene = ref_arg(scene, "scene")?;
        *out_arg(out, "out")? = owned_string(scene.target.clone());
        Ok(())
    })
}

/// Room, carrier and item counts. Any output pointer may be null.
///
/// # Safety
/// `scene` must be a valid pointer; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn objs_scene_counts(
    scene: *const ObjsScene,
    rooms: *mut usize,
    carriers: *mut usize,
    items: *mut usize,
) -> ObjsStatus {
    guard(|| {
        let s = &ref_arg(scene, "scene")?.world.scene;
        for (p, v) in [(rooms, s.rooms.len()), (carriers, s.carriers.len()), (items, s.items.len())] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Defaults: hierarchical strategy, both sortings, seed 0, no detection noise.
#[no_mangle]
pub extern "C" fn objs_search_options_default() -> ObjsSearchOptions {
    ObjsSearchOptions { strategy: ObjsStrategy::Godhs, sorting: ObjsSorting::Both, seed: 0, noise: 0.0 }
}

/// Runs one search for `target` with the knowledge-base ranker.
///
/// # Safety
/// `scene`, `options` and `out` must be valid pointers; `target` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn objs_search_run(
    scene: *const ObjsScene,
    target: *const c_char,
    options: *const ObjsSearchOptions,
    out: *mut *mut ObjsTrace,
) -> ObjsStatus {
    guard(|| {
        let scene = ref_arg(scene, "scene")?;
        let target = str_arg(target, "target")?;
        let o = ref_arg(options, "options")?;
        let out = out_arg(out, "out")?;
        let cfg = StrategyConfig {
            strategy: match o.strategy {
                ObjsStrategy::Godhs => Strategy::Godhs,
                ObjsStrategy::Coverage => Strategy::Coverage,
                ObjsStrategy::Random => Strategy::Random,
            },
            sorting: match o.sorting {
                ObjsSorting::None => SortingMode::None,
                ObjsSorting::Ee => SortingMode::Ee,
                ObjsSorting::Ch => SortingMode::Ch,
                ObjsSorting::Both => SortingMode::Both,
            },
            seed: o.seed,
            noise: o.noise,
            ..StrategyConfig::default()
        };
        cfg.validate().map_err(ConfigError::Invalid)?;
        let kb = Arc::new(KnowledgeBase::shipped());
        let plans = PlanCache::new(&scene.world, scene.setup.clone());
        let ctx = SearchContext::new(&plans, &kb);
        let mut ranker = MockRanker::new(kb.clone());
        let trace = run_trial(&ctx, target, &mut ranker, &cfg);
        *out = Box::into_raw(Box::new(ObjsTrace { trace, world: scene.world.clone() }));
        Ok(())
    })
}

/// Releases a trace. Null is ignored.
///
/// # Safety
/// `trace` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn objs_trace_free(trace: *mut ObjsTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Whether the search ended with a detection.
///
/// # Safety
/// `trace` and `found` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn objs_trace_found(trace: *const ObjsTrace, found: *mut bool) -> ObjsStatus {
    guard(|| {
        let t = ref_arg(trace, "trace")?;
        *out_arg(found, "found")? = t.trace.events.iter().any(|e| matches!(e.event, Event::TargetFound { .. }));
        Ok(())
    })
}

/// Search rates of a finished trace.
///
/// # Safety
/// `trace` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn objs_trace_rates(trace: *const ObjsTrace, out: *mut ObjsRates) -> ObjsStatus {
    guard(|| {
        let t = ref_arg(trace, "trace")?;
        let out = out_arg(out, "out")?;
        let r = compute_rates(&t.trace, &t.world)?;
        *out = ObjsRates {
            r_r: r.r_r,
            r_c: r.r_c,
            r_i: r.r_i,
            rooms_num: r.rooms.num,
            rooms_den: r.rooms.den,
            carriers_num: r.carriers.num,
            carriers_den: r.carriers.den,
            placements_num: r.placements.num,
            placements_den: r.placements.den,
            found: r.found,
        };
        Ok(())
    })
}

/// Object search rate of a trace; `weights` may be null for the defaults.
///
/// # Safety
/// `trace` and `out` must be valid pointers; non-null `weights` must point to 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn objs_trace_osr(trace: *const ObjsTrace, weights: *const f64, out: *mut f64) -> ObjsStatus {
    guard(|| {
        let t = ref_arg(trace, "trace")?;
        let out = out_arg(out, "out")?;
        let w = weights_arg(weights);
        *out = compute_osr(&compute_rates(&t.trace, &t.world)?, w)?;
        Ok(())
    })
}

/// Totals and path-optimality ratios of a trace.
///
/// # Safety
/// `trace` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn objs_trace_stats(trace: *const ObjsTrace, out: *mut ObjsTraceStats) -> ObjsStatus {
    guard(|| {
        let t = ref_arg(trace, "trace")?;
        let out = out_arg(out, "out")?;
        let totals = t.trace.totals();
        let p = path_stats(&t.trace, None)?;
        *out = ObjsTraceStats {
            events: t.trace.events.len(),
            time: totals.time,
            chassis_length: totals.chassis_length,
            ee_length: totals.ee_length,
            ee_poses: totals.ee_poses,
            ee_ratio: p.ee_ratio.unwrap_or(f64::NAN),
            ch_ratio: p.ch_ratio.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

/// The trace as JSON lines (header first), owned by the caller.
///
/// # Safety
/// `trace` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn objs_trace_to_jsonl(trace: *const ObjsTrace, out: *mut *mut c_char) -> ObjsStatus {
    guard(|| {
        let t = ref_arg(trace, "trace")?;
        *out_arg(out, "out")? = owned_string(t.trace.to_jsonl());
        Ok(())
    })
}

unsafe fn weights_arg(weights: *const f64) -> [f64; 3] {
    if weights.is_null() {
        DEFAULT_WEIGHTS
    } else {
        let w = std::slice::from_raw_parts(weights, 3);
        [w[0], w[1], w[2]]
    }
}

/// Weighted object search rate from three rates in percent; `weights` may be null.
///
/// # Safety
/// `out` must be a valid pointer; non-null `weights` must point to 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn objs_osr(r_r: f64, r_c: f64, r_i: f64, weights: *const f64, out: *mut f64) -> ObjsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = osr(r_r, r_c, r_i, weights_arg(weights))?;
        Ok(())
    })
}

/// Shortest open path from `start` through `count` points (xyz triples), at most 10 points.
///
/// # Safety
/// `start` must point to 3 doubles, `points` to `3 * count` doubles (may be null when
/// `count` is 0), and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn objs_optimal_tour_length(
    start: *const f64,
    points: *const f64,
    count: usize,
    out: *mut f64,
) -> ObjsStatus {
    guard(|| {
        let start = ref_arg(start, "start")?;
        let out = out_arg(out, "out")?;
        if count > 0 && points.is_null() {
            return Err(Failure::new(ObjsStatus::NullPointer, "`points` is null"));
        }
        let start = std::slice::from_raw_parts(start, 3);
        let flat = if count == 0 { &[][..] } else { std::slice::from_raw_parts(points, 3 * count) };
        let pts: Vec<[f64; 3]> = flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        if flat.iter().chain(start).any(|v| !v.is_finite()) {
            return Err(Failure::new(ObjsStatus::InvalidArgument, "coordinates must be finite"));
        }
        *out = optimal_tour_length(&pts, [start[0], start[1], start[2]])?;
        Ok(())
    })
}
