//! Trace invariants over real trials on the flat and on generated scenes.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Cursor;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use objsearch::geometry::Feature;
use objsearch::scene::{build_flat, generate_scene, GenerationConfig, PlanCache, SimSetup, World};
use objsearch::search::{
    detect_target, explore_scene, run_trial, Event, Phase, SearchContext, Strategy, StrategyConfig, TargetSpot, Trace,
};
use objsearch::semantics::{KnowledgeBase, MockRanker};

fn trial(world: &World, setup: &SimSetup, target: &str, cfg: &StrategyConfig) -> Trace {
    let kb = Arc::new(KnowledgeBase::shipped());
    let plans = PlanCache::new(world, setup.clone());
    let ctx = SearchContext::new(&plans, &kb);
    run_trial(&ctx, target, &mut MockRanker::new(kb.clone()), cfg)
}

/// The flat plus two generated scenes, each with its target.
fn scenes(setup: &SimSetup) -> Vec<(World, String)> {
    let mut out = vec![(World::new(build_flat(setup)).unwrap(), "orange".to_string())];
    for seed in [5, 23] {
        let g = generate_scene(&GenerationConfig::default(), seed).unwrap();
        out.push((World::new(g.scene).unwrap(), g.target));
    }
    out
}

/// Every structural property a finished trace must have; returns the first broken one.
fn check_trace(world: &World, trace: &Trace) -> Result<(), String> {
    let scene = &world.scene;
    let room_of: BTreeMap<&str, &str> = world
        .carrier_room
        .iter()
        .enumerate()
        .map(|(c, &r)| (scene.carriers[c].id.as_str(), scene.rooms[r].id.as_str()))
        .collect();
    let mut prev_t = 0.0;
    let mut in_search = false;
    let mut explored = BTreeSet::new();
    let mut room: Option<&str> = None;
    let mut carrier: Option<&str> = None;
    let mut inspected = BTreeSet::new();
    let mut opened = BTreeSet::new();
    let mut last_hit = false;
    for (i, e) in trace.events.iter().enumerate() {
        if e.seq != i {
            return Err(format!("seq {} at index {i}", e.seq));
        }
        if !(e.t >= prev_t) {
            return Err(format!("clock went back at {i}"));
        }
        prev_t = e.t;
        if i + 1 < trace.events.len() && matches!(e.event, Event::TargetFound { .. } | Event::TargetNotFound) {
            return Err(format!("outcome before the end at {i}"));
        }
        match &e.event {
            Event::RoomEntered { room: r, phase } => {
                match phase {
                    Phase::Exploration if in_search => return Err(format!("exploration after search at {i}")),
                    Phase::Exploration => {
                        if !explored.insert(r.as_str()) {
                            return Err(format!("{r} explored twice"));
                        }
                    }
                    Phase::Search => in_search = true,
                }
                room = Some(r);
                carrier = None;
            }
            Event::CarrierInspected { carrier: c, label } => {
                if explored.len() != scene.rooms.len() {
                    return Err(format!("{c} inspected before the map was complete"));
                }
                if room_of.get(c.as_str()).copied() != room {
                    return Err(format!("{c} inspected from {room:?}"));
                }
                if scene.carrier(c).map(|k| k.label.as_str()) != Some(label.as_str()) {
                    return Err(format!("{c} reported as {label}"));
                }
                carrier = Some(c);
            }
            Event::FeatureInspected { carrier: c, feature, .. } | Event::FeatureSkipped { carrier: c, feature, .. } => {
                if carrier != Some(c.as_str()) {
                    return Err(format!("{c}:{feature:?} outside its carrier"));
                }
                if !inspected.insert((c.clone(), *feature)) {
                    return Err(format!("{c}:{feature:?} visited twice"));
                }
            }
            Event::OpenAction { carrier: c, success } => {
                if carrier != Some(c.as_str()) {
                    return Err(format!("{c} opened from elsewhere"));
                }
                let openable = scene.carrier(c).is_some_and(|k| k.openable);
                if *success != openable {
                    return Err(format!("open of {c} reported {success}"));
                }
                if *success {
                    opened.insert(c.clone());
                }
            }
            Event::DetectionCheck { carrier: c, feature, hit } => {
                if carrier != Some(c.as_str()) {
                    return Err(format!("check on {c} outside its carrier"));
                }
                if *feature == Feature::Inside && !opened.contains(c) {
                    return Err(format!("inside of {c} checked while closed"));
                }
                last_hit = *hit;
            }
            Event::TargetFound { carrier: c, feature } => {
                let item = scene.items_labelled(&trace.header.target).next().ok_or("found a missing target")?;
                if (&item.carrier, item.feature) != (c, *feature) {
                    return Err(format!("found at {c}:{feature:?}, placed at {}:{:?}", item.carrier, item.feature));
                }
                if !last_hit {
                    return Err("found without a hit".into());
                }
            }
            _ => {}
        }
    }
    if !matches!(trace.events.last().map(|e| &e.event), Some(Event::TargetFound { .. } | Event::TargetNotFound)) {
        return Err("trace does not end in an outcome".into());
    }
    let tot = trace.totals();
    let tm = &trace.header.config.time;
    let expect = tot.chassis_length / tm.base_speed
        + tot.ee_length / tm.ee_speed
        + tot.ee_poses as f64 * tm.inspect_seconds
        + tot.opens as f64 * tm.open_seconds;
    if (tot.time - expect).abs() > 1e-9 * expect.max(1.0) || (prev_t - expect).abs() > 1e-9 * expect.max(1.0) {
        return Err(format!("time {} and clock {prev_t} against {expect}", tot.time));
    }
    Ok(())
}

#[test]
fn traces_keep_their_invariants() {
    let setup = SimSetup::default();
    let mut found = 0;
    for (world, target) in scenes(&setup) {
        for strategy in Strategy::ALL {
            for seed in [1, 4] {
                let cfg = StrategyConfig { strategy, seed, noise: 0.1, ..StrategyConfig::default() };
                let trace = trial(&world, &setup, &target, &cfg);
                if let Err(e) = check_trace(&world, &trace) {
                    panic!("{} {} seed {seed}: {e}", world.scene.name, strategy.as_str());
                }
                found += trace.found() as usize;
            }
        }
    }
    assert!(found > 0);
}

#[test]
fn trace_is_reproducible_and_round_trips() {
    let setup = SimSetup::default();
    let world = World::new(build_flat(&setup)).unwrap();
    for strategy in Strategy::ALL {
        let cfg = StrategyConfig { strategy, seed: 9, noise: 0.3, ..StrategyConfig::default() };
        let a = trial(&world, &setup, "orange", &cfg);
        let b = trial(&world, &setup, "orange", &cfg);
        assert_eq!(a, b);
        let text = a.to_jsonl();
        let back = Trace::read_jsonl(Cursor::new(text.as_bytes())).unwrap();
        assert_eq!(back, a);
        assert_eq!(back.to_jsonl(), text);
    }
}

#[test]
fn missing_target_is_not_found_after_everything() {
    let setup = SimSetup::default();
    let world = World::new(build_flat(&setup)).unwrap();
    let trace = trial(&world, &setup, "unicorn", &StrategyConfig::default());
    assert!(!trace.found());
    check_trace(&world, &trace).unwrap();
}

#[test]
fn exploration_maps_every_room_once() {
    let setup = SimSetup::default();
    let kb = Arc::new(KnowledgeBase::shipped());
    for (world, _) in scenes(&setup) {
        let plans = PlanCache::new(&world, setup.clone());
        let ctx = SearchContext::new(&plans, &kb);
        let (mut map, events) = explore_scene(&ctx, &mut MockRanker::new(kb.clone()), 3);
        assert!(map.is_complete(&world));
        assert_eq!(map.rooms.len(), world.scene.rooms.len());
        let entered = events.iter().filter(|e| matches!(e, Event::RoomEntered { phase: Phase::Exploration, .. })).count();
        assert_eq!(entered, world.scene.rooms.len());
        let before = map.global.clone();
        for r in map.rooms.clone() {
            assert_eq!(map.integrate(&r.cells), 0);
        }
        assert_eq!(map.global, before);
    }
}

#[test]
fn detection_needs_an_open_carrier_and_a_view() {
    let setup = SimSetup::default();
    let world = World::new(build_flat(&setup)).unwrap();
    let (carrier, feature, point) = world.item_point("orange").unwrap();
    assert_eq!(feature, Feature::Inside);
    let spot = TargetSpot { carrier, feature, point };
    let plan = world.plan(carrier, feature, &setup).unwrap().plan;
    let poses: Vec<_> = plan.entries.iter().flat_map(|e| e.ee.iter().copied()).collect();
    let cam = &setup.camera;
    let open = BTreeSet::from([carrier]);
    let closed = BTreeSet::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0);

    assert!(poses.iter().all(|p| !detect_target(p, cam, &world, &spot, &closed, 0.0, &mut rng)));
    let seeing: Vec<_> = poses.iter().filter(|p| detect_target(p, cam, &world, &spot, &open, 0.0, &mut rng)).collect();
    assert!(!seeing.is_empty());

    let hits = (0..2000).filter(|_| detect_target(seeing[0], cam, &world, &spot, &open, 0.5, &mut rng)).count();
    assert!((800..1200).contains(&hits), "{hits} hits at noise 0.5");
    let hits = (0..2000).filter(|_| detect_target(seeing[0], cam, &world, &spot, &open, 0.999, &mut rng)).count();
    assert!(hits < 20, "{hits} hits at noise 0.999");
}
