use std::collections::BTreeSet;

use rand::Rng;

use super::map::{bfs_order, explore};
use super::{stream, Event, Exec, Phase, SearchContext, Strategy, StrategyConfig, Trace, STREAM_WALK};
use crate::geometry::Feature;
use crate::planner::ChassisPose;
use crate::semantics::{
    carriers_request, classify_carriers, classify_request, features_request, rank_carriers, rank_features, rank_rooms,
    rooms_request, Ranker,
};

/// Feature order used by the coverage baseline.
pub const COVERAGE_FEATURES: [Feature; 4] = [Feature::Top, Feature::Sides, Feature::Bottom, Feature::Inside];

/// Dispatches on `cfg.strategy`. The ranker is consulted for room typing during
/// exploration by every strategy and for the descent by the semantic one only.
pub fn run_trial(ctx: &SearchContext<'_>, target: &str, ranker: &mut dyn Ranker, cfg: &StrategyConfig) -> Trace {
    match cfg.strategy {
        Strategy::Godhs => run_godhs(ctx, target, ranker, cfg),
        Strategy::Coverage => run_coverage(ctx, target, ranker, cfg),
        Strategy::Random => run_random(ctx, target, ranker, cfg),
    }
}

/// Explore, then rank room types, carriers within each room and features within each
/// carrier, executing feature plans in ranked order until the target is seen.
pub fn run_godhs(ctx: &SearchContext<'_>, target: &str, ranker: &mut dyn Ranker, cfg: &StrategyConfig) -> Trace {
    let mut exec = Exec::new(ctx, cfg, target, Some(Strategy::Godhs), ranker.name());
    let mut map = explore(&mut exec, ranker);
    let world = exec.world();

    let mut types: Vec<String> = Vec::new();
    for r in &map.rooms {
        if !types.contains(&r.room_type) {
            types.push(r.room_type.clone());
        }
    }
    let resp = rank_rooms(&types, target, ranker);
    exec.push(Event::ranking(&rooms_request(&types, target), &resp), 0.0);
    let rooms: Vec<usize> = resp
        .labels
        .iter()
        .flat_map(|t| map.rooms.iter().filter(move |r| &r.room_type == t).map(|r| r.room))
        .collect();

    for ri in rooms {
        exec.enter_room(ri, Phase::Search);
        let room = &world.scene.rooms[ri];
        let room_type = map.room_type(ri).unwrap_or_default().to_string();

        let resp = classify_carriers(&room.objects, target, &room_type, ranker);
        exec.push(Event::ranking(&classify_request(&room.objects, target, &room_type), &resp), 0.0);
        let instances: Vec<usize> = room
            .carriers
            .iter()
            .filter_map(|id| world.scene.carrier_index(id))
            .filter(|&ci| resp.labels.contains(&world.scene.carriers[ci].label))
            .collect();
        for &ci in &instances {
            map.scan_carrier(ci, &world.carriers[ci].cloud);
        }
        let mut labels: Vec<String> = Vec::new();
        for &ci in &instances {
            let l = &world.scene.carriers[ci].label;
            if !labels.contains(l) {
                labels.push(l.clone());
            }
        }
        if labels.is_empty() {
            continue;
        }
        let resp = rank_carriers(&labels, target, &room_type, ranker);
        exec.push(Event::ranking(&carriers_request(&labels, target, &room_type), &resp), 0.0);
        let order: Vec<usize> = resp
            .labels
            .iter()
            .flat_map(|l| instances.iter().copied().filter(move |&ci| &world.scene.carriers[ci].label == l))
            .collect();

        for ci in order {
            exec.carrier_inspected(ci);
            let label = world.scene.carriers[ci].label.clone();
            let (features, resp) = rank_features(&label, target, ranker);
            exec.push(Event::ranking(&features_request(&label, target), &resp), 0.0);
            for f in features {
                if exec.inspect_feature(ci, f) {
                    return exec.finish();
                }
            }
        }
    }
    exec.finish()
}

/// Explore, then every room in breadth-first door order, every carrier in listing
/// order and every feature in [`COVERAGE_FEATURES`] order.
pub fn run_coverage(ctx: &SearchContext<'_>, target: &str, ranker: &mut dyn Ranker, cfg: &StrategyConfig) -> Trace {
    let mut exec = Exec::new(ctx, cfg, target, Some(Strategy::Coverage), ranker.name());
    explore(&mut exec, ranker);
    let world = exec.world();
    for ri in bfs_order(world, None) {
        exec.enter_room(ri, Phase::Search);
        for ci in room_carriers(&exec, ri) {
            exec.carrier_inspected(ci);
            for f in COVERAGE_FEATURES {
                if world.carriers[ci].features.get(f).is_empty() {
                    continue;
                }
                if exec.inspect_feature(ci, f) {
                    return exec.finish();
                }
            }
        }
    }
    exec.finish()
}

/// Explore, then repeatedly pick an unvisited room uniformly, exhaust its carriers in
/// uniformly drawn order, and each carrier's features likewise. Draws come from a
/// ChaCha8 stream of the trial seed.
pub fn run_random(ctx: &SearchContext<'_>, target: &str, ranker: &mut dyn Ranker, cfg: &StrategyConfig) -> Trace {
    let mut exec = Exec::new(ctx, cfg, target, Some(Strategy::Random), ranker.name());
    explore(&mut exec, ranker);
    let world = exec.world();
    let mut rng = stream(cfg.seed, STREAM_WALK);
    let mut rooms = bfs_order(world, None);
    rooms.sort_unstable();
    while !rooms.is_empty() {
        let ri = rooms.remove(rng.random_range(0..rooms.len()));
        exec.enter_room(ri, Phase::Search);
        let mut carriers = room_carriers(&exec, ri);
        while !carriers.is_empty() {
            let ci = carriers.remove(rng.random_range(0..carriers.len()));
            exec.carrier_inspected(ci);
            let mut features: Vec<Feature> =
                Feature::ALL.into_iter().filter(|f| !world.carriers[ci].features.get(*f).is_empty()).collect();
            while !features.is_empty() {
                let f = features.remove(rng.random_range(0..features.len()));
                if exec.inspect_feature(ci, f) {
                    return exec.finish();
                }
            }
        }
    }
    exec.finish()
}

fn room_carriers(exec: &Exec<'_>, ri: usize) -> Vec<usize> {
    let world = exec.world();
    let mut seen = BTreeSet::new();
    world.scene.rooms[ri]
        .carriers
        .iter()
        .filter_map(|id| world.scene.carrier_index(id))
        .filter(|ci| seen.insert(*ci))
        .collect()
}

/// Executes a single feature plan from `start` with no exploration or ranking; used by
/// the sorting ablation. The trace header carries no strategy.
pub fn run_plan(
    ctx: &SearchContext<'_>,
    carrier: usize,
    feature: Feature,
    start: ChassisPose,
    target: &str,
    cfg: &StrategyConfig,
) -> Trace {
    let mut exec = Exec::new(ctx, cfg, target, None, "none");
    exec.room = ctx.world().carrier_room[carrier];
    exec.pos = start;
    exec.inspect_feature(carrier, feature);
    exec.finish()
}
