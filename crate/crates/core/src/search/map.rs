use std::collections::{BTreeMap, BTreeSet, VecDeque};

use nalgebra::Point3;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{stream, Event, Exec, Phase, SearchContext, StrategyConfig, STREAM_EXPLORE};
use crate::geometry::Cell2;
use crate::scene::World;
use crate::semantics::{infer_room_type, room_type_request, Ranker};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappedRoom {
    /// Scene room index.
    pub room: usize,
    /// Floor cells seen by the room scan.
    pub cells: BTreeSet<Cell2>,
    pub objects: Vec<String>,
    pub room_type: String,
}

/// What the robot knows: global floor map, per-room maps with their room
/// correspondence, and scanned carrier clouds with theirs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneMap {
    pub global: BTreeSet<Cell2>,
    pub rooms: Vec<MappedRoom>,
    /// Scene room index to its entry in `rooms`.
    pub room_entry: BTreeMap<usize, usize>,
    pub carrier_clouds: Vec<Vec<Point3<f64>>>,
    /// Scene carrier index to its entry in `carrier_clouds`.
    pub carrier_entry: BTreeMap<usize, usize>,
}

impl SceneMap {
    /// Adds the cells of `local` not yet in the global map; returns how many were new.
    pub fn integrate(&mut self, local: &BTreeSet<Cell2>) -> usize {
        local.iter().filter(|c| self.global.insert(**c)).count()
    }

    pub fn add_room(&mut self, room: MappedRoom) {
        self.integrate(&room.cells);
        if let Some(&i) = self.room_entry.get(&room.room) {
            self.rooms[i] = room;
        } else {
            self.room_entry.insert(room.room, self.rooms.len());
            self.rooms.push(room);
        }
    }

    pub fn scan_carrier(&mut self, carrier: usize, cloud: &[Point3<f64>]) {
        if !self.carrier_entry.contains_key(&carrier) {
            self.carrier_entry.insert(carrier, self.carrier_clouds.len());
            self.carrier_clouds.push(cloud.to_vec());
        }
    }

    pub fn room_type(&self, room: usize) -> Option<&str> {
        self.room_entry.get(&room).map(|&i| self.rooms[i].room_type.as_str())
    }

    /// Every room reachable from the entry room has been mapped.
    pub fn is_complete(&self, world: &World) -> bool {
        reachable(world).iter().all(|r| self.room_entry.contains_key(r))
    }
}

fn reachable(world: &World) -> BTreeSet<usize> {
    let adj = world.scene.adjacency();
    let mut seen = BTreeSet::from([0]);
    let mut queue = VecDeque::from([0]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if seen.insert(v) {
                queue.push_back(v);
            }
        }
    }
    seen
}

/// Breadth-first room order from the entry room; neighbour order shuffled when a seed
/// is given, ascending room index otherwise.
pub(crate) fn bfs_order(world: &World, seed: Option<u64>) -> Vec<usize> {
    let adj = world.scene.adjacency();
    let mut rng = seed.map(|s| stream(s, STREAM_EXPLORE));
    let mut seen = BTreeSet::from([0]);
    let mut queue = VecDeque::from([0]);
    let mut order = Vec::new();
    while let Some(u) = queue.pop_front() {
        order.push(u);
        let mut next = adj[u].clone();
        if let Some(rng) = rng.as_mut() {
            next.shuffle(rng);
        }
        for v in next {
            if seen.insert(v) {
                queue.push_back(v);
            }
        }
    }
    order
}

pub(crate) fn explore(exec: &mut Exec<'_>, ranker: &mut dyn Ranker) -> SceneMap {
    let world = exec.world();
    let room_types = exec.ctx.kb.room_types.clone();
    let mut map = SceneMap::default();
    for ri in bfs_order(world, Some(exec.cfg.seed)) {
        exec.enter_room(ri, Phase::Exploration);
        let room = &world.scene.rooms[ri];
        let (room_type, resp) = infer_room_type(&room.objects, &room_types, ranker);
        exec.push(Event::ranking(&room_type_request(&room.objects, &room_types), &resp), 0.0);
        exec.push(
            Event::RoomTypeInferred { room: room.id.clone(), room_type: room_type.clone(), observed: room.objects.clone() },
            0.0,
        );
        map.add_room(MappedRoom { room: ri, cells: world.rooms[ri].cells.clone(), objects: room.objects.clone(), room_type });
    }
    debug_assert!(map.is_complete(world));
    map
}

/// Maps every reachable room in seeded breadth-first order, inferring each room's type.
/// Returns the map and the exploration events.
pub fn explore_scene(ctx: &SearchContext<'_>, ranker: &mut dyn Ranker, seed: u64) -> (SceneMap, Vec<Event>) {
    let cfg = StrategyConfig { seed, ..StrategyConfig::default() };
    let mut exec = Exec::new(ctx, &cfg, "", None, ranker.name());
    let map = explore(&mut exec, ranker);
    (map, exec.trace.events.into_iter().map(|e| e.event).collect())
}
