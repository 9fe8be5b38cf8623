//! Fixed 62-element normalized observation.
//!
//! | indices  | content                                                     |
//! |----------|-------------------------------------------------------------|
//! | 0..4     | northern AV: position, speed, tailway, headway              |
//! | 4..8     | western AV: position, speed, tailway, headway               |
//! | 8..34    | 13 ring slots in ring-coordinate order: (position, speed)   |
//! | 34..40   | distances to the north merge of the 6 closest north vehicles |
//! | 40..46   | same for the west merge                                      |
//! | 46..52   | speeds of the vehicles in 34..40                             |
//! | 52..58   | speeds of the vehicles in 40..46                             |
//! | 58, 59   | vehicles in the north / west entrance zone                  |
//! | 60, 61   | north / west inflow group sizes                             |
//!
//! Positions are divided by the vehicle's route length, speeds by `v_max`,
//! headway and tailway by the longest route, entrance distances by the
//! approach length and counts by the largest possible group. Missing ring
//! slots read `(0, 0)`; missing entrance vehicles read distance 1, speed 0.
//! An AV that has not been released reads position 0 and one that has left
//! reads position 1; both read speed 0 and headway/tailway 1.

use std::ops::{Deref, DerefMut, Range};

use super::config::EnvConfig;
use crate::traffic::{network::nearest_leader, Route, RouteNetwork, VehicleId, VehicleState};

pub const OBS_DIM: usize = 62;
pub const RING_SLOTS: usize = 13;
pub const ENTRANCE_SLOTS: usize = 6;

pub const AV_FEATURES: Range<usize> = 0..8;
pub const RING_BLOCK: Range<usize> = 8..34;
pub const ENTRANCE_DISTANCE: Range<usize> = 34..46;
pub const ENTRANCE_SPEED: Range<usize> = 46..58;
pub const QUEUE_COUNTS: Range<usize> = 58..60;
pub const INFLOW_LENGTHS: Range<usize> = 60..62;

/// Offsets within an AV's 4-element block.
pub const AV_POS: usize = 0;
pub const AV_SPEED: usize = 1;
pub const AV_TAILWAY: usize = 2;
pub const AV_HEADWAY: usize = 3;

pub fn av_index(av: usize, feature: usize) -> usize {
    AV_FEATURES.start + 4 * av + feature
}

pub fn entrance_distance_index(route: Route, slot: usize) -> usize {
    ENTRANCE_DISTANCE.start + ENTRANCE_SLOTS * route.index() + slot
}

pub fn entrance_speed_index(route: Route, slot: usize) -> usize {
    ENTRANCE_SPEED.start + ENTRANCE_SLOTS * route.index() + slot
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Default for Observation {
    fn default() -> Self {
        Observation([0.0; OBS_DIM])
    }
}

impl Deref for Observation {
    type Target = [f64; OBS_DIM];
    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

impl DerefMut for Observation {
    fn deref_mut(&mut self) -> &mut Self::Target {
        &mut self.0
    }
}

impl Observation {
    pub fn clamp_unit(&mut self) {
        for x in self.0.iter_mut() {
            *x = x.clamp(0.0, 1.0);
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Whereabouts of one AV slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AvSlot {
    Staged,
    Active(VehicleId),
    Gone,
}

/// What the observation is built from.
#[derive(Debug, Clone, Copy)]
pub struct Scene<'a> {
    pub vehicles: &'a [VehicleState],
    pub avs: [AvSlot; 2],
    pub group_sizes: [usize; 2],
}

fn tailway(vehicles: &[VehicleState], id: VehicleId, net: &RouteNetwork) -> Option<f64> {
    vehicles
        .iter()
        .filter_map(|v| nearest_leader(vehicles, v, net, false).filter(|l| l.id == id))
        .map(|l| l.gap)
        .min_by(f64::total_cmp)
}

pub fn build_observation(scene: &Scene<'_>, net: &RouteNetwork, cfg: &EnvConfig) -> Observation {
    let mut obs = Observation::default();
    let far = net.longest_route();
    let max_group = cfg.max_group_size() as f64;
    let speed_norm = |v: f64| v / cfg.v_max;

    for (av, slot) in scene.avs.iter().enumerate() {
        let block = &mut obs.0[av_index(av, 0)..av_index(av, 4)];
        block[AV_TAILWAY] = 1.0;
        block[AV_HEADWAY] = 1.0;
        match *slot {
            AvSlot::Staged => {}
            AvSlot::Gone => block[AV_POS] = 1.0,
            AvSlot::Active(id) => {
                let Some(v) = scene.vehicles.iter().find(|v| v.id == id) else {
                    continue;
                };
                block[AV_POS] = v.pos / net.route(v.route).length;
                block[AV_SPEED] = speed_norm(v.speed);
                if let Some(t) = tailway(scene.vehicles, id, net) {
                    block[AV_TAILWAY] = t / far;
                }
                if let Some(l) = nearest_leader(scene.vehicles, v, net, false) {
                    block[AV_HEADWAY] = l.gap / far;
                }
            }
        }
    }

    let mut ring: Vec<(f64, &VehicleState)> = scene
        .vehicles
        .iter()
        .filter(|v| net.route(v.route).on_ring(v.pos))
        .map(|v| (net.route(v.route).corridor_coord(v.pos), v))
        .collect();
    ring.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.id.cmp(&b.1.id)));
    for (slot, (_, v)) in ring.iter().take(RING_SLOTS).enumerate() {
        let i = RING_BLOCK.start + 2 * slot;
        obs.0[i] = v.pos / net.route(v.route).length;
        obs.0[i + 1] = speed_norm(v.speed);
    }

    for route in Route::ALL {
        let g = net.route(route);
        let mut queue: Vec<&VehicleState> = scene
            .vehicles
            .iter()
            .filter(|v| v.route == route && g.on_approach(v.pos))
            .collect();
        queue.sort_by(|a, b| b.pos.total_cmp(&a.pos).then(a.id.cmp(&b.id)));
        for slot in 0..ENTRANCE_SLOTS {
            let (dist, speed) = match queue.get(slot) {
                Some(v) => (g.distance_to_merge(v.pos) / g.approach_length(), speed_norm(v.speed)),
                None => (1.0, 0.0),
            };
            obs.0[entrance_distance_index(route, slot)] = dist;
            obs.0[entrance_speed_index(route, slot)] = speed;
        }
        let queued = queue.iter().filter(|v| g.in_entrance_zone(v.pos)).count();
        obs.0[QUEUE_COUNTS.start + route.index()] = queued as f64 / max_group;
        obs.0[INFLOW_LENGTHS.start + route.index()] = scene.group_sizes[route.index()] as f64 / max_group;
    }

    obs.clamp_unit();
    obs
}
