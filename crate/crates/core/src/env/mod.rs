//! The roundabout as a finite-horizon MDP.
//!
//! Each episode releases one group of vehicles at each entrance. The head of
//! each group is an AV driven by the 2-element action (north, west); every
//! other vehicle follows the IDM. Group members are inserted one per step at
//! the start of their approach, at rest, once the previous member has opened
//! a gap of `s0 + 1` metres.

mod config;
mod observation;
mod reward;

pub use config::{EnvConfig, IntRange, Interval, PenaltyWeights};
pub use observation::{
    av_index, build_observation, entrance_distance_index, entrance_speed_index, AvSlot,
    Observation, Scene, AV_FEATURES, AV_HEADWAY, AV_POS, AV_SPEED, AV_TAILWAY, ENTRANCE_DISTANCE,
    ENTRANCE_SLOTS, ENTRANCE_SPEED, INFLOW_LENGTHS, OBS_DIM, QUEUE_COUNTS, RING_BLOCK, RING_SLOTS,
};
pub use reward::{
    compute_reward, ActionHistory, RewardBreakdown, CRAWL_SPEED, JERK_WINDOW, STANDSTILL_SPEED,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::traffic::{
    build_network, detect_collisions, detect_crossings, idm_acceleration, leader_pairs, network::nearest_leader, step_vehicle,
    CollisionEvent, ControllerKind, Route, RouteNetwork, VehicleId, VehicleState,
};

pub const ACTION_DIM: usize = 2;

/// Requested accelerations: element 0 drives the northern AV, element 1 the
/// western AV.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ActionCommand(pub [f64; ACTION_DIM]);

impl ActionCommand {
    pub fn new(north: f64, west: f64) -> Self {
        ActionCommand([north, west])
    }

    pub fn clipped(&self, max_decel: f64, max_accel: f64) -> Self {
        ActionCommand(self.0.map(|a| a.clamp(max_decel, max_accel)))
    }
}

/// Who drives the group heads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Control {
    /// Group heads follow the actions.
    Learned,
    /// Group heads are ordinary IDM vehicles and actions are ignored.
    Baseline,
}

/// Stochastic episode setup drawn at reset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupDraw {
    /// [north, west]
    pub sizes: [usize; 2],
    /// Release delays (s), [north, west].
    pub delays: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleSnapshot {
    pub id: VehicleId,
    pub route: Route,
    pub pos: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepInfo {
    pub crashes: Vec<CollisionEvent>,
    /// Active vehicles after the step, including ones inserted this step.
    pub vehicles: Vec<VehicleSnapshot>,
    pub active: usize,
    pub exited: Vec<VehicleId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// The agent's view. The environment itself reports the true state here;
    /// perturbation channels overwrite it.
    pub obs: Observation,
    pub true_obs: Observation,
    pub reward: RewardBreakdown,
    pub done: bool,
    /// Ended by the horizon rather than by crash or completion.
    pub truncated: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone)]
pub struct RoundaboutEnv {
    cfg: EnvConfig,
    net: RouteNetwork,
    control: Control,
    rng: ChaCha8Rng,
    draw: GroupDraw,
    time: f64,
    steps: usize,
    vehicles: Vec<VehicleState>,
    finished: Vec<VehicleState>,
    crashed: Vec<VehicleState>,
    crash_events: Vec<CollisionEvent>,
    released: [bool; 2],
    pending: [usize; 2],
    avs: [AvSlot; 2],
    history: ActionHistory,
    next_id: u32,
    done: bool,
}

/// Builds an environment and resets it with `seed`.
pub fn reset(cfg: &EnvConfig, seed: u64) -> Result<(Observation, RoundaboutEnv)> {
    let mut env = RoundaboutEnv::new(cfg.clone(), Control::Learned)?;
    let obs = env.reset(seed);
    Ok((obs, env))
}

impl RoundaboutEnv {
    pub fn new(cfg: EnvConfig, control: Control) -> Result<Self> {
        cfg.validate()?;
        let net = build_network(&cfg.geometry)?;
        let mut env = Self {
            cfg,
            net,
            control,
            rng: ChaCha8Rng::seed_from_u64(0),
            draw: GroupDraw {
                sizes: [0, 0],
                delays: [0.0, 0.0],
            },
            time: 0.0,
            steps: 0,
            vehicles: Vec::new(),
            finished: Vec::new(),
            crashed: Vec::new(),
            crash_events: Vec::new(),
            released: [false; 2],
            pending: [0; 2],
            avs: [AvSlot::Staged; 2],
            history: ActionHistory::default(),
            next_id: 0,
            done: false,
        };
        env.reset(0);
        Ok(env)
    }

    /// Starts a new episode: draws group sizes and release delays and
    /// releases whatever is due at time 0.
    pub fn reset(&mut self, seed: u64) -> Observation {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let c = &self.cfg;
        let north = self.rng.random_range(c.north_group_range.min..=c.north_group_range.max);
        let west = self.rng.random_range(c.west_group_range.min..=c.west_group_range.max);
        let north_delay = self.rng.random_range(c.north_delay_range.min..=c.north_delay_range.max);
        let west_delay = self.rng.random_range(c.west_delay_range.min..=c.west_delay_range.max);
        self.draw = GroupDraw {
            sizes: [north, west],
            delays: [north_delay, west_delay],
        };
        self.time = 0.0;
        self.steps = 0;
        self.vehicles.clear();
        self.finished.clear();
        self.crashed.clear();
        self.crash_events.clear();
        self.released = [false; 2];
        self.pending = self.draw.sizes;
        self.avs = [AvSlot::Staged; 2];
        self.history = ActionHistory::default();
        self.next_id = 0;
        self.done = false;
        self.release_and_insert();
        self.observe()
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn network(&self) -> &RouteNetwork {
        &self.net
    }

    pub fn control(&self) -> Control {
        self.control
    }

    pub fn draw(&self) -> GroupDraw {
        self.draw
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn vehicles(&self) -> &[VehicleState] {
        &self.vehicles
    }

    pub fn finished(&self) -> &[VehicleState] {
        &self.finished
    }

    pub fn crashed(&self) -> &[VehicleState] {
        &self.crashed
    }

    pub fn crash_events(&self) -> &[CollisionEvent] {
        &self.crash_events
    }

    pub fn av_slots(&self) -> [AvSlot; 2] {
        self.avs
    }

    pub fn history(&self) -> &ActionHistory {
        &self.history
    }

    /// Vehicles put on the network so far.
    pub fn spawned(&self) -> usize {
        self.next_id as usize
    }

    pub fn observe(&self) -> Observation {
        build_observation(
            &Scene {
                vehicles: &self.vehicles,
                avs: self.avs,
                group_sizes: self.draw.sizes,
            },
            &self.net,
            &self.cfg,
        )
    }

    /// Replaces the current traffic with a hand-built scene. Vehicle ids must
    /// be unique; AV slots refer to vehicles by id.
    pub fn load_scene(&mut self, vehicles: Vec<VehicleState>, avs: [AvSlot; 2]) {
        self.next_id = vehicles.iter().map(|v| v.id.0 + 1).max().unwrap_or(0);
        self.vehicles = vehicles;
        self.avs = avs;
        self.pending = [0; 2];
        self.released = [true; 2];
        self.done = false;
    }

    fn av_of(&self, id: VehicleId) -> Option<usize> {
        self.avs.iter().position(|s| *s == AvSlot::Active(id))
    }

    fn release_and_insert(&mut self) {
        let spacing = self.cfg.idm.min_gap + 1.0;
        for route in Route::ALL {
            let r = route.index();
            if !self.released[r] && self.time + 1e-9 >= self.draw.delays[r] {
                self.released[r] = true;
            }
            if !self.released[r] || self.pending[r] == 0 {
                continue;
            }
            let length = self.net.vehicle_length;
            let clear = self
                .vehicles
                .iter()
                .filter(|v| v.route == route)
                .all(|v| v.pos - v.length >= spacing);
            if !clear {
                continue;
            }
            let head = self.pending[r] == self.draw.sizes[r];
            let kind = match (head, self.control, route) {
                (true, Control::Learned, Route::North) => ControllerKind::RlNorth,
                (true, Control::Learned, Route::West) => ControllerKind::RlWest,
                _ => ControllerKind::Idm,
            };
            let id = VehicleId(self.next_id);
            self.next_id += 1;
            self.pending[r] -= 1;
            if head {
                self.avs[r] = AvSlot::Active(id);
            }
            self.vehicles.push(VehicleState {
                id,
                route,
                pos: 0.0,
                speed: 0.0,
                length,
                kind,
                entry_time: self.time,
                exit_time: None,
            });
        }
    }

    fn retire_av(&mut self, id: VehicleId) {
        if let Some(av) = self.av_of(id) {
            self.avs[av] = AvSlot::Gone;
            self.history.clear(av);
        }
    }

    /// Advances one `dt`. Actions for AVs that are not on the network are
    /// discarded; under [`Control::Baseline`] the whole action is ignored.
    pub fn step(&mut self, action: &ActionCommand) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::Contract("step called on a finished episode".into()));
        }
        let limits = self.cfg.limits();
        let applied = action.clipped(limits.max_decel, limits.max_accel);

        let pairs = leader_pairs(&self.vehicles, &self.net);
        let mut accels = Vec::with_capacity(self.vehicles.len());
        for v in &self.vehicles {
            let av = self.av_of(v.id).filter(|_| self.control == Control::Learned);
            let accel = match av {
                Some(i) => applied.0[i],
                None => {
                    let (gap, dv) = match nearest_leader(&self.vehicles, v, &self.net, true) {
                        Some(l) => (l.gap, v.speed - l.speed),
                        None => (f64::INFINITY, 0.0),
                    };
                    idm_acceleration(v.speed, dv, gap, &self.cfg.idm, &mut self.rng)?
                }
            };
            accels.push((accel, av));
        }
        for (av, accel) in accels.iter().filter_map(|(a, av)| av.map(|i| (i, *a))) {
            self.history.push(av, limits.clamp_accel(accel));
        }
        for (v, (accel, _)) in self.vehicles.iter_mut().zip(&accels) {
            *v = step_vehicle(v, *accel, self.cfg.dt, &limits);
        }
        self.time += self.cfg.dt;
        self.steps += 1;

        let mut exited = Vec::new();
        let mut i = 0;
        while i < self.vehicles.len() {
            let len = self.net.route(self.vehicles[i].route).length;
            if self.vehicles[i].pos >= len {
                let mut v = self.vehicles.remove(i);
                v.pos = len;
                v.exit_time = Some(self.time);
                exited.push(v.id);
                self.retire_av(v.id);
                self.finished.push(v);
            } else {
                i += 1;
            }
        }

        let mut crashes = detect_collisions(&self.vehicles, &self.net, self.time);
        for ev in detect_crossings(&pairs, &self.vehicles, &self.net, self.time) {
            if !crashes.iter().any(|c| c.follower_id == ev.follower_id) {
                crashes.push(ev);
            }
        }
        if !crashes.is_empty() {
            let mut involved: Vec<VehicleId> = crashes
                .iter()
                .flat_map(|e| [e.follower_id, e.leader_id])
                .collect();
            involved.sort();
            involved.dedup();
            for id in involved {
                if let Some(pos) = self.vehicles.iter().position(|v| v.id == id) {
                    let v = self.vehicles.remove(pos);
                    self.retire_av(v.id);
                    self.crashed.push(v);
                }
            }
            self.crash_events.extend(crashes.iter().cloned());
        } else {
            self.release_and_insert();
        }

        let speeds: Vec<f64> = self.vehicles.iter().map(|v| v.speed).collect();
        let reward = compute_reward(&speeds, &self.history, &self.cfg);

        let all_out = self.vehicles.is_empty() && self.pending == [0, 0];
        let horizon = self.steps >= self.cfg.horizon;
        let crashed = !crashes.is_empty();
        self.done = crashed || all_out || horizon;
        let obs = self.observe();
        Ok(StepOutcome {
            obs,
            true_obs: obs,
            reward,
            done: self.done,
            truncated: horizon && !crashed && !all_out,
            info: StepInfo {
                crashes,
                vehicles: self
                    .vehicles
                    .iter()
                    .map(|v| VehicleSnapshot {
                        id: v.id,
                        route: v.route,
                        pos: v.pos,
                        speed: v.speed,
                    })
                    .collect(),
                active: self.vehicles.len(),
                exited,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_to_end(env: &mut RoundaboutEnv, action: ActionCommand) -> Vec<StepOutcome> {
        let mut out = Vec::new();
        while !env.is_done() {
            out.push(env.step(&action).unwrap());
        }
        out
    }

    #[test]
    fn reset_is_deterministic() {
        let cfg = EnvConfig::default();
        let (o1, e1) = reset(&cfg, 42).unwrap();
        let (o2, e2) = reset(&cfg, 42).unwrap();
        assert_eq!(o1, o2);
        assert_eq!(e1.draw(), e2.draw());
        assert!(o1.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn group_draws_within_ranges() {
        let cfg = EnvConfig::default();
        let mut env = RoundaboutEnv::new(cfg, Control::Learned).unwrap();
        for seed in 0..200 {
            env.reset(seed);
            let d = env.draw();
            assert!((2..=5).contains(&d.sizes[0]));
            assert!((2..=8).contains(&d.sizes[1]));
            assert!((0.0..=4.0).contains(&d.delays[0]));
            assert!((0.0..=1.0).contains(&d.delays[1]));
        }
    }

    #[test]
    fn action_clipped_to_limits() {
        let a = ActionCommand::new(2.0, 0.5).clipped(-3.0, 1.0);
        assert_eq!(a, ActionCommand::new(1.0, 0.5));
        let a = ActionCommand::new(-7.0, 0.0).clipped(-3.0, 1.0);
        assert_eq!(a.0[0], -3.0);
    }

    #[test]
    fn heads_are_avs_and_history_records_applied_actions() {
        let (_, mut env) = reset(&EnvConfig::default(), 1).unwrap();
        let mut steps = 0;
        while env.av_slots().iter().any(|s| *s == AvSlot::Staged) {
            env.step(&ActionCommand::new(2.0, 2.0)).unwrap();
            steps += 1;
            assert!(steps < 10);
        }
        env.step(&ActionCommand::new(2.0, -9.0)).unwrap();
        for (r, kind) in [(0, ControllerKind::RlNorth), (1, ControllerKind::RlWest)] {
            let AvSlot::Active(id) = env.av_slots()[r] else {
                panic!("AV not active")
            };
            let v = env.vehicles().iter().find(|v| v.id == id).unwrap();
            assert_eq!(v.kind, kind);
        }
        assert_eq!(*env.history().actions(1).back().unwrap(), -3.0);
        assert_eq!(*env.history().actions(0).back().unwrap(), 1.0);
    }

    #[test]
    fn step_after_done_is_an_error() {
        let (_, mut env) = reset(&EnvConfig::default(), 3).unwrap();
        run_to_end(&mut env, ActionCommand::new(1.0, 1.0));
        assert!(matches!(
            env.step(&ActionCommand::default()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn overlap_scene_terminates_with_crash() {
        let cfg = EnvConfig::default();
        let mut env = RoundaboutEnv::new(cfg, Control::Learned).unwrap();
        let mk = |id, pos, speed| VehicleState {
            id: VehicleId(id),
            route: Route::West,
            pos,
            speed,
            length: 1.0,
            kind: ControllerKind::RlWest,
            entry_time: 0.0,
            exit_time: None,
        };
        // AV at full speed right behind a stopped vehicle
        let mut leader = mk(1, 12.0, 0.0);
        leader.kind = ControllerKind::Idm;
        env.load_scene(vec![mk(0, 9.0, 8.0), leader], [AvSlot::Gone, AvSlot::Active(VehicleId(0))]);
        let out = env.step(&ActionCommand::new(0.0, 1.0)).unwrap();
        assert!(out.done);
        assert!(!out.truncated);
        assert_eq!(out.info.crashes.len(), 1);
        assert_eq!(env.crashed().len(), 2);
        assert_eq!(env.av_slots()[1], AvSlot::Gone);
    }

    #[test]
    fn baseline_ignores_actions() {
        let cfg = EnvConfig::default();
        let mut a = RoundaboutEnv::new(cfg.clone(), Control::Baseline).unwrap();
        let mut b = RoundaboutEnv::new(cfg, Control::Baseline).unwrap();
        a.reset(9);
        b.reset(9);
        let ra = run_to_end(&mut a, ActionCommand::new(-3.0, -3.0));
        let rb = run_to_end(&mut b, ActionCommand::new(1.0, 0.3));
        assert_eq!(ra, rb);
    }

    #[test]
    fn exited_avs_discard_actions() {
        // Once both AVs are gone every remaining vehicle is IDM-driven, so
        // the rest of the episode is the same whatever the actions.
        let cfg = EnvConfig::default();
        let (_, mut env) = reset(&cfg, 5).unwrap();
        while env.av_slots().iter().any(|s| *s != AvSlot::Gone) {
            env.step(&ActionCommand::new(1.0, 1.0)).unwrap();
            assert!(!env.is_done() || env.crash_events().is_empty());
        }
        let mut other = env.clone();
        let ra = run_to_end(&mut env, ActionCommand::new(-3.0, 1.0));
        let rb = run_to_end(&mut other, ActionCommand::new(0.7, -2.0));
        assert_eq!(ra, rb);
    }

    #[test]
    fn vehicle_count_is_conserved() {
        let cfg = EnvConfig::default();
        for seed in 0..20 {
            let (_, mut env) = reset(&cfg, seed).unwrap();
            let mut k = 0u64;
            while !env.is_done() {
                let a = ActionCommand::new(((k * 7 + seed) % 5) as f64 - 3.0, ((k + seed) % 4) as f64 - 2.0);
                let out = env.step(&a).unwrap();
                k += 1;
                assert_eq!(
                    env.spawned(),
                    env.finished().len() + env.vehicles().len() + env.crashed().len()
                );
                assert!(out.true_obs.iter().all(|x| (0.0..=1.0).contains(x)));
                assert!(env.steps() <= cfg.horizon);
            }
        }
    }

    #[test]
    fn completed_episode_ends_with_everyone_out() {
        let cfg = EnvConfig::default();
        let mut env = RoundaboutEnv::new(cfg, Control::Baseline).unwrap();
        env.reset(12);
        let out = run_to_end(&mut env, ActionCommand::default());
        let last = out.last().unwrap();
        assert!(last.done && !last.truncated);
        assert_eq!(last.reward, RewardBreakdown::default());
        let total: usize = env.draw().sizes.iter().sum();
        assert_eq!(env.finished().len(), total);
        for v in env.finished() {
            assert!(v.exit_time.unwrap() > v.entry_time);
        }
    }
}
