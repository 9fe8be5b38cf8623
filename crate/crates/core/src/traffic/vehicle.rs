use std::fmt;

use serde::{Deserialize, Serialize};

/// The two entry routes through the roundabout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    North,
    West,
}

impl Route {
    pub const ALL: [Route; 2] = [Route::North, Route::West];

    /// Index into per-route arrays (north = 0, west = 1).
    pub fn index(self) -> usize {
        match self {
            Route::North => 0,
            Route::West => 1,
        }
    }

    pub fn other(self) -> Route {
        match self {
            Route::North => Route::West,
            Route::West => Route::North,
        }
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Route::North => "north",
            Route::West => "west",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Idm,
    RlNorth,
    RlWest,
}

impl ControllerKind {
    pub fn is_rl(self) -> bool {
        !matches!(self, ControllerKind::Idm)
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct VehicleId(pub u32);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "veh{}", self.0)
    }
}

/// Longitudinal state of one vehicle. `pos` is the front bumper's arc length
/// along its route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: VehicleId,
    pub route: Route,
    pub pos: f64,
    pub speed: f64,
    pub length: f64,
    pub kind: ControllerKind,
    pub entry_time: f64,
    pub exit_time: Option<f64>,
}

impl VehicleState {
    pub fn rear(&self) -> f64 {
        self.pos - self.length
    }
}

/// Environment-wide speed and acceleration bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedLimits {
    pub v_max: f64,
    pub max_accel: f64,
    /// Negative.
    pub max_decel: f64,
}

impl Default for SpeedLimits {
    fn default() -> Self {
        Self {
            v_max: 8.0,
            max_accel: 1.0,
            max_decel: -3.0,
        }
    }
}

impl SpeedLimits {
    pub fn clamp_accel(&self, accel: f64) -> f64 {
        accel.clamp(self.max_decel, self.max_accel)
    }
}

/// Semi-implicit Euler: the clamped acceleration updates speed first, and the
/// new speed moves the vehicle.
pub fn step_vehicle(state: &VehicleState, accel: f64, dt: f64, limits: &SpeedLimits) -> VehicleState {
    debug_assert!(dt > 0.0);
    let accel = limits.clamp_accel(accel);
    let speed = (state.speed + accel * dt).clamp(0.0, limits.v_max);
    VehicleState {
        speed,
        pos: state.pos + speed * dt,
        ..state.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn car(pos: f64, speed: f64) -> VehicleState {
        VehicleState {
            id: VehicleId(0),
            route: Route::North,
            pos,
            speed,
            length: 1.0,
            kind: ControllerKind::Idm,
            entry_time: 0.0,
            exit_time: None,
        }
    }

    #[test]
    fn speed_floor() {
        let next = step_vehicle(&car(5.0, 0.0), -1.0, 1.0, &SpeedLimits::default());
        assert_eq!(next.speed, 0.0);
        assert_eq!(next.pos, 5.0);
    }

    #[test]
    fn speed_cap() {
        let next = step_vehicle(&car(5.0, 7.5), 1.0, 1.0, &SpeedLimits::default());
        assert_eq!(next.speed, 8.0);
        assert_eq!(next.pos, 13.0);
    }

    #[test]
    fn uniform_motion() {
        let next = step_vehicle(&car(5.0, 4.0), 0.0, 1.0, &SpeedLimits::default());
        assert_eq!(next.pos, 9.0);
    }

    proptest! {
        #[test]
        fn bounds_respected(speed in 0.0..8.0f64, accel in -50.0..50.0f64, dt in 0.05..2.0f64) {
            let lim = SpeedLimits::default();
            let s = car(0.0, speed);
            let next = step_vehicle(&s, accel, dt, &lim);
            prop_assert!((0.0..=lim.v_max).contains(&next.speed));
            let applied = (next.speed - speed) / dt;
            prop_assert!(applied >= lim.max_decel - 1e-9 && applied <= lim.max_accel + 1e-9);
            prop_assert!(next.pos >= s.pos);
        }
    }
}
