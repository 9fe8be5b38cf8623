//! Microscopic traffic: IDM car-following, vehicle kinematics, roundabout
//! geometry, leader queries and collision detection.

mod idm;
pub(crate) mod network;
mod vehicle;

pub use idm::{desired_headway, idm_acceleration, IdmParams};
pub use network::{
    build_network, detect_collisions, detect_crossings, leader_of, leader_pairs, signed_gap, CollisionEvent, GeometryConfig, Leader,
    LeaderKind, Location, RouteGeometry, RouteNetwork, Segment, SegmentKind,
};
pub use vehicle::{step_vehicle, ControllerKind, Route, SpeedLimits, VehicleId, VehicleState};
