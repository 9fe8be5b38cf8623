//! A platoon of IDM drivers starting from rest behind a slow leader on the
//! western route. Prints each follower's gap and speed every few seconds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use roundabout::env::EnvConfig;
use roundabout::traffic::{
    build_network, idm_acceleration, leader_of, step_vehicle, ControllerKind, Route, VehicleId, VehicleState,
};

fn main() -> roundabout::Result<()> {
    let cfg = EnvConfig::default();
    let net = build_network(&cfg.geometry)?;
    let limits = cfg.limits();
    let idm = cfg.idm;
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    // vehicle 0 is the leader; followers start 4 m apart
    let mut platoon: Vec<VehicleState> = (0..5)
        .map(|i| VehicleState {
            id: VehicleId(i),
            route: Route::West,
            pos: 20.0 - 4.0 * i as f64,
            speed: 0.0,
            length: net.vehicle_length,
            kind: ControllerKind::Idm,
            entry_time: 0.0,
            exit_time: None,
        })
        .collect();

    for t in 0..20 {
        let mut next = Vec::with_capacity(platoon.len());
        for v in &platoon {
            let accel = match leader_of(&platoon, v.id, &net) {
                Some(l) => idm_acceleration(v.speed, v.speed - l.speed, l.gap, &idm, &mut rng)?,
                // the leader cruises at 3 m/s
                None => (3.0 - v.speed).clamp(limits.max_decel, limits.max_accel),
            };
            next.push(step_vehicle(v, accel, cfg.dt, &limits));
        }
        platoon = next;
        if t % 4 == 3 {
            let row: Vec<String> = platoon
                .windows(2)
                .map(|w| format!("gap {:5.2} v {:4.2}", w[0].rear() - w[1].pos, w[1].speed))
                .collect();
            println!("t={:>2}s  {}", t + 1, row.join(" | "));
        }
    }
    Ok(())
}
