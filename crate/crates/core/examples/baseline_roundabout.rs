//! All-IDM episodes: northern drivers yield to circulating western traffic,
//! so they take longer. Prints per-route travel times and entrance stops.

use roundabout::harness::{compute_metrics, metering_signature, run_baseline, ExperimentConfig};
use roundabout::traffic::{build_network, Route};

fn main() -> roundabout::Result<()> {
    let cfg = ExperimentConfig::default();
    let records = run_baseline(&cfg, 100)?;
    let net = build_network(&cfg.env.geometry)?;

    let summary = compute_metrics(&records, &records)?;
    println!(
        "{} episodes, {} vehicles, mean travel time {:.2} s, mean speed {:.2} m/s, crashes {}",
        summary.trials, summary.vehicles, summary.mean_travel_time, summary.mean_speed, summary.crashes
    );
    let sig = metering_signature(&records, &net);
    for route in Route::ALL {
        let e = sig.entrances[route.index()];
        println!(
            "{route:>5}: travel time {:5.2} s, entrance-zone speed {:4.2} m/s, vehicles stopped at entrance {}",
            e.mean_travel_time, e.zone_speed, e.yield_count
        );
    }
    Ok(())
}
