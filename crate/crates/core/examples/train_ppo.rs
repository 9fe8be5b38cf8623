//! Desk-scale PPO on the clean environment, then a paired comparison with the
//! all-IDM baseline. Writes the log and weights under the output directory
//! (ROUNDABOUT_OUTPUT_DIR or runs/train_ppo).
//!
//! cargo run --release --example train_ppo -- [iterations]

use roundabout::harness::{
    compute_metrics, metering_entrance, metering_signature, run_baseline, run_policy, train, ExperimentConfig,
    TrainMode,
};
use roundabout::traffic::build_network;

fn main() -> roundabout::Result<()> {
    let iterations = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(40);
    let mut cfg = ExperimentConfig {
        output_dir: "runs/train_ppo".into(),
        ..ExperimentConfig::default()
    };
    cfg.ppo.batch_size = 2000;
    cfg.ppo.iterations = iterations;
    let out = cfg.resolved_output_dir();

    let (_, art) = train(&cfg, TrainMode::SingleAgent, &out, |log| {
        println!(
            "iter {:>3}  mean episode reward {:7.2}  episodes {:>3}  crashes {:>2}  kl {:.4}",
            log.iteration, log.mean_episode_reward, log.episodes, log.crashes, log.approx_kl
        );
    })?;

    let policy = run_policy(&cfg, &art.policy, 50)?;
    let baseline = run_baseline(&cfg, 50)?;
    let m = compute_metrics(&policy, &baseline)?;
    println!(
        "policy {:.2} s vs baseline {:.2} s ({:+.2}% time saved), crashes {}",
        m.mean_travel_time, m.baseline_mean_travel_time, m.percent_time_saved, m.crashes
    );
    let net = build_network(&cfg.env.geometry)?;
    let (p, b) = (metering_signature(&policy, &net), metering_signature(&baseline, &net));
    for k in 0..2 {
        println!(
            "entrance {k}: lead speed in zone {:.2} (baseline {:.2})",
            p.entrances[k].lead_zone_speed, b.entrances[k].lead_zone_speed
        );
    }
    match metering_entrance(&p, &b) {
        Some(r) => println!("the {r} group meters itself to let the other group through"),
        None => println!("no metering signature"),
    }
    println!("weights: {}", art.policy.display());
    Ok(())
}
