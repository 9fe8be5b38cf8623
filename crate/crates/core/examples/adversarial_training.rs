//! Zero-sum training: a second PPO learner perturbs the agent's observations
//! and actions (within 0.1 per element) and is rewarded with the negated
//! reward.
//!
//! cargo run --release --example adversarial_training -- [iterations]

use roundabout::env::EnvConfig;
use roundabout::perturbation::NoiseMode;
use roundabout::trainer::{PpoConfig, Trainer};

fn main() -> roundabout::Result<()> {
    let iterations = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let ppo = PpoConfig {
        batch_size: 2000,
        ..PpoConfig::default()
    };
    let mut trainer = Trainer::adversarial(EnvConfig::default(), ppo, NoiseMode::ActionState, 1, false)?;
    for _ in 0..iterations {
        let log = trainer.train_iteration()?;
        let adv_kl = log.adversary.as_ref().map_or(0.0, |a| a.approx_kl);
        println!(
            "iter {:>3}  agent {:7.2}  adversary {:7.2}  sum {}  agent kl {:.4}  adversary kl {:.4}",
            log.iteration,
            log.mean_episode_reward,
            log.mean_adversary_reward,
            log.mean_episode_reward + log.mean_adversary_reward,
            log.approx_kl,
            adv_kl
        );
    }
    Ok(())
}
