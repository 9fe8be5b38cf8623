//! What the agent sees through each perturbation channel for the same state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use roundabout::env::{self, ActionCommand, EnvConfig, OBS_DIM};
use roundabout::perturbation::{AdversaryAction, NoiseChannel, NoiseKind, NoiseMode, ADVERSARY_DIM};

fn main() -> roundabout::Result<()> {
    let (mut obs, mut sim) = env::reset(&EnvConfig::default(), 3)?;
    for _ in 0..6 {
        obs = sim.step(&ActionCommand::new(1.0, 1.0))?.true_obs;
    }
    let action = ActionCommand::new(0.5, -0.5);
    // an adversary pushing every element to its limit
    let adv = AdversaryAction([1.0; ADVERSARY_DIM]);

    for (name, channel) in [
        ("clean", NoiseChannel::Clean),
        ("gaussian state", NoiseChannel::from_settings(NoiseKind::Gaussian, NoiseMode::State)),
        ("gaussian action+state", NoiseChannel::from_settings(NoiseKind::Gaussian, NoiseMode::ActionState)),
        ("adversarial action+state", NoiseChannel::from_settings(NoiseKind::Adversarial, NoiseMode::ActionState)),
    ] {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let seen = channel.observe(&obs, &adv, &mut rng);
        let sent = channel.act(&action, &adv, &mut rng);
        let changed = (0..OBS_DIM).filter(|&i| seen[i] != obs[i]).count();
        let max_dev = (0..OBS_DIM).map(|i| (seen[i] - obs[i]).abs()).fold(0.0, f64::max);
        println!(
            "{name:>26}: {changed:2} of {OBS_DIM} elements moved (max {max_dev:.3}), action {:?} -> [{:.3}, {:.3}]",
            action.0, sent.0[0], sent.0[1]
        );
    }
    Ok(())
}
