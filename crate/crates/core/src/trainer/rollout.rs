use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::env::{ActionCommand, Control, EnvConfig, Observation, RoundaboutEnv, ACTION_DIM};
use crate::error::Result;
use crate::perturbation::{AdversaryAction, NoiseChannel, ADVERSARY_DIM};
use crate::policy::{log_prob_with_grad, sample_action, GaussianPolicyOutput, MlpParameters};

use super::gae::Boundary;

const AGENT_STREAM: u64 = 1;
const ADVERSARY_STREAM: u64 = 2;
const NOISE_STREAM: u64 = 3;

/// SplitMix64 finalizer, used to derive independent per-episode seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// How the adversary slot behaves during a rollout.
#[derive(Debug, Clone, Copy)]
pub enum AdversaryPolicy<'a> {
    /// Outputs zero every step without drawing random numbers.
    Zero,
    Sampled(&'a MlpParameters),
}

/// One episode seen from both seats.
#[derive(Debug, Clone, Default)]
pub struct Episode {
    pub seed: u64,
    pub agent_obs: Vec<Observation>,
    pub true_obs: Vec<Observation>,
    /// Sampled, before any perturbation or clipping.
    pub actions: Vec<[f64; ACTION_DIM]>,
    pub log_probs: Vec<f64>,
    pub adv_actions: Vec<[f64; ADVERSARY_DIM]>,
    pub adv_log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub truncated: bool,
    pub crashed: bool,
    /// The state after the last step, used to bootstrap truncated episodes.
    pub final_agent_obs: Observation,
    pub final_true_obs: Observation,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    /// The adversary's reward stream, the negation of the agent's.
    pub fn adversary_rewards(&self) -> Vec<f64> {
        self.rewards.iter().map(|r| -r).collect()
    }
}

fn policy_step(
    policy: &MlpParameters,
    obs: &Observation,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, f64)> {
    let mean = policy.output(obs.as_slice())?;
    let out = GaussianPolicyOutput {
        std: policy.log_std().iter().map(|s| s.exp()).collect(),
        mean,
    };
    let action = sample_action(&out, rng);
    let (lp, _, _) = log_prob_with_grad(&out.mean, policy.log_std(), &action);
    Ok((action, lp))
}

/// Plays one episode with a stochastic agent.
///
/// The environment, the agent's sampling, the adversary's sampling and the
/// Gaussian noise each draw from their own stream derived from `seed`, so
/// switching one of them off leaves the others untouched.
pub fn run_episode(
    env_cfg: &EnvConfig,
    agent: &MlpParameters,
    adversary: AdversaryPolicy<'_>,
    channel: &NoiseChannel,
    seed: u64,
) -> Result<Episode> {
    let mut env = RoundaboutEnv::new(env_cfg.clone(), Control::Learned)?;
    let mut true_obs = env.reset(seed);
    let mut agent_rng = stream_rng(seed, AGENT_STREAM);
    let mut adv_rng = stream_rng(seed, ADVERSARY_STREAM);
    let mut noise_rng = stream_rng(seed, NOISE_STREAM);
    let mut ep = Episode {
        seed,
        ..Episode::default()
    };
    loop {
        let adv = match adversary {
            AdversaryPolicy::Zero => AdversaryAction::default(),
            AdversaryPolicy::Sampled(p) => {
                let (a, lp) = policy_step(p, &true_obs, &mut adv_rng)?;
                ep.adv_log_probs.push(lp);
                AdversaryAction::from_slice(&a)?
            }
        };
        let agent_obs = channel.observe(&true_obs, &adv, &mut noise_rng);
        let (action, lp) = policy_step(agent, &agent_obs, &mut agent_rng)?;
        let command = ActionCommand([action[0], action[1]]);
        let applied = channel.act(&command, &adv, &mut noise_rng);
        let out = env.step(&applied)?;

        ep.agent_obs.push(agent_obs);
        ep.true_obs.push(true_obs);
        ep.actions.push(command.0);
        ep.log_probs.push(lp);
        ep.adv_actions.push(adv.0);
        ep.rewards.push(out.reward.total);
        true_obs = out.true_obs;
        if out.done {
            ep.truncated = out.truncated;
            ep.crashed = !out.info.crashes.is_empty();
            ep.final_true_obs = true_obs;
            // what the agent would have seen next; only used for bootstrapping
            let adv = match adversary {
                AdversaryPolicy::Zero => AdversaryAction::default(),
                AdversaryPolicy::Sampled(p) => AdversaryAction::from_slice(&p.output(true_obs.as_slice())?)?,
            };
            ep.final_agent_obs = channel.observe(&true_obs, &adv, &mut noise_rng);
            return Ok(ep);
        }
    }
}

/// Plays episodes with seeds `mix_seed(base, k)` for `k = 0, 1, ...` until at
/// least `min_steps` steps are collected. Episodes run in parallel waves, but
/// the result depends only on the inputs, not on the thread count.
pub fn collect_episodes(
    env_cfg: &EnvConfig,
    agent: &MlpParameters,
    adversary: AdversaryPolicy<'_>,
    channel: &NoiseChannel,
    base_seed: u64,
    min_steps: usize,
) -> Result<Vec<Episode>> {
    let wave = rayon::current_num_threads().max(1);
    let mut episodes: Vec<Episode> = Vec::new();
    let mut steps = 0;
    let mut next = 0u64;
    while steps < min_steps {
        let batch: Vec<Result<Episode>> = (next..next + wave as u64)
            .into_par_iter()
            .map(|k| run_episode(env_cfg, agent, adversary, channel, mix_seed(base_seed, k)))
            .collect();
        next += wave as u64;
        for ep in batch {
            if steps >= min_steps {
                break;
            }
            let ep = ep?;
            steps += ep.len();
            episodes.push(ep);
        }
    }
    Ok(episodes)
}

/// Flattened episodes with per-step boundaries.
#[derive(Debug, Clone, Default)]
pub struct RolloutBatch {
    pub episodes: Vec<Episode>,
}

impl RolloutBatch {
    pub fn steps(&self) -> usize {
        self.episodes.iter().map(Episode::len).sum()
    }

    pub fn episode_returns(&self) -> Vec<f64> {
        self.episodes.iter().map(Episode::total_reward).collect()
    }

    pub fn adversary_returns(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.adversary_rewards().iter().sum()).collect()
    }

    /// Boundaries for a learner whose truncated episodes bootstrap with
    /// `bootstrap(episode)`.
    pub fn boundaries(&self, mut bootstrap: impl FnMut(&Episode) -> Result<f64>) -> Result<Vec<Boundary>> {
        let mut out = Vec::with_capacity(self.steps());
        for ep in &self.episodes {
            out.extend(std::iter::repeat_n(Boundary::Continue, ep.len().saturating_sub(1)));
            out.push(if ep.truncated {
                Boundary::Truncated(bootstrap(ep)?)
            } else {
                Boundary::Terminal
            });
        }
        Ok(out)
    }
}
