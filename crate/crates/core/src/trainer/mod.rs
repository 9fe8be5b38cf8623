//! PPO with GAE for the agent, and the zero-sum loop in which a second PPO
//! learner perturbs the agent and is rewarded with the negated reward.
//!
//! Both learners are updated every iteration from the same rollouts. The
//! adversary acts on the unperturbed observation.

mod gae;
mod ppo;
mod rollout;

pub use gae::{compute_gae, Boundary};
pub use ppo::{
    approx_kl, policy_loss_grad, ppo_clip_grad, ppo_clip_objective, ppo_update, value_loss_grad, Adam, Learner,
    PpoConfig, Samples, UpdateStats,
};
pub use rollout::{collect_episodes, mix_seed, run_episode, stream_rng, AdversaryPolicy, Episode, RolloutBatch};

use serde::{Deserialize, Serialize};

use crate::env::{EnvConfig, Observation, ACTION_DIM, OBS_DIM};
use crate::error::{Error, Result};
use crate::perturbation::{NoiseChannel, NoiseMode, ADVERSARY_DIM};
use crate::policy::{value, MlpParameters};

const INIT_STREAM: u64 = 10;
const ADVERSARY_INIT_STREAM: u64 = 11;
const SHUFFLE_STREAM: u64 = 12;

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub iteration: usize,
    pub mean_episode_reward: f64,
    /// Zero outside adversarial training.
    pub mean_adversary_reward: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub approx_kl: f64,
    pub entropy: f64,
    pub epochs: usize,
    pub episodes: usize,
    pub steps: usize,
    pub crashes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adversary: Option<UpdateStats>,
}

#[derive(Debug, Clone)]
enum AdversarySeat {
    None,
    /// Adversarial channel with an adversary that always outputs zero and
    /// never learns.
    Frozen,
    Learning(Box<Learner>),
}

#[derive(Debug, Clone)]
pub struct Trainer {
    env: EnvConfig,
    ppo: PpoConfig,
    channel: NoiseChannel,
    seed: u64,
    agent: Learner,
    adversary: AdversarySeat,
    iteration: usize,
}

fn obs_rows(obs: &[Observation]) -> Vec<Vec<f64>> {
    obs.iter().map(|o| o.as_slice().to_vec()).collect()
}

impl Trainer {
    /// Single-agent training through `channel` (clean or Gaussian).
    pub fn new(env: EnvConfig, ppo: PpoConfig, channel: NoiseChannel, seed: u64) -> Result<Self> {
        env.validate()?;
        ppo.validate()?;
        if channel.is_adversarial() {
            return Err(Error::config("an adversarial channel needs Trainer::adversarial"));
        }
        let mut rng = stream_rng(seed, INIT_STREAM);
        let policy = MlpParameters::policy(OBS_DIM, ACTION_DIM, &mut rng)?;
        let value = MlpParameters::value(OBS_DIM, &mut rng)?;
        let agent = Learner::new(policy, value, &ppo);
        Ok(Self {
            env,
            ppo,
            channel,
            seed,
            agent,
            adversary: AdversarySeat::None,
            iteration: 0,
        })
    }

    /// Zero-sum training against a learned adversary restricted to `mode`.
    /// With `frozen` the adversary outputs zero and is never updated.
    pub fn adversarial(env: EnvConfig, ppo: PpoConfig, mode: NoiseMode, seed: u64, frozen: bool) -> Result<Self> {
        let mut t = Self::new(env, ppo, NoiseChannel::Clean, seed)?;
        t.channel = NoiseChannel::from_settings(crate::perturbation::NoiseKind::Adversarial, mode);
        if !t.channel.is_adversarial() {
            return Err(Error::config("adversarial training needs a noise mode other than none"));
        }
        t.adversary = if frozen {
            AdversarySeat::Frozen
        } else {
            let mut rng = stream_rng(seed, ADVERSARY_INIT_STREAM);
            let policy = MlpParameters::policy(OBS_DIM, ADVERSARY_DIM, &mut rng)?;
            let value = MlpParameters::value(OBS_DIM, &mut rng)?;
            AdversarySeat::Learning(Box::new(Learner::new(policy, value, &t.ppo)))
        };
        Ok(t)
    }

    pub fn env_config(&self) -> &EnvConfig {
        &self.env
    }

    pub fn ppo_config(&self) -> &PpoConfig {
        &self.ppo
    }

    pub fn channel(&self) -> &NoiseChannel {
        &self.channel
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn agent(&self) -> &Learner {
        &self.agent
    }

    pub fn adversary(&self) -> Option<&Learner> {
        match &self.adversary {
            AdversarySeat::Learning(l) => Some(l),
            _ => None,
        }
    }

    pub fn is_adversarial(&self) -> bool {
        !matches!(self.adversary, AdversarySeat::None)
    }

    fn iteration_seed(&self) -> u64 {
        mix_seed(self.seed, self.iteration as u64)
    }

    /// Rollouts of the current snapshot for the next iteration.
    pub fn collect(&self) -> Result<RolloutBatch> {
        let adversary = match &self.adversary {
            AdversarySeat::Learning(l) => AdversaryPolicy::Sampled(&l.policy),
            _ => AdversaryPolicy::Zero,
        };
        let episodes = collect_episodes(
            &self.env,
            &self.agent.policy,
            adversary,
            &self.channel,
            self.iteration_seed(),
            self.ppo.batch_size,
        )?;
        Ok(RolloutBatch { episodes })
    }

    fn samples(
        &self,
        batch: &RolloutBatch,
        learner: &Learner,
        obs: impl Fn(&Episode) -> (&[Observation], &Observation),
        actions: impl Fn(&Episode) -> Vec<Vec<f64>>,
        log_probs: impl Fn(&Episode) -> &[f64],
        sign: f64,
    ) -> Result<Samples> {
        let scale = sign * self.ppo.reward_scale;
        let mut s = Samples::default();
        let mut rewards = Vec::with_capacity(batch.steps());
        for ep in &batch.episodes {
            s.obs.extend(obs_rows(obs(ep).0));
            s.actions.extend(actions(ep));
            s.log_probs.extend_from_slice(log_probs(ep));
            rewards.extend(ep.rewards.iter().map(|r| scale * r));
        }
        let values = s.obs.iter().map(|o| value(&learner.value, o)).collect::<Result<Vec<_>>>()?;
        let boundaries = batch.boundaries(|ep| value(&learner.value, obs(ep).1.as_slice()))?;
        let (adv, returns) = compute_gae(&rewards, &values, &boundaries, self.ppo.gamma, self.ppo.gae_lambda)?;
        s.advantages = normalize(&adv);
        s.returns = returns;
        Ok(s)
    }

    /// Collects a batch and updates the agent (and a learning adversary).
    /// On error the trainer keeps its previous snapshot.
    pub fn train_iteration(&mut self) -> Result<TrainLog> {
        let batch = self.collect()?;
        self.update_from(&batch)
    }

    /// The update half of [`Trainer::train_iteration`] for an existing batch.
    pub fn update_from(&mut self, batch: &RolloutBatch) -> Result<TrainLog> {
        if batch.episodes.is_empty() {
            return Err(Error::Empty("rollout batch"));
        }
        let agent_samples = self.samples(
            batch,
            &self.agent,
            |ep| (&ep.agent_obs, &ep.final_agent_obs),
            |ep| ep.actions.iter().map(|a| a.to_vec()).collect(),
            |ep| &ep.log_probs,
            1.0,
        )?;
        let adversary_samples = match &self.adversary {
            AdversarySeat::Learning(l) => Some(self.samples(
                batch,
                l,
                |ep| (&ep.true_obs, &ep.final_true_obs),
                |ep| ep.adv_actions.iter().map(|a| a.to_vec()).collect(),
                |ep| &ep.adv_log_probs,
                -1.0,
            )?),
            _ => None,
        };

        let mut shuffle = stream_rng(self.iteration_seed(), SHUFFLE_STREAM);
        let mut agent = self.agent.clone();
        let stats = ppo_update(&mut agent, &agent_samples, &self.ppo, &mut shuffle)?;
        let mut adversary = self.adversary.clone();
        let adv_stats = match (&mut adversary, &adversary_samples) {
            (AdversarySeat::Learning(l), Some(s)) => Some(ppo_update(l, s, &self.ppo, &mut shuffle)?),
            _ => None,
        };
        self.agent = agent;
        self.adversary = adversary;

        let returns = batch.episode_returns();
        let n = returns.len() as f64;
        let log = TrainLog {
            iteration: self.iteration,
            mean_episode_reward: returns.iter().sum::<f64>() / n,
            mean_adversary_reward: if self.is_adversarial() {
                batch.adversary_returns().iter().sum::<f64>() / n
            } else {
                0.0
            },
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            approx_kl: stats.approx_kl,
            entropy: stats.entropy,
            epochs: stats.epochs,
            episodes: batch.episodes.len(),
            steps: batch.steps(),
            crashes: batch.episodes.iter().filter(|e| e.crashed).count(),
            adversary: adv_stats,
        };
        self.iteration += 1;
        Ok(log)
    }
}

/// Zero mean, unit variance; left centred only when the spread vanishes.
fn normalize(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd > 1e-8 {
        x.iter().map(|v| (v - mean) / sd).collect()
    } else {
        x.iter().map(|v| v - mean).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (EnvConfig, PpoConfig) {
        let env = EnvConfig {
            horizon: 60,
            ..EnvConfig::default()
        };
        let ppo = PpoConfig {
            batch_size: 150,
            epochs: 2,
            minibatch_size: 64,
            ..PpoConfig::default()
        };
        (env, ppo)
    }

    #[test]
    fn training_is_deterministic() {
        let (env, ppo) = small();
        let mut a = Trainer::new(env.clone(), ppo.clone(), NoiseChannel::Clean, 3).unwrap();
        let mut b = Trainer::new(env, ppo, NoiseChannel::Clean, 3).unwrap();
        for _ in 0..2 {
            assert_eq!(a.train_iteration().unwrap(), b.train_iteration().unwrap());
        }
        assert_eq!(a.agent().policy, b.agent().policy);
    }

    #[test]
    fn zero_learning_rate_keeps_snapshot() {
        let (env, mut ppo) = small();
        ppo.learning_rate = 0.0;
        ppo.value_learning_rate = 0.0;
        let mut t = Trainer::new(env, ppo, NoiseChannel::Clean, 1).unwrap();
        let before = t.agent().clone();
        let log = t.train_iteration().unwrap();
        assert_eq!(t.agent().policy, before.policy);
        assert_eq!(t.agent().value, before.value);
        assert!(log.steps >= 150);
        assert_eq!(log.iteration, 0);
    }

    #[test]
    fn frozen_adversary_matches_clean_training() {
        let (env, ppo) = small();
        let mut clean = Trainer::new(env.clone(), ppo.clone(), NoiseChannel::Clean, 9).unwrap();
        let mut frozen = Trainer::adversarial(env, ppo, NoiseMode::ActionState, 9, true).unwrap();
        for _ in 0..2 {
            let a = clean.train_iteration().unwrap();
            let b = frozen.train_iteration().unwrap();
            assert_eq!(a.mean_episode_reward, b.mean_episode_reward);
            assert_eq!(b.mean_adversary_reward, -b.mean_episode_reward);
        }
        assert_eq!(clean.agent().policy, frozen.agent().policy);
        assert_eq!(clean.agent().value, frozen.agent().value);
    }

    #[test]
    fn adversarial_bookkeeping_is_zero_sum() {
        let (env, ppo) = small();
        let mut t = Trainer::adversarial(env, ppo, NoiseMode::ActionState, 4, false).unwrap();
        let batch = t.collect().unwrap();
        for (a, b) in batch.episode_returns().iter().zip(batch.adversary_returns()) {
            assert_eq!(a + b, 0.0);
        }
        let log = t.update_from(&batch).unwrap();
        assert_eq!(log.mean_episode_reward + log.mean_adversary_reward, 0.0);
        assert!(log.adversary.is_some());
    }

    #[test]
    fn adversarial_channel_rejected_by_single_agent_constructor() {
        let (env, ppo) = small();
        let ch = NoiseChannel::from_settings(crate::perturbation::NoiseKind::Adversarial, NoiseMode::State);
        assert!(Trainer::new(env.clone(), ppo.clone(), ch, 0).is_err());
        assert!(Trainer::adversarial(env, ppo, NoiseMode::None, 0, false).is_err());
    }

    #[test]
    fn normalize_handles_constant_input() {
        assert_eq!(normalize(&[2.0, 2.0]), vec![0.0, 0.0]);
        let z = normalize(&[1.0, 2.0, 3.0]);
        assert!((z.iter().sum::<f64>()).abs() < 1e-12);
    }
}
