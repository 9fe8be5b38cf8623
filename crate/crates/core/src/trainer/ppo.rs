use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{entropy, log_prob_with_grad, MlpParameters};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_epsilon: f64,
    /// Environment steps collected per iteration.
    pub batch_size: usize,
    pub iterations: usize,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub learning_rate: f64,
    pub value_learning_rate: f64,
    /// Epochs stop once the approximate KL to the rollout policy exceeds this.
    pub kl_target: f64,
    pub entropy_coef: f64,
    /// Global gradient-norm cap per network; 0 disables it.
    pub max_grad_norm: f64,
    /// Rewards are multiplied by this before advantages and value targets are
    /// computed. Logged rewards are never scaled.
    pub reward_scale: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.999,
            gae_lambda: 0.97,
            clip_epsilon: 0.2,
            batch_size: 20_000,
            iterations: 100,
            epochs: 10,
            minibatch_size: 256,
            learning_rate: 3e-4,
            value_learning_rate: 1e-3,
            kl_target: 0.01,
            entropy_coef: 0.0,
            max_grad_norm: 0.5,
            reward_scale: 0.05,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::config(format!("ppo: {what}")));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(self.gae_lambda > 0.0 && self.gae_lambda <= 1.0) {
            return bad("gae_lambda must lie in (0, 1]");
        }
        if !(self.clip_epsilon > 0.0) {
            return bad("clip_epsilon must be positive");
        }
        if self.batch_size == 0 || self.epochs == 0 || self.minibatch_size == 0 {
            return bad("batch_size, epochs and minibatch_size must be positive");
        }
        for (name, x) in [
            ("learning_rate", self.learning_rate),
            ("value_learning_rate", self.value_learning_rate),
            ("entropy_coef", self.entropy_coef),
            ("max_grad_norm", self.max_grad_norm),
        ] {
            if !(x >= 0.0 && x.is_finite()) {
                return bad(&format!("{name} must be finite and nonnegative"));
            }
        }
        if !(self.kl_target > 0.0) {
            return bad("kl_target must be positive");
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return bad("reward_scale must be positive");
        }
        Ok(())
    }
}

/// `min(r * A, clamp(r, 1 - eps, 1 + eps) * A)`.
pub fn ppo_clip_objective(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    (ratio * advantage).min(clipped * advantage)
}

/// Derivative of [`ppo_clip_objective`] in `ratio`: `A` while the unclipped
/// term is the minimum, otherwise 0. On a tie the unclipped branch is used,
/// so the gradient at the clip boundary is `A`.
pub fn ppo_clip_grad(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    if ratio * advantage <= clipped * advantage {
        advantage
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// One descent step along `grad`.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        assert_eq!(theta.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..theta.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            theta[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

fn clip_norm(grad: &mut [f64], max_norm: f64) {
    if max_norm <= 0.0 {
        return;
    }
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
}

/// A policy, its critic and their optimizer states.
#[derive(Debug, Clone)]
pub struct Learner {
    pub policy: MlpParameters,
    pub value: MlpParameters,
    pi_opt: Adam,
    v_opt: Adam,
}

impl Learner {
    pub fn new(policy: MlpParameters, value: MlpParameters, cfg: &PpoConfig) -> Self {
        let pi_opt = Adam::new(policy.len(), cfg.learning_rate);
        let v_opt = Adam::new(value.len(), cfg.value_learning_rate);
        Self {
            policy,
            value,
            pi_opt,
            v_opt,
        }
    }
}

/// On-policy samples for one learner.
#[derive(Debug, Clone, Default)]
pub struct Samples {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Samples {
    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    /// KL to the rollout policy after the last kept epoch.
    pub approx_kl: f64,
    /// KL after each epoch that ran, including a rolled-back one.
    pub epoch_kls: Vec<f64>,
    pub entropy: f64,
    /// Epochs whose policy update was kept.
    pub epochs: usize,
    pub rolled_back: bool,
}

/// Mean of `(r - 1) - ln r` over the batch, a nonnegative estimate of
/// `KL(old || new)`.
pub fn approx_kl(policy: &MlpParameters, samples: &Samples) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..samples.len() {
        let mean = policy.output(&samples.obs[i])?;
        let (lp, _, _) = log_prob_with_grad(&mean, policy.log_std(), &samples.actions[i]);
        let log_r = lp - samples.log_probs[i];
        total += log_r.exp_m1() - log_r;
    }
    Ok(total / samples.len() as f64)
}

fn finite(x: f64, what: &str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// Loss and gradient of the clipped surrogate (negated, to be minimized)
/// with the entropy bonus.
pub fn policy_loss_grad(
    policy: &MlpParameters,
    samples: &Samples,
    idx: &[usize],
    epsilon: f64,
    entropy_coef: f64,
) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; policy.len()];
    let b = idx.len() as f64;
    let mut loss = 0.0;
    for &i in idx {
        let trace = policy.trace(&samples.obs[i])?;
        let (lp, d_mean, d_ls) = log_prob_with_grad(trace.output(), policy.log_std(), &samples.actions[i]);
        let ratio = (lp - samples.log_probs[i]).exp();
        let a = samples.advantages[i];
        loss -= ppo_clip_objective(ratio, a, epsilon) / b;
        let d_lp = -ppo_clip_grad(ratio, a, epsilon) * ratio / b;
        if d_lp != 0.0 {
            let d_mean: Vec<f64> = d_mean.iter().map(|d| d * d_lp).collect();
            let d_ls: Vec<f64> = d_ls.iter().map(|d| d * d_lp).collect();
            policy.backward(&trace, &d_mean, &mut grad);
            policy.backward_log_std(&d_ls, &mut grad);
        }
    }
    if entropy_coef != 0.0 {
        loss -= entropy_coef * entropy(policy.log_std());
        let bonus = vec![-entropy_coef; policy.log_std().len()];
        policy.backward_log_std(&bonus, &mut grad);
    }
    Ok((loss, grad))
}

/// Half mean squared error of the value net and its gradient.
pub fn value_loss_grad(value: &MlpParameters, samples: &Samples, idx: &[usize]) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; value.len()];
    let b = idx.len() as f64;
    let mut loss = 0.0;
    for &i in idx {
        let trace = value.trace(&samples.obs[i])?;
        let err = trace.output()[0] - samples.returns[i];
        loss += 0.5 * err * err / b;
        value.backward(&trace, &[err / b], &mut grad);
    }
    Ok((loss, grad))
}

/// Minibatch epochs on the clipped objective and the value regression.
///
/// After every epoch the KL to the rollout policy is measured on the whole
/// batch. Above `kl_target` the remaining epochs are skipped; above three
/// times `kl_target` that epoch's policy step is undone as well. The learner
/// is only modified if every loss stays finite.
pub fn ppo_update<R: Rng + ?Sized>(
    learner: &mut Learner,
    samples: &Samples,
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<UpdateStats> {
    if samples.is_empty() {
        return Err(Error::Empty("ppo samples"));
    }
    let mut work = learner.clone();
    let mut stats = UpdateStats::default();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for _ in 0..cfg.epochs {
        let before = (work.policy.clone(), work.pi_opt.clone());
        order.shuffle(rng);
        let (mut pl, mut vl, mut batches) = (0.0, 0.0, 0.0);
        for idx in order.chunks(cfg.minibatch_size) {
            let (l, mut g) = policy_loss_grad(&work.policy, samples, idx, cfg.clip_epsilon, cfg.entropy_coef)?;
            pl += finite(l, "policy loss")?;
            clip_norm(&mut g, cfg.max_grad_norm);
            work.pi_opt.step(work.policy.theta_mut(), &g);

            let (l, mut g) = value_loss_grad(&work.value, samples, idx)?;
            vl += finite(l, "value loss")?;
            clip_norm(&mut g, cfg.max_grad_norm);
            work.v_opt.step(work.value.theta_mut(), &g);
            batches += 1.0;
        }
        work.policy.check_finite()?;
        work.value.check_finite()?;
        let kl = finite(approx_kl(&work.policy, samples)?, "approximate KL")?;
        stats.epoch_kls.push(kl);
        stats.policy_loss = pl / batches;
        stats.value_loss = vl / batches;
        if kl > 3.0 * cfg.kl_target {
            (work.policy, work.pi_opt) = before;
            stats.rolled_back = true;
            break;
        }
        stats.epochs += 1;
        stats.approx_kl = kl;
        if kl > cfg.kl_target {
            break;
        }
    }
    stats.entropy = entropy(work.policy.log_std());
    *learner = work;
    Ok(stats)
}
