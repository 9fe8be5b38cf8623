//! Noise between the environment and the agent: fixed Gaussian injection into
//! observations and actions, and a learned adversary's bounded perturbations.
//!
//! Observations are re-clamped to `[0, 1]` after any perturbation. Action
//! clipping to the vehicle limits stays with the environment.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::env::{
    av_index, ActionCommand, Observation, AV_POS, ENTRANCE_DISTANCE, INFLOW_LENGTHS, OBS_DIM,
    RING_BLOCK,
};
use crate::error::{Error, Result};

/// Std for entrance-distance (merge-edge position) elements.
pub const MERGE_EDGE_STD: f64 = 0.05;
/// Std for absolute position elements.
pub const POSITION_STD: f64 = 0.02;
/// Std for every other perturbed observation element.
pub const OTHER_STD: f64 = 0.1;
pub const ACTION_STD: f64 = 0.5;

pub const ADVERSARY_DIM: usize = 22;
pub const ADVERSARY_TARGETS: usize = 20;
/// Applied to every adversary output before it is added.
pub const ADVERSARY_SCALE: f64 = 0.1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    #[default]
    None,
    State,
    Action,
    ActionState,
}

impl NoiseMode {
    pub fn includes_state(self) -> bool {
        matches!(self, NoiseMode::State | NoiseMode::ActionState)
    }

    pub fn includes_action(self) -> bool {
        matches!(self, NoiseMode::Action | NoiseMode::ActionState)
    }
}

impl fmt::Display for NoiseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseMode::None => "none",
            NoiseMode::State => "state",
            NoiseMode::Action => "action",
            NoiseMode::ActionState => "action_state",
        })
    }
}

impl FromStr for NoiseMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(NoiseMode::None),
            "state" => Ok(NoiseMode::State),
            "action" => Ok(NoiseMode::Action),
            "action_state" | "action-state" => Ok(NoiseMode::ActionState),
            other => Err(Error::config(format!("unknown noise mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    Gaussian,
    Adversarial,
}

impl FromStr for NoiseKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(NoiseKind::Gaussian),
            "adversarial" => Ok(NoiseKind::Adversarial),
            other => Err(Error::config(format!("unknown noise kind `{other}`"))),
        }
    }
}

/// Per-element Gaussian noise levels.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseProfile {
    pub state_std: [f64; OBS_DIM],
    pub action_std: f64,
    pub mode: NoiseMode,
}

/// Observation indices holding absolute positions (AV and ring slots).
pub fn position_indices() -> impl Iterator<Item = usize> {
    (0..2)
        .map(|av| av_index(av, AV_POS))
        .chain(RING_BLOCK.step_by(2))
}

pub fn default_state_std() -> [f64; OBS_DIM] {
    let mut std = [OTHER_STD; OBS_DIM];
    for i in ENTRANCE_DISTANCE {
        std[i] = MERGE_EDGE_STD;
    }
    for i in position_indices() {
        std[i] = POSITION_STD;
    }
    for i in INFLOW_LENGTHS {
        std[i] = 0.0;
    }
    std
}

impl NoiseProfile {
    pub fn new(mode: NoiseMode) -> Self {
        Self {
            state_std: default_state_std(),
            action_std: ACTION_STD,
            mode,
        }
    }

    pub fn silent() -> Self {
        Self {
            state_std: [0.0; OBS_DIM],
            action_std: 0.0,
            mode: NoiseMode::None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.state_std.iter().chain([&self.action_std]).any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::config("noise standard deviations must be finite and >= 0"));
        }
        if INFLOW_LENGTHS.clone().any(|i| self.state_std[i] != 0.0) {
            return Err(Error::config("inflow-length observations must stay unperturbed"));
        }
        Ok(())
    }
}

impl Default for NoiseProfile {
    fn default() -> Self {
        Self::new(NoiseMode::None)
    }
}

/// Adds independent zero-mean noise with each element's std, then clamps to
/// `[0, 1]`. Elements with std 0 are copied bit-for-bit and draw nothing.
pub fn gaussian_perturb_state<R: Rng + ?Sized>(obs: &Observation, profile: &NoiseProfile, rng: &mut R) -> Observation {
    let mut out = *obs;
    for (x, &std) in out.0.iter_mut().zip(profile.state_std.iter()) {
        if std > 0.0 {
            let noise = Normal::new(0.0, std).expect("validated std");
            *x = (*x + noise.sample(rng)).clamp(0.0, 1.0);
        }
    }
    out
}

pub fn gaussian_perturb_action<R: Rng + ?Sized>(
    action: &ActionCommand,
    profile: &NoiseProfile,
    rng: &mut R,
) -> ActionCommand {
    if profile.action_std == 0.0 {
        return *action;
    }
    let noise = Normal::new(0.0, profile.action_std).expect("validated std");
    ActionCommand(action.0.map(|a| a + noise.sample(rng)))
}

/// Raw adversary output; elements `[0, 2)` perturb the two actions, the rest
/// perturb the observation indices in [`AdversaryTargets`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdversaryAction(pub [f64; ADVERSARY_DIM]);

impl Default for AdversaryAction {
    fn default() -> Self {
        AdversaryAction([0.0; ADVERSARY_DIM])
    }
}

impl AdversaryAction {
    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; ADVERSARY_DIM] = values.try_into().map_err(|_| Error::Dimension {
            what: "adversary action",
            expected: ADVERSARY_DIM,
            got: values.len(),
        })?;
        Ok(AdversaryAction(arr))
    }

    pub fn clamped(&self) -> Self {
        AdversaryAction(self.0.map(|x| x.clamp(-1.0, 1.0)))
    }

    /// Zeroes the parts the noise mode does not allow the adversary to touch.
    pub fn masked(&self, mode: NoiseMode) -> Self {
        let mut out = *self;
        if !mode.includes_action() {
            out.0[..2].fill(0.0);
        }
        if !mode.includes_state() {
            out.0[2..].fill(0.0);
        }
        out
    }
}

/// Observation indices the adversary may perturb.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdversaryTargets(Vec<usize>);

impl AdversaryTargets {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.len() != ADVERSARY_TARGETS {
            return Err(Error::config(format!(
                "adversary needs exactly {ADVERSARY_TARGETS} target indices, got {}",
                indices.len()
            )));
        }
        let mut seen = [false; OBS_DIM];
        for &i in &indices {
            if i >= OBS_DIM || seen[i] || INFLOW_LENGTHS.contains(&i) {
                return Err(Error::config(format!("invalid adversary target index {i}")));
            }
            seen[i] = true;
        }
        Ok(AdversaryTargets(indices))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }
}

impl Default for AdversaryTargets {
    /// The 8 AV features followed by the 12 entrance distances.
    fn default() -> Self {
        let indices = (0..8).chain(ENTRANCE_DISTANCE).collect();
        AdversaryTargets::new(indices).expect("default targets are valid")
    }
}

/// Applies the adversary's scaled perturbations. The adversary output is
/// clamped to `[-1, 1]` first.
pub fn adversarial_perturb(
    obs: &Observation,
    action: &ActionCommand,
    adv: &AdversaryAction,
    targets: &AdversaryTargets,
) -> Result<(Observation, ActionCommand)> {
    if targets.0.len() != ADVERSARY_TARGETS {
        return Err(Error::config("adversary target list must have 20 entries"));
    }
    let adv = adv.clamped();
    let mut action = *action;
    for (a, d) in action.0.iter_mut().zip(&adv.0[..2]) {
        *a += ADVERSARY_SCALE * d;
    }
    let mut obs = *obs;
    for (&i, d) in targets.0.iter().zip(&adv.0[2..]) {
        obs.0[i] = (obs.0[i] + ADVERSARY_SCALE * d).clamp(0.0, 1.0);
    }
    Ok((obs, action))
}

/// How the agent's view and commands are corrupted during a rollout.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum NoiseChannel {
    #[default]
    Clean,
    Gaussian(NoiseProfile),
    Adversarial {
        targets: AdversaryTargets,
        mode: NoiseMode,
    },
}

impl NoiseChannel {
    pub fn from_settings(kind: NoiseKind, mode: NoiseMode) -> Self {
        match (kind, mode) {
            (_, NoiseMode::None) => NoiseChannel::Clean,
            (NoiseKind::Gaussian, mode) => NoiseChannel::Gaussian(NoiseProfile::new(mode)),
            (NoiseKind::Adversarial, mode) => NoiseChannel::Adversarial {
                targets: AdversaryTargets::default(),
                mode,
            },
        }
    }

    pub fn is_adversarial(&self) -> bool {
        matches!(self, NoiseChannel::Adversarial { .. })
    }

    /// The agent's view of `true_obs`. `adv` is ignored unless the channel is
    /// adversarial.
    pub fn observe<R: Rng + ?Sized>(&self, true_obs: &Observation, adv: &AdversaryAction, rng: &mut R) -> Observation {
        match self {
            NoiseChannel::Clean => *true_obs,
            NoiseChannel::Gaussian(p) if p.mode.includes_state() => gaussian_perturb_state(true_obs, p, rng),
            NoiseChannel::Gaussian(_) => *true_obs,
            NoiseChannel::Adversarial { targets, mode } => {
                let (obs, _) = adversarial_perturb(true_obs, &ActionCommand::default(), &adv.masked(*mode), targets)
                    .expect("validated targets");
                obs
            }
        }
    }

    /// The command the environment receives for the agent's `action`.
    pub fn act<R: Rng + ?Sized>(&self, action: &ActionCommand, adv: &AdversaryAction, rng: &mut R) -> ActionCommand {
        match self {
            NoiseChannel::Clean => *action,
            NoiseChannel::Gaussian(p) if p.mode.includes_action() => gaussian_perturb_action(action, p, rng),
            NoiseChannel::Gaussian(_) => *action,
            NoiseChannel::Adversarial { targets, mode } => {
                let (_, act) = adversarial_perturb(&Observation::default(), action, &adv.masked(*mode), targets)
                    .expect("validated targets");
                act
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::QUEUE_COUNTS;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mid_obs() -> Observation {
        Observation([0.5; OBS_DIM])
    }

    #[test]
    fn std_classes() {
        let s = default_state_std();
        assert_eq!(s[0], POSITION_STD);
        assert_eq!(s[4], POSITION_STD);
        assert_eq!(s[1], OTHER_STD);
        assert_eq!(s[8], POSITION_STD);
        assert_eq!(s[9], OTHER_STD);
        assert_eq!(s[34], MERGE_EDGE_STD);
        assert_eq!(s[45], MERGE_EDGE_STD);
        assert_eq!(s[46], OTHER_STD);
        assert_eq!(s[QUEUE_COUNTS.start], OTHER_STD);
        assert_eq!(s[60], 0.0);
        assert_eq!(s[61], 0.0);
        assert!(NoiseProfile::new(NoiseMode::State).validate().is_ok());
    }

    #[test]
    fn zero_std_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let obs = Observation(std::array::from_fn(|i| i as f64 / 61.0));
        assert_eq!(gaussian_perturb_state(&obs, &NoiseProfile::silent(), &mut rng), obs);
        let a = ActionCommand::new(0.3, -1.2);
        assert_eq!(gaussian_perturb_action(&a, &NoiseProfile::silent(), &mut rng), a);
    }

    #[test]
    fn inflow_lengths_never_touched() {
        let p = NoiseProfile::new(NoiseMode::State);
        let obs = Observation(std::array::from_fn(|i| (i as f64 * 0.37).fract()));
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = gaussian_perturb_state(&obs, &p, &mut rng);
            assert_eq!(out[60].to_bits(), obs[60].to_bits());
            assert_eq!(out[61].to_bits(), obs[61].to_bits());
        }
    }

    #[test]
    fn adversary_zero_is_identity() {
        let obs = Observation(std::array::from_fn(|i| (i as f64 * 0.13).fract()));
        let a = ActionCommand::new(0.25, -2.5);
        let (o, b) = adversarial_perturb(&obs, &a, &AdversaryAction::default(), &AdversaryTargets::default()).unwrap();
        assert_eq!(o, obs);
        assert_eq!(b, a);
    }

    #[test]
    fn adversary_action_scaling_and_clamp() {
        let mut adv = AdversaryAction::default();
        adv.0[0] = 1.0;
        adv.0[1] = -7.0; // clamped to -1
        let a = ActionCommand::new(0.5, 0.5);
        let (_, b) = adversarial_perturb(&mid_obs(), &a, &adv, &AdversaryTargets::default()).unwrap();
        assert_eq!(b.0[0], 0.5 + 0.1);
        assert_eq!(b.0[1], 0.5 - 0.1);
    }

    #[test]
    fn adversary_observation_clamped_at_one() {
        let mut obs = mid_obs();
        obs.0[0] = 0.95;
        let mut adv = AdversaryAction::default();
        adv.0[2] = 1.0;
        let (o, _) = adversarial_perturb(&obs, &ActionCommand::default(), &adv, &AdversaryTargets::default()).unwrap();
        assert_eq!(o[0], 1.0);
    }

    #[test]
    fn target_validation() {
        assert!(AdversaryTargets::new((0..19).collect()).is_err());
        assert!(AdversaryTargets::new((0..19).chain([0]).collect()).is_err());
        assert!(AdversaryTargets::new((0..19).chain([61]).collect()).is_err());
        let t = AdversaryTargets::default();
        assert_eq!(t.indices().len(), 20);
        assert_eq!(t.indices()[8], 34);
    }

    #[test]
    fn masking_by_mode() {
        let adv = AdversaryAction([1.0; ADVERSARY_DIM]);
        let a = adv.masked(NoiseMode::Action);
        assert_eq!(&a.0[..2], &[1.0, 1.0]);
        assert!(a.0[2..].iter().all(|x| *x == 0.0));
        let s = adv.masked(NoiseMode::State);
        assert_eq!(&s.0[..2], &[0.0, 0.0]);
        assert_eq!(adv.masked(NoiseMode::ActionState), adv);
    }

    #[test]
    fn channel_mode_none_is_clean() {
        let ch = NoiseChannel::from_settings(NoiseKind::Gaussian, NoiseMode::None);
        assert_eq!(ch, NoiseChannel::Clean);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let before = rng.clone();
        let obs = mid_obs();
        assert_eq!(ch.observe(&obs, &AdversaryAction::default(), &mut rng), obs);
        assert_eq!(rng, before);
    }

    #[test]
    fn action_noise_statistics() {
        let p = NoiseProfile::new(NoiseMode::Action);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| gaussian_perturb_action(&ActionCommand::default(), &p, &mut rng).0[0])
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let std = (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!(mean.abs() < 0.01);
        assert!((std - 0.5).abs() < 0.01);
    }

    proptest! {
        #[test]
        fn perturbed_views_stay_bounded(vals in prop::collection::vec(0.0..=1.0f64, OBS_DIM),
                                        advs in prop::collection::vec(-3.0..3.0f64, ADVERSARY_DIM),
                                        a0 in -5.0..5.0f64, a1 in -5.0..5.0f64, seed in any::<u64>()) {
            let obs = Observation(vals.try_into().unwrap());
            let adv = AdversaryAction::from_slice(&advs).unwrap();
            let act = ActionCommand::new(a0, a1);
            let (o, b) = adversarial_perturb(&obs, &act, &adv, &AdversaryTargets::default()).unwrap();
            for i in 0..OBS_DIM {
                prop_assert!((0.0..=1.0).contains(&o[i]));
                prop_assert!((o[i] - obs[i]).abs() <= ADVERSARY_SCALE + 1e-15);
            }
            prop_assert_eq!(o[60].to_bits(), obs[60].to_bits());
            prop_assert_eq!(o[61].to_bits(), obs[61].to_bits());
            for k in 0..2 {
                prop_assert!((b.0[k] - act.0[k]).abs() <= ADVERSARY_SCALE + 1e-12);
                let clipped = b.clipped(-3.0, 1.0);
                prop_assert!((-3.0..=1.0).contains(&clipped.0[k]));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = gaussian_perturb_state(&obs, &NoiseProfile::new(NoiseMode::ActionState), &mut rng);
            prop_assert!(g.iter().all(|x| (0.0..=1.0).contains(x)));
            prop_assert_eq!(g[60].to_bits(), obs[60].to_bits());
        }
    }
}
