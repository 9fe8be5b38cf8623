use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::records::{EpisodeRecord, StepRecord, VehicleRecord, RECORD_SCHEMA};
use crate::env::{ActionCommand, AvSlot, Control, EnvConfig, Observation, RoundaboutEnv, ACTION_DIM, OBS_DIM};
use crate::error::Result;
use crate::perturbation::{AdversaryAction, NoiseChannel, NoiseKind};
use crate::policy::{load_policy, save_weights, MlpParameters};
use crate::trainer::{mix_seed, stream_rng, TrainLog, Trainer};

/// Keeps evaluation seeds apart from training seeds.
const EVAL_DOMAIN: u64 = 0x5EED_E7A1;
const EVAL_NOISE_STREAM: u64 = 3;

/// Seed of evaluation trial `k`. Baseline and policy runs with the same
/// master seed see the same inflow draws trial by trial.
pub fn trial_seed(master: u64, k: usize) -> u64 {
    mix_seed(master ^ EVAL_DOMAIN, k as u64)
}

/// Plays one episode and records it. `driver` maps the agent's observation
/// to a command; the noise channel sits between the two.
pub fn record_episode(
    env_cfg: &EnvConfig,
    control: Control,
    channel: &NoiseChannel,
    seed: u64,
    mut driver: impl FnMut(&Observation) -> Result<ActionCommand>,
) -> Result<EpisodeRecord> {
    let mut env = RoundaboutEnv::new(env_cfg.clone(), control)?;
    let mut obs = env.reset(seed);
    let mut noise_rng = stream_rng(seed, EVAL_NOISE_STREAM);
    let zero = AdversaryAction::default();
    let mut leads = [None; 2];
    let note_leads = |env: &RoundaboutEnv, leads: &mut [Option<_>; 2]| {
        for (k, slot) in env.av_slots().iter().enumerate() {
            if let AvSlot::Active(id) = slot {
                leads[k] = Some(*id);
            }
        }
    };
    note_leads(&env, &mut leads);
    let mut steps = Vec::new();
    let truncated = loop {
        let seen = channel.observe(&obs, &zero, &mut noise_rng);
        let command = driver(&seen)?;
        let applied = channel.act(&command, &zero, &mut noise_rng);
        let out = env.step(&applied)?;
        note_leads(&env, &mut leads);
        steps.push(StepRecord {
            time: env.time(),
            reward: out.reward,
            vehicles: out.info.vehicles,
        });
        obs = out.true_obs;
        if out.done {
            break out.truncated;
        }
    };
    let net = env.network();
    let mut vehicles: Vec<VehicleRecord> = env
        .finished()
        .iter()
        .chain(env.crashed())
        .chain(env.vehicles())
        .map(|v| VehicleRecord {
            id: v.id,
            route: v.route,
            entry_time: v.entry_time,
            exit_time: v.exit_time,
            distance: if v.exit_time.is_some() {
                net.route(v.route).length
            } else {
                v.pos
            },
        })
        .collect();
    vehicles.sort_by_key(|v| v.id);
    Ok(EpisodeRecord {
        schema: RECORD_SCHEMA,
        seed,
        draw: env.draw(),
        leads,
        vehicles,
        steps,
        crashes: env.crash_events().to_vec(),
        truncated,
    })
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(crate::error::Error::config("trials must be >= 1"));
    }
    Ok(())
}

/// All-IDM episodes: group heads are ordinary human drivers.
pub fn run_baseline(cfg: &ExperimentConfig, trials: usize) -> Result<Vec<EpisodeRecord>> {
    check_trials(trials)?;
    cfg.env.validate()?;
    (0..trials)
        .into_par_iter()
        .map(|k| {
            record_episode(&cfg.env, Control::Baseline, &NoiseChannel::Clean, trial_seed(cfg.seed, k), |_| {
                Ok(ActionCommand::default())
            })
        })
        .collect()
}

/// The noise channel used when evaluating a policy. There is no adversary
/// at evaluation time, so an adversarial setting evaluates clean.
pub fn evaluation_channel(cfg: &ExperimentConfig) -> NoiseChannel {
    match cfg.noise.kind {
        NoiseKind::Gaussian => cfg.noise.channel(),
        NoiseKind::Adversarial => NoiseChannel::Clean,
    }
}

/// Episodes driven by the policy's mean action.
pub fn run_policy_params(cfg: &ExperimentConfig, policy: &MlpParameters, trials: usize) -> Result<Vec<EpisodeRecord>> {
    check_trials(trials)?;
    cfg.env.validate()?;
    let channel = evaluation_channel(cfg);
    (0..trials)
        .into_par_iter()
        .map(|k| {
            record_episode(&cfg.env, Control::Learned, &channel, trial_seed(cfg.seed, k), |obs| {
                let mean = policy.output(obs.as_slice())?;
                Ok(ActionCommand([mean[0], mean[1]]))
            })
        })
        .collect()
}

pub fn run_policy(cfg: &ExperimentConfig, weights_path: impl AsRef<Path>, trials: usize) -> Result<Vec<EpisodeRecord>> {
    let policy = load_policy(weights_path, OBS_DIM, ACTION_DIM)?;
    run_policy_params(cfg, &policy, trials)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    SingleAgent,
    Adversarial,
}

/// Files written by [`train`].
#[derive(Debug, Clone)]
pub struct TrainArtifacts {
    pub log: PathBuf,
    pub policy: PathBuf,
    pub value: PathBuf,
    pub adversary: Option<PathBuf>,
    pub logs: Vec<TrainLog>,
}

/// Runs `cfg.ppo.iterations` iterations, appending each log line to
/// `train_log.jsonl` in `out_dir`, checkpointing every
/// `cfg.checkpoint_every` iterations and saving the final networks.
pub fn train(
    cfg: &ExperimentConfig,
    mode: TrainMode,
    out_dir: &Path,
    mut on_iteration: impl FnMut(&TrainLog),
) -> Result<(Trainer, TrainArtifacts)> {
    cfg.validate()?;
    let mut trainer = match mode {
        TrainMode::SingleAgent => Trainer::new(cfg.env.clone(), cfg.ppo.clone(), cfg.noise.channel(), cfg.seed)?,
        TrainMode::Adversarial => Trainer::adversarial(cfg.env.clone(), cfg.ppo.clone(), cfg.noise.mode, cfg.seed, false)?,
    };
    fs::create_dir_all(out_dir)?;
    let log_path = out_dir.join("train_log.jsonl");
    File::create(&log_path)?;
    let mut logs = Vec::with_capacity(cfg.ppo.iterations);
    for i in 0..cfg.ppo.iterations {
        let log = trainer.train_iteration()?;
        let mut f = OpenOptions::new().append(true).open(&log_path)?;
        serde_json::to_writer(&mut f, &log)?;
        f.write_all(b"\n")?;
        on_iteration(&log);
        logs.push(log);
        if cfg.checkpoint_every > 0 && (i + 1) % cfg.checkpoint_every == 0 {
            let dir = out_dir.join("checkpoints");
            fs::create_dir_all(&dir)?;
            save_weights(&trainer.agent().policy, dir.join(format!("policy_{:04}.bin", i + 1)))?;
        }
    }
    let policy = out_dir.join("policy.bin");
    let value = out_dir.join("value.bin");
    save_weights(&trainer.agent().policy, &policy)?;
    save_weights(&trainer.agent().value, &value)?;
    let adversary = match trainer.adversary() {
        Some(a) => {
            let p = out_dir.join("adversary.bin");
            save_weights(&a.policy, &p)?;
            Some(p)
        }
        None => None,
    };
    Ok((
        trainer,
        TrainArtifacts {
            log: log_path,
            policy,
            value,
            adversary,
            logs,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::metrics::compute_metrics;
    use crate::harness::records::{read_records, write_records};
    use crate::traffic::Route;

    fn small_cfg() -> ExperimentConfig {
        ExperimentConfig {
            seed: 5,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(run_baseline(&small_cfg(), 0).is_err());
    }

    #[test]
    fn baseline_is_reproducible() {
        let cfg = small_cfg();
        assert_eq!(run_baseline(&cfg, 4).unwrap(), run_baseline(&cfg, 4).unwrap());
    }

    #[test]
    fn records_are_consistent() {
        let recs = run_baseline(&small_cfg(), 6).unwrap();
        for r in &recs {
            assert_eq!(r.vehicles.len(), r.draw.sizes[0] + r.draw.sizes[1]);
            for v in &r.vehicles {
                if let Some(exit) = v.exit_time {
                    assert!(exit >= v.entry_time);
                    let expected = v.distance / (exit - v.entry_time);
                    assert_eq!(v.mean_speed(), Some(expected));
                }
            }
            assert!(r.leads.iter().all(Option::is_some));
        }
    }

    #[test]
    fn persisted_records_give_identical_metrics() {
        let cfg = small_cfg();
        let base = run_baseline(&cfg, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        write_records(&path, &base).unwrap();
        let back = read_records(&path).unwrap();
        assert_eq!(back, base);
        assert_eq!(compute_metrics(&back, &back).unwrap(), compute_metrics(&base, &base).unwrap());
    }

    #[test]
    fn noise_mode_none_ignores_profile() {
        let mut rng = stream_rng(1, 0);
        let policy = MlpParameters::policy(OBS_DIM, ACTION_DIM, &mut rng).unwrap();
        let clean = run_policy_params(&small_cfg(), &policy, 3).unwrap();
        let mut cfg = small_cfg();
        cfg.noise.other_std = 0.4;
        cfg.noise.action_std = 2.0;
        assert_eq!(run_policy_params(&cfg, &policy, 3).unwrap(), clean);
    }

    #[test]
    fn policy_runs_pair_with_baseline_draws() {
        let mut rng = stream_rng(2, 0);
        let policy = MlpParameters::policy(OBS_DIM, ACTION_DIM, &mut rng).unwrap();
        let cfg = small_cfg();
        let a = run_policy_params(&cfg, &policy, 3).unwrap();
        let b = run_baseline(&cfg, 3).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.draw, y.draw);
            assert_eq!(x.seed, y.seed);
        }
        let route_of_lead = a[0].vehicles.iter().find(|v| Some(v.id) == a[0].leads[0]).unwrap().route;
        assert_eq!(route_of_lead, Route::North);
    }

    #[test]
    fn weights_file_round_trip_evaluates_identically() {
        let mut rng = stream_rng(3, 0);
        let policy = MlpParameters::policy(OBS_DIM, ACTION_DIM, &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.bin");
        save_weights(&policy, &path).unwrap();
        let cfg = small_cfg();
        assert_eq!(run_policy(&cfg, &path, 2).unwrap(), run_policy_params(&cfg, &policy, 2).unwrap());
        let wrong = MlpParameters::policy(OBS_DIM, 3, &mut rng).unwrap();
        save_weights(&wrong, &path).unwrap();
        assert!(run_policy(&cfg, &path, 2).is_err());
    }

    #[test]
    fn train_writes_log_and_weights() {
        let mut cfg = small_cfg();
        cfg.env.horizon = 50;
        cfg.ppo.batch_size = 100;
        cfg.ppo.iterations = 2;
        cfg.ppo.epochs = 1;
        cfg.checkpoint_every = 1;
        let dir = tempfile::tempdir().unwrap();
        let (_, art) = train(&cfg, TrainMode::SingleAgent, dir.path(), |_| {}).unwrap();
        let text = fs::read_to_string(&art.log).unwrap();
        assert_eq!(text.lines().count(), 2);
        let first: TrainLog = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first, art.logs[0]);
        assert!(dir.path().join("checkpoints/policy_0002.bin").exists());
        assert!(load_policy(&art.policy, OBS_DIM, ACTION_DIM).is_ok());
        assert!(art.adversary.is_none());
    }
}
