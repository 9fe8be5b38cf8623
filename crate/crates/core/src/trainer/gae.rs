use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What follows a step in a flattened batch of episodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Boundary {
    /// The next entry belongs to the same episode.
    Continue,
    /// The episode ended for real; nothing to bootstrap.
    Terminal,
    /// The episode was cut by the horizon; bootstrap with this value.
    Truncated(f64),
}

/// Generalized advantage estimates and value targets.
///
/// `delta_t = r_t + gamma * V_{t+1} - V_t` and
/// `A_t = sum_l (gamma * lambda)^l * delta_{t+l}` within each episode, where
/// `V_{t+1}` is 0 after a terminal step and the stored bootstrap after a
/// truncated one. Returns are `A + V`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    boundaries: &[Boundary],
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n {
        return Err(Error::Dimension {
            what: "values",
            expected: n,
            got: values.len(),
        });
    }
    if boundaries.len() != n {
        return Err(Error::Dimension {
            what: "boundaries",
            expected: n,
            got: boundaries.len(),
        });
    }
    if boundaries.last() == Some(&Boundary::Continue) {
        return Err(Error::Contract("batch ends in the middle of an episode".into()));
    }
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let (next_value, carry) = match boundaries[t] {
            Boundary::Continue => (values[t + 1], running),
            Boundary::Terminal => (0.0, 0.0),
            Boundary::Truncated(v) => (v, 0.0),
        };
        let delta = rewards[t] + gamma * next_value - values[t];
        running = delta + gamma * lambda * carry;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}
