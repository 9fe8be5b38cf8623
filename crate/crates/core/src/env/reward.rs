use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::config::EnvConfig;

/// Speeds below this count as standing still rather than crawling.
pub const STANDSTILL_SPEED: f64 = 1e-3;
/// Speeds below this (and above standstill) count as crawling.
pub const CRAWL_SPEED: f64 = 0.2;
/// Length of the per-AV queue of applied accelerations.
pub const JERK_WINDOW: usize = 10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub base: f64,
    pub standstill: f64,
    pub crawl: f64,
    pub jerk: f64,
    pub speeding: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn penalty(&self) -> f64 {
        self.standstill + self.crawl + self.jerk + self.speeding
    }
}

/// Last applied (post-clip) accelerations of each AV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActionHistory {
    per_av: [VecDeque<f64>; 2],
}

impl ActionHistory {
    pub fn push(&mut self, av: usize, accel: f64) {
        let q = &mut self.per_av[av];
        if q.len() == JERK_WINDOW {
            q.pop_front();
        }
        q.push_back(accel);
    }

    pub fn clear(&mut self, av: usize) {
        self.per_av[av].clear();
    }

    pub fn actions(&self, av: usize) -> &VecDeque<f64> {
        &self.per_av[av]
    }

    /// Mean population variance over AVs with at least one recorded action.
    pub fn mean_variance(&self) -> f64 {
        let vars: Vec<f64> = self
            .per_av
            .iter()
            .filter(|q| !q.is_empty())
            .map(|q| {
                let n = q.len() as f64;
                let mean = q.iter().sum::<f64>() / n;
                q.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n
            })
            .collect();
        if vars.is_empty() {
            0.0
        } else {
            vars.iter().sum::<f64>() / vars.len() as f64
        }
    }
}

/// Delay reward with standstill, crawl, jerk and speeding penalties over the
/// speeds of the `n` active vehicles. Zero when no vehicle is active.
pub fn compute_reward(speeds: &[f64], history: &ActionHistory, cfg: &EnvConfig) -> RewardBreakdown {
    if speeds.is_empty() {
        return RewardBreakdown::default();
    }
    let n = speeds.len() as f64;
    let root_n = n.sqrt();
    let v_max = cfg.v_max;
    // Normalized by v_max before the square root so that the all-stopped and
    // all-at-v_max cases hit 0 and 2 exactly.
    let deficit = speeds
        .iter()
        .map(|v| ((v - v_max) / v_max).powi(2))
        .sum::<f64>()
        .sqrt();
    let base = 2.0 * (root_n - deficit).max(0.0) / root_n;

    let w = cfg.penalty_weights;
    let stopped = speeds.iter().filter(|&&v| v < STANDSTILL_SPEED).count() as f64;
    let crawling = speeds
        .iter()
        .filter(|&&v| (STANDSTILL_SPEED..CRAWL_SPEED).contains(&v))
        .count() as f64;
    let excess: f64 = speeds.iter().map(|v| (v - v_max).max(0.0)).sum();

    let standstill = w.standstill * stopped / n;
    let crawl = w.crawl * crawling / n;
    let jerk = w.jerk * history.mean_variance();
    let speeding = w.speeding * excess / n;
    RewardBreakdown {
        base,
        standstill,
        crawl,
        jerk,
        speeding,
        total: base - (standstill + crawl + jerk + speeding),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::config::PenaltyWeights;
    use proptest::prelude::*;

    fn cfg(weights: PenaltyWeights) -> EnvConfig {
        EnvConfig {
            penalty_weights: weights,
            ..EnvConfig::default()
        }
    }

    #[test]
    fn all_at_max_speed() {
        let r = compute_reward(&[8.0; 4], &ActionHistory::default(), &cfg(PenaltyWeights::default()));
        assert_eq!(r.base, 2.0);
        assert_eq!(r.total, 2.0);
    }

    #[test]
    fn all_stopped() {
        for n in 1..=13 {
            let r = compute_reward(&vec![0.0; n], &ActionHistory::default(), &cfg(PenaltyWeights::default()));
            assert_eq!(r.base, 0.0);
            assert_eq!(r.standstill, 1.0);
            assert!(r.total <= 0.0);
        }
    }

    #[test]
    fn single_vehicle_half_speed() {
        let r = compute_reward(&[4.0], &ActionHistory::default(), &cfg(PenaltyWeights::ZERO));
        assert!((r.base - 1.0).abs() < 1e-12);
    }

    #[test]
    fn penalty_classes_are_disjoint() {
        let r = compute_reward(
            &[0.0, 0.0005, 0.1, 0.19, 3.0],
            &ActionHistory::default(),
            &cfg(PenaltyWeights::default()),
        );
        assert!((r.standstill - 2.0 / 5.0).abs() < 1e-15);
        assert!((r.crawl - 0.5 * 2.0 / 5.0).abs() < 1e-15);
        assert_eq!(r.speeding, 0.0);
    }

    #[test]
    fn speeding_penalty() {
        let r = compute_reward(&[10.0, 8.0], &ActionHistory::default(), &cfg(PenaltyWeights::default()));
        assert!((r.speeding - 1.0).abs() < 1e-15);
    }

    #[test]
    fn jerk_uses_population_variance_of_window() {
        let mut h = ActionHistory::default();
        for a in [1.0, -1.0] {
            h.push(0, a);
        }
        assert_eq!(h.mean_variance(), 1.0);
        h.push(1, 0.5);
        assert_eq!(h.mean_variance(), 0.5);
        for _ in 0..20 {
            h.push(0, 0.25);
        }
        assert_eq!(h.actions(0).len(), JERK_WINDOW);
        assert_eq!(h.mean_variance(), 0.0);
        let r = compute_reward(&[8.0], &h, &cfg(PenaltyWeights::default()));
        assert_eq!(r.jerk, 0.0);
    }

    #[test]
    fn no_vehicles_no_reward() {
        let r = compute_reward(&[], &ActionHistory::default(), &cfg(PenaltyWeights::default()));
        assert_eq!(r, RewardBreakdown::default());
    }

    proptest! {
        #[test]
        fn base_bounded_total_below_base(speeds in prop::collection::vec(0.0..8.0f64, 1..14),
                                         acts in prop::collection::vec(-3.0..1.0f64, 0..12)) {
            let mut h = ActionHistory::default();
            for (i, a) in acts.iter().enumerate() {
                h.push(i % 2, *a);
            }
            let r = compute_reward(&speeds, &h, &cfg(PenaltyWeights::default()));
            prop_assert!((0.0..=2.0).contains(&r.base));
            prop_assert!(r.total <= r.base);
            prop_assert!(r.penalty() >= 0.0);
        }
    }
}
