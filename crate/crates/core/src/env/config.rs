use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::traffic::{GeometryConfig, IdmParams, SpeedLimits};

/// Inclusive integer interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntRange {
    pub min: usize,
    pub max: usize,
}

impl IntRange {
    pub const fn new(min: usize, max: usize) -> Self {
        Self { min, max }
    }
}

/// Closed real interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub min: f64,
    pub max: f64,
}

impl Interval {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }
}

/// Weights of the standstill, near-standstill, jerk and speeding penalties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PenaltyWeights {
    pub standstill: f64,
    pub crawl: f64,
    pub jerk: f64,
    pub speeding: f64,
}

impl Default for PenaltyWeights {
    fn default() -> Self {
        Self {
            standstill: 1.0,
            crawl: 0.5,
            jerk: 0.2,
            speeding: 1.0,
        }
    }
}

impl PenaltyWeights {
    pub const ZERO: PenaltyWeights = PenaltyWeights {
        standstill: 0.0,
        crawl: 0.0,
        jerk: 0.0,
        speeding: 0.0,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub north_group_range: IntRange,
    pub west_group_range: IntRange,
    /// Release delay of the northern group (s).
    pub north_delay_range: Interval,
    /// Release delay of the western group (s).
    pub west_delay_range: Interval,
    /// Maximum episode length in steps.
    pub horizon: usize,
    pub dt: f64,
    pub v_max: f64,
    pub max_accel: f64,
    pub max_decel: f64,
    pub penalty_weights: PenaltyWeights,
    pub idm: IdmParams,
    pub geometry: GeometryConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            north_group_range: IntRange::new(2, 5),
            west_group_range: IntRange::new(2, 8),
            north_delay_range: Interval::new(0.0, 4.0),
            west_delay_range: Interval::new(0.0, 1.0),
            horizon: 500,
            dt: 1.0,
            v_max: 8.0,
            max_accel: 1.0,
            max_decel: -3.0,
            penalty_weights: PenaltyWeights::default(),
            idm: IdmParams::default(),
            geometry: GeometryConfig::default(),
        }
    }
}

impl EnvConfig {
    pub fn limits(&self) -> SpeedLimits {
        SpeedLimits {
            v_max: self.v_max,
            max_accel: self.max_accel,
            max_decel: self.max_decel,
        }
    }

    /// Largest possible group, used to normalize counts.
    pub fn max_group_size(&self) -> usize {
        self.north_group_range.max.max(self.west_group_range.max)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("north_group_range", self.north_group_range),
            ("west_group_range", self.west_group_range),
        ] {
            if r.min == 0 || r.min > r.max {
                return Err(Error::config(format!(
                    "{name} must be a nonempty range of positive sizes"
                )));
            }
        }
        for (name, r) in [
            ("north_delay_range", self.north_delay_range),
            ("west_delay_range", self.west_delay_range),
        ] {
            if !(r.min >= 0.0 && r.min <= r.max && r.max.is_finite()) {
                return Err(Error::config(format!("{name} must be a nonempty interval >= 0")));
            }
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon must be > 0"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("dt must be > 0"));
        }
        if !(self.max_decel < 0.0 && self.max_accel > 0.0) {
            return Err(Error::config("need max_decel < 0 < max_accel"));
        }
        if !(self.v_max > 0.0 && self.v_max.is_finite()) {
            return Err(Error::config("v_max must be > 0"));
        }
        let w = self.penalty_weights;
        if [w.standstill, w.crawl, w.jerk, w.speeding]
            .iter()
            .any(|c| !(*c >= 0.0))
        {
            return Err(Error::config("penalty weights must be >= 0"));
        }
        self.idm.validate()
    }
}
