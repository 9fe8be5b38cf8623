use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Intelligent driver model parameters.
///
/// Defaults are the human-driver values used throughout the roundabout
/// scenario: `T = 1 s`, `a = 1 m/s²`, `b = 1.5 m/s²`, `δ = 4`, `s0 = 2 m`,
/// `v0 = 30 m/s`, with an acceleration perturbation of std 0.1 m/s².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdmParams {
    /// Desired speed `v0` (m/s).
    pub v0: f64,
    /// Desired time headway `T` (s).
    pub time_headway: f64,
    /// Maximum acceleration `a` (m/s²).
    pub max_accel: f64,
    /// Comfortable deceleration `b` (m/s², positive).
    pub comfort_decel: f64,
    /// Acceleration exponent `δ`.
    pub delta: f64,
    /// Minimum gap `s0` (m).
    pub min_gap: f64,
    /// Std of the zero-mean Gaussian acceleration perturbation (m/s²).
    pub accel_noise_std: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            v0: 30.0,
            time_headway: 1.0,
            max_accel: 1.0,
            comfort_decel: 1.5,
            delta: 4.0,
            min_gap: 2.0,
            accel_noise_std: 0.1,
        }
    }
}

impl IdmParams {
    /// Same parameters with the acceleration noise switched off.
    pub fn noiseless(self) -> Self {
        Self {
            accel_noise_std: 0.0,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.max_accel > 0.0, "idm.max_accel must be > 0"),
            (self.comfort_decel > 0.0, "idm.comfort_decel must be > 0"),
            (self.v0 > 0.0, "idm.v0 must be > 0"),
            (self.time_headway >= 0.0, "idm.time_headway must be >= 0"),
            (self.min_gap > 0.0, "idm.min_gap must be > 0"),
            (self.delta > 0.0, "idm.delta must be > 0"),
            (self.accel_noise_std >= 0.0, "idm.accel_noise_std must be >= 0"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::config(msg));
            }
        }
        Ok(())
    }
}

/// Desired dynamic gap `s*(v, Δv)`; never below `s0`.
pub fn desired_headway(v: f64, dv: f64, p: &IdmParams) -> f64 {
    let interaction = v * p.time_headway + v * dv / (2.0 * (p.max_accel * p.comfort_decel).sqrt());
    p.min_gap + interaction.max(0.0)
}

/// IDM acceleration for own speed `v`, approach rate `dv = v - v_leader` and
/// bumper gap `s` (use `f64::INFINITY` on a free road).
///
/// Noise is added when `accel_noise_std > 0`; the generator is untouched
/// otherwise. The result is not clamped to vehicle limits.
pub fn idm_acceleration<R: Rng + ?Sized>(
    v: f64,
    dv: f64,
    s: f64,
    p: &IdmParams,
    rng: &mut R,
) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::NonPositiveGap { gap: s });
    }
    let free = (v / p.v0).powf(p.delta);
    let interaction = (desired_headway(v, dv, p) / s).powi(2);
    let mut accel = p.max_accel * (1.0 - free - interaction);
    if p.accel_noise_std > 0.0 {
        let noise = Normal::new(0.0, p.accel_noise_std).expect("validated std");
        accel += noise.sample(rng);
    }
    Ok(accel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quiet() -> IdmParams {
        IdmParams::default().noiseless()
    }

    #[test]
    fn desired_headway_cases() {
        let p = quiet();
        assert_eq!(desired_headway(0.0, 0.0, &p), 2.0);
        assert_eq!(desired_headway(2.0, 0.0, &p), 4.0);
        // 2 - 20 / (2 sqrt(1.5)) < 0, clamped
        assert_eq!(desired_headway(2.0, -10.0, &p), 2.0);
    }

    #[test]
    fn acceleration_reference_points() {
        let p = quiet();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rest = idm_acceleration(0.0, 0.0, 1e9, &p, &mut rng).unwrap();
        assert!((rest - 1.0).abs() < 1e-9);
        let cruise = idm_acceleration(30.0, 0.0, f64::INFINITY, &p, &mut rng).unwrap();
        assert_eq!(cruise, 0.0);
        let follow = idm_acceleration(5.0, 0.0, 10.0, &p, &mut rng).unwrap();
        let expected = 1.0 - (1.0f64 / 6.0).powi(4) - 0.7f64.powi(2);
        assert!((follow - expected).abs() < 1e-12);
        assert!((follow - 0.50915).abs() < 1e-4);
    }

    #[test]
    fn nonpositive_gap_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for gap in [0.0, -0.5, f64::NAN] {
            assert!(matches!(
                idm_acceleration(1.0, 0.0, gap, &quiet(), &mut rng),
                Err(Error::NonPositiveGap { .. })
            ));
        }
    }

    #[test]
    fn noise_off_leaves_rng_untouched() {
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let b = a.clone();
        idm_acceleration(3.0, 0.5, 12.0, &quiet(), &mut a).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noise_has_configured_spread() {
        let p = IdmParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 20_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| idm_acceleration(30.0, 0.0, f64::INFINITY, &p, &mut rng).unwrap())
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.005);
        assert!((var.sqrt() - 0.1).abs() < 0.005);
    }

    #[test]
    fn invalid_params_rejected() {
        let p = IdmParams {
            comfort_decel: 0.0,
            ..IdmParams::default()
        };
        assert!(p.validate().is_err());
        assert!(IdmParams::default().validate().is_ok());
    }
}
