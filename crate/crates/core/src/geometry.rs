//! Poisson-bipolar network realizations seen from the typical actuator.
//!
//! The typical actuator sits at the origin and its controller at distance
//! `r0`. Interfering controllers form a homogeneous PPP restricted to a disk
//! of radius `R`; only their distances to the origin are kept since every
//! channel quantity depends on geometry through distances alone.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Inner cutoff used by [`expected_interference_mean`] to report finite
/// numbers; sampling itself has no exclusion zone.
pub const DIAGNOSTIC_R_MIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PppConfig {
    /// Controllers per m².
    pub intensity: f64,
    /// Simulation window radius R (m).
    pub window_radius: f64,
    /// Typical link length r0 (m).
    pub typical_distance: f64,
}

impl PppConfig {
    pub fn new(intensity: f64, window_radius: f64, typical_distance: f64) -> Result<Self> {
        let cfg = PppConfig {
            intensity,
            window_radius,
            typical_distance,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Config with the default window `max(10 r0, 5/sqrt(lambda))`.
    pub fn with_default_window(intensity: f64, typical_distance: f64) -> Result<Self> {
        Self::new(
            intensity,
            default_window_radius(intensity, typical_distance),
            typical_distance,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.intensity >= 0.0 && self.intensity.is_finite()) {
            return Err(Error::invalid("lambda", "intensity must be finite and >= 0"));
        }
        if !(self.typical_distance > 0.0 && self.typical_distance.is_finite()) {
            return Err(Error::invalid("r0", "typical distance must be > 0"));
        }
        if !(self.window_radius > 0.0 && self.window_radius.is_finite()) {
            return Err(Error::invalid("window_radius", "window radius must be > 0"));
        }
        if self.typical_distance > self.window_radius {
            return Err(Error::invalid(
                "window_radius",
                "window radius must be at least the typical distance r0",
            ));
        }
        Ok(())
    }

    /// Mean number of interferers in the window, `lambda * pi * R^2`.
    pub fn mean_count(&self) -> f64 {
        self.intensity * PI * self.window_radius * self.window_radius
    }
}

pub fn default_window_radius(intensity: f64, typical_distance: f64) -> f64 {
    let density_scale = if intensity > 0.0 {
        5.0 / intensity.sqrt()
    } else {
        0.0
    };
    (10.0 * typical_distance).max(density_scale)
}

/// One sampled network: interferer distances plus the typical link length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkRealization {
    pub interferer_distances: Vec<f64>,
    pub typical_distance: f64,
}

impl NetworkRealization {
    pub fn new(interferer_distances: Vec<f64>, typical_distance: f64) -> Result<Self> {
        if !(typical_distance > 0.0) {
            return Err(Error::invalid("r0", "typical distance must be > 0"));
        }
        if let Some(bad) = interferer_distances.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(Error::invalid(
                "distances",
                format!("interferer distance {bad} is not a positive finite number"),
            ));
        }
        Ok(NetworkRealization {
            interferer_distances,
            typical_distance,
        })
    }

    pub fn len(&self) -> usize {
        self.interferer_distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interferer_distances.is_empty()
    }
}

/// Replay record `{lambda, R, r0, distances[]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationRecord {
    pub lambda: f64,
    #[serde(rename = "R")]
    pub window_radius: f64,
    pub r0: f64,
    pub distances: Vec<f64>,
}

impl RealizationRecord {
    pub fn new(config: &PppConfig, realization: &NetworkRealization) -> Self {
        RealizationRecord {
            lambda: config.intensity,
            window_radius: config.window_radius,
            r0: realization.typical_distance,
            distances: realization.interferer_distances.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))
    }

    pub fn realization(&self) -> Result<NetworkRealization> {
        NetworkRealization::new(self.distances.clone(), self.r0)
    }
}

/// Draws a PPP in the disk of radius R: Poisson count, then uniform points.
pub fn sample_ppp<R: Rng + ?Sized>(config: &PppConfig, rng: &mut R) -> NetworkRealization {
    let mean = config.mean_count();
    let count = if mean > 0.0 {
        let poisson = Poisson::new(mean).expect("finite positive Poisson mean");
        poisson.sample(rng) as usize
    } else {
        0
    };
    let radius = config.window_radius;
    let interferer_distances = (0..count)
        // 1 - U lies in (0, 1], which keeps every distance strictly positive.
        .map(|_| radius * (1.0 - rng.random::<f64>()).sqrt())
        .collect();
    NetworkRealization {
        interferer_distances,
        typical_distance: config.typical_distance,
    }
}

/// Mean of `sum_i r_i^-alpha` over the windowed PPP, restricted to
/// `r_i > r_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferenceMean {
    pub value: f64,
    /// Set for alpha = 2, where the integral grows like `log(R / r_min)` and the
    /// window size shapes the interference level.
    pub log_divergent: bool,
}

pub fn expected_interference_mean(config: &PppConfig, alpha: f64, r_min: f64) -> Result<InterferenceMean> {
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha", "path-loss exponent must be > 0"));
    }
    if !(r_min > 0.0 && r_min < config.window_radius) {
        return Err(Error::invalid("r_min", "inner cutoff must lie in (0, R)"));
    }
    let lambda = config.intensity;
    let radius = config.window_radius;
    let log_divergent = (alpha - 2.0).abs() < 1e-12;
    let integral = if log_divergent {
        (radius / r_min).ln()
    } else {
        let e = 2.0 - alpha;
        (radius.powf(e) - r_min.powf(e)) / e
    };
    Ok(InterferenceMean {
        value: 2.0 * PI * lambda * integral,
        log_divergent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, substream};

    #[test]
    fn zero_intensity_is_empty() {
        let cfg = PppConfig::new(0.0, 100.0, 10.0).unwrap();
        let real = sample_ppp(&cfg, &mut seeded(1));
        assert!(real.is_empty());
        assert_eq!(real.typical_distance, 10.0);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(PppConfig::new(-1.0, 100.0, 10.0).is_err());
        assert!(PppConfig::new(1e-3, 0.0, 10.0).is_err());
        assert!(PppConfig::new(1e-3, 5.0, 10.0).is_err());
        assert!(PppConfig::new(1e-3, 100.0, 0.0).is_err());
    }

    #[test]
    fn default_window() {
        assert_eq!(default_window_radius(0.0, 10.0), 100.0);
        assert!((default_window_radius(1e-4, 10.0) - 500.0).abs() < 1e-9);
        assert_eq!(default_window_radius(5e-3, 10.0), 100.0);
    }

    #[test]
    fn mean_count_matches_poisson_mean() {
        let cfg = PppConfig::new(5e-3, 100.0, 10.0).unwrap();
        let n = 10_000u64;
        let total: usize = (0..n).map(|i| sample_ppp(&cfg, &mut substream(3, 0, i)).len()).sum();
        let mean = total as f64 / n as f64;
        let expected = cfg.mean_count();
        assert!((expected - 157.08).abs() < 0.01);
        let sigma = (expected / n as f64).sqrt();
        assert!((mean - expected).abs() < 3.0 * sigma, "mean {mean} vs {expected}");
    }

    #[test]
    fn support_is_the_disk() {
        let cfg = PppConfig::new(1e-2, 50.0, 10.0).unwrap();
        for i in 0..200 {
            let real = sample_ppp(&cfg, &mut substream(4, 0, i));
            for &r in &real.interferer_distances {
                assert!(r > 0.0 && r <= 50.0);
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = PppConfig::new(1e-3, 200.0, 10.0).unwrap();
        let a = sample_ppp(&cfg, &mut seeded(99));
        let b = sample_ppp(&cfg, &mut seeded(99));
        assert_eq!(a, b);
    }

    #[test]
    fn record_round_trip() {
        let cfg = PppConfig::new(1e-3, 200.0, 10.0).unwrap();
        let real = sample_ppp(&cfg, &mut seeded(5));
        let rec = RealizationRecord::new(&cfg, &real);
        let json = rec.to_json();
        assert!(json.contains("\"R\":200"));
        let back = RealizationRecord::from_json(&json).unwrap();
        assert_eq!(back, rec);
        assert_eq!(back.realization().unwrap(), real);
    }

    #[test]
    fn interference_mean_flags_alpha_two() {
        let cfg = PppConfig::new(0.0, 100.0, 10.0).unwrap();
        let m = expected_interference_mean(&cfg, 4.0, DIAGNOSTIC_R_MIN).unwrap();
        assert_eq!(m.value, 0.0);
        let cfg = PppConfig::new(1e-3, 100.0, 10.0).unwrap();
        assert!(expected_interference_mean(&cfg, 2.0, DIAGNOSTIC_R_MIN).unwrap().log_divergent);
        let m = expected_interference_mean(&cfg, 4.0, DIAGNOSTIC_R_MIN).unwrap();
        assert!(!m.log_divergent);
        let expected = 2.0 * PI * 1e-3 * (100f64.powi(-2) - DIAGNOSTIC_R_MIN.powi(-2)) / -2.0;
        assert!((m.value - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn interference_mean_matches_monte_carlo() {
        // r_min = 1 keeps the variance of sum r^-4 manageable.
        let cfg = PppConfig::new(1e-4, 100.0, 10.0).unwrap();
        let r_min = 1.0;
        let exact = expected_interference_mean(&cfg, 4.0, r_min).unwrap().value;
        let n = 10_000u64;
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                sample_ppp(&cfg, &mut substream(8, 0, i))
                    .interferer_distances
                    .iter()
                    .filter(|r| **r > r_min)
                    .map(|r| r.powi(-4))
                    .sum()
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - exact).abs() < 4.0 * se, "mc {mean} exact {exact} se {se}");
    }
}
