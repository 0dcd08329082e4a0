//! Rayleigh-faded SINR at the typical actuator and the conditional success
//! probabilities given a network realization.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::geometry::NetworkRealization;
use crate::{Error, Result};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Thermal noise `-174 dBm/Hz + 10 log10(B) + NF`, in dBm.
pub fn thermal_noise_dbm(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    -174.0 + 10.0 * bandwidth_hz.log10() + noise_figure_db
}

/// Free-space reference gain `(c / (4 pi f_c))^2`.
pub fn free_space_gain(carrier_hz: f64) -> f64 {
    (SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * carrier_hz)).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Transmit power eta (W).
    pub tx_power: f64,
    /// Path-loss constant rho.
    pub pathloss_const: f64,
    /// Path-loss exponent alpha (>= 2).
    pub pathloss_exp: f64,
    /// Noise power N0 (W).
    pub noise_power: f64,
    /// SINR threshold gamma (linear).
    pub sinr_threshold: f64,
}

impl Default for ChannelParams {
    /// 24 dBm, free space at 3.2 GHz, alpha = 2, thermal noise over 200 MHz,
    /// gamma = 0 dB.
    fn default() -> Self {
        ChannelParams {
            tx_power: dbm_to_watts(24.0),
            pathloss_const: free_space_gain(3.2e9),
            pathloss_exp: 2.0,
            noise_power: dbm_to_watts(thermal_noise_dbm(200e6, 0.0)),
            sinr_threshold: 1.0,
        }
    }
}

impl ChannelParams {
    pub fn new(
        tx_power: f64,
        pathloss_const: f64,
        pathloss_exp: f64,
        noise_power: f64,
        sinr_threshold: f64,
    ) -> Result<Self> {
        let p = ChannelParams {
            tx_power,
            pathloss_const,
            pathloss_exp,
            noise_power,
            sinr_threshold,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.tx_power) {
            return Err(Error::invalid("tx_power", "must be > 0"));
        }
        if !positive(self.pathloss_const) {
            return Err(Error::invalid("rho", "must be > 0"));
        }
        if !(self.pathloss_exp >= 2.0 && self.pathloss_exp.is_finite()) {
            return Err(Error::invalid("alpha", "path-loss exponent must be >= 2"));
        }
        if !(self.noise_power >= 0.0 && self.noise_power.is_finite()) {
            return Err(Error::invalid("noise_power", "must be >= 0"));
        }
        if !positive(self.sinr_threshold) {
            return Err(Error::invalid("gamma", "SINR threshold must be > 0"));
        }
        Ok(())
    }

    pub fn with_threshold(mut self, gamma: f64) -> Self {
        self.sinr_threshold = gamma;
        self
    }

    pub fn with_exponent(mut self, alpha: f64) -> Self {
        self.pathloss_exp = alpha;
        self
    }

    pub fn with_noise(mut self, noise_power: f64) -> Self {
        self.noise_power = noise_power;
        self
    }

    /// Mean received power `eta rho r^-alpha` at distance `r`.
    pub fn received_power(&self, distance: f64) -> f64 {
        self.tx_power * self.pathloss_const * distance.powf(-self.pathloss_exp)
    }

    /// Noise exponent `gamma N0 / (eta rho r0^-alpha)`; the noise-only success
    /// probability is `exp(-noise_exponent)`.
    pub fn noise_exponent(&self, r0: f64) -> f64 {
        self.sinr_threshold * self.noise_power / self.received_power(r0)
    }

    /// `r0^-a / (r0^-a + gamma r^-a)`: the factor by which one active
    /// interferer at distance `r` scales the success probability.
    pub fn interferer_factor(&self, r0: f64, r: f64) -> f64 {
        1.0 / (1.0 + self.sinr_threshold * (r0 / r).powf(self.pathloss_exp))
    }
}

/// One draw of `|h|^2` for a unit-parameter Rayleigh link (unit-mean exponential).
pub fn sample_fading_power<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

/// SINR at the typical actuator with the given interferers active.
///
/// `interferer_fading[k]` is the power gain of the link from
/// `active_interferers[k]`.
pub fn compute_sinr(
    realization: &NetworkRealization,
    active_interferers: &[usize],
    typical_fading: f64,
    interferer_fading: &[f64],
    params: &ChannelParams,
) -> Result<f64> {
    if interferer_fading.len() != active_interferers.len() {
        return Err(Error::invalid(
            "fading",
            format!(
                "{} fading draws for {} active interferers",
                interferer_fading.len(),
                active_interferers.len()
            ),
        ));
    }
    let signal = params.received_power(realization.typical_distance) * typical_fading;
    let mut denominator = params.noise_power;
    for (&i, &h) in active_interferers.iter().zip(interferer_fading) {
        let r = *realization.interferer_distances.get(i).ok_or_else(|| {
            Error::invalid("active_interferers", format!("index {i} out of range"))
        })?;
        denominator += params.received_power(r) * h;
    }
    if denominator == 0.0 {
        if signal == 0.0 {
            return Err(Error::DegenerateInput(
                "SINR is 0/0: no noise, no active interferers and zero signal fading".into(),
            ));
        }
        return Ok(f64::INFINITY);
    }
    Ok(signal / denominator)
}

/// `S(t)`: 1 iff the typical controller transmits and the SINR strictly
/// exceeds the threshold.
pub fn success_event(sinr: f64, typical_active: bool, gamma: f64) -> bool {
    typical_active && sinr > gamma
}

/// Per-slot record for the typical link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotOutcome {
    pub typical_active: bool,
    /// Only defined when the typical controller transmitted.
    pub sinr: Option<f64>,
    pub success: bool,
}

/// Success probability given the active interferer set (fading averaged out).
pub fn cond_success_prob_block(
    realization: &NetworkRealization,
    active_interferers: &[usize],
    params: &ChannelParams,
) -> f64 {
    let r0 = realization.typical_distance;
    let product: f64 = active_interferers
        .iter()
        .map(|&i| params.interferer_factor(r0, realization.interferer_distances[i]))
        .product();
    (-params.noise_exponent(r0)).exp() * product
}

/// Success probability with every interferer independently active with
/// probability `q` (fading and thinning averaged out).
pub fn cond_success_prob_classical(realization: &NetworkRealization, q: f64, params: &ChannelParams) -> f64 {
    let r0 = realization.typical_distance;
    let product: f64 = realization
        .interferer_distances
        .iter()
        .map(|&r| q * params.interferer_factor(r0, r) + 1.0 - q)
        .product();
    (-params.noise_exponent(r0)).exp() * product
}

/// Precomputed received powers for one realization, used by the slot
/// simulator to avoid recomputing `r^-alpha` every slot.
#[derive(Debug, Clone)]
pub struct LinkBudget {
    signal_power: f64,
    noise_power: f64,
    interferer_power: Vec<f64>,
    threshold: f64,
}

impl LinkBudget {
    pub fn new(realization: &NetworkRealization, params: &ChannelParams) -> Self {
        LinkBudget {
            signal_power: params.received_power(realization.typical_distance),
            noise_power: params.noise_power,
            interferer_power: realization
                .interferer_distances
                .iter()
                .map(|&r| params.received_power(r))
                .collect(),
            threshold: params.sinr_threshold,
        }
    }

    pub fn num_interferers(&self) -> usize {
        self.interferer_power.len()
    }

    /// Draws fresh fading for the typical link and each interferer with
    /// `active(i)` set, and returns the slot outcome.
    pub fn slot<R, F>(&self, typical_active: bool, mut active: F, rng: &mut R) -> SlotOutcome
    where
        R: Rng + ?Sized,
        F: FnMut(usize) -> bool,
    {
        if !typical_active {
            return SlotOutcome {
                typical_active: false,
                sinr: None,
                success: false,
            };
        }
        let signal = self.signal_power * sample_fading_power(rng);
        let mut denominator = self.noise_power;
        for (i, &p) in self.interferer_power.iter().enumerate() {
            if active(i) {
                denominator += p * sample_fading_power(rng);
            }
        }
        let sinr = if denominator > 0.0 {
            signal / denominator
        } else {
            f64::INFINITY
        };
        SlotOutcome {
            typical_active: true,
            sinr: Some(sinr),
            success: success_event(sinr, true, self.threshold),
        }
    }
}
