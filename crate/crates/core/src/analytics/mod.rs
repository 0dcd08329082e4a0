//! Closed-form controllability statistics and their quadrature-based
//! ingredients.
//!
//! All radial integrals include the planar Jacobian `z dz` and, by default,
//! stop at the same window radius the simulator samples from.

pub mod meta;
pub mod pgfl;
pub mod quadrature;
pub mod runs;

pub use meta::{inverse_tail_threshold, meta_distribution_curve, meta_distribution_rested};
pub use pgfl::{interference_log_integral, log_success_char_function, mean_log_success, moment_zeta};
pub use runs::{binomial_lower_tail, binomial_tail, rested_target_met, prob_block_controllable_rested, prob_block_controllable_restless, run_ccdf_demoivre};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::{Error, Result};

/// Value with an absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub abs_err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexEstimate {
    pub value: Complex64,
    pub abs_err: f64,
}

/// Network and link parameters shared by the analytic formulas.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub lambda: f64,
    pub r0: f64,
    pub channel: ChannelParams,
}

impl Scenario {
    pub fn new(lambda: f64, r0: f64, channel: ChannelParams) -> Result<Self> {
        let s = Scenario { lambda, r0, channel };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda", "intensity must be finite and >= 0"));
        }
        if !(self.r0 > 0.0 && self.r0.is_finite()) {
            return Err(Error::invalid("r0", "link distance must be positive"));
        }
        self.channel.validate()
    }

    /// `gamma N0 / (eta rho r0^-alpha)`.
    pub fn noise_exponent(&self) -> f64 {
        self.channel.noise_exponent(self.r0)
    }

    /// Success probability without interference.
    pub fn noise_only_success(&self) -> f64 {
        (-self.noise_exponent()).exp()
    }
}

/// Numerical controls for the radial and inversion integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Radial truncation; normally the simulation window radius.
    pub outer_limit: f64,
    /// Extend the radial integrals to the whole plane (`alpha > 2` only).
    pub infinite_plane: bool,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl QuadratureSpec {
    pub fn windowed(outer_limit: f64) -> Self {
        QuadratureSpec { outer_limit, infinite_plane: false, rel_tol: 1e-10, abs_tol: 1e-12, max_subdivisions: 5000 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.outer_limit > 0.0 && self.outer_limit.is_finite()) {
            return Err(Error::invalid("outer_limit", "must be positive and finite"));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::invalid("tolerance", "tolerances must be positive"));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::invalid("max_subdivisions", "must be >= 1"));
        }
        Ok(())
    }
}

/// Inputs to the rested-system meta distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaQuery {
    pub block_len: usize,
    pub v: usize,
    pub beta: f64,
    pub q: f64,
    pub scenario: Scenario,
}

impl MetaQuery {
    pub fn validate(&self) -> Result<()> {
        if self.v == 0 || self.v > self.block_len {
            return Err(Error::invalid("v", "need 1 <= v <= T"));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::invalid("beta", "must lie in (0, 1)"));
        }
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(Error::invalid("q", "must lie in (0, 1]"));
        }
        self.scenario.validate()
    }
}
