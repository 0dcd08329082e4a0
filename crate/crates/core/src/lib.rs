//! Simulation and analysis of controller/actuator pairs sharing a wireless
//! channel under ALOHA access.
//!
//! Controllers are scattered as a Poisson point process around a typical
//! actuator at the origin. Each controller drives a discrete-time linear plant
//! by sending precomputed inputs over the shared channel; an input only
//! arrives when the SINR at the actuator exceeds a threshold. The crate covers
//!
//! * network sampling ([`geometry`]) and the Rayleigh/SINR channel ([`channel`]),
//! * the restless and rested control loops ([`control`]) and ALOHA access
//!   draws ([`aloha`]),
//! * closed-form controllability statistics, moments of the conditional
//!   success probability and their inversion ([`analytics`]),
//! * Thompson-sampling selection of the ALOHA parameter ([`bandit`]),
//! * Monte-Carlo experiment drivers ([`montecarlo`]) and config/result I/O
//!   ([`config`], [`output`]).

pub mod aloha;
pub mod analytics;
pub mod bandit;
pub mod channel;
pub mod config;
pub mod control;
pub mod error;
pub mod geometry;
pub mod montecarlo;
pub mod output;
pub mod rng;
pub mod selftest;

pub use error::{Error, Result};

/// ALOHA flavour: per-slot access (classical) or per-block access (block).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Classical,
    Block,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Classical => "classical",
            Protocol::Block => "block",
        }
    }
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Controlled-system flavour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    /// No local feedback; needs `v` consecutive successes.
    Restless,
    /// Local state feedback on failures; needs `v` successes in total.
    Rested,
}

impl SystemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SystemKind::Restless => "restless",
            SystemKind::Rested => "rested",
        }
    }
}

impl std::fmt::Display for SystemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
