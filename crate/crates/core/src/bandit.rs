//! Thompson sampling over a finite set of ALOHA parameters with Beta
//! posteriors on the per-slot success rate of the typical pair.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::channel::{cond_success_prob_classical, ChannelParams, LinkBudget};
use crate::geometry::NetworkRealization;
use crate::montecarlo::simulate_block_acks;
use crate::{Error, Protocol, Result};

/// Posterior snapshots are kept every this many blocks.
pub const SNAPSHOT_EVERY: usize = 100;

/// `Beta(a, b)` belief about one arm's per-slot success probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmPosterior {
    pub a: f64,
    pub b: f64,
}

impl Default for ArmPosterior {
    fn default() -> Self {
        ArmPosterior { a: 1.0, b: 1.0 }
    }
}

impl ArmPosterior {
    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }
}

/// One `Beta(a, b)` draw as `G1 / (G1 + G2)` with unit-scale Gamma variates.
pub fn sample_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let g1 = Gamma::new(a, 1.0).expect("shape must be positive").sample(rng);
    let g2 = Gamma::new(b, 1.0).expect("shape must be positive").sample(rng);
    g1 / (g1 + g2)
}

/// Draws one sample per posterior and returns the argmax (lowest index on ties).
pub fn select_arm<R: Rng + ?Sized>(posteriors: &[ArmPosterior], rng: &mut R) -> usize {
    assert!(!posteriors.is_empty(), "need at least one arm");
    let mut best = 0;
    let mut best_theta = f64::NEG_INFINITY;
    for (d, p) in posteriors.iter().enumerate() {
        let theta = sample_beta(p.a, p.b, rng);
        if theta > best_theta {
            best = d;
            best_theta = theta;
        }
    }
    best
}

/// Adds a block's successes to `a` and its failures to `b`.
pub fn batch_update(posterior: ArmPosterior, block_successes: usize, block_len: usize) -> Result<ArmPosterior> {
    if block_successes > block_len {
        return Err(Error::invalid("block_successes", format!("{block_successes} exceeds the block length {block_len}")));
    }
    Ok(ArmPosterior {
        a: posterior.a + block_successes as f64,
        b: posterior.b + (block_len - block_successes) as f64,
    })
}

/// Expected per-block reward `T q P_cls(q)` of each arm on a fixed realization.
/// Per-slot interferer activity is Bernoulli(q) under either protocol, so the
/// same expression serves both.
pub fn arm_means(realization: &NetworkRealization, arms: &[f64], channel: &ChannelParams, block_len: usize) -> Vec<f64> {
    arms.iter()
        .map(|&q| block_len as f64 * q * cond_success_prob_classical(realization, q, channel))
        .collect()
}

/// Best arm and its expected per-block reward.
pub fn oracle_arm(realization: &NetworkRealization, arms: &[f64], channel: &ChannelParams, block_len: usize) -> (usize, f64) {
    assert!(!arms.is_empty(), "need at least one arm");
    let means = arm_means(realization, arms, channel, block_len);
    let mut best = 0;
    for (d, &m) in means.iter().enumerate() {
        if m > means[best] {
            best = d;
        }
    }
    (best, means[best])
}

/// Per-block regret bookkeeping for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub per_block_gap: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub oracle_arm_index: usize,
    pub arm_pull_counts: Vec<usize>,
}

/// What happened in one block of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub k: usize,
    pub arm: usize,
    pub q: f64,
    pub reward: usize,
    pub cumulative_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSnapshot {
    /// Number of completed blocks.
    pub k: usize,
    pub posteriors: Vec<ArmPosterior>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsRun {
    pub trace: RegretTrace,
    pub blocks: Vec<BlockRecord>,
    pub snapshots: Vec<PosteriorSnapshot>,
    pub posteriors: Vec<ArmPosterior>,
}

impl TsRun {
    /// Most pulled arm over the blocks `from..` (lowest index on ties).
    pub fn modal_arm(&self, from: usize) -> usize {
        let mut counts = vec![0usize; self.posteriors.len()];
        for b in &self.blocks[from.min(self.blocks.len())..] {
            counts[b.arm] += 1;
        }
        let mut best = 0;
        for (d, &c) in counts.iter().enumerate() {
            if c > counts[best] {
                best = d;
            }
        }
        best
    }
}

/// Runs `K` blocks of Thompson sampling on a fixed realization. The reward of
/// a block is the typical pair's acknowledgment count; a block in which the
/// typical controller stays idle counts as `T` failures.
pub fn run_ts<R: Rng + ?Sized>(
    realization: &NetworkRealization,
    arms: &[f64],
    protocol: Protocol,
    channel: &ChannelParams,
    block_len: usize,
    num_blocks: usize,
    rng: &mut R,
) -> Result<TsRun> {
    crate::aloha::check_arms(arms)?;
    if arms.is_empty() {
        return Err(Error::invalid("arms", "need at least one arm"));
    }
    if block_len == 0 {
        return Err(Error::invalid("T", "block length must be >= 1"));
    }
    if num_blocks == 0 {
        return Err(Error::invalid("K", "need at least one block"));
    }
    let budget = LinkBudget::new(realization, channel);
    let means = arm_means(realization, arms, channel, block_len);
    let (oracle, mu_star) = oracle_arm(realization, arms, channel, block_len);

    let mut posteriors = vec![ArmPosterior::default(); arms.len()];
    let mut pulls = vec![0usize; arms.len()];
    let mut gaps = Vec::with_capacity(num_blocks);
    let mut cumulative = Vec::with_capacity(num_blocks);
    let mut blocks = Vec::with_capacity(num_blocks);
    let mut snapshots = Vec::with_capacity(num_blocks / SNAPSHOT_EVERY + 1);
    let mut total = 0.0;
    for k in 0..num_blocks {
        let arm = select_arm(&posteriors, rng);
        let q = arms[arm];
        let acks = simulate_block_acks(&budget, protocol, q, block_len, rng);
        let reward = acks.success_count();
        posteriors[arm] = batch_update(posteriors[arm], reward, block_len)?;
        pulls[arm] += 1;
        let gap = (mu_star - means[arm]).max(0.0);
        total += gap;
        gaps.push(gap);
        cumulative.push(total);
        blocks.push(BlockRecord { k, arm, q, reward, cumulative_regret: total });
        if (k + 1) % SNAPSHOT_EVERY == 0 {
            snapshots.push(PosteriorSnapshot { k: k + 1, posteriors: posteriors.clone() });
        }
    }
    Ok(TsRun {
        trace: RegretTrace { per_block_gap: gaps, cumulative, oracle_arm_index: oracle, arm_pull_counts: pulls },
        blocks,
        snapshots,
        posteriors,
    })
}

/// `C sqrt(T K D ln K)`.
pub fn regret_envelope(num_blocks: usize, block_len: usize, num_arms: usize, c: f64) -> f64 {
    let k = num_blocks as f64;
    c * (block_len as f64 * k * num_arms as f64 * k.ln()).sqrt()
}

/// `sqrt(64 K D ln K) + 4 T D`.
pub fn regret_envelope_explicit(num_blocks: usize, block_len: usize, num_arms: usize) -> f64 {
    let k = num_blocks as f64;
    let d = num_arms as f64;
    (64.0 * k * d * k.ln()).sqrt() + 4.0 * block_len as f64 * d
}
