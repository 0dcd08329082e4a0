//! Experiment drivers: empirical controllability sweeps, empirical meta
//! distributions, analytic sweeps, comparisons and bandit studies.
//!
//! Work is split by realization index; every index owns a random substream
//! derived from the root seed, so results do not depend on the thread count.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aloha::draw_access_block;
use crate::analytics::{
    meta_distribution_curve, rested_target_met, prob_block_controllable_rested, prob_block_controllable_restless,
};
use crate::bandit::{regret_envelope_explicit, run_ts, TsRun};
use crate::channel::{cond_success_prob_block, cond_success_prob_classical, ChannelParams, LinkBudget};
use crate::config::{ExperimentConfig, GeometryMode, Mode};
use crate::output::Results;
use crate::control::{run_block_rested, run_block_restless};
use crate::geometry::{sample_ppp, NetworkRealization};
use crate::rng::{substream, SimRng};
use crate::{Error, Protocol, Result, SystemKind};

const TAG_SWEEP: u64 = 1;
const TAG_META: u64 = 2;
const TAG_TS: u64 = 3;

fn tag(kind: u64, a: usize, b: usize) -> u64 {
    (kind << 48) | ((a as u64) << 24) | b as u64
}

/// Typical pair's access and acknowledgment sequences over one block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockAcks {
    pub access: Vec<bool>,
    pub acks: Vec<bool>,
}

impl BlockAcks {
    pub fn success_count(&self) -> usize {
        self.acks.iter().filter(|&&s| s).count()
    }
}

/// Simulates one block on a fixed realization: access draws for the typical
/// controller and the interferers, fresh fading every slot.
pub fn simulate_block_acks<R: Rng + ?Sized>(
    budget: &LinkBudget,
    protocol: Protocol,
    q: f64,
    block_len: usize,
    rng: &mut R,
) -> BlockAcks {
    let n = budget.num_interferers();
    let mut access = Vec::with_capacity(block_len);
    let mut acks = Vec::with_capacity(block_len);
    match protocol {
        Protocol::Block => {
            let typical = rng.random_bool(q);
            if !typical {
                return BlockAcks { access: vec![false; block_len], acks: vec![false; block_len] };
            }
            let active = draw_access_block(q, n, rng).expect("q validated by caller");
            for _ in 0..block_len {
                access.push(true);
                acks.push(budget.slot(true, |i| active[i], rng).success);
            }
        }
        Protocol::Classical => {
            for _ in 0..block_len {
                let typical = rng.random_bool(q);
                access.push(typical);
                if typical {
                    let active = draw_access_block(q, n, rng).expect("q validated by caller");
                    acks.push(budget.slot(true, |i| active[i], rng).success);
                } else {
                    acks.push(false);
                }
            }
        }
    }
    BlockAcks { access, acks }
}

/// Empirical estimate with a normal-approximation 95% half width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub protocol: Protocol,
    pub system: SystemKind,
    pub q: f64,
    pub estimate: f64,
    pub half_width_95: f64,
    pub n_samples: usize,
    pub analytic: Option<f64>,
}

pub fn binomial_half_width(p: f64, n: usize) -> f64 {
    1.96 * (p * (1.0 - p) / n as f64).sqrt()
}

fn realization_for<R: Rng + ?Sized>(config: &ExperimentConfig, lambda: f64, rng: &mut R) -> Result<NetworkRealization> {
    Ok(sample_ppp(&config.ppp(lambda)?, rng))
}

/// Counts of controllable blocks (restless, rested) over one realization index.
fn controllability_counts(config: &ExperimentConfig, lambda: f64, v: usize, protocol: Protocol, q: f64, rng: &mut SimRng) -> Result<(usize, usize)> {
    let system = config.system_with_horizon(v)?;
    let x0 = config.initial_state();
    let channel = config.channel()?;
    let mut fixed: Option<LinkBudget> = None;
    let (mut restless, mut rested) = (0usize, 0usize);
    for _ in 0..config.num_blocks {
        let budget = match (&config.geometry, &fixed) {
            (GeometryMode::Fixed, Some(b)) => b.clone(),
            _ => {
                let b = LinkBudget::new(&realization_for(config, lambda, rng)?, &channel);
                if config.geometry == GeometryMode::Fixed {
                    fixed = Some(b.clone());
                }
                b
            }
        };
        let block = simulate_block_acks(&budget, protocol, q, config.block_len, rng);
        // Both systems see the same acknowledgments.
        let rl = run_block_restless(&system, config.block_len, &block.access, |t| block.acks[t], &x0, &x0, rng)?;
        let rd = run_block_rested(&system, config.block_len, &block.access, |t| block.acks[t], &x0, &x0, rng)?;
        restless += rl.block_controllable as usize;
        rested += rd.block_controllable as usize;
    }
    Ok((restless, rested))
}

/// Empirical block controllability for every protocol, system and `q` in the
/// config, over `num_realizations x K` blocks. Idle blocks count as failures.
pub fn estimate_block_controllability(config: &ExperimentConfig) -> Result<Vec<SweepResult>> {
    estimate_block_controllability_at(config, config.lambda, config.v)
}

pub fn estimate_block_controllability_at(config: &ExperimentConfig, lambda: f64, v: usize) -> Result<Vec<SweepResult>> {
    let mut out = Vec::new();
    for (pi, &protocol) in config.protocols().iter().enumerate() {
        for (qi, &q) in config.q_values().iter().enumerate() {
            let counts: Vec<(usize, usize)> = (0..config.num_realizations)
                .into_par_iter()
                .map(|i| {
                    let mut rng = substream(config.seed, tag(TAG_SWEEP, pi, qi), i as u64);
                    controllability_counts(config, lambda, v, protocol, q, &mut rng)
                })
                .collect::<Result<_>>()?;
            let n = config.num_realizations * config.num_blocks;
            let (rl, rd) = counts.iter().fold((0, 0), |(a, b), (x, y)| (a + x, b + y));
            for system in config.systems() {
                let hits = match system {
                    SystemKind::Restless => rl,
                    SystemKind::Rested => rd,
                };
                let p = hits as f64 / n as f64;
                out.push(SweepResult { protocol, system, q, estimate: p, half_width_95: binomial_half_width(p, n), n_samples: n, analytic: None });
            }
        }
    }
    Ok(out)
}

/// Fills `analytic` with the closed-form controllability probability for
/// each sweep point; points whose quadrature fails stay empty.
pub fn attach_analytic(config: &ExperimentConfig, lambda: f64, v: usize, results: &mut [SweepResult]) -> Result<()> {
    let scenario = config.scenario(lambda)?;
    let quad = config.quadrature(lambda);
    let values: Vec<Option<f64>> = results
        .par_iter()
        .map(|r| {
            let e = match r.system {
                SystemKind::Restless => prob_block_controllable_restless(config.block_len, v, r.q, &scenario, &quad, r.protocol),
                SystemKind::Rested => prob_block_controllable_rested(config.block_len, v, r.q, &scenario, &quad, r.protocol),
            };
            match e {
                Ok(e) => Some(e.value),
                Err(err) => {
                    log::warn!("no analytic value for {} {} q={}: {err}", r.protocol, r.system, r.q);
                    None
                }
            }
        })
        .collect();
    for (r, v) in results.iter_mut().zip(values) {
        r.analytic = v;
    }
    Ok(())
}

/// Per-realization conditional success probability entering the rested
/// meta distribution: `P_blk` over the block's drawn active set, or `P_cls`.
pub fn conditional_success_sample<R: Rng + ?Sized>(
    realization: &NetworkRealization,
    channel: &ChannelParams,
    q: f64,
    protocol: Protocol,
    rng: &mut R,
) -> Result<f64> {
    Ok(match protocol {
        Protocol::Block => {
            let active = draw_access_block(q, realization.len(), rng)?;
            let idx: Vec<usize> = (0..realization.len()).filter(|&i| active[i]).collect();
            cond_success_prob_block(realization, &idx, channel)
        }
        Protocol::Classical => cond_success_prob_classical(realization, q, channel),
    })
}

/// Empirical meta distribution: fraction of `num_realizations` realizations
/// whose rested controllability probability reaches each `beta`, with its
/// 95% half width.
pub fn estimate_meta_distribution(config: &ExperimentConfig, lambda: f64, v: usize, q: f64, protocol: Protocol, betas: &[f64]) -> Result<Vec<(f64, f64)>> {
    let qi = (q * 1e6).round() as usize;
    let channel = config.channel()?;
    let samples: Vec<f64> = (0..config.num_realizations)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(config.seed, tag(TAG_META, v, qi), i as u64);
            let realization = realization_for(config, lambda, &mut rng)?;
            conditional_success_sample(&realization, &channel, q, protocol, &mut rng)
        })
        .collect::<Result<_>>()?;
    let n = samples.len();
    Ok(betas
        .iter()
        .map(|&beta| {
            let hits = samples.iter().filter(|&&p| rested_target_met(config.block_len, v, q, p, beta, protocol)).count();
            let frac = hits as f64 / n as f64;
            (frac, binomial_half_width(frac, n))
        })
        .collect())
}

/// One closed-form value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticRow {
    pub protocol: Protocol,
    pub system: SystemKind,
    pub q: f64,
    pub lambda: f64,
    pub block_len: usize,
    pub v: usize,
    /// Set for meta-distribution rows.
    pub beta: Option<f64>,
    pub value: f64,
    pub abs_err: f64,
}

/// Restless systems get the controllability probability, rested systems the
/// meta distribution at every configured `beta`.
pub fn analytic_sweep(config: &ExperimentConfig) -> Result<Vec<AnalyticRow>> {
    let mut jobs = Vec::new();
    for &protocol in &config.protocols() {
        for &system in &config.systems() {
            for &lambda in &config.lambdas() {
                for &v in &config.horizons() {
                    for &q in &config.q_values() {
                        jobs.push((protocol, system, lambda, v, q));
                    }
                }
            }
        }
    }
    let rows: Vec<Vec<AnalyticRow>> = jobs
        .into_par_iter()
        .map(|(protocol, system, lambda, v, q)| {
            let scenario = config.scenario(lambda)?;
            let quad = config.quadrature(lambda);
            let row = |beta, value, abs_err| AnalyticRow { protocol, system, q, lambda, block_len: config.block_len, v, beta, value, abs_err };
            Ok(match system {
                SystemKind::Restless => {
                    let e = prob_block_controllable_restless(config.block_len, v, q, &scenario, &quad, protocol)?;
                    vec![row(None, e.value, e.abs_err)]
                }
                SystemKind::Rested => {
                    let betas = config.betas();
                    let curve = meta_distribution_curve(config.block_len, v, &betas, q, &scenario, &quad, protocol)?;
                    betas.iter().zip(curve).map(|(&b, e)| row(Some(b), e.value, e.abs_err)).collect()
                }
            })
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Which statistic a comparison row is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    Controllability,
    Meta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub quantity: Quantity,
    pub protocol: Protocol,
    pub system: SystemKind,
    pub q: f64,
    pub lambda: f64,
    pub v: usize,
    pub beta: Option<f64>,
    pub empirical: f64,
    pub ci95: f64,
    pub analytic: f64,
    pub abs_diff: f64,
    pub pass: bool,
}

impl CompareRow {
    /// Agreement rule: `|diff| <= max(0.02, 3 * half width)`.
    pub fn tolerance(ci95: f64) -> f64 {
        0.02f64.max(3.0 * ci95)
    }
}

/// Runs the empirical estimators next to their closed forms on identical
/// parameters: controllability for every system, and additionally the meta
/// distribution for rested systems.
pub fn compare_analytic_empirical(config: &ExperimentConfig) -> Result<Vec<CompareRow>> {
    let mut rows = Vec::new();
    for &lambda in &config.lambdas() {
        let scenario = config.scenario(lambda)?;
        let quad = config.quadrature(lambda);
        for &v in &config.horizons() {
            let sweep = estimate_block_controllability_at(config, lambda, v)?;
            for s in &sweep {
                let analytic = match s.system {
                    SystemKind::Restless => prob_block_controllable_restless(config.block_len, v, s.q, &scenario, &quad, s.protocol)?,
                    SystemKind::Rested => prob_block_controllable_rested(config.block_len, v, s.q, &scenario, &quad, s.protocol)?,
                };
                let diff = (s.estimate - analytic.value).abs();
                rows.push(CompareRow {
                    quantity: Quantity::Controllability,
                    protocol: s.protocol,
                    system: s.system,
                    q: s.q,
                    lambda,
                    v,
                    beta: None,
                    empirical: s.estimate,
                    ci95: s.half_width_95,
                    analytic: analytic.value,
                    abs_diff: diff,
                    pass: diff <= CompareRow::tolerance(s.half_width_95),
                });
            }
            if !config.systems().contains(&SystemKind::Rested) {
                continue;
            }
            let betas = config.betas();
            for &protocol in &config.protocols() {
                for &q in &config.q_values() {
                    let empirical = estimate_meta_distribution(config, lambda, v, q, protocol, &betas)?;
                    let analytic = meta_distribution_curve(config.block_len, v, &betas, q, &scenario, &quad, protocol)?;
                    for ((&beta, (emp, hw)), an) in betas.iter().zip(empirical).zip(analytic) {
                        let diff = (emp - an.value).abs();
                        rows.push(CompareRow {
                            quantity: Quantity::Meta,
                            protocol,
                            system: SystemKind::Rested,
                            q,
                            lambda,
                            v,
                            beta: Some(beta),
                            empirical: emp,
                            ci95: hw,
                            analytic: an.value,
                            abs_diff: diff,
                            pass: diff <= CompareRow::tolerance(hw),
                        });
                    }
                }
            }
        }
    }
    Ok(rows)
}

/// One Thompson-sampling run on its own realization.
#[derive(Debug, Clone, PartialEq)]
pub struct TsStudyRun {
    pub lambda: f64,
    pub index: usize,
    pub run: TsRun,
}

/// `num_realizations` independent TS runs per intensity, each on a fresh
/// realization, using the first configured protocol.
pub fn run_ts_study(config: &ExperimentConfig) -> Result<Vec<TsStudyRun>> {
    let protocol = config.protocols()[0];
    let channel = config.channel()?;
    let mut out = Vec::new();
    for (li, &lambda) in config.lambdas().iter().enumerate() {
        let runs: Vec<TsStudyRun> = (0..config.num_realizations)
            .into_par_iter()
            .map(|i| {
                let mut rng = substream(config.seed, tag(TAG_TS, li, 0), i as u64);
                let realization = realization_for(config, lambda, &mut rng)?;
                let run = run_ts(&realization, &config.arms, protocol, &channel, config.block_len, config.num_blocks, &mut rng)?;
                Ok(TsStudyRun { lambda, index: i, run })
            })
            .collect::<Result<_>>()?;
        out.extend(runs);
    }
    Ok(out)
}

/// Mean cumulative regret per block for one intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretCurve {
    pub lambda: f64,
    pub runs: usize,
    pub mean_regret: Vec<f64>,
    pub envelope: Vec<f64>,
}

impl RegretCurve {
    /// `R(2K) / R(K)` with `K` counted in blocks; `None` past the horizon or
    /// when `R(K) = 0`.
    pub fn doubling_ratio(&self, k: usize) -> Option<f64> {
        if k == 0 || 2 * k > self.mean_regret.len() {
            return None;
        }
        let r = self.mean_regret[k - 1];
        (r > 0.0).then(|| self.mean_regret[2 * k - 1] / r)
    }

    pub fn below_envelope(&self) -> bool {
        self.mean_regret.iter().zip(&self.envelope).all(|(r, e)| r < e)
    }
}

/// Averages regret over `num_realizations` runs per intensity.
pub fn run_regret_study(config: &ExperimentConfig) -> Result<Vec<RegretCurve>> {
    let runs = run_ts_study(config)?;
    let d = config.arms.len();
    let mut out = Vec::new();
    for &lambda in &config.lambdas() {
        let mut sum = vec![0.0; config.num_blocks];
        let mut count = 0;
        for r in runs.iter().filter(|r| r.lambda == lambda) {
            for (s, c) in sum.iter_mut().zip(&r.run.trace.cumulative) {
                *s += c;
            }
            count += 1;
        }
        if count == 0 {
            return Err(Error::invalid("num_realizations", "no runs"));
        }
        let mean_regret = sum.iter().map(|s| s / count as f64).collect();
        let envelope = (1..=config.num_blocks)
            .map(|k| if k >= 2 { regret_envelope_explicit(k, config.block_len, d) } else { 4.0 * config.block_len as f64 * d as f64 })
            .collect();
        out.push(RegretCurve { lambda, runs: count, mean_regret, envelope });
    }
    Ok(out)
}

/// Runs the driver selected by `config.mode`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Results> {
    Ok(match config.mode {
        Mode::Simulate => {
            let mut sweep = estimate_block_controllability(config)?;
            attach_analytic(config, config.lambda, config.v, &mut sweep)?;
            Results::Sweep(sweep)
        }
        Mode::Analytic => Results::Analytic(analytic_sweep(config)?),
        Mode::Compare => Results::Compare(compare_analytic_empirical(config)?),
        Mode::Ts => Results::Ts(run_ts_study(config)?),
        Mode::Regret => Results::Regret(run_regret_study(config)?),
    })
}
