//! Longest-run and binomial-tail probabilities, and their averages over the
//! random success probability via its moments.

use log::warn;

use super::pgfl::moment_zeta;
use super::quadrature::CompensatedSum;
use super::{Estimate, QuadratureSpec, Scenario};
use crate::{Error, Protocol, Result};

/// Cancellation ratio above which results are flagged.
pub const CANCELLATION_WARN: f64 = 1e6;

pub(crate) fn ln_choose(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum()
}

pub(crate) fn choose(n: usize, k: usize) -> f64 {
    ln_choose(n, k).exp().round()
}

fn check_run_args(block_len: usize, v: usize, p: f64) -> Result<()> {
    if v == 0 || v > block_len {
        return Err(Error::invalid("v", format!("need 1 <= v <= T, got v = {v}, T = {block_len}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("p", format!("probability {p} is outside [0, 1]")));
    }
    Ok(())
}

/// Probability that `T` Bernoulli(p) trials contain a run of at least `v`
/// successes (de Moivre's alternating sum).
pub fn run_ccdf_demoivre(block_len: usize, v: usize, p: f64) -> Result<f64> {
    check_run_args(block_len, v, p)?;
    if p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    let (ln_p, ln_q) = (p.ln(), (-p).ln_1p());
    let mut sum = CompensatedSum::default();
    let mut largest = 0.0f64;
    for l in 1..=(block_len + 1) / (v + 1) {
        let ln_term = ln_choose(block_len - l * v, l - 1) + (l * v) as f64 * ln_p + (l - 1) as f64 * ln_q;
        let bracket = p + (block_len - l * v + 1) as f64 / l as f64 * (1.0 - p);
        let sign = if l % 2 == 1 { 1.0 } else { -1.0 };
        let term = bracket * ln_term.exp();
        largest = largest.max(term);
        sum.add(sign * term);
    }
    if largest > RUN_SUM_CANCELLATION {
        return Ok(run_ccdf_recursive(block_len, v, p));
    }
    Ok(sum.value().clamp(0.0, 1.0))
}

/// Terms of the alternating sum beyond this size lose digits to cancellation.
const RUN_SUM_CANCELLATION: f64 = 8.0;

/// Same probability from the all-positive recursion on the probability of no
/// run: `N(n) = sum_{j<v} p^j (1-p) N(n-j-1)`, `N(n) = 1` for `n < v`.
fn run_ccdf_recursive(block_len: usize, v: usize, p: f64) -> f64 {
    let mut none = vec![1.0f64; block_len + 1];
    for n in v..=block_len {
        let mut acc = CompensatedSum::default();
        let mut pj = 1.0;
        for j in 0..v {
            acc.add(pj * (1.0 - p) * none[n - j - 1]);
            pj *= p;
        }
        none[n] = acc.value();
    }
    (1.0 - none[block_len]).clamp(0.0, 1.0)
}

/// `sum_{l=v}^T C(T, l) p^l (1-p)^(T-l)` in log space.
pub fn binomial_tail(block_len: usize, v: usize, p: f64) -> f64 {
    assert!((0.0..=1.0).contains(&p), "probability {p} is outside [0, 1]");
    if v == 0 {
        return 1.0;
    }
    if v > block_len || p == 0.0 {
        return 0.0;
    }
    if p == 1.0 {
        return 1.0;
    }
    let (ln_p, ln_q) = (p.ln(), (-p).ln_1p());
    let mut sum = CompensatedSum::default();
    for l in v..=block_len {
        sum.add((ln_choose(block_len, l) + l as f64 * ln_p + (block_len - l) as f64 * ln_q).exp());
    }
    sum.value().clamp(0.0, 1.0)
}

/// `P(Bin(T, p) < v)`, accurate when small (where `1 - binomial_tail` is not).
pub fn binomial_lower_tail(block_len: usize, v: usize, p: f64) -> f64 {
    assert!((0.0..=1.0).contains(&p), "probability {p} is outside [0, 1]");
    if v == 0 {
        return 0.0;
    }
    if v > block_len || p == 0.0 {
        return 1.0;
    }
    if p == 1.0 {
        return 0.0;
    }
    let (ln_p, ln_q) = (p.ln(), (-p).ln_1p());
    let mut sum = CompensatedSum::default();
    for l in 0..v {
        sum.add((ln_choose(block_len, l) + l as f64 * ln_p + (block_len - l) as f64 * ln_q).exp());
    }
    sum.value().clamp(0.0, 1.0)
}

/// Whether a pair with conditional success probability `p` is rested-block
/// controllable with probability at least `beta`: `q tail(p) >= beta` for
/// block, `tail(q p) >= beta` for classical. Near `tail = 1` the comparison
/// goes through the lower tail so that `beta = q` is not decided by rounding.
pub fn rested_target_met(block_len: usize, v: usize, q: f64, p: f64, beta: f64, protocol: Protocol) -> bool {
    let (scale, arg) = match protocol {
        Protocol::Block => (q, p),
        Protocol::Classical => (1.0, q * p),
    };
    let tail = binomial_tail(block_len, v, arg);
    if tail <= 0.5 {
        scale * tail >= beta
    } else {
        scale * binomial_lower_tail(block_len, v, arg) <= scale - beta
    }
}

/// Moments `m[k]`, `k = 0..=k_max` (with `m[0] = 1`): `E[P_blk^k]` for block and
/// `E[(q P_cls)^k]` for classical.
pub fn moments(k_max: usize, q: f64, scenario: &Scenario, quad: &QuadratureSpec, protocol: Protocol) -> Result<Vec<Estimate>> {
    let mut out = Vec::with_capacity(k_max + 1);
    out.push(Estimate { value: 1.0, abs_err: 0.0 });
    for k in 1..=k_max {
        out.push(moment_zeta(k as u32, q, scenario, quad, protocol)?);
    }
    Ok(out)
}

struct MomentSum<'a> {
    m: &'a [Estimate],
    sum: CompensatedSum,
    err: f64,
}

impl MomentSum<'_> {
    fn add(&mut self, coeff: f64, k: usize) {
        self.sum.add(coeff * self.m[k].value);
        self.err += coeff.abs() * self.m[k].abs_err;
    }

    fn finish(self, what: &str) -> Estimate {
        let ratio = self.sum.cancellation();
        if ratio > CANCELLATION_WARN {
            warn!("{what}: alternating sum cancels by a factor {ratio:.2e}; expect precision loss");
        }
        // Rounding in the moments themselves is amplified by the cancellation.
        let err = self.err + 4.0 * f64::EPSILON * self.sum.magnitude();
        Estimate { value: self.sum.value(), abs_err: err }
    }
}

/// Leading factor and validated moments shared by the restless and rested expansions.
fn prepare(block_len: usize, v: usize, q: f64, scenario: &Scenario, quad: &QuadratureSpec, protocol: Protocol, k_max: usize) -> Result<(f64, Vec<Estimate>)> {
    check_run_args(block_len, v, 0.5)?;
    crate::aloha::check_q(q)?;
    let lead = match protocol {
        Protocol::Block => q,
        Protocol::Classical => 1.0,
    };
    Ok((lead, moments(k_max, q, scenario, quad, protocol)?))
}

/// Probability of block controllability of the typical restless pair:
/// the run CCDF averaged over the random success probability, expanded in
/// its moments. Block ALOHA carries the leading access factor `q`.
pub fn prob_block_controllable_restless(
    block_len: usize,
    v: usize,
    q: f64,
    scenario: &Scenario,
    quad: &QuadratureSpec,
    protocol: Protocol,
) -> Result<Estimate> {
    let (lead, m) = prepare(block_len, v, q, scenario, quad, protocol, block_len + 1)?;
    if lead == 0.0 {
        return Ok(Estimate { value: 0.0, abs_err: 0.0 });
    }
    let mut acc = MomentSum { m: &m, sum: CompensatedSum::default(), err: 0.0 };
    for l in 1..=(block_len + 1) / (v + 1) {
        let sign = if l % 2 == 1 { 1.0 } else { -1.0 };
        let outer = sign * choose(block_len - l * v, l - 1);
        // E[P^{lv+1} (1-P)^{l-1}]
        for i in 0..l {
            let c = if i % 2 == 0 { 1.0 } else { -1.0 } * choose(l - 1, i);
            acc.add(outer * c, l * v + 1 + i);
        }
        // ((T - lv + 1) / l) E[P^{lv} (1-P)^l]
        let w = (block_len - l * v + 1) as f64 / l as f64;
        for i in 0..=l {
            let c = if i % 2 == 0 { 1.0 } else { -1.0 } * choose(l, i);
            acc.add(outer * w * c, l * v + i);
        }
    }
    let e = acc.finish("restless controllability");
    Ok(Estimate { value: (lead * e.value).clamp(0.0, 1.0), abs_err: lead * e.abs_err })
}

/// Probability of block controllability of the typical rested pair: the
/// binomial tail averaged over the random success probability.
pub fn prob_block_controllable_rested(
    block_len: usize,
    v: usize,
    q: f64,
    scenario: &Scenario,
    quad: &QuadratureSpec,
    protocol: Protocol,
) -> Result<Estimate> {
    let (lead, m) = prepare(block_len, v, q, scenario, quad, protocol, block_len)?;
    if lead == 0.0 {
        return Ok(Estimate { value: 0.0, abs_err: 0.0 });
    }
    let mut acc = MomentSum { m: &m, sum: CompensatedSum::default(), err: 0.0 };
    for l in v..=block_len {
        let c = choose(block_len, l);
        // E[P^l (1-P)^{T-l}]
        for i in 0..=block_len - l {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            acc.add(c * sign * choose(block_len - l, i), l + i);
        }
    }
    let e = acc.finish("rested controllability");
    Ok(Estimate { value: (lead * e.value).clamp(0.0, 1.0), abs_err: lead * e.abs_err })
}
