//! Meta distribution of the rested system: the fraction of network
//! realizations in which the pair is block controllable with probability at
//! least `beta`, obtained by Gil-Pelaez inversion of the characteristic
//! function of the log success probability.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;

use super::pgfl::{interference_log_integral, log_success_char_function, mean_log_success, no_interferer_prob};
use super::quadrature::{integrate, Tolerance};
use super::runs::rested_target_met;
use super::{Estimate, MetaQuery, QuadratureSpec, Scenario};
use crate::{Error, Protocol, Result};

/// Below this `s` the inversion integrand is replaced by its limit.
pub const S_MIN: f64 = 1e-6;
const S_MAX: f64 = 1e7;
/// Inversion panels before giving up on a nearly degenerate distribution.
const MAX_PANELS: usize = 1_000;
/// Moment orders `2^0..=2^k` tried in the Chernoff bound.
const CHERNOFF_ORDERS: u32 = 8;
const BISECTION_TOL: f64 = 1e-12;

/// Smallest conditional success probability `p` for which the rested
/// controllability probability reaches `beta`: `q * tail(p) >= beta` for
/// block, `tail(q p) >= beta` for classical. `None` when even `p = 1` fails.
pub fn inverse_tail_threshold(block_len: usize, v: usize, q: f64, beta: f64, protocol: Protocol) -> Option<f64> {
    let met = |p: f64| rested_target_met(block_len, v, q, p, beta, protocol);
    if met(0.0) {
        return Some(0.0);
    }
    if !met(1.0) {
        return None;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if met(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Meta distribution for a single `beta`.
pub fn meta_distribution_rested(query: &MetaQuery, quad: &QuadratureSpec, protocol: Protocol) -> Result<Estimate> {
    query.validate()?;
    let out = meta_distribution_curve(query.block_len, query.v, &[query.beta], query.q, &query.scenario, quad, protocol)?;
    Ok(out[0])
}

/// Meta distribution for several `beta` values sharing one characteristic
/// function evaluation per abscissa.
pub fn meta_distribution_curve(
    block_len: usize,
    v: usize,
    betas: &[f64],
    q: f64,
    scenario: &Scenario,
    quad: &QuadratureSpec,
    protocol: Protocol,
) -> Result<Vec<Estimate>> {
    if v == 0 || v > block_len {
        return Err(Error::invalid("v", "need 1 <= v <= T"));
    }
    if let Some(b) = betas.iter().find(|&&b| !(b > 0.0 && b < 1.0)) {
        return Err(Error::invalid("beta", format!("{b} is outside (0, 1)")));
    }
    crate::aloha::check_q(q)?;
    scenario.validate()?;
    quad.validate()?;

    let exact = |x: f64| Estimate { value: x, abs_err: 0.0 };
    let mut out = vec![exact(0.0); betas.len()];
    let nu = scenario.noise_exponent();
    let p0 = (-nu).exp();
    let gp_tol = quad.abs_tol.max(1e-9);
    let atom = no_interferer_prob(q, scenario, quad, protocol);
    // ln E[(P / p0)^l]; P never exceeds p0.
    let log_ratio_moment = |l: f64| -> Result<f64> {
        Ok(interference_log_integral(Complex64::new(l, 0.0), q, scenario, quad, protocol)?.value.re)
    };
    // (index, ln threshold) pairs that need the inversion integral.
    let mut pending: Vec<(usize, f64)> = Vec::new();
    for (i, &beta) in betas.iter().enumerate() {
        let p = match inverse_tail_threshold(block_len, v, q, beta, protocol) {
            None => continue,
            Some(p) if p <= 0.0 => {
                out[i] = exact(1.0);
                continue;
            }
            Some(p) if scenario.lambda == 0.0 || q == 0.0 => {
                out[i] = exact(if p0 >= p { 1.0 } else { 0.0 });
                continue;
            }
            Some(p) => p,
        };
        if p >= p0 {
            // Only a pair without active interferers reaches p0.
            out[i] = exact(if p == p0 { atom } else { 0.0 });
            continue;
        }
        let ratio = p / p0;
        // Markov on 1 - P / p0 bounds P(P < p); a Chernoff bound on P^l bounds P(P >= p).
        let below = -log_ratio_moment(1.0)?.exp_m1() / (1.0 - ratio);
        if below <= gp_tol {
            out[i] = Estimate { value: 1.0 - 0.5 * below, abs_err: 0.5 * below };
            continue;
        }
        let mut above = f64::INFINITY;
        for k in 0..=CHERNOFF_ORDERS {
            let l = (1u64 << k) as f64;
            above = above.min((log_ratio_moment(l)? - l * ratio.ln()).exp());
        }
        if above <= gp_tol {
            out[i] = Estimate { value: 0.5 * above, abs_err: 0.5 * above };
            continue;
        }
        pending.push((i, p.ln()));
    }
    if pending.is_empty() {
        return Ok(out);
    }

    // ln P equals -nu exactly when no interferer is present; that atom is
    // handled in closed form and removed from the characteristic function.
    let mean = mean_log_success(q, scenario, quad, protocol)?.value;
    let y0: Vec<f64> = pending.iter().map(|&(_, y)| y).collect();
    let continuous_part = |s: f64| -> Result<Complex64> {
        let phi = log_success_char_function(s, q, scenario, quad, protocol)?.value;
        Ok(phi - Complex64::from_polar(atom, -s * nu))
    };

    let rate = y0.iter().fold(1.0f64, |m, &y| m.max((mean - y).abs()));
    let max_width = 16.0 * PI / rate;
    let panel_tol = Tolerance { rel: 1e-9, abs: 1e-2 * gp_tol, max_subdivisions: quad.max_subdivisions };

    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let mut integrand = |s: f64| -> Vec<f64> {
        match continuous_part(s) {
            Ok(phi) => y0.iter().map(|&y| (Complex64::from_polar(1.0, -s * y) * phi).im / s).collect(),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                vec![0.0; y0.len()]
            }
        }
    };

    let mut total = vec![0.0; y0.len()];
    let mut err = 0.0;
    let mut lo = S_MIN;
    let mut panels = 0usize;
    let mut width = 1.0f64.min(max_width);
    loop {
        let hi = lo + width;
        let panel = integrate(&mut integrand, lo, hi, &[], panel_tol)?;
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        for (t, p) in total.iter_mut().zip(&panel.value) {
            *t += p;
        }
        err += panel.abs_err;
        let contribution = panel.value.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let envelope = continuous_part(hi)?.norm() / hi;
        if envelope < gp_tol && contribution < gp_tol {
            err += envelope;
            break;
        }
        panels += 1;
        if hi > S_MAX || panels > MAX_PANELS {
            return Err(Error::Quadrature { error_estimate: envelope, subdivisions: panel.subdivisions });
        }
        lo = hi;
        width = (2.0 * width).min(max_width);
    }

    for (k, &(i, y)) in pending.iter().enumerate() {
        let step = if -nu > y {
            1.0
        } else if -nu == y {
            0.5
        } else {
            0.0
        };
        // Limit of the integrand as s -> 0 is E[Y] - y0 minus the atom's share.
        let head = S_MIN * (mean - y - atom * (-nu - y));
        let value = atom * step + 0.5 * (1.0 - atom) + (head + total[k]) / PI;
        out[i] = Estimate { value: value.clamp(0.0, 1.0), abs_err: err / PI };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::runs::binomial_tail;
    use crate::channel::ChannelParams;

    #[test]
    fn threshold_bracketing() {
        let p = inverse_tail_threshold(20, 4, 1.0, 0.9, Protocol::Block).unwrap();
        let tail = binomial_tail(20, 4, p);
        assert!((0.9..=0.9 + 1e-9).contains(&tail), "{tail}");
        assert!(binomial_tail(20, 4, p - 1e-9) < 0.9);
    }

    #[test]
    fn threshold_edge_cases() {
        assert_eq!(inverse_tail_threshold(20, 4, 0.5, 0.6, Protocol::Block), None);
        let small = inverse_tail_threshold(20, 4, 1.0, 1e-12, Protocol::Block).unwrap();
        assert!(small < 0.01);
        let cls = inverse_tail_threshold(20, 4, 0.5, 0.9, Protocol::Classical).unwrap();
        let blk = inverse_tail_threshold(20, 4, 1.0, 0.9, Protocol::Block).unwrap();
        assert!((cls - 2.0 * blk).abs() < 1e-11);
        assert_eq!(inverse_tail_threshold(20, 4, 0.1, 0.9, Protocol::Classical), None);
    }

    #[test]
    fn point_mass_without_interference() {
        let sc = Scenario::new(0.0, 10.0, ChannelParams::default().with_exponent(4.0)).unwrap();
        let quad = QuadratureSpec::windowed(100.0);
        let p0 = sc.noise_only_success();
        assert!(p0 > 0.99);
        let out = meta_distribution_curve(20, 4, &[0.5, 0.9], 1.0, &sc, &quad, Protocol::Block).unwrap();
        assert_eq!(out[0].value, 1.0);
        let noisy = Scenario::new(0.0, 10.0, ChannelParams::default().with_exponent(4.0).with_threshold(1e7)).unwrap();
        let out = meta_distribution_curve(20, 4, &[0.5], 1.0, &noisy, &quad, Protocol::Block).unwrap();
        assert_eq!(out[0].value, 0.0);
    }

    #[test]
    fn unreachable_beta_gives_zero() {
        let sc = Scenario::new(1e-4, 10.0, ChannelParams::default().with_exponent(4.0)).unwrap();
        let quad = QuadratureSpec::windowed(500.0);
        let out = meta_distribution_curve(20, 4, &[0.8], 0.5, &sc, &quad, Protocol::Block).unwrap();
        assert_eq!(out[0].value, 0.0);
    }
}
