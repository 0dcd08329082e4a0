//! Fast end-to-end oracle checks behind the `selftest` subcommand.
//!
//! Each check compares a toolkit result against an independent computation
//! (enumeration, closed form, or a small Monte-Carlo run) and reports a
//! one-line verdict. The full-size versions live in the acceptance tests.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::aloha::draw_access_block;
use crate::analytics::{
    binomial_tail, interference_log_integral, meta_distribution_rested, moment_zeta, run_ccdf_demoivre, MetaQuery,
    QuadratureSpec, Scenario,
};
use crate::bandit::run_ts;
use crate::channel::{cond_success_prob_block, cond_success_prob_classical, ChannelParams, LinkBudget};
use crate::config::{parse_config, preset, PRESETS};
use crate::control::{minimal_poly_degree, run_block_rested, run_block_restless, LtiSystem, MINPOLY_TOL};
use crate::geometry::{sample_ppp, NetworkRealization, PppConfig};
use crate::montecarlo::{estimate_block_controllability, CompareRow};
use crate::output::{render_data, Results};
use crate::rng::seeded;
use crate::{Protocol, Result};

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type CheckFn = fn() -> Result<(bool, String)>;

const CHECKS: &[(&str, CheckFn)] = &[
    ("run_ccdf_matches_enumeration", run_ccdf_enumeration),
    ("binomial_tail_boundaries", binomial_tail_boundaries),
    ("block_success_matches_fading_mc", block_success_mc),
    ("classical_success_matches_thinning_mc", classical_success_mc),
    ("pgfl_alpha_four_closed_form", pgfl_closed_form),
    ("first_moment_matches_ppp_samples", first_moment_samples),
    ("meta_distribution_without_interference", meta_point_mass),
    ("minimal_polynomial_of_jordan_block", jordan_degree),
    ("zero_noise_loops_reach_target", loops_reach_target),
    ("aloha_active_fraction", aloha_fraction),
    ("single_arm_has_zero_regret", single_arm_regret),
    ("presets_round_trip", presets_round_trip),
    ("interference_free_sweep_matches_closed_form", interference_free_sweep),
    ("sweep_bytes_independent_of_threads", thread_invariance),
];

/// Runs every check; a check that errors counts as failed.
pub fn run_selftest() -> Vec<Check> {
    CHECKS
        .iter()
        .map(|&(name, f)| match f() {
            Ok((passed, detail)) => Check { name, passed, detail },
            Err(e) => Check { name, passed: false, detail: format!("error: {e}") },
        })
        .collect()
}

fn run_ccdf_enumeration() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for t in 1..=10usize {
        for v in 1..=t {
            for p in [0.1f64, 0.5, 0.9] {
                let mut brute = 0.0;
                for mask in 0u32..(1 << t) {
                    let (mut run, mut best) = (0, 0);
                    for i in 0..t {
                        run = if mask >> i & 1 == 1 { run + 1 } else { 0 };
                        best = best.max(run);
                    }
                    if best >= v {
                        let k = mask.count_ones() as i32;
                        brute += p.powi(k) * (1.0 - p).powi(t as i32 - k);
                    }
                }
                worst = worst.max((run_ccdf_demoivre(t, v, p)? - brute).abs());
            }
        }
    }
    Ok((worst <= 1e-12, format!("max abs error {worst:e}")))
}

fn binomial_tail_boundaries() -> Result<(bool, String)> {
    let a = binomial_tail(20, 0, 0.3);
    let b = binomial_tail(20, 20, 0.7);
    let c = binomial_tail(20, 1, 0.2);
    let ok = (a - 1.0).abs() < 1e-15 && (b - 0.7f64.powi(20)).abs() < 1e-15 && (c - (1.0 - 0.8f64.powi(20))).abs() < 1e-14;
    Ok((ok, format!("tail(0)={a}, tail(T)={b:e}, tail(1)={c}")))
}

fn hand_realization() -> Result<(NetworkRealization, ChannelParams)> {
    let channel = ChannelParams::default().with_exponent(4.0);
    Ok((NetworkRealization::new(vec![14.0, 25.0, 40.0, 90.0], 10.0)?, channel))
}

fn within_se(hits: usize, n: usize, p: f64, k: f64) -> (bool, String) {
    let est = hits as f64 / n as f64;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    ((est - p).abs() <= k * se, format!("mc {est:.5} vs formula {p:.5} (se {se:.1e})"))
}

fn block_success_mc() -> Result<(bool, String)> {
    let (real, channel) = hand_realization()?;
    let budget = LinkBudget::new(&real, &channel);
    let active = [0usize, 2, 3];
    let p = cond_success_prob_block(&real, &active, &channel);
    let mut rng = seeded(101);
    let n = 200_000;
    let hits = (0..n).filter(|_| budget.slot(true, |i| active.contains(&i), &mut rng).success).count();
    Ok(within_se(hits, n, p, 4.0))
}

fn classical_success_mc() -> Result<(bool, String)> {
    let (real, channel) = hand_realization()?;
    let budget = LinkBudget::new(&real, &channel);
    let q = 0.4;
    let p = cond_success_prob_classical(&real, q, &channel);
    let mut rng = seeded(102);
    let n = 200_000;
    let mut hits = 0;
    for _ in 0..n {
        let active = draw_access_block(q, real.len(), &mut rng)?;
        hits += budget.slot(true, |i| active[i], &mut rng).success as usize;
    }
    Ok(within_se(hits, n, p, 4.0))
}

fn pgfl_closed_form() -> Result<(bool, String)> {
    let sc = Scenario::new(1e-4, 10.0, ChannelParams::default().with_exponent(4.0))?;
    let mut spec = QuadratureSpec::windowed(500.0);
    spec.infinite_plane = true;
    let got = interference_log_integral(Complex64::new(1.0, 0.0), 1.0, &sc, &spec, Protocol::Block)?.value.re;
    let want = -2.0 * PI * 1e-4 * PI * 100.0 / 4.0;
    let rel = (got - want).abs() / want.abs();
    Ok((rel < 1e-9, format!("{got:.12e} vs {want:.12e}")))
}

fn first_moment_samples() -> Result<(bool, String)> {
    let (lambda, q) = (5e-4, 0.5);
    let channel = ChannelParams::default().with_exponent(4.0);
    let ppp = PppConfig::with_default_window(lambda, 10.0)?;
    let sc = Scenario::new(lambda, 10.0, channel)?;
    let zeta = moment_zeta(1, q, &sc, &QuadratureSpec::windowed(ppp.window_radius), Protocol::Block)?.value;
    let mut rng = seeded(103);
    let n = 20_000;
    let mut sum = 0.0;
    for _ in 0..n {
        let real = sample_ppp(&ppp, &mut rng);
        let active: Vec<usize> = (0..real.len()).filter(|_| rng.random_bool(q)).collect();
        sum += cond_success_prob_block(&real, &active, &channel);
    }
    let mean = sum / n as f64;
    let rel = (mean - zeta).abs() / zeta;
    Ok((rel < 0.02, format!("sample mean {mean:.5} vs zeta {zeta:.5}")))
}

fn meta_point_mass() -> Result<(bool, String)> {
    let sc = Scenario::new(0.0, 10.0, ChannelParams::default().with_threshold(100.0))?;
    let p0 = sc.noise_only_success();
    let tail = binomial_tail(20, 4, p0);
    let quad = QuadratureSpec::windowed(100.0);
    let mut ok = true;
    let mut detail = String::new();
    for beta in [0.3, 0.6, 0.9] {
        let query = MetaQuery { block_len: 20, v: 4, beta, q: 1.0, scenario: sc.clone() };
        let got = meta_distribution_rested(&query, &quad, Protocol::Block)?.value;
        let want = if tail >= beta { 1.0 } else { 0.0 };
        ok &= (got - want).abs() < 1e-6;
        detail += &format!("beta {beta}: {got:.6} vs {want} ");
    }
    Ok((ok, detail.trim_end().to_string()))
}

fn jordan_degree() -> Result<(bool, String)> {
    let a = DMatrix::from_row_slice(3, 3, &[0.5, 1.0, 0.0, 0.0, 0.5, 1.0, 0.0, 0.0, 0.5]);
    let d = minimal_poly_degree(&a, MINPOLY_TOL);
    Ok((d == 3, format!("degree {d}")))
}

fn loops_reach_target() -> Result<(bool, String)> {
    let a = DMatrix::from_row_slice(2, 2, &[1.2, 0.3, 0.0, 0.8]);
    let x_des = DVector::from_vec(vec![1.0, -2.0]);
    let sys = LtiSystem::new(a, DMatrix::identity(2, 2), x_des.clone(), Some(3), 0.0)?;
    let x0 = DVector::zeros(2);
    let access = vec![true; 10];
    let mut rng = seeded(104);
    let rl = run_block_restless(&sys, 10, &access, |_| true, &x0, &x0, &mut rng)?;
    // Rested with scattered successes.
    let rd = run_block_rested(&sys, 10, &access, |t| t % 3 == 0, &x0, &x0, &mut rng)?;
    let err_rl = (rl.final_state() - &x_des).amax();
    let err_rd = (rd.final_state() - &x_des).amax();
    let ok = rl.block_controllable && rd.block_controllable && err_rl < 1e-9 && err_rd < 1e-9;
    Ok((ok, format!("restless err {err_rl:e}, rested err {err_rd:e}")))
}

fn aloha_fraction() -> Result<(bool, String)> {
    let n = 100_000;
    let active = draw_access_block(0.3, n, &mut seeded(105))?;
    let frac = active.iter().filter(|&&a| a).count() as f64 / n as f64;
    let band = 3.0 * (0.3f64 * 0.7 / n as f64).sqrt();
    Ok(((frac - 0.3).abs() <= band, format!("fraction {frac:.5}, band {band:.1e}")))
}

fn single_arm_regret() -> Result<(bool, String)> {
    let (real, channel) = hand_realization()?;
    let run = run_ts(&real, &[0.6], Protocol::Block, &channel, 20, 300, &mut seeded(106))?;
    let worst = run.trace.cumulative.iter().fold(0.0f64, |m, &c| m.max(c.abs()));
    Ok((worst == 0.0, format!("max cumulative regret {worst}")))
}

fn presets_round_trip() -> Result<(bool, String)> {
    for &(name, _) in PRESETS {
        let config = parse_config(preset(name).expect("listed preset"), &[])?;
        let again = parse_config(&config.to_toml(), &[])?;
        if again != config {
            return Ok((false, format!("{name} changed after round trip")));
        }
    }
    Ok((true, format!("{} presets", PRESETS.len())))
}

fn interference_free_sweep() -> Result<(bool, String)> {
    let config = parse_config("lambda = 0.0\nnum_realizations = 3000\nq_sweep = [0.7]\ngamma_db = 45.0\nsystem = [\"restless\", \"rested\"]\nprotocol = [\"block\", \"classical\"]", &[])?;
    let mut sweep = estimate_block_controllability(&config)?;
    crate::montecarlo::attach_analytic(&config, 0.0, config.v, &mut sweep)?;
    let mut ok = true;
    let mut worst = 0.0f64;
    for r in &sweep {
        let diff = (r.estimate - r.analytic.unwrap_or(f64::NAN)).abs();
        ok &= diff <= CompareRow::tolerance(r.half_width_95);
        worst = worst.max(diff);
    }
    Ok((ok, format!("{} points, max |diff| {worst:.4}", sweep.len())))
}

fn thread_invariance() -> Result<(bool, String)> {
    let config = parse_config("num_realizations = 30\nK = 2\nq_sweep = [0.4, 0.9]\nlambda = 1e-3\nsystem = [\"restless\", \"rested\"]", &[])?;
    let render = |threads: usize| -> Result<Vec<(String, Vec<u8>)>> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool");
        let sweep = pool.install(|| estimate_block_controllability(&config))?;
        render_data(&Results::Sweep(sweep), &config)
    };
    let one = render(1)?;
    let four = render(4)?;
    Ok((one == four, format!("{} bytes compared", one.iter().map(|f| f.1.len()).sum::<usize>())))
}
