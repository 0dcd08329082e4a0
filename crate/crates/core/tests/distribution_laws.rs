//! Statistical laws of the network sampler, the access draws and the
//! Monte-Carlo estimators.

use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

use ncs_aloha::aloha::{draw_access_block, draw_access_classical};
use ncs_aloha::config::parse_config;
use ncs_aloha::geometry::{sample_ppp, PppConfig};
use ncs_aloha::montecarlo::estimate_block_controllability;
use ncs_aloha::rng::{seeded, substream};

/// Pearson chi-square of `counts` against Poisson(`mean`), pooling tail bins
/// so every expected count is at least 5. Returns (statistic, critical value at 0.01).
fn poisson_chi_square(counts: &[usize], mean: f64) -> (f64, f64) {
    let n = counts.len() as f64;
    let pois = Poisson::new(mean).unwrap();
    let max = *counts.iter().max().unwrap() as u64;
    let mut observed = vec![0usize; max as usize + 1];
    for &c in counts {
        observed[c] += 1;
    }
    // Bins [0..=lo], lo+1, ..., [hi..) with expected counts >= 5.
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for k in 0..=max {
        obs += observed[k as usize] as f64;
        exp += n * pois.pmf(k);
        if exp >= 5.0 {
            bins.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    // Remaining mass (including the tail beyond `max`) joins the last bin.
    let tail = n - bins.iter().map(|b| b.1).sum::<f64>();
    let last = bins.last_mut().unwrap();
    last.0 += obs;
    last.1 += tail;
    let stat: f64 = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = (bins.len() - 1) as f64;
    (stat, ChiSquared::new(dof).unwrap().inverse_cdf(0.99))
}

#[test]
fn interferer_counts_are_poisson() {
    let config = PppConfig::new(2e-3, 40.0, 5.0).unwrap();
    let counts: Vec<usize> = (0..20_000u64).map(|s| sample_ppp(&config, &mut substream(7, 0, s)).len()).collect();
    let (stat, critical) = poisson_chi_square(&counts, config.mean_count());
    assert!(stat < critical, "chi-square {stat} >= {critical}");
}

#[test]
fn distances_follow_the_disk_law() {
    let config = PppConfig::new(1e-3, 100.0, 10.0).unwrap();
    let mut rng = seeded(8);
    let mut r: Vec<f64> = Vec::new();
    while r.len() < 20_000 {
        r.extend(sample_ppp(&config, &mut rng).interferer_distances);
    }
    r.sort_by(f64::total_cmp);
    let n = r.len() as f64;
    let cdf = |z: f64| (z / config.window_radius).powi(2);
    let d = r.iter().enumerate().fold(0.0f64, |m, (i, &z)| {
        let f = cdf(z);
        m.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs())
    });
    // Asymptotic Kolmogorov-Smirnov critical value at 0.01.
    let critical = 1.628 / n.sqrt();
    assert!(d < critical, "KS statistic {d} >= {critical}");
    assert!(r[0] > 0.0 && *r.last().unwrap() <= config.window_radius);
}

#[test]
fn block_aloha_thins_to_poisson() {
    let (lambda, q) = (2e-3, 0.3);
    let config = PppConfig::new(lambda, 40.0, 5.0).unwrap();
    let counts: Vec<usize> = (0..20_000u64)
        .map(|s| {
            let mut rng = substream(9, 0, s);
            let real = sample_ppp(&config, &mut rng);
            draw_access_block(q, real.len(), &mut rng).unwrap().iter().filter(|&&a| a).count()
        })
        .collect();
    let (stat, critical) = poisson_chi_square(&counts, q * config.mean_count());
    assert!(stat < critical, "chi-square {stat} >= {critical}");
}

#[test]
fn classical_slots_are_iid() {
    // Consecutive slots of one node: joint frequencies match the product law.
    let q = 0.4;
    let nodes = 100_000;
    let pattern = draw_access_classical(q, nodes, 2, &mut seeded(10)).unwrap();
    let first = (0..nodes).filter(|&i| pattern.is_active(i, 0)).count() as f64 / nodes as f64;
    let both = (0..nodes).filter(|&i| pattern.is_active(i, 0) && pattern.is_active(i, 1)).count() as f64 / nodes as f64;
    let n = nodes as f64;
    assert!((first - q).abs() < 4.0 * (q * (1.0 - q) / n).sqrt());
    assert!((both - q * q).abs() < 4.0 * (q * q * (1.0 - q * q) / n).sqrt());
}

#[test]
fn confidence_width_shrinks_at_binomial_rate() {
    // Quadrupling the sample count halves the 95% half width.
    let base = "lambda = 1e-3\nalpha = 4.0\nq_sweep = [0.5]\nsystem = \"rested\"\n";
    let small = parse_config(&format!("{base}num_realizations = 2000"), &[]).unwrap();
    let large = parse_config(&format!("{base}num_realizations = 8000"), &[]).unwrap();
    let hw_small = estimate_block_controllability(&small).unwrap()[0].half_width_95;
    let hw_large = estimate_block_controllability(&large).unwrap()[0].half_width_95;
    let ratio = hw_large / hw_small;
    assert!((ratio - 0.5).abs() <= 0.1, "ratio {ratio}");
}
