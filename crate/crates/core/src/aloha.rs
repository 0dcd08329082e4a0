//! Channel-access draws for block and classical ALOHA.

use rand::Rng;

use crate::{Error, Protocol, Result};

/// Access rule plus the arm set used by the bandit.
#[derive(Debug, Clone, PartialEq)]
pub struct AlohaPolicy {
    pub protocol: Protocol,
    pub q: f64,
    pub arms: Vec<f64>,
}

impl AlohaPolicy {
    pub fn new(protocol: Protocol, q: f64, arms: Vec<f64>) -> Result<Self> {
        check_q(q)?;
        check_arms(&arms)?;
        Ok(AlohaPolicy { protocol, q, arms })
    }

    /// Access states of `num_nodes` nodes over a block of `slots` slots.
    pub fn draw<R: Rng + ?Sized>(&self, num_nodes: usize, slots: usize, rng: &mut R) -> Result<AccessPattern> {
        match self.protocol {
            Protocol::Block => Ok(AccessPattern::constant(draw_access_block(self.q, num_nodes, rng)?, slots)),
            Protocol::Classical => draw_access_classical(self.q, num_nodes, slots, rng),
        }
    }
}

pub(crate) fn check_q(q: f64) -> Result<()> {
    if (0.0..=1.0).contains(&q) {
        Ok(())
    } else {
        Err(Error::invalid("q", format!("access probability {q} is outside [0, 1]")))
    }
}

/// Arms must be strictly increasing values in `(0, 1]`.
pub fn check_arms(arms: &[f64]) -> Result<()> {
    if let Some(bad) = arms.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
        return Err(Error::invalid("arms", format!("arm {bad} is outside (0, 1]")));
    }
    if arms.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("arms", "arms must be strictly increasing"));
    }
    Ok(())
}

/// Node-by-slot access states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessPattern {
    num_nodes: usize,
    slots: usize,
    // Node-major.
    states: Vec<bool>,
}

impl AccessPattern {
    fn constant(per_node: Vec<bool>, slots: usize) -> Self {
        let num_nodes = per_node.len();
        let states = per_node
            .into_iter()
            .flat_map(|s| std::iter::repeat_n(s, slots))
            .collect();
        AccessPattern { num_nodes, slots, states }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn is_active(&self, node: usize, slot: usize) -> bool {
        assert!(slot < self.slots, "slot {slot} out of range");
        self.states[node * self.slots + slot]
    }

    /// Access states of one node over the block.
    pub fn node(&self, node: usize) -> &[bool] {
        &self.states[node * self.slots..(node + 1) * self.slots]
    }
}

/// One Bernoulli(q) draw per node, held for the whole block.
pub fn draw_access_block<R: Rng + ?Sized>(q: f64, num_nodes: usize, rng: &mut R) -> Result<Vec<bool>> {
    check_q(q)?;
    Ok((0..num_nodes).map(|_| rng.random_bool(q)).collect())
}

/// Independent Bernoulli(q) draws per node and slot.
pub fn draw_access_classical<R: Rng + ?Sized>(q: f64, num_nodes: usize, slots: usize, rng: &mut R) -> Result<AccessPattern> {
    check_q(q)?;
    if slots == 0 {
        return Err(Error::invalid("T", "block length must be >= 1"));
    }
    let states = (0..num_nodes * slots).map(|_| rng.random_bool(q)).collect();
    Ok(AccessPattern { num_nodes, slots, states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn block_extremes() {
        let mut rng = seeded(3);
        assert!(draw_access_block(0.0, 1000, &mut rng).unwrap().iter().all(|s| !s));
        assert!(draw_access_block(1.0, 1000, &mut rng).unwrap().iter().all(|&s| s));
    }

    #[test]
    fn block_fraction_within_binomial_band() {
        let n = 100_000;
        let active = draw_access_block(0.3, n, &mut seeded(4)).unwrap().iter().filter(|&&s| s).count();
        let frac = active as f64 / n as f64;
        assert!((frac - 0.3).abs() < 3.0 * (0.3f64 * 0.7 / n as f64).sqrt());
    }

    #[test]
    fn classical_extremes() {
        let mut rng = seeded(5);
        let zero = draw_access_classical(0.0, 50, 20, &mut rng).unwrap();
        assert!((0..50).all(|i| zero.node(i).iter().all(|s| !s)));
        let one = draw_access_classical(1.0, 50, 20, &mut rng).unwrap();
        let block = AlohaPolicy::new(Protocol::Block, 1.0, vec![]).unwrap().draw(50, 20, &mut rng).unwrap();
        assert_eq!(one, block);
    }

    #[test]
    fn classical_slots_uncorrelated() {
        // Correlation of per-slot active fractions between consecutive slots.
        let (nodes, draws, q) = (20usize, 10_000usize, 0.4);
        let mut rng = seeded(6);
        let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..draws {
            let pat = draw_access_classical(q, nodes, 2, &mut rng).unwrap();
            let x = (0..nodes).filter(|&i| pat.is_active(i, 0)).count() as f64 / nodes as f64;
            let y = (0..nodes).filter(|&i| pat.is_active(i, 1)).count() as f64 / nodes as f64;
            sx += x;
            sy += y;
            sxx += x * x;
            syy += y * y;
            sxy += x * y;
        }
        let n = draws as f64;
        let cov = sxy / n - sx * sy / n / n;
        let corr = cov / ((sxx / n - (sx / n).powi(2)) * (syy / n - (sy / n).powi(2))).sqrt();
        // Under independence corr * sqrt(n) is roughly standard normal; 2.576 is the 1% two-sided cut.
        assert!(corr.abs() * n.sqrt() < 2.576, "corr = {corr}");
    }

    #[test]
    fn block_states_constant_over_block() {
        let pat = AlohaPolicy::new(Protocol::Block, 0.5, vec![]).unwrap().draw(200, 7, &mut seeded(7)).unwrap();
        for i in 0..200 {
            assert!(pat.node(i).windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn validation() {
        assert!(draw_access_block(1.5, 3, &mut seeded(0)).is_err());
        assert!(draw_access_classical(-0.1, 3, 2, &mut seeded(0)).is_err());
        assert!(draw_access_classical(0.5, 3, 0, &mut seeded(0)).is_err());
        assert!(check_arms(&[0.1, 0.5, 1.0]).is_ok());
        assert!(check_arms(&[0.1, 0.1]).is_err());
        assert!(check_arms(&[0.0, 0.5]).is_err());
        assert!(check_arms(&[0.5, 1.2]).is_err());
    }
}
