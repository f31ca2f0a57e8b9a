//! Exhaustive search over stationary deterministic rules.
//!
//! Each rule's long-run average reward from the initial distribution
//! (empty battery, channel drawn from the pmf) is obtained by power
//! iteration of the lazy chain `(I + Θ)/2`. Its limit coincides with the
//! Cesàro limit of `Θ` even for periodic or multichain rules, and it
//! converges geometrically. No linear solve is involved.

use super::{DecisionRule, MdpModel};
use crate::error::{Error, Result};

/// Largest number of rules [`oracle_gain_bruteforce`] will enumerate.
pub const ORACLE_RULE_BUDGET: usize = 1_000_000;

const STEP_CAP: usize = 1_000_000;
const STEP_TOLERANCE: f64 = 1e-15;

fn limiting_gain(model: &MdpModel, rule: &DecisionRule) -> f64 {
    let n = model.n_states();
    let n_c = model.n_channels();
    let pmf = model.channel_pmf();
    let next: Vec<usize> = (0..n).map(|s| model.chosen(rule, s).next_level).collect();
    let rewards = model.rewards(rule);

    let mut dist = vec![0.0; n];
    dist[..n_c].copy_from_slice(pmf);
    let mut stepped = vec![0.0; n];
    for _ in 0..STEP_CAP {
        stepped.iter_mut().for_each(|x| *x = 0.0);
        for s in 0..n {
            let mass = dist[s];
            if mass == 0.0 {
                continue;
            }
            let base = next[s] * n_c;
            for (c, f) in pmf.iter().enumerate() {
                stepped[base + c] += mass * f;
            }
        }
        let mut change = 0.0;
        for s in 0..n {
            let lazy = 0.5 * (dist[s] + stepped[s]);
            change += (lazy - dist[s]).abs();
            dist[s] = lazy;
        }
        if change < STEP_TOLERANCE {
            break;
        }
    }
    dist.iter().zip(&rewards).map(|(d, r)| d * r).sum()
}

/// Best long-run average reward over every stationary deterministic rule,
/// starting from an empty battery. Only for tiny models.
pub fn oracle_gain_bruteforce(model: &MdpModel) -> Result<f64> {
    let total = model.rule_count();
    if total > ORACLE_RULE_BUDGET as f64 {
        return Err(Error::EnumerationBudget {
            rules: total,
            budget: ORACLE_RULE_BUDGET,
        });
    }
    let n = model.n_states();
    let radix: Vec<usize> = (0..n).map(|s| model.actions(s).len()).collect();
    let mut rule = DecisionRule(vec![0; n]);
    let mut best = f64::NEG_INFINITY;
    loop {
        best = best.max(limiting_gain(model, &rule));
        // mixed-radix increment
        let mut pos = 0;
        loop {
            if pos == n {
                return Ok(best);
            }
            rule.0[pos] += 1;
            if rule.0[pos] < radix[pos] {
                break;
            }
            rule.0[pos] = 0;
            pos += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::FiniteChannel;
    use crate::mdp::build_mdp;
    use crate::relay::{RelayModel, SystemParams};

    #[test]
    fn unique_rule_model() {
        // undecodable everywhere: every rule earns nothing
        let p = SystemParams::new(1e-6, 1e-3, 1.0, 0.5, 1.5, 1.0).unwrap();
        let relay = RelayModel::rayleigh(p, 2).unwrap();
        let m = build_mdp(&relay, 2).unwrap();
        assert_eq!(m.rule_count(), 4.0);
        assert_eq!(oracle_gain_bruteforce(&m).unwrap(), 0.0);
    }

    #[test]
    fn single_channel_two_levels_picks_best_reward() {
        let p = SystemParams::new(100.0, 1e-3, 1.0, 0.5, 1.5, 1.0).unwrap();
        let h = FiniteChannel::from_table(vec![1.0], vec![1.0]).unwrap();
        let g = FiniteChannel::from_table(vec![0.001, 0.01], vec![0.5, 0.5]).unwrap();
        let relay = RelayModel::new(p, h, g);
        let m = build_mdp(&relay, 2).unwrap();
        // saturated battery every block, so the chain is irrelevant
        let best = (0..m.n_states())
            .flat_map(|s| m.actions(s).iter().map(|a| a.reward))
            .fold(0.0, f64::max);
        assert!((oracle_gain_bruteforce(&m).unwrap() - best).abs() < 1e-12);
    }

    #[test]
    fn budget_is_enforced() {
        let relay = RelayModel::rayleigh(SystemParams::default(), 50).unwrap();
        let m = build_mdp(&relay, 5).unwrap();
        assert!(matches!(oracle_gain_bruteforce(&m), Err(Error::EnumerationBudget { .. })));
    }
}
