//! Average-reward policy iteration for the finite-state model.
//!
//! Every transition row is the channel pmf placed on one level block, so
//! `Θ_d · bias` only depends on the level-wise averages
//! `w_j = Σ_c f(c) bias(j, c)`. Evaluation therefore solves an
//! `(N_b + 1)`-dimensional system in `(gain, w)` and recovers the full bias
//! vector from `bias(s) = p(s) + w[next(s)] - gain`. The dense
//! `(|S| + 1)`-dimensional solve is kept as [`policy_evaluate_dense`].

use nalgebra::{DMatrix, DVector};

use super::{DecisionRule, MdpModel};
use crate::error::{Error, Result};

/// Evaluation systems with a 1-norm condition number above this are
/// treated as singular (multichain rule).
pub const CONDITION_LIMIT: f64 = 1e12;

/// Maximum number of evaluate/improve rounds.
pub const ITERATION_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEvaluation {
    pub gain: f64,
    /// Relative values, `bias[0] = 0`.
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyIterationResult {
    pub gain: f64,
    pub bias: Vec<f64>,
    pub rule: DecisionRule,
    /// Number of policy evaluations performed.
    pub iterations: usize,
    /// Gain of each evaluated rule, in order.
    pub gain_history: Vec<f64>,
}

fn solve_checked(a: DMatrix<f64>, b: DVector<f64>, rule: &DecisionRule) -> Result<DVector<f64>> {
    let singular = |condition: f64| Error::MultichainSuspected {
        condition,
        rule: rule.0.clone(),
    };
    let norm_a = one_norm(&a);
    let lu = a.lu();
    let inv = lu.try_inverse().ok_or_else(|| singular(f64::INFINITY))?;
    let condition = norm_a * one_norm(&inv);
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        return Err(singular(condition));
    }
    Ok(inv * b)
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Level-to-level transition matrix `Q[j][k]` and level-averaged rewards.
fn level_chain(model: &MdpModel, rule: &DecisionRule) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n_b = model.n_levels();
    let n_c = model.n_channels();
    let pmf = model.channel_pmf();
    let mut q = vec![vec![0.0; n_b]; n_b];
    let mut r = vec![0.0; n_b];
    for j in 0..n_b {
        for (c, &f) in pmf.iter().enumerate() {
            let a = model.chosen(rule, j * n_c + c);
            q[j][a.next_level] += f;
            r[j] += f * a.reward;
        }
    }
    (q, r)
}

fn level_averages(model: &MdpModel, bias: &[f64]) -> Vec<f64> {
    let pmf = model.channel_pmf();
    bias.chunks(model.n_channels())
        .map(|block| block.iter().zip(pmf).map(|(b, f)| b * f).sum())
        .collect()
}

/// Solves `gain + bias = p_d + Θ_d bias` with `bias[0] = 0` for a unichain
/// rule.
pub fn policy_evaluate(model: &MdpModel, rule: &DecisionRule) -> Result<PolicyEvaluation> {
    model.check_rule(rule)?;
    let n_b = model.n_levels();
    let (q, r) = level_chain(model, rule);

    // unknowns: [gain, w_0 .. w_{n_b - 1}]
    let dim = n_b + 1;
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let mut b = DVector::<f64>::zeros(dim);
    for j in 0..n_b {
        a[(j, 0)] = 1.0;
        a[(j, 1 + j)] += 1.0;
        for k in 0..n_b {
            a[(j, 1 + k)] -= q[j][k];
        }
        b[j] = r[j];
    }
    let first = model.chosen(rule, 0);
    a[(n_b, 0)] = -1.0;
    a[(n_b, 1 + first.next_level)] += 1.0;
    b[n_b] = -first.reward;

    let x = solve_checked(a, b, rule)?;
    let gain = x[0];
    let mut bias: Vec<f64> = (0..model.n_states())
        .map(|s| {
            let act = model.chosen(rule, s);
            act.reward + x[1 + act.next_level] - gain
        })
        .collect();
    bias[0] = 0.0;
    Ok(PolicyEvaluation { gain, bias })
}

/// Same equations as [`policy_evaluate`], solved over the full state space.
/// Cubic in the number of states; intended for small models and
/// cross-checks.
pub fn policy_evaluate_dense(model: &MdpModel, rule: &DecisionRule) -> Result<PolicyEvaluation> {
    model.check_rule(rule)?;
    let n = model.n_states();
    let n_c = model.n_channels();
    let pmf = model.channel_pmf();
    // unknowns: [gain, bias_0 .. bias_{n-1}]
    let mut a = DMatrix::<f64>::zeros(n + 1, n + 1);
    let mut b = DVector::<f64>::zeros(n + 1);
    for s in 0..n {
        let act = model.chosen(rule, s);
        a[(s, 0)] = 1.0;
        a[(s, 1 + s)] += 1.0;
        for (c, &f) in pmf.iter().enumerate() {
            a[(s, 1 + act.next_level * n_c + c)] -= f;
        }
        b[s] = act.reward;
    }
    a[(n, 1)] = 1.0;
    let x = solve_checked(a, b, rule)?;
    Ok(PolicyEvaluation {
        gain: x[0],
        bias: x.iter().skip(1).copied().collect(),
    })
}

/// Max-norm residual of the evaluation equations.
pub fn evaluation_residual(model: &MdpModel, rule: &DecisionRule, eval: &PolicyEvaluation) -> f64 {
    let w = level_averages(model, &eval.bias);
    (0..model.n_states())
        .map(|s| {
            let act = model.chosen(rule, s);
            (eval.gain + eval.bias[s] - act.reward - w[act.next_level]).abs()
        })
        .fold(0.0, f64::max)
}

/// Greedy improvement against `bias`. The incumbent action is kept when it
/// ties the maximum; other ties go to the lowest action index.
pub fn policy_improve(model: &MdpModel, incumbent: &DecisionRule, eval: &PolicyEvaluation) -> DecisionRule {
    let w = level_averages(model, &eval.bias);
    let rule = (0..model.n_states())
        .map(|s| {
            let acts = model.actions(s);
            let values: Vec<f64> = acts.iter().map(|a| a.reward + w[a.next_level]).collect();
            let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let tol = 1e-12 * (1.0 + best.abs());
            let current = incumbent[s];
            if values[current] >= best - tol {
                current
            } else {
                values.iter().position(|&v| v >= best - tol).expect("maximum is attained")
            }
        })
        .collect();
    DecisionRule(rule)
}

/// Alternates evaluation and improvement until the rule is unchanged.
pub fn policy_iteration(model: &MdpModel, initial: &DecisionRule) -> Result<PolicyIterationResult> {
    model.check_rule(initial)?;
    let mut rule = initial.clone();
    let mut gain_history = Vec::new();
    for iteration in 1..=ITERATION_CAP {
        let eval = policy_evaluate(model, &rule)?;
        gain_history.push(eval.gain);
        let next = policy_improve(model, &rule, &eval);
        if next == rule {
            return Ok(PolicyIterationResult {
                gain: eval.gain,
                bias: eval.bias,
                rule,
                iterations: iteration,
                gain_history,
            });
        }
        rule = next;
    }
    Err(Error::NonConvergence {
        iterations: ITERATION_CAP,
    })
}

/// Number of closed communicating classes of the level chain.
fn recurrent_classes(q: &[Vec<f64>]) -> usize {
    let n = q.len();
    let mut reach = vec![vec![false; n]; n];
    for (i, row) in reach.iter_mut().enumerate() {
        let mut stack = vec![i];
        row[i] = true;
        while let Some(j) = stack.pop() {
            for k in 0..n {
                if q[j][k] > 0.0 && !row[k] {
                    row[k] = true;
                    stack.push(k);
                }
            }
        }
    }
    let recurrent: Vec<usize> = (0..n).filter(|&i| (0..n).all(|k| !reach[i][k] || reach[k][i])).collect();
    let mut classes = 0;
    let mut seen = vec![false; n];
    for &i in &recurrent {
        if !seen[i] {
            classes += 1;
            for &k in &recurrent {
                if reach[i][k] {
                    seen[k] = true;
                }
            }
        }
    }
    classes
}

/// Upper bound on the long-run average success probability of the original
/// system: the channel-averaged optimal value of the empty-battery states.
///
/// For a unichain optimal rule every state has the same value, so this is
/// the gain; a rule with more than one recurrent class is rejected.
pub fn upper_bound(model: &MdpModel, result: &PolicyIterationResult) -> Result<f64> {
    let (q, _) = level_chain(model, &result.rule);
    if recurrent_classes(&q) != 1 {
        return Err(Error::MultichainSuspected {
            condition: f64::INFINITY,
            rule: result.rule.0.clone(),
        });
    }
    Ok(model.channel_pmf().iter().map(|f| f * result.gain).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::FiniteChannel;
    use crate::mdp::{build_mdp, MdpModel, Rounding};
    use crate::relay::{RelayModel, SystemParams};

    fn tiny(b: f64, ps: f64, n_b: usize) -> MdpModel {
        let p = SystemParams::new(ps, 1e-3, 1.0, 0.5, 1.5, b).unwrap();
        let relay = RelayModel::rayleigh(p, 2).unwrap();
        build_mdp(&relay, n_b).unwrap()
    }

    #[test]
    fn reduced_and_dense_evaluation_agree() {
        let m = tiny(0.5, 1.0, 3);
        for rule in [m.default_rule(), m.greedy_rule()] {
            let fast = policy_evaluate(&m, &rule).unwrap();
            let dense = policy_evaluate_dense(&m, &rule).unwrap();
            assert!((fast.gain - dense.gain).abs() < 1e-12);
            for (x, y) in fast.bias.iter().zip(&dense.bias) {
                assert!((x - y).abs() < 1e-10);
            }
            assert!(evaluation_residual(&m, &rule, &fast) < 1e-12);
        }
    }

    #[test]
    fn iid_chain_gain_is_block_average() {
        // default rule empties the battery: every next level is the same
        let m = tiny(2.0, 1.0, 4);
        let rule = m.default_rule();
        let next = m.chosen(&rule, 0).next_level;
        assert!((0..m.n_states()).all(|s| m.chosen(&rule, s).next_level == next));
        let n_c = m.n_channels();
        let stationary_gain: f64 = (0..n_c)
            .map(|c| m.channel_pmf()[c] * m.chosen(&rule, next * n_c + c).reward)
            .sum();
        let eval = policy_evaluate(&m, &rule).unwrap();
        assert!((eval.gain - stationary_gain).abs() < 1e-12);
    }

    #[test]
    fn constant_reward_gives_zero_bias() {
        // one channel state and saturating harvest: every state sees the same reward
        let p = SystemParams::new(100.0, 1e-3, 1.0, 0.5, 1.5, 1.0).unwrap();
        let h = FiniteChannel::from_table(vec![1.0], vec![1.0]).unwrap();
        let g = FiniteChannel::from_table(vec![0.5, 2.0], vec![0.5, 0.5]).unwrap();
        let relay = RelayModel::new(p, h, g);
        let m = build_mdp(&relay, 3).unwrap();
        let rule = m.default_rule();
        let r = m.rewards(&rule);
        assert!(r.iter().all(|&x| x == r[0]));
        let eval = policy_evaluate(&m, &rule).unwrap();
        assert!((eval.gain - r[0]).abs() < 1e-12);
        assert!(eval.bias.iter().all(|b| b.abs() < 1e-12));
    }

    #[test]
    fn multichain_rule_is_reported() {
        // keep every level where it is: level j targets e_{j-1}, which the
        // injection raises back to e_j; level 0 moves to level 1
        let m = tiny(0.02, 1.0, 3);
        let rule = DecisionRule(
            (0..m.n_states())
                .map(|s| {
                    let lvl = m.state(s).level;
                    let want = lvl.saturating_sub(1);
                    m.actions(s).iter().position(|a| a.ps_ratio == 1.0 && a.target_level == want).unwrap()
                })
                .collect(),
        );
        // levels 1 and 2 are both absorbing
        let err = policy_evaluate(&m, &rule).unwrap_err();
        assert!(matches!(err, Error::MultichainSuspected { .. }));
        assert!(policy_evaluate_dense(&m, &rule).is_err());
    }

    #[test]
    fn zero_bias_improvement_is_myopic() {
        let m = tiny(0.5, 1.0, 3);
        let zero = PolicyEvaluation { gain: 0.0, bias: vec![0.0; m.n_states()] };
        let start = DecisionRule(vec![0; m.n_states()]);
        let improved = policy_improve(&m, &start, &zero);
        for s in 0..m.n_states() {
            let best = m.actions(s).iter().map(|a| a.reward).fold(0.0, f64::max);
            assert_eq!(m.chosen(&improved, s).reward, best);
            // lowest index among the maximizers unless the incumbent ties
            let first = m.actions(s).iter().position(|a| a.reward == best).unwrap();
            if m.actions(s)[0].reward == best {
                assert_eq!(improved[s], 0);
            } else {
                assert_eq!(improved[s], first);
            }
        }
    }

    #[test]
    fn iteration_reaches_a_fixed_point() {
        for (b, ps, n_b) in [(0.5, 1.0, 3), (2.0, 0.5, 5), (0.05, 0.02, 4)] {
            let m = tiny(b, ps, n_b);
            let res = policy_iteration(&m, &m.default_rule()).unwrap();
            let eval = policy_evaluate(&m, &res.rule).unwrap();
            assert_eq!(policy_improve(&m, &res.rule, &eval), res.rule);
            for w in res.gain_history.windows(2) {
                assert!(w[1] >= w[0] - 1e-12);
            }
            assert!((0.0..=1.0).contains(&res.gain));
            let pu = upper_bound(&m, &res).unwrap();
            assert!((pu - res.gain).abs() < 1e-12);
        }
    }

    #[test]
    fn all_zero_rewards_terminate_fast() {
        let p = SystemParams::new(1e-4, 1e-3, 1.0, 0.5, 1.5, 1.0).unwrap();
        let relay = RelayModel::rayleigh(p, 5).unwrap();
        let m = MdpModel::build(&relay, 4, Rounding::ExactUp).unwrap();
        assert!((0..m.n_states()).all(|s| m.actions(s).iter().all(|a| a.reward == 0.0)));
        let res = policy_iteration(&m, &m.default_rule()).unwrap();
        assert_eq!(res.gain, 0.0);
        assert!(res.iterations <= 2);
        assert_eq!(upper_bound(&m, &res).unwrap(), 0.0);
    }

    #[test]
    fn class_counting() {
        assert_eq!(recurrent_classes(&[vec![0.0, 1.0], vec![0.0, 1.0]]), 1);
        assert_eq!(recurrent_classes(&[vec![1.0, 0.0], vec![0.0, 1.0]]), 2);
        assert_eq!(
            recurrent_classes(&[vec![0.0, 0.5, 0.5], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]),
            2
        );
        assert_eq!(recurrent_classes(&[vec![0.0, 1.0], vec![1.0, 0.0]]), 1);
    }
}
