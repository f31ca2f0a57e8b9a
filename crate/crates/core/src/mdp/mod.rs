//! Finite-state relaxation of the relay system.
//!
//! The battery is restricted to `N_b` uniformly spaced levels. After each
//! block a hypothetical source tops the residual energy up to the next grid
//! level, which can only help the relay, so the optimal average reward of
//! the resulting MDP bounds the original system from above. Per state only
//! the actions with `λ ∈ {1, λ_max(h)}` and a residual exactly on the grid
//! need to be considered.

mod oracle;
mod solve;

pub use oracle::{oracle_gain_bruteforce, ORACLE_RULE_BUDGET};
pub use solve::{
    evaluation_residual, policy_evaluate, policy_evaluate_dense, policy_improve, policy_iteration, upper_bound,
    PolicyEvaluation, PolicyIterationResult, CONDITION_LIMIT, ITERATION_CAP,
};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::relay::{harvest_unchecked, lambda_max, Action, RelayModel, State, StateClass};

/// How a residual energy lying exactly on a grid level is injected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Rounding {
    /// Half-open intervals `[e_i, e_{i+1})` map to `e_{i+1}`: an exact hit
    /// on `e_i` (other than `B`) is still raised to `e_{i+1}`.
    #[default]
    ExactUp,
    /// Exact hits stay on their level. Only meant for sensitivity checks;
    /// the grid-target action set is not sufficient under this rule.
    ExactStay,
}

/// Uniform battery levels `e_i = i B / (N_b - 1)`, `i = 0..N_b` (0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryGrid {
    levels: Vec<f64>,
}

impl BatteryGrid {
    pub fn new(n_levels: usize, capacity: f64) -> Result<Self> {
        if n_levels < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 battery levels, got {n_levels}")));
        }
        if !(capacity.is_finite() && capacity > 0.0) {
            return Err(Error::InvalidArgument(format!("battery capacity must be positive, got {capacity}")));
        }
        let steps = (n_levels - 1) as f64;
        let mut levels: Vec<f64> = (0..n_levels).map(|i| capacity * i as f64 / steps).collect();
        levels[n_levels - 1] = capacity;
        Ok(Self { levels })
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn level(&self, i: usize) -> f64 {
        self.levels[i]
    }

    pub fn capacity(&self) -> f64 {
        *self.levels.last().unwrap()
    }

    /// Level (0-based) the injection source raises a residual energy to.
    pub fn round_up_level(&self, energy: f64, rounding: Rounding) -> Result<usize> {
        let top = self.levels.len() - 1;
        if !(0.0..=self.capacity()).contains(&energy) {
            return Err(Error::Domain(format!(
                "residual energy {energy} outside [0, {}]",
                self.capacity()
            )));
        }
        if energy >= self.capacity() {
            return Ok(top);
        }
        let idx = match rounding {
            Rounding::ExactUp => self.levels.partition_point(|&e| e <= energy),
            Rounding::ExactStay => self.levels.partition_point(|&e| e < energy),
        };
        Ok(idx.min(top))
    }
}

/// State of the finite system: battery level and S-R channel index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DiscreteState {
    pub level: usize,
    pub channel: usize,
}

/// One element of the reduced action set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteAction {
    pub ps_ratio: f64,
    pub transmit_energy: f64,
    /// Grid level the residual energy lands on before injection.
    pub target_level: usize,
    /// Level after injection; selects the column block of the transition row.
    pub next_level: usize,
    pub reward: f64,
}

impl DiscreteAction {
    pub fn action(&self) -> Action {
        Action {
            ps_ratio: self.ps_ratio,
            transmit_energy: self.transmit_energy,
        }
    }
}

/// Stationary deterministic decision rule: one action index per state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DecisionRule(pub Vec<usize>);

impl DecisionRule {
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Index<usize> for DecisionRule {
    type Output = usize;
    fn index(&self, i: usize) -> &usize {
        &self.0[i]
    }
}

/// Reduced action set of a discrete state: `λ = 1` for every reachable grid
/// target, plus `λ = λ_max(h)` targets when the state is in C2.
///
/// The first action is always `λ = 1` with the battery emptied.
pub fn enumerate_actions(
    relay: &RelayModel,
    grid: &BatteryGrid,
    rounding: Rounding,
    state: DiscreteState,
) -> Vec<DiscreteAction> {
    let params = &relay.params;
    let energy = grid.level(state.level);
    let h = relay.h_channel.gain(state.channel);
    let continuous = State {
        energy,
        channel_index: state.channel,
    };

    let mut ratios = vec![1.0];
    if relay.classify(&continuous) == StateClass::C2 {
        ratios.push(lambda_max(h, params).expect("C2 states are decodable"));
    }

    let mut out: Vec<DiscreteAction> = Vec::new();
    for ps_ratio in ratios {
        let available = harvest_unchecked(energy, h, ps_ratio, params);
        for (t, &e_t) in grid.levels().iter().enumerate() {
            if e_t > available {
                break;
            }
            if out.iter().any(|a| a.ps_ratio == ps_ratio && a.target_level == t) {
                continue;
            }
            let action = Action {
                ps_ratio,
                transmit_energy: available - e_t,
            };
            out.push(DiscreteAction {
                ps_ratio,
                transmit_energy: action.transmit_energy,
                target_level: t,
                next_level: grid.round_up_level(e_t, rounding).expect("grid levels lie in [0,B]"),
                reward: relay.reward_unchecked(h, &action),
            });
        }
    }
    out
}

/// Finite-state MDP with reduced per-state action lists.
///
/// States are ordered level-major: `(level j, channel i)` has flat index
/// `j * N_c + i`.
#[derive(Debug, Clone)]
pub struct MdpModel {
    relay: RelayModel,
    grid: BatteryGrid,
    rounding: Rounding,
    actions: Vec<Vec<DiscreteAction>>,
}

/// Builds the finite-state model with the default [`Rounding::ExactUp`].
pub fn build_mdp(relay: &RelayModel, n_levels: usize) -> Result<MdpModel> {
    MdpModel::build(relay, n_levels, Rounding::ExactUp)
}

impl MdpModel {
    pub fn build(relay: &RelayModel, n_levels: usize, rounding: Rounding) -> Result<Self> {
        let grid = BatteryGrid::new(n_levels, relay.params.battery_capacity())?;
        let n_c = relay.h_channel.count();
        let actions = (0..n_levels * n_c)
            .into_par_iter()
            .map(|s| {
                let state = DiscreteState {
                    level: s / n_c,
                    channel: s % n_c,
                };
                enumerate_actions(relay, &grid, rounding, state)
            })
            .collect();
        Ok(Self {
            relay: relay.clone(),
            grid,
            rounding,
            actions,
        })
    }

    pub fn relay(&self) -> &RelayModel {
        &self.relay
    }

    pub fn grid(&self) -> &BatteryGrid {
        &self.grid
    }

    pub fn rounding(&self) -> Rounding {
        self.rounding
    }

    pub fn n_states(&self) -> usize {
        self.actions.len()
    }

    pub fn n_channels(&self) -> usize {
        self.relay.h_channel.count()
    }

    pub fn n_levels(&self) -> usize {
        self.grid.n_levels()
    }

    pub fn channel_pmf(&self) -> &[f64] {
        self.relay.h_channel.pmf()
    }

    pub fn state(&self, index: usize) -> DiscreteState {
        let n_c = self.n_channels();
        DiscreteState {
            level: index / n_c,
            channel: index % n_c,
        }
    }

    pub fn index(&self, state: DiscreteState) -> usize {
        state.level * self.n_channels() + state.channel
    }

    pub fn actions(&self, state_index: usize) -> &[DiscreteAction] {
        &self.actions[state_index]
    }

    /// Total number of stationary deterministic rules, as a float since it
    /// overflows quickly.
    pub fn rule_count(&self) -> f64 {
        self.actions.iter().map(|a| a.len() as f64).product()
    }

    pub fn check_rule(&self, rule: &DecisionRule) -> Result<()> {
        if rule.len() != self.n_states() {
            return Err(Error::InvalidArgument(format!(
                "rule has {} entries for {} states",
                rule.len(),
                self.n_states()
            )));
        }
        for (s, &a) in rule.0.iter().enumerate() {
            if a >= self.actions[s].len() {
                return Err(Error::InvalidArgument(format!("action {a} out of range in state {s}")));
            }
        }
        Ok(())
    }

    pub fn chosen(&self, rule: &DecisionRule, state_index: usize) -> &DiscreteAction {
        &self.actions[state_index][rule[state_index]]
    }

    /// Reward vector of a rule.
    pub fn rewards(&self, rule: &DecisionRule) -> Vec<f64> {
        (0..self.n_states()).map(|s| self.chosen(rule, s).reward).collect()
    }

    /// Dense transition row of `state_index` under action `action_index`:
    /// the channel pmf placed in the column block of the injected level.
    pub fn transition_row(&self, state_index: usize, action_index: usize) -> Vec<f64> {
        let n_c = self.n_channels();
        let mut row = vec![0.0; self.n_states()];
        let next = self.actions[state_index][action_index].next_level;
        row[next * n_c..(next + 1) * n_c].copy_from_slice(self.channel_pmf());
        row
    }

    /// Dense transition matrix of a rule, row-major.
    pub fn transition_matrix(&self, rule: &DecisionRule) -> Vec<Vec<f64>> {
        (0..self.n_states()).map(|s| self.transition_row(s, rule[s])).collect()
    }

    /// Starting rule: empty the battery, with `λ = 1` in C1 states and
    /// `λ = λ_max` otherwise.
    pub fn default_rule(&self) -> DecisionRule {
        let rule = (0..self.n_states())
            .map(|s| {
                let acts = &self.actions[s];
                let lambda_branch = acts.iter().position(|a| a.ps_ratio < 1.0 && a.target_level == 0);
                lambda_branch.unwrap_or(0)
            })
            .collect();
        DecisionRule(rule)
    }

    /// Myopic rule picking the highest-reward action per state.
    pub fn greedy_rule(&self) -> DecisionRule {
        DecisionRule(
            self.actions
                .iter()
                .map(|acts| {
                    let mut best = 0;
                    for (i, a) in acts.iter().enumerate() {
                        if a.reward > acts[best].reward {
                            best = i;
                        }
                    }
                    best
                })
                .collect(),
        )
    }
}
