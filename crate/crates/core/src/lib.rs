//! Average success probability of a battery-assisted power-splitting
//! decode-and-forward relay.
//!
//! The crate provides
//! - the closed-form success probability of a battery-depleting heuristic
//!   ([`RelayModel::heuristic_average_success`]),
//! - an upper bound on the best achievable long-run success probability,
//!   computed by average-reward policy iteration on a finite-state
//!   relaxation ([`mdp`]),
//! - seeded Monte Carlo simulation of both the original and the relaxed
//!   system ([`montecarlo`]),
//! - parameter sweeps producing plot-ready CSV ([`experiment`]).

pub mod channel;
pub mod error;
pub mod experiment;
pub mod mdp;
pub mod montecarlo;
pub mod relay;

pub use channel::FiniteChannel;
pub use error::{Error, Result};
pub use experiment::{parse_config, report_gains, run_sweep, ExperimentConfig, GainReport, SweepAxis, SweepTable};
pub use mdp::{
    build_mdp, oracle_gain_bruteforce, policy_evaluate, policy_improve, policy_iteration, upper_bound, BatteryGrid,
    DecisionRule, DiscreteAction, DiscreteState, MdpModel, PolicyEvaluation, PolicyIterationResult, Rounding,
};
pub use montecarlo::{simulate_discrete, simulate_original, HeuristicPolicy, Policy, SimulationConfig, SimulationResult};
pub use relay::{Action, RelayModel, State, StateClass, SystemParams};
