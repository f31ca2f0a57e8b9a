//! Seeded block-by-block simulation of the relay.
//!
//! [`simulate_original`] runs the continuous-energy system with true
//! Bernoulli success outcomes. [`simulate_discrete`] runs the finite-state
//! chain and accrues the per-block success probability instead, which
//! estimates the same long-run average with less variance.

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

use crate::channel::FiniteChannel;
use crate::error::{Error, Result};
use crate::mdp::{DecisionRule, MdpModel};
use crate::relay::{harvest_energy, lambda_max, snr_rd, Action, RelayModel, State};

/// Generator used by every simulation, recorded in [`SimulationResult`].
pub const GENERATOR: &str = "pcg64 (rand_pcg Lcg128Xsl64, period 2^128)";

const BATCHES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    pub blocks: u64,
    pub seed: u64,
    /// Battery energy at the first block, µJ.
    pub initial_energy: f64,
    /// Keep the per-block outcome in [`SimulationResult::trace`].
    pub keep_trace: bool,
}

impl SimulationConfig {
    pub fn new(blocks: u64, seed: u64) -> Self {
        Self {
            blocks,
            seed,
            initial_energy: 0.0,
            keep_trace: false,
        }
    }

    fn validate(&self, capacity: f64) -> Result<()> {
        if self.blocks == 0 {
            return Err(Error::InvalidArgument("blocks must be at least 1".into()));
        }
        if !(0.0..=capacity).contains(&self.initial_energy) {
            return Err(Error::InvalidArgument(format!(
                "initial energy {} outside [0, {capacity}]",
                self.initial_energy
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub mean: f64,
    pub stderr: f64,
    pub blocks: u64,
    pub seed: u64,
    pub generator: &'static str,
    pub trace: Option<Vec<f64>>,
}

impl SimulationResult {
    pub const CSV_HEADER: [&'static str; 4] = ["seed", "M", "mean", "stderr"];

    pub fn csv_record(&self) -> [String; 4] {
        [
            self.seed.to_string(),
            self.blocks.to_string(),
            format!("{:e}", self.mean),
            format!("{:e}", self.stderr),
        ]
    }
}

/// Writes results as CSV rows `seed,M,mean,stderr`.
pub fn write_csv<W: std::io::Write>(results: &[SimulationResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SimulationResult::CSV_HEADER)?;
    for r in results {
        w.write_record(r.csv_record())?;
    }
    w.flush()?;
    Ok(())
}

/// Inverse-CDF sampler over a channel's states.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    cdf: Vec<f64>,
}

impl ChannelSampler {
    pub fn new(channel: &FiniteChannel) -> Self {
        let cdf = channel
            .pmf()
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        Self { cdf }
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

/// Draws one channel index.
pub fn sample_channel<R: Rng + ?Sized>(channel: &FiniteChannel, rng: &mut R) -> usize {
    ChannelSampler::new(channel).sample(rng)
}

/// A stationary decision rule on the continuous state space.
pub trait Policy {
    fn decide(&self, relay: &RelayModel, state: &State) -> Action;
}

impl<F> Policy for F
where
    F: Fn(&RelayModel, &State) -> Action,
{
    fn decide(&self, relay: &RelayModel, state: &State) -> Action {
        self(relay, state)
    }
}

/// The battery-depleting heuristic of [`RelayModel::heuristic_rule`].
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicPolicy;

impl Policy for HeuristicPolicy {
    fn decide(&self, relay: &RelayModel, state: &State) -> Action {
        relay.heuristic_rule(state)
    }
}

fn bernoulli_stderr(mean: f64, n: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    (mean * (1.0 - mean) / (n - 1) as f64).sqrt()
}

// Batch-means standard error; falls back to the i.i.d. formula for short runs.
fn batch_stderr(values: &[f64], total: f64) -> f64 {
    let n = values.len();
    let mean = total / n as f64;
    if n < 2 * BATCHES {
        if n < 2 {
            return 0.0;
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        return (var / n as f64).sqrt();
    }
    let size = n / BATCHES;
    let means: Vec<f64> = values
        .chunks_exact(size)
        .take(BATCHES)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let m = means.iter().sum::<f64>() / BATCHES as f64;
    let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    (var / BATCHES as f64).sqrt()
}

/// Simulates the continuous-energy system under `policy`.
///
/// Each block draws `h` and `g` independently, asks the policy for an
/// action, checks it against the battery, and counts a success when the
/// relay decodes (`λ ≤ λ_max(h)`) and the destination SNR reaches the
/// threshold.
pub fn simulate_original<P: Policy + ?Sized>(
    relay: &RelayModel,
    policy: &P,
    config: &SimulationConfig,
) -> Result<SimulationResult> {
    let params = &relay.params;
    config.validate(params.battery_capacity())?;
    let h_sampler = ChannelSampler::new(&relay.h_channel);
    let g_sampler = ChannelSampler::new(&relay.g_channel);
    let mut rng = Pcg64::seed_from_u64(config.seed);
    let mut trace = config.keep_trace.then(|| Vec::with_capacity(config.blocks as usize));

    let mut energy = config.initial_energy;
    let mut successes: u64 = 0;
    for block in 1..=config.blocks {
        let hi = h_sampler.sample(&mut rng);
        let gi = g_sampler.sample(&mut rng);
        let h = relay.h_channel.gain(hi);
        let g = relay.g_channel.gain(gi);
        let state = State {
            energy,
            channel_index: hi,
        };
        let action = policy.decide(relay, &state);
        let violation = |reason: String| Error::PolicyViolation {
            block,
            energy,
            channel_index: hi,
            reason,
        };
        let available = harvest_energy(energy, h, action.ps_ratio, params).map_err(|e| violation(e.to_string()))?;
        let u = action.transmit_energy;
        if !(u >= 0.0 && u <= available) {
            return Err(violation(format!("transmit energy {u} with {available} available")));
        }
        let decoded = lambda_max(h, params).is_some_and(|lm| action.ps_ratio <= lm);
        let delivered = snr_rd(g, u, params).map_err(|e| violation(e.to_string()))? >= params.threshold_snr();
        let success = decoded && delivered;
        successes += u64::from(success);
        if let Some(t) = trace.as_mut() {
            t.push(if success { 1.0 } else { 0.0 });
        }
        energy = available - u;
        debug_assert!((0.0..=params.battery_capacity()).contains(&energy));
    }

    let mean = successes as f64 / config.blocks as f64;
    Ok(SimulationResult {
        mean,
        stderr: bernoulli_stderr(mean, config.blocks),
        blocks: config.blocks,
        seed: config.seed,
        generator: GENERATOR,
        trace,
    })
}

/// Simulates the finite-state chain under `rule`, accruing the expected
/// reward of each visited state.
///
/// The chain starts on the lowest grid level at or above the configured
/// initial energy. The standard error uses batch means since consecutive
/// blocks are correlated through the battery.
pub fn simulate_discrete(model: &MdpModel, rule: &DecisionRule, config: &SimulationConfig) -> Result<SimulationResult> {
    model.check_rule(rule)?;
    config.validate(model.grid().capacity())?;
    let sampler = ChannelSampler::new(&model.relay().h_channel);
    let mut rng = Pcg64::seed_from_u64(config.seed);
    let n_c = model.n_channels();

    let mut level = model.grid().levels().partition_point(|&e| e < config.initial_energy);
    let mut rewards = Vec::with_capacity(config.blocks as usize);
    let mut total = 0.0;
    for _ in 0..config.blocks {
        let c = sampler.sample(&mut rng);
        let act = model.chosen(rule, level * n_c + c);
        total += act.reward;
        rewards.push(act.reward);
        level = act.next_level;
    }
    let stderr = batch_stderr(&rewards, total);
    Ok(SimulationResult {
        mean: total / config.blocks as f64,
        stderr,
        blocks: config.blocks,
        seed: config.seed,
        generator: GENERATOR,
        trace: config.keep_trace.then_some(rewards),
    })
}
