//! Physics and reward of the continuous-energy relay system.
//!
//! Units are fixed to milliwatts, milliseconds and microjoules, so
//! `mW * ms = µJ` and none of the expressions below carry conversion factors.

use crate::channel::FiniteChannel;
use crate::error::{Error, Result};

/// Physical constants of one scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    source_power: f64,
    noise_power: f64,
    block_duration: f64,
    efficiency: f64,
    rate: f64,
    battery_capacity: f64,
    threshold_snr: f64,
}

impl SystemParams {
    /// `source_power` and `noise_power` in mW, `block_duration` in ms,
    /// `rate` in bits/s/Hz, `battery_capacity` in µJ.
    pub fn new(
        source_power: f64,
        noise_power: f64,
        block_duration: f64,
        efficiency: f64,
        rate: f64,
        battery_capacity: f64,
    ) -> Result<Self> {
        let positive = [
            ("source_power", source_power),
            ("noise_power", noise_power),
            ("block_duration", block_duration),
            ("rate", rate),
            ("battery_capacity", battery_capacity),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(efficiency > 0.0 && efficiency < 1.0) {
            return Err(Error::InvalidArgument(format!("efficiency must lie in (0,1), got {efficiency}")));
        }
        Ok(Self {
            source_power,
            noise_power,
            block_duration,
            efficiency,
            rate,
            battery_capacity,
            threshold_snr: 4f64.powf(rate) - 1.0,
        })
    }

    pub fn source_power(&self) -> f64 {
        self.source_power
    }
    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }
    pub fn block_duration(&self) -> f64 {
        self.block_duration
    }
    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }
    pub fn rate(&self) -> f64 {
        self.rate
    }
    pub fn battery_capacity(&self) -> f64 {
        self.battery_capacity
    }
    /// Minimum SNR for decoding at the configured rate, `4^rate - 1`.
    pub fn threshold_snr(&self) -> f64 {
        self.threshold_snr
    }

    pub fn with_source_power(self, source_power: f64) -> Result<Self> {
        Self::new(source_power, self.noise_power, self.block_duration, self.efficiency, self.rate, self.battery_capacity)
    }

    pub fn with_battery_capacity(self, battery_capacity: f64) -> Result<Self> {
        Self::new(self.source_power, self.noise_power, self.block_duration, self.efficiency, self.rate, battery_capacity)
    }

    /// Smallest transmit energy that can succeed at all, `T·σ²·γ / g_max`.
    pub fn min_useful_energy(&self, g_max: f64) -> f64 {
        self.block_duration * self.noise_power * self.threshold_snr / g_max
    }
}

impl Default for SystemParams {
    /// T = 1 ms, η = 0.5, σ² = 0.001 mW, τ = 1.5 (γ = 7), P_s = 1 mW, B = 10 µJ.
    fn default() -> Self {
        Self::new(1.0, 1e-3, 1.0, 0.5, 1.5, 10.0).expect("default parameters are valid")
    }
}

/// Relay state at the start of a block: battery energy and S-R channel index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub energy: f64,
    pub channel_index: usize,
}

/// Power-splitting ratio and relay transmit energy for one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    pub ps_ratio: f64,
    pub transmit_energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StateClass {
    /// Every feasible action has zero reward.
    C1,
    /// Some feasible action has positive reward.
    C2,
}

fn check_ratio(ps_ratio: f64) -> Result<()> {
    if (0.0..=1.0).contains(&ps_ratio) {
        Ok(())
    } else {
        Err(Error::Domain(format!("power-splitting ratio {ps_ratio} outside [0,1]")))
    }
}

/// S-R SNR at the information decoder, `(1-λ) h P_s / ((2-λ) σ²)`.
pub fn snr_sr(h: f64, ps_ratio: f64, params: &SystemParams) -> Result<f64> {
    check_ratio(ps_ratio)?;
    if h < 0.0 {
        return Err(Error::Domain(format!("negative gain {h}")));
    }
    Ok((1.0 - ps_ratio) * h * params.source_power / ((2.0 - ps_ratio) * params.noise_power))
}

/// R-D SNR at the destination, `u g / (T σ²)`.
pub fn snr_rd(g: f64, transmit_energy: f64, params: &SystemParams) -> Result<f64> {
    if g < 0.0 || transmit_energy < 0.0 {
        return Err(Error::Domain(format!("negative gain {g} or energy {transmit_energy}")));
    }
    Ok(transmit_energy * g / (params.block_duration * params.noise_power))
}

/// Largest power-splitting ratio that still lets the relay decode, or
/// `None` when `h P_s < 2 σ² γ` and no ratio in `[0,1]` works.
pub fn lambda_max(h: f64, params: &SystemParams) -> Option<f64> {
    let received = h * params.source_power;
    let floor = params.noise_power * params.threshold_snr;
    if received < 2.0 * floor {
        None
    } else {
        Some((received - 2.0 * floor) / (received - floor))
    }
}

pub(crate) fn harvest_unchecked(energy: f64, h: f64, ps_ratio: f64, params: &SystemParams) -> f64 {
    let harvested = params.efficiency * params.source_power * h * ps_ratio * params.block_duration / 2.0;
    (harvested + energy).min(params.battery_capacity)
}

/// Battery energy after the first half-block, `min(η P_s h λ T/2 + E, B)`.
pub fn harvest_energy(energy: f64, h: f64, ps_ratio: f64, params: &SystemParams) -> Result<f64> {
    check_ratio(ps_ratio)?;
    if !(0.0..=params.battery_capacity).contains(&energy) {
        return Err(Error::Domain(format!(
            "battery energy {energy} outside [0, {}]",
            params.battery_capacity
        )));
    }
    Ok(harvest_unchecked(energy, h, ps_ratio, params))
}

/// Energy left for the next block. Infeasible actions are rejected, never
/// clamped.
pub fn residual_energy(energy: f64, h: f64, action: &Action, params: &SystemParams) -> Result<f64> {
    let available = harvest_energy(energy, h, action.ps_ratio, params)?;
    if !(action.transmit_energy >= 0.0 && action.transmit_energy <= available) {
        return Err(Error::Infeasible {
            transmit: action.transmit_energy,
            available,
        });
    }
    Ok(available - action.transmit_energy)
}

/// `Pr(g >= T σ² γ / u)`; zero for `u = 0`.
pub fn rd_success_prob(transmit_energy: f64, g_channel: &FiniteChannel, params: &SystemParams) -> f64 {
    if transmit_energy <= 0.0 {
        return 0.0;
    }
    let threshold = params.block_duration * params.noise_power * params.threshold_snr / transmit_energy;
    g_channel.tail_probability(threshold)
}

/// Relay scenario: parameters plus both channel alphabets.
#[derive(Debug, Clone)]
pub struct RelayModel {
    pub params: SystemParams,
    pub h_channel: FiniteChannel,
    pub g_channel: FiniteChannel,
}

impl RelayModel {
    pub fn new(params: SystemParams, h_channel: FiniteChannel, g_channel: FiniteChannel) -> Self {
        Self {
            params,
            h_channel,
            g_channel,
        }
    }

    /// Both hops quantized with the same equiprobable exponential alphabet.
    pub fn rayleigh(params: SystemParams, n_channel_states: usize) -> Result<Self> {
        let c = FiniteChannel::equiprobable_exponential(n_channel_states)?;
        Ok(Self::new(params, c.clone(), c))
    }

    pub fn validate_state(&self, s: &State) -> Result<()> {
        if !(0.0..=self.params.battery_capacity).contains(&s.energy) {
            return Err(Error::Domain(format!("state energy {} outside [0,B]", s.energy)));
        }
        if s.channel_index >= self.h_channel.count() {
            return Err(Error::Domain(format!("channel index {} out of range", s.channel_index)));
        }
        Ok(())
    }

    pub fn h(&self, s: &State) -> f64 {
        self.h_channel.gain(s.channel_index)
    }

    /// End-to-end success probability of taking `a` in `s`.
    pub fn reward(&self, s: &State, a: &Action) -> Result<f64> {
        self.validate_state(s)?;
        let h = self.h(s);
        residual_energy(s.energy, h, a, &self.params)?;
        Ok(self.reward_unchecked(h, a))
    }

    pub(crate) fn reward_unchecked(&self, h: f64, a: &Action) -> f64 {
        match lambda_max(h, &self.params) {
            Some(lm) if a.ps_ratio <= lm => rd_success_prob(a.transmit_energy, &self.g_channel, &self.params),
            _ => 0.0,
        }
    }

    pub fn classify(&self, s: &State) -> StateClass {
        let h = self.h(s);
        match lambda_max(h, &self.params) {
            None => StateClass::C1,
            Some(lm) => {
                let best = harvest_unchecked(s.energy, h, lm, &self.params);
                if best < self.params.min_useful_energy(self.g_channel.max_gain()) {
                    StateClass::C1
                } else {
                    StateClass::C2
                }
            }
        }
    }

    /// Battery-depleting rule: harvest everything in C1 states, otherwise
    /// split at the largest decodable ratio; spend the whole battery.
    pub fn heuristic_rule(&self, s: &State) -> Action {
        let h = self.h(s);
        let ps_ratio = match self.classify(s) {
            StateClass::C1 => 1.0,
            StateClass::C2 => lambda_max(h, &self.params).expect("C2 states are decodable"),
        };
        Action {
            ps_ratio,
            transmit_energy: harvest_unchecked(s.energy, h, ps_ratio, &self.params),
        }
    }

    /// Closed-form average success probability of the heuristic policy.
    pub fn heuristic_average_success(&self) -> f64 {
        (0..self.h_channel.count())
            .map(|i| {
                let s = State {
                    energy: 0.0,
                    channel_index: i,
                };
                let a = self.heuristic_rule(&s);
                self.h_channel.probability(i) * self.reward_unchecked(self.h(&s), &a)
            })
            .sum()
    }
}
