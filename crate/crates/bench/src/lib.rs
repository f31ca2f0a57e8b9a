//! Fixtures shared by the benchmarks.

use relaybound_core::{RelayModel, SystemParams};

/// Default physics with the given source power (mW) and battery (µJ),
/// both hops quantized into `n_channel_states` equiprobable states.
pub fn scenario(source_power: f64, battery: f64, n_channel_states: usize) -> RelayModel {
    let params = SystemParams::default()
        .with_source_power(source_power)
        .and_then(|p| p.with_battery_capacity(battery))
        .expect("valid benchmark parameters");
    RelayModel::rayleigh(params, n_channel_states).expect("valid channel size")
}
