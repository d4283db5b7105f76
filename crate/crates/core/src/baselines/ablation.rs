//! Small scenarios in which one resource is the bottleneck, so that the
//! effect of that resource shows up even under a fixed heuristic.

use crate::scenario::ScenarioConfig;

/// Twelve devices and two UAVs with CPU and backhaul to spare: the access
/// subcarriers are the only scarce resource.
pub fn upload_bound(seed: u64, access_subcarriers: usize) -> ScenarioConfig {
    ScenarioConfig {
        seed,
        devices: 12,
        uavs: 2,
        access_subcarriers,
        area_m: 100.0,
        backhaul_bandwidth_hz: Some(1e9),
        uav_cpu_cycles_per_ms: 1e11,
        bs_cpu_cycles_per_ms: 2e11,
        ..ScenarioConfig::default()
    }
}

/// Four UAVs competing for two backhaul subcarriers. Subcarriers are wide
/// enough that two UAVs sharing one can still both forward a task.
pub fn backhaul_congested(seed: u64, uavs_per_backhaul_subcarrier: usize) -> ScenarioConfig {
    ScenarioConfig {
        seed,
        devices: 8,
        uavs: 4,
        backhaul_subcarriers: 2,
        uavs_per_backhaul_subcarrier,
        area_m: 100.0,
        backhaul_bandwidth_hz: Some(1e9),
        ..ScenarioConfig::default()
    }
}

/// A BS that can run barely one whole task per slot, with two UAVs that
/// take half of every task off it.
pub fn cpu_starved(seed: u64, devices: usize) -> ScenarioConfig {
    ScenarioConfig {
        seed,
        devices,
        uavs: 2,
        area_m: 100.0,
        uav_cpu_cycles_per_ms: 2e10,
        bs_cpu_cycles_per_ms: 3.2e10,
        ..ScenarioConfig::default()
    }
}
