//! The five reference parameter settings.
//!
//! Thresholds in the reference table carry no unit; they are read as seconds
//! and stored in ms (0.0002 -> 0.2 ms, 0.2 -> 200 ms). Arrival rates are read
//! as requests/ms. Blank cells are filled with defaults and listed in
//! `ScenarioConfig::defaulted`.

use super::{
    CloudSection, DomainSection, FogSection, IotSection, NetworkSection, PolicySection,
    ScenarioConfig, SimSection,
};

pub const PRESET_NAMES: [&str; 5] = ["setting1", "setting2", "setting3", "setting4", "setting5"];

/// Mean IoT processing times (ms).
pub const IOT_LIGHT_MS: f64 = 30.0;
pub const IOT_HEAVY_MS: f64 = 400.0;
/// Fog speed-up over a Light-generating IoT node.
pub const FOG_TO_IOT_LIGHT: f64 = 3000.0;
/// Fog speed-up over a Heavy-generating IoT node.
pub const FOG_TO_IOT_HEAVY: f64 = 200.0;
pub const CLOUD_TO_FOG: f64 = 100.0;

/// 100 bytes and 80 KB.
pub const SIZE_LIGHT_BITS: f64 = 800.0;
pub const SIZE_HEAVY_BITS: f64 = 655_360.0;

/// Link rates in bits/ms: 250 kbit/s, 54 Mbit/s, 100 Mbit/s, 10 Gbit/s.
pub const RATE_LIGHT_ACCESS: f64 = 250.0;
pub const RATE_HEAVY_ACCESS: f64 = 54_000.0;
pub const RATE_FOG_FOG: f64 = 100_000.0;
pub const RATE_FOG_CLOUD: f64 = 10_000_000.0;

struct Row {
    p_iot: f64,
    p_fog: f64,
    b: f64,
    theta_s: f64,
    e_m: u32,
    gamma_light: f64,
    gamma_heavy: f64,
    q: f64,
    defaulted: &'static [&'static str],
}

fn row(name: &str) -> Option<Row> {
    let r = match name {
        "setting1" => Row {
            p_iot: 0.0,
            p_fog: 1.0,
            b: 0.8,
            theta_s: 0.2,
            e_m: 1,
            gamma_light: 0.1,
            gamma_heavy: 0.25,
            q: 0.5,
            defaulted: &["domain.q"],
        },
        "setting2" => Row {
            p_iot: 0.0,
            p_fog: 0.85,
            b: 0.5,
            theta_s: 0.0002,
            e_m: 1,
            gamma_light: 0.5,
            gamma_heavy: 0.6,
            q: 0.5,
            defaulted: &["domain.e_m"],
        },
        "setting3" => Row {
            p_iot: 0.1,
            p_fog: 0.75,
            b: 0.5,
            theta_s: 0.2,
            e_m: 1,
            gamma_light: 0.05,
            gamma_heavy: 0.005,
            q: 0.5,
            defaulted: &["iot.b"],
        },
        "setting4" => Row {
            p_iot: 0.2,
            p_fog: 0.8,
            b: 0.9,
            theta_s: 0.0002,
            e_m: 1,
            gamma_light: 0.01,
            gamma_heavy: 0.001,
            q: 0.5,
            defaulted: &["iot.p_iot", "iot.p_fog"],
        },
        "setting5" => Row {
            p_iot: 0.0,
            p_fog: 0.75,
            b: 0.02,
            theta_s: 0.0002,
            e_m: 1,
            gamma_light: 0.1,
            gamma_heavy: 0.05,
            q: 0.5,
            defaulted: &[],
        },
        _ => return None,
    };
    Some(r)
}

/// Full-scale preset (500 IoT, 25 fog, 6 cloud servers) by name.
pub fn preset(name: &str) -> Option<ScenarioConfig> {
    let r = row(name)?;
    Some(ScenarioConfig {
        name: name.to_string(),
        topology_seed: 1,
        defaulted: r.defaulted.iter().map(|s| s.to_string()).collect(),
        network: NetworkSection {
            n_iot: 500,
            n_fog: 25,
            n_cloud: 6,
            avg_degree: 3.0,
            n_domains: 1,
            iot_fog_delay_ms: [1.0, 2.0],
            fog_fog_delay_ms: [0.5, 1.2],
            fog_cloud_delay_ms: [15.0, 35.0],
            light_access_rate: RATE_LIGHT_ACCESS,
            heavy_access_rate: RATE_HEAVY_ACCESS,
            fog_fog_rate: RATE_FOG_FOG,
            fog_cloud_rate: RATE_FOG_CLOUD,
            topology_file: None,
        },
        iot: IotSection {
            b: r.b,
            gamma_light: r.gamma_light,
            gamma_heavy: r.gamma_heavy,
            p_iot: r.p_iot,
            p_fog: r.p_fog,
            p_cloud: None,
            a_light_ms: IOT_LIGHT_MS,
            a_heavy_ms: IOT_HEAVY_MS,
            size_light_bits: SIZE_LIGHT_BITS,
            size_heavy_bits: SIZE_HEAVY_BITS,
        },
        fog: FogSection {
            z_light_ms: IOT_LIGHT_MS / FOG_TO_IOT_LIGHT,
            z_heavy_ms: IOT_HEAVY_MS / FOG_TO_IOT_HEAVY,
            theta_ms: r.theta_s * 1000.0,
        },
        cloud: CloudSection {
            m: 4,
            z_light_ms: IOT_LIGHT_MS / FOG_TO_IOT_LIGHT / CLOUD_TO_FOG,
            z_heavy_ms: IOT_HEAVY_MS / FOG_TO_IOT_HEAVY / CLOUD_TO_FOG,
        },
        domain: DomainSection { e_m: r.e_m, q: r.q },
        policy: PolicySection::default(),
        sim: SimSection::default(),
    })
}
