#![allow(dead_code)]

use std::collections::BTreeMap;

use fogsim::analytic::SteadyState;
use fogsim::model::{presets, ScenarioConfig};
use fogsim::topology::{self, Topology};

/// A preset shrunk to 40 IoT nodes, 5 fog nodes and one cloud server.
pub fn desk(name: &str) -> ScenarioConfig {
    let mut c = presets::preset(name).expect("preset exists");
    c.network.n_iot = 40;
    c.network.n_fog = 5;
    c.network.n_cloud = 1;
    c.network.avg_degree = 2.0;
    c
}

/// One IoT node generating Light requests, one fog node, one cloud server.
/// All three routes are used.
pub fn micro() -> ScenarioConfig {
    let mut c = presets::preset("setting3").expect("preset exists");
    c.network.n_iot = 1;
    c.network.n_fog = 1;
    c.network.n_cloud = 1;
    c.iot.b = 1.0;
    c.iot.gamma_light = 0.3;
    c.iot.p_iot = 0.2;
    c.iot.p_fog = 0.5;
    c.fog.z_light_ms = 2.0;
    c.fog.theta_ms = 4.0;
    c.domain.e_m = 0;
    c
}

/// One fog node fed by a Light and a Heavy IoT node, no threshold, so the
/// fog behaves as the bare two-class queue.
pub fn single_fog(gamma: [f64; 2], z: [f64; 2], q: f64) -> ScenarioConfig {
    let mut c = presets::preset("setting3").expect("preset exists");
    c.network.n_iot = 2;
    c.network.n_fog = 1;
    c.network.n_cloud = 1;
    c.iot.b = 0.5;
    c.iot.gamma_light = gamma[0];
    c.iot.gamma_heavy = gamma[1];
    c.iot.p_iot = 0.0;
    c.iot.p_fog = 1.0;
    c.fog.theta_ms = f64::INFINITY;
    c.fog.z_light_ms = z[0];
    c.fog.z_heavy_ms = z[1];
    c.domain.q = q;
    c
}

pub fn build(c: &ScenarioConfig) -> Topology {
    topology::build(c).expect("topology builds")
}

/// Total-variation distance between an empirical occupancy distribution and
/// a truncated steady state. Mass outside either support counts in full.
pub fn tv_distance(empirical: &BTreeMap<(u64, u64), f64>, ss: &SteadyState) -> f64 {
    let mut sum = 0.0;
    let mut matched = 0.0;
    for (&(n, n2), &p) in empirical {
        let (n, n2) = (n as usize, n2 as usize);
        let a = if n <= ss.n_max_light && n2 <= ss.n_max_heavy { ss.get(n, n2) } else { 0.0 };
        sum += (p - a).abs();
        matched += a;
    }
    (sum + (1.0 - matched).max(0.0)) / 2.0
}

/// Spearman rank correlation; ties get their mean rank.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            for &k in &idx[i..=j] {
                r[k] = (i + j) as f64 / 2.0 + 1.0;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}
