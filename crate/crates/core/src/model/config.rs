use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{FogDiscipline, NodeId};
use crate::error::{Error, Result};
use crate::topology::{self, Topology};

const PROB_SUM_TOL: f64 = 1e-12;

/// One invariant violation, with a dotted path to the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Scenario file. Every time is in ms, every rate per ms, sizes in bits and
/// link rates in bits/ms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Seed for graph generation, delay sampling and node assignments.
    #[serde(default = "default_topology_seed")]
    pub topology_seed: u64,
    /// Fields a preset filled with a default because the source table left
    /// them blank.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub defaulted: Vec<String>,
    pub network: NetworkSection,
    pub iot: IotSection,
    pub fog: FogSection,
    pub cloud: CloudSection,
    #[serde(default)]
    pub domain: DomainSection,
    #[serde(default)]
    pub policy: PolicySection,
    #[serde(default)]
    pub sim: SimSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub n_iot: usize,
    pub n_fog: usize,
    pub n_cloud: usize,
    #[serde(default = "default_avg_degree")]
    pub avg_degree: f64,
    #[serde(default = "default_one")]
    pub n_domains: usize,
    /// Uniform range of IoT-fog one-way propagation delays.
    pub iot_fog_delay_ms: [f64; 2],
    pub fog_fog_delay_ms: [f64; 2],
    pub fog_cloud_delay_ms: [f64; 2],
    /// Access link rate of IoT nodes generating Light requests.
    pub light_access_rate: f64,
    /// Access link rate of IoT nodes generating Heavy requests.
    pub heavy_access_rate: f64,
    pub fog_fog_rate: f64,
    pub fog_cloud_rate: f64,
    /// Explicit topology in edge-list format. When set, the node tables and
    /// links come from this file and the generator sections are ignored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IotSection {
    /// Fraction of IoT nodes that generate Light requests; the rest generate
    /// Heavy requests.
    pub b: f64,
    pub gamma_light: f64,
    pub gamma_heavy: f64,
    pub p_iot: f64,
    pub p_fog: f64,
    /// Defaults to `1 - p_iot - p_fog`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_cloud: Option<f64>,
    pub a_light_ms: f64,
    pub a_heavy_ms: f64,
    pub size_light_bits: f64,
    pub size_heavy_bits: f64,
}

impl IotSection {
    pub fn resolved_p_cloud(&self) -> f64 {
        match self.p_cloud {
            Some(p) => p,
            None => {
                let p = 1.0 - self.p_iot - self.p_fog;
                if p.abs() < PROB_SUM_TOL {
                    0.0
                } else {
                    p
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FogSection {
    pub z_light_ms: f64,
    pub z_heavy_ms: f64,
    pub theta_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudSection {
    pub m: usize,
    pub z_light_ms: f64,
    pub z_heavy_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub e_m: u32,
    pub q: f64,
}

impl Default for DomainSection {
    fn default() -> Self {
        Self { e_m: 1, q: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    /// EWMA weight of a new processing-time measurement.
    pub alpha: f64,
    /// Period of waiting-time announcements to fog neighbours.
    pub announce_period_ms: f64,
}

impl Default for PolicySection {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            announce_period_ms: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    /// Fraction of the earliest completions excluded from statistics.
    pub warmup_fraction: f64,
    /// A queue longer than this aborts the run as unstable.
    pub queue_cap: usize,
    #[serde(default)]
    pub discipline: FogDiscipline,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            warmup_fraction: 0.05,
            queue_cap: 1_000_000,
            discipline: FogDiscipline::default(),
        }
    }
}

fn default_topology_seed() -> u64 {
    1
}

fn default_avg_degree() -> f64 {
    3.0
}

fn default_one() -> usize {
    1
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::ConfigParse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config always serializes")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text)?;
        // Relative topology files resolve against the config's directory.
        if let Some(tf) = &cfg.network.topology_file {
            if tf.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.network.topology_file = Some(dir.join(tf));
                }
            }
        }
        Ok(cfg)
    }

    /// Overrides one scalar field given its dotted path, e.g. `domain.q`.
    pub fn set_param(&mut self, path: &str, value: f64) -> Result<()> {
        let mut doc: toml::Table = toml::from_str(&self.to_toml_string())
            .map_err(|e| Error::ConfigParse(e.to_string()))?;
        let (section, key) = path
            .split_once('.')
            .ok_or_else(|| Error::Parameter(format!("parameter path `{path}` must be section.key")))?;
        let table = doc
            .get_mut(section)
            .and_then(|v| v.as_table_mut())
            .ok_or_else(|| Error::Parameter(format!("unknown section `{section}`")))?;
        let new = match table.get(key) {
            Some(toml::Value::Integer(_)) => {
                if value.fract() != 0.0 || value < 0.0 {
                    return Err(Error::Parameter(format!(
                        "`{path}` is an integer field, got {value}"
                    )));
                }
                toml::Value::Integer(value as i64)
            }
            Some(toml::Value::Float(_)) => toml::Value::Float(value),
            // Optional float fields that are currently unset.
            None if path == "iot.p_cloud" => toml::Value::Float(value),
            _ => {
                return Err(Error::Parameter(format!(
                    "`{path}` is not a numeric parameter"
                )))
            }
        };
        table.insert(key.to_string(), new);
        // Changing p_iot or p_fog re-derives an unset p_cloud automatically.
        let text = toml::to_string(&doc).map_err(|e| Error::ConfigParse(e.to_string()))?;
        *self = Self::from_toml_str(&text)?;
        Ok(())
    }
}

fn check_prob(v: &mut Vec<Violation>, path: &str, p: f64) {
    if !(0.0..=1.0).contains(&p) {
        v.push(Violation::new(path, "probability must lie in [0,1]"));
    }
}

fn check_positive(v: &mut Vec<Violation>, path: &str, x: f64) {
    if !(x > 0.0) || !x.is_finite() {
        v.push(Violation::new(path, "must be positive and finite"));
    }
}

fn check_range(v: &mut Vec<Violation>, path: &str, r: [f64; 2]) {
    if !(r[0] >= 0.0 && r[0] <= r[1] && r[1].is_finite()) {
        v.push(Violation::new(path, "delay range must satisfy 0 <= lo <= hi"));
    }
}

fn check_routing(v: &mut Vec<Violation>, path: &str, p_iot: f64, p_fog: f64, p_cloud: f64) {
    check_prob(v, &format!("{path}.p_iot"), p_iot);
    check_prob(v, &format!("{path}.p_fog"), p_fog);
    check_prob(v, &format!("{path}.p_cloud"), p_cloud);
    if ((p_iot + p_fog + p_cloud) - 1.0).abs() > PROB_SUM_TOL {
        v.push(Violation::new(path, "routing probabilities must sum to 1"));
    }
}

fn check_q(v: &mut Vec<Violation>, path: &str, q: f64) {
    if !(q > 0.0 && q < 1.0) {
        v.push(Violation::new(path, "q must lie in open interval (0,1)"));
    }
}

/// Returns every invariant violation of a scenario; empty means valid.
///
/// Field-level checks run first; when they pass, the topology is built
/// (or loaded) and checked as well.
pub fn validate_config(cfg: &ScenarioConfig) -> Vec<Violation> {
    let mut v = Vec::new();
    let n = &cfg.network;

    if n.topology_file.is_none() {
        if n.n_iot == 0 {
            v.push(Violation::new("network.n_iot", "need at least one IoT node"));
        }
        if n.n_cloud == 0 {
            v.push(Violation::new("network.n_cloud", "need at least one cloud server"));
        }
        if n.n_fog > 0 {
            if n.n_domains == 0 || n.n_domains > n.n_fog {
                v.push(Violation::new(
                    "network.n_domains",
                    "must be between 1 and the number of fog nodes",
                ));
            } else {
                let smallest = n.n_fog / n.n_domains;
                if smallest >= 2 && !(n.avg_degree >= 1.0 && n.avg_degree < smallest as f64) {
                    v.push(Violation::new(
                        "network.avg_degree",
                        "must satisfy 1 <= avg_degree < fog nodes per domain",
                    ));
                }
                if cfg.domain.e_m >= 1 && smallest < 2 {
                    v.push(Violation::new(
                        "domain.e_m",
                        "offloading needs at least two fog nodes per domain",
                    ));
                }
            }
        }
        check_range(&mut v, "network.iot_fog_delay_ms", n.iot_fog_delay_ms);
        check_range(&mut v, "network.fog_fog_delay_ms", n.fog_fog_delay_ms);
        check_range(&mut v, "network.fog_cloud_delay_ms", n.fog_cloud_delay_ms);
        check_positive(&mut v, "network.light_access_rate", n.light_access_rate);
        check_positive(&mut v, "network.heavy_access_rate", n.heavy_access_rate);
        check_positive(&mut v, "network.fog_fog_rate", n.fog_fog_rate);
        check_positive(&mut v, "network.fog_cloud_rate", n.fog_cloud_rate);

        let iot = &cfg.iot;
        check_prob(&mut v, "iot.b", iot.b);
        if !(iot.gamma_light >= 0.0) || !(iot.gamma_heavy >= 0.0) {
            v.push(Violation::new("iot.gamma", "rates must be nonnegative"));
        }
        check_routing(&mut v, "iot", iot.p_iot, iot.p_fog, iot.resolved_p_cloud());
        check_positive(&mut v, "iot.a_light_ms", iot.a_light_ms);
        check_positive(&mut v, "iot.a_heavy_ms", iot.a_heavy_ms);
        check_positive(&mut v, "iot.size_light_bits", iot.size_light_bits);
        check_positive(&mut v, "iot.size_heavy_bits", iot.size_heavy_bits);
        if n.n_fog == 0 && iot.p_fog > 0.0 {
            v.push(Violation::new("iot.p_fog", "fog layer is empty but p_fog > 0"));
        }

        check_positive(&mut v, "fog.z_light_ms", cfg.fog.z_light_ms);
        check_positive(&mut v, "fog.z_heavy_ms", cfg.fog.z_heavy_ms);
        if !(cfg.fog.theta_ms >= 0.0) {
            v.push(Violation::new("fog.theta_ms", "threshold must be nonnegative"));
        }
        if cfg.cloud.m == 0 {
            v.push(Violation::new("cloud.m", "need at least one processing unit"));
        }
        check_positive(&mut v, "cloud.z_light_ms", cfg.cloud.z_light_ms);
        check_positive(&mut v, "cloud.z_heavy_ms", cfg.cloud.z_heavy_ms);
        check_q(&mut v, "domain.q", cfg.domain.q);
    }

    if !(0.0..=1.0).contains(&cfg.policy.alpha) {
        v.push(Violation::new("policy.alpha", "EWMA weight must lie in [0,1]"));
    }
    check_positive(&mut v, "policy.announce_period_ms", cfg.policy.announce_period_ms);
    if !(0.0..1.0).contains(&cfg.sim.warmup_fraction) {
        v.push(Violation::new("sim.warmup_fraction", "must lie in [0,1)"));
    }
    if cfg.sim.queue_cap == 0 {
        v.push(Violation::new("sim.queue_cap", "must be at least 1"));
    }

    if v.is_empty() {
        match topology::build(cfg) {
            Ok(topo) => v.extend(validate_topology(&topo)),
            Err(e) => v.push(Violation::new("network", e.to_string())),
        }
    }
    v
}

/// Checks the node tables and links of a built topology.
pub fn validate_topology(t: &Topology) -> Vec<Violation> {
    let mut v = Vec::new();
    let n_fog = t.fog.len();
    let n_cloud = t.cloud.len();

    for d in &t.domains {
        check_q(&mut v, &format!("domains[{}].q", d.id), d.q);
    }
    for c in &t.cloud {
        let p = format!("cloud[{}]", c.id);
        if c.m == 0 {
            v.push(Violation::new(format!("{p}.m"), "need at least one processing unit"));
        }
        check_positive(&mut v, &format!("{p}.z_light"), c.z_light);
        check_positive(&mut v, &format!("{p}.z_heavy"), c.z_heavy);
    }
    for f in &t.fog {
        let p = format!("fog[{}]", f.id);
        check_positive(&mut v, &format!("{p}.z_light"), f.z_light);
        check_positive(&mut v, &format!("{p}.z_heavy"), f.z_heavy);
        if !(f.theta >= 0.0) {
            v.push(Violation::new(format!("{p}.theta"), "threshold must be nonnegative"));
        }
        if f.cloud_assoc >= n_cloud {
            v.push(Violation::new(format!("{p}.cloud_assoc"), "no such cloud server"));
        }
        let Some(dom) = t.domains.get(f.domain) else {
            v.push(Violation::new(format!("{p}.domain"), "no such domain"));
            continue;
        };
        if dom.e_m >= 1 && f.neighbors.is_empty() {
            v.push(Violation::new(
                format!("{p}.neighbors"),
                "fog node in a domain with e_m >= 1 needs at least one neighbour",
            ));
        }
        for &nb in &f.neighbors {
            if nb == f.id {
                v.push(Violation::new(format!("{p}.neighbors"), "neighbour list contains self"));
            } else if nb >= n_fog {
                v.push(Violation::new(format!("{p}.neighbors"), format!("no such fog node {nb}")));
            } else {
                if !t.fog[nb].neighbors.contains(&f.id) {
                    v.push(Violation::new(
                        format!("{p}.neighbors"),
                        format!("adjacency with f{nb} is not symmetric"),
                    ));
                }
                if t.fog[nb].domain != f.domain {
                    v.push(Violation::new(
                        format!("{p}.neighbors"),
                        format!("neighbour f{nb} is in another domain"),
                    ));
                }
                if t.link(NodeId::Fog(f.id), NodeId::Fog(nb)).is_none() {
                    v.push(Violation::new(format!("{p}.neighbors"), format!("no link to f{nb}")));
                }
            }
        }
        if f.cloud_assoc < n_cloud && t.link(NodeId::Fog(f.id), NodeId::Cloud(f.cloud_assoc)).is_none() {
            v.push(Violation::new(format!("{p}.cloud_assoc"), "no link to associated cloud"));
        }
    }
    for i in &t.iot {
        let p = format!("iot[{}]", i.id);
        check_prob(&mut v, &format!("{p}.b"), i.b);
        if !(i.gamma_light >= 0.0) || !(i.gamma_heavy >= 0.0) {
            v.push(Violation::new(format!("{p}.gamma"), "rates must be nonnegative"));
        }
        let total = i.gamma_light + i.gamma_heavy;
        if total > 0.0 && (i.b - i.gamma_light / total).abs() > 1e-9 {
            v.push(Violation::new(
                format!("{p}.b"),
                "Light share must equal gamma_light / (gamma_light + gamma_heavy)",
            ));
        }
        check_routing(&mut v, &p, i.p_iot, i.p_fog, i.p_cloud);
        check_positive(&mut v, &format!("{p}.a_light"), i.a_light);
        check_positive(&mut v, &format!("{p}.a_heavy"), i.a_heavy);
        check_positive(&mut v, &format!("{p}.size_light_mean"), i.size_light_mean);
        check_positive(&mut v, &format!("{p}.size_heavy_mean"), i.size_heavy_mean);
        if i.cloud_assoc >= n_cloud {
            v.push(Violation::new(format!("{p}.cloud_assoc"), "no such cloud server"));
        } else if t.link(NodeId::Iot(i.id), NodeId::Cloud(i.cloud_assoc)).is_none() {
            v.push(Violation::new(format!("{p}.cloud_assoc"), "no link to associated cloud"));
        }
        match i.fog_assoc {
            None if n_fog > 0 => {
                v.push(Violation::new(format!("{p}.fog_assoc"), "missing fog association"))
            }
            None if i.p_fog > 0.0 => {
                v.push(Violation::new(format!("{p}.p_fog"), "fog layer is empty but p_fog > 0"))
            }
            None => {}
            Some(j) if j >= n_fog => {
                v.push(Violation::new(format!("{p}.fog_assoc"), "no such fog node"))
            }
            Some(j) => {
                // Any fog node of the domain may end up answering the request,
                // and any of their clouds may as well.
                let dom = t.fog[j].domain;
                for f in t.fog.iter().filter(|f| f.domain == dom) {
                    if t.link(NodeId::Iot(i.id), NodeId::Fog(f.id)).is_none() {
                        v.push(Violation::new(
                            format!("{p}.links"),
                            format!("no response path from f{}", f.id),
                        ));
                    }
                    if f.cloud_assoc < n_cloud
                        && t.link(NodeId::Iot(i.id), NodeId::Cloud(f.cloud_assoc)).is_none()
                    {
                        v.push(Violation::new(
                            format!("{p}.links"),
                            format!("no response path from c{}", f.cloud_assoc),
                        ));
                    }
                }
            }
        }
    }
    for (idx, l) in t.links.iter().enumerate() {
        let p = format!("links[{idx}]");
        if !(l.prop_delay >= 0.0) || !l.prop_delay.is_finite() {
            v.push(Violation::new(format!("{p}.prop_delay"), "must be nonnegative"));
        }
        check_positive(&mut v, &format!("{p}.rate"), l.rate);
        if !t.contains(l.a) || !t.contains(l.b) {
            v.push(Violation::new(p.clone(), "endpoint does not exist"));
        }
    }
    check_positive(&mut v, "backbone_rate", t.backbone_rate);
    v
}

/// Non-fatal findings: fog nodes whose Light service is slower than Heavy.
pub fn config_warnings(t: &Topology) -> Vec<Violation> {
    t.fog
        .iter()
        .filter(|f| f.mu_light() < f.mu_heavy())
        .map(|f| {
            Violation::new(
                format!("fog[{}]", f.id),
                "Light service rate is below Heavy service rate",
            )
        })
        .collect()
}
