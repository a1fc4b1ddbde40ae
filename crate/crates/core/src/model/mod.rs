//! Domain types shared by the topology builder, the simulator and the
//! analytical solver.
//!
//! All times are milliseconds, all rates are per millisecond, sizes are bits
//! and link rates are bits per millisecond.

mod config;
pub mod presets;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use config::{
    config_warnings, validate_config, validate_topology, CloudSection, DomainSection, FogSection, IotSection,
    NetworkSection, PolicySection, ScenarioConfig, SimSection, Violation,
};

/// Processing class of a request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RequestType {
    Light,
    Heavy,
}

impl RequestType {
    pub const ALL: [RequestType; 2] = [RequestType::Light, RequestType::Heavy];

    pub fn index(self) -> usize {
        match self {
            RequestType::Light => 0,
            RequestType::Heavy => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RequestType::Light => "light",
            RequestType::Heavy => "heavy",
        }
    }
}

impl fmt::Display for RequestType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RequestType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "light" => Ok(RequestType::Light),
            "heavy" => Ok(RequestType::Heavy),
            _ => Err(format!("unknown request type `{s}` (expected light or heavy)")),
        }
    }
}

/// A node in one of the three layers, addressed by its index within the layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeId {
    Iot(usize),
    Fog(usize),
    Cloud(usize),
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Iot(i) => write!(f, "i{i}"),
            NodeId::Fog(j) => write!(f, "f{j}"),
            NodeId::Cloud(k) => write!(f, "c{k}"),
        }
    }
}

impl FromStr for NodeId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (layer, idx) = s.split_at(s.len().min(1));
        let idx: usize = idx
            .parse()
            .map_err(|_| format!("bad node id `{s}` (expected i<N>, f<N> or c<N>)"))?;
        match layer {
            "i" => Ok(NodeId::Iot(idx)),
            "f" => Ok(NodeId::Fog(idx)),
            "c" => Ok(NodeId::Cloud(idx)),
            _ => Err(format!("bad node id `{s}` (expected i<N>, f<N> or c<N>)")),
        }
    }
}

/// Operation mode of the whole network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolicyMode {
    /// All fog processing: both request types may be sent to the fog layer.
    Afp,
    /// Light fog processing: only Light requests may be sent to the fog layer.
    Lfp,
    /// No fog processing: requests are processed locally or in the cloud.
    Nfp,
}

impl PolicyMode {
    pub const ALL: [PolicyMode; 3] = [PolicyMode::Afp, PolicyMode::Lfp, PolicyMode::Nfp];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyMode::Afp => "afp",
            PolicyMode::Lfp => "lfp",
            PolicyMode::Nfp => "nfp",
        }
    }
}

impl fmt::Display for PolicyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "afp" => Ok(PolicyMode::Afp),
            "lfp" => Ok(PolicyMode::Lfp),
            "nfp" => Ok(PolicyMode::Nfp),
            _ => Err(format!("unknown mode `{s}` (expected afp, lfp or nfp)")),
        }
    }
}

/// How a fog node shares its processor between the two request classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FogDiscipline {
    /// The class of the next job is drawn when the processor frees up; a job
    /// runs to completion.
    #[default]
    NonPreemptive,
    /// The oldest job of each class is served at the same time, light at
    /// speed `light_share` and heavy at the rest of the capacity.
    Share,
}

impl FogDiscipline {
    pub fn as_str(self) -> &'static str {
        match self {
            FogDiscipline::NonPreemptive => "non-preemptive",
            FogDiscipline::Share => "share",
        }
    }
}

impl fmt::Display for FogDiscipline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FogDiscipline {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "non-preemptive" => Ok(FogDiscipline::NonPreemptive),
            "share" => Ok(FogDiscipline::Share),
            _ => Err(format!("unknown discipline `{s}` (expected non-preemptive or share)")),
        }
    }
}

/// Probabilities of processing a request locally, in the fog layer, or in the
/// cloud.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Routing {
    pub p_iot: f64,
    pub p_fog: f64,
    pub p_cloud: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IotSpec {
    pub id: usize,
    /// Light request generation rate (requests/ms).
    pub gamma_light: f64,
    /// Heavy request generation rate (requests/ms).
    pub gamma_heavy: f64,
    /// Probability that a generated request is Light.
    pub b: f64,
    pub p_iot: f64,
    pub p_fog: f64,
    pub p_cloud: f64,
    /// Mean local processing time of a Light request (ms).
    pub a_light: f64,
    /// Mean local processing time of a Heavy request (ms).
    pub a_heavy: f64,
    pub size_light_mean: f64,
    pub size_heavy_mean: f64,
    /// Fog node the IoT node sends its fog-bound requests to. `None` only when
    /// the fog layer is empty.
    pub fog_assoc: Option<usize>,
    pub cloud_assoc: usize,
}

impl IotSpec {
    pub fn gamma(&self, rtype: RequestType) -> f64 {
        match rtype {
            RequestType::Light => self.gamma_light,
            RequestType::Heavy => self.gamma_heavy,
        }
    }

    pub fn local_time(&self, rtype: RequestType) -> f64 {
        match rtype {
            RequestType::Light => self.a_light,
            RequestType::Heavy => self.a_heavy,
        }
    }

    pub fn size_mean(&self, rtype: RequestType) -> f64 {
        match rtype {
            RequestType::Light => self.size_light_mean,
            RequestType::Heavy => self.size_heavy_mean,
        }
    }

    /// Share of this node's requests of the given type.
    pub fn type_share(&self, rtype: RequestType) -> f64 {
        match rtype {
            RequestType::Light => self.b,
            RequestType::Heavy => 1.0 - self.b,
        }
    }

    /// Mean local processing delay over both request types.
    pub fn mean_local_processing(&self) -> f64 {
        self.b * self.a_light + (1.0 - self.b) * self.a_heavy
    }

    /// Routing probabilities after projecting the configured ones onto `mode`.
    pub fn routing(&self, rtype: RequestType, mode: PolicyMode) -> Routing {
        let fog_allowed = match mode {
            PolicyMode::Afp => true,
            PolicyMode::Lfp => rtype == RequestType::Light,
            PolicyMode::Nfp => false,
        };
        if fog_allowed {
            Routing {
                p_iot: self.p_iot,
                p_fog: self.p_fog,
                p_cloud: self.p_cloud,
            }
        } else {
            Routing {
                p_iot: self.p_iot,
                p_fog: 0.0,
                p_cloud: 1.0 - self.p_iot,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FogSpec {
    pub id: usize,
    /// Mean Light processing time (ms).
    pub z_light: f64,
    /// Mean Heavy processing time (ms).
    pub z_heavy: f64,
    /// Admission threshold on the estimated waiting time (ms).
    pub theta: f64,
    pub domain: usize,
    pub cloud_assoc: usize,
    /// Sorted fog neighbours within the same domain.
    pub neighbors: Vec<usize>,
}

impl FogSpec {
    pub fn mu_light(&self) -> f64 {
        1.0 / self.z_light
    }

    pub fn mu_heavy(&self) -> f64 {
        1.0 / self.z_heavy
    }

    pub fn z(&self, rtype: RequestType) -> f64 {
        match rtype {
            RequestType::Light => self.z_light,
            RequestType::Heavy => self.z_heavy,
        }
    }

    pub fn degree(&self) -> usize {
        self.neighbors.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloudSpec {
    pub id: usize,
    /// Number of processing units behind the load balancer.
    pub m: usize,
    /// Mean Light service time per unit (ms).
    pub z_light: f64,
    /// Mean Heavy service time per unit (ms).
    pub z_heavy: f64,
}

impl CloudSpec {
    pub fn z(&self, rtype: RequestType) -> f64 {
        match rtype {
            RequestType::Light => self.z_light,
            RequestType::Heavy => self.z_heavy,
        }
    }

    pub fn u_light(&self) -> f64 {
        1.0 / self.z_light
    }

    pub fn u_heavy(&self) -> f64 {
        1.0 / self.z_heavy
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainConfig {
    pub id: usize,
    /// Maximum number of fog-to-fog offloads of one request.
    pub e_m: u32,
    /// Fairness parameter, in (0, 1).
    pub q: f64,
}

/// Undirected link; delay and rate are the same in both directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    /// One-way propagation delay (ms).
    pub prop_delay: f64,
    /// Transmission rate (bits/ms).
    pub rate: f64,
}

/// Where a request was processed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Route {
    Local,
    Fog,
    Cloud,
}

impl Route {
    pub fn as_str(self) -> &'static str {
        match self {
            Route::Local => "local",
            Route::Fog => "fog",
            Route::Cloud => "cloud",
        }
    }
}

/// A task instance flowing through the network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Request {
    pub id: u64,
    pub rtype: RequestType,
    pub source_iot: usize,
    pub size_bits: f64,
    pub response_bits: f64,
    /// Unit-mean exponential work draw; processing time at a node is
    /// `work` times that node's mean processing time for the type.
    pub work: f64,
    /// Times offloaded between fog nodes.
    pub n_fwd: u32,
    /// Route chosen at the IoT node.
    pub route: Route,
    /// Node that processed the request, once known.
    pub served_by: Option<NodeId>,
    pub created_at: f64,
    pub fog_entry_at: Option<f64>,
    pub service_start_at: Option<f64>,
    pub completed_at: Option<f64>,
}
