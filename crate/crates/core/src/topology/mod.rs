//! Three-layer network: random fog graph, layer associations and link delays.

mod edgelist;

use std::collections::{HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use edgelist::{from_edge_list, read_file, to_edge_list, write_file};

use crate::error::{Error, Result};
use crate::model::{CloudSpec, DomainConfig, FogSpec, IotSpec, Link, NodeId, ScenarioConfig};

/// Independent random streams drawn from one topology seed.
const STREAM_GRAPH: u64 = 1;
const STREAM_DELAYS: u64 = 2;
const STREAM_TYPES: u64 = 3;
const STREAM_CLOUDS: u64 = 4;

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Propagation plus per-bit transmission cost of a path.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PathCost {
    pub prop: f64,
    /// Sum over hops of 1/rate (ms per bit).
    pub inv_rate: f64,
}

impl PathCost {
    pub fn delay(&self, size_bits: f64) -> f64 {
        self.prop + size_bits * self.inv_rate
    }

    pub fn of(path: &[Link]) -> Self {
        path.iter().fold(PathCost::default(), |acc, l| PathCost {
            prop: acc.prop + l.prop_delay,
            inv_rate: acc.inv_rate + 1.0 / l.rate,
        })
    }
}

/// Sum of the transmission delays of `size_bits` over every link of `path`.
/// Propagation is not included.
pub fn transmission_delay(size_bits: f64, path: &[Link]) -> f64 {
    path.iter().map(|l| size_bits / l.rate).sum()
}

/// Round-trip time for a distance, `0.03 * km + 5` ms.
pub fn rtt_ms(distance_km: f64) -> Result<f64> {
    if !(distance_km >= 0.0) {
        return Err(Error::Parameter(format!(
            "distance must be nonnegative, got {distance_km}"
        )));
    }
    Ok(0.03 * distance_km + 5.0)
}

/// One-way propagation delay for a distance, half the round-trip time.
pub fn one_way_ms(distance_km: f64) -> Result<f64> {
    Ok(rtt_ms(distance_km)? / 2.0)
}

fn is_connected(adj: &[Vec<usize>]) -> bool {
    if adj.is_empty() {
        return true;
    }
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &w in &adj[u] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                queue.push_back(w);
            }
        }
    }
    count == adj.len()
}

/// Connected Erdős–Rényi graph over `n_fog` nodes with edge probability
/// `avg_degree / (n_fog - 1)`, resampled until it is connected and its mean
/// degree is within 0.5 of `avg_degree`. Returns sorted adjacency lists.
pub fn generate_fog_graph(n_fog: usize, avg_degree: f64, seed: u64) -> Result<Vec<Vec<usize>>> {
    if n_fog < 2 {
        return Err(Error::Parameter(format!("need at least 2 fog nodes, got {n_fog}")));
    }
    if !(avg_degree >= 1.0 && avg_degree < n_fog as f64) {
        return Err(Error::Parameter(format!(
            "average degree {avg_degree} infeasible for {n_fog} nodes (need 1 <= d < n)"
        )));
    }
    let p = avg_degree / (n_fog - 1) as f64;
    let mut rng = stream_rng(seed, STREAM_GRAPH);
    const MAX_ATTEMPTS: usize = 100_000;
    for _ in 0..MAX_ATTEMPTS {
        let mut adj = vec![Vec::new(); n_fog];
        let mut edges = 0usize;
        for u in 0..n_fog {
            for w in (u + 1)..n_fog {
                if rng.random::<f64>() < p {
                    adj[u].push(w);
                    adj[w].push(u);
                    edges += 1;
                }
            }
        }
        let mean_degree = 2.0 * edges as f64 / n_fog as f64;
        if (mean_degree - avg_degree).abs() <= 0.5 && is_connected(&adj) {
            for a in &mut adj {
                a.sort_unstable();
            }
            return Ok(adj);
        }
    }
    Err(Error::Parameter(format!(
        "no connected graph with mean degree {avg_degree} found for {n_fog} nodes"
    )))
}

/// Maps every IoT node to the fog node with the smallest propagation delay,
/// ties going to the lowest fog index. `delays[i][j]` is the IoT-fog delay.
pub fn associate_iot(delays: &[Vec<f64>]) -> Result<Vec<usize>> {
    delays
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .fold(None, |best: Option<(usize, f64)>, (j, &d)| match best {
                    Some((_, bd)) if bd <= d => best,
                    _ => Some((j, d)),
                })
                .map(|(j, _)| j)
                .ok_or_else(|| Error::Parameter(format!("IoT node {i}: fog layer is empty")))
        })
        .collect()
}

/// Uniform propagation-delay ranges per link class (ms).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayRanges {
    pub iot_fog: [f64; 2],
    pub fog_fog: [f64; 2],
    pub fog_cloud: [f64; 2],
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

/// Resamples the propagation delay of every link from its class range.
/// IoT-cloud links go through the access network, so their delay is an
/// IoT-fog draw plus a fog-cloud draw.
pub fn sample_delays(t: &mut Topology, ranges: &DelayRanges, seed: u64) {
    let mut rng = stream_rng(seed, STREAM_DELAYS);
    for l in &mut t.links {
        l.prop_delay = match (l.a, l.b) {
            (NodeId::Iot(_), NodeId::Fog(_)) | (NodeId::Fog(_), NodeId::Iot(_)) => {
                uniform(&mut rng, ranges.iot_fog)
            }
            (NodeId::Fog(_), NodeId::Fog(_)) => uniform(&mut rng, ranges.fog_fog),
            (NodeId::Fog(_), NodeId::Cloud(_)) | (NodeId::Cloud(_), NodeId::Fog(_)) => {
                uniform(&mut rng, ranges.fog_cloud)
            }
            (NodeId::Iot(_), NodeId::Cloud(_)) | (NodeId::Cloud(_), NodeId::Iot(_)) => {
                let backbone = uniform(&mut rng, ranges.fog_cloud);
                backbone + uniform(&mut rng, ranges.iot_fog)
            }
            _ => l.prop_delay,
        };
    }
}

fn key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Nodes, links and layer mappings of one scenario. Immutable once built.
#[derive(Debug, Clone)]
pub struct Topology {
    pub iot: Vec<IotSpec>,
    pub fog: Vec<FogSpec>,
    pub cloud: Vec<CloudSpec>,
    pub links: Vec<Link>,
    pub domains: Vec<DomainConfig>,
    /// Rate of the backbone hop on IoT-cloud paths (bits/ms).
    pub backbone_rate: f64,
    index: HashMap<(NodeId, NodeId), usize>,
}

impl PartialEq for Topology {
    fn eq(&self, other: &Self) -> bool {
        self.iot == other.iot
            && self.fog == other.fog
            && self.cloud == other.cloud
            && self.links == other.links
            && self.domains == other.domains
            && self.backbone_rate == other.backbone_rate
    }
}

impl Topology {
    /// Assembles a topology. Fog neighbour lists are derived from the
    /// fog-fog links.
    pub fn new(
        iot: Vec<IotSpec>,
        mut fog: Vec<FogSpec>,
        cloud: Vec<CloudSpec>,
        links: Vec<Link>,
        domains: Vec<DomainConfig>,
        backbone_rate: f64,
    ) -> Self {
        let mut index = HashMap::with_capacity(links.len());
        for f in &mut fog {
            f.neighbors.clear();
        }
        for (idx, l) in links.iter().enumerate() {
            index.insert(key(l.a, l.b), idx);
            if let (NodeId::Fog(a), NodeId::Fog(b)) = (l.a, l.b) {
                if a != b && a < fog.len() && b < fog.len() {
                    fog[a].neighbors.push(b);
                    fog[b].neighbors.push(a);
                }
            }
        }
        for f in &mut fog {
            f.neighbors.sort_unstable();
            f.neighbors.dedup();
        }
        Self {
            iot,
            fog,
            cloud,
            links,
            domains,
            backbone_rate,
            index,
        }
    }

    pub fn contains(&self, n: NodeId) -> bool {
        match n {
            NodeId::Iot(i) => i < self.iot.len(),
            NodeId::Fog(j) => j < self.fog.len(),
            NodeId::Cloud(k) => k < self.cloud.len(),
        }
    }

    pub fn link(&self, a: NodeId, b: NodeId) -> Option<&Link> {
        self.index.get(&key(a, b)).map(|&i| &self.links[i])
    }

    /// Links traversed between two nodes. IoT-cloud traffic crosses the
    /// access link and then a backbone hop, which adds no propagation of its
    /// own (the IoT-cloud link delay covers the whole path).
    pub fn path(&self, a: NodeId, b: NodeId) -> Option<Vec<Link>> {
        let l = *self.link(a, b)?;
        match key(a, b) {
            (NodeId::Iot(_), NodeId::Cloud(_)) => Some(vec![
                l,
                Link {
                    a,
                    b,
                    prop_delay: 0.0,
                    rate: self.backbone_rate,
                },
            ]),
            _ => Some(vec![l]),
        }
    }

    pub fn path_cost(&self, a: NodeId, b: NodeId) -> Option<PathCost> {
        self.path(a, b).map(|p| PathCost::of(&p))
    }

    pub fn domain_of_fog(&self, j: usize) -> &DomainConfig {
        &self.domains[self.fog[j].domain]
    }

    /// Round-trip delay between two fog neighbours, fixed at setup.
    pub fn fog_rtt(&self, a: usize, b: usize) -> Option<f64> {
        self.link(NodeId::Fog(a), NodeId::Fog(b)).map(|l| 2.0 * l.prop_delay)
    }

    /// IoT nodes whose fog-bound requests go to `j` first.
    pub fn iot_of_fog(&self, j: usize) -> impl Iterator<Item = &IotSpec> {
        self.iot.iter().filter(move |i| i.fog_assoc == Some(j))
    }

    pub fn mean_fog_degree(&self) -> f64 {
        if self.fog.is_empty() {
            return 0.0;
        }
        self.fog.iter().map(|f| f.degree()).sum::<usize>() as f64 / self.fog.len() as f64
    }
}

/// Builds the topology of a scenario, either from its edge-list file or by
/// generating it from the scenario seed.
pub fn build(cfg: &ScenarioConfig) -> Result<Topology> {
    if let Some(file) = &cfg.network.topology_file {
        return read_file(file);
    }
    let n = &cfg.network;
    let seed = cfg.topology_seed;
    let n_domains = n.n_domains.max(1);

    let domains: Vec<DomainConfig> = (0..n_domains)
        .map(|id| DomainConfig {
            id,
            e_m: cfg.domain.e_m,
            q: cfg.domain.q,
        })
        .collect();

    // Contiguous, near-equal split of fog nodes over domains.
    let mut fog_domain = Vec::with_capacity(n.n_fog);
    let mut links = Vec::new();
    let mut start = 0;
    for d in 0..n_domains {
        let size = n.n_fog / n_domains + usize::from(d < n.n_fog % n_domains);
        if size >= 2 {
            let graph_seed = seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(d as u64 + 1));
            let adj = generate_fog_graph(size, n.avg_degree, graph_seed)?;
            for (u, nbrs) in adj.iter().enumerate() {
                for &w in nbrs.iter().filter(|&&w| w > u) {
                    links.push(Link {
                        a: NodeId::Fog(start + u),
                        b: NodeId::Fog(start + w),
                        prop_delay: 0.0,
                        rate: n.fog_fog_rate,
                    });
                }
            }
        }
        fog_domain.extend(std::iter::repeat_n(d, size));
        start += size;
    }

    let mut type_rng = stream_rng(seed, STREAM_TYPES);
    let n_light = (cfg.iot.b * n.n_iot as f64).round() as usize;
    let mut order: Vec<usize> = (0..n.n_iot).collect();
    order.shuffle(&mut type_rng);
    let mut is_light = vec![false; n.n_iot];
    for &i in order.iter().take(n_light) {
        is_light[i] = true;
    }
    let access_rate = |i: usize| {
        if is_light[i] {
            n.light_access_rate
        } else {
            n.heavy_access_rate
        }
    };

    for i in 0..n.n_iot {
        for j in 0..n.n_fog {
            links.push(Link {
                a: NodeId::Iot(i),
                b: NodeId::Fog(j),
                prop_delay: 0.0,
                rate: access_rate(i),
            });
        }
    }
    for j in 0..n.n_fog {
        for k in 0..n.n_cloud {
            links.push(Link {
                a: NodeId::Fog(j),
                b: NodeId::Cloud(k),
                prop_delay: 0.0,
                rate: n.fog_cloud_rate,
            });
        }
    }
    for i in 0..n.n_iot {
        for k in 0..n.n_cloud {
            links.push(Link {
                a: NodeId::Iot(i),
                b: NodeId::Cloud(k),
                prop_delay: 0.0,
                rate: access_rate(i),
            });
        }
    }

    let mut cloud_rng = stream_rng(seed, STREAM_CLOUDS);
    let fog: Vec<FogSpec> = (0..n.n_fog)
        .map(|j| FogSpec {
            id: j,
            z_light: cfg.fog.z_light_ms,
            z_heavy: cfg.fog.z_heavy_ms,
            theta: cfg.fog.theta_ms,
            domain: fog_domain[j],
            cloud_assoc: cloud_rng.random_range(0..n.n_cloud.max(1)),
            neighbors: Vec::new(),
        })
        .collect();
    let cloud: Vec<CloudSpec> = (0..n.n_cloud)
        .map(|k| CloudSpec {
            id: k,
            m: cfg.cloud.m,
            z_light: cfg.cloud.z_light_ms,
            z_heavy: cfg.cloud.z_heavy_ms,
        })
        .collect();
    let p_cloud = cfg.iot.resolved_p_cloud();
    let iot: Vec<IotSpec> = (0..n.n_iot)
        .map(|i| {
            let light = is_light[i];
            IotSpec {
                id: i,
                gamma_light: if light { cfg.iot.gamma_light } else { 0.0 },
                gamma_heavy: if light { 0.0 } else { cfg.iot.gamma_heavy },
                b: if light { 1.0 } else { 0.0 },
                p_iot: cfg.iot.p_iot,
                p_fog: cfg.iot.p_fog,
                p_cloud,
                a_light: cfg.iot.a_light_ms,
                a_heavy: cfg.iot.a_heavy_ms,
                size_light_mean: cfg.iot.size_light_bits,
                size_heavy_mean: cfg.iot.size_heavy_bits,
                fog_assoc: None,
                cloud_assoc: cloud_rng.random_range(0..n.n_cloud.max(1)),
            }
        })
        .collect();

    let mut topo = Topology::new(iot, fog, cloud, links, domains, n.fog_cloud_rate);
    let ranges = DelayRanges {
        iot_fog: n.iot_fog_delay_ms,
        fog_fog: n.fog_fog_delay_ms,
        fog_cloud: n.fog_cloud_delay_ms,
    };
    sample_delays(&mut topo, &ranges, seed);

    if n.n_fog > 0 {
        let delays: Vec<Vec<f64>> = (0..n.n_iot)
            .map(|i| {
                (0..n.n_fog)
                    .map(|j| topo.link(NodeId::Iot(i), NodeId::Fog(j)).map_or(f64::INFINITY, |l| l.prop_delay))
                    .collect()
            })
            .collect();
        for (i, j) in associate_iot(&delays)?.into_iter().enumerate() {
            topo.iot[i].fog_assoc = Some(j);
        }
    }
    Ok(topo)
}
